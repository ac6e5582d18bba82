//! Pointwise and line relaxation for 9-point stencil operators.

use crate::stencil::{Stencil9, CENTER, OFFSETS};
use crate::{Error, Result};

/// Relaxation scheme; `reverse = true` runs the exact adjoint ordering so
/// V-cycles stay symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    /// Red-black Gauss-Seidel (red = even i+j first).
    RedBlack,
    /// Damped Jacobi with the given weight.
    Jacobi(f64),
    /// Alternating zebra line relaxation: x-lines then y-lines, each in
    /// even/odd half-sweeps with tridiagonal line solves.
    LineXY,
}

pub fn check_diagonal(op: &Stencil9) -> Result<()> {
    let (nxi, nyi) = op.dims();
    for j in 0..nyi {
        for i in 0..nxi {
            if op.coeffs(i, j)[CENTER] == 0.0 {
                return Err(Error::solve(format!("zero stencil diagonal at node ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// One relaxation sweep of the selected scheme.
pub fn relax(op: &Stencil9, u: &mut [f64], f: &[f64], scheme: Smoother, reverse: bool) {
    match scheme {
        Smoother::RedBlack => {
            let colors: [usize; 2] = if reverse { [1, 0] } else { [0, 1] };
            for color in colors {
                gs_color_sweep(op, u, f, color, reverse);
            }
        }
        Smoother::Jacobi(omega) => jacobi_sweep(op, u, f, omega),
        Smoother::LineXY => {
            if reverse {
                for parity in [1usize, 0] {
                    line_sweep_y(op, u, f, parity);
                }
                for parity in [1usize, 0] {
                    line_sweep_x(op, u, f, parity);
                }
            } else {
                for parity in [0usize, 1] {
                    line_sweep_x(op, u, f, parity);
                }
                for parity in [0usize, 1] {
                    line_sweep_y(op, u, f, parity);
                }
            }
        }
    }
}

fn gs_color_sweep(op: &Stencil9, u: &mut [f64], f: &[f64], color: usize, reverse: bool) {
    let (nxi, nyi) = op.dims();
    let mut update = |i: usize, j: usize| {
        if (i + j) % 2 != color {
            return;
        }
        let p = j * nxi + i;
        let st = op.coeffs(i, j);
        let mut acc = f[p];
        for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
            if o == CENTER || st[o] == 0.0 {
                continue;
            }
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if op.in_range(ni, nj) {
                acc -= st[o] * u[nj as usize * nxi + ni as usize];
            }
        }
        u[p] = acc / st[CENTER];
    };
    if reverse {
        for j in (0..nyi).rev() {
            for i in (0..nxi).rev() {
                update(i, j);
            }
        }
    } else {
        for j in 0..nyi {
            for i in 0..nxi {
                update(i, j);
            }
        }
    }
}

fn jacobi_sweep(op: &Stencil9, u: &mut [f64], f: &[f64], omega: f64) {
    let (nxi, nyi) = op.dims();
    let mut unew = u.to_vec();
    for j in 0..nyi {
        for i in 0..nxi {
            let p = j * nxi + i;
            let st = op.coeffs(i, j);
            let mut acc = f[p];
            for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                if o == CENTER || st[o] == 0.0 {
                    continue;
                }
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if op.in_range(ni, nj) {
                    acc -= st[o] * u[nj as usize * nxi + ni as usize];
                }
            }
            unew[p] = (1.0 - omega) * u[p] + omega * acc / st[CENTER];
        }
    }
    u.copy_from_slice(&unew);
}

/// Solve all x-lines (rows) of the given parity simultaneously: per row a
/// tridiagonal system in W-C-E couplings with everything else on the RHS.
fn line_sweep_x(op: &Stencil9, u: &mut [f64], f: &[f64], parity: usize) {
    let (nxi, nyi) = op.dims();
    let mut diag = vec![0.0; nxi];
    let mut lower = vec![0.0; nxi];
    let mut upper = vec![0.0; nxi];
    let mut rhs = vec![0.0; nxi];
    for j in (parity..nyi).step_by(2) {
        for i in 0..nxi {
            let st = op.coeffs(i, j);
            diag[i] = st[CENTER];
            lower[i] = st[1 * 3]; // offset (-1, 0)
            upper[i] = st[1 * 3 + 2]; // offset (1, 0)
            let mut acc = f[j * nxi + i];
            for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                if dj == 0 || st[o] == 0.0 {
                    continue;
                }
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if op.in_range(ni, nj) {
                    acc -= st[o] * u[nj as usize * nxi + ni as usize];
                }
            }
            rhs[i] = acc;
        }
        thomas(&lower, &mut diag, &upper, &mut rhs);
        for i in 0..nxi {
            u[j * nxi + i] = rhs[i];
        }
    }
}

fn line_sweep_y(op: &Stencil9, u: &mut [f64], f: &[f64], parity: usize) {
    let (nxi, nyi) = op.dims();
    let mut diag = vec![0.0; nyi];
    let mut lower = vec![0.0; nyi];
    let mut upper = vec![0.0; nyi];
    let mut rhs = vec![0.0; nyi];
    for i in (parity..nxi).step_by(2) {
        for j in 0..nyi {
            let st = op.coeffs(i, j);
            diag[j] = st[CENTER];
            lower[j] = st[3 * 0 + 1]; // offset (0, -1)
            upper[j] = st[3 * 2 + 1]; // offset (0, 1)
            let mut acc = f[j * nxi + i];
            for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                if di == 0 || st[o] == 0.0 {
                    continue;
                }
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if op.in_range(ni, nj) {
                    acc -= st[o] * u[nj as usize * nxi + ni as usize];
                }
            }
            rhs[j] = acc;
        }
        thomas(&lower, &mut diag, &upper, &mut rhs);
        for j in 0..nyi {
            u[j * nxi + i] = rhs[j];
        }
    }
}

/// In-place Thomas algorithm; `rhs` holds the solution on return.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for k in 1..n {
        let m = lower[k] / diag[k - 1];
        diag[k] -= m * upper[k - 1];
        rhs[k] -= m * rhs[k - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for k in (0..n - 1).rev() {
        rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
    }
}

/// Ratio of collapsed x-coupling to y-coupling, averaged over nodes; the
/// hierarchy switches to line relaxation when this leaves [1/thr, thr].
pub fn anisotropy_ratio(op: &Stencil9) -> f64 {
    let (nxi, nyi) = op.dims();
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..nyi {
        for i in 0..nxi {
            let st = op.coeffs(i, j);
            let cx = (st[0] + st[3] + st[6]).abs().max((st[2] + st[5] + st[8]).abs());
            let cy = (st[0] + st[1] + st[2]).abs().max((st[6] + st[7] + st[8]).abs());
            if cx > 0.0 && cy > 0.0 {
                sum += cx / cy;
                count += 1;
            }
        }
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;
    use crate::stencil::five_point_laplacian;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exact_solution_is_fixed_point() {
        let op = five_point_laplacian(6, 6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = op.apply(&x);
        for scheme in [Smoother::RedBlack, Smoother::Jacobi(0.8), Smoother::LineXY] {
            let mut u = x.clone();
            relax(&op, &mut u, &f, scheme, false);
            let mut r = vec![0.0; 36];
            op.residual(&u, &f, &mut r);
            assert!(norm2(&r) < 1e-12, "{scheme:?} moved an exact solution");
        }
    }

    #[test]
    fn rb_matches_hand_computation_on_line() {
        // 5 unknowns in a row (nyi = 1): tridiag(-1, 4, -1) with f = e_2;
        // red nodes are i = 0, 2, 4, then black i = 1, 3.
        let op = five_point_laplacian(5, 1);
        let f = [0.0, 0.0, 1.0, 0.0, 0.0];
        let mut u = [0.0; 5];
        relax(&op, &mut u, &f, Smoother::RedBlack, false);
        // red pass: u0 = 0, u2 = 1/4, u4 = 0; black: u1 = (0 + u0 + u2)/4,
        // u3 = (0 + u2 + u4)/4
        let expect = [0.0, 1.0 / 16.0, 0.25, 1.0 / 16.0, 0.0];
        for (a, b) in u.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15, "{u:?}");
        }
    }

    #[test]
    fn smoothing_alone_stagnates_on_large_grids() {
        let op = five_point_laplacian(32, 32);
        let n = 32 * 32;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut u = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut norms = Vec::new();
        for _ in 0..50 {
            relax(&op, &mut u, &f, Smoother::RedBlack, false);
            op.residual(&u, &f, &mut r);
            norms.push(norm2(&r));
        }
        // residual drops early but the tail factor crawls toward 1
        assert!(norms[49] < norms[0]);
        let tail = norms[49] / norms[44];
        assert!(tail.powf(0.2) > 0.8, "smoother alone converged too fast: {tail}");
    }

    #[test]
    fn line_solve_matches_dense_on_single_row() {
        let op = five_point_laplacian(7, 1);
        let f: Vec<f64> = (0..7).map(|k| (k as f64).cos()).collect();
        let mut u = vec![0.0; 7];
        relax(&op, &mut u, &f, Smoother::LineXY, false);
        let a = op.to_sparse().to_dense();
        let chol = crate::dense::Cholesky::factor(&a).unwrap();
        let exact = chol.solve(&f);
        for (a, b) in u.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn anisotropy_ratio_detects_direction() {
        use crate::assembly::{assemble_computational_stiffness, DiffusionCoefficient};
        use crate::maps::identity_map;
        use crate::mesh::StructuredGrid;
        use crate::quadrature::square_rule_tensor;
        let grid = StructuredGrid::new(8, 8).unwrap();
        for (dx, dy, expect_large, expect_small) in
            [(100.0, 1.0, true, false), (1.0, 100.0, false, true), (1.0, 1.0, false, false)]
        {
            let op = assemble_computational_stiffness(
                &grid,
                &DiffusionCoefficient::constant(crate::dense::Mat2::diag(dx, dy)),
                &identity_map(),
                &square_rule_tensor(2, 2),
            )
            .unwrap();
            let ratio = anisotropy_ratio(&op);
            if expect_large {
                assert!(ratio > 20.0, "expected strong x ratio, got {ratio}");
            } else if expect_small {
                assert!(ratio < 0.1, "expected strong y ratio, got {ratio}");
            } else {
                assert!((0.5..2.0).contains(&ratio), "isotropic ratio {ratio}");
            }
        }
    }
}
