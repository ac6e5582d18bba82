//! Diffeomorphisms from the physical domain onto the computational square:
//! a uniform interface plus analytic realizations and FEM harmonic
//! extensions of boundary correspondences.

use crate::dense::Mat2;
use crate::mesh::{barycentric, TriMesh};
use crate::quadrature::MapClass;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Slack allowed when evaluating a map just outside its closed domain;
/// such points are clamped onto the boundary.
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Identity,
    QuarterAnnulus,
    HarmonicFem,
    NeuralOde,
}

impl MapKind {
    pub fn class(&self) -> MapClass {
        match self {
            MapKind::Identity => MapClass::Identity,
            MapKind::QuarterAnnulus | MapKind::HarmonicFem => MapClass::Analytic,
            MapKind::NeuralOde => MapClass::Learned,
        }
    }
}

/// Invertible map T from the physical domain onto (-1,1)^2 with Jacobian
/// and componentwise Laplacian. Implementations are immutable and callable
/// concurrently.
pub trait DomainMap: Send + Sync {
    fn kind(&self) -> MapKind;
    fn forward(&self, x: [f64; 2]) -> Result<[f64; 2]>;
    fn inverse(&self, xhat: [f64; 2]) -> Result<[f64; 2]>;
    fn jacobian(&self, x: [f64; 2]) -> Result<Mat2>;
    fn laplacian(&self, x: [f64; 2]) -> Result<[f64; 2]>;

    /// Physical preimage of `xhat` together with the forward Jacobian J_T
    /// evaluated there. Assembly quadrature lives on the computational
    /// side, so this pairing is the hot path; ODE-backed maps override the
    /// batch form to amortize trajectory integration.
    fn inverse_with_jacobian(&self, xhat: [f64; 2]) -> Result<([f64; 2], Mat2)> {
        let x = self.inverse(xhat)?;
        Ok((x, self.jacobian(x)?))
    }

    fn inverse_with_jacobian_batch(&self, pts: &[[f64; 2]]) -> Result<Vec<([f64; 2], Mat2)>> {
        pts.iter().map(|&p| self.inverse_with_jacobian(p)).collect()
    }

    fn forward_batch(&self, pts: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        pts.iter().map(|&p| self.forward(p)).collect()
    }
}

/// The identity map on (-1,1)^2.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

pub fn identity_map() -> IdentityMap {
    IdentityMap
}

impl DomainMap for IdentityMap {
    fn kind(&self) -> MapKind {
        MapKind::Identity
    }
    fn forward(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok(x)
    }
    fn inverse(&self, xhat: [f64; 2]) -> Result<[f64; 2]> {
        Ok(xhat)
    }
    fn jacobian(&self, _x: [f64; 2]) -> Result<Mat2> {
        Ok(Mat2::IDENTITY)
    }
    fn laplacian(&self, _x: [f64; 2]) -> Result<[f64; 2]> {
        Ok([0.0, 0.0])
    }
}

/// Analytic map of the quarter annulus (theta in [pi/2, pi], radius in
/// [1/2, 1]) onto the square: the radial extent maps to the first
/// coordinate and the angle, through atan2 with range (-pi, pi], to the
/// second.
#[derive(Debug, Clone, Copy)]
pub struct QuarterAnnulusMap {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for QuarterAnnulusMap {
    fn default() -> Self {
        QuarterAnnulusMap { inner_radius: 0.5, outer_radius: 1.0 }
    }
}

pub fn quarter_annulus_map() -> QuarterAnnulusMap {
    QuarterAnnulusMap::default()
}

impl QuarterAnnulusMap {
    fn clamped_polar(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r < self.inner_radius - CLAMP_TOL || r > self.outer_radius + CLAMP_TOL {
            return Err(Error::map(format!(
                "point ({:.6}, {:.6}) has radius {r:.9} outside [{}, {}]",
                x[0], x[1], self.inner_radius, self.outer_radius
            )));
        }
        let r = r.clamp(self.inner_radius, self.outer_radius);
        let mut theta = x[1].atan2(x[0]);
        // the sector edge at theta = pi is approached from below by atan2
        // values near -pi when y dips epsilon-negative
        let angle_tol = CLAMP_TOL / r.max(1e-3);
        if theta < 0.0 {
            if theta <= -PI + angle_tol {
                theta = PI;
            } else {
                return Err(Error::map(format!(
                    "point ({:.6}, {:.6}) at angle {theta:.9} outside sector [pi/2, pi]",
                    x[0], x[1]
                )));
            }
        }
        if theta < PI / 2.0 - angle_tol || theta > PI + angle_tol {
            return Err(Error::map(format!(
                "point ({:.6}, {:.6}) at angle {theta:.9} outside sector [pi/2, pi]",
                x[0], x[1]
            )));
        }
        Ok((r, theta.clamp(PI / 2.0, PI)))
    }
}

impl DomainMap for QuarterAnnulusMap {
    fn kind(&self) -> MapKind {
        MapKind::QuarterAnnulus
    }

    fn forward(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (r, theta) = self.clamped_polar(x)?;
        let xi = 2.0 * (r - self.inner_radius) / (self.outer_radius - self.inner_radius) - 1.0;
        let eta = 4.0 / PI * theta - 3.0;
        Ok([xi, eta])
    }

    fn inverse(&self, xhat: [f64; 2]) -> Result<[f64; 2]> {
        let r = self.inner_radius
            + (xhat[0] + 1.0) / 2.0 * (self.outer_radius - self.inner_radius);
        let theta = PI / 4.0 * (xhat[1] + 3.0);
        Ok([r * theta.cos(), r * theta.sin()])
    }

    fn jacobian(&self, x: [f64; 2]) -> Result<Mat2> {
        let (r, _) = self.clamped_polar(x)?;
        let dr = 2.0 / (self.outer_radius - self.inner_radius);
        let r2 = r * r;
        Ok(Mat2::new(
            dr * x[0] / r,
            dr * x[1] / r,
            -(4.0 / PI) * x[1] / r2,
            (4.0 / PI) * x[0] / r2,
        ))
    }

    fn laplacian(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (r, _) = self.clamped_polar(x)?;
        let dr = 2.0 / (self.outer_radius - self.inner_radius);
        // radius is harmonic up to the 1/r curvature term; the angle is
        // harmonic away from the origin
        Ok([dr / r, 0.0])
    }
}

/// Max-norm deviation between the analytic Jacobian and a centered
/// finite-difference Jacobian of the forward map at `x`.
pub fn jacobian_fd_check(map: &dyn DomainMap, x: [f64; 2], h: f64) -> Result<f64> {
    let j = map.jacobian(x)?;
    let fd = fd_jacobian(map, x, h)?;
    Ok(j.max_abs_diff(&fd))
}

pub(crate) fn fd_jacobian(map: &dyn DomainMap, x: [f64; 2], h: f64) -> Result<Mat2> {
    let px = map.forward([x[0] + h, x[1]])?;
    let mx = map.forward([x[0] - h, x[1]])?;
    let py = map.forward([x[0], x[1] + h])?;
    let my = map.forward([x[0], x[1] - h])?;
    Ok(Mat2::new(
        (px[0] - mx[0]) / (2.0 * h),
        (py[0] - my[0]) / (2.0 * h),
        (px[1] - mx[1]) / (2.0 * h),
        (py[1] - my[1]) / (2.0 * h),
    ))
}

/// Uniform-bin point locator over a triangulation.
#[derive(Debug, Clone)]
struct TriLocator {
    bbox: [f64; 4], // xmin, ymin, xmax, ymax
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl TriLocator {
    fn build(coords: &[[f64; 2]], triangles: &[[usize; 3]]) -> TriLocator {
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in coords {
            bbox[0] = bbox[0].min(p[0]);
            bbox[1] = bbox[1].min(p[1]);
            bbox[2] = bbox[2].max(p[0]);
            bbox[3] = bbox[3].max(p[1]);
        }
        let n = ((triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (n, n);
        let mut bins = vec![Vec::new(); nx * ny];
        let span_x = (bbox[2] - bbox[0]).max(1e-300);
        let span_y = (bbox[3] - bbox[1]).max(1e-300);
        for (t, tri) in triangles.iter().enumerate() {
            let xs = tri.map(|v| coords[v][0]);
            let ys = tri.map(|v| coords[v][1]);
            let to_bin = |x: f64, span: f64, lo: f64, n: usize| -> usize {
                (((x - lo) / span * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize
            };
            let (i0, i1) = (
                to_bin(xs.iter().cloned().fold(f64::INFINITY, f64::min), span_x, bbox[0], nx),
                to_bin(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), span_x, bbox[0], nx),
            );
            let (j0, j1) = (
                to_bin(ys.iter().cloned().fold(f64::INFINITY, f64::min), span_y, bbox[1], ny),
                to_bin(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max), span_y, bbox[1], ny),
            );
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t as u32);
                }
            }
        }
        TriLocator { bbox, nx, ny, bins }
    }

    /// Containing triangle and barycentric coordinates; tolerates points up
    /// to `tol` outside an element (returns the least-violating candidate).
    fn locate(
        &self,
        coords: &[[f64; 2]],
        triangles: &[[usize; 3]],
        p: [f64; 2],
        tol: f64,
    ) -> Option<(usize, [f64; 3])> {
        let span_x = (self.bbox[2] - self.bbox[0]).max(1e-300);
        let span_y = (self.bbox[3] - self.bbox[1]).max(1e-300);
        let bi = (((p[0] - self.bbox[0]) / span_x * self.nx as f64).floor() as isize)
            .clamp(0, self.nx as isize - 1) as usize;
        let bj = (((p[1] - self.bbox[1]) / span_y * self.ny as f64).floor() as isize)
            .clamp(0, self.ny as isize - 1) as usize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // search the point's bin, then its ring of neighbors
        for ring in 0..2 {
            let (lo_i, hi_i) = (bi.saturating_sub(ring), (bi + ring).min(self.nx - 1));
            let (lo_j, hi_j) = (bj.saturating_sub(ring), (bj + ring).min(self.ny - 1));
            for j in lo_j..=hi_j {
                for i in lo_i..=hi_i {
                    for &t in &self.bins[j * self.nx + i] {
                        let t = t as usize;
                        let tri = &triangles[t];
                        let v = [coords[tri[0]], coords[tri[1]], coords[tri[2]]];
                        let l = barycentric(&v, p);
                        let violation = -l[0].min(l[1]).min(l[2]);
                        if violation <= 0.0 {
                            return Some((t, l));
                        }
                        if best.map_or(true, |(_, _, bv)| violation < bv) {
                            best = Some((t, l, violation));
                        }
                    }
                }
            }
            if let Some((t, l, v)) = best {
                if v <= tol {
                    return Some((t, l));
                }
            }
        }
        best.and_then(|(t, l, v)| if v <= tol { Some((t, l)) } else { None })
    }
}

/// Componentwise P1 harmonic extension of a boundary correspondence:
/// solves the discrete Laplace equation for each coordinate of the map.
pub struct HarmonicExtension {
    mesh: TriMesh,
    values: Vec<[f64; 2]>,
    forward_locator: TriLocator,
    inverse_locator: TriLocator,
    locate_tol: f64,
}

impl HarmonicExtension {
    /// `phi` supplies the mapped position of each boundary vertex.
    pub fn new(mesh: TriMesh, phi: impl Fn([f64; 2]) -> [f64; 2]) -> Result<HarmonicExtension> {
        use crate::assembly::assemble_stiffness_all_vertices;
        use crate::quadrature::triangle_rule;
        use crate::sparse::cg;

        let n = mesh.n_vertices();
        let a_full = assemble_stiffness_all_vertices(
            &mesh,
            &crate::assembly::DiffusionCoefficient::identity(),
            &triangle_rule(2),
        )?;
        let interior = mesh.interior_vertices();
        let a_ii = a_full.select(&interior, &interior);

        let mut values = vec![[0.0, 0.0]; n];
        for v in 0..n {
            if mesh.is_boundary(v) {
                values[v] = phi(mesh.vertex(v));
            }
        }
        for comp in 0..2 {
            // rhs = -A_IB * phi_B
            let mut rhs = vec![0.0; interior.len()];
            for (row, &v) in interior.iter().enumerate() {
                let (cols, vals) = a_full.row(v);
                let mut acc = 0.0;
                for (c, a) in cols.iter().zip(vals) {
                    if mesh.is_boundary(*c) {
                        acc -= a * values[*c][comp];
                    }
                }
                rhs[row] = acc;
            }
            let mut sol = vec![0.0; interior.len()];
            let out = cg(&a_ii, &rhs, 1e-13, 10 * interior.len() + 100, &mut sol)
                .map_err(|e| Error::map(format!("harmonic extension solve failed: {e}")))?;
            if !out.converged {
                return Err(Error::map(format!(
                    "harmonic extension CG stalled at residual {:.3e}",
                    out.residual_norm
                )));
            }
            for (row, &v) in interior.iter().enumerate() {
                values[v][comp] = sol[row];
            }
        }

        let forward_locator = TriLocator::build(mesh.vertices(), mesh.triangles());
        let inverse_locator = TriLocator::build(&values, mesh.triangles());
        // tolerance measured in barycentric units: CLAMP_TOL over the
        // smallest element height, conservatively the min sqrt(area)
        let min_h = (0..mesh.n_triangles())
            .map(|t| mesh.triangle_area(t).sqrt())
            .fold(f64::INFINITY, f64::min);
        Ok(HarmonicExtension {
            mesh,
            values,
            forward_locator,
            inverse_locator,
            locate_tol: (CLAMP_TOL / min_h).max(1e-9),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Mapped position of every mesh vertex.
    pub fn nodal_values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// Piecewise-constant Jacobian of the P1 map on triangle `t`.
    pub fn triangle_jacobian(&self, t: usize) -> Mat2 {
        let tri = self.mesh.triangle(t);
        let p = self.mesh.triangle_coords(t);
        // gradients of the P1 basis on this triangle
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grads = [
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
        ];
        let mut j = Mat2::new(0.0, 0.0, 0.0, 0.0);
        for k in 0..3 {
            let v = self.values[tri[k]];
            j.a += v[0] * grads[k][0];
            j.b += v[0] * grads[k][1];
            j.c += v[1] * grads[k][0];
            j.d += v[1] * grads[k][1];
        }
        j
    }

    /// Smallest Jacobian determinant over all triangles.
    pub fn min_jacobian_det(&self) -> f64 {
        (0..self.mesh.n_triangles())
            .map(|t| self.triangle_jacobian(t).det())
            .fold(f64::INFINITY, f64::min)
    }
}

impl DomainMap for HarmonicExtension {
    fn kind(&self) -> MapKind {
        MapKind::HarmonicFem
    }

    fn forward(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (t, l) = self
            .forward_locator
            .locate(self.mesh.vertices(), self.mesh.triangles(), x, self.locate_tol)
            .ok_or_else(|| Error::map(format!("point ({}, {}) outside the mesh", x[0], x[1])))?;
        let tri = self.mesh.triangle(t);
        let mut out = [0.0, 0.0];
        for k in 0..3 {
            out[0] += l[k] * self.values[tri[k]][0];
            out[1] += l[k] * self.values[tri[k]][1];
        }
        Ok(out)
    }

    fn inverse(&self, xhat: [f64; 2]) -> Result<[f64; 2]> {
        let (t, l) = self
            .inverse_locator
            .locate(&self.values, self.mesh.triangles(), xhat, self.locate_tol)
            .ok_or_else(|| {
                Error::map(format!("point ({}, {}) outside the mapped mesh", xhat[0], xhat[1]))
            })?;
        let tri = self.mesh.triangle(t);
        let mut out = [0.0, 0.0];
        for k in 0..3 {
            out[0] += l[k] * self.mesh.vertex(tri[k])[0];
            out[1] += l[k] * self.mesh.vertex(tri[k])[1];
        }
        Ok(out)
    }

    fn jacobian(&self, x: [f64; 2]) -> Result<Mat2> {
        let (t, _) = self
            .forward_locator
            .locate(self.mesh.vertices(), self.mesh.triangles(), x, self.locate_tol)
            .ok_or_else(|| Error::map(format!("point ({}, {}) outside the mesh", x[0], x[1])))?;
        Ok(self.triangle_jacobian(t))
    }

    fn laplacian(&self, _x: [f64; 2]) -> Result<[f64; 2]> {
        // discretely harmonic by construction
        Ok([0.0, 0.0])
    }
}

/// Convenience wrapper matching the construction order used elsewhere.
pub fn harmonic_extension(
    mesh: &TriMesh,
    phi: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<HarmonicExtension> {
    HarmonicExtension::new(mesh.clone(), phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_square_trimesh;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn identity_map_trivial() {
        let m = identity_map();
        assert_eq!(m.forward([0.3, -0.7]).unwrap(), [0.3, -0.7]);
        assert_eq!(m.jacobian([0.1, 0.2]).unwrap(), Mat2::IDENTITY);
        assert_eq!(m.laplacian([0.5, 0.5]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn quarter_annulus_reference_points() {
        let m = quarter_annulus_map();
        let p = m.forward([-1.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        let p = m.forward([0.0, 0.5]).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-12 && (p[1] + 1.0).abs() < 1e-12);
        let c = std::f64::consts::FRAC_1_SQRT_2 * 0.75;
        let p = m.forward([-c, c]).unwrap();
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn quarter_annulus_inverse_points() {
        let m = quarter_annulus_map();
        let p = m.inverse([1.0, 1.0]).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let p = m.inverse([-1.0, -1.0]).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quarter_annulus_roundtrip() {
        let m = quarter_annulus_map();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let r = rng.gen_range(0.5..1.0);
            let th = rng.gen_range(std::f64::consts::FRAC_PI_2..std::f64::consts::PI);
            let x = [r * th.cos(), r * th.sin()];
            let round = m.inverse(m.forward(x).unwrap()).unwrap();
            let err = ((round[0] - x[0]).powi(2) + (round[1] - x[1]).powi(2)).sqrt();
            assert!(err < 1e-12, "round trip error {err}");
        }
    }

    #[test]
    fn quarter_annulus_domain_error() {
        let m = quarter_annulus_map();
        assert!(m.forward([0.2, 0.2]).is_err()); // radius < 1/2
        assert!(m.forward([-1.2, 0.0]).is_err()); // radius > 1
        assert!(m.forward([0.7, -0.1]).is_err()); // wrong sector
        // epsilon outside is clamped, not an error
        assert!(m.forward([-1.0 - 5e-10, 0.0]).is_ok());
    }

    #[test]
    fn quarter_annulus_jacobian_fd() {
        let m = quarter_annulus_map();
        let dev = jacobian_fd_check(&m, [-0.6, 0.3], 1e-5).unwrap();
        assert!(dev < 1e-6, "fd deviation {dev}");
        let dev_id = jacobian_fd_check(&identity_map(), [0.2, 0.1], 1e-5).unwrap();
        assert!(dev_id < 1e-11, "identity fd deviation {dev_id}");
    }

    #[test]
    fn quarter_annulus_laplacian_fd() {
        // five-point stencil Laplacian of each component vs analytic value
        let m = quarter_annulus_map();
        let x = [-0.55, 0.35];
        let h = 1e-4;
        let f0 = m.forward(x).unwrap();
        let mut lap = [0.0, 0.0];
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let f = m.forward([x[0] + dx, x[1] + dy]).unwrap();
            lap[0] += f[0];
            lap[1] += f[1];
        }
        lap[0] = (lap[0] - 4.0 * f0[0]) / (h * h);
        lap[1] = (lap[1] - 4.0 * f0[1]) / (h * h);
        let analytic = m.laplacian(x).unwrap();
        assert!((lap[0] - analytic[0]).abs() < 1e-5, "{lap:?} vs {analytic:?}");
        assert!((lap[1] - analytic[1]).abs() < 1e-5);
    }

    #[test]
    fn harmonic_extension_identity_boundary() {
        let mesh = generate_square_trimesh(6, None).unwrap();
        let ext = harmonic_extension(&mesh, |p| p).unwrap();
        for v in 0..mesh.n_vertices() {
            let got = ext.nodal_values()[v];
            let want = mesh.vertex(v);
            assert!(
                (got[0] - want[0]).abs() < 1e-10 && (got[1] - want[1]).abs() < 1e-10,
                "vertex {v}: {got:?} vs {want:?}"
            );
        }
    }

    #[test]
    fn harmonic_extension_affine_boundary() {
        let mesh = generate_square_trimesh(5, None).unwrap();
        let affine = |p: [f64; 2]| [0.8 * p[0] - 0.3 * p[1] + 0.1, 0.2 * p[0] + 1.1 * p[1] - 0.05];
        let ext = harmonic_extension(&mesh, affine).unwrap();
        for v in 0..mesh.n_vertices() {
            let got = ext.nodal_values()[v];
            let want = affine(mesh.vertex(v));
            assert!(
                (got[0] - want[0]).abs() < 1e-10 && (got[1] - want[1]).abs() < 1e-10,
                "vertex {v}"
            );
        }
    }

    #[test]
    fn harmonic_extension_reproduces_harmonic_polynomials() {
        // x, y, x^2 - y^2 and xy are discretely harmonic on the uniform
        // triangulation: reproduced to round-off
        let mesh = generate_square_trimesh(8, None).unwrap();
        let ext = harmonic_extension(&mesh, |p| [p[0] * p[0] - p[1] * p[1], p[0] * p[1]]).unwrap();
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            let want = [p[0] * p[0] - p[1] * p[1], p[0] * p[1]];
            let got = ext.nodal_values()[v];
            assert!((got[0] - want[0]).abs() < 1e-10 && (got[1] - want[1]).abs() < 1e-10);
        }
        // a non-polynomial harmonic shows the O(h^2) decay
        let errs: Vec<f64> = [8usize, 16]
            .iter()
            .map(|&n| {
                let mesh = generate_square_trimesh(n, None).unwrap();
                let h = |p: [f64; 2]| [p[0].exp() * p[1].cos(), p[0].exp() * p[1].sin()];
                let ext = harmonic_extension(&mesh, h).unwrap();
                let mut worst: f64 = 0.0;
                for v in 0..mesh.n_vertices() {
                    let want = h(mesh.vertex(v));
                    let got = ext.nodal_values()[v];
                    worst = worst.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
                }
                worst
            })
            .collect();
        assert!(errs[1] < errs[0] / 2.5, "no h^2-ish decay: {errs:?}");
    }

    #[test]
    fn harmonic_extension_star_mesh_to_square_positive_det() {
        // harmonic extension onto the convex square stays orientation
        // preserving (the guaranteed direction of the diffeomorphism theorem)
        use crate::mesh::{generate_radial_trimesh, BoundaryCurve, RadialMeshSpec};
        let mesh =
            generate_radial_trimesh(&BoundaryCurve::smooth_star(), &RadialMeshSpec::new(10, 64))
                .unwrap();
        let ext = harmonic_extension(&mesh, |p| {
            let (s, c) = p[1].atan2(p[0]).sin_cos();
            let m = c.abs().max(s.abs());
            [c / m, s / m]
        })
        .unwrap();
        assert!(ext.min_jacobian_det() > 0.0, "min det {}", ext.min_jacobian_det());
        // forward/inverse round trip through the piecewise-affine map
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 50 {
            let x = [rng.gen_range(-0.45..0.45), rng.gen_range(-0.45..0.45)];
            if x[0] * x[0] + x[1] * x[1] > 0.2 {
                continue; // stay well inside the star
            }
            checked += 1;
            let y = ext.forward(x).unwrap();
            let back = ext.inverse(y).unwrap();
            let err = ((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2)).sqrt();
            assert!(err < 1e-9, "round trip error {err}");
        }
    }
}
