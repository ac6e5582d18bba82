//! Finite-element assembly: P1 stiffness and mass on the physical
//! triangulation, and the mapped Q1 stiffness on the computational grid
//! with the effective diffusion coefficient.

use crate::dense::Mat2;
use crate::maps::DomainMap;
use crate::mesh::{StructuredGrid, TriMesh};
use crate::quadrature::{CoefficientClass, QuadratureRule};
use crate::sparse::{CooBuilder, SparseMatrix};
use crate::stencil::{offset_index, Stencil9};
use crate::{Error, Result};
use std::sync::Arc;

/// Jacobian determinants below this floor abort assembly: the map is
/// unusable as a diffeomorphism there.
pub const DET_FLOOR: f64 = 1e-12;

/// Symmetric positive-definite diffusion tensor field.
#[derive(Clone)]
pub struct DiffusionCoefficient {
    tag: CoefficientTag,
    eval: Arc<dyn Fn([f64; 2]) -> Mat2 + Send + Sync>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientTag {
    Identity,
    Circular,
    Checkerboard,
    ThinLayer,
    Custom,
}

impl std::fmt::Debug for DiffusionCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DiffusionCoefficient({:?})", self.tag)
    }
}

impl DiffusionCoefficient {
    pub fn identity() -> Self {
        DiffusionCoefficient {
            tag: CoefficientTag::Identity,
            eval: Arc::new(|_| Mat2::IDENTITY),
        }
    }

    /// 100 inside the disk of radius 3/5, 1 outside.
    pub fn circular() -> Self {
        DiffusionCoefficient {
            tag: CoefficientTag::Circular,
            eval: Arc::new(|p| {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                let d = if r < 0.6 { 100.0 } else { 1.0 };
                Mat2::diag(d, d)
            }),
        }
    }

    /// 100 on cells where floor(4x) + floor(4y) is even, 1 elsewhere.
    pub fn checkerboard() -> Self {
        DiffusionCoefficient {
            tag: CoefficientTag::Checkerboard,
            eval: Arc::new(|p| {
                let k = (4.0 * p[0]).floor() as i64 + (4.0 * p[1]).floor() as i64;
                let d = if k.rem_euclid(2) == 0 { 100.0 } else { 1.0 };
                Mat2::diag(d, d)
            }),
        }
    }

    /// 1e-10 on the vertical stripe 0 <= x < eps, 2 elsewhere.
    pub fn thin_layer(eps: f64) -> Self {
        DiffusionCoefficient {
            tag: CoefficientTag::ThinLayer,
            eval: Arc::new(move |p| {
                let d = if p[0] >= 0.0 && p[0] < eps { 1e-10 } else { 2.0 };
                Mat2::diag(d, d)
            }),
        }
    }

    pub fn constant(m: Mat2) -> Self {
        DiffusionCoefficient { tag: CoefficientTag::Custom, eval: Arc::new(move |_| m) }
    }

    pub fn custom(f: impl Fn([f64; 2]) -> Mat2 + Send + Sync + 'static) -> Self {
        DiffusionCoefficient { tag: CoefficientTag::Custom, eval: Arc::new(f) }
    }

    pub fn tag(&self) -> CoefficientTag {
        self.tag
    }

    pub fn class(&self) -> CoefficientClass {
        match self.tag {
            CoefficientTag::Identity | CoefficientTag::Custom => CoefficientClass::Smooth,
            _ => CoefficientClass::Discontinuous,
        }
    }

    /// Evaluate and validate the sample.
    pub fn sample(&self, p: [f64; 2]) -> Result<Mat2> {
        let m = (self.eval)(p);
        if !m.is_spd(1e-12) {
            return Err(Error::assembly(format!(
                "diffusion tensor at ({:.6}, {:.6}) is not symmetric positive definite: {m:?}",
                p[0], p[1]
            )));
        }
        Ok(m)
    }
}

/// Gradients of the three P1 basis functions on a triangle, plus its area.
fn p1_gradients(v: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det =
        (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let grads = [
        [(v[1][1] - v[2][1]) / det, (v[2][0] - v[1][0]) / det],
        [(v[2][1] - v[0][1]) / det, (v[0][0] - v[2][0]) / det],
        [(v[0][1] - v[1][1]) / det, (v[1][0] - v[0][0]) / det],
    ];
    (grads, det / 2.0)
}

/// Local P1 stiffness matrix with the coefficient sampled at quadrature
/// points mapped into the triangle.
pub fn local_p1_stiffness(
    v: &[[f64; 2]; 3],
    coeff: &DiffusionCoefficient,
    quad: &QuadratureRule,
) -> Result<[[f64; 3]; 3]> {
    let (grads, area) = p1_gradients(v);
    let mut k = [[0.0; 3]; 3];
    for (q, w) in quad.points.iter().zip(&quad.weights) {
        let x = [
            v[0][0] + (v[1][0] - v[0][0]) * q[0] + (v[2][0] - v[0][0]) * q[1],
            v[0][1] + (v[1][1] - v[0][1]) * q[0] + (v[2][1] - v[0][1]) * q[1],
        ];
        let d = coeff.sample(x)?;
        let scale = w * 2.0 * area;
        for a in 0..3 {
            let dg = d.mul_vec(grads[a]);
            for b in 0..3 {
                k[a][b] += scale * (dg[0] * grads[b][0] + dg[1] * grads[b][1]);
            }
        }
    }
    Ok(k)
}

/// Local P1 mass matrix (exact for affine elements with an order-2 rule).
pub fn local_p1_mass(v: &[[f64; 2]; 3], quad: &QuadratureRule) -> [[f64; 3]; 3] {
    let (_, area) = p1_gradients(v);
    let mut m = [[0.0; 3]; 3];
    for (q, w) in quad.points.iter().zip(&quad.weights) {
        let phi = [1.0 - q[0] - q[1], q[0], q[1]];
        let scale = w * 2.0 * area;
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += scale * phi[a] * phi[b];
            }
        }
    }
    m
}

/// P1 stiffness over all vertices (no Dirichlet elimination).
pub fn assemble_stiffness_all_vertices(
    mesh: &TriMesh,
    coeff: &DiffusionCoefficient,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    let n = mesh.n_vertices();
    let mut b = CooBuilder::new(n, n);
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let k = local_p1_stiffness(&mesh.triangle_coords(t), coeff, quad)?;
        for a in 0..3 {
            for c in 0..3 {
                b.push(tri[a], tri[c], k[a][c]);
            }
        }
    }
    Ok(b.build())
}

/// P1 stiffness restricted to interior dofs (homogeneous Dirichlet by
/// elimination); rows/columns follow the mesh dof numbering.
pub fn assemble_physical_stiffness(
    mesh: &TriMesh,
    coeff: &DiffusionCoefficient,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    let full = assemble_stiffness_all_vertices(mesh, coeff, quad)?;
    let interior = mesh.interior_vertices();
    Ok(full.select(&interior, &interior))
}

/// P1 mass matrix over all vertices; restrict to interior dofs on demand.
pub fn assemble_physical_mass(mesh: &TriMesh, quad: &QuadratureRule) -> SparseMatrix {
    let n = mesh.n_vertices();
    let mut b = CooBuilder::new(n, n);
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let m = local_p1_mass(&mesh.triangle_coords(t), quad);
        for a in 0..3 {
            for c in 0..3 {
                b.push(tri[a], tri[c], m[a][c]);
            }
        }
    }
    b.build()
}

/// Effective diffusion at a computational point: J_T (D o T^-1) J_T^T
/// |J_T^-1|, evaluated through the physical preimage.
pub fn effective_diffusion(
    coeff: &DiffusionCoefficient,
    map: &dyn DomainMap,
    x_c: [f64; 2],
) -> Result<Mat2> {
    let x = map.inverse(x_c)?;
    let j = map.jacobian(x)?;
    let det = j.det();
    if det.abs() <= DET_FLOOR {
        return Err(Error::SingularMap { det: det.abs(), floor: DET_FLOOR, x: x[0], y: x[1] });
    }
    let d = coeff.sample(x)?;
    Ok(j.mul(&d).mul(&j.transpose()).scale(1.0 / det.abs()))
}

/// Q1 basis values and reference gradients at (xi, eta) in [-1,1]^2;
/// corner order (0,0) -> (1,0) -> (1,1) -> (0,1) in cell-local indices.
fn q1_basis(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let phi = [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ];
    let dref = [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ];
    (phi, dref)
}

const CELL_CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Q1 stiffness with the effective diffusion coefficient, stored as a
/// 9-point stencil field over interior grid nodes.
pub fn assemble_computational_stiffness(
    grid: &StructuredGrid,
    coeff: &DiffusionCoefficient,
    map: &dyn DomainMap,
    quad: &QuadratureRule,
) -> Result<Stencil9> {
    let (nxi, nyi) = grid.interior_dims();
    let mut stencil = Stencil9::zeros(nxi, nyi);
    let (hx, hy) = (grid.hx(), grid.hy());
    let nq = quad.len();

    // preimages and Jacobians for every quadrature point, batched per map
    let mut pts = Vec::with_capacity(grid.nx() * grid.ny() * nq);
    for cj in 0..grid.ny() {
        for ci in 0..grid.nx() {
            let origin = grid.cell_origin(ci, cj);
            for q in &quad.points {
                pts.push([
                    origin[0] + (q[0] + 1.0) * 0.5 * hx,
                    origin[1] + (q[1] + 1.0) * 0.5 * hy,
                ]);
            }
        }
    }
    let pre = map.inverse_with_jacobian_batch(&pts)?;

    for cj in 0..grid.ny() {
        for ci in 0..grid.nx() {
            let base = (cj * grid.nx() + ci) * nq;
            let mut ke = [[0.0; 4]; 4];
            for (k, (q, w)) in quad.points.iter().zip(&quad.weights).enumerate() {
                let (x, j) = pre[base + k];
                let det = j.det();
                if det.abs() <= DET_FLOOR {
                    return Err(Error::SingularMap {
                        det: det.abs(),
                        floor: DET_FLOOR,
                        x: x[0],
                        y: x[1],
                    });
                }
                let d = coeff.sample(x)?;
                let d = j.mul(&d).mul(&j.transpose()).scale(1.0 / det.abs());
                let (_, dref) = q1_basis(q[0], q[1]);
                let scale = w * hx * hy / 4.0;
                let mut grads = [[0.0; 2]; 4];
                for a in 0..4 {
                    grads[a] = [dref[a][0] * 2.0 / hx, dref[a][1] * 2.0 / hy];
                }
                for a in 0..4 {
                    let dg = d.mul_vec(grads[a]);
                    for b in 0..4 {
                        ke[a][b] += scale * (dg[0] * grads[b][0] + dg[1] * grads[b][1]);
                    }
                }
            }
            for (a, &(dia, dja)) in CELL_CORNERS.iter().enumerate() {
                let (ia, ja) = (ci + dia, cj + dja);
                if ia == 0 || ia == grid.nx() || ja == 0 || ja == grid.ny() {
                    continue;
                }
                for (b, &(dib, djb)) in CELL_CORNERS.iter().enumerate() {
                    let (ib, jb) = (ci + dib, cj + djb);
                    if ib == 0 || ib == grid.nx() || jb == 0 || jb == grid.ny() {
                        continue;
                    }
                    let o = offset_index(ib as isize - ia as isize, jb as isize - ja as isize);
                    stencil.coeffs_mut(ia - 1, ja - 1)[o] += ke[a][b];
                }
            }
        }
    }
    Ok(stencil)
}
