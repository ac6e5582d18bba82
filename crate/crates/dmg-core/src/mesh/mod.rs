//! Triangular meshes of the physical domain and structured grids of the
//! computational domain.

mod generate;
mod io;

pub use generate::{
    generate_channel_trimesh, generate_radial_trimesh, generate_square_trimesh, Jitter,
    RadialGrading, RadialMeshSpec,
};
pub use io::{read_mesh, write_mesh};

use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::Arc;

/// Unstructured triangular mesh with boundary flags and interior-dof
/// numbering. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    dof: Vec<Option<usize>>,
    n_interior: usize,
}

impl TriMesh {
    /// Validates orientation and manifoldness, flags boundary vertices from
    /// edge counts, and numbers interior vertices.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::mesh(format!(
                        "triangle {t} references vertex {v} out of range (V={nv})"
                    )));
                }
            }
            let area = signed_area(&vertices, tri);
            if area <= 0.0 {
                return Err(Error::mesh(format!(
                    "triangle {t} has negative area {area:.3e} (clockwise or degenerate)"
                )));
            }
        }
        let boundary = boundary_flags(nv, &triangles)?;
        let mut dof = vec![None; nv];
        let mut n_interior = 0;
        for (v, flag) in boundary.iter().enumerate() {
            if !flag {
                dof[v] = Some(n_interior);
                n_interior += 1;
            }
        }
        Ok(TriMesh { vertices, triangles, boundary, dof, n_interior })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Interior dof index of a vertex, `None` on the boundary.
    pub fn dof(&self, v: usize) -> Option<usize> {
        self.dof[v]
    }

    /// Vertex index for each interior dof, in dof order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_interior];
        for (v, d) in self.dof.iter().enumerate() {
            if let Some(d) = d {
                out[*d] = v;
            }
        }
        out
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Number of distinct undirected edges.
    pub fn n_edges(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// Euler characteristic V - E + F (1 for simply connected planar meshes).
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        barycentric(&self.triangle_coords(t), p)
    }
}

pub(crate) fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let a = vertices[tri[0]];
    let b = vertices[tri[1]];
    let c = vertices[tri[2]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Barycentric coordinates of `p` in the triangle with corners `v`.
pub fn barycentric(v: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let l1 = ((v[1][0] - p[0]) * (v[2][1] - p[1]) - (v[2][0] - p[0]) * (v[1][1] - p[1])) / det;
    let l2 = ((v[2][0] - p[0]) * (v[0][1] - p[1]) - (v[0][0] - p[0]) * (v[2][1] - p[1])) / det;
    [l1, l2, 1.0 - l1 - l2]
}

fn boundary_flags(nv: usize, triangles: &[[usize; 3]]) -> Result<Vec<bool>> {
    let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut flags = vec![false; nv];
    for ((a, b), count) in edge_count {
        match count {
            1 => {
                flags[a] = true;
                flags[b] = true;
            }
            2 => {}
            n => {
                return Err(Error::mesh(format!(
                    "edge ({a},{b}) shared by {n} triangles; mesh is not manifold"
                )))
            }
        }
    }
    Ok(flags)
}

/// Tensor-product grid on (-1,1)^2 with `nx` x `ny` cells and homogeneous
/// Dirichlet boundaries; interior nodes carry the unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuredGrid {
    nx: usize,
    ny: usize,
}

impl StructuredGrid {
    pub fn new(nx: usize, ny: usize) -> Result<StructuredGrid> {
        if nx < 2 || ny < 2 {
            return Err(Error::mesh(format!("grid must be at least 2x2 cells, got {nx}x{ny}")));
        }
        Ok(StructuredGrid { nx, ny })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        2.0 / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        2.0 / self.ny as f64
    }

    /// Interior node counts per axis.
    pub fn interior_dims(&self) -> (usize, usize) {
        (self.nx - 1, self.ny - 1)
    }

    pub fn n_interior(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Coordinates of node (i,j), i in 0..=nx, j in 0..=ny.
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [-1.0 + self.hx() * i as f64, -1.0 + self.hy() * j as f64]
    }

    /// All-node linear index.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Interior linear index for node (i,j), i in 1..nx, j in 1..ny.
    pub fn interior_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i < self.nx && j >= 1 && j < self.ny);
        (j - 1) * (self.nx - 1) + (i - 1)
    }

    /// All-node linear indices of interior nodes, in interior-dof order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_interior());
        for j in 1..self.ny {
            for i in 1..self.nx {
                out.push(self.node_index(i, j));
            }
        }
        out
    }

    /// Cell index containing point `p`, clamped into range.
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let ci = (((p[0] + 1.0) / self.hx()).floor() as isize).clamp(0, self.nx as isize - 1);
        let cj = (((p[1] + 1.0) / self.hy()).floor() as isize).clamp(0, self.ny as isize - 1);
        (ci as usize, cj as usize)
    }

    /// Lower-left corner of cell (ci, cj).
    pub fn cell_origin(&self, ci: usize, cj: usize) -> [f64; 2] {
        self.node(ci, cj)
    }
}

/// Parametric description of a closed physical boundary, used by the
/// radial mesh generator; the parameter runs over (-pi, pi].
#[derive(Clone)]
pub struct BoundaryCurve {
    center: [f64; 2],
    shape: CurveShape,
}

#[derive(Clone)]
pub enum CurveShape {
    Circle { radius: f64 },
    SmoothStar,
    WavyBox { s: f64, w: f64, a: f64, k: f64 },
    Square { half_width: f64 },
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for BoundaryCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.shape {
            CurveShape::Circle { .. } => "circle",
            CurveShape::SmoothStar => "smooth-star",
            CurveShape::WavyBox { .. } => "wavy-box",
            CurveShape::Square { .. } => "square",
            CurveShape::Radial(_) => "radial",
        };
        write!(f, "BoundaryCurve({name}, center {:?})", self.center)
    }
}

impl BoundaryCurve {
    pub fn circle(radius: f64) -> Self {
        BoundaryCurve { center: [0.0, 0.0], shape: CurveShape::Circle { radius } }
    }

    /// 5-legged star with smoothed edges, r = (1 + cos(5 phi / 2)^2) / 2.
    pub fn smooth_star() -> Self {
        BoundaryCurve { center: [0.0, 0.0], shape: CurveShape::SmoothStar }
    }

    /// Superellipse-based wavy box spanning roughly (0,W) x (-1,1).
    pub fn wavy_box(s: f64, w: f64, a: f64, k: f64) -> Self {
        BoundaryCurve { center: [w / 2.0, 0.0], shape: CurveShape::WavyBox { s, w, a, k } }
    }

    pub fn square(half_width: f64) -> Self {
        BoundaryCurve { center: [0.0, 0.0], shape: CurveShape::Square { half_width } }
    }

    pub fn radial(center: [f64; 2], r: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryCurve { center, shape: CurveShape::Radial(Arc::new(r)) }
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn point(&self, phi: f64) -> [f64; 2] {
        let (sin, cos) = phi.sin_cos();
        match &self.shape {
            CurveShape::Circle { radius } => {
                [self.center[0] + radius * cos, self.center[1] + radius * sin]
            }
            CurveShape::SmoothStar => {
                let r = 0.5 * (1.0 + (2.5 * phi).cos().powi(2));
                [r * cos, r * sin]
            }
            CurveShape::WavyBox { s, w, a, k } => {
                let se = (cos.abs().powf(*s) + sin.abs().powf(*s)).powf(-1.0 / s);
                let x = (se * (w / 2.0) + a * (k * phi).cos()) * cos + w / 2.0;
                let y = (se + a * (k * phi).cos()) * sin;
                [x, y]
            }
            CurveShape::Square { half_width } => {
                let r = half_width / cos.abs().max(sin.abs());
                [self.center[0] + r * cos, self.center[1] + r * sin]
            }
            CurveShape::Radial(f) => {
                let r = f(phi);
                [self.center[0] + r * cos, self.center[1] + r * sin]
            }
        }
    }

    /// Distance from the curve center to the boundary point at `phi`.
    pub fn radius(&self, phi: f64) -> f64 {
        let p = self.point(phi);
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        (dx * dx + dy * dy).sqrt()
    }
}
