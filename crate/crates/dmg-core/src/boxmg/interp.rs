//! Operator-induced interpolation for 9-point stencils.
//!
//! Coarse nodes sit at even 0-based interior indices (fine node 2I), so
//! each dimension coarsens by a factor of about two. Fine nodes on coarse
//! lines interpolate through collapsed 1D stencils; cell-center fine nodes
//! solve their own stencil equation against the surrounding coarse and
//! line-point values. Dirichlet truncation enters automatically through
//! the zero stencil entries, leaving one-sided weights near boundaries.

use crate::sparse::{CooBuilder, SparseMatrix};
use crate::stencil::{offset_index, Stencil9};
use crate::{Error, Result};

/// Interpolation weights from a coarse grid onto a fine grid; each fine
/// node depends on at most four coarse nodes.
#[derive(Debug, Clone)]
pub struct Interpolation {
    fine_dims: (usize, usize),
    coarse_dims: (usize, usize),
    entries: Vec<NodeWeights>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NodeWeights {
    len: u8,
    idx: [u32; 4],
    w: [f64; 4],
}

impl NodeWeights {
    fn push(&mut self, idx: usize, w: f64) {
        debug_assert!((self.len as usize) < 4);
        self.idx[self.len as usize] = idx as u32;
        self.w[self.len as usize] = w;
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(move |k| (self.idx[k] as usize, self.w[k]))
    }
}

/// Coarse interior dimension for a fine interior dimension.
pub fn coarse_dim(n: usize) -> usize {
    n.div_ceil(2)
}

impl Interpolation {
    pub fn fine_dims(&self) -> (usize, usize) {
        self.fine_dims
    }
    pub fn coarse_dims(&self) -> (usize, usize) {
        self.coarse_dims
    }

    pub fn node(&self, p: usize) -> &NodeWeights {
        &self.entries[p]
    }

    /// u_f = P u_c.
    pub fn interpolate(&self, u_c: &[f64], u_f: &mut [f64]) {
        assert_eq!(u_c.len(), self.coarse_dims.0 * self.coarse_dims.1);
        assert_eq!(u_f.len(), self.fine_dims.0 * self.fine_dims.1);
        for (p, nw) in self.entries.iter().enumerate() {
            let mut acc = 0.0;
            for (c, w) in nw.iter() {
                acc += w * u_c[c];
            }
            u_f[p] = acc;
        }
    }

    /// r_c = P^T r_f.
    pub fn restrict(&self, r_f: &[f64], r_c: &mut [f64]) {
        assert_eq!(r_c.len(), self.coarse_dims.0 * self.coarse_dims.1);
        r_c.iter_mut().for_each(|v| *v = 0.0);
        for (p, nw) in self.entries.iter().enumerate() {
            let rf = r_f[p];
            for (c, w) in nw.iter() {
                r_c[c] += w * rf;
            }
        }
    }

    /// CSR form (fine x coarse) for triple-product cross-checks.
    pub fn to_sparse(&self) -> SparseMatrix {
        let mut b = CooBuilder::new(
            self.fine_dims.0 * self.fine_dims.1,
            self.coarse_dims.0 * self.coarse_dims.1,
        );
        for (p, nw) in self.entries.iter().enumerate() {
            for (c, w) in nw.iter() {
                b.push(p, c, w);
            }
        }
        b.build()
    }
}

/// Build operator-induced interpolation for the stencil `op`.
pub fn build_interpolation(op: &Stencil9) -> Result<Interpolation> {
    let (nxi, nyi) = op.dims();
    let (ncx, ncy) = (coarse_dim(nxi), coarse_dim(nyi));
    let cidx = |ci: usize, cj: usize| cj * ncx + ci;
    let mut entries = vec![NodeWeights::default(); nxi * nyi];

    // line points first: their weights feed the cell-center formula
    let mut line_w = vec![[0.0f64; 2]; nxi * nyi]; // (toward lower parent, toward upper parent)
    for j in 0..nyi {
        for i in 0..nxi {
            let p = j * nxi + i;
            let st = op.coeffs(i, j);
            match (i % 2, j % 2) {
                (0, 0) => {
                    entries[p].push(cidx(i / 2, j / 2), 1.0);
                }
                (1, 0) => {
                    // collapse in y: u depends on west/east coarse neighbors
                    let denom = st[offset_index(0, 0)]
                        + st[offset_index(0, -1)]
                        + st[offset_index(0, 1)];
                    if denom.abs() <= 1e-300 {
                        return Err(Error::assembly(format!(
                            "degenerate stencil: zero collapsed diagonal at node ({i},{j})"
                        )));
                    }
                    let wl = -(st[offset_index(-1, -1)]
                        + st[offset_index(-1, 0)]
                        + st[offset_index(-1, 1)])
                        / denom;
                    let wr = -(st[offset_index(1, -1)]
                        + st[offset_index(1, 0)]
                        + st[offset_index(1, 1)])
                        / denom;
                    line_w[p] = [wl, wr];
                    if wl != 0.0 {
                        entries[p].push(cidx((i - 1) / 2, j / 2), wl);
                    }
                    if i + 1 < nxi && wr != 0.0 {
                        entries[p].push(cidx((i + 1) / 2, j / 2), wr);
                    }
                }
                (0, 1) => {
                    // collapse in x: u depends on south/north coarse neighbors
                    let denom = st[offset_index(0, 0)]
                        + st[offset_index(-1, 0)]
                        + st[offset_index(1, 0)];
                    if denom.abs() <= 1e-300 {
                        return Err(Error::assembly(format!(
                            "degenerate stencil: zero collapsed diagonal at node ({i},{j})"
                        )));
                    }
                    let ws = -(st[offset_index(-1, -1)]
                        + st[offset_index(0, -1)]
                        + st[offset_index(1, -1)])
                        / denom;
                    let wn = -(st[offset_index(-1, 1)]
                        + st[offset_index(0, 1)]
                        + st[offset_index(1, 1)])
                        / denom;
                    line_w[p] = [ws, wn];
                    if ws != 0.0 {
                        entries[p].push(cidx(i / 2, (j - 1) / 2), ws);
                    }
                    if j + 1 < nyi && wn != 0.0 {
                        entries[p].push(cidx(i / 2, (j + 1) / 2), wn);
                    }
                }
                _ => {}
            }
        }
    }

    // cell-center points: solve the local stencil equation using the
    // surrounding coarse corners and the already-known line points
    for j in (1..nyi).step_by(2) {
        for i in (1..nxi).step_by(2) {
            let p = j * nxi + i;
            let st = op.coeffs(i, j);
            let ac = st[offset_index(0, 0)];
            if ac.abs() <= 1e-300 {
                return Err(Error::assembly(format!(
                    "degenerate stencil: zero diagonal at cell-center node ({i},{j})"
                )));
            }
            // weight toward each corner: direct corner coupling plus the
            // line-point contributions routed through that corner
            let corners: [(isize, isize); 4] = [(-1, -1), (1, -1), (-1, 1), (1, 1)];
            for &(di, dj) in &corners {
                let (ci, cj) = (i as isize + di, j as isize + dj);
                if !op.in_range(ci, cj) {
                    continue;
                }
                let mut num = st[offset_index(di, dj)];
                // horizontal neighbor (di, 0) is a y-line point whose
                // parents sit at (di, -1) and (di, 1)
                if op.in_range(i as isize + di, j as isize) {
                    let q = j * nxi + (i as isize + di) as usize;
                    let toward = if dj < 0 { line_w[q][0] } else { line_w[q][1] };
                    num += st[offset_index(di, 0)] * toward;
                }
                // vertical neighbor (0, dj) is an x-line point whose
                // parents sit at (-1, dj) and (1, dj)
                if op.in_range(i as isize, j as isize + dj) {
                    let q = (j as isize + dj) as usize * nxi + i;
                    let toward = if di < 0 { line_w[q][0] } else { line_w[q][1] };
                    num += st[offset_index(0, dj)] * toward;
                }
                let w = -num / ac;
                if w != 0.0 {
                    entries[p].push(cidx(ci as usize / 2, cj as usize / 2), w);
                }
            }
        }
    }

    Ok(Interpolation { fine_dims: (nxi, nyi), coarse_dims: (ncx, ncy), entries })
}
