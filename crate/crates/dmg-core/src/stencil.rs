//! 9-point stencil operators on the interior nodes of a structured grid.

use crate::sparse::{CooBuilder, LinearOp, SparseMatrix};

/// Offset index for (di, dj) in {-1,0,1}^2: o = (dj+1)*3 + (di+1).
pub const CENTER: usize = 4;

pub const OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

pub fn offset_index(di: isize, dj: isize) -> usize {
    debug_assert!((-1..=1).contains(&di) && (-1..=1).contains(&dj));
    ((dj + 1) * 3 + (di + 1)) as usize
}

pub fn opposite(o: usize) -> usize {
    8 - o
}

/// Per-node 9-point stencil field over an `nxi` x `nyi` interior grid.
/// Connections that would leave the interior are identically zero
/// (homogeneous Dirichlet elimination).
#[derive(Debug, Clone)]
pub struct Stencil9 {
    nxi: usize,
    nyi: usize,
    data: Vec<[f64; 9]>,
}

impl Stencil9 {
    pub fn zeros(nxi: usize, nyi: usize) -> Stencil9 {
        Stencil9 { nxi, nyi, data: vec![[0.0; 9]; nxi * nyi] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nxi, self.nyi)
    }

    pub fn n_nodes(&self) -> usize {
        self.nxi * self.nyi
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nxi && j < self.nyi);
        j * self.nxi + i
    }

    #[inline]
    pub fn coeffs(&self, i: usize, j: usize) -> &[f64; 9] {
        &self.data[j * self.nxi + i]
    }

    #[inline]
    pub fn coeffs_mut(&mut self, i: usize, j: usize) -> &mut [f64; 9] {
        &mut self.data[j * self.nxi + i]
    }

    pub fn in_range(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nxi && (j as usize) < self.nyi
    }

    /// y = A x.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_nodes());
        assert_eq!(y.len(), self.n_nodes());
        for j in 0..self.nyi {
            for i in 0..self.nxi {
                let p = self.idx(i, j);
                let st = &self.data[p];
                let mut acc = 0.0;
                for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                    let a = st[o];
                    if a == 0.0 {
                        continue;
                    }
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if self.in_range(ni, nj) {
                        acc += a * x[self.idx(ni as usize, nj as usize)];
                    }
                }
                y[p] = acc;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_nodes()];
        self.apply_into(x, &mut y);
        y
    }

    /// r = f - A x.
    pub fn residual(&self, x: &[f64], f: &[f64], r: &mut [f64]) {
        self.apply_into(x, r);
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
    }

    /// max over node pairs of |a(p -> q) - a(q -> p)|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.nyi {
            for i in 0..self.nxi {
                let st = self.coeffs(i, j);
                for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if self.in_range(ni, nj) {
                        let back = self.coeffs(ni as usize, nj as usize)[opposite(o)];
                        worst = worst.max((st[o] - back).abs());
                    } else {
                        worst = worst.max(st[o].abs());
                    }
                }
            }
        }
        worst
    }

    /// CSR form over interior nodes, for oracle comparisons.
    pub fn to_sparse(&self) -> SparseMatrix {
        let n = self.n_nodes();
        let mut b = CooBuilder::new(n, n);
        for j in 0..self.nyi {
            for i in 0..self.nxi {
                let p = self.idx(i, j);
                let st = &self.data[p];
                for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if st[o] != 0.0 && self.in_range(ni, nj) {
                        b.push(p, self.idx(ni as usize, nj as usize), st[o]);
                    }
                }
            }
        }
        b.build()
    }

    /// Structural nonzeros: stencil entries whose neighbor stays in range.
    pub fn nnz_structural(&self) -> usize {
        let mut count = 0;
        for j in 0..self.nyi {
            for i in 0..self.nxi {
                for &(di, dj) in OFFSETS.iter() {
                    if self.in_range(i as isize + di, j as isize + dj) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// Scale every coefficient by `s`.
    pub fn scale(&mut self, s: f64) {
        for st in &mut self.data {
            for a in st.iter_mut() {
                *a *= s;
            }
        }
    }
}

impl LinearOp for Stencil9 {
    fn dim(&self) -> usize {
        self.n_nodes()
    }
    fn apply_to(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }
}

/// The constant-coefficient 5-point Laplacian stencil (unit scaling), a
/// standard fixture for multigrid tests.
pub fn five_point_laplacian(nxi: usize, nyi: usize) -> Stencil9 {
    let mut s = Stencil9::zeros(nxi, nyi);
    for j in 0..nyi {
        for i in 0..nxi {
            let st = s.coeffs_mut(i, j);
            st[CENTER] = 4.0;
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                if i as isize + di >= 0
                    && j as isize + dj >= 0
                    && ((i as isize + di) as usize) < nxi
                    && ((j as isize + dj) as usize) < nyi
                {
                    st[offset_index(di, dj)] = -1.0;
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_opposites() {
        assert_eq!(offset_index(0, 0), CENTER);
        assert_eq!(offset_index(-1, -1), 0);
        assert_eq!(offset_index(1, 1), 8);
        for o in 0..9 {
            let (di, dj) = OFFSETS[o];
            assert_eq!(OFFSETS[opposite(o)], (-di, -dj));
        }
    }

    #[test]
    fn five_point_symmetric_and_matches_sparse() {
        let s = five_point_laplacian(4, 3);
        assert_eq!(s.symmetry_defect(), 0.0);
        let a = s.to_sparse();
        let x: Vec<f64> = (0..12).map(|k| (k as f64).sin()).collect();
        let y1 = s.apply(&x);
        let y2 = a.apply(&x);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn structural_nnz_counts_truncation() {
        // 3x3 interior: center row full 9, edges 6, corners 4
        let s = five_point_laplacian(3, 3);
        assert_eq!(s.nnz_structural(), 4 * 4 + 4 * 6 + 9);
    }
}
