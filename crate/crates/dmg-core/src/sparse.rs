//! Compressed sparse row matrices and Krylov kernels.
//!
//! One general-purpose CSR type backs the physical stiffness, the mass
//! matrices, the coupled mass matrix, and the triple products used to
//! cross-check Galerkin coarsening.

use crate::{Error, Result};

/// Row-compressed sparse matrix with sorted, deduplicated columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed on conversion to CSR.
#[derive(Debug, Clone, Default)]
pub struct CooBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                prev = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = A^T x without forming the transpose.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let xr = x[r];
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xr;
            }
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.indices {
            counts[c] += 1;
        }
        let mut indptr = vec![0usize; self.ncols + 1];
        for c in 0..self.ncols {
            indptr[c + 1] = indptr[c] + counts[c];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = indptr.clone();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let k = cursor[*c];
                indices[k] = r;
                values[k] = *v;
                cursor[*c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse-sparse product self * other.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut builder = CooBuilder::new(self.nrows, other.ncols);
        let mut scratch: Vec<f64> = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (k, v) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(*k);
                for (c, ov) in ocols.iter().zip(ovals) {
                    if scratch[*c] == 0.0 {
                        touched.push(*c);
                    }
                    scratch[*c] += v * ov;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                builder.push(r, c, scratch[c]);
                scratch[c] = 0.0;
            }
            touched.clear();
        }
        builder.build()
    }

    /// P^T * self * P, used as the Galerkin cross-check route.
    pub fn triple_product(&self, p: &SparseMatrix) -> SparseMatrix {
        p.transpose().matmul(&self.matmul(p))
    }

    /// Restriction to a subset of rows and columns (kept indices, in order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut builder = CooBuilder::new(rows.len(), cols.len());
        for (new_r, &old_r) in rows.iter().enumerate() {
            let (rcols, rvals) = self.row(old_r);
            for (c, v) in rcols.iter().zip(rvals) {
                if col_map[*c] != usize::MAX {
                    builder.push(new_r, col_map[*c], *v);
                }
            }
        }
        builder.build()
    }

    /// max |A - A^T| over all entries.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(r, *c)).abs());
            }
            let (tcols, tvals) = t.row(r);
            for (c, v) in tcols.iter().zip(tvals) {
                worst = worst.max((v - self.get(r, *c)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let mut d = crate::dense::DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                d[(r, *c)] = *v;
            }
        }
        d
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise max |self - other| over the union pattern.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - other.get(r, *c)).abs());
            }
            let (ocols, ovals) = other.row(r);
            for (c, v) in ocols.iter().zip(ovals) {
                worst = worst.max((v - self.get(r, *c)).abs());
            }
        }
        worst
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Anything that can act as y = A x on vectors.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply_to(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOp for SparseMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows, self.ncols);
        self.nrows
    }
    fn apply_to(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Unpreconditioned CG from a zero initial guess.
///
/// Runs until the residual 2-norm falls below `tol * ||b||` or `max_iter`
/// iterations, whichever comes first. A fixed small `max_iter` (e.g. 2)
/// realizes the approximate mass inverse used by the transfer operators.
pub fn cg(a: &impl LinearOp, b: &[f64], tol: f64, max_iter: usize, x: &mut [f64]) -> Result<CgOutcome> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome { iterations: 0, residual_norm: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rsold = dot(&r, &r);
    for it in 0..max_iter {
        a.apply_to(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::solve(format!(
                "CG breakdown: non-positive curvature {curvature:.3e} at iteration {it}"
            )));
        }
        let alpha = rsold / curvature;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let rsnew = dot(&r, &r);
        if rsnew.sqrt() <= tol * bnorm {
            return Ok(CgOutcome { iterations: it + 1, residual_norm: rsnew.sqrt(), converged: true });
        }
        let beta = rsnew / rsold;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rsold = rsnew;
    }
    Ok(CgOutcome { iterations: max_iter, residual_norm: rsold.sqrt(), converged: false })
}

/// Preconditioned CG from a zero initial guess; `precond` applies an SPD
/// approximation of A^{-1} (e.g. one structured multigrid V-cycle).
pub fn pcg(
    a: &impl LinearOp,
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
    x: &mut [f64],
) -> Result<CgOutcome> {
    let n = a.dim();
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome { iterations: 0, residual_norm: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        a.apply_to(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::solve(format!(
                "PCG breakdown: non-positive curvature {curvature:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        let rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            return Ok(CgOutcome { iterations: it + 1, residual_norm: rnorm, converged: true });
        }
        precond(&r, &mut z);
        let rznew = dot(&r, &z);
        let beta = rznew / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rznew;
    }
    let rnorm = norm2(&r);
    Ok(CgOutcome { iterations: max_iter, residual_norm: rnorm, converged: false })
}
