//! Compressed sparse row matrices and Kronecker-structured operators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::eigcore::LinearOperator;

/// Row-compressed sparse matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().chain(other.triplets().map(|(i, j, v)| (i, j, s * v))),
        )
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Keeps rows and columns listed in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows.max(self.ncols)];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let t = keep.iter().enumerate().flat_map(|(ni, &oi)| {
            let map = &map;
            self.row(oi)
                .filter(move |&(j, _)| map[j] != usize::MAX)
                .map(move |(j, v)| (ni, map[j], v))
        });
        Self::from_triplets(keep.len(), keep.len(), t.collect::<Vec<_>>())
    }

    /// Kronecker product `self ⊗ other` (explicit; for tests and small problems).
    pub fn kron(&self, other: &Self) -> Self {
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.triplets() {
            for (k, l, b) in other.triplets() {
                t.push((i * other.nrows + k, j * other.ncols + l, a * b));
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, t)
    }

    /// Writes `row col value` lines (0-based indices).
    pub fn write_triplets(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(CsrMatrix::diagonal(self))
    }
}

/// One term `coeff * (F_0 ⊗ F_1 ⊗ ... )`; `None` factors are identities.
#[derive(Debug, Clone)]
pub struct KronTerm {
    pub coeff: f64,
    pub factors: Vec<Option<CsrMatrix>>,
}

impl KronTerm {
    pub fn new(coeff: f64, factors: Vec<CsrMatrix>) -> Self {
        Self {
            coeff,
            factors: factors.into_iter().map(Some).collect(),
        }
    }
}

/// Sum of Kronecker products over a fixed list of mode dimensions. Vectors are
/// laid out with the last mode varying fastest.
#[derive(Debug, Clone)]
pub struct KronSum {
    dims: Vec<usize>,
    terms: Vec<KronTerm>,
}

impl KronSum {
    pub fn new(dims: Vec<usize>, terms: Vec<KronTerm>) -> Self {
        for t in &terms {
            assert_eq!(t.factors.len(), dims.len(), "term arity mismatch");
            for (f, &d) in t.factors.iter().zip(&dims) {
                if let Some(f) = f {
                    assert_eq!((f.nrows(), f.ncols()), (d, d), "factor shape mismatch");
                }
            }
        }
        Self { dims, terms }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    /// Explicit sparse matrix; only sensible for small dimensions.
    pub fn to_csr(&self) -> CsrMatrix {
        let n: usize = self.dims.iter().product();
        let mut acc = CsrMatrix::from_triplets(n, n, std::iter::empty());
        for t in &self.terms {
            let mut m = CsrMatrix::identity(1);
            for (f, &d) in t.factors.iter().zip(&self.dims) {
                let f = f.clone().unwrap_or_else(|| CsrMatrix::identity(d));
                m = m.kron(&f);
            }
            acc = acc.add_scaled(&m, t.coeff);
        }
        acc
    }
}

/// `out[p, i, q] = sum_j F[i, j] * input[p, j, q]` for a tensor of shape
/// `(pre, n, post)`.
fn mode_product(f: &CsrMatrix, input: &[f64], out: &mut [f64], pre: usize, n: usize, post: usize) {
    debug_assert_eq!(input.len(), pre * n * post);
    if pre == 1 {
        out.par_chunks_mut(post).enumerate().for_each(|(i, row)| {
            row.iter_mut().for_each(|v| *v = 0.0);
            for (j, a) in f.row(i) {
                let src = &input[j * post..(j + 1) * post];
                row.iter_mut().zip(src).for_each(|(o, s)| *o += a * s);
            }
        });
    } else {
        out.par_chunks_mut(n * post)
            .zip(input.par_chunks(n * post))
            .for_each(|(dst, src)| {
                for i in 0..n {
                    let row = &mut dst[i * post..(i + 1) * post];
                    row.iter_mut().for_each(|v| *v = 0.0);
                    for (j, a) in f.row(i) {
                        let s = &src[j * post..(j + 1) * post];
                        row.iter_mut().zip(s).for_each(|(o, s)| *o += a * s);
                    }
                }
            });
    }
}

impl LinearOperator for KronSum {
    fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut cur = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for term in &self.terms {
            cur.copy_from_slice(x);
            for (mode, f) in term.factors.iter().enumerate() {
                let Some(f) = f else { continue };
                let pre: usize = self.dims[..mode].iter().product();
                let post: usize = self.dims[mode + 1..].iter().product();
                mode_product(f, &cur, &mut tmp, pre, self.dims[mode], post);
                std::mem::swap(&mut cur, &mut tmp);
            }
            let c = term.coeff;
            y.par_iter_mut().zip(cur.par_iter()).for_each(|(yi, v)| *yi += c * v);
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut diag = vec![0.0; n];
        for term in &self.terms {
            let diags: Vec<Vec<f64>> = term
                .factors
                .iter()
                .zip(&self.dims)
                .map(|(f, &d)| f.as_ref().map_or_else(|| vec![1.0; d], CsrMatrix::diagonal))
                .collect();
            for (idx, slot) in diag.iter_mut().enumerate() {
                let mut rem = idx;
                let mut prod = term.coeff;
                for (mode, d) in diags.iter().enumerate().rev() {
                    let dim = self.dims[mode];
                    prod *= d[rem % dim];
                    rem /= dim;
                }
                *slot += prod;
            }
        }
        Some(diag)
    }
}
