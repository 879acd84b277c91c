//! Symmetric positive approximate inverses used by LOBPCG.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rayon::prelude::*;

use super::DenseSolver;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub trait Preconditioner: Send + Sync {
    /// `z <- T r`
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(diag: &[f64]) -> Result<Self> {
        if let Some(&bad) = diag.iter().find(|&&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite(bad));
        }
        Ok(Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.par_iter_mut()
            .zip(r.par_iter().zip(self.inv_diag.par_iter()))
            .for_each(|(z, (r, d))| *z = r * d);
    }
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // l[i * (bw + 1) + k] = L[i, i - k]
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factors `a + shift * b`, both symmetric with bandwidth at most `bw`.
    pub fn factor(a: &CsrMatrix, b: Option<(&CsrMatrix, f64)>) -> Result<Self> {
        let n = a.nrows();
        let mut bw = a.bandwidth();
        if let Some((b, _)) = b {
            bw = bw.max(b.bandwidth());
        }
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                l[i * w + (i - j)] += v;
            }
        }
        if let Some((b, s)) = b {
            for (i, j, v) in b.triplets() {
                if j <= i {
                    l[i * w + (i - j)] += s * v;
                }
            }
        }
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                let mut sum = l[i * w + (i - j)];
                let kmin = jmin.max(j.saturating_sub(bw));
                for k in kmin..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if j == i {
                    if !(sum > 0.0) {
                        return Err(Error::NotPositiveDefinite(sum));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w).min(self.n) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

/// Generalized symmetric eigendecomposition `K V = M V diag(lambda)`,
/// `V^T M V = I`.
fn generalized_modes(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    let res = DenseSolver { max_dim: usize::MAX }.solve_matrices(k, m, n)?;
    let mut v = DMatrix::zeros(n, n);
    for (j, col) in res.eigenvectors.iter().enumerate() {
        v.column_mut(j).copy_from_slice(col);
    }
    Ok((res.eigenvalues, v))
}

/// `out[p, i, q] = sum_j V[i, j] * input[p, j, q]`; `vt` is `V^T`.
fn dense_mode_product(v: &DMatrix<f64>, vt: &DMatrix<f64>, input: &[f64], out: &mut [f64], n: usize, post: usize) {
    if post == 1 {
        // column-major (n, pre) view of the whole tensor
        let pre = input.len() / n;
        let x = DMatrixView::from_slice(input, n, pre);
        let mut y = DMatrixViewMut::from_slice(out, n, pre);
        y.gemm(1.0, v, &x, 0.0);
        return;
    }
    // each (n, post) slab, read column-major, is X^T of shape (post, n)
    out.par_chunks_mut(n * post)
        .zip(input.par_chunks(n * post))
        .for_each(|(dst, src)| {
            let xt = DMatrixView::from_slice(src, post, n);
            let mut yt = DMatrixViewMut::from_slice(dst, post, n);
            yt.gemm(1.0, &xt, vt, 0.0);
        });
}

/// Inverse of a shifted separable operator
/// `S0 ⊗ M1 ⊗ M2 + M0 ⊗ K1 ⊗ M2 + M0 ⊗ M1 ⊗ K2 - shift * M0 ⊗ M1 ⊗ M2`
/// (any number of trailing modes). Trailing modes are diagonalized densely;
/// the leading mode is solved with banded Cholesky factors, one per trailing
/// mode combination.
pub struct TensorPreconditioner {
    lead_dim: usize,
    trailing_dims: Vec<usize>,
    modes: Vec<DMatrix<f64>>,
    modes_t: Vec<DMatrix<f64>>,
    factors: Vec<BandCholesky>,
    shift: f64,
    bottom: f64,
}

impl TensorPreconditioner {
    pub fn new(lead: (&CsrMatrix, &CsrMatrix), trailing: &[(DMatrix<f64>, DMatrix<f64>)], shift: f64) -> Result<Self> {
        Self::build(lead, trailing, |_| shift)
    }

    /// Shift set to `fraction` times the separable bottom.
    pub fn with_relative_shift(lead: (&CsrMatrix, &CsrMatrix), trailing: &[(DMatrix<f64>, DMatrix<f64>)], fraction: f64) -> Result<Self> {
        Self::build(lead, trailing, |bottom| fraction * bottom)
    }

    fn build(
        lead: (&CsrMatrix, &CsrMatrix),
        trailing: &[(DMatrix<f64>, DMatrix<f64>)],
        shift_for: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let (s0, m0) = lead;
        let mut values = Vec::new();
        let mut modes = Vec::new();
        for (k, m) in trailing {
            let (lam, v) = generalized_modes(k, m)?;
            values.push(lam);
            modes.push(v);
        }
        let trailing_dims: Vec<usize> = values.iter().map(Vec::len).collect();
        let combos: usize = trailing_dims.iter().product();
        let lead_bottom = lowest_generalized(s0, m0)?;
        let trailing_bottom: f64 = values.iter().map(|v| v[0]).sum();
        let bottom = lead_bottom + trailing_bottom;
        let shift = shift_for(bottom);
        if !(shift < bottom) {
            return Err(Error::InvalidParameter(format!(
                "preconditioner shift {shift} must lie below the separable spectrum bottom {bottom}"
            )));
        }
        let factors = (0..combos)
            .into_par_iter()
            .map(|c| {
                let mut rem = c;
                let mut s = -shift;
                for (d, lam) in values.iter().enumerate().rev() {
                    let n = trailing_dims[d];
                    s += lam[rem % n];
                    rem /= n;
                }
                BandCholesky::factor(s0, Some((m0, s)))
            })
            .collect::<Result<Vec<_>>>()?;
        let modes_t = modes.iter().map(|v| v.transpose()).collect();
        Ok(Self {
            lead_dim: s0.nrows(),
            trailing_dims,
            modes,
            modes_t,
            factors,
            shift,
            bottom,
        })
    }

    /// Lowest eigenvalue of the unshifted separable operator.
    pub fn separable_bottom(&self) -> f64 {
        self.bottom
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Applies `V^T` (forward) or `V` along every trailing mode.
    fn transform(&self, x: &mut Vec<f64>, tmp: &mut Vec<f64>, forward: bool) {
        let mut pre = self.lead_dim;
        for d in 0..self.trailing_dims.len() {
            let (v, vt) = if forward {
                (&self.modes_t[d], &self.modes[d])
            } else {
                (&self.modes[d], &self.modes_t[d])
            };
            let n = self.trailing_dims[d];
            let post: usize = self.trailing_dims[d + 1..].iter().product();
            debug_assert_eq!(pre * n * post, x.len());
            dense_mode_product(v, vt, x, tmp, n, post);
            std::mem::swap(x, tmp);
            pre *= n;
        }
    }
}

impl Preconditioner for TensorPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let combos: usize = self.trailing_dims.iter().product();
        let n0 = self.lead_dim;
        let mut x = r.to_vec();
        let mut tmp = vec![0.0; r.len()];
        self.transform(&mut x, &mut tmp, true);
        // (n0, combos) -> (combos, n0)
        let mut cols = vec![0.0; r.len()];
        cols.par_chunks_mut(n0).enumerate().for_each(|(c, col)| {
            for i in 0..n0 {
                col[i] = x[i * combos + c];
            }
        });
        cols.par_chunks_mut(n0)
            .zip(self.factors.par_iter())
            .for_each(|(col, f)| f.solve_in_place(col));
        x.par_chunks_mut(combos).enumerate().for_each(|(i, row)| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = cols[c * n0 + i];
            }
        });
        self.transform(&mut x, &mut tmp, false);
        z.copy_from_slice(&x);
    }
}

/// Lowest eigenvalue of a sparse pencil `(S, M)` with `S` positive definite.
pub fn lowest_generalized(s: &CsrMatrix, m: &CsrMatrix) -> Result<f64> {
    Ok(lowest_generalized_pair(s, m)?.0)
}

/// Lowest eigenpair of `(S, M)`, `M`-normalized: dense below 400 unknowns,
/// inverse iteration on a band Cholesky factor above.
pub fn lowest_generalized_pair(s: &CsrMatrix, m: &CsrMatrix) -> Result<(f64, Vec<f64>)> {
    let n = s.nrows();
    if n <= 400 {
        let mut r = DenseSolver::default().solve_matrices(&s.to_dense(), &m.to_dense(), 1)?;
        return Ok((r.eigenvalues[0], r.eigenvectors.remove(0)));
    }
    let f = BandCholesky::factor(s, None)?;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    let mut mx = vec![0.0; n];
    let mut sx = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    for _ in 0..500 {
        m.matvec(&x, &mut mx);
        f.solve_in_place(&mut mx);
        x.copy_from_slice(&mx);
        s.matvec(&x, &mut sx);
        m.matvec(&x, &mut mx);
        let num: f64 = x.iter().zip(&sx).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
        let next = num / den;
        let scale = den.sqrt();
        x.iter_mut().for_each(|v| *v /= scale);
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            return Ok((next, x));
        }
        lambda = next;
    }
    Ok((lambda, x))
}

/// `z = R T R^T r` where `R` selects `keep` from a larger index space.
pub struct RestrictedPreconditioner<P> {
    inner: P,
    keep: Vec<usize>,
    full_dim: usize,
}

impl<P: Preconditioner> RestrictedPreconditioner<P> {
    pub fn new(inner: P, keep: Vec<usize>, full_dim: usize) -> Self {
        Self { inner, keep, full_dim }
    }
}

impl<P: Preconditioner> Preconditioner for RestrictedPreconditioner<P> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut full = vec![0.0; self.full_dim];
        for (&k, &v) in self.keep.iter().zip(r) {
            full[k] = v;
        }
        let mut out = vec![0.0; self.full_dim];
        self.inner.apply(&full, &mut out);
        for (zi, &k) in z.iter_mut().zip(&self.keep) {
            *zi = out[k];
        }
    }
}
