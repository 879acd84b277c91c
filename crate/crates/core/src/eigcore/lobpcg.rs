//! Locally optimal block preconditioned conjugate gradient for the lowest
//! eigenpairs of `A x = lambda M x`.
//!
//! Each iteration runs Rayleigh-Ritz on `[X, W, P]` where `W` holds the
//! preconditioned residuals of unconverged columns and `P` the previous search
//! directions. `W` and `P` are `M`-orthogonalized against `X` and then
//! orthonormalized among themselves with SVQB, dropping numerically dependent
//! directions, so the projected mass matrix stays close to the identity.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm, DenseSolver, EigOptions, EigResult, EigenSolver, LinearOperator, Preconditioner};
use crate::error::{Error, Result};

/// Problems this small go straight to the dense solver.
const DENSE_CUTOFF: usize = 64;
/// Explicit recomputation of `A X`, `M X` every this many iterations.
const REFRESH_EVERY: usize = 25;

#[derive(Debug, Clone, Copy, Default)]
pub struct Lobpcg;

/// A block of column vectors together with their images under `A` and `M`.
#[derive(Clone)]
struct Block {
    x: Vec<Vec<f64>>,
    ax: Vec<Vec<f64>>,
    mx: Vec<Vec<f64>>,
}

impl Block {
    fn from_vectors(x: Vec<Vec<f64>>, a: &dyn LinearOperator, m: &dyn LinearOperator) -> Self {
        let ax = apply_all(a, &x);
        let mx = apply_all(m, &x);
        Self { x, ax, mx }
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn combine(&self, c: &DMatrix<f64>) -> Self {
        Self {
            x: lincomb(&self.x, c),
            ax: lincomb(&self.ax, c),
            mx: lincomb(&self.mx, c),
        }
    }

    /// `self -= other * coef` applied to all three parts.
    fn subtract(&mut self, other: &Block, coef: &DMatrix<f64>) {
        for (j, ((x, ax), mx)) in self.x.iter_mut().zip(&mut self.ax).zip(&mut self.mx).enumerate() {
            for i in 0..other.len() {
                let c = coef[(i, j)];
                if c == 0.0 {
                    continue;
                }
                axpy(-c, &other.x[i], x);
                axpy(-c, &other.ax[i], ax);
                axpy(-c, &other.mx[i], mx);
            }
        }
    }

    fn concat(mut self, other: Block) -> Self {
        self.x.extend(other.x);
        self.ax.extend(other.ax);
        self.mx.extend(other.mx);
        self
    }
}

fn apply_all(op: &dyn LinearOperator, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|v| {
            let mut y = vec![0.0; v.len()];
            op.apply(v, &mut y);
            y
        })
        .collect()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn lincomb(cols: &[Vec<f64>], c: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = cols.first().map_or(0, Vec::len);
    (0..c.ncols())
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, col) in cols.iter().enumerate() {
                let a = c[(i, j)];
                if a != 0.0 {
                    axpy(a, col, &mut out);
                }
            }
            out
        })
        .collect()
}

fn gram(u: &[Vec<f64>], v: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(u.len(), v.len(), |i, j| dot(&u[i], &v[j]))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `M`-orthonormalizes a block by SVQB, dropping directions whose scaled
/// Gram eigenvalue falls below `drop_tol`.
fn svqb(block: &Block, drop_tol: f64) -> Result<Block> {
    if block.is_empty() {
        return Ok(block.clone());
    }
    let g = symmetrize(gram(&block.x, &block.mx));
    let d: Vec<f64> = (0..g.nrows()).map(|i| g[(i, i)]).collect();
    if let Some(&bad) = d.iter().find(|&&v| v < 0.0) {
        return Err(Error::NotPositiveDefinite(bad));
    }
    let keep_cols: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0).collect();
    let dinv: Vec<f64> = keep_cols.iter().map(|&i| 1.0 / d[i].sqrt()).collect();
    let gs = DMatrix::from_fn(keep_cols.len(), keep_cols.len(), |i, j| {
        g[(keep_cols[i], keep_cols[j])] * dinv[i] * dinv[j]
    });
    let eig = SymmetricEigen::new(gs);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > drop_tol * top)
        .collect();
    let mut c = DMatrix::zeros(d.len(), kept.len());
    for (col, &e) in kept.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[e].sqrt();
        for (r, &orig) in keep_cols.iter().enumerate() {
            c[(orig, col)] = dinv[r] * eig.eigenvectors[(r, e)] * s;
        }
    }
    Ok(block.combine(&c))
}

/// Rayleigh-Ritz on `basis`; returns Ritz values ascending and coefficients.
fn rayleigh_ritz(basis: &Block) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let h = symmetrize(gram(&basis.x, &basis.ax));
    let g = symmetrize(gram(&basis.x, &basis.mx));
    let chol = g.cholesky()?;
    let l = chol.l();
    let t = l.solve_lower_triangular(&h)?;
    let c = l.solve_lower_triangular(&t.transpose())?;
    let eig = SymmetricEigen::new(symmetrize(c));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let coef = l.transpose().solve_upper_triangular(&y)?;
    Some((vals, coef))
}

struct Residuals {
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
    converged: Vec<bool>,
}

fn residuals(x: &Block, theta: &[f64], tol: f64) -> Residuals {
    let scale = theta.iter().map(|t| t.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut vectors = Vec::with_capacity(x.len());
    let mut norms = Vec::with_capacity(x.len());
    let mut converged = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut r = x.ax[j].clone();
        axpy(-theta[j], &x.mx[j], &mut r);
        let rel = norm(&r) / norm(&x.mx[j]).max(f64::MIN_POSITIVE);
        norms.push(rel);
        converged.push(rel <= tol * theta[j].abs().max(1e-12 * scale));
        vectors.push(r);
    }
    Residuals {
        vectors,
        norms,
        converged,
    }
}

fn random_block(n: usize, m: usize, seed: u64, initial: Option<&Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = initial
        .map(|init| init.iter().filter(|v| v.len() == n).take(m).cloned().collect())
        .unwrap_or_default();
    while cols.len() < m {
        cols.push((0..n).map(|_| rng.gen::<f64>() - 0.5).collect());
    }
    cols
}

impl Lobpcg {
    fn iterate(
        &self,
        a: &dyn LinearOperator,
        m: &dyn LinearOperator,
        precond: Option<&dyn Preconditioner>,
        opts: &EigOptions,
    ) -> Result<EigResult> {
        let n = a.dim();
        let k = opts.k;
        let bs = opts.block().min(n / 3).max(k);
        let start = random_block(n, bs, opts.seed, opts.initial.as_ref());
        let mut x = svqb(&Block::from_vectors(start, a, m), 1e-14)?;
        if x.len() < k {
            return Err(Error::InvalidParameter("starting block is rank deficient".into()));
        }
        let (mut theta, c) = rayleigh_ritz(&x).ok_or(Error::NotPositiveDefinite(0.0))?;
        x = x.combine(&c);
        let mut p: Option<Block> = None;
        let mut iterations = 0;
        let mut res = residuals(&x, &theta, opts.tol);

        while iterations < opts.max_iterations {
            if res.converged[..k].iter().all(|&c| c) {
                break;
            }
            iterations += 1;

            let active: Vec<usize> = (0..x.len()).filter(|&j| !res.converged[j]).collect();
            let w: Vec<Vec<f64>> = active
                .iter()
                .map(|&j| match precond {
                    Some(t) => {
                        let mut z = vec![0.0; n];
                        t.apply(&res.vectors[j], &mut z);
                        z
                    }
                    None => res.vectors[j].clone(),
                })
                .collect();
            let mut search = Block::from_vectors(w, a, m);
            if let Some(prev) = p.take() {
                search = search.concat(prev);
            }
            // two passes of block Gram-Schmidt against X
            for _ in 0..2 {
                let coef = gram(&x.mx, &search.x);
                search.subtract(&x, &coef);
            }
            let search = svqb(&search, 1e-12)?;

            let basis = x.clone().concat(search.clone());
            let (vals, coef) = match rayleigh_ritz(&basis) {
                Some(rr) => rr,
                None => {
                    // restart without the conjugate directions
                    let (vals, coef) = rayleigh_ritz(&x).ok_or(Error::NotPositiveDefinite(0.0))?;
                    x = x.combine(&coef);
                    theta = vals;
                    res = residuals(&x, &theta, opts.tol);
                    continue;
                }
            };
            let bs_now = x.len();
            let cx = coef.view((0, 0), (basis.len(), bs_now)).into_owned();
            let new_x = basis.combine(&cx);
            let cs = coef.view((bs_now, 0), (search.len(), bs_now)).into_owned();
            p = (search.len() > 0).then(|| search.combine(&cs));
            x = new_x;
            theta = vals[..bs_now].to_vec();

            if iterations % REFRESH_EVERY == 0 {
                x = svqb(&Block::from_vectors(x.x, a, m), 1e-14)?;
                let (vals, c) = rayleigh_ritz(&x).ok_or(Error::NotPositiveDefinite(0.0))?;
                x = x.combine(&c);
                theta = vals;
                p = None;
            }
            res = residuals(&x, &theta, opts.tol);
        }

        // final residuals from fresh products
        let fresh = Block::from_vectors(x.x[..k].to_vec(), a, m);
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for j in 0..k {
            let mnorm = dot(&fresh.x[j], &fresh.mx[j]);
            if !(mnorm > 0.0) {
                return Err(Error::NotPositiveDefinite(mnorm));
            }
            values.push(dot(&fresh.x[j], &fresh.ax[j]) / mnorm);
            let s = 1.0 / mnorm.sqrt();
            vectors.push(fresh.x[j].iter().map(|v| v * s).collect::<Vec<_>>());
        }
        let fresh = Block::from_vectors(vectors, a, m);
        let final_res = residuals(&fresh, &values, opts.tol);
        let final_converged = final_res
            .norms
            .iter()
            .zip(&res.converged)
            .zip(&values)
            .map(|((&r, &c), &v)| c || r <= opts.tol * v.abs())
            .collect();
        Ok(EigResult {
            eigenvalues: values,
            eigenvectors: fresh.x,
            residuals: final_res.norms,
            converged: final_converged,
            iterations,
            solver: "lobpcg".into(),
        })
    }
}

impl EigenSolver for Lobpcg {
    fn name(&self) -> &'static str {
        "lobpcg"
    }

    fn solve(
        &self,
        a: &dyn LinearOperator,
        m: &dyn LinearOperator,
        precond: Option<&dyn Preconditioner>,
        opts: &EigOptions,
    ) -> Result<EigResult> {
        opts.validate()?;
        if a.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: m.dim(),
            });
        }
        if let Some(d) = m.diagonal() {
            if let Some(&bad) = d.iter().find(|&&v| !(v > 0.0)) {
                return Err(Error::NotPositiveDefinite(bad));
            }
        }
        let n = a.dim();
        if opts.k > n {
            return Err(Error::InvalidParameter(format!("k = {} exceeds dimension {n}", opts.k)));
        }
        if n <= DENSE_CUTOFF.max(4 * opts.block()) {
            let mut r = DenseSolver::default().solve(a, m, None, opts)?;
            r.solver = "lobpcg(dense)".into();
            return Ok(r);
        }
        self.iterate(a, m, precond, opts)
    }
}
