//! Symmetric generalized eigensolvers `A x = lambda M x` for the lowest part of
//! the spectrum, behind a common [`EigenSolver`] trait.
//!
//! Two strategies ship in the default [`SolverRegistry`]:
//!
//! * `lobpcg` — block preconditioned inverse-free iteration over matrix-free
//!   operators, the workhorse for assembled waveguide forms;
//! * `dense` — Cholesky reduction plus a dense symmetric eigensolve, used as
//!   the oracle on small problems.

mod dense;
mod lobpcg;
pub mod precond;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense::{dense_matrix, DenseSolver};
pub use lobpcg::Lobpcg;
pub use precond::{lowest_generalized, lowest_generalized_pair, BandCholesky, JacobiPreconditioner, Preconditioner, RestrictedPreconditioner, TensorPreconditioner};

/// A symmetric linear map on `R^n`. `apply` must be linear and must not depend
/// on hidden state, so it may be called concurrently.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// `y <- A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Identity operator, the mass matrix of finite-difference problems.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(vec![1.0; self.0])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigOptions {
    /// Number of wanted eigenpairs.
    pub k: usize,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iterations: usize,
    /// Defaults to `k + 3`.
    pub block_size: Option<usize>,
    pub seed: u64,
    /// Optional starting vectors; missing columns are filled with seeded noise.
    #[serde(skip)]
    pub initial: Option<Vec<Vec<f64>>>,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            k: 1,
            tol: 1e-8,
            max_iterations: 5000,
            block_size: None,
            seed: 0x5eed,
            initial: None,
        }
    }
}

impl EigOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn block(&self) -> usize {
        self.block_size.unwrap_or(self.k + 3).max(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Lowest eigenpairs with per-pair diagnostics. Eigenvectors are
/// `M`-orthonormal; residuals are `|A x - lambda M x| / |M x|` (Euclidean).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: usize,
    pub solver: String,
}

impl EigResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn converged_count(&self) -> usize {
        self.converged.iter().filter(|&&c| c).count()
    }

    /// Turns a partially converged result into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.all_converged() {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                converged: self.converged_count(),
                wanted: self.converged.len(),
            })
        }
    }
}

/// A strategy computing the lowest eigenpairs of a symmetric-definite pencil.
pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        a: &dyn LinearOperator,
        m: &dyn LinearOperator,
        precond: Option<&dyn Preconditioner>,
        opts: &EigOptions,
    ) -> Result<EigResult>;
}

/// Named eigensolver strategies.
pub struct SolverRegistry {
    solvers: BTreeMap<String, Box<dyn EigenSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            solvers: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, solver: Box<dyn EigenSolver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EigenSolver> {
        self.solvers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "eigensolver",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.solvers.keys().cloned().collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Lobpcg));
        r.register(Box::new(DenseSolver::default()));
        r
    }
}

/// Lowest `k` eigenpairs of `A x = lambda M x` with the default LOBPCG strategy.
pub fn smallest_eigenpairs(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    precond: Option<&dyn Preconditioner>,
    opts: &EigOptions,
) -> Result<EigResult> {
    Lobpcg.solve(a, m, precond, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub count: usize,
    /// Some eigenvalue lies within `safety` of the threshold.
    pub boundary: bool,
    /// Number of eigenpairs that had to be computed.
    pub computed: usize,
}

/// Counts eigenvalues in `eigenvalues` strictly below `threshold - safety`
/// and flags any within `safety` of the threshold.
pub fn count_sorted(eigenvalues: &[f64], threshold: f64, safety: f64) -> CountResult {
    let count = eigenvalues.iter().filter(|&&l| l < threshold - safety).count();
    let boundary = eigenvalues.iter().any(|&l| (l - threshold).abs() <= safety);
    CountResult {
        count,
        boundary,
        computed: eigenvalues.len(),
    }
}

/// Number of eigenvalues below `threshold - safety`. The number of computed
/// pairs grows until one eigenvalue clears `threshold + safety` or the whole
/// spectrum is known.
pub fn count_below(
    solver: &dyn EigenSolver,
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    precond: Option<&dyn Preconditioner>,
    threshold: f64,
    safety: f64,
    opts: &EigOptions,
) -> Result<CountResult> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter("threshold must be positive".into()));
    }
    let n = a.dim();
    let mut k = opts.k.min(n).max(1);
    loop {
        let res = solver.solve(a, m, precond, &EigOptions { k, ..opts.clone() })?.require_converged()?;
        let top = *res.eigenvalues.last().expect("k >= 1");
        if top > threshold + safety || k == n {
            return Ok(count_sorted(&res.eigenvalues, threshold, safety));
        }
        k = (2 * k).min(n);
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    #[test]
    fn count_examples() {
        let a = CsrMatrix::diagonal_matrix(&[1.0, 2.0, 3.0]);
        let m = IdentityOperator(3);
        let dense = DenseSolver::default();
        let c = count_below(&dense, &a, &m, None, 2.5, 0.0, &EigOptions::with_k(1)).unwrap();
        assert_eq!((c.count, c.boundary), (2, false));
        let c = count_below(&dense, &a, &m, None, 2.0, 0.1, &EigOptions::with_k(1)).unwrap();
        assert_eq!((c.count, c.boundary), (1, true));
        assert!(count_below(&dense, &a, &m, None, 0.0, 0.0, &EigOptions::with_k(1)).is_err());
    }

    #[test]
    fn registry_lookup() {
        let r = SolverRegistry::default();
        assert_eq!(r.names(), ["dense", "lobpcg"]);
        assert_eq!(r.get("lobpcg").unwrap().name(), "lobpcg");
        let err = r.get("arpack").err().unwrap();
        assert!(err.to_string().contains("dense, lobpcg"));
    }

    #[test]
    fn options_validation() {
        assert!(EigOptions::with_k(0).validate().is_err());
        let o = EigOptions {
            tol: 0.0,
            ..EigOptions::default()
        };
        assert!(o.validate().is_err());
        assert_eq!(EigOptions::with_k(2).block(), 5);
    }
}
