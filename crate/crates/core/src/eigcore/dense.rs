use nalgebra::{DMatrix, SymmetricEigen};

use super::{EigOptions, EigResult, EigenSolver, LinearOperator, Preconditioner};
use crate::error::{Error, Result};

/// Materializes an operator column by column.
pub fn dense_matrix(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}

/// Dense reference solver: `M = L L^T`, then the symmetric eigenproblem of
/// `L^{-1} A L^{-T}`.
#[derive(Debug, Clone)]
pub struct DenseSolver {
    pub max_dim: usize,
}

impl Default for DenseSolver {
    fn default() -> Self {
        Self { max_dim: 4000 }
    }
}

impl DenseSolver {
    pub fn solve_matrices(&self, a: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> Result<EigResult> {
        let n = a.nrows();
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        let a = (a + a.transpose()) * 0.5;
        let m = (m + m.transpose()) * 0.5;
        let chol = m.clone().cholesky().ok_or_else(|| {
            let min_diag = m.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
            Error::NotPositiveDefinite(min_diag)
        })?;
        let l = chol.l();
        let linv_a = l
            .solve_lower_triangular(&a)
            .expect("Cholesky factor is nonsingular");
        let c = l
            .solve_lower_triangular(&linv_a.transpose())
            .expect("Cholesky factor is nonsingular");
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let k = k.min(n);
        let lt = l.transpose();
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let lambda = eig.eigenvalues[idx];
            let y = eig.eigenvectors.column(idx).into_owned();
            let x = lt
                .solve_upper_triangular(&y)
                .expect("Cholesky factor is nonsingular");
            let mx = &m * &x;
            let r = &a * &x - &mx * lambda;
            residuals.push(r.norm() / mx.norm().max(f64::MIN_POSITIVE));
            values.push(lambda);
            vectors.push(x.as_slice().to_vec());
        }
        Ok(EigResult {
            eigenvalues: values,
            eigenvectors: vectors,
            residuals,
            converged: vec![true; k],
            iterations: 1,
            solver: "dense".into(),
        })
    }
}

impl EigenSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(
        &self,
        a: &dyn LinearOperator,
        m: &dyn LinearOperator,
        _precond: Option<&dyn Preconditioner>,
        opts: &EigOptions,
    ) -> Result<EigResult> {
        opts.validate()?;
        if a.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: m.dim(),
            });
        }
        if a.dim() > self.max_dim {
            return Err(Error::InvalidParameter(format!(
                "dense solver limited to n <= {}, got {}",
                self.max_dim,
                a.dim()
            )));
        }
        self.solve_matrices(&dense_matrix(a), &dense_matrix(m), opts.k)
    }
}
