use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Piecewise-linear elements on a uniform grid of an interval.
///
/// `k = ∫ φ_i' φ_j'`, `m = ∫ φ_i φ_j` and `d = ∫ φ_i' φ_j` restricted to the
/// free nodes; Dirichlet end nodes are removed.
#[derive(Debug, Clone)]
pub struct Fem1D {
    pub intervals: usize,
    pub h: f64,
    pub origin: f64,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    /// Grid node index of each degree of freedom.
    pub dof_nodes: Vec<usize>,
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub d: CsrMatrix,
}

impl Fem1D {
    pub fn new(intervals: usize, origin: f64, length: f64, left: BoundaryCondition, right: BoundaryCondition) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::GridTooCoarse(format!("need at least 2 intervals, got {intervals}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Degenerate(format!("interval length must be positive, got {length}")));
        }
        let h = length / intervals as f64;
        let first = usize::from(left == BoundaryCondition::Dirichlet);
        let last = if right == BoundaryCondition::Dirichlet {
            intervals - 1
        } else {
            intervals
        };
        let dof_nodes: Vec<usize> = (first..=last).collect();
        let mut fem = Self {
            intervals,
            h,
            origin,
            left,
            right,
            dof_nodes,
            k: CsrMatrix::identity(0),
            m: CsrMatrix::identity(0),
            d: CsrMatrix::identity(0),
        };
        let (k, m) = fem.assemble();
        fem.k = k;
        fem.m = m;
        fem.d = fem.skew_weighted(|_| 1.0);
        Ok(fem)
    }

    pub fn dim(&self) -> usize {
        self.dof_nodes.len()
    }

    pub fn length(&self) -> f64 {
        self.h * self.intervals as f64
    }

    pub fn node_coord(&self, node: usize) -> f64 {
        self.origin + node as f64 * self.h
    }

    pub fn dof_coords(&self) -> Vec<f64> {
        self.dof_nodes.iter().map(|&n| self.node_coord(n)).collect()
    }

    fn dof_of_node(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.intervals + 1];
        for (dof, &node) in self.dof_nodes.iter().enumerate() {
            map[node] = Some(dof);
        }
        map
    }

    fn assemble(&self) -> (CsrMatrix, CsrMatrix) {
        let h = self.h;
        let ke = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let me = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        let map = self.dof_of_node();
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for e in 0..self.intervals {
            let nodes = [e, e + 1];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (map[nodes[a]], map[nodes[b]]) {
                        kt.push((i, j, ke[a][b]));
                        mt.push((i, j, me[a][b]));
                    }
                }
            }
        }
        let n = self.dim();
        (CsrMatrix::from_triplets(n, n, kt), CsrMatrix::from_triplets(n, n, mt))
    }

    /// `∫ w(x) φ_i' φ_j` with `w` evaluated at element midpoints (elementwise
    /// constant weights, e.g. `sign(x)`).
    pub fn skew_weighted(&self, weight: impl Fn(f64) -> f64) -> CsrMatrix {
        // φ_0' = -1/h, φ_1' = 1/h, ∫ φ_j = h/2 on each element
        let de = [[-0.5, -0.5], [0.5, 0.5]];
        let map = self.dof_of_node();
        let mut t = Vec::new();
        for e in 0..self.intervals {
            let mid = self.origin + (e as f64 + 0.5) * self.h;
            let w = weight(mid);
            let nodes = [e, e + 1];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (map[nodes[a]], map[nodes[b]]) {
                        t.push((i, j, w * de[a][b]));
                    }
                }
            }
        }
        let n = self.dim();
        CsrMatrix::from_triplets(n, n, t)
    }
}

/// Shorthand for [`Fem1D::new`] on `(0, length)`.
pub fn fem1d(intervals: usize, length: f64, left: BoundaryCondition, right: BoundaryCondition) -> Result<Fem1D> {
    Fem1D::new(intervals, 0.0, length, left, right)
}
