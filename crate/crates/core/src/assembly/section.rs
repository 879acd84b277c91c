//! Bilinear finite elements on a cross-section given by a cell mask.

use crate::error::{Error, Result};
use crate::geometry::Mask;
use crate::sparse::CsrMatrix;

use super::q1::{element, CellPart, CORNERS};

/// Section matrices on the nodes interior to the union of active cells.
#[derive(Debug, Clone)]
pub struct SectionFem {
    pub origin: [f64; 2],
    pub h: [f64; 2],
    pub n1: usize,
    pub n2: usize,
    /// Grid index `(i, j)` of each degree of freedom.
    pub nodes: Vec<(usize, usize)>,
    pub m: CsrMatrix,
    pub k1: CsrMatrix,
    pub k2: CsrMatrix,
    /// `∫ ∂2 φ_i φ_j`
    pub d2: CsrMatrix,
}

impl SectionFem {
    /// `n1 x n2` grid over the bounding box of `mask`; each mask cell is split
    /// into an equal number of elements.
    pub fn from_mask(mask: &Mask, n1: usize, n2: usize) -> Result<Self> {
        mask.validate()?;
        if n1 % mask.cols != 0 || n2 % mask.rows != 0 || n1 / mask.cols != n2 / mask.rows {
            return Err(Error::InvalidParameter(format!(
                "section grid {n1}x{n2} must refine the {}x{} mask cells uniformly",
                mask.cols, mask.rows
            )));
        }
        let r = n1 / mask.cols;
        let active = |ci: isize, cj: isize| {
            ci >= 0 && cj >= 0 && mask.cell_inside(cj / r as isize, ci / r as isize)
        };
        let h = [mask.cell / r as f64, mask.cell / r as f64];
        Self::assemble(mask.origin, h, n1, n2, |ci, cj| {
            (ci as usize) < n1 && (cj as usize) < n2 && active(ci, cj)
        })
    }

    fn assemble(origin: [f64; 2], h: [f64; 2], n1: usize, n2: usize, active: impl Fn(isize, isize) -> bool) -> Result<Self> {
        let stride = n2 + 1;
        let mut index = vec![None; (n1 + 1) * stride];
        let mut nodes = Vec::new();
        for i in 0..=n1 {
            for j in 0..=n2 {
                let (ii, jj) = (i as isize, j as isize);
                if active(ii - 1, jj - 1) && active(ii, jj - 1) && active(ii - 1, jj) && active(ii, jj) {
                    index[i * stride + j] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Degenerate("section has no interior nodes".into()));
        }
        let e = element(h[0], h[1], CellPart::Whole);
        let (mut mt, mut k1t, mut k2t, mut dt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for ci in 0..n1 {
            for cj in 0..n2 {
                if !active(ci as isize, cj as isize) {
                    continue;
                }
                let ids: Vec<Option<usize>> = CORNERS
                    .iter()
                    .map(|&(di, dj)| index[(ci + di) * stride + cj + dj])
                    .collect();
                for a in 0..4 {
                    for b in 0..4 {
                        if let (Some(p), Some(q)) = (ids[a], ids[b]) {
                            mt.push((p, q, e.mass[a][b]));
                            k1t.push((p, q, e.k11[a][b]));
                            k2t.push((p, q, e.k22[a][b]));
                            dt.push((p, q, e.d2[a][b]));
                        }
                    }
                }
            }
        }
        let n = nodes.len();
        Ok(Self {
            origin,
            h,
            n1,
            n2,
            nodes,
            m: CsrMatrix::from_triplets(n, n, mt),
            k1: CsrMatrix::from_triplets(n, n, k1t),
            k2: CsrMatrix::from_triplets(n, n, k2t),
            d2: CsrMatrix::from_triplets(n, n, dt),
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::fem1d::{fem1d, BoundaryCondition::Dirichlet};

    #[test]
    fn full_mask_reproduces_tensor_factors() {
        let mask = Mask::from_fn(3, 3, 1.0 / 3.0, [0.0, 0.0], |_, _| true).unwrap();
        let s = SectionFem::from_mask(&mask, 6, 6).unwrap();
        let f = fem1d(6, 1.0, Dirichlet, Dirichlet).unwrap();
        let m = f.m.kron(&f.m);
        let k1 = f.k.kron(&f.m);
        let d2 = f.m.kron(&f.d);
        assert_eq!(s.dim(), 25);
        for (i, j, v) in m.triplets() {
            assert!((s.m.get(i, j) - v).abs() < 1e-15);
        }
        for (i, j, v) in k1.triplets() {
            assert!((s.k1.get(i, j) - v).abs() < 1e-13);
        }
        for (i, j, v) in d2.triplets() {
            assert!((s.d2.get(i, j) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn l_shape_drops_the_missing_quadrant() {
        let mask = Mask::l_shape(1).unwrap();
        let s = SectionFem::from_mask(&mask, 8, 8).unwrap();
        // nodes with i, j >= 4 touch the removed quadrant
        assert_eq!(s.dim(), 49 - 16);
        assert!(SectionFem::from_mask(&mask, 6, 6).is_err());
    }
}
