//! Bilinear elements on the right triangle `{-A < x < 0, 0 < y2 < x + A}`,
//! cut out of a uniform square grid along the diagonal.
//!
//! With `u = x + A` and `v = y2`, cell `(i, j)` covers
//! `[ih, (i+1)h] x [jh, (j+1)h]` and lies inside for `j < i`, is cut in half
//! by the diagonal for `j == i` and lies outside for `j > i`. Cut cells keep
//! all four corner functions restricted to their lower half, so the space is
//! the restriction of the full grid space and stays conforming.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

use super::q1::{element, interpolate, CellPart, CORNERS};

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    /// Grid index `(i, j)` of each degree of freedom (`x = -A + ih`, `y2 = jh`).
    pub nodes: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
    pub m: CsrMatrix,
    pub kxx: CsrMatrix,
    pub kyy: CsrMatrix,
}

impl TriangleMesh {
    /// Dirichlet on `y2 = 0`, natural conditions on `x = 0` and the diagonal.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::GridTooCoarse(format!(
                "triangle needs at least 4 cells along each leg, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Degenerate(format!("triangle leg must be positive, got {half_width}")));
        }
        let h = half_width / n as f64;
        let stride = n + 1;
        let mut index = vec![None; stride * stride];
        let mut nodes = Vec::new();
        for i in 0..=n {
            for j in 1..=n {
                // touches an inside or cut cell (ci, cj) with cj <= ci
                let touches = (i.saturating_sub(1)..=i.min(n - 1))
                    .any(|ci| (j.saturating_sub(1)..=j.min(n - 1)).any(|cj| cj <= ci));
                if touches {
                    index[i * stride + j] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        let whole = element(h, h, CellPart::Whole);
        let half = element(h, h, CellPart::BelowDiagonal);
        let (mut mt, mut kxt, mut kyt) = (Vec::new(), Vec::new(), Vec::new());
        for ci in 0..n {
            for cj in 0..=ci {
                let e = if cj == ci { &half } else { &whole };
                let ids: Vec<Option<usize>> = CORNERS
                    .iter()
                    .map(|&(di, dj)| index[(ci + di) * stride + cj + dj])
                    .collect();
                for a in 0..4 {
                    for b in 0..4 {
                        if let (Some(p), Some(q)) = (ids[a], ids[b]) {
                            mt.push((p, q, e.mass[a][b]));
                            kxt.push((p, q, e.k11[a][b]));
                            kyt.push((p, q, e.k22[a][b]));
                        }
                    }
                }
            }
        }
        let dim = nodes.len();
        Ok(Self {
            half_width,
            n,
            h,
            nodes,
            index,
            m: CsrMatrix::from_triplets(dim, dim, mt),
            kxx: CsrMatrix::from_triplets(dim, dim, kxt),
            kyy: CsrMatrix::from_triplets(dim, dim, kyt),
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn corner_values(&self, values: &[f64], ci: usize, cj: usize) -> [f64; 4] {
        let stride = self.n + 1;
        let mut out = [0.0; 4];
        for (a, &(di, dj)) in CORNERS.iter().enumerate() {
            if let Some(k) = self.index[(ci + di) * stride + cj + dj] {
                out[a] = values[k];
            }
        }
        out
    }

    /// Relative size of the conormal flux `cx ψ_x n_x + cy ψ_y n_y` of a
    /// nodal function across the slanted face: its L2 norm on the face over
    /// the L2 norm of `(cx ψ_x, cy ψ_y)` there.
    pub fn slant_flux_residual(&self, values: &[f64], cx: f64, cy: f64) -> f64 {
        let nrm = std::f64::consts::FRAC_1_SQRT_2;
        let pts = [0.5 - 0.5 * (0.6f64).sqrt(), 0.5, 0.5 + 0.5 * (0.6f64).sqrt()];
        let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let (mut flux, mut total) = (0.0, 0.0);
        for c in 0..self.n {
            let cv = self.corner_values(values, c, c);
            for (&t, &w) in pts.iter().zip(&wts) {
                // the face is the cell diagonal xi = eta
                let (_, g) = interpolate(cv, self.h, self.h, t, t);
                let (fx, fy) = (cx * g[0], cy * g[1]);
                let f = -fx * nrm + fy * nrm;
                flux += w * f * f;
                total += w * (fx * fx + fy * fy);
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (flux / total).sqrt()
        }
    }

    /// Nodal coordinates `(x, y2)`.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.nodes
            .iter()
            .map(|&(i, j)| (-self.half_width + i as f64 * self.h, j as f64 * self.h))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigcore::DenseSolver;
    use std::f64::consts::PI;

    #[test]
    fn mass_integrates_to_triangle_area() {
        let t = TriangleMesh::new(1.3, 7).unwrap();
        // the constant function is not in the space (Dirichlet at y2 = 0), so
        // integrate v = y2 instead: ∫ y2^2 = A^4 / 12
        let v: Vec<f64> = t.coords().iter().map(|&(_, y)| y).collect();
        let mut mv = vec![0.0; v.len()];
        t.m.matvec(&v, &mut mv);
        let integral: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        assert!((integral - 1.3f64.powi(4) / 12.0).abs() < 1e-12);
        // ∫ |∂y v|^2 = area
        t.kyy.matvec(&v, &mut mv);
        let e: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        assert!((e - 1.3 * 1.3 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_triangle_eigenvalues() {
        // symmetrized sine products: pi^2 ((2p-1)^2 + (2q-1)^2) / (4 A^2)
        let a = 1.0;
        let t = TriangleMesh::new(a, 24).unwrap();
        let k = t.kxx.add_scaled(&t.kyy, 1.0);
        let r = DenseSolver::default().solve_matrices(&k.to_dense(), &t.m.to_dense(), 2).unwrap();
        let e1 = PI * PI * 2.0 / 4.0;
        let e2 = PI * PI * 10.0 / 4.0;
        assert!(r.eigenvalues[0] > e1 && (r.eigenvalues[0] / e1 - 1.0) < 5e-3);
        assert!(r.eigenvalues[1] > e2 && (r.eigenvalues[1] / e2 - 1.0) < 2e-2);
    }

    #[test]
    fn slant_flux_of_interpolants() {
        let a = 1.0;
        let t = TriangleMesh::new(a, 16).unwrap();
        let k = PI / (2.0 * a);
        // symmetric under (u, v) -> (v, u), so its interpolant has no flux
        let sym: Vec<f64> = t
            .coords()
            .iter()
            .map(|&(x, y)| 2.0 * ((x + a) * k).sin() * (y * k).sin())
            .collect();
        assert!(t.slant_flux_residual(&sym, 1.0, 1.0) < 1e-12);
        let ramp: Vec<f64> = t.coords().iter().map(|&(_, y)| y).collect();
        assert!((t.slant_flux_residual(&ramp, 1.0, 1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }
}
