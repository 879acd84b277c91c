//! Bilinear element matrices on an `h1 x h2` cell, over the whole cell or
//! over the half below its diagonal.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Local node order: `(0,0), (1,0), (0,1), (1,1)` in `(xi, eta)`.
pub const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellPart {
    Whole,
    /// `{eta < xi}`: the half below the diagonal through `(0,0)` and `(1,1)`.
    BelowDiagonal,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ElementMatrices {
    /// `∫ φ_a φ_b`
    pub mass: [[f64; 4]; 4],
    /// `∫ ∂1 φ_a ∂1 φ_b`
    pub k11: [[f64; 4]; 4],
    /// `∫ ∂2 φ_a ∂2 φ_b`
    pub k22: [[f64; 4]; 4],
    /// `∫ ∂2 φ_a φ_b`
    pub d2: [[f64; 4]; 4],
}

fn basis(a: usize, xi: f64, eta: f64) -> (f64, f64, f64) {
    let (i, j) = CORNERS[a];
    let (fx, dfx) = if i == 0 { (1.0 - xi, -1.0) } else { (xi, 1.0) };
    let (fy, dfy) = if j == 0 { (1.0 - eta, -1.0) } else { (eta, 1.0) };
    (fx * fy, dfx * fy, fx * dfy)
}

/// Reference points and weights on the unit square (3x3 Gauss), or on the
/// lower triangle by the collapsed map `xi = s, eta = s t` with Jacobian `s`.
/// Both rules integrate the bilinear products exactly.
fn rule(part: CellPart) -> Vec<(f64, f64, f64)> {
    let g = GaussLegendre::new(NonZeroUsize::new(3).expect("nonzero"));
    let pts: Vec<(f64, f64)> = g
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let mut out = Vec::with_capacity(9);
    for &(s, ws) in &pts {
        for &(t, wt) in &pts {
            match part {
                CellPart::Whole => out.push((s, t, ws * wt)),
                CellPart::BelowDiagonal => out.push((s, s * t, ws * wt * s)),
            }
        }
    }
    out
}

pub fn element(h1: f64, h2: f64, part: CellPart) -> ElementMatrices {
    let mut e = ElementMatrices::default();
    let area = h1 * h2;
    for (xi, eta, w) in rule(part) {
        let vals: Vec<(f64, f64, f64)> = (0..4).map(|a| basis(a, xi, eta)).collect();
        for a in 0..4 {
            for b in 0..4 {
                let (pa, ga1, ga2) = vals[a];
                let (pb, gb1, gb2) = vals[b];
                e.mass[a][b] += w * area * pa * pb;
                e.k11[a][b] += w * area * ga1 * gb1 / (h1 * h1);
                e.k22[a][b] += w * area * ga2 * gb2 / (h2 * h2);
                e.d2[a][b] += w * area * ga2 / h2 * pb;
            }
        }
    }
    e
}

/// Value and gradient of the bilinear interpolant of `corner_values` at the
/// reference point `(xi, eta)` of an `h1 x h2` cell.
pub fn interpolate(corner_values: [f64; 4], h1: f64, h2: f64, xi: f64, eta: f64) -> (f64, [f64; 2]) {
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for (a, &c) in corner_values.iter().enumerate() {
        let (p, d1, d2) = basis(a, xi, eta);
        v += c * p;
        g[0] += c * d1 / h1;
        g[1] += c * d2 / h2;
    }
    (v, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_cell_is_tensor_product_of_1d_matrices() {
        let (h1, h2) = (0.3, 0.7);
        let e = element(h1, h2, CellPart::Whole);
        let m1 = |h: f64, i: usize, j: usize| if i == j { h / 3.0 } else { h / 6.0 };
        let k1 = |h: f64, i: usize, j: usize| if i == j { 1.0 / h } else { -1.0 / h };
        for a in 0..4 {
            for b in 0..4 {
                let ((ia, ja), (ib, jb)) = (CORNERS[a], CORNERS[b]);
                assert!((e.mass[a][b] - m1(h1, ia, ib) * m1(h2, ja, jb)).abs() < 1e-15);
                assert!((e.k11[a][b] - k1(h1, ia, ib) * m1(h2, ja, jb)).abs() < 1e-14);
                assert!((e.k22[a][b] - m1(h1, ia, ib) * k1(h2, ja, jb)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn half_cell_moments() {
        let e = element(1.0, 1.0, CellPart::BelowDiagonal);
        let total: f64 = e.mass.iter().flatten().sum();
        assert!((total - 0.5).abs() < 1e-15);
        // ∫ (xi eta)^2 over {eta < xi} = 1/18
        assert!((e.mass[3][3] - 1.0 / 18.0).abs() < 1e-15);
        // constants have no energy
        for row in e.k11.iter().chain(e.k22.iter()) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
        let whole = element(1.0, 1.0, CellPart::Whole);
        let upper_mass = whole.mass[2][2] - e.mass[2][2];
        // ∫ ((1-xi) eta)^2 over {eta > xi} = 1/9 - 1/180
        assert!((upper_mass - 19.0 / 180.0).abs() < 1e-15);
    }
}
