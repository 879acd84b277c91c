//! Eigenpairs of the cross-section operator `T(beta) = -d11 - (1+beta^2) d22`
//! with Dirichlet conditions, in closed form on rectangles and by the 5-point
//! stencil on general sections.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigcore::{smallest_eigenpairs, EigOptions, RestrictedPreconditioner, TensorPreconditioner};
use crate::error::{Error, Result};
use crate::geometry::{CrossSectionSpec, Rect, ShearParam};
use crate::sparse::{CsrMatrix, KronSum, KronTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeIndex {
    Pair { m: usize, n: usize },
    Ordinal(usize),
}

/// Representation of the eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeShape {
    /// `amplitude * sin(m pi (y1-a)/(b-a)) * sin(n pi (y2-c)/(d-c))`.
    Sine { rect: Rect, m: usize, n: usize, amplitude: f64 },
    /// Nodal values on the full `(n1+1) x (n2+1)` grid of the bounding box,
    /// `y1` index major, zero at excluded nodes.
    Nodal {
        origin: [f64; 2],
        h: [f64; 2],
        n1: usize,
        n2: usize,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMode {
    pub index: ModeIndex,
    pub eigenvalue: f64,
    pub shape: ModeShape,
}

impl SectionMode {
    /// Point value of a closed-form mode; `None` for nodal modes.
    pub fn value(&self, y1: f64, y2: f64) -> Option<f64> {
        match &self.shape {
            ModeShape::Sine { rect, m, n, amplitude } => {
                let (s1, s2) = sine_args(rect, *m, *n, y1, y2);
                Some(amplitude * s1.sin() * s2.sin())
            }
            ModeShape::Nodal { .. } => None,
        }
    }

    /// `d chi / d y2` of a closed-form mode.
    pub fn d2(&self, y1: f64, y2: f64) -> Option<f64> {
        match &self.shape {
            ModeShape::Sine { rect, m, n, amplitude } => {
                let (s1, s2) = sine_args(rect, *m, *n, y1, y2);
                let k = *n as f64 * PI / rect.height();
                Some(amplitude * s1.sin() * k * s2.cos())
            }
            ModeShape::Nodal { .. } => None,
        }
    }
}

fn sine_args(rect: &Rect, m: usize, n: usize, y1: f64, y2: f64) -> (f64, f64) {
    (
        m as f64 * PI * (y1 - rect.a) / rect.width(),
        n as f64 * PI * (y2 - rect.c) / rect.height(),
    )
}

/// `2 / sqrt(|S|)`, the L2-normalizing amplitude of a sine product.
pub fn sine_amplitude(rect: &Rect) -> f64 {
    2.0 / (rect.width() * rect.height()).sqrt()
}

/// The `k` smallest `pi^2 (m^2/(b-a)^2 + (1+beta^2) n^2/(d-c)^2)`, ties broken
/// by `(m, n)`.
pub fn rectangle_modes(beta: ShearParam, rect: &Rect, k: usize) -> Result<Vec<SectionMode>> {
    rect.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("mode count must be at least 1".into()));
    }
    let (w2, h2) = (rect.width().powi(2), rect.height().powi(2));
    let s = beta.stretch();
    let mut all = Vec::with_capacity(k * k);
    for m in 1..=k {
        for n in 1..=k {
            let e = PI * PI * ((m * m) as f64 / w2 + s * (n * n) as f64 / h2);
            all.push((e, m, n));
        }
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let amplitude = sine_amplitude(rect);
    Ok(all
        .into_iter()
        .take(k)
        .map(|(e, m, n)| SectionMode {
            index: ModeIndex::Pair { m, n },
            eigenvalue: e,
            shape: ModeShape::Sine {
                rect: *rect,
                m,
                n,
                amplitude,
            },
        })
        .collect())
}

/// Number of grid intervals across the bounding box of the section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionGrid {
    pub n1: usize,
    pub n2: usize,
}

impl SectionGrid {
    pub fn square(n: usize) -> Self {
        Self { n1: n, n2: n }
    }

    /// 128 intervals across rectangles; for masks the smallest multiple of the
    /// cell count reaching 128 along the longer side.
    pub fn default_for(section: &CrossSectionSpec) -> Self {
        match section {
            CrossSectionSpec::Rectangle(_) => Self::square(128),
            CrossSectionSpec::Mask(m) => {
                let per = 128usize.div_ceil(m.rows.max(m.cols)).max(1);
                Self {
                    n1: m.cols * per,
                    n2: m.rows * per,
                }
            }
        }
    }
}

/// Nodes of the 5-point grid that carry unknowns.
pub(crate) struct SectionNodes {
    pub origin: [f64; 2],
    pub h: [f64; 2],
    pub n1: usize,
    pub n2: usize,
    /// Flat indices `(i-1)*(n2-1) + (j-1)` into the interior grid.
    pub keep: Vec<usize>,
}

impl SectionNodes {
    pub fn new(section: &CrossSectionSpec, grid: SectionGrid) -> Result<Self> {
        section.validate()?;
        if grid.n1 < 9 || grid.n2 < 9 {
            return Err(Error::GridTooCoarse(format!(
                "section grid needs at least 8x8 interior nodes, got {}x{}",
                grid.n1.saturating_sub(1),
                grid.n2.saturating_sub(1)
            )));
        }
        let bb = section.bounding_rect();
        let h = [bb.width() / grid.n1 as f64, bb.height() / grid.n2 as f64];
        let origin = [bb.a, bb.c];
        let mut keep = Vec::new();
        for i in 1..grid.n1 {
            for j in 1..grid.n2 {
                let y1 = origin[0] + i as f64 * h[0];
                let y2 = origin[1] + j as f64 * h[1];
                if section.contains(y1, y2) {
                    keep.push((i - 1) * (grid.n2 - 1) + (j - 1));
                }
            }
        }
        if keep.is_empty() {
            return Err(Error::Degenerate("section has no interior grid nodes".into()));
        }
        Ok(Self {
            origin,
            h,
            n1: grid.n1,
            n2: grid.n2,
            keep,
        })
    }
}

fn fd_chain(n: usize, h: f64) -> CsrMatrix {
    let mut t = Vec::with_capacity(3 * n);
    let s = 1.0 / (h * h);
    for i in 0..n {
        t.push((i, i, 2.0 * s));
        if i + 1 < n {
            t.push((i, i + 1, -s));
            t.push((i + 1, i, -s));
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Lowest `k` eigenpairs of the anisotropic 5-point stencil with Dirichlet
/// conditions by node exclusion. Eigenvectors are scaled to unit discrete L2
/// norm and to a nonnegative sum.
pub fn numeric_modes(beta: ShearParam, section: &CrossSectionSpec, grid: SectionGrid, k: usize) -> Result<Vec<SectionMode>> {
    if k == 0 {
        return Err(Error::InvalidParameter("mode count must be at least 1".into()));
    }
    let nodes = SectionNodes::new(section, grid)?;
    let (d1, d2) = (nodes.n1 - 1, nodes.n2 - 1);
    let t1 = fd_chain(d1, nodes.h[0]);
    let t2 = fd_chain(d2, nodes.h[1]).scaled(beta.stretch());
    let full = KronSum::new(
        vec![d1, d2],
        vec![
            KronTerm {
                coeff: 1.0,
                factors: vec![Some(t1.clone()), None],
            },
            KronTerm {
                coeff: 1.0,
                factors: vec![None, Some(t2.clone())],
            },
        ],
    );
    let a = full.to_csr().submatrix(&nodes.keep);
    let n = a.nrows();
    if k > n {
        return Err(Error::InvalidParameter(format!("asked for {k} modes of a {n}-node section")));
    }
    let eye = CsrMatrix::identity(d1);
    let trailing = [(t2.to_dense(), DMatrix::identity(d2, d2))];
    let tensor = TensorPreconditioner::with_relative_shift((&t1, &eye), &trailing, 0.9)?;
    let precond = RestrictedPreconditioner::new(tensor, nodes.keep.clone(), d1 * d2);
    let m = crate::eigcore::IdentityOperator(n);
    let opts = EigOptions {
        tol: 1e-10,
        ..EigOptions::with_k(k)
    };
    let res = smallest_eigenpairs(&a, &m, Some(&precond), &opts)?.require_converged()?;
    let area = nodes.h[0] * nodes.h[1];
    let mut out = Vec::with_capacity(k);
    for (idx, (lambda, v)) in res.eigenvalues.iter().zip(&res.eigenvectors).enumerate() {
        let norm = (v.iter().map(|x| x * x).sum::<f64>() * area).sqrt();
        let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let mut values = vec![0.0; (nodes.n1 + 1) * (nodes.n2 + 1)];
        for (&flat, &x) in nodes.keep.iter().zip(v) {
            let (i, j) = (flat / d2 + 1, flat % d2 + 1);
            values[i * (nodes.n2 + 1) + j] = sign * x / norm;
        }
        out.push(SectionMode {
            index: ModeIndex::Ordinal(idx + 1),
            eigenvalue: *lambda,
            shape: ModeShape::Nodal {
                origin: nodes.origin,
                h: nodes.h,
                n1: nodes.n1,
                n2: nodes.n2,
                values,
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionConstants {
    /// `||d chi / d y2||^2`.
    pub kappa: f64,
    /// `∫ y2 chi d chi / d y2`, equal to -1/2 for any normalized Dirichlet mode.
    pub moment: f64,
}

const NORM_TOL: f64 = 1e-6;

pub fn section_constants(chi: &SectionMode) -> Result<SectionConstants> {
    match &chi.shape {
        ModeShape::Sine { rect, m: _, n, amplitude } => {
            let expected = sine_amplitude(rect);
            if ((amplitude / expected).powi(2) - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "mode is not L2-normalized (amplitude {amplitude}, expected {expected})"
                )));
            }
            let k = *n as f64 * PI / rect.height();
            // amplitude^2 (b-a)/2 from the y1 factor times a y2 integral
            let y1_factor = amplitude * amplitude * rect.width() / 2.0;
            let moment = y1_factor
                * composite_gauss(rect.c, rect.d, 4 * n, |y2| {
                    let t = k * (y2 - rect.c);
                    y2 * t.sin() * k * t.cos()
                });
            Ok(SectionConstants { kappa: k * k, moment })
        }
        ModeShape::Nodal {
            origin,
            h,
            n1,
            n2,
            values,
        } => {
            let area = h[0] * h[1];
            let at = |i: usize, j: usize| values[i * (n2 + 1) + j];
            let norm2: f64 = values.iter().map(|v| v * v).sum::<f64>() * area;
            if (norm2 - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidParameter(format!("mode is not L2-normalized (norm^2 = {norm2})")));
            }
            // kappa from one-sided differences on grid edges (the stencil
            // energy); centred differences on nodes would drop the boundary
            // flux and converge only at first order
            let mut kappa = 0.0;
            let mut moment = 0.0;
            for i in 1..*n1 {
                for j in 0..*n2 {
                    let g = (at(i, j + 1) - at(i, j)) / h[1];
                    kappa += g * g;
                    // edge midpoint rule for y2 d(chi^2/2)/dy2: summation by
                    // parts then gives -norm^2/2 exactly, as in the continuum
                    let y = origin[1] + (j as f64 + 0.5) * h[1];
                    let c = 0.5 * (at(i, j) + at(i, j + 1));
                    moment += y * c * g;
                }
            }
            Ok(SectionConstants {
                kappa: kappa * area,
                moment: moment * area,
            })
        }
    }
}

/// 16-point Gauss–Legendre on `panels` equal subintervals of `(a, b)`.
pub fn composite_gauss(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    composite_gauss_order(a, b, panels, 16, f)
}

pub fn composite_gauss_order(a: f64, b: f64, panels: usize, order: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 1"));
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * w;
            rule.integrate(lo, lo + w, &f)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mask;
    use approx::assert_relative_eq;

    const PI2: f64 = PI * PI;

    fn b(x: f64) -> ShearParam {
        ShearParam::new(x).unwrap()
    }

    #[test]
    fn rectangle_mode_examples() {
        let sq = Rect::unit_square();
        assert_relative_eq!(rectangle_modes(b(1.0), &sq, 1).unwrap()[0].eigenvalue, 3.0 * PI2);
        assert_relative_eq!(rectangle_modes(ShearParam::straight(), &sq, 1).unwrap()[0].eigenvalue, 2.0 * PI2);
        let two = rectangle_modes(b(1.0), &sq, 2).unwrap();
        assert_relative_eq!(two[1].eigenvalue, 6.0 * PI2);
        assert_eq!(two[1].index, ModeIndex::Pair { m: 2, n: 1 });
    }

    #[test]
    fn ties_break_lexicographically() {
        let modes = rectangle_modes(ShearParam::straight(), &Rect::unit_square(), 3).unwrap();
        assert_eq!(modes[1].index, ModeIndex::Pair { m: 1, n: 2 });
        assert_eq!(modes[2].index, ModeIndex::Pair { m: 2, n: 1 });
    }

    #[test]
    fn fd_matches_closed_form_discrete_eigenvalue() {
        let sq = CrossSectionSpec::Rectangle(Rect::unit_square());
        let n = 32;
        let h = 1.0 / n as f64;
        let fd = |k: f64| 4.0 / (h * h) * (k * PI * h / 2.0).sin().powi(2);
        let modes = numeric_modes(b(1.0), &sq, SectionGrid::square(n), 2).unwrap();
        assert_relative_eq!(modes[0].eigenvalue, fd(1.0) + 2.0 * fd(1.0), max_relative = 1e-9);
        assert_relative_eq!(modes[1].eigenvalue, fd(2.0) + 2.0 * fd(1.0), max_relative = 1e-9);
    }

    #[test]
    fn numeric_examples_at_128() {
        let sq = CrossSectionSpec::Rectangle(Rect::unit_square());
        let e0 = numeric_modes(ShearParam::straight(), &sq, SectionGrid::square(128), 1).unwrap()[0].eigenvalue;
        assert!((e0 / (2.0 * PI2) - 1.0).abs() < 5e-3);
        let e1 = numeric_modes(b(1.0), &sq, SectionGrid::square(128), 1).unwrap()[0].eigenvalue;
        assert!((e1 / (3.0 * PI2) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn l_shape_self_convergence() {
        let mask = CrossSectionSpec::Mask(Mask::l_shape(1).unwrap());
        let coarse = numeric_modes(b(1.0), &mask, SectionGrid::square(128), 1).unwrap()[0].eigenvalue;
        let fine = numeric_modes(b(1.0), &mask, SectionGrid::square(256), 1).unwrap()[0].eigenvalue;
        assert!((coarse / fine - 1.0).abs() < 1e-2, "{coarse} vs {fine}");
        assert!(coarse > fine);
    }

    #[test]
    fn closed_form_constants() {
        let sq = rectangle_modes(b(1.0), &Rect::unit_square(), 1).unwrap();
        let c = section_constants(&sq[0]).unwrap();
        assert_relative_eq!(c.kappa, PI2);
        assert!((c.moment + 0.5).abs() < 1e-12);
        let tall = rectangle_modes(b(0.3), &Rect::new(0.0, 1.0, 0.0, 2.0).unwrap(), 1).unwrap();
        let c = section_constants(&tall[0]).unwrap();
        assert_relative_eq!(c.kappa, PI2 / 4.0);
        assert!((c.moment + 0.5).abs() < 1e-12);
        let shifted = rectangle_modes(b(2.0), &Rect::new(-1.0, 0.5, 3.0, 3.7).unwrap(), 4).unwrap();
        for mode in &shifted {
            assert!((section_constants(mode).unwrap().moment + 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn unnormalized_modes_are_rejected() {
        let mut m = rectangle_modes(b(1.0), &Rect::unit_square(), 1).unwrap().remove(0);
        if let ModeShape::Sine { amplitude, .. } = &mut m.shape {
            *amplitude *= 1.1;
        }
        assert!(section_constants(&m).is_err());
    }

    #[test]
    fn nodal_constants_on_the_square() {
        let sq = CrossSectionSpec::Rectangle(Rect::unit_square());
        let m = numeric_modes(b(1.0), &sq, SectionGrid::square(256), 1).unwrap();
        let c = section_constants(&m[0]).unwrap();
        assert!((c.moment + 0.5).abs() < 1e-4, "{}", c.moment);
        assert!((c.kappa / PI2 - 1.0).abs() < 1e-4, "{}", c.kappa);
    }

    #[test]
    fn tiny_grids_are_rejected() {
        let sq = CrossSectionSpec::Rectangle(Rect::unit_square());
        assert!(matches!(
            numeric_modes(b(1.0), &sq, SectionGrid::square(4), 1),
            Err(Error::GridTooCoarse(_))
        ));
    }
}
