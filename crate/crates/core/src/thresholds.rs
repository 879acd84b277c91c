//! Closed-form thresholds: the essential-spectrum bottom `E1(beta)`, the
//! uniqueness bound `beta*` for rectangles and the prism lower-bound factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cross_section::{self, SectionGrid};
use crate::error::{Error, Result};
use crate::geometry::{CrossSectionSpec, Rect, ShearParam};

const PI2: f64 = PI * PI;

/// `2/sqrt(3)`, the aspect ratio where the `beta*` formula switches branch.
pub const BRANCH_POINT: f64 = 1.154_700_538_379_251_5;

/// Bottom of the essential spectrum, `E1(beta)`. Closed form on rectangles,
/// finite differences on a default grid for masks.
pub fn ess_threshold(beta: ShearParam, section: &CrossSectionSpec) -> Result<f64> {
    section.validate()?;
    match section {
        CrossSectionSpec::Rectangle(r) => Ok(rect_threshold(beta, r)),
        CrossSectionSpec::Mask(_) => {
            let modes = cross_section::numeric_modes(beta, section, SectionGrid::default_for(section), 1)?;
            Ok(modes[0].eigenvalue)
        }
    }
}

/// `pi^2 (1/(b-a)^2 + (1+beta^2)/(d-c)^2)`.
pub fn rect_threshold(beta: ShearParam, rect: &Rect) -> f64 {
    PI2 * (1.0 / rect.width().powi(2) + beta.stretch() / rect.height().powi(2))
}

/// Piecewise uniqueness bound in the aspect ratio `R = (d-c)/(b-a)`.
///
/// For `R > 2/sqrt(3)` the inner radical `sqrt(49 + 2R^2 + R^4)` is evaluated
/// as `sqrt((R^2+1)^2 + 48)` and the cancellation in `3 - R^2 + radical` is
/// removed by rationalizing: `3 - R^2 + s = 4 + 48 / (s + R^2 + 1)`.
pub fn beta_star(r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("aspect ratio must be positive, got {r}")));
    }
    if r <= BRANCH_POINT {
        return Ok(3f64.sqrt() * r);
    }
    let q = r * r + 1.0;
    let s = q.hypot(48f64.sqrt());
    Ok(0.5 * (4.0 + 48.0 / (s + q)).sqrt())
}

/// `min{(1+beta^2)/(2 beta^2), 1, (1+beta^2)/2}`.
pub fn bound_factor(beta: ShearParam) -> f64 {
    let b2 = beta.value() * beta.value();
    let s = 1.0 + b2;
    let first = if b2 > 0.0 { s / (2.0 * b2) } else { f64::INFINITY };
    first.min(1.0).min(s / 2.0)
}

/// Ground value of the prism problem at `beta = 1`: `pi^2 (1/(d-c)^2 + 1/(b-a)^2)`.
pub fn prism_mu1(rect: &Rect) -> f64 {
    PI2 * (1.0 / rect.height().powi(2) + 1.0 / rect.width().powi(2))
}

/// Second value of the prism problem at `beta = 1`, by aspect-ratio branch.
pub fn prism_mu2(rect: &Rect) -> f64 {
    let (w2, h2) = (rect.width().powi(2), rect.height().powi(2));
    if rect.aspect_ratio() <= BRANCH_POINT {
        PI2 * (1.0 / h2 + 4.0 / w2)
    } else {
        PI2 * (5.0 / h2 + 1.0 / w2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UniquenessDiagnostic {
    pub beta: f64,
    pub beta_star: f64,
    pub aspect_ratio: f64,
    /// `beta < beta*`, the stated sufficient condition.
    pub satisfied: bool,
    /// `bound_factor(beta) * mu2(beta = 1)`, the lower bound for the prism value.
    pub lhs: f64,
    /// `pi^2 (1/(b-a)^2 + (1+beta^2)/(d-c)^2)`.
    pub rhs: f64,
    /// Whether `lhs >= rhs` holds for this pair.
    pub chain_holds: bool,
    /// `R` sits close to the branch point, where the two branches of `beta*`
    /// disagree (2 vs about 1.498).
    pub near_discontinuity: bool,
}

/// Tests `beta < beta*(R)` and reports both sides of the prism inequality.
pub fn uniqueness_condition(beta: ShearParam, rect: &Rect) -> Result<UniquenessDiagnostic> {
    rect.validate()?;
    let r = rect.aspect_ratio();
    let bs = beta_star(r)?;
    let lhs = bound_factor(beta) * prism_mu2(rect);
    let rhs = rect_threshold(beta, rect);
    Ok(UniquenessDiagnostic {
        beta: beta.value(),
        beta_star: bs,
        aspect_ratio: r,
        satisfied: beta.value() < bs,
        lhs,
        rhs,
        chain_holds: lhs >= rhs,
        near_discontinuity: (r - BRANCH_POINT).abs() <= 1e-3 * BRANCH_POINT,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ThresholdReport {
    pub beta: f64,
    pub e1: f64,
    pub e2: f64,
    pub ess_bottom: f64,
    pub aspect_ratio: Option<f64>,
    pub beta_star: Option<f64>,
    pub bound_factor: f64,
}

pub fn threshold_report(beta: ShearParam, section: &CrossSectionSpec) -> Result<ThresholdReport> {
    section.validate()?;
    let (e1, e2) = match section {
        CrossSectionSpec::Rectangle(r) => {
            let m = cross_section::rectangle_modes(beta, r, 2)?;
            (m[0].eigenvalue, m[1].eigenvalue)
        }
        CrossSectionSpec::Mask(_) => {
            let m = cross_section::numeric_modes(beta, section, SectionGrid::default_for(section), 2)?;
            (m[0].eigenvalue, m[1].eigenvalue)
        }
    };
    let rect = section.as_rect();
    Ok(ThresholdReport {
        beta: beta.value(),
        e1,
        e2,
        ess_bottom: e1,
        aspect_ratio: rect.map(Rect::aspect_ratio),
        beta_star: rect.map(|r| beta_star(r.aspect_ratio())).transpose()?,
        bound_factor: bound_factor(beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn b(x: f64) -> ShearParam {
        ShearParam::new(x).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let sq = CrossSectionSpec::Rectangle(Rect::unit_square());
        assert_relative_eq!(ess_threshold(b(1.0), &sq).unwrap(), 3.0 * PI2, max_relative = 1e-15);
        let strip = CrossSectionSpec::Rectangle(Rect::new(0.0, 1.0, 0.0, PI * 2f64.sqrt()).unwrap());
        assert_relative_eq!(ess_threshold(b(1.0), &strip).unwrap(), PI2 + 1.0, max_relative = 1e-14);
        assert_relative_eq!(ess_threshold(ShearParam::straight(), &sq).unwrap(), 2.0 * PI2, max_relative = 1e-15);
    }

    #[test]
    fn beta_star_examples() {
        assert_relative_eq!(beta_star(1.0).unwrap(), 3f64.sqrt(), max_relative = 1e-15);
        // the printed second branch, evaluated directly
        let printed = |r: f64| 0.5 * (-r * r + 3.0 + (49.0 + 2.0 * r * r + r.powi(4)).sqrt()).sqrt();
        assert_relative_eq!(beta_star(2.0).unwrap(), printed(2.0), max_relative = 1e-14);
        assert!((beta_star(2.0).unwrap() - 1.37332).abs() < 5e-6);
        let r = PI * 2f64.sqrt();
        assert_relative_eq!(beta_star(r).unwrap(), printed(r), max_relative = 1e-13);
        assert!((beta_star(r).unwrap() - 1.13210).abs() < 5e-6);
        assert!(beta_star(0.0).is_err());
        assert!(beta_star(-1.0).is_err());
    }

    #[test]
    fn beta_star_is_discontinuous_at_the_branch_point() {
        let left = beta_star(BRANCH_POINT).unwrap();
        let right = beta_star(BRANCH_POINT * (1.0 + 1e-12)).unwrap();
        assert_relative_eq!(left, 2.0, max_relative = 1e-14);
        assert!((right - 1.498).abs() < 1e-3);
        let rect = Rect::new(0.0, 1.0, 0.0, BRANCH_POINT).unwrap();
        assert!(uniqueness_condition(b(1.0), &rect).unwrap().near_discontinuity);
    }

    #[test]
    fn fused_radical_survives_large_ratios() {
        // beta* -> 1 as R grows; the naive form loses all digits near R = 1e4
        let v = beta_star(1e4).unwrap();
        assert_relative_eq!(v, 0.5 * (4.0f64 + 48.0 / (2e8 + 2.0 + 24e-8)).sqrt(), max_relative = 1e-15);
        assert!(v > 1.0);
    }

    #[test]
    fn bound_factor_examples() {
        assert_eq!(bound_factor(b(1.0)), 1.0);
        assert_relative_eq!(bound_factor(b(2.0)), 0.625);
        assert_relative_eq!(bound_factor(b(0.5)), 0.625);
    }

    #[test]
    fn uniqueness_examples() {
        let strip = Rect::new(0.0, 1.0, 0.0, PI * 2f64.sqrt()).unwrap();
        assert!(uniqueness_condition(b(1.0), &strip).unwrap().satisfied);
        assert!(!uniqueness_condition(b(2.0), &Rect::unit_square()).unwrap().satisfied);
        assert!(!uniqueness_condition(b(3f64.sqrt()), &Rect::unit_square()).unwrap().satisfied);
    }

    #[test]
    fn prism_values_by_branch() {
        assert_relative_eq!(prism_mu1(&Rect::unit_square()), 2.0 * PI2);
        assert_relative_eq!(prism_mu2(&Rect::unit_square()), 5.0 * PI2);
        let tall = Rect::new(0.0, 1.0, 0.0, 2.0).unwrap();
        assert_relative_eq!(prism_mu2(&tall), PI2 * (5.0 / 4.0 + 1.0));
    }

    #[test]
    fn report_for_unit_square() {
        let r = threshold_report(b(1.0), &CrossSectionSpec::Rectangle(Rect::unit_square())).unwrap();
        assert_relative_eq!(r.e1, 3.0 * PI2, max_relative = 1e-15);
        assert_relative_eq!(r.e2, 6.0 * PI2, max_relative = 1e-15);
        assert_relative_eq!(r.beta_star.unwrap(), 3f64.sqrt());
        assert_eq!(r.aspect_ratio, Some(1.0));
    }
}
