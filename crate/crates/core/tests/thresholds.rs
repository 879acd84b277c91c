use std::f64::consts::PI;

use proptest::prelude::*;
use shearguide::geometry::{Rect, ShearParam};
use shearguide::thresholds::{beta_star, bound_factor, prism_mu2, rect_threshold, uniqueness_condition, BRANCH_POINT};

fn b(x: f64) -> ShearParam {
    ShearParam::new(x).unwrap()
}

fn rect_with_ratio(r: f64) -> Rect {
    Rect::new(0.0, 1.0, 0.0, r).unwrap()
}

proptest! {
    #[test]
    fn beta_star_increases_on_the_first_branch(r1 in 1e-3f64..BRANCH_POINT, r2 in 1e-3f64..BRANCH_POINT) {
        prop_assume!(r1 < r2);
        prop_assert!(beta_star(r1).unwrap() < beta_star(r2).unwrap());
    }

    #[test]
    fn beta_star_is_continuous_on_the_first_branch(r in 1e-3f64..BRANCH_POINT) {
        let d = 1e-9 * r;
        prop_assert!((beta_star(r).unwrap() - beta_star(r - d).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn bound_factor_is_at_most_one(beta in 1e-3f64..1e3) {
        let f = bound_factor(b(beta));
        prop_assert!(f > 0.0 && f <= 1.0);
        // symmetric under beta -> 1/beta
        prop_assert!((f - bound_factor(b(1.0 / beta))).abs() < 1e-12);
    }

    #[test]
    fn diagnostic_matches_direct_evaluation(r in 0.1f64..5.0, beta in 0.05f64..3.0) {
        let rect = rect_with_ratio(r);
        let d = uniqueness_condition(b(beta), &rect).unwrap();
        let lhs = bound_factor(b(beta)) * prism_mu2(&rect);
        let rhs = rect_threshold(b(beta), &rect);
        prop_assert_eq!(d.chain_holds, lhs >= rhs);
        prop_assert_eq!(d.satisfied, beta < beta_star(r).unwrap());
    }
}

/// Where the chain `beta < beta*(R) => bound_factor mu2 >= E1` can be
/// checked on a grid, and where it breaks.
#[test]
fn uniqueness_chain_on_a_grid() {
    // for R = 1 and beta <= 1 the inequality reads 3(1+beta^2)/2 >= 1
    for i in 1..=20 {
        let beta = i as f64 / 20.0;
        assert!(uniqueness_condition(b(beta), &Rect::unit_square()).unwrap().chain_holds);
    }
    // R = 1, beta = 1.5 < sqrt(3): 0.722 * 5 pi^2 < 4.25 pi^2
    let d = uniqueness_condition(b(1.5), &Rect::unit_square()).unwrap();
    assert!(d.satisfied);
    assert!(!d.chain_holds);
    assert!((d.lhs / (PI * PI) - 5.0 * 3.25 / 4.5).abs() < 1e-12);
    assert!((d.rhs / (PI * PI) - 4.25).abs() < 1e-12);
    // for small beta the factor is about 1/2, which is too weak when
    // R^2 < 1/2 (every beta below beta*) and for wide sections at small beta
    for (r, beta) in [(0.3, 0.5), (0.6, 0.1), (2.0, 0.25), (3.0, 0.5)] {
        let d = uniqueness_condition(b(beta), &rect_with_ratio(r)).unwrap();
        assert!(d.satisfied && !d.chain_holds, "R = {r}, beta = {beta}");
    }
    let d = uniqueness_condition(b(1.0), &rect_with_ratio(2.0)).unwrap();
    assert!(d.satisfied && d.chain_holds);
}
