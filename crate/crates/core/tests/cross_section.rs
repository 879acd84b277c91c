use std::f64::consts::PI;

use proptest::prelude::*;
use shearguide::cross_section::{numeric_modes, rectangle_modes, section_constants, SectionGrid};
use shearguide::geometry::{CrossSectionSpec, Mask, Rect, ShearParam};
use shearguide::thresholds::rect_threshold;

fn rect() -> impl Strategy<Value = Rect> {
    (-2.0f64..2.0, 0.2f64..3.0, -2.0f64..2.0, 0.2f64..3.0).prop_map(|(a, w, c, h)| Rect::new(a, a + w, c, c + h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ground_energy_increases_with_shear(r in rect(), b1 in 0.01f64..5.0, db in 0.01f64..5.0) {
        let e = |b: f64| rectangle_modes(ShearParam::new(b).unwrap(), &r, 1).unwrap()[0].eigenvalue;
        prop_assert!(e(b1 + db) > e(b1));
    }

    #[test]
    fn ground_mode_is_simple(r in rect(), b in 0.01f64..10.0) {
        let m = rectangle_modes(ShearParam::new(b).unwrap(), &r, 2).unwrap();
        prop_assert!(m[1].eigenvalue - m[0].eigenvalue > 0.0);
        prop_assert!((m[0].eigenvalue - rect_threshold(ShearParam::new(b).unwrap(), &r)).abs() <= 1e-12 * m[0].eigenvalue);
    }

    #[test]
    fn moment_is_minus_one_half(r in rect(), b in 0.01f64..10.0) {
        let chi = rectangle_modes(ShearParam::new(b).unwrap(), &r, 1).unwrap().remove(0);
        let c = section_constants(&chi).unwrap();
        prop_assert!((c.moment + 0.5).abs() < 1e-8, "moment {}", c.moment);
        prop_assert!((c.kappa - (PI / r.height()).powi(2)).abs() < 1e-10 * c.kappa);
    }
}

#[test]
fn numeric_threshold_converges_at_second_order() {
    let beta = ShearParam::new(1.0).unwrap();
    let r = Rect::new(0.0, 1.0, 0.0, 2.0).unwrap();
    let s = CrossSectionSpec::Rectangle(r);
    let exact = rect_threshold(beta, &r);
    let err: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| (numeric_modes(beta, &s, SectionGrid::square(n), 1).unwrap()[0].eigenvalue - exact).abs())
        .collect();
    assert!(err[2] / exact < 1e-3);
    for w in err.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn mask_moment() {
    let mask = Mask::l_shape(4).unwrap();
    let s = CrossSectionSpec::Mask(mask);
    let chi = numeric_modes(ShearParam::new(0.7).unwrap(), &s, SectionGrid::default_for(&s), 1)
        .unwrap()
        .remove(0);
    let c = section_constants(&chi).unwrap();
    assert!((c.moment + 0.5).abs() < 1e-4, "moment {}", c.moment);
}

#[test]
fn straight_unit_square() {
    let m = rectangle_modes(ShearParam::straight(), &Rect::unit_square(), 1).unwrap();
    assert!((m[0].eigenvalue - 2.0 * PI * PI).abs() < 1e-12);
}
