use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shearguide::assembly::{assemble_prism, assemble_reduced2d, assemble_waveguide, FormGrid, FormMode, FormRegistry, ShearForm};
use shearguide::eigcore::{DenseSolver, LinearOperator};
use shearguide::geometry::{CrossSectionSpec, Mask, Rect, ShearParam, WaveguideSpec};

fn probe(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn lowest(form: &ShearForm, k: usize) -> Vec<f64> {
    DenseSolver::default()
        .solve_matrices(&form.a.to_csr().to_dense(), &form.m.to_csr().to_dense(), k)
        .unwrap()
        .eigenvalues
}

fn forms(beta: f64) -> Vec<ShearForm> {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.3).unwrap();
    let spec = WaveguideSpec::rectangle(beta, rect).unwrap();
    let grid = FormGrid::new(8, 8, 8, 1.5);
    let mut out: Vec<ShearForm> = [FormMode::HalfDn, FormMode::FullSign]
        .into_iter()
        .map(|m| assemble_waveguide(&spec, &grid, m).unwrap())
        .collect();
    out.push(assemble_reduced2d(spec.beta, &rect, &grid).unwrap());
    out.push(assemble_prism(spec.beta, &rect, &grid).unwrap());
    let mask = WaveguideSpec::new(spec.beta, CrossSectionSpec::Mask(Mask::l_shape(2).unwrap())).unwrap();
    out.push(assemble_waveguide(&mask, &grid, FormMode::HalfDn).unwrap());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stiffness_is_symmetric_and_mass_positive(beta in 0.05f64..5.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for f in forms(beta) {
            let n = f.dim();
            let a_norm = f.a.to_csr().triplets().map(|(_, _, v)| v.abs()).fold(0.0, f64::max) * n as f64;
            for _ in 0..3 {
                let (x, y) = (probe(n, &mut rng), probe(n, &mut rng));
                let (mut ax, mut ay) = (vec![0.0; n], vec![0.0; n]);
                f.a.apply(&x, &mut ax);
                f.a.apply(&y, &mut ay);
                prop_assert!((dot(&ax, &y) - dot(&x, &ay)).abs() <= 1e-12 * a_norm * norm(&x) * norm(&y));
                let mut mx = vec![0.0; n];
                f.m.apply(&x, &mut mx);
                prop_assert!(dot(&mx, &x) > 0.0);
            }
        }
    }
}

#[test]
fn refinement_lowers_eigenvalues() {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    for beta in [0.5, 1.0, 2.0] {
        let b = ShearParam::new(beta).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for f in [1, 2, 4] {
            let form = assemble_reduced2d(b, &rect, &FormGrid::new(8 * f, 8, 8 * f, 2.0)).unwrap();
            let ev = lowest(&form, 4);
            if let Some(p) = &prev {
                for (new, old) in ev.iter().zip(p) {
                    assert!(*new <= old * (1.0 + 1e-12), "beta {beta}: {new} > {old}");
                }
            }
            prev = Some(ev);
        }
    }
}

#[test]
fn longer_truncation_lowers_eigenvalues() {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let spec = WaveguideSpec::rectangle(1.0, rect).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for s in [1usize, 2, 3] {
        let form = assemble_waveguide(&spec, &FormGrid::new(8 * s, 8, 8, s as f64), FormMode::HalfDn).unwrap();
        let ev = lowest(&form, 3);
        if let Some(p) = &prev {
            for (new, old) in ev.iter().zip(p) {
                assert!(*new <= old * (1.0 + 1e-12), "{new} > {old}");
            }
        }
        prev = Some(ev);
    }
}

#[test]
fn full_and_half_agree_on_even_modes() {
    let rect = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let spec = WaveguideSpec::rectangle(1.0, rect).unwrap();
    let grid = FormGrid::new(8, 8, 8, 2.0);
    let half = assemble_waveguide(&spec, &grid, FormMode::HalfDn).unwrap();
    let full = assemble_waveguide(&spec, &grid, FormMode::FullSign).unwrap();
    let h = lowest(&half, 3);
    let r = DenseSolver::default()
        .solve_matrices(&full.a.to_csr().to_dense(), &full.m.to_csr().to_dense(), 8)
        .unwrap();
    let even: Vec<f64> = r
        .eigenvalues
        .iter()
        .zip(&r.eigenvectors)
        .filter(|(_, v)| full.odd_fraction(v).unwrap() < 0.5)
        .map(|(l, _)| *l)
        .take(3)
        .collect();
    for (e, h) in even.iter().zip(&h) {
        assert!((e - h).abs() <= 1e-9 * h, "{e} vs {h}");
    }
}

#[test]
fn registry_builds_every_mode_by_name() {
    let reg = FormRegistry::default();
    let spec = WaveguideSpec::rectangle(1.0, Rect::unit_square()).unwrap();
    for name in ["half_DN", "full_sign", "reduced2d", "prism"] {
        let f = reg.get(name).unwrap().build(&spec, &FormGrid::new(8, 8, 8, 1.0)).unwrap();
        assert!(f.dim() > 0);
    }
    let straight = WaveguideSpec::new(ShearParam::straight(), CrossSectionSpec::Rectangle(Rect::unit_square())).unwrap();
    assert!(reg.get("straight").unwrap().build(&straight, &FormGrid::new(8, 8, 8, 1.0)).is_ok());
    assert!(reg.get("cylindrical").is_err());
}
