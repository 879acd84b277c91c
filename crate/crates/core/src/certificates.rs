//! Explicit variational objects: the trial-function certificate that some
//! state lies below `E1(beta)`, the 1D comparison form used to bound the
//! number of bound states, and closed-form checks of the prism problem.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_prism, prism_coefficients, FormGrid, TriangleMesh};
use crate::cross_section::{composite_gauss_order, rectangle_modes, sine_amplitude};
use crate::eigcore::{lowest_generalized_pair, EigOptions, EigenSolver, Lobpcg, Preconditioner};
use crate::error::{Error, Result};
use crate::geometry::{prism_region, Rect, ShearParam};
use crate::thresholds::{bound_factor, prism_mu1, prism_mu2, rect_threshold, BRANCH_POINT};

/// Cutoff `w` (1 on `(-inf, 1]`, cosine ramp on `[1, 2]`, 0 beyond) and the
/// bump `eta(x) = (1-x)^3 (1+3x)` on `[0, 1]`, with the Gauss rule used for
/// their integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    /// Gauss–Legendre points per panel.
    pub order: usize,
    pub panels: usize,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { order: 16, panels: 4 }
    }
}

impl CutoffProfile {
    pub fn w(x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else if x >= 2.0 {
            0.0
        } else {
            (PI * (x - 1.0) / 2.0).cos()
        }
    }

    pub fn w_prime(x: f64) -> f64 {
        if x <= 1.0 || x >= 2.0 {
            0.0
        } else {
            -PI / 2.0 * (PI * (x - 1.0) / 2.0).sin()
        }
    }

    /// `∫ |w'|^2 = pi^2 / 8`.
    pub const W_ENERGY: f64 = PI * PI / 8.0;

    pub fn eta(x: f64) -> f64 {
        if (0.0..1.0).contains(&x) {
            (1.0 - x).powi(3) * (1.0 + 3.0 * x)
        } else {
            0.0
        }
    }

    pub fn eta_prime(x: f64) -> f64 {
        if (0.0..1.0).contains(&x) {
            -12.0 * x * (1.0 - x).powi(2)
        } else {
            0.0
        }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        composite_gauss_order(a, b, self.panels, self.order, f)
    }

    /// `∫ |d/dx w(x/n)|^2` over `[n, 2n]`, equal to `W_ENERGY / n`.
    pub fn scaled_energy(&self, n: f64) -> f64 {
        self.integrate(n, 2.0 * n, |x| (Self::w_prime(x / n) / n).powi(2))
    }

    /// The same rule with twice the points per panel.
    pub fn refined(&self) -> Self {
        Self {
            order: 2 * self.order,
            panels: self.panels,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateResult {
    pub beta: f64,
    pub rect: Rect,
    pub n: u64,
    pub eps: f64,
    /// `∫ |w'|^2` by quadrature.
    pub w_energy: f64,
    /// `q(psi_n) = (1/n) ∫ |w'|^2`.
    pub q_psi_n: f64,
    /// `q(psi_n, phi)`, equal to `-beta eta(0) / 2`.
    pub cross_term: f64,
    pub q_phi: f64,
    /// `eps^2 q(phi)`.
    pub phi_energy: f64,
    /// `q(psi_n) + 2 eps cross + eps^2 q(phi)`.
    pub total: f64,
    /// Quadrature error bound on `total` (order doubling).
    pub error_bound: f64,
    /// `||psi_{n,eps}||^2`.
    pub norm2: f64,
    /// `total / norm2`, an upper bound for `lambda_1 - E1`.
    pub rayleigh: f64,
    /// `total < 0`.
    pub negative: bool,
    /// `total + error_bound < 0`.
    pub certified: bool,
}

/// Section integrals of `chi` (normalized ground mode of `T(beta)`) and
/// `h = y2 chi` needed by the certificate.
#[derive(Debug, Clone, Copy)]
struct SectionIntegrals {
    /// `∫ h^2`
    h2: f64,
    /// `∫ |∂1 h|^2 + (1+beta^2) |∂2 h|^2 - E1 h^2`
    h_energy: f64,
    /// `∫ h ∂2 h`
    h_d2h: f64,
    /// `∫ chi h`
    chi_h: f64,
    /// `∫ ∂2 chi h`
    d2chi_h: f64,
    /// `∫ chi ∂2 h`
    chi_d2h: f64,
    /// `∫ ∂1 chi ∂1 h + (1+beta^2) ∂2 chi ∂2 h - E1 chi h`
    chi_h_energy: f64,
}

fn section_integrals(beta: ShearParam, rect: &Rect, rule: &CutoffProfile) -> SectionIntegrals {
    let amp = sine_amplitude(rect);
    let (k1, k2) = (PI / rect.width(), PI / rect.height());
    let e1 = rect_threshold(beta, rect);
    let s = beta.stretch();
    // chi = amp sin(k1 (y1-a)) sin(k2 (y2-c)), separable in y1 and y2
    let s1 = |y1: f64| (k1 * (y1 - rect.a)).sin();
    let c1 = |y1: f64| k1 * (k1 * (y1 - rect.a)).cos();
    let s2 = |y2: f64| (k2 * (y2 - rect.c)).sin();
    let c2 = |y2: f64| k2 * (k2 * (y2 - rect.c)).cos();
    let int1 = |f: &dyn Fn(f64) -> f64| rule.integrate(rect.a, rect.b, f);
    let int2 = |f: &dyn Fn(f64) -> f64| rule.integrate(rect.c, rect.d, f);
    let a2 = amp * amp;
    // y1 factors
    let ss1 = int1(&|y| s1(y) * s1(y));
    let cc1 = int1(&|y| c1(y) * c1(y));
    // y2 factors with h2(y2) = y2 s2(y2), h2' = s2 + y2 c2
    let hp = |y: f64| s2(y) + y * c2(y);
    let yy = int2(&|y| (y * s2(y)).powi(2));
    let yc = int2(&|y| hp(y).powi(2));
    let y_hp = int2(&|y| y * s2(y) * hp(y));
    let ys = int2(&|y| y * s2(y) * s2(y));
    let c_ys = int2(&|y| c2(y) * y * s2(y));
    let s_hp = int2(&|y| s2(y) * hp(y));
    let c_hp = int2(&|y| c2(y) * hp(y));
    let h2 = a2 * ss1 * yy;
    SectionIntegrals {
        h2,
        h_energy: a2 * (cc1 * yy + s * ss1 * yc) - e1 * h2,
        h_d2h: a2 * ss1 * y_hp,
        chi_h: a2 * ss1 * ys,
        d2chi_h: a2 * ss1 * c_ys,
        chi_d2h: a2 * ss1 * s_hp,
        chi_h_energy: a2 * (cc1 * ys + s * ss1 * c_hp) - e1 * a2 * ss1 * ys,
    }
}

/// Pieces of `q(psi_{n,eps})` that depend on the quadrature rule.
#[derive(Debug, Clone, Copy)]
struct Pieces {
    w_energy: f64,
    cross: f64,
    q_phi: f64,
}

fn pieces(beta: ShearParam, rect: &Rect, n: u64, rule: &CutoffProfile) -> Pieces {
    let b = beta.value();
    let y = section_integrals(beta, rect, rule);
    let nf = n as f64;
    let w_energy = rule.integrate(1.0, 2.0, |x| CutoffProfile::w_prime(x).powi(2));
    let wn = |x: f64| CutoffProfile::w(x / nf);
    let wn_p = |x: f64| CutoffProfile::w_prime(x / nf) / nf;
    let eta = CutoffProfile::eta;
    let eta_p = CutoffProfile::eta_prime;
    let ix = |f: &dyn Fn(f64) -> f64| rule.integrate(0.0, 1.0, f);
    // (w_n' chi - b w_n ∂2chi)(eta' h - b eta ∂2h) + w_n eta (∂1chi ∂1h + ∂2chi ∂2h - E1 chi h)
    let cross = ix(&|x| wn_p(x) * eta_p(x)) * y.chi_h
        - b * ix(&|x| wn_p(x) * eta(x)) * y.chi_d2h
        - b * ix(&|x| wn(x) * eta_p(x)) * y.d2chi_h
        + ix(&|x| wn(x) * eta(x)) * y.chi_h_energy;
    let q_phi = ix(&|x| eta_p(x).powi(2)) * y.h2 - 2.0 * b * ix(&|x| eta(x) * eta_p(x)) * y.h_d2h
        + ix(&|x| eta(x).powi(2)) * y.h_energy;
    Pieces { w_energy, cross, q_phi }
}

/// Builds `psi_{n,eps} = w(x/n) chi(y) + eps eta(x) y2 chi(y)` on the half
/// waveguide with the smallest `n` making `q` negative, `eps` minimizing the
/// quadratic in `eps`.
pub fn existence_certificate(beta: ShearParam, rect: &Rect, profile: &CutoffProfile) -> Result<CertificateResult> {
    rect.validate()?;
    let b = beta.value();
    if !(b > 0.0) {
        return Err(Error::InvalidParameter("the certificate needs beta > 0".into()));
    }
    let eta0 = CutoffProfile::eta(0.0);
    // n only enters through w_n, whose support [n, 2n] misses [0, 1) for n >= 1,
    // so q(phi) can be computed once
    let p1 = pieces(beta, rect, 1, profile);
    if !(p1.q_phi > 0.0) {
        return Err(Error::Degenerate(format!("q(phi) = {} is not positive", p1.q_phi)));
    }
    let eps = b * eta0 / (2.0 * p1.q_phi);
    let n_real = 4.0 * CutoffProfile::W_ENERGY * p1.q_phi / (b * b * eta0 * eta0);
    let mut n = (n_real.floor() as u64).max(1);
    let total_at = |n: u64, p: &Pieces| p.w_energy / n as f64 + 2.0 * eps * p.cross + eps * eps * p.q_phi;
    while total_at(n, &p1) >= 0.0 {
        n += 1;
    }
    let p = pieces(beta, rect, n, profile);
    let pr = pieces(beta, rect, n, &profile.refined());
    let total = total_at(n, &p);
    let error_bound = (total - total_at(n, &pr)).abs()
        + (p.w_energy - pr.w_energy).abs() / n as f64
        + 2.0 * eps * (p.cross - pr.cross).abs()
        + eps * eps * (p.q_phi - pr.q_phi).abs();

    let y = section_integrals(beta, rect, profile);
    let w2 = 1.0 + profile.integrate(1.0, 2.0, |x| CutoffProfile::w(x).powi(2));
    let eta_int = profile.integrate(0.0, 1.0, CutoffProfile::eta);
    let eta2 = profile.integrate(0.0, 1.0, |x| CutoffProfile::eta(x).powi(2));
    let norm2 = n as f64 * w2 + 2.0 * eps * eta_int * y.chi_h + eps * eps * eta2 * y.h2;
    Ok(CertificateResult {
        beta: b,
        rect: *rect,
        n,
        eps,
        w_energy: p.w_energy,
        q_psi_n: p.w_energy / n as f64,
        cross_term: p.cross,
        q_phi: p.q_phi,
        phi_energy: eps * eps * p.q_phi,
        total,
        error_bound,
        norm2,
        rayleigh: total / norm2,
        negative: total < 0.0,
        certified: total + error_bound < 0.0,
    })
}

/// The 1D comparison form `c0 |f'|^2 + (E1 - 1_[s, 2s]) |f|^2` on `(s, inf)`
/// with `s = sqrt(nu)` and Dirichlet at `s`, shifted so the well starts at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BForm {
    pub c0: f64,
    /// Well width `sqrt(nu)`.
    pub width: f64,
    /// Well depth relative to `E1`.
    pub depth: f64,
    /// Left Dirichlet endpoint `sqrt(nu)` in the original variable.
    pub left: f64,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub kappa: Option<f64>,
    pub nu: Option<f64>,
    /// `((beta^2 - eps beta + 1)/(1+beta^2)) E2 - 2 eps beta - 1`.
    pub zeta: Option<f64>,
}

impl BForm {
    /// Requires `eps >= beta`, `eps > 2 kappa beta` and `nu > 0`.
    pub fn new(beta: f64, eps: f64, kappa: f64, nu: f64, e1: f64, e2: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
        }
        if !(beta > 0.0) || !(eps >= beta) {
            return Err(Error::InvalidParameter(format!(
                "need eps >= beta > 0, got eps = {eps}, beta = {beta}"
            )));
        }
        if !(e2 >= e1) {
            return Err(Error::InvalidParameter(format!("need E2 >= E1, got {e2} < {e1}")));
        }
        let c0 = 1.0 - 2.0 * kappa * beta / eps;
        if !(c0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c0 = 1 - 2 kappa beta / eps = {c0} is not positive (eps must exceed 2 kappa beta = {})",
                2.0 * kappa * beta
            )));
        }
        let zeta = (beta * beta - eps * beta + 1.0) / (1.0 + beta * beta) * e2 - 2.0 * eps * beta - 1.0;
        Ok(Self {
            c0,
            width: nu.sqrt(),
            depth: 1.0,
            left: nu.sqrt(),
            beta: Some(beta),
            eps: Some(eps),
            kappa: Some(kappa),
            nu: Some(nu),
            zeta: Some(zeta),
        })
    }

    /// A bare well `-c0 f'' - 1_[0, width] f` with Dirichlet at 0.
    pub fn well(c0: f64, width: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("well width must be positive, got {width}")));
        }
        Ok(Self {
            c0,
            width,
            depth: 1.0,
            left: 0.0,
            beta: None,
            eps: None,
            kappa: None,
            nu: None,
            zeta: None,
        })
    }

    /// Negative eigenvalues by oscillation counting: the zero-energy
    /// solution with `f(0) = 0, f'(0) = 1` is `sin(kx)/k`, `k = sqrt(depth/c0)`,
    /// in the well and a straight line beyond; each zero in `(0, inf)` is
    /// one bound state.
    pub fn count(&self) -> usize {
        let k = (self.depth / self.c0).sqrt();
        let phase = k * self.width;
        let inside = (phase / PI).floor() as usize;
        let f = phase.sin();
        let fp = phase.cos();
        // a zero sitting exactly at the well edge was counted by floor()
        let outside = if f != 0.0 && f * fp < 0.0 { 1 } else { 0 };
        inside + outside
    }

    /// Negative eigenvalues of the finite-difference matrix on
    /// `(0, length)` with Dirichlet ends and `cells` intervals (Sylvester
    /// inertia of the tridiagonal matrix).
    pub fn fd_count(&self, length: f64, cells: usize) -> usize {
        let (diag, off) = self.fd_matrix(length, cells);
        let mut negatives = 0;
        let mut pivot = 1.0;
        for i in 0..diag.len() {
            pivot = if i == 0 { diag[0] } else { diag[i] - off * off / pivot };
            if pivot == 0.0 {
                pivot = f64::EPSILON * off.abs();
            }
            if pivot < 0.0 {
                negatives += 1;
            }
        }
        negatives
    }

    /// The same count from a dense symmetric eigensolve.
    pub fn fd_count_dense(&self, length: f64, cells: usize) -> usize {
        let (diag, off) = self.fd_matrix(length, cells);
        let n = diag.len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                off
            } else {
                0.0
            }
        });
        SymmetricEigen::new(m).eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    fn fd_matrix(&self, length: f64, cells: usize) -> (Vec<f64>, f64) {
        let h = length / cells as f64;
        let diag = (1..cells)
            .map(|i| {
                let x = i as f64 * h;
                let v = if x <= self.width { -self.depth } else { 0.0 };
                2.0 * self.c0 / (h * h) + v
            })
            .collect();
        (diag, -self.c0 / (h * h))
    }
}

/// The comparison form for the given parameters and its bound-state count.
pub fn bform_count(beta: f64, eps: f64, kappa: f64, nu: f64, e1: f64, e2: f64) -> Result<(BForm, usize)> {
    let b = BForm::new(beta, eps, kappa, nu, e1, e2)?;
    Ok((b, b.count()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrismReport {
    pub beta: f64,
    pub rect: Rect,
    pub grid: FormGrid,
    pub mu1: f64,
    pub mu2: f64,
    /// Closed forms at `beta = 1` (present only then).
    pub mu1_closed: Option<f64>,
    pub mu2_closed: Option<f64>,
    pub mu1_rel_error: Option<f64>,
    pub mu2_rel_error: Option<f64>,
    /// Conormal derivative of the closed-form eigenfunctions on the slanted
    /// face, relative to their gradient (analytic, `beta = 1`).
    pub analytic_flux: Option<f64>,
    /// Discrete slant-flux residual of the ground triangle mode on the grid
    /// and on the grid refined twice.
    pub flux_residuals: [f64; 2],
    pub bound_factor: f64,
    /// `bound_factor(beta) * mu2 at beta = 1`.
    pub mu2_lower_bound: f64,
    pub bound_holds: bool,
    /// `pi^2 (1/(b-a)^2 + (1+beta^2)/(d-c)^2)`.
    pub threshold: f64,
    pub inequality_holds: bool,
}

/// Lowest two eigenvalues of the prism problem, compared with the closed
/// forms at `beta = 1` and with the lower bounds for general `beta`.
pub fn prism_eigen_check(beta: ShearParam, rect: &Rect, grid: &FormGrid) -> Result<PrismReport> {
    let form = assemble_prism(beta, rect, grid)?;
    let pc = form.separable.preconditioner(0.9)?;
    let opts = EigOptions {
        tol: 1e-9,
        ..EigOptions::with_k(2)
    };
    let res = Lobpcg.solve(&form.a, &form.m, Some(&pc as &dyn Preconditioner), &opts)?.require_converged()?;
    let (mu1, mu2) = (res.eigenvalues[0], res.eigenvalues[1]);

    let b = beta.value();
    let at_one = (b - 1.0).abs() < 1e-12;
    let (mu1_closed, mu2_closed) = if at_one {
        (Some(prism_mu1(rect)), Some(prism_mu2(rect)))
    } else {
        (None, None)
    };
    let coeffs = prism_coefficients(beta)?;
    let region = prism_region(rect)?;
    let mut flux = [0.0; 2];
    for (slot, n) in [grid.nx, 2 * grid.nx].into_iter().enumerate() {
        let tri = TriangleMesh::new(region.half_width, n)?;
        let s = tri.kxx.scaled(coeffs[0]).add_scaled(&tri.kyy, coeffs[2]);
        let (_, v) = lowest_generalized_pair(&s, &tri.m)?;
        flux[slot] = tri.slant_flux_residual(&v, coeffs[0], coeffs[2]);
    }
    let lower = bound_factor(beta) * prism_mu2(rect);
    let threshold = rect_threshold(beta, rect);
    Ok(PrismReport {
        beta: b,
        rect: *rect,
        grid: *grid,
        mu1,
        mu2,
        mu1_rel_error: mu1_closed.map(|c| (mu1 - c).abs() / c),
        mu2_rel_error: mu2_closed.map(|c| (mu2 - c).abs() / c),
        mu1_closed,
        mu2_closed,
        analytic_flux: at_one.then(|| analytic_slant_flux(rect)),
        flux_residuals: flux,
        bound_factor: bound_factor(beta),
        mu2_lower_bound: lower,
        bound_holds: mu2 >= lower,
        threshold,
        inequality_holds: mu2 >= threshold,
    })
}

/// Largest relative conormal derivative `(-ψ_x + ψ_2)/sqrt(2)` of the
/// closed-form `beta = 1` eigenfunctions on the face `y2 = x + A`.
///
/// In `u = x + A`, `v = y2` the triangle parts are `sin(a u) sin(a v)` and
/// `sin(a u) sin(3 a v) + sin(3 a u) sin(a v)` with `a = pi / (2A)`; the
/// first is `cos(pi x / 2A) sin(pi y2 / 2A)`. The `y1` factor is a sine and
/// does not enter the face condition.
pub fn analytic_slant_flux(rect: &Rect) -> f64 {
    let big_a = rect.height() / 2f64.sqrt();
    let a = PI / (2.0 * big_a);
    let ground = |u: f64, v: f64| {
        (a * (a * u).cos() * (a * v).sin(), a * (a * u).sin() * (a * v).cos())
    };
    let second = |u: f64, v: f64| {
        (
            a * (a * u).cos() * (3.0 * a * v).sin() + 3.0 * a * (3.0 * a * u).cos() * (a * v).sin(),
            3.0 * a * (a * u).sin() * (3.0 * a * v).cos() + a * (3.0 * a * u).sin() * (a * v).cos(),
        )
    };
    let mut worst: f64 = 0.0;
    let use_second = rect.aspect_ratio() > BRANCH_POINT;
    for i in 1..64 {
        let t = big_a * i as f64 / 64.0;
        let grads: Vec<(f64, f64)> = if use_second {
            vec![ground(t, t), second(t, t)]
        } else {
            vec![ground(t, t)]
        };
        for (gu, gv) in grads {
            let scale = gu.hypot(gv).max(f64::MIN_POSITIVE);
            worst = worst.max(((-gu + gv) / 2f64.sqrt()).abs() / scale);
        }
    }
    worst
}

/// Normalized ground section mode of a rectangle, re-exported for callers
/// that want to inspect the certificate's `chi`.
pub fn certificate_mode(beta: ShearParam, rect: &Rect) -> Result<crate::cross_section::SectionMode> {
    Ok(rectangle_modes(beta, rect, 1)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_identities() {
        let p = CutoffProfile::default();
        let e = p.integrate(1.0, 2.0, |x| CutoffProfile::w_prime(x).powi(2));
        assert!((e - CutoffProfile::W_ENERGY).abs() < 1e-14);
        assert!((CutoffProfile::W_ENERGY - 1.2337005501361697).abs() < 1e-15);
        assert_eq!(CutoffProfile::eta(0.0), 1.0);
        assert_eq!(CutoffProfile::eta(1.0), 0.0);
        let d = p.integrate(0.0, 1.0, CutoffProfile::eta_prime);
        assert!((d + 1.0).abs() < 1e-14);
        // eta' against a difference quotient
        for &x in &[0.1, 0.4, 0.9] {
            let fd = (CutoffProfile::eta(x + 1e-6) - CutoffProfile::eta(x - 1e-6)) / 2e-6;
            assert!((fd - CutoffProfile::eta_prime(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn well_examples() {
        assert_eq!(BForm::well(1.0, 1.0).unwrap().count(), 0);
        assert_eq!(BForm::well(1.0, 3.0).unwrap().count(), 1);
        assert_eq!(BForm::well(0.25, 3.0).unwrap().count(), 2);
        assert!(BForm::well(0.0, 1.0).is_err());
    }

    #[test]
    fn bform_rejects_bad_parameters() {
        // eps < 2 kappa beta
        assert!(BForm::new(1.0, 1.0, 0.6, 1.0, 3.0, 6.0).is_err());
        // eps < beta
        assert!(BForm::new(1.0, 0.5, 0.1, 1.0, 3.0, 6.0).is_err());
        assert!(BForm::new(1.0, 2.0, 0.1, 0.0, 3.0, 6.0).is_err());
        let b = BForm::new(1.0, 2.0, 0.25, 4.0, 3.0, 6.0).unwrap();
        assert!((b.c0 - 0.75).abs() < 1e-15);
        assert_eq!(b.width, 2.0);
        assert!((b.zeta.unwrap() - (0.0 * 6.0 - 4.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn unit_square_cross_term() {
        let c = existence_certificate(ShearParam::new(1.0).unwrap(), &Rect::unit_square(), &CutoffProfile::default())
            .unwrap();
        assert!((c.cross_term + 0.5).abs() < 1e-10);
        assert!(c.negative && c.certified);
        assert!((c.q_psi_n * c.n as f64 - CutoffProfile::W_ENERGY).abs() < 1e-12);
    }

    #[test]
    fn closed_form_prism_modes_satisfy_the_face_condition() {
        assert!(analytic_slant_flux(&Rect::unit_square()) < 1e-14);
        assert!(analytic_slant_flux(&Rect::new(0.0, 1.0, 0.0, 2.0).unwrap()) < 1e-14);
    }
}
