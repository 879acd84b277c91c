//! Discrete symmetric forms for the straightened waveguide.
//!
//! Forms are sums of Kronecker products of small factor matrices. The 3D
//! rectangle form on `(0, L) x (a, b) x (c, d)` is
//!
//! ```text
//! A = Kx⊗M1⊗M2 - β (Dx⊗M1⊗D2ᵀ + Dxᵀ⊗M1⊗D2) + β² Mx⊗M1⊗K2 + Mx⊗K1⊗M2 + Mx⊗M1⊗K2
//! M = Mx⊗M1⊗M2
//! ```
//!
//! Form builders and preconditioner factories are registered by name, see
//! [`FormRegistry`] and [`PrecondRegistry`].

pub mod fem1d;
pub mod prism;
pub mod q1;
pub mod section;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigcore::{lowest_generalized, JacobiPreconditioner, LinearOperator, Preconditioner, TensorPreconditioner};
use crate::error::{Error, Result};
use crate::geometry::{prism_region, CrossSectionSpec, Rect, ShearParam, WaveguideSpec};
use crate::sparse::{CsrMatrix, KronSum, KronTerm};

pub use fem1d::{fem1d, BoundaryCondition, Fem1D};
pub use prism::TriangleMesh;
pub use section::SectionFem;

use BoundaryCondition::{Dirichlet, Neumann};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormMode {
    #[serde(rename = "half_DN", alias = "half")]
    HalfDn,
    #[serde(rename = "full_sign", alias = "full")]
    FullSign,
    #[serde(rename = "reduced2d", alias = "reduced")]
    Reduced2d,
    #[serde(rename = "prism")]
    Prism,
    #[serde(rename = "straight")]
    Straight,
}

impl FormMode {
    pub const ALL: [FormMode; 5] = [
        FormMode::HalfDn,
        FormMode::FullSign,
        FormMode::Reduced2d,
        FormMode::Prism,
        FormMode::Straight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormMode::HalfDn => "half_DN",
            FormMode::FullSign => "full_sign",
            FormMode::Reduced2d => "reduced2d",
            FormMode::Prism => "prism",
            FormMode::Straight => "straight",
        }
    }
}

impl fmt::Display for FormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" | "half_DN" | "half_dn" => Ok(FormMode::HalfDn),
            "full" | "full_sign" => Ok(FormMode::FullSign),
            "reduced" | "reduced2d" => Ok(FormMode::Reduced2d),
            "prism" => Ok(FormMode::Prism),
            "straight" => Ok(FormMode::Straight),
            other => Err(Error::UnknownStrategy {
                kind: "form mode",
                name: other.into(),
                available: FormMode::ALL.map(FormMode::as_str).join(", "),
            }),
        }
    }
}

/// Interval counts and truncation length. `nx` counts intervals on `(0, L)`
/// (per half in `full_sign`, legs of the triangle in `prism`); `n1`, `n2`
/// count intervals across the section bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormGrid {
    pub nx: usize,
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl FormGrid {
    pub fn new(nx: usize, n1: usize, n2: usize, length: f64) -> Self {
        Self { nx, n1, n2, length }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("nx", self.nx), ("n1", self.n1), ("n2", self.n2)] {
            if v < 8 {
                return Err(Error::GridTooCoarse(format!("{name} = {v} is below the minimum of 8")));
            }
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "truncation length must be positive, got {}",
                self.length
            )));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.length / self.nx as f64
    }
}

/// Separable part of a form, `S0⊗M' + M0⊗K'` with trailing modes given as
/// dense pencils, used to build the tensor preconditioner.
#[derive(Debug, Clone)]
pub struct SeparableModel {
    pub lead: (CsrMatrix, CsrMatrix),
    pub trailing: Vec<(CsrMatrix, CsrMatrix)>,
}

impl SeparableModel {
    pub fn preconditioner(&self, shift_fraction: f64) -> Result<TensorPreconditioner> {
        let dense: Vec<(DMatrix<f64>, DMatrix<f64>)> =
            self.trailing.iter().map(|(k, m)| (k.to_dense(), m.to_dense())).collect();
        TensorPreconditioner::with_relative_shift((&self.lead.0, &self.lead.1), &dense, shift_fraction)
    }

    /// Sum of the lowest eigenvalues of the trailing pencils: the discrete
    /// analogue of the threshold when the lead is the unbounded axis.
    pub fn trailing_bottom(&self) -> Result<f64> {
        self.trailing.iter().map(|(k, m)| lowest_generalized(k, m)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ShearForm {
    pub mode: FormMode,
    pub beta: f64,
    pub grid: FormGrid,
    pub a: KronSum,
    pub m: KronSum,
    pub separable: SeparableModel,
    /// Axial discretization (absent for the prism).
    pub x_axis: Option<Fem1D>,
    /// Named factor matrices for debug dumps.
    pub factors: Vec<(String, CsrMatrix)>,
    /// Non-fatal problems noticed while assembling.
    pub warnings: Vec<String>,
}

impl ShearForm {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn dims(&self) -> &[usize] {
        self.a.dims()
    }

    /// Mirror image `x -> -x` of a vector on a `full_sign` grid.
    pub fn reflect_x(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.mode != FormMode::FullSign {
            return Err(Error::InvalidParameter(format!(
                "reflection needs a full_sign form, this one is {}",
                self.mode
            )));
        }
        let nx = self.dims()[0];
        let inner = self.dim() / nx;
        let mut out = vec![0.0; v.len()];
        for i in 0..nx {
            let j = nx - 1 - i;
            out[j * inner..(j + 1) * inner].copy_from_slice(&v[i * inner..(i + 1) * inner]);
        }
        Ok(out)
    }

    /// `||v_odd||_M / ||v||_M` with `v_odd = (v - Rv)/2`.
    pub fn odd_fraction(&self, v: &[f64]) -> Result<f64> {
        let r = self.reflect_x(v)?;
        let odd: Vec<f64> = v.iter().zip(&r).map(|(a, b)| 0.5 * (a - b)).collect();
        Ok((self.m_norm2(&odd) / self.m_norm2(v)).sqrt())
    }

    pub fn m_norm2(&self, v: &[f64]) -> f64 {
        let mut mv = vec![0.0; v.len()];
        self.m.apply(v, &mut mv);
        v.iter().zip(&mv).map(|(a, b)| a * b).sum()
    }

    /// Writes each factor matrix as `<dir>/<name>.txt` in triplet format.
    pub fn write_factors(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, mat) in &self.factors {
            let f = std::fs::File::create(dir.join(format!("{name}.txt")))?;
            let mut w = std::io::BufWriter::new(f);
            mat.write_triplets(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

fn term(coeff: f64, factors: Vec<CsrMatrix>) -> KronTerm {
    KronTerm::new(coeff, factors)
}

fn check_length(spec: &WaveguideSpec, grid: &FormGrid, warnings: &mut Vec<String>) {
    let diam = spec.section.diameter();
    if grid.length <= diam {
        warnings.push(format!(
            "truncation length {} does not exceed the section diameter {diam:.6}",
            grid.length
        ));
    }
}

fn x_factor(mode: FormMode, grid: &FormGrid) -> Result<Fem1D> {
    match mode {
        FormMode::FullSign => Fem1D::new(2 * grid.nx, -grid.length, 2.0 * grid.length, Dirichlet, Dirichlet),
        _ => Fem1D::new(grid.nx, 0.0, grid.length, Neumann, Dirichlet),
    }
}

/// The 3D straightened form on the half (`half_DN`, `straight`) or full
/// (`full_sign`) waveguide.
pub fn assemble_waveguide(spec: &WaveguideSpec, grid: &FormGrid, mode: FormMode) -> Result<ShearForm> {
    spec.section.validate()?;
    grid.validate()?;
    let beta = match mode {
        FormMode::HalfDn | FormMode::FullSign => spec.beta.value(),
        FormMode::Straight => {
            if !spec.beta.is_straight() {
                return Err(Error::InvalidParameter(format!(
                    "straight mode needs the flagged beta = 0, got beta = {}",
                    spec.beta.value()
                )));
            }
            0.0
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "assemble_waveguide handles half_DN, full_sign and straight, not {other}"
            )))
        }
    };
    let mut warnings = Vec::new();
    check_length(spec, grid, &mut warnings);
    let fx = x_factor(mode, grid)?;
    let dx = if mode == FormMode::FullSign {
        fx.skew_weighted(f64::signum)
    } else {
        fx.d.clone()
    };
    let stretch = 1.0 + beta * beta;
    let mut factors = vec![
        ("Kx".to_string(), fx.k.clone()),
        ("Mx".to_string(), fx.m.clone()),
        ("Dx".to_string(), dx.clone()),
    ];
    let (a, m, separable) = match &spec.section {
        CrossSectionSpec::Rectangle(r) => {
            let f1 = fem1d(grid.n1, r.width(), Dirichlet, Dirichlet)?;
            let f2 = Fem1D::new(grid.n2, r.c, r.height(), Dirichlet, Dirichlet)?;
            let dims = vec![fx.dim(), f1.dim(), f2.dim()];
            let mut terms = vec![
                term(1.0, vec![fx.k.clone(), f1.m.clone(), f2.m.clone()]),
                term(1.0, vec![fx.m.clone(), f1.k.clone(), f2.m.clone()]),
                term(stretch, vec![fx.m.clone(), f1.m.clone(), f2.k.clone()]),
            ];
            if beta != 0.0 {
                terms.push(term(-beta, vec![dx.clone(), f1.m.clone(), f2.d.transpose()]));
                terms.push(term(-beta, vec![dx.transpose(), f1.m.clone(), f2.d.clone()]));
            }
            let a = KronSum::new(dims.clone(), terms);
            let m = KronSum::new(dims, vec![term(1.0, vec![fx.m.clone(), f1.m.clone(), f2.m.clone()])]);
            let sep = SeparableModel {
                lead: (fx.k.clone(), fx.m.clone()),
                trailing: vec![
                    (f1.k.clone(), f1.m.clone()),
                    (f2.k.scaled(stretch), f2.m.clone()),
                ],
            };
            factors.extend([
                ("K1".to_string(), f1.k),
                ("M1".to_string(), f1.m),
                ("K2".to_string(), f2.k),
                ("M2".to_string(), f2.m),
                ("D2".to_string(), f2.d),
            ]);
            (a, m, sep)
        }
        CrossSectionSpec::Mask(mask) => {
            let s = SectionFem::from_mask(mask, grid.n1, grid.n2)?;
            let dims = vec![fx.dim(), s.dim()];
            let mut terms = vec![
                term(1.0, vec![fx.k.clone(), s.m.clone()]),
                term(1.0, vec![fx.m.clone(), s.k1.clone()]),
                term(stretch, vec![fx.m.clone(), s.k2.clone()]),
            ];
            if beta != 0.0 {
                terms.push(term(-beta, vec![dx.clone(), s.d2.transpose()]));
                terms.push(term(-beta, vec![dx.transpose(), s.d2.clone()]));
            }
            let a = KronSum::new(dims.clone(), terms);
            let m = KronSum::new(dims, vec![term(1.0, vec![fx.m.clone(), s.m.clone()])]);
            let sec_k = s.k1.add_scaled(&s.k2, stretch);
            let sep = SeparableModel {
                lead: (fx.k.clone(), fx.m.clone()),
                trailing: vec![(sec_k, s.m.clone())],
            };
            factors.extend([
                ("Ks1".to_string(), s.k1),
                ("Ks2".to_string(), s.k2),
                ("Ms".to_string(), s.m),
                ("Ds2".to_string(), s.d2),
            ]);
            (a, m, sep)
        }
    };
    Ok(ShearForm {
        mode,
        beta,
        grid: *grid,
        a,
        m,
        separable,
        x_axis: Some(fx),
        factors,
        warnings,
    })
}

/// The `(x, y2)` factor `∫ |ψ_x - β ψ_2|² + |ψ_2|²` on `(0, L) x (c, d)` of a
/// rectangle waveguide, Neumann at `x = 0`. `grid.n1` is not used.
pub fn assemble_reduced2d(beta: ShearParam, rect: &Rect, grid: &FormGrid) -> Result<ShearForm> {
    rect.validate()?;
    grid.validate()?;
    let b = beta.value();
    let mut warnings = Vec::new();
    if grid.length <= rect.height() {
        warnings.push(format!(
            "truncation length {} does not exceed the strip width {}",
            grid.length,
            rect.height()
        ));
    }
    let fx = x_factor(FormMode::Reduced2d, grid)?;
    let f2 = Fem1D::new(grid.n2, rect.c, rect.height(), Dirichlet, Dirichlet)?;
    let dims = vec![fx.dim(), f2.dim()];
    let stretch = beta.stretch();
    let mut terms = vec![
        term(1.0, vec![fx.k.clone(), f2.m.clone()]),
        term(stretch, vec![fx.m.clone(), f2.k.clone()]),
    ];
    if b != 0.0 {
        terms.push(term(-b, vec![fx.d.clone(), f2.d.transpose()]));
        terms.push(term(-b, vec![fx.d.transpose(), f2.d.clone()]));
    }
    let a = KronSum::new(dims.clone(), terms);
    let m = KronSum::new(dims, vec![term(1.0, vec![fx.m.clone(), f2.m.clone()])]);
    let separable = SeparableModel {
        lead: (fx.k.clone(), fx.m.clone()),
        trailing: vec![(f2.k.scaled(stretch), f2.m.clone())],
    };
    let factors = vec![
        ("Kx".to_string(), fx.k.clone()),
        ("Mx".to_string(), fx.m.clone()),
        ("Dx".to_string(), fx.d.clone()),
        ("K2".to_string(), f2.k),
        ("M2".to_string(), f2.m),
        ("D2".to_string(), f2.d),
    ];
    Ok(ShearForm {
        mode: FormMode::Reduced2d,
        beta: b,
        grid: *grid,
        a,
        m,
        separable,
        x_axis: Some(fx),
        factors,
        warnings,
    })
}

/// Coefficients `((1+β²)/(2β²), 1, (1+β²)/2)` of the prism operator.
pub fn prism_coefficients(beta: ShearParam) -> Result<[f64; 3]> {
    let b = beta.value();
    if !(b > 0.0) {
        return Err(Error::InvalidParameter("the prism form needs beta > 0".into()));
    }
    let s = beta.stretch();
    Ok([s / (2.0 * b * b), 1.0, s / 2.0])
}

/// Anisotropic form on the triangular prism `W`: the triangle from
/// [`prism_region`] is cut from an `nx x nx` grid, the `y1` edge `(0, b-a)`
/// has `n1` intervals. Dirichlet on `y2 = 0` and `y1 ∈ {0, b-a}`, natural on
/// `x = 0` and the slanted face.
pub fn assemble_prism(beta: ShearParam, rect: &Rect, grid: &FormGrid) -> Result<ShearForm> {
    let region = prism_region(rect)?;
    if grid.nx < 8 || grid.n1 < 8 {
        return Err(Error::GridTooCoarse(format!(
            "prism grid {}x{} is below the minimum of 8",
            grid.nx, grid.n1
        )));
    }
    let [cx, c1, c2] = prism_coefficients(beta)?;
    let tri = TriangleMesh::new(region.half_width, grid.nx)?;
    let f1 = fem1d(grid.n1, region.depth, Dirichlet, Dirichlet)?;
    let s0 = tri.kxx.scaled(cx).add_scaled(&tri.kyy, c2);
    let dims = vec![tri.dim(), f1.dim()];
    let a = KronSum::new(
        dims.clone(),
        vec![
            term(1.0, vec![s0.clone(), f1.m.clone()]),
            term(c1, vec![tri.m.clone(), f1.k.clone()]),
        ],
    );
    let m = KronSum::new(dims, vec![term(1.0, vec![tri.m.clone(), f1.m.clone()])]);
    let separable = SeparableModel {
        lead: (s0.clone(), tri.m.clone()),
        trailing: vec![(f1.k.scaled(c1), f1.m.clone())],
    };
    let factors = vec![
        ("Stri".to_string(), s0),
        ("Mtri".to_string(), tri.m.clone()),
        ("K1".to_string(), f1.k),
        ("M1".to_string(), f1.m),
    ];
    Ok(ShearForm {
        mode: FormMode::Prism,
        beta: beta.value(),
        grid: *grid,
        a,
        m,
        separable,
        x_axis: None,
        factors,
        warnings: Vec::new(),
    })
}

/// A named way of turning a waveguide and a grid into a form.
pub trait FormBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, spec: &WaveguideSpec, grid: &FormGrid) -> Result<ShearForm>;
}

struct WaveguideBuilder(FormMode);

impl FormBuilder for WaveguideBuilder {
    fn name(&self) -> &'static str {
        self.0.as_str()
    }

    fn build(&self, spec: &WaveguideSpec, grid: &FormGrid) -> Result<ShearForm> {
        assemble_waveguide(spec, grid, self.0)
    }
}

fn require_rect(spec: &WaveguideSpec, what: &str) -> Result<Rect> {
    spec.section
        .as_rect()
        .copied()
        .ok_or_else(|| Error::UnsupportedSection(format!("{what} needs a rectangular section")))
}

struct ReducedBuilder;

impl FormBuilder for ReducedBuilder {
    fn name(&self) -> &'static str {
        "reduced2d"
    }

    fn build(&self, spec: &WaveguideSpec, grid: &FormGrid) -> Result<ShearForm> {
        assemble_reduced2d(spec.beta, &require_rect(spec, "reduced2d")?, grid)
    }
}

struct PrismBuilder;

impl FormBuilder for PrismBuilder {
    fn name(&self) -> &'static str {
        "prism"
    }

    fn build(&self, spec: &WaveguideSpec, grid: &FormGrid) -> Result<ShearForm> {
        assemble_prism(spec.beta, &require_rect(spec, "prism")?, grid)
    }
}

pub struct FormRegistry {
    builders: BTreeMap<String, Box<dyn FormBuilder>>,
}

impl FormRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, builder: Box<dyn FormBuilder>) {
        self.builders.insert(builder.name().to_string(), builder);
    }

    pub fn get(&self, name: &str) -> Result<&dyn FormBuilder> {
        let key = name.parse::<FormMode>().map(FormMode::as_str).unwrap_or(name);
        self.builders
            .get(key)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "form builder",
                name: name.into(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.builders.keys().cloned().collect()
    }
}

impl Default for FormRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        for mode in [FormMode::HalfDn, FormMode::FullSign, FormMode::Straight] {
            r.register(Box::new(WaveguideBuilder(mode)));
        }
        r.register(Box::new(ReducedBuilder));
        r.register(Box::new(PrismBuilder));
        r
    }
}

/// A named preconditioner construction for assembled forms.
pub trait PreconditionerFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, form: &ShearForm) -> Result<Option<Box<dyn Preconditioner>>>;
}

pub struct NoPreconditioner;

impl PreconditionerFactory for NoPreconditioner {
    fn name(&self) -> &'static str {
        "none"
    }

    fn build(&self, _form: &ShearForm) -> Result<Option<Box<dyn Preconditioner>>> {
        Ok(None)
    }
}

pub struct JacobiFactory;

impl PreconditionerFactory for JacobiFactory {
    fn name(&self) -> &'static str {
        "jacobi"
    }

    fn build(&self, form: &ShearForm) -> Result<Option<Box<dyn Preconditioner>>> {
        let d = form.a.diagonal().expect("Kronecker sums expose their diagonal");
        Ok(Some(Box::new(JacobiPreconditioner::new(&d)?)))
    }
}

/// Inverse of the separable part shifted by `shift_fraction` times its bottom.
pub struct TensorFactory {
    pub shift_fraction: f64,
}

impl Default for TensorFactory {
    fn default() -> Self {
        Self { shift_fraction: 0.9 }
    }
}

impl PreconditionerFactory for TensorFactory {
    fn name(&self) -> &'static str {
        "tensor"
    }

    fn build(&self, form: &ShearForm) -> Result<Option<Box<dyn Preconditioner>>> {
        Ok(Some(Box::new(form.separable.preconditioner(self.shift_fraction)?)))
    }
}

pub struct PrecondRegistry {
    factories: BTreeMap<String, Box<dyn PreconditionerFactory>>,
}

impl PrecondRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, f: Box<dyn PreconditionerFactory>) {
        self.factories.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Result<&dyn PreconditionerFactory> {
        self.factories
            .get(name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "preconditioner",
                name: name.into(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}

impl Default for PrecondRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(NoPreconditioner));
        r.register(Box::new(JacobiFactory));
        r.register(Box::new(TensorFactory::default()));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigcore::{dense_matrix, DenseSolver};
    use std::f64::consts::PI;

    fn square(beta: f64) -> WaveguideSpec {
        WaveguideSpec::rectangle(beta, Rect::unit_square()).unwrap()
    }

    fn probe_symmetry(op: &dyn LinearOperator) -> f64 {
        let n = op.dim();
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 104729) % 97) as f64 / 97.0 - 0.5).collect();
        let (mut ax, mut ay) = (vec![0.0; n], vec![0.0; n]);
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let l: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let r: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        (l - r).abs()
    }

    #[test]
    fn rectangle_form_is_symmetric() {
        let f = assemble_waveguide(&square(1.0), &FormGrid::new(8, 8, 8, 2.0), FormMode::HalfDn).unwrap();
        assert_eq!(f.dims(), &[8, 7, 7]);
        assert!(f.a.to_csr().max_asymmetry() < 1e-12);
        assert!(probe_symmetry(&f.a) < 1e-10);
        let full = assemble_waveguide(&square(2.0), &FormGrid::new(8, 8, 8, 2.0), FormMode::FullSign).unwrap();
        assert_eq!(full.dims(), &[15, 7, 7]);
        assert!(full.a.to_csr().max_asymmetry() < 1e-12);
    }

    #[test]
    fn straight_limit_is_a_kronecker_sum() {
        let spec = WaveguideSpec::new(ShearParam::straight(), CrossSectionSpec::Rectangle(Rect::unit_square())).unwrap();
        let grid = FormGrid::new(8, 8, 8, 1.5);
        let f = assemble_waveguide(&spec, &grid, FormMode::Straight).unwrap();
        let r = DenseSolver::default()
            .solve_matrices(&dense_matrix(&f.a), &dense_matrix(&f.m), 3)
            .unwrap();
        let eig = |k: &CsrMatrix, m: &CsrMatrix| {
            DenseSolver::default()
                .solve_matrices(&k.to_dense(), &m.to_dense(), k.nrows())
                .unwrap()
                .eigenvalues
        };
        let fx = fem1d(8, 1.5, Neumann, Dirichlet).unwrap();
        let f1 = fem1d(8, 1.0, Dirichlet, Dirichlet).unwrap();
        let (ex, e1) = (eig(&fx.k, &fx.m), eig(&f1.k, &f1.m));
        let mut sums = Vec::new();
        for a in &ex {
            for b in &e1 {
                for c in &e1 {
                    sums.push(a + b + c);
                }
            }
        }
        sums.sort_by(f64::total_cmp);
        for j in 0..3 {
            assert!((r.eigenvalues[j] - sums[j]).abs() < 1e-9 * sums[j]);
        }
        assert!(assemble_waveguide(&square(1.0), &grid, FormMode::Straight).is_err());
    }

    #[test]
    fn reduced_form_scales_with_the_strip() {
        let beta = ShearParam::new(1.0).unwrap();
        let lowest = |w: f64, len: f64| {
            let r = Rect::new(0.0, 1.0, 0.0, w).unwrap();
            let f = assemble_reduced2d(beta, &r, &FormGrid::new(12, 8, 10, len)).unwrap();
            DenseSolver::default()
                .solve_matrices(&dense_matrix(&f.a), &dense_matrix(&f.m), 2)
                .unwrap()
                .eigenvalues
        };
        let small = lowest(1.0, 3.0);
        let big = lowest(2.0, 6.0);
        for (s, b) in small.iter().zip(&big) {
            assert!((s / b - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn coarse_grids_and_short_tubes() {
        assert!(matches!(
            assemble_waveguide(&square(1.0), &FormGrid::new(4, 8, 8, 2.0), FormMode::HalfDn),
            Err(Error::GridTooCoarse(_))
        ));
        let f = assemble_waveguide(&square(1.0), &FormGrid::new(8, 8, 8, 1.0), FormMode::HalfDn).unwrap();
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn reflection_of_an_even_vector() {
        let f = assemble_waveguide(&square(1.0), &FormGrid::new(8, 8, 8, 2.0), FormMode::FullSign).unwrap();
        let coords = f.x_axis.as_ref().unwrap().dof_coords();
        let inner = f.dim() / coords.len();
        let even: Vec<f64> = coords
            .iter()
            .flat_map(|x| std::iter::repeat(x * x).take(inner))
            .collect();
        assert!(f.odd_fraction(&even).unwrap() < 1e-15);
        let odd: Vec<f64> = coords.iter().flat_map(|&x| std::iter::repeat(x).take(inner)).collect();
        assert!((f.odd_fraction(&odd).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn prism_matches_closed_forms_at_beta_one() {
        let f = assemble_prism(ShearParam::new(1.0).unwrap(), &Rect::unit_square(), &FormGrid::new(16, 12, 8, 1.0)).unwrap();
        let r = DenseSolver::default()
            .solve_matrices(&dense_matrix(&f.a), &dense_matrix(&f.m), 2)
            .unwrap();
        assert!((r.eigenvalues[0] / (2.0 * PI * PI) - 1.0).abs() < 1e-2);
        assert!((r.eigenvalues[1] / (5.0 * PI * PI) - 1.0).abs() < 3e-2);
        assert!(r.eigenvalues[0] > 2.0 * PI * PI);
    }

    #[test]
    fn mask_form_matches_the_rectangle_form() {
        let mask = crate::geometry::Mask::from_fn(4, 4, 0.25, [0.0, 0.0], |_, _| true).unwrap();
        let spec_m = WaveguideSpec::new(ShearParam::new(1.5).unwrap(), CrossSectionSpec::Mask(mask)).unwrap();
        let grid = FormGrid::new(8, 8, 8, 2.0);
        let fm = assemble_waveguide(&spec_m, &grid, FormMode::HalfDn).unwrap();
        let fr = assemble_waveguide(&square(1.5), &grid, FormMode::HalfDn).unwrap();
        let am = fm.a.to_csr();
        let ar = fr.a.to_csr();
        assert_eq!(am.nrows(), ar.nrows());
        for (i, j, v) in ar.triplets() {
            assert!((am.get(i, j) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn registries_resolve_names() {
        let forms = FormRegistry::default();
        assert_eq!(forms.get("half").unwrap().name(), "half_DN");
        assert_eq!(forms.get("reduced2d").unwrap().name(), "reduced2d");
        assert!(matches!(forms.get("spiral"), Err(Error::UnknownStrategy { .. })));
        let pcs = PrecondRegistry::default();
        assert_eq!(pcs.names(), vec!["jacobi", "none", "tensor"]);
        let mask = crate::geometry::Mask::l_shape(1).unwrap();
        let spec = WaveguideSpec::new(ShearParam::new(1.0).unwrap(), CrossSectionSpec::Mask(mask)).unwrap();
        assert!(matches!(
            forms.get("prism").unwrap().build(&spec, &FormGrid::new(8, 8, 8, 2.0)),
            Err(Error::UnsupportedSection(_))
        ));
    }
}
