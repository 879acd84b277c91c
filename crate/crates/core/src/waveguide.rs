//! End-to-end spectral runs: convergence ladders over mesh and truncation
//! length, extrapolation, counting below the threshold, and the symmetry and
//! separation cross-checks.
//!
//! Counting happens twice. Every rung counts its raw eigenvalues against the
//! discrete threshold of the same grid (the bottom of the trailing section
//! pencils), so rung counts are comparable without extrapolation. The final
//! count compares extrapolated eigenvalues against `E1(beta)` with a safety
//! band.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_reduced2d, assemble_waveguide, fem1d, BoundaryCondition::Dirichlet, FormGrid, FormMode, FormRegistry,
    PrecondRegistry, ShearForm,
};
use crate::eigcore::{DenseSolver, EigOptions, EigResult, LinearOperator, SolverRegistry};
use crate::error::{Error, Result};
use crate::geometry::{CrossSectionSpec, Rect, ShearParam, WaveguideSpec};
use crate::thresholds::rect_threshold;

/// Largest number of eigenpairs a rung will ask for while looking for the
/// first eigenvalues above the threshold.
const MAX_PAIRS: usize = 64;

/// Relative slack for the monotonicity assertions (solver accuracy).
const MONOTONE_SLACK: f64 = 1e-8;

fn default_mesh_rungs() -> usize {
    3
}

fn default_length_rungs() -> usize {
    2
}

fn default_solver() -> String {
    "lobpcg".into()
}

fn default_preconditioner() -> String {
    "tensor".into()
}

/// Grid ladder of a run. Mesh rungs refine the base grid by factors of two
/// at fixed `L`; length rungs double `L` at the base spacing (so `nx` doubles
/// with it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSpec {
    pub mode: FormMode,
    /// Coarsest grid.
    pub grid: FormGrid,
    #[serde(default = "default_mesh_rungs")]
    pub mesh_rungs: usize,
    /// Number of truncation lengths `L, 2L, 4L, ...` at the base spacing.
    #[serde(default = "default_length_rungs")]
    pub length_rungs: usize,
    /// Pick `L` from a coarse pre-solve (see [`choose_length`]).
    #[serde(default)]
    pub auto_length: bool,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default = "default_preconditioner")]
    pub preconditioner: String,
}

impl DiscretizationSpec {
    pub fn new(mode: FormMode, grid: FormGrid) -> Self {
        Self {
            mode,
            grid,
            mesh_rungs: default_mesh_rungs(),
            length_rungs: default_length_rungs(),
            auto_length: false,
            solver: default_solver(),
            preconditioner: default_preconditioner(),
        }
    }

    pub fn with_ladder(mut self, mesh_rungs: usize, length_rungs: usize) -> Self {
        self.mesh_rungs = mesh_rungs;
        self.length_rungs = length_rungs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.mesh_rungs == 0 || self.length_rungs == 0 {
            return Err(Error::InvalidParameter("the ladder needs at least one mesh rung and one length".into()));
        }
        if self.mode == FormMode::Prism {
            return Err(Error::InvalidParameter(
                "the prism form has no unbounded axis; use the prism check instead".into(),
            ));
        }
        Ok(())
    }

    pub fn mesh_grid(&self, rung: usize) -> FormGrid {
        let f = 1 << rung;
        FormGrid::new(self.grid.nx * f, self.grid.n1 * f, self.grid.n2 * f, self.grid.length)
    }

    pub fn length_grid(&self, rung: usize) -> FormGrid {
        let f = 1 << rung;
        FormGrid::new(self.grid.nx * f, self.grid.n1, self.grid.n2, self.grid.length * f as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungKind {
    Mesh,
    Length,
}

/// One solve of the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rung {
    pub kind: RungKind,
    pub index: usize,
    pub grid: FormGrid,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Bottom of the section pencils at this grid.
    pub discrete_threshold: f64,
    /// Eigenvalues below `discrete_threshold - rung_band`.
    pub count: usize,
    /// Some eigenvalue within `rung_band` of the discrete threshold.
    pub boundary: bool,
    pub seconds: f64,
}

impl Rung {
    pub fn label(&self) -> String {
        match self.kind {
            RungKind::Mesh => format!("h{}", self.index),
            RungKind::Length => format!("L{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extrapolated {
    pub j: usize,
    pub value: f64,
    /// Convergence order used (`None` with a single mesh rung).
    pub order: Option<f64>,
    pub error: f64,
    /// Safety band used when counting this eigenvalue.
    pub band: f64,
}

/// Richardson extrapolation of a sequence computed on grids refined by two.
///
/// Two values: assumed order 2. Three or more: the observed order of the
/// last three, clamped to `[1, 2]`; the error estimate is the disagreement
/// between the order-2 extrapolants of consecutive pairs, or the distance
/// between the observed-order and order-2 values, whichever is larger.
pub fn richardson(values: &[f64]) -> (f64, Option<f64>, f64) {
    let n = values.len();
    match n {
        0 => (f64::NAN, None, f64::INFINITY),
        1 => (values[0], None, 0.0),
        2 => {
            let e = values[1] + (values[1] - values[0]) / 3.0;
            (e, Some(2.0), (e - values[1]).abs())
        }
        _ => {
            let (l1, l2, l3) = (values[n - 3], values[n - 2], values[n - 1]);
            let (d1, d2) = (l1 - l2, l2 - l3);
            let e12 = l2 - d1 / 3.0;
            let e23 = l3 - d2 / 3.0;
            let spread = (e23 - e12).abs();
            if d1 > 0.0 && d2 > 0.0 {
                let p = (d1 / d2).log2().clamp(1.0, 2.0);
                let e = l3 - d2 / (2f64.powf(p) - 1.0);
                (e, Some(p), spread.max((e - e23).abs()))
            } else {
                (e23, Some(2.0), spread.max(d2.abs()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NotConverged,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub beta: f64,
    pub section: CrossSectionSpec,
    pub mode: FormMode,
    /// Threshold in the units of the solved form: `E1(beta)`, or the
    /// `(x, y2)` part `(1+beta^2) pi^2/(d-c)^2` in the reduced mode.
    pub threshold: f64,
    /// Error of `threshold` (zero when it is known in closed form).
    pub threshold_error: f64,
    /// Amount added to the form's eigenvalues to get the 3D ones
    /// (`pi^2/(b-a)^2` in the reduced mode, otherwise 0).
    pub lift: f64,
    pub rungs: Vec<Rung>,
    pub extrapolated: Vec<Extrapolated>,
    /// Widest band among the eigenvalues that decide the count.
    pub safety_band: f64,
    /// Extrapolated eigenvalues below the threshold by more than their band.
    pub count: usize,
    /// Counts agree on the last two mesh rungs and the last two lengths.
    pub count_stable: bool,
    pub monotone_in_h: bool,
    pub monotone_in_length: bool,
    /// Relative change of the ground margin `threshold - lambda_1` between
    /// the last two lengths at the base spacing.
    pub length_margin_change: Option<f64>,
    pub status: RunStatus,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

impl SpectrumReport {
    pub fn mesh_rungs(&self) -> impl Iterator<Item = &Rung> {
        self.rungs.iter().filter(|r| r.kind == RungKind::Mesh)
    }

    pub fn length_rungs(&self) -> impl Iterator<Item = &Rung> {
        self.rungs.iter().filter(|r| r.kind == RungKind::Length)
    }

    /// Extrapolated eigenvalues below the threshold.
    pub fn bound_states(&self) -> Vec<f64> {
        self.extrapolated.iter().take(self.count).map(|e| e.value).collect()
    }

    /// `threshold - lambda_1` (negative when nothing lies below).
    pub fn gap(&self) -> Option<f64> {
        self.extrapolated.first().map(|e| self.threshold - e.value)
    }

    /// Flat table: one row per rung and eigenvalue, then the extrapolated
    /// rows (rung `ext`, grid of the finest mesh rung). `lambda` is in 3D
    /// units, so reduced runs carry the lift.
    pub fn table_rows(&self) -> Vec<TableRow> {
        let mut rows = Vec::new();
        let flags = self.flags.join(";");
        for r in &self.rungs {
            for (j, (&l, &res)) in r.eigenvalues.iter().zip(&r.residuals).enumerate() {
                rows.push(TableRow {
                    beta: self.beta,
                    mode: self.mode.as_str().into(),
                    rung: r.label(),
                    length: r.grid.length,
                    nx: r.grid.nx,
                    n1: r.grid.n1,
                    n2: r.grid.n2,
                    j: j + 1,
                    lambda: l + self.lift,
                    residual: res,
                    below_threshold: l < r.discrete_threshold,
                    flags: if r.converged { String::new() } else { "not_converged".into() },
                });
            }
        }
        if let Some(fine) = self.mesh_rungs().last() {
            for e in &self.extrapolated {
                rows.push(TableRow {
                    beta: self.beta,
                    mode: self.mode.as_str().into(),
                    rung: "ext".into(),
                    length: fine.grid.length,
                    nx: fine.grid.nx,
                    n1: fine.grid.n1,
                    n2: fine.grid.n2,
                    j: e.j + 1,
                    lambda: e.value + self.lift,
                    residual: e.error,
                    below_threshold: e.j < self.count,
                    flags: flags.clone(),
                });
            }
        }
        rows
    }
}

/// CSV row layout of eigenvalue tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub beta: f64,
    pub mode: String,
    pub rung: String,
    #[serde(rename = "L")]
    pub length: f64,
    pub nx: usize,
    pub n1: usize,
    pub n2: usize,
    pub j: usize,
    pub lambda: f64,
    pub residual: f64,
    pub below_threshold: bool,
    pub flags: String,
}

impl TableRow {
    pub const HEADER: [&'static str; 12] = [
        "beta",
        "mode",
        "rung",
        "L",
        "nx",
        "n1",
        "n2",
        "j",
        "lambda",
        "residual",
        "below_threshold",
        "flags",
    ];
}

/// The solved form's threshold and the lift back to 3D eigenvalues.
fn form_threshold(spec: &WaveguideSpec, mode: FormMode) -> Result<(Option<f64>, f64)> {
    let beta = spec.beta;
    match (mode, &spec.section) {
        (FormMode::Reduced2d, CrossSectionSpec::Rectangle(r)) => {
            let lift = PI * PI / r.width().powi(2);
            Ok((Some(beta.stretch() * PI * PI / r.height().powi(2)), lift))
        }
        (FormMode::Reduced2d, _) => Err(Error::UnsupportedSection("reduced2d needs a rectangular section".into())),
        (_, CrossSectionSpec::Rectangle(r)) => Ok((Some(rect_threshold(beta, r)), 0.0)),
        (_, CrossSectionSpec::Mask(_)) => Ok((None, 0.0)),
    }
}

struct Strategy<'a> {
    forms: FormRegistry,
    preconds: PrecondRegistry,
    solvers: SolverRegistry,
    disc: &'a DiscretizationSpec,
}

impl<'a> Strategy<'a> {
    fn new(disc: &'a DiscretizationSpec) -> Result<Self> {
        let s = Self {
            forms: FormRegistry::default(),
            preconds: PrecondRegistry::default(),
            solvers: SolverRegistry::default(),
            disc,
        };
        s.forms.get(disc.mode.as_str())?;
        s.preconds.get(&disc.preconditioner)?;
        s.solvers.get(&disc.solver)?;
        Ok(s)
    }

    fn build(&self, spec: &WaveguideSpec, grid: &FormGrid) -> Result<ShearForm> {
        self.forms.get(self.disc.mode.as_str())?.build(spec, grid)
    }

    fn solve(&self, form: &ShearForm, opts: &EigOptions) -> Result<EigResult> {
        let pc = self.preconds.get(&self.disc.preconditioner)?.build(form)?;
        let solver = self.solvers.get(&self.disc.solver)?;
        let a = form.a.to_csr();
        let m = form.m.to_csr();
        solver.solve(&a, &m, pc.as_deref(), opts)
    }

    /// Solves with a growing number of pairs until two eigenvalues clear
    /// `threshold + band` (or the cap is hit).
    fn solve_past(&self, form: &ShearForm, threshold: f64, band: f64, opts: &EigOptions) -> Result<(EigResult, bool)> {
        let n = form.dim();
        let mut k = opts.k.max(2).min(n);
        loop {
            let res = self.solve(form, &EigOptions { k, ..opts.clone() })?;
            let above = res.eigenvalues.iter().filter(|&&l| l > threshold + band).count();
            if above >= 2 || k == n || !res.all_converged() {
                return Ok((res, true));
            }
            if k >= MAX_PAIRS {
                return Ok((res, false));
            }
            k = (2 * k).min(n).min(MAX_PAIRS);
        }
    }

    fn rung(&self, spec: &WaveguideSpec, kind: RungKind, index: usize, grid: FormGrid, band: f64, opts: &EigOptions) -> Result<(Rung, Vec<String>, bool)> {
        let t = Instant::now();
        let form = self.build(spec, &grid)?;
        let thr = form.separable.trailing_bottom()?;
        let (res, resolved) = self.solve_past(&form, thr, band, opts)?;
        let (count, boundary) = rung_count(&res.eigenvalues, thr, band);
        Ok((
            Rung {
                kind,
                index,
                grid,
                converged: res.all_converged(),
                iterations: res.iterations,
                eigenvalues: res.eigenvalues,
                residuals: res.residuals,
                discrete_threshold: thr,
                count,
                boundary,
                seconds: t.elapsed().as_secs_f64(),
            },
            form.warnings,
            resolved,
        ))
    }
}

fn rung_count(eigenvalues: &[f64], threshold: f64, band: f64) -> (usize, bool) {
    let count = eigenvalues.iter().filter(|&&l| l < threshold - band).count();
    let boundary = eigenvalues.iter().any(|&l| (l - threshold).abs() <= band);
    (count, boundary)
}

fn non_increasing(coarse: &[f64], fine: &[f64]) -> bool {
    coarse
        .iter()
        .zip(fine)
        .all(|(&c, &f)| f <= c + MONOTONE_SLACK * c.abs().max(1.0))
}

/// Truncation length for a spectral run: a coarse solve at the base spacing
/// finds the weakest bound state, and `L` is raised to `6/sqrt(gap)` so the
/// truncation error `~exp(-2 sqrt(gap) L)` is negligible. If nothing is bound
/// at the base length, `L` is doubled up to three times before giving up.
/// Returns the base length when nothing is found.
pub fn choose_length(spec: &WaveguideSpec, disc: &DiscretizationSpec, opts: &EigOptions) -> Result<f64> {
    disc.validate()?;
    let strat = Strategy::new(disc)?;
    let base = disc.grid;
    let floor = 2.0 * spec.section.diameter();
    let mut length = base.length.max(floor);
    for _ in 0..4 {
        let nx = ((base.nx as f64) * length / base.length).round() as usize;
        let grid = FormGrid::new(nx.max(8), base.n1, base.n2, length);
        let form = strat.build(spec, &grid)?;
        let thr = form.separable.trailing_bottom()?;
        let (res, _) = strat.solve_past(&form, thr, 0.0, opts)?;
        let weakest = res.eigenvalues.iter().filter(|&&l| l < thr).map(|&l| thr - l).fold(f64::INFINITY, f64::min);
        if weakest.is_finite() {
            return Ok(length.max(6.0 / weakest.sqrt()));
        }
        length *= 2.0;
    }
    Ok(base.length.max(floor))
}

/// Runs the ladder and counts eigenvalues below the threshold.
pub fn compute_spectrum(spec: &WaveguideSpec, disc: &DiscretizationSpec, opts: &EigOptions) -> Result<SpectrumReport> {
    let t0 = Instant::now();
    disc.validate()?;
    opts.validate()?;
    spec.section.validate()?;
    let mut disc = disc.clone();
    if disc.auto_length {
        let l = choose_length(spec, &disc, opts)?;
        let nx = ((disc.grid.nx as f64) * l / disc.grid.length).ceil() as usize;
        disc.grid = FormGrid::new(nx, disc.grid.n1, disc.grid.n2, l);
        disc.auto_length = false;
    }
    let strat = Strategy::new(&disc)?;
    let (exact_threshold, lift) = form_threshold(spec, disc.mode)?;
    // a provisional band for the rung counts; the rung thresholds are exact
    // discrete quantities, so only solver accuracy matters there
    let scale = exact_threshold.unwrap_or(1.0);
    let rung_band = 1e-6 * scale.abs();

    let mut jobs: Vec<(RungKind, usize, FormGrid)> =
        (0..disc.mesh_rungs).map(|r| (RungKind::Mesh, r, disc.mesh_grid(r))).collect();
    jobs.extend((1..disc.length_rungs).map(|r| (RungKind::Length, r, disc.length_grid(r))));
    let solved: Vec<(Rung, Vec<String>, bool)> = jobs
        .into_par_iter()
        .map(|(kind, i, g)| strat.rung(spec, kind, i, g, rung_band, opts))
        .collect::<Result<_>>()?;

    let mut flags = Vec::new();
    let mut warnings = Vec::new();
    let mut rungs = Vec::new();
    for (r, w, resolved) in solved {
        for msg in w {
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        if !resolved {
            flags.push(format!("pair_cap_{}", r.label()));
        }
        rungs.push(r);
    }
    let mesh: Vec<&Rung> = rungs.iter().filter(|r| r.kind == RungKind::Mesh).collect();
    // the base-spacing length ladder starts at the coarsest mesh rung
    let mut lengths: Vec<&Rung> = vec![mesh[0]];
    lengths.extend(rungs.iter().filter(|r| r.kind == RungKind::Length));

    let converged = rungs.iter().all(|r| r.converged);
    if !converged {
        flags.push("not_converged".into());
    }

    let (threshold, threshold_error) = match exact_threshold {
        Some(t) => (t, 0.0),
        None => {
            let thr: Vec<f64> = mesh.iter().map(|r| r.discrete_threshold).collect();
            let (v, _, e) = richardson(&thr);
            (v, e)
        }
    };

    let pairs = mesh.iter().map(|r| r.eigenvalues.len()).min().unwrap_or(0);
    let mut extrapolated: Vec<Extrapolated> = (0..pairs)
        .map(|j| {
            let seq: Vec<f64> = mesh.iter().map(|r| r.eigenvalues[j]).collect();
            let (value, order, error) = richardson(&seq);
            Extrapolated {
                j,
                value,
                order,
                error,
                band: 0.0,
            }
        })
        .collect();
    if mesh.len() == 1 {
        flags.push("unextrapolated".into());
    }

    // each eigenvalue carries its own band; the reported band is the widest
    // among the pairs that decide the count (all below plus the first above)
    let floor = 1e-6 * threshold.abs();
    for e in &mut extrapolated {
        e.band = floor.max(e.error + threshold_error);
    }
    let decisive = extrapolated
        .iter()
        .position(|e| e.value > threshold)
        .map_or(extrapolated.len(), |p| p + 1);
    let safety_band = extrapolated[..decisive].iter().map(|e| e.band).fold(floor, f64::max);
    let count = extrapolated.iter().filter(|e| e.value < threshold - e.band).count();
    let band_hit = extrapolated.iter().any(|e| (e.value - threshold).abs() <= e.band);
    if band_hit {
        flags.push("band_hit".into());
    }
    if extrapolated.last().map_or(true, |e| e.value <= threshold + e.band) {
        flags.push("spectrum_not_resolved".into());
    }

    let last_two_equal = |rs: &[&Rung]| rs.len() < 2 || rs[rs.len() - 2].count == rs[rs.len() - 1].count;
    let mesh_stable = last_two_equal(&mesh);
    let length_stable = last_two_equal(&lengths);
    if !mesh_stable {
        flags.push("mesh_count_unstable".into());
    }
    if !length_stable {
        flags.push("length_count_unstable".into());
    }
    if mesh.len() < 2 || lengths.len() < 2 {
        flags.push("short_ladder".into());
    }
    if lengths.iter().skip(1).any(|r| r.boundary) {
        flags.push("length_band_hit".into());
    }
    let fine_count = mesh.last().map_or(0, |r| r.count);
    if fine_count != count {
        flags.push("extrapolated_count_differs".into());
    }
    let count_stable = mesh_stable && length_stable && mesh.len() >= 2 && lengths.len() >= 2;

    let monotone_in_h = mesh.windows(2).all(|w| non_increasing(&w[0].eigenvalues, &w[1].eigenvalues));
    let monotone_in_length = lengths.windows(2).all(|w| non_increasing(&w[0].eigenvalues, &w[1].eigenvalues));
    if !monotone_in_h {
        flags.push("non_monotone_h".into());
    }
    if !monotone_in_length {
        flags.push("non_monotone_length".into());
    }

    let length_margin_change = match lengths.as_slice() {
        [.., prev, last] if !prev.eigenvalues.is_empty() && !last.eigenvalues.is_empty() => {
            let m_prev = prev.discrete_threshold - prev.eigenvalues[0];
            let m_last = last.discrete_threshold - last.eigenvalues[0];
            (m_last > 0.0).then(|| (m_last - m_prev).abs() / m_last)
        }
        _ => None,
    };

    let status = if !converged {
        RunStatus::NotConverged
    } else if band_hit || !count_stable || flags.iter().any(|f| f == "spectrum_not_resolved") {
        RunStatus::Inconclusive
    } else {
        RunStatus::Ok
    };
    if status == RunStatus::Inconclusive {
        flags.push("inconclusive".into());
    }
    Ok(SpectrumReport {
        beta: spec.beta.value(),
        section: spec.section.clone(),
        mode: disc.mode,
        threshold,
        threshold_error,
        lift,
        rungs,
        extrapolated,
        safety_band,
        count,
        count_stable,
        monotone_in_h,
        monotone_in_length,
        length_margin_change,
        status,
        flags,
        warnings,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountCertificate {
    pub count: usize,
    pub stable: bool,
    pub mesh_counts: Vec<usize>,
    pub length_counts: Vec<usize>,
    pub safety_band: f64,
    pub status: RunStatus,
}

impl From<&SpectrumReport> for CountCertificate {
    fn from(r: &SpectrumReport) -> Self {
        let mut length_counts: Vec<usize> = r.mesh_rungs().take(1).map(|x| x.count).collect();
        length_counts.extend(r.length_rungs().map(|x| x.count));
        Self {
            count: r.count,
            stable: r.count_stable && r.status == RunStatus::Ok,
            mesh_counts: r.mesh_rungs().map(|x| x.count).collect(),
            length_counts,
            safety_band: r.safety_band,
            status: r.status,
        }
    }
}

/// Number of discrete eigenvalues, declared stable only when the ladder
/// agrees; the full report comes along for inspection.
pub fn count_discrete(spec: &WaveguideSpec, disc: &DiscretizationSpec, opts: &EigOptions) -> Result<(CountCertificate, SpectrumReport)> {
    let report = compute_spectrum(spec, disc, opts)?;
    Ok(((&report).into(), report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub grid: FormGrid,
    pub half: Vec<f64>,
    /// Full-domain eigenvalues whose eigenvectors are mostly even.
    pub full_even: Vec<f64>,
    pub full_odd: Vec<f64>,
    /// Odd-part fraction of every computed full-domain eigenvector.
    pub odd_fractions: Vec<f64>,
    /// `|lambda_full - lambda_half| / lambda_half`, pairing the even full
    /// eigenvalues with the half-domain ones in order.
    pub relative_gaps: Vec<f64>,
    pub max_relative_gap: f64,
    pub ground_odd_fraction: f64,
}

/// Full-domain (`full_sign`) against half-domain (`half_DN`) spectra on
/// matched grids (the full grid is the mirror image of the half grid).
/// Compares the lowest `opts.k` half-domain eigenvalues with the even part
/// of the full spectrum.
pub fn symmetry_check(spec: &WaveguideSpec, disc: &DiscretizationSpec, opts: &EigOptions) -> Result<SymmetryReport> {
    disc.validate()?;
    let grid = disc.grid;
    let half_disc = DiscretizationSpec { mode: FormMode::HalfDn, ..disc.clone() };
    let full_disc = DiscretizationSpec { mode: FormMode::FullSign, ..disc.clone() };
    let k = opts.k;
    let half_form = Strategy::new(&half_disc)?.build(spec, &grid)?;
    let full = Strategy::new(&full_disc)?;
    let full_form = full.build(spec, &grid)?;
    let half = Strategy::new(&half_disc)?.solve(&half_form, opts)?.require_converged()?;
    // even and odd states interleave, so twice as many pairs are needed
    let mut kf = 2 * k + 1;
    let (full_res, fractions) = loop {
        let res = full.solve(&full_form, &EigOptions { k: kf, ..opts.clone() })?.require_converged()?;
        let fr: Vec<f64> = res.eigenvectors.iter().map(|v| full_form.odd_fraction(v)).collect::<Result<_>>()?;
        if fr.iter().filter(|&&f| f < 0.5).count() >= k || kf >= full_form.dim() || kf >= MAX_PAIRS {
            break (res, fr);
        }
        kf = (2 * kf).min(full_form.dim());
    };
    let mut full_even = Vec::new();
    let mut full_odd = Vec::new();
    for (&l, &f) in full_res.eigenvalues.iter().zip(&fractions) {
        if f < 0.5 {
            full_even.push(l);
        } else {
            full_odd.push(l);
        }
    }
    let relative_gaps: Vec<f64> = half
        .eigenvalues
        .iter()
        .zip(&full_even)
        .map(|(&h, &f)| (f - h).abs() / h.abs())
        .collect();
    let max_relative_gap = if relative_gaps.len() < half.eigenvalues.len() {
        f64::INFINITY
    } else {
        relative_gaps.iter().copied().fold(0.0, f64::max)
    };
    Ok(SymmetryReport {
        grid,
        half: half.eigenvalues,
        ground_odd_fraction: fractions[0],
        full_even,
        full_odd,
        odd_fractions: fractions,
        relative_gaps,
        max_relative_gap,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationPair {
    /// 1-based index of the `y1` mode.
    pub y1_mode: usize,
    /// 1-based index of the reduced eigenvalue.
    pub reduced_mode: usize,
    pub mu_y1: f64,
    pub lambda_reduced: f64,
    pub lambda_3d: f64,
    pub relative_gap: f64,
    /// `|A x - lambda M x| / (lambda |M x|)` of the product vector.
    pub product_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub grid: FormGrid,
    pub pairs: Vec<SeparationPair>,
    pub max_relative_gap: f64,
    pub max_product_residual: f64,
}

/// Checks `lambda_3D = mu_y1 + lambda_2D` on a rectangle at the base grid:
/// the lowest `opts.k` 3D eigenvalues against the sorted sums of discrete
/// `y1` eigenvalues and reduced eigenvalues, plus the residual of each
/// product vector in the 3D pencil.
pub fn separation_check(spec: &WaveguideSpec, disc: &DiscretizationSpec, opts: &EigOptions) -> Result<SeparationReport> {
    disc.validate()?;
    let rect: Rect = *spec
        .section
        .as_rect()
        .ok_or_else(|| Error::UnsupportedSection("separation needs a rectangular section".into()))?;
    if disc.mode == FormMode::FullSign {
        return Err(Error::InvalidParameter(
            "separation is checked against the half-domain reduced form; use half_DN".into(),
        ));
    }
    let mode = FormMode::HalfDn;
    let grid = disc.grid;
    let k = opts.k;
    let disc3 = DiscretizationSpec { mode, ..disc.clone() };
    let strat3 = Strategy::new(&disc3)?;
    let form3 = strat3.build(spec, &grid)?;
    let res3 = strat3.solve(&form3, opts)?.require_converged()?;
    let f1 = fem1d(grid.n1, rect.width(), Dirichlet, Dirichlet)?;
    let y1 = DenseSolver::default().solve_matrices(&f1.k.to_dense(), &f1.m.to_dense(), f1.dim())?;
    let reduced = assemble_reduced2d(spec.beta, &rect, &grid)?;
    let disc2 = DiscretizationSpec { mode: FormMode::Reduced2d, ..disc.clone() };
    let strat2 = Strategy::new(&disc2)?;
    let res2 = strat2.solve(&reduced, opts)?.require_converged()?;

    let mut sums: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &mu) in y1.eigenvalues.iter().enumerate() {
        for (m, &l) in res2.eigenvalues.iter().enumerate() {
            sums.push((mu + l, i, m));
        }
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    let d1 = f1.dim();
    let d2 = reduced.dims()[1];
    let mut pairs = Vec::new();
    for (j, &l3) in res3.eigenvalues.iter().enumerate().take(k) {
        let (s, i, m) = sums[j];
        let u = &y1.eigenvectors[i];
        let v = &res2.eigenvectors[m];
        let nx = v.len() / d2;
        let mut x = vec![0.0; nx * d1 * d2];
        for ix in 0..nx {
            for i1 in 0..d1 {
                for i2 in 0..d2 {
                    x[(ix * d1 + i1) * d2 + i2] = v[ix * d2 + i2] * u[i1];
                }
            }
        }
        let mut ax = vec![0.0; x.len()];
        let mut mx = vec![0.0; x.len()];
        form3.a.apply(&x, &mut ax);
        form3.m.apply(&x, &mut mx);
        let r: f64 = ax.iter().zip(&mx).map(|(a, b)| (a - s * b).powi(2)).sum::<f64>().sqrt();
        let mn: f64 = mx.iter().map(|b| b * b).sum::<f64>().sqrt();
        pairs.push(SeparationPair {
            y1_mode: i + 1,
            reduced_mode: m + 1,
            mu_y1: y1.eigenvalues[i],
            lambda_reduced: res2.eigenvalues[m],
            lambda_3d: l3,
            relative_gap: (l3 - s).abs() / s.abs(),
            product_residual: r / (mn * s.abs()),
        });
    }
    Ok(SeparationReport {
        grid,
        max_relative_gap: pairs.iter().map(|p| p.relative_gap).fold(0.0, f64::max),
        max_product_residual: pairs.iter().map(|p| p.product_residual).fold(0.0, f64::max),
        pairs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SpectrumReport>,
}

impl SweepTable {
    pub fn table_rows(&self) -> Vec<TableRow> {
        self.rows.iter().flat_map(|r| r.table_rows()).collect()
    }
}

/// One report per `beta`, sorted by `beta`. Rows run concurrently; a row
/// that fails outright aborts the sweep, solver trouble is carried in the
/// row's status.
pub fn sweep_beta(section: &CrossSectionSpec, betas: &[f64], disc: &DiscretizationSpec, opts: &EigOptions) -> Result<SweepTable> {
    let mut betas = betas.to_vec();
    if betas.is_empty() {
        return Err(Error::InvalidParameter("the sweep needs at least one beta".into()));
    }
    for &b in &betas {
        ShearParam::new(b)?;
    }
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let rows = betas
        .par_iter()
        .map(|&b| {
            let spec = WaveguideSpec::new(ShearParam::new(b)?, section.clone())?;
            compute_spectrum(&spec, disc, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// Shorthand used by the checks: a single solve of `mode` on `grid`.
pub fn solve_once(spec: &WaveguideSpec, mode: FormMode, grid: &FormGrid, opts: &EigOptions) -> Result<(ShearForm, EigResult)> {
    let disc = DiscretizationSpec::new(mode, *grid);
    let strat = Strategy::new(&disc)?;
    let form = match mode {
        FormMode::Reduced2d => {
            let rect = spec
                .section
                .as_rect()
                .ok_or_else(|| Error::UnsupportedSection("reduced2d needs a rectangular section".into()))?;
            assemble_reduced2d(spec.beta, rect, grid)?
        }
        FormMode::Prism => strat.build(spec, grid)?,
        _ => assemble_waveguide(spec, grid, mode)?,
    };
    let res = strat.solve(&form, opts)?;
    Ok((form, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_known_orders() {
        let exact = 2.5;
        let h2: Vec<f64> = (0..3).map(|r| exact + 0.7 * 4f64.powi(-r)).collect();
        let (v, p, e) = richardson(&h2);
        assert!((v - exact).abs() < 1e-13 && (p.unwrap() - 2.0).abs() < 1e-12 && e < 1e-12);
        // order 4/3
        let hq: Vec<f64> = (0..3).map(|r| exact + 0.3 * 2f64.powf(-4.0 / 3.0 * r as f64)).collect();
        let (v, p, e) = richardson(&hq);
        assert!((v - exact).abs() < 1e-12);
        assert!((p.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!(e >= (v - (hq[2] - (hq[1] - hq[2]) / 3.0)).abs());
        let (v, p, _) = richardson(&h2[..2]);
        assert!((v - exact).abs() < 1e-13 && p == Some(2.0));
        assert_eq!(richardson(&[1.0]), (1.0, None, 0.0));
    }

    #[test]
    fn ladder_grids() {
        let d = DiscretizationSpec::new(FormMode::HalfDn, FormGrid::new(16, 8, 8, 3.0));
        assert_eq!(d.mesh_grid(2), FormGrid::new(64, 32, 32, 3.0));
        assert_eq!(d.length_grid(1), FormGrid::new(32, 8, 8, 6.0));
        assert!(d.clone().with_ladder(0, 1).validate().is_err());
        let p = DiscretizationSpec::new(FormMode::Prism, FormGrid::new(16, 8, 8, 3.0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"mode": "half_DN", "grid": {"nx": 16, "n1": 8, "n2": 8, "L": 3.0}}"#;
        let d: DiscretizationSpec = serde_json::from_str(ok).unwrap();
        assert_eq!((d.mesh_rungs, d.length_rungs), (3, 2));
        let bad = r#"{"mode": "half_DN", "grid": {"nx": 16, "n1": 8, "n2": 8, "L": 3.0}, "rungs": 2}"#;
        assert!(serde_json::from_str::<DiscretizationSpec>(bad).is_err());
    }
}
