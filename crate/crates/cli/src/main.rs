//! `shearguide` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
//! 4 inconclusive result.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use shearguide::assembly::FormMode;
use shearguide::certificates::{existence_certificate, CutoffProfile};
use shearguide::geometry::CrossSectionSpec;
use shearguide::thresholds::{threshold_report, uniqueness_condition};
use shearguide::waveguide::{compute_spectrum, separation_check, sweep_beta, symmetry_check, RunStatus, SpectrumReport, TableRow};

use config::RunConfig;
use output::{g12, Writer};

/// Marks errors caused by the configuration rather than the computation.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(name = "shearguide", version, about = "Bound states of broken sheared waveguides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Essential-spectrum threshold and related constants.
    Thresholds(Flags),
    /// Ladder run: eigenvalues, extrapolation and the count below threshold.
    Spectrum(Flags),
    /// One spectrum run per beta.
    Sweep {
        #[command(flatten)]
        flags: Flags,
        /// Comma-separated beta values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        betas: Option<Vec<f64>>,
    },
    /// Trial-function certificate that a bound state exists.
    Certify(Flags),
    /// Per-rung convergence table of a spectrum run.
    Convergence(Flags),
    /// Cross-checks against exact discrete identities.
    OracleCompare {
        #[command(flatten)]
        flags: Flags,
        /// Also compare full-domain and half-domain spectra.
        #[arg(long)]
        symmetry: bool,
    },
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Rectangle a,b,c,d.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
    rect: Option<Vec<f64>>,
    /// Plain-text mask file.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// half | full | reduced | straight
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "L")]
    length: Option<f64>,
    /// nx,n1,n2
    #[arg(long, value_delimiter = ',', num_args = 1)]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    mesh_rungs: Option<usize>,
    #[arg(long)]
    length_rungs: Option<usize>,
    #[arg(long)]
    auto_length: Option<bool>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    preconditioner: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let rect = match &self.rect {
            Some(v) => Some(
                <[f64; 4]>::try_from(v.as_slice())
                    .map_err(|_| ConfigError(anyhow!("--rect takes four values a,b,c,d, got {}", v.len())))?,
            ),
            None => None,
        };
        let grid = match &self.grid {
            Some(v) => Some(
                <[usize; 3]>::try_from(v.as_slice())
                    .map_err(|_| ConfigError(anyhow!("--grid takes three values nx,n1,n2, got {}", v.len())))?,
            ),
            None => None,
        };
        let mode = match &self.mode {
            Some(m) => Some(m.parse::<FormMode>().map_err(|e| ConfigError(e.into()))?),
            None => None,
        };
        Ok(base.merge(RunConfig {
            beta: self.beta,
            rect,
            mask: self.mask.clone(),
            mode,
            length: self.length,
            grid,
            mesh_rungs: self.mesh_rungs,
            length_rungs: self.length_rungs,
            auto_length: self.auto_length,
            solver: self.solver.clone(),
            preconditioner: self.preconditioner.clone(),
            k: self.k,
            tol: self.tol,
            seed: self.seed,
            out: self.out.clone(),
            ..Default::default()
        }))
    }
}

/// Rounds every float to 12 significant digits before printing.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            g12(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Value> {
    Ok(rounded(serde_json::to_value(value)?))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&to_json(value)?)?);
    Ok(())
}

fn table(rows: &[TableRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                g12(r.beta),
                r.mode.clone(),
                r.rung.clone(),
                g12(r.length),
                r.nx.to_string(),
                r.n1.to_string(),
                r.n2.to_string(),
                r.j.to_string(),
                g12(r.lambda),
                g12(r.residual),
                r.below_threshold.to_string(),
                r.flags.clone(),
            ]
        })
        .collect()
}

fn status_code(statuses: impl IntoIterator<Item = RunStatus>) -> u8 {
    let statuses: Vec<RunStatus> = statuses.into_iter().collect();
    if statuses.contains(&RunStatus::NotConverged) {
        3
    } else if statuses.contains(&RunStatus::Inconclusive) {
        4
    } else {
        0
    }
}

fn summary(r: &SpectrumReport) -> Value {
    json!({
        "beta": r.beta,
        "mode": r.mode.as_str(),
        "threshold": r.threshold + r.lift,
        "count": r.count,
        "bound_states": r.bound_states().iter().map(|l| l + r.lift).collect::<Vec<_>>(),
        "safety_band": r.safety_band,
        "count_stable": r.count_stable,
        "status": r.status,
        "flags": r.flags,
    })
}

fn thresholds(flags: &Flags) -> Result<u8> {
    let cfg = flags.resolve()?;
    let section = cfg.section()?;
    let beta = cfg.shear(cfg.beta()?)?;
    let t = threshold_report(beta, &section)?;
    let mut out = json!({
        "beta": t.beta,
        "E1": t.e1,
        "E2": t.e2,
        "ess_threshold": t.ess_bottom,
        "bound_factor": t.bound_factor,
    });
    if let (Some(r), Some(bs)) = (t.aspect_ratio, t.beta_star) {
        out["R"] = json!(r);
        out["beta_star"] = json!(bs);
    }
    if let (CrossSectionSpec::Rectangle(rect), false) = (&section, beta.is_straight()) {
        out["uniqueness"] = serde_json::to_value(uniqueness_condition(beta, rect)?)?;
    }
    print_json(&out)?;
    Ok(0)
}

fn spectrum(flags: &Flags) -> Result<u8> {
    let cfg = flags.resolve()?;
    let spec = cfg.waveguide()?;
    let disc = cfg.discretization()?;
    let opts = cfg.eig_options(1)?;
    let report = compute_spectrum(&spec, &disc, &opts)?;
    let mut w = Writer::new(&cfg.out_dir())?;
    w.json("report.json", &to_json(&report)?)?;
    w.csv("eigenvalues.csv", &TableRow::HEADER, &table(&report.table_rows()))?;
    w.manifest("spectrum", &cfg, opts.seed)?;
    print_json(&summary(&report))?;
    Ok(status_code([report.status]))
}

fn sweep(flags: &Flags, betas: &Option<Vec<f64>>) -> Result<u8> {
    let mut cfg = flags.resolve()?;
    if betas.is_some() {
        cfg.betas = betas.clone();
    }
    let list = cfg
        .betas
        .clone()
        .ok_or_else(|| ConfigError(anyhow!("sweep needs --betas or a betas list in the config")))?;
    for &b in &list {
        cfg.shear(b)?;
    }
    let section = cfg.section()?;
    let disc = cfg.discretization()?;
    let opts = cfg.eig_options(1)?;
    let sweep = sweep_beta(&section, &list, &disc, &opts)?;
    let header = ["beta", "mode", "count", "lambda1", "error1", "threshold", "gap", "status", "flags"];
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            let first = r.extrapolated.first();
            vec![
                g12(r.beta),
                r.mode.as_str().into(),
                r.count.to_string(),
                first.map_or(String::new(), |e| g12(e.value + r.lift)),
                first.map_or(String::new(), |e| g12(e.error)),
                g12(r.threshold + r.lift),
                r.gap().map_or(String::new(), g12),
                format!("{:?}", r.status),
                r.flags.join(";"),
            ]
        })
        .collect();
    let mut w = Writer::new(&cfg.out_dir())?;
    w.csv("sweep.csv", &header, &rows)?;
    w.csv("eigenvalues.csv", &TableRow::HEADER, &table(&sweep.table_rows()))?;
    w.json("report.json", &to_json(&sweep)?)?;
    w.manifest("sweep", &cfg, opts.seed)?;
    print_json(&sweep.rows.iter().map(summary).collect::<Vec<_>>())?;
    Ok(status_code(sweep.rows.iter().map(|r| r.status)))
}

fn certify(flags: &Flags) -> Result<u8> {
    let cfg = flags.resolve()?;
    let beta = cfg.shear(cfg.beta()?)?;
    let rect = match cfg.section()? {
        CrossSectionSpec::Rectangle(r) => r,
        CrossSectionSpec::Mask(_) => return Err(ConfigError(anyhow!("the certificate needs a rectangle")).into()),
    };
    let c = existence_certificate(beta, &rect, &CutoffProfile::default()).map_err(|e| ConfigError(e.into()))?;
    let mut out = to_json(&c)?;
    out["verdict"] = json!(if c.negative { "negative" } else { "not_negative" });
    if cfg.out.is_some() {
        let mut w = Writer::new(&cfg.out_dir())?;
        w.json("certificate.json", &out)?;
        w.manifest("certify", &cfg, cfg.seed.unwrap_or_default())?;
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if c.certified { 0 } else { 4 })
}

fn convergence(flags: &Flags) -> Result<u8> {
    let cfg = flags.resolve()?;
    let spec = cfg.waveguide()?;
    let disc = cfg.discretization()?;
    let opts = cfg.eig_options(1)?;
    let report = compute_spectrum(&spec, &disc, &opts)?;
    let header = ["j", "rung", "L", "nx", "n1", "n2", "lambda", "difference", "ratio", "order", "error"];
    let mut rows = Vec::new();
    for e in &report.extrapolated {
        let mut prev: Option<f64> = None;
        let mut prev_diff: Option<f64> = None;
        for r in report.mesh_rungs() {
            let Some(&l) = r.eigenvalues.get(e.j) else { continue };
            let diff = prev.map(|p| p - l);
            let ratio = match (prev_diff, diff) {
                (Some(a), Some(b)) if b != 0.0 => Some(a / b),
                _ => None,
            };
            rows.push(vec![
                (e.j + 1).to_string(),
                r.label(),
                g12(r.grid.length),
                r.grid.nx.to_string(),
                r.grid.n1.to_string(),
                r.grid.n2.to_string(),
                g12(l + report.lift),
                diff.map_or(String::new(), g12),
                ratio.map_or(String::new(), g12),
                String::new(),
                String::new(),
            ]);
            prev = Some(l);
            prev_diff = diff;
        }
        for r in report.length_rungs() {
            let Some(&l) = r.eigenvalues.get(e.j) else { continue };
            rows.push(vec![
                (e.j + 1).to_string(),
                r.label(),
                g12(r.grid.length),
                r.grid.nx.to_string(),
                r.grid.n1.to_string(),
                r.grid.n2.to_string(),
                g12(l + report.lift),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        rows.push(vec![
            (e.j + 1).to_string(),
            "ext".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            g12(e.value + report.lift),
            String::new(),
            String::new(),
            e.order.map_or(String::new(), g12),
            g12(e.error),
        ]);
    }
    let mut w = Writer::new(&cfg.out_dir())?;
    w.csv("convergence.csv", &header, &rows)?;
    w.json("report.json", &to_json(&report)?)?;
    w.manifest("convergence", &cfg, opts.seed)?;
    print_json(&summary(&report))?;
    Ok(status_code([report.status]))
}

fn oracle_compare(flags: &Flags, symmetry: bool) -> Result<u8> {
    let mut cfg = flags.resolve()?;
    if cfg.mode.is_none() {
        cfg.mode = Some(FormMode::HalfDn);
    }
    let disc = cfg.discretization()?;
    if cfg.tol.is_none() {
        cfg.tol = Some(1e-12);
    }
    let spec = cfg.waveguide()?;
    let opts = cfg.eig_options(4)?;
    let sep = separation_check(&spec, &disc, &opts).map_err(|e| match e {
        shearguide::Error::UnsupportedSection(_) | shearguide::Error::InvalidParameter(_) => {
            anyhow::Error::from(ConfigError(e.into()))
        }
        e => e.into(),
    })?;
    let mut w = Writer::new(&cfg.out_dir())?;
    let header = ["y1_mode", "reduced_mode", "mu_y1", "lambda_reduced", "lambda_3d", "relative_gap", "product_residual"];
    let rows: Vec<Vec<String>> = sep
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.y1_mode.to_string(),
                p.reduced_mode.to_string(),
                g12(p.mu_y1),
                g12(p.lambda_reduced),
                g12(p.lambda_3d),
                g12(p.relative_gap),
                g12(p.product_residual),
            ]
        })
        .collect();
    w.csv("separation.csv", &header, &rows)?;
    w.json("separation.json", &to_json(&sep)?)?;
    println!("max separation residual: {}", g12(sep.max_relative_gap));
    println!("max product-vector residual: {}", g12(sep.max_product_residual));
    if symmetry {
        let sym = symmetry_check(&spec, &disc, &opts)?;
        w.json("symmetry.json", &to_json(&sym)?)?;
        println!("max symmetry gap: {}", g12(sym.max_relative_gap));
        println!("ground odd fraction: {}", g12(sym.ground_odd_fraction));
    }
    w.manifest("oracle-compare", &cfg, opts.seed)?;
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() || err.downcast_ref::<clap::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<shearguide::Error>() {
        Some(shearguide::Error::NotConverged { .. }) | Some(shearguide::Error::NotPositiveDefinite(_)) => 3,
        Some(shearguide::Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Thresholds(f) => thresholds(f),
        Command::Spectrum(f) => spectrum(f),
        Command::Sweep { flags, betas } => sweep(flags, betas),
        Command::Certify(f) => certify(f),
        Command::Convergence(f) => convergence(f),
        Command::OracleCompare { flags, symmetry } => oracle_compare(flags, *symmetry),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
