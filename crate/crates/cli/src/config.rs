//! Run configuration: one JSON document per run, merged with command-line
//! flags (flags win) and resolved into the library's spec types.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use shearguide::assembly::{FormGrid, FormMode};
use shearguide::eigcore::EigOptions;
use shearguide::geometry::{CrossSectionSpec, Mask, Rect, ShearParam, WaveguideSpec};
use shearguide::waveguide::DiscretizationSpec;

use crate::ConfigError;

/// Everything a run can be told. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Sweep values of `beta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// `[a, b, c, d]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rect: Option<[f64; 4]>,
    /// Path to a plain-text mask file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<FormMode>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// `[nx, n1, n2]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_rungs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_rungs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_length: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preconditioner: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_GRID: [usize; 3] = [32, 8, 8];
pub const DEFAULT_LENGTH: f64 = 4.0;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(ConfigError)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(ConfigError)?;
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            beta,
            betas,
            rect,
            mask,
            mode,
            length,
            grid,
            mesh_rungs,
            length_rungs,
            auto_length,
            solver,
            preconditioner,
            k,
            tol,
            max_iterations,
            seed,
            out
        );
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn section(&self) -> Result<CrossSectionSpec> {
        let section = match (&self.rect, &self.mask) {
            (Some(_), Some(_)) => bail!(ConfigError(anyhow::anyhow!("give either rect or mask, not both"))),
            (Some([a, b, c, d]), None) => CrossSectionSpec::Rectangle(Rect::new(*a, *b, *c, *d).map_err(config)?),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading mask {}", path.display()))
                    .map_err(ConfigError)?;
                CrossSectionSpec::Mask(Mask::parse(&text).map_err(config)?)
            }
            (None, None) => bail!(ConfigError(anyhow::anyhow!("a cross-section is required (rect or mask)"))),
        };
        section.validate().map_err(config)?;
        Ok(section)
    }

    pub fn mode(&self) -> FormMode {
        self.mode.unwrap_or(FormMode::HalfDn)
    }

    /// `beta = 0` is accepted only together with the straight mode.
    pub fn shear(&self, beta: f64) -> Result<ShearParam> {
        if beta == 0.0 && self.mode() == FormMode::Straight {
            return Ok(ShearParam::straight());
        }
        if self.mode() == FormMode::Straight {
            bail!(ConfigError(anyhow::anyhow!("the straight mode needs beta = 0, got {beta}")));
        }
        Ok(ShearParam::new(beta).map_err(config)?)
    }

    pub fn beta(&self) -> Result<f64> {
        self.beta
            .ok_or_else(|| ConfigError(anyhow::anyhow!("beta is required")).into())
    }

    pub fn waveguide(&self) -> Result<WaveguideSpec> {
        let beta = self.shear(self.beta()?)?;
        Ok(WaveguideSpec::new(beta, self.section()?).map_err(config)?)
    }

    pub fn discretization(&self) -> Result<DiscretizationSpec> {
        let [nx, n1, n2] = self.grid.unwrap_or(DEFAULT_GRID);
        let grid = FormGrid::new(nx, n1, n2, self.length.unwrap_or(DEFAULT_LENGTH));
        let mut d = DiscretizationSpec::new(self.mode(), grid);
        if let Some(r) = self.mesh_rungs {
            d.mesh_rungs = r;
        }
        if let Some(r) = self.length_rungs {
            d.length_rungs = r;
        }
        d.auto_length = self.auto_length.unwrap_or(self.length.is_none());
        if let Some(s) = &self.solver {
            d.solver = s.clone();
        }
        if let Some(p) = &self.preconditioner {
            d.preconditioner = p.clone();
        }
        d.validate().map_err(config)?;
        Ok(d)
    }

    pub fn eig_options(&self, default_k: usize) -> Result<EigOptions> {
        let mut o = EigOptions::with_k(self.k.unwrap_or(default_k));
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(m) = self.max_iterations {
            o.max_iterations = m;
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        o.validate().map_err(config)?;
        Ok(o)
    }
}

fn config(e: shearguide::Error) -> anyhow::Error {
    ConfigError(e.into()).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"beta": 1, "grids": [8, 8, 8]}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn flags_override_the_file() {
        let file: RunConfig = serde_json::from_str(r#"{"beta": 1, "rect": [0, 1, 0, 1], "k": 3}"#).unwrap();
        let flags = RunConfig {
            beta: Some(2.0),
            ..Default::default()
        };
        let m = file.merge(flags);
        assert_eq!(m.beta, Some(2.0));
        assert_eq!(m.k, Some(3));
    }

    #[test]
    fn zero_beta_only_in_straight_mode() {
        let mut c = RunConfig {
            beta: Some(0.0),
            rect: Some([0.0, 1.0, 0.0, 1.0]),
            ..Default::default()
        };
        assert!(c.waveguide().is_err());
        c.mode = Some(FormMode::Straight);
        assert!(c.waveguide().unwrap().beta.is_straight());
    }
}
