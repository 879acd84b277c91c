//! CSV/JSON emission and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// `%.12g`: 12 significant digits, trailing zeros dropped.
pub fn g12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let sci = format!("{:.11e}", x);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        let (mantissa, _) = sci.split_once('e').unwrap();
        format!("{}e{}{:02}", trim(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.into());
        Ok(path)
    }

    /// Writes `manifest.json` listing everything written so far.
    /// The output directory is left out, so identical runs written to
    /// different places get identical manifests.
    pub fn manifest(&mut self, command: &str, config: &RunConfig, seed: u64) -> Result<PathBuf> {
        let config = &RunConfig {
            out: None,
            ..config.clone()
        };
        let manifest = Manifest {
            command: command.into(),
            config_hash: config_hash(config)?,
            seed,
            versions: Versions {
                shearguide: shearguide::VERSION.into(),
                shearguide_cli: env!("CARGO_PKG_VERSION").into(),
            },
            config: config.clone(),
            outputs: self.written.clone(),
        };
        self.json("manifest.json", &manifest)
    }
}

#[derive(Debug, Serialize)]
struct Versions {
    shearguide: String,
    shearguide_cli: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    config_hash: String,
    seed: u64,
    versions: Versions,
    config: RunConfig,
    outputs: Vec<String>,
}

/// SHA-256 of the compact JSON form of the resolved configuration.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(g12(0.929157), "0.929157");
        assert_eq!(g12(-1234.5), "-1234.5");
        assert_eq!(g12(1e-9), "1e-09");
        assert_eq!(g12(2.5e-7 * 3.0), "7.5e-07");
        assert_eq!(g12(9.999999999999e5), "1000000");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(0.0), "0");
    }

    #[test]
    fn hash_is_stable() {
        let c = RunConfig {
            beta: Some(1.0),
            ..Default::default()
        };
        assert_eq!(config_hash(&c).unwrap(), config_hash(&c.clone()).unwrap());
        let d = RunConfig {
            beta: Some(2.0),
            ..Default::default()
        };
        assert_ne!(config_hash(&c).unwrap(), config_hash(&d).unwrap());
    }
}
