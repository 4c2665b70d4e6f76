//! Run configuration: a JSON file, overridden field by field from flags.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use quasiwalk_core::pentagrid::DEFAULT_OFFSETS;
use quasiwalk_core::Thresholds;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub offsets: [f64; 5],
    pub radius: f64,
    pub seed: u64,
    pub n_max: usize,
    /// Ensemble size.
    #[serde(rename = "N", alias = "samples")]
    pub samples: usize,
    /// Dyadic steps reported in the walk tables; empty means every dyadic
    /// step up to `n_max`.
    pub checkpoints: Vec<usize>,
    pub thresholds: Thresholds,
    pub out_dir: PathBuf,
    pub verify: VerifySettings,
    pub kernel: KernelSettings,
    pub clt: CltSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub pairs: usize,
    /// Centers for the volume and Poincaré tables.
    pub centers: usize,
    pub radii: Vec<u32>,
    /// Inclusive radius range for the volume growth regression.
    pub growth_radii: (u32, u32),
    /// Sample spacing of the coverage grid.
    pub coverage_spacing: f64,
    /// Pairs closer than this are left out of the bi-Lipschitz ratio.
    pub bilipschitz_min_distance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            pairs: 10_000,
            centers: 20,
            radii: vec![4, 8, 16, 32],
            growth_radii: (4, 64),
            coverage_spacing: 0.25,
            bilipschitz_min_distance: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSettings {
    pub origins: usize,
    /// Origins are taken from the interior tiles within this radius.
    pub origin_radius: f64,
    pub origin_stride: usize,
    /// Smallest step in the Gaussian fit window.
    pub n_min: usize,
    pub leak_budget: f64,
    pub directions: usize,
    pub cone_alpha: f64,
    pub annulus: (f64, f64),
    /// Step at which the cone statistic is taken (capped by `n_max`).
    pub cone_n: usize,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            origins: 20,
            origin_radius: 8.0,
            origin_stride: 7,
            n_min: 64,
            leak_budget: quasiwalk_core::walk::DEFAULT_LEAK_BUDGET,
            directions: 36,
            cone_alpha: PI / 6.0,
            annulus: (0.5, 2.0),
            cone_n: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltSettings {
    /// Starts are drawn uniformly from interior tiles within this radius.
    pub start_radius: f64,
    /// Step at which drift, covariance and KS are judged.
    pub n: usize,
    pub collapse: Vec<usize>,
    /// Increment correlations are judged for blocks at least this long.
    pub min_increment_block: usize,
    pub min_samples: usize,
    pub escape_budget: f64,
}

impl Default for CltSettings {
    fn default() -> Self {
        CltSettings {
            start_radius: 100.0,
            n: 4096,
            collapse: vec![1 << 10, 1 << 12, 1 << 14],
            min_increment_block: 1 << 10,
            min_samples: 10_000,
            escape_budget: 1e-3,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            offsets: DEFAULT_OFFSETS,
            radius: 200.0,
            seed: 7,
            n_max: 4096,
            samples: 100_000,
            checkpoints: Vec::new(),
            thresholds: Thresholds::default(),
            out_dir: PathBuf::from("out"),
            verify: VerifySettings::default(),
            kernel: KernelSettings::default(),
            clt: CltSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("parse error in {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_max == 0 || self.samples == 0 {
            return Err(CliError::Usage("n_max and N must be positive".into()));
        }
        for &c in &self.checkpoints {
            if !c.is_power_of_two() || c > self.n_max {
                return Err(CliError::Usage(format!(
                    "checkpoint {c} is not a power of two up to n_max = {}",
                    self.n_max
                )));
            }
        }
        Ok(())
    }

    /// Reported checkpoints.
    pub fn report_checkpoints(&self) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            quasiwalk_core::walk::dyadic_checkpoints(self.n_max)
        } else {
            let mut c = self.checkpoints.clone();
            c.sort_unstable();
            c.dedup();
            c
        }
    }

    /// SHA-256 of the serialized config without the output directory, so
    /// relocating outputs does not change it.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out_dir");
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Block embedded in every output file.
    pub fn meta(&self, command: &str) -> Value {
        json!({
            "tool": "quasiwalk",
            "version": quasiwalk_core::VERSION,
            "command": command,
            "config_hash": self.hash(),
        })
    }
}

/// Parse `a,b,c,d,e`.
pub fn parse_offsets(s: &str) -> Result<[f64; 5], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad offset {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    vals.try_into()
        .map_err(|v: Vec<f64>| format!("expected 5 offsets, got {}", v.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = RunConfig::default();
        c.offsets = [0.1, -0.3, 0.7, 1.0 / 3.0, -(0.1 - 0.3 + 0.7 + 1.0 / 3.0)];
        c.checkpoints = vec![64, 1024];
        c.thresholds.isotropy_tolerance = 0.0;
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_out_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn partial_files_and_aliases() {
        let c: RunConfig = serde_json::from_str(r#"{"samples": 12, "radius": 50}"#).unwrap();
        assert_eq!((c.samples, c.radius), (12, 50.0));
        assert_eq!(c.thresholds, Thresholds::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"radious": 5}"#).is_err());
    }

    #[test]
    fn offsets_parse() {
        assert_eq!(parse_offsets("0,0,0,0,0").unwrap(), [0.0; 5]);
        assert!(parse_offsets("1,2").is_err());
        assert!(parse_offsets("1,x,0,0,0").is_err());
    }
}
