//! Run configuration: JSON file, flag and environment overrides, validation.
//!
//! The resolved configuration is serialized verbatim into every report, so
//! a report always carries enough provenance to reproduce itself.

use crate::{CliError, CommonArgs};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Fully resolved run configuration. Defaults are chosen so every
/// subcommand runs out of the box on γ = (2,2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub gammas: Vec<u32>,
    pub q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub levels: usize,
    pub tol: f64,
    pub out: PathBuf,
    pub k_list: Vec<u32>,
    pub alpha_list: Vec<f64>,
    pub beta_list: Vec<f64>,
    pub r_o: f64,
    pub theta_nodes: usize,
    /// Always on: every run is seedless and bit-reproducible.
    pub deterministic: bool,
}

/// The optional fields as they appear in a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gammas: Option<Vec<u32>>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub nodes: Option<usize>,
    pub levels: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub k_list: Option<Vec<u32>>,
    pub alpha_list: Option<Vec<f64>>,
    pub beta_list: Option<Vec<f64>>,
    pub r_o: Option<f64>,
    pub theta_nodes: Option<usize>,
    pub deterministic: Option<bool>,
}

/// Flag/environment overrides, parsed from clap.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub gammas: Option<Vec<u32>>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub nodes: Option<usize>,
    pub levels: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub k_list: Option<Vec<u32>>,
    pub alpha_list: Option<Vec<f64>>,
    pub beta_list: Option<Vec<f64>>,
    pub r_o: Option<f64>,
    pub theta_nodes: Option<usize>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| CliError::Input(format!("bad {what} entry {tok:?}")))
        })
        .collect()
}

impl CliOverrides {
    pub fn from_args(args: &CommonArgs) -> Self {
        let parse_u32 = |s: &Option<String>, what: &str| -> Option<Vec<u32>> {
            s.as_ref().and_then(|v| parse_list::<u32>(v, what).ok())
        };
        let parse_f64 = |s: &Option<String>, what: &str| -> Option<Vec<f64>> {
            s.as_ref().and_then(|v| parse_list::<f64>(v, what).ok())
        };
        Self {
            gammas: parse_u32(&args.gammas, "gammas"),
            q: args.q,
            p: args.p,
            alpha: args.alpha,
            beta: args.beta,
            r_min: args.rmin,
            r_max: args.rmax,
            nodes: args.nodes,
            levels: args.levels,
            tol: args.tol,
            out: args.out.clone(),
            k_list: parse_u32(&args.k_list, "k_list"),
            alpha_list: parse_f64(&args.alpha_list, "alpha_list"),
            beta_list: parse_f64(&args.beta_list, "beta_list"),
            r_o: args.r_o,
            theta_nodes: args.theta_nodes,
        }
    }
}

impl RunConfig {
    /// Layering: defaults < config file < flags/environment.
    pub fn resolve(file: Option<&Path>, over: &CliOverrides) -> Result<Self, CliError> {
        let file_cfg: FileConfig = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Input(format!("cannot read {path:?}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("bad config {path:?}: {e}")))?
            }
            None => FileConfig::default(),
        };
        // a config may not opt out of determinism: there is nothing to seed
        if file_cfg.deterministic == Some(false) {
            return Err(CliError::Input(
                "deterministic = false is not supported; runs are always reproducible".into(),
            ));
        }

        let cfg = RunConfig {
            gammas: over
                .gammas
                .clone()
                .or(file_cfg.gammas)
                .unwrap_or_else(|| vec![2, 2]),
            q: over.q.or(file_cfg.q).unwrap_or(2.0),
            p: over.p.or(file_cfg.p),
            alpha: over.alpha.or(file_cfg.alpha),
            beta: over.beta.or(file_cfg.beta),
            r_min: over.r_min.or(file_cfg.r_min).unwrap_or(1e-3),
            r_max: over.r_max.or(file_cfg.r_max).unwrap_or(1e3),
            nodes: over.nodes.or(file_cfg.nodes).unwrap_or(64),
            levels: over.levels.or(file_cfg.levels).unwrap_or(3),
            tol: over.tol.or(file_cfg.tol).unwrap_or(1e-4),
            out: over
                .out
                .clone()
                .or(file_cfg.out)
                .unwrap_or_else(|| PathBuf::from("ckn-out")),
            k_list: over
                .k_list
                .clone()
                .or(file_cfg.k_list)
                .unwrap_or_else(|| vec![8, 16, 32, 64]),
            alpha_list: over
                .alpha_list
                .clone()
                .or(file_cfg.alpha_list)
                .unwrap_or_default(),
            beta_list: over
                .beta_list
                .clone()
                .or(file_cfg.beta_list)
                .unwrap_or_default(),
            r_o: over.r_o.or(file_cfg.r_o).unwrap_or(2.0),
            theta_nodes: over.theta_nodes.or(file_cfg.theta_nodes).unwrap_or(513),
            deterministic: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.gammas.is_empty() || self.gammas.iter().any(|&g| g == 0) {
            return Err(CliError::Input(format!(
                "malformed gammas {:?}: need nonempty positive block dimensions",
                self.gammas
            )));
        }
        if !(self.q >= 1.0) {
            return Err(CliError::Input(format!("q = {} must be >= 1", self.q)));
        }
        if let Some(p) = self.p {
            if !(p >= self.q) {
                return Err(CliError::Input(format!(
                    "p = {p} must be >= q = {}",
                    self.q
                )));
            }
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(CliError::Input(format!(
                "invalid radial window [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.nodes < 8 {
            return Err(CliError::Input(format!(
                "nodes = {} below the minimum of 8",
                self.nodes
            )));
        }
        if self.levels == 0 || self.levels > 6 {
            return Err(CliError::Input(format!(
                "levels = {} outside 1..=6",
                self.levels
            )));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Input(format!("tol = {} must be > 0", self.tol)));
        }
        if self.k_list.iter().any(|&k| k < 2) {
            return Err(CliError::Input("k_list entries must be >= 2".into()));
        }
        if !(self.r_o > 1.0) {
            return Err(CliError::Input(format!(
                "r_o = {} must be > 1",
                self.r_o
            )));
        }
        if self.theta_nodes < 64 {
            return Err(CliError::Input(format!(
                "theta_nodes = {} below the minimum of 64",
                self.theta_nodes
            )));
        }
        Ok(())
    }

    /// Default α sweep for the angular and supersolution commands.
    pub fn alphas_or(&self, default: &[f64]) -> Vec<f64> {
        if self.alpha_list.is_empty() {
            default.to_vec()
        } else {
            self.alpha_list.clone()
        }
    }

}
