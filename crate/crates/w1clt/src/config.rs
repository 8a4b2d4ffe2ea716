//! JSON experiment configuration (`schema_version: 1`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use w1clt_core::conditions::MixingBound;
use w1clt_core::processes::ProcessSpec;
use w1clt_core::DistributionModel;

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Neglected tail `Σ_{k>K} bound(k)` allowed when `K` comes from a decay bound.
pub const LAG_TAIL_TARGET: f64 = 1e-3;
/// Hard cap on the lag cutoff.
pub const MAX_LAG_CUTOFF: usize = 10_000;
/// Default calibration orbit length as a multiple of the largest `n`.
pub const CALIBRATION_FACTOR: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub process: ProcessSpec,
    /// Strictly increasing sample sizes.
    pub n_values: Vec<usize>,
    /// Replicates `R` per sample size.
    pub replications: usize,
    pub base_seed: u64,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitConfig>,
    /// KS tolerance for the finite-n vs limit comparison; without it the
    /// 1% critical value decides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Where the reference CDF `F_Y` comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// A closed-form law; omitted means the process's own analytic marginal.
    Analytic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<DistributionModel>,
    },
    /// Tabulated from one independent orbit.
    Calibration {
        /// Orbit length; defaults to 10 × the largest `n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<usize>,
        #[serde(default = "default_calibration_points")]
        points: usize,
    },
}

fn default_calibration_points() -> usize {
    4096
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    /// `t_i = F^{-1}((i - ½)/m)`.
    Quantile,
    /// Equally spaced on `[lo, hi]`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub size: usize,
    pub scheme: GridScheme,
    /// Extra geometrically spaced points in each unbounded tail.
    #[serde(default)]
    pub tail_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            size: 256,
            scheme: GridScheme::Quantile,
            tail_points: 0,
            lo: None,
            hi: None,
        }
    }
}

/// Limit-law sampling. For iid processes the analytic covariance is used
/// and the lag settings are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    /// Replicates of `∫|G|`.
    pub replications: usize,
    /// Explicit lag cutoff `K`; otherwise derived from `mixing_bound`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing_bound: Option<MixingBound>,
    /// Length of the path feeding the dependent covariance estimate.
    #[serde(default = "default_sim_length")]
    pub sim_length: usize,
    /// Also sample the Brownian-bridge oracle on this many nodes (iid only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_mesh: Option<usize>,
    /// Write the covariance grid as JSON.
    #[serde(default)]
    pub write_covariance: bool,
}

fn default_sim_length() -> usize {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out-dir` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem for the per-n statistic files, `<prefix>_n<n>.csv`.
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "tn".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: default_prefix(),
        }
    }
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.process.validate()?;
        if self.n_values.is_empty() {
            return Err(bad("n_values is empty"));
        }
        if self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("n_values must be positive and strictly increasing"));
        }
        if self.replications < 2 {
            return Err(bad("replications must be at least 2"));
        }
        match &self.reference {
            ReferenceConfig::Analytic { model: None } if self.process.analytic_marginal().is_none() => {
                return Err(bad(format!(
                    "no analytic marginal for a {} process; supply reference.model or use a calibration reference",
                    self.process.label()
                )));
            }
            ReferenceConfig::Calibration { length, points } => {
                if *points < 2 {
                    return Err(bad("calibration needs at least 2 grid points"));
                }
                if length.is_some_and(|l| l < *points) {
                    return Err(bad("calibration length is below the number of grid points"));
                }
            }
            _ => {}
        }
        if self.grid.size == 0 {
            return Err(bad("grid.size must be positive"));
        }
        if self.grid.scheme == GridScheme::Uniform {
            match (self.grid.lo, self.grid.hi) {
                (Some(lo), Some(hi)) if lo < hi => {}
                _ => return Err(bad("a uniform grid needs lo < hi")),
            }
        }
        if let Some(limit) = &self.limit {
            if limit.replications == 0 {
                return Err(bad("limit.replications must be positive"));
            }
            if let Some(b) = &limit.mixing_bound {
                b.validate()?;
            }
            if limit.oracle_mesh == Some(0) {
                return Err(bad("limit.oracle_mesh must be positive"));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t <= 1.0) {
                return Err(bad("tolerance must lie in (0, 1]"));
            }
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(bad("output.prefix must be a plain file stem"));
        }
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        self.n_values.last().copied().unwrap_or(0)
    }

    /// Lag cutoff for the dependent covariance: explicit, from the configured
    /// bound, or from the process's own decay bound.
    pub fn lag_cutoff(&self) -> Result<usize> {
        let limit = self.limit.as_ref().ok_or_else(|| bad("no limit section"))?;
        if let Some(k) = limit.lag_cutoff {
            return Ok(k);
        }
        let bound = limit
            .mixing_bound
            .or_else(|| default_mixing_bound(&self.process))
            .ok_or_else(|| {
                bad(format!(
                    "a {} process needs limit.lag_cutoff or limit.mixing_bound",
                    self.process.label()
                ))
            })?;
        Ok(bound.lag_cutoff(LAG_TAIL_TARGET, MAX_LAG_CUTOFF)?)
    }
}

/// Decay bound with unit constant for the dynamical generators: geometric
/// `2^{-k}` for the doubling map, `(k+1)^{-(1-γ)/γ}` for `T_γ`.
pub fn default_mixing_bound(spec: &ProcessSpec) -> Option<MixingBound> {
    match *spec {
        ProcessSpec::DoublingMap { .. } => Some(MixingBound::PhiGeometric { c1: 1.0, rho: 0.5 }),
        ProcessSpec::IntermittentMap { gamma, .. } => Some(MixingBound::AlphaPolynomial { c_gamma: 1.0, gamma }),
        ProcessSpec::Iid { .. } => Some(MixingBound::Constant { value: 0.0 }),
        ProcessSpec::CausalLinear { .. } => None,
    }
}
