//! Experiment orchestration on a rayon pool.
//!
//! Every replicate draws from its own stream keyed by `(base_seed, n, r)`
//! and results are collected in replicate order, so outputs do not depend
//! on the number of worker threads.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use w1clt_core::compare::{classify_growth, compare_distributions, ComparisonReport, GrowthThresholds, GrowthVerdict};
use w1clt_core::conditions::{check_intermittent_threshold, ConditionReport};
use w1clt_core::experiment::{clt_statistic, finite_n_metadata, replicate_seed, STATISTIC_TAIL_TOL};
use w1clt_core::limitlaw::{
    covariance_dependent, covariance_iid, BridgeOracle, CovarianceGrid, CovarianceSource, LimitGrid, LimitSampler,
    PsdRepair, SampleMetadata, StatisticKind, StatisticSample,
};
use w1clt_core::math;
use w1clt_core::processes::{calibrate_reference_auto, generate, ProcessSpec};
use w1clt_core::rng::{derive_seed, Domain};
use w1clt_core::transport::w1_sample_vs_model;
use w1clt_core::{DistributionModel, SortedSample};

use crate::config::{ExperimentConfig, GridScheme, ReferenceConfig, CALIBRATION_FACTOR};
use crate::error::{HarnessError, Result};
use crate::io::{write_json, write_values_csv};

/// Pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(HarnessError::Config("--threads must be positive".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| HarnessError::ThreadPool(e.to_string()))
}

/// Replicates `0..count` of `f`, computed in parallel and returned in index order.
fn replicate_par<F>(pool: &ThreadPool, count: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> w1clt_core::Result<f64> + Sync,
{
    pool.install(|| (0..count).into_par_iter().map(&f).collect::<w1clt_core::Result<Vec<f64>>>())
        .map_err(Into::into)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Analytic,
    Calibration,
}

/// The reference law used for `T_n` and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub source: ReferenceSource,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_seed: Option<u64>,
    /// `d₁` between an independent check orbit of the same length and the
    /// calibrated CDF.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_check_w1: Option<f64>,
    /// `√n_max · calibration_check_w1 / √2`: the rough shift in `T_n` at the
    /// largest `n` attributable to calibration noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_error_at_max_n: Option<f64>,
}

/// Builds the reference law, calibrating it when the config asks for that.
pub fn build_reference(cfg: &ExperimentConfig) -> Result<(DistributionModel, ReferenceInfo)> {
    match &cfg.reference {
        ReferenceConfig::Analytic { model } => {
            let m = match model {
                Some(m) => m.clone(),
                None => cfg.process.analytic_marginal().ok_or_else(|| {
                    HarnessError::Config(format!(
                        "reference CDF for a {} process is unavailable and no calibration was requested",
                        cfg.process.label()
                    ))
                })?,
            };
            m.validate()?;
            let info = ReferenceInfo {
                source: ReferenceSource::Analytic,
                label: m.label().to_string(),
                calibration_length: None,
                calibration_seed: None,
                calibration_check_w1: None,
                calibration_error_at_max_n: None,
            };
            Ok((m, info))
        }
        ReferenceConfig::Calibration { length, points } => {
            let length = length.unwrap_or(CALIBRATION_FACTOR.saturating_mul(cfg.max_n()).max(*points));
            let seed = derive_seed(cfg.base_seed, Domain::Calibration, &[0]);
            let m = calibrate_reference_auto(&cfg.process, length, *points, seed)?;
            let check = generate(&cfg.process, length, derive_seed(cfg.base_seed, Domain::Calibration, &[1]))?;
            let check_w1 = w1_sample_vs_model(&SortedSample::new(check.values)?, &m, STATISTIC_TAIL_TOL)?
                .require("calibration check distance")?;
            let info = ReferenceInfo {
                source: ReferenceSource::Calibration,
                label: format!("calibrated {} ({length} values, {} grid points)", cfg.process.label(), points),
                calibration_length: Some(length),
                calibration_seed: Some(seed),
                calibration_check_w1: Some(check_w1),
                calibration_error_at_max_n: Some(math::sqrt(cfg.max_n() as f64 / 2.0) * check_w1),
            };
            Ok((m, info))
        }
    }
}

/// `R` replicates of `T_n` for every configured `n`.
pub fn run_clt_experiment(
    cfg: &ExperimentConfig,
    reference: &DistributionModel,
    pool: &ThreadPool,
) -> Result<Vec<StatisticSample>> {
    cfg.validate()?;
    cfg.n_values
        .iter()
        .map(|&n| finite_n_par(&cfg.process, reference, n, cfg.replications, cfg.base_seed, pool))
        .collect()
}

/// Parallel counterpart of the core's sequential replicate loop; the values
/// are identical to it.
pub fn finite_n_par(
    spec: &ProcessSpec,
    reference: &DistributionModel,
    n: usize,
    replicates: usize,
    base_seed: u64,
    pool: &ThreadPool,
) -> Result<StatisticSample> {
    let values = replicate_par(pool, replicates, |r| {
        clt_statistic(spec, reference, n, replicate_seed(base_seed, n, r))
    })?;
    Ok(StatisticSample::new(
        values,
        StatisticKind::FiniteN,
        finite_n_metadata(spec, reference, n, replicates, base_seed),
    )?)
}

/// Covariance grid, limit-functional replicates and the optional bridge oracle.
pub struct LimitRun {
    pub covariance: CovarianceGrid,
    pub sample: StatisticSample,
    pub oracle: Option<StatisticSample>,
}

pub fn build_grid(cfg: &ExperimentConfig, reference: &DistributionModel) -> Result<LimitGrid> {
    let g = &cfg.grid;
    Ok(match g.scheme {
        GridScheme::Quantile => LimitGrid::quantile_spaced(reference, g.size, g.tail_points)?,
        GridScheme::Uniform => {
            let (lo, hi) = (g.lo.unwrap_or(f64::NAN), g.hi.unwrap_or(f64::NAN));
            LimitGrid::uniform(reference, lo, hi, g.size)?
        }
    })
}

pub fn build_covariance(cfg: &ExperimentConfig, reference: &DistributionModel) -> Result<CovarianceGrid> {
    let grid = build_grid(cfg, reference)?;
    let limit = cfg
        .limit
        .as_ref()
        .ok_or_else(|| HarnessError::Config("no limit section".into()))?;
    if matches!(cfg.process, ProcessSpec::Iid { .. }) {
        return Ok(covariance_iid(reference, &grid)?);
    }
    let k = cfg.lag_cutoff()?;
    let seed = derive_seed(cfg.base_seed, Domain::Covariance, &[]);
    Ok(covariance_dependent(&cfg.process, &grid, k, limit.sim_length, seed)?)
}

pub fn sample_limit_par(cg: &CovarianceGrid, replicates: usize, seed: u64, pool: &ThreadPool) -> Result<StatisticSample> {
    let sampler = LimitSampler::new(cg)?;
    let values = replicate_par(pool, replicates, |r| Ok(sampler.replicate(seed, r as u64)))?;
    Ok(StatisticSample::new(
        values,
        StatisticKind::LimitFunctional,
        SampleMetadata {
            n: None,
            replicates,
            base_seed: seed,
            description: format!("gaussian limit functional on {} grid points", cg.size()),
        },
    )?)
}

pub fn oracle_par(
    m: &DistributionModel,
    replicates: usize,
    mesh: usize,
    seed: u64,
    pool: &ThreadPool,
) -> Result<StatisticSample> {
    let oracle = BridgeOracle::new(m, mesh)?;
    let values = replicate_par(pool, replicates, |r| Ok(oracle.replicate(seed, r as u64)))?;
    Ok(StatisticSample::new(
        values,
        StatisticKind::LimitFunctional,
        SampleMetadata {
            n: None,
            replicates,
            base_seed: seed,
            description: format!("brownian bridge oracle for {} on {mesh} nodes", m.label()),
        },
    )?)
}

pub fn run_limit(cfg: &ExperimentConfig, reference: &DistributionModel, pool: &ThreadPool) -> Result<LimitRun> {
    cfg.validate()?;
    let limit = cfg
        .limit
        .as_ref()
        .ok_or_else(|| HarnessError::Config("no limit section".into()))?;
    let covariance = build_covariance(cfg, reference)?;
    let sample = sample_limit_par(&covariance, limit.replications, cfg.base_seed, pool)?;
    let oracle = match limit.oracle_mesh {
        Some(mesh) if matches!(cfg.process, ProcessSpec::Iid { .. }) => {
            Some(oracle_par(reference, limit.replications, mesh, cfg.base_seed, pool)?)
        }
        Some(_) => {
            return Err(HarnessError::Config(
                "the bridge oracle only applies to iid processes".into(),
            ))
        }
        None => None,
    };
    Ok(LimitRun {
        covariance,
        sample,
        oracle,
    })
}

/// Location summary of one statistic sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub replicates: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub q05: f64,
    pub q95: f64,
    pub file: String,
}

impl SampleSummary {
    pub fn of(s: &StatisticSample, file: impl Into<String>) -> Self {
        let sorted = s.sorted_values();
        let len = sorted.len();
        let mean = s.mean();
        let var = if len > 1 {
            sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (len - 1) as f64
        } else {
            0.0
        };
        let at = |p: f64| sorted[((p * len as f64) as usize).min(len - 1)];
        Self {
            n: s.metadata.n,
            replicates: len,
            mean,
            median: s.median(),
            sd: math::sqrt(var),
            q05: at(0.05),
            q95: at(0.95),
            file: file.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub source: CovarianceSource,
    pub grid_size: usize,
    pub lag_cutoff: usize,
    pub psd_repair: PsdRepair,
    pub outside_mass: f64,
    pub sample: SampleSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<SampleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_file: Option<String>,
}

/// Everything `experiment` writes to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub reference: ReferenceInfo,
    pub per_n: Vec<SampleSummary>,
    pub growth: GrowthVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_comparison: Option<ComparisonReport>,
}

pub const REPORT_FILE: &str = "report.json";
pub const LIMIT_FILE: &str = "limit.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const COVARIANCE_FILE: &str = "covariance.json";

pub fn sample_file_name(prefix: &str, n: usize) -> String {
    format!("{prefix}_n{n}.csv")
}

fn provenance(cfg: &ExperimentConfig, what: String) -> Result<Vec<String>> {
    let spec = serde_json::to_string(&cfg.process).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(vec![what, format!("process: {spec}"), format!("base_seed: {}", cfg.base_seed)])
}

/// Output of a full `experiment` run.
pub struct ExperimentRun {
    pub reference: DistributionModel,
    pub samples: Vec<StatisticSample>,
    pub limit: Option<LimitRun>,
    pub report: ExperimentReport,
}

/// Runs the finite-n replicates and, when configured, the limit law, then
/// compares the two. Nothing is written; see [`write_experiment`].
pub fn run_experiment(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<ExperimentRun> {
    cfg.validate()?;
    let (reference, info) = build_reference(cfg)?;
    let samples = run_clt_experiment(cfg, &reference, pool)?;
    let limit = match cfg.limit {
        Some(_) => Some(run_limit(cfg, &reference, pool)?),
        None => None,
    };
    let per_n: Vec<SampleSummary> = samples
        .iter()
        .map(|s| SampleSummary::of(s, sample_file_name(&cfg.output.prefix, s.metadata.n.unwrap_or(0))))
        .collect();
    let medians: Vec<f64> = per_n.iter().map(|s| s.median).collect();
    let growth = classify_growth(&medians, &GrowthThresholds::default());
    let (limit_summary, comparison, oracle_comparison) = match &limit {
        Some(l) => {
            let write_cov = cfg.limit.as_ref().is_some_and(|c| c.write_covariance);
            let summary = LimitSummary {
                source: l.covariance.source,
                grid_size: l.covariance.size(),
                lag_cutoff: l.covariance.lag_cutoff,
                psd_repair: l.covariance.psd_repair,
                outside_mass: l.covariance.outside_mass,
                sample: SampleSummary::of(&l.sample, LIMIT_FILE),
                oracle: l.oracle.as_ref().map(|o| SampleSummary::of(o, ORACLE_FILE)),
                covariance_file: write_cov.then(|| COVARIANCE_FILE.to_string()),
            };
            let cmp = compare_distributions(&samples, &l.sample, cfg.tolerance)?;
            let ocmp = match &l.oracle {
                Some(o) => Some(compare_distributions(&samples, o, cfg.tolerance)?),
                None => None,
            };
            (Some(summary), Some(cmp), ocmp)
        }
        None => (None, None, None),
    };
    let report = ExperimentReport {
        schema_version: crate::config::SCHEMA_VERSION,
        config: cfg.clone(),
        reference: info,
        per_n,
        growth,
        limit: limit_summary,
        comparison,
        oracle_comparison,
    };
    Ok(ExperimentRun {
        reference,
        samples,
        limit,
        report,
    })
}

/// Writes the per-n CSVs, limit CSVs, optional covariance and `report.json`
/// under `dir`. Returns the paths written, in order.
pub fn write_experiment(run: &ExperimentRun, dir: &Path) -> Result<Vec<PathBuf>> {
    let cfg = &run.report.config;
    let mut written = Vec::new();
    for s in &run.samples {
        let n = s.metadata.n.unwrap_or(0);
        let path = dir.join(sample_file_name(&cfg.output.prefix, n));
        let what = format!("sqrt(n) W1 to {}; n: {n}; replicates: {}", run.report.reference.label, s.values.len());
        write_values_csv(&path, &s.values, &provenance(cfg, what)?)?;
        written.push(path);
    }
    if let Some(l) = &run.limit {
        let path = dir.join(LIMIT_FILE);
        write_values_csv(&path, &l.sample.values, &provenance(cfg, l.sample.metadata.description.clone())?)?;
        written.push(path);
        if let Some(o) = &l.oracle {
            let path = dir.join(ORACLE_FILE);
            write_values_csv(&path, &o.values, &provenance(cfg, o.metadata.description.clone())?)?;
            written.push(path);
        }
        if cfg.limit.as_ref().is_some_and(|c| c.write_covariance) {
            let path = dir.join(COVARIANCE_FILE);
            write_json(&path, &l.covariance)?;
            written.push(path);
        }
    }
    let path = dir.join(REPORT_FILE);
    write_json(&path, &run.report)?;
    written.push(path);
    Ok(written)
}

/// Settings for [`divergence_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub gamma: f64,
    pub a: f64,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: GrowthThresholds,
    /// Grid points of the calibrated reference.
    #[serde(default = "default_probe_points")]
    pub calibration_points: usize,
}

fn default_probe_points() -> usize {
    4096
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub gamma: f64,
    pub a: f64,
    /// `½ - γ - a`: positive on the convergent side.
    pub margin: f64,
    pub condition: ConditionReport,
    pub reference: ReferenceInfo,
    pub per_n: Vec<SampleSummary>,
    /// `median(n_{i+1}) / median(n_i)`.
    pub ratios: Vec<f64>,
    pub thresholds: GrowthThresholds,
    pub verdict: GrowthVerdict,
}

/// Medians of `T_n` for the intermittent observable `x^{-a}` against a
/// calibrated reference, classified as stabilizing or not.
pub fn divergence_probe(p: &ProbeConfig, pool: &ThreadPool) -> Result<(ProbeReport, Vec<StatisticSample>)> {
    let cfg = ExperimentConfig {
        schema_version: crate::config::SCHEMA_VERSION,
        process: ProcessSpec::intermittent(p.gamma, p.a),
        n_values: p.n_values.clone(),
        replications: p.replications,
        base_seed: p.seed,
        reference: ReferenceConfig::Calibration {
            length: None,
            points: p.calibration_points,
        },
        grid: Default::default(),
        limit: None,
        tolerance: None,
        output: Default::default(),
    };
    cfg.validate()?;
    let condition = check_intermittent_threshold(p.gamma, p.a)?;
    let (reference, info) = build_reference(&cfg)?;
    let samples = run_clt_experiment(&cfg, &reference, pool)?;
    let per_n: Vec<SampleSummary> = samples
        .iter()
        .map(|s| SampleSummary::of(s, sample_file_name("probe", s.metadata.n.unwrap_or(0))))
        .collect();
    let medians: Vec<f64> = per_n.iter().map(|s| s.median).collect();
    let ratios = medians.windows(2).map(|w| w[1] / w[0]).collect();
    let report = ProbeReport {
        gamma: p.gamma,
        a: p.a,
        margin: 0.5 - p.gamma - p.a,
        condition,
        reference: info,
        per_n,
        ratios,
        thresholds: p.thresholds,
        verdict: classify_growth(&medians, &p.thresholds),
    };
    Ok((report, samples))
}
