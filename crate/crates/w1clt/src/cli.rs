//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use w1clt_core::compare::{compare_distributions, GrowthThresholds};
use w1clt_core::conditions::{
    check_alpha_condition, check_intermittent_threshold, check_linear_conditions, check_phi_condition,
    ConditionReport, LinearMode, MixingBound,
};
use w1clt_core::limitlaw::{SampleMetadata, StatisticKind, StatisticSample};
use w1clt_core::processes::{generate, CoeffFamily, ProcessSpec};
use w1clt_core::transport::{w1_sample_vs_model, w1_two_samples, TAIL_REL_TOL};
use w1clt_core::{DistributionModel, ExtendedReal, SortedSample};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::harness::{
    divergence_probe, run_experiment, run_limit, thread_pool, write_experiment, ExperimentReport, LimitSummary,
    ProbeConfig, SampleSummary, COVARIANCE_FILE, LIMIT_FILE, ORACLE_FILE, REPORT_FILE,
};
use crate::io::{read_json, read_values_csv, write_json, write_values, write_values_csv};

#[derive(Debug, Parser)]
#[command(name = "w1clt", version, about = "Empirical CLT in L1-Wasserstein distance: simulate, check, compare")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Base seed; overrides any seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path of a process and write it as CSV.
    Generate {
        /// Process JSON (a `process` object, or a full experiment config).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        /// Output file name inside --out-dir (stdout when no --out-dir).
        #[arg(long, default_value = "path.csv")]
        out: String,
    },
    /// W1 distance between two CSV samples, or between a sample and a model.
    W1 {
        #[arg(long)]
        x: PathBuf,
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        y: Option<PathBuf>,
        /// Distribution model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a convergence condition and print the verdict as JSON.
    Check {
        /// Condition JSON; see README for the accepted kinds.
        #[arg(long, conflicts_with_all = ["gamma", "a"])]
        config: Option<PathBuf>,
        /// Intermittent-map parameter.
        #[arg(long, requires = "a")]
        gamma: Option<f64>,
        /// Observable exponent.
        #[arg(long, requires = "gamma")]
        a: Option<f64>,
    },
    /// Sample the limiting functional for an experiment config.
    Limit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full finite-n vs limit pipeline.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare finite-n samples against a reference sample.
    Compare {
        /// One or more finite-n CSVs, in increasing n.
        #[arg(long = "a", required = true, num_args = 1..)]
        a: Vec<PathBuf>,
        #[arg(long = "b")]
        b: PathBuf,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Median growth of T_n for the intermittent observable.
    Probe {
        #[arg(long, conflicts_with_all = ["gamma", "a"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "a")]
        gamma: Option<f64>,
        #[arg(long, requires = "gamma")]
        a: Option<f64>,
        /// Sample sizes, e.g. `--n 4096 16384 65536`.
        #[arg(long, num_args = 1.., default_values_t = [4096usize, 16384, 65536])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 1.5)]
        growth_factor: f64,
    },
    /// Summarize an experiment directory as a table and plot-ready CSV.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Condition file accepted by `check --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionRequest {
    Phi {
        bound: MixingBound,
        model: DistributionModel,
    },
    Alpha {
        bound: MixingBound,
        model: DistributionModel,
        #[serde(default = "default_terms")]
        terms: usize,
    },
    Intermittent {
        gamma: f64,
        a: f64,
    },
    Linear {
        coefficients: CoeffFamily,
        innovation: DistributionModel,
        #[serde(flatten)]
        mode: LinearMode,
        #[serde(default = "default_terms")]
        terms: usize,
    },
}

fn default_terms() -> usize {
    10_000
}

pub fn evaluate_condition(req: &ConditionRequest) -> Result<ConditionReport> {
    Ok(match req {
        ConditionRequest::Phi { bound, model } => check_phi_condition(bound, model)?,
        ConditionRequest::Alpha { bound, model, terms } => check_alpha_condition(bound, model, *terms)?,
        ConditionRequest::Intermittent { gamma, a } => check_intermittent_threshold(*gamma, *a)?,
        ConditionRequest::Linear {
            coefficients,
            innovation,
            mode,
            terms,
        } => check_linear_conditions(coefficients, innovation, mode, *terms)?,
    })
}

#[derive(Debug, Serialize)]
struct W1Output {
    w1: ExtendedReal,
    n_x: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_y: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'static str>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LimitOutput {
    pub config: ExperimentConfig,
    pub reference: crate::harness::ReferenceInfo,
    pub limit: LimitSummary,
}

/// Parses `argv` and runs the command. Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit_json<T: Serialize>(stdout: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Config(e.to_string()))?;
    writeln!(stdout, "{text}").map_err(|e| HarnessError::io("<stdout>", e))
}

fn load_config(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = read_json(path)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    common
        .out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
}

fn load_process(path: &Path) -> Result<ProcessSpec> {
    let value: serde_json::Value = read_json(path)?;
    let process = value.get("process").cloned().unwrap_or(value);
    let spec: ProcessSpec = serde_json::from_value(process).map_err(|e| HarnessError::format(path, e))?;
    spec.validate()?;
    Ok(spec)
}

/// `n` parsed from a `<stem>_n<digits>.csv` file name.
fn n_from_name(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let idx = stem.rfind("_n")?;
    stem[idx + 2..].parse().ok()
}

fn sample_from_csv(path: &Path, kind: StatisticKind) -> Result<StatisticSample> {
    let values = read_values_csv(path)?;
    let metadata = SampleMetadata {
        n: n_from_name(path),
        replicates: values.len(),
        base_seed: 0,
        description: path.display().to_string(),
    };
    Ok(StatisticSample::new(values, kind, metadata)?)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Generate { config, n, out } => {
            let spec = load_process(&config)?;
            let seed = common.seed.unwrap_or(0);
            let path = generate(&spec, n, seed)?;
            let spec_json = serde_json::to_string(&spec).map_err(|e| HarnessError::Config(e.to_string()))?;
            let comments = vec![
                format!("process: {spec_json}"),
                format!("seed: {seed}"),
                format!("truncation_error_bound: {:?}", path.truncation_error_bound),
            ];
            match out_dir(common, None) {
                Some(dir) => write_values_csv(&dir.join(out), &path.values, &comments)?,
                None => write_values(&mut *stdout, &path.values, &comments).map_err(|e| HarnessError::io("<stdout>", e))?,
            }
        }
        Command::W1 { x, y, model } => {
            let xs = SortedSample::new(read_values_csv(&x)?)?;
            let out = match (y, model) {
                (Some(y), _) => {
                    let ys = SortedSample::new(read_values_csv(&y)?)?;
                    W1Output {
                        w1: ExtendedReal::finite(w1_two_samples(&xs, &ys)),
                        n_x: xs.len(),
                        n_y: Some(ys.len()),
                        model: None,
                    }
                }
                (None, Some(m)) => {
                    let m: DistributionModel = read_json(&m)?;
                    m.validate()?;
                    W1Output {
                        w1: w1_sample_vs_model(&xs, &m, TAIL_REL_TOL)?,
                        n_x: xs.len(),
                        n_y: None,
                        model: Some(m.label()),
                    }
                }
                (None, None) => unreachable!("clap requires --y or --model"),
            };
            emit_json(stdout, &out)?;
        }
        Command::Check { config, gamma, a } => {
            let req = match (config, gamma, a) {
                (Some(path), _, _) => read_json::<ConditionRequest>(&path)?,
                (None, Some(gamma), Some(a)) => ConditionRequest::Intermittent { gamma, a },
                _ => return Err(HarnessError::Config("check needs --config or both --gamma and --a".into())),
            };
            let report = evaluate_condition(&req)?;
            if let Some(dir) = out_dir(common, None) {
                write_json(&dir.join("check.json"), &report)?;
            }
            emit_json(stdout, &report)?;
        }
        Command::Limit { config } => {
            let cfg = load_config(&config, common)?;
            let pool = thread_pool(common.threads)?;
            let (reference, info) = crate::harness::build_reference(&cfg)?;
            let run = run_limit(&cfg, &reference, &pool)?;
            let write_cov = cfg.limit.as_ref().is_some_and(|l| l.write_covariance);
            let summary = LimitSummary {
                source: run.covariance.source,
                grid_size: run.covariance.size(),
                lag_cutoff: run.covariance.lag_cutoff,
                psd_repair: run.covariance.psd_repair,
                outside_mass: run.covariance.outside_mass,
                sample: SampleSummary::of(&run.sample, LIMIT_FILE),
                oracle: run.oracle.as_ref().map(|o| SampleSummary::of(o, ORACLE_FILE)),
                covariance_file: write_cov.then(|| COVARIANCE_FILE.to_string()),
            };
            let output = LimitOutput {
                config: cfg.clone(),
                reference: info,
                limit: summary,
            };
            if let Some(dir) = out_dir(common, Some(&cfg)) {
                let note = vec![run.sample.metadata.description.clone(), format!("base_seed: {}", cfg.base_seed)];
                write_values_csv(&dir.join(LIMIT_FILE), &run.sample.values, &note)?;
                if let Some(o) = &run.oracle {
                    let note = vec![o.metadata.description.clone(), format!("base_seed: {}", cfg.base_seed)];
                    write_values_csv(&dir.join(ORACLE_FILE), &o.values, &note)?;
                }
                if write_cov {
                    write_json(&dir.join(COVARIANCE_FILE), &run.covariance)?;
                }
                write_json(&dir.join("limit.json"), &output)?;
            }
            emit_json(stdout, &output)?;
        }
        Command::Experiment { config } => {
            let cfg = load_config(&config, common)?;
            let pool = thread_pool(common.threads)?;
            let run = run_experiment(&cfg, &pool)?;
            if let Some(dir) = out_dir(common, Some(&cfg)) {
                write_experiment(&run, &dir)?;
            }
            emit_json(stdout, &run.report)?;
        }
        Command::Compare { a, b, tolerance } => {
            let finite = a
                .iter()
                .map(|p| sample_from_csv(p, StatisticKind::FiniteN))
                .collect::<Result<Vec<_>>>()?;
            let reference = sample_from_csv(&b, StatisticKind::LimitFunctional)?;
            let report = compare_distributions(&finite, &reference, tolerance)?;
            if let Some(dir) = out_dir(common, None) {
                write_json(&dir.join("compare.json"), &report)?;
            }
            emit_json(stdout, &report)?;
        }
        Command::Probe {
            config,
            gamma,
            a,
            n,
            replications,
            growth_factor,
        } => {
            let mut probe = match (config, gamma, a) {
                (Some(path), _, _) => read_json::<ProbeConfig>(&path)?,
                (None, Some(gamma), Some(a)) => ProbeConfig {
                    gamma,
                    a,
                    n_values: n,
                    replications,
                    seed: 0,
                    thresholds: GrowthThresholds {
                        growth_factor,
                        ..GrowthThresholds::default()
                    },
                    calibration_points: 4096,
                },
                _ => return Err(HarnessError::Config("probe needs --config or both --gamma and --a".into())),
            };
            if let Some(seed) = common.seed {
                probe.seed = seed;
            }
            let pool = thread_pool(common.threads)?;
            let (report, samples) = divergence_probe(&probe, &pool)?;
            if let Some(dir) = out_dir(common, None) {
                for (s, row) in samples.iter().zip(&report.per_n) {
                    let note = vec![s.metadata.description.clone(), format!("base_seed: {}", probe.seed)];
                    write_values_csv(&dir.join(&row.file), &s.values, &note)?;
                }
                write_json(&dir.join("probe.json"), &report)?;
            }
            emit_json(stdout, &report)?;
        }
        Command::Report { dir } => {
            let report: ExperimentReport = read_json(&dir.join(REPORT_FILE))?;
            let table = summary_table(&report);
            write_text(&dir.join("summary.csv"), &table)?;
            write!(stdout, "{}", render_report(&report)).map_err(|e| HarnessError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Plot-ready per-n table: one row per `n`, plus a `limit` row when present.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut out = String::from("n,replicates,mean,median,sd,q05,q95,ks_vs_limit,w1_vs_limit\n");
    let cmp_rows = report.comparison.as_ref().map(|c| c.per_n.as_slice()).unwrap_or(&[]);
    for (i, s) in report.per_n.iter().enumerate() {
        let (ks, w1) = cmp_rows
            .get(i)
            .map(|r| (format!("{:?}", r.ks), format!("{:?}", r.w1)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{ks},{w1}\n",
            s.n.unwrap_or(0),
            s.replicates,
            s.mean,
            s.median,
            s.sd,
            s.q05,
            s.q95
        ));
    }
    if let Some(l) = &report.limit {
        let s = &l.sample;
        out.push_str(&format!(
            "limit,{},{:?},{:?},{:?},{:?},{:?},,\n",
            s.replicates, s.mean, s.median, s.sd, s.q05, s.q95
        ));
    }
    out
}

pub fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "process: {}\nreference: {}\n",
        report.config.process.label(),
        report.reference.label
    ));
    if let Some(e) = report.reference.calibration_error_at_max_n {
        out.push_str(&format!("calibration error at largest n: {e:.4}\n"));
    }
    out.push_str(&format!(
        "\n{:>10} {:>8} {:>10} {:>10} {:>10} {:>8}\n",
        "n", "R", "mean", "median", "sd", "KS"
    ));
    let cmp_rows = report.comparison.as_ref().map(|c| c.per_n.as_slice()).unwrap_or(&[]);
    for (i, s) in report.per_n.iter().enumerate() {
        let ks = cmp_rows.get(i).map(|r| format!("{:.4}", r.ks)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:>10} {:>8} {:>10.5} {:>10.5} {:>10.5} {:>8}\n",
            s.n.unwrap_or(0),
            s.replicates,
            s.mean,
            s.median,
            s.sd,
            ks
        ));
    }
    if let Some(l) = &report.limit {
        let s = &l.sample;
        out.push_str(&format!(
            "{:>10} {:>8} {:>10.5} {:>10.5} {:>10.5} {:>8}\n",
            "limit", s.replicates, s.mean, s.median, s.sd, "-"
        ));
        out.push_str(&format!(
            "\ncovariance: {:?}, {} points, K = {}, jitter {:e}, {} eigenvalues clipped\n",
            l.source, l.grid_size, l.lag_cutoff, l.psd_repair.jitter_added, l.psd_repair.eigenvalues_clipped
        ));
    }
    out.push_str(&format!("growth of medians: {:?}\n", report.growth));
    if let Some(c) = &report.comparison {
        out.push_str(&format!("verdict: {}\n", c.verdict));
    }
    out
}
