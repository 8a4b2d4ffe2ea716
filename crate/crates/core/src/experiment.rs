//! The finite-n statistic `T_n = √n · d₁(F_n, F)` and its replicates.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::limitlaw::{SampleMetadata, StatisticKind, StatisticSample};
use crate::math;
use crate::model::DistributionModel;
use crate::processes::{generate, ProcessSpec};
use crate::rng::{derive_seed, Domain};
use crate::transport::{w1_sample_vs_model, SortedSample};

/// Tail tolerance passed to [`w1_sample_vs_model`] for every replicate.
pub const STATISTIC_TAIL_TOL: f64 = 1e-12;

/// Seed of replicate `r` at sample size `n`.
pub fn replicate_seed(base_seed: u64, n: usize, r: usize) -> u64 {
    derive_seed(base_seed, Domain::Replicate, &[n as u64, r as u64])
}

/// `√n · d₁(F_n, F)` for one path of `spec` drawn from `path_seed`.
pub fn clt_statistic(spec: &ProcessSpec, reference: &DistributionModel, n: usize, path_seed: u64) -> Result<f64> {
    let path = generate(spec, n, path_seed)?;
    let sample = SortedSample::new(path.values)?;
    let d = w1_sample_vs_model(&sample, reference, STATISTIC_TAIL_TOL)?.require("W1 to the reference law")?;
    Ok(math::sqrt(n as f64) * d)
}

/// Replicates `0..replicates` of `T_n`, computed sequentially.
pub fn finite_n_sample(
    spec: &ProcessSpec,
    reference: &DistributionModel,
    n: usize,
    replicates: usize,
    base_seed: u64,
) -> Result<StatisticSample> {
    if replicates == 0 {
        return Err(invalid!("need at least one replicate"));
    }
    let values = (0..replicates)
        .map(|r| clt_statistic(spec, reference, n, replicate_seed(base_seed, n, r)))
        .collect::<Result<Vec<f64>>>()?;
    StatisticSample::new(values, StatisticKind::FiniteN, finite_n_metadata(spec, reference, n, replicates, base_seed))
}

/// Provenance attached to a finite-n sample.
pub fn finite_n_metadata(
    spec: &ProcessSpec,
    reference: &DistributionModel,
    n: usize,
    replicates: usize,
    base_seed: u64,
) -> SampleMetadata {
    SampleMetadata {
        n: Some(n),
        replicates,
        base_seed,
        description: format!("sqrt(n) W1 of {} against {} reference", spec.label(), reference.label()),
    }
}
