//! Distribution comparisons between replicated statistics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::limitlaw::StatisticSample;
use crate::math;
use crate::transport::{w1_two_samples, SortedSample};

/// Asymptotic two-sample KS coefficient `c(α)` at `α = 0.01`.
pub const KS_COEFF_1PCT: f64 = 1.627_61;

/// `sup_t |F_a(t) - F_b(t)|` for two ascending samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Median of an ascending sample (mean of the two middle values for even sizes).
pub fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// One row of a comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub replicates_a: usize,
    pub replicates_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub median_a: f64,
    pub median_b: f64,
    pub ks: f64,
    pub w1: f64,
    /// KS critical value at the 1% level for these sample sizes.
    pub ks_critical_1pct: f64,
}

/// Outcome of comparing finite-n statistics with a reference sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ks_two_sample: f64,
    pub w1_between_statistics: f64,
    pub mean_gap: f64,
    pub per_n: Vec<ComparisonRow>,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn row(a: &StatisticSample, b: &StatisticSample) -> Result<ComparisonRow> {
    if a.values.is_empty() || b.values.is_empty() {
        return Err(invalid!("cannot compare empty statistic samples"));
    }
    let sa = a.sorted_values();
    let sb = b.sorted_values();
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let w1 = w1_two_samples(&SortedSample::from_sorted(sa.clone())?, &SortedSample::from_sorted(sb.clone())?);
    Ok(ComparisonRow {
        n: a.metadata.n,
        replicates_a: sa.len(),
        replicates_b: sb.len(),
        mean_a: a.mean(),
        mean_b: b.mean(),
        median_a: median_of_sorted(&sa),
        median_b: median_of_sorted(&sb),
        ks: ks_two_sample(&sa, &sb),
        w1,
        ks_critical_1pct: KS_COEFF_1PCT * math::sqrt((na + nb) / (na * nb)),
    })
}

/// Compares every sample in `finite` against `reference`; the headline
/// numbers describe the last (largest-n) entry.
pub fn compare_distributions(
    finite: &[StatisticSample],
    reference: &StatisticSample,
    tolerance: Option<f64>,
) -> Result<ComparisonReport> {
    if finite.is_empty() {
        return Err(invalid!("nothing to compare"));
    }
    let per_n = finite.iter().map(|a| row(a, reference)).collect::<Result<Vec<_>>>()?;
    let last = per_n.last().expect("non-empty");
    let verdict = match tolerance {
        Some(tol) if last.ks <= tol => format!("KS {:.4} within tolerance {tol}", last.ks),
        Some(tol) => format!("KS {:.4} exceeds tolerance {tol}", last.ks),
        None if last.ks <= last.ks_critical_1pct => format!(
            "KS {:.4} below the 1% critical value {:.4}: consistent with a common law",
            last.ks, last.ks_critical_1pct
        ),
        None => format!(
            "KS {:.4} above the 1% critical value {:.4}: the laws differ",
            last.ks, last.ks_critical_1pct
        ),
    };
    Ok(ComparisonReport {
        ks_two_sample: last.ks,
        w1_between_statistics: last.w1,
        mean_gap: (last.mean_a - last.mean_b).abs(),
        per_n,
        verdict,
        tolerance,
    })
}

/// Whether medians of `T_n` settle or keep growing with `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    NonStabilizing,
    Stabilizing,
    Inconclusive,
    InsufficientData,
}

/// Thresholds for [`classify_growth`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthThresholds {
    /// Minimum `last / first` median ratio for a strictly increasing run to count as growth.
    pub growth_factor: f64,
    /// Every consecutive ratio inside `[ratio_low, ratio_high]` counts as stable.
    pub ratio_low: f64,
    pub ratio_high: f64,
}

impl Default for GrowthThresholds {
    fn default() -> Self {
        Self {
            growth_factor: 1.5,
            ratio_low: 0.8,
            ratio_high: 1.25,
        }
    }
}

/// Classifies a sequence of medians ordered by increasing `n`.
pub fn classify_growth(medians: &[f64], t: &GrowthThresholds) -> GrowthVerdict {
    if medians.len() < 2 {
        return GrowthVerdict::InsufficientData;
    }
    let increasing = medians.windows(2).all(|w| w[1] > w[0]);
    let factor = medians[medians.len() - 1] / medians[0];
    if medians.len() >= 3 && increasing && factor >= t.growth_factor {
        return GrowthVerdict::NonStabilizing;
    }
    let stable = medians
        .windows(2)
        .all(|w| (t.ratio_low..=t.ratio_high).contains(&(w[1] / w[0])));
    if stable {
        GrowthVerdict::Stabilizing
    } else {
        GrowthVerdict::Inconclusive
    }
}
