//! The limiting Gaussian field `G` on a finite grid, its `L¹` functional
//! `∫ |G(t)| dt`, and the Brownian-bridge oracle for iid data.
//!
//! A [`LimitGrid`] carries both the points `t_1 < … < t_m` and quadrature
//! weights `ω_i` so that `∫ |G| ≈ Σ ω_i |G(t_i)|`. Inside `[t_1, t_m]` the
//! weights are trapezoidal. Outside, `G(t)` is continued as `G(t_1)` or
//! `G(t_m)` scaled by the ratio of standard deviations under independence,
//! `√(F(t)(1-F(t)))`, which keeps the mean of the tail contribution right in
//! the iid case and its size comparable in the dependent case.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::model::{DistributionModel, TailClass};
use crate::processes::{PathSampler, ProcessSpec};
use crate::quad::{integrate_piecewise, QuadOptions};
use crate::rng::{stream, Domain, StreamRng};
use crate::transport::integrate_sqrt_tail_like;

/// Symmetry tolerance for supplied covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Largest number of escalating jitter attempts.
pub const MAX_JITTER_STEPS: usize = 16;

/// Evaluation points and quadrature weights for `∫ |G(t)| dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `∫ √(F(1-F))` outside `[t_1, t_m]`: the part of the iid-scale
    /// functional carried by the extrapolated tail weights.
    pub outside_mass: f64,
}

fn tail_opts() -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-8,
        abs_tol: 1e-14,
        max_subdivisions: 20_000,
    }
}

fn model_cuts(m: &DistributionModel) -> Vec<f64> {
    match m {
        DistributionModel::Tabulated(t) => t.grid().to_vec(),
        _ => Vec::new(),
    }
}

/// `∫_{t}^{∞} g(s) ds` for `g` supported where `F < 1`, with `g ≤ √(1-F)`.
fn right_integral<G: Fn(f64) -> f64>(m: &DistributionModel, t: f64, g: G) -> Result<f64> {
    let (_, hi) = m.support();
    if hi.is_finite() {
        return Ok(integrate_piecewise(g, t, hi, &model_cuts(m), tail_opts())?.value);
    }
    let head = if t < 0.0 {
        integrate_piecewise(&g, t, 0.0, &[], tail_opts())?.value
    } else {
        0.0
    };
    let rest = integrate_sqrt_tail_like(m, &g, t.max(0.0), 1e-8)?;
    Ok(head + rest.require("right tail weight")?)
}

/// `∫_{lo}^{t} g(s) ds` over the part of the support left of `t`.
fn left_integral<G: Fn(f64) -> f64>(m: &DistributionModel, t: f64, g: G) -> Result<f64> {
    let (lo, _) = m.support();
    if !lo.is_finite() {
        return Err(invalid!("{} has no lower support bound", m.label()));
    }
    Ok(integrate_piecewise(g, lo, t, &model_cuts(m), tail_opts())?.value)
}

impl LimitGrid {
    /// Grid at the explicit `points`, weighted for the marginal law `m`.
    pub fn from_points(m: &DistributionModel, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid!("limit grid needs at least one point"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
            return Err(invalid!("limit grid must be finite and strictly increasing"));
        }
        if matches!(m.tail_class(), TailClass::Power { exponent, .. } if exponent <= 2.0) {
            return Err(invalid!(
                "{} has infinite Λ₂,₁; the limit functional does not exist",
                m.label()
            ));
        }
        let k = points.len();
        let mut weights = alloc::vec![0.0; k];
        for i in 0..k.saturating_sub(1) {
            let h = 0.5 * (points[i + 1] - points[i]);
            weights[i] += h;
            weights[i + 1] += h;
        }
        let (t1, tm) = (points[0], points[k - 1]);
        // `survival` rather than `1 - cdf`, which cancels to 0 deep in the right tail.
        let sd = |t: f64| math::sqrt((m.cdf(t) * m.survival(t)).max(0.0));
        let (sd1, sdm) = (sd(t1), sd(tm));
        let left_out = left_integral(m, t1, sd)?;
        let right_out = right_integral(m, tm, sd)?;
        // A point with F(t)(1 - F(t)) = 0 carries no variance, so its tail weight is moot.
        if sd1 > 0.0 {
            weights[0] += left_out / sd1;
        }
        if sdm > 0.0 {
            weights[k - 1] += right_out / sdm;
        }
        Ok(Self {
            points,
            weights,
            outside_mass: left_out + right_out,
        })
    }

    /// `size` points at the quantile levels `(i - ½) / size`, plus
    /// `tail_points` extra points per side at levels halving toward 0 and 1.
    pub fn quantile_spaced(m: &DistributionModel, size: usize, tail_points: usize) -> Result<Self> {
        if size == 0 {
            return Err(invalid!("limit grid size must be positive"));
        }
        let mut levels = Vec::with_capacity(size + 2 * tail_points);
        let edge = 0.5 / size as f64;
        for j in (1..=tail_points).rev() {
            levels.push(edge * math::powf(0.5, j as f64));
        }
        for i in 0..size {
            levels.push((i as f64 + 0.5) / size as f64);
        }
        let mut points: Vec<f64> = levels.iter().map(|&u| m.quantile(u)).collect();
        for j in 1..=tail_points {
            points.push(m.upper_quantile(edge * math::powf(0.5, j as f64)));
        }
        points.dedup();
        points.retain(|p| p.is_finite());
        Self::from_points(m, points)
    }

    /// `size` equally spaced points on `[lo, hi]`.
    pub fn uniform(m: &DistributionModel, lo: f64, hi: f64, size: usize) -> Result<Self> {
        if !(lo < hi) || size < 2 {
            return Err(invalid!("uniform grid needs lo < hi and at least 2 points"));
        }
        let step = (hi - lo) / (size - 1) as f64;
        Self::from_points(m, (0..size).map(|i| lo + i as f64 * step).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Where a covariance matrix came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    AnalyticIid,
    SimulatedDependent,
    Supplied,
}

/// What [`CovarianceGrid::repair`] had to do to make the matrix factorable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PsdRepair {
    pub jitter_added: f64,
    pub eigenvalues_clipped: usize,
}

/// Covariance of `(G(t_1), …, G(t_m))` with its grid and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGrid {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `m × m`.
    pub matrix: Vec<f64>,
    pub lag_cutoff: usize,
    pub psd_repair: PsdRepair,
    pub source: CovarianceSource,
    pub outside_mass: f64,
}

impl CovarianceGrid {
    /// Wraps a caller-supplied symmetric matrix; call [`Self::repair`] before sampling.
    pub fn from_matrix(grid: Vec<f64>, weights: Vec<f64>, matrix: Vec<f64>) -> Result<Self> {
        let m = grid.len();
        if m == 0 || weights.len() != m || matrix.len() != m * m {
            return Err(invalid!("covariance needs m points, m weights and m*m entries"));
        }
        if matrix.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
            return Err(invalid!("covariance entries and weights must be finite"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(invalid!("quadrature weights must be nonnegative"));
        }
        let cg = Self {
            grid,
            weights,
            matrix,
            lag_cutoff: 0,
            psd_repair: PsdRepair::default(),
            source: CovarianceSource::Supplied,
            outside_mass: 0.0,
        };
        let scale = 1.0 + cg.trace().abs();
        for i in 0..m {
            if cg.at(i, i) < 0.0 {
                return Err(invalid!("negative variance {} at index {i}", cg.at(i, i)));
            }
            for j in 0..i {
                if (cg.at(i, j) - cg.at(j, i)).abs() > SYMMETRY_TOL * scale {
                    return Err(invalid!("covariance is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(cg)
    }

    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.size() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.at(i, i)).sum()
    }

    /// Scales every entry by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.matrix.iter_mut().for_each(|v| *v *= c * c);
        out
    }

    fn active(&self) -> Vec<usize> {
        let tiny = 1e-15 * self.trace().max(f64::MIN_POSITIVE);
        (0..self.size()).filter(|&i| self.at(i, i) > tiny).collect()
    }

    fn active_block(&self, active: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(active.len(), active.len(), |a, b| self.at(active[a], active[b]))
    }

    /// Cholesky factor of the active block (indices with positive variance).
    fn factor(&self) -> Option<(Vec<usize>, DMatrix<f64>)> {
        let active = self.active();
        if active.is_empty() {
            return Some((active, DMatrix::zeros(0, 0)));
        }
        let chol = self.active_block(&active).cholesky()?;
        Some((active, chol.l()))
    }

    /// Restores factorability: clips negative eigenvalues, then adds
    /// escalating diagonal jitter `10⁻¹²·trace·10^j` until Cholesky succeeds.
    pub fn repair(&mut self) -> Result<()> {
        if self.factor().is_some() {
            return Ok(());
        }
        let m = self.size();
        let active = self.active();
        let eig = SymmetricEigen::new(self.active_block(&active));
        let clipped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let mut vals = eig.eigenvalues.clone();
        vals.iter_mut().for_each(|l| *l = l.max(0.0));
        let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                let v = 0.5 * (rebuilt[(a, b)] + rebuilt[(b, a)]);
                self.matrix[i * m + j] = v;
            }
        }
        self.psd_repair.eigenvalues_clipped += clipped;
        if self.factor().is_some() {
            return Ok(());
        }
        let base = 1e-12 * self.trace().max(f64::MIN_POSITIVE);
        let active = self.active();
        let original = self.matrix.clone();
        for step in 0..MAX_JITTER_STEPS {
            let jitter = base * math::powf(10.0, step as f64);
            self.matrix.copy_from_slice(&original);
            for &i in &active {
                self.matrix[i * m + i] += jitter;
            }
            if self.factor().is_some() {
                self.psd_repair.jitter_added = jitter;
                return Ok(());
            }
        }
        self.matrix = original;
        Err(Error::Numerical(format!(
            "covariance on {m} points is not factorable after clipping {clipped} eigenvalues \
             and jitter up to {:e}",
            base * math::powf(10.0, (MAX_JITTER_STEPS - 1) as f64)
        )))
    }

    /// Smallest eigenvalue of the full matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.size();
        let full = DMatrix::from_row_slice(m, m, &self.matrix);
        SymmetricEigen::new(full).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `C(t_i, t_j) = F(t_i ∧ t_j) - F(t_i) F(t_j)`: covariance of `B(F(t))`.
pub fn covariance_iid(m: &DistributionModel, grid: &LimitGrid) -> Result<CovarianceGrid> {
    // On an increasing grid this is F(t_min) (1 - F(t_max)); the survival
    // function keeps the product accurate where F is close to 1.
    let f: Vec<f64> = grid.points.iter().map(|&t| m.cdf(t)).collect();
    let s: Vec<f64> = grid.points.iter().map(|&t| m.survival(t)).collect();
    let k = f.len();
    let mut matrix = alloc::vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            matrix[i * k + j] = f[i.min(j)] * s[i.max(j)];
        }
    }
    let mut cg = CovarianceGrid {
        grid: grid.points.clone(),
        weights: grid.weights.clone(),
        matrix,
        lag_cutoff: 0,
        psd_repair: PsdRepair::default(),
        source: CovarianceSource::AnalyticIid,
        outside_mass: grid.outside_mass,
    };
    cg.repair()?;
    Ok(cg)
}

/// Estimates `C(s,t) = C_0(s,t) + Σ_{k=1}^{K} [cov_k(t,s) + cov_k(s,t)]` from
/// one path of `sim_length` values, where
/// `cov_k(t,s) = P(Y_0 ≤ t, Y_k ≤ s) - F(t)F(s)` with empirical `F`.
///
/// The path is streamed: values are binned to grid cells and one joint
/// histogram per lag is kept, so memory is `O((K+1) m²)`.
pub fn covariance_dependent(
    spec: &ProcessSpec,
    grid: &LimitGrid,
    lag_cutoff: usize,
    sim_length: usize,
    seed: u64,
) -> Result<CovarianceGrid> {
    if sim_length == 0 || lag_cutoff.saturating_mul(10) >= sim_length {
        return Err(invalid!(
            "lag cutoff {lag_cutoff} needs sim_length above {}, got {sim_length}",
            lag_cutoff.saturating_mul(10)
        ));
    }
    let m = grid.len();
    let bins = m + 1;
    let lags = lag_cutoff + 1;
    let mut hist = alloc::vec![0u32; lags * bins * bins];
    let mut recent = alloc::vec![0usize; lags];
    let mut sampler = PathSampler::new(spec, seed)?;
    for step in 0..sim_length {
        let y = sampler.next_value();
        // Bin b holds t_{b-1} < y ≤ t_b, so Y ≤ t_i exactly when b ≤ i.
        let b = grid.points.partition_point(|&g| g < y);
        let slot = step % lags;
        recent[slot] = b;
        let reach = step.min(lag_cutoff);
        for k in 0..=reach {
            let earlier = recent[(step - k) % lags];
            let cell = (k * bins + earlier) * bins + b;
            hist[cell] = hist[cell].checked_add(1).ok_or_else(|| {
                Error::ResourceLimit(format!("joint histogram overflow at step {step}"))
            })?;
        }
    }

    // P_k(i, j) = P(Y_0 ≤ t_i, Y_k ≤ t_j) by 2-D cumulative sums.
    let mut joint = alloc::vec![0.0; lags * m * m];
    let mut col = alloc::vec![0u64; bins];
    for k in 0..lags {
        let pairs = (sim_length - k) as f64;
        col.iter_mut().for_each(|c| *c = 0);
        for i in 0..m {
            let mut row_run = 0u64;
            for j in 0..m {
                col[j] += hist[(k * bins + i) * bins + j] as u64;
                row_run += col[j];
                joint[(k * m + i) * m + j] = row_run as f64 / pairs;
            }
        }
    }
    let f: Vec<f64> = (0..m).map(|i| joint[i * m + i]).collect();
    let mut matrix = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut c = joint[i * m + j] - f[i] * f[j];
            for k in 1..lags {
                let base = k * m * m;
                c += joint[base + i * m + j] + joint[base + j * m + i] - 2.0 * f[i] * f[j];
            }
            matrix[i * m + j] = c;
        }
    }
    // Exact symmetry; the lag-0 block is symmetric only up to rounding.
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (matrix[i * m + j] + matrix[j * m + i]);
            matrix[i * m + j] = v;
            matrix[j * m + i] = v;
        }
    }
    let mut cg = CovarianceGrid {
        grid: grid.points.clone(),
        weights: grid.weights.clone(),
        matrix,
        lag_cutoff,
        psd_repair: PsdRepair::default(),
        source: CovarianceSource::SimulatedDependent,
        outside_mass: grid.outside_mass,
    };
    cg.repair()?;
    Ok(cg)
}

/// Which statistic a [`StatisticSample`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `√n · d₁(F_n, F)` at a fixed `n`.
    FiniteN,
    /// `∫ |G(t)| dt` for the limiting field.
    LimitFunctional,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    /// Free-form provenance: process, reference law, grid.
    #[serde(default)]
    pub description: String,
}

/// Replicates of a nonnegative scalar statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticSample {
    pub values: Vec<f64>,
    pub kind: StatisticKind,
    pub metadata: SampleMetadata,
}

impl StatisticSample {
    pub fn new(values: Vec<f64>, kind: StatisticKind, metadata: SampleMetadata) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Numerical(format!(
                "statistic replicate {bad} is not a finite nonnegative number"
            )));
        }
        Ok(Self {
            values,
            kind,
            metadata,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    pub fn median(&self) -> f64 {
        crate::compare::median_of_sorted(&self.sorted_values())
    }
}

/// Draws `Σ ω_i |G(t_i)|` with `G = L z`, `L` the Cholesky factor of the
/// active block of a repaired covariance.
pub struct LimitSampler {
    active: Vec<usize>,
    /// Packed lower triangle of the factor, row by row.
    lower: Vec<f64>,
    weights: Vec<f64>,
}

impl LimitSampler {
    pub fn new(cg: &CovarianceGrid) -> Result<Self> {
        let (active, l) = cg.factor().ok_or_else(|| {
            Error::Numerical(format!(
                "covariance on {} points is not factorable; repair it first (trace {:e}, \
                 clipped {}, jitter {:e})",
                cg.size(),
                cg.trace(),
                cg.psd_repair.eigenvalues_clipped,
                cg.psd_repair.jitter_added
            ))
        })?;
        let a = active.len();
        let mut lower = Vec::with_capacity(a * (a + 1) / 2);
        for i in 0..a {
            for j in 0..=i {
                lower.push(l[(i, j)]);
            }
        }
        let weights = active.iter().map(|&i| cg.weights[i]).collect();
        Ok(Self {
            active,
            lower,
            weights,
        })
    }

    /// One replicate drawn from `rng`.
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        let a = self.active.len();
        let z: Vec<f64> = (0..a).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut total = 0.0;
        let mut offset = 0;
        for i in 0..a {
            let row = &self.lower[offset..offset + i + 1];
            let g: f64 = row.iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
            total += self.weights[i] * g.abs();
            offset += i + 1;
        }
        total
    }

    /// Replicate `r` of the run keyed by `seed`.
    pub fn replicate(&self, seed: u64, r: u64) -> f64 {
        self.draw(&mut stream(seed, Domain::Limit, &[r]))
    }
}

/// `R` replicates of `∫ |G|` for the field with covariance `cg`.
pub fn sample_limit_functional(cg: &CovarianceGrid, replicates: usize, seed: u64) -> Result<StatisticSample> {
    if replicates == 0 {
        return Err(invalid!("need at least one replicate"));
    }
    let sampler = LimitSampler::new(cg)?;
    let values = (0..replicates as u64).map(|r| sampler.replicate(seed, r)).collect();
    StatisticSample::new(
        values,
        StatisticKind::LimitFunctional,
        SampleMetadata {
            n: None,
            replicates,
            base_seed: seed,
            description: format!("gaussian limit functional on {} grid points", cg.size()),
        },
    )
}

/// Samples `∫_0^1 |B(u)| Q'(u) du` on the interior mesh `u_i = i/(M+1)`.
pub struct BridgeOracle {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl BridgeOracle {
    pub fn new(m: &DistributionModel, mesh: usize) -> Result<Self> {
        if mesh == 0 {
            return Err(invalid!("bridge mesh needs at least one interior point"));
        }
        let h = 1.0 / (mesh + 1) as f64;
        let nodes: Vec<f64> = (1..=mesh).map(|i| i as f64 * h).collect();
        let weights = nodes
            .iter()
            .map(|&u| m.quantile_derivative(u).map(|d| d * h))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { nodes, weights })
    }

    /// One replicate via the exact sequential bridge recursion
    /// `B(u_i) | B(u_{i-1}) = b ~ N(b (1-u_i)/(1-u_{i-1}), (u_i-u_{i-1})(1-u_i)/(1-u_{i-1}))`.
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        let mut prev_u = 0.0;
        let mut b = 0.0;
        let mut total = 0.0;
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            let keep = (1.0 - u) / (1.0 - prev_u);
            let var = (u - prev_u) * keep;
            let z: f64 = rng.sample(StandardNormal);
            b = b * keep + math::sqrt(var) * z;
            total += w * b.abs();
            prev_u = u;
        }
        total
    }

    pub fn replicate(&self, seed: u64, r: u64) -> f64 {
        self.draw(&mut stream(seed, Domain::Oracle, &[r]))
    }
}

/// `R` replicates of the iid limit `∫ |B(F(t))| dt`.
pub fn brownian_bridge_oracle(
    m: &DistributionModel,
    replicates: usize,
    mesh: usize,
    seed: u64,
) -> Result<StatisticSample> {
    if replicates == 0 {
        return Err(invalid!("need at least one replicate"));
    }
    let oracle = BridgeOracle::new(m, mesh)?;
    let values = (0..replicates as u64).map(|r| oracle.replicate(seed, r)).collect();
    StatisticSample::new(
        values,
        StatisticKind::LimitFunctional,
        SampleMetadata {
            n: None,
            replicates,
            base_seed: seed,
            description: format!("brownian bridge oracle for {} on {mesh} nodes", m.label()),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn uniform() -> DistributionModel {
        DistributionModel::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn iid_covariance_examples() {
        let m = uniform();
        let g = LimitGrid::from_points(&m, alloc::vec![0.5]).unwrap();
        let cg = covariance_iid(&m, &g).unwrap();
        assert_eq!(cg.matrix, alloc::vec![0.25]);
        let g = LimitGrid::from_points(&m, alloc::vec![0.25, 0.75]).unwrap();
        let cg = covariance_iid(&m, &g).unwrap();
        assert_eq!(cg.matrix, alloc::vec![0.1875, 0.0625, 0.0625, 0.1875]);
        let g = LimitGrid::from_points(&m, alloc::vec![-1.0, 0.5]).unwrap();
        let cg = covariance_iid(&m, &g).unwrap();
        assert_eq!(&cg.matrix[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn iid_covariance_needs_no_repair() {
        for m in [uniform(), DistributionModel::exponential(1.0).unwrap(), DistributionModel::pareto(1.0, 4.0).unwrap()] {
            let g = LimitGrid::quantile_spaced(&m, 512, 0).unwrap();
            let cg = covariance_iid(&m, &g).unwrap();
            assert_eq!(cg.psd_repair, PsdRepair::default(), "{}", m.label());
        }
    }

    #[test]
    fn grid_weights_integrate_the_iid_scale() {
        // Σ ω_i √(F(1-F)) should reproduce ∫ √(F(1-F)) = π/8 for the uniform law.
        let m = uniform();
        let g = LimitGrid::quantile_spaced(&m, 256, 0).unwrap();
        let approx: f64 = g
            .points
            .iter()
            .zip(&g.weights)
            .map(|(&t, &w)| w * math::sqrt(t * (1.0 - t)))
            .sum();
        assert!((approx - core::f64::consts::PI / 8.0).abs() < 1e-4, "{approx}");
        assert!(g.outside_mass > 0.0 && g.outside_mass < 1e-3);
    }

    #[test]
    fn heavy_tail_grid_is_rejected() {
        let m = DistributionModel::pareto(1.0, 2.0).unwrap();
        assert!(LimitGrid::quantile_spaced(&m, 16, 0).is_err());
    }

    #[test]
    fn zero_variance_gives_zero_functional() {
        let cg = CovarianceGrid::from_matrix(alloc::vec![0.0], alloc::vec![1.0], alloc::vec![0.0]).unwrap();
        let s = sample_limit_functional(&cg, 100, 3).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_normal_mean_on_one_point() {
        let cg = CovarianceGrid::from_matrix(alloc::vec![0.0], alloc::vec![1.0], alloc::vec![1.0]).unwrap();
        let s = sample_limit_functional(&cg, 200_000, 5).unwrap();
        // E|N(0,1)| = √(2/π).
        assert!((s.mean() - math::SQRT_2_OVER_PI).abs() < 5e-3, "{}", s.mean());
        assert!((math::SQRT_2_OVER_PI - 0.797_885).abs() < 1e-6);
    }

    #[test]
    fn scaling_covariance_scales_replicates() {
        let m = uniform();
        let g = LimitGrid::quantile_spaced(&m, 32, 0).unwrap();
        let cg = covariance_iid(&m, &g).unwrap();
        let a = sample_limit_functional(&cg, 50, 9).unwrap();
        let b = sample_limit_functional(&cg.scaled(3.0), 50, 9).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn bridge_oracle_single_node() {
        let m = uniform();
        let s = brownian_bridge_oracle(&m, 200_000, 1, 1).unwrap();
        // 0.5 |B(1/2)| with B(1/2) ~ N(0, 1/4): mean 0.5 √(1/(2π)).
        let expected = 0.5 * math::sqrt(1.0 / (2.0 * core::f64::consts::PI));
        assert!((s.mean() - expected).abs() < 2e-3, "{} vs {expected}", s.mean());
    }

    #[test]
    fn bridge_constant_from_independent_quadrature() {
        let q = integrate(|u| math::sqrt(u * (1.0 - u)), 0.0, 1.0, QuadOptions::with_rel_tol(1e-12))
            .unwrap()
            .value;
        let constant = math::SQRT_2_OVER_PI * q;
        assert!((constant - math::sqrt(2.0 * core::f64::consts::PI) / 8.0).abs() < 1e-10);
        assert!((constant - 0.313_329).abs() < 1e-6);
    }

    #[test]
    fn bridge_oracle_rejects_tabulated_models() {
        let tab = crate::model::TabulatedCdf::from_sorted_sample(&[0.0, 1.0]).unwrap();
        assert!(brownian_bridge_oracle(&DistributionModel::Tabulated(tab), 10, 8, 0).is_err());
    }

    #[test]
    fn repair_clips_and_jitters_indefinite_matrix() {
        let mut cg = CovarianceGrid::from_matrix(
            alloc::vec![0.0, 1.0],
            alloc::vec![1.0, 1.0],
            alloc::vec![1.0, 1.2, 1.2, 1.0],
        )
        .unwrap();
        cg.repair().unwrap();
        assert_eq!(cg.psd_repair.eigenvalues_clipped, 1);
        assert!(cg.psd_repair.jitter_added > 0.0);
        assert!(cg.min_eigenvalue() >= -1e-10 * cg.trace());
        assert!(LimitSampler::new(&cg).is_ok());
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let bad = CovarianceGrid::from_matrix(alloc::vec![0.0, 1.0], alloc::vec![1.0, 1.0], alloc::vec![1.0, 0.1, 0.2, 1.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn dependent_covariance_without_lags_is_empirical_iid() {
        let m = uniform();
        let spec = ProcessSpec::Iid { model: m.clone() };
        let g = LimitGrid::quantile_spaced(&m, 8, 0).unwrap();
        let cg = covariance_dependent(&spec, &g, 0, 10_000, 4).unwrap();
        // Replay the path and build F(min) - F F by direct counting.
        let path = crate::processes::generate(&spec, 10_000, 4).unwrap();
        let f: Vec<f64> = g
            .points
            .iter()
            .map(|&t| path.values.iter().filter(|&&y| y <= t).count() as f64 / 1e4)
            .collect();
        for i in 0..8 {
            for j in 0..8 {
                let expected = f[i.min(j)] - f[i] * f[j];
                assert!((cg.at(i, j) - expected).abs() < 1e-12);
            }
        }
        assert!(covariance_dependent(&spec, &g, 1000, 10_000, 4).is_err());
    }

    #[test]
    fn dependent_covariance_of_iid_process_matches_analytic() {
        let m = uniform();
        let spec = ProcessSpec::Iid { model: m.clone() };
        let g = LimitGrid::quantile_spaced(&m, 16, 0).unwrap();
        let est = covariance_dependent(&spec, &g, 5, 1_000_000, 12).unwrap();
        let exact = covariance_iid(&m, &g).unwrap();
        let gap = est
            .matrix
            .iter()
            .zip(&exact.matrix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 5e-3, "{gap}");
    }

    #[test]
    fn covariance_serializes() {
        let m = uniform();
        let g = LimitGrid::quantile_spaced(&m, 4, 0).unwrap();
        let cg = covariance_iid(&m, &g).unwrap();
        let text = serde_json::to_string(&cg).unwrap();
        assert!(text.contains("\"source\":\"analytic_iid\""));
        let back: CovarianceGrid = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cg);
    }
}
