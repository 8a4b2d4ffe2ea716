//! Seeded generators for stationary sequences and calibration of reference
//! CDFs for processes whose marginal has no closed form.
//!
//! Map orbits are simulated forward from a uniform starting point. Forward
//! orbits of `T` and the time-reversed Markov chain with kernel `K` share the
//! law of the multiset of visited values, and `F_n` only sees that multiset.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::model::{DistributionModel, Interpolation, TabulatedCdf};
use crate::rng::{from_seed, StreamRng};

/// Smallest state an intermittent orbit may take.
pub const MAP_FLOOR: f64 = f64::EPSILON;
/// Largest `f64` strictly below 1.
pub const MAP_CEILING: f64 = 1.0 - f64::EPSILON / 2.0;
/// Burn-in applied to map orbits unless configured otherwise.
pub const DEFAULT_BURN_IN: u64 = 10_000;
/// Target for `Σ_{j>J} |a_j|` when the truncation is not given.
pub const DEFAULT_TRUNCATION_TAIL: f64 = 1e-8;
/// Upper limit on the automatically chosen truncation.
pub const MAX_DEFAULT_TRUNCATION: usize = 100_000;
/// Upper limit on `n · (J + 1)` multiply-adds for one linear path.
pub const MAX_LINEAR_WORK: u128 = 20_000_000_000;

fn default_burn_in() -> u64 {
    DEFAULT_BURN_IN
}

/// Coefficients `(a_j)_{j≥0}` of a causal linear process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffFamily {
    /// `a_j = ρ^j`, `0 ≤ ρ < 1`.
    Geometric { rho: f64 },
    /// `a_j = (j + offset)^{-β}`, `β > 1`, `offset > 0`.
    Polynomial { beta: f64, offset: f64 },
}

impl CoeffFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Geometric { rho } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(invalid!("geometric coefficients need 0 <= rho < 1, got {rho}"));
                }
            }
            Self::Polynomial { beta, offset } => {
                if !(beta > 1.0 && beta.is_finite()) {
                    return Err(invalid!("polynomial coefficients need beta > 1, got {beta}"));
                }
                if !(offset > 0.0 && offset.is_finite()) {
                    return Err(invalid!("polynomial offset must be positive, got {offset}"));
                }
            }
        }
        Ok(())
    }

    pub fn coeff(&self, j: usize) -> f64 {
        match *self {
            Self::Geometric { rho } => math::powf(rho, j as f64),
            Self::Polynomial { beta, offset } => math::powf(j as f64 + offset, -beta),
        }
    }

    /// Upper bound on `Σ_{j>J} |a_j|`; exact for the geometric family.
    pub fn tail_sum(&self, truncation: usize) -> f64 {
        match *self {
            Self::Geometric { rho } => math::powf(rho, truncation as f64 + 1.0) / (1.0 - rho),
            // Integral test: Σ_{j>J} (j+o)^{-β} ≤ ∫_J^∞ (x+o)^{-β} dx.
            Self::Polynomial { beta, offset } => {
                math::powf(truncation as f64 + offset, 1.0 - beta) / (beta - 1.0)
            }
        }
    }

    /// Upper bound on `Σ_{j≥0} |a_j|`.
    pub fn abs_sum_bound(&self) -> f64 {
        self.coeff(0) + self.tail_sum(0)
    }

    /// Smallest `J ≥ 1` with `tail_sum(J) < target`, capped at `cap`.
    pub fn truncation_for(&self, target: f64, cap: usize) -> usize {
        let raw = match *self {
            Self::Geometric { rho } => {
                if rho == 0.0 {
                    1.0
                } else {
                    math::ceil(math::ln(target * (1.0 - rho)) / math::ln(rho) - 1.0)
                }
            }
            Self::Polynomial { beta, offset } => {
                math::ceil(math::powf(target * (beta - 1.0), 1.0 / (1.0 - beta)) - offset)
            }
        };
        let mut j = if raw.is_finite() {
            raw.clamp(1.0, cap as f64) as usize
        } else {
            cap
        };
        // Step past rounding at the boundary.
        while j < cap && self.tail_sum(j) >= target {
            j += 1;
        }
        j
    }
}

/// Recipe for a stationary sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Iid {
        model: DistributionModel,
    },
    /// `Y_k = X_k^{-a}` along an orbit of the intermittent map `T_γ`.
    IntermittentMap {
        gamma: f64,
        observable_exponent: f64,
        #[serde(default = "default_burn_in")]
        burn_in: u64,
    },
    /// `Y_k = X_k^{-a}` along an orbit of `x ↦ 2x mod 1`.
    DoublingMap {
        observable_exponent: f64,
        #[serde(default = "default_burn_in")]
        burn_in: u64,
    },
    /// `Y_k = Σ_{j=0}^J a_j ε_{k-j}`.
    CausalLinear {
        coefficients: CoeffFamily,
        innovation: DistributionModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
}

impl ProcessSpec {
    pub fn intermittent(gamma: f64, a: f64) -> Self {
        Self::IntermittentMap {
            gamma,
            observable_exponent: a,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn doubling(a: f64) -> Self {
        Self::DoublingMap {
            observable_exponent: a,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid { model } => model.validate(),
            Self::IntermittentMap {
                gamma,
                observable_exponent,
                ..
            } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(invalid!("intermittent map needs gamma in (0, 1), got {gamma}"));
                }
                check_observable(*observable_exponent)
            }
            Self::DoublingMap {
                observable_exponent,
                ..
            } => check_observable(*observable_exponent),
            Self::CausalLinear {
                coefficients,
                innovation,
                truncation,
            } => {
                coefficients.validate()?;
                innovation.validate()?;
                if innovation.mean_abs().is_none() {
                    return Err(invalid!("linear process innovation must have a finite mean"));
                }
                if *truncation == Some(0) {
                    return Err(invalid!("truncation J must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Truncation `J` actually used for a linear process.
    pub fn linear_truncation(&self) -> Option<usize> {
        match self {
            Self::CausalLinear {
                coefficients,
                truncation,
                ..
            } => Some(truncation.unwrap_or_else(|| {
                coefficients.truncation_for(DEFAULT_TRUNCATION_TAIL, MAX_DEFAULT_TRUNCATION)
            })),
            _ => None,
        }
    }

    /// Closed-form marginal law when one is known.
    pub fn analytic_marginal(&self) -> Option<DistributionModel> {
        match self {
            Self::Iid { model } => Some(model.clone()),
            Self::DoublingMap {
                observable_exponent,
                ..
            } => DistributionModel::power_lebesgue(*observable_exponent).ok(),
            Self::CausalLinear {
                coefficients: CoeffFamily::Geometric { rho },
                innovation,
                ..
            } if *rho == 0.0 => Some(innovation.clone()),
            _ => None,
        }
    }

    /// Short name used in file headers and reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Iid { .. } => "iid",
            Self::IntermittentMap { .. } => "intermittent_map",
            Self::DoublingMap { .. } => "doubling_map",
            Self::CausalLinear { .. } => "causal_linear",
        }
    }
}

fn check_observable(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid!("observable exponent must be positive, got {a}"));
    }
    Ok(())
}

/// A realized trajectory `(Y_1, …, Y_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub values: Vec<f64>,
    pub spec: ProcessSpec,
    pub seed: u64,
    /// Bound on `E|Y_k - Y_k^{(J)}|` from truncating a linear process; 0 for maps.
    pub truncation_error_bound: f64,
    /// Intermittent states that hit exactly 0 and were redrawn.
    pub resets: u64,
}

/// One step of `T_γ`, clamped to `[MAP_FLOOR, MAP_CEILING]`.
pub fn intermittent_step(x: f64, gamma: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("intermittent map state must lie in (0, 1), got {x}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid!("gamma must lie in (0, 1), got {gamma}"));
    }
    Ok(raw_intermittent(x, gamma, math::powf(2.0, gamma)).clamp(MAP_FLOOR, MAP_CEILING))
}

#[inline]
fn raw_intermittent(x: f64, gamma: f64, two_pow_gamma: f64) -> f64 {
    if x < 0.5 {
        x * (1.0 + two_pow_gamma * math::powf(x, gamma))
    } else {
        2.0 * x - 1.0
    }
}

/// Uniform draw on the open interval `(0, 1)`.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

enum State {
    Iid(DistributionModel),
    Intermittent {
        x: f64,
        gamma: f64,
        two_pow_gamma: f64,
        a: f64,
    },
    Doubling {
        x: u128,
        bits: u64,
        left: u32,
        a: f64,
    },
    Linear {
        coeffs: Vec<f64>,
        ring: Vec<f64>,
        head: usize,
        innovation: DistributionModel,
    },
}

/// Streaming generator: yields the sequence one value at a time in bounded memory.
pub struct PathSampler {
    rng: StreamRng,
    state: State,
    resets: u64,
    truncation_error_bound: f64,
}

impl PathSampler {
    /// Validates `spec`, seeds the stream and runs any burn-in.
    pub fn new(spec: &ProcessSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = from_seed(seed);
        let mut truncation_error_bound = 0.0;
        let state = match spec {
            ProcessSpec::Iid { model } => State::Iid(model.clone()),
            ProcessSpec::IntermittentMap {
                gamma,
                observable_exponent,
                ..
            } => State::Intermittent {
                x: open_unit(&mut rng),
                gamma: *gamma,
                two_pow_gamma: math::powf(2.0, *gamma),
                a: *observable_exponent,
            },
            ProcessSpec::DoublingMap {
                observable_exponent,
                ..
            } => {
                let hi = rng.next_u64() as u128;
                let lo = rng.next_u64() as u128;
                State::Doubling {
                    x: (hi << 64) | lo,
                    bits: 0,
                    left: 0,
                    a: *observable_exponent,
                }
            }
            ProcessSpec::CausalLinear {
                coefficients,
                innovation,
                ..
            } => {
                let j = spec.linear_truncation().unwrap_or(1);
                let scale = innovation.mean_abs().unwrap_or(f64::INFINITY);
                truncation_error_bound = coefficients.tail_sum(j) * scale;
                let coeffs: Vec<f64> = (0..=j).map(|i| coefficients.coeff(i)).collect();
                let ring: Vec<f64> = (0..=j)
                    .map(|_| innovation.quantile(open_unit(&mut rng)))
                    .collect();
                State::Linear {
                    coeffs,
                    ring,
                    head: 0,
                    innovation: innovation.clone(),
                }
            }
        };
        let mut sampler = Self {
            rng,
            state,
            resets: 0,
            truncation_error_bound,
        };
        let burn_in = match spec {
            ProcessSpec::IntermittentMap { burn_in, .. } | ProcessSpec::DoublingMap { burn_in, .. } => {
                *burn_in
            }
            _ => 0,
        };
        for _ in 0..burn_in {
            sampler.advance();
        }
        Ok(sampler)
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn truncation_error_bound(&self) -> f64 {
        self.truncation_error_bound
    }

    /// Current map state in `(0, 1)`, if the process is a map orbit.
    pub fn map_state(&self) -> Option<f64> {
        match &self.state {
            State::Intermittent { x, .. } => Some(*x),
            State::Doubling { x, .. } => Some(fixed_to_unit(*x)),
            _ => None,
        }
    }

    fn advance(&mut self) {
        match &mut self.state {
            State::Intermittent {
                x,
                gamma,
                two_pow_gamma,
                ..
            } => {
                let next = raw_intermittent(*x, *gamma, *two_pow_gamma);
                *x = if next == 0.0 {
                    self.resets += 1;
                    open_unit(&mut self.rng)
                } else {
                    next.clamp(MAP_FLOOR, MAP_CEILING)
                };
            }
            State::Doubling { x, bits, left, .. } => {
                // Shifting out the top bit is x ↦ 2x mod 1; the refilled low
                // bit is the next binary digit of a uniformly random start.
                if *left == 0 {
                    *bits = self.rng.next_u64();
                    *left = 64;
                }
                *x = (*x << 1) | (*bits & 1) as u128;
                *bits >>= 1;
                *left -= 1;
            }
            State::Linear {
                ring,
                head,
                innovation,
                ..
            } => {
                ring[*head] = innovation.quantile(open_unit(&mut self.rng));
                *head = (*head + 1) % ring.len();
            }
            State::Iid(_) => {}
        }
    }

    /// Next value `Y_k`.
    pub fn next_value(&mut self) -> f64 {
        let y = match &self.state {
            State::Iid(model) => {
                let u = open_unit(&mut self.rng);
                return model.quantile(u);
            }
            State::Intermittent { x, a, .. } => math::powf(*x, -*a),
            State::Doubling { x, a, .. } => math::powf(fixed_to_unit(*x), -*a),
            State::Linear {
                coeffs, ring, head, ..
            } => {
                // ring[head - 1] is the newest innovation ε_k.
                let len = ring.len();
                let mut acc = 0.0;
                let mut idx = (*head + len - 1) % len;
                for &c in coeffs.iter() {
                    acc += c * ring[idx];
                    idx = if idx == 0 { len - 1 } else { idx - 1 };
                }
                acc
            }
        };
        self.advance();
        y
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_value();
        }
    }
}

/// Midpoint of the dyadic cell of width `2^-128` holding the state.
#[inline]
fn fixed_to_unit(x: u128) -> f64 {
    const TWO_NEG_64: f64 = 1.0 / 18_446_744_073_709_551_616.0;
    let hi = (x >> 64) as u64 as f64;
    let lo = x as u64 as f64;
    ((hi + (lo + 0.5) * TWO_NEG_64) * TWO_NEG_64).min(MAP_CEILING)
}

/// Generates `n` values of `spec` from `seed`.
pub fn generate(spec: &ProcessSpec, n: usize, seed: u64) -> Result<Path> {
    if n == 0 {
        return Err(invalid!("path length must be at least 1"));
    }
    if let Some(j) = spec.linear_truncation() {
        let work = n as u128 * (j as u128 + 1);
        if work > MAX_LINEAR_WORK {
            return Err(Error::ResourceLimit(format!(
                "linear path needs n * (J + 1) = {work} multiply-adds, limit {MAX_LINEAR_WORK}"
            )));
        }
    }
    let mut sampler = PathSampler::new(spec, seed)?;
    let mut values = alloc::vec![0.0; n];
    sampler.fill(&mut values);
    Ok(Path {
        values,
        spec: spec.clone(),
        seed,
        truncation_error_bound: sampler.truncation_error_bound(),
        resets: sampler.resets(),
    })
}

/// Tabulates the marginal CDF of `spec` on `grid` from one orbit of `length`
/// values (after the process burn-in).
///
/// Mass beyond the last grid point is lumped onto it; mass below the first
/// is assigned to it as well, so the grid should bracket the range of interest.
pub fn calibrate_reference_cdf(
    spec: &ProcessSpec,
    length: usize,
    grid: &[f64],
    seed: u64,
) -> Result<DistributionModel> {
    if grid.is_empty() {
        return Err(invalid!("calibration grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(invalid!("calibration grid must be finite and strictly increasing"));
    }
    if length == 0 {
        return Err(invalid!("calibration length must be positive"));
    }
    let mut sampler = PathSampler::new(spec, seed)?;
    let mut counts = alloc::vec![0u64; grid.len()];
    for _ in 0..length {
        let y = sampler.next_value();
        let i = grid.partition_point(|&g| g < y);
        if i < grid.len() {
            counts[i] += 1;
        }
    }
    let mut running = 0u64;
    let mut last = 0.0f64;
    let cdf: Vec<f64> = counts
        .iter()
        .map(|&c| {
            running += c;
            last = last.max(running as f64 / length as f64);
            last
        })
        .collect();
    Ok(DistributionModel::Tabulated(TabulatedCdf::new(
        grid.to_vec(),
        cdf,
        Interpolation::Linear,
    )?))
}

/// Calibrates on an automatic grid built from the order statistics of the
/// orbit itself: `points` levels spaced uniformly in the bulk and
/// geometrically into both tails, plus the orbit's minimum and maximum.
pub fn calibrate_reference_auto(
    spec: &ProcessSpec,
    length: usize,
    points: usize,
    seed: u64,
) -> Result<DistributionModel> {
    if points < 2 {
        return Err(invalid!("automatic calibration needs at least 2 grid points"));
    }
    if length < points {
        return Err(invalid!("calibration length {length} is below the grid size {points}"));
    }
    let mut sampler = PathSampler::new(spec, seed)?;
    let mut orbit = alloc::vec![0.0; length];
    sampler.fill(&mut orbit);
    orbit.sort_unstable_by(f64::total_cmp);

    let len = length as f64;
    let mut levels = Vec::with_capacity(points + 64);
    let bulk = points - points / 4;
    for i in 0..bulk {
        levels.push((i as f64 + 0.5) / bulk as f64);
    }
    // Geometric refinement toward both ends, down to one observation.
    let tail = points / 8;
    let floor = 1.0 / len;
    for i in 0..tail {
        let frac = i as f64 / tail.max(1) as f64;
        let p = math::exp(math::ln(0.5 / bulk as f64) * (1.0 - frac) + math::ln(floor) * frac);
        levels.push(p);
        levels.push(1.0 - p);
    }
    levels.sort_by(f64::total_cmp);

    let mut grid = Vec::with_capacity(levels.len() + 2);
    grid.push(orbit[0]);
    for &u in &levels {
        let idx = ((u * len) as usize).min(length - 1);
        grid.push(orbit[idx]);
    }
    grid.push(orbit[length - 1]);
    grid.dedup();
    let cdf: Vec<f64> = grid
        .iter()
        .map(|&g| orbit.partition_point(|&v| v <= g) as f64 / len)
        .collect();
    if grid.len() == 1 {
        return Err(Error::Numerical(format!(
            "calibration orbit is constant at {}",
            grid[0]
        )));
    }
    Ok(DistributionModel::Tabulated(TabulatedCdf::new(
        grid,
        cdf,
        Interpolation::Linear,
    )?))
}
