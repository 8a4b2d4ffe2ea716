//! Reference laws used as `F_Y` throughout the crate.
//!
//! Every model is supported on a half line bounded below, so both
//! `Φ(t) = ∫_{-∞}^t F` and `Ψ(t) = ∫_t^∞ (1 - F)` have closed forms. The
//! transport code uses `Φ` left of the median and `Ψ` right of it, which
//! keeps every piece of an exact W1 computation free of cancellation.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;

/// How a tabulated CDF is continued between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Piecewise linear, i.e. piecewise constant density.
    Linear,
    /// Right-continuous step function, as for an empirical CDF.
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TabulatedRaw {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    interpolation: Interpolation,
}

/// CDF known at grid points `g_0 < … < g_L`.
///
/// `F = 0` left of `g_0`, `F(g_i) = cdf[i]` for `i < L` and `F = 1` from
/// `g_L` on: mass not accounted for by `cdf[L]` sits at the last grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct TabulatedCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    interpolation: Interpolation,
    // Φ(g_i) and Ψ(g_i).
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for TabulatedCdf {
    type Error = Error;
    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        TabulatedCdf::new(raw.grid, raw.cdf, raw.interpolation)
    }
}

impl From<TabulatedCdf> for TabulatedRaw {
    fn from(t: TabulatedCdf) -> Self {
        TabulatedRaw {
            grid: t.grid,
            cdf: t.cdf,
            interpolation: t.interpolation,
        }
    }
}

impl TabulatedCdf {
    pub fn new(grid: Vec<f64>, cdf: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid!("tabulated CDF needs at least one grid point"));
        }
        if grid.len() != cdf.len() {
            return Err(invalid!(
                "grid has {} points but {} CDF values were given",
                grid.len(),
                cdf.len()
            ));
        }
        if grid.iter().chain(cdf.iter()).any(|v| !v.is_finite()) {
            return Err(invalid!("tabulated CDF contains non-finite values"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid!("tabulation grid must be strictly increasing"));
        }
        if cdf.iter().any(|&c| !(0.0..=1.0).contains(&c)) || cdf.windows(2).any(|w| w[0] > w[1])
        {
            return Err(invalid!("tabulated CDF values must be nondecreasing in [0, 1]"));
        }
        let mut t = TabulatedCdf {
            grid,
            cdf,
            interpolation,
            lower: Vec::new(),
            upper: Vec::new(),
        };
        t.build_integrals();
        Ok(t)
    }

    /// Empirical CDF of a sorted sample as a step tabulation.
    pub fn from_sorted_sample(sorted: &[f64]) -> Result<Self> {
        if sorted.is_empty() {
            return Err(invalid!("empty sample"));
        }
        let n = sorted.len() as f64;
        let mut grid = Vec::new();
        let mut cdf = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if grid.last() == Some(&v) {
                *cdf.last_mut().unwrap() = (i + 1) as f64 / n;
            } else {
                grid.push(v);
                cdf.push((i + 1) as f64 / n);
            }
        }
        Self::new(grid, cdf, Interpolation::Step)
    }

    fn build_integrals(&mut self) {
        let l = self.grid.len();
        let mut lower = Vec::with_capacity(l);
        let mut acc = 0.0;
        lower.push(0.0);
        for i in 0..l - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            acc += match self.interpolation {
                Interpolation::Linear => 0.5 * h * (self.cdf[i] + self.cdf[i + 1]),
                Interpolation::Step => h * self.cdf[i],
            };
            lower.push(acc);
        }
        let mut upper = alloc::vec![0.0; l];
        let mut acc = 0.0;
        for i in (0..l - 1).rev() {
            let h = self.grid[i + 1] - self.grid[i];
            acc += match self.interpolation {
                Interpolation::Linear => 0.5 * h * (2.0 - self.cdf[i] - self.cdf[i + 1]),
                Interpolation::Step => h * (1.0 - self.cdf[i]),
            };
            upper[i] = acc;
        }
        self.lower = lower;
        self.upper = upper;
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    fn last(&self) -> usize {
        self.grid.len() - 1
    }

    // Linear segment value on [g_i, g_{i+1}].
    fn lerp(&self, i: usize, t: f64) -> f64 {
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        (c0 + (c1 - c0) * (t - g0) / (g1 - g0)).clamp(c0, c1)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let j = self.grid.partition_point(|&g| g <= t);
        if j == 0 {
            return 0.0;
        }
        let i = j - 1;
        if i == self.last() {
            return 1.0;
        }
        match self.interpolation {
            Interpolation::Step => self.cdf[i],
            Interpolation::Linear => self.lerp(i, t),
        }
    }

    /// `P(Y < t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        let j = self.grid.partition_point(|&g| g < t);
        if j == 0 {
            return 0.0;
        }
        let i = j - 1;
        if i == self.last() {
            return 1.0;
        }
        match self.interpolation {
            Interpolation::Step => self.cdf[i],
            Interpolation::Linear => self.lerp(i, t),
        }
    }

    /// `inf { t : F(t) >= u }` for `u` in `(0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let l = self.last();
        let i = self.cdf[..l].partition_point(|&c| c < u);
        self.quantile_at(i, u)
    }

    fn quantile_at(&self, i: usize, u: f64) -> f64 {
        if i == 0 || self.interpolation == Interpolation::Step {
            return self.grid[i];
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if u <= c1 && c1 > c0 {
            let (g0, g1) = (self.grid[i - 1], self.grid[i]);
            (g0 + (u - c0) / (c1 - c0) * (g1 - g0)).clamp(g0, g1)
        } else {
            self.grid[i]
        }
    }

    /// `sup { x : F(x-) <= v }`; `+inf` once `v >= 1`.
    pub fn sup_left_at_most(&self, v: f64) -> f64 {
        if v >= 1.0 {
            return f64::INFINITY;
        }
        if v < self.cdf[0] {
            return self.grid[0];
        }
        let i = self.cdf.partition_point(|&c| c <= v) - 1;
        if i == self.last() {
            return self.grid[i];
        }
        match self.interpolation {
            Interpolation::Step => self.grid[i + 1],
            Interpolation::Linear => {
                let (g0, g1) = (self.grid[i], self.grid[i + 1]);
                let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
                (g0 + (v - c0) / (c1 - c0) * (g1 - g0)).clamp(g0, g1)
            }
        }
    }

    /// `Φ(t) = ∫_{-∞}^t F`.
    pub fn integral_below(&self, t: f64) -> f64 {
        let j = self.grid.partition_point(|&g| g <= t);
        if j == 0 {
            return 0.0;
        }
        let i = j - 1;
        if i == self.last() {
            return self.lower[i] + (t - self.grid[i]);
        }
        let h = t - self.grid[i];
        self.lower[i]
            + match self.interpolation {
                Interpolation::Step => h * self.cdf[i],
                Interpolation::Linear => 0.5 * h * (self.cdf[i] + self.lerp(i, t)),
            }
    }

    /// `Ψ(t) = ∫_t^∞ (1 - F)`.
    pub fn integral_above(&self, t: f64) -> f64 {
        let j = self.grid.partition_point(|&g| g <= t);
        if j == 0 {
            return self.upper[0] + (self.grid[0] - t);
        }
        let i = j - 1;
        if i == self.last() {
            return 0.0;
        }
        let h = self.grid[i + 1] - t;
        self.upper[i + 1]
            + match self.interpolation {
                Interpolation::Step => h * (1.0 - self.cdf[i]),
                Interpolation::Linear => 0.5 * h * (2.0 - self.lerp(i, t) - self.cdf[i + 1]),
            }
    }

    fn has_atoms(&self) -> bool {
        self.interpolation == Interpolation::Step
            || self.cdf[0] > 0.0
            || self.cdf[self.last()] < 1.0
    }

    fn max_slope(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.cdf.windows(2))
            .map(|(g, c)| (c[1] - c[0]) / (g[1] - g[0]))
            .fold(0.0, f64::max)
    }
}

/// Base law of `X` on `[0, 1]` in `Y = X^{-a}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PushforwardBase {
    Lebesgue,
    /// Linear tabulation of the CDF of `X`, i.e. a piecewise constant density.
    TabulatedDensity { cdf: TabulatedCdf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct PushforwardRaw {
    exponent: f64,
    base: PushforwardBase,
}

/// Law of `Y = X^{-a}` for `X` on `(0, 1]`; this is the marginal of the
/// observable `f(x) = x^{-a}` along an interval-map orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PushforwardRaw", into = "PushforwardRaw")]
pub struct Pushforward {
    exponent: f64,
    base: PushforwardBase,
    // H(g_i) = ∫_0^{g_i} G(x) a x^{-a-1} dx over the base knots; empty for Lebesgue.
    knots_h: Vec<f64>,
}

impl TryFrom<PushforwardRaw> for Pushforward {
    type Error = Error;
    fn try_from(raw: PushforwardRaw) -> Result<Self> {
        Pushforward::new(raw.exponent, raw.base)
    }
}

impl From<Pushforward> for PushforwardRaw {
    fn from(p: Pushforward) -> Self {
        PushforwardRaw {
            exponent: p.exponent,
            base: p.base,
        }
    }
}

impl Pushforward {
    pub fn new(exponent: f64, base: PushforwardBase) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(invalid!("pushforward exponent must be positive, got {exponent}"));
        }
        let mut p = Pushforward {
            exponent,
            base,
            knots_h: Vec::new(),
        };
        if let PushforwardBase::TabulatedDensity { cdf } = &p.base {
            if cdf.interpolation != Interpolation::Linear {
                return Err(invalid!("pushforward base must use linear interpolation"));
            }
            let (g0, gl) = (cdf.grid[0], cdf.grid[cdf.last()]);
            if g0 < 0.0 || gl > 1.0 {
                return Err(invalid!("pushforward base must live on [0, 1]"));
            }
            if g0 == 0.0 && cdf.cdf[0] > 0.0 {
                return Err(invalid!("pushforward base may not put mass at 0"));
            }
            if p.finite_mean() {
                let mut h = Vec::with_capacity(cdf.grid.len());
                let mut acc = 0.0;
                h.push(0.0);
                for i in 0..cdf.last() {
                    acc += p.segment_h(i, cdf.grid[i], cdf.grid[i + 1]);
                    h.push(acc);
                }
                p.knots_h = h;
            }
        }
        Ok(p)
    }

    pub fn lebesgue(exponent: f64) -> Result<Self> {
        Self::new(exponent, PushforwardBase::Lebesgue)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn base(&self) -> &PushforwardBase {
        &self.base
    }

    fn finite_mean(&self) -> bool {
        match &self.base {
            PushforwardBase::Lebesgue => self.exponent < 1.0,
            PushforwardBase::TabulatedDensity { cdf } => {
                self.exponent < 1.0 || self.zero_floor(cdf) > 0.0
            }
        }
    }

    // sup{x : G(x) = 0}: Y is bounded by its (-a)-th power when positive.
    fn zero_floor(&self, cdf: &TabulatedCdf) -> f64 {
        if cdf.cdf[0] > 0.0 {
            return cdf.grid[0];
        }
        let first = cdf.cdf.partition_point(|&c| c <= 0.0);
        cdf.grid[first.saturating_sub(1).min(cdf.last())]
    }

    // ∫_{x0}^{x1} G(x) a x^{-a-1} dx with G linear on segment i.
    fn segment_h(&self, i: usize, x0: f64, x1: f64) -> f64 {
        let PushforwardBase::TabulatedDensity { cdf } = &self.base else {
            unreachable!()
        };
        let a = self.exponent;
        let (g0, g1) = (cdf.grid[i], cdf.grid[i + 1]);
        let (c0, c1) = (cdf.cdf[i], cdf.cdf[i + 1]);
        let beta = (c1 - c0) / (g1 - g0);
        let alpha = c0 - beta * g0;
        let inv_pow = |x: f64| if x == 0.0 { f64::INFINITY } else { math::powf(x, -a) };
        let const_part = if alpha == 0.0 {
            0.0
        } else {
            alpha * (inv_pow(x0) - inv_pow(x1))
        };
        let lin_part = if beta == 0.0 {
            0.0
        } else if (a - 1.0).abs() < 1e-12 {
            beta * math::ln(x1 / x0)
        } else {
            beta * a / (1.0 - a) * (math::powf(x1, 1.0 - a) - math::powf(x0, 1.0 - a))
        };
        const_part + lin_part
    }

    // H(θ) = ∫_0^θ G(x) a x^{-a-1} dx.
    fn h(&self, theta: f64) -> f64 {
        let PushforwardBase::TabulatedDensity { cdf } = &self.base else {
            unreachable!()
        };
        let j = cdf.grid.partition_point(|&g| g <= theta);
        if j == 0 {
            return 0.0;
        }
        let i = j - 1;
        if i == cdf.last() {
            let gl = cdf.grid[i];
            return self.knots_h[i]
                + (math::powf(gl, -self.exponent) - math::powf(theta, -self.exponent));
        }
        self.knots_h[i] + self.segment_h(i, cdf.grid[i], theta)
    }

    fn theta(&self, t: f64) -> f64 {
        math::powf(t, -1.0 / self.exponent)
    }
}

/// Analytic reference law `F_Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionModel {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    /// `P(Y > t) = (scale / t)^exponent` for `t >= scale`.
    ParetoTail { scale: f64, exponent: f64 },
    PowerPushforward(Pushforward),
    Tabulated(TabulatedCdf),
}

/// Asymptotic class of `t ↦ P(|Y| > t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailClass {
    /// `|Y| <= max_abs` almost surely.
    Bounded { max_abs: f64 },
    /// `P(|Y| > t) = exp(-rate t)`.
    Exponential { rate: f64 },
    /// `P(|Y| > t) <= coeff * t^{-exponent}` for `t >= onset`, sharp in the exponent.
    Power { exponent: f64, coeff: f64, onset: f64 },
}

impl DistributionModel {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = Self::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let m = Self::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn pareto(scale: f64, exponent: f64) -> Result<Self> {
        let m = Self::ParetoTail { scale, exponent };
        m.validate()?;
        Ok(m)
    }

    /// `Y = U^{-a}` with `U` uniform on `(0, 1)`.
    pub fn power_lebesgue(exponent: f64) -> Result<Self> {
        Ok(Self::PowerPushforward(Pushforward::lebesgue(exponent)?))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, msg: &str| if c { Ok(()) } else { Err(invalid!("{msg}")) };
        match *self {
            Self::Uniform { lo, hi } => ok(
                lo.is_finite() && hi.is_finite() && lo < hi,
                "uniform bounds must be finite with lo < hi",
            ),
            Self::Exponential { rate } => {
                ok(rate > 0.0 && rate.is_finite(), "exponential rate must be positive")
            }
            Self::ParetoTail { scale, exponent } => ok(
                scale > 0.0 && scale.is_finite() && exponent > 0.0 && exponent.is_finite(),
                "Pareto scale and exponent must be positive",
            ),
            // Constructors of the inner types validate.
            Self::PowerPushforward(_) | Self::Tabulated(_) => Ok(()),
        }
    }

    /// Pareto parameters when the model is an exact power law.
    fn pareto_params(&self) -> Option<(f64, f64)> {
        match self {
            Self::ParetoTail { scale, exponent } => Some((*scale, *exponent)),
            Self::PowerPushforward(p) if p.base == PushforwardBase::Lebesgue => {
                Some((1.0, 1.0 / p.exponent))
            }
            _ => None,
        }
    }

    /// Smallest and largest points of the support (`±inf` when unbounded).
    pub fn support(&self) -> (f64, f64) {
        if let Some((c, _)) = self.pareto_params() {
            return (c, f64::INFINITY);
        }
        match self {
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Exponential { .. } => (0.0, f64::INFINITY),
            Self::Tabulated(t) => (t.grid[0], t.grid[t.last()]),
            Self::PowerPushforward(p) => match &p.base {
                PushforwardBase::TabulatedDensity { cdf } => {
                    let top = cdf.grid[cdf.last()];
                    let floor = p.zero_floor(cdf);
                    let hi = if floor > 0.0 {
                        math::powf(floor, -p.exponent)
                    } else {
                        f64::INFINITY
                    };
                    (math::powf(top, -p.exponent), hi)
                }
                PushforwardBase::Lebesgue => unreachable!(),
            },
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if let Some((c, r)) = self.pareto_params() {
            return if t < c { 0.0 } else { 1.0 - math::powf(c / t, r) };
        }
        match self {
            Self::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -math::expm1(-rate * t)
                }
            }
            Self::Tabulated(tab) => tab.cdf(t),
            Self::PowerPushforward(p) => {
                if t <= 0.0 {
                    return 0.0;
                }
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                1.0 - cdf.cdf_left(p.theta(t))
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// `P(Y < t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match self {
            Self::Tabulated(tab) => tab.cdf_left(t),
            Self::PowerPushforward(p) if self.pareto_params().is_none() => {
                if t <= 0.0 {
                    return 0.0;
                }
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                1.0 - cdf.cdf(p.theta(t))
            }
            _ => self.cdf(t),
        }
    }

    /// `1 - F(t)`, computed without cancellation in the upper tail.
    pub fn survival(&self, t: f64) -> f64 {
        if let Some((c, r)) = self.pareto_params() {
            return if t < c { 1.0 } else { math::powf(c / t, r) };
        }
        match self {
            Self::Uniform { lo, hi } => ((hi - t) / (hi - lo)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    1.0
                } else {
                    math::exp(-rate * t)
                }
            }
            Self::Tabulated(tab) => 1.0 - tab.cdf(t),
            Self::PowerPushforward(p) => {
                if t <= 0.0 {
                    return 1.0;
                }
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                cdf.cdf_left(p.theta(t))
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// Generalised inverse `inf { t : F(t) >= u }` for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if let Some((c, r)) = self.pareto_params() {
            return c * math::powf(1.0 - u, -1.0 / r);
        }
        match self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Exponential { rate } => -libm::log1p(-u) / rate,
            Self::Tabulated(tab) => tab.quantile(u),
            Self::PowerPushforward(_) => self.upper_quantile(1.0 - u),
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// `inf { t : 1 - F(t) <= v }` for `v` in `(0, 1)`; accurate for tiny `v`.
    pub fn upper_quantile(&self, v: f64) -> f64 {
        if let Some((c, r)) = self.pareto_params() {
            return c * math::powf(v, -1.0 / r);
        }
        match self {
            Self::Uniform { lo, hi } => hi - v * (hi - lo),
            Self::Exponential { rate } => -math::ln(v) / rate,
            Self::Tabulated(tab) => tab.quantile(1.0 - v),
            Self::PowerPushforward(p) => {
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                let x = cdf.sup_left_at_most(v).min(1.0);
                math::powf(x, -p.exponent)
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// `P(|Y| > t)`.
    pub fn abs_tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        (self.survival(t) + self.cdf_left(-t)).min(1.0)
    }

    /// `ln Q_Y(e^{ln_u})`, usable when `e^{ln_u}` underflows: power tails
    /// switch to their exact `(coeff/u)^{1/r}` form far out in the tail.
    pub fn ln_abs_quantile(&self, ln_u: f64) -> f64 {
        const DIRECT: f64 = -600.0;
        if ln_u > DIRECT {
            return math::ln(self.abs_quantile(math::exp(ln_u)));
        }
        if let Some((c, r)) = self.pareto_params() {
            return math::ln(c) - ln_u / r;
        }
        match self {
            Self::Exponential { rate } => math::ln(-ln_u / rate),
            Self::PowerPushforward(p) => match &p.base {
                // In the power-tail case the base CDF starts as G(x) = βx,
                // so P(Y > t) = β t^{-1/a} beyond the first knot.
                PushforwardBase::TabulatedDensity { cdf } if self.support().1.is_infinite() => {
                    let beta = cdf.cdf[1] / cdf.grid[1];
                    p.exponent * (math::ln(beta) - ln_u)
                }
                _ => math::ln(self.abs_quantile(f64::MIN_POSITIVE)),
            },
            _ => math::ln(self.abs_quantile(f64::MIN_POSITIVE)),
        }
    }

    /// Quantile function `Q_Y` of `|Y|`: the cadlag inverse of `t ↦ P(|Y| > t)`.
    pub fn abs_quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let (lo, hi) = self.support();
        if lo >= 0.0 {
            return self.upper_quantile(u).max(0.0);
        }
        match *self {
            Self::Uniform { lo, hi } => {
                let w = hi - lo;
                if hi <= 0.0 {
                    return -lo - u * w;
                }
                let (near, far) = if -lo < hi { (-lo, hi) } else { (hi, -lo) };
                if u >= (far - near) / w {
                    0.5 * w * (1.0 - u)
                } else {
                    far - u * w
                }
            }
            _ => {
                // Monotone bisection on [0, max|support|].
                let mut a = 0.0;
                let mut b = lo.abs().max(hi.abs());
                if self.abs_tail(a) <= u {
                    return 0.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.abs_tail(mid) <= u {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                b
            }
        }
    }

    /// `Φ(t) = ∫_{-∞}^t F(s) ds`.
    pub fn integral_below(&self, t: f64) -> f64 {
        if let Some((c, r)) = self.pareto_params() {
            if t < c {
                return 0.0;
            }
            if r <= 1.0 {
                // Only differences of Φ are ever needed; Ψ is infinite here.
                return f64::NAN;
            }
            return (t - c) - c / (r - 1.0) + self.integral_above(t);
        }
        match *self {
            Self::Uniform { lo, hi } => {
                let w = hi - lo;
                if t <= lo {
                    0.0
                } else if t < hi {
                    (t - lo) * (t - lo) / (2.0 * w)
                } else {
                    0.5 * w + (t - hi)
                }
            }
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    t + math::expm1(-rate * t) / rate
                }
            }
            Self::Tabulated(ref tab) => tab.integral_below(t),
            Self::PowerPushforward(_) => {
                let floor = self.support().0;
                if t <= floor {
                    0.0
                } else {
                    (t - floor) - (self.integral_above(floor) - self.integral_above(t))
                }
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// `Ψ(t) = ∫_t^∞ (1 - F(s)) ds`; infinite for infinite-mean models.
    pub fn integral_above(&self, t: f64) -> f64 {
        if let Some((c, r)) = self.pareto_params() {
            if r <= 1.0 {
                return f64::INFINITY;
            }
            return if t < c {
                (c - t) + c / (r - 1.0)
            } else {
                c * math::powf(c / t, r - 1.0) / (r - 1.0)
            };
        }
        match *self {
            Self::Uniform { lo, hi } => {
                let w = hi - lo;
                if t >= hi {
                    0.0
                } else if t > lo {
                    (hi - t) * (hi - t) / (2.0 * w)
                } else {
                    0.5 * w + (lo - t)
                }
            }
            Self::Exponential { rate } => {
                if t < 0.0 {
                    -t + 1.0 / rate
                } else {
                    math::exp(-rate * t) / rate
                }
            }
            Self::Tabulated(ref tab) => tab.integral_above(t),
            Self::PowerPushforward(ref p) => {
                if !p.finite_mean() {
                    return f64::INFINITY;
                }
                let floor = self.support().0;
                if t < floor {
                    (floor - t) + p.h(p.theta(floor))
                } else {
                    p.h(p.theta(t))
                }
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    pub fn tail_class(&self) -> TailClass {
        if let Some((c, r)) = self.pareto_params() {
            return TailClass::Power {
                exponent: r,
                coeff: math::powf(c, r),
                onset: c,
            };
        }
        match self {
            Self::Uniform { lo, hi } => TailClass::Bounded {
                max_abs: lo.abs().max(hi.abs()),
            },
            Self::Exponential { rate } => TailClass::Exponential { rate: *rate },
            Self::Tabulated(t) => TailClass::Bounded {
                max_abs: t.grid[0].abs().max(t.grid[t.last()].abs()),
            },
            Self::PowerPushforward(p) => {
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                let floor = p.zero_floor(cdf);
                if floor > 0.0 {
                    return TailClass::Bounded {
                        max_abs: math::powf(floor, -p.exponent),
                    };
                }
                let l = cdf.last();
                let mut coeff = 1.0 / cdf.grid[l];
                for i in 1..=l {
                    coeff = coeff.max(cdf.cdf[i] / cdf.grid[i]);
                }
                TailClass::Power {
                    exponent: 1.0 / p.exponent,
                    coeff,
                    onset: 1.0,
                }
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    pub fn has_finite_mean(&self) -> bool {
        !matches!(self.tail_class(), TailClass::Power { exponent, .. } if exponent <= 1.0)
    }

    /// `E|Y|`, or `None` when it is infinite.
    pub fn mean_abs(&self) -> Option<f64> {
        if !self.has_finite_mean() {
            return None;
        }
        Some(self.integral_above(0.0) + self.integral_below(0.0))
    }

    /// Supremum of the density, when the law has one that is bounded.
    pub fn density_bound(&self) -> Option<f64> {
        if let Some((c, r)) = self.pareto_params() {
            return Some(r / c);
        }
        match self {
            Self::Uniform { lo, hi } => Some(1.0 / (hi - lo)),
            Self::Exponential { rate } => Some(*rate),
            Self::Tabulated(t) => (!t.has_atoms()).then(|| t.max_slope()),
            Self::PowerPushforward(p) => {
                let PushforwardBase::TabulatedDensity { cdf } = &p.base else {
                    unreachable!()
                };
                let top = cdf.grid[cdf.last()];
                // f_Y(t) = g(t^{-1/a}) t^{-1/a-1} / a with t >= top^{-a}.
                (!cdf.has_atoms())
                    .then(|| cdf.max_slope() * math::powf(top, 1.0 + p.exponent) / p.exponent)
            }
            Self::ParetoTail { .. } => unreachable!(),
        }
    }

    /// Derivative of the quantile function, for models where it exists on `(0, 1)`.
    pub fn quantile_derivative(&self, u: f64) -> Result<f64> {
        if let Some((c, r)) = self.pareto_params() {
            return Ok(c / r * math::powf(1.0 - u, -1.0 / r - 1.0));
        }
        match self {
            Self::Uniform { lo, hi } => Ok(hi - lo),
            Self::Exponential { rate } => Ok(1.0 / (rate * (1.0 - u))),
            _ => Err(Error::Validation(format!(
                "quantile of {} is not differentiable on (0, 1)",
                self.label()
            ))),
        }
    }

    /// Kinks of `t ↦ P(|Y| > t)` on `[0, max|Y|]` for bounded models.
    pub fn abs_breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        match self {
            Self::Uniform { lo, hi } => {
                pts.extend([lo.abs(), hi.abs()]);
                if *lo < 0.0 && *hi > 0.0 {
                    pts.push(0.0);
                }
            }
            Self::Tabulated(t) => pts.extend(t.grid.iter().map(|g| g.abs())),
            _ => {}
        }
        pts.push(0.0);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        pts
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Exponential { .. } => "exponential",
            Self::ParetoTail { .. } => "pareto_tail",
            Self::PowerPushforward(_) => "power_pushforward",
            Self::Tabulated(_) => "tabulated",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};
    use alloc::vec;

    fn models() -> Vec<DistributionModel> {
        let base = TabulatedCdf::new(
            vec![0.0, 0.25, 0.6, 1.0],
            vec![0.0, 0.4, 0.7, 1.0],
            Interpolation::Linear,
        )
        .unwrap();
        vec![
            DistributionModel::uniform(0.0, 1.0).unwrap(),
            DistributionModel::uniform(-1.0, 3.0).unwrap(),
            DistributionModel::exponential(1.5).unwrap(),
            DistributionModel::pareto(2.0, 3.0).unwrap(),
            DistributionModel::power_lebesgue(0.25).unwrap(),
            DistributionModel::PowerPushforward(
                Pushforward::new(0.3, PushforwardBase::TabulatedDensity { cdf: base }).unwrap(),
            ),
            DistributionModel::Tabulated(
                TabulatedCdf::new(
                    vec![-1.0, 0.0, 2.0, 5.0],
                    vec![0.1, 0.3, 0.8, 0.9],
                    Interpolation::Linear,
                )
                .unwrap(),
            ),
            DistributionModel::Tabulated(
                TabulatedCdf::new(vec![0.0, 1.0, 4.0], vec![0.2, 0.5, 1.0], Interpolation::Step)
                    .unwrap(),
            ),
        ]
    }

    #[test]
    fn quantile_is_cadlag_inverse_of_cdf() {
        for m in models() {
            for k in 1..200 {
                let u = k as f64 / 200.0;
                let q = m.quantile(u);
                assert!(m.cdf(q) >= u - 1e-12, "{}: F(Q({u})) < u", m.label());
                let below = q - 1e-7 * (1.0 + q.abs());
                assert!(m.cdf(below) < u, "{}: F(Q({u}) - eps) >= u", m.label());
            }
        }
    }

    #[test]
    fn cdf_is_monotone_with_correct_limits() {
        for m in models() {
            let (lo, hi) = m.support();
            let start = lo - 1.0;
            let stop = if hi.is_finite() { hi + 1.0 } else { lo + 1e6 };
            let mut prev = 0.0;
            for k in 0..=2000 {
                let t = start + (stop - start) * k as f64 / 2000.0;
                let f = m.cdf(t);
                assert!(f >= prev - 1e-15 && (0.0..=1.0).contains(&f));
                prev = f;
            }
            assert_eq!(m.cdf(start), 0.0);
            assert!(1.0 - m.cdf(stop) < 1e-3, "{}", m.label());
        }
    }

    #[test]
    fn survival_matches_one_minus_cdf() {
        for m in models() {
            for k in 0..100 {
                let t = -2.0 + 0.1 * k as f64;
                assert!((m.survival(t) - (1.0 - m.cdf(t))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        let opts = QuadOptions::with_rel_tol(1e-12);
        for m in models() {
            let (lo, _) = m.support();
            for &(a, b) in &[(lo - 0.5, lo + 0.7), (lo + 0.2, lo + 3.1), (lo + 1.0, lo + 9.0)] {
                let mut exact_cdf = 0.0;
                let mut exact_sur = 0.0;
                // Split at every knot so the quadrature sees smooth pieces.
                let mut pts: Vec<f64> = match &m {
                    DistributionModel::Tabulated(t) => t.grid().to_vec(),
                    DistributionModel::PowerPushforward(p) => match p.base() {
                        PushforwardBase::TabulatedDensity { cdf } => cdf
                            .grid()
                            .iter()
                            .filter(|&&g| g > 0.0)
                            .map(|&g| math::powf(g, -p.exponent()))
                            .collect(),
                        _ => vec![],
                    },
                    _ => vec![lo],
                };
                pts.extend([a, b]);
                pts.retain(|&p| p >= a && p <= b);
                pts.sort_by(|x, y| x.total_cmp(y));
                pts.dedup();
                for w in pts.windows(2) {
                    exact_cdf += integrate(|t| m.cdf(t), w[0], w[1], opts).unwrap().value;
                    exact_sur += integrate(|t| m.survival(t), w[0], w[1], opts).unwrap().value;
                }
                let phi = m.integral_below(b) - m.integral_below(a);
                let psi = m.integral_above(a) - m.integral_above(b);
                assert!((phi - exact_cdf).abs() < 1e-9, "{} Φ: {phi} vs {exact_cdf}", m.label());
                assert!((psi - exact_sur).abs() < 1e-9, "{} Ψ: {psi} vs {exact_sur}", m.label());
            }
        }
    }

    #[test]
    fn abs_quantile_inverts_abs_tail() {
        for m in models() {
            for k in 1..100 {
                let u = k as f64 / 100.0;
                let q = m.abs_quantile(u);
                assert!(m.abs_tail(q) <= u + 1e-12, "{} u={u}", m.label());
                if q > 1e-9 {
                    assert!(m.abs_tail(q * (1.0 - 1e-7) - 1e-12) > u - 1e-12, "{}", m.label());
                }
            }
        }
    }

    #[test]
    fn pareto_abs_quantile_is_power() {
        let m = DistributionModel::pareto(1.0, 3.0).unwrap();
        assert!((m.abs_quantile(0.125) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_lebesgue_is_pareto() {
        let m = DistributionModel::power_lebesgue(0.25).unwrap();
        for &t in &[1.0, 1.5, 3.0, 10.0] {
            assert!((m.cdf(t) - (1.0 - math::powf(t, -4.0))).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_mean_is_detected() {
        assert!(!DistributionModel::pareto(1.0, 1.0).unwrap().has_finite_mean());
        assert!(!DistributionModel::power_lebesgue(1.5).unwrap().has_finite_mean());
        assert!(DistributionModel::pareto(1.0, 1.5).unwrap().has_finite_mean());
    }

    #[test]
    fn mean_abs_closed_forms() {
        let e = DistributionModel::exponential(2.0).unwrap();
        assert!((e.mean_abs().unwrap() - 0.5).abs() < 1e-15);
        let u = DistributionModel::uniform(-1.0, 3.0).unwrap();
        // E|Y| = (1/4)(1/2 + 9/2)
        assert!((u.mean_abs().unwrap() - 1.25).abs() < 1e-15);
        let p = DistributionModel::pareto(1.0, 3.0).unwrap();
        assert!((p.mean_abs().unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DistributionModel::uniform(1.0, 1.0).is_err());
        assert!(DistributionModel::exponential(0.0).is_err());
        assert!(DistributionModel::pareto(-1.0, 2.0).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 0.0], vec![0.1, 0.2], Interpolation::Linear).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.5, 0.2], Interpolation::Linear).is_err());
    }

    #[test]
    fn json_round_trip_rebuilds_tables() {
        for m in models() {
            let text = serde_json::to_string(&m).unwrap();
            let back: DistributionModel = serde_json::from_str(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.integral_above(0.3), m.integral_above(0.3));
        }
        let bad = r#"{"kind":"tabulated","grid":[1.0,0.0],"cdf":[0.5,1.0],"interpolation":"step"}"#;
        assert!(serde_json::from_str::<DistributionModel>(bad).is_err());
    }
}
