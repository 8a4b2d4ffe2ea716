//! One-dimensional Wasserstein-1 distances and the tail integrals that govern
//! the L¹ empirical CLT.
//!
//! On the line `d₁(P, Q) = ∫ |F_P - F_Q|`, so every distance here is an
//! integral of a CDF difference. Between two samples the integrand is a step
//! function and the integral is a finite sum. Between a sample and a model
//! each order-statistic interval contributes `∫ |i/n - F|`, which splits at
//! the model quantile `Q(i/n)` into two pieces with closed-form antiderivatives.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::model::{DistributionModel, TailClass};
use crate::quad::{integrate, integrate_piecewise, QuadOptions};

/// Relative tolerance used by the adaptive tail integrals.
pub const TAIL_REL_TOL: f64 = 1e-9;

/// Ascending, finite, non-empty sample: the order statistics behind `F_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SortedSample(Vec<f64>);

impl SortedSample {
    /// Sorts `values` after checking that they are finite.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid!("sample must contain at least one value"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid!("sample contains non-finite value {bad}"));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self(values))
    }

    /// Wraps values that are already ascending.
    pub fn from_sorted(values: Vec<f64>) -> Result<Self> {
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid!("values are not in ascending order"));
        }
        let s = Self(values);
        if s.0.is_empty() || s.0.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("sample must be non-empty and finite"));
        }
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl TryFrom<Vec<f64>> for SortedSample {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SortedSample> for Vec<f64> {
    fn from(s: SortedSample) -> Self {
        s.0
    }
}

/// A nonnegative value that may be `+∞`; the divergent case records the
/// power-law exponent of the integrand responsible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExtendedReal {
    Finite { value: f64 },
    Infinite { integrand_exponent: f64 },
}

impl ExtendedReal {
    pub fn finite(value: f64) -> Self {
        Self::Finite { value }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Self::Finite { value } => Some(value),
            Self::Infinite { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite { .. })
    }

    /// Unwraps the value or reports the divergence as a numerical error.
    pub fn require(&self, what: &str) -> Result<f64> {
        match *self {
            Self::Finite { value } => Ok(value),
            Self::Infinite { integrand_exponent } => Err(Error::Numerical(alloc::format!(
                "{what} diverges (integrand decays like t^{integrand_exponent})"
            ))),
        }
    }
}

/// `∫ |F_x - F_y|` between two empirical laws, summed exactly over the merged
/// breakpoints.
pub fn w1_two_samples(x: &SortedSample, y: &SortedSample) -> f64 {
    let (xs, ys) = (x.values(), y.values());
    let (nx, ny) = (xs.len(), ys.len());
    let scale = 1.0 / (nx as f64 * ny as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut prev = xs[0].min(ys[0]);
    while i < nx || j < ny {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        // F_x = i/nx and F_y = j/ny on [prev, next).
        let gap = (i * ny).abs_diff(j * nx) as f64;
        total += gap * (next - prev);
        while i < nx && xs[i] == next {
            i += 1;
        }
        while j < ny && ys[j] == next {
            j += 1;
        }
        prev = next;
    }
    total * scale
}

/// Mean absolute difference of matched order statistics; equals
/// [`w1_two_samples`] when both samples have the same size.
pub fn order_statistic_coupling(x: &SortedSample, y: &SortedSample) -> Result<f64> {
    if x.len() != y.len() {
        return Err(invalid!(
            "coupling needs equal sizes, got {} and {}",
            x.len(),
            y.len()
        ));
    }
    let sum: f64 = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / x.len() as f64)
}

/// `∫ |F_n - F|` between the empirical law of `s` and the model `m`.
///
/// Every model in [`DistributionModel`] has closed-form `Φ` and `Ψ`, so the
/// interior pieces and both tails are exact; `tail_tol` is validated and
/// bounds the error of the result. Returns an infinite value, not an error,
/// when the model has no first moment.
pub fn w1_sample_vs_model(
    s: &SortedSample,
    m: &DistributionModel,
    tail_tol: f64,
) -> Result<ExtendedReal> {
    if !(tail_tol > 0.0) {
        return Err(invalid!("tail tolerance must be positive, got {tail_tol}"));
    }
    if let TailClass::Power { exponent, .. } = m.tail_class() {
        if exponent <= 1.0 {
            return Ok(ExtendedReal::Infinite {
                integrand_exponent: -exponent,
            });
        }
    }
    let v = s.values();
    let n = v.len();
    let inv_n = 1.0 / n as f64;

    let mut total = m.integral_below(v[0]) + m.integral_above(v[n - 1]);
    for i in 1..n {
        let (a, b) = (v[i - 1], v[i]);
        if b <= a {
            continue;
        }
        let p = i as f64 * inv_n;
        let c = m.quantile(p).clamp(a, b);
        let (left, right) = if p <= 0.5 {
            let phi_a = m.integral_below(a);
            let phi_c = m.integral_below(c);
            let phi_b = m.integral_below(b);
            (p * (c - a) - (phi_c - phi_a), (phi_b - phi_c) - p * (b - c))
        } else {
            let q = 1.0 - p;
            let psi_a = m.integral_above(a);
            let psi_c = m.integral_above(c);
            let psi_b = m.integral_above(b);
            ((psi_a - psi_c) - q * (c - a), q * (b - c) - (psi_c - psi_b))
        };
        total += left.max(0.0) + right.max(0.0);
    }
    if !total.is_finite() {
        return Err(Error::Numerical(alloc::format!(
            "W1 against {} evaluated to {total}",
            m.label()
        )));
    }
    Ok(ExtendedReal::finite(total))
}

/// `∫_from^∞ g(t) dt` for a nonnegative `g` dominated by `P(|Y| > t)^{1/2}`.
///
/// Power tails `t^{-r}` are mapped through `t = onset · w^{-2/(r-2)}`, which
/// turns the slowly decaying integrand into a bounded one on `(0, 1]`.
pub(crate) fn integrate_sqrt_tail_like<G: Fn(f64) -> f64>(
    m: &DistributionModel,
    g: G,
    from: f64,
    rel_tol: f64,
) -> Result<ExtendedReal> {
    let opts = QuadOptions {
        rel_tol,
        abs_tol: 1e-15,
        max_subdivisions: 20_000,
    };
    let finite_piece = |a: f64, b: f64, cuts: &[f64]| -> Result<f64> {
        Ok(integrate_piecewise(&g, a, b, cuts, opts)?.value)
    };
    let from = from.max(0.0);
    let value = match m.tail_class() {
        TailClass::Bounded { max_abs } => finite_piece(from, max_abs, &m.abs_breakpoints())?,
        TailClass::Exponential { rate } => {
            // Beyond `from`, substitute t = from - 2 ln(w) / rate.
            let scale = 2.0 / rate;
            integrate(
                |w: f64| {
                    if w <= 0.0 {
                        return 0.0;
                    }
                    g(from - scale * math::ln(w)) * scale / w
                },
                0.0,
                1.0,
                opts,
            )?
            .value
        }
        TailClass::Power { exponent, onset, .. } => {
            if exponent <= 2.0 {
                return Ok(ExtendedReal::Infinite {
                    integrand_exponent: -exponent / 2.0,
                });
            }
            let start = from.max(onset);
            let head = finite_piece(from, start, &[])?;
            let k = 2.0 / (exponent - 2.0);
            let body = integrate(
                |w: f64| {
                    if w <= 0.0 {
                        return 0.0;
                    }
                    let t = start * math::powf(w, -k);
                    g(t) * k * t / w
                },
                0.0,
                1.0,
                opts,
            )?
            .value;
            head + body
        }
    };
    Ok(ExtendedReal::finite(value))
}

/// `Λ₂,₁(Y) = ∫_0^∞ √P(|Y| > t) dt`, infinite when the tail decays like
/// `t^{-r}` with `r <= 2`.
pub fn lambda21(m: &DistributionModel) -> ExtendedReal {
    match integrate_sqrt_tail_like(m, |t| math::sqrt(m.abs_tail(t)), 0.0, TAIL_REL_TOL) {
        Ok(v) => v,
        Err(_) => ExtendedReal::Infinite {
            integrand_exponent: f64::NAN,
        },
    }
}

/// `∫_0^α Q(u) / √u du` where `Q` is the quantile function of `|Y|`.
///
/// Computed as `2 ∫_0^{√α} Q(v²) dv`; when `Q(v²) ~ v^{-2/r}` near zero the
/// further substitution `v = √α · w^{r/(r-2)}` leaves a bounded integrand.
pub fn quantile_tail_integral(m: &DistributionModel, alpha: f64) -> Result<ExtendedReal> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid!("alpha must lie in (0, 1], got {alpha}"));
    }
    let power = match m.tail_class() {
        TailClass::Bounded { .. } => 1.0,
        // Q(v²) ~ 2 ln(1/v) / rate; squaring v tames the logarithm.
        TailClass::Exponential { .. } => 2.0,
        TailClass::Power { exponent, .. } => {
            if exponent <= 2.0 {
                return Ok(ExtendedReal::Infinite {
                    integrand_exponent: -(0.5 + 1.0 / exponent),
                });
            }
            exponent / (exponent - 2.0)
        }
    };
    let root = math::sqrt(alpha);
    let opts = QuadOptions {
        rel_tol: TAIL_REL_TOL,
        abs_tol: 1e-15,
        max_subdivisions: 20_000,
    };
    let ln_alpha = math::ln(alpha);
    let q = integrate(
        |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            // Work in logs: α w^{2k} underflows long before the integrand vanishes.
            let ln_w = math::ln(w);
            let ln_q = m.ln_abs_quantile(ln_alpha + 2.0 * power * ln_w);
            if ln_q == f64::NEG_INFINITY {
                return 0.0;
            }
            2.0 * root * power * math::exp(ln_q + (power - 1.0) * ln_w)
        },
        0.0,
        1.0,
        opts,
    )?;

    Ok(ExtendedReal::finite(q.value))
}

/// `∫_0^∞ √α ∧ √P(|Y| > t) dt`, the tail-side form of the quantile integral.
///
/// Left of `t* = Q(α)` the minimum is `√α`; right of it the tail wins.
pub fn truncated_sqrt_tail_integral(m: &DistributionModel, alpha: f64) -> Result<ExtendedReal> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid!("alpha must lie in (0, 1], got {alpha}"));
    }
    let cut = m.abs_quantile(alpha);
    let root = math::sqrt(alpha);
    let rest = integrate_sqrt_tail_like(
        m,
        |t| math::sqrt(m.abs_tail(t)).min(root),
        cut,
        TAIL_REL_TOL,
    )?;
    Ok(match rest {
        ExtendedReal::Finite { value } => ExtendedReal::finite(root * cut + value),
        inf => inf,
    })
}
