//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! The integrator repeatedly bisects the subinterval carrying the largest
//! error estimate until the summed estimate falls under
//! `max(abs_tol, rel_tol * |value|)`. Nodes never touch the interval ends,
//! so integrable endpoint singularities are tolerated; callers with strong
//! power-law singularities should still remove them by substitution first.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

// Abscissae of the 21-point Kronrod rule; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_subdivisions: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

// Heap order: largest error first.
impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn resum<'a>(segments: impl Iterator<Item = &'a Segment>) -> (f64, f64) {
    segments.fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(Error::Numerical(format!("integrand not finite at {center}")));
    }
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    for (j, (&x, &w)) in XGK[..10].iter().zip(WGK[..10].iter()).enumerate() {
        let dx = half * x;
        let (lo, hi) = (f(center - dx), f(center + dx));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand not finite near {center} +/- {dx}"
            )));
        }
        kron += w * (lo + hi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Returns [`Error::Numerical`] when the integrand is non-finite at a node or
/// the subdivision budget runs out before the tolerance is met.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Validation(format!(
            "quadrature bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        let q = integrate(f, b, a, opts)?;
        return Ok(Quadrature {
            value: -q.value,
            ..q
        });
    }

    let (value, error) = kronrod(&mut f, a, b)?;
    // Segments too narrow to bisect are parked outside the heap.
    let mut heap = BinaryHeap::with_capacity(64);
    let mut parked: Vec<Segment> = Vec::new();
    heap.push(Segment { a, b, value, error });
    let mut evaluations = 21;
    let mut total = value;
    let mut total_err = error;
    let mut count = 1usize;

    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        let Some(s) = heap.pop() else { break };
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            parked.push(s);
            continue;
        }
        if count >= opts.max_subdivisions {
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not converge: value {total}, error {total_err}"
            )));
        }
        let (v1, e1) = kronrod(&mut f, s.a, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, s.b)?;
        evaluations += 42;
        count += 1;
        heap.push(Segment { a: s.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: s.b, value: v2, error: e2 });
        total += v1 + v2 - s.value;
        total_err += e1 + e2 - s.error;
        // Resum now and then so cancellation cannot drift the running totals.
        if count.is_multiple_of(64) {
            (total, total_err) = resum(heap.iter().chain(&parked));
        }
    }
    (total, total_err) = resum(heap.iter().chain(&parked));

    Ok(Quadrature {
        value: total,
        error: total_err,
        evaluations,
    })
}

/// Integrates `f` over `[a, b]`, restarting the adaptive rule at each cut
/// point inside the interval (kinks, jumps, breakpoints of tabulated data).
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cuts: &[f64],
    opts: QuadOptions,
) -> Result<Quadrature> {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.insert(0, a);
    pts.push(b);
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    if b <= a {
        return Ok(out);
    }
    for w in pts.windows(2) {
        let q = integrate(&mut f, w[0], w[1], opts)?;
        out.value += q.value;
        out.error += q.error;
        out.evaluations += q.evaluations;
    }
    Ok(out)
}

/// Integrates `f` over `[a, +inf)` through the map `t = a + (1 - s) / s`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    integrate(
        |s| {
            let t = a + (1.0 - s) / s;
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn rule_weights_sum_to_interval_length() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-14);
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        let mut f = |x: f64| math::powf(x, 30.0) + x * x;
        let (v, _) = kronrod(&mut f, 0.0, 1.0).unwrap();
        assert!((v - (1.0 / 31.0 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn handles_sqrt_endpoint_behaviour() {
        let q = integrate(|t| math::sqrt(1.0 - t), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((q.value - 2.0 / 3.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn integrates_exponential_to_infinity() {
        let q = integrate_to_infinity(|t| math::exp(-0.5 * t), 0.0, QuadOptions::default())
            .unwrap();
        assert!((q.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = integrate(|t| t, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((q.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn piecewise_handles_kinks() {
        let q = integrate_piecewise(|t: f64| t.abs(), -1.0, 2.0, &[0.0, 5.0], QuadOptions::default())
            .unwrap();
        assert!((q.value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|_| f64::NAN, 0.0, 1.0, QuadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
