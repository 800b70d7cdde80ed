//! Standard-normal distribution functions.
//!
//! The central region uses the positive-term series
//! `Phi(x) = 1/2 + phi(x) * sum_n x^(2n+1) / (2n+1)!!`, the tails use the
//! Laplace continued fraction for the Mills ratio `Q(x)/phi(x)`. Upper and
//! lower tails are both evaluated without cancellation, which the inverse
//! Mills ratio and the log-survival function rely on far out in the tails.

use crate::error::{domain, Result};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this magnitude the series is used, above it the continued fraction.
const SERIES_LIMIT: f64 = 2.5;

#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `sum_n x^(2n+1) / (2n+1)!!`, so that `Phi(x) = 1/2 + phi(x) * series(x)`.
fn central_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    loop {
        k += 2.0;
        term *= x2 / k;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return sum;
        }
    }
}

/// Continued fraction `T(u) = 1/(u + 2/(u + 3/(u + ...)))` by modified Lentz.
///
/// The Mills ratio is `1/(u + T(u))` and the inverse Mills ratio is
/// `u + T(u)`. Valid for `u >= SERIES_LIMIT`.
fn mills_tail(u: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64;
        d = u + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = u + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Mills ratio `Q(u) / phi(u)` for `u >= SERIES_LIMIT`.
fn mills_ratio(u: f64) -> f64 {
    1.0 / (u + mills_tail(u))
}

/// Upper tail `Q(x) = 1 - Phi(x)`, accurate in relative terms for large `x`.
pub(crate) fn sf(x: f64) -> f64 {
    if x >= SERIES_LIMIT {
        pdf(x) * mills_ratio(x)
    } else if x <= -SERIES_LIMIT {
        1.0 - pdf(x) * mills_ratio(-x)
    } else {
        0.5 - pdf(x) * central_series(x)
    }
}

#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    sf(-x)
}

/// `ln Q(x)` without underflow for large positive `x`.
pub(crate) fn log_sf(x: f64) -> f64 {
    if x >= SERIES_LIMIT {
        -0.5 * x * x - LN_SQRT_2PI - (x + mills_tail(x)).ln()
    } else if x <= -SERIES_LIMIT {
        (-pdf(x) * mills_ratio(-x)).ln_1p()
    } else {
        sf(x).ln()
    }
}

/// Inverse Mills ratio `phi(u) / Q(u)`.
pub(crate) fn inv_mills(u: f64) -> f64 {
    if u >= SERIES_LIMIT {
        u + mills_tail(u)
    } else {
        pdf(u) / sf(u)
    }
}

/// `A(u) - u`, computed without cancellation for large `u`.
pub(crate) fn inv_mills_excess(u: f64) -> f64 {
    if u >= SERIES_LIMIT {
        mills_tail(u)
    } else {
        inv_mills(u) - u
    }
}

/// Rational initial guess for the quantile (Acklam), relative error ~1e-9.
fn quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

pub(crate) fn quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let mut x = quantile_guess(p);
    // 1 - p is exact for p >= 1/2, so the upper half is refined against the
    // survival function to keep relative accuracy in the upper tail.
    let upper = p > 0.5;
    let q = 1.0 - p;
    for _ in 0..3 {
        let err = if upper { q - sf(x) } else { cdf(x) - p };
        let step = err / pdf(x);
        // Halley correction
        let step = step / (1.0 + 0.5 * x * step);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Standard-normal CDF `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("std_normal_cdf: non-finite argument {x}"));
    }
    Ok(cdf(x))
}

/// Complementary CDF `1 - Phi(x)` with full relative accuracy in the upper tail.
pub fn std_normal_sf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("std_normal_sf: non-finite argument {x}"));
    }
    Ok(sf(x))
}

/// Inverse of [`std_normal_cdf`] on the open interval `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("std_normal_quantile: p = {p} is outside (0, 1)"));
    }
    Ok(quantile(p))
}

/// Inverse Mills ratio `A(u) = phi(u) / (1 - Phi(u))`.
///
/// Behaves like `u + 1/u` for large `u` and like `phi(u)` for very negative
/// `u`; the upper branch never forms `1 - Phi(u)` explicitly.
pub fn inverse_mills(u: f64) -> Result<f64> {
    if !u.is_finite() {
        return domain(format!("inverse_mills: non-finite argument {u}"));
    }
    Ok(inv_mills(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values at 50 significant digits (mpmath ncdf / bisection).
    const CDF_TABLE: [(f64, f64); 10] = [
        (-8.0, 6.220_960_574_271_784e-16),
        (-5.0, 2.866_515_718_791_939e-7),
        (-3.0, 1.349_898_031_630_094_5e-3),
        (-1.5, 6.680_720_126_885_807e-2),
        (-0.3, 0.382_088_577_811_047_4),
        (0.7, 0.758_036_347_776_927),
        (2.5, 0.993_790_334_674_223_9),
        (4.0, 0.999_968_328_758_166_9),
        (6.0, 0.999_999_999_013_412_4),
        (8.0, 0.999_999_999_999_999_4),
    ];

    #[test]
    fn cdf_matches_reference_table() {
        for &(x, want) in &CDF_TABLE {
            let got = std_normal_cdf(x).unwrap();
            assert!((got - want).abs() <= 1e-14, "x={x}: {got} vs {want}");
        }
        // relative accuracy in the lower tail
        let rel = (cdf(-8.0) / 6.220_960_574_271_784e-16 - 1.0).abs();
        assert!(rel < 1e-13, "{rel}");
    }

    #[test]
    fn cdf_special_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        let v = std_normal_cdf(1.959964).unwrap();
        assert!((v - 0.975).abs() < 1e-9);
        // mpmath: Phi(1.959964) = 0.97500000090355759...
        assert!((v - 0.975_000_000_903_557_6).abs() < 1e-15);
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn seam_between_series_and_fraction_is_continuous() {
        let h = 1e-9;
        for &x in &[SERIES_LIMIT, -SERIES_LIMIT] {
            let jump = sf(x - h) - sf(x + h) - 2.0 * h * pdf(x);
            assert!(jump.abs() < 1e-15, "x={x} jump={jump}");
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let q = std_normal_quantile(0.9).unwrap();
        assert!((q - 1.281_551_565_544_600_5).abs() < 1e-14, "{q}");
        let q = std_normal_quantile(0.975).unwrap();
        assert!((q - 1.959_963_984_540_054_2).abs() < 1e-14, "{q}");
        let q = std_normal_quantile(0.99).unwrap();
        assert!((q - 2.326_347_874_040_841).abs() < 1e-14, "{q}");
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_in_far_tails() {
        for &p in &[1e-300, 1e-100, 1e-20, 1e-10, 1e-3] {
            let x = quantile(p);
            let back = cdf(x);
            assert!((back / p - 1.0).abs() < 1e-12, "p={p} x={x} back={back}");
        }
    }

    #[test]
    fn inverse_mills_reference_values() {
        let table = [
            (0.0, 0.797_884_560_802_865_4),
            (1.0, 1.525_135_276_160_981_2),
            (3.0, 3.283_098_654_930_436_5),
            (10.0, 10.098_093_233_962_512),
            (40.0, 40.024_968_847_207_26),
            (-5.0, 1.486_719_940_904_905_7e-6),
        ];
        for &(u, want) in &table {
            let got = inverse_mills(u).unwrap();
            assert!((got / want - 1.0).abs() < 1e-13, "u={u}: {got} vs {want}");
        }
        let v = inverse_mills(10.0).unwrap();
        assert!(v > 10.0 && v < 10.1);
        assert!(inverse_mills(-20.0).unwrap() < 1e-80);
        assert!(inverse_mills(f64::NAN).is_err());
    }

    #[test]
    fn inverse_mills_excess_matches_difference() {
        for &u in &[2.6, 5.0, 12.0, 100.0, 1e4] {
            let ex = inv_mills_excess(u);
            // A(u) - u ~ 1/u - 2/u^3 for large u
            assert!(ex > 0.0 && ex <= 1.0 / u, "u={u} ex={ex}");
            if u >= 100.0 {
                let asym = 1.0 / u - 2.0 / u.powi(3);
                assert!((ex / asym - 1.0).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn log_sf_is_finite_far_out() {
        let v = log_sf(40.0);
        // ln Q(40) = -800 - ln(40) - ln sqrt(2 pi) - ln(1 + 1/1600 - ...)
        let approx = -800.0 - 40f64.ln() - LN_SQRT_2PI;
        assert!((v - approx).abs() < 1e-3);
        assert!((log_sf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sf(-10.0) < 0.0 && log_sf(-10.0) > -1e-22);
    }
}
