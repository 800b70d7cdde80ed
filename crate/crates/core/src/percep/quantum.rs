//! Homodyne-sampled classification and per-pattern reliabilities.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, stabilities, PatternSet, WeightVector, TIE_TOLERANCE};
use crate::capacity::TheoryParams;
use crate::error::{domain, Error, Result};
use crate::specfun::{sf, std_normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Correct,
    Incorrect,
    /// The measurement fell inside `(-kappa |w|, kappa |w|)`.
    Abstain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityVector {
    pub r: Vec<f64>,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain(format!("sigma must be positive and finite, got {sigma}"));
    }
    Ok(())
}

/// Probability that a homodyne measurement classifies a pattern of
/// stability `delta` correctly at threshold `kappa`: `Phi((delta - kappa) / sigma)`.
pub fn reliability(delta: f64, kappa: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    std_normal_sf((kappa - delta) / sigma)
}

pub fn reliabilities(
    w: &WeightVector,
    ps: &PatternSet,
    kappa: f64,
    sigma: f64,
) -> Result<ReliabilityVector> {
    check_sigma(sigma)?;
    let d = stabilities(w, ps)?;
    let r = d
        .deltas
        .iter()
        .map(|&delta| reliability(delta, kappa, sigma))
        .collect::<Result<_>>()?;
    Ok(ReliabilityVector { r })
}

/// Samples `s ~ N(w . x, |w|^2 sigma^2)` and reads out `+1` above
/// `kappa |w|`, `-1` below `-kappa |w|`, and nothing in between.
pub fn classify_quantum<R: Rng + ?Sized>(
    w: &WeightVector,
    x: &[f64],
    xi: i8,
    kappa: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Outcome> {
    check_sigma(sigma)?;
    if x.len() != w.n() {
        return Err(Error::Dimension { expected: w.n(), found: x.len() });
    }
    if xi != 1 && xi != -1 {
        return domain("label must be +1 or -1");
    }
    let norm = w.norm();
    if norm == 0.0 {
        return domain("classification is undefined for the zero weight vector");
    }
    let z: f64 = rng.sample(StandardNormal);
    let s = dot(w.as_slice(), x) + norm * sigma * z;
    let threshold = kappa * norm;
    let class = if s >= threshold {
        1
    } else if s <= -threshold {
        -1
    } else {
        return Ok(Outcome::Abstain);
    };
    Ok(if class == xi { Outcome::Correct } else { Outcome::Incorrect })
}

/// Whether every pattern is classified correctly with probability at
/// least `1 - epsilon`.
///
/// The comparison `R >= 1 - epsilon` is made on the complement,
/// `Phi(-(Delta - kappa) / sigma) <= epsilon`, which keeps full relative
/// precision; ties within the stability tolerance count as satisfied.
pub fn quantum_feasible(ps: &PatternSet, w: &WeightVector, params: &TheoryParams) -> Result<bool> {
    check_sigma(params.sigma())?;
    let d = stabilities(w, ps)?;
    let (kappa, sigma, eps) = (params.kappa(), params.sigma(), params.epsilon());
    Ok(d
        .deltas
        .iter()
        .all(|&delta| sf((delta - kappa + TIE_TOLERANCE) / sigma) <= eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::effective_stability;
    use crate::rng;
    use crate::specfun::std_normal_quantile;

    fn freq(k: usize, n: usize) -> f64 {
        k as f64 / n as f64
    }

    #[test]
    fn reliability_values() {
        assert_eq!(reliability(0.3, 0.3, 0.7).unwrap(), 0.5);
        let (kappa, sigma, eps) = (0.4, 0.25, 0.1);
        let delta = kappa + sigma * std_normal_quantile(1.0 - eps).unwrap();
        assert!((reliability(delta, kappa, sigma).unwrap() - 0.9).abs() < 1e-15);
        assert!(reliability(1.0, 0.0, 0.0).is_err());
        assert!(reliability(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn classical_limit_is_deterministic() {
        let w = WeightVector::new(vec![1.0, 2.0, -0.5]).unwrap();
        let x = [0.3, 0.1, 0.2];
        let mut r = rng::stream(1, &[]);
        for _ in 0..10_000 {
            assert_eq!(classify_quantum(&w, &x, 1, 0.0, 1e-12, &mut r).unwrap(), Outcome::Correct);
        }
    }

    #[test]
    fn abstention_window_frequency() {
        let (kappa, sigma) = (0.3, 0.5);
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let x = [1.0, -1.0];
        let mut r = rng::stream(2, &[]);
        let n = 100_000;
        let k = (0..n)
            .filter(|_| classify_quantum(&w, &x, 1, kappa, sigma, &mut r).unwrap() == Outcome::Abstain)
            .count();
        let want = 1.0 - 2.0 * sf(kappa / sigma);
        let sd = (want * (1.0 - want) / n as f64).sqrt();
        assert!((freq(k, n) - want).abs() <= 4.0 * sd, "{} vs {want}", freq(k, n));
    }

    #[test]
    fn correct_frequency_matches_reliability() {
        let (kappa, sigma) = (0.2, 0.4);
        let w = WeightVector::new(vec![0.6, -0.8, 0.3]).unwrap();
        let x = [0.5, -0.2, 0.1];
        let ps = PatternSet::new(vec![x.to_vec()], vec![1], super::super::PatternDistribution::Gaussian, 0).unwrap();
        let delta = stabilities(&w, &ps).unwrap().deltas[0];
        let want = reliability(delta, kappa, sigma).unwrap();
        let mut r = rng::stream(3, &[]);
        let n = 100_000;
        let k = (0..n)
            .filter(|_| classify_quantum(&w, &x, 1, kappa, sigma, &mut r).unwrap() == Outcome::Correct)
            .count();
        let sd = (want * (1.0 - want) / n as f64).sqrt();
        assert!((freq(k, n) - want).abs() <= 4.0 * sd, "{} vs {want}", freq(k, n));
    }

    #[test]
    fn feasibility_matches_effective_threshold() {
        let ps = super::super::generate_patterns(6, 5, super::super::PatternDistribution::Gaussian, 4).unwrap();
        let mut r = rng::stream(4, &[]);
        let mut checked = 0;
        for _ in 0..2000 {
            let w = WeightVector::new((0..6).map(|_| r.sample(StandardNormal)).collect()).unwrap();
            let params = TheoryParams::new(r.gen_range(0.0..0.5), r.gen_range(0.01..0.49), r.gen_range(0.01..1.0)).unwrap();
            let kt = effective_stability(&params);
            let d = stabilities(&w, &ps).unwrap();
            if d.deltas.iter().any(|&x| (x - kt).abs() <= 1e-12) {
                continue;
            }
            assert_eq!(quantum_feasible(&ps, &w, &params).unwrap(), d.all_at_least(kt));
            checked += 1;
        }
        assert!(checked > 1900);
    }

    #[test]
    fn half_error_budget_is_classical() {
        let ps = super::super::generate_patterns(5, 3, super::super::PatternDistribution::Gaussian, 8).unwrap();
        let mut r = rng::stream(8, &[]);
        for _ in 0..500 {
            let w = WeightVector::new((0..5).map(|_| r.sample(StandardNormal)).collect()).unwrap();
            let kappa = r.gen_range(0.0..0.5);
            let params = TheoryParams::new(kappa, 0.5, 0.3).unwrap();
            let d = stabilities(&w, &ps).unwrap();
            assert_eq!(quantum_feasible(&ps, &w, &params).unwrap(), d.all_at_least(kappa));
        }
    }
}
