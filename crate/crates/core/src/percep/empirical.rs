//! Finite-size capacity: bisection on the load `alpha = p / N` with a
//! logistic fit of the SAT probability through every probe.

use rand::Rng;
use rand_distr::Binomial;
use rayon::prelude::*;

use super::{generate_patterns, is_satisfiable, PatternDistribution, TIE_TOLERANCE};
use crate::capacity::{effective_stability, TheoryParams};
use crate::error::{domain, Error, Result};
use crate::rng;

const ALPHA_LO: f64 = 0.1;
const ALPHA_HI: f64 = 10.0;
const BOOTSTRAP: usize = 200;
/// z-score for the reported half-width.
const Z95: f64 = 1.959_963_984_540_054;
/// Probe pairs further out of order than this many standard errors are
/// rejected.
const MONOTONE_SIGMAS: f64 = 3.0;
const STREAM_BOOTSTRAP: u64 = 0x626f_6f74;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalConfig {
    pub n: usize,
    pub params: TheoryParams,
    /// Use the effective threshold `kappa_tilde` instead of `kappa`.
    pub quantum: bool,
    pub trials: usize,
    pub seed: u64,
    pub distribution: PatternDistribution,
}

impl EmpiricalConfig {
    pub fn threshold(&self) -> f64 {
        if self.quantum {
            effective_stability(&self.params)
        } else {
            self.params.kappa()
        }
    }
}

/// SAT counts at one load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub alpha: f64,
    pub p: usize,
    pub trials: usize,
    pub sat: usize,
    /// Trials whose solver hit its iteration budget; excluded from `sat`
    /// and from the denominator of `p_sat`.
    pub failures: usize,
}

impl Probe {
    pub fn decided(&self) -> usize {
        self.trials - self.failures
    }

    pub fn p_sat(&self) -> f64 {
        if self.decided() == 0 {
            return f64::NAN;
        }
        self.sat as f64 / self.decided() as f64
    }

    pub fn std_error(&self) -> f64 {
        let q = self.p_sat();
        (q * (1.0 - q) / self.decided().max(1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    /// Load at which the fitted SAT probability crosses 1/2.
    pub alpha_hat: f64,
    pub ci_halfwidth: f64,
    /// Width of the logistic transition.
    pub fit_scale: f64,
    /// Probes in the order they were evaluated.
    pub probes: Vec<Probe>,
}

/// SAT indicator for one instance. The instance seed depends on
/// `(seed, p, trial)` only, so runs at different thresholds share instances.
fn trial(cfg: &EmpiricalConfig, threshold: f64, p: usize, t: usize) -> Result<bool> {
    let s = rng::derive_seed(cfg.seed, &[p as u64, t as u64]);
    let ps = generate_patterns(cfg.n, p, cfg.distribution, s)?;
    is_satisfiable(&ps, threshold, TIE_TOLERANCE)
}

pub fn probe(cfg: &EmpiricalConfig, alpha: f64) -> Result<Probe> {
    let p = ((alpha * cfg.n as f64).round() as usize).max(1);
    let threshold = cfg.threshold();
    let results: Vec<Result<bool>> =
        (0..cfg.trials).into_par_iter().map(|t| trial(cfg, threshold, p, t)).collect();
    let mut sat = 0;
    let mut failures = 0;
    for r in results {
        match r {
            Ok(true) => sat += 1,
            Ok(false) => {}
            Err(Error::Convergence { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(Probe { alpha, p, trials: cfg.trials, sat, failures })
}

/// Estimates the load at which the SAT probability drops through 1/2.
///
/// Bisects on `[0.1, 10]` until the bracket is narrower than `1/n`, then
/// fits `P(alpha) = 1 / (1 + exp((alpha - a) / s))` to all probes. The
/// half-width combines a parametric bootstrap of the fit with half the
/// final bracket.
pub fn empirical_capacity(cfg: &EmpiricalConfig) -> Result<CapacityEstimate> {
    if cfg.n < 10 {
        return domain(format!("empirical_capacity needs n >= 10, got {}", cfg.n));
    }
    if cfg.trials < 50 {
        return domain(format!("empirical_capacity needs trials >= 50, got {}", cfg.trials));
    }
    let (mut lo, mut hi) = (ALPHA_LO, ALPHA_HI);
    let mut probes: Vec<Probe> = Vec::new();
    let width = 1.0 / cfg.n as f64;
    while hi - lo >= width {
        let mid = 0.5 * (lo + hi);
        let pr = probe(cfg, mid)?;
        if pr.decided() == 0 {
            return Err(Error::NumericalFailure(format!(
                "every trial failed to converge at alpha = {mid}"
            )));
        }
        if pr.p_sat() >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(pr);
    }
    check_monotone(&probes)?;

    let start = 0.5 * (lo + hi);
    let points: Vec<(f64, f64)> = probes.iter().map(|p| (p.alpha, p.p_sat())).collect();
    let (a, s) = fit_logistic(&points, start);

    let mut rng = rng::stream(cfg.seed, &[STREAM_BOOTSTRAP]);
    let mut draws = Vec::with_capacity(BOOTSTRAP);
    for _ in 0..BOOTSTRAP {
        let resampled: Vec<(f64, f64)> = probes
            .iter()
            .map(|pr| {
                let n = pr.decided() as u64;
                let k = rng.sample(Binomial::new(n, pr.p_sat().clamp(0.0, 1.0)).expect("valid"));
                (pr.alpha, k as f64 / n as f64)
            })
            .collect();
        draws.push(fit_logistic(&resampled, start).0);
    }
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let ci_halfwidth = (Z95 * var.sqrt()).max(0.5 * (hi - lo));

    Ok(CapacityEstimate { alpha_hat: a, ci_halfwidth, fit_scale: s, probes })
}

fn check_monotone(probes: &[Probe]) -> Result<()> {
    let mut sorted: Vec<&Probe> = probes.iter().collect();
    sorted.sort_by(|x, y| x.alpha.total_cmp(&y.alpha));
    for (i, lo) in sorted.iter().enumerate() {
        for hi in &sorted[i + 1..] {
            let (n1, n2) = (lo.decided() as f64, hi.decided() as f64);
            let pooled = (lo.sat + hi.sat) as f64 / (n1 + n2);
            let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
            if hi.p_sat() - lo.p_sat() > MONOTONE_SIGMAS * se {
                return Err(Error::NonMonotone(format!(
                    "P_SAT rises from {:.4} at alpha = {:.4} to {:.4} at alpha = {:.4}",
                    lo.p_sat(),
                    lo.alpha,
                    hi.p_sat(),
                    hi.alpha
                )));
            }
        }
    }
    Ok(())
}

fn logistic(alpha: f64, a: f64, s: f64) -> f64 {
    1.0 / (1.0 + ((alpha - a) / s).exp())
}

/// Least-squares logistic fit in `(a, ln s)` by Levenberg-Marquardt.
fn fit_logistic(points: &[(f64, f64)], a0: f64) -> (f64, f64) {
    const LN_S_MIN: f64 = -9.0;
    const LN_S_MAX: f64 = 2.5;
    let sse = |a: f64, u: f64| -> f64 {
        let s = u.exp();
        points.iter().map(|&(x, y)| (y - logistic(x, a, s)).powi(2)).sum()
    };
    let (mut a, mut u) = (a0, (0.1f64).ln());
    let mut cost = sse(a, u);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let s = u.exp();
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(x, y) in points {
            let f = logistic(x, a, s);
            let z = (x - a) / s;
            let d = f * (1.0 - f);
            let j = [d / s, d * z];
            let r = y - f;
            for i in 0..2 {
                jtr[i] += j[i] * r;
                for k in 0..2 {
                    jtj[i][k] += j[i] * j[k];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let m = [
                [jtj[0][0] * (1.0 + lambda) + 1e-12, jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda) + 1e-12],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let da = (jtr[0] * m[1][1] - jtr[1] * m[0][1]) / det;
            let du = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
            let na = (a + da).clamp(ALPHA_LO, ALPHA_HI);
            let nu = (u + du).clamp(LN_S_MIN, LN_S_MAX);
            let nc = sse(na, nu);
            if nc < cost {
                let step = (na - a).abs() + (nu - u).abs();
                a = na;
                u = nu;
                cost = nc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = step > 1e-13;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, u.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, kappa: f64, trials: usize) -> EmpiricalConfig {
        EmpiricalConfig {
            n,
            params: TheoryParams::classical(kappa).unwrap(),
            quantum: false,
            trials,
            seed: 2024,
            distribution: PatternDistribution::Gaussian,
        }
    }

    #[test]
    fn logistic_fit_recovers_parameters() {
        let pts: Vec<(f64, f64)> =
            (0..30).map(|i| 1.0 + 0.05 * i as f64).map(|x| (x, logistic(x, 1.7, 0.12))).collect();
        let (a, s) = fit_logistic(&pts, 1.5);
        assert!((a - 1.7).abs() < 1e-8 && (s - 0.12).abs() < 1e-8, "{a} {s}");
    }

    #[test]
    fn monotone_check_flags_reversals() {
        let mk = |alpha, sat| Probe { alpha, p: 1, trials: 200, sat, failures: 0 };
        assert!(check_monotone(&[mk(1.0, 190), mk(2.0, 100), mk(3.0, 5)]).is_ok());
        assert!(matches!(
            check_monotone(&[mk(1.0, 20), mk(2.0, 180)]),
            Err(Error::NonMonotone(_))
        ));
    }

    #[test]
    fn small_run_lands_near_two() {
        let est = empirical_capacity(&cfg(20, 0.0, 60)).unwrap();
        assert!((est.alpha_hat - 2.0).abs() < 0.5, "{est:?}");
        assert!(est.ci_halfwidth > 0.0);
    }

    #[test]
    fn input_validation() {
        assert!(empirical_capacity(&cfg(5, 0.0, 100)).is_err());
        assert!(empirical_capacity(&cfg(20, 0.0, 10)).is_err());
    }
}
