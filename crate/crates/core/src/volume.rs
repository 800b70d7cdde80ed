//! Monte Carlo estimates of the Gardner volume: the fraction of the sphere
//! `|w|^2 = N` on which every stability reaches a threshold.
//!
//! Small volumes defeat plain rejection, so [`sequential_volume`] writes the
//! volume as a product of conditional acceptance rates, each estimated by a
//! hit-and-run chain inside the region cut out by the constraints so far.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::{beta::beta_reg, gamma::ln_gamma};

use crate::capacity::TheoryParams;
use crate::error::{domain, Error, Result};
use crate::percep::{dot, generate_patterns, quantum_feasible, PatternDistribution, PatternSet, WeightVector, TIE_TOLERANCE};
use crate::rng;

pub const BURN_IN: usize = 50;
pub const THINNING: usize = 10;
/// Batches for the batch-means variance of each stage.
const BATCHES: usize = 20;
/// Extra attempts, each with twice the samples, for a stage with no hits.
const STAGE_RETRIES: usize = 3;
/// Below this acceptance rate a constraint is first imposed at
/// intermediate levels.
const MIN_ACCEPTANCE: f64 = 0.1;
/// Intermediate levels per constraint; each roughly halves the region.
const MAX_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VolumeMethod {
    HitOrMiss,
    Sequential,
}

impl VolumeMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::HitOrMiss => "hit_or_miss",
            Self::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeEstimate {
    /// `(1/N) ln V`.
    pub log_v_over_n: f64,
    pub std_error: f64,
    pub method: VolumeMethod,
    pub samples_used: usize,
    pub n: usize,
    pub constraints: usize,
    /// No sample was accepted; `log_v_over_n` is the upper bound
    /// `ln(3 / samples) / N` rather than an estimate.
    pub bound_only: bool,
}

impl VolumeEstimate {
    fn exact_one(method: VolumeMethod, n: usize) -> Self {
        Self {
            log_v_over_n: 0.0,
            std_error: 0.0,
            method,
            samples_used: 0,
            n,
            constraints: 0,
            bound_only: false,
        }
    }
}

/// A uniform point on the sphere of radius `sqrt(n)`.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<WeightVector> {
    if n == 0 {
        return domain("sample_sphere needs n >= 1");
    }
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if dot(&g, &g) > 0.0 {
            return WeightVector::on_sphere(g);
        }
    }
}

fn unit_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&g, &g).sqrt();
        if norm > 0.0 {
            g.iter_mut().for_each(|x| *x /= norm);
            return g;
        }
    }
}

/// Fraction of the sphere in `n` dimensions on which `u . a_hat >= h`
/// for a fixed unit vector `a_hat`:
/// `(1/2) I_{1 - h^2}((n - 1)/2, 1/2)` for `h >= 0`, mirrored for `h < 0`.
pub fn spherical_cap_fraction(n: usize, h: f64) -> Result<f64> {
    if n < 2 {
        return domain("spherical caps need n >= 2");
    }
    if h.is_nan() {
        return domain("cap height is NaN");
    }
    if h >= 1.0 {
        return Ok(0.0);
    }
    if h <= -1.0 {
        return Ok(1.0);
    }
    let half = 0.5 * beta_reg(0.5 * (n as f64 - 1.0), 0.5, 1.0 - h * h);
    Ok(if h >= 0.0 { half } else { 1.0 - half })
}

/// `ln C_N = (N/2) ln pi + (N/2 - 1) ln N - ln Gamma(N/2)`, the log of the
/// surface measure of the sphere of radius `sqrt(N)`.
pub fn log_c_n(n: usize) -> Result<f64> {
    if n == 0 {
        return domain("log_c_n needs n >= 1");
    }
    let nf = n as f64;
    Ok(0.5 * nf * std::f64::consts::PI.ln() + (0.5 * nf - 1.0) * nf.ln() - ln_gamma(0.5 * nf))
}

fn rejection_estimate(n: usize, p: usize, hits: usize, samples: usize) -> VolumeEstimate {
    let nf = n as f64;
    let (log_v_over_n, std_error, bound_only) = if hits == 0 {
        ((3.0 / samples as f64).ln() / nf, 0.0, true)
    } else {
        let v = hits as f64 / samples as f64;
        let se = (v * (1.0 - v) / samples as f64).sqrt();
        (v.ln() / nf, se / (v * nf), false)
    };
    VolumeEstimate {
        log_v_over_n,
        std_error,
        method: VolumeMethod::HitOrMiss,
        samples_used: samples,
        n,
        constraints: p,
        bound_only,
    }
}

/// Fraction of uniform sphere samples on which every stability is at least
/// `threshold`.
pub fn hit_or_miss<R: Rng + ?Sized>(
    ps: &PatternSet,
    threshold: f64,
    samples: usize,
    rng: &mut R,
) -> Result<VolumeEstimate> {
    hit_or_miss_by(ps, samples, rng, |u| {
        ps.rows().all(|(x, l)| f64::from(l) * dot(x, u) - threshold >= -TIE_TOLERANCE)
    })
}

/// [`hit_or_miss`] with the reliability criterion `R_mu >= 1 - epsilon`
/// in place of the stability threshold.
pub fn hit_or_miss_quantum<R: Rng + ?Sized>(
    ps: &PatternSet,
    params: &TheoryParams,
    samples: usize,
    rng: &mut R,
) -> Result<VolumeEstimate> {
    let mut err = None;
    let est = hit_or_miss_by(ps, samples, rng, |u| {
        let w = WeightVector::new(u.to_vec()).expect("unit vector");
        quantum_feasible(ps, &w, params).unwrap_or_else(|e| {
            err.get_or_insert(e);
            false
        })
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

fn hit_or_miss_by<R: Rng + ?Sized, F: FnMut(&[f64]) -> bool>(
    ps: &PatternSet,
    samples: usize,
    rng: &mut R,
    mut accept: F,
) -> Result<VolumeEstimate> {
    if samples == 0 {
        return domain("hit_or_miss needs samples >= 1");
    }
    let n = ps.n_features();
    if ps.n_patterns() == 0 {
        return Ok(VolumeEstimate::exact_one(VolumeMethod::HitOrMiss, n));
    }
    let hits = (0..samples).filter(|_| accept(&unit_gaussian(n, rng))).count();
    Ok(rejection_estimate(n, ps.n_patterns(), hits, samples))
}

/// Hit-and-run chain on the unit sphere restricted to `a_mu . u >= level_mu`
/// for the active constraints.
struct Chain<'a> {
    rows: &'a [f64],
    n: usize,
    active: Vec<usize>,
    levels: Vec<f64>,
    u: Vec<f64>,
    /// `a_mu . u` for every constraint, active or not.
    proj: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(rows: &'a [f64], n: usize, u: Vec<f64>) -> Self {
        let proj: Vec<f64> = rows.chunks_exact(n).map(|a| dot(a, &u)).collect();
        let levels = vec![f64::NEG_INFINITY; proj.len()];
        Self { rows, n, active: Vec::new(), levels, u, proj }
    }

    fn row(&self, mu: usize) -> &[f64] {
        &self.rows[mu * self.n..(mu + 1) * self.n]
    }

    fn move_to(&mut self, u: Vec<f64>) {
        self.u = u;
        for mu in 0..self.proj.len() {
            self.proj[mu] = dot(&self.rows[mu * self.n..(mu + 1) * self.n], &self.u);
        }
    }

    /// Imposes `a_mu . u >= level` from now on, restarting from `u`.
    fn tighten(&mut self, mu: usize, level: f64, u: Vec<f64>) {
        if !self.active.contains(&mu) {
            self.active.push(mu);
        }
        self.levels[mu] = level;
        self.move_to(u);
    }

    /// One move along a random great circle through `u`, uniform on the
    /// arc of the feasible region that contains `u`.
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n;
        let mut d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let along = dot(&d, &self.u);
        d.iter_mut().zip(&self.u).for_each(|(di, ui)| *di -= along * ui);
        let norm = dot(&d, &d).sqrt();
        if norm == 0.0 {
            return;
        }
        d.iter_mut().for_each(|x| *x /= norm);

        let pi = std::f64::consts::PI;
        let (mut lo, mut hi) = (-pi, pi);
        for &mu in &self.active {
            let level = self.levels[mu];
            let a = self.proj[mu];
            let b = dot(self.row(mu), &d);
            let r = a.hypot(b);
            if r == 0.0 || level <= -r {
                // the whole circle satisfies this constraint
                continue;
            }
            let c = (level / r).clamp(-1.0, 1.0);
            let half = c.acos();
            let phi = b.atan2(a);
            lo = lo.max(phi - half);
            hi = hi.min(phi + half);
        }
        if hi < lo {
            // rounding at the boundary; stay put
            return;
        }
        let theta = rng.gen_range(lo..=hi);
        let (s, c) = theta.sin_cos();
        let mut u: Vec<f64> = self.u.iter().zip(&d).map(|(ui, di)| c * ui + s * di).collect();
        let norm = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        self.move_to(u);
    }
}

/// Chain states recorded during one stage: `a_mu . u` per sample and the
/// state with the largest value.
struct StageRun {
    values: Vec<f64>,
    best: Vec<f64>,
}

impl StageRun {
    /// Fraction of samples with `value >= cut`, and its batch-means variance.
    fn fraction(&self, cut: f64) -> (usize, f64, f64) {
        let samples = self.values.len();
        let batch = samples / BATCHES;
        let mut batch_hits = [0usize; BATCHES];
        let mut hits = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v >= cut {
                hits += 1;
                batch_hits[(i / batch).min(BATCHES - 1)] += 1;
            }
        }
        let means: Vec<f64> = (0..BATCHES)
            .map(|b| {
                let size = if b + 1 == BATCHES { samples - batch * (BATCHES - 1) } else { batch };
                batch_hits[b] as f64 / size as f64
            })
            .collect();
        let m = means.iter().sum::<f64>() / BATCHES as f64;
        let v = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        (hits, hits as f64 / samples as f64, v / BATCHES as f64)
    }

    fn median(&self) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 2]
    }
}

/// Estimates the volume as a product over constraints of the fraction of
/// the region so far that also satisfies the next constraint.
///
/// Constraints enter in pattern order. For independently drawn patterns
/// this order is already random, and it makes the estimate for a set and
/// for any of its prefixes share every stage, so adding patterns can only
/// lower the estimate.
///
/// Each fraction is measured on `samples_per_stage` states of a
/// hit-and-run chain (after burn-in, thinned); its variance comes from
/// batch means and the log-variances add across stages. When fewer than
/// a tenth of the states satisfy the new constraint, it is first imposed
/// at intermediate levels, each the median of `a_mu . u` over the chain,
/// so that every factor stays near one half. A constraint that cannot be
/// met within the level and retry budgets is a stage failure.
pub fn sequential_volume<R: Rng + ?Sized>(
    ps: &PatternSet,
    threshold: f64,
    samples_per_stage: usize,
    rng: &mut R,
) -> Result<VolumeEstimate> {
    if samples_per_stage < 100 {
        return domain(format!("samples_per_stage must be >= 100, got {samples_per_stage}"));
    }
    if !threshold.is_finite() {
        return domain("threshold must be finite");
    }
    let n = ps.n_features();
    let p = ps.n_patterns();
    if p == 0 {
        return Ok(VolumeEstimate::exact_one(VolumeMethod::Sequential, n));
    }
    let rows = ps.signed_rows();
    let start = unit_gaussian(n, rng);
    let mut chain = Chain::new(&rows, n, start);
    let target = threshold - TIE_TOLERANCE;

    let mut log_v = 0.0;
    let mut var = 0.0;
    let mut used = 0;
    for mu in 0..p {
        let mut attempt = 0;
        let mut levels = 0;
        loop {
            let samples = samples_per_stage << attempt;
            let run = run_stage(&mut chain, mu, samples, rng);
            used += samples;
            let (hits, frac, frac_var) = run.fraction(target);
            let cut = run.median();
            let can_split = levels < MAX_LEVELS && cut > chain.levels[mu];
            if frac >= MIN_ACCEPTANCE || (hits > 0 && !can_split) {
                log_v += frac.ln();
                var += frac_var / (frac * frac);
                chain.tighten(mu, threshold, run.best);
                break;
            }
            if can_split {
                let (_, frac, frac_var) = run.fraction(cut);
                log_v += frac.ln();
                var += frac_var / (frac * frac);
                chain.tighten(mu, cut, run.best);
                levels += 1;
                continue;
            }
            attempt += 1;
            if attempt > STAGE_RETRIES {
                return Err(Error::StageFailure { stage: mu, constraint: mu });
            }
        }
    }
    let nf = n as f64;
    Ok(VolumeEstimate {
        log_v_over_n: log_v / nf,
        std_error: var.sqrt() / nf,
        method: VolumeMethod::Sequential,
        samples_used: used,
        n,
        constraints: p,
        bound_only: false,
    })
}

fn run_stage<R: Rng + ?Sized>(chain: &mut Chain<'_>, mu: usize, samples: usize, rng: &mut R) -> StageRun {
    for _ in 0..BURN_IN {
        chain.step(rng);
    }
    let mut values = Vec::with_capacity(samples);
    let mut best = (f64::NEG_INFINITY, chain.u.clone());
    for _ in 0..samples {
        for _ in 0..THINNING {
            chain.step(rng);
        }
        let v = chain.proj[mu];
        if v > best.0 {
            best = (v, chain.u.clone());
        }
        values.push(v);
    }
    StageRun { values, best: best.1 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfAveragingRow {
    pub n: usize,
    pub p: usize,
    pub draws: usize,
    /// Disorder mean of `(1/N) ln V` over draws that completed.
    pub mean: f64,
    /// Disorder standard deviation; `None` with fewer than two completed draws.
    pub std: Option<f64>,
    pub failures: usize,
}

/// Disorder statistics of the sequential volume estimate at load `alpha`.
///
/// Draw `d` at dimension `N` uses patterns and chain seeded from
/// `(seed, N, d)`, so rows are independent of scheduling.
pub fn self_averaging_probe(
    n_list: &[usize],
    alpha: f64,
    kappa: f64,
    draws: usize,
    samples_per_stage: usize,
    distribution: PatternDistribution,
    seed: u64,
) -> Result<Vec<SelfAveragingRow>> {
    if draws == 0 {
        return domain("self_averaging_probe needs draws >= 1");
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return domain("dimensions must be positive");
            }
            let p = ((alpha * n as f64).round() as usize).max(1);
            let results: Vec<Result<f64>> = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let ps = generate_patterns(n, p, distribution, rng::derive_seed(seed, &[n as u64, d as u64]))?;
                    let mut r = rng::stream(seed, &[n as u64, d as u64, 1]);
                    Ok(sequential_volume(&ps, kappa, samples_per_stage, &mut r)?.log_v_over_n)
                })
                .collect();
            let mut values = Vec::with_capacity(draws);
            let mut failures = 0;
            for r in results {
                match r {
                    Ok(v) => values.push(v),
                    Err(Error::StageFailure { .. }) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            let k = values.len();
            let mean = if k == 0 { f64::NAN } else { values.iter().sum::<f64>() / k as f64 };
            let std = (k >= 2).then(|| {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
            });
            Ok(SelfAveragingRow { n, p, draws, mean, std, failures })
        })
        .collect()
}
