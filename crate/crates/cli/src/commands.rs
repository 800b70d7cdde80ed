//! One function per subcommand, each turning settings into a table.

use gardner_core::capacity::{
    classical_capacity, effective_stability, free_energy, quantum_capacity, TheoryParams,
};
use gardner_core::percep::{empirical_capacity, generate_patterns, EmpiricalConfig, PatternDistribution};
use gardner_core::qsim::{homodyne_sample, ks_statistic, run_perceptron_circuit};
use gardner_core::volume::{
    hit_or_miss, hit_or_miss_quantum, self_averaging_probe, sequential_volume, VolumeEstimate,
};
use gardner_core::{rng, Error};
use rand::Rng;
use rayon::prelude::*;

use crate::config::Settings;
use crate::output::{fmt, fmt_opt, Table};
use crate::CliError;

/// Relative agreement required between simulated and closed-form moments.
const CIRCUIT_TOL: f64 = 1e-10;
/// Kolmogorov-Smirnov critical constant at the 1% level.
const KS_CRIT_1PCT: f64 = 1.63;
/// Largest tolerated fraction of solver failures in an empirical run.
const MAX_FAILURE_RATE: f64 = 0.05;
const Z95: f64 = 1.959_963_984_540_054;

fn core(e: Error) -> CliError {
    match e {
        Error::Domain(_) | Error::Dimension { .. } | Error::ModeIndex { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Failure(other.to_string()),
    }
}

fn params(s: &Settings) -> Result<TheoryParams, CliError> {
    TheoryParams::new(s.f64("kappa", "0")?, s.f64("epsilon", "0.5")?, s.f64("sigma", "0")?).map_err(core)
}

/// `(1/N) ln V` predicted at load `alpha` and threshold `kappa`, if finite.
fn theory_f(alpha: f64, kappa: f64) -> Option<f64> {
    if alpha == 0.0 {
        return Some(0.0);
    }
    free_energy(alpha, kappa).ok().map(|s| s.free_energy)
}

pub fn theory_capacity(s: &Settings) -> Result<Table, CliError> {
    let grid = s.grid("kappa_grid", "0,0.5,1,1.5,2")?;
    let mut t = Table::new(&["kappa", "alpha_c"]);
    for k in grid {
        if k < 0.0 {
            return Err(CliError::Usage(format!("kappa must be >= 0, got {k}")));
        }
        t.push(vec![fmt(k), fmt(classical_capacity(k).map_err(core)?)]);
    }
    Ok(t)
}

pub fn theory_quantum(s: &Settings) -> Result<Table, CliError> {
    let kappas = s.grid("kappa_grid", "0")?;
    let epsilons = s.grid("epsilon_grid", "0.1,0.5")?;
    let sigmas = s.grid("sigma_grid", "0,0.25,0.5,1")?;
    if epsilons.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
        return Err(CliError::Usage("epsilon_grid entries must lie in (0, 0.5]".into()));
    }
    let mut t = Table::new(&[
        "kappa",
        "epsilon",
        "sigma",
        "kappa_tilde",
        "alpha_c_q",
        "alpha_c_classical",
        "ratio",
    ]);
    for &k in &kappas {
        for &e in &epsilons {
            for &sg in &sigmas {
                let p = TheoryParams::new(k, e, sg).map_err(core)?;
                let q = quantum_capacity(&p).map_err(core)?;
                let c = classical_capacity(k).map_err(core)?;
                t.push(vec![
                    fmt(k),
                    fmt(e),
                    fmt(sg),
                    fmt(effective_stability(&p)),
                    fmt(q),
                    fmt(c),
                    fmt(q / c),
                ]);
            }
        }
    }
    Ok(t)
}

pub fn saddle(s: &Settings) -> Result<Table, CliError> {
    let p = params(s)?;
    let kt = effective_stability(&p);
    let grid = s.grid("alpha_grid", "0.001,0.25,0.5,1,1.5,1.9")?;
    if grid.iter().any(|&a| a <= 0.0) {
        return Err(CliError::Usage("alpha_grid entries must be positive".into()));
    }
    let mut t = Table::new(&["alpha", "q", "free_energy", "status"]);
    for a in grid {
        match free_energy(a, kt) {
            Ok(sp) => t.push(vec![fmt(a), fmt(sp.q), fmt(sp.free_energy), "ok".into()]),
            Err(Error::Diverged { .. }) => {
                t.push(vec![fmt(a), fmt_opt(None), fmt_opt(None), "diverged".into()])
            }
            Err(e) => return Err(core(e)),
        }
    }
    Ok(t)
}

/// Wilson score interval at 95%.
fn wilson(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub fn empirical(s: &Settings, seed: u64) -> Result<Table, CliError> {
    let cfg = EmpiricalConfig {
        n: s.usize("n", "40")?,
        params: params(s)?,
        quantum: s.bool("quantum", "false")?,
        trials: s.usize("trials", "200")?,
        seed,
        distribution: s.dist("gaussian")?,
    };
    let est = empirical_capacity(&cfg).map_err(core)?;
    let mut t = Table::new(&[
        "row",
        "alpha",
        "p",
        "sat_count",
        "trials",
        "p_sat",
        "ci_low",
        "ci_high",
        "solver_failures",
    ]);
    let mut failures = 0;
    let mut total = 0;
    for pr in &est.probes {
        let (lo, hi) = wilson(pr.sat, pr.decided());
        failures += pr.failures;
        total += pr.trials;
        t.push(vec![
            "probe".into(),
            fmt(pr.alpha),
            pr.p.to_string(),
            pr.sat.to_string(),
            pr.trials.to_string(),
            fmt(pr.p_sat()),
            fmt(lo),
            fmt(hi),
            pr.failures.to_string(),
        ]);
    }
    t.push(vec![
        "summary".into(),
        fmt(est.alpha_hat),
        fmt_opt(None),
        fmt_opt(None),
        total.to_string(),
        fmt(0.5),
        fmt(est.alpha_hat - est.ci_halfwidth),
        fmt(est.alpha_hat + est.ci_halfwidth),
        failures.to_string(),
    ]);
    if total > 0 && failures as f64 > MAX_FAILURE_RATE * total as f64 {
        t.failure = Some(format!("{failures} of {total} solver runs failed to converge"));
    }
    Ok(t)
}

pub fn volume(s: &Settings, seed: u64) -> Result<Table, CliError> {
    let n = s.usize("n", "24")?;
    if n == 0 {
        return Err(CliError::Usage("n must be positive".into()));
    }
    let grid = s.grid("alpha_grid", "0.5")?;
    if grid.iter().any(|&a| a < 0.0) {
        return Err(CliError::Usage("alpha_grid entries must be >= 0".into()));
    }
    let p = params(s)?;
    let quantum = s.bool("quantum", "false")?;
    let method = s.string("method", "sequential");
    let samples = s.usize("samples", "2000")?;
    let dist = s.dist("binary")?;
    if method != "sequential" && method != "hit_or_miss" {
        return Err(CliError::Usage(format!("unknown method '{method}'")));
    }
    if quantum && p.sigma() <= 0.0 {
        return Err(CliError::Usage("quantum volumes need sigma > 0".into()));
    }
    let threshold = if quantum { effective_stability(&p) } else { p.kappa() };

    let rows: Vec<Result<Vec<String>, CliError>> = grid
        .par_iter()
        .map(|&alpha| {
            let count = (alpha * n as f64).round() as usize;
            let ps = if count == 0 {
                gardner_core::percep::PatternSet::empty(n, dist)
            } else {
                generate_patterns(n, count, dist, rng::derive_seed(seed, &[n as u64, count as u64]))
                    .map_err(core)?
            };
            let mut r = rng::stream(seed, &[n as u64, count as u64, 1]);
            let result: Result<VolumeEstimate, Error> = match (method.as_str(), quantum) {
                ("hit_or_miss", true) => hit_or_miss_quantum(&ps, &p, samples, &mut r),
                ("hit_or_miss", false) => hit_or_miss(&ps, threshold, samples, &mut r),
                _ => sequential_volume(&ps, threshold, samples, &mut r),
            };
            let f = theory_f(alpha, threshold);
            let head = vec![n.to_string(), count.to_string(), fmt(alpha), method.clone()];
            let tail = match result {
                Ok(est) => {
                    let diag = if est.bound_only { "bound_only" } else { "ok" };
                    vec![fmt(est.log_v_over_n), fmt(est.std_error), fmt_opt(f), diag.to_string()]
                }
                Err(Error::StageFailure { stage, constraint }) => vec![
                    fmt_opt(None),
                    fmt_opt(None),
                    fmt_opt(f),
                    format!("stage_failure:{stage}:{constraint}"),
                ],
                Err(e) => return Err(core(e)),
            };
            Ok(head.into_iter().chain(tail).collect())
        })
        .collect();
    let mut t = Table::new(&[
        "n",
        "p",
        "alpha",
        "method",
        "log_v_over_n",
        "std_error",
        "theory_f",
        "diagnostics",
    ]);
    for r in rows {
        t.push(r?);
    }
    Ok(t)
}

pub fn circuit_verify(s: &Settings, seed: u64) -> Result<Table, CliError> {
    let n_max = s.usize("n", "8")?;
    if !(1..=12).contains(&n_max) {
        return Err(CliError::Usage(format!("n must lie in 1..=12, got {n_max}")));
    }
    let trials = s.usize("trials", "100")?;
    let shots = s.usize("shots", "100000")?;
    let sigma = s.f64("sigma", "0.5")?;
    if !(sigma > 0.0) {
        return Err(CliError::Usage("sigma must be positive".into()));
    }
    if shots == 0 {
        return Err(CliError::Usage("shots must be positive".into()));
    }
    let crit = KS_CRIT_1PCT / (shots as f64).sqrt();
    let rows: Vec<Result<(Vec<String>, bool), CliError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let n = 1 + trial % n_max;
            let mut r = rng::stream(seed, &[trial as u64]);
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n)
                .map(|_| {
                    let m: f64 = r.gen_range(0.1..2.0);
                    if r.gen::<bool>() {
                        m
                    } else {
                        -m
                    }
                })
                .collect();
            let sig = vec![sigma; n];
            let out = run_perceptron_circuit(&x, &w, &sig).map_err(core)?;
            let mean_theory: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let var_theory: f64 = w.iter().map(|a| a * a * sigma * sigma).sum();
            let samples = homodyne_sample(&out.state, n - 1, &mut r, shots).map_err(core)?;
            let ks = ks_statistic(&samples, mean_theory, var_theory);
            let scale = mean_theory.abs().max(var_theory.sqrt());
            let exact = (out.mean_out - mean_theory).abs() <= CIRCUIT_TOL * scale
                && (out.var_out - var_theory).abs() <= CIRCUIT_TOL * var_theory;
            Ok((
                vec![
                    n.to_string(),
                    trial.to_string(),
                    fmt(out.mean_out),
                    fmt(mean_theory),
                    fmt(out.var_out),
                    fmt(var_theory),
                    fmt(ks),
                    (ks <= crit).to_string(),
                ],
                exact,
            ))
        })
        .collect();
    let mut t = Table::new(&[
        "n",
        "trial",
        "mean_sim",
        "mean_theory",
        "var_sim",
        "var_theory",
        "ks_stat",
        "ks_pass",
    ]);
    let mut bad = 0;
    for r in rows {
        let (row, exact) = r?;
        bad += usize::from(!exact);
        t.push(row);
    }
    if bad > 0 {
        t.failure = Some(format!("{bad} trials disagree with the closed-form moments"));
    }
    Ok(t)
}

pub fn selfavg(s: &Settings, seed: u64) -> Result<Table, CliError> {
    let n_list = s.usize_list("n_list", "12,24")?;
    if n_list.len() < 2 {
        return Err(CliError::Usage("n_list needs at least two entries".into()));
    }
    let alpha = s.f64("alpha", "0.5")?;
    let kappa = s.f64("kappa", "0")?;
    let draws = s.usize("draws", "50")?;
    let samples = s.usize("samples", "1000")?;
    let dist: PatternDistribution = s.dist("binary")?;
    let rows = self_averaging_probe(&n_list, alpha, kappa, draws, samples, dist, seed).map_err(core)?;
    let f = theory_f(alpha, kappa);
    let mut t = Table::new(&["n", "draws", "mean_log_v_over_n", "std", "theory_f", "stage_failures"]);
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            r.draws.to_string(),
            fmt(r.mean),
            fmt_opt(r.std),
            fmt_opt(f),
            r.failures.to_string(),
        ]);
    }
    Ok(t)
}
