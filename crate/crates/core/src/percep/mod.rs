//! Perceptron instances: random pattern sets, stabilities, the
//! maximal-stability solver, homodyne-sampled classification and
//! finite-size capacity estimates.
//!
//! The bias is fixed to zero throughout. Stabilities are
//! `Delta_mu = xi_mu (w . x_mu) / |w|` and a pattern counts as stored at
//! threshold `kappa` when `Delta_mu >= kappa - TIE_TOLERANCE`.

mod empirical;
mod quantum;
mod solver;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::rng;

pub use empirical::{empirical_capacity, CapacityEstimate, EmpiricalConfig, Probe};
pub use quantum::{
    classify_quantum, quantum_feasible, reliabilities, reliability, Outcome, ReliabilityVector,
};
pub use solver::{is_satisfiable, max_stability, MaxStability};

/// Absolute tolerance on `Delta - threshold`; ties count as satisfied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternDistribution {
    /// Entries uniform on {-1, +1}.
    Binary,
    /// Entries i.i.d. standard normal (general position with probability 1).
    Gaussian,
}

impl PatternDistribution {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for PatternDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(Self::Binary),
            "gaussian" => Ok(Self::Gaussian),
            other => domain(format!("unknown pattern distribution '{other}'")),
        }
    }
}

/// `p` labeled patterns in `N` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    n_features: usize,
    /// Row-major `p x N`.
    patterns: Vec<f64>,
    labels: Vec<i8>,
    distribution: PatternDistribution,
    seed: u64,
}

impl PatternSet {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<i8>,
        distribution: PatternDistribution,
        seed: u64,
    ) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return domain("pattern set needs at least one pattern of positive dimension");
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension { expected: rows.len(), found: labels.len() });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { expected: n, found: bad.len() });
        }
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return domain("labels must be +1 or -1");
        }
        let patterns: Vec<f64> = rows.into_iter().flatten().collect();
        if patterns.iter().any(|x| !x.is_finite()) {
            return domain("pattern entries must be finite");
        }
        if distribution == PatternDistribution::Binary
            && patterns.iter().any(|&x| x != 1.0 && x != -1.0)
        {
            return domain("binary patterns must have entries in {-1, +1}");
        }
        Ok(Self { n_features: n, patterns, labels, distribution, seed })
    }

    /// No constraints at all; the whole sphere is feasible.
    pub fn empty(n_features: usize, distribution: PatternDistribution) -> Self {
        Self { n_features, patterns: Vec::new(), labels: Vec::new(), distribution, seed: 0 }
    }

    /// The four corners of the square labeled as exclusive-or, which no
    /// perceptron without bias can separate.
    pub fn xor() -> Self {
        Self::new(
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]],
            vec![-1, 1, 1, -1],
            PatternDistribution::Binary,
            0,
        )
        .expect("fixture is valid")
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_patterns(&self) -> usize {
        self.labels.len()
    }

    pub fn distribution(&self) -> PatternDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pattern(&self, mu: usize) -> &[f64] {
        &self.patterns[mu * self.n_features..(mu + 1) * self.n_features]
    }

    pub fn label(&self, mu: usize) -> i8 {
        self.labels[mu]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], i8)> {
        self.patterns.chunks_exact(self.n_features.max(1)).zip(self.labels.iter().copied())
    }

    /// The first `p` patterns.
    pub fn prefix(&self, p: usize) -> Self {
        let p = p.min(self.n_patterns());
        Self {
            n_features: self.n_features,
            patterns: self.patterns[..p * self.n_features].to_vec(),
            labels: self.labels[..p].to_vec(),
            distribution: self.distribution,
            seed: self.seed,
        }
    }

    /// Signed patterns `xi_mu x_mu`, row-major.
    pub(crate) fn signed_rows(&self) -> Vec<f64> {
        self.rows()
            .flat_map(|(x, l)| x.iter().map(move |&v| f64::from(l) * v))
            .collect()
    }
}

/// Draws `p` patterns and independent uniform labels.
///
/// Patterns are drawn one at a time (entries, then label), so a set with
/// more patterns extends the smaller one drawn from the same seed.
pub fn generate_patterns(
    n: usize,
    p: usize,
    dist: PatternDistribution,
    seed: u64,
) -> Result<PatternSet> {
    if n == 0 || p == 0 {
        return domain(format!("generate_patterns needs n >= 1 and p >= 1, got n={n}, p={p}"));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut patterns = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(p);
    for _ in 0..p {
        for _ in 0..n {
            let x = match dist {
                PatternDistribution::Binary => {
                    if rng.gen::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                PatternDistribution::Gaussian => rng.sample(StandardNormal),
            };
            patterns.push(x);
        }
        labels.push(if rng.gen::<bool>() { 1 } else { -1 });
    }
    Ok(PatternSet { n_features: n, patterns, labels, distribution: dist, seed })
}

/// Perceptron weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return domain("weight vector must have at least one component");
        }
        if w.iter().any(|x| !x.is_finite()) {
            return domain("weights must be finite");
        }
        Ok(Self { w })
    }

    /// Rescales `w` onto the sphere `|w|^2 = N`.
    pub fn on_sphere(w: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(w)?;
        out.normalize()?;
        Ok(out)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 {
            return domain("cannot normalize the zero weight vector");
        }
        let scale = (self.w.len() as f64).sqrt() / norm;
        self.w.iter_mut().for_each(|x| *x *= scale);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn norm(&self) -> f64 {
        dot(&self.w, &self.w).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { w: self.w.iter().map(|x| c * x).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVector {
    pub deltas: Vec<f64>,
}

impl StabilityVector {
    pub fn min(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Every stability at or above `threshold`, ties included.
    pub fn all_at_least(&self, threshold: f64) -> bool {
        self.deltas.iter().all(|&d| d - threshold >= -TIE_TOLERANCE)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(w: &WeightVector, ps: &PatternSet) -> Result<()> {
    if w.n() != ps.n_features() {
        return Err(Error::Dimension { expected: ps.n_features(), found: w.n() });
    }
    Ok(())
}

/// `Delta_mu = xi_mu (w . x_mu) / |w|`.
pub fn stabilities(w: &WeightVector, ps: &PatternSet) -> Result<StabilityVector> {
    check_dims(w, ps)?;
    let norm = w.norm();
    if norm == 0.0 {
        return domain("stabilities are undefined for the zero weight vector");
    }
    let deltas = ps
        .rows()
        .map(|(x, l)| f64::from(l) * dot(w.as_slice(), x) / norm)
        .collect();
    Ok(StabilityVector { deltas })
}

/// `sgn(w . x_mu)` with `sgn(0) = +1`.
pub fn classify_classical(w: &WeightVector, ps: &PatternSet) -> Result<Vec<i8>> {
    check_dims(w, ps)?;
    Ok(ps
        .rows()
        .map(|(x, _)| if dot(w.as_slice(), x) >= 0.0 { 1 } else { -1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_nested() {
        let a = generate_patterns(7, 20, PatternDistribution::Gaussian, 42).unwrap();
        let b = generate_patterns(7, 20, PatternDistribution::Gaussian, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_patterns(7, 12, PatternDistribution::Gaussian, 42).unwrap();
        assert_eq!(a.prefix(12), c);
        let d = generate_patterns(7, 20, PatternDistribution::Gaussian, 43).unwrap();
        assert_ne!(a, d);
        assert!(generate_patterns(0, 3, PatternDistribution::Binary, 1).is_err());
        assert!(generate_patterns(3, 0, PatternDistribution::Binary, 1).is_err());
    }

    #[test]
    fn binary_entries_and_labels() {
        let ps = generate_patterns(50, 5000, PatternDistribution::Binary, 9).unwrap();
        assert!(ps.rows().all(|(x, l)| x.iter().all(|&v| v == 1.0 || v == -1.0) && l.abs() == 1));
        // per-component mean of a fair +-1 sample of size 5000 has sd 0.0141
        for j in 0..50 {
            let mean: f64 = ps.rows().map(|(x, _)| x[j]).sum::<f64>() / 5000.0;
            assert!(mean.abs() <= 0.05, "component {j} mean {mean}");
        }
        let label_mean: f64 = ps.labels().iter().map(|&l| f64::from(l)).sum::<f64>() / 5000.0;
        assert!(label_mean.abs() <= 0.05);
    }

    #[test]
    fn gaussian_columns_look_standard_normal() {
        let p = 400;
        let ps = generate_patterns(10, p, PatternDistribution::Gaussian, 3).unwrap();
        for j in 0..10 {
            let col: Vec<f64> = ps.rows().map(|(x, _)| x[j]).collect();
            let mean = col.iter().sum::<f64>() / p as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (p - 1) as f64;
            assert!(mean.abs() <= 5.0 / (p as f64).sqrt());
            assert!((0.5..=1.5).contains(&var));
        }
    }

    #[test]
    fn pattern_set_validation() {
        assert!(PatternSet::new(vec![vec![0.5]], vec![1], PatternDistribution::Binary, 0).is_err());
        assert!(PatternSet::new(vec![vec![1.0]], vec![0], PatternDistribution::Binary, 0).is_err());
        assert!(PatternSet::new(vec![vec![1.0], vec![1.0, 1.0]], vec![1, 1], PatternDistribution::Gaussian, 0).is_err());
        assert!(PatternSet::new(vec![vec![1.0]], vec![1, 1], PatternDistribution::Gaussian, 0).is_err());
        assert!(PatternSet::new(vec![vec![0.3, f64::NAN]], vec![1], PatternDistribution::Gaussian, 0).is_err());
    }

    #[test]
    fn aligned_weight_has_full_stability() {
        let ps = generate_patterns(16, 1, PatternDistribution::Binary, 5).unwrap();
        let w: Vec<f64> = ps.pattern(0).iter().map(|&x| x * f64::from(ps.label(0))).collect();
        let w = WeightVector::new(w).unwrap();
        let d = stabilities(&w, &ps).unwrap();
        assert!((d.deltas[0] - 4.0).abs() < 1e-12);
        let sigma = classify_classical(&w, &ps).unwrap();
        assert_eq!(sigma[0], ps.label(0));
    }

    #[test]
    fn stabilities_are_scale_invariant() {
        let ps = generate_patterns(9, 30, PatternDistribution::Gaussian, 11).unwrap();
        let w = WeightVector::new((0..9).map(|i| (i as f64 - 4.0) * 0.3 + 0.1).collect()).unwrap();
        let d1 = stabilities(&w, &ps).unwrap();
        let d3 = stabilities(&w.scaled(3.0), &ps).unwrap();
        for (a, b) in d1.deltas.iter().zip(&d3.deltas) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stabilities_errors() {
        let ps = PatternSet::xor();
        let zero = WeightVector::new(vec![0.0, 0.0]).unwrap();
        assert!(stabilities(&zero, &ps).is_err());
        let wrong = WeightVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(stabilities(&wrong, &ps), Err(Error::Dimension { .. })));
    }

    #[test]
    fn xor_is_never_fully_stable() {
        let ps = PatternSet::xor();
        for k in 0..64 {
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            let w = WeightVector::new(vec![th.cos(), th.sin()]).unwrap();
            assert!(stabilities(&w, &ps).unwrap().min() < 0.0);
        }
    }

    #[test]
    fn zero_dot_products_classify_positive() {
        let ps = PatternSet::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![1, -1], PatternDistribution::Binary, 0).unwrap();
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(classify_classical(&w, &ps).unwrap(), vec![1, 1]);
    }

    #[test]
    fn classification_agrees_with_stability_sign() {
        let ps = generate_patterns(6, 40, PatternDistribution::Gaussian, 2).unwrap();
        let w = WeightVector::new(vec![0.4, -1.0, 0.2, 0.9, -0.3, 0.05]).unwrap();
        let d = stabilities(&w, &ps).unwrap();
        let s = classify_classical(&w, &ps).unwrap();
        for mu in 0..40 {
            assert_eq!(s[mu] == ps.label(mu), d.deltas[mu] >= 0.0);
        }
    }

    #[test]
    fn sphere_normalization() {
        let w = WeightVector::on_sphere(vec![3.0, 4.0, 0.0, 1.0]).unwrap();
        assert!((w.norm().powi(2) / 4.0 - 1.0).abs() < 1e-12);
        assert!(WeightVector::on_sphere(vec![0.0; 3]).is_err());
    }
}
