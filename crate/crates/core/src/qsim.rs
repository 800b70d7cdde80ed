//! Gaussian continuous-variable circuits in the means-and-covariance
//! picture, with the squeeze / CX cascade that computes `w . x` on the
//! position quadrature of the last mode.
//!
//! Quadratures are interleaved, `(q_1, p_1, ..., q_N, p_N)`, with
//! `hbar = 1` so the vacuum has `Var(q) = Var(p) = 1/2`. The symplectic
//! form is block diagonal with blocks `[[0, 1], [-1, 0]]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return domain(format!("mean vector needs even positive length, got {dim}"));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Dimension { expected: dim, found: cov.nrows() });
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax().max(1.0) {
            return domain(format!("covariance is not symmetric (max deviation {asym:e})"));
        }
        Ok(Self { mean, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::ModeIndex { index: mode, n_modes: self.n_modes() });
        }
        Ok(())
    }

    /// Mean and variance of the position quadrature of `mode`.
    pub fn position_marginal(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[2 * mode], self.cov[(2 * mode, 2 * mode)]))
    }

    /// Symplectic eigenvalues in increasing order, one per mode.
    ///
    /// Computed as the singular values of the antisymmetric matrix
    /// `V^(1/2) Omega V^(1/2)`, which come in equal pairs.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = self.cov.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NumericalFailure("covariance is not positive definite".into()));
        }
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let m = &root * omega(self.n_modes()) * &root;
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        Ok(sv.chunks_exact(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
    }

    /// `mean -> S mean`, `cov -> S cov S^T`.
    pub fn transform(&mut self, s: &DMatrix<f64>) -> Result<()> {
        let dim = self.mean.len();
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Dimension { expected: dim, found: s.nrows() });
        }
        self.mean = s * &self.mean;
        self.cov = s * &self.cov * s.transpose();
        Ok(())
    }
}

/// The symplectic form for `n` modes.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(2 * j, 2 * j + 1)] = 1.0;
        m[(2 * j + 1, 2 * j)] = -1.0;
    }
    m
}

/// Product state with position means `x`, zero momentum means,
/// `Var(q_j) = sigma_j^2` and `Var(p_j) = 1 / (4 sigma_j^2)`.
pub fn encode(x: &[f64], sigmas: &[f64]) -> Result<GaussianState> {
    if x.is_empty() {
        return domain("encode needs at least one mode");
    }
    if x.len() != sigmas.len() {
        return Err(Error::Dimension { expected: x.len(), found: sigmas.len() });
    }
    if let Some(s) = sigmas.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return domain(format!("widths must be positive and finite, got {s}"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("encoded values must be finite");
    }
    let n = x.len();
    let mut mean = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        mean[2 * j] = x[j];
        cov[(2 * j, 2 * j)] = sigmas[j] * sigmas[j];
        cov[(2 * j + 1, 2 * j + 1)] = 0.25 / (sigmas[j] * sigmas[j]);
    }
    Ok(GaussianState { mean, cov })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Squeeze,
    /// `(q, p) -> (-q, -p)` on one mode.
    PhaseFlip,
    /// `q_target -> q_control + q_target`, `p_control -> p_control - p_target`.
    Cx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSpec {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    /// Squeezing parameter `r`, giving the weight `w = exp(-2 r)`; unused
    /// by the other gates.
    pub parameter: f64,
}

impl GateSpec {
    pub fn squeeze(target: usize, r: f64) -> Self {
        Self { kind: GateKind::Squeeze, target, control: None, parameter: r }
    }

    /// Squeeze realizing `q -> w q` for a nonzero weight; negative weights
    /// need an extra phase flip, so this returns one or two gates.
    pub fn for_weight(target: usize, w: f64) -> Result<Vec<Self>> {
        if w == 0.0 || !w.is_finite() {
            return Err(Error::DegenerateWeight { mode: target });
        }
        let mut gates = vec![Self::squeeze(target, -0.5 * w.abs().ln())];
        if w < 0.0 {
            gates.push(Self::phase_flip(target));
        }
        Ok(gates)
    }

    pub fn phase_flip(target: usize) -> Self {
        Self { kind: GateKind::PhaseFlip, target, control: None, parameter: 0.0 }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cx, target, control: Some(control), parameter: 0.0 }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        let check = |m: usize| {
            if m >= n_modes {
                Err(Error::ModeIndex { index: m, n_modes })
            } else {
                Ok(())
            }
        };
        check(self.target)?;
        match (self.kind, self.control) {
            (GateKind::Cx, Some(c)) => {
                check(c)?;
                if c == self.target {
                    return domain("cx needs distinct control and target");
                }
            }
            (GateKind::Cx, None) => return domain("cx needs a control mode"),
            _ => {}
        }
        if self.kind == GateKind::Squeeze && !self.parameter.is_finite() {
            return domain("squeezing parameter must be finite");
        }
        Ok(())
    }

    /// The `2N x 2N` symplectic matrix of the gate.
    pub fn symplectic(&self, n_modes: usize) -> Result<DMatrix<f64>> {
        self.validate(n_modes)?;
        let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
        let (q, p) = (2 * self.target, 2 * self.target + 1);
        match self.kind {
            GateKind::Squeeze => {
                let w = (-2.0 * self.parameter).exp();
                s[(q, q)] = w;
                s[(p, p)] = 1.0 / w;
            }
            GateKind::PhaseFlip => {
                s[(q, q)] = -1.0;
                s[(p, p)] = -1.0;
            }
            GateKind::Cx => {
                let c = self.control.expect("validated");
                s[(q, 2 * c)] = 1.0;
                s[(2 * c + 1, p)] = -1.0;
            }
        }
        Ok(s)
    }
}

/// Applies `gate` by row and column operations on the moments.
pub fn apply_gate(state: &mut GaussianState, gate: &GateSpec) -> Result<()> {
    gate.validate(state.n_modes())?;
    match gate.kind {
        GateKind::Squeeze => scale_mode(state, gate.target, (-2.0 * gate.parameter).exp()),
        GateKind::PhaseFlip => {
            let (q, p) = (2 * gate.target, 2 * gate.target + 1);
            for i in [q, p] {
                state.mean[i] = -state.mean[i];
                state.cov.row_mut(i).neg_mut();
                state.cov.column_mut(i).neg_mut();
            }
        }
        GateKind::Cx => cx(state, gate.control.expect("validated"), gate.target),
    }
    Ok(())
}

fn scale_mode(state: &mut GaussianState, mode: usize, w: f64) {
    let (q, p) = (2 * mode, 2 * mode + 1);
    state.mean[q] *= w;
    state.mean[p] /= w;
    state.cov.row_mut(q).scale_mut(w);
    state.cov.column_mut(q).scale_mut(w);
    state.cov.row_mut(p).scale_mut(1.0 / w);
    state.cov.column_mut(p).scale_mut(1.0 / w);
}

fn cx(state: &mut GaussianState, j: usize, k: usize) {
    let (qj, pj, qk, pk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
    state.mean[qk] += state.mean[qj];
    state.mean[pj] -= state.mean[pk];
    let dim = state.mean.len();
    for c in 0..dim {
        let (a, b) = (state.cov[(qj, c)], state.cov[(pk, c)]);
        state.cov[(qk, c)] += a;
        state.cov[(pj, c)] -= b;
    }
    for r in 0..dim {
        let (a, b) = (state.cov[(r, qj)], state.cov[(r, pk)]);
        state.cov[(r, qk)] += a;
        state.cov[(r, pj)] -= b;
    }
}

/// `q_j -> w q_j`, `p_j -> p_j / w`; a negative `w` includes the reflection
/// of the mode.
pub fn apply_squeeze(state: &mut GaussianState, mode: usize, w: f64) -> Result<()> {
    state.check_mode(mode)?;
    if w == 0.0 || !w.is_finite() {
        return Err(Error::DegenerateWeight { mode });
    }
    scale_mode(state, mode, w);
    Ok(())
}

pub fn apply_cx(state: &mut GaussianState, control: usize, target: usize) -> Result<()> {
    apply_gate(state, &GateSpec::cx(control, target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitOutput {
    pub mean_out: f64,
    pub var_out: f64,
    pub state: GaussianState,
}

/// The gate sequence of the perceptron circuit: a squeeze (and phase flip
/// for negative weights) on every mode, then the chain
/// `CX(0, 1), CX(1, 2), ..., CX(N - 2, N - 1)`.
pub fn perceptron_gates(w: &[f64]) -> Result<Vec<GateSpec>> {
    let mut gates = Vec::with_capacity(2 * w.len());
    for (j, &wj) in w.iter().enumerate() {
        gates.extend(GateSpec::for_weight(j, wj)?);
    }
    gates.extend((1..w.len()).map(|k| GateSpec::cx(k - 1, k)));
    Ok(gates)
}

/// Encodes `x`, runs the circuit and returns the position marginal of the
/// last mode, which is centered at `w . x` with variance `sum w_j^2 sigma_j^2`.
pub fn run_perceptron_circuit(x: &[f64], w: &[f64], sigmas: &[f64]) -> Result<CircuitOutput> {
    if w.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), found: w.len() });
    }
    let mut state = encode(x, sigmas)?;
    for (j, &wj) in w.iter().enumerate() {
        apply_squeeze(&mut state, j, wj)?;
    }
    for k in 1..w.len() {
        cx(&mut state, k - 1, k);
    }
    let (mean_out, var_out) = state.position_marginal(w.len() - 1)?;
    Ok(CircuitOutput { mean_out, var_out, state })
}

/// Independent homodyne outcomes of the position quadrature of `mode`.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    rng: &mut R,
    shots: usize,
) -> Result<Vec<f64>> {
    if shots == 0 {
        return domain("homodyne_sample needs at least one shot");
    }
    let (mu, var) = state.position_marginal(mode)?;
    if !(var > 0.0) {
        return Err(Error::NumericalFailure(format!("position variance {var} is not positive")));
    }
    let sd = var.sqrt();
    Ok((0..shots).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect())
}

/// Kolmogorov-Smirnov distance between `samples` and `N(mu, var)`.
pub fn ks_statistic(samples: &[f64], mu: f64, var: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let sd = var.sqrt();
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = crate::specfun::cdf((x - mu) / sd);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    fn random_state(n: usize, seed: u64) -> GaussianState {
        let mut r = rng::stream(seed, &[]);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..1.5)).collect();
        let mut st = encode(&x, &s).unwrap();
        for k in 1..n {
            apply_squeeze(&mut st, k, r.gen_range(0.3..2.0)).unwrap();
            apply_cx(&mut st, k - 1, k).unwrap();
        }
        st
    }

    #[test]
    fn vacuum_like_state() {
        let st = encode(&[0.0; 3], &[std::f64::consts::FRAC_1_SQRT_2; 3]).unwrap();
        for nu in st.symplectic_eigenvalues().unwrap() {
            assert!((nu - 0.5).abs() < 1e-12);
        }
        let (m, v) = st.position_marginal(1).unwrap();
        assert_eq!(m, 0.0);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn encoded_states_are_pure() {
        let x = [0.3, -1.2, 4.0];
        let st = encode(&x, &[0.1, 0.7, 3.0]).unwrap();
        for (j, &xj) in x.iter().enumerate() {
            assert_eq!(st.mean()[2 * j], xj);
        }
        for nu in st.symplectic_eigenvalues().unwrap() {
            assert!((nu - 0.5).abs() < 1e-10);
        }
        // (Omega V)^2 = -I/4 for pure states
        let ov = omega(3) * st.cov();
        let sq = &ov * &ov;
        assert!((sq + DMatrix::identity(6, 6) * 0.25).amax() < 1e-12);
        assert!(encode(&[1.0], &[0.0]).is_err());
        assert!(encode(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn squeeze_moments() {
        let mut st = encode(&[0.5, 1.0], &[0.4, 0.4]).unwrap();
        let orig = st.clone();
        apply_squeeze(&mut st, 0, 1.0).unwrap();
        assert_eq!(st, orig);
        apply_squeeze(&mut st, 0, -1.0).unwrap();
        assert_eq!(st.mean()[0], -0.5);
        assert_eq!(st.cov(), orig.cov());
        apply_squeeze(&mut st, 1, 2.5).unwrap();
        assert!(close(st.cov()[(2, 2)], 6.25 * 0.16, 1e-14));
        assert!(close(st.cov()[(3, 3)], 1.0 / (4.0 * 0.16 * 6.25), 1e-14));
        assert!(matches!(apply_squeeze(&mut st, 1, 0.0), Err(Error::DegenerateWeight { mode: 1 })));
        assert!(matches!(apply_squeeze(&mut st, 2, 1.0), Err(Error::ModeIndex { .. })));
    }

    #[test]
    fn cx_action_and_inverse() {
        let mut st = random_state(3, 4);
        let before = st.clone();
        let (a, b) = (st.mean()[0], st.mean()[4]);
        let v = st.cov();
        let want = v[(0, 0)] + v[(4, 4)] + 2.0 * v[(0, 4)];
        apply_cx(&mut st, 0, 2).unwrap();
        assert_eq!(st.mean()[0], a);
        assert!((st.mean()[4] - (a + b)).abs() < 1e-15);
        assert!(close(st.cov()[(4, 4)], want, 1e-13));
        // inverse: q_k -> q_k - q_j, p_j -> p_j + p_k
        let mut inv = DMatrix::identity(6, 6);
        inv[(4, 0)] = -1.0;
        inv[(1, 5)] = 1.0;
        st.transform(&inv).unwrap();
        assert!((st.mean() - before.mean()).amax() < 1e-12);
        assert!((st.cov() - before.cov()).amax() < 1e-12);
        assert!(apply_cx(&mut st, 1, 1).is_err());
        assert!(apply_cx(&mut st, 0, 3).is_err());
    }

    #[test]
    fn gates_are_symplectic_and_match_row_operations() {
        let n = 4;
        let om = omega(n);
        let gates = [
            GateSpec::squeeze(2, 0.37),
            GateSpec::squeeze(0, -1.1),
            GateSpec::phase_flip(3),
            GateSpec::cx(1, 3),
            GateSpec::cx(3, 0),
        ];
        for g in gates {
            let s = g.symplectic(n).unwrap();
            assert!((&s * &om * s.transpose() - &om).amax() < 1e-12, "{g:?}");
            let mut a = random_state(n, 9);
            let mut b = a.clone();
            apply_gate(&mut a, &g).unwrap();
            b.transform(&s).unwrap();
            assert!((a.mean() - b.mean()).amax() < 1e-12);
            assert!((a.cov() - b.cov()).amax() < 1e-12);
        }
    }

    #[test]
    fn purity_is_preserved_along_circuits() {
        let st = random_state(6, 21);
        for nu in st.symplectic_eigenvalues().unwrap() {
            assert!((nu - 0.5).abs() < 1e-9, "{nu}");
        }
    }

    #[test]
    fn weight_gates_reproduce_squeeze() {
        let mut a = encode(&[0.7, -0.2], &[0.5, 0.9]).unwrap();
        let mut b = a.clone();
        for g in GateSpec::for_weight(1, -1.7).unwrap() {
            apply_gate(&mut a, &g).unwrap();
        }
        apply_squeeze(&mut b, 1, -1.7).unwrap();
        assert!((a.mean() - b.mean()).amax() < 1e-14);
        assert!((a.cov() - b.cov()).amax() < 1e-13);
        assert!(GateSpec::for_weight(0, 0.0).is_err());
    }

    #[test]
    fn circuit_closed_forms() {
        let out = run_perceptron_circuit(&[1.3], &[1.0], &[0.4]).unwrap();
        assert_eq!((out.mean_out, out.var_out), (1.3, 0.4 * 0.4));
        let out = run_perceptron_circuit(&[1.0; 3], &[1.0, -2.0, 0.5], &[0.3; 3]).unwrap();
        assert!(close(out.mean_out, -0.5, 1e-12));
        assert!(close(out.var_out, 0.4725, 1e-12));
        let gates = perceptron_gates(&[1.0, -2.0, 0.5]).unwrap();
        let mut st = encode(&[1.0; 3], &[0.3; 3]).unwrap();
        for g in &gates {
            apply_gate(&mut st, g).unwrap();
        }
        assert!((st.cov() - out.state.cov()).amax() < 1e-12);
        assert!(matches!(
            run_perceptron_circuit(&[1.0, 1.0], &[1.0, 0.0], &[0.3, 0.3]),
            Err(Error::DegenerateWeight { mode: 1 })
        ));
    }

    #[test]
    fn homodyne_statistics() {
        let out = run_perceptron_circuit(&[0.2, -0.4, 1.0], &[1.5, 0.8, -0.6], &[0.5; 3]).unwrap();
        let mut r = rng::stream(17, &[]);
        let shots = 100_000;
        let s = homodyne_sample(&out.state, 2, &mut r, shots).unwrap();
        let mean = s.iter().sum::<f64>() / shots as f64;
        assert!((mean - out.mean_out).abs() <= 4.0 * (out.var_out / shots as f64).sqrt());
        assert!(ks_statistic(&s, out.mean_out, out.var_out) <= 1.63 / (shots as f64).sqrt());
        let again = homodyne_sample(&out.state, 2, &mut rng::stream(17, &[]), shots).unwrap();
        assert_eq!(s, again);
        assert!(homodyne_sample(&out.state, 2, &mut r, 0).is_err());
    }
}
