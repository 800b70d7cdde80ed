//! Critical capacities and the replica-symmetric free energy.
//!
//! For stability threshold `k` the classical critical load is
//!
//! ```text
//! 1 / alpha_c(k) = int_{-k}^inf Dt (t + k)^2 = (1 + k^2) Phi(k) + k phi(k)
//! ```
//!
//! and the homodyne-readout perceptron with per-pattern error tolerance
//! `epsilon` and encoding width `sigma` has the same capacity at the shifted
//! threshold `k~ = k + sigma Phi^-1(1 - epsilon)`.
//!
//! Below capacity the typical log-volume per weight is
//!
//! ```text
//! F(alpha, k) = min_q  alpha int Dt ln Q((t sqrt(q) + k) / sqrt(1 - q))
//!                      + q / (2 (1 - q)) + ln(1 - q) / 2
//! ```
//!
//! with `Q = 1 - Phi`. Its stationarity condition is written here in the
//! normalized form
//!
//! ```text
//! rho(q) = alpha sqrt(1 - q) / sqrt(q) int Dt A(u) (t + k sqrt(q)) - q = 0,
//! u = (k + t sqrt(q)) / sqrt(1 - q),
//! ```
//!
//! where `A` is the inverse Mills ratio. `rho` is positive at `q = 0` and
//! tends to `alpha / alpha_c - 1` as `q -> 1`.

use crate::error::{domain, Error, Result};
use crate::specfun::{self, gauss_integral, QuadratureRule};

/// Upper end of the overlap search interval for the golden-section stage.
const Q_SEARCH_MAX: f64 = 1.0 - 1e-6;
/// Upper end of the root bracket for the stationarity condition.
const Q_ROOT_MAX: f64 = 1.0 - 1e-9;
/// Relative distance to `alpha_c` below which the free energy is reported
/// as diverged.
const DIVERGENCE_MARGIN: f64 = 1e-6;
/// Agreement required between the closed form and quadrature of `1/alpha_c`.
const ROUTE_AGREEMENT: f64 = 1e-8;

/// Stability threshold, per-pattern error tolerance and encoding width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    kappa: f64,
    epsilon: f64,
    sigma: f64,
}

impl TheoryParams {
    pub fn new(kappa: f64, epsilon: f64, sigma: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return domain(format!("kappa must be finite and >= 0, got {kappa}"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return domain(format!("sigma must be finite and >= 0, got {sigma}"));
        }
        Ok(Self { kappa, epsilon, sigma })
    }

    /// Classical parameters: `sigma = 0`, so `kappa_tilde == kappa`.
    pub fn classical(kappa: f64) -> Result<Self> {
        Self::new(kappa, 0.5, 0.0)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kappa_tilde(&self) -> f64 {
        effective_stability(self)
    }
}

/// Replica-symmetric saddle point at a given load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint {
    pub q: f64,
    pub free_energy: f64,
    /// `F_S = i * conj_f` with `conj_f = -q / (1 - q)^2`.
    pub conj_f: f64,
    /// `E_S = i * conj_e` with `conj_e = -(1 - 2q) / (1 - q)^2`.
    pub conj_e: f64,
}

impl SaddlePoint {
    fn at(q: f64, free_energy: f64) -> Self {
        let (conj_e, conj_f) = conjugate_parameters(q);
        Self { q, free_energy, conj_f, conj_e }
    }
}

/// `1/alpha_c(k)` in closed form; valid for any real `k`.
pub fn inverse_capacity_closed(k: f64) -> f64 {
    (1.0 + k * k) * specfun::cdf(k) + k * specfun::std_normal_pdf(k)
}

/// `int_{-k}^inf Dt (t + k)^2` by a quadrature rule split at the kink.
pub fn inverse_capacity_quadrature(k: f64) -> f64 {
    let rule = QuadratureRule::split(-k);
    gauss_integral(|t| if t > -k { (t + k) * (t + k) } else { 0.0 }, &rule)
}

/// Critical capacity `alpha_c(kappa)` of the classical perceptron.
pub fn classical_capacity(kappa: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa < 0.0 {
        return domain(format!("classical_capacity: kappa must be finite and >= 0, got {kappa}"));
    }
    checked_capacity(kappa)
}

fn checked_capacity(k: f64) -> Result<f64> {
    let closed = inverse_capacity_closed(k);
    let quad = inverse_capacity_quadrature(k);
    if (closed - quad).abs() > ROUTE_AGREEMENT * closed.max(1.0) {
        return Err(Error::NumericalFailure(format!(
            "1/alpha_c({k}): closed form {closed} and quadrature {quad} disagree"
        )));
    }
    Ok(1.0 / closed)
}

/// `kappa + sigma * Phi^-1(1 - epsilon)`.
pub fn effective_stability(params: &TheoryParams) -> f64 {
    if params.sigma == 0.0 {
        return params.kappa;
    }
    params.kappa + params.sigma * specfun::quantile(1.0 - params.epsilon)
}

/// Capacity of the homodyne-readout perceptron, `alpha_c(kappa_tilde)`.
pub fn quantum_capacity(params: &TheoryParams) -> Result<f64> {
    classical_capacity(effective_stability(params))
}

/// Capacity from the `q -> 1` limit of the saddle-point condition, where the
/// integrand `A(u) sqrt(1 - q) (t + k sqrt(q)) / q^(3/2)` tends to
/// `(t + k)^2 1{t > -k}`.
pub fn capacity_from_saddle(kappa_eff: f64) -> f64 {
    1.0 / inverse_capacity_quadrature(kappa_eff)
}

fn overlap_rule(kappa: f64, q: f64) -> QuadratureRule {
    if q <= 0.0 {
        return QuadratureRule::split(0.0);
    }
    let sq = q.sqrt();
    // Transition layer of the integrand sits at t = -k / sqrt(q) with width
    // sqrt((1 - q) / q).
    let width = ((1.0 - q) / q).sqrt();
    QuadratureRule::graded(-kappa / sq, width.min(1.0), specfun::PANEL_ORDER)
}

/// The bracket minimized over `q` in the free energy.
pub fn rs_bracket(alpha: f64, kappa: f64, q: f64) -> f64 {
    let sq = q.sqrt();
    let s1 = (1.0 - q).sqrt();
    let rule = overlap_rule(kappa, q);
    let energetic = gauss_integral(|t| specfun::log_sf((t * sq + kappa) / s1), &rule);
    alpha * energetic + q / (2.0 * (1.0 - q)) + 0.5 * (1.0 - q).ln()
}

/// Normalized stationarity residual `rho(q)`.
///
/// The `t / sqrt(q)` part of the integral is rewritten by Gaussian
/// integration by parts, `E[t A(u)] / sqrt(q) = E[A'(u)] / sqrt(1 - q)` with
/// `A' = A (A - u)`, which removes the `1/sqrt(q)` singularity at small `q`.
pub fn saddle_residual(alpha: f64, kappa: f64, q: f64) -> f64 {
    let s1 = (1.0 - q).sqrt();
    let sq = q.sqrt();
    let rule = overlap_rule(kappa, q);
    let integral = gauss_integral(
        |t| {
            let u = (kappa + t * sq) / s1;
            let a = specfun::inv_mills(u);
            a * specfun::inv_mills_excess(u) + kappa * s1 * a
        },
        &rule,
    );
    alpha * integral - q
}

/// Coefficients of the conjugate order parameters at overlap `q`,
/// returned as `(conj_e, conj_f)`.
pub fn conjugate_parameters(q: f64) -> (f64, f64) {
    let d = (1.0 - q) * (1.0 - q);
    (-(1.0 - 2.0 * q) / d, -q / d)
}

/// Entropic part of the replica-symmetric functional per replica, as a
/// function of the conjugate coefficients (`E = i conj_e`, `F = i conj_f`):
///
/// `(ln 2pi - ln(iE + iF) + F/(E + F) + iE + i q F) / 2`.
///
/// It is stationary in `(conj_e, conj_f)` at [`conjugate_parameters`].
pub fn conjugate_bracket(q: f64, conj_e: f64, conj_f: f64) -> f64 {
    let ie = -conj_e;
    let i_f = -conj_f;
    let s = ie + i_f;
    0.5 * ((2.0 * std::f64::consts::PI).ln() - s.ln() + i_f / s + ie + q * i_f)
}

fn check_load(alpha: f64, kappa_eff: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    if !kappa_eff.is_finite() {
        return domain(format!("kappa_eff must be finite, got {kappa_eff}"));
    }
    let alpha_c = 1.0 / inverse_capacity_closed(kappa_eff);
    if alpha >= alpha_c * (1.0 - DIVERGENCE_MARGIN) {
        return Err(Error::Diverged { alpha, alpha_c });
    }
    Ok(alpha_c)
}

/// Root of the stationarity condition in `(0, 1 - 1e-9)`.
pub fn saddle_overlap(alpha: f64, kappa_eff: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let f = |q: f64| saddle_residual(alpha, kappa_eff, q);
    let (lo, hi) = (0.0, Q_ROOT_MAX);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::NumericalFailure(format!(
            "saddle_overlap(alpha={alpha}, kappa={kappa_eff}): no sign change on [0, {hi}], \
             residual {f_lo:e} at q=0 and {f_hi:e} at q={hi}"
        )));
    }
    brent_root(f, lo, hi, f_lo, f_hi, 1e-15)
}

/// Replica-symmetric free energy and its minimizing overlap.
pub fn free_energy(alpha: f64, kappa_eff: f64) -> Result<SaddlePoint> {
    check_load(alpha, kappa_eff)?;
    let bracket = |q: f64| rs_bracket(alpha, kappa_eff, q);
    let mut q = golden_section_min(bracket, 0.0, Q_SEARCH_MAX, 1e-10);

    // Newton refinement on the stationarity condition; the bracket is flat
    // near its minimum, so function values alone cannot pin q to 1e-8.
    let rho = |q: f64| saddle_residual(alpha, kappa_eff, q);
    for _ in 0..3 {
        let h = 1e-7 * (1.0 - q).min(q).max(1e-9);
        let r = rho(q);
        let slope = (rho(q + h) - rho(q - h)) / (2.0 * h);
        if !(slope < 0.0) {
            break;
        }
        let next = (q - r / slope).clamp(0.5 * q, q + 0.5 * (Q_ROOT_MAX - q));
        if (next - q).abs() < 1e-15 {
            q = next;
            break;
        }
        q = next;
    }
    if q < 1e-300 {
        q = 0.0;
    }
    let fe = bracket(q).min(0.0);
    Ok(SaddlePoint::at(q, fe))
}

/// Brent's root finder on a sign-changing bracket.
fn brent_root<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
) -> Result<f64> {
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NumericalFailure("Brent root finder did not converge".into()))
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    // the endpoints themselves are candidates when the minimum sits there
    [a, mid, b]
        .into_iter()
        .map(|x| (x, f(x)))
        .min_by(|l, r| l.1.total_cmp(&r.1))
        .map(|(x, _)| x)
        .unwrap_or(mid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_capacity_reference_values() {
        assert!((classical_capacity(0.0).unwrap() - 2.0).abs() < 1e-9);
        // closed form at 50 digits: 0.51957222960493796948...
        assert!((classical_capacity(1.0).unwrap() - 0.519_572_229_604_938).abs() < 1e-12);
        assert!((classical_capacity(0.5).unwrap() - 0.961_205_052_801_541_8).abs() < 1e-12);
        assert!((classical_capacity(2.0).unwrap() - 0.200_231_015_601_755_46).abs() < 1e-12);
        assert!(classical_capacity(-0.1).is_err());
        assert!(classical_capacity(f64::NAN).is_err());
    }

    #[test]
    fn capacity_decreases_with_kappa() {
        let a5 = classical_capacity(5.0).unwrap();
        let a1 = classical_capacity(1.0).unwrap();
        let a0 = classical_capacity(0.0).unwrap();
        assert!(a5 < a1 && a1 < a0);
    }

    #[test]
    fn params_validation() {
        assert!(TheoryParams::new(-0.1, 0.1, 0.5).is_err());
        assert!(TheoryParams::new(0.1, 0.0, 0.5).is_err());
        assert!(TheoryParams::new(0.1, 1.0, 0.5).is_err());
        assert!(TheoryParams::new(0.1, 0.1, -0.5).is_err());
        assert!(TheoryParams::new(0.1, 0.1, f64::INFINITY).is_err());
        assert!(TheoryParams::new(0.0, 0.999, 3.0).is_ok());
    }

    #[test]
    fn effective_stability_examples() {
        let p = TheoryParams::new(0.3, 0.5, 2.0).unwrap();
        assert_eq!(effective_stability(&p), 0.3);
        let p = TheoryParams::new(0.3, 0.01, 0.0).unwrap();
        assert_eq!(effective_stability(&p), 0.3);
        let p = TheoryParams::new(0.0, 0.1, 0.5).unwrap();
        // 0.5 * Phi^-1(0.9), bisection reference 0.64077578277230023
        assert!((effective_stability(&p) - 0.640_775_8).abs() < 1e-6);
        assert!((effective_stability(&p) - 0.640_775_782_772_300_2).abs() < 1e-14);
    }

    #[test]
    fn quantum_capacity_examples() {
        let p = TheoryParams::new(0.0, 0.5, 1.0).unwrap();
        assert!((quantum_capacity(&p).unwrap() - 2.0).abs() < 1e-9);
        let p = TheoryParams::new(0.0, 0.1, 0.5).unwrap();
        // closed form at kappa~ = 0.64077578...: 0.79945563858239444
        let v = quantum_capacity(&p).unwrap();
        assert!((v - 0.799).abs() < 1e-3);
        assert!((v - 0.799_455_638_582_394_4).abs() < 1e-12);
        let p = TheoryParams::new(0.5, 0.25, 0.8).unwrap();
        assert!(quantum_capacity(&p).unwrap() < classical_capacity(0.5).unwrap());
    }

    #[test]
    fn saddle_route_matches_closed_form() {
        assert!((capacity_from_saddle(0.0) - 2.0).abs() < 1e-8);
        let c1 = classical_capacity(1.0).unwrap();
        assert!((capacity_from_saddle(1.0) - c1).abs() < 1e-8);
        let p = TheoryParams::new(0.0, 0.1, 0.5).unwrap();
        let kt = effective_stability(&p);
        assert!((capacity_from_saddle(kt) - quantum_capacity(&p).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn residual_limits() {
        // rho(0) = alpha A(kappa)^2
        let a = specfun::inv_mills(0.3);
        assert!((saddle_residual(0.7, 0.3, 0.0) - 0.7 * a * a).abs() < 1e-12);
        // rho(q -> 1) -> alpha / alpha_c - 1
        let lim = 0.7 * inverse_capacity_closed(0.3) - 1.0;
        assert!((saddle_residual(0.7, 0.3, 1.0 - 1e-12) - lim).abs() < 1e-5);
    }

    #[test]
    fn free_energy_reference_points() {
        // 50-digit references: root of the stationarity condition and the
        // bracket value there.
        let cases = [
            (0.5, 0.0, 0.307_393_175_379_749_06, -0.377_669_575_131_684_1),
            (0.5, 0.3, 0.465_034_569_828_110_5, -0.567_479_379_466_970_6),
            (1.0, 0.0, 0.585_311_851_791_098_4, -0.855_820_596_714_761_6),
            (1.9, 0.0, 0.970_874_917_455_627_2, -3.146_723_729_457_289_5),
            (1e-3, 0.0, 6.365_832_262_955_907e-4, -6.932_485_389_455_717e-4),
        ];
        for (alpha, kappa, q_ref, f_ref) in cases {
            let sp = free_energy(alpha, kappa).unwrap();
            assert!((sp.q - q_ref).abs() < 1e-8, "alpha={alpha}: q={} vs {q_ref}", sp.q);
            assert!((sp.free_energy - f_ref).abs() < 1e-10, "alpha={alpha}: F={}", sp.free_energy);
            let q = saddle_overlap(alpha, kappa).unwrap();
            assert!((q - q_ref).abs() < 1e-9, "alpha={alpha}: root {q} vs {q_ref}");
            assert!(saddle_residual(alpha, kappa, q).abs() < 1e-10);
        }
    }

    #[test]
    fn free_energy_errors() {
        assert!(matches!(free_energy(2.0, 0.0), Err(Error::Diverged { .. })));
        assert!(matches!(free_energy(2.0 * (1.0 - 1e-7), 0.0), Err(Error::Diverged { .. })));
        assert!(matches!(free_energy(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(free_energy(-1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(saddle_overlap(2.5, 0.0), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn conjugate_coefficients_by_construction() {
        for q in [0.0, 0.2, 0.5, 0.9] {
            let sp = SaddlePoint::at(q, 0.0);
            assert_eq!(sp.conj_f, -q / ((1.0 - q) * (1.0 - q)));
            assert_eq!(sp.conj_e, -(1.0 - 2.0 * q) / ((1.0 - q) * (1.0 - q)));
        }
    }
}
