//! Quadrature rules for integrals against the standard-normal measure
//! `dt exp(-t^2/2) / sqrt(2 pi)`.
//!
//! Two families are provided. [`QuadratureRule::gauss_hermite`] is the
//! classical rule, exact for polynomials of degree `2n - 1`. The graded
//! rules place composite Gauss-Legendre panels around a kink, with panel
//! widths growing geometrically away from it; they are used for the
//! truncated integrands `(t + k)^2 1{t > -k}` and for the free-energy
//! integrands, whose transition layer shrinks like `sqrt(1 - q)`.

use nalgebra::DMatrix;

use super::normal::pdf;

/// Nodes beyond this magnitude carry weights below 1e-297 and are dropped.
const T_MAX: f64 = 37.0;
/// Gauss-Legendre points per panel in graded rules.
pub const PANEL_ORDER: usize = 16;
pub const DEFAULT_HERMITE_ORDER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of Hermite nodes, or Legendre points per panel for graded rules.
    pub order: usize,
}

impl QuadratureRule {
    /// Gauss-Hermite rule rescaled to the standard-normal measure
    /// (nodes `sqrt(2) s_i`, weights `w_i / sqrt(pi)`).
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let (s, w) = hermite_nodes(order);
        let nodes = s.iter().map(|&x| std::f64::consts::SQRT_2 * x).collect();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let weights = w.iter().map(|&x| x * inv_sqrt_pi).collect();
        Self { nodes, weights, order }
    }

    /// Piecewise rule with a breakpoint at `kink`, for integrands that are
    /// smooth on either side of it but not across.
    pub fn split(kink: f64) -> Self {
        Self::graded(kink, 1.0, PANEL_ORDER)
    }

    /// Composite Gauss-Legendre rule with panels `[c, c + h], [c + h, c + 3h], ...`
    /// doubling in width away from `center` until they reach unit width.
    ///
    /// `scale` is the width of the innermost panels and should match the
    /// length scale of the integrand near `center`.
    pub fn graded(center: f64, scale: f64, panel_order: usize) -> Self {
        let breaks = graded_breakpoints(center, scale);
        let (gx, gw) = legendre_nodes(panel_order);
        let mut nodes = Vec::with_capacity(breaks.len() * panel_order);
        let mut weights = Vec::with_capacity(breaks.len() * panel_order);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                let t = mid + half * x;
                nodes.push(t);
                weights.push(half * w * pdf(t));
            }
        }
        Self { nodes, weights, order: panel_order }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_HERMITE_ORDER)
    }
}

fn graded_breakpoints(center: f64, scale: f64) -> Vec<f64> {
    let inner = scale.clamp(1e-12, 1.0);
    let c = if center.abs() < T_MAX - 1.0 { center } else { 0.0 };
    let side = |dir: f64| {
        let mut pts = Vec::new();
        let mut x = c;
        let mut h = inner;
        loop {
            x += dir * h;
            if dir * x >= T_MAX {
                pts.push(dir * T_MAX);
                break;
            }
            pts.push(x);
            h = (2.0 * h).min(1.0);
        }
        pts
    };
    let mut left = side(-1.0);
    left.reverse();
    let mut out = left;
    out.push(c);
    out.extend(side(1.0));
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1], increasing nodes.
pub(crate) fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp;
        loop {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Hermite nodes and weights for the weight `exp(-x^2)`, increasing
/// nodes.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished
/// by Newton steps on the orthonormal Hermite recurrence, which also gives
/// the weights with full relative accuracy in the tails.
fn hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(f64::total_cmp);

    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &z0) in guesses.iter().enumerate().skip(n / 2) {
        let mut z = if n % 2 == 1 && i == n / 2 { 0.0 } else { z0 };
        let mut pp = 0.0;
        for _ in 0..8 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `sum_i w_i f(t_i)` with Neumaier compensated summation.
pub fn gauss_integral<F: FnMut(f64) -> f64>(mut f: F, rule: &QuadratureRule) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let term = w * f(t);
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
    }
    sum + comp
}
