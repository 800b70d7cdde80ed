//! Maximal-stability solver.
//!
//! Writing `a_mu = xi_mu x_mu`, the optimal perceptron maximizes
//! `min_mu a_mu . w / |w|`. Three tools cover the cases:
//!
//! * two small linear programs decide the sign of `kappa_max` exactly
//!   (strict separability, and whether the origin lies in the interior of
//!   the convex hull of the `a_mu`);
//! * for separable sets, the dual of `min |v|^2 s.t. a_mu . v >= 1` is
//!   the nearest point of the convex hull of the `a_mu` to the origin;
//!   Wolfe's algorithm finds it in finitely many steps and
//!   `kappa_max = 1 / |v*|`, with a duality-gap certificate;
//! * for non-separable sets the max-min value is estimated by projected
//!   gradient ascent on the sphere and flagged as approximate.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, PatternSet, WeightVector, TIE_TOLERANCE};
use crate::error::{domain, Error, Result};
use crate::rng;

/// Duality gap at which the nearest-point search stops.
const GAP_TOL: f64 = 1e-8;
/// Major iterations of the nearest-point search.
const MAX_EPOCHS: usize = 100_000;
/// LP optimal values below this are treated as zero.
const LP_TOL: f64 = 1e-9;
const RESTARTS: usize = 20;
const ASCENT_STEPS: usize = 600;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxStability {
    /// Optimal weights on the sphere `|w|^2 = N`.
    pub weights: WeightVector,
    /// `min_mu Delta_mu` at `weights`.
    pub kappa_max: f64,
    /// False when `kappa_max < 0` and the value comes from the
    /// projected-gradient search rather than a certified optimum.
    pub exact: bool,
}

/// Maximizes the smallest stability over the sphere.
pub fn max_stability(ps: &PatternSet) -> Result<MaxStability> {
    if ps.n_patterns() == 0 {
        return domain("max_stability needs at least one pattern");
    }
    let sys = System::new(ps);
    if let Some(w) = sys.strictly_separable()? {
        if sys.has_zero_row() {
            // unreachable in exact arithmetic; keep the LP answer
            return sys.finish(w, true);
        }
        let dual = sys.ascend(None)?;
        let v = match dual {
            Ascent::Converged(v) => v,
            Ascent::Decided(..) => unreachable!("no target was given"),
        };
        return sys.finish(v, true);
    }
    let (w, value) = sys.maxmin_search(ps.seed());
    if sys.origin_interior()? {
        let mut out = sys.finish(w, false)?;
        out.kappa_max = out.kappa_max.min(value).min(0.0);
        Ok(out)
    } else {
        // The optimum is exactly zero: some direction meets every
        // constraint with equality or better, but none strictly.
        let mut out = sys.finish(w, true)?;
        out.kappa_max = 0.0;
        Ok(out)
    }
}

/// True iff `kappa_max >= kappa - tol`.
pub fn is_satisfiable(ps: &PatternSet, kappa: f64, tol: f64) -> Result<bool> {
    if !(tol > 0.0) || !tol.is_finite() {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if !kappa.is_finite() {
        return domain(format!("kappa must be finite, got {kappa}"));
    }
    if ps.n_patterns() == 0 {
        return Ok(true);
    }
    let sys = System::new(ps);
    let target = kappa - tol;
    if target > 0.0 {
        if sys.has_zero_row() {
            return Ok(false);
        }
        return match sys.ascend(Some(target))? {
            Ascent::Decided(sat) => Ok(sat),
            Ascent::Converged(v) => Ok(sys.min_margin(&v) >= target),
        };
    }
    if sys.strictly_separable()?.is_some() {
        return Ok(true);
    }
    if !sys.origin_interior()? {
        return Ok(true);
    }
    // kappa_max < 0; only a clearly negative target can still be met.
    if target < -LP_TOL {
        let (_, value) = sys.maxmin_search(ps.seed());
        return Ok(value >= target);
    }
    Ok(false)
}

enum Ascent {
    /// Early decision against a target margin.
    Decided(bool),
    /// Dual optimum reached; holds the primal `v*`.
    Converged(Vec<f64>),
}

struct System {
    p: usize,
    n: usize,
    /// Row-major `p x N`, rows `a_mu`.
    a: Vec<f64>,
    norms2: Vec<f64>,
}

impl System {
    fn new(ps: &PatternSet) -> Self {
        let a = ps.signed_rows();
        let n = ps.n_features();
        let norms2 = a.chunks_exact(n).map(|r| dot(r, r)).collect();
        Self { p: ps.n_patterns(), n, a, norms2 }
    }

    fn row(&self, mu: usize) -> &[f64] {
        &self.a[mu * self.n..(mu + 1) * self.n]
    }

    fn has_zero_row(&self) -> bool {
        self.norms2.iter().any(|&x| x == 0.0)
    }

    /// `min_mu a_mu . w / |w|`.
    fn min_margin(&self, w: &[f64]) -> f64 {
        let norm = dot(w, w).sqrt();
        (0..self.p).map(|mu| dot(self.row(mu), w)).fold(f64::INFINITY, f64::min) / norm
    }

    fn finish(&self, w: Vec<f64>, exact: bool) -> Result<MaxStability> {
        let weights = WeightVector::on_sphere(w)?;
        let kappa_max = self.min_margin(weights.as_slice());
        Ok(MaxStability { weights, kappa_max, exact })
    }

    /// LP: max t s.t. `a_mu . w >= t`, `w` in the unit box. Returns a
    /// strictly separating `w` when `t* > 0`.
    fn strictly_separable(&self) -> Result<Option<Vec<f64>>> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let w: Vec<_> = (0..self.n).map(|_| lp.add_var(0.0, (-1.0, 1.0))).collect();
        let t = lp.add_var(1.0, (0.0, f64::INFINITY));
        for mu in 0..self.p {
            let mut expr = LinearExpr::empty();
            for (j, &x) in self.row(mu).iter().enumerate() {
                if x != 0.0 {
                    expr.add(w[j], x);
                }
            }
            expr.add(t, -1.0);
            lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::NumericalFailure(format!("separability LP: {e}")))?;
        if sol.objective() > LP_TOL {
            let out: Vec<f64> = w.iter().map(|&v| *sol.var_value(v)).collect();
            if self.min_margin(&out) > 0.0 {
                return Ok(Some(out));
            }
        }
        Ok(None)
    }

    /// Whether the origin is an interior point of the convex hull of the
    /// rows, which is equivalent to `kappa_max < 0`.
    ///
    /// LP: max s s.t. `sum y_mu a_mu = 0`, `sum y_mu = 1`, `y_mu >= s`.
    /// A positive optimum puts the origin in the relative interior; it is
    /// interior when the rows also span the whole space.
    fn origin_interior(&self) -> Result<bool> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let y: Vec<_> = (0..self.p).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let s = lp.add_var(1.0, (0.0, 1.0));
        for j in 0..self.n {
            let expr: LinearExpr = (0..self.p)
                .filter(|&mu| self.a[mu * self.n + j] != 0.0)
                .map(|mu| (y[mu], self.a[mu * self.n + j]))
                .collect();
            lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
        }
        lp.add_constraint(y.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
        for &v in &y {
            lp.add_constraint(&[(v, 1.0), (s, -1.0)], ComparisonOp::Ge, 0.0);
        }
        let s_star = match lp.solve() {
            Ok(sol) => sol.objective(),
            Err(minilp::Error::Infeasible) => return Ok(false),
            Err(e) => return Err(Error::NumericalFailure(format!("hull LP: {e}"))),
        };
        if s_star <= LP_TOL {
            return Ok(false);
        }
        Ok(self.rank() == self.n)
    }

    fn rank(&self) -> usize {
        if self.p < self.n {
            return self.p;
        }
        let m = DMatrix::from_row_slice(self.p, self.n, &self.a);
        let sv = m.singular_values();
        let top = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count()
    }

    /// Wolfe's min-norm-point algorithm on the convex hull of the rows,
    /// which is the dual of `min |v|^2 s.t. a_mu . v >= 1`: the nearest
    /// point `z*` gives `v* = z* / |z*|^2` and `kappa_max = |z*|`.
    ///
    /// Every iterate `z` lies in the hull, so `min_mu a_mu . z / |z| <=
    /// kappa_max <= |z|`; with a target the search returns as soon as these
    /// bounds decide the comparison.
    fn ascend(&self, target: Option<f64>) -> Result<Ascent> {
        let start = (0..self.p)
            .min_by(|&i, &j| self.norms2[i].total_cmp(&self.norms2[j]))
            .expect("at least one row");
        let mut support = vec![start];
        let mut lambda = vec![1.0];
        let mut z = self.row(start).to_vec();
        let mut gap = f64::INFINITY;
        let scale = self.norms2.iter().copied().fold(0.0, f64::max);
        for _ in 0..MAX_EPOCHS {
            let zz = dot(&z, &z);
            if zz == 0.0 {
                // the hull contains the origin, so kappa_max <= 0
                return match target {
                    Some(_) => Ok(Ascent::Decided(false)),
                    None => Err(Error::NumericalFailure("hull contains the origin".into())),
                };
            }
            let norm = zz.sqrt();
            let (j, m) = (0..self.p)
                .map(|mu| (mu, dot(self.row(mu), &z)))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("at least one row");
            let lower = m / norm;
            let upper = norm;
            if let Some(k) = target {
                if lower >= k - TIE_TOLERANCE {
                    return Ok(Ascent::Decided(true));
                }
                if upper < k - TIE_TOLERANCE {
                    return Ok(Ascent::Decided(false));
                }
            }
            gap = upper - lower;
            if gap <= GAP_TOL * upper.max(1.0) || zz - m <= 1e-15 * scale || support.contains(&j) {
                let v = z.iter().map(|x| x / zz).collect();
                return Ok(Ascent::Converged(v));
            }
            support.push(j);
            lambda.push(0.0);
            loop {
                let mu = self.affine_min_norm(&support)?;
                if mu.iter().all(|&x| x > 0.0) {
                    lambda = mu;
                    break;
                }
                let theta = lambda
                    .iter()
                    .zip(&mu)
                    .filter(|(_, &m)| m <= 0.0)
                    .map(|(&l, &m)| l / (l - m))
                    .fold(1.0, f64::min);
                for (l, &m) in lambda.iter_mut().zip(&mu) {
                    *l = theta * m + (1.0 - theta) * *l;
                }
                let mut k = 0;
                while k < support.len() {
                    if lambda[k] <= 1e-15 {
                        support.swap_remove(k);
                        lambda.swap_remove(k);
                    } else {
                        k += 1;
                    }
                }
                if support.len() == 1 {
                    lambda = vec![1.0];
                    break;
                }
            }
            let total: f64 = lambda.iter().sum();
            z.iter_mut().for_each(|x| *x = 0.0);
            for (&mu, &l) in support.iter().zip(&lambda) {
                z.iter_mut().zip(self.row(mu)).for_each(|(zi, &ai)| *zi += l / total * ai);
            }
        }
        Err(Error::Convergence { epochs: MAX_EPOCHS, gap })
    }

    /// Weights of the point of minimum norm in the affine hull of the
    /// rows in `support` (weights sum to one, signs unconstrained).
    fn affine_min_norm(&self, support: &[usize]) -> Result<Vec<f64>> {
        let k = support.len();
        let mut m = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = nalgebra::DVector::zeros(k + 1);
        for (i, &a) in support.iter().enumerate() {
            for (j, &b) in support.iter().enumerate().skip(i) {
                let g = dot(self.row(a), self.row(b));
                m[(i, j)] = g;
                m[(j, i)] = g;
            }
            m[(i, k)] = 1.0;
            m[(k, i)] = 1.0;
        }
        rhs[k] = 1.0;
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericalFailure("singular affine system".into()))?;
        Ok(sol.iter().take(k).copied().collect())
    }

    /// Projected-gradient ascent on a softmin of the margins over the unit
    /// sphere, with random restarts. Returns the best direction found and
    /// its exact smallest margin.
    fn maxmin_search(&self, seed: u64) -> (Vec<f64>, f64) {
        let mut rng = rng::stream(seed, &[0x6d61_786d_696e]);
        let scale = self.norms2.iter().copied().fold(0.0, f64::max).sqrt().max(1e-300);
        let mut best_w = vec![0.0; self.n];
        best_w[0] = 1.0;
        let mut best = self.min_margin(&best_w);
        let mut z = vec![0.0; self.p];
        let mut g = vec![0.0; self.n];
        for restart in 0..RESTARTS {
            let mut w: Vec<f64> = if restart == 0 {
                (0..self.n).map(|j| (0..self.p).map(|mu| self.a[mu * self.n + j]).sum()).collect()
            } else {
                (0..self.n).map(|_| rng.sample(StandardNormal)).collect()
            };
            if !normalize(&mut w) {
                continue;
            }
            let mut beta = 2.0 / scale;
            for it in 0..ASCENT_STEPS {
                let mut m = f64::INFINITY;
                for (mu, zm) in z.iter_mut().enumerate() {
                    *zm = dot(self.row(mu), &w);
                    m = m.min(*zm);
                }
                if m > best {
                    best = m;
                    best_w.copy_from_slice(&w);
                }
                g.iter_mut().for_each(|x| *x = 0.0);
                let mut zsum = 0.0;
                for (mu, &zm) in z.iter().enumerate() {
                    let pi = (-beta * (zm - m)).exp();
                    zsum += pi;
                    g.iter_mut().zip(self.row(mu)).for_each(|(gi, &ai)| *gi += pi * ai);
                }
                g.iter_mut().for_each(|x| *x /= zsum);
                let radial = dot(&g, &w);
                let eta = 0.2 / (scale * (1.0 + it as f64 / 60.0));
                w.iter_mut().zip(&g).for_each(|(wi, &gi)| *wi += eta * (gi - radial * *wi));
                if !normalize(&mut w) {
                    break;
                }
                beta = (beta * 1.02).min(1e4 / scale);
            }
        }
        (best_w, best)
    }
}

fn normalize(w: &mut [f64]) -> bool {
    let norm = dot(w, w).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    w.iter_mut().for_each(|x| *x /= norm);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percep::{generate_patterns, stabilities, PatternDistribution};

    #[test]
    fn single_pattern_aligns() {
        let ps = generate_patterns(16, 1, PatternDistribution::Binary, 1).unwrap();
        let out = max_stability(&ps).unwrap();
        assert!(out.exact);
        assert!((out.kappa_max - 4.0).abs() < 1e-9, "{}", out.kappa_max);
        assert!((out.weights.norm().powi(2) / 16.0 - 1.0).abs() < 1e-10);
        assert!(is_satisfiable(&ps, 2.0, 1e-9).unwrap());
        assert!(!is_satisfiable(&ps, 4.1, 1e-9).unwrap());
    }

    #[test]
    fn xor_is_unsatisfiable() {
        let ps = PatternSet::xor();
        let out = max_stability(&ps).unwrap();
        assert!(out.kappa_max <= 0.0);
        assert!(!out.exact);
        // best direction is an axis, with margin -1 per unit norm
        assert!((out.kappa_max + 1.0).abs() < 1e-6, "{}", out.kappa_max);
        assert!(!is_satisfiable(&ps, 0.0, 1e-12).unwrap());
    }

    #[test]
    fn orthogonal_complement_gives_zero() {
        // rows span only the first axis; w along the second axis gives 0
        let ps = PatternSet::new(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![1, 1],
            PatternDistribution::Gaussian,
            0,
        )
        .unwrap();
        let out = max_stability(&ps).unwrap();
        assert_eq!(out.kappa_max, 0.0);
        assert!(out.exact);
        assert!(is_satisfiable(&ps, 0.0, 1e-12).unwrap());
        assert!(!is_satisfiable(&ps, 0.1, 1e-12).unwrap());
    }

    #[test]
    fn two_patterns_closed_form() {
        // a1 = (1, 0), a2 = (cos t, sin t): the optimum bisects them with
        // margin cos(t / 2)
        let t: f64 = 2.0;
        let ps = PatternSet::new(
            vec![vec![1.0, 0.0], vec![t.cos(), t.sin()]],
            vec![1, 1],
            PatternDistribution::Gaussian,
            0,
        )
        .unwrap();
        let out = max_stability(&ps).unwrap();
        assert!((out.kappa_max - (t / 2.0).cos()).abs() < 1e-9);
    }

    #[test]
    fn optimum_resists_perturbation() {
        let ps = generate_patterns(10, 12, PatternDistribution::Gaussian, 77).unwrap();
        let out = max_stability(&ps).unwrap();
        assert!(out.kappa_max > 0.0);
        let d = stabilities(&out.weights, &ps).unwrap();
        assert!((d.min() - out.kappa_max).abs() < 1e-12);
        let mut rng = rng::stream(5, &[]);
        for _ in 0..1000 {
            let eps: f64 = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let w: Vec<f64> = out
                .weights
                .as_slice()
                .iter()
                .map(|&x| x + eps * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let w = WeightVector::new(w).unwrap();
            assert!(stabilities(&w, &ps).unwrap().min() <= out.kappa_max + 1e-5);
        }
    }

    #[test]
    fn satisfiability_matches_kappa_max() {
        for seed in 0..20 {
            let ps = generate_patterns(8, 12, PatternDistribution::Gaussian, seed).unwrap();
            let out = max_stability(&ps).unwrap();
            let sat0 = is_satisfiable(&ps, 0.0, 1e-12).unwrap();
            assert_eq!(sat0, out.kappa_max > 0.0, "seed {seed}");
            if out.kappa_max > 0.0 {
                let k = out.kappa_max;
                assert!(is_satisfiable(&ps, 0.9 * k, 1e-12).unwrap());
                assert!(!is_satisfiable(&ps, 1.1 * k, 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn empty_set_and_bad_tolerance() {
        let ps = PatternSet::empty(4, PatternDistribution::Binary);
        assert!(is_satisfiable(&ps, 3.0, 1e-9).unwrap());
        assert!(max_stability(&ps).is_err());
        assert!(is_satisfiable(&PatternSet::xor(), 0.0, 0.0).is_err());
    }
}
