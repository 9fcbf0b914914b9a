//! Regularized IRLS for weighted lp regression in patch space.
//!
//! Minimizes `sum_j w_j * ||P - P_j||^p` for `0 < p <= 2` by repeatedly
//! solving the weighted least-squares surrogate whose closed-form solution is
//!
//! ```text
//! P(k) = sum_j w_j mu_j P_j / sum_j w_j mu_j,   mu_j = (||P(k-1) - P_j||^2 + eps(k))^(p/2 - 1)
//! ```
//!
//! `eps` starts at `eps_init` and is multiplied by `eps_shrink` while the
//! relative iterate change is below `sqrt(eps) / 100`, down to `eps_floor`.
//! A step that barely moves can therefore shrink `eps` several decades at once.
//! The solve has converged once `eps` sits at the floor and the iterate moves
//! by less than `tol`. With `p = 2` every multiplier is 1 and one update gives
//! the weighted mean, so the loop is skipped.

use crate::error::{param, Error, Result};
use crate::image::{squared_distance, Patch};

/// Solver settings. See [`IrlsConfig::for_patch`] for the defaults used by the denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsConfig {
    pub p: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub eps_init: f64,
    pub eps_shrink: f64,
    pub eps_floor: f64,
}

pub const DEFAULT_EPS_INIT: f64 = 1.0;
pub const DEFAULT_EPS_SHRINK: f64 = 0.1;
pub const DEFAULT_EPS_FLOOR: f64 = 1e-8;

/// Below this `p` the iteration cap is raised.
pub const NONCONVEX_SLOW_P: f64 = 0.4;

impl IrlsConfig {
    /// Default schedule for patches of side `patch_side`: 50 iterations for
    /// `p >= 0.4`, 200 below, and `tol = 1e-6 * patch_side`.
    pub fn for_patch(p: f64, patch_side: usize) -> Result<Self> {
        let cfg = Self {
            p,
            max_iters: if p < NONCONVEX_SLOW_P { 200 } else { 50 },
            tol: 1e-6 * patch_side as f64,
            eps_init: DEFAULT_EPS_INIT,
            eps_shrink: DEFAULT_EPS_SHRINK,
            eps_floor: DEFAULT_EPS_FLOOR,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 2.0) {
            return param(format!("p must lie in (0, 2], got {}", self.p));
        }
        if self.max_iters == 0 {
            return param("max_iters must be positive");
        }
        if !(self.tol > 0.0) {
            return param(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.eps_floor > 0.0) || !(self.eps_init > self.eps_floor) || !self.eps_init.is_finite() {
            return param(format!(
                "need 0 < eps_floor < eps_init, got floor {} and init {}",
                self.eps_floor, self.eps_init
            ));
        }
        if !(self.eps_shrink > 0.0 && self.eps_shrink < 1.0) {
            return param(format!("eps_shrink must lie in (0, 1), got {}", self.eps_shrink));
        }
        Ok(())
    }

    #[inline]
    fn is_quadratic(&self) -> bool {
        self.p == 2.0
    }
}

/// A weighted point cloud in patch space, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPatches {
    side: usize,
    dim: usize,
    data: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPatches {
    /// Empty cloud of patches with `dim` values and nominal side `side`.
    pub fn with_capacity(side: usize, dim: usize, capacity: usize) -> Self {
        Self {
            side,
            dim,
            data: Vec::with_capacity(capacity * dim),
            weights: Vec::with_capacity(capacity),
        }
    }

    pub fn from_pairs(pairs: &[(Patch, f64)]) -> Result<Self> {
        let Some((first, _)) = pairs.first() else {
            return Err(Error::Degenerate("empty neighbor list".into()));
        };
        let mut out = Self::with_capacity(first.side(), first.dim(), pairs.len());
        for (patch, w) in pairs {
            if patch.side() != first.side() || patch.dim() != first.dim() {
                return param("all neighbor patches must have the same shape");
            }
            if !(*w >= 0.0) || !w.is_finite() {
                return param(format!("weights must be finite and nonnegative, got {w}"));
            }
            out.push(patch.values(), *w);
        }
        Ok(out)
    }

    #[inline]
    pub fn push(&mut self, values: &[f64], weight: f64) {
        debug_assert_eq!(values.len(), self.dim);
        self.data.extend_from_slice(values);
        self.weights.push(weight);
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.weights.clear();
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn patch(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn patches(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Same cloud with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out
    }

    /// Same cloud with `offset` added to every coordinate.
    pub fn translated(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v += offset);
        out
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Degenerate("empty neighbor list".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("total neighbor weight is zero".into()));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: 0, eps: 0.0 });
        }
        Ok(())
    }

    fn make_patch(&self, values: Vec<f64>) -> Patch {
        Patch::from_raw(self.side, values)
    }
}

/// Weighted mean of `coefs[j] * P_j`, written into `out`. Returns the coefficient sum.
#[inline]
fn weighted_mean_into(cloud: &WeightedPatches, coefs: &[f64], out: &mut [f64]) -> f64 {
    out.iter_mut().for_each(|v| *v = 0.0);
    let total: f64 = coefs.iter().sum();
    for (patch, &c) in cloud.patches().zip(coefs) {
        if c == 0.0 {
            continue;
        }
        let a = c / total;
        for (o, &v) in out.iter_mut().zip(patch) {
            *o += a * v;
        }
    }
    total
}

/// Weighted mean of the neighbor patches (the NLM estimate).
pub fn nlm_estimate(neighbors: &WeightedPatches) -> Result<Patch> {
    neighbors.check()?;
    let mut out = vec![0.0; neighbors.dim];
    weighted_mean_into(neighbors, &neighbors.weights, &mut out);
    Ok(neighbors.make_patch(out))
}

/// `sum_j w_j * ||candidate - P_j||^p`
pub fn objective(neighbors: &WeightedPatches, candidate: &[f64], p: f64) -> f64 {
    neighbors
        .patches()
        .zip(&neighbors.weights)
        .map(|(patch, &w)| {
            let d2 = squared_distance(candidate, patch);
            if d2 == 0.0 {
                0.0
            } else {
                w * d2.powf(0.5 * p)
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsResult {
    pub estimate: Patch,
    pub iterations: usize,
    /// `mu_j` evaluated at the final estimate with the final `eps`, in neighbor order.
    pub multipliers: Vec<f64>,
    pub converged: bool,
    /// Unregularized objective at the estimate.
    pub objective: f64,
    /// Regularization in effect when the solve stopped.
    pub final_eps: f64,
}

impl IrlsResult {
    /// Final multipliers sorted non-increasing.
    pub fn sorted_multipliers(&self) -> Vec<f64> {
        sorted_multipliers(self)
    }
}

pub fn sorted_multipliers(result: &IrlsResult) -> Vec<f64> {
    let mut mu = result.multipliers.clone();
    mu.sort_unstable_by(|a, b| b.total_cmp(a));
    mu
}

/// `x^(p/2 - 1)`, with the common indices mapped onto square roots.
#[derive(Debug, Clone, Copy)]
enum Power {
    Zero,
    NegHalf,
    NegQuarter,
    NegThreeQuarters,
    General(f64),
}

impl Power {
    fn for_p(p: f64) -> Self {
        let e = 0.5 * p - 1.0;
        match e {
            _ if e == 0.0 => Self::Zero,
            _ if e == -0.5 => Self::NegHalf,
            _ if e == -0.25 => Self::NegQuarter,
            _ if e == -0.75 => Self::NegThreeQuarters,
            _ => Self::General(e),
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Zero => 1.0,
            Self::NegHalf => 1.0 / x.sqrt(),
            Self::NegQuarter => 1.0 / x.sqrt().sqrt(),
            Self::NegThreeQuarters => {
                let r = x.sqrt();
                1.0 / (r * r.sqrt())
            }
            Self::General(e) => x.powf(e),
        }
    }
}

#[inline]
fn multiplier(d2: f64, eps: f64, power: Power) -> f64 {
    power.apply(d2 + eps)
}

fn fill_multipliers(cloud: &WeightedPatches, at: &[f64], eps: f64, power: Power, out: &mut Vec<f64>) {
    out.clear();
    out.extend(cloud.patches().map(|patch| multiplier(squared_distance(at, patch), eps, power)));
}

/// One IRLS update of `current` into `next`. Returns the coefficient total.
#[inline]
fn irls_step(cloud: &WeightedPatches, current: &[f64], eps: f64, power: Power, next: &mut [f64]) -> f64 {
    next.iter_mut().for_each(|v| *v = 0.0);
    let mut total = 0.0;
    for (patch, &w) in cloud.patches().zip(&cloud.weights) {
        if w == 0.0 {
            continue;
        }
        let c = w * multiplier(squared_distance(current, patch), eps, power);
        total += c;
        for (o, &v) in next.iter_mut().zip(patch) {
            *o += c * v;
        }
    }
    next.iter_mut().for_each(|v| *v /= total);
    total
}

/// The single patch carrying all positive weight, if there is one.
fn sole_support(cloud: &WeightedPatches) -> Option<&[f64]> {
    let mut support = cloud.patches().zip(&cloud.weights).filter(|(_, &w)| w > 0.0).map(|(p, _)| p);
    let first = support.next()?;
    support.all(|p| p == first).then_some(first)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs the regularized IRLS iteration from `init`.
pub fn irls_solve(neighbors: &WeightedPatches, cfg: &IrlsConfig, init: &[f64]) -> Result<IrlsResult> {
    cfg.validate()?;
    neighbors.check()?;
    if init.len() != neighbors.dim {
        return param(format!(
            "initial patch has {} values, neighbors have {}",
            init.len(),
            neighbors.dim
        ));
    }
    let n = neighbors.len();
    let dim = neighbors.dim;
    let power = Power::for_p(cfg.p);

    if let Some(only) = sole_support(neighbors) {
        let estimate = only.to_vec();
        let mut multipliers = Vec::with_capacity(n);
        fill_multipliers(neighbors, &estimate, cfg.eps_floor, power, &mut multipliers);
        let objective = objective(neighbors, &estimate, cfg.p);
        return Ok(IrlsResult {
            multipliers,
            estimate: neighbors.make_patch(estimate),
            iterations: 0,
            converged: true,
            objective,
            final_eps: cfg.eps_floor,
        });
    }

    if cfg.is_quadratic() {
        let mut estimate = vec![0.0; dim];
        weighted_mean_into(neighbors, &neighbors.weights, &mut estimate);
        let objective = objective(neighbors, &estimate, cfg.p);
        return Ok(IrlsResult {
            estimate: neighbors.make_patch(estimate),
            iterations: 1,
            multipliers: vec![1.0; n],
            converged: true,
            objective,
            final_eps: cfg.eps_init,
        });
    }

    let mut current = init.to_vec();
    let mut next = vec![0.0; dim];
    let mut eps = cfg.eps_init;
    let mut at_floor = false;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let total = irls_step(neighbors, &current, eps, power, &mut next);
        if !total.is_finite() || !(total > 0.0) || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: iterations, eps });
        }
        let change = squared_distance(&next, &current).sqrt();
        let scale = norm(&current).max(1.0);
        std::mem::swap(&mut current, &mut next);

        if at_floor && change < cfg.tol {
            converged = true;
            break;
        }
        let relative = change / scale;
        while !at_floor && relative < eps.sqrt() / 100.0 {
            eps *= cfg.eps_shrink;
            if eps <= cfg.eps_floor * (1.0 + 1e-9) {
                eps = cfg.eps_floor;
                at_floor = true;
            }
        }
    }

    let mut multipliers = Vec::with_capacity(n);
    fill_multipliers(neighbors, &current, eps, power, &mut multipliers);
    let objective = objective(neighbors, &current, cfg.p);
    Ok(IrlsResult {
        estimate: neighbors.make_patch(current),
        iterations,
        multipliers,
        converged,
        objective,
        final_eps: eps,
    })
}

/// Distance between `at` and one IRLS update applied to it with the given `eps`.
pub fn fixed_point_residual(neighbors: &WeightedPatches, at: &[f64], p: f64, eps: f64) -> f64 {
    let mut image = vec![0.0; neighbors.dim];
    irls_step(neighbors, at, eps, Power::for_p(p), &mut image);
    squared_distance(at, &image).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specialized_powers_match_powf() {
        for p in [2.0, 1.0, 1.5, 0.5, 0.1, 0.7] {
            let power = Power::for_p(p);
            for x in [1e-8f64, 3.7e-5, 0.01, 0.5, 1.0, 2.25, 49.0, 1e6] {
                let expect = x.powf(0.5 * p - 1.0);
                let got = power.apply(x);
                assert!((got - expect).abs() <= 1e-14 * expect, "p={p} x={x}: {got} vs {expect}");
            }
        }
    }

    fn scalars(points: &[f64], weights: &[f64]) -> WeightedPatches {
        let pairs: Vec<(Patch, f64)> = points
            .iter()
            .zip(weights)
            .map(|(&x, &w)| (Patch::square(1, vec![x]).unwrap(), w))
            .collect();
        WeightedPatches::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn nlm_singleton_and_pair() {
        let a = Patch::square(3, (0..9).map(|v| v as f64 / 9.0).collect()).unwrap();
        let b = Patch::square(3, (0..9).map(|v| 1.0 - v as f64 / 9.0).collect()).unwrap();
        let one = WeightedPatches::from_pairs(&[(a.clone(), 0.3)]).unwrap();
        assert_eq!(nlm_estimate(&one).unwrap(), a);
        let two = WeightedPatches::from_pairs(&[(a.clone(), 0.5), (b.clone(), 0.5)]).unwrap();
        let mean = nlm_estimate(&two).unwrap();
        for ((m, x), y) in mean.values().iter().zip(a.values()).zip(b.values()) {
            assert!((m - (x + y) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nlm_weighted_scalars() {
        let est = nlm_estimate(&scalars(&[0.0, 0.5, 1.0], &[1.0, 2.0, 1.0])).unwrap();
        assert!((est.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nlm_degenerate_inputs() {
        assert!(matches!(WeightedPatches::from_pairs(&[]), Err(Error::Degenerate(_))));
        let zero = scalars(&[0.0, 1.0], &[0.0, 0.0]);
        assert!(matches!(nlm_estimate(&zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mixed_shapes_rejected() {
        let a = Patch::square(1, vec![0.0]).unwrap();
        let b = Patch::square(3, vec![0.0; 9]).unwrap();
        assert!(WeightedPatches::from_pairs(&[(a, 1.0), (b, 1.0)]).is_err());
    }

    #[test]
    fn objective_examples() {
        let one = scalars(&[0.3], &[1.0]);
        assert_eq!(objective(&one, &[0.3], 1.0), 0.0);
        let two = scalars(&[0.0, 1.0], &[1.0, 1.0]);
        assert!((objective(&two, &[0.5], 2.0) - 0.5).abs() < 1e-15);
        assert!((objective(&two, &[0.0], 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p2_is_one_step_weighted_mean() {
        let cloud = scalars(&[0.1, 0.7, 0.2, 0.9], &[0.2, 1.0, 0.4, 0.3]);
        let cfg = IrlsConfig::for_patch(2.0, 1).unwrap();
        let init = nlm_estimate(&cloud).unwrap();
        let res = irls_solve(&cloud, &cfg, &[0.0]).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert!((res.estimate.values()[0] - init.values()[0]).abs() < 1e-12);
        assert!(res.multipliers.iter().all(|&m| m == 1.0));
        let sorted = res.sorted_multipliers();
        assert!(sorted.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn p1_collinear_scalars_reach_median() {
        // grid search of |x| + |x - 0.4| + |x - 1| over [0, 1] at step 1e-5 bottoms out at 0.4
        let cloud = scalars(&[0.0, 0.4, 1.0], &[1.0, 1.0, 1.0]);
        let cfg = IrlsConfig::for_patch(1.0, 1).unwrap();
        let init = nlm_estimate(&cloud).unwrap();
        let res = irls_solve(&cloud, &cfg, init.values()).unwrap();
        assert!((res.estimate.values()[0] - 0.4).abs() < 1e-3, "{res:?}");
    }

    #[test]
    fn identical_neighbors_short_circuit() {
        let cloud = scalars(&[0.25, 0.25, 0.25], &[1.0, 0.5, 0.1]);
        let cfg = IrlsConfig::for_patch(0.5, 1).unwrap();
        let res = irls_solve(&cloud, &cfg, &[0.9]).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
        assert_eq!(res.estimate.values(), &[0.25]);
        let mu = res.sorted_multipliers();
        assert!(mu.iter().all(|&m| m == mu[0] && m.is_finite() && m > 0.0));
    }

    #[test]
    fn invalid_config_rejected() {
        let cloud = scalars(&[0.0, 1.0], &[1.0, 1.0]);
        for p in [0.0, -1.0, 2.5, f64::NAN] {
            let cfg = IrlsConfig { p, ..IrlsConfig::for_patch(1.0, 1).unwrap() };
            assert!(matches!(irls_solve(&cloud, &cfg, &[0.5]), Err(Error::Parameter(_))));
        }
        let bad_eps = IrlsConfig { eps_floor: 2.0, ..IrlsConfig::for_patch(1.0, 1).unwrap() };
        assert!(irls_solve(&cloud, &bad_eps, &[0.5]).is_err());
        let cfg = IrlsConfig::for_patch(1.0, 1).unwrap();
        assert!(irls_solve(&cloud, &cfg, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn iteration_caps_follow_p() {
        assert_eq!(IrlsConfig::for_patch(0.1, 7).unwrap().max_iters, 200);
        assert_eq!(IrlsConfig::for_patch(0.5, 7).unwrap().max_iters, 50);
        assert!((IrlsConfig::for_patch(1.0, 7).unwrap().tol - 7e-6).abs() < 1e-18);
    }

    #[test]
    fn nonfinite_input_is_reported() {
        let cloud = scalars(&[0.0, f64::INFINITY, 1.0], &[1.0, 1.0, 1.0]);
        let cfg = IrlsConfig::for_patch(1.0, 1).unwrap();
        assert!(matches!(irls_solve(&cloud, &cfg, &[0.5]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn converged_solution_is_a_fixed_point() {
        let cloud = scalars(&[0.0, 0.1, 0.15, 0.9, 1.0], &[1.0, 0.8, 0.6, 0.7, 0.2]);
        for p in [0.5, 1.0, 1.5] {
            let cfg = IrlsConfig::for_patch(p, 1).unwrap().with_max_iters(500);
            let init = nlm_estimate(&cloud).unwrap();
            let res = irls_solve(&cloud, &cfg, init.values()).unwrap();
            assert!(res.converged, "p={p}: {res:?}");
            let r = fixed_point_residual(&cloud, res.estimate.values(), p, res.final_eps);
            assert!(r < cfg.tol, "p={p}: residual {r}");
        }
    }
}
