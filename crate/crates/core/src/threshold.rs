//! Threshold merge policy for Poisson arrivals.
//!
//! A vehicle arriving `h` seconds behind its predecessor either closes the
//! gap (`u = h`, merge) or applies a fixed adjustment `c` and waits for the
//! next arrival. The optimal rule is "merge iff `h <= theta`"; `theta`, `c`
//! and the value constant `Z` solve a three-equation system. The second
//! equation is eliminated analytically and the remaining pair is solved with
//! a damped Newton iteration.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::{self, CostWeights, FuelModel};
use crate::math;
use crate::quadrature::adaptive_simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("invalid policy parameters: {0}")]
    InvalidParams(&'static str),
    #[error("time reduction {0} s is not feasible")]
    InfeasibleAction(f64),
    #[error("no root after {iterations} iterations (best theta {theta}, c {c}, residual {residual_norm:e})")]
    SolverFailure { theta: f64, c: f64, residual_norm: f64, iterations: usize },
    #[error("threshold {theta} s exceeds the feasible time reduction {limit} s")]
    InfeasiblePolicy { theta: f64, limit: f64 },
    #[error("degenerate solution: c = {c} s is not below theta = {theta} s")]
    Degenerate { theta: f64, c: f64 },
    #[error("optimal policy is not threshold-shaped (non-merge at {first_gap} s, merge again at {h} s)")]
    NotThresholdShaped { first_gap: f64, h: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyParams {
    pub w: CostWeights,
    pub fm: FuelModel,
    pub d1: f64,
    pub d2: f64,
    pub v0: f64,
    pub gamma: f64,
    /// veh/s
    pub lambda: f64,
}

impl PolicyParams {
    /// Nominal values with the given rate (veh/s) and cruising distance (m).
    pub fn nominal(lambda: f64, d2: f64) -> Self {
        PolicyParams {
            w: CostWeights::default(),
            fm: FuelModel::default(),
            d1: 1000.0,
            d2,
            v0: 24.0,
            gamma: 0.9,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ThresholdError::InvalidParams("gamma must lie in (0,1)"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ThresholdError::InvalidParams("lambda must be positive"));
        }
        if !(self.d1 > 0.0) || !(self.d2 >= 0.0) || !(self.v0 > 0.0) {
            return Err(ThresholdError::InvalidParams("d1, v0 must be positive and d2 non-negative"));
        }
        Ok(())
    }

    /// Largest admissible time reduction.
    pub fn u_max(&self) -> f64 {
        0.9 * self.d1 / self.v0
    }

    /// Smallest admissible time reduction (half the nominal speed).
    pub fn u_min(&self) -> f64 {
        -self.d1 / self.v0
    }

    /// Rate of the discounting exponent, `lambda (1 - gamma)`.
    fn a(&self) -> f64 {
        self.lambda * (1.0 - self.gamma)
    }

    fn platoon_saving(&self) -> f64 {
        self.w.w2 * self.fm.eta * self.fm.phi * self.d2
    }

    /// `G(u)` without the feasibility check.
    fn g(&self, u: f64) -> f64 {
        let v = self.d1 / (self.d1 / self.v0 - u);
        self.w.w1 * u + self.w.w2 * self.fm.alpha * self.d1 * (self.v0 * self.v0 - v * v) + self.platoon_saving()
    }

    fn g_prime(&self, u: f64) -> f64 {
        let v = self.d1 / (self.d1 / self.v0 - u);
        self.w.w1 - 2.0 * self.w.w2 * self.fm.alpha * v * v * v
    }

    /// Unconstrained maximizer of `G`: the time reduction where
    /// `w1 = 2 w2 alpha v^3`.
    pub fn reward_peak(&self) -> f64 {
        let v = math::powf(self.w.w1 / (2.0 * self.w.w2 * self.fm.alpha), 1.0 / 3.0);
        self.d1 / self.v0 - self.d1 / v
    }
}

/// Merge reward `G(u)` and its derivative.
pub fn merging_reward(u: f64, p: &PolicyParams) -> Result<(f64, f64), ThresholdError> {
    if !(u < p.d1 / p.v0) {
        return Err(ThresholdError::InfeasibleAction(u));
    }
    Ok((p.g(u), p.g_prime(u)))
}

/// Relative cost of adjusting by `u`, with the platoon saving when merged.
pub fn relative_cost(u: f64, merged: bool, p: &PolicyParams) -> Result<f64, ThresholdError> {
    let df1 = dynamics::delta_f1(u, p.d1, p.v0, p.fm.alpha).map_err(|_| ThresholdError::InfeasibleAction(u))?;
    let saving = if merged { p.platoon_saving() } else { 0.0 };
    Ok(-p.w.w1 * u + p.w.w2 * df1 - saving)
}

/// Merge iff `h <= theta`; otherwise adjust by `c`.
pub fn evaluate_policy(theta: f64, c: f64, h: f64) -> f64 {
    if h <= theta {
        h
    } else {
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSolution {
    pub theta: f64,
    pub c: f64,
    pub z: f64,
    /// For a solution with `c` on the slowest feasible action the third
    /// entry is the stationarity residual `max(F3, 0)`.
    pub residuals: [f64; 3],
    pub iterations: usize,
    /// `c` sits on the lower action bound `-d1/v0`.
    pub c_at_bound: bool,
}

impl ThresholdSolution {
    pub fn action(&self, h: f64) -> f64 {
        evaluate_policy(self.theta, self.c, h)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_INTERVALS: usize = 10_000;
const MAX_NEWTON: usize = 100;
/// Roots closer than this collapse onto the peak of `G` (no platoon benefit).
const DEGENERATE_GAP: f64 = 1e-2;

/// `∫_c^θ e^{-a t} (G'(t) - λ G(t)) dt`.
pub fn integral_term(theta: f64, c: f64, p: &PolicyParams) -> f64 {
    let a = p.a();
    let f = |t: f64| math::exp(-a * t) * (p.g_prime(t) - p.lambda * p.g(t));
    adaptive_simpson(f, c, theta, QUAD_TOL, QUAD_MAX_INTERVALS).value
}

/// Residuals of the three equations at `(theta, c)` with `Z = G(theta)/(1-gamma)`.
pub fn residuals(theta: f64, c: f64, p: &PolicyParams) -> [f64; 3] {
    let a = p.a();
    let g0 = p.g(0.0);
    let z = p.g(theta) / (1.0 - p.gamma);
    let f1 = z - math::exp(a * theta) * (integral_term(theta, c, p) + (z + g0) * math::exp(-a * c));
    let f2 = p.g(theta) + p.gamma * z - z;
    let f3 = p.g_prime(c) - p.lambda * p.g(c) + a * (z + g0);
    [f1, f2, f3]
}

fn reduced(x: [f64; 2], p: &PolicyParams) -> [f64; 2] {
    let r = residuals(x[0], x[1], p);
    [r[0], r[2]]
}

fn norm2(r: [f64; 2]) -> f64 {
    math::sqrt(r[0] * r[0] + r[1] * r[1])
}

fn max_abs(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

struct NewtonResult {
    x: [f64; 2],
    r: [f64; 2],
    iterations: usize,
    converged: bool,
}

fn damped_newton(x0: [f64; 2], p: &PolicyParams, tol: f64) -> NewtonResult {
    let lo = p.u_min() + 1e-9;
    let hi = p.u_max();
    let clip = |v: f64| v.max(lo).min(hi);
    let mut x = [clip(x0[0]), clip(x0[1])];
    let mut r = reduced(x, p);
    for it in 0..MAX_NEWTON {
        if max_abs(r) <= tol {
            return NewtonResult { x, r, iterations: it, converged: true };
        }
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (reduced(xp, p), reduced(xm, p));
            jac[0][k] = (fp[0] - fm[0]) / (2.0 * h);
            jac[1][k] = (fp[1] - fm[1]) / (2.0 * h);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = [-(jac[1][1] * r[0] - jac[0][1] * r[1]) / det, -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det];
        let n0 = norm2(r);
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let cand = [clip(x[0] + step * dx[0]), clip(x[1] + step * dx[1])];
            let rc = reduced(cand, p);
            if norm2(rc) < n0 {
                x = cand;
                r = rc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return NewtonResult { x, r, iterations: it + 1, converged: max_abs(r) <= tol };
        }
    }
    NewtonResult { x, r, iterations: MAX_NEWTON, converged: max_abs(r) <= tol }
}

/// Seed from the largest root of `G(theta) = G(0)` on `[0, u_max]`; `c = -1`.
fn default_seed(p: &PolicyParams) -> [f64; 2] {
    let g0 = p.g(0.0);
    let f = |t: f64| p.g(t) - g0;
    let hi = p.u_max();
    let theta = if f(hi) < 0.0 && f(1e-6 * hi) > 0.0 { bisect(f, 1e-6 * hi, hi) } else { 0.0 };
    [theta, -1.0]
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Threshold consistent with `c` through the second and third equations,
/// taken on the decreasing branch of `G`.
fn theta_given_c(c: f64, p: &PolicyParams) -> Option<f64> {
    let z = (p.lambda * p.g(c) - p.g_prime(c)) / p.a() - p.g(0.0);
    let target = (1.0 - p.gamma) * z;
    let lo = c.max(p.reward_peak()).max(p.u_min());
    let hi = p.u_max();
    let f = |t: f64| p.g(t) - target;
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return None;
    }
    Some(bisect(f, lo, hi))
}

/// Seeds for the 2-D Newton iteration from sign changes of the first
/// equation along the one-dimensional curve `theta(c)`.
fn bracket_seeds(p: &PolicyParams) -> Vec<[f64; 2]> {
    let n = 200;
    let lo = p.u_min() + 1e-6;
    let hi = p.u_max();
    let eval = |c: f64| theta_given_c(c, p).map(|t| (t, residuals(t, c, p)[0]));
    let mut seeds = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let c = lo + (hi - lo) * i as f64 / n as f64;
        let cur = eval(c).map(|(_, r)| (c, r));
        if let (Some((c0, r0)), Some((c1, r1))) = (prev, cur) {
            if (r0 > 0.0) != (r1 > 0.0) {
                let f = |c: f64| eval(c).map_or(f64::NAN, |(_, r)| r);
                let root = if r0 > 0.0 { bisect(|c| -f(c), c0, c1) } else { bisect(f, c0, c1) };
                if let Some((t, _)) = eval(root) {
                    seeds.push([t, root]);
                }
            }
        }
        prev = cur;
    }
    seeds
}

/// Solves for `(theta, c, Z)` to residual tolerance `tol`.
pub fn solve_threshold(p: &PolicyParams, tol: f64) -> Result<ThresholdSolution, ThresholdError> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(ThresholdError::InvalidParams("tolerance must be positive"));
    }
    // c must maximise the non-merge value: F3 falls through zero at c
    let is_max = |x: [f64; 2]| {
        let h = 1e-4;
        residuals(x[0], x[1] + h, p)[2] < residuals(x[0], x[1] - h, p)[2]
    };
    let admissible = |r: &NewtonResult| r.converged && r.x[1] < r.x[0] - DEGENERATE_GAP && is_max(r.x);
    let mut best = damped_newton(default_seed(p), p, tol);
    let mut iterations = best.iterations;
    let is_collapsed = |r: &NewtonResult| r.converged && r.x[1] >= r.x[0] - DEGENERATE_GAP;
    let mut collapsed = is_collapsed(&best).then_some(best.x);
    if !admissible(&best) {
        for seed in bracket_seeds(p) {
            let res = damped_newton(seed, p, tol);
            iterations += res.iterations;
            if admissible(&res) {
                best = res;
                break;
            }
            if is_collapsed(&res) && collapsed.is_none() {
                collapsed = Some(res.x);
            }
            if max_abs(res.r) < max_abs(best.r) || best.converged {
                best = res;
            }
        }
    }
    if !admissible(&best) {
        if let Some(sol) = solve_on_lower_bound(p, tol, iterations) {
            return Ok(sol);
        }
        if let Some([theta, c]) = collapsed {
            return Err(ThresholdError::Degenerate { theta, c });
        }
        let [theta, c] = best.x;
        return Err(ThresholdError::SolverFailure { theta, c, residual_norm: norm2(best.r), iterations });
    }
    let [theta, c] = best.x;
    let limit = p.d1 / p.v0;
    if theta >= limit {
        return Err(ThresholdError::InfeasiblePolicy { theta, limit });
    }
    Ok(ThresholdSolution {
        theta,
        c,
        z: p.g(theta) / (1.0 - p.gamma),
        residuals: residuals(theta, c, p),
        iterations,
        c_at_bound: false,
    })
}

/// Large platoon savings push the best non-merge action onto `u_min`. Then
/// only the first equation holds with equality and the third must point
/// below the bound.
fn solve_on_lower_bound(p: &PolicyParams, tol: f64, iterations: usize) -> Option<ThresholdSolution> {
    let c = p.u_min();
    let f1 = |t: f64| residuals(t, c, p)[0];
    let lo = p.reward_peak().max(c);
    let hi = p.u_max();
    let n = 200;
    let mut prev = (lo, f1(lo));
    let mut theta = None;
    for i in 1..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let r = f1(t);
        if (prev.1 > 0.0) != (r > 0.0) {
            theta = Some(if prev.1 > 0.0 { bisect(|x| -f1(x), prev.0, t) } else { bisect(f1, prev.0, t) });
            break;
        }
        prev = (t, r);
    }
    let theta = theta?;
    let mut r = residuals(theta, c, p);
    if r[2] > tol || r[0].abs() > tol || c >= theta - DEGENERATE_GAP {
        return None;
    }
    r[2] = r[2].max(0.0);
    Some(ThresholdSolution {
        theta,
        c,
        z: p.g(theta) / (1.0 - p.gamma),
        residuals: r,
        iterations: iterations + n,
        c_at_bound: true,
    })
}

/// Result of the discretized per-arrival MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    /// Largest grid headway at which merging is optimal.
    pub theta: f64,
    /// Best non-merge action on the grid.
    pub c: f64,
    /// Headway grid.
    pub h: Vec<f64>,
    pub value: Vec<f64>,
    pub merge: Vec<bool>,
    pub iterations: usize,
}

impl OracleSolution {
    /// Last headway of the merge interval containing the first grid node at
    /// or above `h_start`; `None` if merging is not optimal there.
    pub fn threshold_from(&self, h_start: f64) -> Option<f64> {
        let i = self.h.iter().position(|&x| x >= h_start)?;
        if !self.merge[i] {
            return None;
        }
        let end = self.merge[i..].iter().position(|m| !m).map_or(self.h.len(), |k| i + k);
        Some(self.h[end - 1])
    }
}

/// Value iteration over a uniform headway grid with spacing `dh`.
///
/// States cover `[u_min, u_max]` plus one node; above `u_max` merging is
/// infeasible so the value is flat and the exponential expectation is exact
/// for the piecewise-linear interpolant. Non-merge actions are the grid nodes
/// inside `[u_min, u_max]`.
pub fn value_iteration_oracle(p: &PolicyParams, dh: f64) -> Result<OracleSolution, ThresholdError> {
    let sol = value_iteration(p, dh)?;
    let n = sol.merge.len();
    let first_gap = sol.merge.iter().position(|m| !m).unwrap_or(n);
    if let Some(k) = sol.merge[first_gap..].iter().position(|m| *m) {
        return Err(ThresholdError::NotThresholdShaped { first_gap: sol.h[first_gap], h: sol.h[first_gap + k] });
    }
    if first_gap == 0 {
        return Err(ThresholdError::NotThresholdShaped { first_gap: sol.h[0], h: sol.h[0] });
    }
    Ok(sol)
}

/// Value iteration without the threshold-shape check. `theta` is the end of
/// the first merge interval (or `u_min` when merging is never optimal).
pub fn value_iteration(p: &PolicyParams, dh: f64) -> Result<OracleSolution, ThresholdError> {
    p.validate()?;
    if !(dh > 0.0) {
        return Err(ThresholdError::InvalidParams("grid step must be positive"));
    }
    let lo = p.u_min();
    let hi = p.u_max();
    let n_feasible = math::floor((hi - lo) / dh) as usize + 1;
    let n = n_feasible + 1;
    let h: Vec<f64> = (0..n).map(|i| lo + dh * i as f64).collect();
    let g0 = p.g(0.0);
    let reward: Vec<f64> = h[..n_feasible].iter().map(|&u| p.g(u)).collect();

    let q = p.lambda * dh;
    let e = math::exp(-q);
    let b = (1.0 - e * (1.0 + q)) / q;
    let a = (1.0 - e) - b;

    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    let mut c_idx = 0;
    for it in 1..=5000 {
        iterations = it;
        w[n - 1] = v[n - 1];
        for i in (0..n - 1).rev() {
            w[i] = e * w[i + 1] + a * v[i] + b * v[i + 1];
        }
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for i in 0..n_feasible {
            let val = reward[i] - g0 + p.gamma * w[i];
            if val > best {
                best = val;
                arg = i;
            }
        }
        c_idx = arg;
        let mut diff: f64 = 0.0;
        for i in 0..n {
            let merge = if i < n_feasible { reward[i] + p.gamma * w[i] } else { f64::NEG_INFINITY };
            let nv = merge.max(best);
            diff = diff.max((nv - v[i]).abs());
            v[i] = nv;
        }
        if diff < 1e-12 {
            break;
        }
    }
    w[n - 1] = v[n - 1];
    for i in (0..n - 1).rev() {
        w[i] = e * w[i + 1] + a * v[i] + b * v[i + 1];
    }
    let best = (0..n_feasible).map(|i| reward[i] - g0 + p.gamma * w[i]).fold(f64::NEG_INFINITY, f64::max);
    let merge: Vec<bool> = (0..n).map(|i| i < n_feasible && reward[i] + p.gamma * w[i] >= best).collect();

    let start = merge.iter().position(|m| *m).unwrap_or(0);
    let end = merge[start..].iter().position(|m| !m).map_or(n, |k| start + k);
    let theta = h[end.max(1) - 1];
    Ok(OracleSolution { theta, c: h[c_idx], h, value: v, merge, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal() -> PolicyParams {
        PolicyParams::nominal(108.0 / 3600.0, 30_000.0)
    }

    #[test]
    fn reward_at_zero() {
        let p = nominal();
        let (g, dg) = merging_reward(0.0, &p).unwrap();
        assert!((g - 0.868 * 0.1 * 3.22e-4 * 30_000.0).abs() < 1e-12);
        assert!((g - 0.838488).abs() < 1e-9);
        let expect = p.w.w1 - 2.0 * p.w.w2 * p.fm.alpha * 24.0f64.powi(3);
        assert!((dg - expect).abs() < 1e-15);
        let mut q = p;
        q.w.w1 *= 3.0;
        q.fm.alpha *= 2.0;
        assert_eq!(merging_reward(0.0, &q).unwrap().0, g);
        assert!(merging_reward(p.d1 / p.v0, &p).is_err());
    }

    #[test]
    fn relative_cost_identities() {
        let p = nominal();
        assert_eq!(relative_cost(0.0, false, &p).unwrap(), 0.0);
        assert!((relative_cost(0.0, true, &p).unwrap() + 0.838488).abs() < 1e-9);
        for i in -40..37 {
            let u = i as f64;
            let rc = relative_cost(u, true, &p).unwrap();
            let g = merging_reward(u, &p).unwrap().0;
            assert!((rc + g).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_boundaries() {
        assert_eq!(evaluate_policy(5.0, -3.0, 0.0), 0.0);
        assert_eq!(evaluate_policy(5.0, -3.0, 5.0), 5.0);
        assert_eq!(evaluate_policy(5.0, -3.0, 5.01), -3.0);
    }

    #[test]
    fn nominal_solution_frozen() {
        // reference roots from an independent scipy prototype (quad + fsolve)
        let sol = solve_threshold(&nominal(), 1e-10).unwrap();
        assert!((sol.theta - 21.80889615).abs() < 1e-6, "{sol:?}");
        assert!((sol.c - -39.80162735).abs() < 1e-6, "{sol:?}");
        assert!((sol.z * (1.0 - 0.9) - nominal().g(sol.theta)).abs() < 1e-9);
    }

    #[test]
    fn zero_cruise_is_degenerate() {
        let p = PolicyParams::nominal(108.0 / 3600.0, 0.0);
        assert!(matches!(solve_threshold(&p, 1e-9), Err(ThresholdError::Degenerate { .. })));
    }

    #[test]
    fn oracle_matches_solver() {
        let p = nominal();
        let dh = 0.05;
        let o = value_iteration_oracle(&p, dh).unwrap();
        let s = solve_threshold(&p, 1e-10).unwrap();
        assert!((o.theta - s.theta).abs() <= 2.0 * dh, "{} vs {}", o.theta, s.theta);
        assert!((o.c - s.c).abs() <= 2.0 * dh, "{} vs {}", o.c, s.c);
    }

    #[test]
    fn oracle_greedy_limit() {
        let mut p = nominal();
        p.gamma = 1e-6;
        let o = value_iteration_oracle(&p, 0.05).unwrap();
        assert!((o.c - p.reward_peak()).abs() <= 0.05);
    }

    #[test]
    fn reward_peak_is_stationary() {
        let p = nominal();
        assert!(p.g_prime(p.reward_peak()).abs() < 1e-12);
        assert!((p.reward_peak() - -2.3056).abs() < 1e-3);
    }
}
