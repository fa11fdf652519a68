//! Vehicle and flow physics: IDM, Greenshield, fuel and link cost.

use thiserror::Error;

use crate::math;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("negative speed {0}")]
    NegativeSpeed(f64),
    #[error("non-positive gap {0} to leader")]
    NonPositiveGap(f64),
    #[error("time reduction {u} s infeasible over {d1} m at {v0} m/s")]
    InfeasibleTimeReduction { u: f64, d1: f64, v0: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdmParams {
    pub v0: f64,
    pub s0: f64,
    pub t_hw: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams { v0: 24.0, s0: 2.0, t_hw: 1.5, a: 1.0, b: 1.5, delta: 4.0 }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let pos = [self.v0, self.s0, self.t_hw, self.a, self.b];
        if pos.iter().any(|x| !(*x > 0.0)) {
            return Err(DynamicsError::InvalidParameter("IDM parameters must be positive"));
        }
        if !(self.delta >= 1.0) {
            return Err(DynamicsError::InvalidParameter("IDM delta must be at least 1"));
        }
        Ok(())
    }

    /// Desired dynamic gap s*.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        self.s0 + v * self.t_hw + v * dv / (2.0 * math::sqrt(self.a * self.b))
    }
}

/// Acceleration under the intelligent driver model.
///
/// `gap` is `None` on a free road; `dv` is the closing speed to the leader.
pub fn idm_acceleration(v: f64, gap: Option<f64>, dv: f64, p: &IdmParams) -> Result<f64, DynamicsError> {
    if v < 0.0 {
        return Err(DynamicsError::NegativeSpeed(v));
    }
    let free = p.a * (1.0 - math::powf(v / p.v0, p.delta));
    match gap {
        None => Ok(free),
        Some(s) if s <= 0.0 => Err(DynamicsError::NonPositiveGap(s)),
        Some(s) => {
            let ratio = p.desired_gap(v, dv) / s;
            Ok(free - p.a * ratio * ratio)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuelModel {
    pub a3: f64,
    pub a1: f64,
    /// Nominal consumption, L/m.
    pub phi: f64,
    pub alpha: f64,
    pub eta: f64,
}

impl Default for FuelModel {
    fn default() -> Self {
        FuelModel { a3: 3.51e-7, a1: 4.07e-4, phi: 3.22e-4, alpha: 3.51e-7, eta: 0.1 }
    }
}

impl FuelModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if [self.a3, self.a1, self.phi, self.alpha].iter().any(|x| !(*x > 0.0)) {
            return Err(DynamicsError::InvalidParameter("fuel coefficients must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(DynamicsError::InvalidParameter("eta must lie in (0,1)"));
        }
        Ok(())
    }

    /// Fuel rate in L/s.
    pub fn fuel_rate(&self, v: f64) -> Result<f64, DynamicsError> {
        if v < 0.0 {
            return Err(DynamicsError::NegativeSpeed(v));
        }
        Ok(self.a3 * v * v * v + self.a1 * v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenshieldModel {
    pub v0: f64,
    /// Jam density, veh/m/lane.
    pub k_j: f64,
}

impl GreenshieldModel {
    pub fn from_critical(v0: f64, k_c: f64) -> Self {
        GreenshieldModel { v0, k_j: 2.0 * k_c }
    }

    pub fn k_c(&self) -> f64 {
        self.k_j / 2.0
    }

    pub fn equilibrium_speed(&self, k_e: f64) -> f64 {
        equilibrium_speed(k_e, self)
    }
}

pub fn equilibrium_speed(k_e: f64, model: &GreenshieldModel) -> f64 {
    let k = k_e.max(0.0).min(model.k_j);
    (model.v0 * (1.0 - k / model.k_j)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlatoonParams {
    pub tau_l: f64,
    pub tau_f: f64,
    pub tau_c: f64,
    pub t_s: f64,
    pub h0: f64,
}

impl Default for PlatoonParams {
    fn default() -> Self {
        PlatoonParams { tau_l: 7.5, tau_f: 0.5, tau_c: 10.0, t_s: 30.0, h0: 0.5 }
    }
}

impl PlatoonParams {
    pub fn omega(&self) -> f64 {
        self.tau_f / self.tau_l
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.tau_f > 0.0 && self.h0 > 0.0 && self.t_s > 0.0) {
            return Err(DynamicsError::InvalidParameter("platoon headways must be positive"));
        }
        if !(self.tau_f < self.tau_c && self.tau_f < self.tau_l) {
            return Err(DynamicsError::InvalidParameter("need tau_f below tau_c and tau_l"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    /// $/s
    pub w1: f64,
    /// $/L
    pub w2: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { w1: 25.8 / 3600.0, w2: 0.868 }
    }
}

/// Speed that cuts `u` seconds off the nominal traversal of `d1`.
pub fn reference_speed(u: f64, d1: f64, v0: f64) -> Result<f64, DynamicsError> {
    let t = d1 / v0 - u;
    if !(t > 0.0) {
        return Err(DynamicsError::InfeasibleTimeReduction { u, d1, v0 });
    }
    Ok(d1 / t)
}

/// Extra fuel spent in the coordinating zone to gain `u` seconds.
pub fn delta_f1(u: f64, d1: f64, v0: f64, alpha: f64) -> Result<f64, DynamicsError> {
    let v = reference_speed(u, d1, v0)?;
    Ok(alpha * d1 * (v * v - v0 * v0))
}

/// `(dollars, liters)` for driving `dt` seconds at speed `v`.
pub fn trip_segment_cost(
    dt: f64,
    v: f64,
    merged_follower: bool,
    fm: &FuelModel,
    w: &CostWeights,
) -> Result<(f64, f64), DynamicsError> {
    let factor = if merged_follower { 1.0 - fm.eta } else { 1.0 };
    let fuel = factor * fm.fuel_rate(v)? * dt;
    Ok((w.w1 * dt + w.w2 * fuel, fuel))
}

/// Occupancy-weighted density in veh/m/lane.
pub fn effective_density(
    n_alone: usize,
    n_leaders: usize,
    n_followers: usize,
    n_background: usize,
    length: f64,
    lanes: u32,
    pp: &PlatoonParams,
) -> f64 {
    let n = (n_alone + n_leaders + n_background) as f64 + pp.omega() * n_followers as f64;
    n / (length * lanes as f64)
}
