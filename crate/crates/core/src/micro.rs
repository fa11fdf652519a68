//! Microscopic validation mode: a leader/follower pair on one edge under IDM.
//!
//! The follower switches to catch-up driving once its time headway drops
//! below `tau_c`: desired headway becomes `tau_f` and its desired speed is
//! raised so it can close the gap. A platoon that stays apart by more than
//! `tau_f` for `t_s` seconds is considered split.

use alloc::vec::Vec;

use crate::dynamics::{idm_acceleration, DynamicsError, IdmParams, PlatoonParams};

pub const VEHICLE_LENGTH: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairState {
    pub t: f64,
    pub x_leader: f64,
    pub v_leader: f64,
    pub x_follower: f64,
    pub v_follower: f64,
}

impl PairState {
    /// Follower's time headway (bumper gap over own speed).
    pub fn time_headway(&self) -> f64 {
        let gap = self.x_leader - self.x_follower - VEHICLE_LENGTH;
        if self.v_follower > 0.0 {
            gap / self.v_follower
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub trace: Vec<PairState>,
    /// First time the follower's headway reached `tau_f`.
    pub joined_at: Option<f64>,
    /// Time the split timer expired, if it did.
    pub split_at: Option<f64>,
}

/// Integrates the pair with explicit Euler steps of `dt` up to `t_end`.
///
/// The leader cruises freely at `idm.v0`; the follower starts `gap0` metres
/// behind at the same speed.
pub fn simulate_pair(
    idm: &IdmParams,
    pp: &PlatoonParams,
    gap0: f64,
    dt: f64,
    t_end: f64,
) -> Result<PairOutcome, DynamicsError> {
    let v0 = idm.v0;
    let mut s = PairState { t: 0.0, x_leader: gap0, v_leader: v0, x_follower: 0.0, v_follower: v0 };
    let catch_up = IdmParams { t_hw: pp.tau_f / 2.0, v0: 1.25 * v0, ..*idm };
    let mut trace = Vec::new();
    let mut joined_at = None;
    let mut split_at = None;
    let mut apart_since: Option<f64> = None;
    while s.t < t_end {
        trace.push(s);
        let th = s.time_headway();
        if joined_at.is_none() && th <= pp.tau_f {
            joined_at = Some(s.t);
        }
        if joined_at.is_some() && split_at.is_none() {
            if th > pp.tau_f * 1.5 {
                let since = *apart_since.get_or_insert(s.t);
                if s.t - since >= pp.t_s {
                    split_at = Some(s.t);
                }
            } else {
                apart_since = None;
            }
        }
        let params = if th <= pp.tau_c { &catch_up } else { idm };
        let gap = s.x_leader - s.x_follower - VEHICLE_LENGTH;
        let a_l = idm_acceleration(s.v_leader, None, 0.0, idm)?;
        let a_f = idm_acceleration(s.v_follower, Some(gap.max(1e-3)), s.v_follower - s.v_leader, params)?;
        s.v_leader = (s.v_leader + a_l * dt).max(0.0);
        s.v_follower = (s.v_follower + a_f * dt).max(0.0);
        s.x_leader += s.v_leader * dt;
        s.x_follower += s.v_follower * dt;
        s.t += dt;
    }
    Ok(PairOutcome { trace, joined_at, split_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn follower_closes_to_platoon_headway() {
        let idm = IdmParams::default();
        let pp = PlatoonParams::default();
        // start tau_c behind the leader
        let out = simulate_pair(&idm, &pp, pp.tau_c * idm.v0, 0.05, 600.0).unwrap();
        let t = out.joined_at.expect("follower should reach tau_f");
        assert!(t > 0.0 && t < 600.0);
        assert!(out.trace.iter().all(|s| s.x_leader > s.x_follower));
    }

    #[test]
    fn distant_follower_never_catches_up() {
        let idm = IdmParams::default();
        let pp = PlatoonParams::default();
        let out = simulate_pair(&idm, &pp, 3.0 * pp.tau_c * idm.v0, 0.1, 120.0).unwrap();
        assert!(out.joined_at.is_none());
    }
}
