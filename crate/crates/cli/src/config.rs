//! Scenario files.
//!
//! Every block and key is optional; omitted values take the desk-scale
//! Nguyen-Dupuis defaults. Values are stored in the units named by the key
//! and converted to SI when the scenario is built.

use std::fmt::Write as _;
use std::path::Path;

use platoon_core::dynamics::{CostWeights, FuelModel, IdmParams, PlatoonParams};
use platoon_core::network::{build_cascade, build_nguyen_dupuis, ArcSpec, CascadeLayout, RoadNetwork};
use platoon_core::sim::{OdDemand, PolicyConfig, SimParams};
use platoon_core::value_approx::ApproxParams;
use platoon_core::{EdgeId, PolicyKind, Scenario, VertexId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkType {
    NguyenDupuis,
    Cascade,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(rename = "type")]
    pub kind: NetworkType,
    pub edge_length_m: f64,
    pub d1_m: f64,
    pub lanes: u32,
    pub critical_density_veh_per_km_ln: f64,
    /// Cascade only.
    pub junctions: u32,
    pub mainline_d2_m: f64,
}

/// Arcs for `network.type = "custom"`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomNetwork {
    /// `[from, to, length_m, d1_m]`
    pub arcs: Vec<[f64; 4]>,
    pub origins: Vec<u32>,
    pub destinations: Vec<u32>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            kind: NetworkType::NguyenDupuis,
            edge_length_m: 2000.0,
            d1_m: 500.0,
            lanes: 1,
            critical_density_veh_per_km_ln: 35.0,
            junctions: 2,
            mainline_d2_m: 30_000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdConfig {
    pub origin: u32,
    pub destination: u32,
    pub rate_veh_per_hr: f64,
    pub n_cavs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Empty means the network's default O-D set.
    pub od: Vec<OdConfig>,
    pub penetration: f64,
    /// Rate and count used for the default O-D set.
    pub default_rate_veh_per_hr: f64,
    pub default_n_cavs: u64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig { od: Vec::new(), penetration: 1.0 / 6.0, default_rate_veh_per_hr: 216.0, default_n_cavs: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValueApproxConfig {
    pub degree_n: usize,
    pub window_l: usize,
    pub window_y: usize,
}

impl Default for ValueApproxConfig {
    fn default() -> Self {
        let p = ApproxParams::default();
        ValueApproxConfig { degree_n: p.degree, window_l: p.window_l, window_y: p.window_y }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyBlock {
    #[serde(rename = "type")]
    pub kind: String,
    pub gamma: f64,
    pub psi: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub chi: f64,
    pub solver_tol: f64,
    pub value_approx: ValueApproxConfig,
}

impl Default for PolicyBlock {
    fn default() -> Self {
        let p = PolicyConfig::default();
        PolicyBlock {
            kind: PolicyKind::ThresholdNetwork.name().into(),
            gamma: p.gamma,
            psi: p.psi,
            m: p.m,
            chi: p.chi,
            solver_tol: p.solver_tol,
            value_approx: ValueApproxConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostsConfig {
    pub w1_usd_per_hr: f64,
    pub w2_usd_per_l: f64,
    pub phi_l_per_100km: f64,
    pub eta: f64,
    pub alpha: f64,
}

impl Default for CostsConfig {
    fn default() -> Self {
        let w = CostWeights::default();
        let f = FuelModel::default();
        CostsConfig {
            w1_usd_per_hr: w.w1 * 3600.0,
            w2_usd_per_l: w.w2,
            phi_l_per_100km: f.phi * 100_000.0,
            eta: f.eta,
            alpha: f.alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonConfig {
    pub tau_l_s: f64,
    pub tau_f_s: f64,
    pub tau_c_s: f64,
    pub t_s_s: f64,
    pub h0_s: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        let p = PlatoonParams::default();
        PlatoonConfig { tau_l_s: p.tau_l, tau_f_s: p.tau_f, tau_c_s: p.tau_c, t_s_s: p.t_s, h0_s: p.h0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmConfig {
    pub v0: f64,
    pub s0: f64,
    pub t_hw: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for IdmConfig {
    fn default() -> Self {
        let p = IdmParams::default();
        IdmConfig { v0: p.v0, s0: p.s0, t_hw: p.t_hw, a: p.a, b: p.b, delta: p.delta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilityEvent {
    pub edge: u32,
    pub t_off_s: f64,
    pub t_on_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub max_time_s: f64,
    pub bin_s: f64,
    pub min_speed_mps: f64,
    pub ref_speed_cap: f64,
    pub lambda_prior_veh_per_hr: f64,
    pub max_events: u64,
    pub background_table_updates: bool,
    pub availability: Vec<AvailabilityEvent>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = SimParams::default();
        SimConfig {
            seed: p.seed,
            max_time_s: p.max_time,
            bin_s: p.bin_s,
            min_speed_mps: p.min_speed,
            ref_speed_cap: p.ref_speed_cap,
            lambda_prior_veh_per_hr: p.lambda_prior * 3600.0,
            max_events: p.max_events,
            background_table_updates: p.background_table_updates,
            availability: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    CriticalDensity,
    OdRate,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::CriticalDensity => "critical_density",
            SweepVariable::OdRate => "od_rate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub policies: Vec<String>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVariable::CriticalDensity,
            values: vec![20.0, 35.0, 50.0, 65.0, 80.0],
            policies: vec!["baseline".into(), "policy-a".into(), "threshold-network".into()],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub custom: CustomNetwork,
    pub demand: DemandConfig,
    pub policy: PolicyBlock,
    pub costs: CostsConfig,
    pub platoon: PlatoonConfig,
    pub idm: IdmConfig,
    pub sim: SimConfig,
    pub sweep: SweepConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn policy_kind(&self) -> Result<PolicyKind, ConfigError> {
        parse_policy(&self.policy.kind).map_err(|m| ConfigError::Invalid(format!("policy.type: {m}")))
    }

    /// Checks value ranges and cross references; all problems are reported.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs: Vec<String> = Vec::new();
        macro_rules! bad {
            ($key:expr, $msg:expr) => {
                errs.push(format!("  {}: {}", $key, $msg))
            };
        }
        let n = &self.network;
        if !(n.d1_m > 0.0) {
            bad!("network.d1_m", "must be positive");
        }
        if n.lanes == 0 {
            bad!("network.lanes", "must be at least 1");
        }
        if !(n.critical_density_veh_per_km_ln > 0.0) {
            bad!("network.critical_density_veh_per_km_ln", "must be positive");
        }
        match n.kind {
            NetworkType::NguyenDupuis if !(n.edge_length_m > 2.0 * n.d1_m) => {
                bad!("network.edge_length_m", "must exceed twice network.d1_m")
            }
            NetworkType::Cascade if n.junctions == 0 => bad!("network.junctions", "must be at least 1"),
            NetworkType::Cascade if !(n.mainline_d2_m > n.d1_m) => {
                bad!("network.mainline_d2_m", "must exceed network.d1_m")
            }
            NetworkType::Custom if self.custom.arcs.is_empty() => bad!("custom.arcs", "custom networks need arcs"),
            _ => {}
        }
        if !(self.demand.penetration > 0.0 && self.demand.penetration <= 1.0) {
            bad!("demand.penetration", "must lie in (0, 1]");
        }
        if self.demand.od.is_empty() && !(self.demand.default_rate_veh_per_hr > 0.0) {
            bad!("demand.default_rate_veh_per_hr", "must be positive");
        }
        for (i, od) in self.demand.od.iter().enumerate() {
            if !(od.rate_veh_per_hr > 0.0) {
                bad!(&format!("demand.od[{i}].rate_veh_per_hr"), "must be positive");
            }
        }
        let p = &self.policy;
        if let Err(m) = parse_policy(&p.kind) {
            bad!("policy.type", &m);
        }
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            bad!("policy.gamma", "must lie in (0, 1)");
        }
        if !(p.psi > 0.0 && p.psi < 1.0) {
            bad!("policy.psi", "must lie in (0, 1)");
        }
        if p.m == 0 {
            bad!("policy.M", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&p.chi) {
            bad!("policy.chi", "must lie in [0, 1]");
        }
        if !(p.solver_tol > 0.0) {
            bad!("policy.solver_tol", "must be positive");
        }
        if p.value_approx.window_l < p.value_approx.degree_n {
            bad!("policy.value_approx.window_l", "must be at least degree_n");
        }
        let c = &self.costs;
        for (key, v) in [
            ("costs.w1_usd_per_hr", c.w1_usd_per_hr),
            ("costs.w2_usd_per_l", c.w2_usd_per_l),
            ("costs.phi_l_per_100km", c.phi_l_per_100km),
            ("costs.alpha", c.alpha),
        ] {
            if !(v > 0.0) {
                bad!(key, "must be positive");
            }
        }
        if !(0.0..1.0).contains(&c.eta) {
            bad!("costs.eta", "must lie in [0, 1)");
        }
        let pl = &self.platoon;
        if !(pl.tau_f_s > 0.0 && pl.tau_f_s < pl.tau_c_s && pl.tau_f_s < pl.tau_l_s) {
            bad!("platoon.tau_f_s", "must be positive and below tau_c_s and tau_l_s");
        }
        if !(pl.h0_s >= 0.0) {
            bad!("platoon.h0_s", "must be non-negative");
        }
        if !(self.idm.v0 > 0.0) {
            bad!("idm.v0", "must be positive");
        }
        let s = &self.sim;
        if !(s.max_time_s > 0.0) {
            bad!("sim.max_time_s", "must be positive");
        }
        if !(s.bin_s > 0.0) {
            bad!("sim.bin_s", "must be positive");
        }
        if !(s.min_speed_mps > 0.0 && s.min_speed_mps < self.idm.v0) {
            bad!("sim.min_speed_mps", "must lie in (0, idm.v0)");
        }
        if !(s.ref_speed_cap >= 1.0) {
            bad!("sim.ref_speed_cap", "must be at least 1");
        }
        if !(s.lambda_prior_veh_per_hr > 0.0) {
            bad!("sim.lambda_prior_veh_per_hr", "must be positive");
        }
        for (i, ev) in s.availability.iter().enumerate() {
            if !(0.0 <= ev.t_off_s && ev.t_off_s <= ev.t_on_s) {
                bad!(&format!("sim.availability[{i}]"), "needs 0 <= t_off_s <= t_on_s");
            }
        }
        for (i, name) in self.sweep.policies.iter().enumerate() {
            if let Err(m) = parse_policy(name) {
                bad!(&format!("sweep.policies[{i}]"), &m);
            }
        }
        if errs.is_empty() {
            // network-level checks need the built graph
            if let Err(e) = self.build_network() {
                bad!("network", &e);
            }
        }
        if errs.is_empty() {
            if let Err(e) = self.demand_list() {
                errs.push(e.trim_end().to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs.join("\n")))
        }
    }

    pub fn build_network(&self) -> Result<RoadNetwork, String> {
        let n = &self.network;
        let mut net = match n.kind {
            NetworkType::NguyenDupuis => build_nguyen_dupuis(n.edge_length_m, n.d1_m, n.lanes),
            NetworkType::Cascade => build_cascade(n.junctions, n.mainline_d2_m, n.d1_m).and_then(|mut net| {
                net.set_lanes(n.lanes)?;
                Ok(net)
            }),
            NetworkType::Custom => {
                let c = &self.custom;
                let arcs: Vec<ArcSpec> =
                    c.arcs.iter().map(|a| ArcSpec::new(a[0] as u32, a[1] as u32, a[2], a[3])).collect();
                let origins: Vec<VertexId> = c.origins.iter().map(|&v| VertexId(v)).collect();
                let dests: Vec<VertexId> = c.destinations.iter().map(|&v| VertexId(v)).collect();
                RoadNetwork::new(&arcs, n.lanes, &origins, &dests)
            }
        }
        .map_err(|e| e.to_string())?;
        for ev in &self.sim.availability {
            let edge = EdgeId(ev.edge);
            net.edge(edge).map_err(|e| format!("sim.availability edge {}: {e}", ev.edge))?;
            if ev.t_off_s < ev.t_on_s {
                net.set_edge_availability(edge, false, ev.t_off_s).map_err(|e| e.to_string())?;
                net.set_edge_availability(edge, true, ev.t_on_s).map_err(|e| e.to_string())?;
            }
        }
        Ok(net)
    }

    /// Explicit O-D list, or the network's default set.
    pub fn demand_list(&self) -> Result<Vec<OdDemand>, String> {
        let net = self.build_network()?;
        let mut out = Vec::new();
        if self.demand.od.is_empty() {
            let rate = self.demand.default_rate_veh_per_hr / 3600.0;
            let n = self.demand.default_n_cavs;
            match self.network.kind {
                NetworkType::Cascade => {
                    let lay = CascadeLayout::new(self.network.junctions);
                    let mut sources = vec![lay.mainline_source];
                    sources.extend(lay.ramp_sources.iter().copied());
                    for s in sources {
                        out.push(OdDemand { origin: s, destination: lay.destination, rate, n_cavs: n });
                    }
                }
                _ => {
                    for &o in net.origins() {
                        for &d in net.destinations() {
                            out.push(OdDemand { origin: o, destination: d, rate, n_cavs: n });
                        }
                    }
                }
            }
            return Ok(out);
        }
        let mut errs = String::new();
        for (i, od) in self.demand.od.iter().enumerate() {
            let (o, d) = (VertexId(od.origin), VertexId(od.destination));
            if !net.contains_vertex(o) {
                let _ = writeln!(errs, "  demand.od[{i}].origin: unknown vertex {o}");
            }
            if !net.destinations().contains(&d) {
                let _ = writeln!(errs, "  demand.od[{i}].destination: {d} is not a destination");
            }
            out.push(OdDemand { origin: o, destination: d, rate: od.rate_veh_per_hr / 3600.0, n_cavs: od.n_cavs });
        }
        if errs.is_empty() {
            Ok(out)
        } else {
            Err(errs)
        }
    }

    pub fn fuel_model(&self) -> FuelModel {
        FuelModel {
            phi: self.costs.phi_l_per_100km / 100_000.0,
            eta: self.costs.eta,
            alpha: self.costs.alpha,
            ..FuelModel::default()
        }
    }

    pub fn weights(&self) -> CostWeights {
        CostWeights { w1: self.costs.w1_usd_per_hr / 3600.0, w2: self.costs.w2_usd_per_l }
    }

    pub fn platoon_params(&self) -> PlatoonParams {
        let p = &self.platoon;
        PlatoonParams { tau_l: p.tau_l_s, tau_f: p.tau_f_s, tau_c: p.tau_c_s, t_s: p.t_s_s, h0: p.h0_s }
    }

    pub fn idm_params(&self) -> IdmParams {
        let i = &self.idm;
        IdmParams { v0: i.v0, s0: i.s0, t_hw: i.t_hw, a: i.a, b: i.b, delta: i.delta }
    }

    /// Builds the SI-unit scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let net = self.build_network().map_err(|e| ConfigError::Invalid(format!("  network: {e}")))?;
        let demand = self.demand_list().map_err(ConfigError::Invalid)?;
        let p = &self.policy;
        let s = &self.sim;
        Ok(Scenario {
            network: net,
            demand,
            penetration: self.demand.penetration,
            policy: self.policy_kind()?,
            policy_cfg: PolicyConfig {
                gamma: p.gamma,
                psi: p.psi,
                m: p.m,
                chi: p.chi,
                approx: ApproxParams {
                    degree: p.value_approx.degree_n,
                    window_l: p.value_approx.window_l,
                    window_y: p.value_approx.window_y,
                },
                solver_tol: p.solver_tol,
            },
            fuel: self.fuel_model(),
            weights: self.weights(),
            platoon: self.platoon_params(),
            v0: self.idm.v0,
            k_c: self.network.critical_density_veh_per_km_ln / 1000.0,
            sim: SimParams {
                seed: s.seed,
                max_time: s.max_time_s,
                bin_s: s.bin_s,
                min_speed: s.min_speed_mps,
                ref_speed_cap: s.ref_speed_cap,
                lambda_prior: s.lambda_prior_veh_per_hr / 3600.0,
                max_events: s.max_events,
                background_table_updates: s.background_table_updates,
            },
        })
    }

    /// Applies one sweep value to a copy of the config.
    pub fn with_sweep_value(&self, var: SweepVariable, value: f64) -> ScenarioConfig {
        let mut cfg = self.clone();
        match var {
            SweepVariable::CriticalDensity => cfg.network.critical_density_veh_per_km_ln = value,
            SweepVariable::OdRate => {
                cfg.demand.default_rate_veh_per_hr = value;
                for od in &mut cfg.demand.od {
                    od.rate_veh_per_hr = value;
                }
            }
        }
        cfg
    }
}

pub fn parse_policy(name: &str) -> Result<PolicyKind, String> {
    PolicyKind::parse(name).ok_or_else(|| {
        let known: Vec<&str> = PolicyKind::ALL.iter().map(|p| p.name()).collect();
        format!("unknown policy '{name}' (expected one of {})", known.join(", "))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_convert_on_build() {
        let cfg =
            ScenarioConfig::parse("[costs]\nw1_usd_per_hr = 36.0\n[sim]\nlambda_prior_veh_per_hr = 360.0\n").unwrap();
        let sc = cfg.scenario().unwrap();
        assert!((sc.weights.w1 - 0.01).abs() < 1e-15);
        assert!((sc.sim.lambda_prior - 0.1).abs() < 1e-15);
        assert!((sc.fuel.phi - 3.22e-4).abs() < 1e-15);
    }

    #[test]
    fn cascade_default_demand_uses_every_source() {
        let cfg = ScenarioConfig::parse("[network]\ntype = \"cascade\"\njunctions = 3\n").unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.demand.len(), 4);
        let lay = CascadeLayout::new(3);
        assert!(sc.demand.iter().all(|d| d.destination == lay.destination));
    }

    #[test]
    fn sweep_values_override() {
        let cfg = ScenarioConfig::default();
        let k = cfg.with_sweep_value(SweepVariable::CriticalDensity, 50.0);
        assert_eq!(k.network.critical_density_veh_per_km_ln, 50.0);
        let q = cfg.with_sweep_value(SweepVariable::OdRate, 100.0);
        assert_eq!(q.demand.default_rate_veh_per_hr, 100.0);
    }

    #[test]
    fn every_problem_is_listed() {
        let err = ScenarioConfig::parse("[policy]\ngamma = 2\nchi = -1\ntype = \"nope\"\n").unwrap_err().to_string();
        for key in ["policy.gamma", "policy.chi", "policy.type"] {
            assert!(err.contains(key), "{err}");
        }
    }
}
