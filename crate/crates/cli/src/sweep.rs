//! Full-factorial experiment sweeps.

use platoon_core::sim::run;
use platoon_core::PolicyKind;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_policy, ConfigError, ScenarioConfig, SweepVariable};

/// One (value, policy, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub variable: &'static str,
    pub value: f64,
    pub policy: &'static str,
    pub seed: u64,
    pub mean_cav_cost_usd: Option<f64>,
    /// Cost over the baseline cost of the same value and seed.
    pub baseline_ratio: Option<f64>,
    pub n_arrived: Option<u64>,
    pub merges: Option<u64>,
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
}

impl SweepPlan {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let s = &cfg.sweep;
        let policies = s
            .policies
            .iter()
            .map(|p| parse_policy(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| ConfigError::Invalid(format!("  sweep.policies: {m}")))?;
        let plan = SweepPlan { variable: s.variable, values: s.values.clone(), policies, seeds: s.seeds.clone() };
        plan.check()?;
        Ok(plan)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.values.is_empty() {
            errs.push("  sweep.values: need at least one value");
        }
        if self.values.iter().any(|v| !(*v > 0.0)) {
            errs.push("  sweep.values: values must be positive");
        }
        if self.policies.is_empty() {
            errs.push("  sweep.policies: need at least one policy");
        }
        if self.seeds.is_empty() {
            errs.push("  sweep.seeds: need at least one seed");
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs.join("\n")))
        }
    }

    fn cells(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for vi in 0..self.values.len() {
            for pi in 0..self.policies.len() {
                for &seed in &self.seeds {
                    out.push((vi, pi, seed));
                }
            }
        }
        out
    }
}

fn run_cell(base: &ScenarioConfig, plan: &SweepPlan, vi: usize, pi: usize, seed: u64) -> SweepRow {
    let value = plan.values[vi];
    let policy = plan.policies[pi];
    let mut row = SweepRow {
        variable: plan.variable.name(),
        value,
        policy: policy.name(),
        seed,
        mean_cav_cost_usd: None,
        baseline_ratio: None,
        n_arrived: None,
        merges: None,
        status: "ok".into(),
    };
    let cfg = base.with_sweep_value(plan.variable, value);
    let result = cfg.scenario().map_err(|e| e.to_string()).and_then(|mut sc| {
        sc.policy = policy;
        sc.sim.seed = seed;
        run(&sc).map_err(|e| e.to_string())
    });
    match result {
        Ok(r) => {
            let s = &r.summary;
            row.mean_cav_cost_usd = Some(s.mean_cav_cost);
            row.n_arrived = Some(s.n_arrived);
            row.merges = Some(s.merges);
            if s.aborted {
                row.status = "aborted".into();
            } else if s.truncated > 0 {
                row.status = format!("truncated {}", s.truncated);
            }
        }
        Err(e) => row.status = format!("error: {}", e.replace('\n', " ")),
    }
    row
}

/// Runs every cell on the current rayon pool. Rows come back ordered by
/// (value, policy, seed) in plan order regardless of scheduling.
pub fn run_sweep(base: &ScenarioConfig, plan: &SweepPlan) -> Vec<SweepRow> {
    let cells = plan.cells();
    let mut rows: Vec<((usize, usize, u64), SweepRow)> =
        cells.par_iter().map(|&(vi, pi, seed)| ((vi, pi, seed), run_cell(base, plan, vi, pi, seed))).collect();
    rows.sort_by_key(|(k, _)| *k);
    let mut rows: Vec<SweepRow> = rows.into_iter().map(|(_, r)| r).collect();
    fill_ratios(&mut rows);
    rows
}

fn fill_ratios(rows: &mut [SweepRow]) {
    let baseline: Vec<(u64, u64, f64)> = rows
        .iter()
        .filter(|r| r.policy == PolicyKind::Baseline.name() && r.ok())
        .filter_map(|r| r.mean_cav_cost_usd.map(|c| (r.value.to_bits(), r.seed, c)))
        .collect();
    for r in rows.iter_mut().filter(|r| r.ok()) {
        let Some(cost) = r.mean_cav_cost_usd else { continue };
        if let Some(&(_, _, b)) = baseline.iter().find(|(v, s, _)| *v == r.value.to_bits() && *s == r.seed) {
            if b > 0.0 {
                r.baseline_ratio = Some(cost / b);
            }
        }
    }
}

pub fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}
