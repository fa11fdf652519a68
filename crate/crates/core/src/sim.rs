//! Deterministic mesoscopic discrete-event simulator.
//!
//! Each edge is a cruising zone followed by a coordinating zone. A vehicle's
//! speed on a zone is fixed when it enters the zone, from the occupancy
//! weighted density of the edge at that moment (Greenshield). Junction
//! controllers act when a CAV enters a coordinating zone: they pick the next
//! edge and a time reduction `u`, which sets the coordinating-zone speed.
//! A merge (`u = h`) makes the vehicle pass the junction exactly when its
//! predecessor does; if both continue on the same edge they travel as a
//! platoon and the follower saves `eta` of its cruising fuel.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::arrivals::{background_rate, HeadwayHistory, PoissonSource};
use crate::dynamics::{trip_segment_cost, CostWeights, FuelModel, GreenshieldModel, PlatoonParams};
use crate::math;
use crate::network::{EdgeId, RoadNetwork, VertexId};
use crate::platoon::PlatoonRegistry;
use crate::routing::{cruising_distance_common, cruising_distance_single, TravelTimeTable};
use crate::threshold::{solve_threshold, value_iteration, PolicyParams, ThresholdError};

/// Grid step of the value-iteration fallback when the equation solve fails.
const ORACLE_FALLBACK_DH: f64 = 0.25;
use crate::value_approx::{Action, ApproxParams, PolyCostModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Baseline,
    PolicyA,
    ValueApprox,
    ThresholdNetwork,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::Baseline, PolicyKind::PolicyA, PolicyKind::ValueApprox, PolicyKind::ThresholdNetwork];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::PolicyA => "policy-a",
            PolicyKind::ValueApprox => "value-approx",
            PolicyKind::ThresholdNetwork => "threshold-network",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VehicleClass {
    Cav,
    Background,
}

impl VehicleClass {
    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Cav => "cav",
            VehicleClass::Background => "background",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdDemand {
    pub origin: VertexId,
    pub destination: VertexId,
    /// CAV arrival rate, veh/s.
    pub rate: f64,
    pub n_cavs: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyConfig {
    pub gamma: f64,
    pub psi: f64,
    pub m: usize,
    pub chi: f64,
    pub approx: ApproxParams,
    pub solver_tol: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { gamma: 0.9, psi: 0.9, m: 50, chi: 1.0, approx: ApproxParams::default(), solver_tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    pub seed: u64,
    pub max_time: f64,
    pub bin_s: f64,
    /// Floor on zone speeds so jammed edges still drain.
    pub min_speed: f64,
    /// Coordinating-zone speed may not exceed this multiple of the base speed.
    pub ref_speed_cap: f64,
    /// Arrival-rate estimate (veh/s) before any headway is observed.
    pub lambda_prior: f64,
    pub max_events: u64,
    /// Background vehicles also report realized link times to the tables.
    pub background_table_updates: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            seed: 1,
            max_time: 200_000.0,
            bin_s: 60.0,
            min_speed: 1.0,
            ref_speed_cap: 1.5,
            lambda_prior: 0.03,
            max_events: 50_000_000,
            background_table_updates: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub demand: Vec<OdDemand>,
    /// CAV share of traffic in (0, 1].
    pub penetration: f64,
    pub policy: PolicyKind,
    pub policy_cfg: PolicyConfig,
    pub fuel: FuelModel,
    pub weights: CostWeights,
    pub platoon: PlatoonParams,
    pub v0: f64,
    /// Critical density, veh/m/lane.
    pub k_c: f64,
    pub sim: SimParams,
}

impl Scenario {
    pub fn new(network: RoadNetwork, demand: Vec<OdDemand>, policy: PolicyKind) -> Self {
        Scenario {
            network,
            demand,
            penetration: 1.0,
            policy,
            policy_cfg: PolicyConfig::default(),
            fuel: FuelModel::default(),
            weights: CostWeights::default(),
            platoon: PlatoonParams::default(),
            v0: 24.0,
            k_c: 0.035,
            sim: SimParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.into()));
        if !(self.penetration > 0.0 && self.penetration <= 1.0) {
            return bad("penetration must lie in (0, 1]");
        }
        if !(self.v0 > 0.0 && self.k_c > 0.0) {
            return bad("v0 and critical density must be positive");
        }
        if !(self.sim.bin_s > 0.0 && self.sim.min_speed > 0.0 && self.sim.ref_speed_cap >= 1.0) {
            return bad("bin width, speed floor and reference-speed cap must be positive");
        }
        if !(self.sim.lambda_prior > 0.0) {
            return bad("lambda prior must be positive");
        }
        let pc = &self.policy_cfg;
        if !(pc.gamma > 0.0 && pc.gamma < 1.0 && pc.psi > 0.0 && pc.psi < 1.0 && pc.m >= 1) {
            return bad("gamma and psi must lie in (0,1) and M >= 1");
        }
        if !(0.0..=1.0).contains(&pc.chi) {
            return bad("chi must lie in [0,1]");
        }
        if self.fuel.validate().is_err() || self.platoon.validate().is_err() {
            return bad("invalid fuel or platoon parameters");
        }
        for od in &self.demand {
            if !self.network.contains_vertex(od.origin) || !self.network.destinations().contains(&od.destination) {
                return bad("demand references an unknown origin or destination");
            }
            if !(od.rate > 0.0) {
                return bad("demand rates must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub edge: EdgeId,
    pub enter_s: f64,
    /// `None` when the run ended on the edge.
    pub exit_s: Option<f64>,
    pub cost_usd: f64,
    pub fuel_l: f64,
    pub follower: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub vehicle_id: u64,
    pub class: VehicleClass,
    pub origin: VertexId,
    pub destination: VertexId,
    pub spawn_s: f64,
    /// `None` when the run ended first.
    pub arrive_s: Option<f64>,
    pub time_s: f64,
    pub fuel_l: f64,
    pub cost_usd: f64,
    pub merges: u32,
    pub merge_infeasible: u32,
    pub route: Vec<EdgeId>,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBin {
    pub bin_start_s: f64,
    pub edge: EdgeId,
    pub mean_speed_mps: f64,
    pub density_veh_per_m: f64,
    pub flow_veh_per_s: f64,
    pub entries: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyRow {
    pub t_s: f64,
    pub vertex: VertexId,
    pub lambda_hat: f64,
    pub theta_s: f64,
    pub c_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteProbe {
    pub t_s: f64,
    pub origin: VertexId,
    pub destination: VertexId,
    pub edges: Vec<EdgeId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub policy: &'static str,
    pub seed: u64,
    pub n_cav: u64,
    pub n_background: u64,
    pub n_arrived: u64,
    pub mean_cav_cost: f64,
    pub mean_cav_time: f64,
    pub mean_cav_fuel: f64,
    pub merges: u64,
    pub merge_infeasible: u64,
    pub solver_failures: u64,
    pub oracle_fallbacks: u64,
    pub degenerate: u64,
    pub no_common_path: u64,
    pub clamped_distance: u64,
    pub no_route_fallbacks: u64,
    pub reroutes: u64,
    pub truncated: u64,
    pub aborted: bool,
    pub events: u64,
    pub end_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub trips: Vec<TripRecord>,
    pub edges: Vec<EdgeBin>,
    pub policy: Vec<PolicyRow>,
    pub routes: Vec<RouteProbe>,
    /// CAV coordinating-zone entry times per vertex.
    pub arrivals: BTreeMap<VertexId, Vec<f64>>,
    /// Final travel-time table as `(i, d, edge, j, T)`.
    pub tables: Vec<(VertexId, VertexId, EdgeId, VertexId, f64)>,
    pub summary: Summary,
}

impl MetricsReport {
    /// Inter-arrival times of CAVs at `v`.
    pub fn inter_arrivals(&self, v: VertexId) -> Vec<f64> {
        self.arrivals.get(&v).map_or_else(Vec::new, |ts| ts.windows(2).map(|w| w[1] - w[0]).collect())
    }
}

/// `h = x + u_prev`, clamped at zero.
pub fn predicted_headway(x: f64, u_prev: f64) -> f64 {
    (x + u_prev).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    Spawn(usize),
    ZoneEntry(usize),
    JunctionPass(usize),
    Availability,
    Probe,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    t: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (t, seq)
        other.t.total_cmp(&self.t).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug)]
struct Vehicle {
    id: u64,
    class: VehicleClass,
    origin: VertexId,
    dest: VertexId,
    spawn: f64,
    route: Vec<EdgeId>,
    segments: Vec<Segment>,
    edge: Option<EdgeId>,
    edge_enter: f64,
    follower: bool,
    zone_entry_at: f64,
    next_edge: Option<EdgeId>,
    junction_at: f64,
    merge_with: Option<usize>,
    /// `(vertex, edge taken there, junction time)` for the pending table update.
    last_table: Option<(VertexId, EdgeId, f64)>,
    pending_va: Option<(VertexId, f64, Action, f64)>,
    seg_cost: f64,
    seg_fuel: f64,
    cost: f64,
    fuel: f64,
    merges: u32,
    infeasible: u32,
    arrived: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct PrevCav {
    vehicle: usize,
    dest: VertexId,
    edge: EdgeId,
    junction_at: f64,
}

#[derive(Clone, Debug)]
struct Controller {
    history: HeadwayHistory,
    last_entry: Option<f64>,
    prev: Option<PrevCav>,
    model: Option<PolyCostModel>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Occupancy {
    cav: usize,
    followers: usize,
    background: usize,
}

struct Source {
    demand: usize,
    class: VehicleClass,
    stream: PoissonSource,
}

#[derive(Clone, Copy)]
enum SolveOutcome {
    Solved(f64, f64),
    Degenerate(f64),
    Oracle(f64, f64),
    Failed,
}

struct Decision {
    u: f64,
    next: EdgeId,
    merge: bool,
}

struct Engine<'a> {
    sc: &'a Scenario,
    net: RoadNetwork,
    green: GreenshieldModel,
    queue: BinaryHeap<Event>,
    seq: u64,
    vehicles: Vec<Vehicle>,
    sources: Vec<Source>,
    controllers: Vec<Option<Controller>>,
    occupancy: Vec<Occupancy>,
    tables: TravelTimeTable,
    static_dist: Vec<Vec<f64>>,
    platoons: PlatoonRegistry,
    memo: BTreeMap<(i64, i64, u64), SolveOutcome>,
    report: MetricsReport,
    pairs: Vec<(VertexId, VertexId)>,
    last_c: Option<f64>,
}

/// Runs one scenario to completion (or `max_time`).
pub fn run(sc: &Scenario) -> Result<MetricsReport, SimError> {
    sc.validate()?;
    let mut eng = Engine::new(sc)?;
    eng.run();
    Ok(eng.finish())
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        let net = sc.network.clone();
        let tables = TravelTimeTable::init(&net, sc.v0, sc.policy_cfg.chi)
            .map_err(|e| SimError::InvalidScenario(alloc::format!("{e}")))?;
        let mut controllers = Vec::with_capacity(net.vertices().len());
        for v in net.vertices() {
            let has_in = net.in_edges(v.id).next().is_some();
            let has_out = net.out_edges(v.id).next().is_some();
            let ctl = if has_in && has_out {
                let history = HeadwayHistory::new(sc.policy_cfg.psi, sc.policy_cfg.m)
                    .map_err(|e| SimError::InvalidScenario(alloc::format!("{e}")))?;
                let model = if sc.policy == PolicyKind::ValueApprox {
                    Some(
                        PolyCostModel::new(sc.policy_cfg.approx)
                            .map_err(|e| SimError::InvalidScenario(alloc::format!("{e}")))?,
                    )
                } else {
                    None
                };
                Some(Controller { history, last_entry: None, prev: None, model })
            } else {
                None
            };
            controllers.push(ctl);
        }
        let mut sources = Vec::new();
        let mut pairs = Vec::new();
        for (k, od) in sc.demand.iter().enumerate() {
            if !pairs.contains(&(od.origin, od.destination)) {
                pairs.push((od.origin, od.destination));
            }
            if od.n_cavs == 0 {
                continue;
            }
            let seed = sc.sim.seed;
            let cav = PoissonSource::new(od.rate, od.origin, od.destination, Some(od.n_cavs), seed, 2 * k as u64)
                .map_err(|e| SimError::InvalidScenario(alloc::format!("{e}")))?;
            sources.push(Source { demand: k, class: VehicleClass::Cav, stream: cav });
            let bg_rate = background_rate(od.rate, sc.penetration);
            if bg_rate > 0.0 {
                let n_bg = math::round(od.n_cavs as f64 * (1.0 - sc.penetration) / sc.penetration) as u64;
                if n_bg > 0 {
                    let bg = PoissonSource::new(bg_rate, od.origin, od.destination, Some(n_bg), seed, 2 * k as u64 + 1)
                        .map_err(|e| SimError::InvalidScenario(alloc::format!("{e}")))?;
                    sources.push(Source { demand: k, class: VehicleClass::Background, stream: bg });
                }
            }
        }
        let n_edges = net.edges().len();
        let mut eng = Engine {
            sc,
            green: GreenshieldModel::from_critical(sc.v0, sc.k_c),
            queue: BinaryHeap::new(),
            seq: 0,
            vehicles: Vec::new(),
            sources,
            controllers,
            occupancy: vec![Occupancy::default(); n_edges],
            tables,
            static_dist: Vec::new(),
            platoons: PlatoonRegistry::new(),
            memo: BTreeMap::new(),
            report: MetricsReport::default(),
            pairs,
            last_c: None,
            net,
        };
        eng.refresh_static(0.0);
        for s in 0..eng.sources.len() {
            if let Some(dt) = eng.sources[s].stream.next_arrival() {
                eng.push(dt, EventKind::Spawn(s));
            }
        }
        for t in eng.net.availability_change_times() {
            eng.push(t, EventKind::Availability);
        }
        if !eng.sources.is_empty() {
            eng.push(0.0, EventKind::Probe);
        }
        Ok(eng)
    }

    fn push(&mut self, t: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { t, seq: self.seq, kind });
    }

    fn refresh_static(&mut self, t: f64) {
        let v0 = self.sc.v0;
        self.static_dist = self
            .net
            .destinations()
            .iter()
            .map(|&d| self.net.distances_to(d, |e| e.availability.is_available(t).then_some(e.length / v0)))
            .collect();
    }

    fn dest_index(&self, d: VertexId) -> usize {
        self.net.destinations().iter().position(|x| *x == d).unwrap_or(0)
    }

    fn static_next(&self, at: VertexId, d: VertexId, t: f64) -> Option<EdgeId> {
        let dist = &self.static_dist[self.dest_index(d)];
        let v0 = self.sc.v0;
        self.net.next_hop(at, dist, |e| e.availability.is_available(t).then_some(e.length / v0)).map(|(e, _)| e.id)
    }

    /// Static path edges starting with `first`.
    fn static_path_via(&self, first: EdgeId, d: VertexId, t: f64) -> Vec<EdgeId> {
        let mut edges = vec![first];
        let mut at = self.net.edges()[first.index()].to;
        while at != d && edges.len() <= self.net.vertices().len() {
            match self.static_next(at, d, t) {
                Some(e) => {
                    edges.push(e);
                    at = self.net.edges()[e.index()].to;
                }
                None => break,
            }
        }
        edges
    }

    /// Zone speed on `edge` from the density of the vehicles on it, excluding
    /// `own` (the weight of the asking vehicle when it is already counted).
    fn base_speed(&self, edge: EdgeId, own: f64) -> f64 {
        let e = &self.net.edges()[edge.index()];
        let o = self.occupancy[edge.index()];
        let n = (o.cav + o.background) as f64 + self.sc.platoon.omega() * o.followers as f64 - own;
        let k = n / (e.length * e.lanes as f64);
        self.green.equilibrium_speed(k).min(self.sc.v0).max(self.sc.sim.min_speed)
    }

    fn run(&mut self) {
        let mut events = 0u64;
        while let Some(ev) = self.queue.pop() {
            if ev.t > self.sc.sim.max_time {
                self.report.summary.end_time = self.sc.sim.max_time;
                break;
            }
            if events >= self.sc.sim.max_events {
                self.report.summary.aborted = true;
                self.report.summary.end_time = ev.t;
                break;
            }
            events += 1;
            self.report.summary.end_time = ev.t;
            match ev.kind {
                EventKind::Spawn(s) => self.on_spawn(s, ev.t),
                EventKind::ZoneEntry(v) => self.on_zone_entry(v, ev.t),
                EventKind::JunctionPass(v) => self.on_junction_pass(v, ev.t),
                EventKind::Availability => self.refresh_static(ev.t),
                EventKind::Probe => self.on_probe(ev.t),
            }
        }
        self.report.summary.events = events;
    }

    fn on_probe(&mut self, t: f64) {
        for &(o, d) in &self.pairs {
            let edges = if self.sc.policy == PolicyKind::ThresholdNetwork {
                self.table_path_edges(o, d, t)
            } else {
                self.static_next(o, d, t).map(|e| self.static_path_via(e, d, t)).unwrap_or_default()
            };
            self.report.routes.push(RouteProbe { t_s: t, origin: o, destination: d, edges });
        }
        let active = self.vehicles.iter().any(|v| v.arrived.is_none())
            || self.queue.iter().any(|e| matches!(e.kind, EventKind::Spawn(_)));
        if active {
            self.push(t + self.sc.sim.bin_s, EventKind::Probe);
        }
    }

    fn table_path_edges(&self, o: VertexId, d: VertexId, t: f64) -> Vec<EdgeId> {
        let mut edges = Vec::new();
        let mut at = o;
        while at != d && edges.len() <= self.net.vertices().len() {
            match self.tables.best_neighbor(&self.net, at, d, t) {
                Ok(h) => {
                    edges.push(h.edge);
                    at = h.next;
                }
                Err(_) => break,
            }
        }
        edges
    }

    fn on_spawn(&mut self, s: usize, t: f64) {
        let src = &mut self.sources[s];
        let od = self.sc.demand[src.demand];
        let class = src.class;
        if let Some(dt) = src.stream.next_arrival() {
            self.push(t + dt, EventKind::Spawn(s));
        }
        let idx = self.vehicles.len();
        self.vehicles.push(Vehicle {
            id: idx as u64,
            class,
            origin: od.origin,
            dest: od.destination,
            spawn: t,
            route: Vec::new(),
            segments: Vec::new(),
            edge: None,
            edge_enter: t,
            follower: false,
            zone_entry_at: t,
            next_edge: None,
            junction_at: t,
            merge_with: None,
            last_table: None,
            pending_va: None,
            seg_cost: 0.0,
            seg_fuel: 0.0,
            cost: 0.0,
            fuel: 0.0,
            merges: 0,
            infeasible: 0,
            arrived: None,
        });
        if od.origin == od.destination {
            self.vehicles[idx].arrived = Some(t);
            return;
        }
        let first = self.route_choice(idx, od.origin, t);
        match first {
            Some(e) => {
                self.vehicles[idx].last_table = Some((od.origin, e, t));
                self.enter_edge(idx, e, t, None);
            }
            None => {
                // no usable edge out of the origin right now
                self.report.summary.no_route_fallbacks += 1;
            }
        }
    }

    /// Next edge at `at` for vehicle `v` under its routing rule.
    fn route_choice(&mut self, v: usize, at: VertexId, t: f64) -> Option<EdgeId> {
        let veh = &self.vehicles[v];
        if veh.class == VehicleClass::Cav && self.sc.policy == PolicyKind::ThresholdNetwork {
            match self.tables.best_neighbor(&self.net, at, veh.dest, t) {
                Ok(h) => return Some(h.edge),
                Err(_) => self.report.summary.no_route_fallbacks += 1,
            }
        }
        self.static_next(at, self.vehicles[v].dest, t)
    }

    fn enter_edge(&mut self, v: usize, edge: EdgeId, t: f64, leader: Option<usize>) {
        let e = self.net.edges()[edge.index()].clone();
        let base = self.base_speed(edge, 0.0);
        let h0 = self.sc.platoon.h0;
        let (zone_at, follower) = match leader {
            Some(l) if self.vehicles[l].edge == Some(edge) => {
                let lead_at = self.vehicles[l].zone_entry_at;
                (lead_at.max(t + e.d2 / (self.sc.ref_speed_cap() * base)) + h0, true)
            }
            _ => (t + e.d2 / base, false),
        };
        let dt = zone_at - t;
        let (cost, fuel) =
            trip_segment_cost(dt, e.d2 / dt, follower, &self.sc.fuel, &self.sc.weights).unwrap_or((0.0, 0.0));
        let veh = &mut self.vehicles[v];
        veh.edge = Some(edge);
        veh.edge_enter = t;
        veh.follower = follower;
        veh.zone_entry_at = zone_at;
        veh.route.push(edge);
        veh.seg_cost = cost;
        veh.seg_fuel = fuel;
        veh.cost += cost;
        veh.fuel += fuel;
        let occ = &mut self.occupancy[edge.index()];
        match (veh.class, follower) {
            (VehicleClass::Background, _) => occ.background += 1,
            (VehicleClass::Cav, true) => occ.followers += 1,
            (VehicleClass::Cav, false) => occ.cav += 1,
        }
        self.push(zone_at, EventKind::ZoneEntry(v));
    }

    fn leave_edge(&mut self, v: usize, t: f64) {
        let veh = &mut self.vehicles[v];
        let Some(edge) = veh.edge.take() else { return };
        let occ = &mut self.occupancy[edge.index()];
        match (veh.class, veh.follower) {
            (VehicleClass::Background, _) => occ.background -= 1,
            (VehicleClass::Cav, true) => occ.followers -= 1,
            (VehicleClass::Cav, false) => occ.cav -= 1,
        }
        veh.segments.push(Segment {
            edge,
            enter_s: veh.edge_enter,
            exit_s: Some(t),
            cost_usd: veh.seg_cost,
            fuel_l: veh.seg_fuel,
            follower: veh.follower,
        });
        veh.seg_cost = 0.0;
        veh.seg_fuel = 0.0;
    }

    fn on_zone_entry(&mut self, v: usize, t: f64) {
        let Some(edge) = self.vehicles[v].edge else { return };
        let e = self.net.edges()[edge.index()].clone();
        let j = e.to;
        let own = if self.vehicles[v].follower { self.sc.platoon.omega() } else { 1.0 };
        let base = self.base_speed(edge, own);
        let class = self.vehicles[v].class;
        let dest = self.vehicles[v].dest;

        let mut merge_with = None;
        let (u, next) = if j == dest {
            (0.0, None)
        } else if class == VehicleClass::Background {
            (0.0, self.static_next(j, dest, t))
        } else {
            let d = self.decide(v, j, t, &e, base);
            match d {
                Some(d) => {
                    if d.merge {
                        merge_with = self.ctl(j).and_then(|c| c.prev).map(|p| p.vehicle);
                    }
                    (d.u, Some(d.next))
                }
                None => (0.0, None),
            }
        };
        let nominal = e.d1 / base;
        let junction_at = match merge_with {
            Some(l) => self.vehicles[l].junction_at,
            None => t + nominal - u,
        };
        let dt = junction_at - t;
        let (cost, fuel) =
            trip_segment_cost(dt, e.d1 / dt, false, &self.sc.fuel, &self.sc.weights).unwrap_or((0.0, 0.0));

        // value-approx outcome for the previous decision of this vehicle
        if let Some((p, h, action, mark)) = self.vehicles[v].pending_va.take() {
            let next_est = if j == dest { 0.0 } else { self.cost_to_go_estimate(j) };
            let realized = self.vehicles[v].cost - mark + next_est;
            if let Some(model) = self.ctl_mut(p).and_then(|c| c.model.as_mut()) {
                let _ = model.record_outcome(h, action, realized);
            }
        }

        {
            let veh = &mut self.vehicles[v];
            veh.junction_at = junction_at;
            veh.next_edge = next;
            veh.merge_with = merge_with;
            if merge_with.is_some() {
                veh.merges += 1;
                self.report.summary.merges += 1;
            }
            veh.seg_cost += cost;
            veh.seg_fuel += fuel;
            veh.cost += cost;
            veh.fuel += fuel;
        }

        // asynchronous table update for the previous vertex
        let report_times = class == VehicleClass::Cav || self.sc.sim.background_table_updates;
        if let Some((p, pe, tp)) = self.vehicles[v].last_table {
            if report_times {
                let downstream = self.tables.downstream_min(&self.net, j, dest, t);
                if downstream.is_finite() {
                    let _ = self.tables.update(&self.net, p, dest, pe, junction_at - tp, downstream);
                }
            }
        }
        self.vehicles[v].last_table = next.map(|n| (j, n, junction_at));

        if class == VehicleClass::Cav && j != dest {
            if let (Some(n), Some(ctl)) = (next, self.ctl_mut(j)) {
                ctl.prev = Some(PrevCav { vehicle: v, dest, edge: n, junction_at });
            }
        }
        self.push(junction_at, EventKind::JunctionPass(v));
    }

    fn ctl(&self, v: VertexId) -> Option<&Controller> {
        self.net.vertex_index(v).and_then(|i| self.controllers[i].as_ref())
    }

    fn ctl_mut(&mut self, v: VertexId) -> Option<&mut Controller> {
        match self.net.vertex_index(v) {
            Some(i) => self.controllers[i].as_mut(),
            None => None,
        }
    }

    fn cost_to_go_estimate(&self, j: VertexId) -> f64 {
        let Some(model) = self.ctl(j).and_then(|c| c.model.as_ref()) else { return 0.0 };
        let nm = model.estimate_nomerge_cost().ok();
        let m = model.estimate_merge_cost(0.0).ok();
        match (m, nm) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => 0.0,
        }
    }

    /// Controller logic for CAV `v` entering the coordinating zone of `j`.
    fn decide(&mut self, v: usize, j: VertexId, t: f64, e: &crate::network::Edge, base: f64) -> Option<Decision> {
        let dest = self.vehicles[v].dest;
        let policy = self.sc.policy;
        let sim = self.sc.sim;
        let (lambda_hat, prev) = {
            let ctl = self.ctl_mut(j)?;
            if let Some(last) = ctl.last_entry {
                ctl.history.push(t - last);
            }
            ctl.last_entry = Some(t);
            let lam = ctl.history.estimate().unwrap_or(sim.lambda_prior);
            (lam, ctl.prev)
        };
        self.report.arrivals.entry(j).or_default().push(t);

        // routing
        let next = match self.route_choice(v, j, t) {
            Some(n) => n,
            None => {
                self.report.summary.no_route_fallbacks += 1;
                return None;
            }
        };
        let nominal = e.d1 / base;
        let u_hi = nominal - e.d1 / (sim.ref_speed_cap * base);
        let u_lo = -nominal;
        let h = prev.map(|p| predicted_headway(t + nominal - p.junction_at, 0.0));

        let (mut u, mut merge) = match policy {
            PolicyKind::Baseline => (0.0, false),
            PolicyKind::PolicyA => {
                let d_hat = match prev {
                    Some(p) => {
                        let mine = self.static_path_via(next, dest, t);
                        let theirs = self.static_path_via(p.edge, p.dest, t);
                        mine.iter()
                            .zip(&theirs)
                            .take_while(|(a, b)| a == b)
                            .map(|(a, _)| self.net.edges()[a.index()].d2)
                            .sum::<f64>()
                    }
                    None => 0.0,
                };
                match (h, d_hat > 0.0) {
                    (Some(h), true) => {
                        let (theta, c) = self.threshold(j, t, lambda_hat, d_hat, e.d1);
                        if h <= theta {
                            (h, true)
                        } else {
                            (c.max(0.0), false)
                        }
                    }
                    _ => (0.0, false),
                }
            }
            PolicyKind::ValueApprox => {
                let mark = self.vehicles[v].cost;
                let (action, u) = match h {
                    Some(h) => {
                        let model = self.ctl_mut(j).and_then(|c| c.model.as_mut())?;
                        match model.decide(h) {
                            Action::Merge => (Action::Merge, h),
                            Action::NoMerge => (Action::NoMerge, 0.0),
                        }
                    }
                    None => (Action::NoMerge, 0.0),
                };
                self.vehicles[v].pending_va = Some((j, h.unwrap_or(0.0), action, mark));
                (u, action == Action::Merge)
            }
            PolicyKind::ThresholdNetwork => self.threshold_network(v, j, t, next, prev, h, lambda_hat, e.d1),
        };

        if merge {
            let p = prev?;
            let lead_dt = p.junction_at - t;
            let v_ref = if lead_dt > 0.0 { e.d1 / lead_dt } else { f64::INFINITY };
            if !(v_ref <= sim.ref_speed_cap * base && v_ref >= 0.5 * base * (1.0 - 1e-12)) {
                merge = false;
                self.vehicles[v].infeasible += 1;
                self.report.summary.merge_infeasible += 1;
                u = match policy {
                    PolicyKind::ThresholdNetwork => self.last_c.unwrap_or(0.0),
                    _ => 0.0,
                };
                if let Some((_, _, action, _)) = self.vehicles[v].pending_va.as_mut() {
                    *action = Action::NoMerge;
                }
            } else {
                u = nominal - lead_dt;
            }
        }
        if !merge {
            u = u.max(u_lo).min(u_hi);
        }
        Some(Decision { u, next, merge })
    }

    #[allow(clippy::too_many_arguments)]
    fn threshold_network(
        &mut self,
        v: usize,
        j: VertexId,
        t: f64,
        next: EdgeId,
        prev: Option<PrevCav>,
        h: Option<f64>,
        lambda_hat: f64,
        d1: f64,
    ) -> (f64, bool) {
        let dest = self.vehicles[v].dest;
        let v0 = self.sc.v0;
        let t_i = self.tables.get(&self.net, j, dest, next).unwrap_or(f64::INFINITY);
        let mine = self.tables.predict_path_via(&self.net, next, dest, t);
        let split = match (prev, &mine) {
            (Some(p), Ok(mine)) => match self.tables.predict_path_via(&self.net, p.edge, p.dest, t) {
                Ok(theirs) => crate::routing::split_vertex(mine, &theirs).ok(),
                Err(_) => None,
            },
            _ => None,
        };
        let path_len = |path: &[VertexId], from: usize| -> f64 {
            path[from..].windows(2).filter_map(|w| self.net.edge_between(w[0], w[1])).map(|e| e.length).sum()
        };
        let vbar = |dist: f64, time: f64| if time > 0.0 { (dist / time).max(1.0).min(v0) } else { v0 };
        let Ok(mine) = mine else {
            self.last_c = Some(0.0);
            return (0.0, false);
        };
        let vbar_i = vbar(path_len(&mine, 0), t_i);
        match split {
            Some(s) if s != j => {
                let pos = mine.iter().position(|x| *x == s).unwrap_or(0);
                let t_s = self.tables.downstream_min(&self.net, s, dest, t);
                let vbar_s = vbar(path_len(&mine, pos), t_s);
                let (d_hat, clamped) = cruising_distance_common(t_i, t_s, vbar_i, vbar_s, &self.sc.fuel);
                if clamped {
                    self.report.summary.clamped_distance += 1;
                }
                let (theta, c) = self.threshold(j, t, lambda_hat, d_hat, d1);
                self.last_c = Some(c);
                match h {
                    Some(h) if h <= theta => (h, true),
                    _ => (c, false),
                }
            }
            _ => {
                if prev.is_some() {
                    self.report.summary.no_common_path += 1;
                }
                let d_hat = cruising_distance_single(t_i, vbar_i, &self.sc.fuel);
                let (_, c) = self.threshold(j, t, lambda_hat, d_hat, d1);
                self.last_c = Some(c);
                (c, false)
            }
        }
    }

    /// Memoized `(theta, c)` for quantized `(lambda, D)`.
    fn threshold(&mut self, j: VertexId, t: f64, lambda: f64, d_hat: f64, d1: f64) -> (f64, f64) {
        let lq = math::round(lambda / 1e-4) as i64;
        let dq = math::round(d_hat / 100.0) as i64;
        let key = (lq, dq, d1.to_bits());
        let outcome = match self.memo.get(&key) {
            Some(o) => *o,
            None => {
                let mut p = PolicyParams {
                    w: self.sc.weights,
                    fm: self.sc.fuel,
                    d1,
                    d2: dq as f64 * 100.0,
                    v0: self.sc.v0,
                    gamma: self.sc.policy_cfg.gamma,
                    lambda: (lq.max(1)) as f64 * 1e-4,
                };
                p.fm.eta = self.sc.fuel.eta;
                let o = match solve_threshold(&p, self.sc.policy_cfg.solver_tol) {
                    Ok(s) => SolveOutcome::Solved(s.theta, s.c),
                    Err(ThresholdError::Degenerate { .. }) => {
                        SolveOutcome::Degenerate(p.reward_peak().max(p.u_min()).min(p.u_max()))
                    }
                    Err(_) => match value_iteration(&p, ORACLE_FALLBACK_DH) {
                        Ok(o) => SolveOutcome::Oracle(o.threshold_from(0.0).unwrap_or(f64::NEG_INFINITY), o.c),
                        Err(_) => SolveOutcome::Failed,
                    },
                };
                self.memo.insert(key, o);
                o
            }
        };
        let (theta, c) = match outcome {
            SolveOutcome::Solved(th, c) => (th, c),
            SolveOutcome::Degenerate(peak) => {
                self.report.summary.degenerate += 1;
                (peak, peak)
            }
            SolveOutcome::Oracle(th, c) => {
                self.report.summary.oracle_fallbacks += 1;
                (th, c)
            }
            SolveOutcome::Failed => {
                self.report.summary.solver_failures += 1;
                (f64::NEG_INFINITY, 0.0)
            }
        };
        self.report.policy.push(PolicyRow { t_s: t, vertex: j, lambda_hat: lambda, theta_s: theta, c_s: c });
        (theta, c)
    }

    fn on_junction_pass(&mut self, v: usize, t: f64) {
        let Some(edge) = self.vehicles[v].edge else { return };
        let j = self.net.edges()[edge.index()].to;
        self.leave_edge(v, t);
        let dest = self.vehicles[v].dest;
        if j == dest {
            self.vehicles[v].arrived = Some(t);
            self.platoons.detach(v as u64);
            return;
        }
        let mut next = self.vehicles[v].next_edge;
        let available = next.is_some_and(|n| self.net.is_available(n, t).unwrap_or(false));
        let mut leader = self.vehicles[v].merge_with.take();
        if !available {
            next = self.route_choice(v, j, t);
            self.report.summary.reroutes += 1;
            leader = None;
            if let Some(n) = next {
                self.vehicles[v].last_table = Some((j, n, t));
            }
        }
        let Some(next) = next else {
            self.report.summary.no_route_fallbacks += 1;
            self.platoons.detach(v as u64);
            return;
        };
        let joined = leader.filter(|&l| {
            let lv = &self.vehicles[l];
            lv.edge == Some(next) && lv.edge_enter == t && lv.arrived.is_none()
        });
        match joined {
            Some(l) => {
                self.platoons.join(l as u64, v as u64);
            }
            None => self.platoons.detach(v as u64),
        }
        // members left behind by a diverging leader continue alone
        self.enter_edge(v, next, t, joined);
    }

    fn finish(mut self) -> MetricsReport {
        let end = self.report.summary.end_time;
        let mut trips = Vec::with_capacity(self.vehicles.len());
        let (mut n_cav, mut n_bg, mut n_arr, mut trunc) = (0u64, 0u64, 0u64, 0u64);
        let (mut sum_cost, mut sum_time, mut sum_fuel, mut n_cav_arr) = (0.0, 0.0, 0.0, 0u64);
        for veh in &self.vehicles {
            match veh.class {
                VehicleClass::Cav => n_cav += 1,
                VehicleClass::Background => n_bg += 1,
            }
            let mut segments = veh.segments.clone();
            if veh.arrived.is_none() {
                trunc += 1;
                if let Some(edge) = veh.edge {
                    segments.push(Segment {
                        edge,
                        enter_s: veh.edge_enter,
                        exit_s: None,
                        cost_usd: veh.seg_cost,
                        fuel_l: veh.seg_fuel,
                        follower: veh.follower,
                    });
                }
            } else {
                n_arr += 1;
            }
            let time = veh.arrived.map_or(end - veh.spawn, |a| a - veh.spawn);
            if veh.class == VehicleClass::Cav && veh.arrived.is_some() {
                n_cav_arr += 1;
                sum_cost += veh.cost;
                sum_time += time;
                sum_fuel += veh.fuel;
            }
            trips.push(TripRecord {
                vehicle_id: veh.id,
                class: veh.class,
                origin: veh.origin,
                destination: veh.dest,
                spawn_s: veh.spawn,
                arrive_s: veh.arrived,
                time_s: time,
                fuel_l: veh.fuel,
                cost_usd: veh.cost,
                merges: veh.merges,
                merge_infeasible: veh.infeasible,
                route: veh.route.clone(),
                segments,
            });
        }
        let bins = self.edge_bins(&trips, end);
        let s = &mut self.report.summary;
        s.policy = self.sc.policy.name();
        s.seed = self.sc.sim.seed;
        s.n_cav = n_cav;
        s.n_background = n_bg;
        s.n_arrived = n_arr;
        s.truncated = trunc;
        let denom = n_cav_arr.max(1) as f64;
        s.mean_cav_cost = if n_cav_arr > 0 { sum_cost / denom } else { 0.0 };
        s.mean_cav_time = if n_cav_arr > 0 { sum_time / denom } else { 0.0 };
        s.mean_cav_fuel = if n_cav_arr > 0 { sum_fuel / denom } else { 0.0 };
        self.report.trips = trips;
        self.report.edges = bins;
        self.report.tables = self.tables.entries(&self.net);
        self.report
    }

    fn edge_bins(&self, trips: &[TripRecord], end: f64) -> Vec<EdgeBin> {
        let bin = self.sc.sim.bin_s;
        if trips.is_empty() {
            return Vec::new();
        }
        let n_bins = (math::ceil(end / bin) as usize).max(1);
        let n_edges = self.net.edges().len();
        let mut entries = vec![0u32; n_bins * n_edges];
        let mut speed_sum = vec![0.0; n_bins * n_edges];
        let mut speed_n = vec![0u32; n_bins * n_edges];
        let mut occupancy = vec![0.0; n_bins * n_edges];
        for trip in trips {
            for seg in &trip.segments {
                let ei = seg.edge.index();
                let exit = seg.exit_s.unwrap_or(end);
                let b0 = ((seg.enter_s / bin) as usize).min(n_bins - 1);
                entries[b0 * n_edges + ei] += 1;
                if let Some(x) = seg.exit_s.filter(|x| *x > seg.enter_s) {
                    speed_sum[b0 * n_edges + ei] += self.net.edges()[ei].length / (x - seg.enter_s);
                    speed_n[b0 * n_edges + ei] += 1;
                }
                let b1 = ((exit / bin) as usize).min(n_bins - 1);
                for b in b0..=b1 {
                    let lo = (b as f64 * bin).max(seg.enter_s);
                    let hi = ((b + 1) as f64 * bin).min(exit);
                    if hi > lo {
                        occupancy[b * n_edges + ei] += hi - lo;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n_bins * n_edges);
        for b in 0..n_bins {
            for (ei, e) in self.net.edges().iter().enumerate() {
                let k = b * n_edges + ei;
                let density = occupancy[k] / (bin * e.length);
                let mean_speed = if speed_n[k] > 0 {
                    speed_sum[k] / speed_n[k] as f64
                } else {
                    self.green.equilibrium_speed(density / e.lanes as f64)
                };
                out.push(EdgeBin {
                    bin_start_s: b as f64 * bin,
                    edge: e.id,
                    mean_speed_mps: mean_speed,
                    density_veh_per_m: density,
                    flow_veh_per_s: entries[k] as f64 / bin,
                    entries: entries[k],
                });
            }
        }
        out
    }
}

impl Scenario {
    fn ref_speed_cap(&self) -> f64 {
        self.sim.ref_speed_cap
    }
}
