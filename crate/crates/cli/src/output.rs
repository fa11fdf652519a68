//! CSV writers. Column order is fixed; units are part of the column names.

use std::io::Write;
use std::path::Path;

use platoon_core::sim::{EdgeBin, PolicyRow, RouteProbe, Summary, TripRecord};
use platoon_core::{EdgeId, MetricsReport, VertexId};
use serde::Serialize;

pub const TRIPS_HEADER: [&str; 12] = [
    "vehicle_id",
    "class",
    "origin",
    "destination",
    "spawn_s",
    "arrive_s",
    "time_s",
    "fuel_l",
    "cost_usd",
    "merges",
    "merge_infeasible",
    "route",
];
pub const EDGES_HEADER: [&str; 5] = ["bin_start_s", "edge_id", "mean_speed_mps", "density_veh_per_m", "flow_veh_per_s"];
pub const POLICY_HEADER: [&str; 5] = ["t_s", "vertex", "lambda_hat", "theta_s", "c_s"];
pub const ROUTES_HEADER: [&str; 4] = ["t_s", "origin", "destination", "route"];
pub const TABLES_HEADER: [&str; 5] = ["i", "d", "edge_id", "j", "t_s"];
pub const EVENTS_HEADER: [&str; 3] = ["t_s", "kind", "detail"];

/// Space-separated edge ids.
pub fn route_string(edges: &[EdgeId]) -> String {
    edges.iter().map(|e| e.0.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_trips<W: Write>(out: W, trips: &[TripRecord]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRIPS_HEADER)?;
    for t in trips {
        w.write_record([
            t.vehicle_id.to_string(),
            t.class.name().to_string(),
            t.origin.0.to_string(),
            t.destination.0.to_string(),
            t.spawn_s.to_string(),
            t.arrive_s.map(|a| a.to_string()).unwrap_or_default(),
            t.time_s.to_string(),
            t.fuel_l.to_string(),
            t.cost_usd.to_string(),
            t.merges.to_string(),
            t.merge_infeasible.to_string(),
            route_string(&t.route),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges<W: Write>(out: W, bins: &[EdgeBin]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(EDGES_HEADER)?;
    for b in bins {
        w.write_record([
            b.bin_start_s.to_string(),
            b.edge.0.to_string(),
            b.mean_speed_mps.to_string(),
            b.density_veh_per_m.to_string(),
            b.flow_veh_per_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_policy<W: Write>(out: W, rows: &[PolicyRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(POLICY_HEADER)?;
    for r in rows {
        w.write_record([
            r.t_s.to_string(),
            r.vertex.0.to_string(),
            r.lambda_hat.to_string(),
            r.theta_s.to_string(),
            r.c_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_routes<W: Write>(out: W, probes: &[RouteProbe]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(ROUTES_HEADER)?;
    for p in probes {
        w.write_record([
            p.t_s.to_string(),
            p.origin.0.to_string(),
            p.destination.0.to_string(),
            route_string(&p.edges),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tables<W: Write>(out: W, entries: &[(VertexId, VertexId, EdgeId, VertexId, f64)]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TABLES_HEADER)?;
    for (i, d, e, j, t) in entries {
        w.write_record([i.0.to_string(), d.0.to_string(), e.0.to_string(), j.0.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of `events.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEvent {
    pub t_s: f64,
    pub kind: &'static str,
    pub detail: String,
}

pub fn write_events<W: Write>(out: W, events: &[LogEvent]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        w.write_record([e.t_s.to_string(), e.kind.to_string(), e.detail.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Scenario description plus run aggregates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: String,
    pub seed: u64,
    pub network: String,
    pub critical_density_veh_per_km_ln: f64,
    pub penetration: f64,
    pub n_cav: u64,
    pub n_background: u64,
    pub n_arrived: u64,
    pub mean_cav_cost_usd: f64,
    pub mean_cav_time_s: f64,
    pub mean_cav_fuel_l: f64,
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
    pub end_time_s: f64,
}

impl SummaryRow {
    pub fn new(s: &Summary, network: &str, k_c_veh_per_km_ln: f64, penetration: f64) -> Self {
        SummaryRow {
            policy: s.policy.to_string(),
            seed: s.seed,
            network: network.to_string(),
            critical_density_veh_per_km_ln: k_c_veh_per_km_ln,
            penetration,
            n_cav: s.n_cav,
            n_background: s.n_background,
            n_arrived: s.n_arrived,
            mean_cav_cost_usd: s.mean_cav_cost,
            mean_cav_time_s: s.mean_cav_time,
            mean_cav_fuel_l: s.mean_cav_fuel,
            merges: s.merges,
            merge_infeasible: s.merge_infeasible,
            solver_failures: s.solver_failures,
            oracle_fallbacks: s.oracle_fallbacks,
            degenerate: s.degenerate,
            no_common_path: s.no_common_path,
            clamped_distance: s.clamped_distance,
            no_route_fallbacks: s.no_route_fallbacks,
            reroutes: s.reroutes,
            truncated: s.truncated,
            aborted: s.aborted,
            events: s.events,
            end_time_s: s.end_time,
        }
    }
}

pub fn write_summary<W: Write>(out: W, row: &SummaryRow) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

/// Which optional files `write_report` emits.
#[derive(Clone, Copy, Debug, Default)]
pub struct Extras {
    pub routes: bool,
    pub tables: bool,
}

/// Writes the four standard files (and any requested extras) into `dir`.
pub fn write_report(dir: &Path, report: &MetricsReport, summary: &SummaryRow, extras: Extras) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| std::fs::File::create(dir.join(name));
    write_trips(file("trips.csv")?, &report.trips)?;
    write_edges(file("edges.csv")?, &report.edges)?;
    write_policy(file("policy.csv")?, &report.policy)?;
    write_summary(file("summary.csv")?, summary)?;
    if extras.routes {
        write_routes(file("routes.csv")?, &report.routes)?;
    }
    if extras.tables {
        write_tables(file("tables.csv")?, &report.tables)?;
    }
    Ok(())
}

/// Generic serde rows with a header line.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
