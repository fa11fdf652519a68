use std::path::Path;
use std::process::{Command, Output};

use platoon_cli::config::{AvailabilityEvent, NetworkType, OdConfig, ScenarioConfig};

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon")).args(args).env_remove("PLATOON_OUT_DIR").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Parses the single data row printed by `solve-policy`.
fn solve_row(o: &Output) -> Vec<String> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("lambda_veh_per_hr,"));
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

fn write_config(dir: &Path, name: &str, cfg: &ScenarioConfig) -> String {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_nd(n_cavs: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.demand.default_n_cavs = n_cavs;
    cfg
}

#[test]
fn solve_policy_nominal_converges() {
    let o = platoon(&["solve-policy", "--lambda", "108", "--d2", "30000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = solve_row(&o);
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    let (theta, c) = (num(2), num(3));
    assert!(c < theta && theta < 1000.0 / 24.0);
    for i in 5..8 {
        assert!(num(i).abs() <= 1e-8, "residual {} = {}", i - 4, row[i]);
    }
    assert_eq!(row[10], "converged");
}

#[test]
fn solve_policy_without_cruise_is_flagged_degenerate() {
    let o = platoon(&["solve-policy", "--lambda", "108", "--d2", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let row = solve_row(&o);
    assert_eq!(row[10], "degenerate");
    let (theta, c): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
    // collapses onto the reward peak, which sits at a small slowdown
    assert!((theta - c).abs() < 0.01 && theta < 0.0 && theta > -5.0);
}

#[test]
fn solve_policy_failure_exits_two() {
    let o = platoon(&["solve-policy", "--lambda", "49896", "--d2", "117000"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert_eq!(solve_row(&o)[10], "failed");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(platoon(&["solve-policy", "--lambdaa", "3"]).status.code(), Some(1));
    assert_eq!(platoon(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(platoon(&["solve-policy", "--lambda", "-5", "--d2", "100"]).status.code(), Some(1));
    assert_eq!(platoon(&["run", "--policy", "greedy"]).status.code(), Some(1));
    assert_eq!(platoon(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[network]\nedge_lenght_m = 2000\n").unwrap();
    let o = platoon(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("edge_lenght_m") && stderr(&o).contains("line 2"), "{}", stderr(&o));

    std::fs::write(&path, "[demand]\npenetration = 0\n[policy]\npsi = 1.0\n[[demand.od]]\norigin = 99\ndestination = 2\nrate_veh_per_hr = 100\nn_cavs = 1\n").unwrap();
    let o = platoon(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("demand.penetration") && err.contains("policy.psi"), "{err}");

    std::fs::write(&path, "[[demand.od]]\norigin = 99\ndestination = 2\nrate_veh_per_hr = 100\nn_cavs = 1\n").unwrap();
    let o = platoon(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("demand.od[0].origin"), "{}", stderr(&o));
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &small_nd(15));
    let out = dir.path().join("out");
    let o = platoon(&["run", "--config", &cfg, "--seed", "4", "--out", out.to_str().unwrap(), "--tables", "--routes"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trips = std::fs::read_to_string(out.join("trips.csv")).unwrap();
    let mut lines = trips.lines();
    assert_eq!(
        lines.next().unwrap(),
        "vehicle_id,class,origin,destination,spawn_s,arrive_s,time_s,fuel_l,cost_usd,merges,merge_infeasible,route"
    );
    // every vehicle arrives
    assert!(lines.all(|l| !l.split(',').nth(5).unwrap().is_empty()));
    let head = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("edges.csv"), "bin_start_s,edge_id,mean_speed_mps,density_veh_per_m,flow_veh_per_s");
    assert_eq!(head("policy.csv"), "t_s,vertex,lambda_hat,theta_s,c_s");
    assert_eq!(head("tables.csv"), "i,d,edge_id,j,t_s");
    assert_eq!(head("routes.csv"), "t_s,origin,destination,route");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.contains("threshold-network,4,nguyen-dupuis"));
}

#[test]
fn zero_demand_gives_header_only_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", &small_nd(0));
    let out = dir.path().join("out");
    let o = platoon(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trips = std::fs::read_to_string(out.join("trips.csv")).unwrap();
    assert_eq!(trips.lines().count(), 1);
}

#[test]
fn output_dir_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", &small_nd(0));
    let o = Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(["run", "--config", &cfg])
        .env("PLATOON_OUT_DIR", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env-out/summary.csv").exists());
}

#[test]
fn config_round_trips() {
    let mut cfg = ScenarioConfig::default();
    cfg.network.kind = NetworkType::Cascade;
    cfg.network.junctions = 3;
    cfg.network.mainline_d2_m = 12_345.0;
    let lay = platoon_core::network::CascadeLayout::new(3);
    cfg.demand.od = vec![OdConfig {
        origin: lay.ramp_sources[1].0,
        destination: lay.destination.0,
        rate_veh_per_hr: 108.0,
        n_cavs: 7,
    }];
    cfg.policy.kind = "value-approx".into();
    cfg.policy.value_approx.degree_n = 2;
    cfg.costs.eta = 0.15;
    cfg.sim.availability = vec![AvailabilityEvent { edge: 2, t_off_s: 10.0, t_on_s: 20.0 }];
    for c in [ScenarioConfig::default(), cfg] {
        let text = c.to_toml();
        let back = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.scenario().unwrap(), c.scenario().unwrap());
        assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn empty_file_is_the_default_scenario() {
    let cfg = ScenarioConfig::parse("").unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
    let sc = cfg.scenario().unwrap();
    assert_eq!(sc.demand.len(), 4);
    assert!(sc.demand.iter().all(|d| d.n_cavs == 200 && (d.rate - 0.06).abs() < 1e-12));
    assert!((sc.k_c - 0.035).abs() < 1e-15);
}

#[test]
fn custom_network_from_arcs() {
    let text = r#"
[network]
type = "custom"
d1_m = 200

[custom]
arcs = [[1, 2, 1000, 200], [2, 3, 1000, 200], [1, 3, 2500, 200]]
origins = [1]
destinations = [3]

[demand]
penetration = 1.0
default_n_cavs = 5
"#;
    let cfg = ScenarioConfig::parse(text).unwrap();
    let sc = cfg.scenario().unwrap();
    assert_eq!(sc.network.edges().len(), 3);
    let r = platoon_core::sim::run(&sc).unwrap();
    assert_eq!(r.summary.n_arrived, 5);
}

#[test]
fn sweep_is_independent_of_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &small_nd(10));
    let mut outs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("sweep{jobs}"));
        let o = platoon(&[
            "--jobs",
            jobs,
            "sweep",
            "--config",
            &cfg,
            "--variable",
            "od_rate",
            "--values",
            "100,300",
            "--policy",
            "baseline,threshold-network",
            "--seed",
            "1,2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outs.push(std::fs::read_to_string(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let lines: Vec<&str> = outs[0].lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("od_rate,100.0,baseline,1,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn single_cell_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &small_nd(5));
    let out = dir.path().join("sw");
    let o = platoon(&[
        "sweep",
        "--config",
        &cfg,
        "--values",
        "35",
        "--policy",
        "policy-a",
        "--seed",
        "1,2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    // no baseline in the sweep, so no ratio
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("")));
}

#[test]
fn resilience_logs_and_covers_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &small_nd(10));
    let out = dir.path().join("res");
    let o = platoon(&[
        "resilience",
        "--config",
        &cfg,
        "--edge",
        "18",
        "--t-off",
        "300",
        "--t-on",
        "600",
        "--max-time",
        "3000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.contains("300,edge-off,18") && events.contains("600,edge-on,18"));
    let edges = std::fs::read_to_string(out.join("edges.csv")).unwrap();
    let last_bin: f64 = edges.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(last_bin, 2940.0);
    for line in edges.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let t: f64 = f[0].parse().unwrap();
        if f[1] == "18" && (300.0..600.0).contains(&t) {
            assert_eq!(f[4], "0");
        }
    }
}

#[test]
fn resilience_with_empty_window_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small_nd(8);
    base.sim.max_time_s = 5000.0;
    let cfg = write_config(dir.path(), "s.toml", &base);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = platoon(&[
        "resilience",
        "--config",
        &cfg,
        "--t-off",
        "700",
        "--t-on",
        "700",
        "--max-time",
        "5000",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = platoon(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path| std::fs::read_to_string(d.join("trips.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn resilience_rejects_bad_window() {
    let o = platoon(&["resilience", "--t-off", "2000", "--t-on", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    let o = platoon(&["resilience", "--edge", "99"]);
    assert_eq!(o.status.code(), Some(1));
}
