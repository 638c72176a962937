use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn hypersub(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersub")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(s.trim_end().lines().count(), 1, "expected one error line, got {s:?}");
    s.trim_end().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shift_reference_solve_is_calibrated() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "gms:8", "--observable", "edgecost:default", "--C", "auto", "--out", "u.csv", "--json", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("r.json"));
    assert_eq!(r["schema_version"], 1);
    assert!(r["report"]["calibration_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["phibar_method"], "exact-karp");
    let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert!(csv.starts_with("word,u\n"));
    assert_eq!(csv.lines().count(), 56);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |tag: &str| -> Vec<String> {
        ["solve", "--system", "cat", "--observable", "coscos", "--grid", "32", "--C", "17.3", "--out"].iter().map(|s| s.to_string()).chain([format!("u{tag}.csv"), "--json".into(), format!("r{tag}.json")]).collect()
    };
    for tag in ["a", "b"] {
        let a = args(tag);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(hypersub(&refs, dir.path()).status.code(), Some(0));
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("ua.csv"), read("ub.csv"));
    assert_eq!(read("ra.json"), read("rb.json"));
}

#[test]
fn zero_observable_gives_zero_subaction() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "cat", "--observable", "zero", "--grid", "16", "--out", "u.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() == 0.0));
}

#[test]
fn divergence_exits_two_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "cat", "--observable", "coscos:0.25", "--grid", "16", "--C", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let line = stderr_line(&o);
    assert!(line.starts_with("error[divergence]:"), "{line}");
    assert!(line.contains("witness path"));
}

#[test]
fn phibar_below_grid_cycle_mean_reports_growth() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "cat", "--observable", "coscos:0.25", "--grid", "24", "--C", "12"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let line = stderr_line(&o);
    assert!(line.starts_with("error[growth]:") && line.contains("--phibar"), "{line}");
}

#[test]
fn phibar_above_optimum_diverges_on_shift() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "gms:8", "--observable", "edgecost:default", "--phibar", "0.31"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).contains("slope -1.000000e-2"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"system":"gms","depth":6,"observable":"edgecost:default","C":"auto","phibar":"auto:karp","tol":1e-12,"max_iter":1000}"#).unwrap();
    let o = hypersub(&["solve", "--config", "c.json", "--json", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&dir.path().join("r.json"))["system"], "gms:6");
    let o = hypersub(&["solve", "--config", "c.json", "--depth", "5", "--json", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("r.json"))["system"], "gms:5");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"system":"cat","observable":"coscos","grid":16}"#).unwrap();
    for args in [
        vec!["solve", "--config", "bad.json"],
        vec!["solve", "--config", "missing.json"],
        vec!["solve", "--system", "torus9"],
        vec!["solve", "--system", "cat", "--observable", "edgecost:default"],
        vec!["solve", "--system", "cat", "--C", "-2"],
        vec!["solve", "--phibar", "auto:guess"],
        vec!["solve", "--not-a-flag"],
        vec!["verify", "--only", "no such check"],
    ] {
        let o = hypersub(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr_line(&o).starts_with("error["), "{args:?}");
    }
}

#[test]
fn gnuplot_script_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["solve", "--system", "cat", "--observable", "coscos", "--grid", "32", "--C", "17.3", "--out", "u.csv", "--gnuplot"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let gp = std::fs::read_to_string(dir.path().join("u.gp")).unwrap();
    assert!(gp.contains("'u.csv'"));
}

#[test]
fn reference_shadow_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["shadow", "--system", "cat", "--len", "200", "--noise", "1e-4", "--seed", "7", "--out", "s.csv", "--json", "s.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("s.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["schema_version"], 1);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.starts_with("i,x1,x2,p1,p2,dist\n"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn noiseless_orbit_is_its_own_shadow() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["shadow", "--len", "60", "--noise", "0", "--seed", "3", "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    for l in csv.lines().skip(1) {
        let d: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(d <= 1e-15, "{l}");
    }
}

#[test]
fn periodic_shadow_closes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["shadow", "--periodic", "--len", "12", "--noise", "1e-5", "--seed", "4", "--json", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("p.json"));
    assert!(r["result"]["closure"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn periodic_points_of_period_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["periodic", "-n", "2", "--json", "p.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("p.json"));
    assert_eq!(r["determinant"], 5);
    assert_eq!(r["points"], 5);
    assert_eq!(r["orbits"].as_array().unwrap().len(), 3);
}

#[test]
fn ebar_on_two_cycle_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["ebar", "--system", "gms:6", "--observable", "edgecost:1,0,0", "--json", "e.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("e.json"));
    assert_eq!(r["estimate"]["value"], 0.0);
    assert_eq!(r["estimate"]["certificate"]["kind"], "cycle");
}

#[test]
fn manifold_of_linear_map_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["manifold", "--system", "cat", "--len", "20", "--out", "g.csv", "--json", "g.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read_json(&dir.path().join("g.json"))["graph_sup"].as_f64().unwrap() <= 1e-12);
    assert!(std::fs::read_to_string(dir.path().join("g.csv")).unwrap().starts_with("u,g\n"));
}

#[test]
fn verify_filter_runs_one_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = hypersub(&["--threads", "1", "verify", "--only", "census", "--json", "v.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("v.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["passed"], true);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    for key in ["name", "anchor", "pass", "lhs", "rhs", "slack", "runtime_s"] {
        assert!(checks[0].get(key).is_some(), "missing {key}");
    }
    let o = hypersub(&["verify", "--only", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
}
