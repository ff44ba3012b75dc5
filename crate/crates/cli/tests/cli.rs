use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oppenheim-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header, column names, data rows.
fn csv(o: &Output) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = stdout(o);
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let cols = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, cols, rows)
}

fn column(cols: &[String], name: &str) -> usize {
    cols.iter().position(|c| c == name).unwrap()
}

#[test]
fn selftest_passes_and_reports_json() {
    let o = run(&["spin-selftest"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["spin-selftest", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let body = text.split_once('\n').unwrap().1;
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    assert!(v["homomorphism"].as_f64().unwrap() <= 1e-9);
    assert!(v["failed"].as_array().unwrap().is_empty());
}

#[test]
fn injected_cover_fault_is_named() {
    for variant in ["typo", "printed"] {
        let o = run(&["spin-selftest", "--variant", variant]);
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("homomorphism"));
    }
}

#[test]
fn header_embeds_config_without_threads() {
    let o = run(&["--seed", "5", "--threads", "2", "profile", "--k", "3", "--n", "1", "--step", "0.5"]);
    let (header, _, _) = csv(&o);
    let prefix = format!("# oppenheim-lab v{} config=", env!("CARGO_PKG_VERSION"));
    let config: serde_json::Value = serde_json::from_str(header.strip_prefix(&prefix).unwrap()).unwrap();
    assert_eq!(config["seed"], 5);
    assert!(config.get("threads").is_none());
    assert_eq!(config["command"]["profile"]["k"], 3.0);
}

#[test]
fn profile_of_q0() {
    let o = run(&["profile", "--form", "q0", "--k", "5", "--n", "2", "--step", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, cols, rows) = csv(&o);
    assert_eq!(rows.len(), 9);
    let (xi, err) = (column(&cols, "xi"), column(&cols, "best_err"));
    let at_half = rows.iter().find(|r| r[xi].parse::<f64>().unwrap() == 0.5).unwrap();
    assert_eq!(at_half[err].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn rogers_bounds_and_reproducibility() {
    let args = ["--seed", "3", "rogers", "--vol", "0.5", "--samples", "1000", "--base-points", "4"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    let (_, cols, rows) = csv(&a);
    assert_eq!(rows.len(), 3);
    let (est, se) = (column(&cols, "estimate"), column(&cols, "std_err"));
    let (e, s): (f64, f64) = (rows[0][est].parse().unwrap(), rows[0][se].parse().unwrap());
    assert!(e >= 0.25 - 3.0 * s && e <= 2.25 + 3.0 * s);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = vec!["--threads", "4"];
    threaded.extend_from_slice(&args);
    assert_eq!(a.stdout, run(&threaded).stdout);
}

#[test]
fn rogers_rejects_empty_box() {
    assert_eq!(run(&["rogers", "--vol", "0"]).status.code(), Some(64));
    assert_eq!(run(&["rogers", "--vol", "-1"]).status.code(), Some(64));
}

#[test]
fn badset_shape() {
    let o = run(&["badset", "--delta", "0.2", "--xi", "1", "--k", "8,16,32,64,128", "--trials", "400"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, cols, rows) = csv(&o);
    assert_eq!(rows.len(), 5);
    let f = column(&cols, "fraction");
    for r in &rows {
        assert!((0.0..=1.0).contains(&r[f].parse::<f64>().unwrap()));
    }
}

#[test]
fn oppenheim_shape() {
    let o = run(&["oppenheim", "--schedule", "pow14", "--k", "64,128,256,512", "--forms", "20", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, cols, rows) = csv(&o);
    assert_eq!(rows.len(), 80);
    let form = column(&cols, "form");
    for i in 0..20 {
        assert_eq!(rows.iter().filter(|r| r[form] == i.to_string()).count(), 4);
    }
}

#[test]
fn oppenheim_refuses_inadmissible_schedules() {
    let o = run(&["oppenheim", "--n-exp", "1", "--delta-exp", "-1", "--forms", "1"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn target_miss_and_measure_bound_run() {
    let o = run(&["target-miss", "--t", "100", "--trials", "100", "--budget", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv(&o).2.len(), 1);
    let o = run(&["measure-bound", "--xi", "0", "--delta", "0.5", "--samples", "200", "--base-points", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["--format", "json", "measure-bound", "--xi", "-2", "--delta", "0.5", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn json_output_to_file() {
    let path = std::env::temp_dir().join(format!("oppenheim-lab-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let o = run(&["--format", "json", "--output", p, "badset", "--delta", "0.5", "--xi", "0", "--k", "2", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let body = text.split_once('\n').unwrap().1;
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(run(&["badset", "--delta", "abc", "--xi", "1"]).status.code(), Some(64));
    assert_eq!(run(&["badset", "--delta", "1.5", "--xi", "1"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    for cmd in ["spin-selftest", "rogers", "badset", "target-miss", "oppenheim", "profile", "measure-bound"] {
        assert_eq!(run(&[cmd, "--help"]).status.code(), Some(0), "{cmd}");
    }
}
