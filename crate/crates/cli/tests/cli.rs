//! End-to-end tests through the compiled binary: exit codes, artifacts,
//! determinism, sweep isolation.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wloja(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wloja"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn exit(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn ou_flow_config(n: usize, t_end: f64, extra: &str) -> String {
    format!(
        r#"{{
            "kind": "flow",
            "grid": {{"x_min": -8, "x_max": 8, "n": {n}}},
            "potential": {{"name": "quadratic", "params": {{"k": 1.0}}}},
            "functional": {{"family": "relative"}},
            "initial": {{"gaussian": {{"mu": 1.0, "sigma": 1.0}}}},
            "solver": {{"t_end": {t_end}, "snapshot_stride": 200}}{extra}
        }}"#
    )
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn flow_run_emits_artifacts_with_gaussian_kl_at_start() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("flow.json"), &ou_flow_config(200, 2.0, ""));
    let out = wloja(&["run", "flow.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");

    let run = tmp.path().join("run");
    let traj = fs::read_to_string(run.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), "t,J,slope,w2,dissipation");
    let first: Vec<f64> =
        lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    // initial relative entropy of N(1,1) against the standard Gaussian
    assert!((first[1] - 0.5).abs() < 1e-3, "J(0) = {}", first[1]);

    let snap = fs::read_to_string(run.join("states/snapshot_0000.csv")).unwrap();
    assert!(snap.starts_with("x,density\n"));
    let s = summary(&run);
    assert_eq!(s["kind"], "flow");
    assert_eq!(s["all_pass"], true);
    let names: Vec<&str> =
        s["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"mass_conservation"));
    assert!(names.contains(&"lsi_margin"));
    assert!(names.contains(&"talagrand_margin"));
}

#[test]
fn inequality_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("ineq.json"),
        r#"{
            "kind": "inequality",
            "grid": {"x_min": -8, "x_max": 8, "n": 200},
            "potential": {"name": "quadratic", "params": {"k": 1.0}},
            "samples": 100,
            "seed": 7
        }"#,
    );
    for dir in ["a", "b"] {
        let out = wloja(&["run", "ineq.json", "--out", dir, "--quiet"], tmp.path());
        assert_eq!(exit(&out), 0, "{out:?}");
    }
    for file in ["samples.csv", "gradient.csv", "functional.csv", "summary.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("ineq.json"),
        r#"{
            "kind": "inequality",
            "grid": {"x_min": -6, "x_max": 6, "n": 100},
            "potential": {"name": "quadratic", "params": {"k": 1.0}},
            "samples": 5,
            "seed": 7
        }"#,
    );
    let out = wloja(&["run", "ineq.json", "--out", "a", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0);
    let out = wloja(&["run", "ineq.json", "--out", "b", "--quiet", "--seed", "8"], tmp.path());
    assert_eq!(exit(&out), 0);
    let a = fs::read(tmp.path().join("a/samples.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/samples.csv")).unwrap();
    assert_ne!(a, b);
    assert_eq!(summary(&tmp.path().join("b"))["seed"], 8);
}

#[test]
fn estimate_on_the_dirac_path_reports_theta_half() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("est.json"), r#"{"kind": "estimate"}"#);
    let out = wloja(&["run", "est.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let s = summary(&tmp.path().join("run"));
    let theta = s["estimates"]["theta"].as_f64().unwrap();
    let c_f = s["estimates"]["c_f"].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 1e-10, "{theta}");
    assert!((c_f - 1.0).abs() < 1e-10, "{c_f}");
    assert!(tmp.path().join("run/samples.csv").exists());
}

#[test]
fn sweep_over_porous_medium_exponents() {
    let tmp = tempfile::tempdir().unwrap();
    let sw = tmp.path().join("sw");
    fs::create_dir(&sw).unwrap();
    for m in ["1.5", "2.0", "3.0"] {
        write(
            &sw.join(format!("pme_{m}.json")),
            &format!(
                r#"{{
                    "kind": "flow",
                    "grid": {{"x_min": -8, "x_max": 8, "n": 200}},
                    "potential": {{"name": "quadratic", "params": {{"k": 1.0}}}},
                    "functional": {{"family": "internal_potential", "m": {m}}},
                    "initial": {{"uniform": {{"a": -1.0, "b": 1.0}}}},
                    "solver": {{"t_end": 0.5, "snapshot_stride": 400}}
                }}"#
            ),
        );
    }
    let out = wloja(&["sweep", "sw", "--out", "out", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let merged: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/sweep_summary.json")).unwrap())
            .unwrap();
    assert_eq!(merged["all_pass"], true);
    let runs = merged["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let names: Vec<&str> = runs.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["pme_1.5", "pme_2.0", "pme_3.0"]);
    for r in runs {
        assert_eq!(r["exit"], 0);
        let gn = r["summary"]["checks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == "gn_margin")
            .unwrap_or_else(|| panic!("no gn_margin in {r}"));
        assert_eq!(gn["pass"], true);
    }
}

#[test]
fn sweep_isolates_a_broken_member() {
    let tmp = tempfile::tempdir().unwrap();
    let sw = tmp.path().join("sw");
    fs::create_dir(&sw).unwrap();
    write(&sw.join("a_bad.json"), r#"{"kind": "flow", "typo": 1}"#);
    write(&sw.join("b_good.json"), &ou_flow_config(100, 0.1, ""));
    let out = wloja(&["sweep", "sw", "--out", "out", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 2, "config errors dominate: {out:?}");
    // the good member still ran and kept its artifacts
    assert!(tmp.path().join("out/b_good/trajectory.csv").exists());
    assert!(tmp.path().join("out/b_good/summary.json").exists());
    let merged: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/sweep_summary.json")).unwrap())
            .unwrap();
    let runs = merged["runs"].as_array().unwrap();
    assert_eq!(runs[0]["exit"], 2);
    assert!(runs[0]["error"].as_str().unwrap().contains("typo"));
    assert_eq!(runs[1]["exit"], 0);
}

#[test]
fn sweep_config_file_with_identical_members() {
    let tmp = tempfile::tempdir().unwrap();
    let member = ou_flow_config(100, 0.1, "");
    write(
        &tmp.path().join("sweep.json"),
        &format!(r#"{{"kind": "sweep", "configs": [{member}, {member}]}}"#),
    );
    let out = wloja(&["sweep", "sweep.json", "--out", "out", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let merged: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/sweep_summary.json")).unwrap())
            .unwrap();
    let runs = merged["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["name"], "run_000");
    assert_eq!(runs[1]["name"], "run_001");
    // identical configs produce identical summaries
    assert_eq!(runs[0]["summary"], runs[1]["summary"]);

    // `run` on the same file expands the sweep too
    let out = wloja(&["run", "sweep.json", "--out", "out2", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0);
    assert!(tmp.path().join("out2/sweep_summary.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("bad.json"), r#"{"kind": "flow", "grd": {}}"#);
    let out = wloja(&["run", "bad.json", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("grd"), "{stderr}");
    assert!(stderr.contains("line"), "diagnostics carry a position: {stderr}");

    let out = wloja(&["run", "missing.json", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 2);

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = wloja(&["sweep", "empty", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 2);
}

#[test]
fn numerical_failure_exits_3_and_names_the_step() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("cfl.json"),
        r#"{
            "kind": "flow",
            "grid": {"x_min": -8, "x_max": 8, "n": 200},
            "potential": {"name": "quadratic", "params": {"k": 1.0}},
            "functional": {"family": "internal_potential"},
            "initial": {"gaussian": {"mu": 1.0, "sigma": 1.0}},
            "solver": {"t_end": 0.5, "fixed_dt": 0.05}
        }"#,
    );
    let out = wloja(&["run", "cfl.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 3, "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step"), "{stderr}");
}

#[test]
fn failed_check_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    // a wildly optimistic rate constant makes the decay bound unachievable
    write(
        &tmp.path().join("flow.json"),
        &ou_flow_config(100, 1.0, r#", "loja": {"theta": 0.5, "c_g": 10.0}"#),
    );
    let out = wloja(&["run", "flow.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 1, "{out:?}");
    let s = summary(&tmp.path().join("run"));
    assert_eq!(s["all_pass"], false);
    let rate = s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "rate_bounds")
        .unwrap();
    assert_eq!(rate["pass"], false);
    assert!(tmp.path().join("run/bounds.csv").exists());
}

#[test]
fn plot_renders_svg_from_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("flow.json"),
        &ou_flow_config(100, 1.0, r#", "loja": {"theta": 0.5, "c_g": 1.4142135623730951}"#),
    );
    let out = wloja(&["run", "flow.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let out = wloja(&["plot", "run"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let svg = fs::read_to_string(tmp.path().join("run/plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2, "gap and bound series");

    let out = wloja(&["plot", "nonexistent"], tmp.path());
    assert_eq!(exit(&out), 2);
}

#[test]
fn output_root_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("est.json"), r#"{"kind": "estimate"}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_wloja"))
        .args(["run", "est.json", "--quiet"])
        .current_dir(tmp.path())
        .env("WLOJA_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(tmp.path().join("from_env/summary.json").exists());
}

#[test]
fn svg_flag_writes_plot_with_flow_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(&tmp.path().join("flow.json"), &ou_flow_config(100, 0.5, r#", "svg": true"#));
    let out = wloja(&["run", "flow.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let svg = fs::read_to_string(tmp.path().join("run/plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let s = summary(&tmp.path().join("run"));
    assert!(s["artifacts"].as_array().unwrap().iter().any(|a| a == "plot.svg"));
}

#[test]
fn atomic_flow_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        &tmp.path().join("atom.json"),
        r#"{
            "kind": "flow",
            "potential": {"name": "abs"},
            "functional": {"family": "potential_only"},
            "initial": {"atoms": {"positions": [0.7], "weights": [1.0]}},
            "solver": {"t_end": 1.0, "snapshot_stride": 2000},
            "loja": {"theta": 1.0, "c_g": 1.0, "tolerance": 1e-8}
        }"#,
    );
    let out = wloja(&["run", "atom.json", "--out", "run", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let s = summary(&tmp.path().join("run"));
    assert_eq!(s["all_pass"], true);
    let snap = fs::read_to_string(tmp.path().join("run/states/snapshot_0000.csv")).unwrap();
    assert!(snap.starts_with("x,weight\n"));
    let completed = s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "completed")
        .unwrap();
    let detail = completed["detail"].as_str().unwrap();
    assert!(detail.contains("stabilized"), "{detail}");
}

#[test]
fn file_initial_condition_roundtrips() {
    let tmp = tempfile::tempdir().unwrap();
    // first run writes snapshots; reuse the final state as a new start
    write(&tmp.path().join("flow.json"), &ou_flow_config(100, 0.2, ""));
    let out = wloja(&["run", "flow.json", "--out", "first", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0);
    let snaps: Vec<_> = fs::read_dir(tmp.path().join("first/states"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let last = snaps.iter().max().unwrap();
    write(
        &tmp.path().join("resume.json"),
        &format!(
            r#"{{
                "kind": "flow",
                "grid": {{"x_min": -8, "x_max": 8, "n": 100}},
                "potential": {{"name": "quadratic", "params": {{"k": 1.0}}}},
                "functional": {{"family": "relative"}},
                "initial": {{"file": {{"path": {}}}}},
                "solver": {{"t_end": 0.1}}
            }}"#,
            serde_json::to_string(last.to_str().unwrap()).unwrap()
        ),
    );
    let out = wloja(&["run", "resume.json", "--out", "second", "--quiet"], tmp.path());
    assert_eq!(exit(&out), 0, "{out:?}");
    let s = summary(&tmp.path().join("second"));
    assert_eq!(s["all_pass"], true);
}
