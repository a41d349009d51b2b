//! End-to-end checks of the `hcc` binary and the config invariants.

use std::path::Path;
use std::process::{Command, Output};

use hcc_cli::config::{parse_config, ExperimentConfig};
use hcc_cli::output::read_trajectory_csv;
use hcc_cli::simulate::simulate;
use proptest::prelude::*;
use serde_json::Value;

fn hcc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcc")).args(args).current_dir(dir).env_remove("HCC_SEED").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
    "schema": "hcc/1", "name": "small", "seed": 5,
    "game": {"payoff": {"kind": "bilinear", "p": 0.5, "q": 0.5}, "operators_f": ["sigmoid"], "operators_g": ["sigmoid"]},
    "flow": {"method": "gda", "dt": 0.01, "t_end": 30.0},
    "init": {"uniform_box": {"lo": [-1.0], "hi": [1.0], "count": 2}},
    "targets": [{"p": [0.5], "q": [0.5]}],
    "outputs": {"csv": "small.csv", "summary": "small.json", "record_every": 10}
}"#;

#[test]
fn presets_list_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcc(&["presets"], dir.path());
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["fig3_vanilla_gan", "fig4_wgan_regularized", "fig4_wgan_cycle", "rps_recurrence"] {
        assert!(names.lines().any(|l| l == name), "{name} missing");
    }
    let out = hcc(&["presets", "--write", "exported"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("exported/rps_recurrence.json")).unwrap();
    assert_eq!(parse_config(&text).unwrap().name, "rps_recurrence");
}

#[test]
fn simulate_writes_indexed_csvs_and_a_valid_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json.in", SMALL);
    let out = hcc(&["simulate", &cfg, "--out-dir", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/small.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "hcc/1");
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["runs"][1]["csv"], "small_init1.csv");
    // Hidden bilinear: H is conserved, so it is both monotone and constant.
    assert_eq!(summary["monotone_H"], true);
    assert_eq!(summary["constant_H"], true);
    let traj = read_trajectory_csv(&dir.path().join("o/small_init0.csv")).unwrap();
    assert_eq!(traj.len(), 301);
}

#[test]
fn seed_env_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hcc"));
        cmd.args(["simulate", &cfg]).current_dir(dir.path()).env_remove("HCC_SEED");
        if let Some(s) = seed {
            cmd.env("HCC_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("small.json")).unwrap()).unwrap();
        (v["seed"].as_u64().unwrap(), v["runs"][0]["theta0"].clone())
    };
    let (s5, theta5) = run(None);
    let (s9, theta9) = run(Some("9"));
    assert_eq!((s5, s9), (5, 9));
    assert_ne!(theta5, theta9, "uniform_box draws must follow the seed");

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hcc"));
    let out = cmd.args(["simulate", &cfg]).current_dir(dir.path()).env("HCC_SEED", "minus one").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("HCC_SEED"));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("\"count\": 2", "\"count\": 0");
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = hcc(&["simulate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("init.uniform_box.count"), "{}", stderr(&out));

    let out = hcc(&["simulate", "no_such_file.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let swept = SMALL
        .replace("\"record_every\": 10}", "\"record_every\": 10, \"table\": \"t.csv\"}, \"sweep\": {\"lambda\": []}")
        .replace("\"operators_g\": [\"sigmoid\"]}", "\"operators_g\": [\"sigmoid\"], \"regularization\": {\"lambda\": 1.0, \"center_f\": [0.5], \"center_g\": [0.5]}}");
    let cfg = write(dir.path(), "sweep.json", &swept);
    let out = hcc(&["sweep", &cfg, "--jobs", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sweep.lambda"));
}

#[test]
fn diverging_rows_are_marked_failed() {
    let dir = tempfile::tempdir().unwrap();
    // RK4 with dt = 3 amplifies a pure rotation by about 1.5 per step.
    let text = r#"{
        "schema": "hcc/1", "name": "blowup",
        "game": {"payoff": {"kind": "bilinear", "p": 0.0, "q": 0.0}, "operators_f": ["identity"], "operators_g": ["identity"]},
        "flow": {"method": "gda", "dt": 3.0, "t_end": 9000.0},
        "init": {"explicit": [{"theta": [1.0], "phi": [0.0]}]},
        "targets": [{"p": [0.0], "q": [0.0]}],
        "outputs": {"csv": "b.csv", "summary": "b.json", "table": "b_table.csv"},
        "sweep": {"seeds": [1, 2]}
    }"#;
    let cfg = write(dir.path(), "b.json.in", text);
    let out = hcc(&["sweep", &cfg, "--jobs", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.path().join("b_table.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| l.contains(",FAILED,")).count(), 2, "{table}");

    // simulate flushes the partial trajectory before reporting the failure.
    let out = hcc(&["simulate", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let traj = read_trajectory_csv(&dir.path().join("b.csv")).unwrap();
    assert!(traj.len() > 1 && traj.len() < 3001);
}

#[test]
fn gan_solve_and_audit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.json", r#"{"kind": "gan", "p_data": [0.6, 0.4], "constraints": [{"a": [1.0, 0.0], "b": 0.3}]}"#);
    let out = hcc(&["gan-solve", &inst, "--out", "sol.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let sol: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sol.json")).unwrap()).unwrap();
    assert!((sol["G_star"][0].as_f64().unwrap() - 0.3).abs() < 1e-4);
    assert!(sol["certificates"]["max_primal_violation"].as_f64().unwrap() <= 1e-4);

    let bad = write(dir.path(), "bad.json", r#"{"kind": "gan", "p_data": [0.6, 0.5]}"#);
    assert_ne!(hcc(&["gan-solve", &bad], dir.path()).status.code(), Some(0));

    let out = hcc(&["simulate", "rps_regularized", "--out-dir", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let third = "0.3333333333333333";
    let target = format!("{third}:{third}:{third},{third}:{third}:{third}");
    let out = hcc(&["audit", "out/rps_regularized.csv", "--target", &target, "--config", "rps_regularized"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "converged");
    assert_eq!(report["H_source"], "recomputed");
    assert_eq!(report["monotone_H"], true);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/rps_regularized.json")).unwrap()).unwrap();
    assert_eq!(report["fitted_rate"], summary["fitted_rate"]);

    // Without a config the CSV's own H column is audited.
    let out = hcc(&["audit", "out/rps_regularized.csv", "--target", &target], dir.path());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["H_source"], "csv");
    assert_eq!(hcc(&["audit", "out/rps_regularized.csv", "--target", "0.5"], dir.path()).status.code(), Some(2));
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let payoff = prop_oneof![
        (0.05f64..0.95, 0.05f64..0.95).prop_map(|(p, q)| format!(r#"{{"kind": "bilinear", "p": {p:?}, "q": {q:?}}}"#)),
        Just(r#"{"kind": "rps"}"#.to_string()),
    ];
    (payoff, 1e-3f64..0.1, 1usize..20, 1usize..50, any::<u64>(), prop::bool::ANY, prop::collection::vec(-3.0f64..3.0, 6))
        .prop_map(|(payoff, dt, steps, record_every, seed, transformed, x)| {
            let n = if payoff.contains("rps") { 3 } else { 1 };
            let ops = vec!["\"sigmoid\""; n].join(", ");
            let vec = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
            let text = format!(
                r#"{{"schema": "hcc/1", "name": "p", "seed": {seed},
                   "game": {{"payoff": {payoff}, "operators_f": [{ops}], "operators_g": [{ops}]}},
                   "flow": {{"method": "{}", "dt": {dt:?}, "t_end": {:?}}},
                   "init": {{"explicit": [{{"theta": [{}], "phi": [{}]}}]}},
                   "outputs": {{"csv": "p.csv", "summary": "p.json", "record_every": {record_every}}}}}"#,
                if transformed { "transformed" } else { "gda" },
                dt * steps as f64,
                vec(&x[..n]),
                vec(&x[3..3 + n]),
            );
            parse_config(&text).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn config_round_trips(cfg in arb_config()) {
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn csv_rows_follow_the_step_count(cfg in arb_config()) {
        let dir = tempfile::tempdir().unwrap();
        let out = simulate(&cfg, Some(dir.path())).unwrap();
        let (dt, t_end) = match cfg.flow {
            hcc_cli::config::FlowSpec::Gda { dt, t_end } | hcc_cli::config::FlowSpec::Transformed { dt, t_end } => (dt, t_end),
            _ => unreachable!(),
        };
        let steps = (t_end / dt + 1e-9).floor() as usize;
        let rows = read_trajectory_csv(&out.csv_paths[0]).unwrap().len();
        prop_assert_eq!(rows, steps / cfg.outputs.record_every + 1);
    }
}
