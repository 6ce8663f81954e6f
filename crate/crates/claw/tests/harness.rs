use std::process::Command;

use claw::harness::*;
use claw::Error;
use serde_json::json;

fn spec(name: ExperimentName, params: serde_json::Value, seed: u64) -> ExperimentSpec {
    ExperimentSpec::new(name, params, seed)
}

#[test]
fn same_seed_same_report() {
    for name in [ExperimentName::E3Theorem61, ExperimentName::E4Decomposition, ExperimentName::E5Sobolev] {
        let a = run(&spec(name, json!(null), 5)).unwrap();
        let b = run(&spec(name, json!(null), 5)).unwrap();
        assert_eq!(a.tables, b.tables, "{name:?}");
        assert_eq!(a.verdicts, b.verdicts);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.manifest.seed, 5);
    }
    let a = run(&spec(ExperimentName::E3Theorem61, json!({"data": 3}), 1)).unwrap();
    let b = run(&spec(ExperimentName::E3Theorem61, json!({"data": 3}), 2)).unwrap();
    assert_ne!(a.tables[0], b.tables[0]);
}

#[test]
fn defaults_are_echoed() {
    let r = run(&spec(ExperimentName::E1Sawtooth, json!({"betas": [1.0]}), 0)).unwrap();
    assert_eq!(r.inputs["n_max"], json!(4000));
    assert_eq!(r.inputs["betas"], json!([1.0]));
    assert_eq!(r.tables.len(), 1);
}

#[test]
fn schema_violations_are_invalid() {
    let cases = [
        (ExperimentName::E1Sawtooth, json!({"beta": 1.0})),
        (ExperimentName::E1Sawtooth, json!({"n_max": "many"})),
        (ExperimentName::E4Decomposition, json!([1, 2])),
        (ExperimentName::E5Sobolev, json!({"alphas": 0.5})),
    ];
    for (name, p) in cases {
        match run(&spec(name, p.clone(), 0)) {
            Err(Error::Invalid(msg)) => assert!(msg.contains(name.as_str()), "{msg}"),
            other => panic!("{p} gave {other:?}"),
        }
    }
    assert!(matches!(ExperimentName::parse("e7"), Err(Error::Invalid(_))));
    let s: ExperimentSpec = serde_json::from_value(json!({"name": "e2_counterexample"})).unwrap();
    assert_eq!(s.name, ExperimentName::E2Counterexample);
    let s: ExperimentSpec = serde_json::from_value(json!({"name": "e2", "seed": 4})).unwrap();
    assert_eq!((s.name, s.seed), (ExperimentName::E2Counterexample, 4));
    assert!(serde_json::from_value::<ExperimentSpec>(json!({"name": "e2_sobolev"})).is_err());
}

#[test]
fn resource_guards() {
    let big = run(&spec(ExperimentName::E1Sawtooth, json!({"n_max": MAX_TEETH + 1}), 0));
    assert!(matches!(big, Err(Error::Resource(_))));
    let deep = run(&spec(ExperimentName::E2Counterexample, json!({"levels": MAX_MULTISCALE_LEVELS + 1}), 0));
    assert!(matches!(deep, Err(Error::Resource(_))));
    let fine = run(&spec(ExperimentName::E4Decomposition, json!({"random_levels": MAX_RANDOM_LEVELS + 1}), 0));
    assert!(matches!(fine, Err(Error::Resource(_))));
    let alpha = run(&spec(ExperimentName::E3Theorem61, json!({"alpha": 0.5}), 0));
    assert!(matches!(alpha, Err(Error::Domain(_))));
}

#[test]
fn verdicts_follow_their_relation() {
    for name in ExperimentName::ALL {
        let r = run(&spec(name, json!(null), 0)).unwrap();
        for v in &r.verdicts {
            let recomputed = match v.relation {
                Relation::Within => (v.measured - v.expected).abs() <= v.tolerance,
                Relation::AtMost => v.measured <= v.expected,
                Relation::AtLeast => v.measured >= v.expected,
                Relation::Factor => v.measured * v.tolerance >= v.expected && v.measured <= v.expected * v.tolerance,
            };
            assert_eq!(v.passed, recomputed, "{}", v.id);
            assert!(v.line().starts_with(if v.passed { "PASS" } else { "FAIL" }));
        }
        assert_eq!(r.passed(), r.verdicts.iter().all(|v| v.passed));
    }
    // the sawtooth slope target is missed by more than the tolerance
    let e1 = run(&spec(ExperimentName::E1Sawtooth, json!(null), 0)).unwrap();
    assert!(!e1.passed());
}

#[test]
fn frozen_baselines_match_calibration() {
    let b = Baselines::calibrate().unwrap();
    let f = Baselines::frozen();
    for (x, y) in [
        (b.single_scale_c, f.single_scale_c),
        (b.decay_c0, f.decay_c0),
        (b.kernel_constant, f.kernel_constant),
        (b.multiscale_norm, f.multiscale_norm),
    ] {
        assert!((x - y).abs() <= 1e-9 * y, "{x} vs {y}");
    }
}

#[test]
fn tables_to_csv() {
    let mut t = Table::new("demo", &["t", "tv"]);
    t.push(vec![0.5, 2.0]);
    t.push(vec![0.25, 3.5]);
    assert_eq!(t.to_csv(), "t,tv\n0.5,2\n0.25,3.5\n");
    assert_eq!(t.column("tv"), Some(vec![2.0, 3.5]));
    assert_eq!(t.column("x"), None);
}

fn report_with(tables: Vec<Table>) -> ExperimentReport {
    let mut r = run(&spec(ExperimentName::E1Sawtooth, json!({"betas": [1.0], "n_max": 50, "q_max": 6}), 0)).unwrap();
    r.tables = tables;
    r
}

#[test]
fn plot_cases() {
    // power law: slope recovered in the label
    let mut t = Table::new("power", &["t", "tv"]);
    for q in 0..8 {
        let x = 0.5f64.powi(q);
        t.push(vec![x, x.powf(-0.5)]);
    }
    // all zeros: no positive points, slope undefined
    let mut z = Table::new("zero", &["t", "tv"]);
    z.push(vec![0.5, 0.0]);
    z.push(vec![0.25, 0.0]);
    let empty = Table::new("empty", &["t", "tv"]);
    let other = Table::new("other", &["k", "c"]);
    let r = report_with(vec![t, z, empty, other]);
    let p = plot(&r);
    let names: Vec<&str> = p.files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["power.svg", "zero.svg"]);
    assert!(p.files[0].1.contains("slope -0.500"));
    assert!(p.files[1].1.contains("slope undefined"));
    assert_eq!(p.warnings.len(), 1);
    assert!(p.warnings[0].contains("empty"));
    assert!(p.files.iter().all(|f| f.1.starts_with("<svg") && f.1.trim_end().ends_with("</svg>")));
    assert_eq!(plot(&r), p);
}

#[test]
fn write_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&spec(ExperimentName::E1Sawtooth, json!({"betas": [0.5, 2.0], "n_max": 200}), 0)).unwrap();
    let files = write_report(&r, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for n in ["report.json", "manifest.json", "sawtooth_beta_0.5.csv", "sawtooth_beta_2.svg"] {
        assert!(names.iter().any(|x| x == n), "{n} missing from {names:?}");
    }
    let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, r);
}

fn claw(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_claw")).args(args).env("CLAW_THREADS", "2").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes() {
    let (code, out) = claw(&["experiment", "--name", "e5"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")));
    let (code, out) = claw(&["experiment", "--name", "e1_sawtooth"]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL slope_beta_2"));
    assert_eq!(claw(&["experiment", "--name", "e8"]).0, 2);
    assert_eq!(claw(&["experiment", "--name", "e1", "--params", "{\"nope\": 1}"]).0, 2);
    assert_eq!(claw(&["experiment", "--name", "e1", "--params", "{\"n_max\": 2000000}"]).0, 3);
    assert_eq!(claw(&["solve", "--t", "0.5"]).0, 2);
    assert_eq!(claw(&["frobnicate"]).0, 2);
}

#[test]
fn cli_subcommands() {
    let (code, out) = claw(&["solve", "--gen", "triangle:1:1", "--t", "2"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["shocks"].is_array());

    let dir = tempfile::tempdir().unwrap();
    let datum = dir.path().join("u.json");
    std::fs::write(&datum, r#"{"points": [[0, 0], [0.5, 1], [1, 0]]}"#).unwrap();
    let (code, out) = claw(&["decay", "--input", datum.to_str().unwrap(), "--tmin", "0.0625"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("t,tv,scaled\n"));
    assert_eq!(out.lines().count(), 6);

    let (code, out) = claw(&["palpha", "--gen", "hat:0.125", "--Q", "6"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 8);

    let (code, out) = claw(&["decompose", "--gen", "palpha:0.75:6:1", "--alpha", "0.75", "--K", "8", "--imax", "16"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("smallest C"));

    assert_eq!(claw(&["palpha", "--gen", "palpha:0.75:40:1"]).0, 3);
    assert_eq!(claw(&["palpha", "--gen", "wave:3"]).0, 2);

    let out_dir = dir.path().join("rep");
    let params = dir.path().join("p.json");
    std::fs::write(&params, r#"{"betas": [0.25]}"#).unwrap();
    let (code, _) = claw(&["experiment", "--name", "e2", "--params", params.to_str().unwrap(), "--seed", "42", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out_dir.join("blowup.csv").exists() && out_dir.join("report.json").exists());
    assert_eq!(claw(&["experiment"]).0, 2);
}

#[test]
fn cli_descriptors_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let saw = write("saw.json", r#"{"example": "sawtooth", "beta": 1, "n_max": 50}"#);
    let (code, out) = claw(&["decay", "--input", &saw, "--tmin", "0.001", "--tmax", "0.5", "--grid", "geometric", "--points", "7"]);
    assert_eq!(code, 0);
    let ts: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts.len(), 7);
    assert!((ts[0] - 0.5).abs() < 1e-15 && (ts[6] - 0.001).abs() < 1e-15);
    let (code, out) = claw(&["decay", "--input", &saw, "--tmin", "0.01", "--tmax", "0.3"]);
    assert_eq!(code, 0);
    // 2^-2 .. 2^-6
    assert_eq!(out.lines().count(), 6);
    assert_eq!(claw(&["decay", "--input", &saw, "--tmax", "2"]).0, 2);

    let hat = write("hat.json", r#"{"example": "hat_u", "t": 0.125}"#);
    let sol = dir.path().join("sol.json");
    assert_eq!(claw(&["solve", "--input", &hat, "--t", "0.125", "--out", sol.to_str().unwrap()]).0, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert!(v["solution"]["nodes"].is_array());

    let multi = write("multi.json", r#"{"example": "prop33", "J": 2}"#);
    assert_eq!(claw(&["palpha", "--input", &multi, "--Q", "4"]).0, 0);
    let deep = write("deep.json", r#"{"example": "prop33", "J": 3}"#);
    assert_eq!(claw(&["palpha", "--input", &deep]).0, 3);
    let junk = write("junk.json", r#"{"example": "zigzag"}"#);
    assert_eq!(claw(&["palpha", "--input", &junk]).0, 2);
}
