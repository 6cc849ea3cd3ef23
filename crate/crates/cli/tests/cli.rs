use std::path::{Path, PathBuf};
use std::process::Command;

use mshe_cli::io::{read_timeseries, CSV_HEADER};
use mshe_cli::run_command;
use serde_json::Value;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["mshe"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"params":{"n":1},"init":{"kind":"mode","k":1},"scheme":{"t_end":1e-3,"record_every":10}}"#,
    );
    let out = dir.path().join("traj.csv");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 12);
    // Constant run at the ground mode: energy column identical in every row.
    let energies: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(energies.iter().all(|e| *e == energies[0]));
}

#[test]
fn simulate_report_and_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let cfg = write(
        dir.path(),
        "run.json",
        &format!(
            r#"{{"params":{{"n":2}},"scheme":{{"t_end":2e-4}},"outputs":{{"trajectory_path":"{}","report_path":"{}"}}}}"#,
            s(&dir.path().join("t.csv")),
            s(&report)
        ),
    );
    assert_eq!(run(&["simulate", "--config", s(&cfg)]), 0);
    let doc = json(&report);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["params"]["n"], 2);
    assert_eq!(doc["monitors"]["energy_increases"], 0);

    let bad = write(dir.path(), "bad.json", r#"{"params":{"n":0}}"#);
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            s(&bad),
            "--out",
            s(&dir.path().join("x.csv"))
        ]),
        1
    );
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            "/nonexistent.json",
            "--out",
            "x.csv"
        ]),
        1
    );
    assert_eq!(run(&["bogus-subcommand"]), 1);
}

#[test]
fn rk4_blowup_exits_2_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"params":{"n":2},"init":{"kind":"random","seed":3},"scheme":{"kind":"projected_rk4","dt":1e-5,"t_end":1e-3}}"#,
    );
    let out = dir.path().join("traj.csv");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&out)]), 2);
    let recs = read_timeseries(&out).unwrap();
    assert!(!recs.is_empty());
}

#[test]
fn equilibrium_and_spectrum_documents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", r#"{"params":{"n":1}}"#);
    let eq = dir.path().join("eq.json");
    assert_eq!(
        run(&[
            "equilibrium",
            "--config",
            s(&cfg),
            "--guess",
            "mode:1",
            "--out",
            s(&eq)
        ]),
        0
    );
    let doc = json(&eq);
    assert_eq!(doc["kind"], "equilibrium");
    let mu = doc["mu"].as_f64().unwrap();
    let l1 = std::f64::consts::PI.powi(4) + 2.0 * std::f64::consts::PI.powi(2);
    assert!((mu - (l1 + 1.0)).abs() < 1e-9);

    // The equilibrium document is itself usable as a guess.
    let sp = dir.path().join("sp.json");
    let guess = format!("file:{}", s(&eq));
    assert_eq!(
        run(&[
            "spectrum",
            "--config",
            s(&cfg),
            "--guess",
            &guess,
            "--out",
            s(&sp)
        ]),
        0
    );
    let doc = json(&sp);
    assert_eq!(doc["classification"], "stable");
    assert_eq!(doc["tangent_rates"].as_array().unwrap().len(), 63);

    assert_eq!(
        run(&[
            "spectrum",
            "--config",
            s(&cfg),
            "--guess",
            "mode:2",
            "--out",
            s(&sp)
        ]),
        0
    );
    assert_eq!(json(&sp)["classification"], "saddle");
    assert_eq!(
        run(&[
            "equilibrium",
            "--config",
            s(&cfg),
            "--guess",
            "mode:99",
            "--out",
            s(&sp)
        ]),
        1
    );
    assert_eq!(
        run(&[
            "equilibrium",
            "--config",
            s(&cfg),
            "--guess",
            "nope",
            "--out",
            s(&sp)
        ]),
        1
    );
}

#[test]
fn decay_fit_and_theta_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"params":{"n":1},"init":{"kind":"random","seed":5},"scheme":{"t_end":0.02,"record_every":10}}"#,
    );
    let csv = dir.path().join("traj.csv");
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--out", s(&csv)]), 0);

    let fit = dir.path().join("fit.json");
    assert_eq!(
        run(&[
            "decay-fit",
            "--input",
            s(&csv),
            "--model",
            "exponential",
            "--t-min",
            "0.002",
            "--t-max",
            "0.015",
            "--out",
            s(&fit)
        ]),
        0
    );
    let doc = json(&fit);
    assert_eq!(doc["fit"]["model"], "exponential");
    let rate = doc["fit"]["rate"].as_f64().unwrap();
    assert!((rate / 1520.35 - 1.0).abs() < 0.05, "{rate}");

    let th = dir.path().join("theta.json");
    assert_eq!(
        run(&[
            "theta",
            "--config",
            s(&cfg),
            "--input",
            s(&csv),
            "--guess",
            "mode:1",
            "--out",
            s(&th)
        ]),
        0
    );
    let theta = json(&th)["estimate"]["theta"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&theta), "{theta}");

    assert_eq!(
        run(&["decay-fit", "--input", s(&dir.path().join("missing.csv"))]),
        1
    );
}

#[test]
fn sweep_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"params":{"n":1},"domain":{"n_modes":32},"scheme":{"t_end":0.03}}"#,
    );
    let out = dir.path().join("sweep.json");
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            s(&cfg),
            "--seeds",
            "3",
            "--rng-seed",
            "9",
            "--out",
            s(&out)
        ]),
        0
    );
    let doc = json(&out);
    assert_eq!(doc["seeds"], 3);
    assert_eq!(doc["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(doc["unconverged"], 0);
    assert_eq!(
        run(&[
            "sweep",
            "--config",
            s(&cfg),
            "--seeds",
            "0",
            "--out",
            s(&out)
        ]),
        1
    );
}

#[test]
fn checkpoint_resume_matches_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let full_csv = dir.path().join("full.csv");
    let cp = dir.path().join("cp.json");
    let full = write(
        dir.path(),
        "full.json",
        r#"{"params":{"n":2,"a":1.5},"init":{"kind":"random","seed":2},"scheme":{"t_end":2e-3,"record_every":20}}"#,
    );
    let half = write(
        dir.path(),
        "half.json",
        &format!(
            r#"{{"params":{{"n":2,"a":1.5}},"init":{{"kind":"random","seed":2}},"scheme":{{"t_end":1e-3,"record_every":20}},
                "outputs":{{"checkpoint_path":"{}"}}}}"#,
            s(&cp)
        ),
    );
    let rest = write(
        dir.path(),
        "rest.json",
        &format!(
            r#"{{"params":{{"n":2,"a":1.5}},"init":{{"kind":"file","path":"{}"}},"scheme":{{"t_end":2e-3,"record_every":20}}}}"#,
            s(&cp)
        ),
    );
    assert_eq!(
        run(&["simulate", "--config", s(&full), "--out", s(&full_csv)]),
        0
    );
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            s(&half),
            "--out",
            s(&dir.path().join("a.csv"))
        ]),
        0
    );
    assert_eq!(json(&cp)["kind"], "checkpoint");
    let rest_csv = dir.path().join("b.csv");
    assert_eq!(
        run(&["simulate", "--config", s(&rest), "--out", s(&rest_csv)]),
        0
    );
    let a = read_timeseries(&full_csv).unwrap();
    let b = read_timeseries(&rest_csv).unwrap();
    assert_eq!(&a[a.len() - b.len()..], &b[..]);

    let mismatched = write(
        dir.path(),
        "mm.json",
        &format!(
            r#"{{"params":{{"n":1}},"init":{{"kind":"file","path":"{}"}}}}"#,
            s(&cp)
        ),
    );
    assert_eq!(
        run(&[
            "simulate",
            "--config",
            s(&mismatched),
            "--out",
            s(&rest_csv)
        ]),
        1
    );
}

#[test]
fn binary_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"params":{"n":0}}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_mshe"))
        .args([
            "simulate",
            "--config",
            s(&bad),
            "--out",
            s(&dir.path().join("x.csv")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params.n"), "{err}");
    let ok = Command::new(env!("CARGO_BIN_EXE_mshe"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn csv_fit_matches_in_memory_fit() {
    use mshe_core::{
        build_domain, fit_decay, integrate, DecayModel, DomainSpec, Field, FlowParams, SchemeConfig,
    };
    let d = build_domain(DomainSpec::new(1.0, 64)).unwrap();
    let u0 = Field::basis_mode(&d, 1)
        .unwrap()
        .add_scaled(&Field::basis_mode(&d, 3).unwrap(), 0.4)
        .unwrap();
    let traj = integrate(
        &u0,
        &FlowParams::new(1, 0.0).unwrap(),
        &SchemeConfig::imex(1e-5, 5e-3).with_record_every(10),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    mshe_cli::io::emit_timeseries(&traj.records, &csv).unwrap();
    let res: Vec<f64> = traj.records.iter().map(|r| r.residual_norm).collect();
    let mem = fit_decay(&traj.times(), &res, DecayModel::Auto, None).unwrap();
    let out = dir.path().join("fit.json");
    assert_eq!(run(&["decay-fit", "--input", s(&csv), "--out", s(&out)]), 0);
    let disk: mshe_core::DecayFit = serde_json::from_value(json(&out)["fit"].clone()).unwrap();
    assert_eq!(disk, mem);
}
