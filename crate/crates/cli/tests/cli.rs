use dfrc::designs::design_point_single;
use dfrc::metrics::DesignMethod;
use dfrc_cli::commands::{SavedDesign, VerificationReport};
use dfrc_cli::config::TargetSpec;
use dfrc_cli::{ExperimentConfig, ExperimentId, ResultTable};
use std::path::Path;
use std::process::{Command, Output};

fn dfrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfrc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn single_user_point_design_is_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    stdout(&dfrc(&[
        "design",
        "--point",
        "--k",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let saved = SavedDesign::load(&out).unwrap();
    assert_eq!(
        saved.solution.diagnostics.method,
        DesignMethod::PointClosedForm
    );

    let mut cfg = ExperimentConfig::for_experiment(ExperimentId::Custom);
    cfg.users = 1;
    let s = cfg.scenario(1, cfg.sinr_db, TargetSpec::Point { theta_deg: 0.0 });
    assert_eq!(saved.scenario, s);
    let direct = design_point_single(&s).unwrap();
    assert_eq!(saved.solution.objective, direct.objective);

    let report: VerificationReport =
        serde_json::from_str(&stdout(&dfrc(&["verify", "--kkt", out.to_str().unwrap()]))).unwrap();
    assert!(report.kkt.is_some());
    assert!(report.max_residual < 1e-6, "{report:?}");
}

#[test]
fn saved_multi_user_design_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    stdout(&dfrc(&[
        "design",
        "--k",
        "4",
        "--sinr-db",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: VerificationReport =
        serde_json::from_str(&stdout(&dfrc(&["verify", out.to_str().unwrap()]))).unwrap();
    assert!(report.rank_condition.unwrap().full_column_rank);
    assert!(report.max_residual < 1e-5, "{}", report.max_residual);

    let table =
        ResultTable::from_csv(&stdout(&dfrc(&["evaluate", out.to_str().unwrap()]))).unwrap();
    for k in 0..4 {
        let sinr = table.column(&format!("sinr_db_user{k}")).unwrap()[0].unwrap();
        assert!(sinr >= 10.0 - 1e-5, "user {k}: {sinr}");
    }
}

#[test]
fn evaluated_beampattern_reproduces_fig3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    stdout(&dfrc(&[
        "design",
        "--k",
        "4",
        "--sinr-db",
        "15",
        "--out",
        out.to_str().unwrap(),
    ]));
    let evaluated = ResultTable::from_csv(&stdout(&dfrc(&[
        "evaluate",
        "--beampattern",
        out.to_str().unwrap(),
    ])))
    .unwrap();
    let fig3 = ResultTable::from_csv(&stdout(&dfrc(&["run", "--experiment", "fig3"]))).unwrap();
    assert_eq!(evaluated.columns, fig3.columns);
    assert_eq!(evaluated.rows, fig3.rows);

    let power = fig3.column("power").unwrap();
    let peak = (0..power.len())
        .max_by(|&i, &j| power[i].partial_cmp(&power[j]).unwrap())
        .unwrap();
    assert_eq!(fig3.rows[peak][0], Some(0.0));
    assert_eq!(fig3.metadata["theta_step_deg"], "0.5");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let infeasible = dfrc(&["design", "--k", "4", "--sinr-db", "80"]);
    assert_eq!(infeasible.status.code(), Some(2));

    let bad = write(dir.path(), "bad.json", r#"{"n_tx": 0}"#);
    assert_eq!(
        dfrc(&["run", "--experiment", "fig2", "--config", &bad])
            .status
            .code(),
        Some(4)
    );
    let unknown = write(dir.path(), "unknown.json", r#"{"antennas": 4}"#);
    assert_eq!(dfrc(&["run", "--config", &unknown]).status.code(), Some(4));
    assert_eq!(dfrc(&["run", "--no-such-flag"]).status.code(), Some(4));
    assert_eq!(
        dfrc(&["run", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(dfrc(&["--help"]).status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment": "fig4", "users": 2, "n_tx": 8, "n_rx": 10, "snr_sweep_db": {"start": 0, "stop": 20, "step": 10}}"#,
    );
    let run = || {
        stdout(&dfrc(&[
            "run", "--config", &cfg, "--trials", "50", "--seed", "9", "--format", "json",
        ]))
    };
    let a = run();
    assert_eq!(a, run());
    let t: ResultTable = serde_json::from_str(&a).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.metadata["seed"], "9");
    assert_eq!(t.metadata["experiment"], "fig4");
    assert_eq!(t.metadata["config_hash"].len(), 64);

    let other = stdout(&dfrc(&[
        "run", "--config", &cfg, "--trials", "50", "--seed", "10", "--format", "json",
    ]));
    assert_ne!(a, other);
}

#[test]
fn output_file_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"experiment": "fig5", "n_tx": 6, "n_rx": 8, "user_counts": [2], "users": 2, "sinr_sweep_db": {"start": 0, "stop": 90, "step": 45}}"#,
    );
    let out = dir.path().join("t.csv");
    stdout(&dfrc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]));
    let t = ResultTable::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let col = t.column("root_crb_deg_k2").unwrap();
    assert!(col[0].is_some());
    assert!(col[2].is_none());
    assert_eq!(t.metadata["gaps"], t.gaps().to_string());
}
