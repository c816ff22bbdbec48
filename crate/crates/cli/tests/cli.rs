use std::process::{Command, Output};

use ergocap::analysis::beamform_opt_closed;
use ergocap::channels::{matrix_from_json, MatrixJson};
use ergocap::linalg::HermitianMatrix;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergocap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Vec<Value> {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&all)).expect("output is JSON")
}

fn field(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

#[test]
fn onoff_capacity_column() {
    let csv = stdout(&["waterfill", "--density", "onoff:2,0.5", "--snr", "1"]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "gamma,xi,capacity_nats,equal_power_nats,papr_exact,papr_bound"
    );
    let cells: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .take(4)
        .map(|c| c.parse().unwrap())
        .collect();
    // m p ln(1 + P/(m p)) with m p = 1
    assert!((cells[2] - 2f64.ln()).abs() < 1e-9);
    // the equal-power rate m E[ln(1 + Pλ/m)] is ln 1.5
    assert!((cells[3] - 1.5f64.ln()).abs() < 1e-12);
}

#[test]
fn point_mass_level_and_bits() {
    let rows = json(&[
        "waterfill",
        "--density",
        "masses:2@1",
        "--snr",
        "1",
        "--unit",
        "bits",
    ]);
    assert!((field(&rows[0], "xi") - 1.5).abs() < 1e-12);
    assert!((field(&rows[0], "capacity_bits") - 3f64.log2()).abs() < 1e-12);
    assert!(rows[0].get("capacity_nats").is_none());
}

#[test]
fn siso_rayleigh_two_curves() {
    let rows = json(&[
        "waterfill",
        "--density",
        "wishart:1,1",
        "--snr-db",
        "-10:30:1",
    ]);
    assert_eq!(rows.len(), 41);
    for r in &rows {
        let (c, e) = (field(r, "capacity_nats"), field(r, "equal_power_nats"));
        assert!(c >= e && e > 0.0);
        assert!(r["papr_bound"].is_null());
    }
}

#[test]
fn empirical_density_from_descriptor() {
    let rows = json(&[
        "waterfill",
        "--channel",
        r#"{"type":"kronecker","rx":1,"tx":1}"#,
        "--snr",
        "1",
        "--pool",
        "200000",
    ]);
    assert!((field(&rows[0], "capacity_nats") - 0.712928856209078).abs() < 1e-2);
}

#[test]
fn exit_codes() {
    assert_eq!(
        code(&[
            "waterfill",
            "--channel",
            r#"{"type":"bogus"}"#,
            "--snr",
            "1"
        ]),
        2
    );
    assert_eq!(
        code(&["waterfill", "--channel", "{not json", "--snr", "1"]),
        2
    );
    assert_eq!(
        code(&["waterfill", "--density", "wishart:1,1", "--snr-db", "1:0:1"]),
        2
    );
    assert_eq!(code(&["figures", "fig13"]), 2);
    assert_eq!(code(&["figures", "fig0"]), 2);
    assert_eq!(code(&["figures", "nonsense"]), 2);
    assert_eq!(code(&["bogus"]), 2);
    assert_eq!(
        code(&[
            "waterfill",
            "--density",
            "wishart:1,1",
            "--snr",
            "1",
            "--peak",
            "1"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "waterfill",
            "--density",
            "wishart:1,1",
            "--snr",
            "1",
            "--peak",
            "2.5"
        ]),
        0
    );
    assert_eq!(
        code(&[
            "beamform",
            "--channel",
            r#"{"type":"kronecker","rx":2,"tx":2,"tx_corr":[[3,0],[0,3]]}"#
        ]),
        2
    );
}

#[test]
fn optimize_point_mass_golden() {
    let rows = json(&[
        "optimize",
        "--channel",
        r#"{"type":"point","h":[[1.4142135623730951,0],[0,1]]}"#,
        "--snr",
        "1",
    ]);
    let r = &rows[0];
    assert!((field(r, "mi_nats") - 1.1394).abs() < 5e-5);
    assert_eq!(field(r, "mi_se_nats"), 0.0);
    assert_eq!(r["converged"], Value::Bool(true));
}

#[test]
fn optimize_json_revalidates() {
    let rows = json(&[
        "optimize",
        "--channel",
        r#"{"type":"kronecker","rx":2,"tx":2}"#,
        "--snr",
        "1",
        "--samples",
        "20000",
    ]);
    let r = &rows[0];
    let q: MatrixJson = serde_json::from_value(r["q"].clone()).unwrap();
    let q = HermitianMatrix::new(matrix_from_json(&q).unwrap()).unwrap();
    assert!((q.trace() - 1.0).abs() < 1e-9);
    // i.i.d. Rayleigh: Q = I/t
    assert!((q[(0, 0)].re - 0.5).abs() < 0.05 && q[(0, 1)].norm() < 0.05);
    let eig: Vec<f64> = r["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((eig.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let vecs: MatrixJson = serde_json::from_value(r["eigenvectors"].clone()).unwrap();
    assert_eq!(matrix_from_json(&vecs).unwrap().rows(), 2);
}

#[test]
fn optimize_writes_trace_and_flags_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = run(&[
        "optimize",
        "--channel",
        r#"{"type":"kronecker","rx":2,"tx":2,"mean":[[1,0],[0,0]]}"#,
        "--snr",
        "1",
        "--samples",
        "1000",
        "--max-iter",
        "1",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",false,"));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("gamma,iter,mi,residual\n"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn options_document() {
    let rows = json(&[
        "optimize",
        "--channel",
        r#"{"type":"point","h":[[1.4142135623730951,0],[0,1]]}"#,
        "--options",
        r#"{"tol": 1e-3, "max_iter": 3}"#,
    ]);
    assert!(rows[0]["iterations"].as_u64().unwrap() <= 3);
    assert_eq!(
        code(&[
            "optimize",
            "--channel",
            r#"{"type":"onoff","m":2,"p":0.5}"#,
            "--options",
            r#"{"bogus": 1}"#
        ]),
        2
    );
}

#[test]
fn interpolation_sweep_schema() {
    let csv = stdout(&[
        "optimize",
        "--channel",
        r#"{"type":"interp","kappa":0.5,"m0":[[0,1],[1,1]],"noise_cov":[[4,0],[0,1]]}"#,
        "--kappa-grid",
        "0:1:0.5",
        "--samples",
        "2000",
    ]);
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "snr_db,gamma,kappa,q1,q2,angle,angle_to_mean_gram,mi_nats,mi_se_nats,kkt_residual,converged");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn beamform_identity_transmit_correlation() {
    let rows = json(&[
        "beamform",
        "--channel",
        r#"{"type":"kronecker","rx":2,"tx":2}"#,
        "--snr-db",
        "-15,0,15",
    ]);
    for r in &rows {
        assert_eq!(r["optimal"], Value::Bool(false));
        assert_eq!(r["method"], "closed-form");
    }
}

#[test]
fn beamform_miso_instance() {
    let desc =
        r#"{"type":"kronecker","rx":1,"tx":2,"tx_corr":[[1.6,0],[0,0.4]],"normalized":true}"#;
    let rows = json(&["beamform", "--channel", desc, "--snr", "0.5"]);
    let want = beamform_opt_closed(&[1.0], 1.6, 0.4, 0.5).unwrap();
    assert!((field(&rows[0], "margin") - want.margin).abs() < 1e-12);
    let mc = json(&[
        "beamform",
        "--channel",
        desc,
        "--snr",
        "0.5",
        "--method",
        "mc",
        "--samples",
        "50000",
    ]);
    assert_eq!(mc[0]["optimal"], rows[0]["optimal"]);
}

#[test]
fn beamform_boundary_low_snr() {
    let rows = json(&["beamform", "--boundary", "--snr-db", "-15"]);
    let first = field(&rows[0], "tau");
    assert!((first - 1.03).abs() <= 0.02, "{first}");
    assert_eq!(rows.len(), 20);
}

#[test]
fn figure_tables() {
    let papr = stdout(&["figures", "papr", "--snr-db", "0:10:5"]);
    assert_eq!(
        papr.lines().next().unwrap(),
        "snr_db,gamma,papr_db_t1,papr_db_t2,papr_db_t4"
    );
    assert_eq!(papr.lines().count(), 4);
    assert_eq!(papr, stdout(&["figures", "fig5", "--snr-db", "0:10:5"]));
    let density = json(&["figures", "power-density", "--points", "5"]);
    assert_eq!(density.len(), 25);
    let gains = json(&[
        "figures",
        "rayleigh-gains",
        "--snr-db",
        "30",
        "--samples",
        "5000",
    ]);
    assert!((field(&gains[0], "space_time_gain") - 1.0).abs() < 0.02);
    assert!((field(&gains[0], "space_gain") - 1.0).abs() < 0.02);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2)
        .map(|i| dir.path().join(format!("o{i}.csv")))
        .collect();
    for p in &paths {
        let args = [
            "figures",
            "convergence-rotated",
            "--instances",
            "2",
            "--samples",
            "500",
            "--seed",
            "11",
            "--out",
            p.to_str().unwrap(),
        ];
        assert!(run(&args).status.success());
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let once = stdout(&[
        "figures",
        "rayleigh-rates",
        "--snr-db",
        "0",
        "--samples",
        "3000",
        "--seed",
        "3",
    ]);
    assert_eq!(
        once,
        stdout(&[
            "figures",
            "rayleigh-rates",
            "--snr-db",
            "0",
            "--samples",
            "3000",
            "--seed",
            "3"
        ])
    );
    assert_ne!(
        once,
        stdout(&[
            "figures",
            "rayleigh-rates",
            "--snr-db",
            "0",
            "--samples",
            "3000",
            "--seed",
            "4"
        ])
    );
}
