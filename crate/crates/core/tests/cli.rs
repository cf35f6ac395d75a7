use std::fs;
use std::path::Path;
use std::process::Command;

use ppclf_core::clf::{self, ClfId};
use ppclf_core::controllers::{control, ControllerSpec, Epsilon};
use ppclf_core::dynamics::{open_loop_invariant, PopulationState};
use serde_json::Value;

fn ppclf(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ppclf"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, data)
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = ppclf(&[
        "verify",
        "--clf",
        "V_SF_STRICT",
        "--controller",
        "predator-linear",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    let report = json(&dir.path().join("verify_report.json"));
    assert_eq!(report["passed"], true);
    for r in report["reports"].as_array().unwrap() {
        for key in [
            "check",
            "verdict",
            "worst_point",
            "margin",
            "points",
            "params",
        ] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }

    let (code, _, _) = ppclf(&["verify", "--clf", "V1_SF", "--strict", "--out", out]);
    assert_eq!(code, 1);
    let report = json(&dir.path().join("verify_report.json"));
    let failed: Vec<&Value> = report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["verdict"] == "fail")
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["worst_point"][1], 1.0);

    let (code, _, err) = ppclf(&[
        "verify",
        "--clf",
        "V_BOTH_STRICT",
        "--eps",
        "1.5",
        "--out",
        out,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("eps"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec![
            "verify",
            "--clf",
            "V_SF_STRICT",
            "--controller",
            "forwarding",
        ],
        vec!["verify", "--clf", "V_NOPE"],
        vec!["simulate", "--x0", "-1,2"],
        vec!["simulate", "--tol", "abc"],
        vec![
            "simulate",
            "--model",
            "simultaneous",
            "--controller",
            "predator-linear",
        ],
        vec!["figures", "--id", "no-such-figure"],
        vec!["regions", "--clf", "V_SF_STRICT"],
        vec!["invariant", "--controller", "predator-linear"],
        vec!["verify", "--grid-n", "1"],
        vec!["bogus"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", out]);
        let (code, _, err) = ppclf(&a);
        assert_eq!(code, 2, "{args:?}: {err}");
    }
    let (_, _, err) = ppclf(&[
        "verify",
        "--clf",
        "V_SF_STRICT",
        "--controller",
        "forwarding",
    ]);
    assert!(err.contains("predator-linear"), "{err}");
}

#[test]
fn simulate_open_loop_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = ppclf(&[
        "simulate",
        "--controller",
        "constant",
        "--x0",
        "2,1",
        "--t-end",
        "20",
        "--tol",
        "1e-10",
        "--clf",
        "V_SF_STRICT",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    let (header, data) = rows(&dir.path().join("traj_000.csv"));
    assert_eq!(header, ["t", "X", "Y", "U", "V_SF_STRICT", "C"]);
    let c0 = data[0][5];
    for r in &data {
        let s = PopulationState::new(r[1], r[2]).unwrap();
        assert_eq!(r[3], 1.0);
        let v = clf::value(ClfId::VSfStrict, s);
        assert!((v - r[4]).abs() <= 1e-15 * v.abs().max(1.0) * 4.0);
        assert!((open_loop_invariant(s) - r[5]).abs() < 1e-14 * 4.0);
        assert!((r[5] - c0).abs() < 1e-7);
    }
    let m = json(&dir.path().join("manifest.json"));
    assert!(m["notes"]["runs"][0]["invariant_drift"].as_f64().unwrap() < 1e-7);
}

#[test]
fn simulate_closed_loop_sweep_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "simulate".to_string(),
            "--clf".into(),
            "V_BOTH_STRICT".into(),
            "--eps".into(),
            "0.9".into(),
            "--sweep".into(),
            "4".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let owned = args(d);
        let (code, _, _) = ppclf(&owned.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code, 0);
    }
    let ma = fs::read(a.path().join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.path().join("manifest.json")).unwrap());
    let m: Value = serde_json::from_slice(&ma).unwrap();
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
    assert!(a.path().join("timing.json").exists());

    let e = Epsilon::new(0.9).unwrap();
    let (header, data) = rows(&a.path().join("traj_002.csv"));
    assert_eq!(header[4], "V_BOTH_STRICT(eps=0.9)");
    for r in &data {
        let s = PopulationState::new(r[1], r[2]).unwrap();
        let u = control(ControllerSpec::MixedLinear(e), s);
        assert!((u - r[3]).abs() <= 4e-16 * u.abs().max(1.0));
    }
    // no temporary files left behind
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".tmp"), "{name}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# closed loop\ncontroller = predator-linear\nx0 = 2,1; 0.5,3\nt_end = 5\nsamples = 201\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = ppclf(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--t-end",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["integrator"]["t_end"], 7.0);
    assert_eq!(m["config"]["controller"], "predator-linear");
    let (_, data) = rows(&out.join("traj_001.csv"));
    assert_eq!(data.len(), 201);
    assert_eq!(data[0][1], 0.5);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let (code, _, _) = ppclf(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn regions_and_invariant_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = ppclf(&["regions", "--grid-n", "80", "--out", out]);
    // the forwarding candidate is not an input-positive CLF
    assert_eq!(code, 1);
    let r = json(&dir.path().join("regions_report.json"));
    assert_eq!(r["reports"][0]["verdict"], "pass");
    assert_eq!(r["reports"][1]["verdict"], "fail");

    let (code, _, _) = ppclf(&[
        "regions",
        "--controller",
        "backstepping-positive",
        "--grid-n",
        "80",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);

    let (code, _, _) = ppclf(&["invariant", "--x0", "2,1", "--out", out]);
    assert_eq!(code, 0);
    let r = json(&dir.path().join("invariant_report.json"));
    assert_eq!(r["passed"], true);
}

#[test]
fn figures_emit_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = ppclf(&["figures", "--id", "V-both", "--eps", "0.5", "--out", out]);
    assert_eq!(code, 0);
    let (_, data) = rows(&dir.path().join("V-both/V_grid.csv"));
    let min = data.iter().min_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!(
        (min[0] - 1.0).abs() < 1e-12 && (min[1] - 1.0).abs() < 1e-12,
        "{min:?}"
    );
    assert!(dir.path().join("V-both/plot.py").exists());

    let (code, _, _) = ppclf(&["figures", "--id", "psi-curves", "--out", out]);
    assert_eq!(code, 0);
    let (header, data) = rows(&dir.path().join("psi-curves/psi.csv"));
    assert_eq!(header, ["S", "psi_S", "psi_inv_S"]);
    assert!((data[0][0] - 0.05).abs() < 1e-15 && (data.last().unwrap()[0] - 5.0).abs() < 1e-12);

    let (code, _, _) = ppclf(&["figures", "--id", "region-forwarding", "--out", out]);
    assert_eq!(code, 0);
    let (_, data) = rows(&dir.path().join("region-forwarding/regions.csv"));
    assert!(data.iter().any(|r| r[3] == 1.0));

    let (code, _, _) = ppclf(&["figures", "--id", "open-loop", "--out", out]);
    assert_eq!(code, 0);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(
        m["notes"]["open_loop_levels"],
        serde_json::json!([2.1, 2.5, 3.0, 4.0])
    );
}
