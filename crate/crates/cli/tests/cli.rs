//! End-to-end tests of the command-line interface: exit codes, output
//! contract, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bergman-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing {name} in {}: {e}", dir.display()))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).expect("valid JSON")
}

#[test]
fn hs_closed_form_and_exit_codes() {
    let tmp = std::env::temp_dir().join("bergman-cli-hs");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "hs",
        "--symbol",
        "scale(0.5)",
        "--weight",
        "one",
        "--trunc-n",
        "64",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let dir = tmp.join("hs");
    let report = json(&dir, "report.json");
    let value = report["integral_verdict"]["Finite"]["value"]
        .as_f64()
        .expect("finite integral");
    assert!((value - 4.0 / 3.0).abs() / (4.0 / 3.0) < 5e-3, "value {value}");
    let agreement = report["mutual_agreement"].as_f64().unwrap();
    assert!(agreement < 0.01);
    assert!(read(&dir, "data.csv").starts_with("n,term,partial_sum"));
    assert!(json(&dir, "manifest.json")["config"]["symbol"] == "scale(0.5)");
}

#[test]
fn hs_lens_unit_power_weight_fixture() {
    // Frozen from a converged high-depth run of the same estimator.
    let tmp = std::env::temp_dir().join("bergman-cli-hs-lens");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "hs",
        "--symbol",
        "lens",
        "--weight",
        "powerweight(beta=1.0)",
        "--trunc-n",
        "64",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = json(&tmp.join("hs"), "report.json");
    let value = report["integral_verdict"]["Finite"]["value"]
        .as_f64()
        .expect("finite integral");
    assert!((value - 4.9096).abs() / 4.9096 < 0.01, "value {value}");
}

#[test]
fn hs_divergent_weight_exits_two() {
    let tmp = std::env::temp_dir().join("bergman-cli-hs-div");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "hs",
        "--symbol",
        "lens",
        "--weight",
        "powerweight(beta=0.25)",
        "--trunc-n",
        "512",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_symbol_exits_one() {
    let out = run(&["hs", "--symbol", "frobnicate(x=1)"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["carleson", "--alpha", "-2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp_a = std::env::temp_dir().join("bergman-cli-det-a");
    let tmp_b = std::env::temp_dir().join("bergman-cli-det-b");
    for tmp in [&tmp_a, &tmp_b] {
        let _ = std::fs::remove_dir_all(tmp);
        let out = run(&[
            "carleson",
            "--symbol",
            "kappa(s=0.5)",
            "--refine-depth",
            "16",
            "--grid-m",
            "128",
            "--scales-k",
            "10",
            "--seed",
            "42",
            "--threads",
            "2",
            "--out",
            tmp.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    for name in ["data.csv", "report.json"] {
        assert_eq!(
            read(&tmp_a.join("carleson"), name),
            read(&tmp_b.join("carleson"), name),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn carleson_classifications() {
    let tmp = std::env::temp_dir().join("bergman-cli-carleson");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "carleson",
        "--symbol",
        "kappa(s=0.5)",
        "--refine-depth",
        "30",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&tmp.join("carleson"), "report.json");
    assert_eq!(report["classification"]["class"], "Vanishing");

    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "carleson",
        "--symbol",
        "scale(0.5)",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&tmp.join("carleson"), "report.json");
    assert_eq!(report["classification"]["class"], "Vanishing");
    // Zero profile at small scales.
    let csv = read(&tmp.join("carleson"), "data.csv");
    let last = csv.lines().last().unwrap();
    let ratio: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(ratio, 0.0);
}

#[test]
fn decompactify_refuses_contraction() {
    let tmp = std::env::temp_dir().join("bergman-cli-deco");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "decompactify",
        "--symbol",
        "scale(0.5)",
        "--stages",
        "2",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let report = json(&tmp.join("decompactify"), "report.json");
    assert!(report["outcome"].as_str().unwrap().contains("refused"));
}

#[test]
fn compactify_lens_probe_decays() {
    let tmp = std::env::temp_dir().join("bergman-cli-compact");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "compactify",
        "--symbol",
        "lens",
        "--points",
        "1",
        "--grid-m",
        "128",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = json(&tmp.join("compactify"), "report.json");
    let final_sup = report["final_sup_linear"].as_f64().unwrap();
    assert!(final_sup < 1e-3, "sup {final_sup}");
    // The chosen boundary point is the lens contact at angle ≈ 0.
    let theta = report["chosen"][0][0].as_f64().unwrap();
    assert!(theta.min((std::f64::consts::TAU - theta).abs()) < 0.1);
}

#[test]
fn singvals_of_contraction() {
    let tmp = std::env::temp_dir().join("bergman-cli-sv");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "singvals",
        "--symbol",
        "scale(0.5)",
        "--trunc-n",
        "64",
        "--top-k",
        "8",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = read(&tmp.join("singvals"), "data.csv");
    let first = csv.lines().nth(1).unwrap();
    let s1: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((s1 - 1.0).abs() < 1e-9);
    let report = json(&tmp.join("singvals"), "report.json");
    assert_eq!(report["all_converged"], true);
}

#[test]
fn szego_produces_and_refuses() {
    let tmp = std::env::temp_dir().join("bergman-cli-szego");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "szego",
        "--symbol",
        "scale(0.5)",
        "--grid-m",
        "128",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = json(&tmp.join("szego"), "report.json");
    let gap = report["relative_gap"].as_f64().unwrap();
    assert!(gap.abs() < 0.02, "gap {gap}");

    // An inner-like symbol: a Blaschke product with many zeros crowding
    // the circle keeps |φ| near 1 on a thick set, so the radial integrals
    // diverge on many bins and no weight is produced.
    let zeros: Vec<String> = (0..48)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / 48.0;
            format!("0.995@{t:.6}")
        })
        .collect();
    let symbol = format!("blaschke(zeros={})", zeros.join(";"));
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "szego",
        "--symbol",
        &symbol,
        "--grid-m",
        "128",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn an_bound_contraction_branch() {
    let tmp = std::env::temp_dir().join("bergman-cli-an");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&[
        "an-bound",
        "--symbol",
        "scale(0.5)",
        "--n",
        "10",
        "--out",
        tmp.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = json(&tmp.join("an-bound"), "report.json");
    let bound = report["bound"].as_f64().unwrap();
    let expect = 10f64.sqrt() * (-5.0f64).exp();
    assert!((bound - expect).abs() < 1e-12, "bound {bound} vs {expect}");
}

#[test]
fn config_file_overrides_flags() {
    let tmp = std::env::temp_dir().join("bergman-cli-config");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg_path = tmp.join("cfg.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"symbol": "scale(0.5)", "trunc_n": 32, "out": "{}"}}"#,
            tmp.join("from-config").display()
        ),
    )
    .unwrap();
    let out = run(&[
        "hs",
        "--symbol",
        "lens",
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let manifest = json(&tmp.join("from-config").join("hs"), "manifest.json");
    assert_eq!(manifest["config"]["symbol"], "scale(0.5)");
    assert_eq!(manifest["config"]["trunc_n"], 32);
}

#[test]
fn counterexample_writes_certificate() {
    let tmp = std::env::temp_dir().join("bergman-cli-cex");
    let _ = std::fs::remove_dir_all(&tmp);
    let out = run(&["counterexample", "--out", tmp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = json(&tmp.join("counterexample"), "report.json");
    let mass = report["sigma_mass"].as_f64().unwrap();
    assert!((mass - 1.0 / (2.0f64).ln()).abs() < 1e-12);
    assert!(report["certificate"]["truncated_integrals"]
        .as_array()
        .unwrap()
        .len()
        >= 10);
}
