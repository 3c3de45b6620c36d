use std::path::Path;
use std::process::Command;

use brlab_core::correlations::{psd_to_quantum_model, normalize_psd};
use brlab_core::decomp::Decomposition;
use brlab_core::families::w_eps_ti_nonneg;
use brlab_core::random::{random_psd, random_unconstrained};
use brlab_core::wsc::{cyclic_action, make_cycle, make_line};
use brlab_core::GroupAction;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn brlab(args: &[&str], threads: &str) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_brlab")).args(args).env("BRLAB_THREADS", threads).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(stdout.trim()).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v)
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn write_json(p: &Path, v: &impl serde::Serialize) {
    std::fs::write(p, serde_json::to_string(v).unwrap()).unwrap();
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn family_study_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = brlab(&["family-study", "--family", "w-psd", "--n", "5", "--eps", "1e-1..1e-4", "--out", path(dir.path())], "2");
    assert_eq!(code, 0, "{v}");
    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# brlab ") && lines[0].contains("config-hash="));
    assert_eq!(lines[1], "epsilon,error,included_in_fit");
    assert_eq!(lines.len() - 2, 13);
    assert!(!csv.contains('\r'));
    let slope = v["summary"]["slope"].as_f64().unwrap();
    assert!((slope - 1.25).abs() < 0.05);
    let study: Value = serde_json::from_slice(&read(&dir.path().join("study.json"))).unwrap();
    assert_eq!(study["version"], brlab_core::VERSION);
    assert_eq!(study["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn reference_lists_w5() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = brlab(&["reference", "--tensor", "W5", "--out", path(dir.path())], "1");
    assert_eq!(code, 0);
    let values = v["summary"]["values"].as_array().unwrap();
    let get = |q: &str| values.iter().find(|x| x["quantity"] == q).unwrap()["value"].as_u64().unwrap();
    assert_eq!(get("rank"), 5);
    assert_eq!(get("brank"), 2);
}

#[test]
fn stochastic_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (code, v) = brlab(&["ranks", "--tensor", "W4", "--r", "2,3,4", "--seed", "7", "--starts", "4", "--iters", "300", "--out", path(dir.path())], "3");
        assert_eq!(code, 0, "{v}");
        let (code, v) = brlab(&["separation", "--n", "3,4", "--seed", "7", "--starts", "3", "--iters", "200", "--out", path(&dir.path().join("sep"))], "3");
        assert_eq!(code, 0, "{v}");
    }
    assert_eq!(read(&a.path().join("report.json")), read(&b.path().join("report.json")));
    assert_eq!(read(&a.path().join("sep/report.json")), read(&b.path().join("sep/report.json")));
}

#[test]
fn seed_is_mandatory_for_stochastic_runs() {
    let (code, v) = brlab(&["ranks", "--tensor", "W3"], "1");
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "invalid_config");
}

#[test]
fn invalid_povm_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("povm.json");
    // elements diag(1,0) and diag(0.5,0.5): the sum is diag(1.5, 0.5)
    let povm = serde_json::json!({ "povm": { "shape": [2, 2, 2], "re": [1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5], "im": vec![0.0; 8] } });
    write_json(&file, &povm);
    let (code, v) = brlab(&["validate-model", "--input", path(&file), "--out", path(dir.path())], "1");
    assert_ne!(code, 0);
    assert_eq!(v["error"]["kind"], "validation_failed");
    assert!((v["error"]["deviation"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let report: Value = serde_json::from_slice(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["result"]["valid"], false);
}

#[test]
fn model_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let action = cyclic_action(&make_cycle(3).unwrap()).unwrap();
    let dec = random_psd(&action, 2, 2, &mut rng).unwrap();
    let dec_file = dir.path().join("dec.json");
    write_json(&dec_file, &Decomposition::Psd(dec.clone()));
    let m = dir.path().join("m");
    let (code, v) = brlab(&["to-model", "--input", path(&dec_file), "--out", path(&m)], "1");
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["summary"]["valid"], true);
    let model_file = m.join("model.json");
    let (code, _) = brlab(&["validate-model", "--input", path(&model_file), "--out", path(&m)], "1");
    assert_eq!(code, 0);
    let (code, _) = brlab(&["eval-model", "--input", path(&model_file), "--out", path(&m)], "1");
    assert_eq!(code, 0);
    let report: Value = serde_json::from_slice(&read(&m.join("report.json"))).unwrap();
    let p: brlab_core::DenseTensor = serde_json::from_value(report["result"]["distribution"].clone()).unwrap();
    let expected = brlab_core::correlations::eval_quantum_model(&psd_to_quantum_model(&normalize_psd(&dec).unwrap()).unwrap()).unwrap();
    assert!(p.max_abs_diff(&expected).unwrap() < 1e-12);
    let (code, v) = brlab(&["from-model", "--input", path(&model_file), "--out", path(&m)], "1");
    assert_eq!(code, 0);
    assert_eq!(v["summary"]["kind"], "psd");
    assert_eq!(v["summary"]["r"], 2);
}

#[test]
fn tree_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let action = GroupAction::trivial(&make_line(4).unwrap());
    let files: Vec<_> = (0..3)
        .map(|i| {
            let f = dir.path().join(format!("e{i}.json"));
            write_json(&f, &Decomposition::Unconstrained(random_unconstrained(&action, 2, 2, &mut rng).unwrap()));
            f
        })
        .collect();
    let (code, v) = brlab(&["tree", "normalize", "--input", path(&files[0]), "--out", path(dir.path())], "1");
    assert_eq!(code, 0, "{v}");
    assert!(v["summary"]["isometry_deviation"].as_f64().unwrap() < 1e-10);
    let mut args = vec!["tree", "closure-check"];
    for f in &files {
        args.extend(["--input", path(f)]);
    }
    args.extend(["--out", path(dir.path())]);
    let (code, v) = brlab(&args, "1");
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["summary"]["bounded"], true);
    assert!(dir.path().join("limit.json").exists());
}

#[test]
fn closure_check_on_cycle_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let eps = ["1e-1", "1e-2", "1e-3", "1e-4"];
    let files: Vec<_> = eps
        .iter()
        .map(|e| {
            let f = dir.path().join(format!("ti{e}.json"));
            write_json(&f, &Decomposition::Nonnegative(w_eps_ti_nonneg(5, e.parse().unwrap(), 2).unwrap()));
            f
        })
        .collect();
    let mut args = vec!["tree", "closure-check"];
    for f in &files {
        args.extend(["--input", path(f)]);
    }
    args.extend(["--out", path(dir.path())]);
    let (code, v) = brlab(&args, "1");
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "not_tree");
    let params = eps.join(",");
    args.extend(["--force", "--params", &params]);
    let (code, v) = brlab(&args, "1");
    assert_eq!(code, 0, "{v}");
    assert!((v["summary"]["growth_slope"].as_f64().unwrap() + 0.25).abs() < 0.03);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"family": "w-unconstrained", "n": 3, "eps": "1e-1..1e-3:6"}"#).unwrap();
    let (code, v) = brlab(&["family-study", "--config", path(&cfg), "--n", "4", "--out", path(dir.path())], "1");
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["summary"]["n"], 4);
    assert_eq!(v["summary"]["points"], 6);
    std::fs::write(&cfg, r#"{"family": "w-psd", "bogus": 1}"#).unwrap();
    let (code, _) = brlab(&["family-study", "--config", path(&cfg)], "1");
    assert_eq!(code, 2);
}

#[test]
fn family_study_rejects_other_local_dimensions() {
    let (code, v) = brlab(&["family-study", "--family", "w-psd", "--n", "4", "--d", "3"], "1");
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "invalid_config");
}
