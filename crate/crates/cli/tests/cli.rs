use std::fs;
use std::process::{Command, Output};

use hubbard_poisson::{ElementRecord, LatticeModel, ModelConfig};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubbard-poisson")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_time_is_identity() {
    let o = run(&["propagate", "--chain", "3", "--gamma", "2", "--from", "100/010", "--to", "100/010", "--t", "0", "--ntraj", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec: ElementRecord = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((rec.mean.re, rec.mean.im), (1.0, 0.0));
    assert_eq!((rec.stderr.re, rec.stderr.im), (0.0, 0.0));
    assert_eq!(rec.n_hits, 500);
}

#[test]
fn json_round_trips() {
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--to", "01/00", "--t", "0.7", "--ntraj", "3000", "--seed", "5"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rec: ElementRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&rec).unwrap() + "\n", text);
    assert_eq!(rec.seed, 5);
    assert_eq!(rec.element.n_prime, "01/00");
}

#[test]
fn bad_bit_string_is_a_config_error() {
    let o = run(&["propagate", "--chain", "3", "--from", "10/00", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--from"), "{}", stderr(&o));
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--to", "1x/00", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--to"));
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--t", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--t"));
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--t", "1", "--rate-mult", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--rate-mult"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = run(&["propagate", "--config", "/nonexistent/model.json", "--from", "1/0", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn config_file_with_rates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    fs::write(
        &path,
        r#"{"num_sites": 2,
            "hoppings": [{"i": 1, "j": 2, "spin": "up", "eta": 1.0}],
            "interactions": [],
            "rates": [{"i": 1, "j": 2, "spin": "up", "rho": 2.0}]}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let o = run(&["compare", "--config", p, "--from", "10/00", "--t", "1", "--ntraj", "200000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    fs::write(&path, r#"{"num_sites": 2, "hoppings": [{"i": 1, "j": 3, "spin": "up", "eta": 1.0}]}"#).unwrap();
    let o = run(&["propagate", "--config", p, "--from", "10/00", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn row_mode_covers_sector() {
    let o = run(&["propagate", "--chain", "3", "--gamma", "1", "--from", "100/010", "--t", "1", "--ntraj", "20000"]);
    assert!(o.status.success());
    let recs: Vec<ElementRecord> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(recs.len() > 1);
    assert!(recs.iter().all(|r| r.element.n == "100/010"));
    assert_eq!(recs.iter().map(|r| r.n_hits).sum::<u64>(), 20000);

    let o = run(&["propagate", "--chain", "3", "--from", "100/010", "--t", "1", "--ntraj", "2000", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("n,n_prime,t,mode,mean_re,mean_im,stderr_re,stderr_im,n_trajectories,n_hits,seed\n"));
}

#[test]
fn exact_block() {
    let o = run(&["exact", "--chain", "2", "--eta", "0.5", "--from", "10/00", "--t", "2"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["labels"], serde_json::json!(["10/00", "01/00"]));
    let c = 1f64.cos();
    let s = 1f64.sin();
    assert!((v["re"][0][0].as_f64().unwrap() - c).abs() < 1e-12);
    assert!((v["im"][1][0].as_f64().unwrap() - s).abs() < 1e-12);
    assert!(v["re"][1][0].as_f64().unwrap().abs() < 1e-12);

    let o = run(&["exact", "--chain", "3", "--gamma", "3", "--from", "110/010", "--t", "0"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let dim = v["labels"].as_array().unwrap().len();
    assert_eq!(dim, 9);
    for r in 0..dim {
        for c in 0..dim {
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((v["re"][r][c].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn oversized_sector_is_a_runtime_error() {
    let o = run(&["exact", "--chain", "14", "--from", "11111110000000/11111110000000", "--t", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--max-dim"));
}

#[test]
fn compare_single_trajectory_is_well_formed() {
    let o = run(&["compare", "--chain", "2", "--from", "10/00", "--t", "1", "--ntraj", "1"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["n_trajectories"], 1);
}

#[test]
fn compare_flags_a_corrupted_model() {
    let dir = tempfile::tempdir().unwrap();
    let good = LatticeModel::chain(3, 1.0, 2.0).unwrap();
    let bad = LatticeModel::chain(3, 1.3, 2.0).unwrap();
    let write = |name: &str, m: &LatticeModel| {
        let p = dir.path().join(name);
        fs::write(&p, serde_json::to_string(&ModelConfig::from_model(m)).unwrap()).unwrap();
        p.to_str().unwrap().to_string()
    };
    let (g, b) = (write("good.json", &good), write("bad.json", &bad));
    let base = ["compare", "--config", g.as_str(), "--from", "100/010", "--t", "1", "--ntraj", "200000"];
    let o = run(&base);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&[&base[..], &["--oracle-config", b.as_str()]].concat());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn scan_rates_single_multiplier_matches_propagate() {
    let common = ["--chain", "2", "--from", "10/00", "--to", "01/00", "--t", "1", "--ntraj", "5000", "--seed", "3"];
    let o = run(&[&["scan-rates", "--multipliers", "1.0", "--format", "json"][..], &common[..]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = run(&[&["propagate"][..], &common[..]].concat());
    let rec: ElementRecord = serde_json::from_slice(&p.stdout).unwrap();
    assert_eq!(rows[0]["mean_im"].as_f64().unwrap(), rec.mean.im);
    assert_eq!(rows[0]["n_hits"].as_u64().unwrap(), rec.n_hits);
}

#[test]
fn scan_rates_default_multipliers_consistent() {
    let o = run(&["scan-rates", "--chain", "2", "--from", "10/00", "--to", "10/00", "--t", "1", "--ntraj", "100000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("multiplier,mean_re,mean_im,stderr_re,stderr_im,n_hits,n_trajectories"));
}

#[test]
fn scan_rates_rejects_bad_input() {
    let o = run(&["scan-rates", "--chain", "2", "--from", "10/00", "--to", "01/00", "--t", "1", "--multipliers", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["scan-rates", "--chain", "2", "--from", "10/00", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--to"));
}

#[test]
fn trace_lines_follow_weight() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let o = run(&[
        "propagate", "--chain", "3", "--from", "100/010", "--t", "2", "--ntraj", "10",
        "--trace", trace.to_str().unwrap(), "--trace-count", "3",
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&trace).unwrap();
    let jumps: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert!(!jumps.is_empty());
    for j in &jumps {
        assert_eq!(j.len(), 8);
        assert!(j[5] == "1" || j[5] == "-1");
        assert!(j[2].parse::<usize>().unwrap() < j[3].parse::<usize>().unwrap());
    }
    assert_eq!(text.lines().filter(|l| l.contains("ends in")).count(), 3);
}

#[test]
fn sector_mismatch_is_exact_zero() {
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--to", "11/00", "--t", "1", "--ntraj", "10"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("different sectors"));
    let rec: ElementRecord = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((rec.mean.re, rec.mean.im, rec.n_hits), (0.0, 0.0, 0));
}

#[test]
fn writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["propagate", "--chain", "2", "--from", "10/00", "--to", "10/00", "--t", "0.5", "--ntraj", "100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let rec: ElementRecord = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rec.mode, hubbard_poisson::TimeMode::RealTime);
}
