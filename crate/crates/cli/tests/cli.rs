use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otgnn::graphdata::{split, Dataset, SplitSpec};
use serde_json::Value;
use tempfile::TempDir;

const ESOL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/esol.csv");

fn otgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otgnn")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// First `n` ESOL molecules as a JSONL dataset.
fn esol_head(dir: &Path, n: usize) -> PathBuf {
    let text = fs::read_to_string(ESOL).unwrap();
    let csv: String = text.lines().take(n + 1).map(|l| format!("{l}\n")).collect();
    let csv_path = dir.join("head.csv");
    fs::write(&csv_path, csv).unwrap();
    let out_path = dir.join("head.jsonl");
    let out = otgnn(&["convert", "--in", p(&csv_path), "--out", p(&out_path), "--task", "regression"]);
    assert!(out.status.success(), "{}", stderr(&out));
    out_path
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

const SMALL: &str = r#""n_layers": 2, "n_hidden": 16, "n_ffn_hidden": 8, "n_pc": 4, "pc_size": 3, "pc_hidden": 3, "batch_size": 4"#;

fn train(dir: &Path, data: &Path, config: &Path, out: &str, seeds: &[&str]) -> PathBuf {
    let out_dir = dir.join(out);
    let mut args = vec!["train", "--data", p(data), "--config", p(config), "--out", p(&out_dir)];
    args.extend_from_slice(seeds);
    let res = otgnn(&args);
    assert!(res.status.success(), "{}", stderr(&res));
    out_dir
}

#[test]
fn convert_counts_failures_and_keeps_going() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("in.csv");
    fs::write(&csv, "smiles,label\nCCO,1.5\nC1CC,2.0\nc1ccccc1,-0.5\nCC,oops\n").unwrap();
    let jsonl = dir.path().join("out.jsonl");
    let out = otgnn(&["convert", "--in", p(&csv), "--out", p(&jsonl), "--task", "regression"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("2 failed"), "{err}");
    assert!(err.contains("line 3") && err.contains("line 5"), "{err}");
    let ds = Dataset::load_jsonl(&jsonl).unwrap();
    assert_eq!(ds.len(), 2);
}

#[test]
fn convert_header_only_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("in.csv");
    fs::write(&csv, "smiles,label\n").unwrap();
    let jsonl = dir.path().join("out.jsonl");
    let out = otgnn(&["convert", "--in", p(&csv), "--out", p(&jsonl), "--task", "classification"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&jsonl).unwrap(), "");
}

#[test]
fn convert_full_esol() {
    let dir = TempDir::new().unwrap();
    let jsonl = dir.path().join("esol.jsonl");
    let out = otgnn(&["convert", "--in", ESOL, "--out", p(&jsonl), "--task", "regression"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(Dataset::load_jsonl(&jsonl).unwrap().len(), 1128);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("in.csv");
    fs::write(&csv, "smi,y\nCC,1\n").unwrap();
    let jsonl = dir.path().join("o.jsonl");
    let missing_cols = otgnn(&["convert", "--in", p(&csv), "--out", p(&jsonl), "--task", "regression"]);
    assert_eq!(missing_cols.status.code(), Some(1), "{}", stderr(&missing_cols));
    assert_eq!(otgnn(&["convert", "--bogus"]).status.code(), Some(1));
    assert_eq!(otgnn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(otgnn(&[]).status.code(), Some(1));
    let bad_task = otgnn(&["convert", "--in", p(&csv), "--out", p(&jsonl), "--task", "ranking"]);
    assert_eq!(bad_task.status.code(), Some(1));
    assert_eq!(otgnn(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = otgnn(&["convert", "--in", p(&missing), "--out", p(&dir.path().join("o")), "--task", "regression"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.csv"));
    let ck = dir.path().join("ck.json");
    fs::write(&ck, "{\"format_version\": 1}").unwrap();
    let data = esol_head(dir.path(), 3);
    let out = otgnn(&["evaluate", "--checkpoint", p(&ck), "--data", p(&data)]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn invalid_config_field_is_named() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 20);
    let out_dir = dir.path().join("run");
    for (json, field) in [
        (r#"{"n_epoch": 2}"#, "n_epoch"),
        (r#"{"lr": "fast"}"#, "lr"),
        (r#"{"batch_size": 0}"#, "batch_size"),
        (r#"{"head": "ProtoW-L2", "cost": "Dot"}"#, "cost"),
    ] {
        let cfg = write_config(dir.path(), "bad.json", json);
        let out = otgnn(&["train", "--data", p(&data), "--config", p(&cfg), "--out", p(&out_dir)]);
        assert_eq!(out.status.code(), Some(1), "{json}: {}", stderr(&out));
        assert!(stderr(&out).contains(field), "{json}: {}", stderr(&out));
    }
}

#[test]
fn train_writes_three_files_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 20);
    let cfg = write_config(
        dir.path(),
        "base.json",
        &format!(r#"{{"head": "BaselineSum", "n_epochs": 2, {SMALL}}}"#),
    );
    let a = train(dir.path(), &data, &cfg, "a", &["--split-seed", "3", "--run-seed", "7"]);
    for f in ["checkpoint.json", "history.jsonl", "metrics.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let metrics: Value = serde_json::from_str(&fs::read_to_string(a.join("metrics.json")).unwrap()).unwrap();
    let keys: Vec<&str> = metrics.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 5);
    for k in ["task", "metric_name", "value", "n_test", "config_digest"] {
        assert!(keys.contains(&k), "{k}");
    }
    assert_eq!(metrics["metric_name"], "rmse");
    assert_eq!(metrics["n_test"], 2);
    assert_eq!(fs::read_to_string(a.join("history.jsonl")).unwrap().lines().count(), 2);

    let b = train(dir.path(), &data, &cfg, "b", &["--split-seed", "3", "--run-seed", "7"]);
    assert_eq!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(b.join("checkpoint.json")).unwrap());
    assert_eq!(fs::read(a.join("history.jsonl")).unwrap(), fs::read(b.join("history.jsonl")).unwrap());
    let c = train(dir.path(), &data, &cfg, "c", &["--split-seed", "3", "--run-seed", "8"]);
    assert_ne!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(c.join("checkpoint.json")).unwrap());
}

#[test]
fn contrastive_history_has_finite_nc_terms() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 20);
    let cfg = write_config(
        dir.path(),
        "pw.json",
        &format!(r#"{{"head": "ProtoW-L2", "nc_coef": 0.1, "n_epochs": 2, {SMALL}}}"#),
    );
    let run = train(dir.path(), &data, &cfg, "run", &[]);
    let history = fs::read_to_string(run.join("history.jsonl")).unwrap();
    for line in history.lines() {
        let row: Value = serde_json::from_str(line).unwrap();
        assert!(row["nc_term"].as_f64().is_some_and(f64::is_finite), "{line}");
        for k in ["epoch", "train_loss", "valid_metric"] {
            assert!(row.get(k).is_some(), "{k}");
        }
    }
}

#[test]
fn evaluate_on_training_split_tracks_the_training_loss() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 24);
    let cfg = write_config(
        dir.path(),
        "mem.json",
        &format!(r#"{{"head": "BaselineSum", "n_epochs": 60, "lr": 0.003, "patience": 60, {SMALL}}}"#),
    );
    let run = train(dir.path(), &data, &cfg, "run", &[]);
    let ds = Dataset::load_jsonl(&data).unwrap();
    let (tr, _, _) = split(&ds, &SplitSpec::with_seed(0)).unwrap();
    let tr_path = dir.path().join("train.jsonl");
    tr.save_jsonl(&tr_path).unwrap();
    let out = otgnn(&["evaluate", "--checkpoint", p(&run.join("checkpoint.json")), "--data", p(&tr_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rmse = report["value"].as_f64().unwrap();

    // The history holds mean squared error on standardized labels.
    let ck: Value = serde_json::from_str(&fs::read_to_string(run.join("checkpoint.json")).unwrap()).unwrap();
    let std = ck["label_stats"]["std"].as_f64().unwrap();
    let best = ck["best_epoch"].as_u64().unwrap() as usize;
    let history = fs::read_to_string(run.join("history.jsonl")).unwrap();
    let row: Value = serde_json::from_str(history.lines().nth(best).unwrap()).unwrap();
    let train_rmse = row["train_loss"].as_f64().unwrap().sqrt() * std;
    assert!(rmse < 0.5 * std, "did not fit: {rmse} vs label std {std}");
    assert!((rmse - train_rmse).abs() < 0.5 * train_rmse.max(rmse), "{rmse} vs {train_rmse}");
    assert!(report["correlation"]["spearman"].is_number());
}

#[test]
fn embed_and_analyze() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 20);
    let cfg = write_config(
        dir.path(),
        "pw.json",
        r#"{"head": "ProtoW-L2", "n_epochs": 1, "n_layers": 2, "n_hidden": 16, "n_ffn_hidden": 8, "n_pc": 10, "pc_size": 3, "pc_hidden": 3}"#,
    );
    let run = train(dir.path(), &data, &cfg, "run", &[]);
    let ds = Dataset::load_jsonl(&data).unwrap();
    let three = ds.subset(&[0, 1, 2]);
    let three_path = dir.path().join("three.jsonl");
    three.save_jsonl(&three_path).unwrap();
    let emb = dir.path().join("emb.csv");
    let plans = dir.path().join("plans.json");
    let ck = run.join("checkpoint.json");
    let out = otgnn(&[
        "embed", "--checkpoint", p(&ck), "--data", p(&three_path), "--out", p(&emb), "--dump-plans", p(&plans),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(&emb).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 11);
    assert_eq!(&reader.headers().unwrap()[0], "id");
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 11));

    let dump: Value = serde_json::from_str(&fs::read_to_string(&plans).unwrap()).unwrap();
    let dump = dump.as_array().unwrap();
    assert_eq!(dump.len(), 3);
    for (entry, g) in dump.iter().zip(&three.graphs) {
        assert_eq!(entry["id"], g.id.as_str());
        let per_proto = entry["plans"].as_array().unwrap();
        assert_eq!(per_proto.len(), 10);
        for plan in per_proto {
            let rows = plan.as_array().unwrap();
            assert_eq!(rows.len(), g.node_count());
            let total: f64 = rows.iter().flat_map(|r| r.as_array().unwrap()).map(|x| x.as_f64().unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    let full = dir.path().join("full.csv");
    let out = otgnn(&["embed", "--checkpoint", p(&ck), "--data", p(&data), "--out", p(&full)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = otgnn(&["analyze", "--embeddings", p(&full), "--data", p(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let corr: Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["spearman", "pearson"] {
        let v = corr[k].as_f64().unwrap();
        assert!((-1.0..=1.0).contains(&v), "{k} = {v}");
    }
    let mismatched = otgnn(&["analyze", "--embeddings", p(&emb), "--data", p(&data)]);
    assert_eq!(mismatched.status.code(), Some(1));
}

#[test]
fn analyze_perfect_distance_gives_unit_rank_correlation() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 6);
    let ds = Dataset::load_jsonl(&data).unwrap();
    let mut csv = String::from("id,r_1,r_2\n");
    for g in &ds.graphs {
        csv.push_str(&format!("{},{},0\n", g.id, g.label.unwrap()));
    }
    let emb = dir.path().join("emb.csv");
    fs::write(&emb, csv).unwrap();
    let out = otgnn(&["analyze", "--embeddings", p(&emb), "--data", p(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let corr: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((corr["spearman"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((corr["pearson"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dump_plans_requires_a_transport_head() {
    let dir = TempDir::new().unwrap();
    let data = esol_head(dir.path(), 20);
    let cfg = write_config(
        dir.path(),
        "base.json",
        &format!(r#"{{"head": "BaselineSum", "n_epochs": 1, {SMALL}}}"#),
    );
    let run = train(dir.path(), &data, &cfg, "run", &[]);
    let out = otgnn(&[
        "embed",
        "--checkpoint",
        p(&run.join("checkpoint.json")),
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("e.csv")),
        "--dump-plans",
        p(&dir.path().join("p.json")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}
