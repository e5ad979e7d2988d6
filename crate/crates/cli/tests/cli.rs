use std::path::PathBuf;
use std::process::{Command, Output};

use coinfactor::synthetic::{write_fixture, FixtureSpec};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = FixtureSpec::default();
        write_fixture(&spec, 5, dir.path().join("data")).unwrap();
        let config = format!(
            r#"[data]
dir = "data"
target = "{}"
candidates = {:?}

[selection]
k = 2

[model]
architecture = "gru"
hidden_size = 4
epochs = 3
seed = 3

[output]
dir = "out"
"#,
            spec.target,
            spec.candidate_tickers()
        );
        std::fs::write(dir.path().join("coinfactor.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_coinfactor"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn lines_starting(text: &str, prefix: &str) -> usize {
    text.lines().filter(|l| l.starts_with(prefix)).count()
}

#[test]
fn ingest_writes_aligned_panel() {
    let ws = Workspace::new();
    let out = ws.ok(&["ingest"]);
    assert!(out.starts_with("ticker\trole\tdays"));
    assert_eq!(lines_starting(&out, "TARGET\ttarget\t120"), 1);
    let aligned = std::fs::read_to_string(ws.path("out/aligned.csv")).unwrap();
    assert_eq!(aligned.lines().count(), 121);
}

#[test]
fn test_reports_every_ticker() {
    let ws = Workspace::new();
    let out = ws.ok(&["test"]);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().find(|l| l.starts_with("COINT_A")).unwrap().ends_with("\tyes"));
}

#[test]
fn select_prints_ranking_and_writes_json() {
    let ws = Workspace::new();
    let out = ws.ok(&["select"]);
    assert!(out.contains("COINT_A") && out.contains("WALK_B"));
    let json = std::fs::read_to_string(ws.path("out/selection.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["chosen"].as_array().unwrap().len(), 2);
}

#[test]
fn train_honours_cells_seed_and_out() {
    let ws = Workspace::new();
    let out = ws.ok(&["train", "--cells", "All+RMSE+LSTM", "--seed", "9", "--out", "elsewhere"]);
    assert!(out.starts_with("epoch\tloss\n"));
    assert_eq!(out.lines().count(), 4);
    let model = std::fs::read_to_string(ws.path("elsewhere/all_rmse_lstm/model.txt")).unwrap();
    assert!(model.starts_with("coinfactor-forecaster 1"));
    assert!(model.contains("seed 9"), "{model}");
}

#[test]
fn backtest_mode_flag_sets_headline_mode() {
    let ws = Workspace::new();
    let out = ws.ok(&["backtest", "--mode", "literal"]);
    assert!(out.starts_with("cell\tCointegration+Quantile+GRU\nmode\tliteral\n"), "{out}");
    let dir = ws.path("out/cointegration_quantile_gru");
    for f in coinfactor::experiment::ARTIFACT_FILES {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn grid_runs_requested_cells() {
    let ws = Workspace::new();
    let out = ws.ok(&["grid", "--cells", "*+RMSE+GRU"]);
    assert_eq!(lines_starting(&out, "method\t"), 1);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#') && !l.starts_with("method\t")).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split('\t').nth(4) == Some("ok")));
    for f in ["grid.tsv", "grid.json", "grid.txt"] {
        assert!(ws.path("out").join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(ws.path("out/grid.tsv")).unwrap(), out);
}

#[test]
fn single_cell_commands_reject_several_cells() {
    let ws = Workspace::new();
    let out = ws.run(&["train", "--cells", "all"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("runs one cell"));
}

#[test]
fn missing_config_is_reported() {
    let ws = Workspace::new();
    let out = ws.run(&["--config", "nope.toml", "ingest"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: loading nope.toml"), "{err}");
}

#[test]
fn missing_data_names_stage() {
    let ws = Workspace::new();
    std::fs::remove_file(ws.path("data/WALK_A.csv")).unwrap();
    let out = ws.run(&["select"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest stage") && err.contains("WALK_A.csv"), "{err}");
}

