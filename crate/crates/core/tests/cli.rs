use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_surrogate-nas");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMOKE: &str = "initial_samples = 20\niterations = 2\nbatch_size = 4\n";

fn header_hash(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let first = text.lines().find(|l| l.contains("config_hash:")).unwrap_or_else(|| panic!("{path:?} has no hash"));
    first.split("config_hash:").nth(1).unwrap().trim().trim_end_matches("-->").trim().to_string()
}

#[test]
fn smoke_search_writes_all_artifacts_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("run");
    let start = Instant::now();
    let o = run(&["search", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed() < Duration::from_secs(30));
    let hash = header_hash(&out.join("archive.csv"));
    for f in ["archive.csv", "metrics.csv", "front.csv", "front.svg", "surrogates.csv", "config.toml"] {
        assert_eq!(header_hash(&out.join(f)), hash, "{f}");
    }
    let archive = std::fs::read_to_string(out.join("archive.csv")).unwrap();
    assert_eq!(archive.lines().count(), 2 + 28);
    assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 2 + 3);
}

#[test]
fn usage_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["search", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["search", "--config", "/nonexistent.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "usage");
    let bad = write_config(dir.path(), "initial_samples = 5\n");
    assert_eq!(run(&["search", "--config", &bad, "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["no-such-verb"]).status.code(), Some(2));
}

#[test]
fn existing_output_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert!(run(&["search", "--config", &cfg, "--out", out]).status.success());
    let before = std::fs::read(Path::new(out).join("archive.csv")).unwrap();
    let o = run(&["search", "--config", &cfg, "--out", out, "--seed", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read(Path::new(out).join("archive.csv")).unwrap(), before);
    assert_eq!(run(&["resume", "--run", out]).status.code(), Some(2));
    assert!(run(&["search", "--config", &cfg, "--out", out, "--seed", "9", "--force"]).status.success());
    assert_ne!(std::fs::read(Path::new(out).join("archive.csv")).unwrap(), before);
}

#[test]
fn corrupt_or_missing_state_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let out = dir.path().join("run");
    assert!(run(&["search", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let ckpt = out.join("checkpoint.json");
    let bytes = std::fs::read(&ckpt).unwrap();
    std::fs::write(&ckpt, &bytes[..bytes.len() / 2]).unwrap();
    let o = run(&["resume", "--run", out.to_str().unwrap(), "--force"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["analyze", "--run", dir.path().join("absent").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn evaluator_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMOKE}\n[evaluator]\nkind = \"external\"\ncommand = [\"{BIN}\", \"eval-stub\", \"--constant\", \"1.5\"]\n"),
    );
    let o = run(&["search", "--config", &cfg, "--out", dir.path().join("run").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn external_run_matches_in_process_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMOKE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["search", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["search", "--config", &cfg, "--out", b.to_str().unwrap(), "--evaluator", "external"]).status.success());
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("archive.csv"))
            .unwrap()
            .lines()
            .skip(2)
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn analyze_emits_tables_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "space = \"reduced\"\ninitial_samples = 40\niterations = 3\nbatch_size = 8\n");
    let out = dir.path().join("run");
    assert!(run(&["search", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let report = dir.path().join("report");
    let o = run(&["analyze", "--run", out.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["front.csv", "frequencies.csv", "frequencies.svg", "correlations.csv"] {
        assert!(report.join(f).exists(), "{f}");
    }
    let freq = std::fs::read_to_string(report.join("frequencies.csv")).unwrap();
    let rows: Vec<&str> = freq.lines().skip(2).collect();
    assert_eq!(rows.len(), 46);
    for row in rows {
        let sum: f64 = row.split(',').skip(2).filter(|c| !c.is_empty()).map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9, "{row}");
    }
    let corr = std::fs::read_to_string(report.join("correlations.csv")).unwrap();
    let m: Vec<Vec<f64>> =
        corr.lines().skip(2).map(|l| l.split(',').skip(1).map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(m.len(), 5);
    for i in 0..5 {
        assert!((m[i][i] - 1.0).abs() < 1e-12);
        for j in 0..5 {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
    // accuracy rises with every complexity-increasing gene on the smooth landscape
    assert!(m[0][1] > 0.5, "corr(accuracy, madds) = {}", m[0][1]);
}

#[test]
fn surrogate_study_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[surrogate]\nfolds = 3\n[surrogate.mlp]\nepochs = 30\n");
    let out = dir.path().join("study");
    let o = run(&[
        "surrogate-study", "--config", &cfg, "--out", out.to_str().unwrap(), "--trials", "2", "--pool", "300",
        "--sizes", "40,60,80,100,120",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("surrogate_study.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 5 * 5);
    assert!(out.join("surrogate_study.svg").exists());
}

#[test]
fn scalar_search_and_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("space = \"reduced\"\n{SMOKE}"));
    let src = dir.path().join("src");
    assert!(run(&["search", "--config", &cfg, "--out", src.to_str().unwrap()]).status.success());

    let scalar = dir.path().join("scalar");
    let o = run(&["search-scalar", "--config", &cfg, "--out", scalar.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let front = std::fs::read_to_string(scalar.join("front.csv")).unwrap();
    assert_eq!(front.lines().count(), 3);
    assert!(front.lines().nth(1).unwrap().ends_with("scalarized"));

    let moved = dir.path().join("moved");
    let o = run(&["transfer", "--from", src.to_str().unwrap(), "--config", &cfg, "--out", moved.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(moved.join("distribution.json").exists() && moved.join("archive.csv").exists());
}
