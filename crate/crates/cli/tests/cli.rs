use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regretlab"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
    "schema": "regretlab/scenario/v1",
    "models": [{"rule": {"kind": "anticipatory"}}, {"rule": {"kind": "rd"}}],
    "signal": {"type": "analytic", "offset": [0.0, 0.0],
               "terms": [{"amplitude": [1.0, -1.0], "omega": 1.0, "waveform": "sin"}]},
    "horizon": 5.0,
    "outputs": {"trajectory": true, "gaps": true, "regret": true, "plot": true}
}"#;

#[test]
fn compare_writes_consistent_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&["compare", "--config", &write_config(&dir, SMALL), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert!(header.contains(&"anticipatory.cum_reward"));
    assert!(header.contains(&"rd.avg_reward"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 501);
    assert!((rows.last().unwrap()[0] - 5.0).abs() < 1e-12);

    let gaps = std::fs::read_to_string(out.join("gaps.csv")).unwrap();
    let gap_header: Vec<&str> = gaps.lines().next().unwrap().split(',').collect();
    let gap_col = gap_header.iter().position(|h| *h == "rd-anticipatory").expect("gap column");
    let a = header.iter().position(|h| *h == "anticipatory.cum_reward").unwrap();
    let b = header.iter().position(|h| *h == "rd.cum_reward").unwrap();
    for (row, line) in rows.iter().zip(gaps.lines().skip(1)) {
        let g: f64 = line.split(',').nth(gap_col).unwrap().parse().unwrap();
        assert!((g - (row[b] - row[a])).abs() < 1e-12);
    }

    let svg = std::fs::read_to_string(out.join("avg_reward.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let regret: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("regret.json")).unwrap()).unwrap();
    assert!(regret.is_object() || regret.is_array());
}

#[test]
fn stride_keeps_the_final_row() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let text = SMALL.replace("\"horizon\": 5.0", "\"horizon\": 5.0, \"stride\": 7");
    let o = run(&["simulate", "--config", &write_config(&dir, &text), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let last: f64 = traj.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last - 5.0).abs() < 1e-12);
    assert_eq!(traj.lines().count(), 1 + 500 / 7 + 1 + 1);
}

#[test]
fn shipped_scenarios_run() {
    let dir = TempDir::new().unwrap();
    for (mode, file) in [("compare", "compare.json"), ("sweep-freq", "sweep.json")] {
        let out = dir.path().join(mode);
        let o = run(&[mode, "--config", scenario(file).to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
    }
    let sweep = std::fs::read_to_string(dir.path().join("sweep-freq/freq_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "phi,gain,j,t1_cos_phi");
    assert_eq!(sweep.lines().count(), 1 + 7 * 5);
    for line in sweep.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[2] - v[3]).abs() < 1e-8);
    }
}

#[test]
fn config_errors_exit_with_one_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (SMALL.replace("[{\"rule\": {\"kind\": \"anticipatory\"}}, {\"rule\": {\"kind\": \"rd\"}}]", "[]"), "models"),
        (SMALL.replace("5.0", "-5.0"), "horizon"),
        (SMALL.replace("\"kind\": \"rd\"", "\"kind\": \"exrd\", \"lambda\": -1.0"), "models[1]"),
        (SMALL.replace("v1", "v9"), "schema"),
        ("{ not json".to_string(), "line 1"),
    ];
    for (text, field) in cases {
        let o = run(&["simulate", "--config", &write_config(&dir, &text), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{field}");
        assert!(stderr(&o).contains(field), "{field}: {}", stderr(&o));
    }
    let o = run(&["simulate", "--config", "/nonexistent/config.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("{\"kind\": \"rd\"}", "{\"kind\": \"exrd\", \"lambda\": 1000.0}");
    let o = run(&["simulate", "--config", &write_config(&dir, &text), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("exrd"));
}

#[test]
fn unknown_names_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let o = run(&["repro", "example9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("example1"));
    let o = run(&["verify", "no_such_suite"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_on_a_small_suite() {
    let o = run(&["verify", "lemma1", "--seed", "3", "--trials", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn repro_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["repro", "fig6", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}
