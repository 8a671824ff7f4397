use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn irsloc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsloc")).args(args).arg("--out").arg(out).env_remove("IRSLOC_THREADS").output().unwrap()
}

#[test]
fn no_args_prints_usage_and_fails() {
    let o = Command::new(env!("CARGO_BIN_EXE_irsloc")).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_inputs_fail_with_one_diagnostic_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsloc(&["nonsense"], dir.path());
    assert!(!o.status.success());

    let o = irsloc(&["locate", "--scenario", "/no/such/file.json"], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: bad scenario file"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"room\": 3}").unwrap();
    assert!(!irsloc(&["locate", "--scenario", bad.to_str().unwrap()], dir.path()).status.success());

    let file = dir.path().join("file");
    fs::write(&file, "").unwrap();
    let o = irsloc(&["codebook"], &file);
    assert!(!o.status.success());

    assert!(!irsloc(&["bench", "--baseline", "best"], dir.path()).status.success());
}

#[test]
fn locate_finds_the_reference_person() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsloc(&["locate"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    let (x, y) = (v["x"].as_f64().unwrap(), v["y"].as_f64().unwrap());
    assert!((x - 3.5).hypot(y - 3.5) < 0.3, "({x}, {y})");
    for k in 0..3 {
        assert!(dir.path().join(format!("heatmap_level{k}.csv")).exists());
    }
}

#[test]
fn bench_all_writes_a_table_per_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsloc(&["bench", "--sweep", "power", "--baseline", "all", "--values", "5,15", "--trials", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for b in ["proposed", "without_irs", "random_irs", "one_rx_antenna", "no_cancellation"] {
        let text = fs::read_to_string(dir.path().join(format!("rmse_{b}.csv"))).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "sweep_value,mean_error_m,trial_count");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("5,") && lines[2].starts_with("15,"));
    }
}

#[test]
fn thread_flag_beats_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: &str, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_irsloc"));
        c.args(["codebook", "--out"]).arg(dir.path()).env("IRSLOC_THREADS", env);
        if let Some(f) = flag {
            c.args(["--threads", f]);
        }
        c.output().unwrap().status.success()
    };
    assert!(!run("0", None));
    assert!(run("0", Some("2")));
    assert!(run("2", None));
}

#[test]
fn json_format_switches_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = irsloc(&["simulate", "--frames", "2", "--format", "json"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("snapshots.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(!dir.path().join("snapshots.csv").exists());
}
