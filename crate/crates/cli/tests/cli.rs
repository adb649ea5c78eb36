use std::path::PathBuf;
use std::process::{Command, Output};

fn knnval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knnval")).args(args).output().expect("run knnval")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("knnval-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn field(record: &str, key: &str) -> f64 {
    record
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {record}"))
        .parse()
        .unwrap()
}

#[test]
fn suggest_params_matches_library() {
    let o = knnval(&["suggest-params", "--n", "50000", "--k", "3", "--r", "3"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("dependent m=774 w=774"), "{s}");
}

#[test]
fn generate_then_bound() {
    let data = scratch("gen.csv");
    let d = data.to_str().unwrap();
    assert!(knnval(&["generate", "--n", "1500", "--seed", "4", "--out", d]).status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 1500);

    for method in ["result-bound", "test-bound", "combination"] {
        let o = knnval(&["bound", "--data", d, "--method", method, "--r", "2", "--sequential"]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let s = stdout(&o);
        let rec = s.lines().next().unwrap();
        let est = field(rec, "estimate");
        let fin = field(rec, "final_bound");
        assert!(fin >= est, "{rec}");
        let reported = field(s.lines().nth(1).unwrap(), "reported_bound");
        assert!((0.0..=1.0).contains(&reported));
    }

    let o = knnval(&["bound", "--data", d, "--method", "test-bound", "--r", "2", "--direction", "lower"]);
    assert!(!o.status.success());
}

#[test]
fn parallel_and_sequential_agree() {
    let data = scratch("agree.csv");
    let d = data.to_str().unwrap();
    assert!(knnval(&["generate", "--n", "1200", "--seed", "9", "--out", d]).status.success());
    let a = knnval(&["bound", "--data", d, "--method", "test-bound", "--r", "3"]);
    let b = knnval(&["bound", "--data", d, "--method", "test-bound", "--r", "3", "--sequential"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn experiment_writes_csv_and_summary() {
    let out = scratch("exp.csv");
    let o = out.to_str().unwrap();
    let args = [
        "experiment", "--n", "1200", "--trials", "2", "--r-values", "1,2", "--m-fractions", "0.05,0.1",
        "--test-size", "2000", "--no-timing", "--out", o,
    ];
    let first = knnval(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), knnval::harness::CSV_HEADER);
    assert!(lines.count() > 0);
    let summary = std::fs::read_to_string(knnval::harness::summary_path(&out)).unwrap();
    assert!(summary.starts_with(knnval::harness::SUMMARY_HEADER));

    assert!(knnval(&args).status.success());
    assert_eq!(csv, std::fs::read_to_string(&out).unwrap());
}

#[test]
fn experiment_reads_toml() {
    let cfg = scratch("exp.toml");
    std::fs::write(&cfg, "n = 1000\ntrials = 1\nr_values = [2]\nm_fractions = [0.1]\ntest_size = 1000\ntiming = false\n").unwrap();
    let o = knnval(&["experiment", "--config", cfg.to_str().unwrap(), "--k", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let row = s.lines().nth(1).unwrap();
    assert!(row.starts_with("0,1000,1,2,"), "{row}");
}

#[test]
fn verify_identity_passes() {
    let o = knnval(&["verify-identity", "--domain-size", "120", "--r", "3", "--k", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn rejects_bad_input() {
    let o = knnval(&["bound", "--data", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = knnval(&["suggest-params", "--n", "1"]);
    assert!(!o.status.success());
}
