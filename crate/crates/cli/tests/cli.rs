use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    run_with_threads(dir, args, None)
}

fn run_with_threads(dir: &Path, args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_circleflow"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# circleflow-schema v1"));
    lines.skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn stat(jsonl: &Path, check: &str, name: &str) -> f64 {
    let text = fs::read_to_string(jsonl).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["check"] == check {
            for pair in v["statistics"].as_array().unwrap() {
                if pair[0] == name {
                    return pair[1].as_f64().unwrap();
                }
            }
        }
    }
    panic!("no statistic {name} for {check}");
}

#[test]
fn one_replicate_at_time_zero_is_the_vertex() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--replicates", "1", "--times", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let support = rows(&dir.path().join("support.csv"));
    assert_eq!(support.len(), 1);
    let row = &support[0];
    assert_eq!(row[0], "0");
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    let anchors = rows(&dir.path().join("anchors.csv"));
    assert_eq!(anchors[0][1], "0");
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let args = ["simulate", "--replicates", "20", "--horizon", "3", "--times", "0.5,1,2,3", "--m-plus", "beta:2"];
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([None, Some(1), Some(3)]) {
        assert!(run_with_threads(dir.path(), &args, threads).status.success());
    }
    for file in ["support.csv", "anchors.csv"] {
        let first = fs::read(dirs[0].path().join(file)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(first, fs::read(d.path().join(file)).unwrap(), "{file} differs");
        }
    }
}

#[test]
fn coalescing_laws_give_a_flow_of_maps() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["simulate", "--replicates", "30", "--horizon", "4", "--times", "1,2,3,4", "--m-plus", "coalescing", "--m-minus", "coalescing"],
    );
    assert!(out.status.success());
    let support = rows(&dir.path().join("support.csv"));
    assert_eq!(support.len(), 30 * 4);
    assert!(support.iter().all(|r| r[3].parse::<f64>().unwrap() == 1.0));
}

#[test]
fn flow_property_check_passes() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["verify", "--checks", "flow-property", "--replicates", "100", "--horizon", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(stat(&dir.path().join("verify.jsonl"), "flow-property", "max_distance") <= 1e-9);
    let summary = rows(&dir.path().join("verify_summary.csv"));
    assert!(summary.iter().any(|r| r[0] == "flow-property" && r[1] == "true"));
}

#[test]
fn hitting_and_u_laws_at_full_scale() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["verify", "--checks", "hitting-law", "--l", "1", "--dt", "1e-4", "--horizon", "4", "--replicates", "10000"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stat(&dir.path().join("verify.jsonl"), "hitting-law", "ks") <= 0.02);
    let out = run(
        dir.path(),
        &["verify", "--checks", "u-law", "--l", "1.5707963267948966", "--m-plus", "uniform", "--horizon", "0.5", "--replicates", "10000"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stat(&dir.path().join("verify.jsonl"), "u-law", "ks") <= 0.02);
}

#[test]
fn usage_and_configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let unknown = run(dir.path(), &["verify", "--checks", "flow-property,bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("bogus"));
    let reflected = run(dir.path(), &["verify", "--checks", "reflected", "--l", "2"]);
    assert_eq!(reflected.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&reflected.stderr).contains("l = pi"));
    let bad_law = run(dir.path(), &["simulate", "--m-plus", "beta:1,3"]);
    assert_eq!(bad_law.status.code(), Some(2));
    let no_checks = run(dir.path(), &["verify"]);
    assert_eq!(no_checks.status.code(), Some(2));
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("run.json");
    fs::write(&file, r#"{"replicates": 3, "times": [0.25], "dt": 0.01}"#).unwrap();
    let out = run(dir.path(), &["simulate", "--config", file.to_str().unwrap(), "--replicates", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let support = rows(&dir.path().join("support.csv"));
    assert!(support.iter().all(|r| r[0] == "0" || r[0] == "1"));
    assert!(support.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.25));
    fs::write(&file, "{\n  \"replicates\": 3,\n  \"dt\": \"fast\"\n}").unwrap();
    let broken = run(dir.path(), &["simulate", "--config", file.to_str().unwrap()]);
    assert_eq!(broken.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("line 3"));
}

#[test]
fn chaos_needs_the_wiener_solution() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["chaos", "--m-plus", "uniform"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Wiener"));
}

#[test]
fn chaos_table_for_constant_and_cosine() {
    let wiener = ["--m-plus", "dirac:0.5", "--m-minus", "dirac:0.5", "--l", "1.5707963267948966", "--horizon", "0.1"];
    let dir = TempDir::new().unwrap();
    let mut args = vec!["chaos", "--f", "const:1", "--replicates", "50", "--dt", "1e-3"];
    args.extend(wiener);
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let table = rows(&dir.path().join("chaos.csv"));
    assert_eq!(table.len(), 4);
    assert!(table.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));

    let mut args = vec!["chaos", "--f", "cos:1", "--replicates", "1000", "--dt", "1e-4"];
    args.extend(wiener);
    let out = run(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let errors: Vec<f64> = rows(&dir.path().join("chaos.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(errors[0] > 0.0);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
