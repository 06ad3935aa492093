//! Batch runner and command-line interface.

use std::path::Path;
use std::process::Command;

use apfwf::batch::{read_rows, run_batch, BatchPlan, SeedRange};
use apfwf::sim::{Layout, Method};

fn apfwf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_apfwf"))
}

fn csv_table(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut out = vec![r.headers().unwrap().iter().map(String::from).collect()];
    out.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    out
}

fn parse(cell: &str) -> Option<f64> {
    (!cell.is_empty()).then(|| cell.parse().unwrap())
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt());
    (Some(m), sd)
}

fn assert_close(a: Option<f64>, b: Option<f64>) {
    match (a, b) {
        (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
        (None, None) => {}
        other => panic!("mismatch {other:?}"),
    }
}

#[test]
fn swap_batch_through_cli_and_library() {
    let dir = tempfile::tempdir().unwrap();
    let cli_out = dir.path().join("cli");
    let status = apfwf()
        .args(["run", "--layout", "swap", "--method", "apf,apf-rs", "--robots", "6", "--seeds", "0..50", "--workers", "4", "--out"])
        .arg(&cli_out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let metrics = csv_table(&cli_out.join("metrics.csv"));
    assert_eq!(metrics[0], ["env", "method", "N", "seed", "success", "arrival_rate", "makespan", "mean_timestep", "collisions"]);
    assert_eq!(metrics.len(), 101);
    let summary = csv_table(&cli_out.join("summary.csv"));
    assert_eq!(summary.len(), 3);

    // a library rerun with one worker writes byte-identical files
    let lib_out = dir.path().join("lib");
    let plan = BatchPlan::new(vec![Layout::Swap], vec![6], SeedRange(0..50), vec![Method::Apf, Method::ApfRs], &lib_out);
    let res = run_batch(&plan).unwrap();
    for f in ["metrics.csv", "summary.csv"] {
        assert_eq!(std::fs::read(cli_out.join(f)).unwrap(), std::fs::read(lib_out.join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_rows(&res.metrics_path).unwrap(), res.rows);

    // independent recomputation of the summary
    for s in &summary[1..] {
        let group: Vec<&Vec<String>> = metrics[1..].iter().filter(|r| r[0] == s[0] && r[1] == s[1] && r[2] == s[2]).collect();
        assert_eq!(group.len(), 50);
        assert_eq!(s[3], "50");
        let success = group.iter().filter(|r| r[4] == "true").count() as f64 / 50.0;
        assert!((parse(&s[4]).unwrap() - success).abs() < 1e-12);
        let arrival = group.iter().map(|r| parse(&r[5]).unwrap()).sum::<f64>() / 50.0;
        assert!((parse(&s[5]).unwrap() - arrival).abs() < 1e-9);
        let spans: Vec<f64> = group.iter().filter(|r| r[4] == "true").map(|r| parse(&r[6]).unwrap()).collect();
        let (m, sd) = mean_sd(&spans);
        assert_close(parse(&s[6]), m);
        assert_close(parse(&s[7]), sd);
        let steps: Vec<f64> = group.iter().filter_map(|r| parse(&r[7])).collect();
        let (m, sd) = mean_sd(&steps);
        assert_close(parse(&s[8]), m);
        assert_close(parse(&s[9]), sd);
    }

    // summarize reproduces summary.csv
    let table = dir.path().join("table.csv");
    let st = apfwf().args(["summarize", "--in"]).arg(&cli_out).arg("--out").arg(&table).status().unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read(&table).unwrap(), std::fs::read(cli_out.join("summary.csv")).unwrap());
}

#[test]
fn replay_prints_events() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let st = apfwf()
        .args(["run", "--layout", "flat", "--method", "apf-rs", "--robots", "2", "--seeds", "3", "--logs", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success());
    let log = out.join("logs").join("flat_apf-rs_N2_s3.jsonl");
    let replay = apfwf().arg("replay").arg("--log").arg(&log).output().unwrap();
    assert!(replay.status.success());
    let text = String::from_utf8(replay.stdout).unwrap();
    assert!(text.contains("records, last step"), "{text}");
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let code = |args: &[&str]| apfwf().args(args).arg("--out").arg(&out).status().unwrap().code();
    // learned switch without a model
    assert_eq!(code(&["run", "--layout", "swap", "--method", "apf-ls", "--robots", "2", "--seeds", "0..2"]), Some(2));
    // zero robots
    assert_eq!(code(&["run", "--layout", "swap", "--method", "apf", "--robots", "0", "--seeds", "0..2"]), Some(2));
    // empty seed range
    assert_eq!(code(&["run", "--layout", "swap", "--method", "apf", "--robots", "2", "--seeds", "4..4"]), Some(2));
    // unparseable method
    assert_eq!(code(&["run", "--layout", "swap", "--method", "bug", "--robots", "2", "--seeds", "0..2"]), Some(2));
    assert!(!out.exists(), "no output is written for a rejected plan");

    let missing = apfwf().args(["summarize", "--in"]).arg(dir.path()).arg("--out").arg(dir.path().join("t.csv")).status().unwrap();
    assert_eq!(missing.code(), Some(2));
    let replay = apfwf().args(["replay", "--log"]).arg(dir.path().join("none.jsonl")).status().unwrap();
    assert_eq!(replay.code(), Some(1));
}
