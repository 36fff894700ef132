//! Binary-level tests: subcommand wiring, exit codes, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flashvol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flashvol"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.kv");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn help_lists_subcommands() {
    let out = flashvol(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["simulate", "ingest", "bars", "jumps", "tails", "pipeline"] {
        assert!(text.contains(sub), "help is missing `{sub}`");
    }
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "n_days = 2\nseed = 99\n");
    let run = |out: &str| {
        let out_dir = tmp.path().join(out);
        let res = flashvol(&["simulate", "--spec", &spec, "--out-dir", out_dir.to_str().unwrap()]);
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
        dir_bytes(&out_dir)
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.len(), 5); // 2 message + 2 orderbook + ledger.json
    assert_eq!(a, b, "fixed-seed runs are not byte-identical");
}

#[test]
fn pipeline_over_simulated_files_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "n_days = 12\nseed = 7\njump_rate = 3\n");
    let data = tmp.path().join("data");
    assert!(flashvol(&["simulate", "--spec", &spec, "--out-dir", data.to_str().unwrap()])
        .status
        .success());

    let pattern = format!("{}/synth_*_message.csv", data.display());
    let out_dir = tmp.path().join("out");
    let out = flashvol(&[
        "pipeline",
        "--messages",
        &pattern,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--periodicity",
        "off",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // stdout carries the report as JSON
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).expect("report JSON on stdout");
    assert_eq!(report["days"], 12);
    assert_eq!(report["bars_processed"], 12 * 390);
    assert!(report["fits"]["nonjump"].is_object());
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("bars.csv").exists());
    assert!(out_dir.join("jumps.csv").exists());
}

#[test]
fn stagewise_cli_matches_pipeline_report() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "n_days = 12\nseed = 21\njump_rate = 4\n");
    let data = tmp.path().join("data");
    assert!(flashvol(&["simulate", "--spec", &spec, "--out-dir", data.to_str().unwrap()])
        .status
        .success());
    let pattern = format!("{}/synth_*_message.csv", data.display());

    let one = tmp.path().join("one");
    let out = flashvol(&[
        "pipeline", "--messages", &pattern, "--out-dir", one.to_str().unwrap(),
        "--periodicity", "intraday",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let staged = tmp.path().join("staged");
    assert!(flashvol(&["bars", "--messages", &pattern, "--out-dir", staged.to_str().unwrap()])
        .status
        .success());
    let bars_csv = staged.join("bars.csv");
    assert!(flashvol(&[
        "jumps", "--bars", bars_csv.to_str().unwrap(), "--out-dir", staged.to_str().unwrap(),
        "--periodicity", "intraday",
    ])
    .status
    .success());
    assert!(flashvol(&[
        "tails",
        "--bars", bars_csv.to_str().unwrap(),
        "--jumps", staged.join("jumps.csv").to_str().unwrap(),
        "--out-dir", staged.to_str().unwrap(),
    ])
    .status
    .success());

    let strip = |path: &Path| -> String {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("generated_at"))
            .collect()
    };
    assert_eq!(strip(&one.join("report.json")), strip(&staged.join("report.json")));
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "n_days = 6\nseed = 13\njump_rate = 2\n");
    let config_path = tmp.path().join("pipeline.kv");
    fs::write(
        &config_path,
        format!("synthetic = {spec}\nperiodicity = off\nq_lo = 0.5\nq_hi = 0.9\n"),
    )
    .unwrap();

    // config file alone
    let out_a = tmp.path().join("a");
    let res = flashvol(&[
        "pipeline", "--config", config_path.to_str().unwrap(), "--out-dir", out_a.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report_a: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report_a["q_lo"], 0.5);

    // an explicit flag wins over the file
    let out_b = tmp.path().join("b");
    let res = flashvol(&[
        "pipeline", "--config", config_path.to_str().unwrap(), "--out-dir", out_b.to_str().unwrap(),
        "--q-lo", "0.6",
    ]);
    assert!(res.status.success());
    let report_b: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report_b["q_lo"], 0.6);
}

#[test]
fn exit_code_2_on_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    // no input source at all
    let out = flashvol(&["pipeline", "--out-dir", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // invalid quantile window
    let spec = write_spec(tmp.path(), "n_days = 2\nseed = 1\n");
    let out = flashvol(&[
        "pipeline", "--synthetic", &spec,
        "--out-dir", tmp.path().join("y").to_str().unwrap(),
        "--q-lo", "0.9", "--q-hi", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // unknown periodicity mode
    let out = flashvol(&[
        "pipeline", "--synthetic", &spec,
        "--out-dir", tmp.path().join("z").to_str().unwrap(),
        "--periodicity", "hourly",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_code_3_on_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let msg = tmp.path().join("bad_2020-01-06_message.csv");
    let book = tmp.path().join("bad_2020-01-06_orderbook.csv");
    fs::write(&msg, "34200.0,1,1,10,1000,1\n34201.0,junk\n").unwrap();
    fs::write(&book, "1001,5,999,5\n1001,5,999,5\n").unwrap();
    let out = flashvol(&[
        "pipeline",
        "--messages",
        msg.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // the same input under skip strictness succeeds with warnings
    let out = flashvol(&[
        "pipeline",
        "--messages",
        msg.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("out2").to_str().unwrap(),
        "--strictness",
        "skip",
        "--periodicity",
        "off",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ingest_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "n_days = 2\nseed = 5\n");
    let data = tmp.path().join("data");
    assert!(flashvol(&["simulate", "--spec", &spec, "--out-dir", data.to_str().unwrap()])
        .status
        .success());
    let pattern = format!("{}/synth_*_message.csv", data.display());
    let out = flashvol(&["ingest", "--messages", &pattern]);
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["files"], 2);
    assert!(summary["events"].as_u64().unwrap() > 0);
    assert_eq!(summary["skipped_rows"], 0);
}
