use std::process::Command;

use ris_freqsel::harness::{parse_csv, CSV_HEADER};
use ris_freqsel::SelectionMethod;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-freqsel"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf-8")
}

#[test]
fn sweep_n_emits_one_record_per_point() {
    let text = run_ok(&[
        "sweep-n", "--K", "32", "--n-list", "4,9,16", "--sel-sizes", "1", "--methods", "adjacent",
        "--realizations", "8",
    ]);
    assert!(text.starts_with(CSV_HEADER));
    let records = parse_csv(&text).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 9, 16]);
    assert!(records.iter().all(|r| r.k == 32 && r.realizations == 8 && r.method == SelectionMethod::Adjacent));
}

#[test]
fn sweep_sel_nests_methods_inside_sizes() {
    let text = run_ok(&[
        "sweep-sel", "--K", "16", "--n_row", "2", "--n_col", "2", "--sel-list", "1,3", "--realizations", "4",
    ]);
    let records = parse_csv(&text).unwrap();
    let keys: Vec<(usize, SelectionMethod)> = records.iter().map(|r| (r.sel_size, r.method)).collect();
    assert_eq!(keys.len(), 6);
    assert_eq!(keys[0], (1, SelectionMethod::Adjacent));
    assert_eq!(keys[1], (1, SelectionMethod::FixedAdjacent));
    assert_eq!(keys[2], (1, SelectionMethod::Random));
    assert_eq!(keys[3].0, 3);
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.cfg");
    std::fs::write(&cfg, "# small scenario\nK = 16\nn_row = 2\nn_col = 2\nseed = 7\n").unwrap();
    let out = dir.path().join("out.json");
    run_ok(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--realizations",
        "3",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json[0]["K"], 16);
    assert_eq!(json[0]["N"], 4);
    assert_eq!(json[0]["seed"], 9);
    assert_eq!(json[0]["method"], "adjacent");
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sweep-sel", "--K", "16", "--n_row", "2", "--n_col", "2", "--sel-list", "1,5", "--realizations", "20"];
    let one = run_ok(&[&args[..], &["--threads", "1"]].concat());
    let three = run_ok(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(one, three);
}

#[test]
fn invalid_input_names_the_key() {
    let out = bin().args(["simulate", "--K", "1", "--realizations", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`K`"));

    let out = bin().args(["sweep-sel", "--sel-list", "1", "--methods", "diagonal"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn defaults_round_trip_through_a_file() {
    let text = run_ok(&["defaults"]);
    let parsed = ris_freqsel::load_config(&text).unwrap();
    assert_eq!(parsed, ris_freqsel::ScenarioConfig::default());
}

#[test]
fn selftest_passes() {
    let text = run_ok(&["selftest"]);
    assert!(text.contains("0 failed"), "{text}");
}
