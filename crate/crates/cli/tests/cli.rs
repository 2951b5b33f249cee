use std::io::Write;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn simulate_builtin_scenario_agrees_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first_path = dir.path().join("first.jsonl");
    let second_path = dir.path().join("second.jsonl");

    let first = run(&["simulate", "--scenario", "um-handshake", "--out", first_path.to_str().unwrap()]);
    assert_eq!(code(&first), 0);
    let stdout = String::from_utf8(first.stdout.clone()).unwrap();
    assert!(stdout.contains("keys agree"), "got:\n{stdout}");

    let second = run(&["simulate", "--scenario", "um-handshake", "--out", second_path.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    let first_file = std::fs::read(&first_path).unwrap();
    assert_eq!(first_file, std::fs::read(&second_path).unwrap());

    for line in String::from_utf8(first_file).unwrap().lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(record.get("session_key").and_then(|k| k.as_str()).is_some());
    }
}

#[test]
fn simulate_seed_override_changes_keys_but_stays_deterministic() {
    let base = ["simulate", "--scenario", "mqv-handshake", "--format", "csv"];
    let five_a = run(&[&base[..], &["--seed", "5"]].concat());
    let five_b = run(&[&base[..], &["--seed", "5"]].concat());
    let six = run(&[&base[..], &["--seed", "6"]].concat());
    assert_eq!(code(&five_a), 0);
    assert_eq!(five_a.stdout, five_b.stdout);
    assert_ne!(five_a.stdout, six.stdout);
}

#[test]
fn simulate_rejects_unknown_and_malformed_scenarios() {
    let unknown = run(&["simulate", "--scenario", "no-such-scenario"]);
    assert_eq!(code(&unknown), 2);

    let mut garbled = tempfile::NamedTempFile::new().unwrap();
    write!(garbled, "{{\"name\": ").unwrap();
    let malformed = run(&["simulate", "--scenario", garbled.path().to_str().unwrap()]);
    assert_eq!(code(&malformed), 2);

    let mut dangling = tempfile::NamedTempFile::new().unwrap();
    write!(
        dangling,
        r#"{{
            "name": "broken",
            "curve": "toy",
            "seed": 1,
            "parties": [
                {{"id": "alice", "backing": "software", "scheme": "ecmqv"}},
                {{"id": "bob", "backing": "software", "scheme": "ecmqv"}}
            ],
            "steps": [
                {{"action": "respond", "scheme": "ecmqv", "owner": "bob",
                  "peer": "alice", "inbound": "missing", "save_out": "y"}}
            ]
        }}"#
    )
    .unwrap();
    let failed = run(&["simulate", "--scenario", dangling.path().to_str().unwrap()]);
    assert_eq!(code(&failed), 2);
    let stderr = String::from_utf8(failed.stderr).unwrap();
    assert!(stderr.contains("missing"), "got:\n{stderr}");
}

#[test]
fn attack_default_run_matches_the_expected_table() {
    let first = run(&["attack"]);
    assert_eq!(code(&first), 0);
    let stderr = String::from_utf8(first.stderr.clone()).unwrap();
    assert!(stderr.contains("matches the expected table"));

    let second = run(&["attack"]);
    assert_eq!(first.stdout, second.stdout);

    let json = run(&["attack", "--format", "json"]);
    assert_eq!(code(&json), 0);
    let matrix: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let rows = matrix["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["cells"].as_array().unwrap().len() == 5));
}

#[test]
fn attack_filters_select_single_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cell.csv");
    let cell = run(&[
        "attack",
        "--attack",
        "kaliski-uks",
        "--profile",
        "tpm-ke-rev",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&cell), 0);
    let stdout = String::from_utf8(cell.stdout.clone()).unwrap();
    assert_eq!(stdout, "attack,profile,outcome\nkaliski-uks,tpm-ke-rev,z-unavailable\n");
    assert_eq!(cell.stdout, std::fs::read(&out_path).unwrap());

    assert_eq!(code(&run(&["attack", "--attack", "bogus"])), 2);
    assert_eq!(code(&run(&["attack", "--profile", "bogus"])), 2);
}

#[test]
fn entropy_toy_report_runs_without_gates() {
    let args = ["entropy", "--curve", "toy", "--n", "256", "--depth", "8", "--format", "json"];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let reports: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);
}

#[test]
fn entropy_undersampled_gated_curve_fails() {
    let short = run(&["entropy", "--curve", "p256", "--n", "64", "--depth", "6"]);
    assert_eq!(code(&short), 1);
    let stderr = String::from_utf8(short.stderr).unwrap();
    assert!(stderr.contains("FAIL"), "got:\n{stderr}");
}

#[test]
fn entropy_rejects_bad_selectors() {
    assert_eq!(code(&run(&["entropy", "--curve", "p512"])), 2);
    assert_eq!(code(&run(&["entropy", "--curve", "toy", "--n", "256", "--depth", "30"])), 2);
    assert_eq!(code(&run(&["entropy", "--curve", "toy", "--n", "1", "--depth", "2"])), 2);
    assert_eq!(code(&run(&["entropy", "--format", "yaml"])), 2);
}
