use std::path::Path;
use std::process::{Command, Output};

fn cbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbr-ikb"))
        .args(args)
        .env_remove("CBR_IKB_SERVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn first_question(file: &Path) -> (String, String) {
    let text = std::fs::read_to_string(file).unwrap();
    let mut cols = text.lines().next().unwrap().split('\t');
    let q = cols.next().unwrap().to_string();
    let a = cols.next().unwrap().split('|').next().unwrap().to_string();
    (q, a)
}

#[test]
fn stored_case_base_answers_in_a_later_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cb = dir.path().join("cb.cbrc");
    let o = cbr(&["synth", "--out", s(&data)]);
    assert!(o.status.success(), "{o:?}");
    assert!(data.join("experiment.conf").exists());

    let kb = data.join("kb.txt");
    let o = cbr(&[
        "build",
        "--kb",
        s(&kb),
        "--train",
        s(&data.join("train_1hop.txt")),
        "--out",
        s(&cb),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("cases 200\t"), "{}", stdout(&o));

    let (question, answer) = first_question(&data.join("test_1hop.txt"));
    let o = cbr(&["answer", &question, "--kb", s(&kb), "--casebase", s(&cb), "--top", "1"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    let top = out.lines().find(|l| l.starts_with("1\t")).expect("a ranked answer");
    assert!(top.ends_with(&format!("\t{answer}")), "{out}");

    let report = dir.path().join("report.tsv");
    let o = cbr(&[
        "evaluate",
        "--kb",
        s(&kb),
        "--casebase",
        s(&cb),
        "--test",
        s(&data.join("test_1hop.txt")),
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("hits@1 1.0000"), "{}", stdout(&o));
    assert!(report.exists());
}

#[test]
fn json_flag_prints_the_response_body() {
    let o = cbr(&["status", "--json"]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["entities"], 0);
    assert!(v["kbc_dim"].is_null());
}

#[test]
fn failures_exit_with_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.txt");
    std::fs::write(&kb, "a\tr\tb\n").unwrap();

    // Nothing loaded: configuration problem.
    assert_eq!(cbr(&["answer", "who is [a]"]).status.code(), Some(3));
    // Unreadable input file.
    let missing = dir.path().join("missing.txt");
    assert_eq!(cbr(&["ingest", "--kb", s(&missing)]).status.code(), Some(2));
    // Malformed embedder spec.
    let o = cbr(&["build", "--kb", s(&kb), "--train", s(&kb), "--embedder", "bert"]);
    assert_eq!(o.status.code(), Some(3));
    // Nobody listening.
    let o = cbr(&["--server", "http://127.0.0.1:1", "status"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot reach"));
}
