use std::collections::BTreeSet;
use std::process::{Command, Output};

use kriq_core::System;
use kriq_service::Session;
use kriq_core::planner::Mode;
use serde_json::Value;

fn kriq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kriq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn function_of_rep_a1() {
    let o = kriq(&["query", "What is the function of repA1?"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Plasmid maintenance"), "{}", stdout(&o));
}

#[test]
fn raw_goal_binds_the_protein_id() {
    let o = kriq(&[
        "query",
        "--goal",
        "res('Gene',Pk,'GeneName','repA1'), res('Gene',Pk,'UniProtProteinID',Val)",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("O85067"));
}

#[test]
fn exit_codes() {
    assert_eq!(kriq(&["query", ""]).status.code(), Some(1));
    assert_eq!(kriq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kriq(&["--help"]).status.code(), Some(0));
    let o = kriq(&["query", "What is the colour of repA1?"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error["));
    assert_eq!(kriq(&["load", "/nonexistent", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn load_summarizes_the_bundled_data() {
    let dir = System::bundled_dir();
    let o = kriq(&[
        "load",
        dir.join("tables").to_str().unwrap(),
        dir.join("knowledge.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("loaded 2 concepts"), "{}", stdout(&o));
}

#[test]
fn sql_flag_prints_the_statement() {
    let o = kriq(&["query", "--baseline", "--sql", "List all F-box domain protein 2 sequences"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).to_lowercase().contains("select"), "{}", stdout(&o));
}

#[test]
fn cli_and_session_agree() {
    let dir = System::bundled_dir();
    let mut session = Session::new();
    session.load(&dir.join("tables"), &dir.join("knowledge.json")).unwrap();
    for q in [
        "List all F-box domain protein 2 sequences",
        "What are the functions of UniProt proteins Q9UKT8 and Q9NVA1",
        "What is the function of repA1?",
    ] {
        for (flag, mode) in [(None, Mode::Enhanced), (Some("--baseline"), Mode::Baseline)] {
            let mut args = vec!["--format", "json", "query"];
            args.extend(flag);
            args.push(q);
            let o = kriq(&args);
            assert_eq!(o.status.code(), Some(0));
            let v: Value = serde_json::from_slice(&o.stdout).unwrap();
            let cli: BTreeSet<(Vec<String>, bool)> = v["rows"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| (serde_json::from_value(r["values"].clone()).unwrap(), r["derived"].as_bool().unwrap()))
                .collect();
            let direct: BTreeSet<(Vec<String>, bool)> = session
                .query(q, mode, false)
                .unwrap()
                .rows
                .into_iter()
                .map(|r| (r.values, r.derived))
                .collect();
            assert_eq!(cli, direct, "{q} {mode:?}");
        }
    }
}
