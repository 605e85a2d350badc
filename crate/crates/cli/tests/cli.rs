use std::fs;
use std::process::Command;

use domcalc_cli::{
    run_with, EXIT_FAILURE, EXIT_NON_NORMALIZABLE, EXIT_OK, EXIT_PARSE, EXIT_UNKNOWN,
};

/// Runs the command line in-process and returns (exit code, stdout, stderr).
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("domcalc").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn every_scenario_proves() {
    for name in ["kosaki", "adjoint-trivial", "cube", "fourth", "sixth", "all"] {
        let (code, out, err) = run(&["prove", name]);
        assert_eq!(code, EXIT_OK, "{name}: {out}{err}");
        assert!(out.contains("pass"), "{out}");
    }
}

#[test]
fn prove_json_is_machine_readable() {
    let (code, out, _) = run(&["prove", "cube", "--json"]);
    assert_eq!(code, EXIT_OK);
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    let report = &value[0];
    assert_eq!(report["scenario"], "cube");
    assert_eq!(report["pass"], true);
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);
    assert!(report["rows"][0].get("match").is_some());
}

#[test]
fn unknown_scenario_fails() {
    let (code, _, err) = run(&["prove", "seventh"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("seventh"));
}

#[test]
fn undecided_domain_exits_with_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("empty.facts");
    fs::write(&facts, "# nothing known\n").unwrap();
    let (code, out, _) = run(&["domain", "A * B", "--facts", facts.to_str().unwrap()]);
    assert_eq!(code, EXIT_UNKNOWN);
    assert!(out.contains("verdict: Unknown"), "{out}");
}

#[test]
fn facts_file_drives_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("pair.facts");
    fs::write(
        &facts,
        "atom A { self_adjoint, injective, unbounded }\n\
         atom B { self_adjoint, injective, bounded, everywhere_defined }\n\
         axiom dom(A*B) = trivial\n",
    )
    .unwrap();
    let path = facts.to_str().unwrap();
    let (code, out, _) = run(&["domain", "A * B", "--facts", path]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verdict: Trivial"), "{out}");
    // The other diagonal entry B * A keeps dom(A), so the square is not trivial.
    let (code, out, _) = run(&["domain", "[0, A; B, 0]^2", "--facts", path]);
    assert_eq!(code, EXIT_OK);
    assert!(!out.contains("verdict: Trivial"), "{out}");
}

#[test]
fn bad_facts_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("bad.facts");
    fs::write(&facts, "atom A { sparkly }\n").unwrap();
    let (code, _, err) = run(&["domain", "A", "--facts", facts.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("line 1"), "{err}");
    let (code, _, _) = run(&["domain", "A", "--facts", "/nonexistent/x.facts"]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn parse_and_shape_errors() {
    let (code, _, err) = run(&["parse", "[0, A; B]"]);
    assert_eq!(code, EXIT_PARSE, "{err}");
    let (code, _, _) = run(&["parse", "[A, 0; 0, [A, 0; 0, A]]"]);
    assert_eq!(code, EXIT_PARSE);
    let (code, out, _) = run(&["parse", "[0,A;B,0]^3"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "[0, A; B, 0]^3");
}

#[test]
fn parse_json_round_trips() {
    let (code, out, _) = run(&["parse", "A' * B^-1", "--json"]);
    assert_eq!(code, EXIT_OK);
    let e: domcalc::OpExpr = serde_json::from_str(&out).unwrap();
    assert_eq!(e.pretty_print(), "A' * B^-1");
}

#[test]
fn non_monomial_block_is_reported() {
    let (code, _, err) = run(&["domain", "[A, B; 0, A]", "--facts", "builtin:cube"]);
    assert_eq!(code, EXIT_NON_NORMALIZABLE, "{err}");
}

#[test]
fn nested_single_powers() {
    let (code, out, _) = run(&["nested", "--n", "4", "--power", "16"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("is Trivial"), "{out}");
    let (code, out, _) = run(&["nested", "--n", "4", "--power", "15", "--adjoint"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("dom(T'^15) is NonTrivial"), "{out}");
    let (code, _, _) = run(&["nested", "--n", "11"]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn nested_report_passes() {
    let (code, out, _) = run(&["nested", "--n", "3"]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn conjecture_status() {
    let (code, out, _) = run(&["conjecture", "--n", "5"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("open"), "{out}");
    let (_, out, _) = run(&["conjecture", "--n", "8"]);
    assert!(out.contains("nested:3"), "{out}");
    let (_, out, _) = run(&["conjecture", "--n", "4"]);
    assert!(out.contains("fourth"), "{out}");
    let (code, _, _) = run(&["conjecture", "--n", "1"]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn trace_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("trace.json");
    let (code, _, _) = run(&[
        "domain",
        "B * A^-1",
        "--facts",
        "builtin:kosaki",
        "--trace",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(value.is_object(), "{value}");

    let md = dir.path().join("trace.md");
    let (code, _, _) = run(&[
        "export-trace",
        "B * A^-1",
        "--facts",
        "builtin:kosaki",
        "--format",
        "md",
        "--out",
        md.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&md).unwrap();
    assert!(text.contains("meet dom(A) dom(B) = trivial"), "{text}");
}

#[test]
fn exported_traces_are_deterministic() {
    let args = ["export-trace", "(A^-1 * B)' * (A^-1 * B)", "--facts", "builtin:kosaki"];
    let (code, first, _) = run(&args);
    assert_eq!(code, EXIT_OK);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
}

#[test]
fn unknown_trace_format_fails() {
    let (code, _, _) = run(&["export-trace", "A", "--facts", "builtin:kosaki", "--format", "xml"]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn probe_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("probe.csv");
    let (code, out, _) = run(&["probe", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("functions in both domains: 0"), "{out}");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,parameter,c_A,c_B,status_A,status_B"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn probe_selected_families() {
    let (code, out, _) = run(&[
        "probe", "--family", "gaussian", "--a", "1.0", "--family", "hermite", "--k", "2", "--json",
    ]);
    assert_eq!(code, EXIT_OK);
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = value["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["family"], "gaussian");
    assert_eq!(rows[0]["dom_a"]["status"], "in_domain");
    assert_eq!(rows[1]["k"], 2);

    let (code, _, _) = run(&["probe", "--family", "gaussian"]);
    assert_eq!(code, EXIT_FAILURE);
    let (code, _, _) = run(&["probe", "--grid-n", "1000"]);
    assert_eq!(code, EXIT_FAILURE);
}

#[test]
fn usage_errors_and_help() {
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, EXIT_FAILURE);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("prove"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_domcalc");
    let status = Command::new(bin).args(["prove", "all"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    let status = Command::new(bin).args(["parse", "A *"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_PARSE));
    assert!(String::from_utf8_lossy(&status.stderr).contains("parse error"));
}
