//! The criteria as ordinary tests, plus command-line behaviour.

mod common;

use common::*;
use slamkit::check::{self, EXIT_ABORTED, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

fn ok(r: Outcome) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn bank_amounts_and_sign_bug() {
    ok(bank_end_to_end());
}

#[test]
fn quantifiers_agree_with_brute_force() {
    ok(quantifier_suite(40, 1));
}

#[test]
fn clauses_agree_with_direct_evaluation() {
    ok(translation_soundness(20, 2));
}

#[test]
fn translation_matches_golden_dumps() {
    ok(golden_dumps());
}

#[test]
fn tree_traversal_orders() {
    ok(traversal_order());
}

#[test]
fn serializer_round_trip_and_corruption() {
    ok(serializer_round_trip(200, 3));
}

#[test]
fn coordx_through_the_wrapper() {
    ok(inheritance_dispatch());
}

#[test]
fn partial_annotations_check_only_their_part() {
    ok(check_modes());
}

#[test]
fn overhead_is_reported() {
    ok(overhead());
}

#[test]
fn sign_bug_report_names_bindings() {
    let l = load(&["bank.slam"]);
    let rec = sign_bug_record(&l).unwrap();
    assert!(rec.bindings.iter().any(|(n, v)| n == "Result" && v.contains("-15")), "{:?}", rec.bindings);
    assert_eq!(rec.annotation, "full");
    let rep = check::run_report(&[rec]);
    assert!(rep.text.starts_with("1 check: 0 pass, 1 fail, 0 error"), "{}", rep.text);
}

#[test]
fn run_exit_codes_follow_policy() {
    let bank = spec_path("bank.slam");
    let buggy = fixture("bank_sign_bug");
    let call = bank_call();
    let (code, out, _) = slam(&["run", path_str(&bank), "--program", path_str(&buggy), "--call", &call]);
    assert_eq!(code, EXIT_ABORTED);
    assert!(out.is_empty(), "aborted run printed {out}");
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let (code, out, err) = slam(&[
        "run", path_str(&bank), "--program", path_str(&buggy), "--call", &call,
        "--policy", "report", "--report", path_str(&report),
    ]);
    assert_eq!(code, EXIT_FAIL, "{err}");
    assert!(out.contains("amount: -15.0"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["summary"]["fail"], 1);

    let l = load(&["bank.slam"]);
    let good = skeleton_dir(&l);
    let (code, out, err) = slam(&["run", path_str(&bank), "--program", path_str(good.path()), "--call", &call]);
    assert_eq!(code, EXIT_PASS, "{err}");
    assert!(out.contains("amount: 15.0"));
    assert!(err.starts_with("8 checks: 8 pass"), "{err}");
}

#[test]
fn check_call_on_written_documents() {
    let l = load(&["bank.slam"]);
    let bank = spec_path("bank.slam");
    let dir = tempfile::tempdir().unwrap();
    let (_, args) = slamkit::skeleton::entry_call(&l.h, &bank_call(), limits()).unwrap();
    let empty = vec![args[0].clone(), slamkit::ast::Value::Seq(vec![])];
    for (name, payload, want) in [("ok.slamx", args.clone(), EXIT_PASS), ("empty.slamx", empty, EXIT_FAIL)] {
        let p = dir.path().join(name);
        std::fs::write(&p, slamkit::wire::write_doc(&l.prog.fingerprint(), &payload)).unwrap();
        let (code, _, err) = slam(&["check-call", path_str(&bank), "--fn", "CTransaction:FinalAmount", "--kind", "pre", "--file", path_str(&p)]);
        assert_eq!(code, want, "{name}: {err}");
    }
    // A document written for another specification.
    let p = dir.path().join("foreign.slamx");
    std::fs::write(&p, slamkit::wire::write_doc(&"0".repeat(64), &args)).unwrap();
    let (code, _, err) = slam(&["check-call", path_str(&bank), "--fn", "CTransaction:FinalAmount", "--kind", "pre", "--file", path_str(&p)]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("FINGERPRINT_MISMATCH"), "{err}");
}

#[test]
fn eval_reports_missing_rules() {
    let (code, _, err) = slam(&["eval", path_str(&spec_path("point.slam")), "-e", "CoordX(Polar(1.0, 1.0))"]);
    assert_eq!(code, 1);
    assert!(err.contains("NO_APPLICABLE_RULE"), "{err}");
    let (code, out, _) = slam(&["eval", path_str(&spec_path("point.slam")), "-e", "Distance(PointAt(0, 0), PointAt(3, 4))"]);
    assert_eq!((code, out.trim()), (0, "5.0"));
}

#[test]
fn diagnostics_point_at_their_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.slam");
    std::fs::write(&bad, "class X {\n  case K(Int)\n  rule { call: Nope(k) sol: 1 }\n}\n").unwrap();
    let (code, _, err) = slam(&["check", path_str(&spec_path("stack.slam")), path_str(&bad)]);
    assert_eq!(code, 1);
    assert!(err.contains("bad.slam:3"), "{err}");
}

#[test]
fn gen_writes_a_loadable_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = slam(&["gen", path_str(&spec_path("tree.slam")), "-o", path_str(dir.path())]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 2);
    let prog = slamkit::skeleton::load_program(dir.path()).unwrap();
    assert!(prog.funcs.contains_key("Largest"));
}

#[test]
fn usage_errors_and_limits() {
    assert_eq!(slam(&["frobnicate"]).0, slamkit::cli::EXIT_USAGE);
    assert_eq!(slam(&["eval", "x.slam", "-e", "1", "--limits", "depth=x"]).0, slamkit::cli::EXIT_USAGE);
    let (code, _, err) = slam(&["eval", path_str(&spec_path("tree.slam")), "-e", "Size(Node(Empty(), 1, Empty()))", "--limits", "depth=2"]);
    assert_eq!(code, 1);
    assert!(err.contains("DEPTH_LIMIT"), "{err}");
}

#[test]
fn failing_precondition_stops_before_the_body() {
    let l = load(&["bank.slam"]);
    let dir = skeleton_dir(&l);
    let report = dir.path().join("r.json");
    let (code, out, err) = slam(&[
        "run", path_str(&spec_path("bank.slam")), "--program", path_str(dir.path()),
        "--call", "FinalAmount(ctran([tran(\"A\", \"B\", 10)]), [])", "--report", path_str(&report),
    ]);
    assert_eq!(code, EXIT_ABORTED, "{err}");
    assert!(out.is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let records = json["records"].as_array().unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["kind"], "pre");
    assert_eq!(records[0]["verdict"], "fail");
}
