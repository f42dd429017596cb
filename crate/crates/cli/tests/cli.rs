use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use famsynth::format::{parse_document, parse_subfamily};
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn model(name: &str) -> String {
    root().join("models").join(name).display().to_string()
}

fn famsynth(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_famsynth"))
        .args(args)
        .env_remove("FAMSYNTH_SOLVER")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    let mut input = child.stdin.take().unwrap();
    input.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(input);
    child.wait_with_output().unwrap()
}

fn ok_json(args: &[&str], stdin: Option<&str>) -> Value {
    let out = famsynth(args, stdin);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn code(args: &[&str], stdin: Option<&str>) -> (i32, String) {
    let out = famsynth(args, stdin);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn schema_check(report: &Value) {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("docs/output-schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("valid schema");
    let errors: Vec<String> = validator.iter_errors(report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{report}");
}

#[test]
fn example_threshold_partition() {
    let report = ok_json(&["synth", "--mode", "threshold", "--spec", "phi", &model("example1.fmc")], None);
    assert_eq!(report["accepted"]["members"], 2);
    assert_eq!(report["rejected"]["members"], 2);
    assert_eq!(report["undefined"]["members"], 0);
    schema_check(&report);
}

#[test]
fn example_maximum() {
    let report = ok_json(&["synth", "--mode", "max", &model("example1.fmc")], None);
    assert_eq!(report["mode"], "max");
    let value = report["result"]["value"].as_f64().unwrap();
    assert!((value - 1.0).abs() < 1e-6);
    let r = report["result"]["realisation"].as_str().unwrap();
    assert!(r == "k0=0 k1=1 k2=2" || r == "k0=0 k1=1 k2=3", "{r}");
    schema_check(&report);
}

/// Members of every subfamily string of a group, expanded.
fn expand(doc_text: &str, report: &Value, verdict: &str) -> BTreeSet<Vec<usize>> {
    let doc = parse_document(doc_text).unwrap();
    report[verdict]["subfamilies"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| parse_subfamily(s.as_str().unwrap(), &doc.model).unwrap().members().collect::<Vec<_>>())
        .map(|r| r.values)
        .collect()
}

fn checked(doc_text: &str, report: &Value, satisfied: bool) -> BTreeSet<Vec<usize>> {
    let doc = parse_document(doc_text).unwrap();
    report["members"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|m| m["satisfied"] == Value::Bool(satisfied))
        .map(|m| famsynth::format::parse_realisation(m["realisation"].as_str().unwrap(), &doc.model).unwrap().values)
        .collect()
}

#[test]
fn generated_partitions_match_check() {
    for seed in ["7", "8", "21"] {
        let out = famsynth(&["gen", "--seed", seed], None);
        assert!(out.status.success());
        let doc = String::from_utf8(out.stdout).unwrap();
        for spec in ["prob", "reward"] {
            let synth = ok_json(&["synth", "--mode", "threshold", "--spec", spec], Some(&doc));
            let check = ok_json(&["check", "--spec", spec, "-"], Some(&doc));
            schema_check(&synth);
            schema_check(&check);
            assert_eq!(expand(&doc, &synth, "accepted"), checked(&doc, &check, true), "seed {seed} {spec}");
            assert_eq!(expand(&doc, &synth, "rejected"), checked(&doc, &check, false), "seed {seed} {spec}");
        }
    }
}

#[test]
fn baselines_agree_on_example() {
    let path = model("example1.fmc");
    let reports: Vec<Value> = ["check", "allinone", "enum"].iter().map(|c| ok_json(&[c, &path], None)).collect();
    for r in &reports {
        schema_check(r);
        assert_eq!(r["accepted"], 2);
        assert_eq!(r["rejected"], 2);
    }
}

#[test]
fn output_is_deterministic() {
    let path = model("example1.fmc");
    for args in [
        vec!["synth", "--mode", "threshold", path.as_str()],
        vec!["synth", "--mode", "min", "--out", "text", path.as_str()],
        vec!["check", "--out", "csv", path.as_str()],
    ] {
        let a = famsynth(&args, None).stdout;
        let b = famsynth(&args, None).stdout;
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn csv_and_text_outputs() {
    let path = model("example1.fmc");
    let out = famsynth(&["synth", "--out", "csv", &path], None);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("verdict,subfamily"));
    assert!(text.contains("accepted,\"k0={0} k1={1} k2={2,3}\""), "{text}");
    let out = famsynth(&["bench", "--out", "text", &path], None);
    let text = String::from_utf8(out.stdout).unwrap();
    for approach in ["one-by-one", "all-in-one", "enumeration", "refinement"] {
        assert!(text.contains(approach), "{text}");
    }
}

#[test]
fn trace_and_quotient_dump() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let dump = dir.path().join("q.mdp");
    let out = famsynth(
        &[
            "synth",
            "--mode",
            "threshold",
            "--trace",
            trace.to_str().unwrap(),
            "--dump-quotient",
            dump.to_str().unwrap(),
            &model("example1.fmc"),
        ],
        None,
    );
    assert!(out.status.success());
    let lines: Vec<Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["decision"], "split");
    assert_eq!(lines[0]["size"], 4);
    let dump = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(dump.lines().next(), Some("mdp 4 0"));
    assert_eq!(dump.lines().count(), 1 + 12);
}

#[test]
fn smt_export_text_and_errors() {
    let out = famsynth(&["smt-export", &model("example1-reward.fmc")], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("(set-logic QF_LRA)"));
    assert_eq!(text.matches("(declare-fun").count(), 28);
    // Probability specifications have no encoding.
    let (c, err) = code(&["smt-export", "--spec", "phi", &model("example1.fmc")], None);
    assert_eq!(c, 2, "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn smt_solve_with_missing_solver() {
    let (c, err) = code(
        &["smt-export", "--solve", "--solver", "/nonexistent/solver", &model("example1-reward.fmc")],
        None,
    );
    assert_eq!(c, 2, "{err}");
}

#[test]
fn exit_codes() {
    let path = model("example1.fmc");
    assert_eq!(code(&["frobnicate"], None).0, 1);
    assert_eq!(code(&["synth", "--delta", "2", &path], None).0, 1);
    assert_eq!(code(&["check", "/nonexistent.fmc"], None).0, 1);
    let (c, err) = code(&["check"], Some("states 2\ninitial 0\nparams\n  k : 0\ntrans\n  0 : 0.9:k\n  1 : 1:k\n"));
    assert_eq!(c, 2);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("E109"), "{err}");
    assert_eq!(code(&["check", "--spec", "nope", &path], None).0, 2);
    assert_eq!(code(&["check", "--cap", "3", &path], None).0, 3);
    assert_eq!(code(&["synth", "--budget", "1", &path], None).0, 3);
    // Nothing reaches state 1 from state 0.
    let undefined = "states 2\ninitial 0\nparams\n  k : 0\ntrans\n  0 : 1:k\n  1 : 1:k\nrewards\n  0 : 1\nlabels\n  g : 1\nspecs\n  e : Emin F \"g\"\n";
    assert_eq!(code(&["synth", "--mode", "min"], Some(undefined)).0, 4);
    assert_eq!(code(&["check"], Some(undefined)).0, 4);
}

#[test]
fn help_exits_zero() {
    let out = famsynth(&["--help"], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("synth"));
}
