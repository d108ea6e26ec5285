//! End-to-end checks of the command pipelines against the shipped scenarios.

use std::path::{Path, PathBuf};

use amflood_cli::{cmd_oracle, cmd_run, cmd_sweep, cmd_verify, RangeArg};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("amflood-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_writes_a_trace_file() {
    let dir = tmpdir("run");
    let trace_path = dir.join("trace.jsonl");
    let mut out = Vec::new();
    let code = cmd_run(
        &scenario("triangle-synaf.json"),
        Some(&trace_path),
        &mut out,
    )
    .unwrap();
    assert_eq!(code, 0);
    let summary = String::from_utf8(out).unwrap();
    assert!(summary.contains("terminated"), "{summary}");
    assert!(summary.contains("sends=6"), "{summary}");

    let text = std::fs::read_to_string(&trace_path).unwrap();
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert_eq!(text.lines().count(), 1 + 16 + 1); // header + events + outcome

    // Same scenario, same bytes.
    let again = dir.join("trace2.jsonl");
    cmd_run(
        &scenario("triangle-synaf.json"),
        Some(&again),
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn run_reports_the_cycle_on_the_naive_scenario() {
    let mut out = Vec::new();
    let code = cmd_run(&scenario("six-node-naive.json"), None, &mut out).unwrap();
    assert_eq!(code, 0);
    let text = String::from_utf8(out).unwrap();
    assert!(
        text.contains("cycle_detected first_round=5 repeat_round=9"),
        "{text}"
    );
}

#[test]
fn verify_passes_the_blocked_six_node_scenario() {
    let mut out = Vec::new();
    let code = cmd_verify(&scenario("six-node-synafi.json"), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("send-equivalence: 0 mismatches"), "{text}");
    assert!(text.contains("ORACLE: PASS"), "{text}");
    assert!(text.ends_with("RESULT: PASS\n"), "{text}");
}

#[test]
fn verify_fails_on_nonterminating_runs() {
    let mut out = Vec::new();
    let code = cmd_verify(&scenario("six-node-naive.json"), &mut out).unwrap();
    assert_eq!(code, 1);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("RESULT: FAIL"), "{text}");
}

#[test]
fn verify_skips_oracle_for_multi_message_scenarios() {
    let mut out = Vec::new();
    let code = cmd_verify(&scenario("two-messages-smallest.json"), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("oracle checks: skipped"), "{text}");
    assert!(text.contains("BOUNDS: PASS"), "{text}");
}

#[test]
fn oracle_emits_dot_files() {
    let dir = tmpdir("oracle");
    let graph = dir.join("graph.edges");
    std::fs::write(&graph, "a b\nb c\nc a\n").unwrap();
    let scheme = dir.join("scheme.json");
    std::fs::write(&scheme, r#"[ { "node": "b", "round": 2 } ]"#).unwrap();
    let dot = dir.join("layered.dot");
    let cover = dir.join("cover.dot");

    let mut out = Vec::new();
    let code = cmd_oracle(&graph, "a", Some(&scheme), &dot, Some(&cover), &mut out).unwrap();
    assert_eq!(code, 0);
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("depth=4"), "{text}");
    assert!(text.contains("dummies=1"), "{text}");

    let layered = std::fs::read_to_string(&dot).unwrap();
    assert!(layered.contains("rank=same"));
    assert!(layered.contains("shape=point")); // the dummy
    let cover_text = std::fs::read_to_string(&cover).unwrap();
    assert!(cover_text.contains("b'"));
}

#[test]
fn small_sweeps_pass_for_the_guaranteed_algorithms() {
    for algo in ["synaf", "synafi", "multi:smallest", "multi:fair"] {
        // Plain flooding only has guarantees without blocking.
        let f_hi = if algo == "synaf" { 0 } else { 2 };
        let mut out = Vec::new();
        let code = cmd_sweep(
            RangeArg { lo: 2, hi: 6 },
            RangeArg { lo: 0, hi: f_hi },
            25,
            7,
            algo,
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(code, 0, "{algo}: {text}");
        assert!(text.contains("fail=0"), "{algo}: {text}");
    }
}

#[test]
fn naive_sweep_finds_nonterminating_instances() {
    let mut out = Vec::new();
    let code = cmd_sweep(
        RangeArg { lo: 4, hi: 6 },
        RangeArg { lo: 2, hi: 4 },
        60,
        11,
        "naive",
        &mut out,
    )
    .unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(code, 0, "{text}");
    let summary = text.lines().last().unwrap().to_string();
    let nonterm: u32 = summary
        .split("nonterminating=")
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(nonterm > 0, "{summary}");
}

#[test]
fn sweep_output_is_deterministic() {
    let mut a = Vec::new();
    let mut b = Vec::new();
    cmd_sweep(
        RangeArg { lo: 3, hi: 5 },
        RangeArg { lo: 0, hi: 1 },
        10,
        3,
        "synafi",
        &mut a,
    )
    .unwrap();
    cmd_sweep(
        RangeArg { lo: 3, hi: 5 },
        RangeArg { lo: 0, hi: 1 },
        10,
        3,
        "synafi",
        &mut b,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_sweep_is_a_successful_no_op() {
    let mut out = Vec::new();
    let code = cmd_sweep(
        RangeArg { lo: 3, hi: 5 },
        RangeArg { lo: 0, hi: 2 },
        0,
        1,
        "synafi",
        &mut out,
    )
    .unwrap();
    assert_eq!(code, 0);
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text, "sweep: instances=0 pass=0 fail=0 nonterminating=0\n");
}
