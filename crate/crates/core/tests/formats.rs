use proptest::prelude::*;
use serde_json::{json, Value};

use crgsolve::baselines::{dp_solve, DpConfig};
use crgsolve::crg::{build_all, partition_rewards, CrgOptions, PartitionStrategy};
use crgsolve::domains::{compile_mpp, example_two_agent, gen_random_mpp, random_small, MppParams, SmallParams};
use crgsolve::formats::{
    export_dot, export_trace_dot, read_instance, read_instance_with, read_policy, read_results, write_instance, write_policy,
    write_results, Algorithm, DotOptions, FormatError, ReadOptions, ResultRow, RunStatus,
};
use crgsolve::search::{core_solve, SearchConfig};
use crgsolve::validate_instance;

fn example_doc() -> Value {
    serde_json::from_str(&write_instance(&example_two_agent())).unwrap()
}

#[test]
fn truncated_document_reports_position() {
    let text = write_instance(&example_two_agent());
    let err = read_instance(&text[..text.len() / 2]).unwrap_err();
    match err {
        FormatError::Schema { message, .. } => assert!(message.contains("line"), "{message}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn trailing_garbage_rejected() {
    let text = write_instance(&example_two_agent()) + "{}";
    assert!(matches!(read_instance(&text), Err(FormatError::Schema { .. })));
}

#[test]
fn wrong_type_names_the_field() {
    let mut doc = example_doc();
    doc["horizon"] = json!("two");
    match read_instance(&doc.to_string()).unwrap_err() {
        FormatError::Schema { path, .. } => assert_eq!(path, "horizon"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_probabilities_parse_then_fail_validation() {
    let mut doc = example_doc();
    doc["agents"][1]["transitions"][0]["outcomes"][0]["probability"] = json!(0.65);
    let m = read_instance(&doc.to_string()).unwrap();
    let violations = validate_instance(&m);
    assert_eq!(violations.len(), 1, "{violations:?}");
    assert!(violations[0].to_string().contains("sum to"));
}

#[test]
fn newer_major_version_rejected() {
    let mut doc = example_doc();
    doc["schema_version"] = json!("2.0");
    assert!(matches!(read_instance(&doc.to_string()), Err(FormatError::Version(v)) if v == "2.0"));
    doc["schema_version"] = json!("1.3");
    assert!(read_instance(&doc.to_string()).is_ok());
}

#[test]
fn unknown_fields_strict_and_lenient() {
    let mut doc = example_doc();
    doc["agents"][0]["colour"] = json!("red");
    let text = doc.to_string();
    match read_instance(&text).unwrap_err() {
        FormatError::UnknownField { path } => assert_eq!(path, "agents.0.colour"),
        other => panic!("unexpected {other:?}"),
    }
    let m = read_instance_with(&text, ReadOptions { strict: false }).unwrap();
    assert_eq!(m, example_two_agent());
}

#[test]
fn dangling_reference_rejected() {
    let mut doc = example_doc();
    doc["agents"][0]["transitions"][0]["action"] = json!(99);
    match read_instance(&doc.to_string()).unwrap_err() {
        FormatError::Reference { path, .. } => assert!(path.starts_with("agents[0].transitions[0]"), "{path}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn output_is_ascii_with_lf() {
    let text = write_instance(&example_two_agent());
    assert!(text.is_ascii());
    assert!(!text.contains('\r'));
    assert!(text.ends_with("}\n"));
}

#[test]
fn generated_instance_round_trips() {
    let m = compile_mpp(&gen_random_mpp(&MppParams { seed: 11, ..MppParams::default() })).instance;
    let text = write_instance(&m);
    let back = read_instance(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(write_instance(&back), text);
}

#[test]
fn dp_policy_round_trips() {
    let m = example_two_agent();
    let pi = dp_solve(&m, &DpConfig::default()).unwrap().policy;
    let text = write_policy(&pi);
    assert_eq!(read_policy(&text).unwrap(), pi);
}

#[test]
fn dot_is_valid_graphviz() {
    for m in [example_two_agent(), random_small(7, &SmallParams::default())] {
        let p = partition_rewards(&m, &PartitionStrategy::Balanced).unwrap();
        for g in build_all(&m, &p, CrgOptions::default()).unwrap() {
            for bounds in [false, true] {
                let dot = export_dot(&m, &g, DotOptions { bounds });
                graphviz_rust::parse(&dot).unwrap_or_else(|e| panic!("{e}\n{dot}"));
            }
        }
        let g = build_all(&m, &p, CrgOptions::default()).unwrap();
        let cfg = SearchConfig { trace: true, ..SearchConfig::core() };
        let dot = export_trace_dot(&m, &core_solve(&m, &g, cfg).unwrap());
        graphviz_rust::parse(&dot).unwrap_or_else(|e| panic!("{e}\n{dot}"));
    }
}

#[test]
fn results_have_one_line_per_row() {
    let rows: Vec<ResultRow> = (0..4)
        .flat_map(|i| {
            Algorithm::ALL.into_iter().map(move |algorithm| ResultRow {
                instance_id: format!("inst{i}"),
                algorithm,
                value: Some(i as f64 * 0.5),
                joint_actions_evaluated: 10,
                nodes_pruned: 0,
                decouple_events: 0,
                wall_time_ms: 1,
                status: RunStatus::Solved,
            })
        })
        .collect();
    let text = write_results(&rows);
    assert_eq!(text.lines().count(), rows.len() + 1);
    assert_eq!(read_results(&text).unwrap(), rows);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instances_round_trip(seed in any::<u64>()) {
        let m = random_small(seed, &SmallParams::default());
        prop_assert!(validate_instance(&m).is_empty());
        let text = write_instance(&m);
        let back = read_instance(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_instance(&back), text);
    }
}
