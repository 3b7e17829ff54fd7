//! Rendering of verification reports: a human-readable text form and a
//! stable machine-readable JSON form. Both are deterministic: the same
//! report renders to byte-identical output on every run.

use std::fmt::Write as _;

use serde_json::{json, Map, Value as Json};

use crate::model::{GlobalState, Packet, Traffic};
use crate::scenario::ScenarioOptions;
use crate::transform::RulingRecord;
use crate::verify::{HopTrace, PolicyOutcome, VerificationReport, VerificationResult};

/// Output format for reports and traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// Render a full verification report.
///
/// `with_traces` inlines the per-hop snapshots into the text form; the JSON
/// form always carries them.
pub fn emit_report(
    scenario: &str,
    options: ScenarioOptions,
    report: &VerificationReport,
    format: ReportFormat,
    with_traces: bool,
) -> String {
    match format {
        ReportFormat::Text => text_report(scenario, options, report, with_traces),
        ReportFormat::Json => json_report(scenario, options, report),
    }
}

/// Render the hop-by-hop trace of a single policy.
pub fn emit_trace(
    scenario: &str,
    options: ScenarioOptions,
    result: &VerificationResult,
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Text => text_trace(scenario, options, result),
        ReportFormat::Json => {
            let mut root = Map::new();
            root.insert("scenario".into(), json!(scenario));
            root.insert("options".into(), options_json(options));
            root.insert("result".into(), result_json(result));
            pretty(&Json::Object(root))
        }
    }
}

fn options_line(options: ScenarioOptions) -> String {
    format!(
        "options: absent-mode={}, match-mode={}",
        options.absent_mode, options.match_mode
    )
}

fn text_report(
    scenario: &str,
    options: ScenarioOptions,
    report: &VerificationReport,
    with_traces: bool,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {scenario}");
    let _ = writeln!(out, "{}", options_line(options));
    for outcome in &report.outcomes {
        match outcome {
            PolicyOutcome::Completed(result) => {
                let _ = writeln!(out, "policy {}: {}", result.policy, result.verdict);
                if let Some(mismatch) = &result.mismatch {
                    let _ = writeln!(out, "  mismatch: {mismatch}");
                }
                if with_traces {
                    let _ = writeln!(
                        out,
                        "  input:{}",
                        snapshot_line(&result.input_traffic, &result.input_state)
                    );
                    for hop in &result.hops {
                        let _ = writeln!(
                            out,
                            "  after {}:{}",
                            hop.sf,
                            snapshot_line(&hop.traffic, &hop.state)
                        );
                    }
                }
            }
            PolicyOutcome::Failed { policy, error } => {
                let _ = writeln!(out, "policy {policy}: error");
                let _ = writeln!(out, "  error: {error}");
            }
        }
    }
    let enforced = report.p_true().len();
    let violated = report.p_false().len();
    let _ = writeln!(out, "summary: {enforced} enforced, {violated} violated");
    out
}

fn snapshot_line(traffic: &Traffic, state: &GlobalState) -> String {
    format!(" T = {traffic}  S = {state}")
}

fn text_trace(scenario: &str, options: ScenarioOptions, result: &VerificationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy {} ({scenario})", result.policy);
    let _ = writeln!(out, "{}", options_line(options));
    let _ = writeln!(
        out,
        "input:{}",
        snapshot_line(&result.input_traffic, &result.input_state)
    );
    for hop in &result.hops {
        let _ = writeln!(
            out,
            "after {}:{}",
            hop.sf,
            snapshot_line(&hop.traffic, &hop.state)
        );
    }
    let _ = writeln!(out, "verdict: {}", result.verdict);
    if let Some(mismatch) = &result.mismatch {
        let _ = writeln!(out, "mismatch: {mismatch}");
    }
    out
}

fn json_report(scenario: &str, options: ScenarioOptions, report: &VerificationReport) -> String {
    let mut root = Map::new();
    root.insert("scenario".into(), json!(scenario));
    root.insert("options".into(), options_json(options));
    root.insert(
        "results".into(),
        Json::Array(report.outcomes.iter().map(outcome_json).collect()),
    );
    pretty(&Json::Object(root))
}

fn options_json(options: ScenarioOptions) -> Json {
    json!({
        "absent_mode": options.absent_mode.to_string(),
        "match_mode": options.match_mode.to_string(),
    })
}

fn outcome_json(outcome: &PolicyOutcome) -> Json {
    match outcome {
        PolicyOutcome::Completed(result) => result_json(result),
        PolicyOutcome::Failed { policy, error } => json!({
            "policy": policy,
            "verdict": "error",
            "error": error,
        }),
    }
}

fn result_json(result: &VerificationResult) -> Json {
    let mut obj = Map::new();
    obj.insert("policy".into(), json!(result.policy));
    obj.insert("verdict".into(), json!(result.verdict.to_string()));
    if let Some(mismatch) = &result.mismatch {
        obj.insert("mismatch".into(), json!(mismatch.to_string()));
    }
    obj.insert(
        "input".into(),
        json!({
            "traffic": traffic_json(&result.input_traffic),
            "state": state_json(&result.input_state),
        }),
    );
    obj.insert(
        "hops".into(),
        Json::Array(result.hops.iter().map(hop_json).collect()),
    );
    Json::Object(obj)
}

fn hop_json(hop: &HopTrace) -> Json {
    json!({
        "sf": hop.sf,
        "traffic": traffic_json(&hop.traffic),
        "state": state_json(&hop.state),
        "rulings": hop
            .steps
            .iter()
            .map(|step| match step.ruling {
                RulingRecord::Rule(i) => format!("rule {i}"),
                RulingRecord::Default => "default".to_string(),
                RulingRecord::NullPassthrough => "null".to_string(),
            })
            .collect::<Vec<_>>(),
    })
}

fn traffic_json(traffic: &Traffic) -> Json {
    Json::Array(traffic.iter().map(packet_json).collect())
}

fn packet_json(packet: &Packet) -> Json {
    if packet.is_null() {
        return Json::Null;
    }
    let mut obj = Map::new();
    for (k, v) in packet.entries() {
        obj.insert(k.clone(), json!(v.to_string()));
    }
    Json::Object(obj)
}

fn state_json(state: &GlobalState) -> Json {
    let mut obj = Map::new();
    for (k, v) in state.entries() {
        obj.insert(k.clone(), json!(v.to_string()));
    }
    Json::Object(obj)
}

fn pretty(value: &Json) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization is infallible");
    s.push('\n');
    s
}
