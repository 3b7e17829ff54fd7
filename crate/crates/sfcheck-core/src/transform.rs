//! The transformation a policy induces on packets and traffic.
//!
//! For a single packet the matched rule's actions (or the default action)
//! are composed left to right. For a traffic, packets are transformed in
//! order with the state threaded from one packet to the next, so counters
//! accumulate across the sequence. Dropped packets stay in the output as
//! null packets until normalization, keeping positions aligned with the
//! input.

use thiserror::Error;

use crate::action::{apply_action, ActionError, ActionSpec};
use crate::model::{FieldCatalog, Packet, SfState, Traffic};
use crate::policy::{resolve, AbsentMode, EvalError, Policy, Ruling};

/// Which ruling was applied to a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulingRecord {
    /// A rule matched (0-based position in the policy's rule order).
    Rule(usize),
    /// No rule matched; the default action fired.
    Default,
    /// The packet was already null and skipped resolution entirely.
    NullPassthrough,
}

/// One applied action with the packet/state pair it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub action: String,
    pub packet: Packet,
    pub state: SfState,
}

/// The evidence for one packet's transformation: the ruling plus every
/// intermediate pair along the action sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub ruling: RulingRecord,
    pub stages: Vec<StageRecord>,
}

/// Evaluation or action failures, located by rule and action index.
#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("condition evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{ruling} action {index} ({action}): {source}")]
    Action {
        ruling: String,
        index: usize,
        action: String,
        source: ActionError,
    },
}

/// Transform one packet: resolve the ruling, then apply its actions in
/// order, each consuming the previous pair. Null packets pass through
/// without touching the policy.
pub fn transform_packet(
    catalog: &FieldCatalog,
    policy: &Policy,
    packet: &Packet,
    state: &SfState,
    mode: AbsentMode,
) -> Result<(Packet, SfState, TraceStep), TransformError> {
    if packet.is_null() {
        return Ok((
            packet.clone(),
            state.clone(),
            TraceStep {
                ruling: RulingRecord::NullPassthrough,
                stages: Vec::new(),
            },
        ));
    }

    let (record, actions): (RulingRecord, &[ActionSpec]) =
        match resolve(catalog, policy, packet, state, mode)? {
            Ruling::Matched { index, rule } => (RulingRecord::Rule(index), &rule.actions),
            Ruling::Default(action) => (RulingRecord::Default, std::slice::from_ref(action)),
        };

    let ruling_label = match record {
        RulingRecord::Rule(i) => format!("rule {i}"),
        _ => "default action".to_string(),
    };

    let mut current = (packet.clone(), state.clone());
    let mut stages = Vec::with_capacity(actions.len());
    for (index, action) in actions.iter().enumerate() {
        let (p, s) = apply_action(catalog, action, &current.0, &current.1).map_err(|source| {
            TransformError::Action {
                ruling: ruling_label.clone(),
                index,
                action: action.to_string(),
                source,
            }
        })?;
        stages.push(StageRecord {
            action: action.to_string(),
            packet: p.clone(),
            state: s.clone(),
        });
        current = (p, s);
    }

    Ok((
        current.0,
        current.1,
        TraceStep {
            ruling: record,
            stages,
        },
    ))
}

/// Transform a traffic: a left fold over the packets in order, each one
/// transformed with the state produced by the previous packet. The output
/// traffic has the same length as the input; drops appear as null packets.
pub fn transform_traffic(
    catalog: &FieldCatalog,
    policy: &Policy,
    traffic: &Traffic,
    state: &SfState,
    mode: AbsentMode,
) -> Result<(Traffic, SfState, Vec<TraceStep>), TransformError> {
    let mut out = Vec::with_capacity(traffic.len());
    let mut steps = Vec::with_capacity(traffic.len());
    let mut current_state = state.clone();
    for packet in traffic.iter() {
        let (p, s, step) = transform_packet(catalog, policy, packet, &current_state, mode)?;
        out.push(p);
        steps.push(step);
        current_state = s;
    }
    Ok((Traffic::new(out), current_state, steps))
}
