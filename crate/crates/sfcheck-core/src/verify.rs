//! Chain verification: fold a verification policy's traffic and global
//! state through the chain, then compare the outcome against the declared
//! expectations and partition policies into enforced and violated sets.
//!
//! Each verification policy runs in isolation: every service function's
//! internal state is re-initialized from its declared initial state merged
//! with the policy's initial global state, so verdicts do not depend on the
//! order in which policies are checked.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{normalize_traffic, GlobalState, Packet, Traffic, Value};
use crate::policy::{AbsentMode, ServiceFunctionChain};
use crate::transform::{transform_traffic, TraceStep, TransformError};

/// How expected packets constrain actual packets.
///
/// `Subset` requires every field named by the pattern to be present with a
/// satisfying value; `Exact` additionally forbids extra fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    #[default]
    Subset,
    Exact,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subset" => Ok(MatchMode::Subset),
            "exact" => Ok(MatchMode::Exact),
            other => Err(format!(
                "unknown match mode `{other}` (expected subset|exact)"
            )),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchMode::Subset => f.write_str("subset"),
            MatchMode::Exact => f.write_str("exact"),
        }
    }
}

/// An expected packet: field constraints where the wildcard `*` accepts any
/// value and the encrypted sentinel accepts any encrypted value.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PacketPattern {
    entries: std::collections::BTreeMap<String, Value>,
}

impl PacketPattern {
    pub fn new(entries: impl IntoIterator<Item = (String, Value)>) -> Self {
        PacketPattern {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn value_matches(pattern: &Value, actual: &Value) -> bool {
        match pattern {
            Value::Wildcard => true,
            // The sentinel stands for "some encrypted value", whatever the
            // declared parameters.
            Value::Encrypted { .. } => actual.is_encrypted(),
            other => other == actual,
        }
    }

    fn mismatch_against(&self, index: usize, actual: &Packet, mode: MatchMode) -> Option<Mismatch> {
        for (field, pattern) in &self.entries {
            match actual.get(field) {
                None => {
                    return Some(Mismatch::MissingField {
                        packet: index,
                        field: field.clone(),
                        expected: pattern.to_string(),
                    })
                }
                Some(value) => {
                    if !Self::value_matches(pattern, value) {
                        return Some(Mismatch::FieldValue {
                            packet: index,
                            field: field.clone(),
                            expected: pattern.to_string(),
                            actual: value.to_string(),
                        });
                    }
                }
            }
        }
        if mode == MatchMode::Exact {
            for field in actual.field_names() {
                if !self.entries.contains_key(field) {
                    return Some(Mismatch::ExtraField {
                        packet: index,
                        field: field.clone(),
                    });
                }
            }
        }
        None
    }
}

impl fmt::Display for PacketPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

/// The expected output traffic of a verification policy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrafficPattern {
    pub packets: Vec<PacketPattern>,
    pub match_mode: MatchMode,
}

impl TrafficPattern {
    pub fn new(packets: Vec<PacketPattern>, match_mode: MatchMode) -> Self {
        TrafficPattern {
            packets,
            match_mode,
        }
    }

    /// The empty expectation: all input traffic dropped.
    pub fn empty() -> Self {
        TrafficPattern::default()
    }
}

/// A verification policy: input traffic and initial global state the chain
/// receives, with the expected output traffic and final global state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationPolicy {
    pub name: String,
    pub input_traffic: Traffic,
    pub initial_state: GlobalState,
    pub expected_traffic: TrafficPattern,
    pub expected_state: GlobalState,
}

/// Knobs shared by a verification run.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub absent_mode: AbsentMode,
    /// When set, overrides the match mode carried by each traffic pattern.
    pub match_mode: Option<MatchMode>,
}

/// The verdict for one verification policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Enforced,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Enforced => f.write_str("enforced"),
            Verdict::Violated => f.write_str("violated"),
        }
    }
}

/// The first point where outcome and expectation diverge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    TrafficLength {
        expected: usize,
        actual: usize,
    },
    MissingField {
        packet: usize,
        field: String,
        expected: String,
    },
    FieldValue {
        packet: usize,
        field: String,
        expected: String,
        actual: String,
    },
    ExtraField {
        packet: usize,
        field: String,
    },
    StateValue {
        key: String,
        expected: String,
        actual: Option<String>,
    },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::TrafficLength { expected, actual } => write!(
                f,
                "final traffic has {actual} packet(s) after normalization, expected {expected}"
            ),
            Mismatch::MissingField {
                packet,
                field,
                expected,
            } => write!(
                f,
                "packet {packet}: field `{field}` missing, expected {expected}"
            ),
            Mismatch::FieldValue {
                packet,
                field,
                expected,
                actual,
            } => write!(
                f,
                "packet {packet}: field `{field}` is {actual}, expected {expected}"
            ),
            Mismatch::ExtraField { packet, field } => {
                write!(f, "packet {packet}: unexpected extra field `{field}`")
            }
            Mismatch::StateValue {
                key,
                expected,
                actual,
            } => match actual {
                Some(actual) => write!(f, "state key `{key}` is {actual}, expected {expected}"),
                None => write!(f, "state key `{key}` missing, expected {expected}"),
            },
        }
    }
}

/// Snapshot of the traffic and merged global state after one hop, with the
/// per-packet transformation evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopTrace {
    pub sf: String,
    pub traffic: Traffic,
    pub state: GlobalState,
    pub steps: Vec<TraceStep>,
}

/// Outcome of verifying one policy against a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub policy: String,
    pub verdict: Verdict,
    pub input_traffic: Traffic,
    pub input_state: GlobalState,
    pub hops: Vec<HopTrace>,
    pub mismatch: Option<Mismatch>,
}

/// A policy that could not be verified at all (broken configuration),
/// distinct from a clean violated verdict.
#[derive(Debug, Error, PartialEq)]
#[error("policy `{policy}`, service function `{sf}`: {source}")]
pub struct PolicyRunError {
    pub policy: String,
    pub sf: String,
    pub source: Box<TransformError>,
}

/// Per-policy outcome inside a report.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyOutcome {
    Completed(VerificationResult),
    Failed { policy: String, error: String },
}

impl PolicyOutcome {
    pub fn policy_name(&self) -> &str {
        match self {
            PolicyOutcome::Completed(r) => &r.policy,
            PolicyOutcome::Failed { policy, .. } => policy,
        }
    }

    pub fn is_enforced(&self) -> bool {
        matches!(
            self,
            PolicyOutcome::Completed(VerificationResult {
                verdict: Verdict::Enforced,
                ..
            })
        )
    }
}

/// The full verification outcome: one entry per policy, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub outcomes: Vec<PolicyOutcome>,
}

impl VerificationReport {
    /// Names of correctly enforced policies.
    pub fn p_true(&self) -> Vec<&str> {
        self.outcomes
            .iter()
            .filter(|o| o.is_enforced())
            .map(|o| o.policy_name())
            .collect()
    }

    /// Names of violated (or unverifiable) policies.
    pub fn p_false(&self) -> Vec<&str> {
        self.outcomes
            .iter()
            .filter(|o| !o.is_enforced())
            .map(|o| o.policy_name())
            .collect()
    }

    pub fn all_enforced(&self) -> bool {
        self.outcomes.iter().all(|o| o.is_enforced())
    }

    pub fn find(&self, policy: &str) -> Option<&PolicyOutcome> {
        self.outcomes.iter().find(|o| o.policy_name() == policy)
    }
}

/// Detailed traffic comparison; `None` means the pattern is satisfied.
/// Both sides are normalized first, lengths must agree, and packet `i` is
/// checked against pattern `i`.
pub fn traffic_mismatch(
    actual: &Traffic,
    expected: &TrafficPattern,
    override_mode: Option<MatchMode>,
) -> Option<Mismatch> {
    let mode = override_mode.unwrap_or(expected.match_mode);
    let actual = normalize_traffic(actual);
    if actual.len() != expected.packets.len() {
        return Some(Mismatch::TrafficLength {
            expected: expected.packets.len(),
            actual: actual.len(),
        });
    }
    for (i, (packet, pattern)) in actual.iter().zip(&expected.packets).enumerate() {
        if let Some(m) = pattern.mismatch_against(i, packet, mode) {
            return Some(m);
        }
    }
    None
}

/// Whether the normalized actual traffic satisfies the expected pattern.
pub fn match_traffic(actual: &Traffic, expected: &TrafficPattern) -> bool {
    traffic_mismatch(actual, expected, None).is_none()
}

/// Detailed state comparison; `None` means every expected key is present
/// with an equal value. Keys absent from the expectation are unconstrained.
pub fn state_mismatch(actual: &GlobalState, expected: &GlobalState) -> Option<Mismatch> {
    for (key, want) in expected.entries() {
        match actual.get(key) {
            Some(got) if got == want => {}
            got => {
                return Some(Mismatch::StateValue {
                    key: key.clone(),
                    expected: want.to_string(),
                    actual: got.map(|v| v.to_string()),
                })
            }
        }
    }
    None
}

/// Whether the final global state satisfies the expected state.
pub fn match_state(actual: &GlobalState, expected: &GlobalState) -> bool {
    state_mismatch(actual, expected).is_none()
}

/// Verify one policy against the chain.
///
/// Starting from the policy's input traffic and initial global state, each
/// service function transforms the running traffic with its own state slice
/// (its declared initial state overlaid with the owned keys of the running
/// global state); the slice's final value is merged back into the global
/// accumulator. The policy is enforced when both the normalized final
/// traffic and the final global state satisfy the expectations.
pub fn verify_policy(
    catalog: &crate::model::FieldCatalog,
    chain: &ServiceFunctionChain,
    policy: &VerificationPolicy,
    options: VerifyOptions,
) -> Result<VerificationResult, PolicyRunError> {
    let mut traffic = policy.input_traffic.clone();
    let mut global = policy.initial_state.clone();
    let mut hops = Vec::with_capacity(chain.len());

    for sf in chain.functions() {
        let owned = sf.owned_state_keys();
        let slice = sf.state.merge(&global.restrict(&owned));
        let (out, slice_after, steps) =
            transform_traffic(catalog, &sf.policy, &traffic, &slice, options.absent_mode).map_err(
                |source| PolicyRunError {
                    policy: policy.name.clone(),
                    sf: sf.name.clone(),
                    source: Box::new(source),
                },
            )?;
        traffic = out;
        global = global.merge(&slice_after);
        hops.push(HopTrace {
            sf: sf.name.clone(),
            traffic: traffic.clone(),
            state: global.clone(),
            steps,
        });
    }

    let mismatch = traffic_mismatch(&traffic, &policy.expected_traffic, options.match_mode)
        .or_else(|| state_mismatch(&global, &policy.expected_state));
    let verdict = if mismatch.is_none() {
        Verdict::Enforced
    } else {
        Verdict::Violated
    };

    Ok(VerificationResult {
        policy: policy.name.clone(),
        verdict,
        input_traffic: policy.input_traffic.clone(),
        input_state: policy.initial_state.clone(),
        hops,
        mismatch,
    })
}

/// Verify every policy, partitioning the set into enforced and violated.
/// A policy whose verification fails outright is recorded as failed and
/// counted on the violated side; other policies are unaffected.
pub fn verify_all(
    catalog: &crate::model::FieldCatalog,
    chain: &ServiceFunctionChain,
    policies: &[VerificationPolicy],
    options: VerifyOptions,
) -> VerificationReport {
    let outcomes = policies
        .iter()
        .map(|p| match verify_policy(catalog, chain, p, options) {
            Ok(result) => PolicyOutcome::Completed(result),
            Err(err) => PolicyOutcome::Failed {
                policy: p.name.clone(),
                error: err.to_string(),
            },
        })
        .collect();
    VerificationReport { outcomes }
}
