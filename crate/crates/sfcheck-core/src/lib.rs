//! Verification engine for security policies in service function chains.
//!
//! A service function chain (SFC) is an ordered sequence of service functions
//! (firewalls, NATs, traffic monitors, VPN gateways, ...) that traffic has to
//! traverse between source and destination. Each service function is modeled
//! as a rule-driven policy plus an optional internal state table. This crate
//! models how such chains transform traffic and checks declared verification
//! policies (input traffic, initial state, expected traffic, expected state)
//! against the chain, partitioning them into enforced and violated sets with
//! per-hop evidence.
//!
//! The pieces:
//!
//! - [`model`]: fields, values, packets, traffic and state tables
//! - [`policy`]: conditions, rules, policies and rule resolution
//! - [`action`]: the packet/state transformers a rule can apply
//! - [`transform`]: policy transformation of packets and traffic
//! - [`verify`]: chain verification and verdict partitioning
//! - [`archetypes`]: ready-made service function constructors
//! - [`scenario`]: the declarative scenario file format
//! - [`report`]: text and JSON report rendering

pub mod action;
pub mod archetypes;
pub mod model;
pub mod policy;
pub mod report;
pub mod scenario;
pub mod transform;
pub mod verify;

pub use action::{apply_action, ActionError, ActionSpec, StateUpdate};
pub use model::{
    normalize_traffic, packet_equals, packet_get, state_merge, EncryptionParams, FieldCatalog,
    FieldClass, FieldDef, GlobalState, ModelError, Packet, SfState, State, Traffic, Value,
    ValueKind,
};
pub use policy::{
    condition_satisfied, eval_relation, resolve, rule_matches, AbsentMode, Condition,
    ConditionField, EvalError, Policy, Relation, ResolutionStrategy, Rule, Ruling, ServiceFunction,
    ServiceFunctionChain,
};
pub use report::{emit_report, emit_trace, ReportFormat};
pub use scenario::{parse_scenario, serialize_scenario, Scenario, ScenarioError, ScenarioOptions};
pub use transform::{transform_packet, transform_traffic, RulingRecord, TraceStep, TransformError};
pub use verify::{
    match_state, match_traffic, verify_all, verify_policy, HopTrace, MatchMode, Mismatch,
    PacketPattern, PolicyOutcome, TrafficPattern, Verdict, VerificationPolicy, VerificationReport,
    VerificationResult, VerifyOptions,
};
