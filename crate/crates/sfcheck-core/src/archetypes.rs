//! Constructors for common service functions, expressed entirely in terms
//! of rules and actions: traffic monitors, application firewalls, VPN
//! gateways, packet filters and NATs. Deep-inspection style functions are
//! monitors with richer conditions, not separate archetypes.

use std::collections::BTreeMap;

use crate::action::{ActionSpec, StateUpdate};
use crate::model::{EncryptionParams, FieldCatalog, SfState, Value, ValueKind};
use crate::policy::{
    Condition, Policy, ResolutionStrategy, Rule, ServiceFunction, ValidationError,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArchetypeError {
    #[error("counter `{field}` must be an integer-counter state field")]
    BadCounter { field: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

fn build(
    catalog: &FieldCatalog,
    name: &str,
    rules: Vec<Rule>,
    default_action: ActionSpec,
    state: SfState,
) -> Result<ServiceFunction, ArchetypeError> {
    let sf = ServiceFunction::new(
        name,
        Policy::new(rules, ResolutionStrategy::FirstMatch, default_action),
        state,
    );
    sf.validate(catalog)?;
    Ok(sf)
}

/// A monitor that increments `counter` for every packet satisfying `watch`
/// and forwards everything unchanged. The counter starts at 0.
pub fn traffic_monitor(
    catalog: &FieldCatalog,
    name: &str,
    watch: Vec<Condition>,
    counter: &str,
) -> Result<ServiceFunction, ArchetypeError> {
    match catalog.state(counter) {
        Some(def) if def.kind == ValueKind::IntegerCounter => {}
        _ => {
            return Err(ArchetypeError::BadCounter {
                field: counter.to_string(),
            })
        }
    }
    let mut state = SfState::new();
    state.set(counter.to_string(), Value::Int(0));
    build(
        catalog,
        name,
        vec![Rule::new(
            watch,
            vec![ActionSpec::mod_sf([(
                counter.to_string(),
                StateUpdate::Delta(1),
            )])],
        )],
        ActionSpec::Allow,
        state,
    )
}

/// A stateless firewall that drops packets satisfying `block` and forwards
/// the rest.
pub fn app_firewall(
    catalog: &FieldCatalog,
    name: &str,
    block: Vec<Condition>,
) -> Result<ServiceFunction, ArchetypeError> {
    build(
        catalog,
        name,
        vec![Rule::new(block, vec![ActionSpec::Deny])],
        ActionSpec::Allow,
        SfState::new(),
    )
}

/// A stateless tunnel ingress: packets satisfying `select` are packaged
/// whole into `inner_into`, the `outer` header fields are added, and the
/// payload slot is encrypted. Everything else passes untouched.
pub fn vpn_gateway(
    catalog: &FieldCatalog,
    name: &str,
    select: Vec<Condition>,
    outer: impl IntoIterator<Item = (String, Value)>,
    inner_into: &str,
    enc: EncryptionParams,
) -> Result<ServiceFunction, ArchetypeError> {
    build(
        catalog,
        name,
        vec![Rule::new(
            select,
            vec![
                ActionSpec::Encapsulate {
                    added: outer.into_iter().collect(),
                    inner_into: Some(inner_into.to_string()),
                },
                ActionSpec::Encrypt {
                    targets: vec![inner_into.to_string()],
                    params: enc,
                },
            ],
        )],
        ActionSpec::Allow,
        SfState::new(),
    )
}

/// Verdict of a packet-filter rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    Allow,
    Deny,
}

impl From<FilterVerdict> for ActionSpec {
    fn from(v: FilterVerdict) -> Self {
        match v {
            FilterVerdict::Allow => ActionSpec::Allow,
            FilterVerdict::Deny => ActionSpec::Deny,
        }
    }
}

/// A stateless first-match packet filter with allow/deny rules.
pub fn packet_filter(
    catalog: &FieldCatalog,
    name: &str,
    rules: Vec<(Vec<Condition>, FilterVerdict)>,
    default: FilterVerdict,
) -> Result<ServiceFunction, ArchetypeError> {
    build(
        catalog,
        name,
        rules
            .into_iter()
            .map(|(conditions, verdict)| Rule::new(conditions, vec![verdict.into()]))
            .collect(),
        default.into(),
        SfState::new(),
    )
}

/// A stateless NAT: packets satisfying `select` get the `rewrite` fields
/// overwritten; everything else passes untouched.
pub fn nat(
    catalog: &FieldCatalog,
    name: &str,
    select: Vec<Condition>,
    rewrite: BTreeMap<String, Value>,
) -> Result<ServiceFunction, ArchetypeError> {
    build(
        catalog,
        name,
        vec![Rule::new(
            select,
            vec![ActionSpec::ModNf {
                assignments: rewrite,
            }],
        )],
        ActionSpec::Allow,
        SfState::new(),
    )
}
