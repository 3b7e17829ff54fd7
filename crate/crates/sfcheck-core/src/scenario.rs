//! The declarative scenario file format: TOML documents describing field
//! extensions, service functions, the chain order and the verification
//! policies, plus the evaluation options.
//!
//! Field values are written as strings and parsed according to the field's
//! declared kind: IPs in dotted-quad form, prefixes as `10.20.0.0/16` (or
//! the shorthand `10.20.*`), the encrypted sentinel as `"<enc>"`, the
//! wildcard as `"*"` (patterns and conditions only). Conditions are single
//! strings of the form `field relation operand`; counter deltas in `mod_sf`
//! updates carry an explicit sign (`"+1"`, `"-1"`).
//!
//! Unknown keys, unknown fields, unknown relations and dangling references
//! are parse errors, never warnings: a scenario that silently means
//! something else than written would defeat the point of verifying it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionSpec, StateUpdate};
use crate::model::{
    parse_prefix, parse_scalar, EncryptionParams, FieldCatalog, FieldClass, FieldDef, Packet,
    State, Traffic, Value, ValueKind,
};
use crate::policy::{
    AbsentMode, Condition, ConditionField, Policy, Relation, ResolutionStrategy, Rule,
    ServiceFunction, ServiceFunctionChain,
};
use crate::verify::{MatchMode, PacketPattern, TrafficPattern, VerificationPolicy};

/// Errors from parsing, validating or serializing scenario documents.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario syntax error: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn invalid(path: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Evaluation options declared by a scenario (overridable per run).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioOptions {
    pub absent_mode: AbsentMode,
    pub match_mode: MatchMode,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub options: ScenarioOptions,
    /// Field definitions this scenario adds on top of the standard catalog.
    pub extensions: Vec<(FieldClass, FieldDef)>,
    /// The standard catalog with extensions applied.
    pub catalog: FieldCatalog,
    /// Service functions keyed by name.
    pub functions: BTreeMap<String, ServiceFunction>,
    /// Chain order, referencing function names.
    pub chain_names: Vec<String>,
    pub policies: Vec<VerificationPolicy>,
}

impl Scenario {
    /// Materialize the chain in declared order.
    pub fn chain(&self) -> Result<ServiceFunctionChain, ScenarioError> {
        let functions =
            self.chain_names
                .iter()
                .map(|name| {
                    self.functions.get(name).cloned().ok_or_else(|| {
                        invalid("chain", format!("unknown service function `{name}`"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
        ServiceFunctionChain::new(functions).map_err(|e| invalid("chain", e))
    }

    pub fn find_policy(&self, name: &str) -> Option<&VerificationPolicy> {
        self.policies.iter().find(|p| p.name == name)
    }
}

// ---------------------------------------------------------------------------
// Raw document shapes (serde <-> TOML)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    chain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<RawOptions>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fields: Vec<RawFieldDef>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    service_functions: BTreeMap<String, RawServiceFunction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    policies: Vec<RawPolicy>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    absent_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    match_mode: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFieldDef {
    name: String,
    class: FieldClass,
    kind: ValueKind,
    bits: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServiceFunction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<String>,
    default_action: RawAction,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    state: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rules: Vec<RawRule>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    #[serde(default)]
    when: Vec<String>,
    then: Vec<RawAction>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawAction {
    Allow,
    Deny,
    ModNf(BTreeMap<String, String>),
    ModSf(BTreeMap<String, String>),
    Encapsulate {
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        add: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner_into: Option<String>,
    },
    Encrypt {
        fields: Vec<String>,
        cipher: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    input: Vec<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    expected: Vec<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    initial_state: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    expected_state: BTreeMap<String, String>,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse and fully validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text)?;

    let options = parse_options(raw.options.as_ref())?;

    let mut catalog = FieldCatalog::standard();
    let mut extensions = Vec::with_capacity(raw.fields.len());
    for (i, f) in raw.fields.iter().enumerate() {
        let def = FieldDef::new(f.name.clone(), f.kind, f.bits);
        catalog
            .register(f.class, def.clone())
            .map_err(|e| invalid(format!("fields[{i}]"), e))?;
        extensions.push((f.class, def));
    }

    let mut functions = BTreeMap::new();
    for (name, raw_sf) in &raw.service_functions {
        let path = format!("service_functions.{name}");
        let sf = parse_service_function(&catalog, name, raw_sf, &path)?;
        sf.validate(&catalog).map_err(|e| invalid(&path, e))?;
        functions.insert(name.clone(), sf);
    }

    for (i, name) in raw.chain.iter().enumerate() {
        if !functions.contains_key(name) {
            return Err(invalid(
                format!("chain[{i}]"),
                format!("unknown service function `{name}`"),
            ));
        }
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for name in &raw.chain {
            if !seen.insert(name) {
                return Err(invalid("chain", format!("`{name}` appears more than once")));
            }
        }
    }

    let mut policies = Vec::with_capacity(raw.policies.len());
    let mut policy_names = std::collections::BTreeSet::new();
    for (i, raw_policy) in raw.policies.iter().enumerate() {
        let path = format!("policies[{i}]");
        if !policy_names.insert(raw_policy.name.clone()) {
            return Err(invalid(
                &path,
                format!("duplicate policy name `{}`", raw_policy.name),
            ));
        }
        policies.push(parse_policy(
            &catalog,
            raw_policy,
            &path,
            options.match_mode,
        )?);
    }

    Ok(Scenario {
        name: raw.name,
        options,
        extensions,
        catalog,
        functions,
        chain_names: raw.chain,
        policies,
    })
}

fn parse_options(raw: Option<&RawOptions>) -> Result<ScenarioOptions, ScenarioError> {
    let mut options = ScenarioOptions::default();
    if let Some(raw) = raw {
        if let Some(s) = &raw.absent_mode {
            options.absent_mode = s.parse().map_err(|e| invalid("options.absent_mode", e))?;
        }
        if let Some(s) = &raw.match_mode {
            options.match_mode = s.parse().map_err(|e| invalid("options.match_mode", e))?;
        }
    }
    Ok(options)
}

fn parse_service_function(
    catalog: &FieldCatalog,
    name: &str,
    raw: &RawServiceFunction,
    path: &str,
) -> Result<ServiceFunction, ScenarioError> {
    let resolution = match &raw.resolution {
        None => ResolutionStrategy::FirstMatch,
        Some(s) => s
            .parse()
            .map_err(|e| invalid(format!("{path}.resolution"), e))?,
    };

    let default_action = parse_action(
        catalog,
        &raw.default_action,
        &format!("{path}.default_action"),
    )?;

    let mut rules = Vec::with_capacity(raw.rules.len());
    for (ri, raw_rule) in raw.rules.iter().enumerate() {
        let mut conditions = Vec::with_capacity(raw_rule.when.len());
        for (ci, text) in raw_rule.when.iter().enumerate() {
            let cpath = format!("{path}.rules[{ri}].when[{ci}]");
            conditions.push(parse_condition(catalog, text).map_err(|e| invalid(cpath, e))?);
        }
        let mut actions = Vec::with_capacity(raw_rule.then.len());
        for (ai, raw_action) in raw_rule.then.iter().enumerate() {
            let apath = format!("{path}.rules[{ri}].then[{ai}]");
            actions.push(parse_action(catalog, raw_action, &apath)?);
        }
        if actions.is_empty() {
            return Err(invalid(
                format!("{path}.rules[{ri}].then"),
                "a rule needs at least one action",
            ));
        }
        rules.push(Rule::new(conditions, actions));
    }

    let state = parse_state(catalog, &raw.state, &format!("{path}.state"))?;

    Ok(ServiceFunction::new(
        name,
        Policy::new(rules, resolution, default_action),
        state,
    ))
}

fn parse_state(
    catalog: &FieldCatalog,
    raw: &BTreeMap<String, String>,
    path: &str,
) -> Result<State, ScenarioError> {
    let mut entries = Vec::with_capacity(raw.len());
    for (field, text) in raw {
        let def = catalog
            .require_state(field)
            .map_err(|e| invalid(format!("{path}.{field}"), e))?;
        let value = parse_scalar(def.kind, text)
            .map_err(|_| kind_error(format!("{path}.{field}"), def.kind, text))?;
        entries.push((field.clone(), value));
    }
    State::from_entries(catalog, entries).map_err(|e| invalid(path, e))
}

fn kind_error(path: String, kind: ValueKind, text: &str) -> ScenarioError {
    invalid(path, format!("`{text}` is not a valid {kind} value"))
}

fn parse_action(
    catalog: &FieldCatalog,
    raw: &RawAction,
    path: &str,
) -> Result<ActionSpec, ScenarioError> {
    let action = match raw {
        RawAction::Allow => ActionSpec::Allow,
        RawAction::Deny => ActionSpec::Deny,
        RawAction::ModNf(assignments) => {
            let mut out = BTreeMap::new();
            for (field, text) in assignments {
                let fpath = format!("{path}.mod_nf.{field}");
                let def = catalog
                    .require_network(field)
                    .map_err(|e| invalid(&fpath, e))?;
                if text == "*" {
                    return Err(invalid(fpath, "wildcard is not a valid assignment value"));
                }
                let value =
                    parse_scalar(def.kind, text).map_err(|_| kind_error(fpath, def.kind, text))?;
                out.insert(field.clone(), value);
            }
            ActionSpec::ModNf { assignments: out }
        }
        RawAction::ModSf(updates) => {
            let mut out = BTreeMap::new();
            for (field, text) in updates {
                let fpath = format!("{path}.mod_sf.{field}");
                let def = catalog
                    .require_state(field)
                    .map_err(|e| invalid(&fpath, e))?;
                let update = if text.starts_with('+') || text.starts_with('-') {
                    let delta: i64 = text
                        .parse()
                        .map_err(|_| invalid(&fpath, format!("`{text}` is not a signed delta")))?;
                    StateUpdate::Delta(delta)
                } else {
                    if text == "*" {
                        return Err(invalid(fpath, "wildcard is not a valid assignment value"));
                    }
                    let value = parse_scalar(def.kind, text)
                        .map_err(|_| kind_error(fpath.clone(), def.kind, text))?;
                    StateUpdate::SetTo(value)
                };
                out.insert(field.clone(), update);
            }
            ActionSpec::ModSf { updates: out }
        }
        RawAction::Encapsulate { add, inner_into } => {
            let mut added = BTreeMap::new();
            for (field, text) in add {
                let fpath = format!("{path}.encapsulate.add.{field}");
                let def = catalog
                    .require_network(field)
                    .map_err(|e| invalid(&fpath, e))?;
                if text == "*" {
                    return Err(invalid(fpath, "wildcard is not a valid assignment value"));
                }
                let value =
                    parse_scalar(def.kind, text).map_err(|_| kind_error(fpath, def.kind, text))?;
                added.insert(field.clone(), value);
            }
            ActionSpec::Encapsulate {
                added,
                inner_into: inner_into.clone(),
            }
        }
        RawAction::Encrypt { fields, cipher } => ActionSpec::Encrypt {
            targets: fields.clone(),
            params: EncryptionParams::new(cipher.clone())
                .map_err(|e| invalid(format!("{path}.encrypt.cipher"), e))?,
        },
    };
    Ok(action)
}

/// Parse a condition string: `field relation operand`.
///
/// The field is a registered name or one of `any-network-field` /
/// `any-state-field`; the relation is one of the supported tokens; the
/// operand is everything after the relation (so payload text may contain
/// spaces).
pub fn parse_condition(catalog: &FieldCatalog, text: &str) -> Result<Condition, String> {
    let text = text.trim();
    let (field_token, rest) = text
        .split_once(char::is_whitespace)
        .ok_or_else(|| format!("expected `field relation operand`, found `{text}`"))?;
    let rest = rest.trim_start();
    let (relation_token, operand_text) = rest
        .split_once(char::is_whitespace)
        .map(|(r, v)| (r, v.trim()))
        .unwrap_or((rest, ""));

    let relation: Relation = relation_token.parse()?;
    if operand_text.is_empty() {
        return Err(format!("missing operand in `{text}`"));
    }

    let (field, kind_hint) = match field_token {
        "any-network-field" => (ConditionField::AnyNetwork, None),
        "any-state-field" => (ConditionField::AnyState, None),
        name => match catalog.class_of(name) {
            Some(FieldClass::Network) => (
                ConditionField::Network(name.to_string()),
                Some(catalog.network(name).expect("classified").kind),
            ),
            Some(FieldClass::State) => (
                ConditionField::State(name.to_string()),
                Some(catalog.state(name).expect("classified").kind),
            ),
            None => return Err(format!("unknown field `{name}`")),
        },
    };

    let operand = parse_operand(kind_hint, relation, operand_text)?;
    Ok(Condition::new(field, relation, operand))
}

fn is_set_relation(relation: Relation) -> bool {
    matches!(
        relation,
        Relation::In | Relation::NotIn | Relation::Subset | Relation::NotSuperset
    )
}

fn parse_operand(
    kind_hint: Option<ValueKind>,
    relation: Relation,
    text: &str,
) -> Result<Value, String> {
    if text == "*" {
        return Ok(Value::Wildcard);
    }
    if text == "<enc>" {
        return Ok(Value::encrypted_sentinel());
    }
    if is_set_relation(relation) {
        if let Some(inner) = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            let members = inner
                .split(',')
                .map(str::trim)
                .filter(|m| !m.is_empty())
                .map(|m| parse_operand_scalar(kind_hint, m))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Value::set(members));
        }
    }
    parse_operand_scalar(kind_hint, text)
}

fn parse_operand_scalar(kind_hint: Option<ValueKind>, text: &str) -> Result<Value, String> {
    match kind_hint {
        Some(ValueKind::IpAddress) => {
            if let Ok(ip) = text.parse() {
                return Ok(Value::Ip(ip));
            }
            parse_prefix(text).ok_or_else(|| format!("`{text}` is not an IP address or prefix"))
        }
        Some(ValueKind::IpPrefixSet) => {
            parse_prefix(text).ok_or_else(|| format!("`{text}` is not an IP prefix"))
        }
        Some(kind @ (ValueKind::PortNumber | ValueKind::IntegerCounter)) => {
            parse_scalar(kind, text).map_err(|_| format!("`{text}` is not a valid {kind} value"))
        }
        Some(ValueKind::EnumToken | ValueKind::OpaqueText | ValueKind::Payload) => {
            Ok(Value::Text(text.to_string()))
        }
        // No kind context (any-field conditions): guess the densest type.
        None => {
            if let Ok(n) = text.parse::<i64>() {
                return Ok(Value::Int(n));
            }
            if let Ok(ip) = text.parse() {
                return Ok(Value::Ip(ip));
            }
            if let Some(prefix) = parse_prefix(text) {
                return Ok(prefix);
            }
            Ok(Value::Text(text.to_string()))
        }
    }
}

fn parse_packet(
    catalog: &FieldCatalog,
    raw: &BTreeMap<String, String>,
    path: &str,
) -> Result<Packet, ScenarioError> {
    let mut entries = Vec::with_capacity(raw.len());
    for (field, text) in raw {
        let fpath = format!("{path}.{field}");
        let def = catalog
            .require_network(field)
            .map_err(|e| invalid(&fpath, e))?;
        if text == "*" {
            return Err(invalid(
                fpath,
                "wildcard values are not allowed in input packets",
            ));
        }
        let value = parse_scalar(def.kind, text).map_err(|_| kind_error(fpath, def.kind, text))?;
        entries.push((field.clone(), value));
    }
    Packet::from_entries(catalog, entries).map_err(|e| invalid(path, e))
}

fn parse_pattern(
    catalog: &FieldCatalog,
    raw: &BTreeMap<String, String>,
    path: &str,
) -> Result<PacketPattern, ScenarioError> {
    let mut entries = Vec::with_capacity(raw.len());
    for (field, text) in raw {
        let fpath = format!("{path}.{field}");
        let def = catalog
            .require_network(field)
            .map_err(|e| invalid(&fpath, e))?;
        let value = if text == "*" {
            Value::Wildcard
        } else {
            parse_scalar(def.kind, text).map_err(|_| kind_error(fpath, def.kind, text))?
        };
        entries.push((field.clone(), value));
    }
    Ok(PacketPattern::new(entries))
}

fn parse_policy(
    catalog: &FieldCatalog,
    raw: &RawPolicy,
    path: &str,
    match_mode: MatchMode,
) -> Result<VerificationPolicy, ScenarioError> {
    let mut input = Vec::with_capacity(raw.input.len());
    for (i, p) in raw.input.iter().enumerate() {
        input.push(parse_packet(catalog, p, &format!("{path}.input[{i}]"))?);
    }
    let mut expected = Vec::with_capacity(raw.expected.len());
    for (i, p) in raw.expected.iter().enumerate() {
        expected.push(parse_pattern(catalog, p, &format!("{path}.expected[{i}]"))?);
    }
    let initial_state = parse_state(
        catalog,
        &raw.initial_state,
        &format!("{path}.initial_state"),
    )?;
    let expected_state = parse_state(
        catalog,
        &raw.expected_state,
        &format!("{path}.expected_state"),
    )?;
    Ok(VerificationPolicy {
        name: raw.name.clone(),
        input_traffic: Traffic::new(input),
        initial_state,
        expected_traffic: TrafficPattern::new(expected, match_mode),
        expected_state,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Render a scenario back to its document form. Values are written in the
/// canonical syntax the parser accepts, so `parse(serialize(s)) == s` for
/// any scenario the parser produced.
pub fn serialize_scenario(scenario: &Scenario) -> Result<String, ScenarioError> {
    let raw = RawScenario {
        name: scenario.name.clone(),
        chain: scenario.chain_names.clone(),
        options: Some(RawOptions {
            absent_mode: Some(scenario.options.absent_mode.to_string()),
            match_mode: Some(scenario.options.match_mode.to_string()),
        }),
        fields: scenario
            .extensions
            .iter()
            .map(|(class, def)| RawFieldDef {
                name: def.name.clone(),
                class: *class,
                kind: def.kind,
                bits: def.bit_length,
            })
            .collect(),
        service_functions: scenario
            .functions
            .iter()
            .map(|(name, sf)| (name.clone(), service_function_to_raw(sf)))
            .collect(),
        policies: scenario.policies.iter().map(policy_to_raw).collect(),
    };
    Ok(toml::to_string(&raw)?)
}

fn service_function_to_raw(sf: &ServiceFunction) -> RawServiceFunction {
    RawServiceFunction {
        resolution: Some(sf.policy.resolution.to_string()),
        default_action: action_to_raw(&sf.policy.default_action),
        state: sf
            .state
            .entries()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
        rules: sf
            .policy
            .rules
            .iter()
            .map(|rule| RawRule {
                when: rule.conditions.iter().map(|c| c.to_string()).collect(),
                then: rule.actions.iter().map(action_to_raw).collect(),
            })
            .collect(),
    }
}

fn action_to_raw(action: &ActionSpec) -> RawAction {
    match action {
        ActionSpec::Allow => RawAction::Allow,
        ActionSpec::Deny => RawAction::Deny,
        ActionSpec::ModNf { assignments } => RawAction::ModNf(
            assignments
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
        ),
        ActionSpec::ModSf { updates } => RawAction::ModSf(
            updates
                .iter()
                .map(|(k, u)| (k.clone(), u.to_string()))
                .collect(),
        ),
        ActionSpec::Encapsulate { added, inner_into } => RawAction::Encapsulate {
            add: added
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            inner_into: inner_into.clone(),
        },
        ActionSpec::Encrypt { targets, params } => RawAction::Encrypt {
            fields: targets.clone(),
            cipher: params.spec().to_string(),
        },
    }
}

fn policy_to_raw(policy: &VerificationPolicy) -> RawPolicy {
    RawPolicy {
        name: policy.name.clone(),
        input: policy
            .input_traffic
            .iter()
            .map(|p| {
                p.entries()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect()
            })
            .collect(),
        expected: policy
            .expected_traffic
            .packets
            .iter()
            .map(|p| {
                p.entries()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect()
            })
            .collect(),
        initial_state: policy
            .initial_state
            .entries()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
        expected_state: policy
            .expected_state
            .entries()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect(),
    }
}
