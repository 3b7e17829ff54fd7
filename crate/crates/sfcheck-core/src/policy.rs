//! Policies, rules and conditions, plus the evaluation machinery that
//! decides which rule of a policy fires for a given packet/state pair.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::action::{ActionError, ActionSpec};
use crate::model::{FieldCatalog, ModelError, Packet, SfState, Value};

/// How absent fields behave in condition evaluation.
///
/// In `Paper` mode a condition on a field that is missing from the packet
/// (or state table) is vacuously satisfied; in `Strict` mode it is not.
/// Strict is the default: a monitor watching `ip_dst` should not fire on a
/// tunneled packet that no longer exposes that field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentMode {
    Paper,
    #[default]
    Strict,
}

impl FromStr for AbsentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(AbsentMode::Paper),
            "strict" => Ok(AbsentMode::Strict),
            other => Err(format!(
                "unknown absent mode `{other}` (expected paper|strict)"
            )),
        }
    }
}

impl fmt::Display for AbsentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsentMode::Paper => f.write_str("paper"),
            AbsentMode::Strict => f.write_str("strict"),
        }
    }
}

/// The field slot of a condition: a named network or state field, or the
/// any-field wildcards that are satisfied when at least one present field
/// satisfies the relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionField {
    Network(String),
    State(String),
    AnyNetwork,
    AnyState,
}

impl fmt::Display for ConditionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionField::Network(n) | ConditionField::State(n) => f.write_str(n),
            ConditionField::AnyNetwork => f.write_str("any-network-field"),
            ConditionField::AnyState => f.write_str("any-state-field"),
        }
    }
}

/// The closed set of supported relations. Unknown relation tokens in
/// scenario files are parse errors, not silent wildcards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Subset,
    NotSuperset,
    Any,
}

impl Relation {
    pub const ALL: [Relation; 11] = [
        Relation::Eq,
        Relation::Ne,
        Relation::Lt,
        Relation::Le,
        Relation::Gt,
        Relation::Ge,
        Relation::In,
        Relation::NotIn,
        Relation::Subset,
        Relation::NotSuperset,
        Relation::Any,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ne => "!=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::In => "in",
            Relation::NotIn => "not-in",
            Relation::Subset => "subset-of",
            Relation::NotSuperset => "not-superset-of",
            Relation::Any => "any",
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.token() == s)
            .ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A single condition `(field, relation, operand)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub field: ConditionField,
    pub relation: Relation,
    pub operand: Value,
}

impl Condition {
    pub fn new(field: ConditionField, relation: Relation, operand: Value) -> Self {
        Condition {
            field,
            relation,
            operand,
        }
    }

    /// Condition on a named network field.
    pub fn on_network(field: impl Into<String>, relation: Relation, operand: Value) -> Self {
        Condition::new(ConditionField::Network(field.into()), relation, operand)
    }

    /// Condition on a named state field.
    pub fn on_state(field: impl Into<String>, relation: Relation, operand: Value) -> Self {
        Condition::new(ConditionField::State(field.into()), relation, operand)
    }

    /// Check the field is registered and the operand fits its kind.
    pub fn validate(&self, catalog: &FieldCatalog) -> Result<(), ModelError> {
        let def = match &self.field {
            ConditionField::Network(f) => catalog.require_network(f)?,
            ConditionField::State(f) => catalog.require_state(f)?,
            ConditionField::AnyNetwork | ConditionField::AnyState => return Ok(()),
        };
        if !self.operand.fits_kind(def.kind) {
            return Err(ModelError::KindMismatch {
                field: def.name.clone(),
                kind: def.kind,
                value: self.operand.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field, self.relation, self.operand)
    }
}

/// A rule: a conjunction of conditions guarding an ordered action sequence.
/// An empty condition set matches every live packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub actions: Vec<ActionSpec>,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>, actions: Vec<ActionSpec>) -> Self {
        Rule {
            conditions,
            actions,
        }
    }
}

/// Strategy for picking among multiple matching rules. Only first-match is
/// defined; the enum is the extension point for others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum ResolutionStrategy {
    #[default]
    FirstMatch,
}

impl FromStr for ResolutionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first-match" => Ok(ResolutionStrategy::FirstMatch),
            other => Err(format!("unknown resolution strategy `{other}`")),
        }
    }
}

impl fmt::Display for ResolutionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolutionStrategy::FirstMatch => f.write_str("first-match"),
        }
    }
}

/// A policy: ordered rules, a resolution strategy and the default action
/// applied when no rule matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub rules: Vec<Rule>,
    pub resolution: ResolutionStrategy,
    pub default_action: ActionSpec,
}

impl Policy {
    pub fn new(
        rules: Vec<Rule>,
        resolution: ResolutionStrategy,
        default_action: ActionSpec,
    ) -> Self {
        Policy {
            rules,
            resolution,
            default_action,
        }
    }

    /// Policy with no rules: every packet gets the default action.
    pub fn default_only(default_action: ActionSpec) -> Self {
        Policy::new(Vec::new(), ResolutionStrategy::FirstMatch, default_action)
    }
}

/// A service function: a name, the policy implementing it and its declared
/// initial internal state (empty for stateless functions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceFunction {
    pub name: String,
    pub policy: Policy,
    pub state: SfState,
}

impl ServiceFunction {
    pub fn new(name: impl Into<String>, policy: Policy, state: SfState) -> Self {
        ServiceFunction {
            name: name.into(),
            policy,
            state,
        }
    }

    /// The state keys this function owns: everything it declares initially
    /// plus everything any of its state-modifying actions writes.
    pub fn owned_state_keys(&self) -> BTreeSet<String> {
        let mut keys: BTreeSet<String> = self.state.keys().cloned().collect();
        let mut collect = |action: &ActionSpec| {
            if let ActionSpec::ModSf { updates } = action {
                keys.extend(updates.keys().cloned());
            }
        };
        for rule in &self.policy.rules {
            for action in &rule.actions {
                collect(action);
            }
        }
        collect(&self.policy.default_action);
        keys
    }

    /// Validate rules, conditions, actions and declared state against the
    /// catalog.
    pub fn validate(&self, catalog: &FieldCatalog) -> Result<(), ValidationError> {
        for (ri, rule) in self.policy.rules.iter().enumerate() {
            if rule.actions.is_empty() {
                return Err(ValidationError::EmptyActions {
                    sf: self.name.clone(),
                    rule: ri,
                });
            }
            for (ci, cond) in rule.conditions.iter().enumerate() {
                cond.validate(catalog)
                    .map_err(|source| ValidationError::Condition {
                        sf: self.name.clone(),
                        rule: ri,
                        index: ci,
                        source,
                    })?;
            }
            for (ai, action) in rule.actions.iter().enumerate() {
                action
                    .validate(catalog)
                    .map_err(|source| ValidationError::Action {
                        sf: self.name.clone(),
                        rule: ri,
                        index: ai,
                        source,
                    })?;
            }
        }
        self.policy
            .default_action
            .validate(catalog)
            .map_err(|source| ValidationError::DefaultAction {
                sf: self.name.clone(),
                source,
            })?;
        for (key, value) in self.state.entries() {
            let def = catalog
                .require_state(key)
                .map_err(|source| ValidationError::State {
                    sf: self.name.clone(),
                    source,
                })?;
            if !value.fits_kind(def.kind) {
                return Err(ValidationError::State {
                    sf: self.name.clone(),
                    source: ModelError::KindMismatch {
                        field: key.clone(),
                        kind: def.kind,
                        value: value.to_string(),
                    },
                });
            }
        }
        Ok(())
    }
}

/// An ordered chain of service functions with unique names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ServiceFunctionChain {
    functions: Vec<ServiceFunction>,
}

impl ServiceFunctionChain {
    pub fn new(functions: Vec<ServiceFunction>) -> Result<Self, ValidationError> {
        let mut seen = BTreeSet::new();
        for sf in &functions {
            if !seen.insert(sf.name.clone()) {
                return Err(ValidationError::DuplicateName(sf.name.clone()));
            }
        }
        Ok(ServiceFunctionChain { functions })
    }

    pub fn empty() -> Self {
        ServiceFunctionChain::default()
    }

    pub fn functions(&self) -> &[ServiceFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Structural problems in a service function or chain definition.
#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("rule {rule} of `{sf}` has no actions")]
    EmptyActions { sf: String, rule: usize },
    #[error("rule {rule} of `{sf}`, condition {index}: {source}")]
    Condition {
        sf: String,
        rule: usize,
        index: usize,
        source: ModelError,
    },
    #[error("rule {rule} of `{sf}`, action {index}: {source}")]
    Action {
        sf: String,
        rule: usize,
        index: usize,
        source: ActionError,
    },
    #[error("default action of `{sf}`: {source}")]
    DefaultAction { sf: String, source: ActionError },
    #[error("initial state of `{sf}`: {source}")]
    State { sf: String, source: ModelError },
    #[error("duplicate service function name `{0}` in chain")]
    DuplicateName(String),
}

/// Errors raised while evaluating conditions.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("relation `{rel}` cannot compare `{lhs}` with `{rhs}`")]
    IncompatibleKinds {
        rel: Relation,
        lhs: String,
        rhs: String,
    },
}

fn incompatible(rel: Relation, lhs: &Value, rhs: &Value) -> EvalError {
    EvalError::IncompatibleKinds {
        rel,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    }
}

/// Membership of a scalar in a prefix or set operand.
fn member_of(lhs: &Value, rhs: &Value, rel: Relation) -> Result<bool, EvalError> {
    match rhs {
        Value::Prefix(net) => match lhs {
            Value::Ip(ip) => Ok(net.contains(ip)),
            Value::Prefix(sub) => Ok(net.contains(sub)),
            _ => Err(incompatible(rel, lhs, rhs)),
        },
        Value::Set(members) => Ok(members.iter().any(|m| match (lhs, m) {
            (Value::Ip(ip), Value::Prefix(net)) => net.contains(ip),
            _ => lhs == m,
        })),
        _ => Err(incompatible(rel, lhs, rhs)),
    }
}

/// Whether every element described by `rhs` is contained in `lhs`.
fn superset_of(lhs: &Value, rhs: &Value, rel: Relation) -> Result<bool, EvalError> {
    match (lhs, rhs) {
        (Value::Prefix(a), Value::Prefix(b)) => Ok(a.contains(b)),
        (Value::Prefix(_), Value::Set(members)) => {
            for m in members {
                if !member_of(m, lhs, rel)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (Value::Set(_), Value::Set(members)) => {
            for m in members {
                if !member_of(m, lhs, rel)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        _ => Err(incompatible(rel, lhs, rhs)),
    }
}

/// Evaluate `lhs rel rhs`.
///
/// A wildcard operand or the `any` relation is always satisfied. An
/// encrypted left-hand side satisfies only `=` against the encrypted
/// sentinel; it never equals a concrete value and supports no ordering.
/// Set relations (`in`, `subset-of`, `not-superset-of`) read prefixes and
/// sets on the right-hand side; ordered comparisons are integer-only.
pub fn eval_relation(lhs: &Value, rel: Relation, rhs: &Value) -> Result<bool, EvalError> {
    if rhs.is_wildcard() || rel == Relation::Any {
        return Ok(true);
    }
    if lhs.is_encrypted() {
        return Ok(rel == Relation::Eq && rhs.is_encrypted());
    }
    match rel {
        Relation::Any => Ok(true),
        Relation::Eq => Ok(lhs == rhs),
        Relation::Ne => Ok(lhs != rhs),
        Relation::Lt | Relation::Le | Relation::Gt | Relation::Ge => match (lhs, rhs) {
            (Value::Int(a), Value::Int(b)) => Ok(match rel {
                Relation::Lt => a < b,
                Relation::Le => a <= b,
                Relation::Gt => a > b,
                _ => a >= b,
            }),
            _ => Err(incompatible(rel, lhs, rhs)),
        },
        Relation::In => match lhs {
            Value::Set(_) | Value::Inner(_) => Err(incompatible(rel, lhs, rhs)),
            _ => member_of(lhs, rhs, rel),
        },
        Relation::NotIn => match lhs {
            Value::Set(_) | Value::Inner(_) => Err(incompatible(rel, lhs, rhs)),
            _ => Ok(!member_of(lhs, rhs, rel)?),
        },
        Relation::Subset => match lhs {
            Value::Set(members) => {
                for m in members {
                    if !member_of(m, rhs, rel)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Value::Prefix(_) => superset_of(rhs, lhs, rel),
            Value::Inner(_) => Err(incompatible(rel, lhs, rhs)),
            _ => member_of(lhs, rhs, rel),
        },
        Relation::NotSuperset => Ok(!superset_of(lhs, rhs, rel)?),
    }
}

/// Whether a packet/state pair satisfies a condition.
///
/// A named field that carries a value is compared with [`eval_relation`];
/// an absent field satisfies the condition in `Paper` mode and fails it in
/// `Strict` mode. The any-field wildcards are existential: at least one
/// present field has to satisfy the relation (fields the relation cannot
/// compare just do not witness it).
pub fn condition_satisfied(
    catalog: &FieldCatalog,
    condition: &Condition,
    packet: &Packet,
    state: &SfState,
    mode: AbsentMode,
) -> Result<bool, EvalError> {
    let absent_result = mode == AbsentMode::Paper;
    match &condition.field {
        ConditionField::Network(f) => {
            catalog.require_network(f).map_err(EvalError::Model)?;
            match packet.get(f) {
                Some(v) => eval_relation(v, condition.relation, &condition.operand),
                None => Ok(absent_result),
            }
        }
        ConditionField::State(f) => {
            catalog.require_state(f).map_err(EvalError::Model)?;
            match state.get(f) {
                Some(v) => eval_relation(v, condition.relation, &condition.operand),
                None => Ok(absent_result),
            }
        }
        ConditionField::AnyNetwork => Ok(packet.entries().any(|(_, v)| {
            eval_relation(v, condition.relation, &condition.operand).unwrap_or(false)
        })),
        ConditionField::AnyState => Ok(state.entries().any(|(_, v)| {
            eval_relation(v, condition.relation, &condition.operand).unwrap_or(false)
        })),
    }
}

/// Whether a rule matches: every condition satisfied (empty sets match).
/// The null packet matches no rule; a dropped element is never reprocessed.
pub fn rule_matches(
    catalog: &FieldCatalog,
    rule: &Rule,
    packet: &Packet,
    state: &SfState,
    mode: AbsentMode,
) -> Result<bool, EvalError> {
    if packet.is_null() {
        return Ok(false);
    }
    for condition in &rule.conditions {
        if !condition_satisfied(catalog, condition, packet, state, mode)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of rule resolution: the matched rule or the default action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ruling<'a> {
    Matched { index: usize, rule: &'a Rule },
    Default(&'a ActionSpec),
}

/// Pick the rule that fires for a packet/state pair. Under first-match the
/// earliest matching rule in declaration order wins; with no match the
/// policy's default action applies.
pub fn resolve<'a>(
    catalog: &FieldCatalog,
    policy: &'a Policy,
    packet: &Packet,
    state: &SfState,
    mode: AbsentMode,
) -> Result<Ruling<'a>, EvalError> {
    match policy.resolution {
        ResolutionStrategy::FirstMatch => {
            for (index, rule) in policy.rules.iter().enumerate() {
                if rule_matches(catalog, rule, packet, state, mode)? {
                    return Ok(Ruling::Matched { index, rule });
                }
            }
            Ok(Ruling::Default(&policy.default_action))
        }
    }
}
