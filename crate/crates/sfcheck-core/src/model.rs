//! Base vocabulary of the traffic model: fields, values, packets, traffic
//! and service-function state.
//!
//! A packet is a finite map from registered network fields to values, with
//! the empty map playing the role of the null packet `∅` that models a drop.
//! State tables are finite maps from registered state fields to values. All
//! types are immutable values; operations return new values instead of
//! mutating their inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use ipnet::IpNet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by model-level operations and invariant checks.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown {class} field `{name}`")]
    UnknownField { class: FieldClass, name: String },
    #[error("field `{0}` is already registered")]
    DuplicateField(String),
    #[error("field `{0}` must have a bit length of at least 1")]
    ZeroBitLength(String),
    #[error("wildcard values are not allowed in packets")]
    WildcardInPacket,
    #[error("encryption parameters must not be empty")]
    EmptyEncryptionParams,
    #[error("value `{value}` does not fit field `{field}` of kind {kind}")]
    KindMismatch {
        field: String,
        kind: ValueKind,
        value: String,
    },
}

/// Kind of value a field carries, together with how literals are parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    IpAddress,
    IpPrefixSet,
    PortNumber,
    IntegerCounter,
    EnumToken,
    OpaqueText,
    Payload,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::IpAddress => "ip-address",
            ValueKind::IpPrefixSet => "ip-prefix-set",
            ValueKind::PortNumber => "port-number",
            ValueKind::IntegerCounter => "integer-counter",
            ValueKind::EnumToken => "enum-token",
            ValueKind::OpaqueText => "opaque-text",
            ValueKind::Payload => "payload",
        };
        f.write_str(s)
    }
}

/// Whether a field lives in packets (network) or in state tables (state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldClass {
    Network,
    State,
}

impl fmt::Display for FieldClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldClass::Network => f.write_str("network"),
            FieldClass::State => f.write_str("state"),
        }
    }
}

/// A registered field: name, value kind and width in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub kind: ValueKind,
    pub bit_length: u32,
}

impl FieldDef {
    pub fn new(name: impl Into<String>, kind: ValueKind, bit_length: u32) -> Self {
        FieldDef {
            name: name.into(),
            kind,
            bit_length,
        }
    }
}

/// Registry of the known network fields and state fields.
///
/// Field names are unique across both classes, so a bare name appearing in a
/// condition can always be classified unambiguously.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FieldCatalog {
    network: BTreeMap<String, FieldDef>,
    state: BTreeMap<String, FieldDef>,
}

impl FieldCatalog {
    /// Empty catalog with no registered fields.
    pub fn empty() -> Self {
        FieldCatalog::default()
    }

    /// The built-in catalog: the network fields every scenario can rely on.
    /// State fields are scenario-specific and registered via extensions.
    pub fn standard() -> Self {
        let mut cat = FieldCatalog::empty();
        let defs = [
            ("ip_src", ValueKind::IpAddress, 32),
            ("ip_dst", ValueKind::IpAddress, 32),
            ("outer_ip_src", ValueKind::IpAddress, 32),
            ("outer_ip_dst", ValueKind::IpAddress, 32),
            ("port_src", ValueKind::PortNumber, 16),
            ("port_dst", ValueKind::PortNumber, 16),
            ("proto", ValueKind::EnumToken, 8),
            ("http_method", ValueKind::EnumToken, 64),
            ("PL_4", ValueKind::Payload, 524_280),
        ];
        for (name, kind, bits) in defs {
            cat.register(FieldClass::Network, FieldDef::new(name, kind, bits))
                .expect("standard catalog is well-formed");
        }
        cat
    }

    /// Register a field, keeping names unique across both classes.
    pub fn register(&mut self, class: FieldClass, def: FieldDef) -> Result<(), ModelError> {
        if def.bit_length == 0 {
            return Err(ModelError::ZeroBitLength(def.name));
        }
        if self.network.contains_key(&def.name) || self.state.contains_key(&def.name) {
            return Err(ModelError::DuplicateField(def.name));
        }
        match class {
            FieldClass::Network => self.network.insert(def.name.clone(), def),
            FieldClass::State => self.state.insert(def.name.clone(), def),
        };
        Ok(())
    }

    pub fn network(&self, name: &str) -> Option<&FieldDef> {
        self.network.get(name)
    }

    pub fn state(&self, name: &str) -> Option<&FieldDef> {
        self.state.get(name)
    }

    /// Classify a bare field name, if registered at all.
    pub fn class_of(&self, name: &str) -> Option<FieldClass> {
        if self.network.contains_key(name) {
            Some(FieldClass::Network)
        } else if self.state.contains_key(name) {
            Some(FieldClass::State)
        } else {
            None
        }
    }

    pub fn require_network(&self, name: &str) -> Result<&FieldDef, ModelError> {
        self.network(name).ok_or_else(|| ModelError::UnknownField {
            class: FieldClass::Network,
            name: name.to_string(),
        })
    }

    pub fn require_state(&self, name: &str) -> Result<&FieldDef, ModelError> {
        self.state(name).ok_or_else(|| ModelError::UnknownField {
            class: FieldClass::State,
            name: name.to_string(),
        })
    }

    pub fn network_fields(&self) -> impl Iterator<Item = &FieldDef> {
        self.network.values()
    }

    pub fn state_fields(&self) -> impl Iterator<Item = &FieldDef> {
        self.state.values()
    }
}

/// Opaque description of an encryption transform (e.g. a cipher-suite line).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionParams {
    spec: String,
}

impl EncryptionParams {
    pub fn new(spec: impl Into<String>) -> Result<Self, ModelError> {
        let spec = spec.into();
        if spec.is_empty() {
            return Err(ModelError::EmptyEncryptionParams);
        }
        Ok(EncryptionParams { spec })
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }
}

/// A field value.
///
/// Concrete scalars carry one datum each; `Prefix` and `Set` describe sets of
/// scalars and appear in condition operands; `Inner` holds a whole packet
/// packaged as a payload by encapsulation. `Encrypted` renders as the opaque
/// sentinel `<enc>`: equality looks only at the declared parameters, never at
/// the hidden plaintext, and an encrypted value is never equal to a concrete
/// one. `Wildcard` is only legal in conditions and expected-traffic patterns.
#[derive(Debug, Clone)]
pub enum Value {
    Ip(IpAddr),
    Prefix(IpNet),
    Int(i64),
    Text(String),
    Set(Vec<Value>),
    Inner(Box<Packet>),
    Encrypted {
        params: Option<EncryptionParams>,
        hidden: Option<Box<Value>>,
    },
    Wildcard,
}

impl Value {
    /// The encrypted sentinel with no declared parameters, as written in
    /// conditions and patterns.
    pub fn encrypted_sentinel() -> Self {
        Value::Encrypted {
            params: None,
            hidden: None,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn ip(s: &str) -> Self {
        Value::Ip(s.parse().expect("literal IP address"))
    }

    pub fn prefix(s: &str) -> Self {
        Value::Prefix(s.parse().expect("literal IP prefix"))
    }

    /// Normalized set value: members sorted and deduplicated by rendering,
    /// so set equality is order-insensitive.
    pub fn set(members: Vec<Value>) -> Self {
        let mut members = members;
        members.sort_by_key(|v| v.to_string());
        members.dedup_by(|a, b| a == b);
        Value::Set(members)
    }

    pub fn is_encrypted(&self) -> bool {
        matches!(self, Value::Encrypted { .. })
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Value::Wildcard)
    }

    /// Whether this value is admissible for a field of the given kind.
    /// Membership operands (prefixes and sets) are accepted against scalar
    /// kinds since conditions compare scalars against them.
    pub fn fits_kind(&self, kind: ValueKind) -> bool {
        match self {
            Value::Wildcard | Value::Encrypted { .. } => true,
            Value::Ip(_) => matches!(kind, ValueKind::IpAddress),
            Value::Prefix(_) => matches!(kind, ValueKind::IpAddress | ValueKind::IpPrefixSet),
            Value::Int(_) => matches!(kind, ValueKind::PortNumber | ValueKind::IntegerCounter),
            Value::Text(_) => matches!(
                kind,
                ValueKind::EnumToken | ValueKind::OpaqueText | ValueKind::Payload
            ),
            Value::Set(members) => members.iter().all(|m| m.fits_kind(kind)),
            Value::Inner(_) => matches!(kind, ValueKind::Payload),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Ip(a), Value::Ip(b)) => a == b,
            (Value::Prefix(a), Value::Prefix(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Set(a), Value::Set(b)) => a == b,
            (Value::Inner(a), Value::Inner(b)) => a == b,
            // Hidden plaintext is invisible to equality; only the declared
            // parameters count.
            (Value::Encrypted { params: a, .. }, Value::Encrypted { params: b, .. }) => a == b,
            (Value::Wildcard, Value::Wildcard) => true,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Ip(ip) => write!(f, "{ip}"),
            Value::Prefix(net) => write!(f, "{net}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::Set(members) => {
                f.write_str("{")?;
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{m}")?;
                }
                f.write_str("}")
            }
            Value::Inner(p) => write!(f, "{p}"),
            Value::Encrypted { .. } => f.write_str("<enc>"),
            Value::Wildcard => f.write_str("*"),
        }
    }
}

/// Parse a scalar literal for a field of the given kind.
///
/// `"<enc>"` is the encrypted sentinel for any kind. Ports are range-checked.
pub fn parse_scalar(kind: ValueKind, text: &str) -> Result<Value, ModelError> {
    if text == "<enc>" {
        return Ok(Value::encrypted_sentinel());
    }
    let mismatch = |field_kind: ValueKind| ModelError::KindMismatch {
        field: String::new(),
        kind: field_kind,
        value: text.to_string(),
    };
    match kind {
        ValueKind::IpAddress => IpAddr::from_str(text)
            .map(Value::Ip)
            .map_err(|_| mismatch(kind)),
        ValueKind::IpPrefixSet => parse_prefix(text).ok_or_else(|| mismatch(kind)),
        ValueKind::PortNumber => text
            .parse::<u16>()
            .map(|p| Value::Int(i64::from(p)))
            .map_err(|_| mismatch(kind)),
        ValueKind::IntegerCounter => text
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| mismatch(kind)),
        ValueKind::EnumToken | ValueKind::OpaqueText | ValueKind::Payload => {
            Ok(Value::Text(text.to_string()))
        }
    }
}

/// Parse CIDR notation (`10.0.0.0/8`) or the star shorthand (`10.0.0.*`,
/// one star per trailing octet) into a prefix value.
pub fn parse_prefix(text: &str) -> Option<Value> {
    if let Ok(net) = IpNet::from_str(text) {
        return Some(Value::Prefix(net));
    }
    // 1.1.1.* -> 1.1.1.0/24, 10.* -> 10.0.0.0/8
    let parts: Vec<&str> = text.split('.').collect();
    if parts.len() < 2 || parts.len() > 4 || parts.last() != Some(&"*") {
        return None;
    }
    let fixed: Vec<&str> = parts.iter().take_while(|p| **p != "*").copied().collect();
    if fixed.len() != parts.len() - 1 {
        return None;
    }
    let mut octets = [0u8; 4];
    for (i, p) in fixed.iter().enumerate() {
        octets[i] = p.parse().ok()?;
    }
    let prefix_len = 8 * fixed.len() as u8;
    let cidr = format!(
        "{}.{}.{}.{}/{}",
        octets[0], octets[1], octets[2], octets[3], prefix_len
    );
    IpNet::from_str(&cidr).ok().map(Value::Prefix)
}

/// A packet: a finite map from network fields to values. The empty map is
/// the null packet, modeling a dropped element.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Packet {
    fields: BTreeMap<String, Value>,
}

impl Packet {
    /// The null packet `∅`.
    pub fn null() -> Self {
        Packet::default()
    }

    /// Build a packet from entries, enforcing that every field is a
    /// registered network field and no value is a wildcard.
    pub fn from_entries(
        catalog: &FieldCatalog,
        entries: impl IntoIterator<Item = (String, Value)>,
    ) -> Result<Self, ModelError> {
        let mut fields = BTreeMap::new();
        for (name, value) in entries {
            let def = catalog.require_network(&name)?;
            if value.is_wildcard() {
                return Err(ModelError::WildcardInPacket);
            }
            if !value.fits_kind(def.kind) {
                return Err(ModelError::KindMismatch {
                    field: name,
                    kind: def.kind,
                    value: value.to_string(),
                });
            }
            fields.insert(name, value);
        }
        Ok(Packet { fields })
    }

    pub fn is_null(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.get(field)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.fields.iter()
    }

    pub fn field_names(&self) -> impl Iterator<Item = &String> {
        self.fields.keys()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub(crate) fn set(&mut self, field: impl Into<String>, value: Value) {
        self.fields.insert(field.into(), value);
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            return f.write_str("∅");
        }
        f.write_str("{")?;
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

/// Value of a network field in a packet, with an unknown-field check against
/// the catalog. The null packet has no fields, so every lookup is absent.
pub fn packet_get<'a>(
    catalog: &FieldCatalog,
    packet: &'a Packet,
    field: &str,
) -> Result<Option<&'a Value>, ModelError> {
    catalog.require_network(field)?;
    Ok(packet.get(field))
}

/// Structural packet equality: both null, or identical field sets with equal
/// values (encrypted values compare by parameters, never by plaintext).
pub fn packet_equals(a: &Packet, b: &Packet) -> bool {
    a == b
}

/// An ordered finite sequence of packets. Order is significant and
/// duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Traffic {
    packets: Vec<Packet>,
}

impl Traffic {
    pub fn new(packets: Vec<Packet>) -> Self {
        Traffic { packets }
    }

    pub fn empty() -> Self {
        Traffic::default()
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    /// The traffic with all null packets removed, order preserved.
    pub fn normalized(&self) -> Traffic {
        Traffic {
            packets: self
                .packets
                .iter()
                .filter(|p| !p.is_null())
                .cloned()
                .collect(),
        }
    }
}

impl From<Vec<Packet>> for Traffic {
    fn from(packets: Vec<Packet>) -> Self {
        Traffic::new(packets)
    }
}

impl fmt::Display for Traffic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.packets.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

/// Drop all null packets from a traffic, preserving the order of survivors.
pub fn normalize_traffic(traffic: &Traffic) -> Traffic {
    traffic.normalized()
}

/// A state table: a finite map from state fields to values. The empty map
/// models a stateless service function.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct State {
    entries: BTreeMap<String, Value>,
}

/// Internal state of a single service function.
pub type SfState = State;
/// Merged state of a whole chain.
pub type GlobalState = State;

impl State {
    pub fn new() -> Self {
        State::default()
    }

    /// Build a state table, enforcing that every key is a registered state
    /// field of a compatible kind.
    pub fn from_entries(
        catalog: &FieldCatalog,
        entries: impl IntoIterator<Item = (String, Value)>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (name, value) in entries {
            let def = catalog.require_state(&name)?;
            if value.is_wildcard() {
                return Err(ModelError::WildcardInPacket);
            }
            if !value.fits_kind(def.kind) {
                return Err(ModelError::KindMismatch {
                    field: name,
                    kind: def.kind,
                    value: value.to_string(),
                });
            }
            map.insert(name, value);
        }
        Ok(State { entries: map })
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.entries.get(field)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Key-wise union where `other` wins on shared keys.
    pub fn merge(&self, other: &State) -> State {
        let mut entries = self.entries.clone();
        for (k, v) in &other.entries {
            entries.insert(k.clone(), v.clone());
        }
        State { entries }
    }

    /// The sub-table containing only the given keys.
    pub fn restrict(&self, keys: &BTreeSet<String>) -> State {
        State {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keys.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub(crate) fn set(&mut self, field: impl Into<String>, value: Value) {
        self.entries.insert(field.into(), value);
    }
}

impl fmt::Display for State {
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

/// Key-wise union of two state tables; on shared keys the value from `s`
/// (the latest write) wins.
pub fn state_merge(acc: &GlobalState, s: &SfState) -> GlobalState {
    acc.merge(s)
}
