//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! 1. Correct chain ordering enforces both shipped policies, with the
//!    monitor trace advancing the counter and the final traffic encrypted.
//! 2. Wrong chain ordering violates v1 (empty traffic, counter untouched)
//!    while v2 stays enforced.
//! 3. Action laws over >= 1000 randomized cases each.
//! 4. First-match resolution equals a brute-force scan, >= 1000 cases.
//! 5. Counter threading equals an independent match count, >= 1000 cases.
//! 6. At least one chain permutation flips a verdict.
//! 7. Byte-identical reports across runs; parse/serialize identity.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::Config as ProptestConfig;

use sfcheck_core::{
    apply_action, emit_report, parse_scenario, resolve, rule_matches, serialize_scenario,
    transform_traffic, verify_all, AbsentMode, ActionSpec, Condition, EncryptionParams,
    FieldCatalog, FieldClass, FieldDef, Packet, Policy, PolicyOutcome, Relation, ReportFormat,
    ResolutionStrategy, Rule, Ruling, Scenario, ServiceFunctionChain, SfState, StateUpdate,
    Traffic, Value, ValueKind, Verdict, VerificationReport, VerifyOptions,
};

const CASES: u32 = 1024;

const CORRECT: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../scenarios/figure1_correct.scenario"
);
const WRONG: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../scenarios/figure1_wrong.scenario"
);

fn load(path: &str) -> Scenario {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path}: {e}"));
    parse_scenario(&text).unwrap_or_else(|e| panic!("parse {path}: {e}"))
}

fn run(scenario: &Scenario) -> VerificationReport {
    let chain = scenario.chain().expect("chain materializes");
    verify_all(
        &scenario.catalog,
        &chain,
        &scenario.policies,
        VerifyOptions {
            absent_mode: scenario.options.absent_mode,
            match_mode: Some(scenario.options.match_mode),
        },
    )
}

fn completed<'a>(
    report: &'a VerificationReport,
    name: &str,
) -> &'a sfcheck_core::VerificationResult {
    match report.find(name) {
        Some(PolicyOutcome::Completed(result)) => result,
        other => panic!("policy {name} did not complete: {other:?}"),
    }
}

// --- criterion 1 -----------------------------------------------------------

#[test]
fn acceptance_1_correct_ordering_golden() {
    let started = Instant::now();
    let scenario = load(CORRECT);
    assert_eq!(scenario.chain_names, vec!["tm", "af", "vg"]);
    let report = run(&scenario);

    assert_eq!(report.p_true(), vec!["v1", "v2"]);
    assert!(report.p_false().is_empty());

    // Monitor hop: counter goes 0 -> 1 and stays there.
    let v1 = completed(&report, "v1");
    assert_eq!(v1.input_state.get("con_db"), Some(&Value::Int(0)));
    let counters: Vec<_> = v1
        .hops
        .iter()
        .map(|h| (h.sf.as_str(), h.state.get("con_db").cloned()))
        .collect();
    assert_eq!(
        counters,
        vec![
            ("tm", Some(Value::Int(1))),
            ("af", Some(Value::Int(1))),
            ("vg", Some(Value::Int(1))),
        ]
    );

    // Every surviving packet leaves with the gateway source and an
    // encrypted payload.
    let last = v1.hops.last().expect("three hops");
    let survivors = last.traffic.normalized();
    assert_eq!(survivors.len(), 1);
    for p in survivors.iter() {
        assert_eq!(p.get("ip_src"), Some(&Value::ip("203.0.113.1")));
        assert!(p.get("PL_4").expect("payload present").is_encrypted());
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("ACCEPTANCE 1 (correct ordering golden run): PASS");
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn acceptance_2_wrong_ordering_golden() {
    let started = Instant::now();
    let scenario = load(WRONG);
    assert_eq!(scenario.chain_names, vec!["vg", "tm", "af"]);
    let report = run(&scenario);

    assert_eq!(report.p_true(), vec!["v2"]);
    assert_eq!(report.p_false(), vec!["v1"]);

    // v1 ends with everything dropped and the counter never advanced.
    let v1 = completed(&report, "v1");
    assert_eq!(v1.verdict, Verdict::Violated);
    let last = v1.hops.last().expect("three hops");
    assert!(last.traffic.normalized().is_empty());
    assert_eq!(last.state.get("con_db"), Some(&Value::Int(0)));

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("ACCEPTANCE 2 (wrong ordering golden run): PASS");
}

// --- shared generators for criteria 3-5 -------------------------------------

/// Six network fields plus two counters, the sandbox for randomized runs.
fn test_catalog() -> FieldCatalog {
    let mut cat = FieldCatalog::empty();
    let network = [
        ("src", ValueKind::IpAddress, 32),
        ("dst", ValueKind::IpAddress, 32),
        ("sport", ValueKind::PortNumber, 16),
        ("dport", ValueKind::PortNumber, 16),
        ("proto", ValueKind::EnumToken, 8),
        ("payload", ValueKind::Payload, 65536),
    ];
    for (name, kind, bits) in network {
        cat.register(FieldClass::Network, FieldDef::new(name, kind, bits))
            .unwrap();
    }
    // Fields only ever added by encapsulation, so they never conflict.
    cat.register(
        FieldClass::Network,
        FieldDef::new("tun_src", ValueKind::IpAddress, 32),
    )
    .unwrap();
    cat.register(
        FieldClass::Network,
        FieldDef::new("tun_dst", ValueKind::IpAddress, 32),
    )
    .unwrap();
    cat.register(
        FieldClass::State,
        FieldDef::new("hits", ValueKind::IntegerCounter, 32),
    )
    .unwrap();
    cat.register(
        FieldClass::State,
        FieldDef::new("drops", ValueKind::IntegerCounter, 32),
    )
    .unwrap();
    cat
}

fn arb_field_value(field: &'static str) -> BoxedStrategy<Value> {
    match field {
        "src" | "dst" => any::<[u8; 4]>()
            .prop_map(|o| Value::Ip(std::net::IpAddr::from(o)))
            .boxed(),
        "sport" | "dport" => (0u16..=65535)
            .prop_map(|p| Value::Int(i64::from(p)))
            .boxed(),
        "proto" => prop_oneof![Just("tcp"), Just("udp"), Just("icmp")]
            .prop_map(Value::text)
            .boxed(),
        _ => prop_oneof![
            "[a-z]{0,12}".prop_map(Value::Text),
            Just(Value::encrypted_sentinel()),
        ]
        .boxed(),
    }
}

/// A live packet always carrying a payload (so encryption applies), plus a
/// random subset of the other fields.
fn arb_live_packet() -> impl Strategy<Value = Packet> {
    let optional = ["src", "dst", "sport", "dport", "proto"];
    let flags = proptest::collection::vec(any::<bool>(), optional.len());
    (
        flags,
        proptest::collection::vec(arb_field_value("src"), 5),
        arb_field_value("payload"),
    )
        .prop_map(move |(keep, mut pool, payload)| {
            let cat = test_catalog();
            let mut entries: Vec<(String, Value)> = vec![("payload".into(), payload)];
            for (i, field) in optional.iter().enumerate() {
                if keep[i] {
                    let value = match *field {
                        "src" | "dst" => pool.pop().unwrap(),
                        "sport" | "dport" => Value::Int(1000 + i as i64),
                        _ => Value::text("tcp"),
                    };
                    entries.push(((*field).into(), value));
                }
            }
            Packet::from_entries(&cat, entries).unwrap()
        })
}

fn arb_packet() -> impl Strategy<Value = Packet> {
    prop_oneof![
        9 => arb_live_packet().boxed(),
        1 => Just(Packet::null()).boxed(),
    ]
}

fn arb_state() -> impl Strategy<Value = SfState> {
    (any::<i32>(), any::<i32>(), any::<bool>(), any::<bool>()).prop_map(|(h, d, kh, kd)| {
        let cat = test_catalog();
        let mut entries = Vec::new();
        if kh {
            entries.push(("hits".to_string(), Value::Int(i64::from(h))));
        }
        if kd {
            entries.push(("drops".to_string(), Value::Int(i64::from(d))));
        }
        SfState::from_entries(&cat, entries).unwrap()
    })
}

fn arb_action() -> impl Strategy<Value = ActionSpec> {
    let assignment = prop_oneof![
        Just(("src", "9.9.9.9")),
        Just(("dst", "10.0.0.1")),
        Just(("tun_src", "203.0.113.7")),
    ]
    .prop_map(|(f, ip)| (f.to_string(), Value::ip(ip)));

    prop_oneof![
        Just(ActionSpec::Allow),
        Just(ActionSpec::Deny),
        proptest::collection::vec(assignment, 0..3).prop_map(ActionSpec::mod_nf),
        (any::<i8>(), any::<bool>()).prop_map(|(d, set)| {
            if set {
                ActionSpec::mod_sf([(
                    "hits".to_string(),
                    StateUpdate::SetTo(Value::Int(i64::from(d))),
                )])
            } else {
                ActionSpec::mod_sf([("drops".to_string(), StateUpdate::Delta(i64::from(d)))])
            }
        }),
        // Tunnel-style encapsulation composes cleanly with itself; the bare
        // add-only flavor conflicts on repeats and is unit-tested instead.
        Just(ActionSpec::Encapsulate {
            added: [
                ("tun_src".to_string(), Value::ip("203.0.113.7")),
                ("tun_dst".to_string(), Value::ip("198.51.100.9")),
            ]
            .into_iter()
            .collect(),
            inner_into: Some("payload".to_string()),
        }),
        Just(ActionSpec::Encrypt {
            targets: vec!["payload".to_string()],
            params: EncryptionParams::new("ike=aes256-sha512").unwrap(),
        }),
    ]
}

fn apply_all(
    cat: &FieldCatalog,
    actions: &[ActionSpec],
    p: &Packet,
    s: &SfState,
) -> (Packet, SfState) {
    let mut pair = (p.clone(), s.clone());
    for a in actions {
        pair = apply_action(cat, a, &pair.0, &pair.1).expect("generated actions apply cleanly");
    }
    pair
}

// --- criterion 3 -----------------------------------------------------------

#[test]
fn acceptance_3_action_laws() {
    let cfg = ProptestConfig::with_cases(CASES);

    // Law: inserting allow anywhere never changes the composite result.
    proptest!(cfg.clone(), |(
        actions in proptest::collection::vec(arb_action(), 0..5),
        insert_at in any::<prop::sample::Index>(),
        p in arb_packet(),
        s in arb_state(),
    )| {
        let cat = test_catalog();
        let plain = apply_all(&cat, &actions, &p, &s);
        let mut padded = actions.clone();
        let at = if padded.is_empty() { 0 } else { insert_at.index(padded.len() + 1) };
        padded.insert(at, ActionSpec::Allow);
        let with_allow = apply_all(&cat, &padded, &p, &s);
        prop_assert_eq!(plain, with_allow);
    });

    // Law: deny is absorbing; whatever follows, the packet stays null and
    // the state stays what it was at the drop.
    proptest!(cfg.clone(), |(
        suffix in proptest::collection::vec(arb_action(), 0..5),
        p in arb_packet(),
        s in arb_state(),
    )| {
        let cat = test_catalog();
        let (dropped, s_at_drop) = apply_action(&cat, &ActionSpec::Deny, &p, &s).unwrap();
        prop_assert!(dropped.is_null());
        let (after, s_after) = apply_all(&cat, &suffix, &dropped, &s_at_drop);
        prop_assert!(after.is_null());
        prop_assert_eq!(s_after, s_at_drop);
    });

    // Law: no action resurrects the null packet.
    proptest!(cfg.clone(), |(a in arb_action(), s in arb_state())| {
        let cat = test_catalog();
        let (out, s_out) = apply_action(&cat, &a, &Packet::null(), &s).unwrap();
        prop_assert!(out.is_null());
        prop_assert_eq!(s_out, s);
    });

    // Law: state writers never alter packets; packet writers never alter
    // state.
    proptest!(cfg, |(a in arb_action(), p in arb_packet(), s in arb_state())| {
        let cat = test_catalog();
        let (out, s_out) = apply_action(&cat, &a, &p, &s).unwrap();
        match &a {
            ActionSpec::ModSf { .. } => prop_assert_eq!(out, p),
            ActionSpec::ModNf { .. }
            | ActionSpec::Encapsulate { .. }
            | ActionSpec::Encrypt { .. } => prop_assert_eq!(s_out, s),
            ActionSpec::Allow | ActionSpec::Deny => {
                prop_assert_eq!(s_out, s);
            }
        }
    });

    println!("ACCEPTANCE 3 (action laws, {CASES} cases each): PASS");
}

// --- criterion 4 -----------------------------------------------------------

fn arb_condition() -> impl Strategy<Value = Condition> {
    prop_oneof![
        // Equality on an address octet.
        (0u8..4).prop_map(|o| Condition::on_network(
            "dst",
            Relation::Eq,
            Value::ip(&format!("10.0.0.{o}")),
        )),
        // Prefix membership.
        prop_oneof![Just("10.0.0.0/8"), Just("10.0.0.0/30"), Just("0.0.0.0/0")]
            .prop_map(|net| Condition::on_network("dst", Relation::In, Value::prefix(net))),
        // Port ordering.
        (
            0u16..=65535,
            prop_oneof![
                Just(Relation::Lt),
                Just(Relation::Le),
                Just(Relation::Gt),
                Just(Relation::Ge),
                Just(Relation::Eq),
                Just(Relation::Ne),
            ]
        )
            .prop_map(|(p, rel)| Condition::on_network(
                "dport",
                rel,
                Value::Int(i64::from(p))
            )),
        // Token equality.
        prop_oneof![Just("tcp"), Just("udp")].prop_map(|t| Condition::on_network(
            "proto",
            Relation::Eq,
            Value::text(t)
        )),
        // Encrypted payload guard.
        Just(Condition::on_network(
            "payload",
            Relation::Eq,
            Value::encrypted_sentinel(),
        )),
    ]
}

fn arb_fmr_packet() -> impl Strategy<Value = Packet> {
    (0u8..4, 0u16..=65535, any::<bool>(), any::<bool>()).prop_map(|(octet, port, tcp, enc)| {
        let cat = test_catalog();
        Packet::from_entries(
            &cat,
            [
                ("dst".to_string(), Value::ip(&format!("10.0.0.{octet}"))),
                ("dport".to_string(), Value::Int(i64::from(port))),
                (
                    "proto".to_string(),
                    Value::text(if tcp { "tcp" } else { "udp" }),
                ),
                (
                    "payload".to_string(),
                    if enc {
                        Value::encrypted_sentinel()
                    } else {
                        Value::text("data")
                    },
                ),
            ],
        )
        .unwrap()
    })
}

#[test]
fn acceptance_4_first_match_oracle_equivalence() {
    let cfg = ProptestConfig::with_cases(CASES);
    proptest!(cfg, |(
        conds in proptest::collection::vec(proptest::collection::vec(arb_condition(), 0..3), 0..=16),
        p in arb_fmr_packet(),
    )| {
        let cat = test_catalog();
        let s = SfState::new();
        let rules: Vec<Rule> = conds
            .into_iter()
            .map(|c| Rule::new(c, vec![ActionSpec::Allow]))
            .collect();
        let policy = Policy::new(rules.clone(), ResolutionStrategy::FirstMatch, ActionSpec::Deny);

        // Oracle: scan every rule in order, stop at the first match.
        let mut oracle = None;
        for (i, rule) in rules.iter().enumerate() {
            if rule_matches(&cat, rule, &p, &s, AbsentMode::Strict).unwrap() {
                oracle = Some(i);
                break;
            }
        }

        let engine = match resolve(&cat, &policy, &p, &s, AbsentMode::Strict).unwrap() {
            Ruling::Matched { index, .. } => Some(index),
            Ruling::Default(_) => None,
        };
        prop_assert_eq!(engine, oracle);
    });
    println!("ACCEPTANCE 4 (first-match oracle equivalence, {CASES} cases): PASS");
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn acceptance_5_state_threading_oracle() {
    let cfg = ProptestConfig::with_cases(CASES);
    let watched = Value::ip("10.0.0.1");
    proptest!(cfg, |(octets in proptest::collection::vec(0u8..4, 0..=20))| {
        let cat = test_catalog();
        let monitor = sfcheck_core::archetypes::traffic_monitor(
            &cat,
            "mon",
            vec![Condition::on_network("dst", Relation::Eq, watched.clone())],
            "hits",
        )
        .unwrap();

        let packets: Vec<Packet> = octets
            .iter()
            .map(|o| {
                Packet::from_entries(
                    &cat,
                    [("dst".to_string(), Value::ip(&format!("10.0.0.{o}")))],
                )
                .unwrap()
            })
            .collect();
        let traffic = Traffic::new(packets);

        // Oracle: count matching packets straight off the input sequence.
        let expected = octets.iter().filter(|o| **o == 1).count() as i64;

        let (out, final_state, _) = transform_traffic(
            &cat,
            &monitor.policy,
            &traffic,
            &monitor.state,
            AbsentMode::Strict,
        )
        .unwrap();
        prop_assert_eq!(&out, &traffic, "monitor must not modify traffic");
        prop_assert_eq!(final_state.get("hits"), Some(&Value::Int(expected)));
    });
    println!("ACCEPTANCE 5 (state-threading oracle, {CASES} cases): PASS");
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn acceptance_6_order_sensitivity_witness() {
    let scenario = load(CORRECT);
    let orderings = [
        ["tm", "af", "vg"],
        ["tm", "vg", "af"],
        ["af", "tm", "vg"],
        ["af", "vg", "tm"],
        ["vg", "tm", "af"],
        ["vg", "af", "tm"],
    ];

    let verdicts_for = |order: &[&str; 3]| -> Vec<bool> {
        let functions = order
            .iter()
            .map(|n| scenario.functions[*n].clone())
            .collect();
        let chain = ServiceFunctionChain::new(functions).unwrap();
        let report = verify_all(
            &scenario.catalog,
            &chain,
            &scenario.policies,
            VerifyOptions {
                absent_mode: scenario.options.absent_mode,
                match_mode: Some(scenario.options.match_mode),
            },
        );
        scenario
            .policies
            .iter()
            .map(|p| report.find(&p.name).unwrap().is_enforced())
            .collect()
    };

    let baseline = verdicts_for(&orderings[0]);
    assert_eq!(
        baseline,
        vec![true, true],
        "reference ordering must enforce both"
    );

    let mut flipped = Vec::new();
    for order in &orderings[1..] {
        if verdicts_for(order) != baseline {
            flipped.push(order.join("-"));
        }
    }
    assert!(
        !flipped.is_empty(),
        "some permutation must flip a verdict against tm-af-vg"
    );
    // The documented counterexample ordering is among them.
    assert!(
        flipped.contains(&"vg-tm-af".to_string()),
        "vg-tm-af must flip v1, flipped: {flipped:?}"
    );
    println!("ACCEPTANCE 6 (order-sensitivity witness, flips: {flipped:?}): PASS");
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn acceptance_7_determinism_and_round_trip() {
    for path in [CORRECT, WRONG] {
        // Determinism: two fully independent runs, byte-identical output.
        let render = || {
            let scenario = load(path);
            let report = run(&scenario);
            emit_report(
                scenario.name.as_deref().unwrap_or("unnamed"),
                scenario.options,
                &report,
                ReportFormat::Json,
                false,
            )
        };
        let first = render();
        let second = render();
        assert_eq!(first, second, "report for {path} is not byte-stable");

        // Round trip: serialize and reparse, structurally identical.
        let scenario = load(path);
        let text = serialize_scenario(&scenario).unwrap();
        let reparsed = parse_scenario(&text)
            .unwrap_or_else(|e| panic!("reparse of serialized {path} failed: {e}\n{text}"));
        assert_eq!(scenario, reparsed, "round trip for {path}");
    }
    println!("ACCEPTANCE 7 (determinism and round-trip): PASS");
}
