use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::codec::{Direction, Value};

fn pt(platform: Platform) -> Twin {
    Twin::start(TwinConfig::new(platform), Bus::new(), SimTime::ZERO).unwrap()
}

fn dt(platform: Platform) -> Twin {
    Twin::start(TwinConfig::new(platform).digital(), Bus::new(), SimTime::ZERO).unwrap()
}

fn command(twin: &Twin, platform: u8, direction: Direction, msg: TwinMessage) -> Envelope {
    let rel = match msg {
        TwinMessage::O2Event(_) => "/skills/decision/event",
        _ => "/skills/behavior/set",
    };
    let topic = TopicPath::parse(&format!("/{}{rel}", twin.platform().slug())).unwrap();
    Envelope {
        platform_id: platform,
        skill_id: SKILL_BEHAVIOR,
        topic_index: twin.topic_index(&topic).unwrap(),
        direction,
        sequence: 0,
        type_id: msg.type_id(),
        payload: msg.to_values(),
    }
}

fn set(id: u8) -> TwinMessage {
    TwinMessage::SetBehavior(SetBehavior { behavior_id: id })
}

fn event(name: &str) -> TwinMessage {
    TwinMessage::O2Event(O2Event { event: name.into() })
}

#[test]
fn physical_and_digital_share_skills_and_table() {
    for p in Platform::ALL {
        let (a, b) = (pt(p), dt(p));
        assert_eq!(a.skills(), b.skills());
        assert_eq!(a.sync_table(), b.sync_table());
    }
}

#[test]
fn default_table_layout() {
    let t = pt(Platform::Flux);
    let rows: Vec<String> = t.sync_table().iter().map(|r| r.topic.to_string()).collect();
    assert_eq!(
        rows,
        [
            "/flux/skills/o2/std",
            "/flux/skills/behavior/status",
            "/flux/skills/behavior/set",
            "/flux/skills/decision/event"
        ]
    );
    // diagnostics lives outside /skills and is never synchronized
    assert!(t.topic_index(&TopicPath::parse("/flux/internal/debug").unwrap()).is_none());
}

#[test]
fn relative_sync_patterns_anchor_at_platform_root() {
    let pats = [TopicPattern::parse("skills/behavior/*").unwrap(), TopicPattern::parse("/bigo/skills/o2/std").unwrap()];
    let table = sync_topic_table(Platform::Bigo, &pats);
    assert_eq!(table.len(), 3);
    assert_eq!(table[2].topic.to_string(), "/bigo/skills/o2/std");
}

#[test]
fn samples_follow_period() {
    let mut t = pt(Platform::Bigo);
    let mut now = SimTime::ZERO;
    while let Some(next) = t.next_wakeup().filter(|&n| n < SimTime::from_secs(600)) {
        now = next;
        t.on_tick(now);
    }
    assert_eq!(now, SimTime::from_secs(540));
    assert_eq!(t.samples_taken(), 10);
    let out = t.take_outbound();
    assert_eq!(out.len(), 10);
    assert!(out.iter().all(|o| o.envelope.direction == Direction::PtToDt && o.envelope.topic_index == 0));
    let seqs: Vec<u16> = out.iter().map(|o| o.envelope.sequence).collect();
    assert_eq!(seqs, (0..10).collect::<Vec<_>>());
}

#[test]
fn digital_twin_never_syncs_its_own_data() {
    let mut t = dt(Platform::Bigo);
    assert_eq!(t.next_wakeup(), None);
    let topic = TopicPath::parse("/bigo/skills/o2/std").unwrap();
    let msg = TwinMessage::StandardO2(StandardO2 { timestamp: 0, oxygen: 1.0, saturation: 0.0, temperature: 0.0 });
    assert_eq!(t.sync_out(&topic, &msg), None);
    assert_eq!(t.pending_outbound(), 0);
}

#[test]
fn accepted_command_reports_finished_then_running() {
    let mut t = pt(Platform::Mansio);
    let env = command(&t, Platform::Mansio.id(), Direction::DtToPt, set(0));
    let acc = t.sync_in_command(&env, Via::Basestation, SimTime::from_secs(10)).unwrap();
    assert!(matches!(acc, Accepted::Behavior(StandardStatus { behavior_id: 0, status: BehaviorStatus::Running, .. })));
    let log: Vec<(u8, BehaviorStatus)> = t.status_log().iter().map(|(_, s)| (s.behavior_id, s.status)).collect();
    assert_eq!(log, [(1, BehaviorStatus::Finished), (0, BehaviorStatus::Running)]);
    assert!(!t.is_measuring());
    assert_eq!(t.next_wakeup(), None);
}

#[test]
fn foreign_and_direct_commands_are_rejected() {
    let mut t = pt(Platform::Flux);
    let foreign = command(&t, Platform::Bigo.id(), Direction::DtToPt, set(4));
    assert!(matches!(
        t.sync_in_command(&foreign, Via::Basestation, SimTime::ZERO),
        Err(TwinError::RejectedForeignCommand { .. })
    ));
    let peer = command(&t, Platform::Flux.id(), Direction::DtToPt, set(4));
    assert!(matches!(t.sync_in_command(&peer, Via::Peer(3), SimTime::ZERO), Err(TwinError::RejectedDirectCommand(_))));
    let wrong_dir = command(&t, Platform::Flux.id(), Direction::PtToDt, set(4));
    assert!(t.sync_in_command(&wrong_dir, Via::Basestation, SimTime::ZERO).is_err());
    let bcast = command(&t, Platform::Bigo.id(), Direction::Broadcast, set(4));
    assert!(t.sync_in_command(&bcast, Via::Peer(1), SimTime::ZERO).is_err());
    assert_eq!(t.behavior_changes(), 0);
    assert_eq!(t.rejections().len(), 4);
}

#[test]
fn unknown_behavior_fails_without_switching() {
    let mut t = pt(Platform::Flux);
    let s = t.handle_set_behavior(42, SimTime::ZERO);
    assert_eq!(s.status, BehaviorStatus::Failure);
    assert_eq!(t.current_behavior(), (behavior::MEASURE_DEFAULT, BehaviorStatus::Running));
}

#[test]
fn hypoxia_switches_effects_and_rate() {
    let mut cfg = TwinConfig::new(Platform::Mansio);
    cfg.effects = BTreeMap::from([(behavior::HYPOXIA, vec!["lights_on".into()])]);
    cfg.measurement_period = std::time::Duration::from_secs(120);
    let mut t = Twin::start(cfg, Bus::new(), SimTime::ZERO).unwrap();
    let env = command(&t, Platform::Flux.id(), Direction::Broadcast, event("Hypoxia"));
    let acc = t.sync_in_command(&env, Via::Peer(2), SimTime::from_secs(30)).unwrap();
    assert!(matches!(acc, Accepted::Event { rebroadcast: false, .. }));
    assert!(t.has_effect("lights_on"));
    assert_eq!(t.active_period(), behavior::FAST_PERIOD);
    assert_eq!(t.next_wakeup(), Some(SimTime::from_secs(30)));
}

#[test]
fn commanded_event_is_rebroadcast() {
    let mut t = pt(Platform::Flux);
    let env = command(&t, Platform::Flux.id(), Direction::DtToPt, event("Hypoxia"));
    t.sync_in_command(&env, Via::Basestation, SimTime::ZERO).unwrap();
    let out = t.take_outbound();
    let b: Vec<_> = out.iter().filter(|o| o.is_broadcast()).collect();
    assert_eq!(b.len(), 1);
    assert_eq!(b[0].envelope.payload, vec![Value::Utf8("Hypoxia".into())]);
    // own broadcast heard back is ignored
    let echo = b[0].envelope.clone();
    assert!(t.sync_in_command(&echo, Via::Peer(2), SimTime::ZERO).is_err());
}

#[test]
fn guard_blocks_failed_commands() {
    let mut cfg = TwinConfig::new(Platform::Viator).digital();
    cfg.guard = true;
    let mut guarded = Twin::start(cfg, Bus::new(), SimTime::ZERO).unwrap();
    assert!(matches!(
        guarded.guarded_sync_command(SetBehavior { behavior_id: 77 }, SimTime::ZERO),
        Err(TwinError::LocalBehaviorFailed(77))
    ));
    assert_eq!(guarded.pending_outbound(), 0);
    let env = guarded.guarded_sync_command(SetBehavior { behavior_id: 4 }, SimTime::ZERO).unwrap().unwrap();
    assert_eq!(env.direction, Direction::DtToPt);
    assert_eq!(env.platform_id, Platform::Viator.id());

    let mut open = dt(Platform::Viator);
    assert!(open.guarded_sync_command(SetBehavior { behavior_id: 77 }, SimTime::ZERO).unwrap().is_some());
}

#[test]
fn role_checks() {
    let mut p = pt(Platform::Bigo);
    assert!(matches!(p.guarded_sync_command(SetBehavior { behavior_id: 1 }, SimTime::ZERO), Err(TwinError::NotDigital)));
    let mut d = dt(Platform::Bigo);
    let env = command(&d, 1, Direction::DtToPt, set(1));
    assert!(matches!(d.sync_in_command(&env, Via::Basestation, SimTime::ZERO), Err(TwinError::NotPhysical)));
}

#[test]
fn roster_rejects_duplicates() {
    let mut r = TwinRoster::new();
    r.start_twin(TwinConfig::new(Platform::Flux), Bus::new(), SimTime::ZERO).unwrap();
    r.start_twin(TwinConfig::new(Platform::Flux).digital(), Bus::new(), SimTime::ZERO).unwrap();
    assert!(matches!(
        r.start_twin(TwinConfig::new(Platform::Flux), Bus::new(), SimTime::ZERO),
        Err(TwinError::DuplicateTwin { platform: Platform::Flux, .. })
    ));
    assert!(r.stop_twin(Platform::Flux, false));
    assert!(r.start_twin(TwinConfig::new(Platform::Flux), Bus::new(), SimTime::ZERO).is_ok());
}

#[test]
fn digital_twin_mirrors_and_detects() {
    let mut cfg = TwinConfig::new(Platform::Flux).digital();
    cfg.auto_events = true;
    let mut d = Twin::start(cfg, Bus::new(), SimTime::ZERO).unwrap();
    let low = TwinMessage::StandardO2(StandardO2 { timestamp: 5, oxygen: 40.0, saturation: 14.0, temperature: 9.0 });
    let topic = d.deliver_remote(0, low, SimTime::from_secs(5)).unwrap();
    assert_eq!(topic.to_string(), "/flux/skills/o2/std");
    assert_eq!(d.last_remote_o2().unwrap().oxygen, 40.0);
    let out = d.take_outbound();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].envelope.type_id, crate::codec::O2_EVENT);
    assert!(matches!(d.deliver_remote(200, set(1), SimTime::ZERO), Err(TwinError::UnknownTopicIndex(200))));
}

#[test]
fn digital_twin_follows_reported_behavior() {
    let mut d = dt(Platform::Viator);
    let status = |id, status| TwinMessage::StandardStatus(StandardStatus { timestamp: 0, behavior_id: id, status });
    d.deliver_remote(1, status(behavior::HYPOXIA, BehaviorStatus::Running), SimTime::ZERO).unwrap();
    assert_eq!(d.current_behavior(), (behavior::HYPOXIA, BehaviorStatus::Running));
    d.deliver_remote(1, status(behavior::HYPOXIA, BehaviorStatus::Finished), SimTime::ZERO).unwrap();
    d.deliver_remote(1, status(9, BehaviorStatus::Failure), SimTime::ZERO).unwrap();
    assert_eq!(d.current_behavior(), (behavior::HYPOXIA, BehaviorStatus::Running));
    assert_eq!(d.last_remote_status().unwrap().behavior_id, 9);
}

#[test]
fn pump_routes_operator_commands() {
    let bus = Bus::new();
    let mut d = Twin::start(TwinConfig::new(Platform::Bigo).digital(), bus.clone(), SimTime::ZERO).unwrap();
    let operator = Skill::new(100, "operator", "/ops").unwrap();
    let topic = TopicPath::parse("/bigo/skills/behavior/set").unwrap();
    bus.publish(&topic, TwinBusMessage { message: set(5), origin: Origin::Local }, &operator).unwrap();
    let res = d.pump(SimTime::ZERO);
    assert_eq!(res.len(), 1);
    assert!(res[0].as_ref().unwrap().is_some());
    assert_eq!(d.current_behavior().0, 5);
    assert!(d.pump(SimTime::ZERO).is_empty());
}

#[test]
fn heartbeat_and_halt() {
    let mut cfg = TwinConfig::new(Platform::Bigo);
    cfg.status_period = Some(std::time::Duration::from_secs(60));
    let mut t = Twin::start(cfg, Bus::new(), SimTime::ZERO).unwrap();
    t.halt_measurements_at(SimTime::from_secs(120));
    for s in 0..=200 {
        t.on_tick(SimTime::from_secs(s));
    }
    assert_eq!(t.samples_taken(), 2);
    assert_eq!(t.status_log().len(), 1);
    assert_eq!(t.next_wakeup(), None);
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::PtToDt), Just(Direction::DtToPt), Just(Direction::Broadcast)]
}

fn message() -> impl Strategy<Value = TwinMessage> {
    prop_oneof![
        (0u8..20).prop_map(set),
        prop_oneof![Just("Hypoxia"), Just("Oxia"), Just("Anoxia")].prop_map(event),
    ]
}

fn via() -> impl Strategy<Value = Via> {
    prop_oneof![Just(Via::Basestation), (1u8..6).prop_map(Via::Peer)]
}

proptest! {
    #[test]
    fn commands_only_take_effect_through_the_digital_twin(
        inputs in proptest::collection::vec((1u8..6, direction(), message(), via()), 1..60)
    ) {
        let mut t = pt(Platform::Mansio);
        let own = Platform::Mansio.id();
        for (i, (platform, dir, msg, via)) in inputs.into_iter().enumerate() {
            let env = command(&t, platform, dir, msg.clone());
            let before = t.behavior_changes();
            let res = t.sync_in_command(&env, via, SimTime::from_secs(i as u64));
            let changed = t.behavior_changes() > before;
            let known = match &msg {
                TwinMessage::SetBehavior(s) => t.behaviors().contains(s.behavior_id),
                TwinMessage::O2Event(e) => behavior_for_event(&e.event).is_some(),
                _ => false,
            };
            let legit_command = dir == Direction::DtToPt && platform == own && via == Via::Basestation;
            let lateral_event = dir == Direction::Broadcast
                && platform != own
                && matches!(msg, TwinMessage::O2Event(_));
            prop_assert_eq!(changed, (legit_command || lateral_event) && known);
            if !(legit_command || lateral_event) {
                prop_assert!(res.is_err());
            }
        }
    }

    #[test]
    fn every_status_has_a_cause(
        cmds in proptest::collection::vec((0u8..8, 0u64..600), 0..30)
    ) {
        let mut t = pt(Platform::Viator);
        let mut sorted = cmds.clone();
        sorted.sort_by_key(|c| c.1);
        let mut causes = 0usize;
        for (id, at) in sorted {
            t.on_tick(SimTime::from_secs(at));
            let env = command(&t, Platform::Viator.id(), Direction::DtToPt, set(id));
            let _ = t.sync_in_command(&env, Via::Basestation, SimTime::from_secs(at));
            causes += 1;
        }
        // each command yields at most FINISHED + RUNNING, or one FAILURE
        let log = t.status_log();
        prop_assert!(log.len() <= 2 * causes);
        let running = log.iter().filter(|(_, s)| s.status == BehaviorStatus::Running).count();
        let failures = log.iter().filter(|(_, s)| s.status == BehaviorStatus::Failure).count();
        prop_assert_eq!(running + failures, causes);
    }
}
