use proptest::prelude::*;

use super::*;
use crate::bus::{Bus, TopicPattern};
use crate::channel::{ChannelParams, LossModel, Position};
use crate::codec::{fragment, BehaviorStatus, Frame, StandardO2, Value};
use crate::twin::{TwinConfig, Via};

fn lossless_channel() -> AcousticChannel {
    let mut ch = AcousticChannel::new(ChannelParams { loss: LossModel::NONE, ..ChannelParams::default() }).unwrap();
    ch.add_endpoint(SHIP, Position::new(0.0, 0.0, 0.0)).unwrap();
    for p in Platform::ALL {
        ch.add_endpoint(p.id(), Position::new(300.0 * p.id() as f64, 0.0, 20.0)).unwrap();
    }
    ch
}

fn station() -> Basestation {
    let mut bs = Basestation::default();
    for p in Platform::ALL {
        let dt = Twin::start(TwinConfig::new(p).digital(), Bus::new(), SimTime::ZERO).unwrap();
        bs.register(dt).unwrap();
    }
    bs
}

fn o2_envelope(platform: Platform, oxygen: f32, seq: u16) -> Envelope {
    let msg = TwinMessage::StandardO2(StandardO2 { timestamp: 0, oxygen, saturation: 0.0, temperature: 10.0 });
    Envelope {
        platform_id: platform.id(),
        skill_id: 1,
        topic_index: 0,
        direction: Direction::PtToDt,
        sequence: seq,
        type_id: msg.type_id(),
        payload: msg.to_values(),
    }
}

/// Sends `env` from its platform to the ship and routes whatever arrives.
fn uplink(bs: &mut Basestation, ch: &mut AcousticChannel, env: &Envelope, now: SimTime) -> Vec<Result<Option<u64>, RouteError>> {
    let encoded = encode(env, &SchemaRegistry::standard()).unwrap();
    // forged platform ids still need a real transmitter
    let src = ch.position(env.platform_id).map_or(1, |_| env.platform_id);
    for f in fragment(&encoded, env.sequence).unwrap() {
        ch.send_im(now, src, SHIP, &f.to_bytes()).unwrap();
    }
    let until = now + Duration::from_secs(600);
    ch.poll(until).into_iter().map(|d| bs.route_up(d.arrival, ch, &d)).collect()
}

#[test]
fn uplink_lands_on_the_dt_topic() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let dt = bs.twin(Platform::Flux).unwrap();
    let sub = dt.bus().subscribe(&TopicPattern::parse("/flux/**").unwrap(), &dt.skills()[0].clone()).unwrap();
    let res = uplink(&mut bs, &mut ch, &o2_envelope(Platform::Flux, 230.0, 0), SimTime::ZERO);
    assert!(matches!(res[..], [Ok(Some(0))]));
    let got = sub.drain();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].topic.to_string(), "/flux/skills/o2/std");
    let r = &bs.log().records()[0];
    assert_eq!(r.kind, LogKind::Uplink);
    assert_eq!(r.topic.as_deref(), Some("/flux/skills/o2/std"));
    assert!(r.flags.is_empty());
    assert_eq!(bs.liveness(Platform::Flux, r.t), Some(true));
    assert_eq!(bs.liveness(Platform::Bigo, r.t), None);
    assert_eq!(bs.liveness(Platform::Flux, r.t + Duration::from_secs(181)), Some(false));
}

#[test]
fn implausible_samples_are_flagged_and_still_routed() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let rx = bs.subscribe();
    for (i, o2) in [750.0, 230.0, 812.5].into_iter().enumerate() {
        uplink(&mut bs, &mut ch, &o2_envelope(Platform::Mansio, o2, i as u16), SimTime::from_secs(i as u64 * 60));
    }
    let flagged: Vec<bool> = rx.try_iter().map(|r| r.has_flag(FLAG_IMPLAUSIBLE)).collect();
    assert_eq!(flagged, vec![true, false, true]);
    assert_eq!(bs.twin(Platform::Mansio).unwrap().last_remote_o2().unwrap().oxygen, 812.5);
}

#[test]
fn unroutable_envelopes_are_logged_drops() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let mut foreign = o2_envelope(Platform::Bigo, 1.0, 0);
    foreign.platform_id = 99;
    let res = uplink(&mut bs, &mut ch, &foreign, SimTime::ZERO);
    assert!(matches!(res[..], [Err(RouteError::UnknownPlatform(99))]));
    let mut bad_index = o2_envelope(Platform::Bigo, 1.0, 1);
    bad_index.topic_index = 40;
    let res = uplink(&mut bs, &mut ch, &bad_index, SimTime::from_secs(1));
    assert!(matches!(res[..], [Err(RouteError::UnknownTopicIndex { index: 40, .. })]));
    let garbage = Delivery {
        tx_id: 0,
        src: 1,
        dst: SHIP,
        queued_at: SimTime::ZERO,
        tx_start: SimTime::ZERO,
        arrival: SimTime::from_secs(2),
        bytes: Frame { envelope_sequence: 0, fragment_index: 0, fragment_count: 1, chunk: vec![9, 9, 9] }.to_bytes(),
        dropped: None,
    };
    assert!(matches!(bs.route_up(SimTime::from_secs(2), &mut ch, &garbage), Err(RouteError::DecodeFailure(_))));
    let kinds: Vec<LogKind> = bs.log().records().iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![LogKind::Dropped; 3]);
}

#[test]
fn route_down_addresses_the_platform() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let env = bs
        .twin_mut(Platform::Mansio)
        .unwrap()
        .guarded_sync_command(SetBehavior { behavior_id: 3 }, SimTime::ZERO)
        .unwrap()
        .unwrap();
    let (_, ds) = bs.route_down(SimTime::ZERO, &mut ch, &env).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds[0].dst, Platform::Mansio.id());
    let mut stray = env.clone();
    stray.platform_id = 42;
    assert!(matches!(bs.route_down(SimTime::ZERO, &mut ch, &stray), Err(RouteError::UnknownPlatform(42))));
    let mut up = env.clone();
    up.direction = Direction::PtToDt;
    assert!(matches!(bs.route_down(SimTime::ZERO, &mut ch, &up), Err(RouteError::BadDirection(_))));
}

#[test]
fn oversized_commands_are_refused() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let env = Envelope {
        platform_id: Platform::Flux.id(),
        skill_id: 3,
        topic_index: 3,
        direction: Direction::DtToPt,
        sequence: 0,
        type_id: crate::codec::O2_EVENT,
        payload: vec![Value::Utf8("x".repeat(16 * 1024))],
    };
    assert!(matches!(
        bs.route_down(SimTime::ZERO, &mut ch, &env),
        Err(RouteError::OversizedAfterFragmentation { .. })
    ));
    assert!(ch.trace().is_empty());
}

#[test]
fn broadcast_records_fates() {
    let mut bs = station();
    let mut ch = lossless_channel();
    let (receipt, ds) = bs.broadcast_event(SimTime::ZERO, &mut ch, "Hypoxia").unwrap();
    assert_eq!(receipt.fates.len(), 5);
    assert!(receipt.fates.values().all(|f| f.delivered && f.arrival.is_some()));
    assert_eq!(ds.len(), 5 * receipt.frames);
    assert!(matches!(bs.broadcast_event(SimTime::ZERO, &mut ch, ""), Err(RouteError::EmptyEvent)));

    // delivered frames are accepted by a PT as a lateral event
    let mut pt = Twin::start(TwinConfig::new(Platform::Viator), Bus::new(), SimTime::ZERO).unwrap();
    let d = ds.iter().find(|d| d.dst == Platform::Viator.id()).unwrap();
    let env = decode(&Frame::from_bytes(&d.bytes).unwrap().chunk, &SchemaRegistry::standard()).unwrap();
    pt.sync_in_command(&env, Via::Peer(SHIP), d.arrival).unwrap();
    assert_eq!(pt.current_behavior(), (3, BehaviorStatus::Running));
}

#[test]
fn api_validation_and_guard() {
    let mut bs = Basestation::default();
    let mut cfg = TwinConfig::new(Platform::Flux).digital();
    cfg.guard = true;
    bs.register(Twin::start(cfg, Bus::new(), SimTime::ZERO).unwrap()).unwrap();
    let mut ch = lossless_channel();
    let now = SimTime::ZERO;
    let (r, _) = bs.handle_api(now, &mut ch, ApiRequest::Broadcast { event: String::new() });
    assert!(matches!(r, ApiResponse::Error(ApiError { kind: ApiErrorKind::BadRequest, .. })));
    let (r, _) = bs.handle_api(now, &mut ch, ApiRequest::Broadcast { event: "Storm".into() });
    assert!(r.is_error());
    let (r, _) = bs.handle_api(now, &mut ch, ApiRequest::SetBehavior { platform: Platform::Bigo, behavior_id: 1 });
    assert!(matches!(r, ApiResponse::Error(ApiError { kind: ApiErrorKind::NotFound, .. })));
    let (r, d) = bs.handle_api(now, &mut ch, ApiRequest::SetBehavior { platform: Platform::Flux, behavior_id: 99 });
    assert!(matches!(r, ApiResponse::Error(ApiError { kind: ApiErrorKind::Rejected, .. })));
    assert!(d.is_empty());
    let (r, d) = bs.handle_api(now, &mut ch, ApiRequest::SetBehavior { platform: Platform::Flux, behavior_id: 4 });
    let ApiResponse::Command(receipt) = r else { panic!("{r:?}") };
    assert!(receipt.synchronized);
    assert_eq!(receipt.local_status.unwrap().status, BehaviorStatus::Running);
    assert_eq!(d.len(), 1);
    assert_eq!(bs.log().len(), 1);
    let (r, _) = bs.handle_api(now, &mut ch, ApiRequest::Config);
    let ApiResponse::Config(c) = r else { panic!() };
    assert!(c.guard);
    assert_eq!(c.events, vec!["Oxia", "Hypoxia"]);
    assert_eq!(c.behaviors.len(), 6);
}

#[test]
fn api_requests_round_trip_as_json() {
    let reqs = [
        ApiRequest::ListTwins,
        ApiRequest::SetBehavior { platform: Platform::Mansio, behavior_id: 3 },
        ApiRequest::O2Series { platform: Platform::Flux, from: Some(0.0), to: None },
        ApiRequest::Log { since: 5, limit: Some(10) },
    ];
    for r in reqs {
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ApiRequest>(&s).unwrap(), r);
    }
    let r: ApiRequest = serde_json::from_str(r#"{"op":"set_behavior","platform":"VIATOR","behavior_id":2}"#).unwrap();
    assert_eq!(r, ApiRequest::SetBehavior { platform: Platform::Viator, behavior_id: 2 });
}

#[test]
fn replay_matches_live_state() {
    let mut bs = station();
    let mut ch = lossless_channel();
    for i in 0..30u16 {
        let p = Platform::ALL[i as usize % 5];
        uplink(&mut bs, &mut ch, &o2_envelope(p, 100.0 + i as f32, i), SimTime::from_secs(i as u64 * 30));
    }
    let mut buf = Vec::new();
    bs.log().write_jsonl(&mut buf).unwrap();
    buf.extend_from_slice(b"{not json\n\n");
    let loaded = read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(loaded.corrupt, 1);
    assert_eq!(loaded.records, bs.log().records());

    let mansio = ReplayFilter { pattern: Some(TopicPattern::parse("/mansio/**").unwrap()), ..Default::default() };
    let hits: Vec<_> = replay(&loaded.records, &mansio).collect();
    assert_eq!(hits.len(), 6);
    assert!(hits.iter().all(|r| r.platform_id == Platform::Mansio.id()));
    assert_eq!(replay(&[], &ReplayFilter::default()).count(), 0);

    let mut fresh: BTreeMap<u8, Twin> = Platform::ALL
        .into_iter()
        .map(|p| (p.id(), Twin::start(TwinConfig::new(p).digital(), Bus::new(), SimTime::ZERO).unwrap()))
        .collect();
    assert_eq!(replay_into(&loaded.records, &mut fresh).unwrap(), 30);
    for p in Platform::ALL {
        assert_eq!(fresh[&p.id()].last_remote_o2(), bs.twin(p).unwrap().last_remote_o2());
    }
}

#[test]
fn duplicate_and_physical_registration_rejected() {
    let mut bs = station();
    let again = Twin::start(TwinConfig::new(Platform::Bigo).digital(), Bus::new(), SimTime::ZERO).unwrap();
    assert!(matches!(bs.register(again), Err(TwinError::DuplicateTwin { .. })));
    let pt = Twin::start(TwinConfig::new(Platform::Bigo), Bus::new(), SimTime::ZERO).unwrap();
    assert!(matches!(bs.register(pt), Err(TwinError::NotDigital)));
}

proptest! {
    #[test]
    fn reordered_fragments_route_exactly_once(
        text in "[a-z]{1,400}",
        order_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut bs = station();
        let mut ch = lossless_channel();
        // a long event string forces several fragments
        let msg = TwinMessage::O2Event(O2Event { event: text });
        let env = Envelope {
            platform_id: Platform::Flux.id(),
            skill_id: 3,
            topic_index: 3,
            direction: Direction::PtToDt,
            sequence: 0,
            type_id: msg.type_id(),
            payload: msg.to_values(),
        };
        let mut frames = fragment(&encode(&env, &SchemaRegistry::standard()).unwrap(), 7).unwrap();
        frames.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(order_seed));
        let mut routed = 0;
        for (i, f) in frames.iter().enumerate() {
            let d = Delivery {
                tx_id: i as u64,
                src: Platform::Flux.id(),
                dst: SHIP,
                queued_at: SimTime::ZERO,
                tx_start: SimTime::ZERO,
                arrival: SimTime::from_secs(i as u64),
                bytes: f.to_bytes(),
                dropped: None,
            };
            routed += bs.route_up(d.arrival, &mut ch, &d).unwrap().is_some() as usize;
        }
        prop_assert_eq!(routed, 1);
        prop_assert_eq!(bs.log().len(), 1);
        prop_assert_eq!(&bs.log().records()[0].payload, &Some(msg));
    }
}
