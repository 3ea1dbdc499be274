//! The four mission scenarios. Each one builds a fresh [`Mission`], drives it
//! through the basestation API, and checks the outcome.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basestation::{ApiRequest, ApiResponse, LogKind, LogRecord, FLAG_IMPLAUSIBLE};
use crate::bus::{Skill, TopicPattern};
use crate::channel::{LossModel, TraceRecord, SHIP};
use crate::codec::{
    encode, fragment, BehaviorStatus, Direction, Envelope, O2Event, SchemaRegistry, SetBehavior, TwinMessage,
};
use crate::time::{SimTime, TimeSource, WallClock};
use crate::twin::{behavior, plausibility_check, Origin, Plausibility, Platform, HYPOXIA_EVENT};

use super::config::{MissionConfig, RunMode};
use super::mission::{Mission, MissionError, ScriptAction};
use super::report::{Counts, LatencyStats, PlatformOutcome, ScenarioReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    /// Periodic measurements synchronized up to the Digital Twins.
    A,
    /// Operator commands synchronized down; forged commands ignored.
    B,
    /// Event broadcast from the ship.
    C,
    /// Event decided at a Digital Twin and spread by its Physical Twin.
    D,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::A, Scenario::B, Scenario::C, Scenario::D];

    pub fn letter(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
            Scenario::C => "c",
            Scenario::D => "d",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            "c" => Ok(Scenario::C),
            "d" => Ok(Scenario::D),
            other => Err(format!("unknown scenario `{other}` (a|b|c|d)")),
        }
    }
}

/// Number of forged command envelopes thrown at the Physical Twins in (b).
pub const FORGED_COMMANDS: usize = 10_000;

/// When the operator acts in (c) and (d).
pub const EVENT_AT: SimTime = SimTime::from_secs(60);

pub fn run_scenario(scenario: Scenario, config: &MissionConfig, out: Option<&Path>) -> Result<ScenarioReport, MissionError> {
    match scenario {
        Scenario::A => run_scenario_a(config, out),
        Scenario::B => run_scenario_b(config, out),
        Scenario::C => run_scenario_c(config, out),
        Scenario::D => run_scenario_d(config, out),
    }
}

fn new_report(scenario: Scenario, config: &MissionConfig) -> ScenarioReport {
    let mode = match config.mode {
        RunMode::Virtual => "virtual",
        RunMode::Realtime => "realtime",
    };
    ScenarioReport::new(scenario.letter(), config.seed, config.duration_s, mode)
}

fn drive(mission: &mut Mission) {
    match mission.config().mode {
        RunMode::Virtual => mission.run(),
        RunMode::Realtime => mission.run_paced(&mut WallClock::start_now()),
    }
}

fn drive_until(mission: &mut Mission, t: SimTime) {
    match mission.config().mode {
        RunMode::Virtual => mission.run_until(t),
        RunMode::Realtime => {
            let mut clock = WallClock::start_now();
            let offset = mission.now();
            while let Some(next) = mission.next_event_time().filter(|&n| n <= t) {
                clock.wait_until(SimTime::ZERO + next.saturating_sub(offset));
                mission.step(next);
            }
            mission.run_until(t);
        }
    }
}

fn uplinks<'a>(m: &'a Mission, p: Platform) -> impl Iterator<Item = &'a LogRecord> + 'a {
    m.basestation()
        .log()
        .records()
        .iter()
        .filter(move |r| r.kind == LogKind::Uplink && r.platform_id == p.id())
}

fn o2_at_dt(m: &Mission, p: Platform) -> u64 {
    uplinks(m, p).filter(|r| matches!(r.payload, Some(TwinMessage::StandardO2(_)))).count() as u64
}

/// Statuses the Digital Twin received for `behavior_id` in state `status`.
fn statuses_at_dt(m: &Mission, p: Platform, behavior_id: u8, status: BehaviorStatus) -> Vec<SimTime> {
    uplinks(m, p)
        .filter(|r| {
            matches!(r.payload, Some(TwinMessage::StandardStatus(s)) if s.behavior_id == behavior_id && s.status == status)
        })
        .map(|r| r.t)
        .collect()
}

fn count_kind(m: &Mission, kind: LogKind) -> u64 {
    m.basestation().log().records().iter().filter(|r| r.kind == kind).count() as u64
}

fn counts(m: &Mission) -> Counts {
    let s = m.channel().summary();
    Counts {
        frames_sent: s.transmissions,
        frames_delivered: s.delivered,
        frames_dropped: s.dropped,
        uplink_records: count_kind(m, LogKind::Uplink),
        downlink_records: count_kind(m, LogKind::Downlink),
        dropped_records: count_kind(m, LogKind::Dropped),
    }
}

fn add_counts(into: &mut Counts, c: &Counts) {
    into.frames_sent += c.frames_sent;
    into.frames_delivered += c.frames_delivered;
    into.frames_dropped += c.frames_dropped;
    into.uplink_records += c.uplink_records;
    into.downlink_records += c.downlink_records;
    into.dropped_records += c.dropped_records;
}

/// (measured, modelled) latency for every delivered frame, where the model
/// is queueing + |frame| / byte_rate + distance / sound_speed.
pub fn latency_samples(m: &Mission) -> Vec<(f64, f64)> {
    let params = m.channel().params();
    let mut sends: BTreeMap<u64, (SimTime, SimTime, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    for r in m.channel().trace() {
        match r {
            TraceRecord::Send { t, tx_id, size, tx_start, .. } => {
                sends.insert(*tx_id, (*t, *tx_start, *size));
            }
            TraceRecord::Deliver { tx_id, src, dst, latency, .. } => {
                let (t, start, size) = sends[tx_id];
                let queueing = start.saturating_sub(t).as_secs_f64();
                let d = m.channel().distance(*src, *dst).expect("known endpoints");
                out.push((*latency, queueing + size as f64 / params.byte_rate + d / params.sound_speed));
            }
            _ => {}
        }
    }
    out
}

fn outcomes(m: &Mission) -> Vec<PlatformOutcome> {
    m.physical_twins()
        .map(|pt| {
            let p = pt.platform();
            PlatformOutcome {
                platform: p.name().to_string(),
                samples_taken: pt.samples_taken(),
                samples_at_dt: o2_at_dt(m, p),
                behavior_id: pt.current_behavior().0,
                behavior_changes: pt.behavior_changes(),
                effects: pt.effect_log().iter().map(|e| e.effect.clone()).collect(),
                received_broadcast: None,
                rejected_commands: pt.rejections().len() as u64,
            }
        })
        .collect()
}

/// Writes `<tag>-log.jsonl` and `<tag>-trace.jsonl` and records them.
fn write_outputs(m: &Mission, report: &mut ScenarioReport, tag: &str, out: Option<&Path>) -> Result<(), MissionError> {
    let Some(dir) = out else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    let log = format!("{tag}-log.jsonl");
    let trace = format!("{tag}-trace.jsonl");
    m.basestation().log().write_jsonl(BufWriter::new(File::create(dir.join(&log))?))?;
    m.channel().write_trace(BufWriter::new(File::create(dir.join(&trace))?))?;
    let key = |k: &str| if tag.len() == 1 { k.to_string() } else { format!("{}_{k}", &tag[2..]) };
    report.files.insert(key("log"), log);
    report.files.insert(key("trace"), trace);
    Ok(())
}

fn finish(m: &Mission, report: &mut ScenarioReport, out: Option<&Path>) -> Result<(), MissionError> {
    report.counts = counts(m);
    report.latency = LatencyStats::from_samples(&latency_samples(m));
    report.platforms = outcomes(m);
    write_outputs(m, report, &report.scenario.clone(), out)?;
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(())
}

/// Samples taken at `offset + k * period` strictly before `end`.
pub fn expected_samples(offset: Duration, period: Duration, end: Duration) -> u64 {
    if offset >= end || period.is_zero() {
        return 0;
    }
    let span = (end - offset).as_nanos();
    span.div_ceil(period.as_nanos()) as u64
}

pub fn run_scenario_a(config: &MissionConfig, out: Option<&Path>) -> Result<ScenarioReport, MissionError> {
    let mut report = new_report(Scenario::A, config);
    let mut m = Mission::new(config.clone())?;
    let observer = Skill::new(250, "observer", "/observer").expect("valid");
    let everything = TopicPattern::parse("/**").expect("valid");
    let taps: Vec<_> = config
        .platforms
        .iter()
        .map(|s| {
            let bus = m.digital(s.name).expect("registered").bus().clone();
            (s.name, bus.subscribe(&everything, &observer).expect("absolute pattern"))
        })
        .collect();
    drive(&mut m);

    let lossless = config.loss() == LossModel::NONE;
    let mut counts_ok = Vec::new();
    let mut delivery = Vec::new();
    let mut bijection = Vec::new();
    for (p, tap) in &taps {
        let spec = config.platform(*p).expect("configured");
        let want = expected_samples(spec.start_offset(), spec.measurement_period(), config.duration());
        let pt = m.physical(*p).expect("running");
        let taken = pt.samples_taken();
        let at_dt = o2_at_dt(&m, *p);
        counts_ok.push((p, taken == want, format!("{p} {taken}/{want}")));
        let ok = if lossless { at_dt == taken } else { at_dt <= taken };
        delivery.push((ok, format!("{p} {at_dt}/{taken}")));
        let remote = tap.drain().into_iter().filter(|m| m.message.origin == Origin::Remote).count() as u64;
        let records = uplinks(&m, *p).count() as u64;
        bijection.push((remote == records, format!("{p} {remote}/{records}")));
    }
    let detail = |v: &[(bool, String)]| v.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join(", ");
    let counts_flat: Vec<(bool, String)> = counts_ok.into_iter().map(|(_, ok, s)| (ok, s)).collect();
    report.check(
        "sample counts match period arithmetic",
        counts_flat.iter().all(|c| c.0),
        detail(&counts_flat),
    );
    let name = if lossless { "every synced sample reaches its DT" } else { "no sample duplicated on the way up" };
    report.check(name, delivery.iter().all(|c| c.0), detail(&delivery));
    report.check(
        "one DT bus publication per routed record",
        bijection.iter().all(|c| c.0),
        detail(&bijection),
    );

    let lat = latency_samples(&m);
    let stats = LatencyStats::from_samples(&lat);
    let err = stats.max_model_error_s.unwrap_or(0.0);
    report.check(
        "latency = queueing + serialization + propagation",
        !lat.is_empty() && err <= 1e-6,
        format!("{} deliveries, max deviation {err:.3e} s", lat.len()),
    );

    let bounds = config.plausibility;
    let mut wrong = 0;
    let mut flagged = 0;
    for r in m.basestation().log().records() {
        if let (LogKind::Uplink, Some(TwinMessage::StandardO2(s))) = (r.kind, &r.payload) {
            let bad = plausibility_check(s, &bounds) == Plausibility::Implausible;
            flagged += bad as usize;
            if bad != r.has_flag(FLAG_IMPLAUSIBLE) {
                wrong += 1;
            }
        }
    }
    report.check(
        "implausible samples flagged, plausible ones not",
        wrong == 0,
        format!("{flagged} flagged, {wrong} misflagged"),
    );
    if !lossless {
        report.notes.push(format!("lossy channel (p0 {}, alpha {})", config.channel.p0, config.channel.alpha));
    }
    finish(&m, &mut report, out)?;
    Ok(report)
}

/// Counts interruptions of at least `2 * period` between consecutive sample
/// timestamps.
pub fn count_gaps(timestamps_ms: &[i64], period: Duration) -> usize {
    let limit = 2 * period.as_millis() as i64;
    timestamps_ms.windows(2).filter(|w| w[1] - w[0] >= limit).count()
}

/// A command envelope that must not change a Physical Twin's behavior: wrong
/// direction, wrong platform, or not sent by the basestation.
pub fn forged_command(rng: &mut impl Rng, target: Platform, endpoints: &[u8]) -> (u8, Envelope) {
    loop {
        let src = endpoints[rng.random_range(0..endpoints.len())];
        if src == target.id() {
            continue;
        }
        let message = if rng.random_bool(0.5) {
            TwinMessage::SetBehavior(SetBehavior { behavior_id: rng.random_range(0..=20) })
        } else {
            let event = ["Hypoxia", "Oxia"][rng.random_range(0..2)];
            TwinMessage::O2Event(O2Event { event: event.to_string() })
        };
        let direction = [Direction::PtToDt, Direction::DtToPt, Direction::Broadcast][rng.random_range(0..3)];
        let platform_id = match rng.random_range(0..4) {
            0 => target.id(),
            1 => rng.random_range(0..=5),
            2 => 99,
            _ => rng.random(),
        };
        let genuine = src == SHIP && direction == Direction::DtToPt && platform_id == target.id();
        let lateral_event = direction == Direction::Broadcast
            && matches!(message, TwinMessage::O2Event(_))
            && platform_id != target.id();
        if genuine || lateral_event {
            continue;
        }
        let env = Envelope {
            platform_id,
            skill_id: rng.random_range(0..=4),
            topic_index: rng.random_range(0..=5),
            direction,
            sequence: rng.random(),
            type_id: message.type_id(),
            payload: message.to_values(),
        };
        return (src, env);
    }
}

fn frame_bytes(env: &Envelope, seq: u16) -> Vec<Vec<u8>> {
    let encoded = encode(env, &SchemaRegistry::standard()).expect("standard schema");
    fragment(&encoded, seq).expect("small envelope").iter().map(|f| f.to_bytes()).collect()
}

pub fn run_scenario_b(config: &MissionConfig, out: Option<&Path>) -> Result<ScenarioReport, MissionError> {
    let mut report = new_report(Scenario::B, config);
    let mut m = Mission::new(config.clone())?;
    let d = config.duration();
    let at = |f: f64| SimTime::ZERO + d.mul_f64(f);
    let platforms: Vec<Platform> = config.platforms.iter().map(|s| s.name).collect();

    let mut command_times = BTreeMap::new();
    for (i, p) in platforms.iter().enumerate() {
        let t = SimTime::from_secs(10 + 60 * i as u64);
        command_times.insert(*p, t);
        m.schedule_api(t, ApiRequest::SetBehavior { platform: *p, behavior_id: behavior::OXIA });
    }
    let toggles = [
        (0.2, behavior::IDLE),
        (0.4, behavior::MEASURE_DEFAULT),
        (0.6, behavior::IDLE),
        (0.8, behavior::MEASURE_DEFAULT),
    ];
    let mansio = config.platform(Platform::Mansio).map(|s| s.measurement_period());
    if mansio.is_some() {
        for (f, id) in toggles {
            m.schedule_api(at(f), ApiRequest::SetBehavior { platform: Platform::Mansio, behavior_id: id });
        }
    }

    // wrong-direction commands over the real channel
    let direct_at = at(0.85);
    let mut direct = 0;
    for p in &platforms {
        let mut env = Envelope {
            platform_id: p.id(),
            skill_id: 2,
            topic_index: 2,
            direction: Direction::PtToDt,
            sequence: 0,
            type_id: crate::codec::SET_BEHAVIOR,
            payload: TwinMessage::SetBehavior(SetBehavior { behavior_id: behavior::MEASURE_FAST }).to_values(),
        };
        for bytes in frame_bytes(&env, 9000 + direct) {
            m.schedule(direct_at, ScriptAction::Transmit { src: SHIP, dst: p.id(), bytes });
        }
        direct += 1;
        // right direction, but from a neighbor instead of the ship
        env.direction = Direction::DtToPt;
        let neighbor = platforms.iter().find(|q| *q != p).map(|q| q.id());
        if let Some(src) = neighbor {
            for bytes in frame_bytes(&env, 9000 + direct) {
                m.schedule(direct_at, ScriptAction::Transmit { src, dst: p.id(), bytes });
            }
            direct += 1;
        }
    }

    let forged_at = at(0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xF0F0_F0F0);
    let mut endpoints: Vec<u8> = vec![SHIP];
    endpoints.extend(platforms.iter().map(|p| p.id()));
    for i in 0..FORGED_COMMANDS {
        let target = platforms[i % platforms.len()];
        let (src, env) = forged_command(&mut rng, target, &endpoints);
        for bytes in frame_bytes(&env, rng.random()) {
            m.schedule(forged_at, ScriptAction::InjectFrame { platform: target, src, bytes });
        }
    }

    drive_until(&mut m, SimTime::from_nanos(direct_at.as_nanos() - 1));
    let before: BTreeMap<Platform, u64> = platforms.iter().map(|p| (*p, m.physical(*p).unwrap().behavior_changes())).collect();
    let receptions_before = m.receptions().len();
    drive(&mut m);

    // commands accepted and acknowledged
    let mut acks = Vec::new();
    for p in &platforms {
        let sent_at = command_times[p];
        let synced = m.api_exchanges().iter().any(|x| {
            x.t == sent_at && matches!(&x.response, ApiResponse::Command(r) if r.platform == *p && r.synchronized)
        });
        let pt = m.physical(*p).expect("running");
        let switched = pt
            .status_log()
            .iter()
            .any(|(t, s)| *t > sent_at && s.behavior_id == behavior::OXIA && s.status == BehaviorStatus::Running);
        let acked = statuses_at_dt(&m, *p, behavior::OXIA, BehaviorStatus::Running).iter().any(|t| *t > sent_at);
        acks.push((*p, synced && switched && acked, format!("{p}: synced {synced}, PT switched {switched}, DT got RUNNING {acked}")));
    }
    report.check(
        "SetBehavior{2} accepted and acknowledged by every platform",
        acks.iter().all(|a| a.1),
        acks.iter().map(|a| a.2.as_str()).collect::<Vec<_>>().join("; "),
    );

    // forged commands
    let after: BTreeMap<Platform, u64> = platforms.iter().map(|p| (*p, m.physical(*p).unwrap().behavior_changes())).collect();
    let late = &m.receptions()[receptions_before..];
    let accepted_late = late.iter().filter(|r| r.accepted).count();
    let changes: u64 = platforms.iter().map(|p| after[p] - before[p]).sum();
    report.check(
        "forged, foreign and misdirected commands change nothing",
        changes == 0 && accepted_late == 0 && late.len() >= FORGED_COMMANDS,
        format!("{} envelopes received, {accepted_late} accepted, {changes} behavior changes", late.len()),
    );
    let direct_rejected = late.iter().filter(|r| r.t < forged_at && !r.accepted).count();
    report.check(
        "commands sent straight over the channel are rejected",
        direct_rejected == direct as usize,
        format!("{direct_rejected}/{direct} rejected"),
    );

    // MANSIO stop/start
    match mansio {
        Some(period) => {
            let ts: Vec<i64> = uplinks(&m, Platform::Mansio)
                .filter_map(|r| match &r.payload {
                    Some(TwinMessage::StandardO2(s)) => Some(s.timestamp),
                    _ => None,
                })
                .collect();
            let gaps = count_gaps(&ts, period);
            let idle = d.mul_f64(0.2);
            report.check(
                "MANSIO stop/start leaves exactly two gaps",
                gaps == 2 && idle >= 2 * period,
                format!("{gaps} gaps of >= {} s in {} samples", 2 * period.as_secs(), ts.len()),
            );
        }
        None => {
            report.check("MANSIO stop/start leaves exactly two gaps", false, "MANSIO not in the mission");
        }
    }
    finish(&m, &mut report, out)?;
    Ok(report)
}

/// Receiver-side view of one broadcast: which platforms accepted it and
/// when their Digital Twins heard the resulting status.
struct ReceiverCheck {
    received: BTreeSet<Platform>,
    missed: BTreeSet<Platform>,
    /// Receivers that switched but whose status never reached the DT after `since`.
    unacknowledged: BTreeSet<Platform>,
    wrong_behavior: BTreeSet<Platform>,
}

fn check_receivers(m: &Mission, since: SimTime, source: Option<Platform>) -> ReceiverCheck {
    let mut c = ReceiverCheck {
        received: BTreeSet::new(),
        missed: BTreeSet::new(),
        unacknowledged: BTreeSet::new(),
        wrong_behavior: BTreeSet::new(),
    };
    for pt in m.physical_twins() {
        let p = pt.platform();
        if Some(p) == source {
            continue;
        }
        let got = m.receptions().iter().any(|r| {
            r.platform == p && r.accepted && r.direction == Some(Direction::Broadcast) && r.t >= since
        });
        if got {
            c.received.insert(p);
            if pt.current_behavior() != (behavior::HYPOXIA, BehaviorStatus::Running) {
                c.wrong_behavior.insert(p);
            }
            let acked = statuses_at_dt(m, p, behavior::HYPOXIA, BehaviorStatus::Running).iter().any(|t| *t > since);
            if !acked {
                c.unacknowledged.insert(p);
            }
        } else {
            c.missed.insert(p);
            if pt.current_behavior().0 == behavior::HYPOXIA {
                c.wrong_behavior.insert(p);
            }
        }
    }
    c
}

fn names(set: &BTreeSet<Platform>) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|p| p.name()).collect::<Vec<_>>().join(",")
}

fn mark_receivers(report: &mut ScenarioReport, c: &ReceiverCheck) {
    for o in &mut report.platforms {
        let p: Platform = o.platform.parse().expect("platform name");
        if c.received.contains(&p) {
            o.received_broadcast = Some(true);
        } else if c.missed.contains(&p) {
            o.received_broadcast = Some(false);
        }
    }
}

struct BroadcastRun {
    mission: Mission,
    check: ReceiverCheck,
    trace: Vec<u8>,
    log: Vec<u8>,
}

fn broadcast_run(config: &MissionConfig, loss: LossModel) -> Result<BroadcastRun, MissionError> {
    let mut cfg = config.clone();
    cfg.set_loss(loss);
    let mut m = Mission::new(cfg)?;
    m.schedule_api(EVENT_AT, ApiRequest::Broadcast { event: HYPOXIA_EVENT.to_string() });
    drive(&mut m);
    let check = check_receivers(&m, EVENT_AT, None);
    let mut trace = Vec::new();
    m.channel().write_trace(&mut trace)?;
    let mut log = Vec::new();
    m.basestation().log().write_jsonl(&mut log)?;
    Ok(BroadcastRun { mission: m, check, trace, log })
}

/// p0 used for the lossy broadcast in (c).
pub const LOSSY_P0: f64 = 0.4;

pub fn run_scenario_c(config: &MissionConfig, out: Option<&Path>) -> Result<ScenarioReport, MissionError> {
    let mut report = new_report(Scenario::C, config);
    let all: BTreeSet<Platform> = config.platforms.iter().map(|s| s.name).collect();

    let clean = broadcast_run(config, LossModel::NONE)?;
    let c = &clean.check;
    report.check(
        "lossless broadcast switches every platform",
        c.received == all && c.wrong_behavior.is_empty(),
        format!("received {}, missed {}", names(&c.received), names(&c.missed)),
    );
    report.check(
        "every switched platform acknowledges at its DT",
        c.unacknowledged.is_empty() && !c.received.is_empty(),
        format!("unacknowledged {}", names(&c.unacknowledged)),
    );
    let has = |p: Platform, e: &str| clean.mission.physical(p).is_some_and(|t| t.has_effect(e));
    report.check(
        "MANSIO turns its lights on, VIATOR moves backwards",
        has(Platform::Mansio, "lights_on") && has(Platform::Viator, "move_backwards"),
        format!(
            "lights_on {}, move_backwards {}",
            has(Platform::Mansio, "lights_on"),
            has(Platform::Viator, "move_backwards")
        ),
    );

    let lossy = LossModel { p0: LOSSY_P0, alpha: 0.0 };
    let first = broadcast_run(config, lossy)?;
    let again = broadcast_run(config, lossy)?;
    let fc = &first.check;
    report.check(
        "lossy broadcast reaches a strict subset",
        fc.received.len() < all.len() && fc.wrong_behavior.is_empty(),
        format!("p0 {LOSSY_P0}, seed {}: received {}, missed {}", config.seed, names(&fc.received), names(&fc.missed)),
    );
    report.check(
        "lossy rerun is identical",
        fc.received == again.check.received && first.trace == again.trace && first.log == again.log,
        format!("rerun received {}", names(&again.check.received)),
    );

    let blocked = broadcast_run(config, LossModel { p0: 1.0, alpha: 0.0 })?;
    let changes: u64 = blocked.mission.physical_twins().map(|t| t.behavior_changes()).sum();
    report.check("p0 = 1 changes no behavior", changes == 0, format!("{changes} behavior changes"));

    let mut total = Counts::default();
    for run in [&clean, &first, &blocked] {
        add_counts(&mut total, &counts(&run.mission));
    }
    report.counts = total;
    report.latency = LatencyStats::from_samples(&latency_samples(&clean.mission));
    report.platforms = outcomes(&first.mission);
    mark_receivers(&mut report, &first.check);
    report.notes.push("platform rows show the lossy run".into());
    write_outputs(&clean.mission, &mut report, "c-lossless", out)?;
    write_outputs(&first.mission, &mut report, "c-lossy", out)?;
    write_outputs(&blocked.mission, &mut report, "c-blocked", out)?;
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

pub fn run_scenario_d(config: &MissionConfig, out: Option<&Path>) -> Result<ScenarioReport, MissionError> {
    let mut report = new_report(Scenario::D, config);
    let mut m = Mission::new(config.clone())?;
    let source = Platform::Flux;
    m.schedule_api(EVENT_AT, ApiRequest::InjectEvent { platform: source, event: HYPOXIA_EVENT.to_string() });
    drive(&mut m);

    let log = m.basestation().log().records();
    let injected = log.iter().find(|r| {
        r.kind == LogKind::Downlink
            && r.platform_id == source.id()
            && matches!(&r.payload, Some(TwinMessage::O2Event(e)) if e.event == HYPOXIA_EVENT)
    });
    let overheard = log.iter().find(|r| {
        r.kind == LogKind::Overheard && matches!(&r.payload, Some(TwinMessage::O2Event(e)) if e.event == HYPOXIA_EVENT)
    });
    let broadcasters: BTreeSet<Platform> = m.pt_broadcasts().iter().map(|b| b.platform).collect();
    report.check(
        "FLUX is the broadcasting platform",
        broadcasters == BTreeSet::from([source]) && overheard.is_none_or(|r| r.platform_id == source.id()),
        format!("broadcasts from {}", names(&broadcasters)),
    );

    let t_inject = injected.map(|r| r.t);
    let t_broadcast = overheard.and_then(|r| r.sent_at).or_else(|| m.pt_broadcasts().first().map(|b| b.t));
    let receivers = check_receivers(&m, t_broadcast.unwrap_or(SimTime::ZERO), Some(source));
    let mut chain_ok = matches!((t_inject, t_broadcast), (Some(i), Some(b)) if i < b);
    let mut lines = vec![format!(
        "DT injection {}, PT broadcast {}",
        t_inject.map_or("missing".into(), |t| t.to_string()),
        t_broadcast.map_or("missing".into(), |t| t.to_string())
    )];
    for p in &receivers.received {
        let first = statuses_at_dt(&m, *p, behavior::HYPOXIA, BehaviorStatus::Running)
            .into_iter()
            .find(|t| t_broadcast.is_some_and(|b| *t > b));
        chain_ok &= first.is_some();
        lines.push(format!("{p} status {}", first.map_or("missing".into(), |t| t.to_string())));
    }
    report.check(
        "DT injection < PT broadcast < every receiver status",
        chain_ok && !receivers.received.is_empty(),
        lines.join("; "),
    );
    let others = config.platforms.len().saturating_sub(1);
    if config.loss() == LossModel::NONE {
        report.check(
            "lossless: chain complete for every other platform",
            receivers.received.len() == others,
            format!("{}/{others} received", receivers.received.len()),
        );
    }
    report.check(
        "missed platforms keep their behavior",
        receivers.wrong_behavior.is_empty(),
        format!("missed {}", names(&receivers.missed)),
    );
    finish(&m, &mut report, out)?;
    mark_receivers(&mut report, &receivers);
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_arithmetic() {
        let h = Duration::from_secs(3600);
        assert_eq!(expected_samples(Duration::ZERO, Duration::from_secs(300), h), 12);
        assert_eq!(expected_samples(Duration::ZERO, Duration::from_secs(5), h), 720);
        assert_eq!(expected_samples(Duration::from_secs(1), Duration::from_secs(5), h), 720);
        assert_eq!(expected_samples(Duration::from_secs(5), Duration::from_secs(5), h), 719);
        assert_eq!(expected_samples(Duration::ZERO, Duration::from_secs(7), h), 515);
        assert_eq!(expected_samples(h, Duration::from_secs(5), h), 0);
    }

    #[test]
    fn gap_counting() {
        let p = Duration::from_secs(120);
        assert_eq!(count_gaps(&[0, 120_000, 240_000], p), 0);
        assert_eq!(count_gaps(&[0, 120_000, 480_000, 600_000, 1_200_000], p), 2);
        assert_eq!(count_gaps(&[], p), 0);
    }

    #[test]
    fn forged_commands_are_never_genuine() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let (src, env) = forged_command(&mut rng, Platform::Mansio, &[0, 1, 2, 3, 4, 5]);
            assert_ne!(src, Platform::Mansio.id());
            assert!(!(src == SHIP && env.direction == Direction::DtToPt && env.platform_id == 4));
        }
    }
}
