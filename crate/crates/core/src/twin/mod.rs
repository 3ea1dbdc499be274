//! Twin runtime shared by Physical Twins, Digital Twins and Digital Twin
//! Prototypes.
//!
//! One [`Twin`] type runs every role; [`TwinConfig::is_digital`] selects the
//! synchronization direction:
//!
//! * a Physical Twin (or a prototype running against emulated hardware)
//!   measures, publishes locally and syncs data and statuses up
//!   (`PT_TO_DT`); it accepts commands only when they come down from its
//!   Digital Twin via the basestation.
//! * a Digital Twin measures nothing itself; it receives the Physical Twin's
//!   data and syncs operator commands down (`DT_TO_PT`).
//!
//! The runtime does no I/O. Envelopes bound for the acoustic link are queued
//! and collected with [`Twin::take_outbound`]; timers are exposed through
//! [`Twin::next_wakeup`] and serviced by [`Twin::on_tick`].

pub mod behavior;
mod config;
mod events;
mod platform;
mod shadow;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use log::debug;
use thiserror::Error;

use crate::bus::{Bus, BusError, Skill, Subscription, TopicPath, TopicPattern};
use crate::codec::{
    BehaviorStatus, CodecError, Direction, Envelope, O2Event, SetBehavior, StandardO2, StandardStatus, TwinMessage,
};
use crate::time::SimTime;

pub use behavior::{behavior_for_event, BehaviorDef, BehaviorRegistry, MeasurementPlan};
pub use config::{HardwareMode, TwinConfig, MAX_MEASUREMENT_PERIOD, MIN_MEASUREMENT_PERIOD};
pub use events::{
    plausibility_check, EventDetector, O2State, O2Thresholds, Plausibility, PlausibilityBounds, HYPOXIA_EVENT,
    OXIA_EVENT,
};
pub use platform::Platform;
pub use shadow::{emulate_sensor, ShadowError, ShadowRecording, ShadowSample, SimulatedO2, SimulatedO2Params};

pub const SKILL_O2: u8 = 1;
pub const SKILL_BEHAVIOR: u8 = 2;
pub const SKILL_DECISION: u8 = 3;
pub const SKILL_DIAGNOSTICS: u8 = 4;

#[derive(Debug, Error)]
pub enum TwinError {
    #[error("a {role} twin for {platform} is already running")]
    DuplicateTwin { platform: Platform, role: &'static str },
    #[error("measurement period {0:?} outside 5 s ..= 300 s")]
    InvalidPeriod(Duration),
    #[error("invalid O2 thresholds {0:?}")]
    InvalidThresholds(O2Thresholds),
    #[error("{0} uses shadow playback but has no recording")]
    MissingShadow(Platform),
    #[error("command for platform {target} rejected by {own}")]
    RejectedForeignCommand { own: Platform, target: u8 },
    #[error("command not routed via the Digital Twin: {0}")]
    RejectedDirectCommand(String),
    #[error("behavior {0} failed on the Digital Twin; not synchronized")]
    LocalBehaviorFailed(u8),
    #[error("operation requires a Digital Twin")]
    NotDigital,
    #[error("operation requires a Physical Twin")]
    NotPhysical,
    #[error("topic index {0} not in the sync-topic table")]
    UnknownTopicIndex(u8),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
}

/// Whether a bus message was produced on this twin or arrived from its
/// counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Local,
    Remote,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwinBusMessage {
    pub message: TwinMessage,
    pub origin: Origin,
}

/// How an inbound envelope reached a Physical Twin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Via {
    /// The basestation modem, i.e. the Digital Twin's downlink.
    Basestation,
    /// Any other acoustic endpoint.
    Peer(u8),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outbound {
    pub envelope: Envelope,
}

impl Outbound {
    pub fn is_broadcast(&self) -> bool {
        self.envelope.direction == Direction::Broadcast
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Accepted {
    Behavior(StandardStatus),
    Event { event: String, status: StandardStatus, rebroadcast: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct EffectRecord {
    pub at: SimTime,
    pub behavior_id: u8,
    pub effect: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub at: SimTime,
    pub reason: String,
    pub envelope: Envelope,
}

/// The skills every platform runs, in declaration order.
pub fn platform_skills(platform: Platform) -> Vec<Skill> {
    let root = format!("/{}", platform.slug());
    let build = || -> Result<Vec<Skill>, BusError> {
        Ok(vec![
            Skill::new(SKILL_O2, "o2", &format!("{root}/skills/o2"))?.publishes("std")?,
            Skill::new(SKILL_BEHAVIOR, "behavior", &format!("{root}/skills/behavior"))?
                .publishes("status")?
                .subscribes("set")?,
            Skill::new(SKILL_DECISION, "decision", &format!("{root}/skills/decision"))?.subscribes("event")?,
            Skill::new(SKILL_DIAGNOSTICS, "diagnostics", &format!("{root}/internal"))?.publishes("debug")?,
        ])
    };
    build().expect("static skill layout")
}

/// One row of a platform's sync-topic table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncTopic {
    pub topic: TopicPath,
    pub skill_id: u8,
}

/// Expands a sync-pattern list into the concrete topic table whose row
/// numbers are the wire `topic_index`.
///
/// Rows follow pattern order first, then skill declaration order; a topic
/// matched by several patterns keeps its first row. Relative patterns are
/// anchored at the platform root (`/<platform>`).
pub fn sync_topic_table(platform: Platform, patterns: &[TopicPattern]) -> Vec<SyncTopic> {
    let root = TopicPath::parse(&format!("/{}", platform.slug())).expect("valid root");
    let skills = platform_skills(platform);
    let declared: Vec<(TopicPath, u8)> = skills
        .iter()
        .flat_map(|s| {
            s.published_topics()
                .iter()
                .cloned()
                .chain(s.subscribed_topics())
                .map(move |t| (t, s.id))
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut table = Vec::new();
    for pattern in patterns {
        let pattern = pattern.anchored(&root);
        for (topic, skill_id) in &declared {
            if pattern.matches(topic) && seen.insert(topic.clone()) && table.len() < 256 {
                table.push(SyncTopic { topic: topic.clone(), skill_id: *skill_id });
            }
        }
    }
    table
}

/// Guards against starting two twins in the same role for one platform.
#[derive(Debug, Default)]
pub struct TwinRoster {
    running: BTreeSet<(Platform, bool)>,
}

impl TwinRoster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_twin(&mut self, config: TwinConfig, bus: Bus<TwinBusMessage>, now: SimTime) -> Result<Twin, TwinError> {
        let key = (config.platform, config.is_digital);
        if self.running.contains(&key) {
            return Err(TwinError::DuplicateTwin {
                platform: config.platform,
                role: if config.is_digital { "digital" } else { "physical" },
            });
        }
        let twin = Twin::start(config, bus, now)?;
        self.running.insert(key);
        Ok(twin)
    }

    pub fn stop_twin(&mut self, platform: Platform, is_digital: bool) -> bool {
        self.running.remove(&(platform, is_digital))
    }
}

#[allow(clippy::large_enum_variant)]
enum O2Source {
    Simulated(SimulatedO2),
    Shadow(ShadowRecording),
}

/// A running twin. See the module docs for the role split.
pub struct Twin {
    config: TwinConfig,
    behaviors: BehaviorRegistry,
    skills: Vec<Skill>,
    table: Vec<SyncTopic>,
    bus: Bus<TwinBusMessage>,
    inbox: Vec<Subscription<TwinBusMessage>>,
    behavior: (u8, BehaviorStatus),
    behavior_changes: u64,
    measuring: bool,
    period: Duration,
    next_sample: Option<SimTime>,
    next_status: Option<SimTime>,
    halt_at: Option<SimTime>,
    o2: O2Source,
    detector: EventDetector,
    sequences: BTreeMap<u8, u16>,
    outbound: Vec<Outbound>,
    effects: Vec<EffectRecord>,
    statuses: Vec<(SimTime, StandardStatus)>,
    rejections: Vec<Rejection>,
    samples_taken: u64,
    last_remote_status: Option<StandardStatus>,
    last_remote_o2: Option<StandardO2>,
}

impl Twin {
    /// Starts the twin at `now`. A Physical Twin's measurement cycle is
    /// running immediately, with the first sample due at `now`.
    pub fn start(config: TwinConfig, bus: Bus<TwinBusMessage>, now: SimTime) -> Result<Twin, TwinError> {
        config.validate()?;
        let skills = platform_skills(config.platform);
        let table = sync_topic_table(config.platform, &config.sync_topics);
        let mut inbox = Vec::new();
        for skill in &skills {
            for pattern in skill.subscribed_patterns() {
                inbox.push(bus.subscribe(pattern, skill)?);
            }
        }
        let o2 = match (config.o2_mode(), &config.shadow) {
            (HardwareMode::EmulatedShadow, Some(rec)) => O2Source::Shadow(rec.clone()),
            _ => O2Source::Simulated(SimulatedO2::new(config.simulated, config.seed)),
        };
        let physical = !config.is_digital;
        let twin = Twin {
            behaviors: BehaviorRegistry::for_platform(&config.effects, &config.extra_behaviors),
            skills,
            table,
            bus,
            inbox,
            behavior: (behavior::MEASURE_DEFAULT, BehaviorStatus::Running),
            behavior_changes: 0,
            measuring: true,
            period: config.measurement_period,
            next_sample: physical.then_some(now),
            next_status: if physical { config.status_period.map(|p| now + p) } else { None },
            halt_at: None,
            o2,
            detector: EventDetector::new(config.thresholds),
            sequences: BTreeMap::new(),
            outbound: Vec::new(),
            effects: Vec::new(),
            statuses: Vec::new(),
            rejections: Vec::new(),
            samples_taken: 0,
            last_remote_status: None,
            last_remote_o2: None,
            config,
        };
        Ok(twin)
    }

    pub fn platform(&self) -> Platform {
        self.config.platform
    }

    pub fn is_digital(&self) -> bool {
        self.config.is_digital
    }

    pub fn config(&self) -> &TwinConfig {
        &self.config
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn sync_table(&self) -> &[SyncTopic] {
        &self.table
    }

    pub fn bus(&self) -> &Bus<TwinBusMessage> {
        &self.bus
    }

    pub fn behaviors(&self) -> &BehaviorRegistry {
        &self.behaviors
    }

    pub fn current_behavior(&self) -> (u8, BehaviorStatus) {
        self.behavior
    }

    /// Successful behavior switches since start.
    pub fn behavior_changes(&self) -> u64 {
        self.behavior_changes
    }

    pub fn is_measuring(&self) -> bool {
        self.measuring
    }

    pub fn active_period(&self) -> Duration {
        self.period
    }

    pub fn effect_log(&self) -> &[EffectRecord] {
        &self.effects
    }

    pub fn has_effect(&self, effect: &str) -> bool {
        self.effects.iter().any(|e| e.effect == effect)
    }

    /// Every status this twin emitted, with emission time.
    pub fn status_log(&self) -> &[(SimTime, StandardStatus)] {
        &self.statuses
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn samples_taken(&self) -> u64 {
        self.samples_taken
    }

    pub fn o2_state(&self) -> O2State {
        self.detector.state()
    }

    /// Digital Twin mirror of the last status its Physical Twin reported.
    pub fn last_remote_status(&self) -> Option<StandardStatus> {
        self.last_remote_status
    }

    pub fn last_remote_o2(&self) -> Option<StandardO2> {
        self.last_remote_o2
    }

    pub fn take_outbound(&mut self) -> Vec<Outbound> {
        std::mem::take(&mut self.outbound)
    }

    pub fn pending_outbound(&self) -> usize {
        self.outbound.len()
    }

    /// No samples or heartbeats at or after `t`.
    pub fn halt_measurements_at(&mut self, t: SimTime) {
        self.halt_at = Some(t);
    }

    pub fn topic_index(&self, topic: &TopicPath) -> Option<u8> {
        self.table.iter().position(|row| &row.topic == topic).map(|i| i as u8)
    }

    pub fn topic_at(&self, index: u8) -> Option<&SyncTopic> {
        self.table.get(index as usize)
    }

    fn skill(&self, id: u8) -> &Skill {
        self.skills.iter().find(|s| s.id == id).expect("fixed skill ids")
    }

    fn skill_topic(&self, skill: u8, rel: &str) -> TopicPath {
        self.skill(skill).namespace().join(rel).expect("valid relative topic")
    }

    fn timestamp(&self, now: SimTime) -> i64 {
        self.config.epoch_ms + now.as_millis() as i64
    }

    fn halted(&self, now: SimTime) -> bool {
        self.halt_at.is_some_and(|h| now >= h)
    }

    pub fn next_wakeup(&self) -> Option<SimTime> {
        match (self.next_sample, self.next_status) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Services every timer due at or before `now`.
    pub fn on_tick(&mut self, now: SimTime) {
        if self.halted(now) {
            self.next_sample = None;
            self.next_status = None;
            return;
        }
        while let Some(due) = self.next_sample.filter(|&t| t <= now) {
            self.take_sample(due);
            self.next_sample = Some(due + self.period);
        }
        while let Some(due) = self.next_status.filter(|&t| t <= now) {
            let (id, status) = self.behavior;
            self.emit_status(id, status, due);
            self.next_status = self.config.status_period.map(|p| due + p);
        }
    }

    fn take_sample(&mut self, now: SimTime) {
        let t_ms = now.as_millis();
        let sample = match &mut self.o2 {
            O2Source::Simulated(sim) => sim.read(t_ms, self.config.epoch_ms),
            O2Source::Shadow(rec) => match emulate_sensor(rec, t_ms, self.config.epoch_ms) {
                Ok(s) => s,
                Err(e) => {
                    debug!("{}: no shadow sample at {now}: {e}", self.platform());
                    return;
                }
            },
        };
        self.samples_taken += 1;
        self.emit(SKILL_O2, "std", TwinMessage::StandardO2(sample), now);
    }

    /// Publishes locally and, on a Physical Twin, syncs up.
    fn emit(&mut self, skill: u8, rel: &str, message: TwinMessage, _now: SimTime) -> Option<Envelope> {
        let topic = self.skill_topic(skill, rel);
        let publisher = self.skill(skill).clone();
        let local = TwinBusMessage { message: message.clone(), origin: Origin::Local };
        self.bus.publish(&topic, local, &publisher).expect("absolute topic");
        self.sync_out(&topic, &message)
    }

    fn emit_status(&mut self, behavior_id: u8, status: BehaviorStatus, now: SimTime) -> StandardStatus {
        let s = StandardStatus { timestamp: self.timestamp(now), behavior_id, status };
        self.statuses.push((now, s));
        self.emit(SKILL_BEHAVIOR, "status", TwinMessage::StandardStatus(s), now);
        s
    }

    fn next_sequence(&mut self, skill: u8) -> u16 {
        let seq = self.sequences.entry(skill).or_insert(0);
        let out = *seq;
        *seq = seq.wrapping_add(1);
        out
    }

    fn envelope_for(&mut self, topic: &TopicPath, message: &TwinMessage, direction: Direction) -> Option<Envelope> {
        let index = self.topic_index(topic)?;
        let skill_id = self.table[index as usize].skill_id;
        Some(Envelope {
            platform_id: self.platform().id(),
            skill_id,
            topic_index: index,
            direction,
            sequence: self.next_sequence(skill_id),
            type_id: message.type_id(),
            payload: message.to_values(),
        })
    }

    fn queue(&mut self, envelope: Envelope) -> Envelope {
        self.outbound.push(Outbound { envelope: envelope.clone() });
        envelope
    }

    /// Physical Twin uplink: if `topic` is in the sync table, queue a
    /// `PT_TO_DT` envelope and return a copy. A Digital Twin never syncs its
    /// own data, so this is always `None` there.
    pub fn sync_out(&mut self, topic: &TopicPath, message: &TwinMessage) -> Option<Envelope> {
        if self.is_digital() {
            return None;
        }
        let env = self.envelope_for(topic, message, Direction::PtToDt)?;
        Some(self.queue(env))
    }

    fn sync_command(&mut self, topic: &TopicPath, message: &TwinMessage) -> Option<Envelope> {
        debug_assert!(self.is_digital());
        let env = self.envelope_for(topic, message, Direction::DtToPt)?;
        Some(self.queue(env))
    }

    fn reject(&mut self, envelope: &Envelope, error: TwinError, now: SimTime) -> TwinError {
        debug!("{} dropped envelope: {error}", self.platform());
        self.rejections.push(Rejection { at: now, reason: error.to_string(), envelope: envelope.clone() });
        error
    }

    /// Physical Twin downlink. Commands are accepted only when tagged
    /// `DT_TO_PT` for this platform and delivered by the basestation.
    /// Broadcast `O2Event`s from any endpoint are accepted as environmental
    /// events.
    pub fn sync_in_command(&mut self, envelope: &Envelope, via: Via, now: SimTime) -> Result<Accepted, TwinError> {
        if self.is_digital() {
            return Err(TwinError::NotPhysical);
        }
        let message = match TwinMessage::from_values(envelope.type_id, &envelope.payload) {
            Ok(m) => m,
            Err(e) => return Err(self.reject(envelope, e.into(), now)),
        };
        match envelope.direction {
            Direction::Broadcast => match message {
                TwinMessage::O2Event(ev) if envelope.platform_id != self.platform().id() => {
                    self.handle_event(&ev, false, now).map_err(|e| self.reject(envelope, e, now))
                }
                TwinMessage::O2Event(_) => {
                    Err(self.reject(envelope, TwinError::RejectedDirectCommand("own broadcast echo".into()), now))
                }
                other => Err(self.reject(
                    envelope,
                    TwinError::RejectedDirectCommand(format!("{} sent as broadcast", other.type_name())),
                    now,
                )),
            },
            Direction::PtToDt => Err(self.reject(
                envelope,
                TwinError::RejectedDirectCommand("envelope tagged PT_TO_DT".into()),
                now,
            )),
            Direction::DtToPt => {
                if envelope.platform_id != self.platform().id() {
                    let own = self.platform();
                    return Err(self.reject(
                        envelope,
                        TwinError::RejectedForeignCommand { own, target: envelope.platform_id },
                        now,
                    ));
                }
                if via != Via::Basestation {
                    return Err(self.reject(
                        envelope,
                        TwinError::RejectedDirectCommand(format!("arrived via {via:?}, not the basestation")),
                        now,
                    ));
                }
                let Some(row) = self.topic_at(envelope.topic_index).cloned() else {
                    return Err(self.reject(envelope, TwinError::UnknownTopicIndex(envelope.topic_index), now));
                };
                let publisher = self.skill(row.skill_id).clone();
                let remote = TwinBusMessage { message: message.clone(), origin: Origin::Remote };
                self.bus.publish(&row.topic, remote, &publisher)?;
                match message {
                    TwinMessage::SetBehavior(cmd) => Ok(Accepted::Behavior(self.handle_set_behavior(cmd.behavior_id, now))),
                    TwinMessage::O2Event(ev) => {
                        self.handle_event(&ev, true, now).map_err(|e| self.reject(envelope, e, now))
                    }
                    other => Err(self.reject(
                        envelope,
                        TwinError::RejectedDirectCommand(format!("{} is not a command", other.type_name())),
                        now,
                    )),
                }
            }
        }
    }

    fn handle_event(&mut self, ev: &O2Event, rebroadcast: bool, now: SimTime) -> Result<Accepted, TwinError> {
        let behavior_id = behavior_for_event(&ev.event).ok_or_else(|| TwinError::UnknownEvent(ev.event.clone()))?;
        let status = self.handle_set_behavior(behavior_id, now);
        if rebroadcast {
            let topic = self.skill_topic(SKILL_DECISION, "event");
            let msg = TwinMessage::O2Event(ev.clone());
            if let Some(env) = self.envelope_for(&topic, &msg, Direction::Broadcast) {
                self.queue(env);
            }
        }
        Ok(Accepted::Event { event: ev.event.clone(), status, rebroadcast })
    }

    /// Switches behavior. A RUNNING behavior is reported FINISHED first;
    /// unknown ids leave the current behavior alone and report FAILURE.
    pub fn handle_set_behavior(&mut self, behavior_id: u8, now: SimTime) -> StandardStatus {
        let Some(def) = self.behaviors.get(behavior_id).cloned() else {
            return self.emit_status(behavior_id, BehaviorStatus::Failure, now);
        };
        let (current, status) = self.behavior;
        if status == BehaviorStatus::Running {
            self.emit_status(current, BehaviorStatus::Finished, now);
        }
        self.behavior = (behavior_id, BehaviorStatus::Running);
        self.behavior_changes += 1;
        self.apply_plan(def.plan, now);
        for effect in &def.effects {
            self.effects.push(EffectRecord { at: now, behavior_id, effect: effect.clone() });
        }
        self.emit_status(behavior_id, BehaviorStatus::Running, now)
    }

    fn apply_plan(&mut self, plan: MeasurementPlan, now: SimTime) {
        let period = match plan {
            MeasurementPlan::Unchanged => return,
            MeasurementPlan::Off => {
                self.measuring = false;
                self.next_sample = None;
                return;
            }
            MeasurementPlan::Default => self.config.measurement_period,
            MeasurementPlan::Every(p) => p,
        };
        if self.measuring && self.period == period {
            return;
        }
        self.measuring = true;
        self.period = period;
        if !self.is_digital() && !self.halted(now) {
            self.next_sample = Some(now);
        }
    }

    /// Digital Twin command path. With the guard on, the behavior is applied
    /// here first and only a RUNNING outcome is synchronized down; with the
    /// guard off the command goes down regardless. The returned envelope is
    /// also queued for the uplink.
    pub fn guarded_sync_command(&mut self, command: SetBehavior, now: SimTime) -> Result<Option<Envelope>, TwinError> {
        if !self.is_digital() {
            return Err(TwinError::NotDigital);
        }
        let topic = self.skill_topic(SKILL_BEHAVIOR, "set");
        let msg = TwinMessage::SetBehavior(command);
        let local = TwinBusMessage { message: msg.clone(), origin: Origin::Local };
        let publisher = self.skill(SKILL_BEHAVIOR).clone();
        self.bus.publish(&topic, local, &publisher)?;
        let outcome = self.handle_set_behavior(command.behavior_id, now);
        if self.config.guard && outcome.status == BehaviorStatus::Failure {
            return Err(TwinError::LocalBehaviorFailed(command.behavior_id));
        }
        Ok(self.sync_command(&topic, &msg))
    }

    /// Digital Twin decision node: an event published here is applied
    /// locally (subject to the guard) and synchronized down so the Physical
    /// Twin can act on it and pass it on.
    pub fn inject_event(&mut self, event: &O2Event, now: SimTime) -> Result<Option<Envelope>, TwinError> {
        if !self.is_digital() {
            return Err(TwinError::NotDigital);
        }
        let behavior_id = behavior_for_event(&event.event).ok_or_else(|| TwinError::UnknownEvent(event.event.clone()))?;
        let topic = self.skill_topic(SKILL_DECISION, "event");
        let msg = TwinMessage::O2Event(event.clone());
        let local = TwinBusMessage { message: msg.clone(), origin: Origin::Local };
        let publisher = self.skill(SKILL_DECISION).clone();
        self.bus.publish(&topic, local, &publisher)?;
        let outcome = self.handle_set_behavior(behavior_id, now);
        if self.config.guard && outcome.status == BehaviorStatus::Failure {
            return Err(TwinError::LocalBehaviorFailed(behavior_id));
        }
        Ok(self.sync_command(&topic, &msg))
    }

    /// Digital Twin intake of Physical Twin data routed by the basestation.
    pub fn deliver_remote(&mut self, topic_index: u8, message: TwinMessage, now: SimTime) -> Result<TopicPath, TwinError> {
        if !self.is_digital() {
            return Err(TwinError::NotDigital);
        }
        let row = self.topic_at(topic_index).cloned().ok_or(TwinError::UnknownTopicIndex(topic_index))?;
        let publisher = self.skill(row.skill_id).clone();
        self.bus
            .publish(&row.topic, TwinBusMessage { message: message.clone(), origin: Origin::Remote }, &publisher)?;
        match &message {
            TwinMessage::StandardStatus(s) => {
                self.last_remote_status = Some(*s);
                // the mirror follows what the physical side reports running
                if s.status == BehaviorStatus::Running {
                    self.behavior = (s.behavior_id, BehaviorStatus::Running);
                }
            }
            TwinMessage::StandardO2(sample) => {
                self.last_remote_o2 = Some(*sample);
                let detected = self.detector.detect(sample);
                if let (true, Some(ev)) = (self.config.auto_events, detected) {
                    if let Err(e) = self.inject_event(&ev, now) {
                        debug!("{} auto event {} not synchronized: {e}", self.platform(), ev.event);
                    }
                }
            }
            _ => {}
        }
        Ok(row.topic)
    }

    /// Processes commands that other local skills published on this twin's
    /// command topics. Messages this twin published itself are skipped.
    pub fn pump(&mut self, now: SimTime) -> Vec<Result<Option<Envelope>, TwinError>> {
        let own: BTreeSet<u8> = self.skills.iter().map(|s| s.id).collect();
        let pending: Vec<_> = self.inbox.iter().flat_map(|sub| sub.drain()).collect();
        let mut results = Vec::new();
        for msg in pending {
            if own.contains(&msg.publisher) || msg.message.origin == Origin::Remote {
                continue;
            }
            let res = match (self.is_digital(), msg.message.message) {
                (true, TwinMessage::SetBehavior(cmd)) => self.guarded_sync_command(cmd, now),
                (true, TwinMessage::O2Event(ev)) => self.inject_event(&ev, now),
                (false, TwinMessage::SetBehavior(cmd)) => {
                    self.handle_set_behavior(cmd.behavior_id, now);
                    Ok(None)
                }
                (false, TwinMessage::O2Event(ev)) => self.handle_event(&ev, false, now).map(|_| None),
                _ => continue,
            };
            results.push(res);
        }
        results
    }
}

#[cfg(test)]
mod tests;
