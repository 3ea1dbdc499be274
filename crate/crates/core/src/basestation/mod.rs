//! The shipboard hub: Digital Twin registry, PT/DT router, mission log and
//! the operator API.
//!
//! The basestation owns every Digital Twin and the ship's modem (endpoint
//! [`SHIP`]). Frames from the channel go through [`Basestation::route_up`];
//! Digital Twin commands leave through [`Basestation::route_down`]. Every
//! routed, dropped or broadcast message becomes one [`LogRecord`].

mod api;
mod log;

use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;

use crate::channel::{AcousticChannel, ChannelError, Delivery, Modem, SHIP};
use crate::codec::{
    decode, encode, CodecError, Direction, Envelope, O2Event, SchemaRegistry, SetBehavior, TwinMessage,
};
use crate::time::SimTime;
use crate::twin::{
    plausibility_check, Platform, Plausibility, PlausibilityBounds, Twin, TwinError, HYPOXIA_EVENT, OXIA_EVENT,
    SKILL_DECISION,
};

pub use api::{
    ApiError, ApiErrorKind, ApiRequest, ApiResponse, BehaviorInfo, BroadcastReceipt, CommandReceipt, ConsoleConfig,
    O2Point, PlatformInfo, TraceReport, TwinView,
};
pub use log::{
    read_jsonl, replay, replay_into, write_jsonl, Fate, LoadedLog, LogKind, LogRecord, MissionLog, ReplayFilter,
    FLAG_IMPLAUSIBLE,
};

/// Events an operator may broadcast.
pub const KNOWN_EVENTS: [&str; 2] = [OXIA_EVENT, HYPOXIA_EVENT];

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("platform {0} has no registered Digital Twin")]
    UnknownPlatform(u8),
    #[error("platform {platform}: topic index {index} not in its sync table")]
    UnknownTopicIndex { platform: u8, index: u8 },
    #[error("undecodable message: {0}")]
    DecodeFailure(CodecError),
    #[error("unexpected direction {0}")]
    BadDirection(Direction),
    #[error("{len}-byte envelope needs more than 255 fragments")]
    OversizedAfterFragmentation { len: usize },
    #[error("event must be non-empty")]
    EmptyEvent,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Twin(#[from] TwinError),
}

struct Entry {
    twin: Twin,
    last_heard: Option<SimTime>,
    uplink: u64,
    last_o2_implausible: bool,
}

pub struct Basestation {
    registry: BTreeMap<u8, Entry>,
    modem: Modem,
    schemas: SchemaRegistry,
    log: MissionLog,
    bounds: PlausibilityBounds,
    broadcast_seq: u16,
}

impl Default for Basestation {
    fn default() -> Self {
        Self::new(PlausibilityBounds::default())
    }
}

impl Basestation {
    pub fn new(bounds: PlausibilityBounds) -> Self {
        Basestation {
            registry: BTreeMap::new(),
            modem: Modem::new(SHIP),
            schemas: SchemaRegistry::standard(),
            log: MissionLog::new(),
            bounds,
            broadcast_seq: 0,
        }
    }

    /// Registers a Digital Twin; one per platform.
    pub fn register(&mut self, twin: Twin) -> Result<(), TwinError> {
        if !twin.is_digital() {
            return Err(TwinError::NotDigital);
        }
        let platform = twin.platform();
        if self.registry.contains_key(&platform.id()) {
            return Err(TwinError::DuplicateTwin { platform, role: "digital" });
        }
        self.registry.insert(platform.id(), Entry { twin, last_heard: None, uplink: 0, last_o2_implausible: false });
        Ok(())
    }

    pub fn platforms(&self) -> impl Iterator<Item = Platform> + '_ {
        self.registry.values().map(|e| e.twin.platform())
    }

    pub fn twin(&self, platform: Platform) -> Option<&Twin> {
        self.registry.get(&platform.id()).map(|e| &e.twin)
    }

    pub fn twin_mut(&mut self, platform: Platform) -> Option<&mut Twin> {
        self.registry.get_mut(&platform.id()).map(|e| &mut e.twin)
    }

    pub fn log(&self) -> &MissionLog {
        &self.log
    }

    /// Live record feed; see [`MissionLog::subscribe`].
    pub fn subscribe(&mut self) -> std::sync::mpsc::Receiver<LogRecord> {
        self.log.subscribe()
    }

    pub fn modem(&self) -> &Modem {
        &self.modem
    }

    pub fn bounds(&self) -> PlausibilityBounds {
        self.bounds
    }

    pub fn last_heard(&self, platform: Platform) -> Option<SimTime> {
        self.registry.get(&platform.id()).and_then(|e| e.last_heard)
    }

    /// Heard within three measurement periods of `now`; `None` if never heard.
    pub fn liveness(&self, platform: Platform, now: SimTime) -> Option<bool> {
        let e = self.registry.get(&platform.id())?;
        let heard = e.last_heard?;
        Some(now.saturating_sub(heard) <= 3 * e.twin.config().measurement_period)
    }

    fn topic_of(&self, platform: u8, index: u8) -> Option<String> {
        let entry = self.registry.get(&platform)?;
        entry.twin.topic_at(index).map(|row| row.topic.to_string())
    }

    fn drop_record(&mut self, now: SimTime, src: u8, env: Option<&Envelope>, error: &RouteError) {
        let mut r = LogRecord::new(now, LogKind::Dropped, env.map_or(src, |e| e.platform_id));
        if let Some(e) = env {
            r.direction = Some(e.direction);
            r.skill_id = e.skill_id;
            r.topic_index = Some(e.topic_index);
            r.type_name = self.schemas.get(e.type_id).map(|s| s.name.clone());
            r.payload = TwinMessage::from_values(e.type_id, &e.payload).ok();
        }
        r.error = Some(error.to_string());
        self.log.append(r);
    }

    /// Handles one frame the ship modem received. Completed envelopes from a
    /// Physical Twin are published on its Digital Twin's bus and logged;
    /// everything unroutable is logged as a drop. Returns the log sequence
    /// number once an envelope completes.
    pub fn route_up(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        delivery: &Delivery,
    ) -> Result<Option<u64>, RouteError> {
        let encoded = match self.modem.receive(now, delivery.src, &delivery.bytes) {
            Ok(Some(bytes)) => bytes,
            Ok(None) => return Ok(None),
            Err(e) => {
                let err = RouteError::DecodeFailure(e);
                self.drop_record(now, delivery.src, None, &err);
                return Err(err);
            }
        };
        let env = match decode(&encoded, &self.schemas) {
            Ok(env) => env,
            Err(e) => {
                let err = RouteError::DecodeFailure(e);
                self.drop_record(now, delivery.src, None, &err);
                return Err(err);
            }
        };
        let result = self.route_envelope(now, &env, delivery.queued_at);
        if let Err(err) = &result {
            self.drop_record(now, delivery.src, Some(&env), err);
        }
        // Digital Twins may have reacted, e.g. with a detected event.
        self.flush(now, channel);
        result.map(Some)
    }

    fn route_envelope(&mut self, now: SimTime, env: &Envelope, sent_at: SimTime) -> Result<u64, RouteError> {
        let message = TwinMessage::from_values(env.type_id, &env.payload).map_err(RouteError::DecodeFailure)?;
        let kind = match env.direction {
            Direction::PtToDt => LogKind::Uplink,
            Direction::Broadcast => LogKind::Overheard,
            other => return Err(RouteError::BadDirection(other)),
        };
        let bounds = self.bounds;
        let entry = self.registry.get_mut(&env.platform_id).ok_or(RouteError::UnknownPlatform(env.platform_id))?;
        let topic = entry
            .twin
            .topic_at(env.topic_index)
            .map(|row| row.topic.to_string())
            .ok_or(RouteError::UnknownTopicIndex { platform: env.platform_id, index: env.topic_index })?;
        let mut flags = Vec::new();
        if let TwinMessage::StandardO2(sample) = &message {
            if plausibility_check(sample, &bounds) == Plausibility::Implausible {
                flags.push(FLAG_IMPLAUSIBLE.to_string());
            }
        }
        if kind == LogKind::Uplink {
            entry.twin.deliver_remote(env.topic_index, message.clone(), now)?;
            entry.uplink += 1;
            if matches!(message, TwinMessage::StandardO2(_)) {
                entry.last_o2_implausible = !flags.is_empty();
            }
        }
        entry.last_heard = Some(now);
        let mut r = LogRecord::new(now, kind, env.platform_id);
        r.direction = Some(env.direction);
        r.skill_id = env.skill_id;
        r.topic_index = Some(env.topic_index);
        r.topic = Some(topic);
        r.type_name = Some(message.type_name().to_string());
        r.payload = Some(message);
        r.flags = flags;
        r.sent_at = Some(sent_at);
        Ok(self.log.append(r).seq)
    }

    fn send_frames(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        env: &Envelope,
        dst: Option<u8>,
    ) -> Result<Vec<Delivery>, RouteError> {
        let encoded = encode(env, &self.schemas).map_err(RouteError::DecodeFailure)?;
        let frames = match self.modem.frames_for(&encoded) {
            Ok(f) => f,
            Err(CodecError::TooManyFragments { .. }) => {
                return Err(RouteError::OversizedAfterFragmentation { len: encoded.len() })
            }
            Err(e) => return Err(RouteError::DecodeFailure(e)),
        };
        let mut out = Vec::new();
        for f in frames {
            match dst {
                Some(d) => out.push(channel.send_im(now, SHIP, d, &f)?),
                None => out.extend(channel.broadcast_im(now, SHIP, &f)?),
            }
        }
        Ok(out)
    }

    /// Sends a Digital Twin command to its Physical Twin as point-to-point
    /// instant messages and logs it.
    pub fn route_down(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        env: &Envelope,
    ) -> Result<(u64, Vec<Delivery>), RouteError> {
        if env.direction != Direction::DtToPt {
            return Err(RouteError::BadDirection(env.direction));
        }
        if !self.registry.contains_key(&env.platform_id) {
            return Err(RouteError::UnknownPlatform(env.platform_id));
        }
        let deliveries = self.send_frames(now, channel, env, Some(env.platform_id))?;
        let mut r = LogRecord::new(now, LogKind::Downlink, env.platform_id);
        r.direction = Some(env.direction);
        r.skill_id = env.skill_id;
        r.topic_index = Some(env.topic_index);
        r.topic = self.topic_of(env.platform_id, env.topic_index);
        r.type_name = self.schemas.get(env.type_id).map(|s| s.name.clone());
        r.payload = TwinMessage::from_values(env.type_id, &env.payload).ok();
        let seq = self.log.append(r).seq;
        Ok((seq, deliveries))
    }

    /// Routes everything the Digital Twins queued. Failures are logged.
    pub fn flush(&mut self, now: SimTime, channel: &mut AcousticChannel) -> Vec<Delivery> {
        let queued: Vec<Envelope> = self
            .registry
            .values_mut()
            .flat_map(|e| e.twin.take_outbound())
            .map(|o| o.envelope)
            .collect();
        let mut out = Vec::new();
        for env in queued {
            match self.route_down(now, channel, &env) {
                Ok((_, d)) => out.extend(d),
                Err(err) => self.drop_record(now, SHIP, Some(&env), &err),
            }
        }
        out
    }

    /// One broadcast instant message from the ship modem. Per-receiver fates
    /// are recorded with the log entry.
    pub fn broadcast_event(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        event: &str,
    ) -> Result<(BroadcastReceipt, Vec<Delivery>), RouteError> {
        if event.is_empty() {
            return Err(RouteError::EmptyEvent);
        }
        let message = TwinMessage::O2Event(O2Event { event: event.to_string() });
        let env = Envelope {
            platform_id: SHIP,
            skill_id: SKILL_DECISION,
            topic_index: 0,
            direction: Direction::Broadcast,
            sequence: self.broadcast_seq,
            type_id: message.type_id(),
            payload: message.to_values(),
        };
        self.broadcast_seq = self.broadcast_seq.wrapping_add(1);
        let deliveries = self.send_frames(now, channel, &env, None)?;
        let mut fates: BTreeMap<u8, Fate> = BTreeMap::new();
        for d in &deliveries {
            let f = fates.entry(d.dst).or_insert(Fate { delivered: true, arrival: None });
            if d.delivered() {
                f.arrival = f.arrival.max(Some(d.arrival));
            } else {
                f.delivered = false;
            }
        }
        for f in fates.values_mut() {
            if !f.delivered {
                f.arrival = None;
            }
        }
        let frames = deliveries.iter().map(|d| d.tx_id).collect::<std::collections::BTreeSet<_>>().len();
        let mut r = LogRecord::new(now, LogKind::Broadcast, SHIP);
        r.direction = Some(Direction::Broadcast);
        r.skill_id = SKILL_DECISION;
        r.topic = Some("/basestation/event".to_string());
        r.type_name = Some(message.type_name().to_string());
        r.payload = Some(message);
        r.fates = Some(fates.clone());
        let seq = self.log.append(r).seq;
        Ok((BroadcastReceipt { event: event.to_string(), frames, fates, log_seq: seq }, deliveries))
    }

    fn command(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        platform: Platform,
        apply: impl FnOnce(&mut Twin) -> Result<Option<Envelope>, TwinError>,
    ) -> Result<(CommandReceipt, Vec<Delivery>), ApiError> {
        let twin = self.twin_mut(platform).ok_or_else(|| ApiError::not_found(format!("no twin for {platform}")))?;
        let before = twin.status_log().len();
        let result = apply(twin);
        let local_status = twin.status_log()[before..].last().map(|(_, s)| *s);
        match result {
            Ok(Some(env)) => {
                // the command is ours; keep it out of the generic flush
                twin.take_outbound();
                let (seq, deliveries) = self
                    .route_down(now, channel, &env)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
                let frames = deliveries.len();
                let extra = self.flush(now, channel);
                let mut all = deliveries;
                all.extend(extra);
                Ok((CommandReceipt { platform, local_status, synchronized: true, frames, log_seq: Some(seq) }, all))
            }
            Ok(None) => Ok((CommandReceipt { platform, local_status, synchronized: false, frames: 0, log_seq: None }, vec![])),
            Err(TwinError::LocalBehaviorFailed(id)) => Err(ApiError {
                kind: ApiErrorKind::Rejected,
                message: format!("behavior {id} failed on the {platform} Digital Twin; not synchronized"),
            }),
            Err(e @ TwinError::UnknownEvent(_)) => Err(ApiError::bad_request(e.to_string())),
            Err(e) => Err(ApiError::bad_request(e.to_string())),
        }
    }

    /// Executes one operator request. Deliveries scheduled as a side effect
    /// are returned so the caller can track them.
    pub fn handle_api(
        &mut self,
        now: SimTime,
        channel: &mut AcousticChannel,
        request: ApiRequest,
    ) -> (ApiResponse, Vec<Delivery>) {
        let result = match request {
            ApiRequest::ListTwins => Ok((ApiResponse::Twins(self.twin_views(now)), vec![])),
            ApiRequest::SetBehavior { platform, behavior_id } => self
                .command(now, channel, platform, |t| t.guarded_sync_command(SetBehavior { behavior_id }, now))
                .map(|(r, d)| (ApiResponse::Command(r), d)),
            ApiRequest::InjectEvent { platform, event } => match validate_event(&event) {
                Err(e) => Err(e),
                Ok(()) => self
                    .command(now, channel, platform, |t| t.inject_event(&O2Event { event }, now))
                    .map(|(r, d)| (ApiResponse::Command(r), d)),
            },
            ApiRequest::Broadcast { event } => match validate_event(&event) {
                Err(e) => Err(e),
                Ok(()) => self
                    .broadcast_event(now, channel, &event)
                    .map(|(r, d)| (ApiResponse::Broadcast(r), d))
                    .map_err(|e| ApiError::bad_request(e.to_string())),
            },
            ApiRequest::O2Series { platform, from, to } => {
                if !self.registry.contains_key(&platform.id()) {
                    Err(ApiError::not_found(format!("no twin for {platform}")))
                } else {
                    let filter = ReplayFilter {
                        platform: Some(platform.id()),
                        from: from.map(SimTime::from_secs_f64),
                        to: to.map(SimTime::from_secs_f64),
                        pattern: None,
                    };
                    Ok((ApiResponse::O2Series(self.o2_series(&filter)), vec![]))
                }
            }
            ApiRequest::Trace => {
                let audit = crate::channel::audit_throughput(
                    channel.trace(),
                    Duration::from_secs(60),
                    channel.params().byte_rate,
                );
                Ok((ApiResponse::Trace(TraceReport { summary: channel.summary(), audit_60s: audit }), vec![]))
            }
            ApiRequest::Config => Ok((ApiResponse::Config(self.console_config()), vec![])),
            ApiRequest::Log { since, limit } => {
                let recs = self.log.records();
                let start = (since as usize).min(recs.len());
                let end = limit.map_or(recs.len(), |l| (start + l).min(recs.len()));
                Ok((ApiResponse::Log(recs[start..end].to_vec()), vec![]))
            }
        };
        result.unwrap_or_else(|e| (ApiResponse::Error(e), vec![]))
    }

    pub fn twin_views(&self, now: SimTime) -> Vec<TwinView> {
        self.registry
            .values()
            .map(|e| TwinView {
                platform: e.twin.platform(),
                id: e.twin.platform().id(),
                live: self.liveness(e.twin.platform(), now),
                last_heard: e.last_heard,
                measurement_period_s: e.twin.config().measurement_period.as_secs_f64(),
                behavior_id: e.twin.current_behavior().0,
                last_status: e.twin.last_remote_status(),
                last_o2: e.twin.last_remote_o2(),
                last_o2_implausible: e.last_o2_implausible,
                uplink_records: e.uplink,
            })
            .collect()
    }

    pub fn o2_series(&self, filter: &ReplayFilter) -> Vec<O2Point> {
        replay(self.log.records(), filter)
            .filter(|r| r.kind == LogKind::Uplink)
            .filter_map(|r| match &r.payload {
                Some(TwinMessage::StandardO2(s)) => {
                    Some(O2Point { t: r.t, sample: *s, implausible: r.has_flag(FLAG_IMPLAUSIBLE) })
                }
                _ => None,
            })
            .collect()
    }

    pub fn console_config(&self) -> ConsoleConfig {
        let platforms = self
            .registry
            .values()
            .map(|e| PlatformInfo {
                platform: e.twin.platform(),
                id: e.twin.platform().id(),
                slug: e.twin.platform().slug().to_string(),
                measurement_period_s: e.twin.config().measurement_period.as_secs_f64(),
            })
            .collect();
        let behaviors = match self.registry.values().next() {
            Some(e) => e
                .twin
                .behaviors()
                .ids()
                .filter_map(|id| e.twin.behaviors().get(id))
                .map(|d| BehaviorInfo { id: d.id, name: d.name.clone() })
                .collect(),
            None => Vec::new(),
        };
        ConsoleConfig {
            platforms,
            behaviors,
            events: KNOWN_EVENTS.iter().map(|e| e.to_string()).collect(),
            plausibility: self.bounds,
            chart_window_s: 3600.0,
            guard: self.registry.values().any(|e| e.twin.config().guard),
        }
    }
}

fn validate_event(event: &str) -> Result<(), ApiError> {
    if event.is_empty() {
        return Err(ApiError::bad_request("event must be non-empty"));
    }
    if !KNOWN_EVENTS.contains(&event) {
        return Err(ApiError::bad_request(format!("unknown event `{event}`; expected one of {KNOWN_EVENTS:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
