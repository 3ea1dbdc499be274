//! The assembled mission: Physical Twins with their modems, the acoustic
//! channel, and the basestation with its Digital Twins, driven by one event
//! loop.

use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::basestation::{ApiRequest, ApiResponse, Basestation};
use crate::bus::Bus;
use crate::channel::{AcousticChannel, ChannelError, Delivery, LossModel, Modem, SHIP};
use crate::codec::{decode, encode, Direction, SchemaRegistry, TwinMessage};
use crate::time::{SimTime, TimeSource, VirtualClock, WallClock};
use crate::twin::{Platform, Twin, TwinError, Via};

use super::config::{ConfigError, MissionConfig};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Scripted stimulus.
#[derive(Clone, Debug)]
pub enum ScriptAction {
    /// An operator request, exactly as the HTTP front end would issue it.
    Api(ApiRequest),
    SetLoss(LossModel),
    Disturb { a: u8, b: u8, factor: f64 },
    /// Hands raw bytes to a Physical Twin's modem as if received from `src`.
    InjectFrame { platform: Platform, src: u8, bytes: Vec<u8> },
    /// Puts raw bytes on the channel.
    Transmit { src: u8, dst: u8, bytes: Vec<u8> },
}

#[derive(Clone, Debug, Serialize)]
pub struct ApiExchange {
    pub t: SimTime,
    pub request: ApiRequest,
    pub response: ApiResponse,
}

/// One envelope a Physical Twin received, and what it did with it.
#[derive(Clone, Debug, Serialize)]
pub struct Reception {
    pub t: SimTime,
    pub platform: Platform,
    pub src: u8,
    pub direction: Option<Direction>,
    pub type_name: Option<&'static str>,
    pub accepted: bool,
    pub detail: String,
}

/// A broadcast a Physical Twin put on the air.
#[derive(Clone, Debug, Serialize)]
pub struct PtBroadcast {
    pub t: SimTime,
    pub platform: Platform,
    pub tx_start: SimTime,
    pub message: TwinMessage,
}

/// A request from a concurrent front end, answered through `reply`.
pub struct ApiCall {
    pub request: ApiRequest,
    pub reply: Box<dyn FnOnce(ApiResponse) + Send>,
}

struct PtNode {
    twin: Twin,
    modem: Modem,
}

enum Next {
    Arrival,
    Wake(u8),
    Script,
}

pub struct Mission {
    config: MissionConfig,
    script: VirtualClock<ScriptAction>,
    channel: AcousticChannel,
    pts: BTreeMap<u8, PtNode>,
    basestation: Basestation,
    schemas: SchemaRegistry,
    now: SimTime,
    end: SimTime,
    api: Vec<ApiExchange>,
    receptions: Vec<Reception>,
    pt_broadcasts: Vec<PtBroadcast>,
    /// Envelopes each Physical Twin sent, by (platform id, type id).
    sent: BTreeMap<(u8, u8), u64>,
}

impl Mission {
    pub fn new(config: MissionConfig) -> Result<Self, MissionError> {
        config.validate()?;
        let mut channel = AcousticChannel::new(config.channel_params())?;
        channel.add_endpoint(SHIP, config.ship)?;
        let end = SimTime::ZERO + config.duration();
        let mut basestation = Basestation::new(config.plausibility);
        let mut pts = BTreeMap::new();
        for spec in &config.platforms {
            let pt_cfg = config.twin_config(spec)?;
            let dt = Twin::start(pt_cfg.digital(), Bus::new(), SimTime::ZERO)?;
            basestation.register(dt)?;
            let mut pt = Twin::start(pt_cfg, Bus::new(), SimTime::ZERO + spec.start_offset())?;
            pt.halt_measurements_at(end);
            let id = spec.name.id();
            channel.add_endpoint(id, spec.position())?;
            pts.insert(id, PtNode { twin: pt, modem: Modem::new(id) });
        }
        Ok(Mission {
            config,
            script: VirtualClock::new(),
            channel,
            pts,
            basestation,
            schemas: SchemaRegistry::standard(),
            now: SimTime::ZERO,
            end,
            api: Vec::new(),
            receptions: Vec::new(),
            pt_broadcasts: Vec::new(),
            sent: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn channel(&self) -> &AcousticChannel {
        &self.channel
    }

    pub fn basestation(&self) -> &Basestation {
        &self.basestation
    }

    pub fn basestation_mut(&mut self) -> &mut Basestation {
        &mut self.basestation
    }

    pub fn physical(&self, p: Platform) -> Option<&Twin> {
        self.pts.get(&p.id()).map(|n| &n.twin)
    }

    pub fn physical_twins(&self) -> impl Iterator<Item = &Twin> {
        self.pts.values().map(|n| &n.twin)
    }

    pub fn digital(&self, p: Platform) -> Option<&Twin> {
        self.basestation.twin(p)
    }

    pub fn api_exchanges(&self) -> &[ApiExchange] {
        &self.api
    }

    pub fn receptions(&self) -> &[Reception] {
        &self.receptions
    }

    pub fn pt_broadcasts(&self) -> &[PtBroadcast] {
        &self.pt_broadcasts
    }

    pub fn envelopes_sent(&self, platform: Platform, type_id: u8) -> u64 {
        self.sent.get(&(platform.id(), type_id)).copied().unwrap_or(0)
    }

    pub fn schedule(&mut self, at: SimTime, action: ScriptAction) {
        self.script.schedule(at, action);
    }

    pub fn schedule_api(&mut self, at: SimTime, request: ApiRequest) {
        self.schedule(at, ScriptAction::Api(request));
    }

    /// Executes an operator request now.
    pub fn api(&mut self, request: ApiRequest) -> ApiResponse {
        let (response, _) = self.basestation.handle_api(self.now, &mut self.channel, request.clone());
        self.api.push(ApiExchange { t: self.now, request, response: response.clone() });
        response
    }

    fn next_event(&self) -> Option<(SimTime, Next)> {
        let mut best: Option<(SimTime, Next)> = self.channel.next_arrival().map(|t| (t, Next::Arrival));
        for (id, node) in &self.pts {
            if let Some(t) = node.twin.next_wakeup() {
                if best.as_ref().is_none_or(|(b, _)| t < *b) {
                    best = Some((t, Next::Wake(*id)));
                }
            }
        }
        if let Some(t) = self.script.peek_time() {
            if best.as_ref().is_none_or(|(b, _)| t < *b) {
                best = Some((t, Next::Script));
            }
        }
        best
    }

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.next_event().map(|(t, _)| t)
    }

    /// Processes one event if any is due at or before `until`.
    pub fn step(&mut self, until: SimTime) -> bool {
        let Some((t, next)) = self.next_event().filter(|(t, _)| *t <= until) else {
            return false;
        };
        self.now = self.now.max(t);
        match next {
            Next::Arrival => {
                for d in self.channel.poll(t) {
                    self.handle_arrival(&d);
                }
            }
            Next::Wake(id) => {
                let node = self.pts.get_mut(&id).expect("known platform");
                node.twin.on_tick(t);
                self.flush_pt(id);
            }
            Next::Script => {
                if let Some((_, action)) = self.script.pop_until(t) {
                    self.perform(action);
                }
            }
        }
        true
    }

    /// Processes every event due at or before `until`.
    pub fn run_until(&mut self, until: SimTime) {
        while self.step(until) {}
        self.now = self.now.max(until);
    }

    /// Runs to the configured duration, then lets in-flight traffic land.
    /// Measurements stop at the duration.
    pub fn run(&mut self) {
        while self.step(SimTime::from_nanos(u64::MAX)) {}
    }

    /// Like [`run`](Self::run), paced by `source`.
    pub fn run_paced(&mut self, source: &mut impl TimeSource) {
        while let Some(t) = self.next_event_time() {
            source.wait_until(t);
            self.step(t);
        }
    }

    /// Real-time loop: one virtual second per wall second, serving `inbox`
    /// between events. Returns when `stop_at` is reached or the inbox closes
    /// and no events remain.
    pub fn run_realtime(&mut self, inbox: Receiver<ApiCall>, stop_at: Option<SimTime>) {
        let clock = WallClock::start_now();
        let offset = self.now;
        let poll = Duration::from_millis(50);
        let mut inbox_open = true;
        loop {
            let wall = offset + Duration::from_nanos(clock.elapsed().as_nanos());
            if stop_at.is_some_and(|s| wall >= s) {
                self.run_until(stop_at.expect("checked"));
                return;
            }
            let due = self.next_event_time();
            if due.is_some_and(|t| t <= wall) {
                self.step(wall);
                continue;
            }
            if !inbox_open && due.is_none() {
                return;
            }
            let wait = due.map_or(poll, |t| t.saturating_sub(wall).min(poll));
            if !inbox_open {
                std::thread::sleep(wait);
                continue;
            }
            match inbox.recv_timeout(wait) {
                Ok(call) => {
                    let wall = offset + Duration::from_nanos(clock.elapsed().as_nanos());
                    self.run_until(wall);
                    let response = self.api(call.request);
                    (call.reply)(response);
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => inbox_open = false,
            }
        }
    }

    fn perform(&mut self, action: ScriptAction) {
        match action {
            ScriptAction::Api(req) => {
                self.api(req);
            }
            ScriptAction::SetLoss(loss) => {
                if let Err(e) = self.channel.set_loss(loss) {
                    log::warn!("loss change ignored: {e}");
                }
            }
            ScriptAction::Disturb { a, b, factor } => self.channel.set_disturbance(a, b, factor),
            ScriptAction::InjectFrame { platform, src, bytes } => self.receive_at_pt(platform.id(), src, &bytes),
            ScriptAction::Transmit { src, dst, bytes } => {
                if let Err(e) = self.channel.send_im(self.now, src, dst, &bytes) {
                    log::warn!("scripted transmission refused: {e}");
                }
            }
        }
    }

    fn handle_arrival(&mut self, d: &Delivery) {
        if d.dst == SHIP {
            if let Err(e) = self.basestation.route_up(d.arrival, &mut self.channel, d) {
                log::debug!("ship dropped frame from {}: {e}", d.src);
            }
        } else {
            self.receive_at_pt(d.dst, d.src, &d.bytes);
        }
    }

    fn receive_at_pt(&mut self, id: u8, src: u8, bytes: &[u8]) {
        let now = self.now;
        let Some(node) = self.pts.get_mut(&id) else { return };
        let platform = node.twin.platform();
        let mut rec = Reception {
            t: now,
            platform,
            src,
            direction: None,
            type_name: None,
            accepted: false,
            detail: String::new(),
        };
        let encoded = match node.modem.receive(now, src, bytes) {
            Ok(Some(e)) => e,
            Ok(None) => return,
            Err(e) => {
                rec.detail = e.to_string();
                self.receptions.push(rec);
                return;
            }
        };
        match decode(&encoded, &self.schemas) {
            Err(e) => rec.detail = e.to_string(),
            Ok(env) => {
                rec.direction = Some(env.direction);
                rec.type_name = self.schemas.get(env.type_id).map(|_| type_name(env.type_id));
                let via = if src == SHIP { Via::Basestation } else { Via::Peer(src) };
                match node.twin.sync_in_command(&env, via, now) {
                    Ok(acc) => {
                        rec.accepted = true;
                        rec.detail = format!("{acc:?}");
                    }
                    Err(e) => rec.detail = e.to_string(),
                }
            }
        }
        self.receptions.push(rec);
        self.flush_pt(id);
    }

    fn flush_pt(&mut self, id: u8) {
        let now = self.now;
        let node = self.pts.get_mut(&id).expect("known platform");
        let platform = node.twin.platform();
        for out in node.twin.take_outbound() {
            let env = out.envelope;
            *self.sent.entry((id, env.type_id)).or_default() += 1;
            let frames = match encode(&env, &self.schemas).and_then(|b| node.modem.frames_for(&b)) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("{platform}: cannot send envelope: {e}");
                    continue;
                }
            };
            let mut first_start = None;
            for f in frames {
                let res = if out_is_broadcast(&env) {
                    self.channel.broadcast_im(now, id, &f).map(|v| v.first().map(|d| d.tx_start))
                } else {
                    self.channel.send_im(now, id, SHIP, &f).map(|d| Some(d.tx_start))
                };
                match res {
                    Ok(start) => first_start = first_start.or(start),
                    Err(e) => log::warn!("{platform}: frame refused: {e}"),
                }
            }
            if out_is_broadcast(&env) {
                if let (Some(tx_start), Ok(message)) =
                    (first_start, TwinMessage::from_values(env.type_id, &env.payload))
                {
                    self.pt_broadcasts.push(PtBroadcast { t: now, platform, tx_start, message });
                }
            }
        }
    }
}

fn out_is_broadcast(env: &crate::codec::Envelope) -> bool {
    env.direction == Direction::Broadcast
}

fn type_name(type_id: u8) -> &'static str {
    use crate::codec::{O2_EVENT, SET_BEHAVIOR, STANDARD_O2, STANDARD_STATUS};
    match type_id {
        STANDARD_O2 => "StandardO2",
        STANDARD_STATUS => "StandardStatus",
        SET_BEHAVIOR => "SetBehavior",
        O2_EVENT => "O2Event",
        _ => "unknown",
    }
}
