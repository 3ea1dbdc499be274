//! Discrete-event model of the hydroacoustic instant-message network.
//!
//! Every endpoint has a position and its own transmit queue. A frame handed
//! to [`AcousticChannel::send_im`] waits for the queue, is serialized at
//! `byte_rate`, then travels the straight-line distance at `sound_speed`:
//!
//! ```text
//! tx_start = max(now, tx_free[src])
//! tx_end   = tx_start + |frame| / byte_rate
//! arrival  = tx_end + distance(src, dst) / sound_speed
//! ```
//!
//! Each (transmission, receiver) pair draws one seeded Bernoulli loss trial
//! with `p(d) = min(1, (p0 + alpha * d) * disturbance)`. Pending arrivals are
//! released in time order by [`AcousticChannel::poll`]. Every send, delivery
//! and drop is appended to a JSON-lines trace.

mod modem;
mod trace;

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::MAX_FRAME_LEN;
use crate::time::{SimTime, VirtualClock};

pub use modem::{Modem, REASSEMBLY_TIMEOUT};
pub use trace::{audit_throughput, read_trace, DropReason, ThroughputAudit, TraceRecord, TraceSummary};

/// Endpoint id of the ship's modem. Platforms use their platform id.
pub const SHIP: u8 = 0;

/// Burst-mode rate: 6.9 kbit/s.
pub const BURST_BYTE_RATE: f64 = 6900.0 / 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(u8),
    #[error("frame of {0} bytes exceeds the 64-byte instant message")]
    OversizedFrame(usize),
    #[error("endpoint {0} cannot send to itself")]
    SelfAddressed(u8),
    #[error("burst mode is point-to-point only")]
    BroadcastUnsupported,
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("invalid position for endpoint {0}: depth must be >= 0 and finite")]
    InvalidPosition(u8),
}

/// Local tangent-plane coordinates in meters; depth is positive down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, depth: f64) -> Self {
        Position { x, y, depth }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.depth.is_finite() && self.depth >= 0.0
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.depth - other.depth);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Linear distance loss. The defaults are uncalibrated placeholders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub p0: f64,
    /// Per meter.
    pub alpha: f64,
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel { p0: 0.05, alpha: 5e-5 }
    }
}

impl LossModel {
    pub const NONE: LossModel = LossModel { p0: 0.0, alpha: 0.0 };

    pub fn probability(&self, distance: f64, disturbance: f64) -> f64 {
        ((self.p0 + self.alpha * distance) * disturbance).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub sound_speed: f64,
    pub byte_rate: f64,
    pub loss: LossModel,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams { sound_speed: 1500.0, byte_rate: 64.0, loss: LossModel::default(), seed: 0 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidParams(m.into()));
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return bad("sound_speed must be > 0");
        }
        if !(self.byte_rate.is_finite() && self.byte_rate > 0.0) {
            return bad("byte_rate must be > 0");
        }
        if !(self.loss.p0 >= 0.0 && self.loss.p0 <= 1.0 && self.loss.alpha >= 0.0 && self.loss.alpha.is_finite()) {
            return bad("loss needs 0 <= p0 <= 1 and alpha >= 0");
        }
        Ok(())
    }
}

/// One receiver's copy of a transmission.
#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub tx_id: u64,
    pub src: u8,
    pub dst: u8,
    /// When the frame was handed to the modem.
    pub queued_at: SimTime,
    pub tx_start: SimTime,
    pub arrival: SimTime,
    pub bytes: Vec<u8>,
    pub dropped: Option<DropReason>,
}

impl Delivery {
    pub fn latency(&self) -> Duration {
        self.arrival.saturating_sub(self.queued_at)
    }

    pub fn delivered(&self) -> bool {
        self.dropped.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BurstTransfer {
    pub start: SimTime,
    pub transfer: Duration,
    pub propagation: Duration,
    pub completion: SimTime,
}

pub struct AcousticChannel {
    params: ChannelParams,
    positions: BTreeMap<u8, Position>,
    tx_free: BTreeMap<u8, SimTime>,
    disturbance: BTreeMap<(u8, u8), f64>,
    rng: ChaCha8Rng,
    pending: VirtualClock<Delivery>,
    next_tx: u64,
    trace: Vec<TraceRecord>,
}

impl AcousticChannel {
    pub fn new(params: ChannelParams) -> Result<Self, ChannelError> {
        params.validate()?;
        Ok(AcousticChannel {
            params,
            positions: BTreeMap::new(),
            tx_free: BTreeMap::new(),
            disturbance: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            pending: VirtualClock::new(),
            next_tx: 0,
            trace: Vec::new(),
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    /// Replaces the loss model; later transmissions use it.
    pub fn set_loss(&mut self, loss: LossModel) -> Result<(), ChannelError> {
        let next = ChannelParams { loss, ..self.params };
        next.validate()?;
        self.params = next;
        Ok(())
    }

    pub fn add_endpoint(&mut self, id: u8, position: Position) -> Result<(), ChannelError> {
        if !position.is_valid() {
            return Err(ChannelError::InvalidPosition(id));
        }
        self.positions.insert(id, position);
        Ok(())
    }

    pub fn endpoints(&self) -> impl Iterator<Item = u8> + '_ {
        self.positions.keys().copied()
    }

    pub fn position(&self, id: u8) -> Option<Position> {
        self.positions.get(&id).copied()
    }

    /// Multiplies the loss probability on the link between `a` and `b`
    /// (both directions). A factor of 1 removes the disturbance.
    pub fn set_disturbance(&mut self, a: u8, b: u8, factor: f64) {
        let key = (a.min(b), a.max(b));
        if factor == 1.0 {
            self.disturbance.remove(&key);
        } else {
            self.disturbance.insert(key, factor.max(0.0));
        }
    }

    pub fn distance(&self, a: u8, b: u8) -> Result<f64, ChannelError> {
        let pa = self.positions.get(&a).ok_or(ChannelError::UnknownEndpoint(a))?;
        let pb = self.positions.get(&b).ok_or(ChannelError::UnknownEndpoint(b))?;
        Ok(pa.distance(pb))
    }

    pub fn propagation_delay(&self, a: u8, b: u8) -> Result<Duration, ChannelError> {
        Ok(Duration::from_secs_f64(self.distance(a, b)? / self.params.sound_speed))
    }

    pub fn serialization_time(&self, len: usize) -> Duration {
        Duration::from_secs_f64(len as f64 / self.params.byte_rate)
    }

    pub fn loss_probability(&self, a: u8, b: u8) -> Result<f64, ChannelError> {
        let d = self.distance(a, b)?;
        let f = self.disturbance.get(&(a.min(b), a.max(b))).copied().unwrap_or(1.0);
        Ok(self.params.loss.probability(d, f))
    }

    /// When `src`'s transmit queue drains.
    pub fn tx_free_at(&self, src: u8) -> SimTime {
        self.tx_free.get(&src).copied().unwrap_or(SimTime::ZERO)
    }

    fn check(&self, src: u8, frame: &[u8]) -> Result<(), ChannelError> {
        if !self.positions.contains_key(&src) {
            return Err(ChannelError::UnknownEndpoint(src));
        }
        if frame.len() > MAX_FRAME_LEN {
            return Err(ChannelError::OversizedFrame(frame.len()));
        }
        Ok(())
    }

    fn transmit(&mut self, now: SimTime, src: u8, dst: Option<u8>, frame: &[u8]) -> (u64, SimTime, SimTime) {
        let tx_id = self.next_tx;
        self.next_tx += 1;
        let tx_start = now.max(self.tx_free_at(src));
        let tx_end = tx_start + self.serialization_time(frame.len());
        self.tx_free.insert(src, tx_end);
        self.trace.push(TraceRecord::Send {
            t: now,
            tx_id,
            src,
            dst,
            size: frame.len(),
            tx_start,
            tx_end,
        });
        (tx_id, tx_start, tx_end)
    }

    fn schedule(&mut self, now: SimTime, tx: (u64, SimTime, SimTime), src: u8, dst: u8, frame: &[u8]) -> Delivery {
        let (tx_id, tx_start, tx_end) = tx;
        let p = self.loss_probability(src, dst).expect("checked endpoints");
        let draw: f64 = self.rng.random();
        let arrival = tx_end + self.propagation_delay(src, dst).expect("checked endpoints");
        let dropped = (draw < p).then_some(DropReason::Loss);
        let delivery = Delivery {
            tx_id,
            src,
            dst,
            queued_at: now,
            tx_start,
            arrival,
            bytes: frame.to_vec(),
            dropped,
        };
        match dropped {
            Some(reason) => self.trace.push(TraceRecord::Drop {
                t: now,
                tx_id,
                src,
                dst,
                size: frame.len(),
                reason,
                p,
            }),
            None => self.pending.schedule(arrival, delivery.clone()),
        }
        delivery
    }

    /// Point-to-point instant message. Dropped frames are traced and never
    /// retried.
    pub fn send_im(&mut self, now: SimTime, src: u8, dst: u8, frame: &[u8]) -> Result<Delivery, ChannelError> {
        self.check(src, frame)?;
        if !self.positions.contains_key(&dst) {
            return Err(ChannelError::UnknownEndpoint(dst));
        }
        if src == dst {
            return Err(ChannelError::SelfAddressed(src));
        }
        let tx = self.transmit(now, src, Some(dst), frame);
        Ok(self.schedule(now, tx, src, dst, frame))
    }

    /// One transmission heard by every other endpoint, each with its own
    /// delay and loss draw (receivers in ascending id order).
    pub fn broadcast_im(&mut self, now: SimTime, src: u8, frame: &[u8]) -> Result<Vec<Delivery>, ChannelError> {
        self.check(src, frame)?;
        let tx = self.transmit(now, src, None, frame);
        let receivers: Vec<u8> = self.positions.keys().copied().filter(|&e| e != src).collect();
        Ok(receivers.into_iter().map(|dst| self.schedule(now, tx, src, dst, frame)).collect())
    }

    /// Bulk point-to-point transfer in burst mode, used for comparisons only.
    /// It does not occupy the instant-message queue.
    pub fn burst_transfer(&mut self, now: SimTime, src: u8, dst: Option<u8>, len: usize) -> Result<BurstTransfer, ChannelError> {
        let dst = dst.ok_or(ChannelError::BroadcastUnsupported)?;
        if src == dst {
            return Err(ChannelError::SelfAddressed(src));
        }
        let propagation = self.propagation_delay(src, dst)?;
        let transfer = Duration::from_secs_f64(len as f64 / BURST_BYTE_RATE);
        let completion = now + transfer + propagation;
        self.trace.push(TraceRecord::Burst { t: now, src, dst, size: len, completion });
        Ok(BurstTransfer { start: now, transfer, propagation, completion })
    }

    /// Arrival time of the next pending delivery.
    pub fn next_arrival(&self) -> Option<SimTime> {
        self.pending.peek_time()
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    /// Releases every delivery arriving at or before `until`, in arrival
    /// order (ties in send order).
    pub fn poll(&mut self, until: SimTime) -> Vec<Delivery> {
        let out: Vec<Delivery> = self.pending.step(until).into_iter().map(|(_, d)| d).collect();
        for d in &out {
            self.trace.push(TraceRecord::Deliver {
                t: d.arrival,
                tx_id: d.tx_id,
                src: d.src,
                dst: d.dst,
                size: d.bytes.len(),
                latency: d.latency().as_secs_f64(),
            });
        }
        out
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary::from_records(&self.trace)
    }

    pub fn write_trace(&self, out: impl std::io::Write) -> std::io::Result<()> {
        trace::write_trace(&self.trace, out)
    }
}
