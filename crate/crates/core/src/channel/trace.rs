use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Loss,
}

/// One line of the channel trace. Times are nanoseconds of virtual time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Send {
        t: SimTime,
        tx_id: u64,
        src: u8,
        /// `None` for a broadcast.
        dst: Option<u8>,
        size: usize,
        tx_start: SimTime,
        tx_end: SimTime,
    },
    Deliver {
        t: SimTime,
        tx_id: u64,
        src: u8,
        dst: u8,
        size: usize,
        /// Seconds from hand-off to arrival.
        latency: f64,
    },
    Drop {
        t: SimTime,
        tx_id: u64,
        src: u8,
        dst: u8,
        size: usize,
        reason: DropReason,
        p: f64,
    },
    Burst {
        t: SimTime,
        src: u8,
        dst: u8,
        size: usize,
        completion: SimTime,
    },
}

impl TraceRecord {
    pub fn time(&self) -> SimTime {
        match self {
            TraceRecord::Send { t, .. }
            | TraceRecord::Deliver { t, .. }
            | TraceRecord::Drop { t, .. }
            | TraceRecord::Burst { t, .. } => *t,
        }
    }
}

pub(super) fn write_trace(records: &[TraceRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(input: impl BufRead) -> std::io::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub transmissions: u64,
    pub broadcasts: u64,
    pub bytes_sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bursts: u64,
    pub mean_latency_s: Option<f64>,
    pub max_latency_s: Option<f64>,
    /// Frames put on the air per endpoint.
    pub sent_by_endpoint: BTreeMap<u8, u64>,
    pub delivered_to_endpoint: BTreeMap<u8, u64>,
}

impl TraceSummary {
    pub fn from_records(records: &[TraceRecord]) -> Self {
        let mut s = TraceSummary::default();
        let mut latency_sum = 0.0;
        for r in records {
            match r {
                TraceRecord::Send { src, dst, size, .. } => {
                    s.transmissions += 1;
                    s.broadcasts += dst.is_none() as u64;
                    s.bytes_sent += *size as u64;
                    *s.sent_by_endpoint.entry(*src).or_default() += 1;
                }
                TraceRecord::Deliver { dst, latency, .. } => {
                    s.delivered += 1;
                    latency_sum += latency;
                    s.max_latency_s = Some(s.max_latency_s.map_or(*latency, |m: f64| m.max(*latency)));
                    *s.delivered_to_endpoint.entry(*dst).or_default() += 1;
                }
                TraceRecord::Drop { .. } => s.dropped += 1,
                TraceRecord::Burst { .. } => s.bursts += 1,
            }
        }
        if s.delivered > 0 {
            s.mean_latency_s = Some(latency_sum / s.delivered as f64);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputAudit {
    pub window_s: f64,
    /// Largest byte count any sender put on the air within one window.
    pub max_bytes: u64,
    pub worst_sender: Option<u8>,
    pub bound: f64,
}

impl ThroughputAudit {
    pub fn within_bound(&self) -> bool {
        self.max_bytes as f64 <= self.bound
    }
}

/// Sliding-window audit of instant-message transmissions: for each sender,
/// the most bytes whose transmission starts within any window of length
/// `window`, compared against `byte_rate * window + 64`.
pub fn audit_throughput(records: &[TraceRecord], window: Duration, byte_rate: f64) -> ThroughputAudit {
    let mut by_sender: BTreeMap<u8, Vec<(SimTime, u64)>> = BTreeMap::new();
    for r in records {
        if let TraceRecord::Send { src, size, tx_start, .. } = r {
            by_sender.entry(*src).or_default().push((*tx_start, *size as u64));
        }
    }
    let mut max_bytes = 0;
    let mut worst_sender = None;
    for (src, mut sends) in by_sender {
        sends.sort();
        // two pointers over windows starting at each transmission
        let mut hi = 0;
        let mut sum = 0u64;
        for lo in 0..sends.len() {
            let end = sends[lo].0 + window;
            while hi < sends.len() && sends[hi].0 <= end {
                sum += sends[hi].1;
                hi += 1;
            }
            if sum > max_bytes {
                max_bytes = sum;
                worst_sender = Some(src);
            }
            sum -= sends[lo].1;
        }
    }
    ThroughputAudit {
        window_s: window.as_secs_f64(),
        max_bytes,
        worst_sender,
        bound: byte_rate * window.as_secs_f64() + 64.0,
    }
}
