//! Mission message log: append-only JSON-lines records plus replay.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::mpsc::{self, Receiver, Sender};

use serde::{Deserialize, Serialize};

use crate::bus::{TopicPath, TopicPattern};
use crate::codec::{Direction, TwinMessage};
use crate::time::SimTime;
use crate::twin::{Twin, TwinError};

pub const FLAG_IMPLAUSIBLE: &str = "IMPLAUSIBLE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    /// Physical Twin data routed to its Digital Twin.
    Uplink,
    /// Digital Twin command sent down to its Physical Twin.
    Downlink,
    /// Event broadcast from the ship.
    Broadcast,
    /// A platform's broadcast heard by the ship modem.
    Overheard,
    /// Received but not routable.
    Dropped,
}

/// Per-receiver outcome of a ship broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fate {
    pub delivered: bool,
    /// Arrival of the last fragment if every fragment got through.
    pub arrival: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    /// Virtual nanoseconds since mission start.
    pub t: SimTime,
    pub kind: LogKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub platform_id: u8,
    #[serde(default)]
    pub skill_id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_index: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<TwinMessage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    /// When the carrying frame was handed to the sender's modem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_at: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fates: Option<BTreeMap<u8, Fate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LogRecord {
    pub fn new(t: SimTime, kind: LogKind, platform_id: u8) -> Self {
        LogRecord {
            seq: 0,
            t,
            kind,
            direction: None,
            platform_id,
            skill_id: 0,
            topic_index: None,
            topic: None,
            type_name: None,
            payload: None,
            flags: Vec::new(),
            sent_at: None,
            fates: None,
            error: None,
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Append-only record store with live subscribers.
#[derive(Default)]
pub struct MissionLog {
    records: Vec<LogRecord>,
    subscribers: Vec<Sender<LogRecord>>,
}

impl MissionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends, assigning the sequence number. Times must not go backwards;
    /// an earlier time is raised to the last record's time.
    pub fn append(&mut self, mut record: LogRecord) -> &LogRecord {
        record.seq = self.records.len() as u64;
        if let Some(last) = self.records.last() {
            record.t = record.t.max(last.t);
        }
        self.subscribers.retain(|tx| tx.send(record.clone()).is_ok());
        self.records.push(record);
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Live feed of every record appended from now on.
    pub fn subscribe(&mut self) -> Receiver<LogRecord> {
        let (tx, rx) = mpsc::channel();
        self.subscribers.push(tx);
        rx
    }

    pub fn write_jsonl(&self, out: impl Write) -> std::io::Result<()> {
        write_jsonl(&self.records, out)
    }
}

pub fn write_jsonl(records: &[LogRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Records read back from a log file. Lines that fail to parse are skipped
/// and counted.
#[derive(Debug, Default)]
pub struct LoadedLog {
    pub records: Vec<LogRecord>,
    pub corrupt: usize,
}

pub fn read_jsonl(input: impl BufRead) -> std::io::Result<LoadedLog> {
    let mut out = LoadedLog::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.records.push(r),
            Err(_) => out.corrupt += 1,
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct ReplayFilter {
    pub pattern: Option<TopicPattern>,
    pub platform: Option<u8>,
    pub from: Option<SimTime>,
    /// Exclusive.
    pub to: Option<SimTime>,
}

impl ReplayFilter {
    pub fn accepts(&self, r: &LogRecord) -> bool {
        if self.platform.is_some_and(|p| p != r.platform_id) {
            return false;
        }
        if self.from.is_some_and(|f| r.t < f) || self.to.is_some_and(|t| r.t >= t) {
            return false;
        }
        match &self.pattern {
            None => true,
            Some(p) => r
                .topic
                .as_deref()
                .and_then(|t| TopicPath::parse(t).ok())
                .is_some_and(|t| p.matches(&t)),
        }
    }
}

pub fn replay<'a>(records: &'a [LogRecord], filter: &'a ReplayFilter) -> impl Iterator<Item = &'a LogRecord> + 'a {
    records.iter().filter(move |r| filter.accepts(r))
}

/// Feeds every uplink record into fresh Digital Twins (keyed by platform
/// id), reproducing what they saw live. Returns the number of records
/// delivered; records for platforms without a twin are skipped.
pub fn replay_into(records: &[LogRecord], twins: &mut BTreeMap<u8, Twin>) -> Result<usize, TwinError> {
    let mut n = 0;
    for r in records.iter().filter(|r| r.kind == LogKind::Uplink) {
        let (Some(twin), Some(index), Some(msg)) = (twins.get_mut(&r.platform_id), r.topic_index, &r.payload) else {
            continue;
        };
        twin.deliver_remote(index, msg.clone(), r.t)?;
        n += 1;
    }
    Ok(n)
}
