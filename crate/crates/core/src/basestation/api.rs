//! Operator-facing request and response types. The HTTP front end maps its
//! routes onto these one to one.

use serde::{Deserialize, Serialize};

use crate::channel::{ThroughputAudit, TraceSummary};
use crate::codec::{StandardO2, StandardStatus};
use crate::time::SimTime;
use crate::twin::{Platform, PlausibilityBounds};

use super::log::{Fate, LogRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ApiRequest {
    ListTwins,
    SetBehavior { platform: Platform, behavior_id: u8 },
    /// Publishes an event at a Digital Twin's decision node.
    InjectEvent { platform: Platform, event: String },
    Broadcast { event: String },
    /// Time window in virtual seconds, `to` exclusive.
    O2Series {
        platform: Platform,
        #[serde(default)]
        from: Option<f64>,
        #[serde(default)]
        to: Option<f64>,
    },
    Trace,
    Config,
    /// Records with `seq >= since`.
    Log {
        #[serde(default)]
        since: u64,
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiErrorKind {
    BadRequest,
    NotFound,
    /// The Digital Twin's guard refused the command.
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ApiErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError { kind: ApiErrorKind::BadRequest, message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError { kind: ApiErrorKind::NotFound, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwinView {
    pub platform: Platform,
    pub id: u8,
    /// `None` until the platform has been heard from.
    pub live: Option<bool>,
    pub last_heard: Option<SimTime>,
    pub measurement_period_s: f64,
    /// Behavior held by the Digital Twin.
    pub behavior_id: u8,
    /// Last status reported by the Physical Twin.
    pub last_status: Option<StandardStatus>,
    pub last_o2: Option<StandardO2>,
    pub last_o2_implausible: bool,
    pub uplink_records: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandReceipt {
    pub platform: Platform,
    /// Outcome of applying the command on the Digital Twin.
    pub local_status: Option<StandardStatus>,
    pub synchronized: bool,
    pub frames: usize,
    pub log_seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadcastReceipt {
    pub event: String,
    pub frames: usize,
    pub fates: std::collections::BTreeMap<u8, Fate>,
    pub log_seq: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct O2Point {
    pub t: SimTime,
    pub sample: StandardO2,
    pub implausible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub summary: TraceSummary,
    pub audit_60s: ThroughputAudit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatformInfo {
    pub platform: Platform,
    pub id: u8,
    pub slug: String,
    pub measurement_period_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorInfo {
    pub id: u8,
    pub name: String,
}

/// Bootstrap data for an operator console.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsoleConfig {
    pub platforms: Vec<PlatformInfo>,
    pub behaviors: Vec<BehaviorInfo>,
    pub events: Vec<String>,
    pub plausibility: PlausibilityBounds,
    pub chart_window_s: f64,
    pub guard: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum ApiResponse {
    Twins(Vec<TwinView>),
    Command(CommandReceipt),
    Broadcast(BroadcastReceipt),
    O2Series(Vec<O2Point>),
    Trace(TraceReport),
    Config(ConsoleConfig),
    Log(Vec<LogRecord>),
    Error(ApiError),
}

impl ApiResponse {
    pub fn is_error(&self) -> bool {
        matches!(self, ApiResponse::Error(_))
    }
}
