use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::behavior::BehaviorDef;
use super::events::O2Thresholds;
use super::shadow::{ShadowRecording, SimulatedO2Params};
use super::{Platform, TwinError};
use crate::bus::TopicPattern;

pub const MIN_MEASUREMENT_PERIOD: Duration = Duration::from_secs(5);
pub const MAX_MEASUREMENT_PERIOD: Duration = Duration::from_secs(300);

/// Where a sensor's readings come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareMode {
    /// Stands in for the real device; in this simulation a modeled signal.
    #[default]
    RealSimulated,
    /// Plays back a recorded digital shadow.
    EmulatedShadow,
}

/// Everything that distinguishes one twin instance from another.
///
/// Physical and Digital Twins of a platform share a config except for
/// `is_digital`.
#[derive(Clone, Debug)]
pub struct TwinConfig {
    pub platform: Platform,
    pub is_digital: bool,
    /// Per-sensor hardware mode; the oxygen optode is `"o2"`.
    pub hardware: BTreeMap<String, HardwareMode>,
    pub sync_topics: Vec<TopicPattern>,
    pub measurement_period: Duration,
    /// Periodic status heartbeat. `None` reports only on behavior changes.
    pub status_period: Option<Duration>,
    pub thresholds: O2Thresholds,
    /// Digital Twin only: apply commands locally before synchronizing them.
    pub guard: bool,
    /// Digital Twin only: run event detection on incoming samples.
    pub auto_events: bool,
    pub epoch_ms: i64,
    pub shadow: Option<ShadowRecording>,
    pub simulated: SimulatedO2Params,
    pub seed: u64,
    pub effects: BTreeMap<u8, Vec<String>>,
    pub extra_behaviors: Vec<BehaviorDef>,
}

impl TwinConfig {
    pub fn new(platform: Platform) -> Self {
        TwinConfig {
            platform,
            is_digital: false,
            hardware: BTreeMap::from([("o2".to_string(), HardwareMode::RealSimulated)]),
            sync_topics: vec![TopicPattern::parse(&format!("/{}/skills/**", platform.slug())).expect("valid")],
            measurement_period: Duration::from_secs(60),
            status_period: None,
            thresholds: O2Thresholds::default(),
            guard: false,
            auto_events: false,
            epoch_ms: 0,
            shadow: None,
            simulated: SimulatedO2Params::default(),
            seed: platform.id() as u64,
            effects: BTreeMap::new(),
            extra_behaviors: Vec::new(),
        }
    }

    /// The same config with the environment flag set.
    pub fn digital(&self) -> Self {
        TwinConfig { is_digital: true, ..self.clone() }
    }

    pub fn o2_mode(&self) -> HardwareMode {
        self.hardware.get("o2").copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), TwinError> {
        let p = self.measurement_period;
        if p < MIN_MEASUREMENT_PERIOD || p > MAX_MEASUREMENT_PERIOD {
            return Err(TwinError::InvalidPeriod(p));
        }
        if self.status_period.is_some_and(|s| s.is_zero()) {
            return Err(TwinError::InvalidPeriod(Duration::ZERO));
        }
        if !self.thresholds.is_valid() {
            return Err(TwinError::InvalidThresholds(self.thresholds));
        }
        if self.o2_mode() == HardwareMode::EmulatedShadow && self.shadow.is_none() {
            return Err(TwinError::MissingShadow(self.platform));
        }
        Ok(())
    }
}
