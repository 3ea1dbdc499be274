//! Mission configuration, read from TOML.
//!
//! ```toml
//! name = "example"
//! seed = 7
//! duration_s = 3600
//! mode = "virtual"          # or "realtime"
//! guard = false
//!
//! [channel]                 # every key optional
//! sound_speed = 1500.0
//! byte_rate = 64.0
//! p0 = 0.05
//! alpha = 5e-5
//!
//! [ship]
//! x = 0.0
//! y = 0.0
//! depth = 0.0
//!
//! [[platform]]
//! name = "MANSIO"
//! x = 400.0
//! y = -250.0
//! depth = 21.0
//! measurement_period_s = 120
//! status_period_s = 60      # optional heartbeat
//! shadow = "../fixtures/cap.jsonl"   # relative to this file
//! effects = { 3 = ["lights_on"] }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::TopicPattern;
use crate::channel::{ChannelParams, LossModel, Position};
use crate::twin::{
    BehaviorDef, HardwareMode, O2Thresholds, Platform, PlausibilityBounds, ShadowError, ShadowRecording,
    SimulatedO2Params, TwinConfig, TwinError,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("mission has no platforms")]
    NoPlatforms,
    #[error("platform {0} listed twice")]
    DuplicatePlatform(Platform),
    #[error("{platform}: {source}")]
    Twin { platform: Platform, source: TwinError },
    #[error("{platform}: shadow recording {path}: {source}")]
    Shadow { platform: Platform, path: PathBuf, source: ShadowError },
    #[error("{0}: position needs finite coordinates and depth >= 0")]
    BadPosition(String),
    #[error("{0}: behavior key `{1}` is not a behavior id")]
    BadEffectKey(Platform, String),
    #[error("duration must be positive")]
    BadDuration,
    #[error("{0}")]
    Channel(#[from] crate::channel::ChannelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Virtual,
    Realtime,
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual" => Ok(RunMode::Virtual),
            "realtime" => Ok(RunMode::Realtime),
            other => Err(format!("unknown mode `{other}` (virtual|realtime)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "d_sound_speed")]
    pub sound_speed: f64,
    #[serde(default = "d_byte_rate")]
    pub byte_rate: f64,
    #[serde(default = "d_p0")]
    pub p0: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
}

fn d_sound_speed() -> f64 {
    ChannelParams::default().sound_speed
}
fn d_byte_rate() -> f64 {
    ChannelParams::default().byte_rate
}
fn d_p0() -> f64 {
    LossModel::default().p0
}
fn d_alpha() -> f64 {
    LossModel::default().alpha
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { sound_speed: d_sound_speed(), byte_rate: d_byte_rate(), p0: d_p0(), alpha: d_alpha() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSpec {
    pub name: Platform,
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub measurement_period_s: f64,
    #[serde(default)]
    pub status_period_s: Option<f64>,
    /// First sample at this mission time.
    #[serde(default)]
    pub start_offset_s: f64,
    #[serde(default)]
    pub sync_topics: Option<Vec<TopicPattern>>,
    #[serde(default)]
    pub shadow: Option<PathBuf>,
    #[serde(default = "yes")]
    pub shadow_loop: bool,
    #[serde(default)]
    pub effects: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub behaviors: Vec<BehaviorDef>,
    #[serde(default)]
    pub simulated: Option<SimulatedO2Params>,
}

fn yes() -> bool {
    true
}

impl PlatformSpec {
    pub fn position(&self) -> Position {
        Position::new(self.x, self.y, self.depth)
    }

    pub fn measurement_period(&self) -> Duration {
        Duration::from_secs_f64(self.measurement_period_s.max(0.0))
    }

    pub fn start_offset(&self) -> Duration {
        Duration::from_secs_f64(self.start_offset_s.max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub mode: RunMode,
    /// Digital Twins apply commands locally before synchronizing them.
    #[serde(default)]
    pub guard: bool,
    /// Digital Twins detect Oxia/Hypoxia in incoming samples.
    #[serde(default)]
    pub auto_events: bool,
    #[serde(default)]
    pub epoch_ms: i64,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub thresholds: O2Thresholds,
    #[serde(default)]
    pub plausibility: PlausibilityBounds,
    #[serde(default = "d_ship")]
    pub ship: Position,
    #[serde(rename = "platform", default)]
    pub platforms: Vec<PlatformSpec>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn d_duration() -> f64 {
    3600.0
}

fn d_ship() -> Position {
    Position::new(0.0, 0.0, 0.0)
}

/// The shipped five-platform mission.
pub const DEFAULT_MISSION: &str = include_str!("../../missions/default.toml");

impl MissionConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: MissionConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// The built-in default mission. Relative paths resolve against the
    /// crate's `missions/` directory.
    pub fn default_mission() -> Self {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("missions");
        Self::parse(DEFAULT_MISSION, &dir).expect("shipped mission is valid")
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration_s)
    }

    pub fn loss(&self) -> LossModel {
        LossModel { p0: self.channel.p0, alpha: self.channel.alpha }
    }

    pub fn set_loss(&mut self, loss: LossModel) {
        self.channel.p0 = loss.p0;
        self.channel.alpha = loss.alpha;
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            sound_speed: self.channel.sound_speed,
            byte_rate: self.channel.byte_rate,
            loss: self.loss(),
            seed: self.seed,
        }
    }

    pub fn platform(&self, p: Platform) -> Option<&PlatformSpec> {
        self.platforms.iter().find(|s| s.name == p)
    }

    pub fn platform_mut(&mut self, p: Platform) -> Option<&mut PlatformSpec> {
        self.platforms.iter_mut().find(|s| s.name == p)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::BadDuration);
        }
        if self.platforms.is_empty() {
            return Err(ConfigError::NoPlatforms);
        }
        self.channel_params().validate()?;
        if !self.ship.is_valid() {
            return Err(ConfigError::BadPosition("ship".into()));
        }
        let mut seen = BTreeSet::new();
        for spec in &self.platforms {
            if !seen.insert(spec.name) {
                return Err(ConfigError::DuplicatePlatform(spec.name));
            }
            if !spec.position().is_valid() {
                return Err(ConfigError::BadPosition(spec.name.to_string()));
            }
            if !(spec.start_offset_s.is_finite() && spec.start_offset_s >= 0.0) {
                return Err(ConfigError::Invalid(format!("{}: start_offset_s must be >= 0", spec.name)));
            }
            self.twin_config(spec)?;
        }
        Ok(())
    }

    /// Physical Twin config for one platform; call `.digital()` on it for
    /// the Digital Twin.
    pub fn twin_config(&self, spec: &PlatformSpec) -> Result<TwinConfig, ConfigError> {
        let p = spec.name;
        let mut c = TwinConfig::new(p);
        c.measurement_period = spec.measurement_period();
        c.status_period = spec.status_period_s.map(Duration::from_secs_f64);
        if let Some(t) = &spec.sync_topics {
            c.sync_topics = t.clone();
        }
        c.thresholds = self.thresholds;
        c.guard = self.guard;
        c.auto_events = self.auto_events;
        c.epoch_ms = self.epoch_ms;
        c.seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(p.id() as u64);
        if let Some(sim) = spec.simulated {
            c.simulated = sim;
        }
        for (k, v) in &spec.effects {
            let id: u8 = k.parse().map_err(|_| ConfigError::BadEffectKey(p, k.clone()))?;
            c.effects.insert(id, v.clone());
        }
        c.extra_behaviors = spec.behaviors.clone();
        if let Some(path) = &spec.shadow {
            let full = self.resolve(path);
            let rec = ShadowRecording::load_jsonl(&full, spec.shadow_loop)
                .map_err(|source| ConfigError::Shadow { platform: p, path: full.clone(), source })?;
            c.shadow = Some(rec);
            c.hardware.insert("o2".into(), HardwareMode::EmulatedShadow);
        }
        c.validate().map_err(|source| ConfigError::Twin { platform: p, source })?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[platform]]
        name = "FLUX"
        x = 10.0
        y = 0.0
        depth = 20.0
        measurement_period_s = 5
    "#;

    #[test]
    fn defaults_fill_in() {
        let c = MissionConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.duration_s, 3600.0);
        assert_eq!(c.mode, RunMode::Virtual);
        assert_eq!(c.loss(), LossModel::default());
        assert_eq!(c.channel.byte_rate, 64.0);
        assert!(!c.guard);
    }

    #[test]
    fn default_mission_is_the_five_platform_layout() {
        let c = MissionConfig::default_mission();
        let names: Vec<Platform> = c.platforms.iter().map(|p| p.name).collect();
        assert_eq!(names, Platform::ALL.to_vec());
        assert!(c.platforms.iter().all(|p| (17.0..=24.0).contains(&p.depth)));
        let periods: Vec<f64> = c.platforms.iter().map(|p| p.measurement_period_s).collect();
        assert_eq!(periods, vec![60.0, 5.0, 30.0, 120.0, 300.0]);
        let effects = &c.platform(Platform::Mansio).unwrap().effects;
        assert_eq!(effects["3"], vec!["lights_on"]);
    }

    #[test]
    fn rejects_bad_configs() {
        let dup = format!("{MINIMAL}{MINIMAL}");
        assert!(matches!(MissionConfig::parse(&dup, Path::new(".")), Err(ConfigError::DuplicatePlatform(_))));
        assert!(matches!(MissionConfig::parse("seed = 1", Path::new(".")), Err(ConfigError::NoPlatforms)));
        let fast = MINIMAL.replace("= 5\n", "= 1\n");
        assert!(matches!(MissionConfig::parse(&fast, Path::new(".")), Err(ConfigError::Twin { .. })));
        let missing = format!("{MINIMAL}shadow = \"nope.jsonl\"\n");
        assert!(matches!(MissionConfig::parse(&missing, Path::new(".")), Err(ConfigError::Shadow { .. })));
        let typo = format!("{MINIMAL}perod = 3\n");
        assert!(matches!(MissionConfig::parse(&typo, Path::new(".")), Err(ConfigError::Parse(_))));
        let up = MINIMAL.replace("depth = 20.0", "depth = -3.0");
        assert!(matches!(MissionConfig::parse(&up, Path::new(".")), Err(ConfigError::BadPosition(_))));
    }
}
