use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    /// Frames put on the air (a broadcast counts once).
    pub frames_sent: u64,
    pub frames_delivered: u64,
    pub frames_dropped: u64,
    pub uplink_records: u64,
    pub downlink_records: u64,
    pub dropped_records: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub min_s: Option<f64>,
    pub mean_s: Option<f64>,
    pub max_s: Option<f64>,
    /// Largest deviation from queueing + serialization + propagation.
    pub max_model_error_s: Option<f64>,
}

impl LatencyStats {
    pub fn from_samples(samples: &[(f64, f64)]) -> Self {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        let lat: Vec<f64> = samples.iter().map(|s| s.0).collect();
        LatencyStats {
            count: lat.len() as u64,
            min_s: lat.iter().copied().reduce(f64::min),
            mean_s: Some(lat.iter().sum::<f64>() / lat.len() as f64),
            max_s: lat.iter().copied().reduce(f64::max),
            max_model_error_s: samples.iter().map(|s| (s.0 - s.1).abs()).reduce(f64::max),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlatformOutcome {
    pub platform: String,
    pub samples_taken: u64,
    pub samples_at_dt: u64,
    pub behavior_id: u8,
    pub behavior_changes: u64,
    pub effects: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub received_broadcast: Option<bool>,
    pub rejected_commands: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub mode: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub counts: Counts,
    pub latency: LatencyStats,
    pub platforms: Vec<PlatformOutcome>,
    /// Output files, relative to the report directory.
    pub files: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, seed: u64, duration_s: f64, mode: &str) -> Self {
        ScenarioReport {
            scenario: scenario.to_string(),
            seed,
            duration_s,
            mode: mode.to_string(),
            passed: true,
            assertions: Vec::new(),
            counts: Counts::default(),
            latency: LatencyStats::default(),
            platforms: Vec::new(),
            files: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> bool {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail: detail.into() });
        self.passed = self.assertions.iter().all(|a| a.passed);
        passed
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "scenario {}  {verdict}", self.scenario);
        let _ = writeln!(s, "seed {}  duration {} s  mode {}", self.seed, self.duration_s, self.mode);
        let _ = writeln!(s);
        for a in &self.assertions {
            let _ = writeln!(s, "[{}] {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
        }
        let c = &self.counts;
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "frames sent {}  delivered {}  dropped {}",
            c.frames_sent, c.frames_delivered, c.frames_dropped
        );
        let _ = writeln!(
            s,
            "log records: uplink {}  downlink {}  dropped {}",
            c.uplink_records, c.downlink_records, c.dropped_records
        );
        if let (Some(min), Some(mean), Some(max)) = (self.latency.min_s, self.latency.mean_s, self.latency.max_s) {
            let _ = writeln!(s, "latency s: min {min:.6}  mean {mean:.6}  max {max:.6}  ({} deliveries)", self.latency.count);
        }
        if !self.platforms.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<11} {:>7} {:>7} {:>8} {:>7} {:>8}  effects", "platform", "samples", "at DT", "behavior", "changes", "rejected");
            for p in &self.platforms {
                let _ = write!(
                    s,
                    "{:<11} {:>7} {:>7} {:>8} {:>7} {:>8}  {}",
                    p.platform,
                    p.samples_taken,
                    p.samples_at_dt,
                    p.behavior_id,
                    p.behavior_changes,
                    p.rejected_commands,
                    p.effects.join(",")
                );
                if let Some(got) = p.received_broadcast {
                    let _ = write!(s, "  broadcast {}", if got { "received" } else { "MISSED" });
                }
                let _ = writeln!(s);
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for (k, v) in &self.files {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    /// Writes `<scenario>-report.json` and `<scenario>-report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}-report.json", self.scenario)), self.to_json())?;
        std::fs::write(dir.join(format!("{}-report.txt", self.scenario)), self.to_text())
    }
}
