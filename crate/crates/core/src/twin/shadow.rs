//! Sensor sources: digital-shadow playback and a simulated oxygen optode.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::StandardO2;

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error("recording is empty")]
    Empty,
    #[error("offsets must strictly increase (line {line}: {offset_ms} ms)")]
    NonIncreasing { line: usize, offset_ms: u64 },
    #[error("t = {t_ms} ms precedes the first sample at {first_ms} ms")]
    BeforeFirstSample { t_ms: u64, first_ms: u64 },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a shadow recording file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowSample {
    pub offset_ms: u64,
    pub oxygen: f32,
    pub saturation: f32,
    pub temperature: f32,
}

/// Recorded sensor data replayed by emulated hardware.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowRecording {
    samples: Vec<ShadowSample>,
    looping: bool,
}

impl ShadowRecording {
    pub fn new(samples: Vec<ShadowSample>, looping: bool) -> Result<Self, ShadowError> {
        if samples.is_empty() {
            return Err(ShadowError::Empty);
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].offset_ms <= w[0].offset_ms {
                return Err(ShadowError::NonIncreasing { line: i + 2, offset_ms: w[1].offset_ms });
            }
        }
        Ok(ShadowRecording { samples, looping })
    }

    /// Reads JSON-lines, one [`ShadowSample`] per line. Blank lines are skipped.
    pub fn load_jsonl(path: &Path, looping: bool) -> Result<Self, ShadowError> {
        let reader = BufReader::new(File::open(path)?);
        let mut samples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let sample = serde_json::from_str(&line).map_err(|source| ShadowError::Parse { line: i + 1, source })?;
            samples.push(sample);
        }
        Self::new(samples, looping)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn samples(&self) -> &[ShadowSample] {
        &self.samples
    }

    pub fn is_looping(&self) -> bool {
        self.looping
    }

    /// Length of one playback cycle: the last offset plus one final sample
    /// interval (1 ms for a single-sample recording).
    pub fn duration_ms(&self) -> u64 {
        let n = self.samples.len();
        let last = self.samples[n - 1].offset_ms;
        let hold = if n >= 2 { last - self.samples[n - 2].offset_ms } else { 1 };
        last + hold
    }

    /// Zero-order hold lookup: the sample with the greatest offset `<= t`.
    pub fn sample_at(&self, t_ms: u64) -> Result<&ShadowSample, ShadowError> {
        let first = self.samples[0].offset_ms;
        let t = if self.looping { t_ms % self.duration_ms() } else { t_ms };
        let idx = self.samples.partition_point(|s| s.offset_ms <= t);
        if idx == 0 {
            if self.looping {
                // wrapped into the lead-in before the first offset: hold the cycle's last sample
                return Ok(self.samples.last().expect("non-empty"));
            }
            return Err(ShadowError::BeforeFirstSample { t_ms, first_ms: first });
        }
        Ok(&self.samples[idx - 1])
    }
}

/// Emulated oxygen reading at virtual time `t_ms`, stamped `epoch_ms + t_ms`.
pub fn emulate_sensor(recording: &ShadowRecording, t_ms: u64, epoch_ms: i64) -> Result<StandardO2, ShadowError> {
    let s = recording.sample_at(t_ms)?;
    Ok(StandardO2 {
        timestamp: epoch_ms + t_ms as i64,
        oxygen: s.oxygen,
        saturation: s.saturation,
        temperature: s.temperature,
    })
}

/// Parameters of the simulated optode used for "real" hardware in simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedO2Params {
    pub base: f32,
    pub amplitude: f32,
    pub cycle_s: f64,
    pub noise: f32,
}

impl Default for SimulatedO2Params {
    fn default() -> Self {
        SimulatedO2Params { base: 180.0, amplitude: 40.0, cycle_s: 12.0 * 3600.0, noise: 2.0 }
    }
}

/// Smooth oxygen signal with seeded noise. Deterministic for a given seed
/// and call sequence.
#[derive(Clone, Debug)]
pub struct SimulatedO2 {
    params: SimulatedO2Params,
    phase: f64,
    rng: ChaCha8Rng,
}

impl SimulatedO2 {
    pub fn new(params: SimulatedO2Params, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        SimulatedO2 { params, phase, rng }
    }

    pub fn read(&mut self, t_ms: u64, epoch_ms: i64) -> StandardO2 {
        let p = &self.params;
        let t = t_ms as f64 / 1000.0;
        let wave = (std::f64::consts::TAU * t / p.cycle_s + self.phase).sin() as f32;
        let noise = (self.rng.random::<f32>() * 2.0 - 1.0) * p.noise;
        let oxygen = (p.base + p.amplitude * wave + noise).max(0.0);
        StandardO2 {
            timestamp: epoch_ms + t_ms as i64,
            oxygen,
            saturation: oxygen / 2.8,
            temperature: 9.5 + 0.5 * wave,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(offsets: &[u64], looping: bool) -> ShadowRecording {
        ShadowRecording::new(
            offsets
                .iter()
                .enumerate()
                .map(|(i, &o)| ShadowSample { offset_ms: o, oxygen: i as f32, saturation: 0.0, temperature: 0.0 })
                .collect(),
            looping,
        )
        .unwrap()
    }

    #[test]
    fn zero_order_hold() {
        let r = rec(&[1000, 2000, 3000], false);
        assert_eq!(r.sample_at(2000).unwrap().oxygen, 1.0);
        assert_eq!(r.sample_at(2999).unwrap().oxygen, 1.0);
        assert_eq!(r.sample_at(1_000_000).unwrap().oxygen, 2.0);
        assert!(matches!(r.sample_at(999), Err(ShadowError::BeforeFirstSample { .. })));
    }

    #[test]
    fn looping_wraps_modulo_duration() {
        let r = rec(&[0, 1000, 2000], true);
        assert_eq!(r.duration_ms(), 3000);
        // modulo oracle: (duration + offset_1) mod duration = offset_1
        assert_eq!(r.sample_at(r.duration_ms() + 1000).unwrap().oxygen, 1.0);
        assert_eq!(r.sample_at(2 * r.duration_ms() + 2500).unwrap().oxygen, 2.0);
        let lead_in = rec(&[500, 1500], true);
        assert_eq!(lead_in.sample_at(100).unwrap().oxygen, 1.0);
    }

    #[test]
    fn rejects_bad_recordings() {
        assert!(matches!(ShadowRecording::new(vec![], false), Err(ShadowError::Empty)));
        let s = ShadowSample { offset_ms: 5, oxygen: 0.0, saturation: 0.0, temperature: 0.0 };
        assert!(matches!(ShadowRecording::new(vec![s, s], false), Err(ShadowError::NonIncreasing { .. })));
    }

    #[test]
    fn emulation_is_pure() {
        let r = rec(&[0, 60_000], false);
        let a = emulate_sensor(&r, 61_000, 1_000).unwrap();
        let b = emulate_sensor(&r, 61_000, 1_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.timestamp, 62_000);
        assert_eq!(a.oxygen, 1.0);
    }

    #[test]
    fn jsonl_round_trip() {
        let r = rec(&[0, 10, 20], true);
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        std::fs::write(&path, &buf).unwrap();
        assert_eq!(ShadowRecording::load_jsonl(&path, true).unwrap(), r);
        std::fs::write(&path, "{\"offset_ms\": 1}\n").unwrap();
        assert!(matches!(ShadowRecording::load_jsonl(&path, true), Err(ShadowError::Parse { line: 1, .. })));
    }

    #[test]
    fn simulated_sensor_is_seeded() {
        let mut a = SimulatedO2::new(SimulatedO2Params::default(), 7);
        let mut b = SimulatedO2::new(SimulatedO2Params::default(), 7);
        for t in (0..100_000).step_by(5000) {
            assert_eq!(a.read(t, 0), b.read(t, 0));
        }
    }
}
