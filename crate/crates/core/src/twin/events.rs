//! Oxygen event detection and sample plausibility.

use serde::{Deserialize, Serialize};

use crate::codec::{O2Event, StandardO2};

pub const OXIA_EVENT: &str = "Oxia";
pub const HYPOXIA_EVENT: &str = "Hypoxia";

/// Hysteresis band for the Oxia/Hypoxia state machine, in µM.
///
/// Defaults are not mission values: 63 µM is a conventional hypoxia cut-off,
/// and the exit level sits between that and ventilated water (~230 µM).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct O2Thresholds {
    pub hypoxia_enter: f32,
    pub oxia_enter: f32,
}

impl Default for O2Thresholds {
    fn default() -> Self {
        O2Thresholds { hypoxia_enter: 63.0, oxia_enter: 150.0 }
    }
}

impl O2Thresholds {
    pub fn is_valid(&self) -> bool {
        self.hypoxia_enter.is_finite() && self.oxia_enter.is_finite() && self.hypoxia_enter < self.oxia_enter
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum O2State {
    #[default]
    Unknown,
    Oxic,
    Hypoxic,
}

/// Per-platform event state.
#[derive(Clone, Debug)]
pub struct EventDetector {
    thresholds: O2Thresholds,
    state: O2State,
}

impl EventDetector {
    pub fn new(thresholds: O2Thresholds) -> Self {
        EventDetector { thresholds, state: O2State::Unknown }
    }

    pub fn state(&self) -> O2State {
        self.state
    }

    /// `Hypoxia` on entering the low band, `Oxia` on recovering above
    /// `oxia_enter` from Hypoxia, nothing otherwise.
    pub fn detect(&mut self, sample: &StandardO2) -> Option<O2Event> {
        let o2 = sample.oxygen;
        if o2 < self.thresholds.hypoxia_enter {
            if self.state != O2State::Hypoxic {
                self.state = O2State::Hypoxic;
                return Some(O2Event { event: HYPOXIA_EVENT.into() });
            }
        } else if o2 > self.thresholds.oxia_enter && self.state == O2State::Hypoxic {
            self.state = O2State::Oxic;
            return Some(O2Event { event: OXIA_EVENT.into() });
        }
        None
    }
}

/// Closed interval of believable oxygen readings, µM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityBounds {
    pub min: f32,
    pub max: f32,
}

impl Default for PlausibilityBounds {
    fn default() -> Self {
        PlausibilityBounds { min: 0.0, max: 500.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Plausibility {
    Plausible,
    Implausible,
}

pub fn plausibility_check(sample: &StandardO2, bounds: &PlausibilityBounds) -> Plausibility {
    let o2 = sample.oxygen;
    if o2 >= bounds.min && o2 <= bounds.max {
        Plausibility::Plausible
    } else {
        Plausibility::Implausible
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(oxygen: f32) -> StandardO2 {
        StandardO2 { timestamp: 0, oxygen, saturation: 0.0, temperature: 10.0 }
    }

    #[test]
    fn detector_examples() {
        let mut d = EventDetector::new(O2Thresholds::default());
        assert_eq!(d.detect(&at(100.0)), None);
        assert_eq!(d.detect(&at(50.0)).unwrap().event, "Hypoxia");
        assert_eq!(d.detect(&at(40.0)), None);
        assert_eq!(d.detect(&at(100.0)), None);
        assert_eq!(d.detect(&at(230.0)).unwrap().event, "Oxia");
        assert_eq!(d.detect(&at(240.0)), None);
        // high reading without a preceding Hypoxia is not an event
        let mut fresh = EventDetector::new(O2Thresholds::default());
        assert_eq!(fresh.detect(&at(230.0)), None);
    }

    #[test]
    fn plausibility_examples() {
        let b = PlausibilityBounds::default();
        assert_eq!(plausibility_check(&at(750.0), &b), Plausibility::Implausible);
        assert_eq!(plausibility_check(&at(230.0), &b), Plausibility::Plausible);
        assert_eq!(plausibility_check(&at(500.0), &b), Plausibility::Plausible);
        assert_eq!(plausibility_check(&at(-0.1), &b), Plausibility::Implausible);
        assert_eq!(plausibility_check(&at(f32::NAN), &b), Plausibility::Implausible);
    }

    proptest! {
        #[test]
        fn monotone_streams_never_repeat_events(
            start in 0.0f32..400.0,
            steps in proptest::collection::vec(0.0f32..30.0, 1..200),
            rising in any::<bool>(),
        ) {
            let mut d = EventDetector::new(O2Thresholds::default());
            let mut o2 = start;
            let mut last: Option<String> = None;
            for s in steps {
                o2 = if rising { o2 + s } else { (o2 - s).max(0.0) };
                if let Some(ev) = d.detect(&at(o2)) {
                    prop_assert_ne!(Some(ev.event.clone()), last.clone());
                    last = Some(ev.event);
                }
            }
        }
    }
}
