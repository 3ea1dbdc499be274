//! Behavior ids and what each one does to a twin.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const IDLE: u8 = 0;
pub const MEASURE_DEFAULT: u8 = 1;
pub const OXIA: u8 = 2;
pub const HYPOXIA: u8 = 3;
pub const MEASURE_FAST: u8 = 4;
pub const MEASURE_SLOW: u8 = 5;
/// First id available for platform-specific behaviors.
pub const PLATFORM_SPECIFIC_BASE: u8 = 16;

pub const FAST_PERIOD: Duration = Duration::from_secs(5);
pub const SLOW_PERIOD: Duration = Duration::from_secs(300);

/// How a behavior drives the measurement cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementPlan {
    Off,
    /// The twin's configured measurement period.
    Default,
    #[serde(with = "secs")]
    Every(Duration),
    /// Leave the measurement cycle as it is.
    Unchanged,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorDef {
    pub id: u8,
    pub name: String,
    pub plan: MeasurementPlan,
    /// Observable platform actions, e.g. `lights_on`.
    #[serde(default)]
    pub effects: Vec<String>,
}

/// Behaviors known to one platform: the common set plus platform extras.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BehaviorRegistry {
    defs: BTreeMap<u8, BehaviorDef>,
}

impl BehaviorRegistry {
    pub fn builtin() -> Self {
        let def = |id, name: &str, plan| BehaviorDef { id, name: name.to_string(), plan, effects: Vec::new() };
        let defs = [
            def(IDLE, "IDLE", MeasurementPlan::Off),
            def(MEASURE_DEFAULT, "MEASURE_DEFAULT", MeasurementPlan::Default),
            def(OXIA, "OXIA", MeasurementPlan::Default),
            def(HYPOXIA, "HYPOXIA", MeasurementPlan::Every(FAST_PERIOD)),
            def(MEASURE_FAST, "MEASURE_FAST", MeasurementPlan::Every(FAST_PERIOD)),
            def(MEASURE_SLOW, "MEASURE_SLOW", MeasurementPlan::Every(SLOW_PERIOD)),
        ];
        BehaviorRegistry { defs: defs.into_iter().map(|d| (d.id, d)).collect() }
    }

    /// Builtins, with `effects` attached and `extra` behaviors added.
    pub fn for_platform(effects: &BTreeMap<u8, Vec<String>>, extra: &[BehaviorDef]) -> Self {
        let mut reg = Self::builtin();
        for def in extra {
            reg.defs.insert(def.id, def.clone());
        }
        for (id, list) in effects {
            if let Some(def) = reg.defs.get_mut(id) {
                for e in list {
                    if !def.effects.contains(e) {
                        def.effects.push(e.clone());
                    }
                }
            }
        }
        reg
    }

    pub fn get(&self, id: u8) -> Option<&BehaviorDef> {
        self.defs.get(&id)
    }

    pub fn contains(&self, id: u8) -> bool {
        self.defs.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.defs.keys().copied()
    }
}

/// Behavior that an environmental event label switches a platform into.
pub fn behavior_for_event(event: &str) -> Option<u8> {
    match event {
        super::OXIA_EVENT => Some(OXIA),
        super::HYPOXIA_EVENT => Some(HYPOXIA),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn platform_registry_merges_effects() {
        let effects = BTreeMap::from([(HYPOXIA, vec!["lights_on".to_string()]), (99, vec!["x".to_string()])]);
        let extra = [BehaviorDef {
            id: 16,
            name: "DOCK".into(),
            plan: MeasurementPlan::Unchanged,
            effects: vec!["dock".into()],
        }];
        let reg = BehaviorRegistry::for_platform(&effects, &extra);
        assert_eq!(reg.get(HYPOXIA).unwrap().effects, vec!["lights_on"]);
        assert!(reg.contains(16));
        assert!(!reg.contains(99));
        assert_eq!(reg.ids().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5, 16]);
    }

    #[test]
    fn events_map_to_behaviors() {
        assert_eq!(behavior_for_event("Hypoxia"), Some(HYPOXIA));
        assert_eq!(behavior_for_event("Oxia"), Some(OXIA));
        assert_eq!(behavior_for_event("hypoxia"), None);
    }
}
