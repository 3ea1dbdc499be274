use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BusError, TopicPattern};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
    List(Vec<String>),
}

/// Named configuration values shared by the twins of one deployment.
///
/// `<platform>/sync_topics` holds the ordered list of topic patterns a
/// platform synchronizes. That order defines the wire `topic_index`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    values: BTreeMap<String, ParamValue>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: ParamValue) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn set_sync_topics(&mut self, platform: &str, patterns: &[TopicPattern]) {
        self.set(sync_key(platform), ParamValue::List(patterns.iter().map(|p| p.to_string()).collect()));
    }

    pub fn sync_topics(&self, platform: &str) -> Result<Option<Vec<TopicPattern>>, BusError> {
        let name = sync_key(platform);
        match self.get(&name) {
            None => Ok(None),
            Some(ParamValue::List(items)) => items
                .iter()
                .map(|s| TopicPattern::parse(s))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(other) => Err(BusError::BadParameter { name, reason: format!("expected a list, got {other:?}") }),
        }
    }
}

fn sync_key(platform: &str) -> String {
    format!("{}/sync_topics", platform.to_ascii_lowercase())
}
