//! The four inter-platform message types and their schemas.

use serde::{Deserialize, Serialize};

use super::{CodecError, FieldDef, FieldKind, MessageSchema, Value};

pub const STANDARD_O2: u8 = 1;
pub const STANDARD_STATUS: u8 = 2;
pub const SET_BEHAVIOR: u8 = 3;
pub const O2_EVENT: u8 = 4;

pub(super) fn standard_schemas() -> Vec<MessageSchema> {
    use FieldKind::*;
    vec![
        MessageSchema::new(
            STANDARD_O2,
            "StandardO2",
            vec![
                FieldDef::new("timestamp", I64),
                FieldDef::new("oxygen", F32),
                FieldDef::new("saturation", F32),
                FieldDef::new("temperature", F32),
            ],
        ),
        MessageSchema::new(
            STANDARD_STATUS,
            "StandardStatus",
            vec![
                FieldDef::new("timestamp", I64),
                FieldDef::new("behavior_id", U8),
                FieldDef::new("status", U8),
            ],
        ),
        MessageSchema::new(SET_BEHAVIOR, "SetBehavior", vec![FieldDef::new("behavior_id", U8)]),
        MessageSchema::new(O2_EVENT, "O2Event", vec![FieldDef::new("event", Utf8)]),
    ]
}

/// Oxygen sample: µM, %, °C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardO2 {
    pub timestamp: i64,
    pub oxygen: f32,
    pub saturation: f32,
    pub temperature: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BehaviorStatus {
    Running,
    Finished,
    Failure,
}

impl BehaviorStatus {
    pub fn tag(self) -> u8 {
        match self {
            BehaviorStatus::Running => 0,
            BehaviorStatus::Finished => 1,
            BehaviorStatus::Failure => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(BehaviorStatus::Running),
            1 => Some(BehaviorStatus::Finished),
            2 => Some(BehaviorStatus::Failure),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardStatus {
    pub timestamp: i64,
    pub behavior_id: u8,
    pub status: BehaviorStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetBehavior {
    pub behavior_id: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct O2Event {
    pub event: String,
}

/// Any message that travels between twins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TwinMessage {
    StandardO2(StandardO2),
    StandardStatus(StandardStatus),
    SetBehavior(SetBehavior),
    O2Event(O2Event),
}

impl TwinMessage {
    pub fn type_id(&self) -> u8 {
        match self {
            TwinMessage::StandardO2(_) => STANDARD_O2,
            TwinMessage::StandardStatus(_) => STANDARD_STATUS,
            TwinMessage::SetBehavior(_) => SET_BEHAVIOR,
            TwinMessage::O2Event(_) => O2_EVENT,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            TwinMessage::StandardO2(_) => "StandardO2",
            TwinMessage::StandardStatus(_) => "StandardStatus",
            TwinMessage::SetBehavior(_) => "SetBehavior",
            TwinMessage::O2Event(_) => "O2Event",
        }
    }

    pub fn to_values(&self) -> Vec<Value> {
        match self {
            TwinMessage::StandardO2(m) => vec![
                Value::I64(m.timestamp),
                Value::F32(m.oxygen),
                Value::F32(m.saturation),
                Value::F32(m.temperature),
            ],
            TwinMessage::StandardStatus(m) => {
                vec![Value::I64(m.timestamp), Value::U8(m.behavior_id), Value::U8(m.status.tag())]
            }
            TwinMessage::SetBehavior(m) => vec![Value::U8(m.behavior_id)],
            TwinMessage::O2Event(m) => vec![Value::Utf8(m.event.clone())],
        }
    }

    pub fn from_values(type_id: u8, values: &[Value]) -> Result<TwinMessage, CodecError> {
        let mismatch = |field: &str, expected| CodecError::FieldKindMismatch { field: field.to_string(), expected };
        match (type_id, values) {
            (STANDARD_O2, [Value::I64(ts), Value::F32(o2), Value::F32(sat), Value::F32(temp)]) => {
                Ok(TwinMessage::StandardO2(StandardO2 {
                    timestamp: *ts,
                    oxygen: *o2,
                    saturation: *sat,
                    temperature: *temp,
                }))
            }
            (STANDARD_STATUS, [Value::I64(ts), Value::U8(id), Value::U8(status)]) => {
                let status = BehaviorStatus::from_tag(*status).ok_or_else(|| mismatch("status", FieldKind::U8))?;
                Ok(TwinMessage::StandardStatus(StandardStatus { timestamp: *ts, behavior_id: *id, status }))
            }
            (SET_BEHAVIOR, [Value::U8(id)]) => Ok(TwinMessage::SetBehavior(SetBehavior { behavior_id: *id })),
            (O2_EVENT, [Value::Utf8(event)]) => Ok(TwinMessage::O2Event(O2Event { event: event.clone() })),
            (STANDARD_O2..=O2_EVENT, _) => Err(mismatch("payload", FieldKind::Bytes)),
            (other, _) => Err(CodecError::UnknownType(other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        let msgs = [
            TwinMessage::StandardO2(StandardO2 { timestamp: 5, oxygen: 230.5, saturation: 88.0, temperature: 9.5 }),
            TwinMessage::StandardStatus(StandardStatus {
                timestamp: -1,
                behavior_id: 3,
                status: BehaviorStatus::Failure,
            }),
            TwinMessage::SetBehavior(SetBehavior { behavior_id: 16 }),
            TwinMessage::O2Event(O2Event { event: "Hypoxia".into() }),
        ];
        for m in msgs {
            assert_eq!(TwinMessage::from_values(m.type_id(), &m.to_values()).unwrap(), m);
        }
    }

    #[test]
    fn bad_status_tag_rejected() {
        let vals = [Value::I64(0), Value::U8(1), Value::U8(9)];
        assert!(TwinMessage::from_values(STANDARD_STATUS, &vals).is_err());
        assert!(TwinMessage::from_values(SET_BEHAVIOR, &[Value::U16(1)]).is_err());
        assert_eq!(TwinMessage::from_values(50, &[]), Err(CodecError::UnknownType(50)));
    }
}
