//! Compact control language for the acoustic digital thread.
//!
//! Message layouts are described by [`MessageSchema`]s held in a runtime
//! [`SchemaRegistry`]; nothing is generated at compile time. An encoded
//! [`Envelope`] is an 8-byte header followed by the payload fields in schema
//! order:
//!
//! ```text
//! offset  size  field
//! 0       1     version (= 1)
//! 1       1     type_id
//! 2       1     platform_id
//! 3       1     skill_id
//! 4       1     topic_index
//! 5       1     direction (0 = PT->DT, 1 = DT->PT, 2 = broadcast)
//! 6       2     sequence, little-endian
//! 8       ..    payload
//! ```
//!
//! Payload integers are little-endian, `f32` is the IEEE-754 bit pattern, and
//! strings and byte arrays carry a `u16` length prefix. Encoded envelopes are
//! split into at most 64-byte [`Frame`]s by [`fragment`].

mod frame;
pub mod golden;
mod messages;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{fragment, reassemble, Frame, Reassembler, FRAME_HEADER_LEN, MAX_CHUNK, MAX_FRAGMENTS, MAX_FRAME_LEN};
pub use messages::{
    BehaviorStatus, O2Event, SetBehavior, StandardO2, StandardStatus, TwinMessage, O2_EVENT, SET_BEHAVIOR,
    STANDARD_O2, STANDARD_STATUS,
};

pub const WIRE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("type id {type_id} already registered with a different definition")]
    ConflictingSchema { type_id: u8 },
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("field `{field}` expects {expected:?}")]
    FieldKindMismatch { field: String, expected: FieldKind },
    #[error("payload has {got} fields, schema `{schema}` declares {expected}")]
    FieldCountMismatch { schema: String, expected: usize, got: usize },
    #[error("input truncated: needed {needed} more bytes")]
    TruncatedPayload { needed: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("invalid direction tag {0}")]
    BadDirection(u8),
    #[error("field `{0}` is not valid UTF-8")]
    InvalidUtf8(String),
    #[error("field `{field}` is {len} bytes, limit is 65535")]
    FieldTooLong { field: String, len: usize },
    #[error("empty envelope cannot be fragmented")]
    EmptyPayload,
    #[error("{count} fragments needed, limit is 255")]
    TooManyFragments { count: usize },
    #[error("fragment set incomplete: missing index {index} of {count}")]
    MissingFragment { index: u8, count: u8 },
    #[error("frames belong to different envelopes")]
    MixedSequence,
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

/// Wire type of one schema field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    I64,
    U16,
    U8,
    F32,
    Utf8,
    Bytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldDef {
    pub fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        FieldDef { name: name.into(), kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSchema {
    pub type_id: u8,
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl MessageSchema {
    pub fn new(type_id: u8, name: impl Into<String>, fields: Vec<FieldDef>) -> Self {
        MessageSchema { type_id, name: name.into(), fields }
    }
}

/// Schemas by wire tag. Populated at startup, read-only afterwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaRegistry {
    schemas: BTreeMap<u8, MessageSchema>,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four inter-platform message types.
    pub fn standard() -> Self {
        let mut reg = Self::new();
        for schema in messages::standard_schemas() {
            reg.register(schema).expect("standard schemas are distinct");
        }
        reg
    }

    /// Registering an identical schema twice is a no-op; a different
    /// definition under a taken `type_id` is rejected.
    pub fn register(&mut self, schema: MessageSchema) -> Result<(), CodecError> {
        match self.schemas.get(&schema.type_id) {
            Some(existing) if *existing == schema => Ok(()),
            Some(_) => Err(CodecError::ConflictingSchema { type_id: schema.type_id }),
            None => {
                self.schemas.insert(schema.type_id, schema);
                Ok(())
            }
        }
    }

    pub fn get(&self, type_id: u8) -> Option<&MessageSchema> {
        self.schemas.get(&type_id)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MessageSchema> {
        self.schemas.values()
    }
}

/// A decoded field value.
///
/// Equality on `F32` compares bit patterns so NaN payloads survive a round
/// trip as equal.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Value {
    I64(i64),
    U16(u16),
    U8(u8),
    F32(f32),
    Utf8(String),
    Bytes(#[serde(with = "hex_bytes")] Vec<u8>),
}

impl Value {
    pub fn kind(&self) -> FieldKind {
        match self {
            Value::I64(_) => FieldKind::I64,
            Value::U16(_) => FieldKind::U16,
            Value::U8(_) => FieldKind::U8,
            Value::F32(_) => FieldKind::F32,
            Value::Utf8(_) => FieldKind::Utf8,
            Value::Bytes(_) => FieldKind::Bytes,
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            Value::I64(_) => 8,
            Value::U16(_) => 2,
            Value::U8(_) => 1,
            Value::F32(_) => 4,
            Value::Utf8(s) => 2 + s.len(),
            Value::Bytes(b) => 2 + b.len(),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::I64(a), Value::I64(b)) => a == b,
            (Value::U16(a), Value::U16(b)) => a == b,
            (Value::U8(a), Value::U8(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => a.to_bits() == b.to_bits(),
            (Value::Utf8(a), Value::Utf8(b)) => a == b,
            (Value::Bytes(a), Value::Bytes(b)) => a == b,
            _ => false,
        }
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// Which way an envelope travels between the twins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    PtToDt,
    DtToPt,
    Broadcast,
}

impl Direction {
    pub fn tag(self) -> u8 {
        match self {
            Direction::PtToDt => 0,
            Direction::DtToPt => 1,
            Direction::Broadcast => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self, CodecError> {
        match tag {
            0 => Ok(Direction::PtToDt),
            1 => Ok(Direction::DtToPt),
            2 => Ok(Direction::Broadcast),
            other => Err(CodecError::BadDirection(other)),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::PtToDt => "PT_TO_DT",
            Direction::DtToPt => "DT_TO_PT",
            Direction::Broadcast => "BROADCAST",
        })
    }
}

/// A routed message: provenance header plus schema-typed payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub platform_id: u8,
    pub skill_id: u8,
    pub topic_index: u8,
    pub direction: Direction,
    pub sequence: u16,
    pub type_id: u8,
    pub payload: Vec<Value>,
}

/// Serializes `envelope` using the schema registered for its `type_id`.
pub fn encode(envelope: &Envelope, registry: &SchemaRegistry) -> Result<Vec<u8>, CodecError> {
    let schema = registry
        .get(envelope.type_id)
        .ok_or(CodecError::UnknownType(envelope.type_id))?;
    if schema.fields.len() != envelope.payload.len() {
        return Err(CodecError::FieldCountMismatch {
            schema: schema.name.clone(),
            expected: schema.fields.len(),
            got: envelope.payload.len(),
        });
    }
    let payload_len: usize = envelope.payload.iter().map(Value::encoded_len).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
    out.extend_from_slice(&[
        WIRE_VERSION,
        envelope.type_id,
        envelope.platform_id,
        envelope.skill_id,
        envelope.topic_index,
        envelope.direction.tag(),
    ]);
    out.extend_from_slice(&envelope.sequence.to_le_bytes());

    for (def, value) in schema.fields.iter().zip(&envelope.payload) {
        if def.kind != value.kind() {
            return Err(CodecError::FieldKindMismatch { field: def.name.clone(), expected: def.kind });
        }
        match value {
            Value::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::U16(v) => out.extend_from_slice(&v.to_le_bytes()),
            Value::U8(v) => out.push(*v),
            Value::F32(v) => out.extend_from_slice(&v.to_bits().to_le_bytes()),
            Value::Utf8(s) => put_prefixed(&mut out, &def.name, s.as_bytes())?,
            Value::Bytes(b) => put_prefixed(&mut out, &def.name, b)?,
        }
    }
    Ok(out)
}

fn put_prefixed(out: &mut Vec<u8>, field: &str, bytes: &[u8]) -> Result<(), CodecError> {
    let len = u16::try_from(bytes.len()).map_err(|_| CodecError::FieldTooLong {
        field: field.to_string(),
        len: bytes.len(),
    })?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let remaining = self.data.len() - self.pos;
        if remaining < n {
            return Err(CodecError::TruncatedPayload { needed: n - remaining });
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Inverse of [`encode`]. The input must be exactly one envelope.
pub fn decode(data: &[u8], registry: &SchemaRegistry) -> Result<Envelope, CodecError> {
    let mut cur = Cursor { data, pos: 0 };
    let header: [u8; HEADER_LEN] = cur.array()?;
    if header[0] != WIRE_VERSION {
        return Err(CodecError::BadVersion(header[0]));
    }
    let type_id = header[1];
    let direction = Direction::from_tag(header[5])?;
    let schema = registry.get(type_id).ok_or(CodecError::UnknownType(type_id))?;

    let mut payload = Vec::with_capacity(schema.fields.len());
    for def in &schema.fields {
        let value = match def.kind {
            FieldKind::I64 => Value::I64(i64::from_le_bytes(cur.array()?)),
            FieldKind::U16 => Value::U16(u16::from_le_bytes(cur.array()?)),
            FieldKind::U8 => Value::U8(cur.array::<1>()?[0]),
            FieldKind::F32 => Value::F32(f32::from_bits(u32::from_le_bytes(cur.array()?))),
            FieldKind::Utf8 => {
                let len = u16::from_le_bytes(cur.array()?) as usize;
                let raw = cur.take(len)?;
                let s = std::str::from_utf8(raw).map_err(|_| CodecError::InvalidUtf8(def.name.clone()))?;
                Value::Utf8(s.to_string())
            }
            FieldKind::Bytes => {
                let len = u16::from_le_bytes(cur.array()?) as usize;
                Value::Bytes(cur.take(len)?.to_vec())
            }
        };
        payload.push(value);
    }
    let trailing = data.len() - cur.pos;
    if trailing > 0 {
        return Err(CodecError::TrailingBytes(trailing));
    }
    Ok(Envelope {
        platform_id: header[2],
        skill_id: header[3],
        topic_index: header[4],
        direction,
        sequence: u16::from_le_bytes([header[6], header[7]]),
        type_id,
        payload,
    })
}
