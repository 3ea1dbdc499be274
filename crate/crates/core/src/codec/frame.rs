//! Instant-message framing.
//!
//! Frame layout: `envelope_sequence: u16 LE | fragment_index: u8 |
//! fragment_count: u8 | chunk`. A frame never exceeds 64 bytes, so a chunk
//! carries at most 60 bytes of the encoded envelope.

use std::collections::BTreeMap;

use super::CodecError;
use crate::time::SimTime;

pub const MAX_FRAME_LEN: usize = 64;
pub const FRAME_HEADER_LEN: usize = 4;
pub const MAX_CHUNK: usize = MAX_FRAME_LEN - FRAME_HEADER_LEN;
pub const MAX_FRAGMENTS: usize = 255;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub envelope_sequence: u16,
    pub fragment_index: u8,
    pub fragment_count: u8,
    pub chunk: Vec<u8>,
}

impl Frame {
    pub fn wire_len(&self) -> usize {
        FRAME_HEADER_LEN + self.chunk.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&self.envelope_sequence.to_le_bytes());
        out.push(self.fragment_index);
        out.push(self.fragment_count);
        out.extend_from_slice(&self.chunk);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame, CodecError> {
        if bytes.len() > MAX_FRAME_LEN {
            return Err(CodecError::MalformedFrame(format!("{} bytes exceeds 64", bytes.len())));
        }
        if bytes.len() <= FRAME_HEADER_LEN {
            return Err(CodecError::MalformedFrame(format!("{} bytes is too short", bytes.len())));
        }
        let frame = Frame {
            envelope_sequence: u16::from_le_bytes([bytes[0], bytes[1]]),
            fragment_index: bytes[2],
            fragment_count: bytes[3],
            chunk: bytes[FRAME_HEADER_LEN..].to_vec(),
        };
        if frame.fragment_count == 0 || frame.fragment_index >= frame.fragment_count {
            return Err(CodecError::MalformedFrame(format!(
                "fragment {} of {}",
                frame.fragment_index, frame.fragment_count
            )));
        }
        Ok(frame)
    }
}

/// Splits an encoded envelope into 64-byte frames, in index order.
pub fn fragment(encoded: &[u8], envelope_sequence: u16) -> Result<Vec<Frame>, CodecError> {
    if encoded.is_empty() {
        return Err(CodecError::EmptyPayload);
    }
    let count = encoded.len().div_ceil(MAX_CHUNK);
    if count > MAX_FRAGMENTS {
        return Err(CodecError::TooManyFragments { count });
    }
    Ok(encoded
        .chunks(MAX_CHUNK)
        .enumerate()
        .map(|(i, chunk)| Frame {
            envelope_sequence,
            fragment_index: i as u8,
            fragment_count: count as u8,
            chunk: chunk.to_vec(),
        })
        .collect())
}

/// Rebuilds the encoded envelope from a complete fragment set in any order.
///
/// Exact duplicates are tolerated; a duplicate index with different content is
/// treated as a mixed set.
pub fn reassemble(frames: &[Frame]) -> Result<Vec<u8>, CodecError> {
    let first = frames.first().ok_or(CodecError::MissingFragment { index: 0, count: 0 })?;
    let (seq, count) = (first.envelope_sequence, first.fragment_count);
    let mut slots: Vec<Option<&[u8]>> = vec![None; count as usize];
    for f in frames {
        if f.envelope_sequence != seq || f.fragment_count != count || f.fragment_index >= count {
            return Err(CodecError::MixedSequence);
        }
        match slots[f.fragment_index as usize] {
            Some(existing) if existing != f.chunk.as_slice() => return Err(CodecError::MixedSequence),
            _ => slots[f.fragment_index as usize] = Some(&f.chunk),
        }
    }
    let mut out = Vec::with_capacity(count as usize * MAX_CHUNK);
    for (i, slot) in slots.iter().enumerate() {
        let chunk = slot.ok_or(CodecError::MissingFragment { index: i as u8, count })?;
        out.extend_from_slice(chunk);
    }
    Ok(out)
}

struct Partial {
    first_seen: SimTime,
    frames: Vec<Frame>,
    have: Vec<bool>,
}

/// Streaming reassembly for frames arriving from many senders.
///
/// Partial sets are keyed by `(sender, envelope_sequence)` and evicted after
/// `timeout` without completing.
pub struct Reassembler<K> {
    partials: BTreeMap<(K, u16), Partial>,
    timeout: std::time::Duration,
    evicted: u64,
}

impl<K: Ord + Copy> Reassembler<K> {
    pub fn new(timeout: std::time::Duration) -> Self {
        Reassembler { partials: BTreeMap::new(), timeout, evicted: 0 }
    }

    /// Feeds one frame; returns the encoded envelope once its set completes.
    pub fn push(&mut self, now: SimTime, sender: K, frame: Frame) -> Result<Option<Vec<u8>>, CodecError> {
        self.evict_stale(now);
        if frame.fragment_count == 1 {
            return Ok(Some(frame.chunk));
        }
        let key = (sender, frame.envelope_sequence);
        let partial = self.partials.entry(key).or_insert_with(|| Partial {
            first_seen: now,
            frames: Vec::new(),
            have: vec![false; frame.fragment_count as usize],
        });
        if partial.have.len() != frame.fragment_count as usize {
            self.partials.remove(&key);
            return Err(CodecError::MixedSequence);
        }
        if !partial.have[frame.fragment_index as usize] {
            partial.have[frame.fragment_index as usize] = true;
            partial.frames.push(frame);
        }
        if partial.have.iter().all(|&h| h) {
            let partial = self.partials.remove(&key).expect("present");
            return reassemble(&partial.frames).map(Some);
        }
        Ok(None)
    }

    pub fn pending(&self) -> usize {
        self.partials.len()
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    fn evict_stale(&mut self, now: SimTime) {
        let timeout = self.timeout;
        let before = self.partials.len();
        self.partials.retain(|_, p| now.saturating_sub(p.first_seen) <= timeout);
        self.evicted += (before - self.partials.len()) as u64;
    }
}
