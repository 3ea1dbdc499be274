use std::time::Duration;

use crate::codec::{fragment, CodecError, Frame, Reassembler};
use crate::time::SimTime;

/// Partial fragment sets older than this are discarded.
pub const REASSEMBLY_TIMEOUT: Duration = Duration::from_secs(600);

/// Link layer of one acoustic endpoint: splits outgoing encoded envelopes
/// into frames under a per-endpoint sequence counter and reassembles
/// incoming frames per sender.
pub struct Modem {
    endpoint: u8,
    next_seq: u16,
    reassembler: Reassembler<u8>,
    frame_errors: u64,
}

impl Modem {
    pub fn new(endpoint: u8) -> Self {
        Modem { endpoint, next_seq: 0, reassembler: Reassembler::new(REASSEMBLY_TIMEOUT), frame_errors: 0 }
    }

    pub fn endpoint(&self) -> u8 {
        self.endpoint
    }

    /// Wire frames for one encoded envelope.
    pub fn frames_for(&mut self, encoded: &[u8]) -> Result<Vec<Vec<u8>>, CodecError> {
        let frames = fragment(encoded, self.next_seq)?;
        self.next_seq = self.next_seq.wrapping_add(1);
        Ok(frames.iter().map(Frame::to_bytes).collect())
    }

    /// Feeds one received frame; returns the encoded envelope when complete.
    pub fn receive(&mut self, now: SimTime, src: u8, bytes: &[u8]) -> Result<Option<Vec<u8>>, CodecError> {
        let result = Frame::from_bytes(bytes).and_then(|f| self.reassembler.push(now, src, f));
        if result.is_err() {
            self.frame_errors += 1;
        }
        result
    }

    pub fn frame_errors(&self) -> u64 {
        self.frame_errors
    }

    pub fn pending_sets(&self) -> usize {
        self.reassembler.pending()
    }
}
