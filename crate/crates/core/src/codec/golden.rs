//! Golden-frame corpus: bit-exact wire regression cases on disk.
//!
//! A corpus directory holds pairs of files sharing a stem:
//! `<stem>.hex` with one hex-encoded frame per line, and `<stem>.json` with the
//! envelope those frames must decode to. Checking a case goes both ways: the
//! frames decode to the envelope, and encoding the envelope reproduces the
//! frames byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{decode, encode, fragment, reassemble, CodecError, Envelope, Frame, SchemaRegistry};

#[derive(Debug, Error)]
pub enum GoldenError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {reason}")]
    BadHex { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    BadJson { path: PathBuf, source: serde_json::Error },
    #[error("{stem}: missing {missing}")]
    Unpaired { stem: String, missing: &'static str },
    #[error("{stem}: {source}")]
    Codec { stem: String, source: CodecError },
    #[error("{stem}: {what}")]
    Mismatch { stem: String, what: String },
}

#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub stem: String,
    pub frames: Vec<Vec<u8>>,
    pub expected: Envelope,
}

/// Loads every `<stem>.hex` / `<stem>.json` pair in `dir`, sorted by stem.
pub fn load_corpus(dir: &Path) -> Result<Vec<GoldenCase>, GoldenError> {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> GoldenError + '_ {
        move |source| GoldenError::Io { path: path.to_path_buf(), source }
    }
    let mut stems: Vec<String> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "hex" || x == "json"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    stems.sort();
    stems.dedup();

    let mut cases = Vec::with_capacity(stems.len());
    for stem in stems {
        let hex_path = dir.join(format!("{stem}.hex"));
        let json_path = dir.join(format!("{stem}.json"));
        if !hex_path.exists() {
            return Err(GoldenError::Unpaired { stem, missing: ".hex" });
        }
        if !json_path.exists() {
            return Err(GoldenError::Unpaired { stem, missing: ".json" });
        }
        let hex_text = fs::read_to_string(&hex_path).map_err(io(&hex_path))?;
        let mut frames = Vec::new();
        for (i, line) in hex_text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bytes = hex::decode(line).map_err(|e| GoldenError::BadHex {
                path: hex_path.clone(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            frames.push(bytes);
        }
        let json_text = fs::read_to_string(&json_path).map_err(io(&json_path))?;
        let expected = serde_json::from_str(&json_text)
            .map_err(|source| GoldenError::BadJson { path: json_path.clone(), source })?;
        cases.push(GoldenCase { stem, frames, expected });
    }
    Ok(cases)
}

/// Verifies one case in both directions.
pub fn check_case(case: &GoldenCase, registry: &SchemaRegistry) -> Result<(), GoldenError> {
    let codec = |source| GoldenError::Codec { stem: case.stem.clone(), source };
    let parsed = case
        .frames
        .iter()
        .map(|b| Frame::from_bytes(b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(codec)?;
    let encoded = reassemble(&parsed).map_err(codec)?;
    let decoded = decode(&encoded, registry).map_err(codec)?;
    if decoded != case.expected {
        return Err(GoldenError::Mismatch {
            stem: case.stem.clone(),
            what: format!("decoded {decoded:?}, expected {:?}", case.expected),
        });
    }

    let seq = parsed[0].envelope_sequence;
    let reencoded: Vec<Vec<u8>> = fragment(&encode(&case.expected, registry).map_err(codec)?, seq)
        .map_err(codec)?
        .iter()
        .map(Frame::to_bytes)
        .collect();
    if reencoded != case.frames {
        return Err(GoldenError::Mismatch {
            stem: case.stem.clone(),
            what: "re-encoding does not reproduce the frames".into(),
        });
    }
    Ok(())
}
