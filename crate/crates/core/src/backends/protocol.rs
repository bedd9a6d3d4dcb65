//! Wire protocol for external tagger/separator processes: newline-delimited
//! JSON messages over the child's stdin/stdout. All audio is passed by
//! absolute file path; a scratch directory is agreed in the handshake.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Parent → child messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Request {
    Hello { version: u32, vocabulary: Vec<String>, scratch_dir: String },
    Tag { id: String, audio_path: String },
    Separate { id: String, audio_path: String, label: String },
}

/// Child → parent messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Response {
    HelloAck { version: u32 },
    Scores { id: String, scores: BTreeMap<String, f64> },
    Stem { id: String, stem_path: String },
    Error { id: String, message: String },
}
