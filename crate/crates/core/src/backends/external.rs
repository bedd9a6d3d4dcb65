//! Client for external tagger/separator processes speaking the stdio
//! protocol in [`super::protocol`]. One process handles one request at a
//! time; responses are cached per (clip, request) within a run so agent
//! re-tagging is reproducible.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use crate::audio::{read_wav, write_wav, AudioClip, WavFormat};
use crate::backends::protocol::{Request, Response, PROTOCOL_VERSION};
use crate::backends::{LabelScores, Separator, Tagger};
use crate::error::{Error, Result};
use crate::vocab::ClassVocabulary;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

struct Pipe {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

struct CacheState {
    tag: BTreeMap<String, LabelScores>,
    separate: BTreeMap<(String, String), AudioClip>,
    audio_files: BTreeMap<String, PathBuf>,
}

/// An external backend process. Implements both [`Tagger`] and
/// [`Separator`]; a conforming child may answer either kind of request.
pub struct ExternalBackend {
    pipe: Mutex<Pipe>,
    cache: Mutex<CacheState>,
    vocab: ClassVocabulary,
    scratch_dir: PathBuf,
    pub timeout: Duration,
}

impl ExternalBackend {
    /// Spawn `command` and complete the hello handshake.
    pub fn spawn(
        command: &[String],
        vocab: ClassVocabulary,
        scratch_dir: &Path,
    ) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::BackendProcess("empty backend command".into()))?;
        std::fs::create_dir_all(scratch_dir)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::BackendProcess(format!("failed to spawn '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let backend = Self {
            pipe: Mutex::new(Pipe { child, stdin, lines: rx }),
            cache: Mutex::new(CacheState {
                tag: BTreeMap::new(),
                separate: BTreeMap::new(),
                audio_files: BTreeMap::new(),
            }),
            vocab,
            scratch_dir: scratch_dir.to_path_buf(),
            timeout: DEFAULT_TIMEOUT,
        };
        let ack = backend.roundtrip(&Request::Hello {
            version: PROTOCOL_VERSION,
            vocabulary: backend.vocab.labels().to_vec(),
            scratch_dir: backend.scratch_dir.display().to_string(),
        })?;
        match ack {
            Response::HelloAck { version } if version == PROTOCOL_VERSION => Ok(backend),
            Response::HelloAck { version } => Err(Error::ProtocolViolation(format!(
                "version mismatch: backend speaks v{version}, this toolkit v{PROTOCOL_VERSION}"
            ))),
            other => Err(Error::ProtocolViolation(format!("expected hello-ack, got {other:?}"))),
        }
    }

    fn roundtrip(&self, request: &Request) -> Result<Response> {
        let mut pipe = self.pipe.lock().expect("pipe lock");
        let line = serde_json::to_string(request).expect("request serializes");
        writeln!(pipe.stdin, "{line}")
            .and_then(|()| pipe.stdin.flush())
            .map_err(|e| Error::BackendProcess(format!("write to backend failed: {e}")))?;
        match pipe.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| Error::ProtocolViolation(format!("unparseable response: {e}: {line}"))),
            Ok(Err(e)) => Err(Error::BackendProcess(format!("read from backend failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::BackendTimeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::BackendProcess("backend closed its stdout".into()))
            }
        }
    }

    /// Write the clip once per run and reuse the path for later requests.
    fn audio_path(&self, clip_id: &str, clip: &AudioClip) -> Result<PathBuf> {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(path) = cache.audio_files.get(clip_id) {
            return Ok(path.clone());
        }
        let path = self.scratch_dir.join(format!("{}.wav", sanitize(clip_id)));
        write_wav(clip, &path, WavFormat::Float32)?;
        cache.audio_files.insert(clip_id.to_string(), path.clone());
        Ok(path)
    }
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

impl Tagger for ExternalBackend {
    fn tag(&self, clip_id: &str, clip: &AudioClip) -> Result<LabelScores> {
        if let Some(cached) = self.cache.lock().expect("cache lock").tag.get(clip_id) {
            return Ok(cached.clone());
        }
        let audio_path = self.audio_path(clip_id, clip)?;
        let response = self.roundtrip(&Request::Tag {
            id: clip_id.to_string(),
            audio_path: audio_path.display().to_string(),
        })?;
        let scores = match response {
            Response::Scores { id, scores } if id == clip_id => {
                LabelScores::new(scores, &self.vocab)?
            }
            Response::Scores { id, .. } => {
                return Err(Error::ProtocolViolation(format!(
                    "response id '{id}' does not match request '{clip_id}'"
                )))
            }
            Response::Error { message, .. } => return Err(Error::BackendProcess(message)),
            other => {
                return Err(Error::ProtocolViolation(format!("expected scores, got {other:?}")))
            }
        };
        self.cache.lock().expect("cache lock").tag.insert(clip_id.to_string(), scores.clone());
        Ok(scores)
    }
}

impl Separator for ExternalBackend {
    fn separate(&self, clip_id: &str, clip: &AudioClip, label: &str) -> Result<AudioClip> {
        let key = (clip_id.to_string(), label.to_string());
        if let Some(cached) = self.cache.lock().expect("cache lock").separate.get(&key) {
            return Ok(cached.clone());
        }
        self.vocab.require(label)?;
        let audio_path = self.audio_path(clip_id, clip)?;
        let response = self.roundtrip(&Request::Separate {
            id: clip_id.to_string(),
            audio_path: audio_path.display().to_string(),
            label: label.to_string(),
        })?;
        let stem = match response {
            Response::Stem { id, stem_path } if id == clip_id => {
                let stem = read_wav(Path::new(&stem_path))?;
                if stem.len() != clip.len() {
                    return Err(Error::ResponseValidation(format!(
                        "stem length {} does not match input {}",
                        stem.len(),
                        clip.len()
                    )));
                }
                if stem.sample_rate() != clip.sample_rate() {
                    return Err(Error::ResponseValidation(format!(
                        "stem rate {} Hz does not match input {} Hz",
                        stem.sample_rate(),
                        clip.sample_rate()
                    )));
                }
                stem
            }
            Response::Error { message, .. } => return Err(Error::BackendProcess(message)),
            other => {
                return Err(Error::ProtocolViolation(format!("expected stem, got {other:?}")))
            }
        };
        self.cache.lock().expect("cache lock").separate.insert(key, stem.clone());
        Ok(stem)
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        if let Ok(mut pipe) = self.pipe.lock() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}
