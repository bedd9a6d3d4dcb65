//! Conformance stub for the external backend protocol. Answers every tag
//! request with uniform scores and every separate request with a half-gain
//! copy of the input written into the scratch directory.
//!
//! Misbehavior flags exist so the client's validation paths can be tested:
//!   --bad-score      emit a score outside [0, 1]
//!   --drop-class C   omit class C from score responses
//!   --wrong-length   emit a truncated stem
//!   --wrong-version  answer the handshake with a bogus version

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use soundscene_core::backends::protocol::{Request, Response, PROTOCOL_VERSION};
use soundscene_core::{read_wav, write_wav, AudioClip, WavFormat};

struct Stub {
    vocabulary: Vec<String>,
    scratch_dir: PathBuf,
    bad_score: bool,
    drop_class: Option<String>,
    wrong_length: bool,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let bad_score = args.iter().any(|a| a == "--bad-score");
    let wrong_length = args.iter().any(|a| a == "--wrong-length");
    let wrong_version = args.iter().any(|a| a == "--wrong-version");
    let drop_class = args
        .iter()
        .position(|a| a == "--drop-class")
        .and_then(|i| args.get(i + 1))
        .cloned();

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut stub: Option<Stub> = None;

    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                respond(&mut out, &Response::Error {
                    id: String::new(),
                    message: format!("unparseable request: {e}"),
                });
                continue;
            }
        };
        let response = match request {
            Request::Hello { version, vocabulary, scratch_dir } => {
                if version != PROTOCOL_VERSION {
                    Response::Error {
                        id: String::new(),
                        message: format!("unsupported protocol version {version}"),
                    }
                } else {
                    stub = Some(Stub {
                        vocabulary,
                        scratch_dir: PathBuf::from(scratch_dir),
                        bad_score,
                        drop_class: drop_class.clone(),
                        wrong_length,
                    });
                    let v = if wrong_version { 999 } else { PROTOCOL_VERSION };
                    Response::HelloAck { version: v }
                }
            }
            Request::Tag { id, .. } => match &stub {
                None => no_hello(&id),
                Some(s) => {
                    let mut scores: std::collections::BTreeMap<String, f64> = s
                        .vocabulary
                        .iter()
                        .map(|c| (c.clone(), 0.5))
                        .collect();
                    if let Some(drop) = &s.drop_class {
                        scores.remove(drop);
                    }
                    if s.bad_score {
                        if let Some(first) = s.vocabulary.first() {
                            scores.insert(first.clone(), 1.5);
                        }
                    }
                    Response::Scores { id, scores }
                }
            },
            Request::Separate { id, audio_path, label } => match &stub {
                None => no_hello(&id),
                Some(s) => separate(s, &id, Path::new(&audio_path), &label),
            },
        };
        respond(&mut out, &response);
    }
}

fn no_hello(id: &str) -> Response {
    Response::Error { id: id.to_string(), message: "no hello handshake yet".into() }
}

fn separate(stub: &Stub, id: &str, audio_path: &Path, label: &str) -> Response {
    if !stub.vocabulary.iter().any(|c| c == label) {
        return Response::Error { id: id.to_string(), message: format!("unknown label '{label}'") };
    }
    let clip = match read_wav(audio_path) {
        Ok(c) => c,
        Err(e) => return Response::Error { id: id.to_string(), message: e.to_string() },
    };
    let mut samples: Vec<f32> = clip.channels()[0].iter().map(|s| s * 0.5).collect();
    if stub.wrong_length {
        samples.truncate(samples.len() / 2);
    }
    let stem = match AudioClip::mono(samples, clip.sample_rate()) {
        Ok(c) => c,
        Err(e) => return Response::Error { id: id.to_string(), message: e.to_string() },
    };
    let stem_path = stub.scratch_dir.join(format!("stub_stem_{}.wav", sanitize(id)));
    if let Err(e) = write_wav(&stem, &stem_path, WavFormat::Float32) {
        return Response::Error { id: id.to_string(), message: e.to_string() };
    }
    Response::Stem { id: id.to_string(), stem_path: stem_path.display().to_string() }
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn respond(out: &mut impl Write, response: &Response) {
    let line = serde_json::to_string(response).expect("response serializes");
    writeln!(out, "{line}").and_then(|()| out.flush()).expect("stdout open");
}
