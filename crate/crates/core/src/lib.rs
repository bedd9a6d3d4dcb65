//! Sound-scene analysis toolkit: audio I/O, the feature stack
//! (mel / spectral roll-off / chroma), tagging and separation metrics
//! including CA-SDRi, pluggable tagger/separator backends, the label
//! correction agent, and dataset audit/synthesis tooling.

pub mod agent;
pub mod audio;
pub mod backends;
pub mod dataset;
pub mod error;
pub mod features;
pub mod metrics;
pub mod vocab;

pub use audio::{read_wav, rms, write_wav, AudioClip, WavFormat};
pub use error::{Error, Result};
pub use vocab::{ClassVocabulary, LabelSet, DEFAULT_CLASSES};
