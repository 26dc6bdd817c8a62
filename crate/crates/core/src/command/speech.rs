//! Speech adapters. Audio is opaque bytes; the console adapters treat it as
//! UTF-8 text so the pipeline runs without audio hardware.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpeechError {
    #[error("audio is not valid text: {0}")]
    Decode(#[from] std::string::FromUtf8Error),
    #[error("speech backend failed: {0}")]
    Backend(String),
}

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, audio: &[u8]) -> Result<String, SpeechError>;
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, text: &str) -> Result<Vec<u8>, SpeechError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConsoleSpeech;

impl Transcriber for ConsoleSpeech {
    fn transcribe(&self, audio: &[u8]) -> Result<String, SpeechError> {
        Ok(String::from_utf8(audio.to_vec())?.trim().to_string())
    }
}

impl Synthesizer for ConsoleSpeech {
    fn synthesize(&self, text: &str) -> Result<Vec<u8>, SpeechError> {
        Ok(text.as_bytes().to_vec())
    }
}
