//! Inference wire protocol and its implementations.
//!
//! Every model call goes through [`Backend::call`], which speaks the JSON
//! bodies defined in [`wire`]. The [`Gateway`] adds typed operations,
//! precondition and range validation, and the in-flight request cap.

mod conformance;
mod gateway;
mod http;
pub mod lexicon;
mod mock;
pub mod scripted;
pub mod wire;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use conformance::{run_conformance, ConformanceCheck, ConformanceProbes};
pub use gateway::Gateway;
pub use http::{HttpBackend, RetryPolicy, TOKEN_ENV};
pub use mock::MockBackend;
pub use scripted::{ScriptedBackend, ScriptedFixture};
pub use wire::Endpoint;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable after {attempts} attempt(s): {reason}")]
    Unreachable { attempts: u32, reason: String },
    #[error("unknown frame `{frame}` (text `{text}`)")]
    UnknownFrame { frame: String, text: String },
    #[error("no fixture entry for {endpoint} key {key}")]
    MissingFixture { endpoint: Endpoint, key: String },
    #[error("{endpoint} returned an empty completion")]
    EmptyCompletion { endpoint: Endpoint },
    #[error("precondition failed for {endpoint}: {reason}")]
    Precondition { endpoint: Endpoint, reason: String },
    #[error("{endpoint} returned {field} = {value}, outside its valid range")]
    OutOfRange {
        endpoint: Endpoint,
        field: &'static str,
        value: f64,
    },
    #[error("unparseable judge verdict: {0}")]
    UnparseableVerdict(String),
    #[error("{endpoint} protocol violation: {reason}")]
    Protocol { endpoint: Endpoint, reason: String },
    #[error("{endpoint} answered HTTP {status}: {body}")]
    Application {
        endpoint: Endpoint,
        status: u16,
        body: String,
    },
}

/// One implementation of the eight-endpoint protocol.
///
/// Implementations must be safe to call concurrently and must answer a
/// request independently of any other in-flight request.
pub trait Backend: Send + Sync {
    /// Stable description recorded in run manifests.
    fn identity(&self) -> String;

    fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError>;
}

/// Sampling parameters forwarded to the `generate` endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub top_p: f64,
    pub top_k: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.5,
            max_output_tokens: 256,
            top_p: 0.95,
            top_k: 40,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature {} must be >= 0", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p {} must lie in (0, 1]", self.top_p));
        }
        if self.top_k == 0 {
            return Err("top_k must be positive".into());
        }
        Ok(())
    }
}

/// Unnormalized "Yes"/"No" scores for the entailment instruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentLogits {
    pub s_yes: f64,
    pub s_no: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventClass {
    Single,
    Multiple,
}

impl FromStr for EventClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(EventClass::Single),
            "multiple" => Ok(EventClass::Multiple),
            other => Err(format!("unknown event class `{other}`")),
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventClass::Single => "single",
            EventClass::Multiple => "multiple",
        })
    }
}

/// Coarse part-of-speech tags consulted by misalignment assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PosTag {
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "VERB")]
    Verb,
    #[serde(rename = "ADJ")]
    Adj,
}

impl PosTag {
    pub fn token(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
        }
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NOUN" => Ok(PosTag::Noun),
            "VERB" => Ok(PosTag::Verb),
            "ADJ" => Ok(PosTag::Adj),
            other => Err(format!("unknown POS tag `{other}`")),
        }
    }
}

pub type PosTags = BTreeSet<PosTag>;
