//! JSON bodies for the eight `/v1/` endpoints. Keys are exact; unknown
//! response keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::FrameRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Vnli,
    Nli,
    Generate,
    Align,
    Nle,
    Judge,
    Events,
    Pos,
}

impl Endpoint {
    pub const ALL: [Endpoint; 8] = [
        Endpoint::Vnli,
        Endpoint::Nli,
        Endpoint::Generate,
        Endpoint::Align,
        Endpoint::Nle,
        Endpoint::Judge,
        Endpoint::Events,
        Endpoint::Pos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Vnli => "vnli",
            Endpoint::Nli => "nli",
            Endpoint::Generate => "generate",
            Endpoint::Align => "align",
            Endpoint::Nle => "nle",
            Endpoint::Judge => "judge",
            Endpoint::Events => "events",
            Endpoint::Pos => "pos",
        }
    }

    pub fn path(self) -> String {
        format!("/v1/{}", self.name())
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Endpoint::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown endpoint `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnliRequest {
    pub frame: FrameRef,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub top_p: f64,
    pub top_k: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignRequest {
    pub video_id: String,
    pub frames: Vec<FrameRef>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NleRequest {
    pub video_id: String,
    pub frames: Vec<FrameRef>,
    pub contrast_caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Body of both `events` and `pos` requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResponse {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignResponse {
    pub s_yes: f64,
    pub s_no: f64,
}

/// `entailed` is kept as raw JSON so the gateway can report unparseable
/// verdicts instead of a generic schema error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeResponse {
    pub entailed: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsResponse {
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosResponse {
    pub tags: Vec<String>,
}
