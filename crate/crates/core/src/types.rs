//! Domain types shared by every pipeline stage.
//!
//! Field names here are the JSONL schema keys used on disk, so renaming a
//! field is a format change.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoreError {
    #[error("unknown {kind} token `{token}`")]
    UnknownToken { kind: &'static str, token: String },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

fn invalid(what: &'static str, reason: impl Into<String>) -> CoreError {
    CoreError::Invalid {
        what,
        reason: reason.into(),
    }
}

/// The seven perturbation categories a contrast caption can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisalignmentType {
    Object,
    Action,
    Attribute,
    Count,
    Relation,
    Hallucination,
    EventOrder,
}

impl MisalignmentType {
    pub const ALL: [MisalignmentType; 7] = [
        MisalignmentType::Object,
        MisalignmentType::Action,
        MisalignmentType::Attribute,
        MisalignmentType::Count,
        MisalignmentType::Relation,
        MisalignmentType::Hallucination,
        MisalignmentType::EventOrder,
    ];

    pub fn token(self) -> &'static str {
        match self {
            MisalignmentType::Object => "object",
            MisalignmentType::Action => "action",
            MisalignmentType::Attribute => "attribute",
            MisalignmentType::Count => "count",
            MisalignmentType::Relation => "relation",
            MisalignmentType::Hallucination => "hallucination",
            MisalignmentType::EventOrder => "event-order",
        }
    }
}

impl fmt::Display for MisalignmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MisalignmentType {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MisalignmentType::ALL
            .into_iter()
            .find(|m| m.token() == s)
            .ok_or_else(|| CoreError::UnknownToken {
                kind: "misalignment",
                token: s.to_string(),
            })
    }
}

/// Corpus a video was drawn from. Only `tempo` changes assignment behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Msrvtt,
    Vatex,
    Tempo,
    External,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Msrvtt, Source::Vatex, Source::Tempo, Source::External];

    pub fn token(self) -> &'static str {
        match self {
            Source::Msrvtt => "msrvtt",
            Source::Vatex => "vatex",
            Source::Tempo => "tempo",
            Source::External => "external",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn token(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Opaque frame reference (a path or a storage key). Never decoded here.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameRef(pub String);

impl FrameRef {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for FrameRef {
    fn from(s: &str) -> Self {
        FrameRef(s.to_string())
    }
}

fn default_fps() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub video_id: String,
    pub source: Source,
    /// Temporally ordered.
    pub frames: Vec<FrameRef>,
    #[serde(default = "default_fps")]
    pub fps_sampled: f64,
}

impl VideoRef {
    pub fn new(video_id: impl Into<String>, source: Source, frames: Vec<FrameRef>) -> Self {
        VideoRef {
            video_id: video_id.into(),
            source,
            frames,
            fps_sampled: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.video_id.trim().is_empty() {
            return Err(invalid("video", "empty video_id"));
        }
        if self.frames.is_empty() {
            return Err(invalid("video", format!("{} has no frames", self.video_id)));
        }
        if self.fps_sampled.is_nan() || self.fps_sampled <= 0.0 {
            return Err(invalid("video", format!("{} has non-positive fps", self.video_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionInstance {
    pub video: VideoRef,
    pub caption: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_vle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_flag: Option<bool>,
}

impl CaptionInstance {
    pub fn validate(&self) -> Result<(), CoreError> {
        self.video.validate()?;
        if normalize_text(&self.caption).is_empty() {
            return Err(invalid("caption", format!("empty caption for {}", self.video.video_id)));
        }
        if let Some(score) = self.a_vle {
            check_unit("a_vle", score)?;
        }
        Ok(())
    }
}

/// NLI scores recorded by the two generation filters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast_nli: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nle_nli: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRecord {
    pub instance_id: String,
    pub video: VideoRef,
    pub caption: String,
    pub contrast_caption: String,
    pub nle: String,
    pub misalignment: MisalignmentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_span: Option<String>,
    pub split: Split,
    #[serde(default)]
    pub filter_scores: FilterScores,
}

impl ContrastRecord {
    pub fn validate(&self) -> Result<(), CoreError> {
        self.video.validate()?;
        if normalize_text(&self.caption).is_empty() || normalize_text(&self.nle).is_empty() {
            return Err(invalid("contrast record", format!("{}: empty text field", self.instance_id)));
        }
        if normalize_text(&self.caption) == normalize_text(&self.contrast_caption) {
            return Err(invalid(
                "contrast record",
                format!("{}: contrast caption equals caption", self.instance_id),
            ));
        }
        let has_spans = self.source_span.is_some() && self.target_span.is_some();
        let no_spans = self.source_span.is_none() && self.target_span.is_none();
        let spans_ok = if self.misalignment == MisalignmentType::EventOrder {
            no_spans
        } else {
            has_spans
        };
        if !spans_ok {
            return Err(invalid(
                "contrast record",
                format!("{}: spans inconsistent with {}", self.instance_id, self.misalignment),
            ));
        }
        for (name, score) in [
            ("contrast_nli", self.filter_scores.contrast_nli),
            ("nle_nli", self.filter_scores.nle_nli),
        ] {
            if let Some(s) = score {
                check_unit(name, s)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentExample {
    pub instance_id: String,
    pub video: VideoRef,
    pub text: String,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misalignment: Option<MisalignmentType>,
}

impl EntailmentExample {
    pub fn validate(&self) -> Result<(), CoreError> {
        self.video.validate()?;
        match (self.label, self.misalignment) {
            (1, None) | (0, Some(_)) => Ok(()),
            (label @ (0 | 1), _) => Err(invalid(
                "entailment example",
                format!("{}: label {label} with misalignment {:?}", self.instance_id, self.misalignment),
            )),
            (label, _) => Err(invalid("entailment example", format!("label {label} not in {{0,1}}"))),
        }
    }
}

pub(crate) fn check_unit(what: &'static str, score: f64) -> Result<(), CoreError> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(invalid(what, format!("{score} outside [0, 1]")))
    }
}

/// Lowercase, trim and collapse internal whitespace runs to one space.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Stable 16-hex-char identifier for a (video, caption, misalignment) triple.
pub fn make_instance_id(video_id: &str, caption: &str, misalignment: MisalignmentType) -> String {
    let mut hasher = Sha256::new();
    hasher.update(normalize_text(video_id).as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_text(caption).as_bytes());
    hasher.update([0x1f]);
    hasher.update(misalignment.token().as_bytes());
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}
