use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::types::MisalignmentType;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("completion is empty")]
    Empty,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` appears more than once")]
    AmbiguousField(&'static str),
}

impl ParseError {
    /// Short counter key for attrition reports.
    pub fn kind(&self) -> String {
        match self {
            ParseError::Empty => "empty".into(),
            ParseError::MissingField(f) => format!("missing:{f}"),
            ParseError::AmbiguousField(f) => format!("ambiguous:{f}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedGeneration {
    pub contrast_caption: String,
    pub source_span: Option<String>,
    pub target_span: Option<String>,
    pub nle: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Input,
    Contrast,
    Source,
    Target,
    Explanation,
}

impl Label {
    fn name(self) -> &'static str {
        match self {
            Label::Input => "Input Sentence",
            Label::Contrast => "Sentence + Misalignment",
            Label::Source => "Source",
            Label::Target => "Target",
            Label::Explanation => "Correct Misalignment",
        }
    }
}

fn label_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?im)^[ \t]*["'`*]*(input sentence|sentence[ \t]*\+[^:\n]*|source|target|correct misalignment)["'`*]*[ \t]*:"#,
        )
        .unwrap()
    })
}

fn classify(label: &str) -> Label {
    let lower = label.to_lowercase();
    if lower.starts_with("input") {
        Label::Input
    } else if lower.starts_with("sentence") {
        Label::Contrast
    } else if lower == "source" {
        Label::Source
    } else if lower == "target" {
        Label::Target
    } else {
        Label::Explanation
    }
}

const QUOTE_PAIRS: &[(&str, &str)] = &[
    ("``", "''"),
    ("``", "\""),
    ("\"", "\""),
    ("“", "”"),
    ("'", "'"),
    ("‘", "’"),
];

fn clean_value(raw: &str) -> String {
    let joined = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    let mut value = joined.trim();
    for (open, close) in QUOTE_PAIRS {
        if value.len() >= open.len() + close.len() && value.starts_with(open) && value.ends_with(close) {
            value = value[open.len()..value.len() - close.len()].trim();
            break;
        }
    }
    value.to_string()
}

/// Extracts the labelled fields of a contrast-generation completion.
///
/// Labels are matched case-insensitively at line starts; a value runs until
/// the next known label. Event-order completions carry no spans, and any
/// span lines they contain are ignored.
pub fn parse_generation(m: MisalignmentType, raw: &str) -> Result<ParsedGeneration, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let matches: Vec<_> = label_regex().captures_iter(raw).collect();
    let mut fields: Vec<(Label, String)> = Vec::with_capacity(matches.len());
    for (i, cap) in matches.iter().enumerate() {
        let whole = cap.get(0).unwrap();
        let end = matches
            .get(i + 1)
            .map_or(raw.len(), |next| next.get(0).unwrap().start());
        fields.push((classify(&cap[1]), clean_value(&raw[whole.end()..end])));
    }

    let take = |label: Label, required: bool| -> Result<Option<String>, ParseError> {
        let mut values = fields.iter().filter(|(l, _)| *l == label);
        let first = values.next();
        if values.next().is_some() {
            return Err(ParseError::AmbiguousField(label.name()));
        }
        match first {
            Some((_, v)) if !v.is_empty() => Ok(Some(v.clone())),
            _ if required => Err(ParseError::MissingField(label.name())),
            _ => Ok(None),
        }
    };

    let spans = m != MisalignmentType::EventOrder;
    let contrast_caption = take(Label::Contrast, true)?.unwrap_or_default();
    let (source_span, target_span) = if spans {
        (take(Label::Source, true)?, take(Label::Target, true)?)
    } else {
        (None, None)
    };
    let nle = take(Label::Explanation, true)?.unwrap_or_default();
    take(Label::Input, false)?;
    Ok(ParsedGeneration {
        contrast_caption,
        source_span,
        target_span,
        nle,
    })
}
