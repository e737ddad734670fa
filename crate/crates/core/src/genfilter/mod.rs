//! Contrast-caption generation: prompt rendering, completion parsing, and
//! the two NLI filters (contradiction and explanation faithfulness).

mod parse;
pub mod prompts;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, Gateway, GenerationParams};
use crate::curation::AssignedCaption;
use crate::types::{normalize_text, ContrastRecord, FilterScores};

pub use parse::{parse_generation, ParseError, ParsedGeneration};
pub use prompts::{contrast_label, render_prompt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "score", rename_all = "lowercase")]
pub enum FilterDecision {
    Keep(f64),
    Drop(f64),
}

impl FilterDecision {
    pub fn score(self) -> f64 {
        match self {
            FilterDecision::Keep(s) | FilterDecision::Drop(s) => s,
        }
    }

    pub fn is_keep(self) -> bool {
        matches!(self, FilterDecision::Keep(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    /// Drop when NLI(caption, contrast) is strictly above this.
    pub contrast_drop_above: f64,
    /// Drop when NLI(premise, explanation) is strictly below this.
    pub nle_drop_below: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            contrast_drop_above: 0.5,
            nle_drop_below: 0.6,
        }
    }
}

pub fn contrast_decision(score: f64, drop_above: f64) -> FilterDecision {
    if score > drop_above {
        FilterDecision::Drop(score)
    } else {
        FilterDecision::Keep(score)
    }
}

pub fn nle_decision(score: f64, drop_below: f64) -> FilterDecision {
    if score < drop_below {
        FilterDecision::Drop(score)
    } else {
        FilterDecision::Keep(score)
    }
}

/// Drops contrast captions the NLI model judges entailed by the caption.
pub fn contrast_contradiction_filter(
    gateway: &Gateway,
    caption: &str,
    contrast: &str,
    drop_above: f64,
) -> Result<FilterDecision, BackendError> {
    Ok(contrast_decision(gateway.score_nli(caption, contrast)?, drop_above))
}

pub const PREMISE_PREFIX: &str = "Expected Caption: ";
pub const PREMISE_INFIX: &str = " Actual Caption: ";
pub const HYPOTHESIS_PREFIX: &str = "Difference between Expected and Actual Caption: ";

/// NLI premise built from both captions, plus the hypothesis prefix the
/// explanation is appended to.
pub fn format_nle_premise(caption: &str, contrast: &str) -> (String, &'static str) {
    (
        format!("{PREMISE_PREFIX}{caption}{PREMISE_INFIX}{contrast}"),
        HYPOTHESIS_PREFIX,
    )
}

pub fn nle_hypothesis(explanation: &str) -> String {
    format!("{HYPOTHESIS_PREFIX}{explanation}")
}

/// Drops explanations not entailed by the caption/contrast premise.
pub fn nle_faithfulness_filter(
    gateway: &Gateway,
    caption: &str,
    contrast: &str,
    explanation: &str,
    drop_below: f64,
) -> Result<FilterDecision, BackendError> {
    let (premise, _) = format_nle_premise(caption, contrast);
    let score = gateway.score_nli(&premise, &nle_hypothesis(explanation))?;
    Ok(nle_decision(score, drop_below))
}

/// Attrition counters for the generation stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub attempted: usize,
    pub parsed: usize,
    pub empty_completions: usize,
    pub unchanged_contrast: usize,
    pub parse_failures: BTreeMap<String, usize>,
}

enum Outcome {
    Record(Box<ContrastRecord>),
    Empty,
    Unchanged,
    Unparsed(ParseError),
}

/// Prompts the generator for every assigned caption and parses the
/// completions. Unusable completions are counted, never fatal; transport
/// and fixture errors abort the stage.
pub fn generate_contrasts(
    gateway: &Gateway,
    assigned: &[AssignedCaption],
    params: &GenerationParams,
) -> Result<(Vec<ContrastRecord>, GenerationReport), BackendError> {
    let outcomes = gateway.map(assigned, |a| -> Result<Outcome, BackendError> {
        let prompt = render_prompt(a.misalignment, &a.instance.caption);
        let raw = match gateway.generate(&prompt, params) {
            Ok(raw) => raw,
            Err(BackendError::EmptyCompletion { .. }) => return Ok(Outcome::Empty),
            Err(e) => return Err(e),
        };
        let parsed = match parse_generation(a.misalignment, &raw) {
            Ok(p) => p,
            Err(e) => return Ok(Outcome::Unparsed(e)),
        };
        if normalize_text(&parsed.contrast_caption) == normalize_text(&a.instance.caption) {
            return Ok(Outcome::Unchanged);
        }
        Ok(Outcome::Record(Box::new(ContrastRecord {
            instance_id: a.instance_id.clone(),
            video: a.instance.video.clone(),
            caption: a.instance.caption.clone(),
            contrast_caption: parsed.contrast_caption,
            nle: parsed.nle,
            misalignment: a.misalignment,
            source_span: parsed.source_span,
            target_span: parsed.target_span,
            split: a.instance.split,
            filter_scores: FilterScores::default(),
        })))
    });

    let mut report = GenerationReport {
        attempted: assigned.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Outcome::Record(r) => {
                report.parsed += 1;
                records.push(*r);
            }
            Outcome::Empty => report.empty_completions += 1,
            Outcome::Unchanged => report.unchanged_contrast += 1,
            Outcome::Unparsed(e) => *report.parse_failures.entry(e.kind()).or_default() += 1,
        }
    }
    Ok((records, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub instance_id: String,
    pub filter: String,
    pub score: f64,
}

/// Attrition counters for the filtering stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub contrast_dropped: usize,
    pub nle_dropped: usize,
    pub kept: usize,
    pub dropped: Vec<DroppedRecord>,
}

/// Runs the contradiction filter, then the explanation filter, recording
/// both scores on kept records.
pub fn apply_filters(
    gateway: &Gateway,
    records: &[ContrastRecord],
    thresholds: &FilterThresholds,
) -> Result<(Vec<ContrastRecord>, FilterReport), BackendError> {
    let decisions = gateway.map(records, |r| -> Result<(FilterDecision, Option<FilterDecision>), BackendError> {
        let contrast = contrast_contradiction_filter(
            gateway,
            &r.caption,
            &r.contrast_caption,
            thresholds.contrast_drop_above,
        )?;
        if !contrast.is_keep() {
            return Ok((contrast, None));
        }
        let nle = nle_faithfulness_filter(
            gateway,
            &r.caption,
            &r.contrast_caption,
            &r.nle,
            thresholds.nle_drop_below,
        )?;
        Ok((contrast, Some(nle)))
    });

    let mut report = FilterReport {
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for (record, decision) in records.iter().zip(decisions) {
        let (contrast, nle) = decision?;
        match nle {
            None => {
                report.contrast_dropped += 1;
                report.dropped.push(DroppedRecord {
                    instance_id: record.instance_id.clone(),
                    filter: "contrast".into(),
                    score: contrast.score(),
                });
            }
            Some(FilterDecision::Drop(score)) => {
                report.nle_dropped += 1;
                report.dropped.push(DroppedRecord {
                    instance_id: record.instance_id.clone(),
                    filter: "nle".into(),
                    score,
                });
            }
            Some(FilterDecision::Keep(score)) => {
                let mut r = record.clone();
                r.filter_scores = FilterScores {
                    contrast_nli: Some(contrast.score()),
                    nle_nli: Some(score),
                };
                kept.push(r);
            }
        }
    }
    report.kept = kept.len();
    report.dropped.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::scripted::PairScoreEntry;
    use crate::backends::{ScriptedBackend, ScriptedFixture};
    use std::sync::Arc;

    fn nli_gateway(entries: &[(&str, &str, f64)]) -> Gateway {
        let fixture = ScriptedFixture {
            nli: entries
                .iter()
                .map(|(p, h, s)| PairScoreEntry {
                    premise: p.to_string(),
                    hypothesis: h.to_string(),
                    score: *s,
                })
                .collect(),
            ..Default::default()
        };
        Gateway::new(Arc::new(ScriptedBackend::from_fixture("nli", fixture).unwrap()), 2)
    }

    #[test]
    fn contrast_filter_drops_non_contradictions() {
        let gw = nli_gateway(&[
            ("a person riding a mustang", "a person riding a car", 0.8),
            ("t", "half", 0.5),
            ("t", "low", 0.2),
        ]);
        assert_eq!(
            contrast_contradiction_filter(&gw, "a person riding a mustang", "a person riding a car", 0.5).unwrap(),
            FilterDecision::Drop(0.8)
        );
        assert_eq!(contrast_contradiction_filter(&gw, "t", "half", 0.5).unwrap(), FilterDecision::Keep(0.5));
        assert_eq!(contrast_contradiction_filter(&gw, "t", "low", 0.5).unwrap(), FilterDecision::Keep(0.2));
    }

    #[test]
    fn premise_format() {
        let (premise, prefix) =
            format_nle_premise("three friends traveling together", "two friends are traveling together");
        assert_eq!(
            premise,
            "Expected Caption: three friends traveling together Actual Caption: two friends are traveling together"
        );
        assert_eq!(
            format!("{prefix}two friends are not traveling together"),
            "Difference between Expected and Actual Caption: two friends are not traveling together"
        );
        assert_eq!(
            nle_hypothesis("two friends are not traveling together"),
            "Difference between Expected and Actual Caption: two friends are not traveling together"
        );
    }

    #[test]
    fn nle_filter_boundaries() {
        let t = "three friends traveling together";
        let c = "two friends are traveling together";
        let (premise, _) = format_nle_premise(t, c);
        let gw = nli_gateway(&[
            (&premise, &nle_hypothesis("e059"), 0.59),
            (&premise, &nle_hypothesis("e060"), 0.60),
            (&premise, &nle_hypothesis("two friends are not traveling together"), 0.3),
        ]);
        assert_eq!(nle_faithfulness_filter(&gw, t, c, "e059", 0.6).unwrap(), FilterDecision::Drop(0.59));
        assert_eq!(nle_faithfulness_filter(&gw, t, c, "e060", 0.6).unwrap(), FilterDecision::Keep(0.60));
        assert!(!nle_faithfulness_filter(&gw, t, c, "two friends are not traveling together", 0.6)
            .unwrap()
            .is_keep());
    }

    #[test]
    fn decisions_at_boundaries() {
        assert!(!contrast_decision(0.51, 0.5).is_keep());
        assert!(contrast_decision(0.50, 0.5).is_keep());
        assert!(!nle_decision(0.59, 0.6).is_keep());
        assert!(nle_decision(0.60, 0.6).is_keep());
    }
}
