//! Temporal-difficulty scoring, hard-caption selection, the Human-Hard
//! subset filter, and rule-based misalignment assignment.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{lexicon, BackendError, EventClass, Gateway, PosTag, PosTags};
use crate::types::{make_instance_id, normalize_text, CaptionInstance, MisalignmentType, Source};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CurationError {
    #[error("no frame scores supplied")]
    EmptyScores,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("caption `{caption}` of video {video_id} has no a_vle score")]
    MissingScore { video_id: String, caption: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("caption is empty")]
    EmptyCaption,
    #[error("no eligible misalignment type for `{0}` after POS constraints")]
    NoEligibleType(String),
}

fn check_score(score: f64) -> Result<f64, CurationError> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(CurationError::ScoreOutOfRange(score))
    }
}

fn require_score(c: &CaptionInstance) -> Result<f64, CurationError> {
    let score = c.a_vle.ok_or_else(|| CurationError::MissingScore {
        video_id: c.video.video_id.clone(),
        caption: c.caption.clone(),
    })?;
    check_score(score)
}

/// Video-text alignment as the best single-frame entailment score.
pub fn video_text_alignment_score(frame_scores: &[f64]) -> Result<f64, CurationError> {
    let mut best: Option<f64> = None;
    for &s in frame_scores {
        let s = check_score(s)?;
        best = Some(best.map_or(s, |b| b.max(s)));
    }
    best.ok_or(CurationError::EmptyScores)
}

/// Keeps the `k` lowest-scored captions of one video. Ties go to the
/// lexicographically smaller normalized caption, then to input order.
/// The result is ordered by that same ranking.
pub fn select_hard_captions(
    captions: &[CaptionInstance],
    k: usize,
) -> Result<Vec<CaptionInstance>, CurationError> {
    let mut ranked = captions
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((require_score(c)?, normalize_text(&c.caption), i)))
        .collect::<Result<Vec<_>, CurationError>>()?;
    ranked.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(_, _, i)| captions[i].clone())
        .collect())
}

/// Applies [`select_hard_captions`] per video. Videos keep their order of
/// first appearance.
pub fn select_hard_corpus(
    captions: &[CaptionInstance],
    k: usize,
) -> Result<Vec<CaptionInstance>, CurationError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<CaptionInstance>> = HashMap::new();
    for c in captions {
        let id = c.video.video_id.as_str();
        groups
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(c.clone());
    }
    let mut out = Vec::with_capacity(captions.len());
    for id in order {
        out.extend(select_hard_captions(&groups[id], k)?);
    }
    Ok(out)
}

/// Fraction of scores strictly below `threshold`.
pub fn temporal_challenge_stats(scores: &[f64], threshold: f64) -> Result<f64, CurationError> {
    if scores.is_empty() {
        return Err(CurationError::EmptyCorpus);
    }
    let mut challenging = 0usize;
    for &s in scores {
        if check_score(s)? < threshold {
            challenging += 1;
        }
    }
    Ok(challenging as f64 / scores.len() as f64)
}

/// Which side of the threshold forms the Human-Hard subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HumanHardDirection {
    /// Keep `a_vle < threshold`: no single frame entails the caption.
    #[default]
    RetainBelow,
    /// Keep `a_vle >= threshold`, the literal reading of "filter out < t".
    RetainAtOrAbove,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanHardSplit {
    pub retained: Vec<CaptionInstance>,
    pub discarded: usize,
}

pub fn filter_human_hard(
    records: &[CaptionInstance],
    threshold: f64,
    direction: HumanHardDirection,
) -> Result<HumanHardSplit, CurationError> {
    let mut retained = Vec::new();
    let mut discarded = 0;
    for r in records {
        let score = require_score(r)?;
        let keep = match direction {
            HumanHardDirection::RetainBelow => score < threshold,
            HumanHardDirection::RetainAtOrAbove => score >= threshold,
        };
        if keep {
            retained.push(r.clone());
        } else {
            discarded += 1;
        }
    }
    Ok(HumanHardSplit { retained, discarded })
}

/// Whether the event-count classification gates event-order assignment for
/// temporally-challenging captions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventGatePolicy {
    /// Only challenging captions describing multiple events get event-order.
    #[default]
    MultipleOnly,
    /// Every challenging caption gets event-order.
    AllChallenging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentContext {
    pub source: Source,
    pub challenge_flag: bool,
    /// Consulted only when `challenge_flag` is set.
    pub event_class: Option<EventClass>,
    pub pos_tags: PosTags,
    pub rng_seed: u64,
    pub event_gate: EventGatePolicy,
}

/// Spatial-relation keywords; phrases precede the single words they contain.
pub const RELATION_KEYWORDS: &[&str] = &[
    "in front of",
    "top of",
    "left of",
    "right of",
    "far away",
    "above",
    "below",
    "behind",
    "under",
    "inside",
    "outside",
    "beneath",
    "upwards",
    "downwards",
    "up",
    "down",
    "towards",
];

pub const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

fn relation_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alternation = RELATION_KEYWORDS
            .iter()
            .map(|k| regex::escape(k))
            .collect::<Vec<_>>()
            .join("|");
        Regex::new(&format!(r"\b(?:{alternation})\b")).unwrap()
    })
}

fn count_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"\b(?:{}|[0-9]+)\b", NUMBER_WORDS.join("|"))).unwrap())
}

/// First relation keyword found in the caption, if any.
pub fn relation_keyword(caption: &str) -> Option<&'static str> {
    let normalized = normalize_text(caption);
    let found = relation_regex().find(&normalized)?;
    RELATION_KEYWORDS.iter().copied().find(|k| *k == found.as_str())
}

/// Number word one to ten, or a standalone digit token.
pub fn count_token(caption: &str) -> Option<String> {
    let normalized = normalize_text(caption);
    count_regex().find(&normalized).map(|m| m.as_str().to_string())
}

/// Per-caption seed, independent of processing order.
pub fn caption_seed(global_seed: u64, video_id: &str, caption: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(normalize_text(video_id).as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_text(caption).as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn pos_allows(m: MisalignmentType, tags: &PosTags) -> bool {
    match m {
        MisalignmentType::Attribute => tags.contains(&PosTag::Adj),
        MisalignmentType::Action => tags.contains(&PosTag::Verb),
        MisalignmentType::Object => tags.contains(&PosTag::Noun),
        _ => true,
    }
}

/// Candidate pool before sampling, after POS exclusion.
pub fn eligible_types(caption: &str, ctx: &AssignmentContext) -> Vec<MisalignmentType> {
    use MisalignmentType::*;
    if relation_keyword(caption).is_some() {
        return vec![Relation];
    }
    if count_token(caption).is_some() {
        return vec![Count];
    }
    let pool: &[MisalignmentType] = if ctx.source == Source::Tempo {
        &[Object, Action, Attribute, Hallucination, EventOrder]
    } else if ctx.challenge_flag
        && (ctx.event_gate == EventGatePolicy::AllChallenging
            || ctx.event_class == Some(EventClass::Multiple))
    {
        &[EventOrder]
    } else {
        &[Object, Action, Attribute, Hallucination]
    };
    pool.iter()
        .copied()
        .filter(|m| pos_allows(*m, &ctx.pos_tags))
        .collect()
}

pub fn assign_misalignment(
    caption: &str,
    ctx: &AssignmentContext,
) -> Result<MisalignmentType, CurationError> {
    if normalize_text(caption).is_empty() {
        return Err(CurationError::EmptyCaption);
    }
    let eligible = eligible_types(caption, ctx);
    match eligible.len() {
        0 => Err(CurationError::NoEligibleType(caption.to_string())),
        1 => Ok(eligible[0]),
        n => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.rng_seed);
            Ok(eligible[rng.random_range(0..n)])
        }
    }
}

/// A caption with its assigned misalignment type, ready for generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedCaption {
    pub instance_id: String,
    #[serde(flatten)]
    pub instance: CaptionInstance,
    pub misalignment: MisalignmentType,
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Curation(#[from] CurationError),
}

/// Scores every caption by its best frame and flags it challenging when
/// that score is below `threshold`.
pub fn score_corpus(
    gateway: &Gateway,
    captions: &[CaptionInstance],
    threshold: f64,
) -> Result<Vec<CaptionInstance>, StageError> {
    gateway
        .map(captions, |c| -> Result<CaptionInstance, StageError> {
            let frame_scores = c
                .video
                .frames
                .iter()
                .map(|f| gateway.score_frame_entailment(f, &c.caption))
                .collect::<Result<Vec<_>, _>>()?;
            let a_vle = video_text_alignment_score(&frame_scores)?;
            Ok(CaptionInstance {
                a_vle: Some(a_vle),
                challenge_flag: Some(a_vle < threshold),
                ..c.clone()
            })
        })
        .into_iter()
        .collect()
}

/// Where POS tags come from during assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosMode {
    /// Built-in word lists, no backend call.
    #[default]
    Lexicon,
    /// The backend's `pos` endpoint.
    Backend,
}

/// Assigns a misalignment type to every caption. Event classification is
/// requested only for challenging non-TEMPO captions under the
/// multiple-only gate.
pub fn assign_corpus(
    gateway: &Gateway,
    captions: &[CaptionInstance],
    global_seed: u64,
    event_gate: EventGatePolicy,
    pos_mode: PosMode,
) -> Result<Vec<AssignedCaption>, StageError> {
    gateway
        .map(captions, |c| -> Result<AssignedCaption, StageError> {
            let challenge_flag = c.challenge_flag.unwrap_or(false);
            let needs_events = challenge_flag
                && c.video.source != Source::Tempo
                && event_gate == EventGatePolicy::MultipleOnly
                && relation_keyword(&c.caption).is_none()
                && count_token(&c.caption).is_none();
            let event_class = if needs_events {
                Some(gateway.classify_event_count(&c.caption)?)
            } else {
                None
            };
            let pos_tags = match pos_mode {
                PosMode::Lexicon => lexicon::tag(&c.caption),
                PosMode::Backend => gateway.tag_pos(&c.caption)?,
            };
            let ctx = AssignmentContext {
                source: c.video.source,
                challenge_flag,
                event_class,
                pos_tags,
                rng_seed: caption_seed(global_seed, &c.video.video_id, &c.caption),
                event_gate,
            };
            let misalignment = assign_misalignment(&c.caption, &ctx)?;
            Ok(AssignedCaption {
                instance_id: make_instance_id(&c.video.video_id, &c.caption, misalignment),
                instance: c.clone(),
                misalignment,
            })
        })
        .into_iter()
        .collect()
}
