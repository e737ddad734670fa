//! Evaluation tasks: entailment AUC, explanation quality, retrieval mAP and
//! recast video QA accuracy.

mod metrics;
mod recast;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, Gateway, GenerationParams};
use crate::types::{ContrastRecord, EntailmentExample, MisalignmentType, VideoRef};

pub use metrics::{argmax_lowest, average_precision, p_yes, roc_auc};
pub use recast::{parse_recast, recast_qa, render_recast_prompt, CHOICE_LETTERS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("need both classes, got {positives} positive and {negatives} negative")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("non-finite or negative score {0}")]
    NonFinite(f64),
    #[error("s_yes + s_no is zero")]
    ZeroDenominator,
    #[error("relevant set is empty")]
    EmptyRelevant,
    #[error("{missing} relevant item(s) absent from the ranking")]
    RelevantNotRanked { missing: usize },
    #[error("query {query_id}: relevant video {video_id} is not a candidate")]
    UnknownRelevant { query_id: String, video_id: String },
    #[error("unknown video {0}")]
    UnknownVideo(String),
    #[error("recast parse failure: {0}")]
    RecastParse(String),
    #[error("{0}")]
    Invalid(String),
}

/// Which positives a per-type AUC is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositiveSet {
    /// Positives sharing an instance id with a negative of the type.
    #[default]
    SameTuple,
    AllPositives,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTask {
    Entailment,
    Nle,
    Retrieval,
    Vqa,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_checksum: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAp {
    pub query_id: String,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaPrediction {
    pub question_id: String,
    pub predicted_index: usize,
    pub answer_index: usize,
    pub correct: bool,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: EvalTask,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_misalignment: BTreeMap<MisalignmentType, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_query: Vec<QueryAp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictions: Vec<VqaPrediction>,
    pub evaluated: usize,
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<InstanceFailure>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    fn new(task: EvalTask, metadata: RunMetadata) -> Self {
        EvalReport {
            task,
            metrics: BTreeMap::new(),
            per_misalignment: BTreeMap::new(),
            per_query: Vec::new(),
            predictions: Vec::new(),
            evaluated: 0,
            excluded: 0,
            failures: Vec::new(),
            metadata,
        }
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task      {}", serde_json::to_value(self.task).unwrap().as_str().unwrap_or(""));
        let _ = writeln!(out, "backend   {}", self.metadata.backend);
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "{name:<16} {value:.4}");
        }
        if !self.per_misalignment.is_empty() {
            let _ = writeln!(out);
            for (m, value) in &self.per_misalignment {
                let _ = writeln!(out, "{:<16} {value:.4}", m.token());
            }
        }
        if !self.per_query.is_empty() {
            let _ = writeln!(out);
            for q in &self.per_query {
                let _ = writeln!(out, "{:<16} {:.4}", q.query_id, q.average_precision);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "evaluated {}  excluded {}", self.evaluated, self.excluded);
        out
    }
}

/// Per-type AUC. Types whose restricted set lacks one of the classes are
/// left out rather than failing the whole breakdown.
pub fn roc_auc_by_misalignment(
    examples: &[EntailmentExample],
    scores: &[f64],
    positives: PositiveSet,
) -> Result<BTreeMap<MisalignmentType, f64>, EvalError> {
    if examples.len() != scores.len() {
        return Err(EvalError::Invalid(format!(
            "{} examples but {} scores",
            examples.len(),
            scores.len()
        )));
    }
    let mut out = BTreeMap::new();
    for m in MisalignmentType::ALL {
        let ids: BTreeSet<&str> = examples
            .iter()
            .filter(|e| e.label == 0 && e.misalignment == Some(m))
            .map(|e| e.instance_id.as_str())
            .collect();
        let scored: Vec<(f64, bool)> = examples
            .iter()
            .zip(scores)
            .filter(|(e, _)| match (e.label, positives) {
                (0, _) => e.misalignment == Some(m),
                (_, PositiveSet::SameTuple) => ids.contains(e.instance_id.as_str()),
                (_, PositiveSet::AllPositives) => true,
            })
            .map(|(e, &s)| (s, e.label == 1))
            .collect();
        match roc_auc(&scored) {
            Ok(auc) => {
                out.insert(m, auc);
            }
            Err(EvalError::DegenerateLabels { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Scores every example with p_yes and reports overall and per-type AUC.
pub fn eval_entailment(
    gateway: &Gateway,
    examples: &[EntailmentExample],
    positives: PositiveSet,
    metadata: RunMetadata,
) -> Result<EvalReport, EvalError> {
    let scores = gateway
        .map(examples, |e| -> Result<f64, EvalError> {
            p_yes(gateway.score_alignment(&e.video, &e.text)?)
        })
        .into_iter()
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let scored: Vec<(f64, bool)> = examples.iter().zip(&scores).map(|(e, &s)| (s, e.label == 1)).collect();
    let mut report = EvalReport::new(EvalTask::Entailment, metadata);
    report.metrics.insert("roc_auc".into(), roc_auc(&scored)?);
    report.per_misalignment = roc_auc_by_misalignment(examples, &scores, positives)?;
    report.evaluated = examples.len();
    Ok(report)
}

/// Generates an explanation per record and compares it to the reference
/// with the NLI scorer and the judge. Failing instances are excluded.
pub fn eval_nle(gateway: &Gateway, records: &[ContrastRecord], metadata: RunMetadata) -> EvalReport {
    let outcomes = gateway.map(records, |r| -> Result<(f64, bool), BackendError> {
        let generated = gateway.generate_nle(&r.video, &r.contrast_caption)?;
        Ok((gateway.score_nli(&r.nle, &generated)?, gateway.judge_entailment(&r.nle, &generated)?))
    });
    let mut report = EvalReport::new(EvalTask::Nle, metadata);
    let mut nli_sum = 0.0;
    let mut judged = 0usize;
    for (r, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok((score, verdict)) => {
                report.evaluated += 1;
                nli_sum += score;
                judged += usize::from(verdict);
            }
            Err(e) => {
                report.excluded += 1;
                report.failures.push(InstanceFailure {
                    id: r.instance_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if report.evaluated > 0 {
        let n = report.evaluated as f64;
        report.metrics.insert("mean_nli".into(), nli_sum / n);
        report.metrics.insert("judge_accuracy".into(), judged as f64 / n);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalQuery {
    pub query_id: String,
    pub text: String,
    pub relevant_video_ids: Vec<String>,
}

/// Ranks candidates by descending score, breaking ties by ascending id.
pub fn rank_candidates(scored: &[(String, f64)]) -> Vec<String> {
    let mut order: Vec<&(String, f64)> = scored.iter().collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    order.into_iter().map(|(id, _)| id.clone()).collect()
}

pub fn eval_retrieval(
    gateway: &Gateway,
    queries: &[RetrievalQuery],
    candidates: &[VideoRef],
    metadata: RunMetadata,
) -> Result<EvalReport, EvalError> {
    let known: BTreeSet<&str> = candidates.iter().map(|v| v.video_id.as_str()).collect();
    if known.len() != candidates.len() {
        return Err(EvalError::Invalid("duplicate candidate video ids".into()));
    }
    for q in queries {
        if q.relevant_video_ids.is_empty() {
            return Err(EvalError::EmptyRelevant);
        }
        if let Some(missing) = q.relevant_video_ids.iter().find(|id| !known.contains(id.as_str())) {
            return Err(EvalError::UnknownRelevant {
                query_id: q.query_id.clone(),
                video_id: missing.clone(),
            });
        }
    }
    let pairs: Vec<(usize, usize)> = (0..queries.len())
        .flat_map(|q| (0..candidates.len()).map(move |v| (q, v)))
        .collect();
    let scores = gateway
        .map(&pairs, |&(q, v)| -> Result<f64, EvalError> {
            p_yes(gateway.score_alignment(&candidates[v], &queries[q].text)?)
        })
        .into_iter()
        .collect::<Result<Vec<f64>, EvalError>>()?;

    let mut report = EvalReport::new(EvalTask::Retrieval, metadata);
    for (qi, q) in queries.iter().enumerate() {
        let scored: Vec<(String, f64)> = candidates
            .iter()
            .enumerate()
            .map(|(vi, v)| (v.video_id.clone(), scores[qi * candidates.len() + vi]))
            .collect();
        let ranking = rank_candidates(&scored);
        let relevant: BTreeSet<String> = q.relevant_video_ids.iter().cloned().collect();
        report.per_query.push(QueryAp {
            query_id: q.query_id.clone(),
            average_precision: average_precision(&ranking, &relevant)?,
        });
    }
    report.evaluated = queries.len();
    if !queries.is_empty() {
        let map = report.per_query.iter().map(|q| q.average_precision).sum::<f64>() / queries.len() as f64;
        report.metrics.insert("map".into(), map);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqaInstance {
    pub question_id: String,
    pub video_id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer_index: usize,
}

/// Recasts each question into five statements, scores them against the
/// video and predicts the best-scoring option. Instances that fail to
/// recast or score are excluded and listed.
pub fn eval_vqa(
    gateway: &Gateway,
    instances: &[VqaInstance],
    videos: &[VideoRef],
    params: &GenerationParams,
    metadata: RunMetadata,
) -> Result<EvalReport, EvalError> {
    let by_id: HashMap<&str, &VideoRef> = videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    for inst in instances {
        if inst.choices.len() != 5 || inst.answer_index >= 5 {
            return Err(EvalError::Invalid(format!(
                "question {}: need 5 choices and an answer index below 5",
                inst.question_id
            )));
        }
        if !by_id.contains_key(inst.video_id.as_str()) {
            return Err(EvalError::UnknownVideo(inst.video_id.clone()));
        }
    }
    let outcomes = gateway.map(instances, |inst| -> Result<Vec<f64>, EvalError> {
        let video = by_id[inst.video_id.as_str()];
        let statements = recast_qa(gateway, &inst.question, &inst.choices, params)?;
        statements
            .iter()
            .map(|s| p_yes(gateway.score_alignment(video, s)?))
            .collect()
    });

    let mut report = EvalReport::new(EvalTask::Vqa, metadata);
    for (inst, outcome) in instances.iter().zip(outcomes) {
        match outcome {
            Ok(scores) => {
                let predicted_index = argmax_lowest(&scores).unwrap_or(0);
                report.predictions.push(VqaPrediction {
                    question_id: inst.question_id.clone(),
                    predicted_index,
                    answer_index: inst.answer_index,
                    correct: predicted_index == inst.answer_index,
                    scores,
                });
                report.evaluated += 1;
            }
            Err(e) => {
                report.excluded += 1;
                report.failures.push(InstanceFailure {
                    id: inst.question_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if report.evaluated > 0 {
        let correct = report.predictions.iter().filter(|p| p.correct).count();
        report
            .metrics
            .insert("accuracy".into(), correct as f64 / report.evaluated as f64);
    }
    Ok(report)
}
