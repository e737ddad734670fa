//! Metric primitives: p_yes, rank-sum ROC-AUC and average precision.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::backends::AlignmentLogits;

use super::EvalError;

/// Probability of the "yes" class from the two class scores.
pub fn p_yes(logits: AlignmentLogits) -> Result<f64, EvalError> {
    let AlignmentLogits { s_yes, s_no } = logits;
    let total = s_yes + s_no;
    if !(s_yes.is_finite() && s_no.is_finite()) || s_yes < 0.0 || s_no < 0.0 {
        return Err(EvalError::NonFinite(if s_yes.is_finite() { s_no } else { s_yes }));
    }
    if total <= 0.0 {
        return Err(EvalError::ZeroDenominator);
    }
    Ok(s_yes / total)
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed from average ranks.
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<f64, EvalError> {
    if let Some(&(s, _)) = scored.iter().find(|(s, _)| !s.is_finite()) {
        return Err(EvalError::NonFinite(s));
    }
    let positives = scored.iter().filter(|(_, l)| *l).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::DegenerateLabels { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap_or(Ordering::Equal));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        // ranks are 1-based; tied block i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_positives = order[i..=j].iter().filter(|&&k| scored[k].1).count();
        positive_rank_sum += mean_rank * tied_positives as f64;
        i = j + 1;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Mean over relevant items of precision at the item's rank.
pub fn average_precision<T: Ord>(ranking: &[T], relevant: &BTreeSet<T>) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevant);
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, item) in ranking.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits != relevant.len() {
        return Err(EvalError::RelevantNotRanked {
            missing: relevant.len() - hits,
        });
    }
    Ok(total / hits as f64)
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax_lowest(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}
