//! Binary classification metrics over raw scores.
//!
//! ROC-AUC uses the rank-sum formulation with midranks, so tied scores
//! earn half credit and the result matches the pairwise win-rate
//! definition exactly. AUPR is step-wise average precision with tied
//! scores grouped into one threshold.

use crate::error::DataError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub roc_auc: f64,
    pub f1: f64,
    pub aupr: f64,
}

fn validate(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), DataError> {
    if scores.len() != labels.len() {
        return Err(DataError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DataError::SingleClass);
    }
    Ok((neg, pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, DataError> {
    let (n_neg, n_pos) = validate(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks: every member of a tie block gets the block's average rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// F1 at a decision threshold; scores at or above the threshold predict
/// the positive class. Degenerate precision/recall denominators yield 0.
pub fn f1_score(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, DataError> {
    validate(scores, labels)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (predicted, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Area under the precision-recall curve as step-wise average precision:
/// the recall increment at each distinct threshold times the precision
/// there, summed from the highest threshold down.
pub fn aupr(scores: &[f64], labels: &[u8]) -> Result<f64, DataError> {
    let (_, n_pos) = validate(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut block_tp = 0usize;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            block_tp += usize::from(labels[order[j]] == 1);
            j += 1;
        }
        tp += block_tp;
        seen = j;
        if block_tp > 0 {
            ap += block_tp as f64 / n_pos as f64 * (tp as f64 / seen as f64);
        }
        i = j;
    }
    debug_assert_eq!(seen, scores.len());
    Ok(ap)
}

/// All three metrics at once; `threshold` applies to F1 only.
pub fn compute_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<Metrics, DataError> {
    Ok(Metrics {
        roc_auc: roc_auc(scores, labels)?,
        f1: f1_score(scores, labels, threshold)?,
        aupr: aupr(scores, labels)?,
    })
}
