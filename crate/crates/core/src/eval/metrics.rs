//! Aggregate measurements over pipeline results: decline quality,
//! highlight/gold-passage containment, guessed-question fidelity, and
//! correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DatasetRecord, DocumentLookup, HighlightSet, PipelineAnswer, QuestionId};
use crate::eval::tokens::{k_precision, recall};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("result {0} has no matching dataset record")]
    UnmatchedResult(QuestionId),
    #[error("gold passage is empty")]
    EmptyGoldPassage,
    #[error("series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two points")]
    TooFewPoints,
    #[error("correlation is undefined for a constant series")]
    ConstantSeries,
}

/// Confusion-matrix counts and derived precision/recall/F1 for the
/// decide-to-decline behavior. Positives are unanswerable questions; a
/// decline is a positive prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclineMetrics {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Score declines against the dataset's unanswerable labels. Every result
/// must match a record by id; records without results are simply not
/// scored.
pub fn decline_metrics(
    results: &[PipelineAnswer],
    records: &[DatasetRecord],
) -> Result<DeclineMetrics, EvalError> {
    let unanswerable: BTreeMap<&QuestionId, bool> =
        records.iter().map(|r| (&r.id, r.unanswerable)).collect();
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for result in results {
        let &is_unanswerable = unanswerable
            .get(&result.question_id)
            .ok_or_else(|| EvalError::UnmatchedResult(result.question_id.clone()))?;
        match (result.declined, is_unanswerable) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(DeclineMetrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        precision,
        recall,
        f1,
    })
}

/// How the highlighted text relates to the gold passage, compared after
/// whitespace collapsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstringRelation {
    Equal,
    /// The gold passage occurs inside the highlighted text.
    PassageIsSubstring,
    /// The highlighted text occurs inside the gold passage.
    PassageIsSuperstring,
    Neither,
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Classify the concatenated highlight text against the gold passage.
/// An empty highlight set is `Neither`: nothing was highlighted, so no
/// containment claim is meaningful.
pub fn substring_relation(
    hs: &HighlightSet,
    gold_passage: &str,
) -> Result<SubstringRelation, EvalError> {
    let gold = collapse_whitespace(gold_passage);
    if gold.is_empty() {
        return Err(EvalError::EmptyGoldPassage);
    }
    let joined = collapse_whitespace(
        &hs.spans
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" "),
    );
    if joined.is_empty() {
        return Ok(SubstringRelation::Neither);
    }
    Ok(if joined == gold {
        SubstringRelation::Equal
    } else if joined.contains(&gold) {
        SubstringRelation::PassageIsSubstring
    } else if gold.contains(&joined) {
        SubstringRelation::PassageIsSuperstring
    } else {
        SubstringRelation::Neither
    })
}

/// Per-pipeline comparison of highlighted text against gold passages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldHighlightSummary {
    /// Results with highlights evaluated against a gold passage.
    pub total: u64,
    /// Results whose recorded spans no longer resolved against the store.
    pub excluded: u64,
    pub relations: BTreeMap<SubstringRelation, u64>,
    /// Results contributing to the token-overlap means (both sides yielded
    /// at least one token).
    pub token_pairs: u64,
    /// Mean fraction of highlighted tokens present in the gold passage.
    pub mean_k_precision: f64,
    /// Mean fraction of gold-passage tokens present in the highlight.
    pub mean_recall: f64,
}

/// Compare each pipeline's highlighted text with the gold passages.
/// Results without highlights (for example, the single-prompt comparator)
/// and records without a gold passage are skipped; an empty map means no
/// (highlight, gold) pair existed at all, which callers should surface as
/// a notice rather than an error.
pub fn highlight_gold_summary(
    results: &[PipelineAnswer],
    records: &[DatasetRecord],
    store: &impl DocumentLookup,
) -> Result<BTreeMap<String, GoldHighlightSummary>, EvalError> {
    let gold: BTreeMap<&QuestionId, &str> = records
        .iter()
        .filter_map(|r| r.gold_passage.as_deref().map(|g| (&r.id, g)))
        .collect();
    let known: BTreeMap<&QuestionId, ()> = records.iter().map(|r| (&r.id, ())).collect();
    let mut sums: BTreeMap<String, (GoldHighlightSummary, f64, f64)> = BTreeMap::new();
    for result in results {
        if !known.contains_key(&result.question_id) {
            return Err(EvalError::UnmatchedResult(result.question_id.clone()));
        }
        let (Some(spans), Some(passage)) = (&result.highlights, gold.get(&result.question_id))
        else {
            continue;
        };
        let (summary, p_sum, r_sum) = sums.entry(result.pipeline_name.clone()).or_default();
        summary.total += 1;
        let Ok(hs) = HighlightSet::resolve(spans, store) else {
            summary.excluded += 1;
            continue;
        };
        let relation = substring_relation(&hs, passage)?;
        *summary.relations.entry(relation).or_default() += 1;
        let joined = hs
            .spans
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if let (Ok(p), Ok(r)) = (k_precision(&joined, passage), recall(passage, &joined)) {
            summary.token_pairs += 1;
            *p_sum += p;
            *r_sum += r;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(pipeline, (mut summary, p_sum, r_sum))| {
            let denom = summary.token_pairs.max(1) as f64;
            summary.mean_k_precision = p_sum / denom;
            summary.mean_recall = r_sum / denom;
            (pipeline, summary)
        })
        .collect())
}

/// Token-metric summary of guessed questions against the true questions,
/// per pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GuessedQuestionMetrics {
    /// Results that contributed to the means.
    pub n: u64,
    /// Results without a usable guessed question (absent, or yielding no
    /// tokens on either side).
    pub excluded: u64,
    pub mean_k_precision: f64,
    pub mean_recall: f64,
}

/// K-Precision and Recall of each pipeline's guessed questions with
/// respect to the true questions. Results without a guessed question are
/// excluded and counted.
pub fn guessed_question_metrics(
    results: &[PipelineAnswer],
    records: &[DatasetRecord],
) -> Result<BTreeMap<String, GuessedQuestionMetrics>, EvalError> {
    let questions: BTreeMap<&QuestionId, &str> = records
        .iter()
        .map(|r| (&r.id, r.question.as_str()))
        .collect();
    let mut sums: BTreeMap<String, (u64, u64, f64, f64)> = BTreeMap::new();
    for result in results {
        let question = questions
            .get(&result.question_id)
            .ok_or_else(|| EvalError::UnmatchedResult(result.question_id.clone()))?;
        let slot = sums.entry(result.pipeline_name.clone()).or_default();
        let Some(guess) = result.guessed_question.as_deref() else {
            slot.1 += 1;
            continue;
        };
        match (k_precision(guess, question), recall(question, guess)) {
            (Ok(p), Ok(r)) => {
                slot.0 += 1;
                slot.2 += p;
                slot.3 += r;
            }
            _ => slot.1 += 1,
        }
    }
    Ok(sums
        .into_iter()
        .map(|(pipeline, (n, excluded, p_sum, r_sum))| {
            let denom = n.max(1) as f64;
            (
                pipeline,
                GuessedQuestionMetrics {
                    n,
                    excluded,
                    mean_k_precision: p_sum / denom,
                    mean_recall: r_sum / denom,
                },
            )
        })
        .collect())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x).powi(2);
        var_y += (y - mean_y).powi(2);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(EvalError::ConstantSeries);
    }
    Ok(cov / (var_x * var_y).sqrt())
}
