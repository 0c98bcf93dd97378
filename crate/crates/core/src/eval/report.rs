//! Deterministic, serializable summaries written at the end of evaluation
//! runs.
//!
//! Reports carry no timestamps, timings, or other run-local noise, and all
//! maps are ordered, so identical inputs serialize to byte-identical files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eval::elo::{elo, BattleRecord, EloParams};
use crate::eval::judge::{BattleOutcome, JudgeKind};
use crate::eval::metrics::{DeclineMetrics, GoldHighlightSummary, GuessedQuestionMetrics};
use crate::eval::wins::{wins_table, ScoreEntry, WinsTable};

/// Elo ratings plus per-pipeline battle tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleReport {
    pub pipelines: Vec<String>,
    pub battle_count: u64,
    pub params: EloParams,
    pub ratings: BTreeMap<String, f64>,
    /// wins / (wins + losses): ties and both-unacceptable verdicts are
    /// omitted. `None` for a pipeline with no decisive battles.
    pub win_percentages: BTreeMap<String, Option<f64>>,
    pub records: BTreeMap<String, BattleRecord>,
}

impl BattleReport {
    pub fn from_battles(
        pipelines: &[String],
        battles: &[BattleOutcome],
        params: &EloParams,
    ) -> Self {
        let table = elo(pipelines, battles, params);
        let win_percentages = table
            .records
            .iter()
            .map(|(name, record)| (name.clone(), record.win_percentage()))
            .collect();
        Self {
            pipelines: pipelines.to_vec(),
            battle_count: battles.len() as u64,
            params: params.clone(),
            ratings: table.ratings,
            win_percentages,
            records: table.records,
        }
    }
}

/// Mean of one judge's scores for one pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanScore {
    pub n: u64,
    pub mean: f64,
}

/// Per-judge score means and highest-or-tied-highest wins tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mean_scores: BTreeMap<JudgeKind, BTreeMap<String, MeanScore>>,
    pub wins: WinsTable,
}

impl ScoreReport {
    pub fn from_entries(entries: &[ScoreEntry], pipelines: &[String]) -> Self {
        let mut sums: BTreeMap<JudgeKind, BTreeMap<String, (u64, i64)>> = BTreeMap::new();
        for entry in entries {
            let (n, total) = sums
                .entry(entry.judge)
                .or_default()
                .entry(entry.pipeline.clone())
                .or_default();
            *n += 1;
            *total += entry.score;
        }
        let mean_scores = sums
            .into_iter()
            .map(|(judge, by_pipeline)| {
                let means = by_pipeline
                    .into_iter()
                    .map(|(pipeline, (n, total))| {
                        (
                            pipeline,
                            MeanScore {
                                n,
                                mean: total as f64 / n as f64,
                            },
                        )
                    })
                    .collect();
                (judge, means)
            })
            .collect();
        Self {
            mean_scores,
            wins: wins_table(entries, pipelines),
        }
    }
}

/// Top-level report for an evaluation run. Sections are optional so the
/// same shape serves battle-only and judge-only runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pipelines: Vec<String>,
    pub question_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battles: Option<BattleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decline: Option<BTreeMap<String, DeclineMetrics>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guessed_question: Option<BTreeMap<String, GuessedQuestionMetrics>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlight_gold: Option<BTreeMap<String, GoldHighlightSummary>>,
}

impl EvalReport {
    pub fn new(pipelines: Vec<String>, question_count: u64) -> Self {
        Self {
            pipelines,
            question_count,
            battles: None,
            scores: None,
            decline: None,
            guessed_question: None,
            highlight_gold: None,
        }
    }

    /// Serialize with a stable layout (pretty JSON plus trailing newline).
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report is serializable");
        out.push('\n');
        out
    }
}
