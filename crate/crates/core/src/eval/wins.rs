//! Wins tables: per judge kind, how often each pipeline's answer received
//! the highest (or tied-highest) score across pipelines on a question.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::QuestionId;
use crate::eval::judge::JudgeKind;

/// One scored item feeding the wins table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub question_id: QuestionId,
    pub pipeline: String,
    pub judge: JudgeKind,
    pub score: i64,
}

/// Per judge kind: win counts per pipeline plus the number of questions
/// excluded because some pipeline had no score.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinsTable {
    pub wins: BTreeMap<JudgeKind, BTreeMap<String, u64>>,
    pub excluded: BTreeMap<JudgeKind, u64>,
}

/// Count highest-or-tied-highest scores per pipeline and judge kind.
/// A question enters a judge's table only when every pipeline has a score
/// for it; otherwise it is excluded and counted.
pub fn wins_table(entries: &[ScoreEntry], pipelines: &[String]) -> WinsTable {
    // (judge, question) → pipeline → score; duplicates keep the last entry.
    let mut by_cell: BTreeMap<(JudgeKind, &QuestionId), BTreeMap<&str, i64>> = BTreeMap::new();
    for e in entries {
        by_cell
            .entry((e.judge, &e.question_id))
            .or_default()
            .insert(e.pipeline.as_str(), e.score);
    }

    let mut table = WinsTable::default();
    for ((judge, _qid), scores) in by_cell {
        if pipelines.iter().any(|p| !scores.contains_key(p.as_str())) {
            *table.excluded.entry(judge).or_insert(0) += 1;
            continue;
        }
        let max = pipelines
            .iter()
            .map(|p| scores[p.as_str()])
            .max()
            .expect("pipelines is non-empty");
        let row = table.wins.entry(judge).or_default();
        for p in pipelines {
            if scores[p.as_str()] == max {
                *row.entry(p.clone()).or_insert(0) += 1;
            } else {
                row.entry(p.clone()).or_insert(0);
            }
        }
    }
    table
}
