//! Evaluation kit: token metrics, decline metrics, highlight/gold-passage
//! comparison, LLM judges, pairwise battles, Elo ratings, wins tables, and
//! correlation.

pub mod elo;
pub mod judge;
pub mod metrics;
pub mod report;
pub mod tokens;
pub mod wins;

pub use elo::{elo, BattleRecord, EloParams, EloTable};
pub use judge::{
    compare, judge, BattleOutcome, BattleResult, ComparisonSide, JudgeError, JudgeKind,
    JudgeVerdict,
};
pub use metrics::{
    decline_metrics, guessed_question_metrics, highlight_gold_summary, pearson,
    substring_relation, DeclineMetrics, EvalError, GoldHighlightSummary, GuessedQuestionMetrics,
    SubstringRelation,
};
pub use report::{BattleReport, EvalReport, MeanScore, ScoreReport};
pub use tokens::{k_precision, multiset_hits, normalize_tokens, recall, MetricError};
pub use wins::{wins_table, ScoreEntry, WinsTable};
