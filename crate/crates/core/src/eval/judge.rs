//! LLM judges: scalar verdicts on single answers and pairwise comparison
//! with seeded presentation-order randomization.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::QuestionId;
use crate::gateway::{ChatRequest, Gateway, GatewayError, Message, RoleTag};
use crate::prompts;

/// Scalar judge families and their scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    /// 1 if the answer agrees with the reference, else 0.
    Correctness,
    /// 0 Irrelevant, 1 Related, 2 Highly relevant, 3 Perfectly relevant.
    Relevance,
    /// Overall quality, integer 1..=10.
    Quality,
}

impl JudgeKind {
    pub fn bounds(&self) -> (i64, i64) {
        match self {
            JudgeKind::Correctness => (0, 1),
            JudgeKind::Relevance => (0, 3),
            JudgeKind::Quality => (1, 10),
        }
    }
}

/// One scalar verdict. `clamped` flags scores the model gave outside the
/// scale, which were clamped to the nearest bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge: JudgeKind,
    pub score: i64,
    pub explanation: String,
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("correctness judging requires a reference answer")]
    MissingReference,
    #[error("no score could be parsed from the judge after {attempts} attempts")]
    Unparseable { attempts: u32 },
    #[error("comparison sides must name different pipelines")]
    IdenticalSides,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Extra attempts after an unparseable judge reply.
pub const JUDGE_RETRIES: u32 = 2;

fn first_integer(text: &str) -> Option<i64> {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    let re = RE.get_or_init(|| regex::Regex::new(r"-?\d+").expect("static regex"));
    re.find(text)?.as_str().parse().ok()
}

/// Ask the scalar judge of the given kind to score an answer. The raw
/// reply is kept as the explanation; out-of-scale scores are clamped and
/// flagged; an unparseable reply is retried with a corrective instruction.
pub fn judge(
    kind: JudgeKind,
    question: &str,
    answer: &str,
    reference: Option<&str>,
    gateway: &Gateway,
) -> Result<JudgeVerdict, JudgeError> {
    let mut messages = match kind {
        JudgeKind::Correctness => {
            let reference = reference.ok_or(JudgeError::MissingReference)?;
            prompts::correctness_judge_messages(question, answer, reference)
        }
        JudgeKind::Relevance => prompts::relevance_judge_messages(question, answer),
        JudgeKind::Quality => prompts::quality_judge_messages(question, answer),
    };
    let attempts = JUDGE_RETRIES + 1;
    for _ in 0..attempts {
        let req = ChatRequest::new(RoleTag::Judge, messages.clone());
        let completion = gateway.complete(&req)?;
        if let Some(raw) = first_integer(&completion.text) {
            let (lo, hi) = kind.bounds();
            let score = raw.clamp(lo, hi);
            return Ok(JudgeVerdict {
                judge: kind,
                score,
                explanation: completion.text,
                clamped: score != raw,
            });
        }
        messages.push(Message::user(format!(
            "Your previous reply contained no score. Reply with a single \
             integer between {} and {}.",
            kind.bounds().0,
            kind.bounds().1
        )));
    }
    Err(JudgeError::Unparseable { attempts })
}

/// Winner of a pairwise battle, from side A's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BattleResult {
    WinA,
    WinB,
    Tie,
    BothUnacceptable,
}

/// One judged pairwise comparison, recorded with the presentation order
/// actually shown to the judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BattleOutcome {
    pub question_id: QuestionId,
    pub side_a: String,
    pub side_b: String,
    pub result: BattleResult,
    pub presented_order_swapped: bool,
}

/// An answer entering a comparison: the pipeline that produced it and its
/// text.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonSide<'a> {
    pub pipeline: &'a str,
    pub answer: &'a str,
}

/// Verdict tokens the comparison judge may emit, relative to the
/// presented order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PresentedVerdict {
    First,
    Second,
    Tie,
    Neither,
}

fn parse_verdict(text: &str) -> Option<PresentedVerdict> {
    let token: String = text
        .trim()
        .split_whitespace()
        .next()?
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_uppercase();
    match token.as_str() {
        "A" => Some(PresentedVerdict::First),
        "B" => Some(PresentedVerdict::Second),
        "TIE" => Some(PresentedVerdict::Tie),
        "NEITHER" => Some(PresentedVerdict::Neither),
        _ => None,
    }
}

/// Compare two answers: a seeded coin decides which side is presented as
/// "Answer A"; the verdict is mapped back through the swap so the recorded
/// result always refers to the true sides.
pub fn compare(
    question_id: &QuestionId,
    question: &str,
    a: ComparisonSide<'_>,
    b: ComparisonSide<'_>,
    gateway: &Gateway,
    seed: u64,
) -> Result<BattleOutcome, JudgeError> {
    if a.pipeline == b.pipeline {
        return Err(JudgeError::IdenticalSides);
    }
    let swapped = ChaCha8Rng::seed_from_u64(seed).gen_bool(0.5);
    let (first, second) = if swapped { (b, a) } else { (a, b) };
    let mut messages = prompts::comparison_messages(question, first.answer, second.answer);

    let attempts = JUDGE_RETRIES + 1;
    for _ in 0..attempts {
        let req = ChatRequest::new(RoleTag::Judge, messages.clone());
        let completion = gateway.complete(&req)?;
        if let Some(verdict) = parse_verdict(&completion.text) {
            let result = match (verdict, swapped) {
                (PresentedVerdict::Tie, _) => BattleResult::Tie,
                (PresentedVerdict::Neither, _) => BattleResult::BothUnacceptable,
                (PresentedVerdict::First, false) | (PresentedVerdict::Second, true) => {
                    BattleResult::WinA
                }
                (PresentedVerdict::First, true) | (PresentedVerdict::Second, false) => {
                    BattleResult::WinB
                }
            };
            return Ok(BattleOutcome {
                question_id: question_id.clone(),
                side_a: a.pipeline.to_owned(),
                side_b: b.pipeline.to_owned(),
                result,
                presented_order_swapped: swapped,
            });
        }
        messages.push(Message::user(
            "Your previous reply was not a verdict. Reply with exactly one \
             token: A, B, TIE, or NEITHER."
                .to_owned(),
        ));
    }
    Err(JudgeError::Unparseable { attempts })
}
