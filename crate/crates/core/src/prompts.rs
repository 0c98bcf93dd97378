//! All prompt texts used by the pipelines and judges, in one place so the
//! full model-facing surface is reviewable. Builders return ready-to-send
//! message lists; none of the summarizer builders accept a question.

use crate::domain::{Document, Question, DECLINE_MESSAGE};
use crate::gateway::Message;

pub const HIGHLIGHTER_BASELINE_SYSTEM: &str = "\
You select evidence. Given a question and one or more documents, copy the \
passages of the documents that help answer the question, exactly as they \
appear, character for character. Output only the copied passages, one \
passage per paragraph, with a blank line between passages. Do not add \
commentary, numbering, or any text of your own. If nothing in the \
documents is relevant, output nothing.";

pub const HIGHLIGHTER_STRUCTURED_SYSTEM: &str = "\
You select evidence. Given a question and one or more documents, reply \
with a single JSON object with fields \"answer\" (a short answer to the \
question) and \"text_extracts\" (a list of passages copied from the \
documents exactly as they appear, character for character). Copy passages \
verbatim; do not paraphrase inside \"text_extracts\". If nothing in the \
documents is relevant, use an empty list.";

pub const SUMMARIZER_SYSTEM: &str = "\
You are given one or more text excerpts. First guess what question the \
excerpts were selected to answer, then answer that question using only \
the excerpts. Reply with a single JSON object with fields \
\"guessed_question\" (your guess) and \"answer\" (a direct, complete \
answer based strictly on the excerpts).";

/// The vanilla comparator's instruction embeds the canonical decline
/// message so refusals are detectable by exact match.
pub fn vanilla_system() -> String {
    format!(
        "Answer the user's question using only the documents provided. \
         If the documents do not contain the answer, reply exactly: {DECLINE_MESSAGE}"
    )
}

pub const CORRECTNESS_JUDGE_SYSTEM: &str = "\
You grade answers. Given a question, a reference answer, and a candidate \
answer, decide whether the candidate conveys the same facts as the \
reference. Examples: reference \"Paris\" vs candidate \"The capital is \
Paris.\" -> 1; reference \"1969\" vs candidate \"In 1970.\" -> 0; \
reference \"blue and gold\" vs candidate \"blue\" -> 0. Reply with a \
single digit: 1 if the candidate is correct, 0 if it is not.";

pub const RELEVANCE_JUDGE_SYSTEM: &str = "\
You grade how relevant an answer is to a question on a four-point scale: \
0 = Irrelevant, 1 = Related, 2 = Highly relevant, 3 = Perfectly relevant. \
Reply with the single digit only.";

pub const QUALITY_JUDGE_SYSTEM: &str = "\
You grade the overall quality of an answer to a question — completeness, \
clarity, and usefulness — as an integer from 1 (unusable) to 10 \
(excellent). Reply with the integer only.";

pub const COMPARISON_JUDGE_SYSTEM: &str = "\
You compare two answers to the same question. Reply with exactly one \
token: A if answer A is better, B if answer B is better, TIE if both are \
acceptable and equally good, NEITHER if both answers are unacceptable.";

/// Render documents for prompts that are allowed to see them.
fn render_documents(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&format!("Document {}:\n{}\n\n", doc.id, doc.text));
    }
    out
}

pub fn baseline_highlighter_messages(q: &Question, docs: &[Document]) -> Vec<Message> {
    vec![
        Message::system(HIGHLIGHTER_BASELINE_SYSTEM),
        Message::user(format!(
            "Question: {}\n\n{}",
            q.text,
            render_documents(docs)
        )),
    ]
}

pub fn structured_highlighter_messages(q: &Question, docs: &[Document]) -> Vec<Message> {
    vec![
        Message::system(HIGHLIGHTER_STRUCTURED_SYSTEM),
        Message::user(format!(
            "Question: {}\n\n{}",
            q.text,
            render_documents(docs)
        )),
    ]
}

/// Summarizer input: ordinal-marked excerpts, plus full document texts only
/// when the caller opts into extra context. Deliberately no question
/// parameter — the summarizer never sees one.
pub fn summarizer_messages(excerpts: &[&str], context_docs: &[&Document]) -> Vec<Message> {
    let mut user = String::new();
    for (i, text) in excerpts.iter().enumerate() {
        user.push_str(&format!("Excerpt [{}]:\n{}\n\n", i + 1, text));
    }
    for doc in context_docs {
        user.push_str(&format!("Context document {}:\n{}\n\n", doc.id, doc.text));
    }
    vec![Message::system(SUMMARIZER_SYSTEM), Message::user(user)]
}

pub fn vanilla_messages(q: &Question, docs: &[Document]) -> Vec<Message> {
    vec![
        Message::system(vanilla_system()),
        Message::user(format!(
            "Question: {}\n\n{}",
            q.text,
            render_documents(docs)
        )),
    ]
}

pub fn correctness_judge_messages(question: &str, answer: &str, reference: &str) -> Vec<Message> {
    vec![
        Message::system(CORRECTNESS_JUDGE_SYSTEM),
        Message::user(format!(
            "Question: {question}\nReference answer: {reference}\nCandidate answer: {answer}"
        )),
    ]
}

pub fn relevance_judge_messages(question: &str, answer: &str) -> Vec<Message> {
    vec![
        Message::system(RELEVANCE_JUDGE_SYSTEM),
        Message::user(format!("Question: {question}\nAnswer: {answer}")),
    ]
}

pub fn quality_judge_messages(question: &str, answer: &str) -> Vec<Message> {
    vec![
        Message::system(QUALITY_JUDGE_SYSTEM),
        Message::user(format!("Question: {question}\nAnswer: {answer}")),
    ]
}

pub fn comparison_messages(question: &str, answer_a: &str, answer_b: &str) -> Vec<Message> {
    vec![
        Message::system(COMPARISON_JUDGE_SYSTEM),
        Message::user(format!(
            "Question: {question}\n\nAnswer A:\n{answer_a}\n\nAnswer B:\n{answer_b}"
        )),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarizer_prompt_contains_only_excerpts() {
        let msgs = summarizer_messages(&["first excerpt", "second excerpt"], &[]);
        assert_eq!(msgs.len(), 2);
        assert!(msgs[1].content.contains("Excerpt [1]:\nfirst excerpt"));
        assert!(msgs[1].content.contains("Excerpt [2]:\nsecond excerpt"));
        assert!(!msgs[1].content.to_lowercase().contains("question:"));
    }

    #[test]
    fn vanilla_system_embeds_decline_message() {
        assert!(vanilla_system().contains(DECLINE_MESSAGE));
    }

    #[test]
    fn highlighter_prompt_carries_question_and_documents() {
        let q = Question::new("q1", "Who built the tower?").unwrap();
        let d = Document::new("d1", "The tower was built by Anna.").unwrap();
        let msgs = baseline_highlighter_messages(&q, &[d]);
        assert!(msgs[1].content.contains("Who built the tower?"));
        assert!(msgs[1].content.contains("Document d1:"));
    }
}
