//! File output with an explicit overwrite gate, plus JSONL round-trip
//! helpers for answers, verdicts, and battle logs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Write `contents` to `path`, creating parent directories. Refuses to
/// replace an existing file unless `overwrite` is set.
pub fn write_text(path: &Path, contents: &str, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        bail!(
            "{} already exists; pass --overwrite to replace it",
            path.display()
        );
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create directory {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Serialize items as JSONL in input order. An empty slice produces an
/// empty (but valid) file.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T], overwrite: bool) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).context("cannot serialize record")?);
        out.push('\n');
    }
    write_text(path, &out, overwrite)
}

/// Read a JSONL file back into values; blank lines are skipped and parse
/// failures name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(line)
                .with_context(|| format!("{} line {}", path.display(), idx + 1))?,
        );
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hisum_core::domain::{PipelineAnswer, QuestionId, Span, TokenUsage};
    use hisum_core::DocumentId;

    fn answers(n: usize) -> Vec<PipelineAnswer> {
        (0..n)
            .map(|i| PipelineAnswer {
                question_id: QuestionId::new(format!("q{i}")),
                pipeline_name: "p".into(),
                answer: format!("answer {i}"),
                declined: i % 3 == 0,
                guessed_question: (i % 2 == 0).then(|| format!("guess {i}")),
                highlights: Some(vec![Span::new(DocumentId::new("d"), i, i + 25)]),
                elapsed_s: i as f64 * 0.125,
                usage: TokenUsage {
                    prompt_tokens: i as u64,
                    completion_tokens: 2 * i as u64,
                },
            })
            .collect()
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out/results.jsonl");
        let original = answers(100);
        write_jsonl(&path, &original, false).unwrap();
        let back: Vec<PipelineAnswer> = read_jsonl(&path).unwrap();
        assert_eq!(back, original);
    }

    #[test]
    fn empty_list_writes_an_empty_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        write_jsonl::<PipelineAnswer>(&path, &[], false).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        let back: Vec<PipelineAnswer> = read_jsonl(&path).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn refuses_to_overwrite_without_the_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("file.jsonl");
        write_text(&path, "first\n", false).unwrap();
        let err = write_text(&path, "second\n", false).unwrap_err();
        assert!(err.to_string().contains("--overwrite"));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "first\n");
        write_text(&path, "second\n", true).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
    }
}
