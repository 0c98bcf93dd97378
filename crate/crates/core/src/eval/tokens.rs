//! Token-overlap metrics over normalized answer text.
//!
//! Normalization chain: NFKC fold, lowercase, strip ASCII punctuation,
//! split on whitespace, drop the articles {a, an, the}. Overlap metrics
//! use multiset semantics: each token occurrence can satisfy at most one
//! occurrence on the other side.

use std::collections::HashMap;

use thiserror::Error;

use crate::textnorm::nfkc;

/// The article tokens removed during normalization.
const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Normalize text to comparison tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let folded = nfkc(text).to_lowercase();
    let stripped: String = folded
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    stripped
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("recall is undefined: the reference text yields no tokens")]
    EmptyReference,
    #[error("k-precision is undefined: the response text yields no tokens")]
    EmptyResponse,
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_str()).or_insert(0) += 1;
    }
    map
}

/// Multiset intersection size: Σ over token types of min(count_a, count_b).
pub fn multiset_hits(a: &[String], b: &[String]) -> usize {
    let ca = counts(a);
    let cb = counts(b);
    ca.iter()
        .map(|(t, &n)| n.min(cb.get(t).copied().unwrap_or(0)))
        .sum()
}

/// Fraction of reference-token occurrences present in the response.
pub fn recall(reference: &str, response: &str) -> Result<f64, MetricError> {
    let ref_tokens = normalize_tokens(reference);
    if ref_tokens.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let resp_tokens = normalize_tokens(response);
    Ok(multiset_hits(&ref_tokens, &resp_tokens) as f64 / ref_tokens.len() as f64)
}

/// Fraction of response-token occurrences present in the gold text.
pub fn k_precision(response: &str, gold: &str) -> Result<f64, MetricError> {
    let resp_tokens = normalize_tokens(response);
    if resp_tokens.is_empty() {
        return Err(MetricError::EmptyResponse);
    }
    let gold_tokens = normalize_tokens(gold);
    Ok(multiset_hits(&resp_tokens, &gold_tokens) as f64 / resp_tokens.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_chain_on_simple_sentence() {
        assert_eq!(normalize_tokens("The cat sat."), vec!["cat", "sat"]);
        assert_eq!(normalize_tokens(""), Vec::<String>::new());
    }

    #[test]
    fn normalization_is_idempotent() {
        let once = normalize_tokens("An Apple, a Day; the Doctor!");
        let again = normalize_tokens(&once.join(" "));
        assert_eq!(once, again);
    }

    #[test]
    fn nfkc_folds_fullwidth_and_ligatures() {
        // Fullwidth "ＡＢＣ" and the "ﬁ" ligature normalize to ASCII.
        assert_eq!(normalize_tokens("ＡＢＣ ﬁsh"), vec!["abc", "fish"]);
    }

    #[test]
    fn punctuation_is_removed_not_split_on() {
        assert_eq!(normalize_tokens("can't stop"), vec!["cant", "stop"]);
    }

    #[test]
    fn recall_counts_multiset_occurrences() {
        // Reference has "dog" twice; response supplies it once.
        let r = recall("dog dog park", "one dog in park").unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(recall("same words", "same words").unwrap(), 1.0);
        assert_eq!(recall("alpha beta", "gamma delta").unwrap(), 0.0);
    }

    #[test]
    fn k_precision_counts_response_side() {
        let p = k_precision("blue car", "the blue blue sky").unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(k_precision("from gold text", "copied from gold text").unwrap(), 1.0);
    }

    #[test]
    fn empty_sides_are_undefined() {
        assert_eq!(recall("the a an", "words"), Err(MetricError::EmptyReference));
        assert_eq!(k_precision("...", "gold"), Err(MetricError::EmptyResponse));
    }

    #[test]
    fn order_is_irrelevant() {
        let a = recall("east wind rises", "the wind rises in the east").unwrap();
        let b = recall("east wind rises", "east the in rises wind the").unwrap();
        assert_eq!(a, b);
    }
}
