//! Character-level approximate matching: normalized indel similarity and a
//! banded best-window search over document text.
//!
//! Similarity between `a` and `b` is `100·(1 − D/(|a|+|b|))` where `D` is
//! the minimum number of single-character insertions and deletions that
//! transform `a` into `b` (no substitutions). `D` relates to the longest
//! common subsequence by `D = |a| + |b| − 2·LCS(a, b)`, which is how it is
//! computed here. All lengths and offsets count Unicode scalar values.

use std::collections::HashMap;

/// Longest common subsequence length between two char slices.
///
/// Two-row dynamic program with common prefix/suffix trimming; O(|a|·|b|)
/// time, O(min(|a|,|b|)) space.
pub(crate) fn lcs_len(a: &[char], b: &[char]) -> usize {
    let prefix = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    if a.is_empty() || b.is_empty() {
        return prefix + suffix;
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for &lc in long {
        for (j, &sc) in short.iter().enumerate() {
            cur[j + 1] = if lc == sc {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prefix + suffix + prev[short.len()]
}

/// Minimum number of character insertions and deletions turning `a` into `b`.
pub fn indel_distance(a: &str, b: &str) -> usize {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    ac.len() + bc.len() - 2 * lcs_len(&ac, &bc)
}

/// Normalized indel similarity in [0, 100]; 100 iff the strings are equal
/// (two empty strings are equal).
pub fn indel_similarity(a: &str, b: &str) -> f64 {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let total = ac.len() + bc.len();
    if total == 0 {
        return 100.0;
    }
    let d = total - 2 * lcs_len(&ac, &bc);
    100.0 * (1.0 - d as f64 / total as f64)
}

/// The winning window of a [`best_span`] search, in character offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanMatch {
    pub start: usize,
    pub end: usize,
    /// Normalized indel similarity between the query and `text[start..end]`.
    pub score: f64,
}

/// Candidate tracked with exact integers so score comparisons and
/// tie-breaks never depend on float rounding.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    len: usize,
    lcs: usize,
}

impl Candidate {
    /// score = 200·lcs / (m + len); compare two candidates by
    /// cross-multiplication, then lower start, then shorter length.
    fn beats(&self, other: &Candidate, m: usize) -> bool {
        let lhs = self.lcs as u128 * (m + other.len) as u128;
        let rhs = other.lcs as u128 * (m + self.len) as u128;
        if lhs != rhs {
            return lhs > rhs;
        }
        (self.start, self.len) < (other.start, other.len)
    }
}

/// Find the window of `text` most similar to `query`.
///
/// Only windows whose length lies in the band
/// `[max(⌈0.8·|query|⌉, min_len), ⌊1.2·|query|⌋]` are considered. The best
/// window is the one with maximal normalized indel similarity; ties go to
/// the lower start offset, then the shorter window. Returns `None` when no
/// in-band window reaches `threshold`.
///
/// Offsets in the result are character offsets into `text`.
pub fn best_span(query: &str, text: &str, threshold: f64, min_len: usize) -> Option<SpanMatch> {
    let qchars: Vec<char> = query.chars().collect();
    let m = qchars.len();
    if m == 0 || text.is_empty() {
        return None;
    }

    // Integer band bounds: ⌈0.8m⌉ = (4m+4)/5 and ⌊1.2m⌋ = 6m/5.
    let lo = ((4 * m + 4) / 5).max(min_len);
    let hi = (6 * m) / 5;
    if lo > hi {
        return None;
    }

    // A verbatim occurrence scores 100 and the leftmost one wins every
    // tie-break, so a substring search settles the common case outright.
    // Valid only when the query's own length is inside the band.
    if m >= min_len && threshold <= 100.0 {
        if let Some(byte_idx) = text.find(query) {
            let start = text[..byte_idx].chars().count();
            return Some(SpanMatch {
                start,
                end: start + m,
                score: 100.0,
            });
        }
    }

    let tchars: Vec<char> = text.chars().collect();
    let n = tchars.len();
    if lo > n {
        return None;
    }
    let hi = hi.min(n);

    let mut qcount: HashMap<char, i32> = HashMap::new();
    for &c in &qchars {
        *qcount.entry(c).or_insert(0) += 1;
    }

    let mut best: Option<Candidate> = None;

    for len in lo..=hi {
        // Slide a fixed-length window, maintaining the multiset
        // intersection size Σ_c min(#window(c), #query(c)). The
        // intersection bounds the LCS from above, so most windows are
        // rejected without running the DP.
        let mut wcount: HashMap<char, i32> = HashMap::new();
        let mut inter: usize = 0;
        for (i, &c) in tchars.iter().enumerate() {
            let q = qcount.get(&c).copied().unwrap_or(0);
            let w = wcount.entry(c).or_insert(0);
            *w += 1;
            if *w <= q {
                inter += 1;
            }
            if i + 1 >= len {
                let start = i + 1 - len;
                let passes_threshold =
                    (200 * inter) as f64 >= threshold * (m + len) as f64;
                let may_beat_best = match &best {
                    None => true,
                    Some(b) => {
                        inter as u128 * (m + b.len) as u128
                            >= b.lcs as u128 * (m + len) as u128
                    }
                };
                if passes_threshold && may_beat_best {
                    let lcs = lcs_len(&qchars, &tchars[start..start + len]);
                    let candidate = Candidate { start, len, lcs };
                    let reaches = (200 * lcs) as f64 >= threshold * (m + len) as f64;
                    if reaches && best.map_or(true, |b| candidate.beats(&b, m)) {
                        best = Some(candidate);
                    }
                }
                // Retire the window's first character before advancing.
                let out = tchars[start];
                let q = qcount.get(&out).copied().unwrap_or(0);
                let w = wcount.get_mut(&out).unwrap();
                if *w <= q {
                    inter -= 1;
                }
                *w -= 1;
            }
        }
    }

    best.map(|b| SpanMatch {
        start: b.start,
        end: b.start + b.len,
        score: 200.0 * b.lcs as f64 / (m + b.len) as f64,
    })
}
