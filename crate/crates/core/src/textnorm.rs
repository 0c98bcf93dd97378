//! Unicode normalization helpers shared across the crate.

use std::borrow::Cow;

use unicode_normalization::{is_nfc, is_nfkc, UnicodeNormalization};

/// NFC-normalize, borrowing when the input is already normalized.
pub fn nfc(s: &str) -> Cow<'_, str> {
    if is_nfc(s) {
        Cow::Borrowed(s)
    } else {
        Cow::Owned(s.nfc().collect())
    }
}

/// NFKC-normalize, borrowing when the input is already normalized.
pub fn nfkc(s: &str) -> Cow<'_, str> {
    if is_nfkc(s) {
        Cow::Borrowed(s)
    } else {
        Cow::Owned(s.nfkc().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nfc_is_idempotent() {
        let decomposed = "e\u{0301}clair"; // e + combining acute
        let once = nfc(decomposed).into_owned();
        let twice = nfc(&once).into_owned();
        assert_eq!(once, twice);
        assert_eq!(once, "éclair");
    }

    #[test]
    fn nfkc_folds_compatibility_forms() {
        assert_eq!(nfkc("ﬁsh").as_ref(), "fish");
    }

    #[test]
    fn ascii_borrows() {
        assert!(matches!(nfc("plain ascii"), Cow::Borrowed(_)));
    }
}
