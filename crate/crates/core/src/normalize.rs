//! Identifier cleaning and tokenization.
//!
//! Raw and generated column names arrive in many shapes (`LocationID`,
//! `loc_id`, `visit_occurrence_id2 (copy)`). Everything that enters an
//! index or a query goes through [`normalize_name`] first so that lexical
//! statistics and embeddings are computed over a uniform token stream:
//! punctuation stripped, digits treated as separators, snake_case and
//! camelCase boundaries split, tokens lowercased.

use serde::{Deserialize, Serialize};

/// A raw name together with its normalized token sequence.
///
/// Tokens are lowercase, purely alphabetic, and derived deterministically
/// from `raw`; token order follows character order in the input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenizedName {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl TokenizedName {
    /// Tokens joined by single spaces — the canonical text form used for
    /// embedding requests and display.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Normalize an identifier into lowercase alphabetic tokens.
///
/// Rules, applied in one pass:
/// - any non-alphabetic character (punctuation, digits, parentheses,
///   whitespace, underscores) acts as a token separator and is dropped;
/// - camelCase boundaries split: a lowercase-to-uppercase transition starts
///   a new token, and within an uppercase run the final capital starts a new
///   token when followed by lowercase (`IDNumber` -> `id`, `number`;
///   `ID` stays one token);
/// - tokens are lowercased with full Unicode case folding; combining marks
///   produced by folding are dropped so tokens stay purely alphabetic;
/// - consecutive separators collapse, so no empty tokens are emitted.
///
/// Total function: any input is accepted and an empty token list is a valid
/// result.
pub fn normalize_name(raw: &str) -> TokenizedName {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphabetic() {
            flush(&mut current, &mut tokens);
            continue;
        }
        if !current.is_empty() {
            // `current` is non-empty only when the previous char was
            // alphabetic, so chars[i - 1] is safe to inspect here.
            let prev = chars[i - 1];
            let upper_run_end = prev.is_uppercase()
                && c.is_uppercase()
                && matches!(chars.get(i + 1), Some(n) if n.is_lowercase());
            if (prev.is_lowercase() && c.is_uppercase()) || upper_run_end {
                flush(&mut current, &mut tokens);
            }
        }
        current.extend(c.to_lowercase().filter(|l| l.is_alphabetic()));
    }
    flush(&mut current, &mut tokens);

    TokenizedName {
        raw: raw.to_string(),
        tokens,
    }
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tokens(raw: &str) -> Vec<String> {
        normalize_name(raw).tokens
    }

    #[test]
    fn splits_camel_case() {
        assert_eq!(tokens("LocationID"), ["location", "id"]);
    }

    #[test]
    fn splits_snake_case() {
        assert_eq!(tokens("loc_id"), ["loc", "id"]);
    }

    #[test]
    fn strips_digits_and_parentheses() {
        assert_eq!(
            tokens("visit_occurrence_id2 (copy)"),
            ["visit", "occurrence", "id", "copy"]
        );
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert_eq!(tokens(""), Vec::<String>::new());
    }

    #[test]
    fn upper_run_followed_by_lowercase_splits_before_last_capital() {
        assert_eq!(tokens("IDNumber"), ["id", "number"]);
        assert_eq!(tokens("ABCd"), ["ab", "cd"]);
        assert_eq!(tokens("HTTPServer"), ["http", "server"]);
    }

    #[test]
    fn pure_upper_run_stays_one_token() {
        assert_eq!(tokens("ID"), ["id"]);
        assert_eq!(tokens("DOB"), ["dob"]);
    }

    #[test]
    fn digit_runs_act_as_single_separator() {
        assert_eq!(tokens("a123b"), ["a", "b"]);
        assert_eq!(tokens("col42"), ["col"]);
    }

    #[test]
    fn consecutive_delimiters_collapse() {
        assert_eq!(tokens("a__--  b"), ["a", "b"]);
    }

    #[test]
    fn non_ascii_letters_are_kept_and_folded() {
        assert_eq!(tokens("Größe_id"), ["größe", "id"]);
        // Folding 'İ' produces a combining mark, which is dropped.
        assert_eq!(tokens("İstanbul"), ["istanbul"]);
    }

    fn arb_identifier() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[A-Za-z0-9_ ()\\-.,:;!?]{0,24}").unwrap()
    }

    proptest! {
        #[test]
        fn output_is_lowercase_alphabetic(raw in arb_identifier()) {
            for token in tokens(&raw) {
                prop_assert!(!token.is_empty());
                for c in token.chars() {
                    prop_assert!(c.is_alphabetic(), "non-letter {c:?} in {token:?}");
                    prop_assert!(!c.is_uppercase(), "uppercase {c:?} in {token:?}");
                    prop_assert!(!c.is_ascii_digit());
                }
            }
        }

        #[test]
        fn idempotent_on_joined_tokens(raw in arb_identifier()) {
            let first = normalize_name(&raw);
            let second = normalize_name(&first.joined());
            prop_assert_eq!(first.tokens, second.tokens);
        }

        #[test]
        fn order_follows_character_order(words in proptest::collection::vec("[a-z]{1,6}", 0..6)) {
            let raw = words.join("_");
            prop_assert_eq!(tokens(&raw), words);
        }
    }
}
