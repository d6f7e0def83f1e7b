//! BM25 full-text index over enriched names.
//!
//! One document per (target column, enriched name) pair. Scoring follows
//! the Lucene BM25 variant:
//!
//! ```text
//! idf(t)       = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! score(q, d)  = sum over query token occurrences t of
//!                idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! with untuned defaults `k1 = 1.2`, `b = 0.75`. The idf form is
//! non-negative, so scores are non-negative and a threshold of 1.0 is
//! meaningful. The index is immutable after build and safe for concurrent
//! searches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrich::EnrichedName;
use crate::normalize::TokenizedName;
use crate::schema::ColumnRef;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("cannot build a lexical index over an empty corpus")]
    EmptyCorpus,
    #[error(
        "doc_ids must be dense and unique: expected {expected} at position {position}, got {got}"
    )]
    NonDenseDocIds {
        expected: usize,
        position: usize,
        got: usize,
    },
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
}

/// BM25 free parameters. Defaults are the standard untuned values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), LexicalError> {
        if self.k1.is_nan() || self.k1 < 0.0 {
            return Err(LexicalError::InvalidParams(format!("k1 = {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(LexicalError::InvalidParams(format!("b = {}", self.b)));
        }
        Ok(())
    }
}

/// One indexed document: an enriched name attached to a target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalDoc {
    pub doc_id: usize,
    pub target: ColumnRef,
    pub name: EnrichedName,
}

/// A thresholded search hit.
#[derive(Debug, Clone, PartialEq)]
pub struct LexicalHit {
    pub target: ColumnRef,
    pub score: f64,
    pub matched_doc: usize,
}

#[derive(Debug, Clone, Default)]
struct TermEntry {
    /// Number of documents containing the term.
    df: usize,
    /// (doc_id, term frequency), ascending by doc_id.
    postings: Vec<(usize, usize)>,
}

/// Immutable BM25 index.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    params: Bm25Params,
    docs: Vec<LexicalDoc>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
    terms: BTreeMap<String, TermEntry>,
}

/// Build the index. Documents must arrive with dense doc_ids `0..n` in
/// order; empty-token documents are accepted with length 0.
pub fn build_lexical_index(
    docs: Vec<LexicalDoc>,
    params: Bm25Params,
) -> Result<LexicalIndex, LexicalError> {
    params.validate()?;
    if docs.is_empty() {
        return Err(LexicalError::EmptyCorpus);
    }
    for (position, doc) in docs.iter().enumerate() {
        if doc.doc_id != position {
            return Err(LexicalError::NonDenseDocIds {
                expected: position,
                position,
                got: doc.doc_id,
            });
        }
    }

    let mut terms: BTreeMap<String, TermEntry> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(docs.len());
    let mut total_length = 0usize;
    for doc in &docs {
        let tokens = &doc.name.tokens.tokens;
        doc_lengths.push(tokens.len());
        total_length += tokens.len();
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for token in tokens {
            *tf.entry(token).or_insert(0) += 1;
        }
        for (token, count) in tf {
            let entry = terms.entry(token.to_string()).or_default();
            entry.df += 1;
            entry.postings.push((doc.doc_id, count));
        }
    }
    let avgdl = total_length as f64 / docs.len() as f64;

    Ok(LexicalIndex {
        params,
        docs,
        doc_lengths,
        avgdl,
        terms,
    })
}

impl LexicalIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[LexicalDoc] {
        &self.docs
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.terms.get(term).map_or(0, |e| e.df)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
    }

    fn term_frequency(&self, term: &str, doc_id: usize) -> usize {
        self.terms
            .get(term)
            .and_then(|entry| {
                entry
                    .postings
                    .binary_search_by_key(&doc_id, |(d, _)| *d)
                    .ok()
                    .map(|i| entry.postings[i].1)
            })
            .unwrap_or(0)
    }

    /// Score one document against a query token list; repeated query tokens
    /// contribute once per occurrence.
    pub fn score(&self, query: &[String], doc_id: usize) -> f64 {
        let k1 = self.params.k1;
        let b = self.params.b;
        let len = self.doc_lengths[doc_id] as f64;
        let mut total = 0.0;
        for token in query {
            let df = self.document_frequency(token);
            if df == 0 {
                continue;
            }
            let tf = self.term_frequency(token, doc_id) as f64;
            if tf == 0.0 {
                continue;
            }
            let norm = k1 * (1.0 - b + b * len / self.avgdl);
            total += self.idf(df) * tf * (k1 + 1.0) / (tf + norm);
        }
        total
    }
}

/// Search the index: hits are documents sharing at least one token with
/// the query, sorted by score descending (ties by ascending doc_id), at
/// most `top_k` results, every score `>= threshold`. An empty query returns
/// no hits.
pub fn lexical_search(
    index: &LexicalIndex,
    query: &TokenizedName,
    top_k: usize,
    threshold: f64,
) -> Vec<LexicalHit> {
    if query.tokens.is_empty() || top_k == 0 {
        return Vec::new();
    }
    // Candidates: every document containing at least one query token,
    // visited in doc_id order so scoring and tie-breaking is deterministic.
    let mut candidates: Vec<usize> = Vec::new();
    for token in &query.tokens {
        if let Some(entry) = index.terms.get(token) {
            candidates.extend(entry.postings.iter().map(|(doc, _)| *doc));
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    let mut hits: Vec<LexicalHit> = candidates
        .into_iter()
        .map(|doc_id| LexicalHit {
            target: index.docs[doc_id].target.clone(),
            score: index.score(&query.tokens, doc_id),
            matched_doc: doc_id,
        })
        .filter(|hit| hit.score >= threshold)
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.matched_doc.cmp(&b.matched_doc))
    });
    hits.truncate(top_k);
    hits
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::enrich::NameOrigin;
    use crate::normalize::normalize_name;

    pub(crate) fn doc(doc_id: usize, text: &str) -> LexicalDoc {
        LexicalDoc {
            doc_id,
            target: ColumnRef::new("t", format!("c{doc_id}")),
            name: EnrichedName {
                text: text.to_string(),
                tokens: normalize_name(text),
                origin: NameOrigin::Original,
                position: 1,
            },
        }
    }

    fn query(text: &str) -> TokenizedName {
        normalize_name(text)
    }

    /// Independent scorer: literal evaluation of the documented formula
    /// over every document, no inverted index involved.
    fn brute_force(
        docs: &[Vec<String>],
        params: Bm25Params,
        query: &[String],
        top_k: usize,
        threshold: f64,
    ) -> Vec<(usize, f64)> {
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let mut df: HashMap<&String, f64> = HashMap::new();
        for d in docs {
            let mut seen: Vec<&String> = d.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0.0) += 1.0;
            }
        }
        let mut scored: Vec<(usize, f64)> = docs
            .iter()
            .enumerate()
            .filter(|(_, d)| query.iter().any(|t| d.contains(t)))
            .map(|(i, d)| {
                let mut score = 0.0;
                for t in query {
                    let dft = df.get(t).copied().unwrap_or(0.0);
                    if dft == 0.0 {
                        continue;
                    }
                    let tf = d.iter().filter(|x| *x == t).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let idf = (1.0 + (n - dft + 0.5) / (dft + 0.5)).ln();
                    let norm = params.k1 * (1.0 - params.b + params.b * d.len() as f64 / avgdl);
                    score += idf * tf * (params.k1 + 1.0) / (tf + norm);
                }
                (i, score)
            })
            .filter(|(_, s)| *s >= threshold)
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(top_k);
        scored
    }

    #[test]
    fn document_frequencies_and_avgdl_are_counted() {
        let index = build_lexical_index(
            vec![doc(0, "location id"), doc(1, "person id")],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(index.document_frequency("id"), 2);
        assert_eq!(index.document_frequency("location"), 1);
        assert_eq!(index.document_frequency("missing"), 0);
        assert_eq!(index.avgdl(), 2.0);
        assert_eq!(index.vocabulary_size(), 3);
    }

    #[test]
    fn empty_token_document_is_accepted_with_length_zero() {
        let index = build_lexical_index(vec![doc(0, "123"), doc(1, "word")], Bm25Params::default())
            .unwrap();
        assert_eq!(index.len(), 2);
        assert_eq!(index.avgdl(), 0.5);
    }

    #[test]
    fn index_size_equals_ingested_document_count() {
        let docs: Vec<LexicalDoc> = (0..37).map(|i| doc(i, "some name here")).collect();
        let index = build_lexical_index(docs, Bm25Params::default()).unwrap();
        assert_eq!(index.len(), 37);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            build_lexical_index(vec![], Bm25Params::default()),
            Err(LexicalError::EmptyCorpus)
        ));
    }

    #[test]
    fn non_dense_doc_ids_are_rejected() {
        let err =
            build_lexical_index(vec![doc(0, "a"), doc(2, "b")], Bm25Params::default()).unwrap_err();
        assert!(matches!(err, LexicalError::NonDenseDocIds { got: 2, .. }));
    }

    #[test]
    fn single_doc_score_matches_the_hand_computed_formula() {
        // Corpus: one document ["location", "id"]; query ["location"].
        // idf = ln(1 + (1 - 1 + 0.5) / (1 + 0.5)) = ln(4/3)
        // tf part = 1 * 2.2 / (1 + 1.2 * (1 - 0.75 + 0.75 * 2/2)) = 1
        let index =
            build_lexical_index(vec![doc(0, "location id")], Bm25Params::default()).unwrap();
        let hits = lexical_search(&index, &query("location"), 10, 0.0);
        assert_eq!(hits.len(), 1);
        let expected = (1.0_f64 + (1.0 - 1.0 + 0.5) / (1.0 + 0.5)).ln();
        assert!((hits[0].score - expected).abs() < 1e-12);
        assert!((hits[0].score - 0.287_682_072_451_780_9).abs() < 1e-12);
    }

    #[test]
    fn no_token_overlap_returns_nothing() {
        let index =
            build_lexical_index(vec![doc(0, "location id")], Bm25Params::default()).unwrap();
        assert!(lexical_search(&index, &query("zebra"), 10, 0.0).is_empty());
        assert!(lexical_search(&index, &query(""), 10, 0.0).is_empty());
    }

    #[test]
    fn ties_break_by_ascending_doc_id() {
        let index = build_lexical_index(
            vec![doc(0, "visit id"), doc(1, "visit id"), doc(2, "other")],
            Bm25Params::default(),
        )
        .unwrap();
        let hits = lexical_search(&index, &query("visit"), 10, 0.0);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].matched_doc, 0);
        assert_eq!(hits[1].matched_doc, 1);
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn repeated_query_tokens_contribute_per_occurrence() {
        let index =
            build_lexical_index(vec![doc(0, "visit visit id")], Bm25Params::default()).unwrap();
        let once = lexical_search(&index, &query("visit"), 10, 0.0)[0].score;
        let twice = lexical_search(&index, &query("visit visit"), 10, 0.0)[0].score;
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    /// Synthetic vocabulary of purely alphabetic tokens, so the token lists
    /// fed to the oracle are exactly what the index sees.
    fn word(id: usize) -> String {
        let hi = char::from(b'a' + (id / 26) as u8);
        let lo = char::from(b'a' + (id % 26) as u8);
        format!("w{hi}{lo}")
    }

    fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, vocab: usize) -> Vec<Vec<String>> {
        let n_docs = rng.random_range(1..=max_docs);
        (0..n_docs)
            .map(|_| {
                let len = rng.random_range(0..=8);
                (0..len).map(|_| word(rng.random_range(0..vocab))).collect()
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_random_corpora() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..25 {
            let corpus = random_corpus(&mut rng, 60, 20);
            let docs: Vec<LexicalDoc> = corpus
                .iter()
                .enumerate()
                .map(|(i, tokens)| doc(i, &tokens.join(" ")))
                .collect();
            let index = build_lexical_index(docs, Bm25Params::default()).unwrap();
            for _ in 0..5 {
                let q_len = rng.random_range(1..=4);
                let q_tokens: Vec<String> =
                    (0..q_len).map(|_| word(rng.random_range(0..25))).collect();
                let q = TokenizedName {
                    raw: q_tokens.join(" "),
                    tokens: q_tokens.clone(),
                };
                for threshold in [0.0, 0.5, 1.0] {
                    let expected =
                        brute_force(&corpus, Bm25Params::default(), &q_tokens, 10, threshold);
                    let got = lexical_search(&index, &q, 10, threshold);
                    assert_eq!(got.len(), expected.len());
                    for (hit, (doc_id, score)) in got.iter().zip(&expected) {
                        assert_eq!(hit.matched_doc, *doc_id);
                        assert!((hit.score - score).abs() < 1e-9);
                        assert!(hit.score >= 0.0);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn raising_the_threshold_never_adds_hits(
            texts in proptest::collection::vec("[a-d ]{0,12}", 1..20),
            q in "[a-d ]{1,8}",
            low in 0.0_f64..1.0,
            delta in 0.0_f64..2.0,
        ) {
            let docs: Vec<LexicalDoc> =
                texts.iter().enumerate().map(|(i, t)| doc(i, t)).collect();
            let index = build_lexical_index(docs, Bm25Params::default()).unwrap();
            let loose = lexical_search(&index, &query(&q), 50, low);
            let strict = lexical_search(&index, &query(&q), 50, low + delta);
            let loose_docs: Vec<usize> = loose.iter().map(|h| h.matched_doc).collect();
            for hit in &strict {
                prop_assert!(loose_docs.contains(&hit.matched_doc));
            }
            prop_assert!(strict.len() <= loose.len());
        }

        #[test]
        fn identical_inputs_give_identical_ordered_output(
            texts in proptest::collection::vec("[a-c ]{0,10}", 1..12),
            q in "[a-c ]{1,6}",
        ) {
            let make = || {
                let docs: Vec<LexicalDoc> =
                    texts.iter().enumerate().map(|(i, t)| doc(i, t)).collect();
                let index = build_lexical_index(docs, Bm25Params::default()).unwrap();
                lexical_search(&index, &query(&q), 50, 0.0)
            };
            prop_assert_eq!(make(), make());
        }
    }
}
