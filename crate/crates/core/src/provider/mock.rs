//! Deterministic offline providers.
//!
//! [`MockTextGenerator`] answers the pipeline's prompts by rule instead of
//! by model: enrichment prompts are served from a built-in abbreviation and
//! synonym table with positional rotation, table selection and ranking are
//! served by canonical-concept overlap scoring. [`MockEmbedder`] builds
//! each vector as the renormalized average of per-token pseudo-random unit
//! vectors, so texts that share normalized tokens land measurably closer in
//! cosine space than token-disjoint texts.
//!
//! Everything here is a pure function of its inputs and fixed seed
//! constants: repeated calls, fresh instances, and fresh processes all
//! produce identical output, which is what makes full pipeline runs
//! reproducible without network access.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::{Embedder, EmbeddingVector, GenerationRequest, ProviderError, TextGenerator};
use crate::normalize::normalize_name;

pub const MOCK_GENERATOR_ID: &str = "mock-gen-v1";

/// Candidate-set size beyond which the mock ranker stops discriminating and
/// returns candidates in prompt order. Models the observed degradation of
/// LLM ranking quality under very long candidate lists, which is what the
/// retrieval-free baseline runs into.
pub const DEFAULT_RANKING_CAPACITY: usize = 12;

/// Directed abbreviation table used to answer the name-expansion prompt:
/// each cryptic token maps to its spelled-out forms. Expansion never runs
/// in reverse (full words are left alone), mirroring how real models expand
/// `loc_id` but do not abbreviate `location`.
const ABBREVIATIONS: &[(&str, &[&str])] = &[
    ("adm", &["admission"]),
    ("addr", &["address"]),
    ("amt", &["amount"]),
    ("cat", &["category"]),
    ("cust", &["customer"]),
    ("dept", &["department"]),
    ("desc", &["description"]),
    ("dob", &["date of birth", "birth date", "birthdate"]),
    ("dt", &["date"]),
    ("dx", &["diagnosis"]),
    ("grp", &["group"]),
    ("hadm", &["hospital admission", "inpatient admission"]),
    ("icu", &["intensive care unit"]),
    ("id", &["identifier", "identification", "number"]),
    ("lab", &["laboratory"]),
    ("loc", &["location"]),
    ("med", &["medication", "medicine"]),
    ("no", &["number"]),
    ("num", &["number"]),
    ("org", &["organization"]),
    ("pat", &["patient"]),
    ("prov", &["provider"]),
    ("qty", &["quantity"]),
    ("rx", &["prescription", "medication"]),
    ("subj", &["subject"]),
    ("ts", &["timestamp"]),
    ("val", &["value"]),
];

/// Undirected synonym groups used by the cross-terminology prompt and by
/// the concept-overlap scoring behind table selection and ranking. The
/// first member of each group is its canonical concept.
const SYNONYM_GROUPS: &[&[&str]] = &[
    &[
        "identifier",
        "id",
        "identification",
        "number",
        "code",
        "key",
    ],
    &["person", "patient", "subject", "individual"],
    &["location", "ward", "site"],
    &["visit", "encounter", "admission", "stay", "admit"],
    &["date", "day", "datetime", "time", "timestamp"],
    &["medication", "drug", "medicine", "prescription"],
    &["quantity", "dose", "dosage", "amount"],
    &["sex", "gender"],
    &["diagnosis", "condition", "disorder"],
    &["measurement", "result", "reading"],
    &["provider", "physician", "doctor", "clinician"],
    &["hospital", "clinic", "facility", "center"],
    &["name", "label", "title"],
    &["category", "type", "kind", "class"],
    &["start", "begin", "onset"],
    &["end", "stop", "finish"],
    &["order", "request", "instruction"],
    &["occurrence", "event", "episode", "instance"],
    &["department", "unit", "division"],
    &["organization", "agency", "institution"],
    &["note", "comment", "remark"],
];

fn abbreviation_expansions(token: &str) -> Option<&'static [&'static str]> {
    ABBREVIATIONS
        .iter()
        .find(|(abbr, _)| *abbr == token)
        .map(|(_, exps)| *exps)
}

fn group_of(token: &str) -> Option<&'static [&'static str]> {
    SYNONYM_GROUPS
        .iter()
        .copied()
        .find(|group| group.contains(&token))
}

fn strip_plural(token: &str) -> &str {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        &token[..token.len() - 1]
    } else {
        token
    }
}

/// Map a token to its canonical concept: singularize, expand a known
/// abbreviation to the head word of its first expansion, then collapse
/// synonym-group members onto the group's first entry.
pub fn canonical_concept(token: &str) -> String {
    let lowered = token.to_lowercase();
    let mut t = strip_plural(&lowered).to_string();
    if let Some(exps) = abbreviation_expansions(&t)
        && let Some(head) = exps[0].split_whitespace().last()
    {
        t = head.to_string();
    }
    match group_of(&t) {
        Some(group) => group[0].to_string(),
        None => t,
    }
}

/// Canonical concepts of every normalized token in `text`.
pub fn concept_set(text: &str) -> BTreeSet<String> {
    normalize_name(text)
        .tokens
        .iter()
        .map(|t| canonical_concept(t))
        .collect()
}

/// Deterministic answers to the expansion prompt: spell out every known
/// abbreviation, rotating through its expansions by variant and token
/// position. Unknown tokens pass through unchanged, so a name that is
/// already explicit expands to itself (and is later deduplicated against
/// the original).
pub fn mock_expansion_names(column_name: &str, count: usize) -> Vec<String> {
    let tokens = normalize_name(column_name).tokens;
    (0..count)
        .map(|variant| {
            tokens
                .iter()
                .enumerate()
                .map(|(pos, token)| match abbreviation_expansions(token) {
                    Some(exps) => exps[(variant + pos) % exps.len()].to_string(),
                    None => token.clone(),
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Deterministic answers to the cross-terminology prompt: replace every
/// token with a synonym-group alternate that is not itself a word of the
/// table or column name. Tokens without a usable alternate pass through
/// unchanged; such names violate the no-shared-word rule on purpose and are
/// dropped by the enrichment filter, exactly like a non-compliant model
/// answer would be.
pub fn mock_cross_terminology_names(
    table_name: &str,
    column_name: &str,
    count: usize,
) -> Vec<String> {
    let forbidden: BTreeSet<String> = normalize_name(table_name)
        .tokens
        .into_iter()
        .chain(normalize_name(column_name).tokens)
        .collect();
    let tokens = normalize_name(column_name).tokens;
    (0..count)
        .map(|variant| {
            tokens
                .iter()
                .enumerate()
                .map(|(pos, token)| {
                    let base = strip_plural(token);
                    let mut alternates: Vec<&str> = group_of(base)
                        .map(|group| {
                            group
                                .iter()
                                .copied()
                                .filter(|m| *m != base && !forbidden.contains(*m))
                                .collect()
                        })
                        .unwrap_or_default();
                    // Longest (most explicit) alternates first; ties
                    // alphabetical for determinism.
                    alternates.sort_by_key(|m| (std::cmp::Reverse(m.len()), *m));
                    match alternates.is_empty() {
                        true => token.clone(),
                        false => alternates[(variant + pos) % alternates.len()].to_string(),
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Deterministic stand-in for an LLM.
///
/// Recognizes the pipeline's prompt shapes by the output block they request
/// (`<names>`, `<tables>`, `<ranking>`) and answers each by rule. Unknown
/// prompts get a fixed string derived from the prompt hash.
#[derive(Debug, Clone)]
pub struct MockTextGenerator {
    ranking_capacity: usize,
}

impl Default for MockTextGenerator {
    fn default() -> Self {
        Self {
            ranking_capacity: DEFAULT_RANKING_CAPACITY,
        }
    }
}

impl MockTextGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_ranking_capacity(capacity: usize) -> Self {
        Self {
            ranking_capacity: capacity,
        }
    }

    fn answer_names(&self, prompt: &str) -> String {
        let column = last_field(prompt, "Column name:").unwrap_or_default();
        let table = last_field(prompt, "Table name:").unwrap_or_default();
        let count = requested_count(prompt);
        // The cross-terminology prompt is the one that omits the column
        // description.
        let names = if prompt.contains("Column description:") {
            mock_expansion_names(&column, count)
        } else {
            mock_cross_terminology_names(&table, &column, count)
        };
        let mut out = String::from(
            "Reasoning: applying the built-in abbreviation and synonym tables to the column tokens.\n\n<names>\n",
        );
        for (i, name) in names.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, name));
        }
        out.push_str("</names>\n");
        out
    }

    fn answer_table_selection(&self, prompt: &str) -> String {
        let source_text = format!(
            "{} {}",
            last_field(prompt, "Source table:").unwrap_or_default(),
            last_field(prompt, "Source table description:").unwrap_or_default()
        );
        let source_concepts = concept_set(&source_text);

        let mut tables = Vec::new();
        for line in prompt.lines() {
            let Some(rest) = line.trim().strip_prefix("- ") else {
                continue;
            };
            let Some((name, description)) = rest.split_once(':') else {
                continue;
            };
            let overlap = concept_set(&format!("{name} {description}"))
                .intersection(&source_concepts)
                .count();
            tables.push((name.trim().to_string(), overlap));
        }

        let selected: Vec<&String> = tables
            .iter()
            .filter(|(_, overlap)| *overlap >= 1)
            .map(|(name, _)| name)
            .collect();
        // No discriminating signal: keep every table rather than guessing.
        let chosen: Vec<&String> = if selected.is_empty() {
            tables.iter().map(|(name, _)| name).collect()
        } else {
            selected
        };

        let mut out = String::from(
            "Reasoning: selecting tables whose concepts overlap the source table.\n\n<tables>\n",
        );
        for (i, name) in chosen.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, name));
        }
        out.push_str("</tables>\n");
        out
    }

    fn answer_ranking(&self, prompt: &str) -> String {
        let candidates = parse_ranked_candidates(prompt);

        let mut source_text = String::new();
        for label in [
            "Source column:",
            "Source column description:",
            "Source names:",
        ] {
            if let Some(value) = last_field(prompt, label) {
                source_text.push_str(&value);
                source_text.push(' ');
            }
        }
        let source_concepts = concept_set(&source_text);

        let mut order: Vec<&PromptCandidate> = candidates.iter().collect();
        if candidates.len() <= self.ranking_capacity {
            order.sort_by(|a, b| {
                let score_a = a.score(&source_concepts);
                let score_b = b.score(&source_concepts);
                score_b
                    .cmp(&score_a)
                    .then_with(|| a.id.to_lowercase().cmp(&b.id.to_lowercase()))
            });
        }
        // Over capacity the mock keeps prompt order: with that many
        // candidates it can no longer tell them apart.

        let mut out =
            String::from("Reasoning: ordering candidates by concept overlap.\n\n<ranking>\n");
        for (i, candidate) in order.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, candidate.id));
        }
        out.push_str("</ranking>\n");
        out
    }
}

impl TextGenerator for MockTextGenerator {
    fn id(&self) -> &str {
        MOCK_GENERATOR_ID
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let prompt = &request.prompt;
        if prompt.contains("<tables>") {
            Ok(self.answer_table_selection(prompt))
        } else if prompt.contains("<ranking>") {
            Ok(self.answer_ranking(prompt))
        } else if prompt.contains("<names>") {
            Ok(self.answer_names(prompt))
        } else {
            let mut hasher = Sha256::new();
            hasher.update(prompt.as_bytes());
            Ok(format!("mock:{}", hex::encode(&hasher.finalize()[..8])))
        }
    }
}

struct PromptCandidate {
    /// `table.column` as printed in the prompt.
    id: String,
    column_tokens: Vec<String>,
    table_concepts: BTreeSet<String>,
    /// Concepts from the candidate's listed names (ranking prompts) or its
    /// description (baseline prompts).
    meta_concepts: BTreeSet<String>,
}

impl PromptCandidate {
    /// Column-name token hits dominate; shared concepts from the alternate
    /// names and the owning table break near-ties.
    fn score(&self, source_concepts: &BTreeSet<String>) -> usize {
        let column_hits = self
            .column_tokens
            .iter()
            .filter(|t| source_concepts.contains(&canonical_concept(t)))
            .count();
        let meta_hits = self.meta_concepts.intersection(source_concepts).count();
        let table_hits = self.table_concepts.intersection(source_concepts).count();
        3 * column_hits + meta_hits + table_hits
    }
}

/// Parse candidate lines from a ranking or baseline prompt. Two shapes are
/// understood: `- table.column | names: a; b; c` (ranking) and
/// `- table.column: description` (schema dump in the baseline prompt).
fn parse_ranked_candidates(prompt: &str) -> Vec<PromptCandidate> {
    let mut out = Vec::new();
    for line in prompt.lines() {
        let Some(rest) = line.trim().strip_prefix("- ") else {
            continue;
        };
        let (id, meta) = if let Some((id, names)) = rest.split_once(" | names: ") {
            (id.trim(), names.trim())
        } else if let Some((id, description)) = rest.split_once(':') {
            if !id.contains('.') {
                continue;
            }
            (id.trim(), description.trim())
        } else {
            continue;
        };
        let Some((table, column)) = id.split_once('.') else {
            continue;
        };
        out.push(PromptCandidate {
            id: id.to_string(),
            column_tokens: normalize_name(column).tokens,
            table_concepts: concept_set(table),
            meta_concepts: concept_set(meta),
        });
    }
    out
}

fn last_field(prompt: &str, label: &str) -> Option<String> {
    prompt
        .lines()
        .rev()
        .find_map(|line| line.trim().strip_prefix(label))
        .map(|rest| rest.trim().to_string())
}

fn requested_count(prompt: &str) -> usize {
    prompt
        .rsplit("exactly ")
        .next()
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|n| n.parse().ok())
        .unwrap_or(3)
}

/// Deterministic embedding provider: the vector of a text is the
/// renormalized mean of per-token unit vectors, each drawn from a ChaCha
/// stream seeded by the token's hash. Stable across instances and process
/// restarts.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dimension: usize,
    id: String,
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            id: format!("mock-embed-{dimension}-v1"),
        }
    }

    fn token_vector(&self, token: &str) -> EmbeddingVector {
        let mut hasher = Sha256::new();
        hasher.update(b"mock-embed-token\0");
        hasher.update(token.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let values: Vec<f64> = (0..self.dimension)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        EmbeddingVector::new(values)
            .normalized()
            .expect("gaussian vector has positive norm")
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let tokens = normalize_name(text).tokens;
        if tokens.is_empty() {
            return Err(ProviderError::ZeroVector);
        }
        let mut sum = vec![0.0; self.dimension];
        for token in &tokens {
            for (acc, v) in sum.iter_mut().zip(self.token_vector(token).values()) {
                *acc += v;
            }
        }
        EmbeddingVector::new(sum).normalized()
    }
}

impl Embedder for MockEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyBatch);
        }
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}
