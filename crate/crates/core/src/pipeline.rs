//! Matching orchestration.
//!
//! Indexing side: [`build_indexes`] expands an enrichment set into one
//! document per (column, name) pair and builds the BM25 and vector indexes
//! over them. Querying side: enrich a source column, retrieve candidates
//! from both indexes, narrow them by LLM table selection, and produce a
//! final LLM ranking. Also hosts the retrieval-free baseline that stuffs
//! the whole target schema into a single ranking prompt, and the ablation
//! switches that disable individual stages.

use std::collections::{BTreeSet, HashSet};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use crate::enrich::{
    EnrichError, EnrichedColumn, EnrichmentConfig, EnrichmentSet, enrich_column, extract_block,
    strip_list_marker,
};
use crate::lexical::{LexicalError, LexicalIndex, lexical_search};
use crate::provider::{Embedder, GenerationRequest, ProviderError, TextGenerator, parallel_map};
use crate::schema::{ColumnMeta, ColumnRef, SchemaDef, TableMeta};
use crate::vector::{VectorError, VectorIndex, vector_search};

pub const TABLE_SELECTION_TEMPLATE: &str = include_str!("../prompts/table_selection_v1.txt");
pub const RANKING_TEMPLATE: &str = include_str!("../prompts/ranking_v1.txt");
pub const NEEDLE_TEMPLATE: &str = include_str!("../prompts/needle_v1.txt");

/// Prediction lists are emitted at this depth by default; evaluation slices
/// prefixes, so it must cover every K being reported.
pub const DEFAULT_EMIT_K: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(
        "target schema exceeds the context budget: estimated {estimated} tokens, budget {budget}"
    )]
    ContextBudgetExceeded { estimated: usize, budget: usize },
    #[error("retrieval is fully disabled: enable at least one of vector or lexical search")]
    NoRetrievalChannel,
}

/// Retrieval-stage settings. Defaults follow `top_k = 50`, cosine
/// threshold 0.5, BM25 threshold 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_k: usize,
    pub cosine_threshold: f64,
    pub bm25_threshold: f64,
    pub use_vector: bool,
    pub use_lexical: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            top_k: 50,
            cosine_threshold: 0.5,
            bm25_threshold: 1.0,
            use_vector: true,
            use_lexical: true,
        }
    }
}

/// One switch per removable component; all on by default. Each flag
/// disables exactly one stage of the pipeline:
///
/// - `query_enrichment`: off = the query is only the normalized original name
/// - `document_enrichment`: off = indexes hold only normalized original names
/// - `name_expansion_prompt`: off = the expansion prompt is disabled on both sides
/// - `embedding_search` / `fulltext_search`: off = that retrieval channel is disabled
/// - `table_selection`: off = the table-selection stage is skipped
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub query_enrichment: bool,
    pub document_enrichment: bool,
    pub name_expansion_prompt: bool,
    pub embedding_search: bool,
    pub fulltext_search: bool,
    pub table_selection: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            query_enrichment: true,
            document_enrichment: true,
            name_expansion_prompt: true,
            embedding_search: true,
            fulltext_search: true,
            table_selection: true,
        }
    }
}

impl AblationFlags {
    /// Effective enrichment for the indexing (document) side.
    pub fn document_enrichment_config(&self, base: &EnrichmentConfig) -> EnrichmentConfig {
        if !self.document_enrichment {
            return EnrichmentConfig {
                num_names: base.num_names,
                generate_count: base.generate_count,
                ..EnrichmentConfig::disabled()
            };
        }
        EnrichmentConfig {
            use_expansion_prompt: base.use_expansion_prompt && self.name_expansion_prompt,
            ..*base
        }
    }

    /// Effective enrichment for the query (source) side.
    pub fn query_enrichment_config(&self, base: &EnrichmentConfig) -> EnrichmentConfig {
        if !self.query_enrichment {
            return EnrichmentConfig {
                num_names: base.num_names,
                generate_count: base.generate_count,
                ..EnrichmentConfig::disabled()
            };
        }
        EnrichmentConfig {
            use_expansion_prompt: base.use_expansion_prompt && self.name_expansion_prompt,
            ..*base
        }
    }

    /// Effective retrieval channels.
    pub fn retrieval_config(&self, base: &RetrievalConfig) -> RetrievalConfig {
        RetrievalConfig {
            use_vector: base.use_vector && self.embedding_search,
            use_lexical: base.use_lexical && self.fulltext_search,
            ..*base
        }
    }
}

/// Expand an enrichment set into index documents and build both indexes.
///
/// The lexical index holds every name (empty-token names are legal BM25
/// documents of length 0); the vector index holds only names with tokens,
/// since an empty text has no embedding. Each index numbers its own
/// documents densely.
pub fn build_indexes(
    enrichment: &EnrichmentSet,
    params: crate::lexical::Bm25Params,
    embedder: &dyn Embedder,
) -> Result<(LexicalIndex, VectorIndex), PipelineError> {
    let mut lexical_docs = Vec::new();
    let mut vector_entries: Vec<(ColumnRef, crate::enrich::EnrichedName)> = Vec::new();
    for column in enrichment.columns() {
        for name in &column.names {
            lexical_docs.push(crate::lexical::LexicalDoc {
                doc_id: lexical_docs.len(),
                target: column.reference().clone(),
                name: name.clone(),
            });
            if !name.tokens.is_empty() {
                vector_entries.push((column.reference().clone(), name.clone()));
            }
        }
    }
    let lexical = crate::lexical::build_lexical_index(lexical_docs, params)?;

    let texts: Vec<String> = vector_entries
        .iter()
        .map(|(_, name)| name.tokens.joined())
        .collect();
    let vectors = embedder.embed(&texts)?;
    let vector_docs: Vec<crate::vector::VectorDoc> = vector_entries
        .into_iter()
        .zip(vectors)
        .enumerate()
        .map(
            |(doc_id, ((target, name), vector))| crate::vector::VectorDoc {
                doc_id,
                target,
                name,
                vector,
            },
        )
        .collect();
    let vector = crate::vector::build_vector_index(vector_docs)?;
    Ok((lexical, vector))
}

/// A retrieved target column with the best score seen per channel and the
/// (source name, target name) pairs that matched.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub target: ColumnRef,
    pub best_lexical_score: Option<f64>,
    pub best_vector_similarity: Option<f64>,
    pub matched_names: BTreeSet<(String, String)>,
}

impl ScoredCandidate {
    /// Best score across channels; used only to order candidates the LLM
    /// left unranked, where any deterministic order works.
    pub fn best_score(&self) -> f64 {
        self.best_lexical_score
            .unwrap_or(f64::NEG_INFINITY)
            .max(self.best_vector_similarity.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Final output for one source column: target columns ordered best-first;
/// `f_K` is the length-K prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub source: ColumnRef,
    pub ranked_targets: Vec<ColumnRef>,
}

/// Run both retrieval channels over every name of the enriched source
/// column and merge the hits per target column, keeping the maximum score
/// for each channel. Candidates come back deduplicated, ordered by best
/// score descending (ties by target).
pub fn retrieve_candidates(
    source: &EnrichedColumn,
    lexical: &LexicalIndex,
    vector: &VectorIndex,
    config: &RetrievalConfig,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredCandidate>, PipelineError> {
    if !config.use_vector && !config.use_lexical {
        return Err(PipelineError::NoRetrievalChannel);
    }

    fn upsert<'a>(
        merged: &'a mut IndexMap<ColumnRef, ScoredCandidate>,
        target: &ColumnRef,
    ) -> &'a mut ScoredCandidate {
        merged
            .entry(target.clone())
            .or_insert_with(|| ScoredCandidate {
                target: target.clone(),
                best_lexical_score: None,
                best_vector_similarity: None,
                matched_names: BTreeSet::new(),
            })
    }

    let mut merged: IndexMap<ColumnRef, ScoredCandidate> = IndexMap::new();

    if config.use_lexical {
        for name in &source.names {
            for hit in lexical_search(lexical, &name.tokens, config.top_k, config.bm25_threshold) {
                let candidate = upsert(&mut merged, &hit.target);
                let best = candidate.best_lexical_score.get_or_insert(hit.score);
                *best = best.max(hit.score);
                candidate.matched_names.insert((
                    name.text.clone(),
                    lexical.docs()[hit.matched_doc].name.text.clone(),
                ));
            }
        }
    }

    if config.use_vector {
        // Embed every non-empty name in one batch; queries use the
        // normalized text, matching how the documents were embedded.
        let embeddable: Vec<&crate::enrich::EnrichedName> = source
            .names
            .iter()
            .filter(|n| !n.tokens.is_empty())
            .collect();
        if !embeddable.is_empty() {
            let texts: Vec<String> = embeddable.iter().map(|n| n.tokens.joined()).collect();
            let queries = embedder.embed(&texts)?;
            for (name, query) in embeddable.iter().zip(&queries) {
                for hit in vector_search(vector, query, config.top_k, config.cosine_threshold)? {
                    let candidate = upsert(&mut merged, &hit.target);
                    let best = candidate
                        .best_vector_similarity
                        .get_or_insert(hit.similarity);
                    *best = best.max(hit.similarity);
                    candidate.matched_names.insert((
                        name.text.clone(),
                        vector.docs()[hit.matched_doc].name.text.clone(),
                    ));
                }
            }
        }
    }

    let mut candidates: Vec<ScoredCandidate> = merged.into_values().collect();
    candidates.sort_by(|a, b| {
        b.best_score()
            .partial_cmp(&a.best_score())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.target.cmp(&b.target))
    });
    Ok(candidates)
}

fn fill(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in substitutions {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

fn or_placeholder(text: &str) -> &str {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        "(no description)"
    } else {
        trimmed
    }
}

/// Build the table-selection prompt for a source column whose candidates
/// span `tables`.
pub fn build_table_selection_prompt(
    source_table: &TableMeta,
    source_column: &ColumnRef,
    tables: &[&TableMeta],
) -> String {
    let listing: Vec<String> = tables
        .iter()
        .map(|t| format!("- {}: {}", t.name, or_placeholder(&t.description)))
        .collect();
    fill(
        TABLE_SELECTION_TEMPLATE,
        &[
            ("source_table", &source_table.name),
            (
                "source_table_description",
                or_placeholder(&source_table.description),
            ),
            ("source_column", &source_column.column_name),
            ("tables", &listing.join("\n")),
        ],
    )
}

fn parse_name_list(response: &str, open: &str, close: &str) -> Result<Vec<String>, String> {
    let block = extract_block(response, open, close)?;
    let names: Vec<String> = block.lines().filter_map(strip_list_marker).collect();
    if names.is_empty() {
        return Err(format!("the {open} block was empty"));
    }
    Ok(names)
}

fn generate_with_repair(
    llm: &dyn TextGenerator,
    prompt: &str,
    open: &str,
    close: &str,
) -> Result<Result<Vec<String>, String>, ProviderError> {
    let response = llm.generate(&GenerationRequest::new(prompt))?;
    match parse_name_list(&response, open, close) {
        Ok(names) => Ok(Ok(names)),
        Err(first_error) => {
            let repair = format!(
                "{prompt}\n\nYour previous reply could not be parsed ({first_error}). \
                 Reply again with ONLY the {open} block in the requested format."
            );
            let response = llm.generate(&GenerationRequest::new(repair))?;
            Ok(parse_name_list(&response, open, close))
        }
    }
}

/// Ask the LLM which target tables are pertinent and keep only candidates
/// from those tables. Fails open: an empty or unparseable selection leaves
/// the candidate list unchanged. Never introduces new candidates.
pub fn select_tables(
    source_table: &TableMeta,
    source_column: &ColumnRef,
    candidates: Vec<ScoredCandidate>,
    target_schema: &SchemaDef,
    llm: &dyn TextGenerator,
) -> Result<Vec<ScoredCandidate>, PipelineError> {
    let mut table_names: Vec<String> = Vec::new();
    for candidate in &candidates {
        let name = candidate.target.table_name.to_lowercase();
        if !table_names.contains(&name) {
            table_names.push(name);
        }
    }
    table_names.sort();
    let tables: Vec<&TableMeta> = table_names
        .iter()
        .filter_map(|name| target_schema.table(name))
        .collect();
    if tables.is_empty() {
        return Ok(candidates);
    }

    let prompt = build_table_selection_prompt(source_table, source_column, &tables);
    let selected = match generate_with_repair(llm, &prompt, "<tables>", "</tables>")? {
        Ok(names) => names,
        Err(detail) => {
            warn!(column = %source_column, %detail, "table selection unparseable; keeping all candidates");
            return Ok(candidates);
        }
    };

    let selected: HashSet<String> = selected.into_iter().map(|n| n.to_lowercase()).collect();
    if selected.is_empty() {
        return Ok(candidates);
    }
    let filtered: Vec<ScoredCandidate> = candidates
        .iter()
        .filter(|c| selected.contains(&c.target.table_name.to_lowercase()))
        .cloned()
        .collect();
    // An LLM answer that names none of the candidate tables would wipe the
    // list for no reason; treat it like an empty selection.
    if filtered.is_empty() && !candidates.is_empty() {
        warn!(column = %source_column, "table selection matched no candidate table; keeping all candidates");
        return Ok(candidates);
    }
    Ok(filtered)
}

/// Candidate presentation order for the ranking prompt: deterministic
/// shuffle seeded by the source column, so runs reproduce while no
/// candidate systematically occupies the first slot.
fn presentation_order(source: &ColumnRef, candidates: &mut [ScoredCandidate]) {
    let (table, column) = source.canonical();
    let mut hasher = Sha256::new();
    hasher.update(table.as_bytes());
    hasher.update(b".");
    hasher.update(column.as_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    candidates.shuffle(&mut ChaCha8Rng::from_seed(seed));
}

/// Build the ranking prompt over the (already shuffled) candidates.
pub fn build_ranking_prompt(
    source: &EnrichedColumn,
    candidates: &[ScoredCandidate],
    target_enrichment: &EnrichmentSet,
) -> String {
    let listing: Vec<String> = candidates
        .iter()
        .map(|candidate| {
            let names = target_enrichment
                .get(&candidate.target)
                .map(|enriched| enriched.name_texts().join("; "))
                .unwrap_or_else(|| candidate.target.column_name.clone());
            format!(
                "- {}.{} | names: {}",
                candidate.target.table_name, candidate.target.column_name, names
            )
        })
        .collect();
    fill(
        RANKING_TEMPLATE,
        &[
            ("source_column", &source.meta.reference.column_name),
            ("source_table", &source.meta.reference.table_name),
            ("source_names", &source.name_texts().join("; ")),
            ("candidates", &listing.join("\n")),
        ],
    )
}

fn parse_column_ref(entry: &str) -> Option<ColumnRef> {
    let (table, column) = entry.trim().split_once('.')?;
    let table = table.trim();
    let column = column.trim();
    if table.is_empty() || column.is_empty() {
        return None;
    }
    Some(ColumnRef::new(table, column))
}

/// Produce a total order over the candidates. The LLM ranking is applied
/// where it parses; candidates it omits are appended by best retrieval
/// score. An unparseable ranking (after one repair attempt) falls back to
/// retrieval-score order entirely.
pub fn rank_candidates(
    source: &EnrichedColumn,
    candidates: Vec<ScoredCandidate>,
    target_enrichment: &EnrichmentSet,
    llm: &dyn TextGenerator,
    emit_k: usize,
) -> Result<RankedPrediction, PipelineError> {
    let source_ref = source.reference().clone();
    if candidates.is_empty() {
        return Ok(RankedPrediction {
            source: source_ref,
            ranked_targets: Vec::new(),
        });
    }
    if candidates.len() == 1 {
        return Ok(RankedPrediction {
            source: source_ref,
            ranked_targets: vec![candidates[0].target.clone()],
        });
    }

    let mut shuffled = candidates;
    presentation_order(&source_ref, &mut shuffled);
    let prompt = build_ranking_prompt(source, &shuffled, target_enrichment);

    let parsed = match generate_with_repair(llm, &prompt, "<ranking>", "</ranking>")? {
        Ok(entries) => entries,
        Err(detail) => {
            warn!(column = %source_ref, %detail, "ranking unparseable; falling back to retrieval-score order");
            Vec::new()
        }
    };

    let mut remaining: Vec<ScoredCandidate> = shuffled;
    let mut ranked: Vec<ColumnRef> = Vec::new();
    for entry in parsed {
        let Some(reference) = parse_column_ref(&entry) else {
            continue;
        };
        if let Some(i) = remaining.iter().position(|c| c.target == reference) {
            ranked.push(remaining.swap_remove(i).target);
        }
    }
    // Leftovers (or everything, on fallback) by best retrieval score.
    remaining.sort_by(|a, b| {
        b.best_score()
            .partial_cmp(&a.best_score())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.target.cmp(&b.target))
    });
    ranked.extend(remaining.into_iter().map(|c| c.target));
    ranked.truncate(emit_k);

    Ok(RankedPrediction {
        source: source_ref,
        ranked_targets: ranked,
    })
}

/// Rough token estimate for the context-budget guard.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Render the full target schema for the baseline prompt.
fn render_target_schema(schema: &SchemaDef) -> String {
    let mut out = String::new();
    for table in &schema.tables {
        out.push_str(&format!(
            "Table {}: {}\n",
            table.name,
            or_placeholder(&table.description)
        ));
        for column in &table.columns {
            out.push_str(&format!(
                "  - {}.{}: {}\n",
                table.name,
                column.reference.column_name,
                or_placeholder(&column.description)
            ));
        }
    }
    out
}

/// Retrieval-free baseline: one prompt holding the entire target schema,
/// asked to rank matches for the source column directly. No enrichment, no
/// indexes, no table selection.
pub fn needle_in_the_stack(
    source_column: &ColumnMeta,
    source_table: &TableMeta,
    target_schema: &SchemaDef,
    llm: &dyn TextGenerator,
    emit_k: usize,
    context_budget_tokens: usize,
) -> Result<RankedPrediction, PipelineError> {
    let prompt = fill(
        NEEDLE_TEMPLATE,
        &[
            ("k", &emit_k.to_string()),
            ("source_column", &source_column.reference.column_name),
            (
                "source_column_description",
                or_placeholder(&source_column.description),
            ),
            ("source_table", &source_table.name),
            (
                "source_table_description",
                or_placeholder(&source_table.description),
            ),
            ("target_schema", &render_target_schema(target_schema)),
        ],
    );
    let estimated = estimate_tokens(&prompt);
    if estimated > context_budget_tokens {
        return Err(PipelineError::ContextBudgetExceeded {
            estimated,
            budget: context_budget_tokens,
        });
    }

    let entries = match generate_with_repair(llm, &prompt, "<ranking>", "</ranking>")? {
        Ok(entries) => entries,
        Err(detail) => {
            warn!(column = %source_column.reference, %detail, "baseline ranking unparseable; emitting empty prediction");
            Vec::new()
        }
    };

    let mut seen = HashSet::new();
    let ranked: Vec<ColumnRef> = entries
        .iter()
        .filter_map(|entry| parse_column_ref(entry))
        .filter(|reference| target_schema.contains(reference))
        .filter(|reference| seen.insert(reference.clone()))
        .take(emit_k)
        .collect();

    Ok(RankedPrediction {
        source: source_column.reference.clone(),
        ranked_targets: ranked,
    })
}

/// Everything the matcher needs beyond the indexes themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub retrieval: RetrievalConfig,
    pub enrichment: EnrichmentConfig,
    pub ablation: AblationFlags,
    pub emit_k: usize,
    pub parallelism: usize,
    pub context_budget_tokens: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            retrieval: RetrievalConfig::default(),
            enrichment: EnrichmentConfig::default(),
            ablation: AblationFlags::default(),
            emit_k: DEFAULT_EMIT_K,
            parallelism: 4,
            context_budget_tokens: 100_000,
        }
    }
}

/// Per-column failure captured in the run report; one column failing does
/// not abort the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnFailure {
    pub source: ColumnRef,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    pub predictions: Vec<RankedPrediction>,
    pub failures: Vec<ColumnFailure>,
}

/// Match every source column against the indexed target schema. Source
/// columns are processed in schema order (in parallel up to
/// `config.parallelism`), and per-column failures are collected rather than
/// aborting the run.
#[allow(clippy::too_many_arguments)]
pub fn match_schema(
    source: &SchemaDef,
    target_schema: &SchemaDef,
    target_enrichment: &EnrichmentSet,
    lexical: &LexicalIndex,
    vector: &VectorIndex,
    config: &MatchConfig,
    llm: &dyn TextGenerator,
    embedder: &dyn Embedder,
) -> Result<MatchOutcome, PipelineError> {
    let retrieval = config.ablation.retrieval_config(&config.retrieval);
    if !retrieval.use_vector && !retrieval.use_lexical {
        return Err(PipelineError::NoRetrievalChannel);
    }
    let query_config = config.ablation.query_enrichment_config(&config.enrichment);

    let jobs: Vec<(&TableMeta, &ColumnMeta)> = source.columns().collect();
    let results = parallel_map(config.parallelism, &jobs, |(table, column)| {
        match_one_column(
            column,
            table,
            target_schema,
            target_enrichment,
            lexical,
            vector,
            &retrieval,
            &query_config,
            config,
            llm,
            embedder,
        )
    });

    let mut outcome = MatchOutcome::default();
    for ((_, column), result) in jobs.iter().zip(results) {
        match result {
            Ok(prediction) => outcome.predictions.push(prediction),
            Err(error) => outcome.failures.push(ColumnFailure {
                source: column.reference.clone(),
                error: error.to_string(),
            }),
        }
    }
    Ok(outcome)
}

#[allow(clippy::too_many_arguments)]
fn match_one_column(
    column: &ColumnMeta,
    table: &TableMeta,
    target_schema: &SchemaDef,
    target_enrichment: &EnrichmentSet,
    lexical: &LexicalIndex,
    vector: &VectorIndex,
    retrieval: &RetrievalConfig,
    query_config: &EnrichmentConfig,
    config: &MatchConfig,
    llm: &dyn TextGenerator,
    embedder: &dyn Embedder,
) -> Result<RankedPrediction, PipelineError> {
    let enriched = enrich_column(column, table, query_config, llm)?;
    let candidates = retrieve_candidates(&enriched, lexical, vector, retrieval, embedder)?;
    if candidates.is_empty() {
        return Ok(RankedPrediction {
            source: column.reference.clone(),
            ranked_targets: Vec::new(),
        });
    }
    let candidates = if config.ablation.table_selection {
        select_tables(table, &column.reference, candidates, target_schema, llm)?
    } else {
        candidates
    };
    rank_candidates(&enriched, candidates, target_enrichment, llm, config.emit_k)
}

/// Run the baseline for every source column.
pub fn needle_baseline(
    source: &SchemaDef,
    target_schema: &SchemaDef,
    llm: &dyn TextGenerator,
    emit_k: usize,
    context_budget_tokens: usize,
    parallelism: usize,
) -> MatchOutcome {
    let jobs: Vec<(&TableMeta, &ColumnMeta)> = source.columns().collect();
    let results = parallel_map(parallelism, &jobs, |(table, column)| {
        needle_in_the_stack(
            column,
            table,
            target_schema,
            llm,
            emit_k,
            context_budget_tokens,
        )
    });
    let mut outcome = MatchOutcome::default();
    for ((_, column), result) in jobs.iter().zip(results) {
        match result {
            Ok(prediction) => outcome.predictions.push(prediction),
            Err(error) => outcome.failures.push(ColumnFailure {
                source: column.reference.clone(),
                error: error.to_string(),
            }),
        }
    }
    outcome
}
