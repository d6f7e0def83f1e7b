//! Alternate-name generation for columns.
//!
//! Two prompts produce the enriched names. The *expansion* prompt sees the
//! table name, table description, column name, and column description, and
//! spells cryptic names out (`loc_id` -> `location identification`). The
//! *cross-terminology* prompt sees only the table and column names and must
//! avoid every word from both, which pushes the generated names toward the
//! vocabulary another schema might use (`ward_id` -> `location id`). Both
//! prompts carry a chain-of-thought one-shot example from e-commerce,
//! deliberately outside the evaluation domain.
//!
//! Generated names are normalized, filtered (cross-terminology names that
//! still share a word with the table or column name are dropped),
//! deduplicated by token sequence, and truncated to the first `num_names`
//! per prompt. The normalized original name is always appended, so every
//! [`EnrichedColumn`] carries exactly one `origin = Original` entry.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::{TokenizedName, normalize_name};
use crate::provider::{GenerationRequest, ProviderError, TextGenerator, parallel_map};
use crate::schema::{ColumnMeta, ColumnRef, SchemaDef, TableMeta};

pub const EXPANSION_TEMPLATE: &str = include_str!("../prompts/expansion_v1.txt");
pub const CROSS_TERMINOLOGY_TEMPLATE: &str = include_str!("../prompts/cross_terminology_v1.txt");
pub const EXPANSION_EXAMPLE: &str = include_str!("../prompts/oneshot_expansion_ecommerce_v1.txt");
pub const CROSS_TERMINOLOGY_EXAMPLE: &str =
    include_str!("../prompts/oneshot_cross_terminology_ecommerce_v1.txt");

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("could not parse generated names for column {column}: {detail}")]
    UnparsableResponse { column: ColumnRef, detail: String },
    #[error("invalid enrichment config: {0}")]
    InvalidConfig(String),
}

/// How many names to generate and keep per prompt.
///
/// `generate_count` names are always requested; only the first `num_names`
/// survivors are kept, so the kept set at `n` is a prefix of the kept set
/// at `n + 1` for the same generation output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichmentConfig {
    pub num_names: usize,
    pub generate_count: usize,
    pub use_expansion_prompt: bool,
    pub use_cross_terminology_prompt: bool,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        Self {
            num_names: 3,
            generate_count: 3,
            use_expansion_prompt: true,
            use_cross_terminology_prompt: true,
        }
    }
}

impl EnrichmentConfig {
    /// Original name only; what an ablated (enrichment-off) side uses.
    pub fn disabled() -> Self {
        Self {
            use_expansion_prompt: false,
            use_cross_terminology_prompt: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnrichError> {
        if self.num_names == 0 {
            return Err(EnrichError::InvalidConfig("num_names must be >= 1".into()));
        }
        if self.num_names > self.generate_count {
            return Err(EnrichError::InvalidConfig(format!(
                "num_names ({}) exceeds generate_count ({})",
                self.num_names, self.generate_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameOrigin {
    Expansion,
    CrossTerminology,
    Original,
}

/// One name attached to a column: the generated (or original) text, its
/// normalized tokens, which prompt produced it, and its 1-based position in
/// that prompt's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedName {
    pub text: String,
    pub tokens: TokenizedName,
    pub origin: NameOrigin,
    pub position: usize,
}

/// A column together with all names it is indexed or queried under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedColumn {
    pub meta: ColumnMeta,
    pub table_description: String,
    pub names: Vec<EnrichedName>,
}

impl EnrichedColumn {
    pub fn reference(&self) -> &ColumnRef {
        &self.meta.reference
    }

    pub fn original_name(&self) -> &EnrichedName {
        self.names
            .iter()
            .find(|n| n.origin == NameOrigin::Original)
            .expect("every enriched column carries its original name")
    }

    /// All name texts, original first, for prompt assembly.
    pub fn name_texts(&self) -> Vec<String> {
        let mut texts = vec![self.original_name().text.clone()];
        texts.extend(
            self.names
                .iter()
                .filter(|n| n.origin != NameOrigin::Original)
                .map(|n| n.text.clone()),
        );
        texts
    }
}

/// An enrichment result set with by-reference lookup; what the indexes are
/// built from and what the ranking stage reads candidate metadata from.
#[derive(Debug, Clone, Default)]
pub struct EnrichmentSet {
    columns: Vec<EnrichedColumn>,
    by_ref: std::collections::HashMap<ColumnRef, usize>,
}

impl EnrichmentSet {
    pub fn new(columns: Vec<EnrichedColumn>) -> Self {
        let by_ref = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.reference().clone(), i))
            .collect();
        Self { columns, by_ref }
    }

    pub fn get(&self, reference: &ColumnRef) -> Option<&EnrichedColumn> {
        self.by_ref.get(reference).map(|&i| &self.columns[i])
    }

    pub fn columns(&self) -> &[EnrichedColumn] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
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

/// Prompt asking for `count` expanded names; embeds all four metadata
/// fields plus the e-commerce one-shot example.
pub fn build_expansion_prompt(column: &ColumnMeta, table: &TableMeta, count: usize) -> String {
    fill(
        EXPANSION_TEMPLATE,
        &[
            ("count", &count.to_string()),
            ("example", EXPANSION_EXAMPLE.trim()),
            ("table_name", &table.name),
            ("table_description", or_placeholder(&table.description)),
            ("column_name", &column.reference.column_name),
            ("column_description", or_placeholder(&column.description)),
        ],
    )
}

/// Prompt asking for `count` cross-terminology names. Includes the table
/// and column names but never the column description, and forbids reusing
/// any word from either name.
pub fn build_cross_terminology_prompt(
    column: &ColumnMeta,
    table: &TableMeta,
    count: usize,
) -> String {
    fill(
        CROSS_TERMINOLOGY_TEMPLATE,
        &[
            ("count", &count.to_string()),
            ("example", CROSS_TERMINOLOGY_EXAMPLE.trim()),
            ("table_name", &table.name),
            ("column_name", &column.reference.column_name),
        ],
    )
}

/// Extract the generated names from a model response: the last
/// `<names>...</names>` block, one name per line, with list numbering
/// stripped.
pub fn parse_generated_names(response: &str) -> Result<Vec<String>, String> {
    let block = extract_block(response, "<names>", "</names>")?;
    let names: Vec<String> = block.lines().filter_map(strip_list_marker).collect();
    if names.is_empty() {
        return Err("the <names> block contained no names".into());
    }
    Ok(names)
}

pub(crate) fn extract_block(response: &str, open: &str, close: &str) -> Result<String, String> {
    let start = response
        .rfind(open)
        .ok_or_else(|| format!("missing {open} block"))?;
    let after = &response[start + open.len()..];
    let end = after
        .find(close)
        .ok_or_else(|| format!("missing {close} terminator"))?;
    Ok(after[..end].to_string())
}

pub(crate) fn strip_list_marker(line: &str) -> Option<String> {
    let mut rest = line.trim();
    rest = rest.strip_prefix('-').unwrap_or(rest).trim_start();
    if let Some(dot) = rest.find('.')
        && rest[..dot].chars().all(|c| c.is_ascii_digit())
        && dot > 0
    {
        rest = rest[dot + 1..].trim_start();
    }
    let rest = rest.trim();
    if rest.is_empty() {
        None
    } else {
        Some(rest.to_string())
    }
}

/// Ask the provider once, and once more with a repair instruction if the
/// reply does not parse.
fn generate_names(
    llm: &dyn TextGenerator,
    prompt: &str,
    column: &ColumnRef,
) -> Result<Vec<String>, EnrichError> {
    let response = llm.generate(&GenerationRequest::new(prompt))?;
    match parse_generated_names(&response) {
        Ok(names) => Ok(names),
        Err(first_error) => {
            let repair = format!(
                "{prompt}\n\nYour previous reply could not be parsed ({first_error}). \
                 Reply again with ONLY the <names> block in the requested format."
            );
            let response = llm.generate(&GenerationRequest::new(repair))?;
            parse_generated_names(&response).map_err(|detail| EnrichError::UnparsableResponse {
                column: column.clone(),
                detail,
            })
        }
    }
}

/// Generate, normalize, filter, deduplicate, and truncate the names for one
/// column, then append the normalized original name.
pub fn enrich_column(
    column: &ColumnMeta,
    table: &TableMeta,
    config: &EnrichmentConfig,
    llm: &dyn TextGenerator,
) -> Result<EnrichedColumn, EnrichError> {
    config.validate()?;

    let original = normalize_name(&column.reference.column_name);
    let forbidden: HashSet<String> = normalize_name(&table.name)
        .tokens
        .into_iter()
        .chain(original.tokens.iter().cloned())
        .collect();

    // The original's token sequence is reserved up front so a generated
    // duplicate of it never produces a second document.
    let mut seen: HashSet<Vec<String>> = HashSet::from([original.tokens.clone()]);
    let mut names = Vec::new();

    let mut keep = |generated: Vec<String>, origin: NameOrigin, names: &mut Vec<EnrichedName>| {
        let mut kept = 0;
        for (i, text) in generated.into_iter().enumerate() {
            if kept == config.num_names {
                break;
            }
            let tokens = normalize_name(&text);
            if tokens.is_empty() {
                continue;
            }
            if origin == NameOrigin::CrossTerminology
                && tokens.tokens.iter().any(|t| forbidden.contains(t))
            {
                continue;
            }
            if !seen.insert(tokens.tokens.clone()) {
                continue;
            }
            names.push(EnrichedName {
                text,
                tokens,
                origin,
                position: i + 1,
            });
            kept += 1;
        }
    };

    if config.use_expansion_prompt {
        let prompt = build_expansion_prompt(column, table, config.generate_count);
        let generated = generate_names(llm, &prompt, &column.reference)?;
        keep(generated, NameOrigin::Expansion, &mut names);
    }
    if config.use_cross_terminology_prompt {
        let prompt = build_cross_terminology_prompt(column, table, config.generate_count);
        let generated = generate_names(llm, &prompt, &column.reference)?;
        keep(generated, NameOrigin::CrossTerminology, &mut names);
    }

    names.push(EnrichedName {
        text: column.reference.column_name.clone(),
        tokens: original,
        origin: NameOrigin::Original,
        position: 1,
    });

    Ok(EnrichedColumn {
        meta: column.clone(),
        table_description: table.description.clone(),
        names,
    })
}

/// Enrich every column of a schema, up to `parallelism` provider calls in
/// flight. Output order matches schema order regardless of scheduling.
pub fn enrich_schema(
    schema: &SchemaDef,
    config: &EnrichmentConfig,
    llm: &dyn TextGenerator,
    parallelism: usize,
) -> Result<Vec<EnrichedColumn>, EnrichError> {
    config.validate()?;
    let jobs: Vec<(&TableMeta, &ColumnMeta)> = schema.columns().collect();
    parallel_map(parallelism, &jobs, |(table, column)| {
        enrich_column(column, table, config, llm)
    })
    .into_iter()
    .collect()
}
