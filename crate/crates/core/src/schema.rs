//! Schema, column, and ground-truth mapping types, plus file loaders.
//!
//! A schema file is a single JSON document with a top-level `name` and
//! `tables[]`, each table carrying `name`, `description`, and `columns[]`
//! of `{name, description, data_type?}`. Ground truth is a delimited file
//! of `source_table, source_column, target_table, target_column` rows where
//! the literal token `NA` in both target fields marks a source column with
//! no counterpart in the target schema.
//!
//! Identifier equality is case-insensitive everywhere (the canonical form
//! is lowercase); the case as written in the file is preserved for display.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema '{schema}' contains duplicate table '{table}'")]
    DuplicateTable { schema: String, table: String },
    #[error("table '{table}' contains duplicate column '{column}'")]
    DuplicateColumn { table: String, column: String },
    #[error("schema '{schema}' has no tables")]
    EmptySchema { schema: String },
    #[error("table '{table}' has no columns")]
    EmptyTable { table: String },
    #[error("empty {field} in table '{context}'")]
    EmptyIdentifier {
        field: &'static str,
        context: String,
    },
    #[error("{side} column {reference} not found in schema '{schema}'")]
    UnknownColumn {
        side: &'static str,
        reference: ColumnRef,
        schema: String,
    },
    #[error("ground truth row {row}: source {reference} mixes NA with concrete targets")]
    MixedNa { row: usize, reference: ColumnRef },
    #[error("ground truth row {row}: expected 4 fields, got {got}")]
    BadRow { row: usize, got: usize },
}

/// Reference to a column by table and column name.
///
/// Equality, ordering, and hashing are case-insensitive on both fields;
/// the original casing is preserved for display.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table_name: String,
    pub column_name: String,
}

impl ColumnRef {
    pub fn new(table_name: impl Into<String>, column_name: impl Into<String>) -> Self {
        Self {
            table_name: table_name.into(),
            column_name: column_name.into(),
        }
    }

    /// Lowercase (table, column) pair used for comparisons and map keys.
    pub fn canonical(&self) -> (String, String) {
        (
            self.table_name.to_lowercase(),
            self.column_name.to_lowercase(),
        )
    }
}

impl PartialEq for ColumnRef {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for ColumnRef {}

impl std::hash::Hash for ColumnRef {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical().hash(state);
    }
}

impl PartialOrd for ColumnRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ColumnRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical().cmp(&other.canonical())
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table_name, self.column_name)
    }
}

/// A column with its metadata. `reference.table_name` always matches the
/// owning table's name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub reference: ColumnRef,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub data_type: Option<String>,
}

/// A table with its description and columns. Column names are unique within
/// the table (case-insensitively).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub columns: Vec<ColumnMeta>,
}

/// A full relational schema: a named, non-empty list of tables with unique
/// names, each holding at least one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDef {
    pub name: String,
    pub tables: Vec<TableMeta>,
}

impl SchemaDef {
    /// Validate all structural invariants. Called by [`load_schema`]; also
    /// useful for schemas constructed in code.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.tables.is_empty() {
            return Err(SchemaError::EmptySchema {
                schema: self.name.clone(),
            });
        }
        let mut table_names = HashSet::new();
        for table in &self.tables {
            if table.name.trim().is_empty() {
                return Err(SchemaError::EmptyIdentifier {
                    field: "table name",
                    context: self.name.clone(),
                });
            }
            if !table_names.insert(table.name.to_lowercase()) {
                return Err(SchemaError::DuplicateTable {
                    schema: self.name.clone(),
                    table: table.name.clone(),
                });
            }
            if table.columns.is_empty() {
                return Err(SchemaError::EmptyTable {
                    table: table.name.clone(),
                });
            }
            let mut column_names = HashSet::new();
            for column in &table.columns {
                if column.reference.column_name.trim().is_empty() {
                    return Err(SchemaError::EmptyIdentifier {
                        field: "column name",
                        context: table.name.clone(),
                    });
                }
                if column.reference.table_name.to_lowercase() != table.name.to_lowercase() {
                    return Err(SchemaError::UnknownColumn {
                        side: "declared",
                        reference: column.reference.clone(),
                        schema: self.name.clone(),
                    });
                }
                if !column_names.insert(column.reference.column_name.to_lowercase()) {
                    return Err(SchemaError::DuplicateColumn {
                        table: table.name.clone(),
                        column: column.reference.column_name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableMeta> {
        let needle = name.to_lowercase();
        self.tables.iter().find(|t| t.name.to_lowercase() == needle)
    }

    pub fn column(&self, reference: &ColumnRef) -> Option<&ColumnMeta> {
        self.table(&reference.table_name)?
            .columns
            .iter()
            .find(|c| c.reference == *reference)
    }

    pub fn contains(&self, reference: &ColumnRef) -> bool {
        self.column(reference).is_some()
    }

    /// All columns paired with their owning table, in schema order.
    pub fn columns(&self) -> impl Iterator<Item = (&TableMeta, &ColumnMeta)> {
        self.tables
            .iter()
            .flat_map(|t| t.columns.iter().map(move |c| (t, c)))
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }
}

/// On-disk shape of a column entry: the table name is implied by context.
#[derive(Debug, Serialize, Deserialize)]
struct ColumnFile {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_type: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    name: String,
    #[serde(default)]
    description: String,
    columns: Vec<ColumnFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    name: String,
    tables: Vec<TableFile>,
}

/// Load and validate a schema definition from a JSON file.
pub fn load_schema(path: &Path) -> Result<SchemaDef, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_schema(&text, &path.display().to_string())
}

/// Parse a schema document from its JSON text. `origin` is used in error
/// messages only.
pub fn parse_schema(text: &str, origin: &str) -> Result<SchemaDef, SchemaError> {
    let file: SchemaFile = serde_json::from_str(text).map_err(|e| SchemaError::Parse {
        path: origin.to_string(),
        // serde_json errors already carry line/column context.
        message: e.to_string(),
    })?;
    let schema = SchemaDef {
        name: file.name,
        tables: file
            .tables
            .into_iter()
            .map(|t| TableMeta {
                columns: t
                    .columns
                    .into_iter()
                    .map(|c| ColumnMeta {
                        reference: ColumnRef::new(t.name.clone(), c.name),
                        description: c.description,
                        data_type: c.data_type,
                    })
                    .collect(),
                name: t.name,
                description: t.description,
            })
            .collect(),
    };
    schema.validate()?;
    Ok(schema)
}

/// Serialize a schema back to its file format.
pub fn schema_to_json(schema: &SchemaDef) -> String {
    let file = SchemaFile {
        name: schema.name.clone(),
        tables: schema
            .tables
            .iter()
            .map(|t| TableFile {
                name: t.name.clone(),
                description: t.description.clone(),
                columns: t
                    .columns
                    .iter()
                    .map(|c| ColumnFile {
                        name: c.reference.column_name.clone(),
                        description: c.description.clone(),
                        data_type: c.data_type.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("schema serialization");
    out.push('\n');
    out
}

/// Ground-truth mapping from source columns to sets of target columns.
///
/// An entry with an empty target set is a loaded NA row (the source column
/// is known to have no target counterpart) and is distinct from an absent
/// entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub entries: IndexMap<ColumnRef, Vec<ColumnRef>>,
}

impl GroundTruth {
    pub fn targets(&self, source: &ColumnRef) -> Option<&[ColumnRef]> {
        self.entries.get(source).map(|v| v.as_slice())
    }

    /// True when any source column maps to more than one target (m:n data).
    pub fn has_multi_target(&self) -> bool {
        self.entries.values().any(|targets| targets.len() > 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

const GT_HEADER: [&str; 4] = [
    "source_table",
    "source_column",
    "target_table",
    "target_column",
];

/// Load a ground-truth file and validate every reference against the two
/// schemas. Rows with `NA` in both target fields yield an entry with an
/// empty target set. A header row matching the canonical field names is
/// skipped if present.
pub fn load_ground_truth(
    path: &Path,
    source: &SchemaDef,
    target: &SchemaDef,
) -> Result<GroundTruth, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ground_truth(&text, source, target).map_err(|e| match e {
        SchemaError::Parse { message, .. } => SchemaError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parse ground-truth rows from delimited text.
pub fn parse_ground_truth(
    text: &str,
    source: &SchemaDef,
    target: &SchemaDef,
) -> Result<GroundTruth, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut gt = GroundTruth::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SchemaError::Parse {
            path: String::new(),
            message: format!("row {row}: {e}"),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != 4 {
            return Err(SchemaError::BadRow {
                row,
                got: record.len(),
            });
        }
        let fields: Vec<&str> = record.iter().collect();
        if row == 1
            && fields
                .iter()
                .zip(GT_HEADER)
                .all(|(f, h)| f.eq_ignore_ascii_case(h))
        {
            continue;
        }

        let source_ref = ColumnRef::new(fields[0], fields[1]);
        if !source.contains(&source_ref) {
            return Err(SchemaError::UnknownColumn {
                side: "source",
                reference: source_ref,
                schema: source.name.clone(),
            });
        }

        let is_na = fields[2].eq_ignore_ascii_case("NA") && fields[3].eq_ignore_ascii_case("NA");
        if is_na {
            // NA marks an unmatchable column: the entry must exist and stay
            // empty, and mixing NA with concrete targets is contradictory.
            match gt.entries.entry(source_ref.clone()) {
                indexmap::map::Entry::Occupied(e) if !e.get().is_empty() => {
                    return Err(SchemaError::MixedNa {
                        row,
                        reference: source_ref,
                    });
                }
                e => {
                    e.or_default();
                }
            }
            continue;
        }

        let target_ref = ColumnRef::new(fields[2], fields[3]);
        if !target.contains(&target_ref) {
            return Err(SchemaError::UnknownColumn {
                side: "target",
                reference: target_ref,
                schema: target.name.clone(),
            });
        }
        if gt.entries.get(&source_ref).is_some_and(Vec::is_empty) {
            return Err(SchemaError::MixedNa {
                row,
                reference: source_ref,
            });
        }
        let entry = gt.entries.entry(source_ref).or_default();
        if !entry.contains(&target_ref) {
            entry.push(target_ref);
        }
    }
    Ok(gt)
}
