//! The four lifecycle commands: `index`, `match`, `evaluate`, and the
//! `ablate` sweep driver. Every artifact is stamped with the config
//! fingerprint; `match` refuses stale artifacts and `evaluate` refuses
//! manifests built against different schema files.

use std::path::{Path, PathBuf};

use tracing::info;

use schematch_core::artifact::{
    EnrichmentArtifact, IndexArtifactHashes, LexicalIndexArtifact, RunManifest,
    VectorIndexArtifact, file_sha256, sha256_hex, write_text,
};
use schematch_core::enrich::{EnrichmentSet, enrich_schema};
use schematch_core::eval::{MetricsReport, evaluate, per_query_detail_csv};
use schematch_core::pipeline::{
    AblationFlags, MatchConfig, build_indexes, match_schema, needle_baseline,
};
use schematch_core::schema::{GroundTruth, SchemaDef, load_ground_truth, load_schema};

use crate::CliError;
use crate::config::RunConfig;

pub const ENRICHMENT_FILE: &str = "target_enrichment.json";
pub const LEXICAL_FILE: &str = "lexical_index.json";
pub const VECTOR_FILE: &str = "vector_index.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const NEEDLE_MANIFEST_FILE: &str = "manifest_needle.json";

/// Baseline mode selector for `match`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Needle,
}

pub struct IndexPaths {
    pub enrichment: PathBuf,
    pub lexical: PathBuf,
    pub vector: PathBuf,
}

impl IndexPaths {
    fn of(config: &RunConfig) -> Self {
        let dir = &config.paths.artifact_dir;
        Self {
            enrichment: dir.join(ENRICHMENT_FILE),
            lexical: dir.join(LEXICAL_FILE),
            vector: dir.join(VECTOR_FILE),
        }
    }

    fn all_exist(&self) -> bool {
        self.enrichment.is_file() && self.lexical.is_file() && self.vector.is_file()
    }
}

fn load_schemas(config: &RunConfig) -> Result<(SchemaDef, SchemaDef), CliError> {
    let source = load_schema(&config.paths.source_schema)?;
    let target = load_schema(&config.paths.target_schema)?;
    Ok((source, target))
}

fn ground_truth(
    config: &RunConfig,
    source: &SchemaDef,
    target: &SchemaDef,
) -> Result<GroundTruth, CliError> {
    let Some(path) = &config.paths.ground_truth else {
        return Err(CliError::Validation(
            "paths.ground_truth is required for evaluation".into(),
        ));
    };
    Ok(load_ground_truth(path, source, target)?)
}

/// Enrich the target schema and write the enrichment plus both index
/// artifacts. A rerun against unchanged inputs is a no-op unless `rebuild`
/// is set.
pub fn cmd_index(
    config: &RunConfig,
    flags: &AblationFlags,
    rebuild: bool,
) -> Result<IndexPaths, CliError> {
    let (_, target) = load_schemas(config)?;
    let fingerprint = config.fingerprint(flags)?;
    let paths = IndexPaths::of(config);

    if !rebuild && paths.all_exist() {
        let fresh = EnrichmentArtifact::load(&paths.enrichment, &fingerprint).is_ok()
            && LexicalIndexArtifact::load(&paths.lexical, &fingerprint).is_ok()
            && VectorIndexArtifact::load(&paths.vector, &fingerprint).is_ok();
        if fresh {
            info!(
                "index artifacts are up to date (config {})",
                &fingerprint[..12]
            );
            return Ok(paths);
        }
    }

    let providers = config.providers()?;
    let document_config = flags.document_enrichment_config(&config.enrichment);
    info!(
        "enriching {} target columns (expansion: {}, cross-terminology: {})",
        target.column_count(),
        document_config.use_expansion_prompt,
        document_config.use_cross_terminology_prompt
    );
    let columns = enrich_schema(
        &target,
        &document_config,
        &providers.generator,
        config.provider.parallelism,
    )?;
    let enrichment = EnrichmentArtifact::new(
        &fingerprint,
        &target.name,
        "target",
        document_config,
        columns,
    );
    enrichment.save(&paths.enrichment)?;

    let set = EnrichmentSet::new(enrichment.columns);
    let (lexical, vector) = build_indexes(&set, config.bm25, &providers.embedder)?;
    info!(
        "built lexical index ({} docs) and vector index ({} docs, dim {})",
        lexical.len(),
        vector.len(),
        vector.dimension()
    );
    LexicalIndexArtifact::from_index(&lexical, &fingerprint).save(&paths.lexical)?;
    VectorIndexArtifact::from_index(&vector, providers.embedder.id(), &fingerprint)
        .save(&paths.vector)?;
    Ok(paths)
}

/// Match every source column and write the run manifest. Requires fresh
/// index artifacts (built on demand with `rebuild`); the needle baseline
/// requires none.
pub fn cmd_match(
    config: &RunConfig,
    flags: &AblationFlags,
    baseline: Option<Baseline>,
    rebuild: bool,
) -> Result<PathBuf, CliError> {
    let (source, target) = load_schemas(config)?;
    let fingerprint = config.fingerprint(flags)?;
    let providers = config.providers()?;
    let source_schema_hash = file_sha256(&config.paths.source_schema)?;
    let target_schema_hash = file_sha256(&config.paths.target_schema)?;

    let manifest = match baseline {
        Some(Baseline::Needle) => {
            info!("running the needle-in-the-stack baseline (no indexes)");
            let outcome = needle_baseline(
                &source,
                &target,
                &providers.generator,
                config.emit_k,
                config.provider.context_budget_tokens,
                config.provider.parallelism,
            );
            RunManifest {
                version: schematch_core::artifact::ARTIFACT_VERSION,
                config_hash: fingerprint,
                source_schema: source.name.clone(),
                target_schema: target.name.clone(),
                source_schema_hash,
                target_schema_hash,
                generator_id: providers.generator.id().to_string(),
                embedder_id: None,
                baseline: Some("needle".into()),
                ablation: *flags,
                index_artifacts: None,
                predictions: outcome.predictions,
                failures: outcome.failures,
            }
        }
        None => {
            let paths = if rebuild {
                cmd_index(config, flags, true)?
            } else {
                IndexPaths::of(config)
            };
            let enrichment = EnrichmentArtifact::load(&paths.enrichment, &fingerprint)?;
            let lexical = LexicalIndexArtifact::load(&paths.lexical, &fingerprint)?;
            let vector = VectorIndexArtifact::load(&paths.vector, &fingerprint)?;
            let set = EnrichmentSet::new(enrichment.columns);

            let match_config = MatchConfig {
                retrieval: config.retrieval,
                enrichment: config.enrichment,
                ablation: *flags,
                emit_k: config.emit_k,
                parallelism: config.provider.parallelism,
                context_budget_tokens: config.provider.context_budget_tokens,
            };
            info!(
                "matching {} source columns against {} indexed names",
                source.column_count(),
                lexical.len()
            );
            let outcome = match_schema(
                &source,
                &target,
                &set,
                &lexical,
                &vector,
                &match_config,
                &providers.generator,
                &providers.embedder,
            )?;
            RunManifest {
                version: schematch_core::artifact::ARTIFACT_VERSION,
                config_hash: fingerprint,
                source_schema: source.name.clone(),
                target_schema: target.name.clone(),
                source_schema_hash,
                target_schema_hash,
                generator_id: providers.generator.id().to_string(),
                embedder_id: Some(providers.embedder.id().to_string()),
                baseline: None,
                ablation: *flags,
                index_artifacts: Some(IndexArtifactHashes {
                    lexical: file_sha256(&paths.lexical)?,
                    vector: file_sha256(&paths.vector)?,
                }),
                predictions: outcome.predictions,
                failures: outcome.failures,
            }
        }
    };

    if !manifest.failures.is_empty() {
        for failure in &manifest.failures {
            tracing::warn!("column {} failed: {}", failure.source, failure.error);
        }
    }
    let file = match baseline {
        Some(Baseline::Needle) => NEEDLE_MANIFEST_FILE,
        None => MANIFEST_FILE,
    };
    let path = config.paths.artifact_dir.join(file);
    manifest.save(&path)?;
    info!("wrote {}", path.display());
    Ok(path)
}

/// Score a manifest against the ground truth and write the metric reports.
/// `force` prints hit rate even for m:n ground truth.
pub fn cmd_evaluate(
    config: &RunConfig,
    manifest_path: Option<&Path>,
    ks_override: Option<&[usize]>,
    force: bool,
) -> Result<(MetricsReport, String), CliError> {
    let (source, target) = load_schemas(config)?;
    let gt = ground_truth(config, &source, &target)?;

    let default_path = config.paths.artifact_dir.join(MANIFEST_FILE);
    let path = manifest_path.unwrap_or(&default_path);
    let manifest = RunManifest::load(path)?;

    // The manifest must have been produced from these exact schema files.
    let source_schema_hash = file_sha256(&config.paths.source_schema)?;
    let target_schema_hash = file_sha256(&config.paths.target_schema)?;
    if manifest.source_schema_hash != source_schema_hash
        || manifest.target_schema_hash != target_schema_hash
    {
        return Err(CliError::Mismatch(format!(
            "manifest {} was produced from different schema files than the current config",
            path.display()
        )));
    }

    let ks = ks_override.unwrap_or(&config.eval.ks);
    if let (Some(&max_k), false) = (ks.iter().max(), ks.is_empty())
        && max_k > config.emit_k
    {
        return Err(CliError::Validation(format!(
            "k {max_k} exceeds the manifest's prediction depth (emit_k {})",
            config.emit_k
        )));
    }
    let dataset = format!("{} -> {}", manifest.source_schema, manifest.target_schema);
    let report = evaluate(
        &dataset,
        &manifest.predictions,
        &gt,
        ks,
        config.eval.na_policy,
    )?;

    let table = report.render_table(force);
    let dir = &config.paths.artifact_dir;
    let report_json = serde_json::to_string_pretty(&report).expect("report serialization");
    write_text(&dir.join("metrics.json"), &report_json)?;
    write_text(&dir.join("metrics.txt"), &table)?;
    write_text(
        &dir.join("per_query.csv"),
        &per_query_detail_csv(&manifest.predictions, &gt),
    )?;
    Ok((report, table))
}

type FlagToggle = fn(&mut AblationFlags);

/// All six single-flag ablations from the full configuration.
pub const ABLATION_AXES: [(&str, FlagToggle); 6] = [
    ("query_enrichment", |f| f.query_enrichment = false),
    ("document_enrichment", |f| f.document_enrichment = false),
    ("name_expansion_prompt", |f| f.name_expansion_prompt = false),
    ("embedding_search", |f| f.embedding_search = false),
    ("fulltext_search", |f| f.fulltext_search = false),
    ("table_selection", |f| f.table_selection = false),
];

/// Sweep driver: run the full pipeline plus each single-flag ablation into
/// its own artifact subdirectory, evaluate them all, and render a
/// comparative table.
pub fn cmd_ablate(
    config: &RunConfig,
    ks_override: Option<&[usize]>,
    rebuild: bool,
) -> Result<String, CliError> {
    let ks = ks_override.unwrap_or(&config.eval.ks).to_vec();
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();

    let mut run = |label: &str, flags: AblationFlags, sub_dir: &str| -> Result<(), CliError> {
        let mut run_config = config.clone();
        run_config.paths.artifact_dir = config.paths.artifact_dir.join("ablate").join(sub_dir);
        info!("ablation run: {label}");
        cmd_index(&run_config, &flags, rebuild)?;
        let manifest = cmd_match(&run_config, &flags, None, false)?;
        let (report, _) = cmd_evaluate(&run_config, Some(&manifest), Some(&ks), true)?;
        rows.push((label.to_string(), report));
        Ok(())
    };

    run("full pipeline", AblationFlags::default(), "full")?;
    for (name, disable) in ABLATION_AXES {
        let mut flags = AblationFlags::default();
        disable(&mut flags);
        run(&format!("- {name}"), flags, name)?;
    }

    let mut table = String::new();
    table.push_str(&format!("{:<26}", "Configuration"));
    for k in &ks {
        table.push_str(&format!("{:>14}", format!("HitRate@{k}")));
    }
    table.push('\n');
    for (label, report) in &rows {
        table.push_str(&format!("{label:<26}"));
        for (_, rate) in &report.hit_rate {
            table.push_str(&format!("{:>13.2}%", rate * 100.0));
        }
        table.push('\n');
    }
    write_text(
        &config.paths.artifact_dir.join("ablation_report.txt"),
        &table,
    )?;
    Ok(table)
}

/// Hash of an arbitrary text, exposed for provenance messages.
pub fn content_hash(text: &str) -> String {
    sha256_hex(text.as_bytes())
}
