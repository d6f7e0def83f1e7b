//! Acceptance suite: one test per release criterion, each printing its own
//! pass/fail line. Oracles here are written independently of the engine's
//! code paths (literal formula evaluation, exhaustive scans, plain set
//! arithmetic) and every tolerance is pinned in the assertions.
//!
//! Run with `cargo test -p schematch-cli --test acceptance`.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use schematch_cli::commands::{self, Baseline, MANIFEST_FILE};
use schematch_cli::config::RunConfig;
use schematch_core::enrich::{EnrichedName, NameOrigin};
use schematch_core::eval::{NaPolicy, hit_rate_at_k, recall_at_k};
use schematch_core::lexical::{Bm25Params, LexicalDoc, build_lexical_index, lexical_search};
use schematch_core::normalize::{TokenizedName, normalize_name};
use schematch_core::pipeline::{AblationFlags, RankedPrediction};
use schematch_core::provider::EmbeddingVector;
use schematch_core::schema::{ColumnRef, GroundTruth, load_ground_truth, load_schema};
use schematch_core::vector::{VectorDoc, build_vector_index, vector_search};

// ---------------------------------------------------------------------
// Criterion 1: BM25 oracle equivalence
// ---------------------------------------------------------------------

fn word(id: usize) -> String {
    let hi = char::from(b'a' + (id / 26 % 26) as u8);
    let lo = char::from(b'a' + (id % 26) as u8);
    format!("w{hi}{lo}")
}

fn lexical_doc(doc_id: usize, tokens: Vec<String>) -> LexicalDoc {
    LexicalDoc {
        doc_id,
        target: ColumnRef::new("t", format!("c{doc_id}")),
        name: EnrichedName {
            text: tokens.join(" "),
            tokens: TokenizedName {
                raw: tokens.join(" "),
                tokens,
            },
            origin: NameOrigin::Original,
            position: 1,
        },
    }
}

/// Literal evaluation of the documented scoring formula over every
/// document: no inverted index, no shared code with the engine.
fn bm25_oracle(
    corpus: &[Vec<String>],
    k1: f64,
    b: f64,
    query: &[String],
    top_k: usize,
    threshold: f64,
) -> Vec<(usize, f64)> {
    let n = corpus.len() as f64;
    let avgdl = corpus.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let mut scored: Vec<(usize, f64)> = corpus
        .iter()
        .enumerate()
        .filter(|(_, doc)| query.iter().any(|t| doc.contains(t)))
        .map(|(i, doc)| {
            let mut score = 0.0;
            for term in query {
                let df = corpus.iter().filter(|d| d.contains(term)).count() as f64;
                if df == 0.0 {
                    continue;
                }
                let tf = doc.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score +=
                    idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avgdl));
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
fn c1_bm25_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let vocab = rng.random_range(5..=50);
        let n_docs = rng.random_range(1..=200);
        let corpus: Vec<Vec<String>> = (0..n_docs)
            .map(|_| {
                let len = rng.random_range(0..=10);
                (0..len).map(|_| word(rng.random_range(0..vocab))).collect()
            })
            .collect();
        let docs: Vec<LexicalDoc> = corpus
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, tokens)| lexical_doc(i, tokens))
            .collect();
        let index = build_lexical_index(docs, Bm25Params::default()).unwrap();

        for _ in 0..4 {
            let query: Vec<String> = (0..rng.random_range(1..=4))
                .map(|_| word(rng.random_range(0..vocab + 3)))
                .collect();
            let top_k = rng.random_range(1..=20);
            let threshold = *[0.0, 0.5, 1.0].choose(&mut rng).unwrap();
            let expected = bm25_oracle(&corpus, 1.2, 0.75, &query, top_k, threshold);
            let got = lexical_search(
                &index,
                &TokenizedName {
                    raw: query.join(" "),
                    tokens: query.clone(),
                },
                top_k,
                threshold,
            );
            assert_eq!(got.len(), expected.len(), "hit counts diverge");
            for (hit, (doc_id, score)) in got.iter().zip(&expected) {
                assert_eq!(hit.matched_doc, *doc_id, "ranking diverges");
                assert!(
                    (hit.score - score).abs() < 1e-9,
                    "score {} vs oracle {score}",
                    hit.score
                );
            }
        }
    }
    assert!(
        start.elapsed() < Duration::from_secs(10),
        "{:?}",
        start.elapsed()
    );
}

// ---------------------------------------------------------------------
// Criterion 2: vector-search exactness
// ---------------------------------------------------------------------

fn random_unit(rng: &mut ChaCha8Rng, dimension: usize) -> EmbeddingVector {
    loop {
        let values: Vec<f64> = (0..dimension)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        if let Ok(unit) = EmbeddingVector::new(values).normalized() {
            return unit;
        }
    }
}

#[test]
fn c2_vector_search_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for round in 0..50 {
        let dimension = if round % 2 == 0 { 16 } else { 384 };
        let n_docs = rng.random_range(1..=500);
        let docs: Vec<VectorDoc> = (0..n_docs)
            .map(|doc_id| VectorDoc {
                doc_id,
                target: ColumnRef::new("t", format!("c{doc_id}")),
                name: EnrichedName {
                    text: format!("n{doc_id}"),
                    tokens: normalize_name("n"),
                    origin: NameOrigin::Original,
                    position: 1,
                },
                vector: random_unit(&mut rng, dimension),
            })
            .collect();
        let vectors: Vec<EmbeddingVector> = docs.iter().map(|d| d.vector.clone()).collect();
        let index = build_vector_index(docs).unwrap();

        for _ in 0..4 {
            let query = random_unit(&mut rng, dimension);
            let top_k = rng.random_range(1..=25);
            let threshold = rng.random_range(-0.5..0.5);

            // Oracle: exhaustive scan, sort, threshold, truncate.
            let mut expected: Vec<(usize, f64)> = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (i, query.dot(v)))
                .filter(|(_, s)| *s >= threshold)
                .collect();
            expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            expected.truncate(top_k);

            let got = vector_search(&index, &query, top_k, threshold).unwrap();
            assert_eq!(got.len(), expected.len(), "hit counts diverge");
            for (hit, (doc_id, similarity)) in got.iter().zip(&expected) {
                assert_eq!(hit.matched_doc, *doc_id, "ordering diverges");
                assert!(
                    (hit.similarity - similarity).abs() < 1e-9,
                    "similarity {} vs oracle {similarity}",
                    hit.similarity
                );
            }
        }
    }
    assert!(
        start.elapsed() < Duration::from_secs(10),
        "{:?}",
        start.elapsed()
    );
}

// ---------------------------------------------------------------------
// Criterion 3: metric correctness
// ---------------------------------------------------------------------

#[test]
fn c3_metric_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let source = |i: usize| ColumnRef::new("s", format!("col{i}"));
    let target = |i: usize| ColumnRef::new("t", format!("col{i}"));

    for fixture in 0..100 {
        let one_to_one = fixture % 2 == 0;
        let n_queries = rng.random_range(1..=15);
        let mut gt = GroundTruth::default();
        let mut predictions = Vec::new();
        for i in 0..n_queries {
            let gt_size = if one_to_one {
                1
            } else {
                rng.random_range(0..=4)
            };
            let mut pool: Vec<usize> = (0..40).collect();
            pool.shuffle(&mut rng);
            gt.entries.insert(
                source(i),
                pool[..gt_size].iter().map(|&t| target(t)).collect(),
            );
            let mut ranked: Vec<usize> = (0..40).collect();
            ranked.shuffle(&mut rng);
            ranked.truncate(rng.random_range(0..=10));
            predictions.push(RankedPrediction {
                source: source(i),
                ranked_targets: ranked.iter().map(|&t| target(t)).collect(),
            });
        }

        for k in [1, 3, 5] {
            // Independent recount with plain set arithmetic.
            let mut n = 0usize;
            let mut hits = 0usize;
            let mut recall_sum = 0.0;
            for p in &predictions {
                let targets = gt.targets(&p.source).unwrap();
                if targets.is_empty() {
                    continue; // default NA policy: excluded
                }
                n += 1;
                let prefix: Vec<&ColumnRef> = p.ranked_targets.iter().take(k).collect();
                let found = targets.iter().filter(|t| prefix.contains(t)).count();
                if found > 0 {
                    hits += 1;
                }
                recall_sum += found as f64 / targets.len() as f64;
            }
            let expected_hr = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
            let expected_rc = if n == 0 { 0.0 } else { recall_sum / n as f64 };

            let hr = hit_rate_at_k(&predictions, &gt, k, NaPolicy::Exclude).unwrap();
            let rc = recall_at_k(&predictions, &gt, k, NaPolicy::Exclude).unwrap();
            assert_eq!(hr, expected_hr, "hit rate disagrees with the recount");
            assert!(
                (rc - expected_rc).abs() < 1e-12,
                "recall disagrees: {rc} vs {expected_rc}"
            );
            if one_to_one {
                assert_eq!(
                    hr.to_bits(),
                    rc.to_bits(),
                    "1:1 ground truth must make the metrics bit-identical"
                );
            }
        }
    }
    assert!(
        start.elapsed() < Duration::from_secs(5),
        "{:?}",
        start.elapsed()
    );
}

// ---------------------------------------------------------------------
// Criterion 4: normalization property suite
// ---------------------------------------------------------------------

#[test]
fn c4_normalization_property_suite() {
    assert_eq!(normalize_name("LocationID").tokens, ["location", "id"]);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let fragments = [
        "visit",
        "ID",
        "Occurrence",
        "DOB",
        "x",
        "Qty",
        "CODE",
        "startDate",
        "HADM",
        "n2o",
    ];
    let separators = ["_", "", " ", "-", ".", "(", ")", "2", "42", "__"];
    for _ in 0..1000 {
        let mut raw = String::new();
        for _ in 0..rng.random_range(0..6) {
            raw.push_str(fragments.choose(&mut rng).unwrap());
            raw.push_str(separators.choose(&mut rng).unwrap());
        }
        let first = normalize_name(&raw);
        for token in &first.tokens {
            assert!(!token.is_empty());
            for c in token.chars() {
                assert!(
                    !c.is_ascii_digit(),
                    "digit survived in {token:?} from {raw:?}"
                );
                assert!(
                    !c.is_uppercase(),
                    "uppercase survived in {token:?} from {raw:?}"
                );
                assert!(
                    c.is_alphabetic(),
                    "punctuation survived in {token:?} from {raw:?}"
                );
            }
        }
        let second = normalize_name(&first.joined());
        assert_eq!(first.tokens, second.tokens, "not idempotent on {raw:?}");
    }
}

// ---------------------------------------------------------------------
// Criteria 5-8: end-to-end runs over the bundled fixture pair
// ---------------------------------------------------------------------

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
        for file in [
            "source_schema.json",
            "target_schema.json",
            "ground_truth.csv",
        ] {
            fs::copy(fixtures.join(file), root.join(file)).unwrap();
        }
        fs::write(
            root.join("config.toml"),
            r#"
[paths]
source_schema = "source_schema.json"
target_schema = "target_schema.json"
ground_truth = "ground_truth.csv"
cache_dir = "cache"
artifact_dir = "artifacts"

[provider]
kind = "mock"
embedding_dimension = 384
parallelism = 4
"#,
        )
        .unwrap();
        Workspace { _dir: dir, root }
    }

    fn config(&self) -> RunConfig {
        RunConfig::load(&self.root.join("config.toml")).unwrap()
    }

    fn ground_truth(&self) -> GroundTruth {
        let source = load_schema(&self.root.join("source_schema.json")).unwrap();
        let target = load_schema(&self.root.join("target_schema.json")).unwrap();
        load_ground_truth(&self.root.join("ground_truth.csv"), &source, &target).unwrap()
    }

    /// index + match + evaluate under the given flags, in a dedicated
    /// artifact directory so runs never clobber each other.
    fn pipeline_hit_rate(&self, flags: AblationFlags, sub_dir: &str, k: usize) -> f64 {
        let mut config = self.config();
        config.paths.artifact_dir = self.root.join("artifacts").join(sub_dir);
        commands::cmd_index(&config, &flags, false).unwrap();
        let manifest_path = commands::cmd_match(&config, &flags, None, false).unwrap();
        let manifest = schematch_core::artifact::RunManifest::load(&manifest_path).unwrap();
        assert!(manifest.failures.is_empty(), "{:?}", manifest.failures);
        hit_rate_at_k(
            &manifest.predictions,
            &self.ground_truth(),
            k,
            NaPolicy::Exclude,
        )
        .unwrap()
    }
}

#[test]
fn c5_end_to_end_fixture_recovery() {
    let start = Instant::now();
    let workspace = Workspace::new();
    let config = workspace.config();
    commands::cmd_index(&config, &AblationFlags::default(), false).unwrap();
    commands::cmd_match(&config, &AblationFlags::default(), None, false).unwrap();
    let (report, _) = commands::cmd_evaluate(&config, None, None, false).unwrap();
    assert_eq!(report.n_queries, 10);
    assert_eq!(
        report.hit_rate[0],
        (1, 1.0),
        "the full pipeline must recover every planted match at rank 1"
    );
    assert!(
        start.elapsed() < Duration::from_secs(30),
        "{:?}",
        start.elapsed()
    );
}

#[test]
fn c6_ablation_ordering_on_the_fixture() {
    let workspace = Workspace::new();
    let full = workspace.pipeline_hit_rate(AblationFlags::default(), "full", 1);
    assert_eq!(full, 1.0);

    let no_query = workspace.pipeline_hit_rate(
        AblationFlags {
            query_enrichment: false,
            ..AblationFlags::default()
        },
        "no_query_enrichment",
        1,
    );
    let no_docs = workspace.pipeline_hit_rate(
        AblationFlags {
            document_enrichment: false,
            ..AblationFlags::default()
        },
        "no_document_enrichment",
        1,
    );
    assert!(
        no_query < full,
        "removing query enrichment must strictly lower HitRate@1 ({no_query} vs {full})"
    );
    assert!(
        no_docs < full,
        "removing document enrichment must strictly lower HitRate@1 ({no_docs} vs {full})"
    );
}

#[test]
fn c7_needle_baseline_runs_without_indexes_and_trails_the_pipeline() {
    let workspace = Workspace::new();
    let pipeline_hr5 = workspace.pipeline_hit_rate(AblationFlags::default(), "pipeline", 5);

    // Baseline in a bare artifact directory: no index artifacts exist.
    let mut config = workspace.config();
    config.paths.artifact_dir = workspace.root.join("artifacts").join("needle");
    let manifest_path = commands::cmd_match(
        &config,
        &AblationFlags::default(),
        Some(Baseline::Needle),
        false,
    )
    .unwrap();
    assert!(
        !config
            .paths
            .artifact_dir
            .join("lexical_index.json")
            .exists()
    );
    assert!(!config.paths.artifact_dir.join("vector_index.json").exists());

    let manifest = schematch_core::artifact::RunManifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.baseline.as_deref(), Some("needle"));
    assert!(manifest.index_artifacts.is_none());
    assert_eq!(manifest.predictions.len(), 11);
    assert!(manifest.failures.is_empty());

    let needle_hr5 = hit_rate_at_k(
        &manifest.predictions,
        &workspace.ground_truth(),
        5,
        NaPolicy::Exclude,
    )
    .unwrap();
    assert!(
        needle_hr5 < pipeline_hr5,
        "needle HitRate@5 ({needle_hr5}) must trail the pipeline ({pipeline_hr5})"
    );
}

#[test]
fn c8_reproducibility_of_full_runs() {
    let run = || -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let workspace = Workspace::new();
        let config = workspace.config();
        commands::cmd_index(&config, &AblationFlags::default(), false).unwrap();
        commands::cmd_match(&config, &AblationFlags::default(), None, false).unwrap();
        commands::cmd_evaluate(&config, None, None, false).unwrap();
        let artifact = |name: &str| fs::read(workspace.root.join("artifacts").join(name)).unwrap();
        (
            artifact(MANIFEST_FILE),
            artifact("metrics.json"),
            artifact("metrics.txt"),
        )
    };
    let (manifest_a, metrics_a, table_a) = run();
    let (manifest_b, metrics_b, table_b) = run();
    assert_eq!(manifest_a, manifest_b, "manifests must be byte-identical");
    assert_eq!(
        metrics_a, metrics_b,
        "metric reports must be byte-identical"
    );
    assert_eq!(table_a, table_b, "rendered tables must be byte-identical");
}

// ---------------------------------------------------------------------
// Criterion 9: threshold semantics at the paper defaults
// ---------------------------------------------------------------------

#[test]
fn c9_threshold_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let bm25_threshold = 1.0;
    let cosine_threshold = 0.5;

    for _ in 0..40 {
        // Lexical: random corpus, random queries, default threshold.
        let vocab = rng.random_range(3..=20);
        let n_docs = rng.random_range(1..=80);
        let docs: Vec<LexicalDoc> = (0..n_docs)
            .map(|i| {
                let len = rng.random_range(0..=6);
                lexical_doc(
                    i,
                    (0..len).map(|_| word(rng.random_range(0..vocab))).collect(),
                )
            })
            .collect();
        let index = build_lexical_index(docs, Bm25Params::default()).unwrap();
        for _ in 0..5 {
            let query: Vec<String> = (0..rng.random_range(1..=3))
                .map(|_| word(rng.random_range(0..vocab)))
                .collect();
            for hit in lexical_search(
                &index,
                &TokenizedName {
                    raw: query.join(" "),
                    tokens: query.clone(),
                },
                50,
                bm25_threshold,
            ) {
                assert!(
                    hit.score >= bm25_threshold,
                    "lexical hit below threshold: {}",
                    hit.score
                );
            }
        }

        // Vector: random unit vectors, default threshold.
        let dimension = 16;
        let docs: Vec<VectorDoc> = (0..rng.random_range(1..=80))
            .map(|doc_id| VectorDoc {
                doc_id,
                target: ColumnRef::new("t", format!("c{doc_id}")),
                name: EnrichedName {
                    text: "n".into(),
                    tokens: normalize_name("n"),
                    origin: NameOrigin::Original,
                    position: 1,
                },
                vector: random_unit(&mut rng, dimension),
            })
            .collect();
        let index = build_vector_index(docs).unwrap();
        for _ in 0..5 {
            let query = random_unit(&mut rng, dimension);
            for hit in vector_search(&index, &query, 50, cosine_threshold).unwrap() {
                assert!(
                    hit.similarity >= cosine_threshold,
                    "vector hit below threshold: {}",
                    hit.similarity
                );
            }
        }
    }
}
