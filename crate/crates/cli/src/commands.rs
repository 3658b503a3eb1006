//! The five pipeline verbs.

use std::fs;
use std::time::Instant;

use ssagcn_core::embedding_io::write_embeddings_tsv;
use ssagcn_core::graph::{cache, load_citation_dataset_with_stats, normalized_adjacency, Graph};
use ssagcn_core::model::{
    load_checkpoint, save_checkpoint, train_model, write_training_log, ModelInputs,
};
use ssagcn_core::node2vec::{generate_walks, skipgram_train};
use ssagcn_core::transe::{edges_to_triples, train_transe};
use ssagcn_core::Matrix;

use crate::artifacts::{read_trimmed, write_file, EmbeddingKind, Layout, FINGERPRINT_FILE};
use crate::config::{fingerprint_of, input_fingerprint, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::results::{
    aggregate, append_result, read_results, render_json, render_table, RunRecord, RunResult,
    Timings,
};
use crate::variant::{Variant, VariantSelection};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub cache_hit: bool,
}

/// Loads the raw dataset into the graph cache and writes one split file per
/// run. Does nothing when the cache already matches the raw inputs.
pub fn prepare(cfg: &ExperimentConfig) -> CliResult<PrepareSummary> {
    let layout = Layout::new(&cfg.experiment.output_dir);
    for p in [&cfg.dataset.content, &cfg.dataset.cites] {
        if !p.exists() {
            return Err(CliError::io(p, std::io::ErrorKind::NotFound.into()));
        }
    }
    let fp = input_fingerprint(&cfg.dataset)?;
    let dir = layout.graph_dir();
    let cached = read_trimmed(&dir.join(FINGERPRINT_FILE)).as_deref() == Some(fp.as_str())
        && [cache::NODES_FILE, cache::CLASSES_FILE, cache::EDGES_FILE, cache::FEATURES_FILE]
            .iter()
            .all(|f| dir.join(f).exists());
    let graph = if cached {
        log::info!("graph cache is current ({})", &fp[..12]);
        cache::load(&dir, false)?
    } else {
        let (graph, stats) = load_citation_dataset_with_stats(&cfg.dataset.content, &cfg.dataset.cites)?;
        log::info!(
            "{}: {} citation rows, {} dangling, {} self-loops, {} duplicates dropped",
            cfg.dataset.name,
            stats.citation_rows,
            stats.dangling,
            stats.self_loops,
            stats.duplicates
        );
        // A stale fingerprint must not survive a half-written cache.
        let _ = fs::remove_file(dir.join(FINGERPRINT_FILE));
        cache::save(&graph, &dir)?;
        write_file(&dir.join(FINGERPRINT_FILE), format!("{fp}\n"))?;
        graph
    };
    let feature_dim = if cached {
        read_feature_dim(&dir)?
    } else {
        graph.feature_dim()
    };
    for run in 0..cfg.experiment.num_runs {
        layout.split(graph.num_nodes(), split_seed(cfg, run))?;
    }
    Ok(PrepareSummary {
        num_nodes: graph.num_nodes(),
        num_edges: graph.num_edges(),
        num_classes: graph.num_classes(),
        feature_dim,
        cache_hit: cached,
    })
}

fn read_feature_dim(dir: &std::path::Path) -> CliResult<usize> {
    use std::io::Read;
    // magic (4 bytes), rows (u64), cols (u64)
    let path = dir.join(cache::FEATURES_FILE);
    let mut header = [0u8; 20];
    fs::File::open(&path)
        .and_then(|mut f| f.read_exact(&mut header))
        .map_err(|e| CliError::io(&path, e))?;
    Ok(u64::from_le_bytes(header[12..20].try_into().expect("8 bytes")) as usize)
}

pub fn split_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    if cfg.experiment.fixed_split {
        cfg.experiment.base_seed
    } else {
        cfg.experiment.base_seed + run as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSummary {
    pub rows: usize,
    pub dim: usize,
    pub cache_hit: bool,
    pub seconds: f64,
}

/// Trains one embedding table and writes it in node order.
pub fn embed(cfg: &ExperimentConfig, which: EmbeddingKind) -> CliResult<EmbedSummary> {
    let layout = Layout::new(&cfg.experiment.output_dir);
    let graph = layout.load_graph(false)?;
    let graph_fp = layout.graph_fingerprint()?;
    let stamp = match which {
        EmbeddingKind::Structure => format!("{graph_fp}:{}", fingerprint_of(&cfg.node2vec)),
        EmbeddingKind::Semantic => format!("{graph_fp}:{}", fingerprint_of(&cfg.transe)),
    };
    let path = layout.embedding(which);
    let fp_path = layout.embedding_fingerprint(which);
    if path.exists() && read_trimmed(&fp_path).as_deref() == Some(stamp.as_str()) {
        let file = layout.load_embedding(which, &graph)?;
        log::info!("{} embeddings are current", which.name());
        return Ok(EmbedSummary {
            rows: file.table.rows(),
            dim: file.table.cols(),
            cache_hit: true,
            seconds: 0.0,
        });
    }
    let start = Instant::now();
    let table: Matrix<f32> = match which {
        EmbeddingKind::Structure => {
            let walks = generate_walks(&graph, &cfg.node2vec)?;
            log::info!("{} walks generated", walks.len());
            skipgram_train::<f32>(&walks, graph.num_nodes(), &cfg.node2vec)?.into_matrix()
        }
        EmbeddingKind::Semantic => {
            let triples = edges_to_triples(&graph, cfg.transe.both_directions);
            let out = train_transe::<f32>(&triples, &cfg.transe)?;
            if let (Some(first), Some(last)) = (out.epoch_losses.first(), out.epoch_losses.last()) {
                log::info!("TransE loss {first:.4} -> {last:.4}");
            }
            write_embeddings_tsv(
                &layout.relations(),
                &["cites".to_string()],
                &out.embeddings.relations,
                None,
            )?;
            out.embeddings.entities
        }
    };
    let _ = fs::remove_file(&fp_path);
    write_embeddings_tsv(&path, graph.node_ids(), &table, None)?;
    write_file(&fp_path, format!("{stamp}\n"))?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!("{} embeddings: {}x{} in {seconds:.1}s", which.name(), table.rows(), table.cols());
    Ok(EmbedSummary {
        rows: table.rows(),
        dim: table.cols(),
        cache_hit: false,
        seconds,
    })
}

fn build_inputs(
    layout: &Layout,
    graph: &Graph,
    variant: Variant,
) -> CliResult<ModelInputs<f32>> {
    let graph_embed = if variant.needs_structure() {
        Some(layout.load_embedding(EmbeddingKind::Structure, graph)?.table)
    } else {
        None
    };
    let kg_embed = if variant.needs_semantic() {
        Some(layout.load_embedding(EmbeddingKind::Semantic, graph)?.table)
    } else {
        None
    };
    let features = if variant.reads_features() {
        Some(graph.features()?.clone())
    } else {
        None
    };
    Ok(ModelInputs {
        adjacency: normalized_adjacency(graph),
        features,
        graph_embed,
        kg_embed,
    })
}

/// Trains `num_runs` seeded runs of each selected variant and appends one
/// result record per variant.
pub fn train(cfg: &ExperimentConfig, selection: VariantSelection) -> CliResult<Vec<RunResult>> {
    let layout = Layout::new(&cfg.experiment.output_dir);
    let mut out = Vec::new();
    for variant in selection.variants() {
        let result = train_variant(cfg, &layout, variant)?;
        append_result(&layout.results(), &result)?;
        log::info!(
            "{} {}: test {:.2} ± {:.2} over {} runs",
            cfg.dataset.name,
            variant,
            100.0 * result.test_mean,
            100.0 * result.test_std,
            result.runs.len()
        );
        out.push(result);
    }
    Ok(out)
}

fn train_variant(cfg: &ExperimentConfig, layout: &Layout, variant: Variant) -> CliResult<RunResult> {
    let start = Instant::now();
    // Privacy variants never open the feature file.
    let graph = layout.load_graph(variant.reads_features())?;
    let inputs = build_inputs(layout, &graph, variant)?;
    let load_s = start.elapsed().as_secs_f64();

    let mut variant_cfg = cfg.clone();
    variant_cfg.model = variant.model_config(&cfg.model);
    let fingerprint = fingerprint_of(&(variant_cfg.fingerprint(), layout.graph_fingerprint()?));

    let one_run = |run: usize| -> CliResult<RunRecord> {
        let seed = cfg.experiment.base_seed + run as u64;
        let split_seed = split_seed(cfg, run);
        let split = layout.split(graph.num_nodes(), split_seed)?;
        let model_cfg = ssagcn_core::model::ModelConfig {
            seed,
            ..variant_cfg.model.clone()
        };
        let t = Instant::now();
        let outcome = train_model(
            &inputs,
            graph.labels(),
            graph.num_classes(),
            &split,
            &model_cfg,
            &cfg.attention,
        )?;
        let dir = layout.model_dir(variant.name(), seed);
        save_checkpoint(&outcome.model, &dir)?;
        write_training_log(&dir.join("log.jsonl"), &outcome.log)?;
        log::info!(
            "{variant} run {run}: dev {:.4} test {:.4} (best epoch {}, {:.1}s)",
            outcome.dev_accuracy,
            outcome.test_accuracy,
            outcome.best_epoch,
            t.elapsed().as_secs_f64()
        );
        Ok(RunRecord {
            run,
            seed,
            split_seed,
            dev_acc: outcome.dev_accuracy,
            test_acc: outcome.test_accuracy,
            best_epoch: outcome.best_epoch,
            epochs: outcome.log.len(),
        })
    };

    let train_start = Instant::now();
    let n = cfg.experiment.num_runs;
    let threads = cfg.experiment.threads.min(n);
    let runs: Vec<RunRecord> = if threads <= 1 {
        (0..n).map(one_run).collect::<CliResult<_>>()?
    } else {
        let mut slots: Vec<Option<CliResult<RunRecord>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let one_run = &one_run;
                    scope.spawn(move || {
                        (t..n)
                            .step_by(threads)
                            .map(|run| (run, one_run(run)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (run, r) in h.join().expect("training thread panicked") {
                    slots[run] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|s| s.expect("every run scheduled"))
            .collect::<CliResult<_>>()?
    };
    let train_s = train_start.elapsed().as_secs_f64();
    Ok(RunResult::new(
        &cfg.dataset.name,
        variant.name(),
        fingerprint,
        cfg.experiment.base_seed,
        runs,
        graph.has_features(),
        Timings {
            load_s,
            train_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub files: Vec<std::path::PathBuf>,
}

/// Writes labeled copies of the embedding tables and, when an attention
/// model has been trained, the enhanced tables it produces.
pub fn export(cfg: &ExperimentConfig) -> CliResult<ExportSummary> {
    let layout = Layout::new(&cfg.experiment.output_dir);
    let graph = layout.load_graph(false)?;
    let dir = layout.export_dir();
    let mut files = Vec::new();
    for kind in [EmbeddingKind::Structure, EmbeddingKind::Semantic] {
        let table = layout.load_embedding(kind, &graph)?.table;
        let path = dir.join(format!("{}_labeled.tsv", kind.name()));
        write_embeddings_tsv(&path, graph.node_ids(), &table, Some(graph.labels()))?;
        files.push(path);
    }

    let seed = cfg.experiment.base_seed;
    let candidate = [Variant::SsaGcn, Variant::PrivacySsaGcn]
        .into_iter()
        .find(|v| layout.model_dir(v.name(), seed).exists());
    match candidate {
        Some(variant) => {
            let g = layout.load_graph(variant.reads_features())?;
            let inputs = build_inputs(&layout, &g, variant)?;
            let model = load_checkpoint(&layout.model_dir(variant.name(), seed), &inputs)?;
            if let Some(fused) = model.fused_embeddings(&inputs)? {
                for (name, table) in [("fused_structure", &fused.graph), ("fused_semantic", &fused.kg)] {
                    let path = dir.join(format!("{name}_labeled.tsv"));
                    write_embeddings_tsv(&path, g.node_ids(), table, Some(g.labels()))?;
                    files.push(path);
                }
            }
        }
        None => log::warn!(
            "no trained attention model for seed {seed}; skipping enhanced-table export \
             (run `ssagcn train --variant ssa-gcn`)"
        ),
    }
    Ok(ExportSummary { files })
}

/// Aggregates result records into `report.txt` and `report.json` and
/// returns the text table.
pub fn report(cfg: &ExperimentConfig, inputs: &[std::path::PathBuf]) -> CliResult<String> {
    let layout = Layout::new(&cfg.experiment.output_dir);
    let paths = if inputs.is_empty() {
        vec![layout.results()]
    } else {
        inputs.to_vec()
    };
    let mut records = Vec::new();
    for p in &paths {
        if !p.exists() {
            return Err(CliError::missing("result records", p, "ssagcn train --variant <name>"));
        }
        records.extend(read_results(p)?);
    }
    if records.is_empty() {
        return Err(CliError::missing(
            "result records",
            &paths[0],
            "ssagcn train --variant <name>",
        ));
    }
    let rows = aggregate(&records);
    let table = render_table(&rows);
    write_file(&layout.report_text(), &table)?;
    write_file(&layout.report_json(), render_json(&rows))?;
    Ok(table)
}
