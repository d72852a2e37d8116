use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use piecon::bench::{run_bench, write_bench_csv, BenchOptions};
use piecon::dataset::{synth_graph, synth_spectral_dataset};
use piecon::filterbank::BankOptions;
use piecon::io::{load_edge_list, write_csv, write_edge_list, write_features, write_json, write_labels};
use piecon::model::{
    build_bank, evaluate, load_checkpoint, run_splits_summary, save_checkpoint, train_with_spectrum, AblationRow, AblationTable,
    Adam, Model, ModelConfig, ABLATION_COMBINATIONS,
};
use piecon::spectral::write_spectrum;
use piecon::theory::{jump_instance, jump_lower_bound, run_theory_suite, FitOptions, SuiteOptions};
use piecon::{graph_spectrum, identify_significant_gaps, make_splits, Dataset, FilterBank, Graph, PartitionResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;

fn out_dir(run: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&run.out).with_context(|| format!("creating output directory {}", run.out.display()))?;
    Ok(&run.out)
}

fn load_graph(run: &RunConfig) -> Result<Graph> {
    match (&run.edges, &run.synth) {
        (Some(edges), _) => Ok(load_edge_list(edges)?),
        (None, Some(s)) => Ok(synth_graph(s.n, s.seed)?),
        (None, None) => bail!("no graph given: pass --edges or --synth"),
    }
}

fn load_dataset(run: &RunConfig) -> Result<Dataset> {
    match (&run.edges, &run.synth) {
        (Some(edges), _) => {
            let (Some(features), Some(labels)) = (&run.features, &run.labels) else {
                bail!("--edges needs --features and --labels for this command");
            };
            Ok(Dataset::load(edges, features, labels)?)
        }
        (None, Some(s)) => Ok(synth_spectral_dataset(s.n, s.seed, s.noise)?),
        (None, None) => bail!("no dataset given: pass --edges/--features/--labels or --synth"),
    }
}

fn seeded(cfg: &ModelConfig, split_seed: u64) -> ModelConfig {
    ModelConfig {
        seed: cfg.seed.wrapping_add(split_seed),
        ..cfg.clone()
    }
}

pub fn spectrum(run: &RunConfig, vectors: bool, tol: f64) -> Result<()> {
    let g = load_graph(run)?;
    let sp = graph_spectrum(&g)?;
    let nu0 = write_spectrum(&sp, tol, vectors, out_dir(run)?)?;
    println!("n={} nu0={} nu0/n={:.4}", sp.dim(), nu0, nu0 as f64 / sp.dim() as f64);
    Ok(())
}

pub fn partition(run: &RunConfig) -> Result<()> {
    let g = load_graph(run)?;
    let sp = graph_spectrum(&g)?;
    let k = run.model.num_intervals;
    if k == 0 {
        bail!("`num_intervals` must be at least 1 for partition");
    }
    let lambda = sp.eigenvalues().to_vec();
    let p = identify_significant_gaps(&lambda, run.model.window, k, sp.default_tolerance())?;
    write_json(&p, &out_dir(run)?.join("partition.json"))?;
    println!("boundaries {:?}", p.boundaries);
    Ok(())
}

pub fn filters(run: &RunConfig) -> Result<()> {
    let g = load_graph(run)?;
    let sp = Arc::new(graph_spectrum(&g)?);
    let (p, bank) = build_bank(&run.model, &g, sp)?;
    let dir = out_dir(run)?;
    write_json(&p, &dir.join("partition.json"))?;
    bank.write(&dir.join("filters"))?;
    for (k, c) in bank.constants.iter().enumerate() {
        println!("filter {k} [{}, {}): pos nnz {}, neg nnz {}", c.interval.0, c.interval.1, c.pos().nnz(), c.neg().nnz());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a ModelConfig,
    seeds: &'a [u64],
    runs: Vec<piecon::TrainReport>,
    test: Option<piecon::model::Summary>,
}

pub fn train(run: &RunConfig) -> Result<()> {
    let ds = load_dataset(run)?;
    let sp = Arc::new(graph_spectrum(&ds.graph)?);
    let dir = out_dir(run)?;
    let trained = run
        .seeds
        .par_iter()
        .map(|&s| {
            let cfg = seeded(&run.model, s);
            let split = make_splits(ds.num_nodes(), s)?;
            let t = train_with_spectrum(&cfg, &ds, &split, Arc::clone(&sp))?;
            save_checkpoint(&dir.join(format!("model_seed{s}.ckpt")), &cfg, &t.bank.intervals(), &t.model.params)?;
            Ok(t.report)
        })
        .collect::<piecon::Result<Vec<_>>>()?;
    let accs: Vec<f64> = trained.iter().map(|r| r.test_acc).collect();
    let test = (accs.len() >= 2).then(|| piecon::model::summarize(&accs)).transpose()?;
    for r in &trained {
        println!("seed {}: test {:.4} (best epoch {}, val {:.4})", r.seed, r.test_acc, r.best_epoch, r.best_val_acc);
    }
    if let Some(s) = &test {
        println!("test accuracy {:.4} ± {:.4} over {} seeds", s.mean, s.ci95, s.count);
    }
    let output = TrainOutput {
        config: &run.model,
        seeds: &run.seeds,
        runs: trained,
        test,
    };
    write_json(&output, &dir.join("train.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    checkpoint: String,
    split_seed: u64,
    train: f64,
    val: f64,
    test: f64,
}

/// Rebuilds the bank from the stored intervals and scores the checkpoint.
pub fn eval(run: &RunConfig, checkpoint: &Path, split_seed: u64) -> Result<()> {
    let ck = load_checkpoint(checkpoint)?;
    let ds = load_dataset(run)?;
    let n = ds.num_nodes();
    let sp = Arc::new(graph_spectrum(&ds.graph)?);
    let bank = if ck.config.components().constants() {
        let mut boundaries: Vec<usize> = ck.intervals.iter().map(|&(a, _)| a).collect();
        boundaries.push(ck.intervals.last().map_or(n, |&(_, b)| b));
        let partition = PartitionResult {
            scores: Vec::new(),
            boundaries,
            window: ck.config.window,
            requested: ck.config.num_intervals,
        };
        let opts = BankOptions {
            poly_degree: ck.config.poly_degree,
            budget: ck.config.budget,
            keep_dense: false,
        };
        FilterBank::build(&ds.graph, sp, &partition, opts)?
    } else {
        FilterBank::polynomial_only(&ds.graph, sp, ck.config.poly_degree)
    };
    let model = Model {
        optimizer: Adam::new(&ck.params),
        config: ck.config,
        params: ck.params,
    };
    let split = make_splits(n, split_seed)?;
    let score = |idx: Vec<usize>| evaluate(&model, &bank, &ds.features, &ds.labels, &idx);
    let output = EvalOutput {
        checkpoint: checkpoint.display().to_string(),
        split_seed,
        train: score(split.train_indices())?,
        val: score(split.val_indices())?,
        test: score(split.test_indices())?,
    };
    println!("train {:.4} val {:.4} test {:.4}", output.train, output.val, output.test);
    write_json(&output, &out_dir(run)?.join("eval.json"))?;
    Ok(())
}

pub fn ablate(run: &RunConfig) -> Result<()> {
    if run.seeds.len() < 2 {
        bail!("ablate needs at least 2 seeds, got {}", run.seeds.len());
    }
    let ds = load_dataset(run)?;
    let sp = Arc::new(graph_spectrum(&ds.graph)?);
    let splits = run
        .seeds
        .iter()
        .map(|&s| make_splits(ds.num_nodes(), s))
        .collect::<piecon::Result<Vec<_>>>()?;
    let rows = ABLATION_COMBINATIONS
        .par_iter()
        .map(|&(pos, neg, poly)| {
            let cfg = run.model.with_components(pos, neg, poly);
            let (test, runs) = run_splits_summary(&cfg, &ds, &splits, &sp)?;
            Ok(AblationRow {
                use_pos: pos,
                use_neg: neg,
                use_poly: poly,
                test,
                runs,
            })
        })
        .collect::<piecon::Result<Vec<_>>>()?;
    let table = AblationTable { rows };
    let dir = out_dir(run)?;
    table.write_json(&dir.join("ablation.json"))?;
    table.write_csv(&dir.join("ablation.csv"))?;
    for r in &table.rows {
        println!("{:<14} {:.4} ± {:.4}", r.label(), r.test.mean, r.test.ci95);
    }
    Ok(())
}

pub fn sweep(run: &RunConfig) -> Result<()> {
    if run.sweep_windows.is_empty() || run.sweep_intervals.is_empty() {
        bail!("sweep grids must not be empty");
    }
    let ds = load_dataset(run)?;
    let sp = Arc::new(graph_spectrum(&ds.graph)?);
    let splits = run
        .seeds
        .iter()
        .map(|&s| make_splits(ds.num_nodes(), s))
        .collect::<piecon::Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = run
        .sweep_windows
        .iter()
        .flat_map(|&w| run.sweep_intervals.iter().map(move |&k| (w, k)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(window, num_intervals)| {
            let cfg = ModelConfig {
                window,
                num_intervals,
                ..run.model.clone()
            };
            let accs: Vec<f64> = piecon::model::run_splits(&cfg, &ds, &splits, &sp)
                .with_context(|| format!("window {window}, num_intervals {num_intervals}"))?
                .iter()
                .map(|r| r.test_acc)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let ci = if accs.len() >= 2 {
                format!("{}", piecon::model::summarize(&accs)?.ci95)
            } else {
                String::new()
            };
            Ok(format!("{window},{num_intervals},{mean},{ci},{}", accs.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out_dir(run)?.join("sweep.csv");
    write_csv("window,num_intervals,mean,ci95,runs", &rows, &path)?;
    println!("{} cells written to {}", rows.len(), path.display());
    Ok(())
}

pub fn theory(run: &RunConfig, single: Option<(usize, f64, f64)>, opts: &SuiteOptions) -> Result<()> {
    let records = match single {
        Some((d, gap, h)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let r = jump_instance(h, gap, d, opts.points, FitOptions::default(), &mut rng)?;
            println!("bound {:.6} achieved {:.6}", jump_lower_bound(h, gap, d), r.achieved);
            vec![r]
        }
        None => run_theory_suite(opts)?,
    };
    write_json(&records, &out_dir(run)?.join("theory.json"))?;
    let failed = records.iter().filter(|r| !r.pass).count();
    let not_applicable = records.iter().filter(|r| r.bound.is_none() && r.kind == "dense").count();
    println!("{} records, {failed} failed, {not_applicable} not applicable", records.len());
    if failed > 0 {
        bail!("{failed} theory checks failed");
    }
    Ok(())
}

pub fn synth(run: &RunConfig, n: usize, seed: u64, noise: f64) -> Result<()> {
    let ds = synth_spectral_dataset(n, seed, noise)?;
    let dir = out_dir(run)?;
    write_edge_list(&ds.graph, dir.join("edges.txt"))?;
    write_features(&ds.features, dir.join("features.csv"))?;
    write_labels(&ds.labels, dir.join("labels.txt"))?;
    let nu0 = graph_spectrum(&ds.graph)?.count_near(0.0, 1e-8);
    println!("n={n} m={} nu0={nu0}", ds.graph.num_edges());
    Ok(())
}

pub fn bench(run: &RunConfig, opts: &BenchOptions) -> Result<()> {
    let rows = run_bench(opts)?;
    let path = out_dir(run)?.join("bench.csv");
    write_bench_csv(&rows, &path)?;
    for r in &rows {
        let epoch = r.epoch_seconds.map_or("-".to_string(), |s| format!("{s:.5}"));
        println!("n={} {} K={} P={} filter {:.5}s epoch {epoch}s", r.n, r.kind, r.k, r.p, r.filter_seconds);
    }
    Ok(())
}
