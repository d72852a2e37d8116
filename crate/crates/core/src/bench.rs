//! Per-epoch timing of constant-filter versus polynomial-filter banks.
//!
//! Two numbers are reported per configuration: `filter_seconds`, the cost
//! of applying every filter in the bank to an `n × C` block and applying
//! the transposed filters to the incoming gradient (what one training step
//! spends in the filters), and `epoch_seconds`, a full forward, backward and
//! Adam step. Both are medians over the timed epochs after warmup.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filterbank::{poly_apply, BankOptions, Budget, FilterBank};
use crate::graph::Graph;
use crate::model::{loss_and_grads, Model, ModelConfig, Variant};
use crate::partition::PartitionResult;
use crate::spectral::{graph_spectrum, Spectrum};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub nodes: Vec<usize>,
    /// Interval counts for the constant-filter series (0 gives an empty bank).
    pub intervals: Vec<usize>,
    /// Degrees for the polynomial series.
    pub degrees: Vec<usize>,
    pub warmup: usize,
    pub epochs: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub budget: Budget,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            nodes: vec![2000],
            intervals: vec![10, 20, 40],
            degrees: vec![3, 10],
            warmup: 2,
            epochs: 7,
            feature_dim: 16,
            hidden_dim: 32,
            num_classes: 4,
            budget: Budget::Auto,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    /// `constant` or `poly`.
    pub kind: &'static str,
    pub k: usize,
    pub p: usize,
    pub filter_seconds: f64,
    /// `None` for an empty constant bank, which is not a trainable model.
    pub epoch_seconds: Option<f64>,
    pub epochs: usize,
}

pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Median of `epochs` timed runs of `f` after `warmup` untimed ones.
pub fn time_median(warmup: usize, epochs: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("at least one timed epoch is required".into()));
    }
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&times))
}

/// Applies each signed constant part, and every polynomial power, to `h`
/// and then to `g`; returns a checksum so the work is not optimized away.
pub fn filter_pass(bank: &FilterBank, use_poly: bool, h: &Array2<f64>, g: &Array2<f64>) -> Result<f64> {
    let mut sum = 0.0;
    for c in &bank.constants {
        for part in [c.pos(), c.neg()] {
            sum += (part * h).sum();
            sum += (part * g).sum();
        }
    }
    if use_poly {
        for m in poly_apply(&bank.adjacency, h, bank.poly_degree)?
            .into_iter()
            .chain(poly_apply(&bank.adjacency, g, bank.poly_degree)?)
        {
            sum += m.sum();
        }
    }
    Ok(sum)
}

/// Graph used for timing: a ring with `n` random chords.
pub fn bench_graph(n: usize, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Graph::ring_with_chords(n, n, &mut rng)
}

struct Workload {
    graph: Graph,
    spectrum: Arc<Spectrum>,
    x: Array2<f64>,
    labels: Vec<usize>,
    train_idx: Vec<usize>,
    h: Array2<f64>,
    g: Array2<f64>,
}

fn workload(n: usize, opts: &BenchOptions) -> Result<Workload> {
    let graph = bench_graph(n, opts.seed)?;
    let spectrum = Arc::new(graph_spectrum(&graph)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xbe7c);
    let mut rand_matrix = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0));
    let x = rand_matrix(n, opts.feature_dim);
    let h = rand_matrix(n, opts.num_classes);
    let g = rand_matrix(n, opts.num_classes);
    let labels = (0..n).map(|i| i % opts.num_classes).collect();
    Ok(Workload {
        graph,
        spectrum,
        x,
        labels,
        train_idx: (0..n).step_by(2).collect(),
        h,
        g,
    })
}

/// Round-robin version of [`time_median`]: each round runs every task once,
/// so slow drift in machine speed hits all tasks alike.
pub fn time_interleaved(warmup: usize, epochs: usize, tasks: &mut [Box<dyn FnMut() -> Result<()> + '_>]) -> Result<Vec<f64>> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("at least one timed epoch is required".into()));
    }
    let mut times = vec![Vec::with_capacity(epochs); tasks.len()];
    for round in 0..warmup + epochs {
        for (task, t) in tasks.iter_mut().zip(&mut times) {
            let start = Instant::now();
            task()?;
            if round >= warmup {
                t.push(start.elapsed().as_secs_f64());
            }
        }
    }
    Ok(times.iter().map(|t| median(t)).collect())
}

struct Case {
    kind: &'static str,
    k: usize,
    p: usize,
    bank: FilterBank,
    cfg: Option<ModelConfig>,
}

/// Constant-filter series over `intervals` (equal-width partitions, no
/// polynomial part) and polynomial series over `degrees`, per graph size.
/// All configurations of one graph size are timed round-robin.
pub fn run_bench(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if opts.epochs < 5 {
        return Err(Error::InvalidArgument(format!("use at least 5 timed epochs, got {}", opts.epochs)));
    }
    let mut rows = Vec::new();
    for &n in &opts.nodes {
        let w = workload(n, opts)?;
        let base = ModelConfig {
            hidden_dim: opts.hidden_dim,
            weight_decay: 0.0,
            seed: opts.seed,
            budget: opts.budget,
            ..ModelConfig::default()
        };
        let mut cases = Vec::new();
        for &k in &opts.intervals {
            let (bank, cfg) = if k == 0 {
                (FilterBank::polynomial_only(&w.graph, Arc::clone(&w.spectrum), 0), None)
            } else {
                let partition = PartitionResult::equal_width(n, k)?;
                let bank_opts = BankOptions {
                    poly_degree: 0,
                    budget: opts.budget,
                    keep_dense: false,
                };
                let cfg = ModelConfig {
                    num_intervals: k,
                    poly_degree: 0,
                    use_poly: false,
                    ..base.clone()
                };
                (FilterBank::build(&w.graph, Arc::clone(&w.spectrum), &partition, bank_opts)?, Some(cfg))
            };
            cases.push(Case { kind: "constant", k, p: 0, bank, cfg });
        }
        for &p in &opts.degrees {
            let cfg = ModelConfig {
                poly_degree: p,
                variant: Variant::PolyOnly,
                ..base.clone()
            };
            let bank = FilterBank::polynomial_only(&w.graph, Arc::clone(&w.spectrum), p);
            cases.push(Case { kind: "poly", k: 0, p, bank, cfg: Some(cfg) });
        }

        let w = &w;
        let mut tasks: Vec<Box<dyn FnMut() -> Result<()> + '_>> = cases
            .iter()
            .map(|c| {
                let use_poly = c.kind == "poly";
                Box::new(move || filter_pass(&c.bank, use_poly, &w.h, &w.g).map(drop)) as Box<dyn FnMut() -> Result<()> + '_>
            })
            .collect();
        let filter_seconds = time_interleaved(opts.warmup, opts.epochs, &mut tasks)?;
        drop(tasks);

        let mut trained = Vec::new();
        let mut tasks: Vec<Box<dyn FnMut() -> Result<()> + '_>> = Vec::new();
        for (i, c) in cases.iter().enumerate() {
            let Some(cfg) = &c.cfg else { continue };
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut model = Model::new(cfg.clone(), opts.feature_dim, opts.num_classes, &c.bank, &mut rng)?;
            let bank = &c.bank;
            trained.push(i);
            tasks.push(Box::new(move || {
                let cache = model.forward(bank, &w.x, Some(&mut rng))?;
                let (_, grads) = loss_and_grads(&model, bank, &cache, &w.labels, &w.train_idx)?;
                model.adam_step(&grads)
            }));
        }
        let step_seconds = time_interleaved(opts.warmup, opts.epochs, &mut tasks)?;
        drop(tasks);

        for (i, c) in cases.iter().enumerate() {
            rows.push(BenchRow {
                n,
                m: w.graph.num_edges(),
                kind: c.kind,
                k: c.k,
                p: c.p,
                filter_seconds: filter_seconds[i],
                epoch_seconds: trained.iter().position(|&j| j == i).map(|j| step_seconds[j]),
                epochs: opts.epochs,
            });
        }
    }
    Ok(rows)
}

/// `n,m,kind,k,p,filter_seconds,epoch_seconds,epochs`
pub fn write_bench_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            let epoch = r.epoch_seconds.map(|s| format!("{s:.6e}")).unwrap_or_default();
            format!("{},{},{},{},{},{:.6e},{},{}", r.n, r.m, r.kind, r.k, r.p, r.filter_seconds, epoch, r.epochs)
        })
        .collect();
    crate::io::write_csv("n,m,kind,k,p,filter_seconds,epoch_seconds,epochs", &lines, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn tiny_bench_runs() {
        let opts = BenchOptions {
            nodes: vec![40],
            intervals: vec![0, 2],
            degrees: vec![0, 2],
            warmup: 1,
            epochs: 5,
            ..BenchOptions::default()
        };
        let rows = run_bench(&opts).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].epoch_seconds.is_none());
        assert!(rows.iter().all(|r| r.filter_seconds >= 0.0));
        assert!(run_bench(&BenchOptions { epochs: 4, ..opts }).is_err());
    }
}
