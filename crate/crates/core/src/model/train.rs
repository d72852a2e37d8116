use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{Dataset, SplitMask};
use crate::error::{Error, Result};
use crate::filterbank::{BankOptions, FilterBank};
use crate::graph::Graph;
use crate::model::config::ModelConfig;
use crate::model::network::{accuracy, loss_and_grads, Model};
use crate::model::params::Params;
use crate::partition::{identify_significant_gaps, PartitionResult};
use crate::spectral::{graph_spectrum, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
    /// 1-based epoch of the best validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub epoch_seconds: Vec<f64>,
    pub boundaries: Vec<usize>,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len().max(1) as f64
    }
}

/// Partition and filter bank for `cfg` over a precomputed spectrum.
///
/// Variants without constant filters, and `num_intervals == 0`, get a
/// polynomial-only bank and the trivial partition.
pub fn build_bank(cfg: &ModelConfig, graph: &Graph, spectrum: Arc<Spectrum>) -> Result<(PartitionResult, FilterBank)> {
    let n = graph.num_nodes();
    if !cfg.components().constants() {
        let bank = FilterBank::polynomial_only(graph, spectrum, cfg.poly_degree);
        return Ok((PartitionResult::whole(n), bank));
    }
    let tol = spectrum.default_tolerance();
    let lambda = spectrum.eigenvalues().to_vec();
    let partition = identify_significant_gaps(&lambda, cfg.window, cfg.num_intervals, tol)?;
    let opts = BankOptions {
        poly_degree: cfg.poly_degree,
        budget: cfg.budget,
        keep_dense: false,
    };
    let bank = FilterBank::build(graph, spectrum, &partition, opts)?;
    Ok((partition, bank))
}

/// Result of a full training run: the report plus the best-validation
/// model and the bank it was trained against.
pub struct Trained {
    pub report: TrainReport,
    pub model: Model,
    pub bank: FilterBank,
}

pub fn train(cfg: &ModelConfig, ds: &Dataset, split: &SplitMask) -> Result<TrainReport> {
    Ok(train_full(cfg, ds, split)?.report)
}

pub fn train_full(cfg: &ModelConfig, ds: &Dataset, split: &SplitMask) -> Result<Trained> {
    let spectrum = Arc::new(graph_spectrum(&ds.graph)?);
    train_with_spectrum(cfg, ds, split, spectrum)
}

/// As [`train_full`], reusing an already computed spectrum of `ds.graph`.
pub fn train_with_spectrum(cfg: &ModelConfig, ds: &Dataset, split: &SplitMask, spectrum: Arc<Spectrum>) -> Result<Trained> {
    cfg.validate()?;
    if split.len() != ds.num_nodes() {
        return Err(Error::DimensionMismatch {
            context: "split mask length",
            expected: ds.num_nodes(),
            got: split.len(),
        });
    }
    let (partition, bank) = build_bank(cfg, &ds.graph, spectrum)?;
    train_on_bank(cfg, ds, split, bank, &partition)
}

/// Training loop over a ready filter bank.
pub fn train_on_bank(
    cfg: &ModelConfig,
    ds: &Dataset,
    split: &SplitMask,
    bank: FilterBank,
    partition: &PartitionResult,
) -> Result<Trained> {
    cfg.validate()?;
    let train_idx = split.train_indices();
    let val_idx = split.val_indices();
    let test_idx = split.test_indices();
    if train_idx.is_empty() || val_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::new(cfg.clone(), ds.feature_dim(), ds.num_classes.max(2), &bank, &mut rng)?;
    let x = &ds.features;

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_acc = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64, Params)> = None;

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let cache = model.forward(&bank, x, Some(&mut rng)).map_err(|e| at_epoch(e, epoch))?;
        let (loss, grads) = loss_and_grads(&model, &bank, &cache, &ds.labels, &train_idx)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { what: "loss", epoch });
        }
        model.adam_step(&grads).map_err(|e| at_epoch(e, epoch))?;
        epoch_seconds.push(start.elapsed().as_secs_f64());

        let eval = model.forward::<ChaCha8Rng>(&bank, x, None).map_err(|e| at_epoch(e, epoch))?;
        let val = accuracy(&eval.logits, &ds.labels, &val_idx)?;
        train_loss.push(loss);
        val_acc.push(val);
        if best.as_ref().is_none_or(|b| val > b.1) {
            let test = accuracy(&eval.logits, &ds.labels, &test_idx)?;
            best = Some((epoch, val, test, model.params.clone()));
        }
    }
    let (best_epoch, best_val_acc, test_acc, params) = best.expect("epochs >= 1");
    model.params = params;
    Ok(Trained {
        report: TrainReport {
            seed: cfg.seed,
            train_loss,
            val_acc,
            best_epoch,
            best_val_acc,
            test_acc,
            epoch_seconds,
            boundaries: partition.boundaries.clone(),
        },
        model,
        bank,
    })
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged { what, epoch },
        Error::Diverged { what, .. } => Error::Diverged { what, epoch },
        other => other,
    }
}

