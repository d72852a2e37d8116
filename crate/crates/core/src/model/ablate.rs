use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{Dataset, SplitMask};
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::train::{train_with_spectrum, TrainReport};
use crate::spectral::{graph_spectrum, Spectrum};

/// `(use_pos, use_neg, use_poly)` rows of the standard ablation table.
pub const ABLATION_COMBINATIONS: [(bool, bool, bool); 5] = [
    (false, false, true),
    (false, true, false),
    (true, false, false),
    (true, true, false),
    (true, true, true),
];

/// Mean and symmetric 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci95: f64,
    pub count: usize,
}

/// Needs at least two samples.
pub fn summarize(samples: &[f64]) -> Result<Summary> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "a confidence interval needs at least 2 samples, got {k}"
        )));
    }
    let kf = k as f64;
    let mean = samples.iter().sum::<f64>() / kf;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    let t = StudentsT::new(0.0, 1.0, kf - 1.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(Summary {
        mean,
        ci95: t * (var / kf).sqrt(),
        count: k,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub use_pos: bool,
    pub use_neg: bool,
    pub use_poly: bool,
    pub test: Summary,
    pub runs: Vec<TrainReport>,
}

impl AblationRow {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.use_pos {
            parts.push("pos");
        }
        if self.use_neg {
            parts.push("neg");
        }
        if self.use_poly {
            parts.push("poly");
        }
        parts.join("+")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, pos: bool, neg: bool, poly: bool) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| (r.use_pos, r.use_neg, r.use_poly) == (pos, neg, poly))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(self, path)
    }

    /// `use_pos,use_neg,use_poly,mean,ci95,runs`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.use_pos, r.use_neg, r.use_poly, r.test.mean, r.test.ci95, r.test.count
                )
            })
            .collect();
        crate::io::write_csv("use_pos,use_neg,use_poly,mean,ci95,runs", &rows, path)
    }
}

/// Runs each combination on every split. Run `i` uses model seed
/// `cfg.seed + splits[i].seed`.
pub fn ablate(
    cfg: &ModelConfig,
    ds: &Dataset,
    splits: &[SplitMask],
    combinations: &[(bool, bool, bool)],
) -> Result<AblationTable> {
    if splits.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ablation needs at least 2 splits, got {}",
            splits.len()
        )));
    }
    let spectrum = Arc::new(graph_spectrum(&ds.graph)?);
    let rows = combinations
        .iter()
        .map(|&(pos, neg, poly)| {
            let (test, runs) = run_splits_summary(&cfg.with_components(pos, neg, poly), ds, splits, &spectrum)?;
            Ok(AblationRow {
                use_pos: pos,
                use_neg: neg,
                use_poly: poly,
                test,
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { rows })
}

/// One training run per split, sharing a spectrum.
pub fn run_splits(cfg: &ModelConfig, ds: &Dataset, splits: &[SplitMask], spectrum: &Arc<Spectrum>) -> Result<Vec<TrainReport>> {
    splits
        .iter()
        .map(|s| {
            let run_cfg = ModelConfig {
                seed: cfg.seed.wrapping_add(s.seed),
                ..cfg.clone()
            };
            Ok(train_with_spectrum(&run_cfg, ds, s, Arc::clone(spectrum))?.report)
        })
        .collect()
}

/// [`run_splits`] plus the test-accuracy summary.
pub fn run_splits_summary(
    cfg: &ModelConfig,
    ds: &Dataset,
    splits: &[SplitMask],
    spectrum: &Arc<Spectrum>,
) -> Result<(Summary, Vec<TrainReport>)> {
    let runs = run_splits(cfg, ds, splits, spectrum)?;
    let accs: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
    Ok((summarize(&accs)?, runs))
}
