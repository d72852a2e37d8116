//! Node-classification datasets, train/val/test splits and the synthetic
//! twin-graph generator.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{duplicate_subgraph, Graph};
use crate::spectral::graph_spectrum;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    /// Validates shapes; `num_classes` is inferred as `max label + 1`.
    pub fn new(graph: Graph, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let n = graph.num_nodes();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows",
                expected: n,
                got: features.nrows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "label count",
                expected: n,
                got: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            graph,
            features,
            labels,
            num_classes,
        })
    }

    pub fn load(edges: &Path, features: &Path, labels: &Path) -> Result<Self> {
        Dataset::new(
            crate::io::load_edge_list(edges)?,
            crate::io::load_features(features)?,
            crate::io::load_labels(labels)?,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Disjoint train/validation/test masks covering every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMask {
    pub seed: u64,
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SplitJson {
    seed: u64,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

impl SplitMask {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn val_indices(&self) -> Vec<usize> {
        indices(&self.val)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        indices(&self.test)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SplitJson {
            seed: self.seed,
            train: self.train_indices(),
            val: self.val_indices(),
            test: self.test_indices(),
        })?)
    }

    /// Parses the JSON export and checks the masks partition `0..n`.
    pub fn from_json(text: &str, n: usize) -> Result<Self> {
        let raw: SplitJson = serde_json::from_str(text)?;
        let mut owner = vec![None; n];
        let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
        for (part, list) in [&raw.train, &raw.val, &raw.test].into_iter().enumerate() {
            for &i in list {
                if i >= n {
                    return Err(Error::NodeOutOfRange { index: i, n });
                }
                if owner[i].replace(part).is_some() {
                    return Err(Error::DuplicateNode(i));
                }
                masks[part][i] = true;
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidArgument(format!("node {i} is in no split")));
        }
        let [train, val, test] = masks;
        Ok(SplitMask {
            seed: raw.seed,
            train,
            val,
            test,
        })
    }
}

/// Seeded random 60/20/20 split.
pub fn make_splits(n: usize, seed: u64) -> Result<SplitMask> {
    if n < 5 {
        return Err(Error::TooFewNodes { min: 5, got: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (0.6 * n as f64).round() as usize;
    let n_val = (0.2 * n as f64).round() as usize;
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for (rank, &node) in perm.iter().enumerate() {
        if rank < n_train {
            train[node] = true;
        } else if rank < n_train + n_val {
            val[node] = true;
        } else {
            test[node] = true;
        }
    }
    Ok(SplitMask {
        seed,
        train,
        val,
        test,
    })
}

pub const SYNTH_FEATURE_DIM: usize = 4;

/// Graph with ν(0) ≥ n/2: a random ring-with-chords base on `⌈n/2⌉` nodes,
/// then `⌊n/2⌋` base nodes duplicated one at a time.
pub fn synth_graph(n: usize, seed: u64) -> Result<Graph> {
    if n < 20 {
        return Err(Error::TooFewNodes { min: 20, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dup = n / 2;
    let n_base = n - n_dup;
    let mut g = Graph::ring_with_chords(n_base, n_base, &mut rng)?;
    let mut order: Vec<usize> = (0..n_base).collect();
    order.shuffle(&mut rng);
    for &p in &order[..n_dup] {
        g = duplicate_subgraph(&g, &[p])?;
    }
    Ok(g)
}

/// Binary node classification where the label is the sign of a random
/// feature direction projected onto the eigenvalue-0 eigenspace of the
/// normalized adjacency, with a `noise` fraction of labels flipped.
pub fn synth_spectral_dataset(n: usize, seed: u64, noise: f64) -> Result<Dataset> {
    synth_spectral_dataset_with_dim(n, seed, noise, SYNTH_FEATURE_DIM)
}

pub fn synth_spectral_dataset_with_dim(n: usize, seed: u64, noise: f64, feature_dim: usize) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!("noise must lie in [0, 1], got {noise}")));
    }
    if feature_dim == 0 {
        return Err(Error::InvalidArgument("feature_dim must be positive".into()));
    }
    let graph = synth_graph(n, seed)?;
    // Separate stream so the graph does not depend on feature_dim.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d_cafe_b0ba);
    let features = Array2::from_shape_simple_fn((n, feature_dim), || StandardNormal.sample(&mut rng));
    let direction: Array1<f64> = Array1::from_shape_simple_fn(feature_dim, || StandardNormal.sample(&mut rng));
    let signal = features.dot(&direction);

    let projected = zero_band_projection(&graph, &signal)?;
    let mut labels: Vec<usize> = projected.iter().map(|&v| usize::from(v > 0.0)).collect();
    let flips = (noise * n as f64).round() as usize;
    for i in sample(&mut rng, n, flips) {
        labels[i] = 1 - labels[i];
    }
    Ok(Dataset {
        graph,
        features,
        labels,
        num_classes: 2,
    })
}

/// `U₀U₀ᵀ x` for the eigenvectors whose eigenvalue is within `1e-8` of 0.
pub fn zero_band_projection(g: &Graph, x: &Array1<f64>) -> Result<Array1<f64>> {
    let sp = graph_spectrum(g)?;
    let zero: Vec<usize> = (0..sp.dim()).filter(|&i| sp.eigenvalues()[i].abs() <= 1e-8).collect();
    let u0 = sp.eigenvectors().select(ndarray::Axis(1), &zero);
    Ok(u0.dot(&u0.t().dot(x)))
}
