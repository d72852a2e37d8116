use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, Variant};

/// Every trainable tensor of the model.
///
/// `w1` holds one matrix per hidden layer (`d → hidden`, then
/// `hidden → hidden`). `alpha_pos`/`alpha_neg` are `K × C`, `beta` is
/// `(P + 1) × C`, `theta` has one entry per eigenvalue and is empty unless
/// the free-eigenvalue variant is used.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w1: Vec<Array2<f64>>,
    pub w2: Array2<f64>,
    pub alpha_pos: Array2<f64>,
    pub alpha_neg: Array2<f64>,
    pub beta: Array2<f64>,
    pub theta: Array1<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Shapes {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
    pub num_intervals: usize,
    pub poly_degree: usize,
    pub theta_len: usize,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl Params {
    /// Glorot-uniform weights, zero constant-filter coefficients and
    /// `β = (1, 0, …, 0)` so the untrained model filters with the identity.
    pub fn init<R: Rng + ?Sized>(s: Shapes, rng: &mut R) -> Self {
        let mut w1 = Vec::with_capacity(s.num_layers);
        let mut fan_in = s.input_dim;
        for _ in 0..s.num_layers {
            w1.push(glorot(fan_in, s.hidden_dim, rng));
            fan_in = s.hidden_dim;
        }
        let w2 = glorot(s.hidden_dim, s.num_classes, rng);
        let mut beta = Array2::zeros((s.poly_degree + 1, s.num_classes));
        beta.row_mut(0).fill(1.0);
        Params {
            w1,
            w2,
            alpha_pos: Array2::zeros((s.num_intervals, s.num_classes)),
            alpha_neg: Array2::zeros((s.num_intervals, s.num_classes)),
            beta,
            theta: Array1::zeros(s.theta_len),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            w1: self.w1.iter().map(|w| Array2::zeros(w.dim())).collect(),
            w2: Array2::zeros(self.w2.dim()),
            alpha_pos: Array2::zeros(self.alpha_pos.dim()),
            alpha_neg: Array2::zeros(self.alpha_neg.dim()),
            beta: Array2::zeros(self.beta.dim()),
            theta: Array1::zeros(self.theta.len()),
        }
    }

    /// Named tensors with their shapes, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (i, w) in self.w1.iter().enumerate() {
            out.push((format!("w1.{i}"), w.shape().to_vec(), w.as_slice().expect("standard layout")));
        }
        out.push(("w2".into(), self.w2.shape().to_vec(), self.w2.as_slice().unwrap()));
        out.push(("alpha_pos".into(), self.alpha_pos.shape().to_vec(), self.alpha_pos.as_slice().unwrap()));
        out.push(("alpha_neg".into(), self.alpha_neg.shape().to_vec(), self.alpha_neg.as_slice().unwrap()));
        out.push(("beta".into(), self.beta.shape().to_vec(), self.beta.as_slice().unwrap()));
        out.push(("theta".into(), self.theta.shape().to_vec(), self.theta.as_slice().unwrap()));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .w1
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.w2.as_slice_mut().unwrap());
        out.push(self.alpha_pos.as_slice_mut().unwrap());
        out.push(self.alpha_neg.as_slice_mut().unwrap());
        out.push(self.beta.as_slice_mut().unwrap());
        out.push(self.theta.as_slice_mut().unwrap());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, s)| s.iter().all(|v| v.is_finite()))
    }

    /// Half the squared Frobenius norm of the weight matrices (and of the
    /// filter coefficients when `coefficients` is set).
    pub(crate) fn l2_half(&self, coefficients: bool) -> f64 {
        let sq = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>();
        let mut total: f64 = self.w1.iter().map(|w| sq(w.as_slice().unwrap())).sum();
        total += sq(self.w2.as_slice().unwrap());
        if coefficients {
            total += sq(self.alpha_pos.as_slice().unwrap());
            total += sq(self.alpha_neg.as_slice().unwrap());
            total += sq(self.beta.as_slice().unwrap());
            total += sq(self.theta.as_slice().unwrap());
        }
        0.5 * total
    }

    /// `grad += decay · param` on the tensors covered by [`Params::l2_half`].
    pub(crate) fn add_decay(&self, grads: &mut Params, decay: f64, coefficients: bool) {
        for (g, w) in grads.w1.iter_mut().zip(&self.w1) {
            g.scaled_add(decay, w);
        }
        grads.w2.scaled_add(decay, &self.w2);
        if coefficients {
            grads.alpha_pos.scaled_add(decay, &self.alpha_pos);
            grads.alpha_neg.scaled_add(decay, &self.alpha_neg);
            grads.beta.scaled_add(decay, &self.beta);
            grads.theta.scaled_add(decay, &self.theta);
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"PCNCKPT1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    intervals: Vec<(usize, usize)>,
    tensors: Vec<TensorEntry>,
}

/// Checkpoint layout: 8-byte magic, little-endian `u64` header length, JSON
/// header (config, intervals, tensor names and shapes), then every tensor
/// as little-endian `f64` in header order.
pub fn save_checkpoint(
    path: &Path,
    config: &ModelConfig,
    intervals: &[(usize, usize)],
    params: &Params,
) -> Result<()> {
    let tensors = params.tensors();
    let header = CheckpointHeader {
        config: config.clone(),
        intervals: intervals.to_vec(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(16 + json.len());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for (_, _, data) in &tensors {
        for v in *data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub struct Checkpoint {
    pub config: ModelConfig,
    pub intervals: Vec<(usize, usize)>,
    pub params: Params,
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::InvalidArgument(format!("{}: {msg}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + header_len).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let mut floats = bytes[16 + header_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |shape: &[usize]| -> Result<Vec<f64>> {
        let count: usize = shape.iter().product();
        let data: Vec<f64> = floats.by_ref().take(count).collect();
        if data.len() != count {
            return Err(bad("truncated tensor data"));
        }
        Ok(data)
    };
    let matrix = |shape: &[usize], data: Vec<f64>| -> Result<Array2<f64>> {
        match shape {
            [r, c] => Ok(Array2::from_shape_vec((*r, *c), data).expect("size checked")),
            _ => Err(bad("expected a matrix")),
        }
    };
    let mut w1 = Vec::new();
    let mut w2 = None;
    let mut alpha_pos = None;
    let mut alpha_neg = None;
    let mut beta = None;
    let mut theta = None;
    for t in &header.tensors {
        let data = take(&t.shape)?;
        match t.name.as_str() {
            name if name.starts_with("w1.") => w1.push(matrix(&t.shape, data)?),
            "w2" => w2 = Some(matrix(&t.shape, data)?),
            "alpha_pos" => alpha_pos = Some(matrix(&t.shape, data)?),
            "alpha_neg" => alpha_neg = Some(matrix(&t.shape, data)?),
            "beta" => beta = Some(matrix(&t.shape, data)?),
            "theta" => theta = Some(Array1::from_vec(data)),
            other => return Err(bad(&format!("unknown tensor `{other}`"))),
        }
    }
    let missing = |name: &str| bad(&format!("missing tensor `{name}`"));
    let params = Params {
        w1,
        w2: w2.ok_or_else(|| missing("w2"))?,
        alpha_pos: alpha_pos.ok_or_else(|| missing("alpha_pos"))?,
        alpha_neg: alpha_neg.ok_or_else(|| missing("alpha_neg"))?,
        beta: beta.ok_or_else(|| missing("beta"))?,
        theta: theta.ok_or_else(|| missing("theta"))?,
    };
    if header.config.variant == Variant::FreeEigenvalues && params.theta.is_empty() {
        return Err(missing("theta"));
    }
    Ok(Checkpoint {
        config: header.config,
        intervals: header.intervals,
        params,
    })
}
