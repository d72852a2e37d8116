//! Forward pass, reverse-mode gradients and the Adam update.
//!
//! With `H = σ(…σ(X W¹₀)…) W²` (one column per class), logits are
//!
//! ```text
//! Z[:, l] = Σ_k α⁺[k, l] T⁺_k H[:, l] + Σ_k α⁻[k, l] T⁻_k H[:, l] + Σ_p β[p, l] Â^p H[:, l]
//! ```
//!
//! Each filter is applied once to the whole `H` block and the per-channel
//! coefficients are broadcast afterwards. The free-eigenvalue variant
//! replaces the filter sum by `U diag(θ) Uᵀ H`.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::filterbank::{poly_apply, FilterBank};
use crate::model::config::{Activation, Components, ModelConfig, Variant};
use crate::model::params::{Params, Shapes};

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
    pub optimizer: Adam,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs after dropout: `inputs[0]` is the (dropped) feature matrix.
    pub inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    /// Hidden dropout masks (already scaled), one per layer when enabled.
    pub hidden_masks: Vec<Option<Array2<f64>>>,
    pub hidden: Array2<f64>,
    pub pos_out: Vec<Array2<f64>>,
    pub neg_out: Vec<Array2<f64>>,
    pub poly_out: Vec<Array2<f64>>,
    /// `Uᵀ H` for the free-eigenvalue variant.
    pub spectral_coords: Option<Array2<f64>>,
    pub logits: Array2<f64>,
}

fn dropout<R: Rng + ?Sized>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

impl Model {
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        input_dim: usize,
        num_classes: usize,
        bank: &FilterBank,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let theta_len = match config.variant {
            Variant::FreeEigenvalues => bank.num_nodes(),
            _ => 0,
        };
        let shapes = Shapes {
            input_dim,
            hidden_dim: config.hidden_dim,
            num_layers: config.num_layers,
            num_classes,
            num_intervals: bank.num_intervals(),
            poly_degree: bank.poly_degree,
            theta_len,
        };
        let mut params = Params::init(shapes, rng);
        if theta_len > 0 {
            params.theta.assign(bank.spectrum.eigenvalues());
        }
        let optimizer = Adam::new(&params);
        Ok(Model {
            config,
            params,
            optimizer,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.params.w2.ncols()
    }

    fn components(&self) -> Components {
        self.config.components()
    }

    /// `rng` enables dropout (training mode); `None` is evaluation mode.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        bank: &FilterBank,
        x: &Array2<f64>,
        rng: Option<&mut R>,
    ) -> Result<ForwardCache> {
        let n = bank.num_nodes();
        if x.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows vs filter bank",
                expected: n,
                got: x.nrows(),
            });
        }
        if x.ncols() != self.params.w1[0].nrows() {
            return Err(Error::DimensionMismatch {
                context: "feature columns vs first weight matrix",
                expected: self.params.w1[0].nrows(),
                got: x.ncols(),
            });
        }
        if self.params.alpha_pos.nrows() != bank.num_intervals() || self.params.beta.nrows() != bank.poly_degree + 1 {
            return Err(Error::DimensionMismatch {
                context: "filter coefficients vs filter bank",
                expected: bank.num_intervals(),
                got: self.params.alpha_pos.nrows(),
            });
        }
        let act = self.config.activation;
        let mut rng = rng;
        let x_in = match rng.as_deref_mut() {
            Some(r) if self.config.feat_dropout > 0.0 => x * &dropout(x.dim(), self.config.feat_dropout, r),
            _ => x.clone(),
        };

        let mut inputs = vec![x_in];
        let mut pre_activations = Vec::new();
        let mut hidden_masks = Vec::new();
        for w in &self.params.w1 {
            let pre = inputs.last().unwrap().dot(w);
            let mut post = pre.mapv(|v| act.apply(v));
            let mask = match rng.as_deref_mut() {
                Some(r) if self.config.hidden_dropout && self.config.feat_dropout > 0.0 => {
                    let m = dropout(post.dim(), self.config.feat_dropout, r);
                    post *= &m;
                    Some(m)
                }
                _ => None,
            };
            pre_activations.push(pre);
            hidden_masks.push(mask);
            inputs.push(post);
        }
        let last = inputs.pop().unwrap();
        let hidden = last.dot(&self.params.w2);
        inputs.push(last);

        let comps = self.components();
        let mut logits = Array2::zeros(hidden.dim());
        let mut pos_out = Vec::new();
        let mut neg_out = Vec::new();
        let mut poly_out = Vec::new();
        let mut spectral_coords = None;

        if self.config.variant == Variant::FreeEigenvalues {
            let u = bank.spectrum.eigenvectors();
            let coords = u.t().dot(&hidden);
            let scaled = &coords * &self.params.theta.view().insert_axis(Axis(1));
            logits = u.dot(&scaled);
            spectral_coords = Some(coords);
        } else {
            for (k, c) in bank.constants.iter().enumerate() {
                if comps.pos {
                    let out = c.pos() * &hidden;
                    logits += &(&out * &self.params.alpha_pos.row(k));
                    pos_out.push(out);
                }
                if comps.neg {
                    let out = c.neg() * &hidden;
                    logits += &(&out * &self.params.alpha_neg.row(k));
                    neg_out.push(out);
                }
            }
            if comps.poly {
                poly_out = poly_apply(&bank.adjacency, &hidden, bank.poly_degree)?;
                for (p, out) in poly_out.iter().enumerate() {
                    logits += &(out * &self.params.beta.row(p));
                }
            }
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            hidden_masks,
            hidden,
            pos_out,
            neg_out,
            poly_out,
            spectral_coords,
            logits,
        })
    }

    /// Gradients of a scalar objective with respect to every parameter,
    /// given its gradient `dlogits` with respect to the logits.
    pub fn backward(&self, bank: &FilterBank, cache: &ForwardCache, dlogits: &Array2<f64>) -> Params {
        let mut grads = self.params.zeros_like();
        let comps = self.components();
        let mut dhidden = Array2::<f64>::zeros(cache.hidden.dim());

        if self.config.variant == Variant::FreeEigenvalues {
            let u = bank.spectrum.eigenvectors();
            let coords = cache.spectral_coords.as_ref().expect("free-eigenvalue cache");
            let dscaled = u.t().dot(dlogits);
            grads.theta = (&dscaled * coords).sum_axis(Axis(1));
            let dcoords = &dscaled * &self.params.theta.view().insert_axis(Axis(1));
            dhidden = u.dot(&dcoords);
        } else {
            // Filters are symmetric, so each one is its own transpose.
            let mut pos_iter = cache.pos_out.iter();
            let mut neg_iter = cache.neg_out.iter();
            for (k, c) in bank.constants.iter().enumerate() {
                if comps.pos {
                    let out = pos_iter.next().unwrap();
                    grads.alpha_pos.row_mut(k).assign(&(out * dlogits).sum_axis(Axis(0)));
                    let scaled = dlogits * &self.params.alpha_pos.row(k);
                    dhidden += &(c.pos() * &scaled);
                }
                if comps.neg {
                    let out = neg_iter.next().unwrap();
                    grads.alpha_neg.row_mut(k).assign(&(out * dlogits).sum_axis(Axis(0)));
                    let scaled = dlogits * &self.params.alpha_neg.row(k);
                    dhidden += &(c.neg() * &scaled);
                }
            }
            if comps.poly {
                for (p, out) in cache.poly_out.iter().enumerate() {
                    grads.beta.row_mut(p).assign(&(out * dlogits).sum_axis(Axis(0)));
                }
                // Σ_p Â^p (dZ ∘ β_p) by Horner's rule.
                let mut acc = dlogits * &self.params.beta.row(bank.poly_degree);
                for p in (0..bank.poly_degree).rev() {
                    acc = &bank.adjacency * &acc;
                    acc += &(dlogits * &self.params.beta.row(p));
                }
                dhidden += &acc;
            }
        }

        let last_input = cache.inputs.last().unwrap();
        grads.w2 = last_input.t().dot(&dhidden);
        let mut dact = dhidden.dot(&self.params.w2.t());
        let act: Activation = self.config.activation;
        for layer in (0..self.params.w1.len()).rev() {
            if let Some(mask) = &cache.hidden_masks[layer] {
                dact *= mask;
            }
            let mut dpre = dact;
            Zip::from(&mut dpre)
                .and(&cache.pre_activations[layer])
                .for_each(|g, &z| *g *= act.derivative(z));
            grads.w1[layer] = cache.inputs[layer].t().dot(&dpre);
            dact = if layer > 0 {
                dpre.dot(&self.params.w1[layer].t())
            } else {
                Array2::zeros((0, 0))
            };
        }
        grads
    }

    pub fn adam_step(&mut self, grads: &Params) -> Result<()> {
        let lr = self.config.learning_rate;
        self.optimizer.step(&mut self.params, grads, lr)
    }

    /// Response `(λᵢ, h(λᵢ))` of output channel `channel` over the bank's
    /// spectrum.
    pub fn response(&self, bank: &FilterBank, channel: usize) -> Vec<(f64, f64)> {
        let lambda = bank.spectrum.eigenvalues();
        if self.config.variant == Variant::FreeEigenvalues {
            return lambda.iter().zip(self.params.theta.iter()).map(|(&l, &t)| (l, t)).collect();
        }
        let comps = self.components();
        let col = |m: &Array2<f64>, on: bool| -> Vec<f64> {
            if on {
                m.column(channel).to_vec()
            } else {
                vec![0.0; m.nrows()]
            }
        };
        crate::filterbank::filter_response(
            lambda.as_slice().unwrap(),
            &bank.intervals(),
            &col(&self.params.alpha_pos, comps.pos),
            &col(&self.params.alpha_neg, comps.neg),
            &col(&self.params.beta, comps.poly),
        )
    }
}

/// Mean softmax cross-entropy over `idx` (duplicates count twice) and its
/// gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize], idx: &[usize]) -> Result<(f64, Array2<f64>)> {
    if idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    let scale = 1.0 / idx.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for &i in idx {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[labels[i]];
        let mut g = grad.row_mut(i);
        for (c, &v) in row.iter().enumerate() {
            g[c] += scale * (v - log_z).exp();
        }
        g[labels[i]] -= scale;
    }
    Ok((loss * scale, grad))
}

/// Cross-entropy on `idx` plus `weight_decay/2 · ‖W‖²`, with gradients for
/// every parameter tensor.
pub fn loss_and_grads(
    model: &Model,
    bank: &FilterBank,
    cache: &ForwardCache,
    labels: &[usize],
    idx: &[usize],
) -> Result<(f64, Params)> {
    let (mut loss, dlogits) = softmax_cross_entropy(&cache.logits, labels, idx)?;
    let mut grads = model.backward(bank, cache, &dlogits);
    let decay = model.config.weight_decay;
    if decay > 0.0 {
        let coefficients = model.config.decay_coefficients;
        loss += decay * model.params.l2_half(coefficients);
        model.params.add_decay(&mut grads, decay, coefficients);
    }
    Ok((loss, grads))
}

/// Fraction of `idx` whose arg-max logit (lowest class on ties) equals the
/// label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyMask);
    }
    let correct = idx.iter().filter(|&&i| argmax(logits.row(i).iter()) == labels[i]).count();
    Ok(correct as f64 / idx.len() as f64)
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Evaluation-mode accuracy of `model` on the nodes in `idx`.
pub fn evaluate(model: &Model, bank: &FilterBank, x: &Array2<f64>, labels: &[usize], idx: &[usize]) -> Result<f64> {
    let cache = model.forward::<rand_chacha::ChaCha8Rng>(bank, x, None)?;
    accuracy(&cache.logits, labels, idx)
}

/// `Z = U diag(θ) Uᵀ σ(X W¹) W²` with a single hidden layer.
pub fn free_eigenvalues_forward(
    theta: &Array1<f64>,
    eigenvectors: &Array2<f64>,
    x: &Array2<f64>,
    w1: &Array2<f64>,
    w2: &Array2<f64>,
    activation: Activation,
) -> Result<Array2<f64>> {
    if theta.len() != eigenvectors.ncols() || x.nrows() != eigenvectors.nrows() {
        return Err(Error::DimensionMismatch {
            context: "free_eigenvalues_forward",
            expected: eigenvectors.ncols(),
            got: theta.len(),
        });
    }
    let hidden = x.dot(w1).mapv(|v| activation.apply(v)).dot(w2);
    let coords = eigenvectors.t().dot(&hidden) * &theta.view().insert_axis(Axis(1));
    Ok(eigenvectors.dot(&coords))
}

/// Bias-corrected Adam over every tensor of a [`Params`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Params,
    v: Params,
}

impl Adam {
    pub fn new(shape_of: &Params) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shape_of.zeros_like(),
            v: shape_of.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Diverged {
                what: "gradient",
                epoch: self.t as usize + 1,
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let grad_slices: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, _, s)| s).collect();
        for (((p, m), v), g) in params
            .slices_mut()
            .into_iter()
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
            .zip(grad_slices)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Array2::zeros((4, 2));
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 1, 0], &[0, 1, 2, 3]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(softmax_cross_entropy(&logits, &[0; 4], &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn duplicated_mask_keeps_mean() {
        let logits = array![[0.3, -1.2], [2.0, 0.1], [-0.5, 0.5]];
        let labels = [1, 0, 1];
        let (a, _) = softmax_cross_entropy(&logits, &labels, &[0, 2]).unwrap();
        let (b, _) = softmax_cross_entropy(&logits, &labels, &[0, 2, 0, 2]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn accuracy_extremes_and_ties() {
        let logits = array![[2.0, 0.0], [0.0, 3.0], [1.0, 1.0]];
        assert_eq!(accuracy(&logits, &[0, 1, 0], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&logits, &[1, 0, 1], &[0, 1, 2]).unwrap(), 0.0);
    }

    fn unit_params() -> Params {
        Params {
            w1: vec![array![[0.5, -1.0]]],
            w2: array![[1.0], [2.0]],
            alpha_pos: Array2::zeros((0, 1)),
            alpha_neg: Array2::zeros((0, 1)),
            beta: array![[1.0]],
            theta: Array1::zeros(0),
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut p = unit_params();
        let before = p.clone();
        let mut opt = Adam::new(&p);
        let zero = p.zeros_like();
        opt.step(&mut p, &zero, 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = unit_params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.w1[0] = array![[3.0, -0.25]];
        g.w2 = array![[1e-3], [-7.0]];
        let mut opt = Adam::new(&p);
        opt.step(&mut p, &g, 0.01).unwrap();
        let dw1 = &p.w1[0] - &before.w1[0];
        let dw2 = &p.w2 - &before.w2;
        for (d, expect) in dw1.iter().chain(dw2.iter()).zip([-0.01, 0.01, -0.01, 0.01]) {
            assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
        }
    }

    #[test]
    fn adam_rejects_nan() {
        let mut p = unit_params();
        let mut g = p.zeros_like();
        g.beta[[0, 0]] = f64::NAN;
        let mut opt = Adam::new(&p);
        assert!(matches!(opt.step(&mut p, &g, 0.01), Err(Error::Diverged { .. })));
    }

    #[test]
    fn adam_descends_quadratic_bowl() {
        // f(w) = ‖w‖², gradient 2w, from w = 1.
        let mut p = unit_params();
        p.w1[0].fill(1.0);
        p.w2.fill(1.0);
        p.beta.fill(1.0);
        let norm = |p: &Params| p.tensors().iter().flat_map(|t| t.2.iter()).map(|v| v * v).sum::<f64>().sqrt();
        let mut opt = Adam::new(&p);
        let mut last = norm(&p);
        for step in 0..100 {
            let mut g = p.clone();
            for s in g.slices_mut() {
                s.iter_mut().for_each(|v| *v *= 2.0);
            }
            opt.step(&mut p, &g, 0.01).unwrap();
            let now = norm(&p);
            if step >= 5 {
                assert!(now < last, "step {step}: {now} >= {last}");
            }
            last = now;
        }
    }
}
