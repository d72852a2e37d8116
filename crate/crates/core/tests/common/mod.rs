//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Everything here is written straight-line and
//! dense so that it shares as little code as possible with the library.

#![allow(dead_code)]

use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use piecon::filterbank::{BankOptions, Budget, FilterBank};
use piecon::model::{loss_and_grads, Activation, Model, ModelConfig, Params, Variant};
use piecon::partition::PartitionResult;
use piecon::spectral::{distinct_eigenvalues, Spectrum};
use piecon::{duplicate_subgraph, Graph};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Â built entrywise from the edge list.
pub fn dense_normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut deg = vec![0.0; n];
    for &(u, v) in g.edges() {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    let mut a = Array2::zeros((n, n));
    for &(u, v) in g.edges() {
        let w = 1.0 / (deg[u] as f64 * deg[v] as f64).sqrt();
        a[[u, v]] = w;
        a[[v, u]] = w;
    }
    a
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let p = rng.random_range(0.05..0.6);
    Graph::erdos_renyi(n, p, rng).unwrap()
}

/// Random base graph with `dups` single nodes duplicated one at a time,
/// which plants repeated zero eigenvalues.
pub fn graph_with_multiplicities(rng: &mut ChaCha8Rng, base: usize, dups: usize) -> Graph {
    let mut g = Graph::ring_with_chords(base, base / 2, rng).unwrap();
    let mut nodes: Vec<usize> = (0..base).collect();
    nodes.shuffle(rng);
    for &p in nodes.iter().take(dups) {
        g = duplicate_subgraph(&g, &[p]).unwrap();
    }
    g
}

// ----- partition -------------------------------------------------------

/// Literal transcription of the gap-selection algorithm with none of the
/// library's helpers.
pub fn brute_force_boundaries(lambda: &[f64], w: usize, k: usize, eq_tol: f64) -> Vec<usize> {
    let n = lambda.len();
    if k == 1 {
        return vec![0, n];
    }
    let mut d = Vec::new();
    for i in 0..n - 1 {
        d.push(lambda[i + 1] - lambda[i]);
    }
    let mut s = vec![0.0; d.len()];
    let eps = 1e-12;
    let mut i = w;
    while i + w < d.len() {
        if d[i] > eq_tol {
            let mut mp = 0.0;
            for j in i - w..i {
                mp += d[j];
            }
            mp /= w as f64;
            let mut vp = 0.0;
            for j in i - w..i {
                vp += (d[j] - mp) * (d[j] - mp);
            }
            let sp = (vp / w as f64).sqrt();
            let mut mn = 0.0;
            for j in i + 1..=i + w {
                mn += d[j];
            }
            mn /= w as f64;
            let mut vn = 0.0;
            for j in i + 1..=i + w {
                vn += (d[j] - mn) * (d[j] - mn);
            }
            let sn = (vn / w as f64).sqrt();
            s[i] = (d[i] - mp).abs() / (sp + eps) + (d[i] - mn).abs() / (sn + eps);
        }
        i += 1;
    }
    // Repeatedly take the best remaining positive score.
    let mut taken = vec![false; d.len()];
    let mut b = vec![0, n];
    for _ in 0..k - 1 {
        let mut best: Option<usize> = None;
        for j in 0..d.len() {
            if taken[j] || s[j] <= 0.0 {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(c) => {
                    let better = s[j] > s[c] || (s[j] == s[c] && d[j] > d[c]);
                    if better { Some(j) } else { Some(c) }
                }
            };
        }
        match best {
            Some(j) => {
                taken[j] = true;
                b.push(j + 1);
            }
            None => break,
        }
    }
    b.sort();
    b.dedup();
    b
}

/// Sequences with ties, repeated runs, flat stretches and sizes right at
/// the window limit.
pub fn random_sequence(rng: &mut ChaCha8Rng, w: usize) -> Vec<f64> {
    let min_len = 2 * w + 2;
    let n = match rng.random_range(0..4) {
        0 => min_len,
        1 => min_len + 1,
        _ => rng.random_range(min_len..min_len + 40),
    };
    let mut lambda = Vec::with_capacity(n);
    let mut x = -1.0;
    while lambda.len() < n {
        match rng.random_range(0..6) {
            // repeated eigenvalue run
            0 => {
                let run = rng.random_range(2..6);
                for _ in 0..run {
                    lambda.push(x);
                }
            }
            // a block of identical gaps
            1 => {
                let g = [0.01, 0.05, 0.125][rng.random_range(0..3)];
                for _ in 0..rng.random_range(2..8) {
                    x += g;
                    lambda.push(x);
                }
            }
            // a large jump
            2 => {
                x += rng.random_range(0.2..0.8);
                lambda.push(x);
            }
            // gaps drawn from a small set so scores tie
            3 => {
                x += [0.0625, 0.125, 0.25][rng.random_range(0..3)];
                lambda.push(x);
            }
            _ => {
                x += rng.random_range(0.0..0.1);
                lambda.push(x);
            }
        }
    }
    lambda.truncate(n);
    lambda
}

// ----- spectra ---------------------------------------------------------

/// Haar-like random orthogonal matrix from Gram-Schmidt on a Gaussian one.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> Array2<f64> {
    loop {
        let g = Array2::from_shape_simple_fn((k, k), || StandardNormal.sample(rng));
        let mut q: Array2<f64> = Array2::zeros((k, k));
        let mut ok = true;
        for j in 0..k {
            let mut v = g.column(j).to_owned();
            for _ in 0..2 {
                for i in 0..j {
                    let qi = q.column(i).to_owned();
                    let proj = qi.dot(&v);
                    v.scaled_add(-proj, &qi);
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            q.column_mut(j).assign(&(v / norm));
        }
        if ok {
            return q;
        }
    }
}

/// Flips the sign of a random subset of eigenvector columns.
pub fn sign_flipped(sp: &Spectrum, rng: &mut ChaCha8Rng) -> Spectrum {
    let mut u = sp.eigenvectors().clone();
    for mut col in u.columns_mut() {
        if rng.random_bool(0.5) {
            col.mapv_inplace(|v| -v);
        }
    }
    Spectrum::from_parts(sp.eigenvalues().clone(), u).unwrap()
}

/// Applies an independent random rotation inside every block of equal
/// eigenvalues.
pub fn rotated_within_eigenspaces(sp: &Spectrum, rng: &mut ChaCha8Rng) -> Spectrum {
    let ds = distinct_eigenvalues(sp, sp.default_tolerance().max(1e-8)).unwrap();
    let mut u = sp.eigenvectors().clone();
    for run in ds.runs() {
        let k = run.len();
        if k < 2 {
            continue;
        }
        let q = random_orthogonal(rng, k);
        let block = u.slice(s![.., run.clone()]).dot(&q);
        u.slice_mut(s![.., run]).assign(&block);
    }
    Spectrum::from_parts(sp.eigenvalues().clone(), u).unwrap()
}

/// `U[:, a..b] U[:, a..b]ᵀ` accumulated column by column.
pub fn dense_projector(sp: &Spectrum, a: usize, b: usize) -> Array2<f64> {
    let n = sp.dim();
    let u = sp.eigenvectors();
    let mut t = Array2::zeros((n, n));
    for c in a..b {
        for i in 0..n {
            for j in 0..n {
                t[[i, j]] += u[[i, c]] * u[[j, c]];
            }
        }
    }
    t
}

// ----- model -----------------------------------------------------------

pub struct Instance {
    pub bank: FilterBank,
    pub model: Model,
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
    pub idx: Vec<usize>,
}

/// A small model with every parameter drawn at random (so no coefficient
/// sits at its special initial value).
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, variant: Variant, activation: Activation) -> Instance {
    let g = loop {
        let g = random_graph(rng, n);
        if g.num_edges() > 0 {
            break g;
        }
    };
    let sp = Arc::new(piecon::graph_spectrum(&g).unwrap());
    let d = rng.random_range(1..4);
    let c = rng.random_range(2..4);
    let k = rng.random_range(1..4).min(n);
    let p = rng.random_range(0..4);
    let layers = rng.random_range(1..3);
    let partition = PartitionResult::equal_width(n, k).unwrap();
    let bank = match variant {
        Variant::Piecon => FilterBank::build(
            &g,
            sp,
            &partition,
            BankOptions {
                poly_degree: p,
                budget: Budget::Unlimited,
                keep_dense: true,
            },
        )
        .unwrap(),
        _ => FilterBank::polynomial_only(&g, sp, p),
    };
    let cfg = ModelConfig {
        num_intervals: bank.num_intervals(),
        poly_degree: p,
        hidden_dim: rng.random_range(2..5),
        num_layers: layers,
        activation,
        variant,
        weight_decay: if rng.random_bool(0.5) { 0.0 } else { 0.01 },
        decay_coefficients: rng.random_bool(0.5),
        use_pos: rng.random_bool(0.8),
        use_neg: rng.random_bool(0.8),
        use_poly: true,
        ..ModelConfig::default()
    };
    let mut model = Model::new(cfg, d, c, &bank, rng).unwrap();
    randomize(&mut model.params, rng);
    let x = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng));
    let labels = (0..n).map(|_| rng.random_range(0..c)).collect();
    let mut idx: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
    if idx.is_empty() {
        idx.push(0);
    }
    Instance { bank, model, x, labels, idx }
}

pub fn randomize(params: &mut Params, rng: &mut ChaCha8Rng) {
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Identity => v,
    }
}

/// Logits computed column by column from dense matrices: the signed
/// projector parts are built by hand from the spectrum, `Â^p` by repeated
/// dense multiplication.
pub fn naive_logits(inst: &Instance) -> Array2<f64> {
    let m = &inst.model;
    let cfg = &m.config;
    let params = &m.params;
    let n = inst.x.nrows();
    let mut y = inst.x.clone();
    for w in &params.w1 {
        let mut next = Array2::zeros((n, w.ncols()));
        for i in 0..n {
            for j in 0..w.ncols() {
                let mut acc = 0.0;
                for t in 0..w.nrows() {
                    acc += y[[i, t]] * w[[t, j]];
                }
                next[[i, j]] = act(cfg.activation, acc);
            }
        }
        y = next;
    }
    let h = y.dot(&params.w2);
    let c = h.ncols();
    let sp = &inst.bank.spectrum;
    let mut z = Array2::zeros((n, c));

    if cfg.variant == Variant::FreeEigenvalues {
        let u = sp.eigenvectors();
        let mut filt = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    filt[[i, j]] += u[[i, k]] * params.theta[k] * u[[j, k]];
                }
            }
        }
        return filt.dot(&h);
    }

    let comps = cfg.components();
    let a_hat = inst.bank.adjacency.to_dense();
    for l in 0..c {
        let hl: Array1<f64> = h.column(l).to_owned();
        let mut zl = Array1::zeros(n);
        for (k, &(a, b)) in inst.bank.intervals().iter().enumerate() {
            let t = dense_projector(sp, a, b);
            let pos = t.mapv(|v| v.max(0.0));
            let neg = t.mapv(|v| v.min(0.0));
            if comps.pos {
                zl = zl + params.alpha_pos[[k, l]] * pos.dot(&hl);
            }
            if comps.neg {
                zl = zl + params.alpha_neg[[k, l]] * neg.dot(&hl);
            }
        }
        if comps.poly {
            let mut power = Array2::<f64>::eye(n);
            for p in 0..=inst.bank.poly_degree {
                zl = zl + params.beta[[p, l]] * power.dot(&hl);
                power = power.dot(&a_hat);
            }
        }
        z.column_mut(l).assign(&zl);
    }
    z
}

/// Normwise relative error per tensor between analytic gradients and
/// central differences with step `h`; returns the worst tensor.
pub fn gradient_check(inst: &mut Instance, h: f64) -> (String, f64) {
    let loss_at = |inst: &Instance| -> f64 {
        let cache = inst.model.forward::<ChaCha8Rng>(&inst.bank, &inst.x, None).unwrap();
        loss_and_grads(&inst.model, &inst.bank, &cache, &inst.labels, &inst.idx).unwrap().0
    };
    let cache = inst.model.forward::<ChaCha8Rng>(&inst.bank, &inst.x, None).unwrap();
    let (_, grads) = loss_and_grads(&inst.model, &inst.bank, &cache, &inst.labels, &inst.idx).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, _, s)| (n, s.to_vec())).collect();

    let mut worst = (String::new(), 0.0);
    for (t, (name, a)) in analytic.iter().enumerate() {
        if a.is_empty() {
            continue;
        }
        let mut fd = vec![0.0; a.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let orig = inst.model.params.slices_mut()[t][i];
            inst.model.params.slices_mut()[t][i] = orig + h;
            let up = loss_at(inst);
            inst.model.params.slices_mut()[t][i] = orig - h;
            let down = loss_at(inst);
            inst.model.params.slices_mut()[t][i] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let scale = fd.iter().chain(a.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if scale < 1e-10 {
            continue;
        }
        let err = a.iter().zip(&fd).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
        if err > worst.1 {
            worst = (name.clone(), err);
        }
    }
    worst
}

/// Smallest distance of any hidden pre-activation from the rectifier kink.
pub fn kink_margin(inst: &Instance) -> f64 {
    let cache = inst.model.forward::<ChaCha8Rng>(&inst.bank, &inst.x, None).unwrap();
    cache
        .pre_activations
        .iter()
        .flat_map(|p| p.iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}
