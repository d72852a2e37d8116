//! Piecewise-constant projector filters and polynomial powers of `Â`.
//!
//! For an interval `[a, b)` of eigenvector columns the constant filter is
//! the spectral projector `T = U[:, a..b] U[:, a..b]ᵀ`: its response is 1 on
//! the interval's eigenvalues and 0 elsewhere. `T` is split elementwise into
//! a non-negative part and a non-positive part, and each part is sparsified
//! to its `budget` largest-magnitude entries (upper triangle, mirrored).
//!
//! Dense projectors are built one interval at a time and dropped once their
//! sparse parts exist, unless the caller asks to keep them.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency_sparse, Graph};
use crate::partition::PartitionResult;
use crate::spectral::Spectrum;

#[derive(Debug, Clone)]
pub struct ConstantFilter {
    pub interval: (usize, usize),
    pub dense: Option<Array2<f64>>,
    pub pos: Option<CsMat<f64>>,
    pub neg: Option<CsMat<f64>>,
    /// Entries kept per part by [`sparsify`]; `None` means unsparsified.
    pub budget: Option<usize>,
}

impl ConstantFilter {
    pub fn pos(&self) -> &CsMat<f64> {
        self.pos.as_ref().expect("filter has not been split")
    }

    pub fn neg(&self) -> &CsMat<f64> {
        self.neg.as_ref().expect("filter has not been split")
    }
}

/// Dense projector onto eigenvector columns `a..b`.
pub fn constant_filter(sp: &Spectrum, a: usize, b: usize) -> Result<ConstantFilter> {
    let n = sp.dim();
    if a >= b || b > n {
        return Err(Error::InvalidInterval { a, b, n });
    }
    let band = sp.band(a..b);
    let mut t = band.dot(&band.t());
    for i in 0..n {
        for j in i + 1..n {
            t[[j, i]] = t[[i, j]];
        }
    }
    Ok(ConstantFilter {
        interval: (a, b),
        dense: Some(t),
        pos: None,
        neg: None,
        budget: None,
    })
}

/// Elementwise `max(T, 0)` and `min(T, 0)` as sparse matrices.
pub fn split_pos_neg(mut f: ConstantFilter) -> Result<ConstantFilter> {
    let t = f
        .dense
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("split_pos_neg needs the dense projector".into()))?;
    let shape = t.dim();
    let mut pos = TriMat::new(shape);
    let mut neg = TriMat::new(shape);
    for ((i, j), &v) in t.indexed_iter() {
        if v > 0.0 {
            pos.add_triplet(i, j, v);
        } else if v < 0.0 {
            neg.add_triplet(i, j, v);
        }
    }
    f.pos = Some(pos.to_csr());
    f.neg = Some(neg.to_csr());
    Ok(f)
}

/// Keeps, in each signed part, the `budget` upper-triangle entries of
/// largest magnitude (ties by row, then column) plus their mirrors.
pub fn sparsify(f: ConstantFilter, budget: usize) -> Result<ConstantFilter> {
    if budget == 0 {
        return Err(Error::InvalidArgument("sparsification budget must be at least 1".into()));
    }
    let mut f = if f.pos.is_none() { split_pos_neg(f)? } else { f };
    f.pos = f.pos.map(|m| top_entries(&m, budget));
    f.neg = f.neg.map(|m| top_entries(&m, budget));
    f.budget = Some(budget);
    Ok(f)
}

pub(crate) fn top_entries(m: &CsMat<f64>, budget: usize) -> CsMat<f64> {
    let mut upper: Vec<(usize, usize, f64)> = Vec::new();
    for (row, vec) in m.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            if col >= row {
                upper.push((row, col, v));
            }
        }
    }
    let order = |a: &(usize, usize, f64), b: &(usize, usize, f64)| {
        b.2.abs()
            .total_cmp(&a.2.abs())
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    };
    if upper.len() > budget {
        upper.select_nth_unstable_by(budget - 1, order);
        upper.truncate(budget);
    }
    let mut tri = TriMat::with_capacity(m.shape(), 2 * upper.len());
    for &(i, j, v) in &upper {
        tri.add_triplet(i, j, v);
        if i != j {
            tri.add_triplet(j, i, v);
        }
    }
    tri.to_csr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Four entries per edge.
    #[default]
    Auto,
    Entries(usize),
    Unlimited,
}

impl Budget {
    pub fn resolve(self, g: &Graph) -> Option<usize> {
        match self {
            Budget::Auto => Some((4 * g.num_edges()).max(1)),
            Budget::Entries(k) => Some(k.max(1)),
            Budget::Unlimited => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BankOptions {
    pub poly_degree: usize,
    pub budget: Budget,
    pub keep_dense: bool,
}

impl Default for BankOptions {
    fn default() -> Self {
        BankOptions {
            poly_degree: 3,
            budget: Budget::Auto,
            keep_dense: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    pub constants: Vec<ConstantFilter>,
    pub poly_degree: usize,
    pub adjacency: CsMat<f64>,
    pub spectrum: Arc<Spectrum>,
}

impl FilterBank {
    pub fn build(
        graph: &Graph,
        spectrum: Arc<Spectrum>,
        partition: &PartitionResult,
        opts: BankOptions,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if spectrum.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "spectrum size vs graph",
                expected: n,
                got: spectrum.dim(),
            });
        }
        if partition.boundaries.first() != Some(&0) || partition.boundaries.last() != Some(&n) {
            return Err(Error::InvalidArgument(format!(
                "partition boundaries {:?} do not tile [0, {n})",
                partition.boundaries
            )));
        }
        let budget = opts.budget.resolve(graph);
        let constants = partition
            .intervals()
            .into_iter()
            .map(|(a, b)| {
                let f = split_pos_neg(constant_filter(&spectrum, a, b)?)?;
                let mut f = match budget {
                    Some(k) => sparsify(f, k)?,
                    None => f,
                };
                if !opts.keep_dense {
                    f.dense = None;
                }
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterBank {
            constants,
            poly_degree: opts.poly_degree,
            adjacency: normalized_adjacency_sparse(graph),
            spectrum,
        })
    }

    /// A bank without constant filters (polynomial part only).
    pub fn polynomial_only(graph: &Graph, spectrum: Arc<Spectrum>, poly_degree: usize) -> Self {
        FilterBank {
            constants: Vec::new(),
            poly_degree,
            adjacency: normalized_adjacency_sparse(graph),
            spectrum,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn num_intervals(&self) -> usize {
        self.constants.len()
    }

    pub fn intervals(&self) -> Vec<(usize, usize)> {
        self.constants.iter().map(|c| c.interval).collect()
    }

    /// Writes `filter_{k}_{pos|neg}.coo` (`row col value` lines) and a
    /// matching `.json` metadata file for each signed part.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, c) in self.constants.iter().enumerate() {
            for (part, m) in [("pos", c.pos()), ("neg", c.neg())] {
                let mut text = String::new();
                for (&v, (i, j)) in m.iter() {
                    text.push_str(&format!("{i} {j} {v:.17e}\n"));
                }
                let path = dir.join(format!("filter_{k}_{part}.coo"));
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                let meta = FilterMeta {
                    interval: [c.interval.0, c.interval.1],
                    part,
                    budget: c.budget,
                    nnz: m.nnz(),
                };
                crate::io::write_json(&meta, &dir.join(format!("filter_{k}_{part}.json")))?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct FilterMeta {
    interval: [usize; 2],
    part: &'static str,
    budget: Option<usize>,
    nnz: usize,
}

/// `[h, Âh, Â²h, …, Â^{p_max}h]` by repeated sparse products.
pub fn poly_apply(adj: &CsMat<f64>, h: &Array2<f64>, p_max: usize) -> Result<Vec<Array2<f64>>> {
    if adj.cols() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "poly_apply",
            expected: adj.cols(),
            got: h.nrows(),
        });
    }
    let mut out = Vec::with_capacity(p_max + 1);
    out.push(h.clone());
    for p in 0..p_max {
        let next = adj * &out[p];
        out.push(next);
    }
    Ok(out)
}

/// Scalar response per eigenvalue for one output channel: the constant part
/// contributes `alpha_pos[k] + alpha_neg[k]` on interval `k`, the
/// polynomial part `Σ_p beta[p] λ^p`.
pub fn filter_response(
    lambda: &[f64],
    intervals: &[(usize, usize)],
    alpha_pos: &[f64],
    alpha_neg: &[f64],
    beta: &[f64],
) -> Vec<(f64, f64)> {
    let mut step = vec![0.0; lambda.len()];
    for (k, &(a, b)) in intervals.iter().enumerate() {
        let height = alpha_pos.get(k).copied().unwrap_or(0.0) + alpha_neg.get(k).copied().unwrap_or(0.0);
        for s in &mut step[a..b] {
            *s += height;
        }
    }
    lambda
        .iter()
        .zip(step)
        .map(|(&l, c)| (l, c + beta.iter().rev().fold(0.0, |acc, &b| acc * l + b)))
        .collect()
}
