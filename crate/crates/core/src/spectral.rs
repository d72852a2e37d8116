//! Symmetric eigendecomposition and spectrum utilities.
//!
//! [`eigendecompose`] wraps LAPACK's symmetric eigensolver and returns a
//! [`Spectrum`] with ascending eigenvalues and orthonormal eigenvector
//! columns. Everything downstream (partitioning, projector filters, the
//! free-eigenvalue baseline) reads from a `Spectrum`.

use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};

/// Maximum asymmetry `|a_ij - a_ji|` accepted by [`eigendecompose`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl Spectrum {
    /// Assembles a spectrum from precomputed parts. Eigenvalues must be
    /// ascending and match the eigenvector column count.
    pub fn from_parts(eigenvalues: Array1<f64>, eigenvectors: Array2<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "eigenvector matrix",
                expected: n,
                got: eigenvectors.ncols(),
            });
        }
        if let Some(i) = (1..n).find(|&i| eigenvalues[i] < eigenvalues[i - 1]) {
            return Err(Error::Unsorted(i));
        }
        Ok(Spectrum {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    /// Eigenvector columns `a..b`.
    pub fn band(&self, range: Range<usize>) -> ArrayView2<'_, f64> {
        self.eigenvectors.slice(s![.., range])
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues.view().insert_axis(Axis(0));
        scaled.dot(&self.eigenvectors.t())
    }

    pub fn reconstruction_error(&self, a: &Array2<f64>) -> f64 {
        max_abs_diff(&self.reconstruct(), a)
    }

    /// `‖UᵀU − I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.eigenvectors.t().dot(&self.eigenvectors);
        gram.indexed_iter()
            .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Grouping tolerance `1e-8 · max(1, ‖λ‖∞)`.
    pub fn default_tolerance(&self) -> f64 {
        let scale = self.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        1e-8 * scale
    }

    /// Number of eigenvalues within `tol` of `x`.
    pub fn count_near(&self, x: f64, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|v| (*v - x).abs() <= tol).count()
    }
}

pub(crate) fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn eigendecompose(a: &Array2<f64>) -> Result<Spectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "eigendecompose (square input)",
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigendecompose input"));
    }
    let asym = max_abs_diff(a, &a.t().to_owned());
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let (values, vectors) = a.eigh(UPLO::Lower).map_err(|e| Error::Linalg(e.to_string()))?;

    // LAPACK already returns ascending order; the stable sort pins ties to
    // their original column order in case a backend does not.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = vectors.select(Axis(1), &order);
    Spectrum::from_parts(eigenvalues, eigenvectors)
}

/// Spectrum of the graph's normalized adjacency.
pub fn graph_spectrum(g: &Graph) -> Result<Spectrum> {
    eigendecompose(&normalized_adjacency(g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinctSpectrum {
    pub values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub tolerance: f64,
}

impl DistinctSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index ranges of each group in the sorted eigenvalue sequence.
    pub fn runs(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.multiplicities
            .iter()
            .map(|&m| {
                let r = start..start + m;
                start += m;
                r
            })
            .collect()
    }

    /// Multiplicity of the group whose representative lies within the
    /// grouping tolerance of `x`, or 0.
    pub fn multiplicity_of(&self, x: f64) -> usize {
        self.values
            .iter()
            .zip(&self.multiplicities)
            .find(|(v, _)| (*v - x).abs() <= self.tolerance)
            .map_or(0, |(_, &m)| m)
    }
}

pub fn distinct_eigenvalues(sp: &Spectrum, tol: f64) -> Result<DistinctSpectrum> {
    group_sorted(sp.eigenvalues().as_slice().expect("contiguous"), tol)
}

/// Greedy grouping of an ascending sequence: a new group starts whenever the
/// gap to the previous element exceeds `tol`. Each group is represented by
/// its mean.
pub fn group_sorted(lambda: &[f64], tol: f64) -> Result<DistinctSpectrum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut values = Vec::new();
    let mut multiplicities = Vec::new();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &x) in lambda.iter().enumerate() {
        if i > 0 && x - lambda[i - 1] > tol {
            values.push(sum / count as f64);
            multiplicities.push(count);
            sum = 0.0;
            count = 0;
        }
        sum += x;
        count += 1;
    }
    if count > 0 {
        values.push(sum / count as f64);
        multiplicities.push(count);
    }
    Ok(DistinctSpectrum {
        values,
        multiplicities,
        tolerance: tol,
    })
}

/// `‖(A − λ′₁I)⋯(A − λ′ₛI)x‖∞`, applied as `s` matrix-vector products.
///
/// Factors are applied in Leja order, which keeps the intermediate vectors
/// from growing geometrically for large `s`.
pub fn minimal_poly_residual(a: &Array2<f64>, ds: &DistinctSpectrum, x: &Array1<f64>) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "minimal_poly_residual",
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("minimal_poly_residual vector"));
    }
    let mut v = x.clone();
    for root in leja_order(&ds.values) {
        let av = a.dot(&v);
        v = av - root * &v;
    }
    Ok(v.iter().fold(0.0, |m, e| m.max(e.abs())))
}

fn leja_order(points: &[f64]) -> Vec<f64> {
    let mut remaining: Vec<f64> = points.to_vec();
    let mut out = Vec::with_capacity(points.len());
    if remaining.is_empty() {
        return out;
    }
    let first = (0..remaining.len())
        .max_by(|&i, &j| remaining[i].abs().total_cmp(&remaining[j].abs()))
        .unwrap();
    out.push(remaining.swap_remove(first));
    // log-product of distances to the chosen set
    let mut score: Vec<f64> = remaining.iter().map(|&p| (p - out[0]).abs().ln()).collect();
    while !remaining.is_empty() {
        let next = (0..remaining.len())
            .max_by(|&i, &j| score[i].total_cmp(&score[j]))
            .unwrap();
        let chosen = remaining.swap_remove(next);
        score.swap_remove(next);
        for (s, &p) in score.iter_mut().zip(&remaining) {
            *s += (p - chosen).abs().ln();
        }
        out.push(chosen);
    }
    out
}

/// Eigenvalue-0 eigenvector of a graph produced by
/// [`crate::graph::duplicate_subgraph`], supported on the originals
/// `h_nodes[i]` and their mirrors `first_mirror + i`, with
/// `u[p_i] = -u[q_i]`.
///
/// Returns `None` when the restriction of the normalized adjacency to the
/// originals has no null vector (the duplicated subgraph's adjacency is
/// nonsingular). The returned vector has unit norm.
pub fn mirror_kernel_vector(g: &Graph, h_nodes: &[usize], first_mirror: usize) -> Option<Array1<f64>> {
    let m = h_nodes.len();
    if m == 0 || first_mirror + m > g.num_nodes() {
        return None;
    }
    let a = normalized_adjacency(g);
    let block = Array2::from_shape_fn((m, m), |(i, j)| a[[h_nodes[i], h_nodes[j]]]);
    let sp = eigendecompose(&block).ok()?;
    let (best, value) = sp
        .eigenvalues()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    if value.abs() > 1e-10 {
        return None;
    }
    let x = sp.eigenvectors().column(best);
    let mut u = Array1::zeros(g.num_nodes());
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for (i, &p) in h_nodes.iter().enumerate() {
        u[p] = scale * x[i];
        u[first_mirror + i] = -scale * x[i];
    }
    Some(u)
}

#[derive(Debug, Serialize)]
struct SpectrumMeta {
    n: usize,
    tol: f64,
    nu0: usize,
    nu0_fraction: f64,
    distinct: usize,
}

/// Writes `eigenvalues.csv`, optionally `eigenvectors.csv`, and
/// `spectrum.json` (`{n, tol, nu0, ...}`) into `dir`. Returns ν(0).
pub fn write_spectrum(sp: &Spectrum, tol: f64, with_vectors: bool, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut text = String::from("lambda\n");
    for v in sp.eigenvalues() {
        text.push_str(&format!("{v:.17e}\n"));
    }
    let path = dir.join("eigenvalues.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    if with_vectors {
        crate::io::write_features(sp.eigenvectors(), dir.join("eigenvectors.csv"))?;
    }
    let nu0 = sp.count_near(0.0, tol);
    let meta = SpectrumMeta {
        n: sp.dim(),
        tol,
        nu0,
        nu0_fraction: nu0 as f64 / sp.dim() as f64,
        distinct: distinct_eigenvalues(sp, tol)?.len(),
    };
    crate::io::write_json(&meta, &dir.join("spectrum.json"))?;
    Ok(nu0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_and_p2() {
        let sp = eigendecompose(&Array2::eye(4)).unwrap();
        assert!(sp.eigenvalues().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        assert!(sp.orthonormality_error() < 1e-12);

        let sp = eigendecompose(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((sp.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((sp.eigenvalues()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            eigendecompose(&array![[0.0, 1.0], [0.5, 0.0]]),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            eigendecompose(&array![[f64::NAN, 0.0], [0.0, 0.0]]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn grouping() {
        let ds = group_sorted(&[-1.0, 0.0, 0.0, 1.0], 1e-8).unwrap();
        assert_eq!(ds.values, vec![-1.0, 0.0, 1.0]);
        assert_eq!(ds.multiplicities, vec![1, 2, 1]);
        assert_eq!(ds.runs(), vec![0..1, 1..3, 3..4]);

        let ds = group_sorted(&[0.0, 0.5e-9, 1.0], 1e-8).unwrap();
        assert_eq!(ds.multiplicities, vec![2, 1]);
        assert!(group_sorted(&[0.0], 0.0).is_err());
    }

    #[test]
    fn residual_closed_forms() {
        let eye = Array2::<f64>::eye(3);
        let ds = group_sorted(&[1.0, 1.0, 1.0], 1e-8).unwrap();
        let x = array![0.6, 0.0, 0.8];
        assert_eq!(minimal_poly_residual(&eye, &ds, &x).unwrap(), 0.0);

        let p2 = array![[0.0, 1.0], [1.0, 0.0]];
        let ds = group_sorted(&[-1.0, 1.0], 1e-8).unwrap();
        assert_eq!(minimal_poly_residual(&p2, &ds, &array![1.0, 0.0]).unwrap(), 0.0);

        assert!(minimal_poly_residual(&p2, &ds, &array![1.0]).is_err());
    }

    #[test]
    fn leja_visits_every_point_once() {
        let pts = [0.3, -1.0, 0.9, 0.0, -0.2];
        let mut order = leja_order(&pts);
        assert_eq!(order[0], -1.0);
        order.sort_by(f64::total_cmp);
        let mut sorted = pts.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(order, sorted);
    }
}
