//! Spectrum partitioning by significant eigenvalue gaps.
//!
//! Each gap `d_i = λ_{i+1} − λ_i` is scored by how far it sits from the
//! mean gap in the `w` gaps before it and the `w` gaps after it, each
//! distance normalized by the window's standard deviation:
//!
//! ```text
//! s_i = |d_i − μ_prev| / (σ_prev + ε) + |d_i − μ_next| / (σ_next + ε)
//! ```
//!
//! Gaps that are zero (equal eigenvalues, up to tolerance) score 0 so that
//! runs of repeated eigenvalues are never split. The `K − 1` best gaps
//! become interval boundaries, giving `K` half-open intervals of eigenvector
//! columns `[B[j], B[j+1])` with `B[0] = 0` and `B[K] = n`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};

/// Regularizer in the score denominators.
pub const SCORE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    pub scores: Vec<f64>,
    pub boundaries: Vec<usize>,
    #[serde(rename = "w")]
    pub window: usize,
    /// Requested number of intervals; may exceed `num_intervals()` when too
    /// few gaps have a positive score.
    #[serde(rename = "k")]
    pub requested: usize,
}

impl PartitionResult {
    pub fn num_intervals(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn intervals(&self) -> Vec<(usize, usize)> {
        self.boundaries.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Single interval `[0, n)`.
    pub fn whole(n: usize) -> Self {
        PartitionResult {
            scores: vec![0.0; n.saturating_sub(1)],
            boundaries: vec![0, n],
            window: 0,
            requested: 1,
        }
    }

    /// `k` contiguous intervals of (nearly) equal size, ignoring the
    /// spectrum. Used for timing runs where only the interval count matters.
    pub fn equal_width(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cannot cut {n} eigenvalues into {k} intervals")));
        }
        let boundaries = (0..=k).map(|j| j * n / k).collect();
        Ok(PartitionResult {
            scores: vec![0.0; n - 1],
            boundaries,
            window: 0,
            requested: k,
        })
    }
}

pub fn discrete_derivative(lambda: &[f64]) -> Result<Vec<f64>> {
    lambda
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let d = w[1] - w[0];
            if d < 0.0 || d.is_nan() {
                Err(Error::Unsorted(i + 1))
            } else {
                Ok(d)
            }
        })
        .collect()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores for every gap; indices outside `[w, len(d) − 1 − w]` are 0, as are
/// gaps `d_i ≤ eq_tol`.
pub fn significance_scores(d: &[f64], window: usize, eq_tol: f64) -> Result<Vec<f64>> {
    if window == 0 || d.len() < 2 * window + 1 {
        return Err(Error::WindowTooLarge { window, len: d.len() });
    }
    let mut scores = vec![0.0; d.len()];
    for i in window..d.len() - window {
        if d[i] <= eq_tol {
            continue;
        }
        let (mu_p, sd_p) = mean_std(&d[i - window..i]);
        let (mu_n, sd_n) = mean_std(&d[i + 1..i + 1 + window]);
        scores[i] = (d[i] - mu_p).abs() / (sd_p + SCORE_EPSILON) + (d[i] - mu_n).abs() / (sd_n + SCORE_EPSILON);
    }
    Ok(scores)
}

/// Selects up to `num_intervals − 1` boundaries from the highest-scoring
/// gaps of an ascending eigenvalue sequence.
///
/// Ties in score go to the larger raw gap, then to the smaller index. Gaps
/// with score 0 are never chosen.
pub fn identify_significant_gaps(
    lambda: &[f64],
    window: usize,
    num_intervals: usize,
    eq_tol: f64,
) -> Result<PartitionResult> {
    let n = lambda.len();
    if num_intervals == 0 {
        return Err(Error::InvalidArgument("num_intervals must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    let d = discrete_derivative(lambda)?;
    if num_intervals == 1 {
        let scores = significance_scores(&d, window, eq_tol).unwrap_or_else(|_| vec![0.0; d.len()]);
        return Ok(PartitionResult {
            scores,
            boundaries: vec![0, n],
            window,
            requested: 1,
        });
    }
    let scores = significance_scores(&d, window, eq_tol)?;

    let mut candidates: Vec<usize> = (0..d.len()).filter(|&i| scores[i] > 0.0).collect();
    candidates.sort_by(|&a, &b| rank_gaps(&scores, &d, a, b));
    candidates.truncate(num_intervals - 1);

    let mut boundaries: Vec<usize> = Vec::with_capacity(candidates.len() + 2);
    boundaries.push(0);
    boundaries.extend(candidates.iter().map(|i| i + 1));
    boundaries.push(n);
    boundaries.sort_unstable();
    boundaries.dedup();
    Ok(PartitionResult {
        scores,
        boundaries,
        window,
        requested: num_intervals,
    })
}

fn rank_gaps(scores: &[f64], d: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .total_cmp(&scores[a])
        .then_with(|| d[b].total_cmp(&d[a]))
        .then(a.cmp(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        assert_eq!(discrete_derivative(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(discrete_derivative(&[-1.0, 0.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let d = discrete_derivative(&[-1.0, -0.9, 0.9, 1.0]).unwrap();
        let expect = [0.1, 1.8, 0.1];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(discrete_derivative(&[0.0, -1.0]), Err(Error::Unsorted(1))));
    }

    #[test]
    fn constant_gaps_score_zero() {
        let d = vec![0.25; 9];
        let s = significance_scores(&d, 2, 1e-8).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gap_scores_zero() {
        // The gap between the repeated 0.5s lies inside a run.
        let lambda = [-1.0, -0.7, -0.2, 0.5, 0.5, 0.6, 0.9, 1.0];
        let d = discrete_derivative(&lambda).unwrap();
        let s = significance_scores(&d, 2, 1e-8).unwrap();
        assert_eq!(s[3], 0.0);
        assert!(s[2] > 0.0);
    }

    #[test]
    fn window_too_large() {
        assert!(matches!(
            significance_scores(&[0.1; 4], 2, 1e-8),
            Err(Error::WindowTooLarge { window: 2, len: 4 })
        ));
        assert!(significance_scores(&[0.1; 4], 0, 1e-8).is_err());
    }

    #[test]
    fn two_clusters() {
        let lambda = [-1.0, -0.9, -0.8, 0.8, 0.9, 1.0];
        let p = identify_significant_gaps(&lambda, 2, 2, 1e-8).unwrap();
        assert_eq!(p.boundaries, vec![0, 3, 6]);
        assert_eq!(p.intervals(), vec![(0, 3), (3, 6)]);
        let top = (0..p.scores.len()).max_by(|&a, &b| p.scores[a].total_cmp(&p.scores[b])).unwrap();
        assert_eq!(top, 2);
        assert!(p.scores.iter().enumerate().all(|(i, &s)| i == 2 || s == 0.0));
    }

    #[test]
    fn single_interval_and_flat_spectrum() {
        let p = identify_significant_gaps(&[0.0, 0.1, 0.5], 5, 1, 1e-8).unwrap();
        assert_eq!(p.boundaries, vec![0, 3]);
        let p = identify_significant_gaps(&[0.3; 12], 2, 4, 1e-8).unwrap();
        assert_eq!(p.boundaries, vec![0, 12]);
        assert_eq!(p.num_intervals(), 1);
        assert_eq!(p.requested, 4);
    }

    #[test]
    fn equal_width_tiles() {
        let p = PartitionResult::equal_width(10, 3).unwrap();
        assert_eq!(p.boundaries, vec![0, 3, 6, 10]);
        assert!(PartitionResult::equal_width(3, 4).is_err());
    }
}
