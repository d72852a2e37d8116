//! Numerical checks of polynomial approximation limits on a discrete
//! spectrum.
//!
//! The error of a polynomial filter `p` against a target response `f` is
//! `ℰ(p, f) = Σᵢ |p(λᵢ) − f(λᵢ)|`. Two lower bounds are exercised:
//!
//! * if the spectrum is ε-dense in `[−1, 1]` and `d²ε < 1`, then for every
//!   `p ∈ 𝒫_d` and `‖f‖∞ ≤ 1`, `ℰ ≥ ‖p‖∞ (1 − d²ε) − 1`;
//! * if `f` jumps by `h` between consecutive eigenvalues separated by
//!   `gap`, then every `p ∈ 𝒫_d` with `‖p‖∞ ≤ 1` has `ℰ ≥ h − gap · d²`.
//!
//! Both rest on Markov's inequality `‖p′‖∞ ≤ d² ‖p‖∞` on `[−1, 1]`, checked
//! by [`markov_check`]. Sup norms are taken on uniform grids.

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};

/// Grid used for sup-norm constraints of the fitting oracle.
pub const FIT_GRID: usize = 2001;
/// Grid used by [`markov_check`].
pub const MARKOV_GRID: usize = 4001;
pub const MARKOV_SLACK: f64 = 1e-9;

/// Polynomial in the monomial basis, ascending degree. `degree()` is the
/// nominal degree `coeffs.len() − 1`; trailing zeros are allowed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolySpec {
    pub coeffs: Vec<f64>,
}

impl PolySpec {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        PolySpec { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        PolySpec::new(vec![0.0; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> PolySpec {
        if self.coeffs.len() == 1 {
            return PolySpec::new(vec![0.0]);
        }
        PolySpec::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect())
    }

    /// `max |p(x)|` over `points` equally spaced nodes of `[−1, 1]`.
    pub fn grid_sup(&self, points: usize) -> f64 {
        uniform_grid(points).map(|x| self.eval(x).abs()).fold(0.0, f64::max)
    }

    /// Chebyshev polynomial of the first kind `T_d`, in monomial form.
    pub fn chebyshev(d: usize) -> PolySpec {
        PolySpec::new(chebyshev_monomials(d).pop().unwrap())
    }
}

fn uniform_grid(points: usize) -> impl Iterator<Item = f64> {
    assert!(points >= 2);
    let step = 2.0 / (points - 1) as f64;
    (0..points).map(move |i| if i + 1 == points { 1.0 } else { -1.0 + i as f64 * step })
}

/// Monomial coefficients of `T_0, …, T_d`.
fn chebyshev_monomials(d: usize) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = vec![vec![1.0]];
    if d >= 1 {
        t.push(vec![0.0, 1.0]);
    }
    for k in 2..=d {
        let mut next = vec![0.0; k + 1];
        for (j, &c) in t[k - 1].iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, &c) in t[k - 2].iter().enumerate() {
            next[j] -= c;
        }
        t.push(next);
    }
    t
}

/// Rows `[T_0(x), …, T_d(x)]` for each `x`.
fn chebyshev_vandermonde(xs: &[f64], d: usize) -> Array2<f64> {
    let mut v = Array2::zeros((xs.len(), d + 1));
    for (i, &x) in xs.iter().enumerate() {
        v[[i, 0]] = 1.0;
        if d >= 1 {
            v[[i, 1]] = x;
        }
        for k in 2..=d {
            v[[i, k]] = 2.0 * x * v[[i, k - 1]] - v[[i, k - 2]];
        }
    }
    v
}

/// A jump of magnitude `h` between positions `index` and `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    pub index: usize,
    pub magnitude: f64,
}

/// Target response sampled at each eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterTarget {
    pub values: Vec<f64>,
    pub sup_norm: f64,
    pub jump: Option<Jump>,
}

impl FilterTarget {
    /// Checks `|f(λᵢ)| ≤ sup_norm` and the jump magnitude.
    pub fn new(values: Vec<f64>, sup_norm: f64, jump: Option<Jump>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) || !sup_norm.is_finite() {
            return Err(Error::NonFinite("filter target"));
        }
        if let Some(v) = values.iter().find(|v| v.abs() > sup_norm + 1e-12) {
            return Err(Error::InvalidArgument(format!("target value {v} exceeds sup norm {sup_norm}")));
        }
        if let Some(j) = jump {
            let ok = j.index + 1 < values.len() && ((values[j.index + 1] - values[j.index]).abs() - j.magnitude).abs() <= 1e-12;
            if !ok {
                return Err(Error::InvalidArgument(format!("jump {j:?} does not match the target values")));
            }
        }
        Ok(FilterTarget { values, sup_norm, jump })
    }

    /// `−h/2` up to and including `index`, `+h/2` after it.
    pub fn step(n: usize, index: usize, h: f64) -> Result<Self> {
        let values = (0..n).map(|i| if i <= index { -h / 2.0 } else { h / 2.0 }).collect();
        FilterTarget::new(values, h / 2.0, Some(Jump { index, magnitude: h }))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `Σᵢ |p(λᵢ) − f(λᵢ)|`.
pub fn approximation_error(p: &PolySpec, f: &FilterTarget, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != f.len() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues vs target values",
            expected: lambda.len(),
            got: f.len(),
        });
    }
    Ok(lambda.iter().zip(&f.values).map(|(&l, &v)| (p.eval(l) - v).abs()).sum())
}

/// Covering radius of `[−1, 1]` by the sorted points `lambda`.
pub fn epsilon_density(lambda: &[f64]) -> Result<f64> {
    let (first, last) = match (lambda.first(), lambda.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Empty),
    };
    if let Some(i) = lambda.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted(i + 1));
    }
    if first < -1.0 - 1e-12 || last > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!("eigenvalues must lie in [-1, 1], got [{first}, {last}]")));
    }
    let half_gap = lambda.windows(2).map(|w| (w[1] - w[0]) / 2.0).fold(0.0, f64::max);
    Ok((first + 1.0).max(1.0 - last).max(half_gap))
}

/// `p_sup · (1 − d²ε) − 1`, or [`Error::NotApplicable`] when `d²ε ≥ 1`.
pub fn dense_lower_bound(p_sup: f64, d: usize, eps: f64) -> Result<f64> {
    let d2e = (d * d) as f64 * eps;
    if d2e >= 1.0 {
        return Err(Error::NotApplicable(format!("d²ε = {d2e} is not below 1")));
    }
    if p_sup < 0.0 {
        return Err(Error::InvalidArgument(format!("sup norm must be non-negative, got {p_sup}")));
    }
    Ok(p_sup * (1.0 - d2e) - 1.0)
}

/// `h − gap · d²`.
pub fn jump_lower_bound(h: f64, gap: f64, d: usize) -> f64 {
    h - gap * (d * d) as f64
}

/// Tuning for [`best_constrained_poly`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub iterations: usize,
    pub step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            iterations: 2000,
            step: 0.5,
        }
    }
}

/// Approximately minimizes `ℰ(p, f)` over `𝒫_d` subject to
/// `max |p| ≤ sup_bound` on a [`FIT_GRID`]-point grid.
///
/// Projected subgradient descent in the Chebyshev basis, started from the
/// least-squares fit scaled into the feasible set; the projection rescales
/// `p` until its grid sup meets the bound. Returns the best feasible
/// iterate, so the error is an upper bound on the true minimum.
pub fn best_constrained_poly(lambda: &[f64], f: &FilterTarget, d: usize, sup_bound: f64) -> Result<(PolySpec, f64)> {
    best_constrained_poly_with(lambda, f, d, sup_bound, FitOptions::default())
}

pub fn best_constrained_poly_with(
    lambda: &[f64],
    f: &FilterTarget,
    d: usize,
    sup_bound: f64,
    opts: FitOptions,
) -> Result<(PolySpec, f64)> {
    if lambda.len() != f.len() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues vs target values",
            expected: lambda.len(),
            got: f.len(),
        });
    }
    if lambda.is_empty() {
        return Err(Error::Empty);
    }
    if sup_bound <= 0.0 {
        return Err(Error::InvalidArgument(format!("sup bound must be positive, got {sup_bound}")));
    }
    let grid: Vec<f64> = uniform_grid(FIT_GRID).collect();
    let v_grid = chebyshev_vandermonde(&grid, d);
    let v_pts = chebyshev_vandermonde(lambda, d);
    let target = Array1::from_vec(f.values.clone());

    let project = |c: &mut Array1<f64>| {
        let sup = v_grid.dot(&*c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > sup_bound {
            *c *= sup_bound / sup;
        }
    };
    let objective = |c: &Array1<f64>| (v_pts.dot(c) - &target).mapv(f64::abs).sum();

    let mut c = least_squares(&v_pts, &target);
    project(&mut c);
    let mut best = c.clone();
    let mut best_err = objective(&c);

    // A feasible constant is always available as a fallback start.
    let mut sorted = f.values.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2].clamp(-sup_bound, sup_bound);
    let mut c0 = Array1::zeros(d + 1);
    c0[0] = median;
    let e0 = objective(&c0);
    if e0 < best_err {
        best = c0;
        best_err = e0;
    }

    let scale = 1.0 / lambda.len() as f64;
    c = best.clone();
    for t in 1..=opts.iterations {
        let residual = v_pts.dot(&c) - &target;
        let signs = residual.mapv(|r| if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { 0.0 });
        let g = v_pts.t().dot(&signs) * scale;
        let norm = g.dot(&g).sqrt();
        if norm == 0.0 {
            break;
        }
        c.scaled_add(-opts.step * sup_bound / (norm * (t as f64).sqrt()), &g);
        project(&mut c);
        let e = objective(&c);
        if e < best_err {
            best_err = e;
            best.assign(&c);
        }
    }

    let basis = chebyshev_monomials(d);
    let mut coeffs = vec![0.0; d + 1];
    for (k, tk) in basis.iter().enumerate() {
        for (j, &a) in tk.iter().enumerate() {
            coeffs[j] += best[k] * a;
        }
    }
    let p = PolySpec::new(coeffs);
    let achieved = approximation_error(&p, f, lambda)?;
    Ok((p, achieved))
}

/// Minimum-norm least squares via the normal equations with a tiny ridge
/// (the Chebyshev basis keeps them well conditioned for small `d`).
fn least_squares(v: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    use ndarray_linalg::Solve;
    let k = v.ncols();
    let mut gram = v.t().dot(v);
    for i in 0..k {
        gram[[i, i]] += 1e-10;
    }
    let rhs = v.t().dot(y);
    gram.solve_into(rhs).unwrap_or_else(|_| Array1::zeros(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovCheck {
    pub sup_p: f64,
    pub sup_dp: f64,
    pub ok: bool,
}

/// Grid estimate of `‖p‖∞`, `‖p′‖∞` and whether `‖p′‖∞ ≤ d²‖p‖∞ + slack`,
/// with `d` the nominal degree.
pub fn markov_check(p: &PolySpec) -> MarkovCheck {
    let d = p.degree() as f64;
    let sup_p = p.grid_sup(MARKOV_GRID);
    let sup_dp = p.derivative().grid_sup(MARKOV_GRID);
    MarkovCheck {
        sup_p,
        sup_dp,
        ok: sup_dp <= d * d * sup_p + MARKOV_SLACK,
    }
}

/// One line of the theory report. `bound` is `None` when the hypothesis of
/// the bound fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRecord {
    pub kind: &'static str,
    pub d: usize,
    pub eps: f64,
    pub gap: f64,
    pub h: f64,
    pub bound: Option<f64>,
    pub achieved: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    pub jump_instances: usize,
    pub dense_instances: usize,
    pub markov_instances: usize,
    pub max_degree: usize,
    pub points: usize,
    pub fit: FitOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            jump_instances: 100,
            dense_instances: 50,
            markov_instances: 500,
            max_degree: 8,
            points: 24,
            fit: FitOptions::default(),
        }
    }
}

/// Eigenvalue-like points: `points − 2` uniform draws in `[−1, 1]` plus a
/// pair `(c, c + gap)`; returns the sorted points and the index of `c`.
pub fn points_with_gap<R: Rng + ?Sized>(points: usize, gap: f64, rng: &mut R) -> (Vec<f64>, usize) {
    assert!(points >= 2 && (0.0..2.0).contains(&gap));
    let c = rng.random_range(-1.0..1.0 - gap);
    let mut others: Vec<f64> = (0..points - 2)
        .map(|_| rng.random_range(-1.0..=1.0))
        .filter(|&x| x < c || x > c + gap)
        .collect();
    while others.len() < points - 2 {
        let x: f64 = rng.random_range(-1.0..=1.0);
        if x < c || x > c + gap {
            others.push(x);
        }
    }
    others.sort_by(f64::total_cmp);
    let index = others.partition_point(|&x| x < c);
    let mut lambda = others;
    lambda.insert(index, c);
    lambda.insert(index + 1, c + gap);
    (lambda, index)
}

/// Jump-bound instance: step target of height `h` across a gap `gap`, fitted
/// with `‖p‖∞ ≤ 1`.
pub fn jump_instance<R: Rng + ?Sized>(h: f64, gap: f64, d: usize, points: usize, fit: FitOptions, rng: &mut R) -> Result<TheoryRecord> {
    let (lambda, index) = points_with_gap(points, gap, rng);
    let f = FilterTarget::step(lambda.len(), index, h)?;
    let (_, achieved) = best_constrained_poly_with(&lambda, &f, d, 1.0, fit)?;
    let bound = jump_lower_bound(h, gap, d);
    Ok(TheoryRecord {
        kind: "jump",
        d,
        eps: epsilon_density(&lambda)?,
        gap,
        h,
        bound: Some(bound),
        achieved,
        pass: achieved >= bound - 1e-9,
    })
}

/// Dense-spectrum instance: a random `p` of grid sup `p_sup` against a random
/// target with `‖f‖∞ ≤ 1` on a uniform grid of `points` eigenvalues.
pub fn dense_instance<R: Rng + ?Sized>(d: usize, points: usize, p_sup: f64, rng: &mut R) -> Result<TheoryRecord> {
    let lambda: Vec<f64> = uniform_grid(points).collect();
    let eps = epsilon_density(&lambda)?;
    let mut p = PolySpec::new((0..=d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let s = p.grid_sup(FIT_GRID);
    if s > 0.0 {
        p.coeffs.iter_mut().for_each(|c| *c *= p_sup / s);
    }
    let f = FilterTarget::new((0..points).map(|_| rng.random_range(-1.0..=1.0)).collect(), 1.0, None)?;
    let achieved = approximation_error(&p, &f, &lambda)?;
    let sup = p.grid_sup(FIT_GRID);
    let (bound, pass) = match dense_lower_bound(sup, d, eps) {
        Ok(b) => (Some(b), achieved >= b - 1e-9),
        Err(Error::NotApplicable(_)) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(TheoryRecord {
        kind: "dense",
        d,
        eps,
        gap: 0.0,
        h: 0.0,
        bound,
        achieved,
        pass,
    })
}

/// Markov instance: `bound` is `d²‖p‖∞`, `achieved` is `‖p′‖∞`.
pub fn markov_instance(p: &PolySpec) -> TheoryRecord {
    let m = markov_check(p);
    let d = p.degree();
    TheoryRecord {
        kind: "markov",
        d,
        eps: 0.0,
        gap: 0.0,
        h: 0.0,
        bound: Some((d * d) as f64 * m.sup_p),
        achieved: m.sup_dp,
        pass: m.ok,
    }
}

/// Randomized jump, dense and Markov instances.
pub fn run_theory_suite(opts: &SuiteOptions) -> Result<Vec<TheoryRecord>> {
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let max_d = opts.max_degree.max(1);
    let mut out = Vec::new();
    for _ in 0..opts.jump_instances {
        let d = rng.random_range(1..=max_d);
        let h = rng.random_range(0.1..=2.0);
        // Keep most bounds non-vacuous: gap · d² below h.
        let gap = rng.random_range(0.0..h / (d * d) as f64);
        out.push(jump_instance(h, gap, d, opts.points, opts.fit, &mut rng)?);
    }
    for i in 0..opts.dense_instances {
        let d = rng.random_range(1..=max_d);
        // Half the instances violate d²ε < 1 on purpose.
        let points = if i % 2 == 0 { 4 * d * d + 1 } else { d * d / 2 + 2 };
        let p_sup = rng.random_range(1.0..20.0);
        out.push(dense_instance(d, points, p_sup, &mut rng)?);
    }
    for _ in 0..opts.markov_instances {
        let d = rng.random_range(1..=max_d);
        let p = PolySpec::new((0..=d).map(|_| rng.random_range(-1.0..1.0)).collect());
        out.push(markov_instance(&p));
    }
    Ok(out)
}
