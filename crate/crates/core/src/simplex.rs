//! Probability-simplex and softmax mathematics.
//!
//! Scores are plain `&[f64]` slices; everything that lands on the simplex is
//! returned as a [`SimplexVector`], whose constructor enforces nonnegativity
//! and unit mass.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Tolerance on `|Σ xᵢ − 1|` accepted by [`SimplexVector::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Max deviation from the mean below which a vector counts as a multiple of `1ₙ`.
pub const ONES_SPAN_TOL: f64 = 1e-10;

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("empty probability vector".into()));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Domain(format!(
                "probability entry {bad} is negative or not finite"
            )));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Domain(format!(
                "probability entries sum to {total}, not 1"
            )));
        }
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy needs at least one action");
        Self(vec![1.0 / n as f64; n])
    }

    /// The `i`-th vertex `eᵢ`.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n, "vertex index {i} out of range for n = {n}");
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        Self(e)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    // Constructors inside this module guarantee the invariants by construction.
    fn from_trusted(entries: Vec<f64>) -> Self {
        Self(entries)
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(s: SimplexVector) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Domain(format!("{what}: empty vector")));
    }
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: non-finite entry")))
    }
}

fn max_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Writes `σ(v)` into `out` without validation. Callers guarantee finiteness.
pub(crate) fn softmax_into(v: &[f64], out: &mut [f64]) {
    let m = max_entry(v);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `σ(v) = exp(v) / Σ exp(vᵢ)`, computed after subtracting `max v`.
pub fn softmax(v: &[f64]) -> Result<SimplexVector> {
    check_finite(v, "softmax")?;
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    Ok(SimplexVector::from_trusted(out))
}

/// `log Σ exp(vᵢ)`.
pub fn lse(v: &[f64]) -> Result<f64> {
    check_finite(v, "lse")?;
    Ok(lse_unchecked(v))
}

pub(crate) fn lse_unchecked(v: &[f64]) -> f64 {
    let m = max_entry(v);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `∇σ(v) = diag(σ(v)) − σ(v)σ(v)ᵀ`.
pub fn softmax_jacobian(v: &[f64]) -> Result<DMatrix<f64>> {
    let s = softmax(v)?;
    let s = s.as_slice();
    let n = s.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { s[i] } else { 0.0 };
        diag - s[i] * s[j]
    }))
}

/// `∇σ(v)·w` without forming the matrix.
pub fn jacobian_apply(v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_len(v.len(), w.len(), "jacobian_apply direction")?;
    let s = softmax(v)?;
    Ok(jacobian_apply_with(s.as_slice(), w))
}

pub(crate) fn jacobian_apply_with(s: &[f64], w: &[f64]) -> Vec<f64> {
    let sw: f64 = s.iter().zip(w).map(|(a, b)| a * b).sum();
    s.iter().zip(w).map(|(si, wi)| si * (wi - sw)).collect()
}

/// The quadratic form `wᵀ ∇σ(v) w`, i.e. the variance of `w` under `σ(v)`.
pub fn jacobian_quadratic(v: &[f64], w: &[f64]) -> Result<f64> {
    check_len(v.len(), w.len(), "jacobian_quadratic direction")?;
    let s = softmax(v)?;
    Ok(jacobian_quadratic_with(s.as_slice(), w))
}

pub(crate) fn jacobian_quadratic_with(s: &[f64], w: &[f64]) -> f64 {
    let mean: f64 = s.iter().zip(w).map(|(a, b)| a * b).sum();
    s.iter()
        .zip(w)
        .map(|(si, wi)| si * (wi - mean) * (wi - mean))
        .sum()
}

/// `D_KL(x ‖ y) = Σ xᵢ ln(xᵢ / yᵢ)` with `0·ln 0 = 0`.
pub fn kl_divergence(x: &SimplexVector, y: &SimplexVector) -> Result<f64> {
    check_len(x.len(), y.len(), "kl_divergence")?;
    let mut total = 0.0;
    for (i, (&xi, &yi)) in x.as_slice().iter().zip(y.as_slice()).enumerate() {
        if xi == 0.0 {
            continue;
        }
        if yi == 0.0 {
            return Err(Error::Domain(format!(
                "KL divergence is infinite: x[{i}] = {xi} > 0 but y[{i}] = 0"
            )));
        }
        total += xi * (xi / yi).ln();
    }
    // Rounding can leave tiny negative values for x ≈ y.
    Ok(total.max(0.0))
}

/// Euclidean projection onto the simplex by sort-and-threshold.
pub fn project_simplex(v: &[f64]) -> Result<SimplexVector> {
    check_finite(v, "project_simplex")?;
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out);
    Ok(SimplexVector::from_trusted(out))
}

pub(crate) fn project_simplex_into(v: &[f64], out: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    // Renormalise away rounding drift so the result meets the simplex tolerance.
    let total: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `vᵀ(σ(v) − σ(−v))`; nonnegative, zero exactly on `span{1ₙ}`.
pub fn lemma1_form(v: &[f64]) -> Result<f64> {
    check_finite(v, "lemma1_form")?;
    let plus = softmax(v)?;
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    let minus = softmax(&neg)?;
    Ok(v
        .iter()
        .zip(plus.as_slice().iter().zip(minus.as_slice()))
        .map(|(vi, (a, b))| vi * (a - b))
        .sum())
}

/// Whether `v` is a multiple of the all-ones vector (within [`ONES_SPAN_TOL`]).
pub fn in_ones_span(v: &[f64]) -> bool {
    if v.is_empty() {
        return true;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().all(|x| (x - mean).abs() < ONES_SPAN_TOL)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
