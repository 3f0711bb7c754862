//! SISO linear time-invariant systems.
//!
//! [`RationalTf`] is the frequency-domain view `g(s) = num(s)/den(s)`;
//! [`StateSpaceSiso`] is the realisation `(A, B, C)` used inside simulations.
//! An n-channel diagonal system `h(s)·Iₙ` is never assembled as a Kronecker
//! product: callers run `n` independent copies of the SISO state instead.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// `|den(jω)|` at or below this is treated as evaluating on a pole.
pub const POLE_TOL: f64 = 1e-9;

/// Half-width of the band around zero in which `min Re g(jω)` is "marginal".
pub const MARGINAL_BAND: f64 = 1e-9;

/// Rational transfer function with coefficients in descending powers of `s`.
/// The denominator is stored monic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf", into = "RawTf")]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTf> for RationalTf {
    type Error = Error;
    fn try_from(raw: RawTf) -> Result<Self> {
        RationalTf::new(raw.num, raw.den)
    }
}

impl From<RationalTf> for RawTf {
    fn from(g: RationalTf) -> Self {
        RawTf {
            num: g.num,
            den: g.den,
        }
    }
}

fn strip_leading_zeros(mut c: Vec<f64>) -> Vec<f64> {
    let first = c.iter().position(|x| *x != 0.0).unwrap_or(c.len());
    c.drain(..first);
    c
}

fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite transfer function coefficient".into()));
        }
        let den = strip_leading_zeros(den);
        if den.is_empty() {
            return Err(Error::Domain("denominator is identically zero".into()));
        }
        let lead = den[0];
        let den: Vec<f64> = den.iter().map(|c| c / lead).collect();
        let mut num: Vec<f64> = strip_leading_zeros(num).iter().map(|c| c / lead).collect();
        if num.is_empty() {
            num.push(0.0);
        }
        Ok(Self { num, den })
    }

    /// `1/s`, the integrator behind standard replicator dynamics.
    pub fn integrator() -> Self {
        Self::new(vec![1.0], vec![1.0, 0.0]).expect("valid")
    }

    /// `γλ/(s+λ)`.
    pub fn low_pass(gamma: f64, lambda: f64) -> Self {
        Self::new(vec![gamma * lambda], vec![1.0, lambda]).expect("valid")
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        horner(&self.num, s) / horner(&self.den, s)
    }

    /// Sum `g₁ + g₂` (used for e.g. `1/s + γλ/(s+λ)`).
    pub fn add(&self, other: &Self) -> Self {
        let n1 = poly_mul(&self.num, &other.den);
        let n2 = poly_mul(&other.num, &self.den);
        Self::new(poly_add(&n1, &n2), poly_mul(&self.den, &other.den)).expect("monic product")
    }

    /// Controllable-canonical realisation for systems of degree one or two.
    /// Returns the strictly proper part as `(A, B, C)` plus the feedthrough `D`.
    pub fn realize(&self) -> Result<(StateSpaceSiso, f64)> {
        let deg = self.degree();
        if self.num.len() > self.den.len() {
            return Err(Error::Domain("improper transfer function".into()));
        }
        if !(1..=2).contains(&deg) {
            return Err(Error::Domain(format!(
                "realisation is only provided for degree 1 or 2, got {deg}"
            )));
        }
        // Pad numerator to the denominator length, split off the feedthrough.
        let mut num = vec![0.0; self.den.len() - self.num.len()];
        num.extend_from_slice(&self.num);
        let d = num[0];
        let rem: Vec<f64> = num
            .iter()
            .zip(&self.den)
            .skip(1)
            .map(|(n, a)| n - d * a)
            .collect();
        let ss = if deg == 1 {
            StateSpaceSiso::new(vec![vec![-self.den[1]]], vec![1.0], vec![rem[0]])?
        } else {
            StateSpaceSiso::new(
                vec![vec![0.0, 1.0], vec![-self.den[2], -self.den[1]]],
                vec![0.0, 1.0],
                vec![rem[1], rem[0]],
            )?
        };
        Ok((ss, d))
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len().max(b.len());
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().rev().enumerate() {
        out[len - 1 - i] += x;
    }
    for (i, x) in b.iter().rev().enumerate() {
        out[len - 1 - i] += x;
    }
    out
}

/// Gain and phase lag of `g(jω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    /// `|g(jω)|`
    pub gain: f64,
    /// `−arg g(jω)`, in `(−π, π]`
    pub phase_lag: f64,
}

/// `g(jω)`.
pub fn freq_response(g: &RationalTf, omega: f64) -> Result<Complex64> {
    let s = Complex64::new(0.0, omega);
    let den = horner(&g.den, s);
    if den.norm() <= POLE_TOL {
        return Err(Error::Pole { omega });
    }
    Ok(horner(&g.num, s) / den)
}

pub fn to_frequency_point(g: &RationalTf, omega: f64) -> Result<FrequencyPoint> {
    let value = freq_response(g, omega)?;
    let mut phase_lag = -value.arg();
    if phase_lag <= -PI {
        phase_lag += 2.0 * PI;
    }
    Ok(FrequencyPoint {
        omega,
        gain: value.norm(),
        phase_lag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassivityVerdict {
    Passive,
    Marginal,
    NotPassive,
}

/// Outcome of a sampled positive-real check. `min_real_part` is reported so
/// callers can judge strictness themselves; sampling cannot certify a uniform
/// margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    pub verdict: PassivityVerdict,
    pub min_real_part: f64,
    pub argmin_omega: f64,
}

/// `count` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count > 0);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

/// 400 log-spaced frequencies over `[1e-4, 1e4]`.
pub fn default_passivity_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 400)
}

/// Sampled check of `Re g(jω) ≥ 0`. Real coefficients make `Re g` even in ω,
/// so a grid of positive frequencies covers the whole axis.
pub fn is_passive(g: &RationalTf, omega_grid: &[f64]) -> Result<PassivityReport> {
    if omega_grid.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    let mut min_re = f64::INFINITY;
    let mut argmin = omega_grid[0];
    for &w in omega_grid {
        let re = freq_response(g, w)?.re;
        if re < min_re {
            min_re = re;
            argmin = w;
        }
    }
    let verdict = if min_re < -MARGINAL_BAND {
        PassivityVerdict::NotPassive
    } else if min_re <= MARGINAL_BAND {
        PassivityVerdict::Marginal
    } else {
        PassivityVerdict::Passive
    };
    Ok(PassivityReport {
        verdict,
        min_real_part: min_re,
        argmin_omega: argmin,
    })
}

/// `max |g(jω)|` over a grid; a lower estimate of the H∞ norm.
pub fn hinf_estimate(g: &RationalTf, omega_grid: &[f64]) -> Result<f64> {
    omega_grid
        .iter()
        .map(|&w| freq_response(g, w).map(|v| v.norm()))
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
}

/// `h(s) = C (sI − A)⁻¹ B` with `m` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSs", into = "RawSs")]
pub struct StateSpaceSiso {
    order: usize,
    /// Row-major `m×m`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSs {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<RawSs> for StateSpaceSiso {
    type Error = Error;
    fn try_from(raw: RawSs) -> Result<Self> {
        StateSpaceSiso::new(raw.a, raw.b, raw.c)
    }
}

impl From<StateSpaceSiso> for RawSs {
    fn from(h: StateSpaceSiso) -> Self {
        RawSs {
            a: h.a.chunks(h.order.max(1)).map(|r| r.to_vec()).take(h.order).collect(),
            b: h.b,
            c: h.c,
        }
    }
}

impl StateSpaceSiso {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let m = a.len();
        for row in &a {
            check_len(m, row.len(), "state matrix row")?;
        }
        check_len(m, b.len(), "input vector")?;
        check_len(m, c.len(), "output vector")?;
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        if flat.iter().chain(&b).chain(&c).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite state-space entry".into()));
        }
        Ok(Self {
            order: m,
            a: flat,
            b,
            c,
        })
    }

    /// `A = −λ, B = γλ, C = 1`, i.e. `γλ/(s+λ)`.
    pub fn low_pass(gamma: f64, lambda: f64) -> Self {
        Self::new(vec![vec![-lambda]], vec![gamma * lambda], vec![1.0]).expect("valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.order + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.order, self.order, &self.a)
    }

    /// `ẋ = A x + B u` written into `out`.
    pub(crate) fn derivative_into(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let m = self.order;
        for i in 0..m {
            let row = &self.a[i * m..(i + 1) * m];
            out[i] = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * u;
        }
    }

    /// `C x`.
    pub fn output(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `(−A)⁻¹ B`, the equilibrium state for a unit constant input.
    pub fn unit_equilibrium(&self) -> Result<Vec<f64>> {
        if self.order == 0 {
            return Ok(Vec::new());
        }
        let neg_a = -self.a_matrix();
        let b = DVector::from_column_slice(&self.b);
        neg_a
            .lu()
            .solve(&b)
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::Singular("state matrix A is singular".into()))
    }

    /// All eigenvalues of `A` strictly in the open left half-plane.
    pub fn is_asymptotically_stable(&self) -> bool {
        if self.order == 0 {
            return true;
        }
        self.a_matrix()
            .complex_eigenvalues()
            .iter()
            .all(|l| l.re < 0.0)
    }

    /// Rational form, available for `m ≤ 2`.
    pub fn to_rational(&self) -> Result<RationalTf> {
        match self.order {
            0 => RationalTf::new(vec![0.0], vec![1.0]),
            1 => RationalTf::new(vec![self.c[0] * self.b[0]], vec![1.0, -self.a[0]]),
            2 => {
                let (a11, a12, a21, a22) = (self.a[0], self.a[1], self.a[2], self.a[3]);
                let (b1, b2) = (self.b[0], self.b[1]);
                let (c1, c2) = (self.c[0], self.c[1]);
                let s1 = c1 * b1 + c2 * b2;
                let s0 = -a22 * c1 * b1 + a12 * c1 * b2 + a21 * c2 * b1 - a11 * c2 * b2;
                RationalTf::new(vec![s1, s0], vec![1.0, -(a11 + a22), a11 * a22 - a12 * a21])
            }
            m => Err(Error::Domain(format!(
                "rational conversion is only provided for order ≤ 2, got {m}"
            ))),
        }
    }
}

/// `C(−A)⁻¹B`.
pub fn dc_gain(h: &StateSpaceSiso) -> Result<f64> {
    Ok(h.output(&h.unit_equilibrium()?))
}

/// `A x_h + B u` for a single channel.
pub fn ss_derivative(h: &StateSpaceSiso, x_h: &[f64], u: f64) -> Result<Vec<f64>> {
    check_len(h.order(), x_h.len(), "predictor state")?;
    let mut out = vec![0.0; h.order()];
    h.derivative_into(x_h, u, &mut out);
    Ok(out)
}
