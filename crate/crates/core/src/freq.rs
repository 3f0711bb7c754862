//! Periodic steady-state analysis of `σ ∘ g(s)` under a single-frequency payoff.
//!
//! With `p(t) = p̄ sin ωt + q̄ cos ωt` and a filter of gain `a` and phase lag
//! `φ` at `ω`, the long-run average reward is `J(φ, a) = T₁(a) cos φ`, where
//! `T₁(a) = ⟨vᵀσ(a v)⟩` over one period of `v(τ) = p̄ sin τ + q̄ cos τ`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lti::{to_frequency_point, FrequencyPoint, RationalTf};
use crate::sim::{PayoffSignal, SinusoidTerm};
use crate::simplex::{dot, in_ones_span, jacobian_quadratic_with, softmax_into};

pub const DEFAULT_QUADRATURE_POINTS: usize = 1024;
pub const MIN_QUADRATURE_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidEnv {
    pub p_bar: Vec<f64>,
    pub q_bar: Vec<f64>,
    pub omega: f64,
}

impl SinusoidEnv {
    pub fn new(p_bar: Vec<f64>, q_bar: Vec<f64>, omega: f64) -> Result<Self> {
        let env = Self { p_bar, q_bar, omega };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.p_bar.len(), self.q_bar.len(), "sinusoid amplitudes")?;
        if self.p_bar.is_empty() {
            return Err(Error::Configuration("sinusoid amplitudes are empty".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Domain(format!("frequency must be positive, got {}", self.omega)));
        }
        if self.p_bar.iter().chain(&self.q_bar).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sinusoid amplitude".into()));
        }
        if self.p_bar.iter().chain(&self.q_bar).all(|v| *v == 0.0) {
            return Err(Error::Domain("both sinusoid amplitudes are zero".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.p_bar.len()
    }

    /// True when both amplitudes are multiples of the ones vector, so every
    /// strategy earns the same reward.
    pub fn is_common(&self) -> bool {
        in_ones_span(&self.p_bar) && in_ones_span(&self.q_bar)
    }

    pub fn payoff(&self, t: f64) -> Vec<f64> {
        let (s, c) = (self.omega * t).sin_cos();
        self.p_bar.iter().zip(&self.q_bar).map(|(p, q)| p * s + q * c).collect()
    }

    pub fn to_signal(&self) -> PayoffSignal {
        PayoffSignal::Analytic {
            offset: vec![0.0; self.dim()],
            terms: vec![
                SinusoidTerm::sin(self.p_bar.clone(), self.omega),
                SinusoidTerm::cos(self.q_bar.clone(), self.omega),
            ],
        }
    }
}

/// `z(t) = a p̄ sin(ωt − φ) + a q̄ cos(ωt − φ)`, the zero-constant periodic
/// response of `g(s)Iₙ` with `|g(jω)| = a`, `−arg g(jω) = φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateScore {
    env: SinusoidEnv,
    gain: f64,
    phase_lag: f64,
}

impl SteadyStateScore {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (s, c) = (self.env.omega * t - self.phase_lag).sin_cos();
        self.env
            .p_bar
            .iter()
            .zip(&self.env.q_bar)
            .map(|(p, q)| self.gain * (p * s + q * c))
            .collect()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn phase_lag(&self) -> f64 {
        self.phase_lag
    }
}

pub fn steady_state_score(env: &SinusoidEnv, point: &FrequencyPoint) -> Result<SteadyStateScore> {
    env.validate()?;
    check_gain(point.gain)?;
    if !point.phase_lag.is_finite() {
        return Err(Error::Domain("non-finite phase lag".into()));
    }
    Ok(SteadyStateScore {
        env: env.clone(),
        gain: point.gain,
        phase_lag: point.phase_lag,
    })
}

fn check_gain(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gain must be positive, got {a}")))
    }
}

fn check_points(n: usize) -> Result<()> {
    if n >= MIN_QUADRATURE_POINTS {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "need at least {MIN_QUADRATURE_POINTS} quadrature points, got {n}"
        )))
    }
}

/// Mean over one period of `f(τ, v(τ), w(τ), σ(a v(τ)))` by the uniform
/// trapezoid rule, with `w = v′`.
fn period_mean<F>(env: &SinusoidEnv, a: f64, points: usize, mut f: F) -> f64
where
    F: FnMut(&[f64], &[f64], &[f64]) -> f64,
{
    let n = env.dim();
    let (mut v, mut w, mut z, mut sig) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut total = 0.0;
    for k in 0..points {
        let (s, c) = (2.0 * PI * k as f64 / points as f64).sin_cos();
        for i in 0..n {
            v[i] = env.p_bar[i] * s + env.q_bar[i] * c;
            w[i] = env.p_bar[i] * c - env.q_bar[i] * s;
            z[i] = a * v[i];
        }
        softmax_into(&z, &mut sig);
        total += f(&v, &w, &sig);
    }
    total / points as f64
}

/// Long-run average reward `⟨p(t)ᵀσ(z(t))⟩` of the steady state with gain `a`
/// and phase lag `phi`, evaluated directly in the payoff's own time variable.
pub fn avg_reward_j(env: &SinusoidEnv, phi: f64, a: f64, points: usize) -> Result<f64> {
    env.validate()?;
    check_gain(a)?;
    check_points(points)?;
    if !phi.is_finite() {
        return Err(Error::Domain("non-finite phase".into()));
    }
    let n = env.dim();
    let (mut p, mut z, mut sig) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut total = 0.0;
    for k in 0..points {
        let u = 2.0 * PI * k as f64 / points as f64;
        let (s, c) = u.sin_cos();
        let (sl, cl) = (u - phi).sin_cos();
        for i in 0..n {
            p[i] = env.p_bar[i] * s + env.q_bar[i] * c;
            z[i] = a * (env.p_bar[i] * sl + env.q_bar[i] * cl);
        }
        softmax_into(&z, &mut sig);
        total += dot(&p, &sig);
    }
    Ok(total / points as f64)
}

/// `T₁(a) = ⟨vᵀσ(a v)⟩`.
pub fn t1_integral(env: &SinusoidEnv, a: f64, points: usize) -> Result<f64> {
    env.validate()?;
    check_gain(a)?;
    check_points(points)?;
    Ok(period_mean(env, a, points, |v, _, sig| dot(v, sig)))
}

/// `T₂(a) = ⟨wᵀσ(a v)⟩`; the integrand is `(1/a)·d/dτ lse(a v)`, so it vanishes.
pub fn t2_integral(env: &SinusoidEnv, a: f64, points: usize) -> Result<f64> {
    env.validate()?;
    check_gain(a)?;
    check_points(points)?;
    Ok(period_mean(env, a, points, |_, w, sig| dot(w, sig)))
}

/// `I₁(a) = ⟨vᵀ∇σ(a v)v⟩ = dT₁/da ≥ 0`.
pub fn i1_integral(env: &SinusoidEnv, a: f64, points: usize) -> Result<f64> {
    env.validate()?;
    check_gain(a)?;
    check_points(points)?;
    Ok(period_mean(env, a, points, |v, _, sig| jacobian_quadratic_with(sig, v)))
}

/// `I₂(a) = ⟨v′ᵀ∇σ(a v)v⟩`, which vanishes.
pub fn i2_integral(env: &SinusoidEnv, a: f64, points: usize) -> Result<f64> {
    env.validate()?;
    check_gain(a)?;
    check_points(points)?;
    Ok(period_mean(env, a, points, |v, w, sig| {
        let sv = dot(sig, v);
        sig.iter().zip(v).zip(w).map(|((s, vi), wi)| wi * s * (vi - sv)).sum()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub phis: Vec<f64>,
    pub gains: Vec<f64>,
    /// `j[i][k] = J(phis[i], gains[k])`
    pub j: Vec<Vec<f64>>,
    pub t1: Vec<f64>,
    /// `max |J(φ, a) − T₁(a) cos φ|`
    pub factorization_residual: f64,
}

pub fn sweep_phi_a(env: &SinusoidEnv, phis: &[f64], gains: &[f64], points: usize) -> Result<SweepResult> {
    env.validate()?;
    check_points(points)?;
    if phis.is_empty() || gains.is_empty() {
        return Err(Error::Configuration("sweep grids must be nonempty".into()));
    }
    if let Some(phi) = phis.iter().find(|p| !(p.abs() <= FRAC_PI_2 + 1e-12)) {
        return Err(Error::Domain(format!("phase {phi} outside [-pi/2, pi/2]")));
    }
    let t1 = gains
        .par_iter()
        .map(|&a| t1_integral(env, a, points))
        .collect::<Result<Vec<_>>>()?;
    let j = phis
        .par_iter()
        .map(|&phi| {
            gains
                .iter()
                .map(|&a| avg_reward_j(env, phi, a, points))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let factorization_residual = phis
        .iter()
        .zip(&j)
        .flat_map(|(phi, row)| row.iter().zip(&t1).map(move |(v, t)| (v - t * phi.cos()).abs()))
        .fold(0.0, f64::max);
    Ok(SweepResult {
        phis: phis.to_vec(),
        gains: gains.to_vec(),
        j,
        t1,
        factorization_residual,
    })
}

/// Ordering of two filters' average rewards implied by their frequency response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// Identical gain and phase lag.
    Equal,
    /// Equal gains: the smaller phase lag earns at least as much.
    FirstBySmallerLag,
    SecondBySmallerLag,
    /// Equal phase lags with `cos φ ≥ 0`: the larger gain earns at least as much.
    FirstByLargerGain,
    SecondByLargerGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqComparison {
    pub first: FrequencyPoint,
    pub second: FrequencyPoint,
    pub j_first: f64,
    pub j_second: f64,
    /// `None` when neither gains nor phase lags coincide.
    pub prediction: Option<Prediction>,
}

impl FreqComparison {
    /// Whether the quadrature values respect the predicted ordering, allowing
    /// `slack` for quadrature error. Vacuously true without a prediction.
    pub fn prediction_holds(&self, slack: f64) -> bool {
        let (a, b) = (self.j_first, self.j_second);
        match self.prediction {
            None => true,
            Some(Prediction::Equal) => (a - b).abs() <= slack,
            Some(Prediction::FirstBySmallerLag | Prediction::FirstByLargerGain) => a >= b - slack,
            Some(Prediction::SecondBySmallerLag | Prediction::SecondByLargerGain) => b >= a - slack,
        }
    }
}

const MATCH_TOL: f64 = 1e-9;

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= MATCH_TOL * (1.0 + x.abs().max(y.abs()))
}

fn predict(first: &FrequencyPoint, second: &FrequencyPoint) -> Option<Prediction> {
    let same_gain = close(first.gain, second.gain);
    let same_lag = close(first.phase_lag, second.phase_lag);
    match (same_gain, same_lag) {
        (true, true) => Some(Prediction::Equal),
        (true, false) => Some(if first.phase_lag.abs() <= second.phase_lag.abs() {
            Prediction::FirstBySmallerLag
        } else {
            Prediction::SecondBySmallerLag
        }),
        (false, true) if first.phase_lag.cos() >= 0.0 => Some(if first.gain > second.gain {
            Prediction::FirstByLargerGain
        } else {
            Prediction::SecondByLargerGain
        }),
        _ => None,
    }
}

pub fn compare_models_freq(
    first: &RationalTf,
    second: &RationalTf,
    env: &SinusoidEnv,
    points: usize,
) -> Result<FreqComparison> {
    env.validate()?;
    let p1 = to_frequency_point(first, env.omega)?;
    let p2 = to_frequency_point(second, env.omega)?;
    Ok(FreqComparison {
        j_first: avg_reward_j(env, p1.phase_lag, p1.gain, points)?,
        j_second: avg_reward_j(env, p2.phase_lag, p2.gain, points)?,
        prediction: predict(&p1, &p2),
        first: p1,
        second: p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::log_grid;
    use approx::assert_abs_diff_eq;

    fn fig_env() -> SinusoidEnv {
        SinusoidEnv::new(vec![1.0, -0.4, 0.6], vec![0.5, 0.1, -0.6], 1.0).unwrap()
    }

    fn tf(num: &[f64], den: &[f64]) -> RationalTf {
        RationalTf::new(num.to_vec(), den.to_vec()).unwrap()
    }

    #[test]
    fn env_validation() {
        assert!(SinusoidEnv::new(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(SinusoidEnv::new(vec![1.0], vec![0.0, 0.0], 1.0).is_err());
        assert!(SinusoidEnv::new(vec![1.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let env = fig_env();
        let identity = FrequencyPoint { omega: 1.0, gain: 1.0, phase_lag: 0.0 };
        let z = steady_state_score(&env, &identity).unwrap();
        for t in [0.0, 0.3, 2.0] {
            for (a, b) in z.eval(t).iter().zip(env.payoff(t)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
            }
        }
        // integrator at ω = 2: z = ∫p = −p̄ cos(2t)/2 + q̄ sin(2t)/2
        let env2 = SinusoidEnv::new(env.p_bar.clone(), env.q_bar.clone(), 2.0).unwrap();
        let point = to_frequency_point(&RationalTf::integrator(), 2.0).unwrap();
        let z = steady_state_score(&env2, &point).unwrap();
        for t in [0.0f64, 0.7, 1.9] {
            let (s, c) = (2.0 * t).sin_cos();
            for (i, v) in z.eval(t).iter().enumerate() {
                assert_abs_diff_eq!(*v, -env.p_bar[i] * c / 2.0 + env.q_bar[i] * s / 2.0, epsilon = 1e-14);
            }
        }
        let bad = FrequencyPoint { omega: 1.0, gain: 0.0, phase_lag: 0.0 };
        assert!(matches!(steady_state_score(&env, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn quarter_period_lag_earns_nothing() {
        let env = fig_env();
        for a in [0.05, 1.0, 7.0] {
            assert_abs_diff_eq!(avg_reward_j(&env, FRAC_PI_2, a, 1024).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn common_payoff_earns_nothing() {
        let env = SinusoidEnv::new(vec![1.0; 3], vec![-0.5; 3], 1.0).unwrap();
        assert!(env.is_common());
        assert_abs_diff_eq!(avg_reward_j(&env, 0.3, 2.0, 512).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t1_integral(&env, 2.0, 512).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn two_action_reference_value() {
        // (1/2π)∫ sin τ · tanh(sin τ) dτ, adaptive-quadrature reference
        let env = SinusoidEnv::new(vec![1.0, -1.0], vec![0.0, 0.0], 1.0).unwrap();
        let j = avg_reward_j(&env, 0.0, 1.0, 1 << 16).unwrap();
        assert_abs_diff_eq!(j, 0.405_837_842_565_779_5, epsilon = 1e-13);
        assert_abs_diff_eq!(avg_reward_j(&env, 0.0, 1.0, 1024).unwrap(), j, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_converges() {
        let env = fig_env();
        for n in [512, 1024, 4096] {
            for a in [0.1, 1.0, 10.0] {
                let lo = avg_reward_j(&env, 0.4, a, n).unwrap();
                let hi = avg_reward_j(&env, 0.4, a, 2 * n).unwrap();
                assert!((lo - hi).abs() < 1e-10, "n = {n}, a = {a}");
            }
        }
    }

    #[test]
    fn decomposition_integrals() {
        let env = fig_env();
        for a in [0.1, 1.0, 10.0] {
            assert!(t2_integral(&env, a, 1024).unwrap().abs() < 1e-10);
            assert!(i2_integral(&env, a, 1024).unwrap().abs() < 1e-10);
            assert!(i1_integral(&env, a, 1024).unwrap() >= 0.0);
        }
        let t1 = t1_integral(&env, 1.0, 1024).unwrap();
        assert!(t1 > 0.0);
        assert_abs_diff_eq!(avg_reward_j(&env, 0.0, 1.0, 1024).unwrap(), t1, epsilon = 1e-14);
        let no_sine = SinusoidEnv::new(vec![0.0; 3], vec![0.5, 0.1, -0.6], 1.0).unwrap();
        assert!(t2_integral(&no_sine, 3.0, 1024).unwrap().abs() < 1e-10);
        assert!(t1_integral(&env, 1.0, 32).is_err());
        assert!(t1_integral(&env, -1.0, 1024).is_err());
    }

    #[test]
    fn i1_matches_slope_of_t1() {
        let env = fig_env();
        for a in [0.2, 1.0, 4.0] {
            let d = 1e-5;
            let fd = (t1_integral(&env, a + d, 1024).unwrap() - t1_integral(&env, a - d, 1024).unwrap()) / (2.0 * d);
            assert_abs_diff_eq!(fd, i1_integral(&env, a, 1024).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn sweep_on_reference_env() {
        let env = fig_env();
        let phis: Vec<f64> = (0..=12).map(|k| -FRAC_PI_2 + PI * k as f64 / 12.0).collect();
        let gains = log_grid(0.1, 10.0, 20);
        let sweep = sweep_phi_a(&env, &phis, &gains, 1024).unwrap();
        assert!(sweep.factorization_residual < 1e-8);
        for (i, phi) in phis.iter().enumerate() {
            let mirror = phis.len() - 1 - i;
            for k in 0..gains.len() {
                assert_abs_diff_eq!(sweep.j[i][k], sweep.j[mirror][k], epsilon = 1e-12);
            }
            if phi.cos() > 1e-12 {
                assert!(sweep.j[i].windows(2).all(|w| w[1] >= w[0]), "phi = {phi}");
            }
        }
        assert!(sweep_phi_a(&env, &[2.0], &gains, 1024).is_err());
        assert!(sweep_phi_a(&env, &[], &gains, 1024).is_err());
    }

    #[test]
    fn lag_and_gain_orderings() {
        let env = fig_env();
        let doubled = tf(&[2.0], &[1.0, 1.0]);
        let single = tf(&[1.0], &[1.0, 1.0]);
        for omega in [0.3, 1.0, 3.0] {
            let env = SinusoidEnv::new(env.p_bar.clone(), env.q_bar.clone(), omega).unwrap();
            let c = compare_models_freq(&doubled, &single, &env, 1024).unwrap();
            assert_eq!(c.prediction, Some(Prediction::FirstByLargerGain));
            assert!(c.prediction_holds(0.0));
            assert!(c.j_first >= c.j_second);
        }
        let same = compare_models_freq(&single, &single, &env, 1024).unwrap();
        assert_eq!(same.prediction, Some(Prediction::Equal));
        assert_eq!(same.j_first, same.j_second);

        let oracle = tf(&[1.0, 1.0], &[1.0, 0.0]);
        let c = compare_models_freq(&oracle, &RationalTf::integrator(), &env, 1024).unwrap();
        assert_eq!(c.prediction, None);
        assert!(c.j_second.abs() < 1e-10);
        assert!(c.j_first > c.j_second);

        // unit gain, lag 2·atan(ω): the all-pass delay loses to the identity
        let identity = tf(&[1.0], &[1.0]);
        let all_pass = tf(&[-1.0, 1.0], &[1.0, 1.0]);
        let c = compare_models_freq(&all_pass, &identity, &env, 1024).unwrap();
        assert_eq!(c.prediction, Some(Prediction::SecondBySmallerLag));
        assert_abs_diff_eq!(c.first.phase_lag, FRAC_PI_2, epsilon = 1e-12);
        assert!(c.j_first.abs() < 1e-10 && c.j_second > 0.0);
        assert!(c.prediction_holds(0.0));
    }

    #[test]
    fn pole_is_reported() {
        let env = fig_env();
        let resonant = tf(&[1.0], &[1.0, 0.0, 1.0]);
        assert!(matches!(
            compare_models_freq(&resonant, &RationalTf::integrator(), &env, 1024),
            Err(Error::Pole { .. })
        ));
    }
}
