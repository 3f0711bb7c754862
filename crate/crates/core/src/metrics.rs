//! Regret, reward gaps between learning rules, and storage-function checks.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsModel, DynamicsState, Rule};
use crate::error::{check_len, Error, Result};
use crate::sim::{grid_steps, simulate, PayoffSignal, Trajectory};
use crate::simplex::{dot, jacobian_apply_with, lse_unchecked, softmax_into, SimplexVector};

/// Relative slack for dominance verdicts: `ΔP(t) ≥ −tol·(1 + |cum reward(t)|)`.
pub const GAP_TOLERANCE: f64 = 1e-9;

fn trapezoid(h: f64, values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for v in values {
        if let Some(p) = prev {
            total += 0.5 * h * (p + v);
        }
        prev = Some(v);
    }
    total
}

fn payoffs_on_grid(traj: &Trajectory, signal: &PayoffSignal) -> Result<Vec<Vec<f64>>> {
    let n = traj.strategies.first().map_or(0, Vec::len);
    check_len(n, signal.dim(), "payoff signal")?;
    Ok(traj.times.iter().map(|&t| signal.eval(t)).collect())
}

/// `∫₀ᵀ p(t)ᵀ(x̄ − x(t)) dt` on the trajectory grid.
pub fn regret_vs_fixed(traj: &Trajectory, signal: &PayoffSignal, fixed: &SimplexVector) -> Result<f64> {
    let payoffs = payoffs_on_grid(traj, signal)?;
    check_len(signal.dim(), fixed.len(), "fixed strategy")?;
    let xbar = fixed.as_slice();
    Ok(trapezoid(
        traj.step,
        payoffs
            .iter()
            .zip(&traj.strategies)
            .map(|(p, x)| p.iter().zip(xbar.iter().zip(x)).map(|(pi, (a, b))| pi * (a - b)).sum()),
    ))
}

fn vertex_regrets(traj: &Trajectory, signal: &PayoffSignal) -> Result<Vec<f64>> {
    (0..signal.dim())
        .map(|i| regret_vs_fixed(traj, signal, &SimplexVector::vertex(signal.dim(), i)))
        .collect()
}

/// Supremum of the regret over all fixed strategies, attained at a vertex.
pub fn best_fixed_regret(traj: &Trajectory, signal: &PayoffSignal) -> Result<f64> {
    Ok(vertex_regrets(traj, signal)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub horizon: f64,
    pub cumulative_reward: f64,
    pub average_reward: f64,
    pub vertex_regrets: Vec<f64>,
    pub best_fixed_regret: f64,
}

pub fn reward_report(traj: &Trajectory, signal: &PayoffSignal) -> Result<RewardReport> {
    let vertex_regrets = vertex_regrets(traj, signal)?;
    let best = vertex_regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RewardReport {
        horizon: traj.horizon(),
        cumulative_reward: traj.final_cumulative(),
        average_reward: traj.final_average(),
        vertex_regrets,
        best_fixed_regret: best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceVerdict {
    /// The first trajectory collected at least as much reward at every grid time.
    Uniform,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub times: Vec<f64>,
    /// `cum_a(t) − cum_b(t)`
    pub gap: Vec<f64>,
    pub min_gap: f64,
    pub argmin_time: f64,
    /// `min_t ΔP(t) / (1 + max(|cum_a(t)|, |cum_b(t)|))`
    pub min_scaled_gap: f64,
    pub tolerance: f64,
    pub verdict: DominanceVerdict,
}

/// Cumulative reward gap of `a` over `b` with the default tolerance.
pub fn reward_gap(a: &Trajectory, b: &Trajectory, signal: &PayoffSignal) -> Result<GapReport> {
    reward_gap_with_tolerance(a, b, signal, GAP_TOLERANCE)
}

pub fn reward_gap_with_tolerance(
    a: &Trajectory,
    b: &Trajectory,
    signal: &PayoffSignal,
    tolerance: f64,
) -> Result<GapReport> {
    let same_grid = a.len() == b.len()
        && a.step == b.step
        && a.times.iter().zip(&b.times).all(|(s, t)| s == t);
    if !same_grid {
        return Err(Error::Configuration(format!(
            "trajectories are on different grids ({} points at h = {} vs {} points at h = {})",
            a.len(),
            a.step,
            b.len(),
            b.step
        )));
    }
    if let Some(x) = a.strategies.first() {
        check_len(signal.dim(), x.len(), "trajectory strategy")?;
    }
    let gap: Vec<f64> = a.cumulative.iter().zip(&b.cumulative).map(|(x, y)| x - y).collect();
    let mut min_gap = f64::INFINITY;
    let mut argmin_time = 0.0;
    let mut min_scaled_gap = f64::INFINITY;
    for (k, &g) in gap.iter().enumerate() {
        if g < min_gap {
            min_gap = g;
            argmin_time = a.times[k];
        }
        let scale = 1.0 + a.cumulative[k].abs().max(b.cumulative[k].abs());
        min_scaled_gap = min_scaled_gap.min(g / scale);
    }
    let verdict = if min_scaled_gap >= -tolerance {
        DominanceVerdict::Uniform
    } else {
        DominanceVerdict::Violated
    };
    Ok(GapReport {
        times: a.times.clone(),
        gap,
        min_gap,
        argmin_time,
        min_scaled_gap,
        tolerance,
        verdict,
    })
}

/// Storage `(1/(1+s)²)·KL(σ(ξ) ‖ uniform)` written as `ln n + ξᵀσ(ξ) − lse(ξ)`.
fn exrd_storage(xi: &[f64], sig: &[f64], s: f64) -> f64 {
    let n = xi.len() as f64;
    let kl = n.ln() + dot(xi, sig) - lse_unchecked(xi);
    kl.max(0.0) / ((1.0 + s) * (1.0 + s))
}

/// Supply rate `pᵀy` with `y = (1/(1+s))∇σ(ξ)ξ`, `ξ = (1+s)z`.
fn exrd_supply(z: &[f64], p: &[f64], s: f64, xi: &mut [f64], sig: &mut [f64]) -> f64 {
    for (x, v) in xi.iter_mut().zip(z) {
        *x = (1.0 + s) * v;
    }
    softmax_into(xi, sig);
    dot(p, &jacobian_apply_with(sig, xi)) / (1.0 + s)
}

/// Largest value over the grid of `V(ξ(t)) − V(ξ(0)) − ∫₀ᵗ pᵀy dτ` for the
/// forgetting rule (unit rate) started from zero scores. Nonpositive in exact
/// arithmetic; the supply integral is carried as an extra RK4 state so the
/// residual reflects integrator error only at fourth order.
pub fn dissipation_residual_exrd(signal: &PayoffSignal, t_end: f64, h: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("interpolation parameter must lie in [0, 1], got {s}")));
    }
    if !(t_end > 0.0 && h > 0.0 && h <= t_end && t_end.is_finite()) {
        return Err(Error::Domain(format!("need 0 < h <= T, got h = {h}, T = {t_end}")));
    }
    signal.validate()?;
    let n = signal.dim();
    let mut z = vec![0.0; n];
    let mut supply = 0.0;
    let (mut xi, mut sig) = (vec![0.0; n], vec![0.0; n]);
    let mut p = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let (mut k, mut kz) = ([0.0; 4], vec![vec![0.0; n]; 4]);

    let storage_at = |z: &[f64], xi: &mut [f64], sig: &mut [f64]| {
        for (x, v) in xi.iter_mut().zip(z) {
            *x = (1.0 + s) * v;
        }
        softmax_into(xi, sig);
        exrd_storage(xi, sig, s)
    };
    let v0 = storage_at(&z, &mut xi, &mut sig);
    let mut worst: f64 = 0.0;

    for step in 1..=grid_steps(t_end, h) {
        let t = (step - 1) as f64 * h;
        for (j, (dt, scale)) in [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            signal.eval_into(t + dt * h, &mut p);
            for i in 0..n {
                stage[i] = if j == 0 { z[i] } else { z[i] + scale * h * kz[j - 1][i] };
            }
            for i in 0..n {
                kz[j][i] = p[i] - stage[i];
            }
            k[j] = exrd_supply(&stage, &p, s, &mut xi, &mut sig);
        }
        for i in 0..n {
            z[i] += h / 6.0 * (kz[0][i] + 2.0 * kz[1][i] + 2.0 * kz[2][i] + kz[3][i]);
        }
        supply += h / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
        if !(supply.is_finite() && z.iter().all(|v| v.is_finite())) {
            return Err(Error::Divergence { step, time: step as f64 * h });
        }
        let residual = storage_at(&z, &mut xi, &mut sig) - v0 - supply;
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Test input applied along a tangent direction of the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Perturbation {
    Step,
    Sine { omega: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub max_abs_error: f64,
    pub max_linear_norm: f64,
    /// `max_t ‖Δy − Δy_lin‖ / max_t ‖Δy_lin‖`
    pub relative_error: f64,
}

/// Compares the strategy difference between the low-pass predictive rule and
/// plain replicator dynamics, driven by `1ₙ + amplitude·d(t)·direction`, with
/// the response `(γλ/n)/(s+λ)` of the reduced linear model. The predictor
/// starts on its nominal value `γ·1ₙ`; `direction` is projected onto the
/// tangent space and normalized.
#[allow(clippy::too_many_arguments)]
pub fn local_linearization_error(
    direction: &[f64],
    gamma: f64,
    lambda: f64,
    amplitude: f64,
    perturbation: Perturbation,
    t_end: f64,
    h: f64,
) -> Result<LinearizationReport> {
    let n = direction.len();
    if n < 2 {
        return Err(Error::Domain("need at least two actions".into()));
    }
    let mean = direction.iter().sum::<f64>() / n as f64;
    let mut d: Vec<f64> = direction.iter().map(|v| v - mean).collect();
    let norm = dot(&d, &d).sqrt();
    if norm < 1e-12 {
        return Err(Error::Domain("perturbation direction is parallel to the ones vector".into()));
    }
    d.iter_mut().for_each(|v| *v /= norm);

    let terms = match perturbation {
        Perturbation::Step => Vec::new(),
        Perturbation::Sine { omega } => {
            vec![crate::sim::SinusoidTerm::sin(d.iter().map(|v| amplitude * v).collect(), omega)]
        }
    };
    let offset: Vec<f64> = match perturbation {
        Perturbation::Step => d.iter().map(|v| 1.0 + amplitude * v).collect(),
        Perturbation::Sine { .. } => vec![1.0; n],
    };
    let signal = PayoffSignal::analytic(offset, terms)?;

    let rule = Rule::predictive_low_pass(gamma, lambda);
    let mut init = vec![0.0; 2 * n];
    init[n..].iter_mut().for_each(|v| *v = gamma);
    let predictive = DynamicsModel::new(rule, n)?.with_initial_state(DynamicsState(init))?;
    let plain = DynamicsModel::new(Rule::Rd, n)?;
    let a = simulate(&predictive, &signal, t_end, h)?;
    let b = simulate(&plain, &signal, t_end, h)?;

    let linear_m = |t: f64| -> f64 {
        match perturbation {
            Perturbation::Step => gamma * amplitude * (1.0 - (-lambda * t).exp()),
            Perturbation::Sine { omega } => {
                gamma * lambda * amplitude
                    * (lambda * (omega * t).sin() - omega * (omega * t).cos() + omega * (-lambda * t).exp())
                    / (lambda * lambda + omega * omega)
            }
        }
    };

    let mut max_abs_error: f64 = 0.0;
    let mut max_linear_norm: f64 = 0.0;
    for k in 0..a.len() {
        let scale = linear_m(a.times[k]) / n as f64;
        let mut err2 = 0.0;
        for i in 0..n {
            let y = a.strategies[k][i] - b.strategies[k][i];
            let e = y - scale * d[i];
            err2 += e * e;
        }
        max_abs_error = max_abs_error.max(err2.sqrt());
        max_linear_norm = max_linear_norm.max(scale.abs());
    }
    Ok(LinearizationReport {
        max_abs_error,
        max_linear_norm,
        relative_error: max_abs_error / max_linear_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SinusoidTerm;
    use approx::assert_abs_diff_eq;

    fn rd(n: usize) -> DynamicsModel {
        DynamicsModel::new(Rule::Rd, n).unwrap()
    }

    #[test]
    fn rd_regret_against_first_vertex() {
        let signal = PayoffSignal::constant(vec![1.0, 0.0]).unwrap();
        let traj = simulate(&rd(2), &signal, 1.0, 1e-3).unwrap();
        let r = regret_vs_fixed(&traj, &signal, &SimplexVector::vertex(2, 0)).unwrap();
        let expected = 1.0 - ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert_abs_diff_eq!(expected, 0.379885, epsilon = 1e-6);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-5);
        assert_abs_diff_eq!(best_fixed_regret(&traj, &signal).unwrap(), r, epsilon = 1e-15);
    }

    #[test]
    fn rd_regret_bounded_by_initial_entropy() {
        let signal = PayoffSignal::constant(vec![1.0, 0.0]).unwrap();
        let mut last = 0.0;
        for t_end in [5.0, 20.0, 60.0] {
            let traj = simulate(&rd(2), &signal, t_end, 1e-2).unwrap();
            let r = best_fixed_regret(&traj, &signal).unwrap();
            let closed = t_end - ((1.0 + f64::exp(t_end)) / 2.0).ln();
            assert_abs_diff_eq!(r, closed, epsilon = 1e-5);
            assert!(r <= std::f64::consts::LN_2 + 1e-5);
            assert!(r >= last);
            last = r;
        }
        assert_abs_diff_eq!(last, std::f64::consts::LN_2, epsilon = 1e-5);
    }

    #[test]
    fn common_payoff_has_no_regret() {
        let signal = PayoffSignal::analytic(vec![0.2; 3], vec![SinusoidTerm::sin(vec![1.5; 3], 0.7)]).unwrap();
        let traj = simulate(&rd(3), &signal, 10.0, 1e-2).unwrap();
        assert_abs_diff_eq!(best_fixed_regret(&traj, &signal).unwrap(), 0.0, epsilon = 1e-12);
        let x = SimplexVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_abs_diff_eq!(regret_vs_fixed(&traj, &signal, &x).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn regret_against_own_constant_strategy_is_zero() {
        let signal = PayoffSignal::analytic(vec![0.0, 0.0], vec![SinusoidTerm::cos(vec![1.0, -2.0], 1.0)]).unwrap();
        let model = DynamicsModel::new(Rule::Bnn, 2).unwrap();
        let mut traj = simulate(&model, &signal, 3.0, 1e-2).unwrap();
        let x = SimplexVector::new(vec![0.3, 0.7]).unwrap();
        traj.strategies.iter_mut().for_each(|s| *s = x.as_slice().to_vec());
        assert_eq!(regret_vs_fixed(&traj, &signal, &x).unwrap(), 0.0);
    }

    #[test]
    fn forgetting_rule_regret_is_unbounded() {
        let model = DynamicsModel::new(Rule::exrd(), 2).unwrap();
        let constant = PayoffSignal::constant(vec![1.0, 0.0]).unwrap();
        let alternating = PayoffSignal::analytic(vec![0.0, 0.0], vec![SinusoidTerm::sin(vec![1.0, -1.0], 1.0)]).unwrap();
        let regret = |signal: &PayoffSignal, t: f64| {
            best_fixed_regret(&simulate(&model, signal, t, 1e-2).unwrap(), signal).unwrap()
        };
        // Persistent lag behind a constant payoff loses a fixed fraction of reward.
        let r: Vec<f64> = [50.0, 100.0, 200.0].into_iter().map(|t| regret(&constant, t)).collect();
        assert!(r[0] > 10.0 && r[1] > r[0] + 10.0 && r[2] > r[1] + 20.0, "{r:?}");
        // Under the alternating sine the lagged strategy wins on average, so
        // the regret is unbounded below rather than above.
        let r: Vec<f64> = [50.0, 100.0, 200.0].into_iter().map(|t| regret(&alternating, t)).collect();
        assert!(r[0] < -5.0 && r[1] < r[0] - 5.0 && r[2] < r[1] - 10.0, "{r:?}");
    }

    #[test]
    fn vertex_regret_matches_dense_grid_supremum() {
        let signal = PayoffSignal::analytic(
            vec![0.1, -0.2, 0.3],
            vec![SinusoidTerm::sin(vec![1.0, 0.5, -1.2], 1.3), SinusoidTerm::cos(vec![0.4, -0.8, 0.2], 0.4)],
        )
        .unwrap();
        let traj = simulate(&DynamicsModel::new(Rule::Smith, 3).unwrap(), &signal, 15.0, 1e-2).unwrap();
        let best = best_fixed_regret(&traj, &signal).unwrap();
        let steps = 50;
        let mut sup = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let x = SimplexVector::new(vec![
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ])
                .unwrap();
                sup = sup.max(regret_vs_fixed(&traj, &signal, &x).unwrap());
            }
        }
        assert_abs_diff_eq!(sup, best, epsilon = 1e-9);
        let report = reward_report(&traj, &signal).unwrap();
        assert!(report.vertex_regrets.iter().all(|r| *r <= report.best_fixed_regret));
    }

    #[test]
    fn identical_models_have_zero_gap() {
        let signal = PayoffSignal::analytic(vec![0.0; 2], vec![SinusoidTerm::sin(vec![1.0, 0.5], 2.0)]).unwrap();
        let traj = simulate(&rd(2), &signal, 5.0, 1e-2).unwrap();
        let report = reward_gap(&traj, &traj, &signal).unwrap();
        assert!(report.gap.iter().all(|g| *g == 0.0));
        assert_eq!(report.verdict, DominanceVerdict::Uniform);
    }

    #[test]
    fn gap_rejects_mismatched_grids() {
        let signal = PayoffSignal::constant(vec![1.0, 0.0]).unwrap();
        let a = simulate(&rd(2), &signal, 1.0, 1e-2).unwrap();
        let b = simulate(&rd(2), &signal, 1.0, 2e-2).unwrap();
        assert!(reward_gap(&a, &b, &signal).is_err());
    }

    #[test]
    fn constant_payoff_anticipatory_gap() {
        let model = DynamicsModel::new(Rule::anticipatory(), 2).unwrap();
        let strict = PayoffSignal::constant(vec![1.0, 0.0]).unwrap();
        let a = simulate(&model, &strict, 10.0, 1e-2).unwrap();
        let b = simulate(&rd(2), &strict, 10.0, 1e-2).unwrap();
        let report = reward_gap(&a, &b, &strict).unwrap();
        assert_eq!(report.verdict, DominanceVerdict::Uniform);
        assert!(report.gap[1..].iter().all(|g| *g > 0.0));

        let common = PayoffSignal::constant(vec![0.7, 0.7]).unwrap();
        let a = simulate(&model, &common, 10.0, 1e-2).unwrap();
        let b = simulate(&rd(2), &common, 10.0, 1e-2).unwrap();
        let report = reward_gap(&a, &b, &common).unwrap();
        assert!(report.gap.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn dissipation_vanishes_for_common_payoff() {
        let signal = PayoffSignal::analytic(vec![0.5; 3], vec![SinusoidTerm::sin(vec![2.0; 3], 1.0)]).unwrap();
        for s in [0.0, 0.5, 1.0] {
            assert_abs_diff_eq!(dissipation_residual_exrd(&signal, 20.0, 1e-2, s).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn dissipation_inequality_holds() {
        let signal = PayoffSignal::analytic(
            vec![0.0; 3],
            vec![SinusoidTerm::sin(vec![1.2, -0.3, 0.8], 0.9), SinusoidTerm::cos(vec![-1.0, 0.6, 0.1], 2.3)],
        )
        .unwrap();
        let padded = PayoffSignal::analytic(vec![0.0, 0.5], vec![SinusoidTerm::sin(vec![1.0, 0.0], 1.0)]).unwrap();
        assert!(dissipation_residual_exrd(&signal, 50.0, 1e-2, 0.0).unwrap() <= 1e-6);
        assert!(dissipation_residual_exrd(&padded, 50.0, 1e-2, 1.0).unwrap() <= 1e-6);
        assert!(dissipation_residual_exrd(&signal, 1.0, 1e-2, 1.5).is_err());
    }

    #[test]
    fn linearization_small_perturbation() {
        for perturbation in [Perturbation::Step, Perturbation::Sine { omega: 1.0 }] {
            let r = local_linearization_error(&[1.0, -0.5, 0.2], 1.0, 1.0, 0.01, perturbation, 10.0, 1e-2).unwrap();
            assert!(r.relative_error < 0.05, "{perturbation:?}: {r:?}");
        }
        assert!(local_linearization_error(&[1.0, 1.0], 1.0, 1.0, 0.01, Perturbation::Step, 1.0, 1e-2).is_err());
    }
}
