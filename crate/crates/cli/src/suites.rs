//! Randomized invariant suites with reproducible per-trial seeds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regretlab_core::dynamics::matched_initialization;
use regretlab_core::freq::{avg_reward_j, sweep_phi_a, t2_integral, SinusoidEnv};
use regretlab_core::lti::{log_grid, to_frequency_point};
use regretlab_core::metrics::{
    dissipation_residual_exrd, local_linearization_error, reward_gap_with_tolerance, Perturbation,
};
use regretlab_core::simplex::{lemma1_form, norm2, project_simplex, softmax, softmax_jacobian};
use regretlab_core::{simulate, DynamicsModel, PayoffSignal, RationalTf, Rule, Waveform};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::random::{self, trial_rng, AMPLITUDE_RANGE, OMEGA_RANGE};

/// Relative slack for dominance checks: `ΔP(t) ≥ −tol·(1 + |cum reward(t)|)`.
pub const DOMINANCE_TOLERANCE: f64 = 1e-6;
pub const SUITE_HORIZON: f64 = 20.0;
pub const SUITE_STEP: f64 = 1e-2;
/// Horizon at which the predictive forgetting rule must be strictly ahead.
pub const STRICT_GAP_HORIZON: f64 = 10.0;
pub const FALSIFICATION_ITERATIONS: usize = 500;
const FALSIFICATION_RESTARTS: usize = 5;
pub const LINEARIZATION_AMPLITUDE: f64 = 0.01;
/// Five time constants of the unit-rate predictor.
pub const LINEARIZATION_HORIZON: f64 = 5.0;
pub const LINEARIZATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Lemma1,
    Lemma2,
    JacobianFd,
    ProjectionGrid,
    OracleDominance,
    ExrdDominance,
    AnticipatoryGlobal,
    Frequency,
    LocalLinearization,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::JacobianFd,
        Suite::ProjectionGrid,
        Suite::OracleDominance,
        Suite::ExrdDominance,
        Suite::AnticipatoryGlobal,
        Suite::Frequency,
        Suite::LocalLinearization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::JacobianFd => "jacobian_fd",
            Suite::ProjectionGrid => "projection_grid",
            Suite::OracleDominance => "oracle_dominance",
            Suite::ExrdDominance => "exrd_dominance",
            Suite::AnticipatoryGlobal => "anticipatory_global",
            Suite::Frequency => "frequency",
            Suite::LocalLinearization => "local_linearization",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| CliError::Unknown {
            what: "suite",
            name: s.to_string(),
            expected: Suite::ALL.map(Suite::name).join(", "),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// The worst value must be at least the threshold.
    AtLeast,
    /// The worst value must be strictly below the threshold.
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_least(name: &str, values: impl IntoIterator<Item = f64>, threshold: f64) -> Self {
        let (samples, worst) = values
            .into_iter()
            .fold((0, f64::INFINITY), |(k, w), v| (k + 1, if v.is_nan() { f64::NEG_INFINITY } else { w.min(v) }));
        Check {
            name: name.into(),
            samples,
            worst,
            bound: Bound::AtLeast,
            threshold,
            passed: worst >= threshold,
        }
    }

    fn below(name: &str, values: impl IntoIterator<Item = f64>, threshold: f64) -> Self {
        let (samples, worst) = values
            .into_iter()
            .fold((0, f64::NEG_INFINITY), |(k, w), v| (k + 1, if v.is_nan() { f64::INFINITY } else { w.max(v) }));
        Check {
            name: name.into(),
            samples,
            worst,
            bound: Bound::Below,
            threshold,
            passed: worst < threshold,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::AtLeast => ">=",
            Bound::Below => "<",
        };
        write!(
            f,
            "{} {}: worst {:.6e} {op} {:.1e} over {} samples",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.threshold,
            self.samples
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {} (seed {}, {} trials): {}",
            self.suite,
            self.seed,
            self.trials,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// Runs `f(rng)` for each trial in parallel; results keep trial order.
fn trials<T: Send>(seed: u64, count: usize, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| f(&mut trial_rng(seed, k)))
        .collect()
}

fn scaled_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-3.0..1.5));
    random::vector(rng, n, scale)
}

pub fn property_suite(name: &str, seed: u64, trial_count: usize) -> Result<SuiteReport> {
    let suite: Suite = name.parse()?;
    let checks = match suite {
        Suite::Lemma1 => lemma1(seed, trial_count),
        Suite::Lemma2 => lemma2(seed, trial_count),
        Suite::JacobianFd => jacobian_fd(seed, trial_count),
        Suite::ProjectionGrid => projection_grid(seed, trial_count),
        Suite::OracleDominance => oracle_dominance(seed, trial_count)?,
        Suite::ExrdDominance => exrd_dominance(seed, trial_count)?,
        Suite::AnticipatoryGlobal => anticipatory_global(seed, trial_count, FALSIFICATION_ITERATIONS)?,
        Suite::Frequency => frequency(seed, trial_count)?,
        Suite::LocalLinearization => local_linearization(seed, trial_count)?,
    };
    Ok(SuiteReport {
        suite: suite.name().into(),
        seed,
        trials: trial_count,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn lemma1(seed: u64, count: usize) -> Vec<Check> {
    let values = trials(seed, count, |rng| {
        let n = rng.gen_range(1..=10);
        lemma1_form(&scaled_vector(rng, n)).expect("finite input")
    });
    vec![Check::at_least("v'(softmax(v) - softmax(-v))", values, -1e-12)]
}

fn lemma2(seed: u64, count: usize) -> Vec<Check> {
    let margins = trials(seed, count, |rng| {
        let n = rng.gen_range(1..=10);
        let u = scaled_vector(rng, n);
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-4.0..1.0))).collect();
        let (su, sv) = (softmax(&u).unwrap(), softmax(&v).unwrap());
        let ds: Vec<f64> = su.as_slice().iter().zip(sv.as_slice()).map(|(a, b)| a - b).collect();
        let dv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        0.5 * norm2(&dv) - norm2(&ds)
    });
    vec![Check::at_least("|u - v|/2 - |softmax(u) - softmax(v)|", margins, -1e-15)]
}

fn jacobian_fd(seed: u64, count: usize) -> Vec<Check> {
    let errors = trials(seed, count, |rng| {
        let n = rng.gen_range(2..=8);
        let v = random::vector(rng, n, 5.0);
        let jac = softmax_jacobian(&v).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let (mut plus, mut minus) = (v.clone(), v.clone());
            plus[j] += h;
            minus[j] -= h;
            let (sp, sm) = (softmax(&plus).unwrap(), softmax(&minus).unwrap());
            for i in 0..n {
                let fd = (sp.as_slice()[i] - sm.as_slice()[i]) / (2.0 * h);
                worst = worst.max((fd - jac[(i, j)]).abs());
            }
        }
        worst
    });
    vec![Check::below("max |jacobian - central difference|", errors, 1e-8)]
}

/// Nearest point of the simplex grid with spacing `1/steps` in three dimensions.
pub fn grid_projection(v: &[f64; 3], steps: usize) -> [f64; 3] {
    let mut best = [0.0; 3];
    let mut best_d = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let x = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            let d = (x[0] - v[0]).powi(2) + (x[1] - v[1]).powi(2) + (x[2] - v[2]).powi(2);
            if d < best_d {
                best_d = d;
                best = x;
            }
        }
    }
    best
}

fn projection_grid(seed: u64, count: usize) -> Vec<Check> {
    let errors = trials(seed, count, |rng| {
        let v = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let fast = project_simplex(&v).unwrap();
        let slow = grid_projection(&v, 1000);
        fast.as_slice().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    });
    vec![Check::below("max |projection - grid search|", errors, 2e-3)]
}

/// Reward gap of `better` over `baseline` under matched initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    /// `min ΔP(t)/(1 + |cum reward(t)|)` over grid times `t > 0`
    pub min_scaled_gap: f64,
    pub final_gap: f64,
}

pub fn matched_gap(
    better: &Rule,
    baseline: &Rule,
    signal: &PayoffSignal,
    alpha: f64,
    horizon: f64,
) -> Result<GapStats> {
    let n = signal.dim();
    let (sa, sb) = matched_initialization(better, baseline, n, alpha)?;
    let a = DynamicsModel::new(better.clone(), n)?.with_initial_state(sa)?;
    let b = DynamicsModel::new(baseline.clone(), n)?.with_initial_state(sb)?;
    let ta = simulate(&a, signal, horizon, SUITE_STEP).map_err(|e| CliError::in_model(&better.kind().to_string(), e))?;
    let tb = simulate(&b, signal, horizon, SUITE_STEP).map_err(|e| CliError::in_model(&baseline.kind().to_string(), e))?;
    let report = reward_gap_with_tolerance(&ta, &tb, signal, DOMINANCE_TOLERANCE)?;
    let min_scaled_gap = (1..report.gap.len())
        .map(|k| report.gap[k] / (1.0 + ta.cumulative[k].abs().max(tb.cumulative[k].abs())))
        .fold(f64::INFINITY, f64::min);
    Ok(GapStats {
        min_scaled_gap,
        final_gap: *report.gap.last().unwrap(),
    })
}

fn random_payoff(rng: &mut ChaCha8Rng) -> PayoffSignal {
    let n = random::action_count(rng);
    random::payoff_signal(rng, n)
}

fn oracle_dominance(seed: u64, count: usize) -> Result<Vec<Check>> {
    let gaps = trials(seed, count, |rng| {
        let signal = random_payoff(rng);
        let alpha = rng.gen_range(-1.0..1.0);
        matched_gap(&Rule::OracleRd, &Rule::Rd, &signal, alpha, SUITE_HORIZON).map(|g| g.min_scaled_gap)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(vec![Check::at_least("min scaled gap, oracle over plain", gaps, -DOMINANCE_TOLERANCE)])
}

/// Largest `|z_pe − 2 z_e|` along the two trajectories from matched initial scores.
pub fn doubling_identity_gap(signal: &PayoffSignal, alpha: f64, horizon: f64) -> Result<f64> {
    let n = signal.dim();
    let (sa, sb) = matched_initialization(&Rule::PredictiveExrd, &Rule::exrd(), n, alpha)?;
    let pe = DynamicsModel::new(Rule::PredictiveExrd, n)?.with_initial_state(sa)?;
    let e = DynamicsModel::new(Rule::exrd(), n)?.with_initial_state(sb)?;
    let ta = simulate(&pe, signal, horizon, SUITE_STEP)?;
    let tb = simulate(&e, signal, horizon, SUITE_STEP)?;
    let mut worst: f64 = 0.0;
    for k in 0..ta.len() {
        let p = &ta.payoffs[k];
        let za = pe.score(&ta.states[k], p)?.expect("score-based");
        let zb = e.score(&tb.states[k], p)?.expect("score-based");
        for (x, y) in za.iter().zip(&zb) {
            worst = worst.max((x - 2.0 * y).abs());
        }
    }
    Ok(worst)
}

fn exrd_dominance(seed: u64, count: usize) -> Result<Vec<Check>> {
    let rows = trials(seed, count, |rng| -> Result<[f64; 4]> {
        let signal = random_payoff(rng);
        let alpha = rng.gen_range(-1.0..1.0);
        let min_gap = matched_gap(&Rule::PredictiveExrd, &Rule::exrd(), &signal, alpha, SUITE_HORIZON)?.min_scaled_gap;
        let strict = matched_gap(&Rule::PredictiveExrd, &Rule::exrd(), &signal, alpha, STRICT_GAP_HORIZON)?.final_gap;
        let identity = doubling_identity_gap(&signal, alpha, SUITE_HORIZON)?;
        let s = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
        let residual = dissipation_residual_exrd(&signal, SUITE_HORIZON, SUITE_STEP, s)?;
        Ok([min_gap, strict, identity, residual])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        Check::at_least("min scaled gap, predictive over plain forgetting", rows.iter().map(|r| r[0]), -DOMINANCE_TOLERANCE),
        Check::at_least("gap at T = 10", rows.iter().map(|r| r[1]), f64::MIN_POSITIVE),
        Check::below("sup |z_pe - 2 z_e|", rows.iter().map(|r| r[2]), 1e-6),
        Check::below("dissipation residual", rows.iter().map(|r| r[3]), 1e-6 + f64::EPSILON),
    ])
}

/// Coefficients of an analytic signal flattened for coordinate search.
#[derive(Debug, Clone)]
struct SearchPoint {
    n: usize,
    offset: Vec<f64>,
    terms: Vec<regretlab_core::SinusoidTerm>,
}

impl SearchPoint {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        match random_payoff(rng) {
            PayoffSignal::Analytic { offset, terms } => Self { n: offset.len(), offset, terms },
            PayoffSignal::Sampled { .. } => unreachable!(),
        }
    }

    fn signal(&self) -> PayoffSignal {
        PayoffSignal::analytic(self.offset.clone(), self.terms.clone()).expect("kept in range")
    }

    fn coordinates(&self) -> usize {
        self.n + self.terms.len() * (self.n + 2)
    }

    /// Moves one coefficient by a Gaussian-like step and clamps it to range.
    fn perturb(&mut self, rng: &mut ChaCha8Rng) {
        let k = rng.gen_range(0..self.coordinates());
        let step = (rng.gen_range(-1.0..1.0f64) + rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)) * 0.4;
        if k < self.n {
            self.offset[k] = (self.offset[k] + step).clamp(-AMPLITUDE_RANGE, AMPLITUDE_RANGE);
            return;
        }
        let k = k - self.n;
        let term = &mut self.terms[k / (self.n + 2)];
        match k % (self.n + 2) {
            i if i < self.n => term.amplitude[i] = (term.amplitude[i] + step).clamp(-AMPLITUDE_RANGE, AMPLITUDE_RANGE),
            i if i == self.n => term.omega = (term.omega + step).clamp(OMEGA_RANGE.0, OMEGA_RANGE.1),
            _ => {
                term.phase = (term.phase + 2.0 * step).rem_euclid(std::f64::consts::TAU);
                if rng.gen_bool(0.1) {
                    term.waveform = match term.waveform {
                        Waveform::Sin => Waveform::Cos,
                        Waveform::Cos => Waveform::Sin,
                    };
                }
            }
        }
    }
}

fn anticipatory_objective(signal: &PayoffSignal) -> Result<f64> {
    matched_gap(&Rule::anticipatory(), &Rule::Rd, signal, 0.0, SUITE_HORIZON).map(|g| g.min_scaled_gap)
}

/// Lowest gap found by [`falsification_search`] and the signal attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub min_scaled_gap: f64,
    pub evaluations: usize,
    pub witness: PayoffSignal,
}

/// Greedy descent on the minimum scaled gap from several random starts.
pub fn falsification_search(seed: u64, iterations: usize) -> Result<SearchOutcome> {
    let per_restart = iterations.max(1).div_ceil(FALSIFICATION_RESTARTS);
    let results = (0..FALSIFICATION_RESTARTS as u64)
        .into_par_iter()
        .map(|r| -> Result<Option<SearchOutcome>> {
            let mut rng = trial_rng(seed ^ 0x5eed_fa15, r);
            let budget = per_restart.min(iterations.saturating_sub(r as usize * per_restart));
            if budget == 0 {
                return Ok(None);
            }
            let mut point = SearchPoint::random(&mut rng);
            let mut value = anticipatory_objective(&point.signal())?;
            let mut best = (value, point.signal());
            for _ in 1..budget {
                let mut candidate = point.clone();
                candidate.perturb(&mut rng);
                let v = anticipatory_objective(&candidate.signal())?;
                if v < best.0 {
                    best = (v, candidate.signal());
                }
                if v <= value {
                    point = candidate;
                    value = v;
                }
            }
            Ok(Some(SearchOutcome {
                min_scaled_gap: best.0,
                evaluations: budget,
                witness: best.1,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = results.iter().flatten().map(|o| o.evaluations).sum();
    let mut best = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.min_scaled_gap.total_cmp(&b.min_scaled_gap))
        .expect("at least one restart runs");
    best.evaluations = evaluations;
    Ok(best)
}

fn anticipatory_global(seed: u64, count: usize, iterations: usize) -> Result<Vec<Check>> {
    let gaps = trials(seed, count, |rng| anticipatory_objective(&random_payoff(rng)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let outcome = falsification_search(seed, iterations)?;
    let mut search = Check::at_least("falsification search minimum", [outcome.min_scaled_gap], -DOMINANCE_TOLERANCE);
    search.samples = outcome.evaluations;
    Ok(vec![
        Check::at_least("min scaled gap, anticipatory over plain", gaps, -DOMINANCE_TOLERANCE),
        search,
    ])
}

/// Filters expected to earn at least as much as the integrator at every frequency.
pub fn passive_test_set() -> Vec<RationalTf> {
    vec![
        RationalTf::new(vec![1.0], vec![1.0, 1.0]).unwrap(),
        RationalTf::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap(),
        RationalTf::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap(),
        RationalTf::low_pass(1.0, 1.0),
    ]
}

fn frequency(seed: u64, count: usize) -> Result<Vec<Check>> {
    const POINTS: usize = 1024;
    let gains = log_grid(0.1, 10.0, 20);
    let rows = trials(seed, count, |rng| -> Result<[f64; 6]> {
        let n = random::action_count(rng);
        let env = SinusoidEnv::new(
            random::vector(rng, n, AMPLITUDE_RANGE),
            random::vector(rng, n, AMPLITUDE_RANGE),
            rng.gen_range(OMEGA_RANGE.0..=OMEGA_RANGE.1),
        )?;
        let a = 10f64.powf(rng.gen_range(-1.0..1.0));
        let quarter = avg_reward_j(&env, std::f64::consts::FRAC_PI_2, a, POINTS)?.abs();
        let t2 = t2_integral(&env, a, POINTS)?.abs();
        let phi = rng.gen_range(-1.5..1.5);
        let sweep = sweep_phi_a(&env, &[-phi, 0.0, phi], &gains, POINTS)?;
        let monotone = sweep.j[2].windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let rd = to_frequency_point(&RationalTf::integrator(), env.omega)?;
        let rd_j = avg_reward_j(&env, rd.phase_lag, rd.gain, POINTS)?.abs();
        let mut passive = f64::INFINITY;
        let mut set = passive_test_set();
        set.push(RationalTf::low_pass(rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)));
        for g in &set {
            let p = to_frequency_point(g, env.omega)?;
            passive = passive.min(avg_reward_j(&env, p.phase_lag, p.gain, POINTS)?);
        }
        Ok([quarter, t2, sweep.factorization_residual, monotone, rd_j, passive])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let col = |i: usize| rows.iter().map(move |r| r[i]);
    Ok(vec![
        Check::below("|J(pi/2, a)|", col(0), 1e-10),
        Check::below("|T2(a)|", col(1), 1e-8),
        Check::below("max |J - T1 cos(phi)|", col(2), 1e-8),
        Check::at_least("min J(a_k+1) - J(a_k), cos(phi) > 0", col(3), -1e-12),
        Check::below("|J| of the integrator", col(4), 1e-10),
        Check::at_least("min J over passive filters", col(5), -1e-12),
    ])
}

fn local_linearization(seed: u64, count: usize) -> Result<Vec<Check>> {
    let errors = trials(seed, count, |rng| -> Result<f64> {
        let n = random::action_count(rng);
        let mut direction = random::vector(rng, n, 1.0);
        direction[0] += 1.0;
        direction[n - 1] -= 1.0;
        let perturbation = if rng.gen_bool(0.5) {
            Perturbation::Step
        } else {
            Perturbation::Sine { omega: rng.gen_range(0.2..3.0) }
        };
        Ok(local_linearization_error(
            &direction,
            1.0,
            1.0,
            LINEARIZATION_AMPLITUDE,
            perturbation,
            LINEARIZATION_HORIZON,
            SUITE_STEP,
        )?
        .relative_error)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(vec![Check::below("relative error against the reduced linear model", errors, LINEARIZATION_TOLERANCE)])
}
