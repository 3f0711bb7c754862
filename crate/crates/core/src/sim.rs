//! Fixed-step RK4 integration of learning rules against payoff signals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsModel;
use crate::error::{check_len, Error, Result};
use crate::simplex::dot;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-2;
/// Default horizon for long-run average experiments.
pub const DEFAULT_HORIZON: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Sin,
    Cos,
}

/// `amplitude · wave(ω t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTerm {
    pub amplitude: Vec<f64>,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
    pub waveform: Waveform,
}

impl SinusoidTerm {
    pub fn sin(amplitude: Vec<f64>, omega: f64) -> Self {
        Self {
            amplitude,
            omega,
            phase: 0.0,
            waveform: Waveform::Sin,
        }
    }

    pub fn cos(amplitude: Vec<f64>, omega: f64) -> Self {
        Self {
            amplitude,
            omega,
            phase: 0.0,
            waveform: Waveform::Cos,
        }
    }

    fn wave(&self, t: f64) -> f64 {
        let arg = self.omega * t + self.phase;
        match self.waveform {
            Waveform::Sin => arg.sin(),
            Waveform::Cos => arg.cos(),
        }
    }
}

/// Payoff trajectory `p(t) ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PayoffSignal {
    /// Constant offset plus a finite sum of sinusoids.
    Analytic {
        offset: Vec<f64>,
        #[serde(default)]
        terms: Vec<SinusoidTerm>,
    },
    /// Samples on a strictly increasing grid, linearly interpolated and held
    /// constant outside it.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl PayoffSignal {
    pub fn analytic(offset: Vec<f64>, terms: Vec<SinusoidTerm>) -> Result<Self> {
        let s = PayoffSignal::Analytic { offset, terms };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(value: Vec<f64>) -> Result<Self> {
        Self::analytic(value, Vec::new())
    }

    pub fn sampled(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let s = PayoffSignal::Sampled { times, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PayoffSignal::Analytic { offset, terms } => {
                if offset.is_empty() {
                    return Err(Error::Configuration("payoff offset is empty".into()));
                }
                for term in terms {
                    check_len(offset.len(), term.amplitude.len(), "sinusoid amplitude")?;
                    if !(term.omega >= 0.0 && term.omega.is_finite()) {
                        return Err(Error::Configuration(format!(
                            "sinusoid frequency must be finite and nonnegative, got {}",
                            term.omega
                        )));
                    }
                }
                let finite = offset
                    .iter()
                    .chain(terms.iter().flat_map(|t| t.amplitude.iter()))
                    .chain(terms.iter().map(|t| &t.phase))
                    .all(|x| x.is_finite());
                if !finite {
                    return Err(Error::Configuration("non-finite payoff coefficient".into()));
                }
                Ok(())
            }
            PayoffSignal::Sampled { times, values } => {
                if times.is_empty() {
                    return Err(Error::Configuration("sampled payoff has no samples".into()));
                }
                check_len(times.len(), values.len(), "payoff samples")?;
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Configuration(
                        "sample times must be strictly increasing".into(),
                    ));
                }
                let n = values[0].len();
                if n == 0 {
                    return Err(Error::Configuration("payoff samples are empty".into()));
                }
                for v in values {
                    check_len(n, v.len(), "payoff sample")?;
                }
                if values.iter().flatten().chain(times).any(|x| !x.is_finite()) {
                    return Err(Error::Configuration("non-finite payoff sample".into()));
                }
                Ok(())
            }
        }
    }

    /// Number of actions.
    pub fn dim(&self) -> usize {
        match self {
            PayoffSignal::Analytic { offset, .. } => offset.len(),
            PayoffSignal::Sampled { values, .. } => values[0].len(),
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            PayoffSignal::Analytic { offset, terms } => {
                out.copy_from_slice(offset);
                for term in terms {
                    let w = term.wave(t);
                    for (o, a) in out.iter_mut().zip(&term.amplitude) {
                        *o += a * w;
                    }
                }
            }
            PayoffSignal::Sampled { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    out.copy_from_slice(&values[0]);
                } else if t >= times[last] {
                    out.copy_from_slice(&values[last]);
                } else {
                    let k = times.partition_point(|&s| s <= t) - 1;
                    let w = (t - times[k]) / (times[k + 1] - times[k]);
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = (1.0 - w) * values[k][i] + w * values[k + 1][i];
                    }
                }
            }
        }
    }
}

/// Uniform-grid record of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub strategies: Vec<Vec<f64>>,
    pub payoffs: Vec<Vec<f64>>,
    /// `p(t)ᵀx(t)`
    pub rewards: Vec<f64>,
    /// Trapezoid integral of `rewards` from 0.
    pub cumulative: Vec<f64>,
    /// `cumulative / t`, with the `t = 0` entry set to the instantaneous reward.
    pub average: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_average(&self) -> f64 {
        *self.average.last().unwrap_or(&0.0)
    }

    pub fn final_cumulative(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }
}

/// Number of grid intervals for horizon `t_end` at step `h`, i.e. `⌊T/h⌋`
/// (with a relative guard against `1000/0.01 = 99999.999…`).
pub fn grid_steps(t_end: f64, h: f64) -> usize {
    (t_end / h * (1.0 + 1e-12)).floor() as usize
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    p: Vec<f64>,
}

impl Rk4Work {
    fn new(dim: usize, n: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
            p: vec![0.0; n],
        }
    }
}

fn advance(
    model: &DynamicsModel,
    state: &mut [f64],
    signal: &PayoffSignal,
    t: f64,
    h: f64,
    w: &mut Rk4Work,
) -> bool {
    let dim = state.len();
    signal.eval_into(t, &mut w.p);
    model.field_into(state, &w.p, &mut w.k1);

    signal.eval_into(t + 0.5 * h, &mut w.p);
    for i in 0..dim {
        w.tmp[i] = state[i] + 0.5 * h * w.k1[i];
    }
    model.field_into(&w.tmp, &w.p, &mut w.k2);
    for i in 0..dim {
        w.tmp[i] = state[i] + 0.5 * h * w.k2[i];
    }
    model.field_into(&w.tmp, &w.p, &mut w.k3);

    signal.eval_into(t + h, &mut w.p);
    for i in 0..dim {
        w.tmp[i] = state[i] + h * w.k3[i];
    }
    model.field_into(&w.tmp, &w.p, &mut w.k4);

    for i in 0..dim {
        state[i] += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
    state.iter().all(|x| x.is_finite())
}

fn check_compatible(model: &DynamicsModel, signal: &PayoffSignal, state: &[f64]) -> Result<()> {
    check_len(model.actions(), signal.dim(), "payoff signal")?;
    if state.len() != model.state_dim() {
        return Err(Error::Structure(format!(
            "state of length {} does not match {} (expects {})",
            state.len(),
            model.kind(),
            model.state_dim()
        )));
    }
    Ok(())
}

/// One classical RK4 step from `t` to `t + h`.
pub fn rk4_step(
    model: &DynamicsModel,
    state: &[f64],
    signal: &PayoffSignal,
    t: f64,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    check_compatible(model, signal, state)?;
    let mut next = state.to_vec();
    let mut work = Rk4Work::new(state.len(), model.actions());
    if advance(model, &mut next, signal, t, h, &mut work) {
        Ok(next)
    } else {
        Err(Error::Divergence {
            step: (t / h).round() as usize + 1,
            time: t + h,
        })
    }
}

/// Integrates `model` from its initial state over `[0, t_end]` with step `h`.
pub fn simulate(
    model: &DynamicsModel,
    signal: &PayoffSignal,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {t_end}")));
    }
    if !(h > 0.0 && h <= t_end) {
        return Err(Error::Domain(format!(
            "step must satisfy 0 < h <= T, got h = {h}, T = {t_end}"
        )));
    }
    signal.validate()?;
    let mut state = model.initial_state().as_slice().to_vec();
    check_compatible(model, signal, &state)?;

    let steps = grid_steps(t_end, h);
    let len = steps + 1;
    let mut traj = Trajectory {
        step: h,
        times: Vec::with_capacity(len),
        states: Vec::with_capacity(len),
        strategies: Vec::with_capacity(len),
        payoffs: Vec::with_capacity(len),
        rewards: Vec::with_capacity(len),
        cumulative: Vec::with_capacity(len),
        average: Vec::with_capacity(len),
    };
    let mut work = Rk4Work::new(state.len(), model.actions());

    for k in 0..len {
        let t = k as f64 * h;
        if k > 0 && !advance(model, &mut state, signal, (k - 1) as f64 * h, h, &mut work) {
            return Err(Error::Divergence { step: k, time: t });
        }
        let p = signal.eval(t);
        let x = model.output(&state, &p)?.into_vec();
        let reward = dot(&p, &x);
        let cum = match k {
            0 => 0.0,
            _ => traj.cumulative[k - 1] + 0.5 * h * (traj.rewards[k - 1] + reward),
        };
        traj.times.push(t);
        traj.states.push(state.clone());
        traj.strategies.push(x);
        traj.payoffs.push(p);
        traj.rewards.push(reward);
        traj.cumulative.push(cum);
        traj.average.push(if k == 0 { reward } else { cum / t });
    }
    Ok(traj)
}

/// Runs several models on one signal in parallel; results keep input order.
pub fn simulate_batch(
    models: &[DynamicsModel],
    signal: &PayoffSignal,
    t_end: f64,
    h: f64,
) -> Vec<Result<Trajectory>> {
    models
        .par_iter()
        .map(|m| simulate(m, signal, t_end, h))
        .collect()
}
