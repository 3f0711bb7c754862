//! Learning rules as ODE-with-output models.
//!
//! Every rule maps a flat state vector and the instantaneous payoff to a
//! state derivative, and a state (plus payoff, for rules whose output reads
//! it) to a mixed strategy. Score-based rules output `σ(z)`; the population
//! rules (BNN, Smith, target projection) carry the strategy itself as state.
//!
//! State layouts, `n` actions, predictor order `m`:
//!
//! | rule              | blocks                               |
//! |-------------------|--------------------------------------|
//! | `rd`, `exrd`      | `z[n]`                               |
//! | `bnn/smith/tp`    | `x[n]`                               |
//! | `anticipatory`    | `z[n]`, `q[n]`                       |
//! | `predictive_rd`   | `r[n]`, `x_h[m·n]` (channel-major)   |
//! | `oracle_rd`       | `r[n]`                               |
//! | `predictive_exrd` | `r[n]`, `m[n]`                       |
//! | `cascade`         | `x_g[m·n]` (channel-major)           |

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lti::StateSpaceSiso;
use crate::simplex::{self, SimplexVector};

fn one() -> f64 {
    1.0
}

/// A learning rule with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// `ż = p, x = σ(z)`
    Rd,
    /// Brown–von Neumann–Nash
    Bnn,
    Smith,
    /// `ẋ = −x + Π_Δ(x + p)`
    Tp,
    /// `ż = λ(p − z), x = σ(z)`
    Exrd {
        #[serde(default = "one")]
        lambda: f64,
    },
    /// `ż = p + γλ(p − q), q̇ = λ(p − q), x = σ(z)`
    Anticipatory {
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "one")]
        lambda: f64,
    },
    /// `ṙ = p`, predictor `h(s)` per channel producing `m`, `x = σ(r + m)`
    PredictiveRd { predictor: StateSpaceSiso },
    /// `ṙ = p, x = σ(r + p)`. Reads the current payoff: not causal.
    OracleRd,
    /// `ṙ = p − r, ṁ = p − m, x = σ(r + m)`
    PredictiveExrd,
    /// Generic `σ ∘ g(s)Iₙ` with `g(s) = C(sI − A)⁻¹B + D`.
    Cascade {
        filter: StateSpaceSiso,
        #[serde(default)]
        feedthrough: f64,
    },
}

/// Parameter-free identifier of a [`Rule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Rd,
    Bnn,
    Smith,
    Tp,
    Exrd,
    Anticipatory,
    PredictiveRd,
    OracleRd,
    PredictiveExrd,
    Cascade,
}

impl RuleKind {
    pub const ALL: [RuleKind; 10] = [
        RuleKind::Rd,
        RuleKind::Bnn,
        RuleKind::Smith,
        RuleKind::Tp,
        RuleKind::Exrd,
        RuleKind::Anticipatory,
        RuleKind::PredictiveRd,
        RuleKind::OracleRd,
        RuleKind::PredictiveExrd,
        RuleKind::Cascade,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Rd => "rd",
            RuleKind::Bnn => "bnn",
            RuleKind::Smith => "smith",
            RuleKind::Tp => "tp",
            RuleKind::Exrd => "exrd",
            RuleKind::Anticipatory => "anticipatory",
            RuleKind::PredictiveRd => "predictive_rd",
            RuleKind::OracleRd => "oracle_rd",
            RuleKind::PredictiveExrd => "predictive_exrd",
            RuleKind::Cascade => "cascade",
        }
    }

    /// Population rules whose state is the strategy itself.
    pub fn is_population(self) -> bool {
        matches!(self, RuleKind::Bnn | RuleKind::Smith | RuleKind::Tp)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Configuration(format!("unknown learning rule `{s}`")))
    }
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        match self {
            Rule::Rd => RuleKind::Rd,
            Rule::Bnn => RuleKind::Bnn,
            Rule::Smith => RuleKind::Smith,
            Rule::Tp => RuleKind::Tp,
            Rule::Exrd { .. } => RuleKind::Exrd,
            Rule::Anticipatory { .. } => RuleKind::Anticipatory,
            Rule::PredictiveRd { .. } => RuleKind::PredictiveRd,
            Rule::OracleRd => RuleKind::OracleRd,
            Rule::PredictiveExrd => RuleKind::PredictiveExrd,
            Rule::Cascade { .. } => RuleKind::Cascade,
        }
    }

    /// Anticipatory defaults `γ = λ = 1`.
    pub fn anticipatory() -> Self {
        Rule::Anticipatory {
            gamma: 1.0,
            lambda: 1.0,
        }
    }

    /// Ex-RD with `λ = 1`.
    pub fn exrd() -> Self {
        Rule::Exrd { lambda: 1.0 }
    }

    /// Predictive RD with the first-order low-pass predictor `γλ/(s+λ)`.
    pub fn predictive_low_pass(gamma: f64, lambda: f64) -> Self {
        Rule::PredictiveRd {
            predictor: StateSpaceSiso::low_pass(gamma, lambda),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Configuration(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Rule::Exrd { lambda } => positive("lambda", *lambda),
            Rule::Anticipatory { gamma, lambda } => {
                positive("gamma", *gamma)?;
                positive("lambda", *lambda)
            }
            Rule::PredictiveRd { predictor } => {
                if predictor.is_asymptotically_stable() {
                    Ok(())
                } else {
                    Err(Error::Configuration(
                        "predictor must be asymptotically stable".into(),
                    ))
                }
            }
            Rule::Cascade { feedthrough, .. } if !feedthrough.is_finite() => {
                Err(Error::Configuration("feedthrough must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether the output map only uses past payoffs.
    pub fn is_causal(&self) -> bool {
        !matches!(self, Rule::OracleRd)
    }

    fn predictor_order(&self) -> usize {
        match self {
            Rule::PredictiveRd { predictor } => predictor.order(),
            Rule::Cascade { filter, .. } => filter.order(),
            _ => 0,
        }
    }
}

/// Named partition of a flat state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub blocks: Vec<(&'static str, Range<usize>)>,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |(_, r)| r.end)
    }

    pub fn block(&self, name: &str) -> Option<Range<usize>> {
        self.blocks
            .iter()
            .find(|(b, _)| *b == name)
            .map(|(_, r)| r.clone())
    }
}

/// Flat state vector of a learning rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DynamicsState(pub Vec<f64>);

impl DynamicsState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DynamicsState {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A learning rule bound to `n` actions and an initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    rule: Rule,
    n: usize,
    initial: DynamicsState,
}

impl DynamicsModel {
    /// Zero scores, uniform strategies and zero predictor states.
    pub fn new(rule: Rule, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Configuration("need at least one action".into()));
        }
        rule.validate()?;
        let layout = layout_for(&rule, n);
        let mut initial = vec![0.0; layout.dim()];
        if rule.kind().is_population() {
            initial.fill(1.0 / n as f64);
        }
        Ok(Self {
            rule,
            n,
            initial: DynamicsState(initial),
        })
    }

    pub fn with_initial_state(mut self, state: DynamicsState) -> Result<Self> {
        self.check_state(state.as_slice())?;
        if self.rule.kind().is_population() {
            SimplexVector::new(state.0.clone())
                .map_err(|e| Error::Structure(format!("population state must be a strategy: {e}")))?;
        }
        self.initial = state;
        Ok(self)
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn kind(&self) -> RuleKind {
        self.rule.kind()
    }

    pub fn actions(&self) -> usize {
        self.n
    }

    pub fn initial_state(&self) -> &DynamicsState {
        &self.initial
    }

    pub fn layout(&self) -> StateLayout {
        layout_for(&self.rule, self.n)
    }

    pub fn state_dim(&self) -> usize {
        self.layout().dim()
    }

    pub fn is_causal(&self) -> bool {
        self.rule.is_causal()
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        let dim = self.state_dim();
        if state.len() != dim {
            return Err(Error::Structure(format!(
                "{} with n = {} expects a state of length {dim}, got {}",
                self.kind(),
                self.n,
                state.len()
            )));
        }
        Ok(())
    }

    /// Right-hand side of the rule's ODE.
    pub fn vector_field(&self, state: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        check_len(self.n, p.len(), "payoff")?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite payoff".into()));
        }
        let mut out = vec![0.0; state.len()];
        self.field_into(state, p, &mut out);
        Ok(out)
    }

    /// Unchecked vector field used by the integrator.
    pub(crate) fn field_into(&self, state: &[f64], p: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.rule {
            Rule::Rd | Rule::OracleRd => out.copy_from_slice(p),
            Rule::Bnn => {
                let x = state;
                let avg = simplex::dot(x, p);
                let mut total = 0.0;
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = (pi - avg).max(0.0);
                    total += *o;
                }
                for (o, xi) in out.iter_mut().zip(x) {
                    *o -= xi * total;
                }
            }
            Rule::Smith => {
                let x = state;
                for i in 0..n {
                    let mut inflow = 0.0;
                    let mut outflow = 0.0;
                    for j in 0..n {
                        inflow += x[j] * (p[i] - p[j]).max(0.0);
                        outflow += (p[j] - p[i]).max(0.0);
                    }
                    out[i] = inflow - x[i] * outflow;
                }
            }
            Rule::Tp => {
                let shifted: Vec<f64> = state.iter().zip(p).map(|(x, p)| x + p).collect();
                simplex::project_simplex_into(&shifted, out);
                for (o, x) in out.iter_mut().zip(state) {
                    *o -= x;
                }
            }
            Rule::Exrd { lambda } => {
                for i in 0..n {
                    out[i] = lambda * (p[i] - state[i]);
                }
            }
            Rule::Anticipatory { gamma, lambda } => {
                let (_, q) = state.split_at(n);
                let (dz, dq) = out.split_at_mut(n);
                for i in 0..n {
                    let lead = lambda * (p[i] - q[i]);
                    dz[i] = p[i] + gamma * lead;
                    dq[i] = lead;
                }
            }
            Rule::PredictiveRd { predictor } => {
                let m = predictor.order();
                let (dr, dh) = out.split_at_mut(n);
                dr.copy_from_slice(p);
                let xh = &state[n..];
                for i in 0..n {
                    predictor.derivative_into(
                        &xh[i * m..(i + 1) * m],
                        p[i],
                        &mut dh[i * m..(i + 1) * m],
                    );
                }
            }
            Rule::PredictiveExrd => {
                for i in 0..n {
                    out[i] = p[i] - state[i];
                    out[n + i] = p[i] - state[n + i];
                }
            }
            Rule::Cascade { filter, .. } => {
                let m = filter.order();
                for i in 0..n {
                    filter.derivative_into(
                        &state[i * m..(i + 1) * m],
                        p[i],
                        &mut out[i * m..(i + 1) * m],
                    );
                }
            }
        }
    }

    /// The score `z` fed into the softmax, or `None` for population rules.
    pub fn score(&self, state: &[f64], p: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_state(state)?;
        check_len(self.n, p.len(), "payoff")?;
        Ok(self.score_unchecked(state, p))
    }

    fn score_unchecked(&self, state: &[f64], p: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let z = match &self.rule {
            Rule::Bnn | Rule::Smith | Rule::Tp => return None,
            Rule::Rd | Rule::Exrd { .. } | Rule::Anticipatory { .. } => state[..n].to_vec(),
            Rule::OracleRd => state.iter().zip(p).map(|(r, p)| r + p).collect(),
            Rule::PredictiveExrd => (0..n).map(|i| state[i] + state[n + i]).collect(),
            Rule::PredictiveRd { predictor } => {
                let m = predictor.order();
                let xh = &state[n..];
                (0..n)
                    .map(|i| state[i] + predictor.output(&xh[i * m..(i + 1) * m]))
                    .collect()
            }
            Rule::Cascade {
                filter,
                feedthrough,
            } => {
                let m = filter.order();
                (0..n)
                    .map(|i| filter.output(&state[i * m..(i + 1) * m]) + feedthrough * p[i])
                    .collect()
            }
        };
        Some(z)
    }

    /// The strategy played in `state` when the current payoff is `p`.
    pub fn output(&self, state: &[f64], p: &[f64]) -> Result<SimplexVector> {
        self.check_state(state)?;
        check_len(self.n, p.len(), "payoff")?;
        match self.score_unchecked(state, p) {
            Some(z) => simplex::softmax(&z),
            None => {
                // Integration can leave population states a rounding error
                // outside the simplex; report the nearest clean strategy.
                let mut x: Vec<f64> = state.iter().map(|v| v.max(0.0)).collect();
                let total: f64 = x.iter().sum();
                if !(total > 0.0 && total.is_finite()) {
                    return Err(Error::Structure("population state left the simplex".into()));
                }
                x.iter_mut().for_each(|v| *v /= total);
                SimplexVector::new(x)
            }
        }
    }
}

fn layout_for(rule: &Rule, n: usize) -> StateLayout {
    let m = rule.predictor_order();
    let blocks = match rule.kind() {
        RuleKind::Rd | RuleKind::Exrd => vec![("z", 0..n)],
        RuleKind::Bnn | RuleKind::Smith | RuleKind::Tp => vec![("x", 0..n)],
        RuleKind::Anticipatory => vec![("z", 0..n), ("q", n..2 * n)],
        RuleKind::PredictiveRd => vec![("r", 0..n), ("x_h", n..n + m * n)],
        RuleKind::OracleRd => vec![("r", 0..n)],
        RuleKind::PredictiveExrd => vec![("r", 0..n), ("m", n..2 * n)],
        RuleKind::Cascade => vec![("x_g", 0..m * n)],
    };
    StateLayout { blocks }
}

/// Initial states satisfying the matching hypothesis of the dominance result
/// that compares `a` and `b`: equal scores `α·1ₙ` wherever both carry one,
/// zero low-pass/predictor states (so `m(0) = γq(0) = 0`).
pub fn matched_initialization(
    a: &Rule,
    b: &Rule,
    n: usize,
    alpha: f64,
) -> Result<(DynamicsState, DynamicsState)> {
    use RuleKind::*;
    let pair = (a.kind(), b.kind());
    let known = matches!(
        pair,
        (Rd, OracleRd)
            | (OracleRd, Rd)
            | (Exrd, PredictiveExrd)
            | (PredictiveExrd, Exrd)
            | (Rd, Anticipatory)
            | (Anticipatory, Rd)
            | (Rd, PredictiveRd)
            | (PredictiveRd, Rd)
            | (Anticipatory, PredictiveRd)
            | (PredictiveRd, Anticipatory)
    );
    if !known {
        return Err(Error::Configuration(format!(
            "no matched initialisation is defined for the pair ({}, {})",
            pair.0, pair.1
        )));
    }
    let init = |rule: &Rule| -> DynamicsState {
        let layout = layout_for(rule, n);
        let mut s = vec![0.0; layout.dim()];
        let scored = match rule.kind() {
            // Matched initialization puts α·1ₙ in both r and m.
            PredictiveExrd => 0..2 * n,
            _ => 0..n,
        };
        s[scored].fill(alpha);
        DynamicsState(s)
    };
    Ok((init(a), init(b)))
}
