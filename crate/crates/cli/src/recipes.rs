//! Built-in experiments that regenerate the reference figures.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regretlab_core::freq::{SinusoidEnv, DEFAULT_QUADRATURE_POINTS};
use regretlab_core::lti::log_grid;
use regretlab_core::sim::{DEFAULT_HORIZON, DEFAULT_STEP};
use regretlab_core::{PayoffSignal, Rule, SinusoidTerm};
use serde::Serialize;

use crate::config::{FreqSweepSpec, ModelSpec, Outputs, ScenarioConfig, SCHEMA};
use crate::error::{CliError, Result};
use crate::output::write_file;
use crate::scenario::{run_scenario, Mode, ScenarioSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureRecipe {
    Example1,
    Example2,
    Example3,
    Fig6,
}

impl FigureRecipe {
    pub const ALL: [FigureRecipe; 4] = [Self::Example1, Self::Example2, Self::Example3, Self::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
            Self::Fig6 => "fig6",
        }
    }
}

impl fmt::Display for FigureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureRecipe {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| CliError::Unknown {
            what: "recipe",
            name: s.to_string(),
            expected: Self::ALL.map(Self::name).join(", "),
        })
    }
}

/// Example 3 horizon; long enough to show the gap settling into linear growth.
pub const EXAMPLE3_HORIZON: f64 = 100.0;
/// Rows written per unit of simulated time in the long-horizon recipes.
const LONG_RUN_STRIDE: usize = 100;

/// `[sin t, 0.5]`
pub fn example1_signal() -> PayoffSignal {
    PayoffSignal::analytic(vec![0.0, 0.5], vec![SinusoidTerm::sin(vec![1.0, 0.0], 1.0)]).expect("valid")
}

/// `[sin t, −sin t]`
pub fn example2_signal() -> PayoffSignal {
    PayoffSignal::analytic(vec![0.0, 0.0], vec![SinusoidTerm::sin(vec![1.0, -1.0], 1.0)]).expect("valid")
}

/// `v₁ sin t + v₂ cos 2t + v₃ sin 3t` on five actions.
pub fn example3_signal() -> PayoffSignal {
    PayoffSignal::analytic(
        vec![0.0; 5],
        vec![
            SinusoidTerm::sin(vec![0.3, 0.5, -0.7, 1.0, 0.8], 1.0),
            SinusoidTerm::cos(vec![0.7, 2.0, 0.4, 1.2, 2.0], 2.0),
            SinusoidTerm::sin(vec![0.8, 1.4, -2.1, 2.0, 0.8], 3.0),
        ],
    )
    .expect("valid")
}

pub fn fig6_env() -> SinusoidEnv {
    SinusoidEnv::new(vec![1.0, -0.4, 0.6], vec![0.5, 0.1, -0.6], 1.0).expect("valid")
}

/// 61 phases across `[−π/2, π/2]`.
pub fn fig6_phis() -> Vec<f64> {
    (0..=60).map(|k| -FRAC_PI_2 + std::f64::consts::PI * k as f64 / 60.0).collect()
}

/// 20 log-spaced gains in `[0.1, 10]`.
pub fn fig6_gains() -> Vec<f64> {
    log_grid(0.1, 10.0, 20)
}

fn population_comparison(signal: PayoffSignal) -> ScenarioConfig {
    ScenarioConfig {
        schema: SCHEMA.into(),
        models: [Rule::Rd, Rule::Bnn, Rule::Smith, Rule::Tp].map(ModelSpec::new).to_vec(),
        signal: Some(signal),
        horizon: DEFAULT_HORIZON,
        step: DEFAULT_STEP,
        stride: LONG_RUN_STRIDE,
        outputs: Outputs {
            trajectory: true,
            regret: true,
            plot: true,
            ..Outputs::default()
        },
        seed: 0,
    }
}

/// The scenario behind a recipe, with all defaults bound.
pub fn recipe_config(recipe: FigureRecipe) -> ScenarioConfig {
    match recipe {
        FigureRecipe::Example1 => population_comparison(example1_signal()),
        FigureRecipe::Example2 => population_comparison(example2_signal()),
        FigureRecipe::Example3 => ScenarioConfig {
            schema: SCHEMA.into(),
            models: vec![ModelSpec::new(Rule::Rd), ModelSpec::new(Rule::anticipatory())],
            signal: Some(example3_signal()),
            horizon: EXAMPLE3_HORIZON,
            step: DEFAULT_STEP,
            stride: 10,
            outputs: Outputs {
                trajectory: true,
                gaps: true,
                regret: true,
                plot: true,
                freq_sweep: None,
            },
            seed: 0,
        },
        FigureRecipe::Fig6 => ScenarioConfig {
            schema: SCHEMA.into(),
            models: Vec::new(),
            signal: None,
            horizon: 0.0,
            step: DEFAULT_STEP,
            stride: 1,
            outputs: Outputs {
                plot: false,
                freq_sweep: Some(FreqSweepSpec {
                    env: fig6_env(),
                    phis: fig6_phis(),
                    gains: fig6_gains(),
                    points: DEFAULT_QUADRATURE_POINTS,
                }),
                ..Outputs::default()
            },
            seed: 0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValue {
    pub model: String,
    pub reference: f64,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproSummary {
    pub recipe: String,
    #[serde(flatten)]
    pub scenario: ScenarioSummary,
    /// Long-run averages quoted alongside the reference figure.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<ReferenceValue>,
}

fn references(recipe: FigureRecipe) -> &'static [(&'static str, f64)] {
    match recipe {
        FigureRecipe::Example1 => &[("bnn", 0.374), ("smith", 0.453), ("tp", 0.467)],
        FigureRecipe::Example2 => &[("rd", 0.0), ("bnn", 0.18), ("smith", 0.33), ("tp", 0.18)],
        _ => &[],
    }
}

/// Writes the recipe's data files plus `summary.json` into `out_dir`.
pub fn repro(recipe: FigureRecipe, out_dir: &Path) -> Result<ReproSummary> {
    let config = recipe_config(recipe);
    let mode = match recipe {
        FigureRecipe::Fig6 => Mode::SweepFreq,
        FigureRecipe::Example3 => Mode::Compare,
        _ => Mode::Simulate,
    };
    let scenario = run_scenario(&config, mode, out_dir)?;
    let references = references(recipe)
        .iter()
        .filter_map(|(name, reference)| {
            scenario.models.iter().find(|m| m.name == *name).map(|m| ReferenceValue {
                model: name.to_string(),
                reference: *reference,
                measured: m.final_average,
            })
        })
        .collect();
    let mut summary = ReproSummary {
        recipe: recipe.name().into(),
        scenario,
        references,
    };
    summary.scenario.files.push(PathBuf::from("summary.json"));
    let mut text = serde_json::to_string_pretty(&summary).expect("serializable");
    text.push('\n');
    write_file(&out_dir.join("summary.json"), &text)?;
    Ok(summary)
}
