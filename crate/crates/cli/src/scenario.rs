//! Runs a [`ScenarioConfig`] and writes its output files.

use std::path::{Path, PathBuf};

use regretlab_core::freq::{sweep_phi_a, SweepResult};
use regretlab_core::metrics::{reward_gap, reward_report, DominanceVerdict, GapReport, RewardReport};
use regretlab_core::sim::simulate_batch;
use regretlab_core::Trajectory;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{CliError, Result};
use crate::output::{gap_csv, num, sampled_rows, trajectory_csv, write_file, LinePlot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Whatever the config's `outputs` ask for.
    Simulate,
    /// Additionally forces gap and regret outputs; needs two or more models.
    Compare,
    /// Only the frequency sweep.
    SweepFreq,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub runs: Vec<(String, Trajectory)>,
    pub gaps: Vec<(String, GapReport)>,
    pub regrets: Vec<(String, RewardReport)>,
    pub sweep: Option<SweepResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub final_average: f64,
    pub final_cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub label: String,
    pub min_gap: f64,
    pub argmin_time: f64,
    pub min_scaled_gap: f64,
    pub final_gap: f64,
    pub verdict: DominanceVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub models: Vec<ModelSummary>,
    pub gaps: Vec<GapSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization_residual: Option<f64>,
}

fn effective(config: &ScenarioConfig, mode: Mode) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    match mode {
        Mode::Simulate => {}
        Mode::Compare => {
            if c.models.len() < 2 {
                return Err(CliError::config("models", "comparison needs at least two models"));
            }
            c.outputs.gaps = true;
            c.outputs.regret = true;
        }
        Mode::SweepFreq => {
            if c.outputs.freq_sweep.is_none() {
                return Err(CliError::config("outputs.freq_sweep", "no frequency sweep configured"));
            }
            c.outputs.trajectory = false;
            c.outputs.gaps = false;
            c.outputs.regret = false;
        }
    }
    if c.outputs.gaps && c.models.len() < 2 {
        return Err(CliError::config("outputs.gaps", "gaps need at least two models"));
    }
    c.validate()?;
    Ok(c)
}

/// Computes everything the config asks for without touching the filesystem.
pub fn execute(config: &ScenarioConfig, mode: Mode) -> Result<ScenarioRun> {
    let config = effective(config, mode)?;
    let mut run = ScenarioRun {
        runs: Vec::new(),
        gaps: Vec::new(),
        regrets: Vec::new(),
        sweep: None,
    };
    let simulate_models = mode != Mode::SweepFreq && config.wants_simulation();
    if simulate_models {
        let signal = config.signal.as_ref().expect("validated");
        let named = config.built_models()?;
        let models: Vec<_> = named.iter().map(|(_, m)| m.clone()).collect();
        for ((name, _), traj) in named.iter().zip(simulate_batch(&models, signal, config.horizon, config.step)) {
            let traj = traj.map_err(|e| CliError::in_model(name, e))?;
            run.runs.push((name.clone(), traj));
        }
        if config.outputs.gaps {
            let (base_name, base) = &run.runs[0];
            for (name, traj) in &run.runs[1..] {
                run.gaps.push((format!("{name}-{base_name}"), reward_gap(traj, base, signal)?));
            }
        }
        if config.outputs.regret {
            for (name, traj) in &run.runs {
                run.regrets.push((name.clone(), reward_report(traj, signal)?));
            }
        }
    }
    if let Some(spec) = &config.outputs.freq_sweep {
        run.sweep = Some(sweep_phi_a(&spec.env, &spec.phis, &spec.gains, spec.points)?);
    }
    Ok(run)
}

fn average_plot(runs: &[(String, Trajectory)], stride: usize, title: &str) -> LinePlot {
    let series = runs
        .iter()
        .map(|(name, traj)| {
            let rows = sampled_rows(traj.len(), stride);
            Series {
                name: name.clone(),
                xs: rows.iter().map(|&k| traj.times[k]).collect(),
                ys: rows.iter().map(|&k| traj.average[k]).collect(),
            }
        })
        .collect();
    LinePlot {
        title: title.into(),
        x_label: "t".into(),
        y_label: "average reward".into(),
        series,
    }
}

fn gap_plot(gaps: &[(String, GapReport)], stride: usize) -> LinePlot {
    let series = gaps
        .iter()
        .map(|(label, g)| {
            let rows = sampled_rows(g.times.len(), stride);
            Series {
                name: label.clone(),
                xs: rows.iter().map(|&k| g.times[k]).collect(),
                ys: rows.iter().map(|&k| g.gap[k]).collect(),
            }
        })
        .collect();
    LinePlot {
        title: "cumulative reward gap".into(),
        x_label: "t".into(),
        y_label: "gap".into(),
        series,
    }
}

/// Long format: `phi,gain,j,t1_cos_phi`.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("phi,gain,j,t1_cos_phi\n");
    for (i, phi) in sweep.phis.iter().enumerate() {
        for (k, a) in sweep.gains.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                num(*phi),
                num(*a),
                num(sweep.j[i][k]),
                num(sweep.t1[k] * phi.cos())
            ));
        }
    }
    out
}

fn sweep_plot(sweep: &SweepResult) -> LinePlot {
    let series = sweep
        .gains
        .iter()
        .enumerate()
        .map(|(k, a)| Series {
            name: format!("a = {a:.3}"),
            xs: sweep.phis.clone(),
            ys: sweep.j.iter().map(|row| row[k]).collect(),
        })
        .collect();
    LinePlot {
        title: "asymptotic average reward".into(),
        x_label: "phase lag".into(),
        y_label: "J".into(),
        series,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs the scenario and writes the requested files into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, mode: Mode, out_dir: &Path) -> Result<ScenarioSummary> {
    let run = execute(config, mode)?;
    let config = effective(config, mode)?;
    let o = &config.outputs;
    let mut files = Vec::new();

    if o.trajectory {
        files.push(write_file(&out_dir.join("trajectory.csv"), &trajectory_csv(&run.runs, config.stride))?);
    }
    if o.gaps {
        files.push(write_file(&out_dir.join("gaps.csv"), &gap_csv(&run.gaps, config.stride))?);
    }
    if o.regret {
        let reports: serde_json::Map<String, serde_json::Value> = run
            .regrets
            .iter()
            .map(|(name, r)| (name.clone(), serde_json::to_value(r).expect("serializable")))
            .collect();
        files.push(write_file(&out_dir.join("regret.json"), &to_json(&reports))?);
    }
    if o.plot && !run.runs.is_empty() {
        let plot = average_plot(&run.runs, config.stride, "running average reward");
        files.push(write_file(&out_dir.join("avg_reward.svg"), &plot.to_svg())?);
        if !run.gaps.is_empty() {
            files.push(write_file(&out_dir.join("gaps.svg"), &gap_plot(&run.gaps, config.stride).to_svg())?);
        }
    }
    if let Some(sweep) = &run.sweep {
        files.push(write_file(&out_dir.join("freq_sweep.csv"), &sweep_csv(sweep))?);
        if o.plot || mode == Mode::SweepFreq {
            files.push(write_file(&out_dir.join("freq_sweep.svg"), &sweep_plot(sweep).to_svg())?);
        }
    }

    let files = files
        .into_iter()
        .map(|p| p.strip_prefix(out_dir).map(Path::to_path_buf).unwrap_or(p))
        .collect();
    Ok(ScenarioSummary {
        files,
        models: run
            .runs
            .iter()
            .map(|(name, t)| ModelSummary {
                name: name.clone(),
                final_average: t.final_average(),
                final_cumulative: t.final_cumulative(),
            })
            .collect(),
        gaps: run
            .gaps
            .iter()
            .map(|(label, g)| GapSummary {
                label: label.clone(),
                min_gap: g.min_gap,
                argmin_time: g.argmin_time,
                min_scaled_gap: g.min_scaled_gap,
                final_gap: *g.gap.last().unwrap_or(&0.0),
                verdict: g.verdict,
            })
            .collect(),
        factorization_residual: run.sweep.as_ref().map(|s| s.factorization_residual),
    })
}
