// SPDX-License-Identifier: Apache-2.0

//! Executes one scenario and streams its outputs to disk.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anisoflow::{lift, run, Curve, JacobianMode, Params, StepRecord, StopReason};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{self, Diagnostics};
use crate::scenario;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario setup: {0}")]
    Setup(anisoflow::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("solver failure: {source} (last good curve written to {last_good})")]
    Solver {
        source: anisoflow::Error,
        last_good: PathBuf,
    },
}

impl RunError {
    /// 1 for configuration and output problems, 2 for solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Solver { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub stop: StopReason<f64>,
    pub frames: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_ratio: f64,
    pub max_newton_iters: usize,
    /// Smallest `stability_slack / (1 + |(Φ,1)^h|)` over all steps.
    pub min_relative_slack: f64,
}

impl RunSummary {
    fn to_text(&self, config: &ScenarioConfig) -> String {
        let stop = match &self.stop {
            StopReason::Completed => "completed".to_string(),
            StopReason::Extinction { length, threshold } => format!(
                "extinction (length {} below {})",
                output::num(*length),
                output::num(*threshold)
            ),
        };
        format!(
            "scenario={}\nJ={}\ndt={}\nsteps={}\nfinal_time={}\nstop={stop}\nframes={}\n\
             initial_energy={}\nfinal_energy={}\nfinal_ratio={}\nmax_newton_iters={}\nmin_relative_slack={}\n",
            config.scenario,
            config.elements,
            output::num(config.dt),
            self.steps,
            output::num(self.final_time),
            self.frames,
            output::num(self.initial_energy),
            output::num(self.final_energy),
            output::num(self.final_ratio),
            self.max_newton_iters,
            output::num(self.min_relative_slack),
        )
    }
}

/// Runs `config`, writing `config.txt`, frames, `diagnostics.csv`,
/// `final.csv` and `summary.txt` into the output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary, RunError> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let config_path = dir.join("config.txt");
    fs::write(&config_path, config.to_text()).map_err(io_err(&config_path))?;

    let sc = scenario::build(config).map_err(RunError::Setup)?;
    let mut params = Params::new(config.dt, config.final_time).map_err(RunError::Setup)?;
    params.newton_tol = config.newton_tol;
    params.newton_max_iter = config.newton_max_iter;
    params.damping = config.damping;
    params.solver = config.solver;
    params.jacobian = config.jacobian;
    if config.jacobian == JacobianMode::FdColored {
        log::info!("using finite-difference Jacobians");
    }
    let dt_over_h = config.dt / sc.initial.grid().max_width();

    let diag_path = dir.join("diagnostics.csv");
    let mut diagnostics = Diagnostics::create(&diag_path).map_err(io_err(&diag_path))?;
    let mut frames = 0;
    let mut max_iters = 0;
    let mut min_slack = f64::INFINITY;
    let mut write_error: Option<RunError> = None;
    let started = Instant::now();
    let mut observer = |r: &StepRecord<f64>, curve: &Curve| {
        if write_error.is_some() {
            return;
        }
        if let Some(rep) = &r.report {
            max_iters = max_iters.max(rep.iterations);
            min_slack = min_slack.min(rep.relative_slack());
        }
        let mut result = diagnostics.append(r, dt_over_h).map_err(io_err(&diag_path));
        if result.is_ok() && r.step.is_multiple_of(config.frames_every) {
            let path = output::frame_path(dir, r.step);
            result = output::write_frame(&path, curve).map_err(io_err(&path));
            if result.is_ok() {
                if let Some(surface) = &sc.surface {
                    let path3 = output::lifted_frame_path(dir, r.step);
                    result = output::write_lifted_frame(&path3, &lift(curve, surface.as_ref()))
                        .map_err(io_err(&path3));
                }
            }
            frames += 1;
        }
        if let Err(e) = result {
            write_error = Some(e);
        }
    };
    let outcome = run(&sc.initial, &sc.bundle, &sc.forcing, &params, &mut [&mut observer]);
    diagnostics.finish().map_err(io_err(&diag_path))?;
    if let Some(e) = write_error {
        return Err(e);
    }
    let traj = match outcome {
        Ok(t) => t,
        Err(e) => {
            let last_good = dir.join("last_good.csv");
            let curve = match &e {
                anisoflow::Error::Step { last_good, .. } => last_good.as_ref().clone(),
                _ => sc.initial.clone(),
            };
            output::write_frame(&last_good, &curve).map_err(io_err(&last_good))?;
            return Err(RunError::Solver { source: e, last_good });
        }
    };
    log::info!(
        "{}: {} steps in {:.1}s",
        config.scenario,
        traj.steps(),
        started.elapsed().as_secs_f64()
    );

    let final_path = dir.join("final.csv");
    output::write_frame(&final_path, &traj.final_curve).map_err(io_err(&final_path))?;
    let last = traj.records.last().expect("trajectory has an initial record");
    let summary = RunSummary {
        steps: traj.steps(),
        final_time: traj.final_time,
        stop: traj.stop.clone(),
        frames,
        initial_energy: traj.records[0].energy,
        final_energy: last.energy,
        final_ratio: last.ratio.unwrap_or(f64::NAN),
        max_newton_iters: max_iters,
        min_relative_slack: if min_slack.is_finite() { min_slack } else { 0.0 },
    };
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, summary.to_text(config)).map_err(io_err(&summary_path))?;
    Ok(summary)
}
