//! Reproduction runs for the two built-in examples.

use std::fs;
use std::path::Path;

use crate::config::{gaussian_bump, InitialCondition, RunConfig, Truncation};
use crate::error::Result;
use crate::format::fmt_num;
use crate::io::{
    write_csv, write_observations, write_reconstruction, write_sweep, write_trace, write_truncation, RunReport,
};
use crate::objective::{make_observations, ObservationSet, ResidualModel};
use crate::spectral::trace_at_center;
use crate::sweep::{dyadic_grid, sweep, truncation_study, Selection, SweepResult, TruncationSetup, TruncationStudy};
use crate::trust_region::estimate;

pub const EXAMPLE2_LEVELS: [usize; 5] = [5, 10, 20, 40, 80];

/// Everything produced by one Example 1 run.
#[derive(Debug, Clone)]
pub struct Example1Run {
    pub observations: ObservationSet,
    pub report: RunReport,
    /// Model output u(aₖ)(tᵢ,0) for each logged iterate, then the final one.
    pub curves: Vec<Vec<f64>>,
    /// Present for noisy runs: the λ sweep and its Morozov selection.
    pub sweep: Option<(SweepResult, Selection)>,
}

impl Example1Run {
    /// report.txt, trace.csv, curves.csv, observations.csv, and sweep.csv
    /// for noisy runs.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_observations(&dir.join("observations.csv"), &self.observations)?;
        self.report.write(&dir.join("report.txt"))?;
        write_trace(&dir.join("trace.csv"), &self.report.estimate)?;
        let mut header = vec!["t".to_string(), "phi".to_string()];
        header.extend((0..self.curves.len()).map(|k| format!("u{k}")));
        let rows: Vec<Vec<String>> = (0..self.observations.len())
            .map(|i| {
                let mut row = vec![
                    fmt_num(self.observations.times()[i]),
                    fmt_num(self.observations.values()[i]),
                ];
                row.extend(self.curves.iter().map(|c| fmt_num(c[i])));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&dir.join("curves.csv"), &header, &rows)?;
        if let Some((sweep, _)) = &self.sweep {
            write_sweep(&dir.join("sweep.csv"), sweep)?;
        }
        Ok(())
    }
}

pub fn example1_config(delta: f64, seed: u64) -> RunConfig {
    RunConfig {
        initial_condition: InitialCondition::Example1,
        delta,
        seed,
        ..RunConfig::default()
    }
}

/// Example 1 with default settings.
pub fn run_example1(delta: f64, seed: u64) -> Result<Example1Run> {
    run_example1_with(&example1_config(delta, seed))
}

/// Noiseless: one estimate at the configured λ. Noisy: a dyadic λ sweep
/// 2⁰..2⁻¹², Morozov selection, and the final estimate at the selected λ.
pub fn run_example1_with(cfg: &RunConfig) -> Result<Example1Run> {
    cfg.validate()?;
    let exp = cfg.expansion()?;
    let observations = make_observations(&exp, &cfg.a_star, cfg.nodes, cfg.horizon, cfg.delta, cfg.seed)?;
    let base = ResidualModel::with_steps(observations.clone(), exp.clone(), cfg.bounds, cfg.lambda, cfg.fd_steps)?;
    let (model, sweep_part, run_cfg) = if cfg.delta > 0.0 {
        let mut result = sweep(&base, &dyadic_grid(0, -12), cfg.a0, &cfg.solver)?;
        let epsilon = match cfg.epsilon {
            Some(e) => e,
            None => base.discrepancy(&cfg.a_star)?,
        };
        let selection = result.select(epsilon);
        let run_cfg = RunConfig {
            lambda: selection.lambda,
            ..cfg.clone()
        };
        (base.with_lambda(selection.lambda)?, Some((result, selection)), run_cfg)
    } else {
        (base, None, cfg.clone())
    };
    let estimate = estimate(&model, cfg.a0, &cfg.solver)?;
    let mut curves = estimate
        .history
        .iter()
        .map(|h| trace_at_center(&exp, &h.a, observations.times()))
        .collect::<Result<Vec<_>>>()?;
    curves.push(trace_at_center(&exp, &estimate.a_final, observations.times())?);
    Ok(Example1Run {
        observations,
        report: RunReport {
            config: run_cfg,
            observations: "observations.csv".into(),
            estimate,
        },
        curves,
        sweep: sweep_part,
    })
}

pub fn example2_config() -> RunConfig {
    RunConfig {
        initial_condition: InitialCondition::Example2,
        truncation: Truncation::Auto,
        coeff_tol: 1e-8,
        ..RunConfig::default()
    }
}

/// Example 2 truncation study at the given levels with default settings.
pub fn run_example2(levels: &[usize]) -> Result<TruncationStudy> {
    run_truncation(&example2_config(), levels)
}

/// Truncation study for the configured initial condition (a quadrature
/// expansion for example2, the coefficient list otherwise).
pub fn run_truncation(cfg: &RunConfig, levels: &[usize]) -> Result<TruncationStudy> {
    cfg.validate()?;
    let setup = TruncationSetup {
        a_star: cfg.a_star,
        nodes: cfg.nodes,
        horizon: cfg.horizon,
        delta: cfg.delta,
        seed: cfg.seed,
        lambda: cfg.lambda,
        a0: cfg.a0,
        bounds: cfg.bounds,
        fd_steps: cfg.fd_steps,
        config: cfg.solver,
    };
    match cfg.initial_condition {
        InitialCondition::Example2 => truncation_study(gaussian_bump, cfg.coeff_tol, levels, &setup),
        _ => crate::sweep::truncation_study_from(&cfg.expansion()?, levels, &setup),
    }
}

pub fn write_example2_artifacts(study: &TruncationStudy, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_truncation(&dir.join("truncation.csv"), study)?;
    write_reconstruction(&dir.join("reconstruction.csv"), study)?;
    write_observations(&dir.join("observations.csv"), &study.observations)
}
