//! Tikhonov parameter sweeps, Morozov selection, and truncation studies.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{make_observations, ObservationSet, ResidualModel};
use crate::spectral::{trace_at_center, FractionalTriple, ParameterBox, SpectralExpansion};
use crate::trust_region::{estimate, EstimateReport, TrustRegionConfig};

/// λ = 2^hi, 2^(hi-1), …, 2^lo.
pub fn dyadic_grid(hi: i32, lo: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub lambda: f64,
    pub a: FractionalTriple,
    pub discrepancy: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SweepEntry {
    fn from_report(report: &EstimateReport) -> Self {
        Self {
            lambda: report.lambda,
            a: report.a_final,
            discrepancy: report.i_final,
            converged: report.converged(),
            iterations: report.iterations,
        }
    }
}

/// λ picked from a sweep; `fallback` marks a nearest-match choice when no
/// entry reaches the target discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub lambda: f64,
    pub index: usize,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub epsilon: Option<f64>,
    pub selection: Option<Selection>,
}

impl SweepResult {
    /// Apply [`morozov_select`] and store the outcome.
    pub fn select(&mut self, epsilon: f64) -> Selection {
        let s = morozov_select(self, epsilon);
        self.epsilon = Some(epsilon);
        self.selection = Some(s);
        s
    }
}

fn check_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Domain("lambda grid is empty".into()));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(
            "lambda grid must be nonnegative and strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Estimate at each λ in turn, starting each run from the previous minimizer.
pub fn sweep(
    model: &ResidualModel,
    lambdas: &[f64],
    a0: FractionalTriple,
    config: &TrustRegionConfig,
) -> Result<SweepResult> {
    check_grid(lambdas)?;
    let mut start = a0;
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let report = estimate(&model.with_lambda(lambda)?, start, config)?;
        start = report.a_final;
        entries.push(SweepEntry::from_report(&report));
    }
    Ok(SweepResult {
        entries,
        epsilon: None,
        selection: None,
    })
}

/// Every λ estimated independently from `a0`; runs execute concurrently.
pub fn sweep_cold(
    model: &ResidualModel,
    lambdas: &[f64],
    a0: FractionalTriple,
    config: &TrustRegionConfig,
) -> Result<SweepResult> {
    check_grid(lambdas)?;
    let entries = lambdas
        .par_iter()
        .map(|&lambda| {
            let report = estimate(&model.with_lambda(lambda)?, a0, config)?;
            Ok(SweepEntry::from_report(&report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        entries,
        epsilon: None,
        selection: None,
    })
}

/// Largest λ whose discrepancy is at most `epsilon`; otherwise the λ with
/// discrepancy nearest `epsilon`, flagged as a fallback.
pub fn morozov_select(result: &SweepResult, epsilon: f64) -> Selection {
    assert!(!result.entries.is_empty(), "sweep result has no entries");
    if epsilon > 0.0 {
        if let Some(index) = result.entries.iter().position(|e| e.discrepancy <= epsilon) {
            return Selection {
                lambda: result.entries[index].lambda,
                index,
                fallback: false,
            };
        }
    }
    let (index, entry) = result
        .entries
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.discrepancy - epsilon)
                .abs()
                .total_cmp(&(b.1.discrepancy - epsilon).abs())
        })
        .expect("nonempty");
    Selection {
        lambda: entry.lambda,
        index,
        fallback: true,
    }
}

/// Shared settings of a truncation study.
#[derive(Debug, Clone)]
pub struct TruncationSetup {
    pub a_star: FractionalTriple,
    pub nodes: usize,
    pub horizon: f64,
    pub delta: f64,
    pub seed: u64,
    pub lambda: f64,
    pub a0: FractionalTriple,
    pub bounds: ParameterBox,
    pub fd_steps: [f64; 3],
    pub config: TrustRegionConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRow {
    pub truncation: usize,
    pub a: FractionalTriple,
    pub discrepancy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// |u_N(a*)(tᵢ,0) - φ(tᵢ)| at each observation node.
    pub reconstruction_error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TruncationStudy {
    pub reference_truncation: usize,
    pub observations: ObservationSet,
    pub rows: Vec<TruncationRow>,
}

/// Observations from an expansion with N_ref = 4·max(levels) terms, then one
/// estimate per truncation level using the first N terms.
pub fn truncation_study<F>(f: F, coeff_tol: f64, levels: &[usize], setup: &TruncationSetup) -> Result<TruncationStudy>
where
    F: Fn(f64) -> f64 + Sync,
{
    if levels.is_empty() || levels.contains(&0) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "truncation levels must be positive and strictly increasing".into(),
        ));
    }
    let reference_truncation = 4 * levels[levels.len() - 1];
    let reference = SpectralExpansion::expand(f, reference_truncation, coeff_tol)?;
    truncation_study_from(&reference, levels, setup)
}

/// [`truncation_study`] for an already computed reference expansion.
pub fn truncation_study_from(
    reference: &SpectralExpansion,
    levels: &[usize],
    setup: &TruncationSetup,
) -> Result<TruncationStudy> {
    let observations = make_observations(
        reference,
        &setup.a_star,
        setup.nodes,
        setup.horizon,
        setup.delta,
        setup.seed,
    )?;
    let rows = levels
        .par_iter()
        .map(|&n| {
            let exp = reference.truncated(n);
            let at_star = trace_at_center(&exp, &setup.a_star, observations.times())?;
            let reconstruction_error = at_star
                .iter()
                .zip(observations.values())
                .map(|(u, phi)| (u - phi).abs())
                .collect();
            let model = ResidualModel::with_steps(observations.clone(), exp, setup.bounds, setup.lambda, setup.fd_steps)?;
            let report = estimate(&model, setup.a0, &setup.config)?;
            Ok(TruncationRow {
                truncation: n,
                a: report.a_final,
                discrepancy: report.i_final,
                converged: report.converged(),
                iterations: report.iterations,
                reconstruction_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TruncationStudy {
        reference_truncation: reference.truncation(),
        observations,
        rows,
    })
}
