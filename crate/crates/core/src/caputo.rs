//! Numerical check of the Caputo eigen-relation ∂ₜᵝq = -μq for
//! q(t) = E_β(-μtᵝ), using the L1 scheme on a graded mesh.
//!
//! The L1 scheme has an O(1) consistency error at the first few nodes for
//! solutions behaving like tᵝ near 0, independent of the mesh. The convergence
//! measure is therefore the maximum residual over nodes with
//! t ≥ `window_start`; the unrestricted maximum is reported alongside.

use crate::error::{Error, Result};
use crate::mittag_leffler::e_beta;
use crate::spectral::FractionalTriple;
use crate::special::gamma;

/// Graded mesh tⱼ = T (j/M)^{2/β}, j = 1..=M (t₀ = 0 is implicit).
pub fn graded_mesh(horizon: f64, nodes: usize, beta: f64) -> Vec<f64> {
    let grading = 2.0 / beta;
    (1..=nodes)
        .map(|j| horizon * (j as f64 / nodes as f64).powf(grading))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaputoCheck {
    /// max |D^β q + μq| over nodes with t ≥ window start.
    pub max_residual: f64,
    /// max over the whole mesh, including the initial layer.
    pub max_residual_all: f64,
    pub max_step: f64,
    /// μ h^{2-β}, the nominal size of the L1 truncation error.
    pub expected: f64,
    /// Set when `max_residual` exceeds ten times `expected`.
    pub mesh_too_coarse: bool,
}

/// L1 residual of the eigen-relation on `mesh` (strictly increasing, > 0),
/// measured on nodes t ≥ `window_fraction`·T.
pub fn caputo_check_windowed(
    a: &FractionalTriple,
    mu_val: f64,
    mesh: &[f64],
    window_fraction: f64,
) -> Result<CaputoCheck> {
    if !(mu_val >= 0.0) {
        return Err(Error::Domain(format!("eigenvalue must be >= 0, got {mu_val}")));
    }
    if mesh.is_empty() || mesh[0] <= 0.0 || mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "mesh must be strictly increasing and start above 0".into(),
        ));
    }
    let beta = a.beta;
    let horizon = *mesh.last().expect("nonempty");
    let window_start = window_fraction * horizon;

    let mut t = Vec::with_capacity(mesh.len() + 1);
    t.push(0.0);
    t.extend_from_slice(mesh);
    let q = t
        .iter()
        .map(|&s| if s == 0.0 { Ok(1.0) } else { e_beta(beta, -mu_val * s.powf(beta)) })
        .collect::<Result<Vec<f64>>>()?;
    let slopes: Vec<f64> = (1..t.len())
        .map(|j| (q[j] - q[j - 1]) / (t[j] - t[j - 1]))
        .collect();

    let scale = 1.0 / gamma(2.0 - beta);
    let exponent = 1.0 - beta;
    let mut max_residual = 0.0_f64;
    let mut max_residual_all = 0.0_f64;
    for n in 1..t.len() {
        let tn = t[n];
        let mut derivative = 0.0;
        for j in 1..=n {
            let w = (tn - t[j - 1]).powf(exponent) - (tn - t[j]).powf(exponent);
            derivative += slopes[j - 1] * w;
        }
        let residual = (derivative * scale + mu_val * q[n]).abs();
        max_residual_all = max_residual_all.max(residual);
        if tn >= window_start {
            max_residual = max_residual.max(residual);
        }
    }

    let max_step = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let expected = mu_val * max_step.powf(2.0 - beta);
    Ok(CaputoCheck {
        max_residual,
        max_residual_all,
        max_step,
        expected,
        mesh_too_coarse: max_residual > 10.0 * expected,
    })
}

/// [`caputo_check_windowed`] with the window starting at T/10.
pub fn caputo_check(a: &FractionalTriple, mu_val: f64, mesh: &[f64]) -> Result<CaputoCheck> {
    caputo_check_windowed(a, mu_val, mesh, 0.1)
}

/// Observed order log(r₁/r₂)/log(h₁/h₂) between two checks.
pub fn observed_order(coarse: &CaputoCheck, fine: &CaputoCheck) -> f64 {
    (coarse.max_residual / fine.max_residual).ln() / (coarse.max_step / fine.max_step).ln()
}
