//! Box-constrained trust-region least squares with a Levenberg-Marquardt
//! Hessian model and an ℓ∞ trust region.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objective::{Jacobian, ResidualModel};
use crate::spectral::{FractionalTriple, ParameterBox};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Shift added to JᵀJ when λ = 0.
pub const HESSIAN_FLOOR: f64 = 1e-12;
/// Radius below which no further progress is possible in double precision.
pub const MIN_RADIUS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionConfig {
    pub r0: f64,
    pub r_max: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            r0: 0.5,
            r_max: 1.0,
            eta: 0.125,
            max_iters: 100,
            grad_tol: 1e-8,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let range = |field: &str, msg: String| Error::Range {
            field: field.into(),
            msg,
        };
        if !(self.r0 > 0.0) {
            return Err(range("r0", format!("must be > 0, got {}", self.r0)));
        }
        if !(self.r_max >= self.r0) || !self.r_max.is_finite() {
            return Err(range("r_max", format!("must be finite and >= r0, got {}", self.r_max)));
        }
        if !(0.0..0.25).contains(&self.eta) {
            return Err(range("eta", format!("must lie in [0, 0.25), got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(range("max_iters", "must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(range("grad_tol", format!("must be > 0, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn mat_vec(b: &Mat3, p: &Vec3) -> Vec3 {
    [dot(&b[0], p), dot(&b[1], p), dot(&b[2], p)]
}

/// mₖ(p) = F + g·p + ½ pᵀBp.
pub fn model_value(f: f64, g: &Vec3, b: &Mat3, p: &Vec3) -> f64 {
    f + dot(g, p) + 0.5 * dot(p, &mat_vec(b, p))
}

/// Gradient g = Jᵀr + λa and Hessian model B = JᵀJ + λI.
pub fn normal_equations(r: &[f64], jac: &Jacobian, a: &FractionalTriple, lambda: f64) -> (Vec3, Mat3) {
    let av = a.to_array();
    let mut g = [0.0; 3];
    let mut b = [[0.0; 3]; 3];
    for (ri, row) in r.iter().zip(jac) {
        for i in 0..3 {
            g[i] += row[i] * ri;
            for j in 0..3 {
                b[i][j] += row[i] * row[j];
            }
        }
    }
    let shift = if lambda > 0.0 { lambda } else { HESSIAN_FLOOR };
    for i in 0..3 {
        g[i] += lambda * av[i];
        b[i][i] += shift;
    }
    (g, b)
}

/// Solve B_ff x = rhs on the index set `free` by Cholesky.
fn solve_reduced(b: &Mat3, rhs: &Vec3, free: &[usize]) -> Result<Vec3> {
    let k = free.len();
    let mut l = [[0.0; 3]; 3];
    for i in 0..k {
        for j in 0..=i {
            let mut s = b[free[i]][free[j]];
            for q in 0..j {
                s -= l[i][q] * l[j][q];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::SingularSubproblem);
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0; 3];
    for i in 0..k {
        let mut s = rhs[free[i]];
        for q in 0..i {
            s -= l[i][q] * y[q];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..k).rev() {
        let mut s = y[i];
        for q in i + 1..k {
            s -= l[q][i] * x[q];
        }
        x[i] = s / l[i][i];
    }
    let mut out = [0.0; 3];
    for (i, &idx) in free.iter().enumerate() {
        out[idx] = x[i];
    }
    Ok(out)
}

/// Minimize g·p + ½pᵀBp with the coordinates outside `free` held at `p`.
fn minimize_on_face(g: &Vec3, b: &Mat3, p: &Vec3, free: &[usize]) -> Result<Vec3> {
    let mut rhs = [0.0; 3];
    for &i in free {
        rhs[i] = -g[i];
        for j in 0..3 {
            if !free.contains(&j) {
                rhs[i] -= b[i][j] * p[j];
            }
        }
    }
    let x = solve_reduced(b, &rhs, free)?;
    let mut out = *p;
    for &i in free {
        out[i] = x[i];
    }
    Ok(out)
}

/// Projection procedure: take the unconstrained minimizer, clamp every
/// violating component to its bound, re-minimize over the rest, and repeat.
/// The bounds must contain 0.
pub fn project_subproblem(g: &Vec3, b: &Mat3, lo: &Vec3, hi: &Vec3) -> Result<Vec3> {
    let mut p = [0.0; 3];
    let mut free: Vec<usize> = (0..3).collect();
    while !free.is_empty() {
        p = minimize_on_face(g, b, &p, &free)?;
        let violating: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&i| p[i] < lo[i] || p[i] > hi[i])
            .collect();
        if violating.is_empty() {
            break;
        }
        for &i in &violating {
            p[i] = p[i].clamp(lo[i], hi[i]);
        }
        free.retain(|i| !violating.contains(i));
    }
    Ok(p)
}

/// KKT test for the box-constrained quadratic at `p`.
fn is_box_kkt(g: &Vec3, b: &Mat3, lo: &Vec3, hi: &Vec3, p: &Vec3) -> bool {
    let grad = {
        let bp = mat_vec(b, p);
        [g[0] + bp[0], g[1] + bp[1], g[2] + bp[2]]
    };
    let scale = 1e-12 * (1.0 + g.iter().chain(b.iter().flatten()).fold(0.0_f64, |m, v| m.max(v.abs())));
    (0..3).all(|i| {
        let at_lo = p[i] <= lo[i];
        let at_hi = p[i] >= hi[i];
        if at_lo && at_hi {
            true
        } else if at_lo {
            grad[i] >= -scale
        } else if at_hi {
            grad[i] <= scale
        } else {
            grad[i].abs() <= scale
        }
    })
}

/// Exact minimizer by enumerating the 27 faces of the box.
fn enumerate_faces(g: &Vec3, b: &Mat3, lo: &Vec3, hi: &Vec3) -> Result<Vec3> {
    let mut best = [0.0; 3];
    let mut best_val = 0.0;
    for code in 0..27 {
        // digit 0 = free, 1 = at lo, 2 = at hi
        let digits = [code % 3, (code / 3) % 3, code / 9];
        let mut p = [0.0; 3];
        let mut free = Vec::with_capacity(3);
        for i in 0..3 {
            match digits[i] {
                0 => free.push(i),
                1 => p[i] = lo[i],
                _ => p[i] = hi[i],
            }
        }
        let p = if free.is_empty() { p } else { minimize_on_face(g, b, &p, &free)? };
        if (0..3).any(|i| p[i] < lo[i] || p[i] > hi[i]) {
            continue;
        }
        let val = model_value(0.0, g, b, &p);
        if val < best_val {
            best_val = val;
            best = p;
        }
    }
    Ok(best)
}

/// Subproblem step: the projection procedure, replaced by the exact
/// face-enumeration minimizer whenever the projected point fails the KKT
/// conditions. The result is feasible and satisfies mₖ(p) ≤ mₖ(0).
pub fn solve_subproblem(g: &Vec3, b: &Mat3, lo: &Vec3, hi: &Vec3) -> Result<Vec3> {
    if (0..3).any(|i| !(lo[i] <= 0.0 && hi[i] >= 0.0)) {
        return Err(Error::Domain(format!(
            "subproblem bounds must contain 0, got lo={lo:?} hi={hi:?}"
        )));
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok([0.0; 3]);
    }
    let p = project_subproblem(g, b, lo, hi)?;
    if is_box_kkt(g, b, lo, hi, &p) && model_value(0.0, g, b, &p) <= 0.0 {
        return Ok(p);
    }
    enumerate_faces(g, b, lo, hi)
}

/// Three-way radius rule; returns (new radius, accepted).
pub fn update_radius(config: &TrustRegionConfig, radius: f64, rho: f64, step_inf: f64) -> (f64, bool) {
    let new_radius = if rho < 0.25 {
        radius / 4.0
    } else if rho > 0.75 && step_inf >= radius * (1.0 - 1e-12) {
        (2.0 * radius).min(config.r_max)
    } else {
        radius
    };
    (new_radius, rho > config.eta)
}

/// ‖P_Γ(a - ∇F) - a‖₂.
pub fn projected_gradient_norm(bounds: &ParameterBox, a: &FractionalTriple, g: &Vec3) -> f64 {
    let av = a.to_array();
    bounds
        .intervals()
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let d = iv.clamp(av[i] - g[i]) - av[i];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient below `grad_tol`.
    GradientTolerance,
    IterationCap,
    /// Radius shrank below [`MIN_RADIUS`] without meeting the gradient test.
    RadiusCollapse,
}

impl Termination {
    pub fn converged(self) -> bool {
        self == Termination::GradientTolerance
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::IterationCap => "iteration_cap",
            Termination::RadiusCollapse => "radius_collapse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gradient_tolerance" => Some(Termination::GradientTolerance),
            "iteration_cap" => Some(Termination::IterationCap),
            "radius_collapse" => Some(Termination::RadiusCollapse),
            _ => None,
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One solver iteration as logged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// F(aₖ) and I(aₖ) at the start of the iteration.
    pub objective: f64,
    pub discrepancy: f64,
    pub grad_norm: f64,
    pub radius: f64,
    pub rho: f64,
    pub a: FractionalTriple,
    pub step: Vec3,
    pub accepted: bool,
    pub next_radius: f64,
}

/// Mutable loop state of one run.
#[derive(Debug, Clone)]
pub struct TrustRegionState {
    pub a: FractionalTriple,
    pub radius: f64,
    pub objective: f64,
    residual: Vec<f64>,
    jacobian: Jacobian,
    pub history: Vec<IterationRecord>,
}

impl TrustRegionState {
    pub fn new(model: &ResidualModel, a0: FractionalTriple, config: &TrustRegionConfig) -> Result<Self> {
        config.validate()?;
        a0.validate()?;
        if !model.bounds.contains(&a0) {
            return Err(Error::Domain(format!("start {a0} lies outside the parameter box")));
        }
        let (residual, jacobian) = model.residual_and_jacobian(&a0)?;
        let objective = half_norm_sq(&residual) + model.penalty(&a0);
        Ok(Self {
            a: a0,
            radius: config.r0,
            objective,
            residual,
            jacobian,
            history: Vec::new(),
        })
    }

    pub fn gradient_and_hessian(&self, model: &ResidualModel) -> (Vec3, Mat3) {
        normal_equations(&self.residual, &self.jacobian, &self.a, model.lambda)
    }

    pub fn discrepancy(&self) -> f64 {
        half_norm_sq(&self.residual)
    }
}

fn half_norm_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// One trust-region iteration: solve the subproblem, evaluate ρ, update the
/// radius and (if accepted) the iterate.
pub fn step(model: &ResidualModel, state: &mut TrustRegionState, config: &TrustRegionConfig) -> Result<IterationRecord> {
    let (g, b) = state.gradient_and_hessian(model);
    let grad_norm = projected_gradient_norm(&model.bounds, &state.a, &g);
    let av = state.a.to_array();
    let iv = model.bounds.intervals();
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for i in 0..3 {
        lo[i] = (-state.radius).max(iv[i].lo - av[i]).min(0.0);
        hi[i] = state.radius.min(iv[i].hi - av[i]).max(0.0);
    }
    let p = solve_subproblem(&g, &b, &lo, &hi)?;
    let predicted = -model_value(0.0, &g, &b, &p);
    let trial = model.bounds.project(FractionalTriple::from_array([
        av[0] + p[0],
        av[1] + p[1],
        av[2] + p[2],
    ]));
    // a non-positive predicted decrease counts as a failed step
    let (rho, trial_objective) = if predicted > 0.0 {
        let f_trial = model.objective(&trial)?;
        ((state.objective - f_trial) / predicted, f_trial)
    } else {
        (0.0, state.objective)
    };
    let step_inf = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let (next_radius, accepted) = update_radius(config, state.radius, rho, step_inf);
    let record = IterationRecord {
        iter: state.history.len(),
        objective: state.objective,
        discrepancy: state.discrepancy(),
        grad_norm,
        radius: state.radius,
        rho,
        a: state.a,
        step: p,
        accepted,
        next_radius,
    };
    state.history.push(record);
    state.radius = next_radius;
    if accepted {
        let (residual, jacobian) = model.residual_and_jacobian(&trial)?;
        state.a = trial;
        state.objective = trial_objective;
        state.residual = residual;
        state.jacobian = jacobian;
    }
    Ok(record)
}

/// Outcome of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Final iterate with α ≤ γ.
    pub a_final: FractionalTriple,
    pub i_final: f64,
    pub f_final: f64,
    pub lambda: f64,
    pub grad_norm: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub accepted: usize,
    pub history: Vec<IterationRecord>,
    pub wall_time: f64,
}

impl EstimateReport {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

/// Run the trust-region loop from `a0` until the projected-gradient test, the
/// iteration cap, or radius collapse.
pub fn estimate(model: &ResidualModel, a0: FractionalTriple, config: &TrustRegionConfig) -> Result<EstimateReport> {
    let started = Instant::now();
    let mut state = TrustRegionState::new(model, a0, config)?;
    let (termination, grad_norm) = loop {
        let (g, _) = state.gradient_and_hessian(model);
        let grad_norm = projected_gradient_norm(&model.bounds, &state.a, &g);
        if grad_norm <= config.grad_tol {
            break (Termination::GradientTolerance, grad_norm);
        }
        if state.history.len() >= config.max_iters {
            break (Termination::IterationCap, grad_norm);
        }
        if state.radius < MIN_RADIUS {
            break (Termination::RadiusCollapse, grad_norm);
        }
        step(model, &mut state, config)?;
    };
    let a_final = state.a.canonical();
    let i_final = model.discrepancy(&a_final)?;
    Ok(EstimateReport {
        a_final,
        i_final,
        f_final: i_final + model.penalty(&a_final),
        lambda: model.lambda,
        grad_norm,
        termination,
        iterations: state.history.len(),
        accepted: state.history.iter().filter(|r| r.accepted).count(),
        history: state.history,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// `count` starts drawn uniformly over the box from a ChaCha8 stream.
pub fn random_starts(bounds: &ParameterBox, count: usize, seed: u64) -> Vec<FractionalTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let iv = bounds.intervals();
    (0..count)
        .map(|_| {
            let mut v = [0.0; 3];
            for i in 0..3 {
                v[i] = iv[i].lo + rng.gen::<f64>() * iv[i].width();
            }
            FractionalTriple::from_array(v)
        })
        .collect()
}

/// Independent runs from each start, reported in start order.
pub fn estimate_multistart(
    model: &ResidualModel,
    starts: &[FractionalTriple],
    config: &TrustRegionConfig,
) -> Result<Vec<EstimateReport>> {
    starts
        .par_iter()
        .map(|a0| estimate(model, *a0, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn model_value_basics() {
        let g = [0.3, -0.2, 0.1];
        assert_eq!(model_value(2.0, &g, &IDENTITY, &[0.0; 3]), 2.0);
        assert_eq!(model_value(2.0, &[0.0; 3], &IDENTITY, &[1.0, 0.0, 0.0]), 2.5);
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        let p = solve_subproblem(&[0.0; 3], &IDENTITY, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(p, [0.0; 3]);
    }

    #[test]
    fn clipped_newton_step() {
        let p = solve_subproblem(&[-2.0, 0.0, 0.0], &IDENTITY, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(p, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_active_constraint_matches_kkt() {
        let b = [[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]];
        let g = [-4.0, 0.3, -0.1];
        let p = solve_subproblem(&g, &b, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(p[0], 1.0);
        // reduced system for components 1, 2 with p0 = 1
        let rhs = [-0.3 - 0.5, 0.1];
        let det = 1.0 * 3.0 - 0.2 * 0.2;
        let x1 = (rhs[0] * 3.0 - 0.2 * rhs[1]) / det;
        let x2 = (1.0 * rhs[1] - 0.2 * rhs[0]) / det;
        assert!((p[1] - x1).abs() < 1e-10 && (p[2] - x2).abs() < 1e-10, "{p:?}");
    }

    #[test]
    fn radius_rules() {
        let c = TrustRegionConfig::default();
        assert_eq!(update_radius(&c, 0.4, 0.1, 0.4), (0.1, false));
        assert_eq!(update_radius(&c, 0.4, 0.9, 0.1), (0.4, true));
        assert_eq!(update_radius(&c, 0.4, 0.9, 0.4), (0.8, true));
        assert_eq!(update_radius(&c, 0.8, 0.9, 0.8), (1.0, true));
        assert_eq!(update_radius(&c, 0.4, 0.5, 0.4), (0.4, true));
        assert_eq!(update_radius(&c, 0.4, 0.2, 0.4), (0.1, true));
    }

    #[test]
    fn config_validation() {
        assert!(TrustRegionConfig::default().validate().is_ok());
        let bad = TrustRegionConfig { eta: 0.25, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrustRegionConfig { r0: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn projected_gradient_respects_bounds() {
        let bounds = ParameterBox::default();
        let a = FractionalTriple::new(0.99, 1.0, 1.0).unwrap();
        // gradient pushing beta further up is blocked
        assert_eq!(projected_gradient_norm(&bounds, &a, &[-1.0, 0.0, 0.0]), 0.0);
        assert!(projected_gradient_norm(&bounds, &a, &[1.0, 0.0, 0.0]) > 0.9);
    }

    #[test]
    fn random_starts_are_inside_and_seeded() {
        let bounds = ParameterBox::default();
        let s = random_starts(&bounds, 24, 3);
        assert_eq!(s, random_starts(&bounds, 24, 3));
        assert!(s.iter().all(|a| bounds.contains(a)));
    }
}
