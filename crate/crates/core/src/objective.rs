//! Observation sets, the trapezoid-discretized discrepancy I(a), the Tikhonov
//! objective F(a) = ½‖r(a)‖² + (λ/2)‖a‖², and Jacobians of the weighted
//! residual r(a).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mittag_leffler::e_beta_deriv;
use crate::spectral::{mu, trace_at_center, FractionalTriple, ParameterBox, SpectralExpansion};

/// Forward-difference step used for every component unless overridden.
pub const DEFAULT_FD_STEP: f64 = 1e-7;
pub const DEFAULT_NODES: usize = 200;
pub const DEFAULT_HORIZON: f64 = 1.0;

/// Trapezoid weights on an arbitrary increasing node list.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = 0.5 * (times[i + 1] - times[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Uniform nodes tᵢ = iT/m, i = 1..=m.
pub fn uniform_times(nodes: usize, horizon: f64) -> Vec<f64> {
    (1..=nodes)
        .map(|i| i as f64 * horizon / nodes as f64)
        .collect()
}

/// Observation data φ(tᵢ) with its quadrature weights and noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    times: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    /// δ.
    pub noise_level: f64,
    pub seed: u64,
    /// ‖u(a*)‖ over the nodes, the denominator of the noise scale.
    pub signal_norm: f64,
}

impl ObservationSet {
    /// Data at user-supplied nodes; weights are recomputed as trapezoid
    /// weights.
    pub fn from_values(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Domain("need at least two observation nodes".into()));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "observation times must be strictly increasing and positive".into(),
            ));
        }
        let weights = trapezoid_weights(&times);
        let signal_norm = weights
            .iter()
            .zip(&values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            times,
            weights,
            values,
            noise_level: 0.0,
            seed: 0,
            signal_norm,
        })
    }

    /// Data with explicit quadrature weights, as read back from a file.
    pub fn from_parts(times: Vec<f64>, weights: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if weights.len() != times.len() {
            return Err(Error::Domain(format!(
                "{} times but {} weights",
                times.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let mut obs = Self::from_values(times, values)?;
        obs.signal_norm = weights
            .iter()
            .zip(&obs.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt();
        obs.weights = weights;
        Ok(obs)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("at least two nodes")
    }
}

/// Synthetic observations φ(tᵢ) = u(a*)(tᵢ, 0) + (δ/‖u(a*)‖) ξᵢ with
/// ξᵢ ~ U(-1, 1) i.i.d.
///
/// The noise stream is ChaCha8 seeded from `seed`; ξᵢ = 2Uᵢ - 1 with Uᵢ the
/// generator's i-th f64 sample on [0, 1).
pub fn make_observations(
    exp: &SpectralExpansion,
    a_star: &FractionalTriple,
    nodes: usize,
    horizon: f64,
    delta: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if nodes < 2 {
        return Err(Error::Domain("need at least two observation nodes".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("noise level must be >= 0, got {delta}")));
    }
    let times = uniform_times(nodes, horizon);
    let clean = trace_at_center(exp, a_star, &times)?;
    let mut obs = ObservationSet::from_values(times, clean)?;
    obs.noise_level = delta;
    obs.seed = seed;
    if delta > 0.0 {
        if obs.signal_norm == 0.0 {
            return Err(Error::DegenerateSignal(delta));
        }
        let scale = delta / obs.signal_norm;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in obs.values.iter_mut() {
            let xi = 2.0 * rng.gen::<f64>() - 1.0;
            *v += scale * xi;
        }
    }
    Ok(obs)
}

/// Dense m×3 Jacobian stored by rows, columns ordered (β, α, γ).
pub type Jacobian = Vec<[f64; 3]>;

/// The semi-discretized least-squares problem for one data set.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    pub observations: ObservationSet,
    pub expansion: SpectralExpansion,
    pub bounds: ParameterBox,
    pub lambda: f64,
    pub fd_steps: [f64; 3],
    sqrt_weights: Vec<f64>,
}

impl ResidualModel {
    pub fn new(
        observations: ObservationSet,
        expansion: SpectralExpansion,
        bounds: ParameterBox,
        lambda: f64,
    ) -> Result<Self> {
        Self::with_steps(observations, expansion, bounds, lambda, [DEFAULT_FD_STEP; 3])
    }

    pub fn with_steps(
        observations: ObservationSet,
        expansion: SpectralExpansion,
        bounds: ParameterBox,
        lambda: f64,
        fd_steps: [f64; 3],
    ) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Range {
                field: "lambda".into(),
                msg: format!("must be >= 0, got {lambda}"),
            });
        }
        if fd_steps.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Range {
                field: "fd_steps".into(),
                msg: format!("all steps must be > 0, got {fd_steps:?}"),
            });
        }
        bounds.validate()?;
        let sqrt_weights = observations.weights().iter().map(|w| w.sqrt()).collect();
        Ok(Self {
            observations,
            expansion,
            bounds,
            lambda,
            fd_steps,
            sqrt_weights,
        })
    }

    /// Same data and discretization with a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut m = self.clone();
        if !(lambda >= 0.0) {
            return Err(Error::Range {
                field: "lambda".into(),
                msg: format!("must be >= 0, got {lambda}"),
            });
        }
        m.lambda = lambda;
        Ok(m)
    }

    /// Model output u(a)(tᵢ, 0) at the observation nodes.
    pub fn trace(&self, a: &FractionalTriple) -> Result<Vec<f64>> {
        a.validate()?;
        trace_at_center(&self.expansion, a, self.observations.times())
    }

    /// rᵢ(a) = √wᵢ [u(a)(tᵢ,0) - φ(tᵢ)].
    pub fn residual_vector(&self, a: &FractionalTriple) -> Result<Vec<f64>> {
        let u = self.trace(a)?;
        Ok(self.weighted_residual(&u))
    }

    fn weighted_residual(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.observations.values())
            .zip(&self.sqrt_weights)
            .map(|((u, phi), sw)| sw * (u - phi))
            .collect()
    }

    /// I(a) ≈ ½ Σ wᵢ [u(a)(tᵢ,0) - φ(tᵢ)]².
    pub fn discrepancy(&self, a: &FractionalTriple) -> Result<f64> {
        let u = self.trace(a)?;
        Ok(self.discrepancy_from_trace(&u))
    }

    pub fn discrepancy_from_trace(&self, u: &[f64]) -> f64 {
        0.5 * u
            .iter()
            .zip(self.observations.values())
            .zip(self.observations.weights())
            .map(|((u, phi), w)| w * (u - phi) * (u - phi))
            .sum::<f64>()
    }

    /// F(a) = I(a) + (λ/2)‖a‖².
    pub fn objective(&self, a: &FractionalTriple) -> Result<f64> {
        Ok(self.discrepancy(a)? + self.penalty(a))
    }

    pub fn penalty(&self, a: &FractionalTriple) -> f64 {
        0.5 * self.lambda * a.norm_sq()
    }

    /// Forward-difference Jacobian of r at `a`.
    pub fn jacobian_fd(&self, a: &FractionalTriple) -> Result<Jacobian> {
        Ok(self.residual_and_jacobian(a)?.1)
    }

    /// r(a) together with its forward-difference Jacobian; the four traces
    /// are evaluated concurrently.
    pub fn residual_and_jacobian(&self, a: &FractionalTriple) -> Result<(Vec<f64>, Jacobian)> {
        a.validate()?;
        let base = a.to_array();
        let names = ["beta", "alpha", "gamma"];
        let tops = [1.0, 2.0, 2.0];
        let mut points = vec![*a];
        for j in 0..3 {
            let mut p = base;
            p[j] += self.fd_steps[j];
            if p[j] >= tops[j] {
                return Err(Error::StepOutOfDomain { component: names[j] });
            }
            points.push(FractionalTriple::from_array(p));
        }
        let traces = points
            .par_iter()
            .map(|p| trace_at_center(&self.expansion, p, self.observations.times()))
            .collect::<Result<Vec<_>>>()?;
        let r0 = self.weighted_residual(&traces[0]);
        let jac = (0..r0.len())
            .map(|i| {
                let mut row = [0.0; 3];
                for j in 0..3 {
                    // φ cancels in the difference
                    row[j] = self.sqrt_weights[i] * (traces[j + 1][i] - traces[0][i]) / self.fd_steps[j];
                }
                row
            })
            .collect();
        Ok((r0, jac))
    }

    /// Analytic ∂r/∂α and ∂r/∂γ columns:
    /// ∂α rᵢ = -√wᵢ tᵢᵝ Σ_{odd n} (nπ/2)^α ln(nπ/2) E'_β(-μₙtᵢᵝ) cₙ ψₙ(0).
    pub fn jacobian_analytic_space(&self, a: &FractionalTriple) -> Result<Vec<[f64; 2]>> {
        a.validate()?;
        let modes: Vec<(f64, f64, f64)> = self
            .expansion
            .center_modes()
            .map(|(n, weight)| {
                let root = n as f64 * std::f64::consts::PI / 2.0;
                (mu(n, a), root, weight)
            })
            .collect();
        self.observations
            .times()
            .par_iter()
            .zip(self.sqrt_weights.par_iter())
            .map(|(&t, &sw)| {
                let tb = t.powf(a.beta);
                let mut d_alpha = 0.0;
                let mut d_gamma = 0.0;
                for &(mu_n, root, weight) in &modes {
                    let dml = e_beta_deriv(a.beta, -mu_n * tb)? * weight;
                    let ln_root = root.ln();
                    d_alpha += root.powf(a.alpha) * ln_root * dml;
                    d_gamma += root.powf(a.gamma) * ln_root * dml;
                }
                Ok([-sw * tb * d_alpha, -sw * tb * d_gamma])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> SpectralExpansion {
        SpectralExpansion::from_coefficients(&[(1, 1.0), (5, 0.5)]).unwrap()
    }

    fn a_star() -> FractionalTriple {
        FractionalTriple::new(0.4, 0.6, 1.2).unwrap()
    }

    #[test]
    fn trapezoid_weights_three_nodes() {
        let t = uniform_times(3, 1.0);
        let w = trapezoid_weights(&t);
        let h = 1.0 / 3.0;
        assert!((w[0] - h / 2.0).abs() < 1e-16);
        assert!((w[1] - h).abs() < 1e-16);
        assert!((w[2] - h / 2.0).abs() < 1e-16);
    }

    #[test]
    fn noiseless_data_is_the_clean_trace() {
        let exp = example1();
        let obs = make_observations(&exp, &a_star(), 50, 1.0, 0.0, 99).unwrap();
        let clean = trace_at_center(&exp, &a_star(), obs.times()).unwrap();
        assert_eq!(obs.values(), clean.as_slice());
    }

    #[test]
    fn noise_is_bounded_and_reproducible() {
        let exp = example1();
        let obs = make_observations(&exp, &a_star(), 50, 1.0, 0.5, 7).unwrap();
        let again = make_observations(&exp, &a_star(), 50, 1.0, 0.5, 7).unwrap();
        let other = make_observations(&exp, &a_star(), 50, 1.0, 0.5, 8).unwrap();
        assert_eq!(obs, again);
        assert_ne!(obs.values(), other.values());
        let clean = trace_at_center(&exp, &a_star(), obs.times()).unwrap();
        let bound = 0.5 / obs.signal_norm;
        for (v, c) in obs.values().iter().zip(&clean) {
            assert!((v - c).abs() < bound);
        }
    }

    #[test]
    fn degenerate_signal_is_rejected() {
        let exp = SpectralExpansion::from_coefficients(&[(2, 1.0)]).unwrap();
        assert!(matches!(
            make_observations(&exp, &a_star(), 10, 1.0, 0.1, 0),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn two_node_discrepancy_by_hand() {
        let obs = ObservationSet::from_values(vec![0.5, 1.0], vec![0.3, 0.2]).unwrap();
        let exp = example1();
        let model = ResidualModel::new(obs, exp.clone(), ParameterBox::default(), 0.0).unwrap();
        let a = a_star();
        let u = trace_at_center(&exp, &a, &[0.5, 1.0]).unwrap();
        let (r1, r2) = (u[0] - 0.3, u[1] - 0.2);
        let expected = 0.5 * (0.25 * r1 * r1 + 0.25 * r2 * r2);
        assert!((model.discrepancy(&a).unwrap() - expected).abs() < 1e-16);
    }

    #[test]
    fn objective_adds_penalty() {
        let exp = example1();
        let obs = make_observations(&exp, &a_star(), 20, 1.0, 0.0, 0).unwrap();
        let model = ResidualModel::new(obs, exp, ParameterBox::default(), 1e-7).unwrap();
        let f = model.objective(&a_star()).unwrap();
        assert!((f - 9.8e-8).abs() < 1e-20, "{f}");
        assert!(model.discrepancy(&a_star()).unwrap() <= 1e-20);
        let r = model.residual_vector(&a_star()).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_expansion_has_zero_jacobian() {
        let exp = SpectralExpansion::from_coefficients(&[]).unwrap();
        let obs = ObservationSet::from_values(vec![0.5, 1.0], vec![0.0, 0.0]).unwrap();
        let model = ResidualModel::new(obs, exp, ParameterBox::default(), 0.0).unwrap();
        let j = model.jacobian_fd(&a_star()).unwrap();
        assert!(j.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn fd_step_leaving_domain_is_an_error() {
        let exp = example1();
        let obs = make_observations(&exp, &a_star(), 10, 1.0, 0.0, 0).unwrap();
        let model = ResidualModel::with_steps(obs, exp, ParameterBox::default(), 0.0, [1e-7, 1e-7, 0.5])
            .unwrap();
        let a = FractionalTriple::new(0.4, 0.6, 1.7).unwrap();
        assert!(matches!(
            model.jacobian_fd(&a),
            Err(Error::StepOutOfDomain { component: "gamma" })
        ));
    }

    #[test]
    fn single_mode_analytic_column() {
        let exp = SpectralExpansion::from_coefficients(&[(1, 1.0)]).unwrap();
        let obs = ObservationSet::from_values(vec![0.5, 1.0], vec![0.0, 0.0]).unwrap();
        let model = ResidualModel::new(obs, exp, ParameterBox::default(), 0.0).unwrap();
        let a = a_star();
        let cols = model.jacobian_analytic_space(&a).unwrap();
        let root = std::f64::consts::FRAC_PI_2;
        for (i, &t) in [0.5_f64, 1.0].iter().enumerate() {
            let tb = t.powf(0.4);
            let expected = -tb * root.powf(0.6) * root.ln() * e_beta_deriv(0.4, -mu(1, &a) * tb).unwrap() * 0.5;
            assert!((cols[i][0] - expected).abs() < 1e-16);
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        let obs = ObservationSet::from_values(vec![0.5, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(ResidualModel::new(obs, example1(), ParameterBox::default(), -1.0).is_err());
    }
}
