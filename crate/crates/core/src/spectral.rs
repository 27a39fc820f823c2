//! Eigenfunction-expansion solution of
//!
//! ∂ₜᵝu = -(-Δ)^{α/2}u - (-Δ)^{γ/2}u on (-1, 1), u(±1) = 0, u(0, x) = f(x).
//!
//! The Dirichlet eigenpairs of -Δ on (-1, 1) are μ̄ₙ = (nπ/2)² and
//! ψₙ(x) = sin(nπ(x+1)/2) (orthonormal in L²), and the double fractional
//! operator acts on mode n by μₙ = μ̄ₙ^{α/2} + μ̄ₙ^{γ/2}. The solution is
//! u(t, x) = Σₙ E_β(-μₙ tᵝ) ⟨f, ψₙ⟩ ψₙ(x).

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mittag_leffler::e_beta;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::special::sin_pi;

/// The parameter point a = (β, α, γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalTriple {
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl FractionalTriple {
    pub fn new(beta: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let a = Self::new_unchecked(beta, alpha, gamma);
        a.validate()?;
        Ok(a)
    }

    /// Build without range checks; used for trial points the caller has
    /// already constrained.
    pub const fn new_unchecked(beta: f64, alpha: f64, gamma: f64) -> Self {
        Self { beta, alpha, gamma }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new_unchecked(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.beta, self.alpha, self.gamma]
    }

    pub fn validate(&self) -> Result<()> {
        check_open("beta", self.beta, 0.0, 1.0)?;
        check_open("alpha", self.alpha, 0.0, 2.0)?;
        check_open("gamma", self.gamma, 0.0, 2.0)
    }

    /// Same triple with α and γ exchanged.
    pub fn swapped(self) -> Self {
        Self::new_unchecked(self.beta, self.gamma, self.alpha)
    }

    /// Reporting form with α ≤ γ. Every observable depends on (α, γ) only
    /// through μₙ, which is symmetric.
    pub fn canonical(self) -> Self {
        if self.alpha <= self.gamma {
            self
        } else {
            self.swapped()
        }
    }

    pub fn norm_sq(self) -> f64 {
        self.beta * self.beta + self.alpha * self.alpha + self.gamma * self.gamma
    }
}

impl fmt::Display for FractionalTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(beta={}, alpha={}, gamma={})",
            self.beta, self.alpha, self.gamma
        )
    }
}

fn check_open(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(Error::Range {
            field: field.to_string(),
            msg: format!("{v} not in ({lo}, {hi})"),
        })
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The admissible hyperrectangle Γ for (β, α, γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBox {
    pub beta: Interval,
    pub alpha: Interval,
    pub gamma: Interval,
}

impl Default for ParameterBox {
    fn default() -> Self {
        Self {
            beta: Interval::new(0.01, 0.99),
            alpha: Interval::new(0.01, 1.99),
            gamma: Interval::new(0.01, 1.99),
        }
    }
}

impl ParameterBox {
    pub fn new(beta: Interval, alpha: Interval, gamma: Interval) -> Result<Self> {
        let b = Self { beta, alpha, gamma };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv, top) in [
            ("beta", self.beta, 1.0),
            ("alpha", self.alpha, 2.0),
            ("gamma", self.gamma, 2.0),
        ] {
            check_open(&format!("{name}_lo"), iv.lo, 0.0, top)?;
            check_open(&format!("{name}_hi"), iv.hi, 0.0, top)?;
            if iv.lo > iv.hi {
                return Err(Error::Range {
                    field: format!("{name}_lo"),
                    msg: format!("lower bound {} exceeds upper bound {}", iv.lo, iv.hi),
                });
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> [Interval; 3] {
        [self.beta, self.alpha, self.gamma]
    }

    pub fn contains(&self, a: &FractionalTriple) -> bool {
        self.intervals()
            .iter()
            .zip(a.to_array())
            .all(|(iv, v)| iv.contains(v))
    }

    pub fn project(&self, a: FractionalTriple) -> FractionalTriple {
        let iv = self.intervals();
        let v = a.to_array();
        FractionalTriple::from_array([iv[0].clamp(v[0]), iv[1].clamp(v[1]), iv[2].clamp(v[2])])
    }
}

/// ψₙ(x) = sin(nπ(x+1)/2), exactly zero at x = ±1.
pub fn eigenfunction(n: usize, x: f64) -> f64 {
    debug_assert!(n >= 1);
    if x == -1.0 || x == 1.0 {
        return 0.0;
    }
    sin_pi(n as f64 * (x + 1.0) / 2.0)
}

/// ψₙ(0): 0 for even n, (-1)^{(n-1)/2} for odd n.
pub fn center_value(n: usize) -> f64 {
    match n % 4 {
        1 => 1.0,
        3 => -1.0,
        _ => 0.0,
    }
}

/// Helmholtz eigenvalue μ̄ₙ = (nπ/2)².
pub fn mu_bar(n: usize) -> f64 {
    let root = n as f64 * PI / 2.0;
    root * root
}

/// μₙ = (nπ/2)^α + (nπ/2)^γ.
pub fn mu(n: usize, a: &FractionalTriple) -> f64 {
    let root = n as f64 * PI / 2.0;
    root.powf(a.alpha) + root.powf(a.gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub n: usize,
    pub mu_bar: f64,
    pub coeff: f64,
}

/// Truncated expansion {(n, μ̄ₙ, cₙ)} of an initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralExpansion {
    modes: Vec<Mode>,
    truncation: usize,
    coeff_tolerance: f64,
}

/// Largest truncation picked by [`SpectralExpansion::expand_auto`].
pub const AUTO_TRUNCATION_CAP: usize = 400;
/// Tail target for [`SpectralExpansion::expand_auto`].
pub const AUTO_TAIL_TARGET: f64 = 1e-8;

impl SpectralExpansion {
    /// Finite expansion from explicit (n, cₙ) pairs. Omitted modes are exactly
    /// zero.
    pub fn from_coefficients(coeffs: &[(usize, f64)]) -> Result<Self> {
        let mut sorted = coeffs.to_vec();
        sorted.sort_by_key(|&(n, _)| n);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain(format!("duplicate mode index {}", w[0].0)));
            }
        }
        if sorted.iter().any(|&(n, _)| n == 0) {
            return Err(Error::Domain("mode indices start at 1".into()));
        }
        let truncation = sorted.last().map(|&(n, _)| n).unwrap_or(0);
        Ok(Self {
            modes: sorted
                .into_iter()
                .map(|(n, coeff)| Mode {
                    n,
                    mu_bar: mu_bar(n),
                    coeff,
                })
                .collect(),
            truncation,
            coeff_tolerance: 0.0,
        })
    }

    /// cₙ = ∫ f ψₙ dx for n = 1..=N by adaptive quadrature with absolute
    /// tolerance `tol`.
    pub fn expand<F>(f: F, truncation: usize, tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        if truncation == 0 {
            return Err(Error::Domain("truncation must be at least 1".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain("quadrature tolerance must be > 0".into()));
        }
        let coeffs = (1..=truncation)
            .map(|n| projection(&f, n, tol).map(|c| (n, c)))
            .collect::<Result<Vec<_>>>()?;
        let mut exp = Self::from_coefficients(&coeffs)?;
        exp.truncation = truncation;
        exp.coeff_tolerance = tol;
        Ok(exp)
    }

    /// Expand with N chosen from the decay of the coefficients: blocks of 10
    /// are added until the extrapolated tail Σ_{n>N}|cₙ| drops below
    /// [`AUTO_TAIL_TARGET`] or N reaches [`AUTO_TRUNCATION_CAP`].
    pub fn expand_auto<F>(f: F, tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        while coeffs.len() < AUTO_TRUNCATION_CAP {
            let start = coeffs.len() + 1;
            for n in start..start + 10 {
                coeffs.push((n, projection(&f, n, tol)?));
            }
            let scale = coeffs.iter().fold(0.0_f64, |m, &(_, c)| m.max(c.abs()));
            let tail = estimate_tail(&coeffs[coeffs.len() - 10..], 1e-13 * scale);
            if tail < AUTO_TAIL_TARGET {
                break;
            }
        }
        let truncation = coeffs.len();
        let mut exp = Self::from_coefficients(&coeffs)?;
        exp.truncation = truncation;
        exp.coeff_tolerance = tol;
        Ok(exp)
    }

    /// Copy restricted to modes n ≤ `truncation`.
    pub fn truncated(&self, truncation: usize) -> Self {
        Self {
            modes: self
                .modes
                .iter()
                .copied()
                .filter(|m| m.n <= truncation)
                .collect(),
            truncation: truncation.min(self.truncation),
            coeff_tolerance: self.coeff_tolerance,
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn coeff_tolerance(&self) -> f64 {
        self.coeff_tolerance
    }

    pub fn coeff(&self, n: usize) -> f64 {
        self.modes
            .binary_search_by_key(&n, |m| m.n)
            .map(|i| self.modes[i].coeff)
            .unwrap_or(0.0)
    }

    /// Σ cₙ ψₙ(x), the initial condition as represented by the expansion.
    pub fn initial_value(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.coeff * eigenfunction(m.n, x))
            .sum()
    }

    /// Modes that contribute at x = 0 (odd n with nonzero coefficient),
    /// paired with cₙψₙ(0).
    pub fn center_modes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.modes
            .iter()
            .filter(|m| m.n % 2 == 1 && m.coeff != 0.0)
            .map(|m| (m.n, m.coeff * center_value(m.n)))
    }
}

fn projection<F: Fn(f64) -> f64>(f: &F, n: usize, tol: f64) -> Result<f64> {
    // one panel per half period of ψₙ
    let pts: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
    let r = integrate(
        |x| f(x) * eigenfunction(n, x),
        &pts,
        QuadratureOptions::absolute(tol),
    )?;
    Ok(r.value)
}

/// Tail Σ_{n>N}|cₙ| extrapolated from an algebraic fit |cₙ| ≈ C n^{-p} over the
/// last block of coefficients. Coefficients at or below `noise` count as zero.
fn estimate_tail(block: &[(usize, f64)], noise: f64) -> f64 {
    let pts: Vec<(f64, f64)> = block
        .iter()
        .filter(|(_, c)| c.abs() > noise)
        .map(|&(n, c)| ((n as f64).ln(), c.abs().ln()))
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    let last_n = block.last().map(|&(n, _)| n as f64).unwrap_or(1.0);
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let p = -slope;
    if p <= 1.0 {
        return f64::INFINITY;
    }
    let c = (my - slope * mx).exp();
    // fraction of modes that are nonzero in the block (parity patterns)
    let density = k / block.len() as f64;
    density * c * last_n.powf(1.0 - p) / (p - 1.0)
}

/// u(a)(t, x) = Σ E_β(-μₙtᵝ) cₙ ψₙ(x).
pub fn solution(exp: &SpectralExpansion, a: &FractionalTriple, t: f64, x: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("position must be in [-1, 1], got {x}")));
    }
    let tb = t.powf(a.beta);
    let mut sum = 0.0;
    for m in exp.modes() {
        let psi = eigenfunction(m.n, x);
        if psi == 0.0 || m.coeff == 0.0 {
            continue;
        }
        let decay = if t == 0.0 {
            1.0
        } else {
            e_beta(a.beta, -mu(m.n, a) * tb)?
        };
        sum += decay * m.coeff * psi;
    }
    Ok(sum)
}

/// u(a)(t, 0) at a single time. Only odd modes contribute, with sign
/// ψₙ(0) = (-1)^{(n-1)/2}.
pub fn center_value_at(exp: &SpectralExpansion, a: &FractionalTriple, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(exp.center_modes().map(|(_, w)| w).sum());
    }
    let tb = t.powf(a.beta);
    let mut sum = 0.0;
    for (n, weight) in exp.center_modes() {
        sum += e_beta(a.beta, -mu(n, a) * tb)? * weight;
    }
    Ok(sum)
}

/// The center trace u(a)(tᵢ, 0) over a list of times, evaluated in parallel.
pub fn trace_at_center(
    exp: &SpectralExpansion,
    a: &FractionalTriple,
    times: &[f64],
) -> Result<Vec<f64>> {
    times
        .par_iter()
        .map(|&t| center_value_at(exp, a, t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> SpectralExpansion {
        SpectralExpansion::from_coefficients(&[(1, 1.0), (5, 0.5)]).unwrap()
    }

    #[test]
    fn eigenfunction_values() {
        assert_eq!(eigenfunction(1, 0.0), 1.0);
        assert_eq!(eigenfunction(2, 0.0), 0.0);
        assert_eq!(eigenfunction(5, 0.0), 1.0);
        assert_eq!(eigenfunction(3, 0.0), -1.0);
        for n in 1..50 {
            assert_eq!(eigenfunction(n, 1.0), 0.0);
            assert_eq!(eigenfunction(n, -1.0), 0.0);
            assert_eq!(eigenfunction(n, 0.0), center_value(n));
        }
    }

    #[test]
    fn mu_values() {
        let a = FractionalTriple::new(0.5, 1.0, 1.0).unwrap();
        assert!((mu(1, &a) - PI).abs() < 1e-15);
        let b = FractionalTriple::new(0.5, 0.6, 1.2).unwrap();
        // (π/2)^0.6 + (π/2)^1.2, 30-digit evaluation
        assert!((mu(1, &b) - 3.030_478_093_017_782_5).abs() < 1e-13);
        assert_eq!(
            mu(3, &b).to_bits(),
            mu(3, &b.swapped()).to_bits()
        );
        let mut prev = 0.0;
        for n in 1..100 {
            let m = mu(n, &b);
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn example1_coefficients_from_quadrature() {
        let f = |x: f64| (PI * x / 2.0).cos() + 0.5 * (5.0 * PI * x / 2.0).cos();
        let exp = SpectralExpansion::expand(f, 12, 1e-10).unwrap();
        for n in 1..=12 {
            let expected = match n {
                1 => 1.0,
                5 => 0.5,
                _ => 0.0,
            };
            assert!((exp.coeff(n) - expected).abs() < 1e-10, "n={n}: {}", exp.coeff(n));
        }
    }

    #[test]
    fn zero_function_has_zero_coefficients() {
        let exp = SpectralExpansion::expand(|_| 0.0, 8, 1e-8).unwrap();
        assert!(exp.modes().iter().all(|m| m.coeff == 0.0));
    }

    #[test]
    fn even_initial_condition_has_no_even_modes() {
        let f = |x: f64| (-x * x).exp() - (-1.0_f64).exp();
        let exp = SpectralExpansion::expand(f, 40, 1e-8).unwrap();
        for n in (2..=40).step_by(2) {
            assert!(exp.coeff(n).abs() < 1e-8, "n={n}: {}", exp.coeff(n));
        }
        assert!(exp.coeff(1) > 0.0);
    }

    #[test]
    fn solution_at_time_zero_is_initial_condition() {
        let exp = example1();
        let a = FractionalTriple::new(0.4, 0.6, 1.2).unwrap();
        for i in 0..=20 {
            let x = -1.0 + 0.1 * i as f64;
            let f = (PI * x / 2.0).cos() + 0.5 * (5.0 * PI * x / 2.0).cos();
            assert!((solution(&exp, &a, 0.0, x).unwrap() - f).abs() < 1e-14);
        }
    }

    #[test]
    fn example1_center_formula() {
        let exp = example1();
        let a = FractionalTriple::new(0.4, 0.6, 1.2).unwrap();
        for &t in &[0.01_f64, 0.3, 1.0] {
            let tb = t.powf(0.4);
            let expected = e_beta(0.4, -mu(1, &a) * tb).unwrap()
                + 0.5 * e_beta(0.4, -mu(5, &a) * tb).unwrap();
            let u = solution(&exp, &a, t, 0.0).unwrap();
            assert!((u - expected).abs() < 1e-15);
            let trace = trace_at_center(&exp, &a, &[t]).unwrap();
            assert!((trace[0] - u).abs() < 1e-15);
        }
    }

    #[test]
    fn even_mode_has_no_center_trace() {
        let exp = SpectralExpansion::from_coefficients(&[(2, 1.0)]).unwrap();
        let a = FractionalTriple::new(0.4, 0.6, 1.2).unwrap();
        let tr = trace_at_center(&exp, &a, &[0.1, 0.5, 1.0]).unwrap();
        assert!(tr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_sign_for_mode_three() {
        let exp = SpectralExpansion::from_coefficients(&[(3, 2.0)]).unwrap();
        let a = FractionalTriple::new(0.5, 1.0, 1.0).unwrap();
        let u = center_value_at(&exp, &a, 0.2).unwrap();
        let expected = -2.0 * e_beta(0.5, -mu(3, &a) * 0.2_f64.sqrt()).unwrap();
        assert!((u - expected).abs() < 1e-15);
    }

    #[test]
    fn auto_truncation_stops_early_for_finite_expansions() {
        let f = |x: f64| eigenfunction(1, x) + 0.5 * eigenfunction(5, x);
        let exp = SpectralExpansion::expand_auto(f, 1e-10).unwrap();
        assert_eq!(exp.truncation(), 20);
        let g = |x: f64| (-x * x).exp() - (-1.0_f64).exp();
        let exp = SpectralExpansion::expand_auto(g, 1e-8).unwrap();
        assert_eq!(exp.truncation(), AUTO_TRUNCATION_CAP);
    }

    #[test]
    fn triple_validation_and_canonical_form() {
        assert!(FractionalTriple::new(1.0, 0.5, 0.5).is_err());
        assert!(FractionalTriple::new(0.5, 2.0, 0.5).is_err());
        let a = FractionalTriple::new(0.4, 1.2, 0.6).unwrap();
        assert_eq!(a.canonical(), FractionalTriple::new(0.4, 0.6, 1.2).unwrap());
        assert!(ParameterBox::new(
            Interval::new(0.1, 1.0),
            Interval::new(0.1, 1.0),
            Interval::new(0.1, 1.0)
        )
        .is_err());
    }
}
