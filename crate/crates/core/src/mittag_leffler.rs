//! Two-parameter Mittag-Leffler function E_{β,ν}(z) on the real line.
//!
//! The evaluator is region-switched:
//!
//! * `|z| ≤ 1`: the defining power series Σ zᵏ/Γ(βk+ν).
//! * `z = -x`, `x` large: the algebraic asymptotic expansion
//!   E_{β,ν}(-x) ~ Σ_{k≥1} (-1)^{k+1} x^{-k}/Γ(ν-βk), used only when its
//!   remainder bound is below `ASYMPTOTIC_TOL`.
//! * otherwise, for 0 < β < 1: the Laplace-type representation
//!
//!   E_{β,ν}(-x) = x^{(1-ν)/β}/(βπ) ∫₀^∞ s^{(1-ν)/β} e^{-(xs)^{1/β}}
//!                 [s sin π(1-ν) + sin π(1-ν+β)] / (s² + 2s cos βπ + 1) ds,
//!
//!   valid for 0 < ν ≤ 1. Larger ν is brought into range with
//!   E_{β,ν}(z) = (E_{β,ν-β}(z) - 1/Γ(ν-β)) / z.
//!
//! The two classical closed forms E_{1,1}(z) = eᶻ and E_{2,1}(-x²) = cos x are
//! dispatched directly; any other β ≥ 1 goes through the power series with a
//! cancellation check.

use std::f64::consts::PI;

use crate::error::{Error, MlRegion, Result};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::special::{ln_gamma, rgamma, sin_pi};

const SERIES_MAX_TERMS: usize = 500;
const SERIES_REL_STOP: f64 = 1e-16;
const ASYMPTOTIC_TOL: f64 = 1e-16;
const ASYMPTOTIC_MAX_TERMS: usize = 80;
/// `e^{-EXP_CUTOFF}` is negligible against the integrand's maximum.
const EXP_CUTOFF: f64 = 60.0;
/// Largest absolute round-off the power series may incur before it is
/// rejected.
const SERIES_LOSS_TOL: f64 = 1e-13;

/// Arguments of a Mittag-Leffler evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub beta: f64,
    pub nu: f64,
    pub z: f64,
}

impl MlQuery {
    pub fn new(beta: f64, nu: f64, z: f64) -> Result<Self> {
        let q = Self { beta, nu, z };
        q.validate()?;
        Ok(q)
    }

    /// The one-parameter function E_β(z) = E_{β,1}(z).
    pub fn classical(beta: f64, z: f64) -> Result<Self> {
        Self::new(beta, 1.0, z)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Domain(format!("nu must be > 0, got {}", self.nu)));
        }
        if !self.z.is_finite() {
            return Err(Error::Domain(format!("z must be finite, got {}", self.z)));
        }
        Ok(())
    }
}

/// E_{β,ν}(z).
pub fn ml(q: MlQuery) -> Result<f64> {
    q.validate()?;
    eval(q.beta, q.nu, q.z)
}

/// d/dz E_{β,ν}(z).
pub fn ml_deriv(q: MlQuery) -> Result<f64> {
    q.validate()?;
    eval_deriv(q.beta, q.nu, q.z)
}

/// E_β(z) with the validation folded in; the form used by the forward solver.
pub fn e_beta(beta: f64, z: f64) -> Result<f64> {
    ml(MlQuery::classical(beta, z)?)
}

/// E'_β(z).
pub fn e_beta_deriv(beta: f64, z: f64) -> Result<f64> {
    ml_deriv(MlQuery::classical(beta, z)?)
}

fn eval(beta: f64, nu: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(rgamma(nu));
    }
    if let Some(v) = closed_form(beta, nu, z) {
        return Ok(v);
    }
    if z.abs() <= 1.0 {
        if let Some(v) = taylor(beta, nu, z, false)? {
            return Ok(v);
        }
    }
    if z > 0.0 || beta >= 1.0 {
        return taylor(beta, nu, z, false)?.ok_or(Error::MlConvergence {
            region: MlRegion::Taylor,
            estimate: f64::NAN,
        });
    }
    let x = -z;
    if let Some(v) = asymptotic(beta, nu, x, false) {
        return Ok(v);
    }
    integral_shifted(beta, nu, x)
}

fn eval_deriv(beta: f64, nu: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(rgamma(beta + nu));
    }
    if let Some(v) = closed_form_deriv(beta, nu, z) {
        return Ok(v);
    }
    if z.abs() <= 1.0 {
        if let Some(v) = taylor(beta, nu, z, true)? {
            return Ok(v);
        }
    }
    if z > 0.0 || beta >= 1.0 {
        return taylor(beta, nu, z, true)?.ok_or(Error::MlConvergence {
            region: MlRegion::Taylor,
            estimate: f64::NAN,
        });
    }
    let x = -z;
    if let Some(v) = asymptotic(beta, nu, x, true) {
        return Ok(v);
    }
    // E' = (E_{β,ν-1} - (ν-1) E_{β,ν}) / (βz)
    if nu > 1.0 {
        let lower = eval(beta, nu - 1.0, z)?;
        let this = eval(beta, nu, z)?;
        return Ok((lower - (nu - 1.0) * this) / (beta * z));
    }
    if nu - 1.0 + beta > 0.0 {
        // E_{β,ν-1}(z) = 1/Γ(ν-1) + z E_{β,ν-1+β}(z)
        let shifted = eval(beta, nu - 1.0 + beta, z)?;
        let lower = rgamma(nu - 1.0) + z * shifted;
        let this = eval(beta, nu, z)?;
        return Ok((lower - (nu - 1.0) * this) / (beta * z));
    }
    // repeated upward shifts would multiply the error by |z| each time
    integral_deriv(beta, nu, x)
}

fn closed_form(beta: f64, nu: f64, z: f64) -> Option<f64> {
    if nu != 1.0 {
        return None;
    }
    if beta == 1.0 {
        return Some(z.exp());
    }
    if beta == 2.0 {
        return Some(if z < 0.0 { (-z).sqrt().cos() } else { z.sqrt().cosh() });
    }
    None
}

fn closed_form_deriv(beta: f64, nu: f64, z: f64) -> Option<f64> {
    if nu != 1.0 {
        return None;
    }
    if beta == 1.0 {
        return Some(z.exp());
    }
    if beta == 2.0 {
        let r = z.abs().sqrt();
        return Some(if z < 0.0 { r.sin() / (2.0 * r) } else { r.sinh() / (2.0 * r) });
    }
    None
}

/// Power series (or its term-wise derivative). `Ok(None)` when the series
/// does not settle within the term cap; an error when it settles but has lost
/// too many digits to cancellation.
fn taylor(beta: f64, nu: f64, z: f64, deriv: bool) -> Result<Option<f64>> {
    let mut sum = 0.0_f64;
    let mut largest = 0.0_f64;
    let mut small_run = 0;
    let start = usize::from(deriv);
    for k in start..SERIES_MAX_TERMS {
        let kf = k as f64;
        let power = if deriv {
            kf * z.powi(k as i32 - 1)
        } else {
            z.powi(k as i32)
        };
        let term = power * rgamma(beta * kf + nu);
        if !term.is_finite() {
            return Ok(None);
        }
        sum += term;
        largest = largest.max(term.abs());
        if term.abs() <= SERIES_REL_STOP * sum.abs().max(f64::MIN_POSITIVE) {
            small_run += 1;
            // Γ grows monotonically past its minimum, so two consecutive
            // negligible terms end the sum.
            if small_run >= 2 && beta * kf + nu > 2.0 {
                if largest * f64::EPSILON * 4.0 > SERIES_LOSS_TOL {
                    return Err(Error::MlConvergence {
                        region: MlRegion::Taylor,
                        estimate: sum,
                    });
                }
                return Ok(Some(sum));
            }
        } else {
            small_run = 0;
        }
    }
    Ok(None)
}

/// Asymptotic expansion for E_{β,ν}(-x) (or d/dz of it), if its remainder
/// bound reaches `ASYMPTOTIC_TOL` before the terms start growing.
fn asymptotic(beta: f64, nu: f64, x: f64, deriv: bool) -> Option<f64> {
    let x_big = (10.0_f64).max((2.0 * beta + 1.0).powf(1.0 / beta) * 5.0);
    if x < x_big {
        return None;
    }
    let ln_x = x.ln();
    // |1/Γ(ν-βk)| ≤ Γ(1-ν+βk)/π by reflection
    let bound = |k: usize| -> f64 {
        let kf = k as f64;
        let arg = 1.0 - nu + beta * kf;
        let scale = if deriv { kf / x } else { 1.0 };
        if arg <= 0.0 {
            return f64::INFINITY;
        }
        scale * (ln_gamma(arg) - kf * ln_x).exp() / PI
    };
    let mut prev = f64::INFINITY;
    let mut cutoff = None;
    for k in 1..=ASYMPTOTIC_MAX_TERMS {
        let b = bound(k);
        if b <= ASYMPTOTIC_TOL {
            cutoff = Some(k - 1);
            break;
        }
        if b > prev {
            return None;
        }
        prev = b;
    }
    let terms = cutoff?;
    let mut sum = 0.0;
    // accumulate smallest first
    for k in (1..=terms).rev() {
        let kf = k as f64;
        let coeff = rgamma(nu - beta * kf);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        if deriv {
            // d/dz of (-1)^{k+1} (-z)^{-k} = k (-1)^{k+1} x^{-k-1}
            sum += sign * kf * coeff * (-(kf + 1.0) * ln_x).exp();
        } else {
            sum += sign * coeff * (-kf * ln_x).exp();
        }
    }
    Some(sum)
}

fn integral_shifted(beta: f64, nu: f64, x: f64) -> Result<f64> {
    if nu <= 1.0 {
        return integral(beta, nu, x);
    }
    // E_{β,ν}(z) = (E_{β,ν-β}(z) - 1/Γ(ν-β)) / z with z = -x
    let lower = integral_shifted(beta, nu - beta, x)?;
    Ok((rgamma(nu - beta) - lower) / x)
}

struct Kernel {
    beta: f64,
    x: f64,
    power: f64,
    prefactor: f64,
    cos_b: f64,
    sin_b: f64,
    s1: f64,
    s2: f64,
    inv_beta: f64,
}

impl Kernel {
    fn new(beta: f64, nu: f64, x: f64) -> Self {
        let power = (1.0 - nu) / beta;
        Self {
            beta,
            x,
            power,
            prefactor: x.powf(power) / (beta * PI),
            cos_b: sin_pi(beta + 0.5),
            sin_b: sin_pi(beta),
            s1: sin_pi(1.0 - nu),
            s2: sin_pi(1.0 - nu + beta),
            inv_beta: 1.0 / beta,
        }
    }

    /// Integrand in s; `weight` multiplies by (p - (xs)^{1/β}/β) for the
    /// x-derivative.
    fn eval(&self, s: f64, weight: bool) -> f64 {
        if s <= 0.0 {
            return if self.power == 0.0 && !weight { self.s2 } else { 0.0 };
        }
        let e = (self.x * s).powf(self.inv_beta);
        if e > EXP_CUTOFF + 40.0 {
            return 0.0;
        }
        let shifted = s + self.cos_b;
        let denom = shifted * shifted + self.sin_b * self.sin_b;
        let mut v = (-e).exp() * (s * self.s1 + self.s2) / denom;
        if self.power != 0.0 {
            v *= s.powf(self.power);
        }
        if weight {
            v *= self.power - e * self.inv_beta;
        }
        v
    }

    fn breakpoints(&self) -> Vec<f64> {
        let upper = EXP_CUTOFF.powf(self.beta) / self.x;
        let mut pts = vec![0.0, upper];
        let mut push = |p: f64| {
            if p > 0.0 && p < upper {
                pts.push(p);
            }
        };
        push(1.0 / self.x);
        push(0.5 / self.x);
        push(2.0 / self.x);
        if self.cos_b < 0.0 {
            // Lorentzian-like peak of width sin βπ at s = -cos βπ
            let peak = -self.cos_b;
            push(peak);
            push(peak - self.sin_b);
            push(peak + self.sin_b);
            push(peak - 4.0 * self.sin_b);
            push(peak + 4.0 * self.sin_b);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn quad(&self, weight: bool) -> Result<f64> {
        let opts = QuadratureOptions {
            abs_tol: 2e-17 / self.prefactor,
            rel_tol: 2e-15,
            max_intervals: 4000,
        };
        let pts = self.breakpoints();
        let r = integrate(|s| self.eval(s, weight), &pts, opts).map_err(|e| match e {
            Error::Quadrature { .. } => Error::MlConvergence {
                region: MlRegion::Integral,
                estimate: f64::NAN,
            },
            other => other,
        })?;
        Ok(self.prefactor * r.value)
    }
}

fn integral(beta: f64, nu: f64, x: f64) -> Result<f64> {
    debug_assert!(beta > 0.0 && beta < 1.0 && nu > 0.0 && nu <= 1.0);
    Kernel::new(beta, nu, x).quad(false)
}

/// d/dz E_{β,ν}(-x) from the differentiated integral representation.
fn integral_deriv(beta: f64, nu: f64, x: f64) -> Result<f64> {
    let kernel = Kernel::new(beta, nu, x);
    let d_dx = kernel.quad(true)? / x;
    Ok(-d_dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn ml3(beta: f64, nu: f64, z: f64) -> f64 {
        ml(MlQuery::new(beta, nu, z).unwrap()).unwrap()
    }

    #[test]
    fn exponential_identity() {
        assert!((ml3(1.0, 1.0, -1.0) - (-1.0_f64).exp()).abs() < 1e-15);
        let d = ml_deriv(MlQuery::new(1.0, 1.0, -1.0).unwrap()).unwrap();
        assert!((d - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn value_at_origin() {
        assert_eq!(ml3(0.4, 1.0, 0.0), 1.0);
        let d = ml_deriv(MlQuery::new(0.4, 1.0, 0.0).unwrap()).unwrap();
        assert!((d - 1.0 / gamma(1.4)).abs() < 1e-15);
    }

    #[test]
    fn cosine_identity() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(ml3(2.0, 1.0, -half_pi * half_pi).abs() < 1e-15);
    }

    #[test]
    fn half_order_erfc_identity() {
        // e·erfc(1), from a 50-digit evaluation
        assert!((ml3(0.5, 1.0, -1.0) - 0.427_583_576_155_807_0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(MlQuery::new(0.0, 1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(MlQuery::new(0.5, -1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(MlQuery::new(0.5, 1.0, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn regions_agree_at_switch_points() {
        for &beta in &[0.05, 0.3, 0.5, 0.8, 0.95] {
            // taylor vs integral at |z| = 1
            let t = taylor(beta, 1.0, -1.0, false).unwrap();
            let i = integral(beta, 1.0, 1.0).unwrap();
            if let Some(t) = t {
                assert!((t - i).abs() < 1e-14, "beta={beta}: {t} vs {i}");
            }
            // asymptotic vs integral just past the switch
            for x in [60.0, 200.0, 1e3] {
                if let Some(a) = asymptotic(beta, 1.0, x, false) {
                    let i = integral(beta, 1.0, x).unwrap();
                    assert!((a - i).abs() < 1e-14, "beta={beta} x={x}: {a} vs {i}");
                }
            }
        }
    }

    #[test]
    fn nu_shift_matches_series() {
        // E_{β,ν}(-1) series is reliable; compare the integral route at z=-1
        for &(beta, nu) in &[(0.6, 1.3), (0.8, 1.7), (0.4, 1.25)] {
            let series = taylor(beta, nu, -1.0, false).unwrap().unwrap();
            let shifted = integral_shifted(beta, nu, 1.0).unwrap();
            assert!((series - shifted).abs() < 1e-13, "({beta},{nu}): {series} vs {shifted}");
        }
    }

    #[test]
    fn derivative_routes_agree() {
        for &(beta, nu) in &[(0.3, 0.3), (0.7, 0.7), (0.6, 1.0), (0.4, 1.5)] {
            let x = 1.0;
            let series = taylor(beta, nu, -x, true).unwrap().unwrap();
            let direct = integral_deriv(beta, nu.min(1.0), x);
            if nu <= 1.0 {
                let d = direct.unwrap();
                assert!((series - d).abs() < 1e-12, "({beta},{nu}): {series} vs {d}");
            }
        }
    }
}
