//! Adaptive Gauss-Kronrod (10/21-point) quadrature with global
//! error-driven bisection.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadratureOptions {
    pub fn absolute(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

/// One 21-point Kronrod panel, returning (kronrod, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut values = [(0.0, 0.0); 10];
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let (fl, fr) = (f(center - dx), f(center + dx));
        *slot = (fl, fr);
        kronrod += WGK[j] * (fl + fr);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (fl + fr);
        }
    }
    // QUADPACK error scaling against the integral of |f - mean|
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for (j, &(fl, fr)) in values.iter().enumerate() {
        resasc += WGK[j] * ((fl - mean).abs() + (fr - mean).abs());
    }
    let kronrod = kronrod * half;
    let resasc = resasc * half.abs();
    let mut err = (kronrod - gauss * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    // round-off floor
    (kronrod, err.max(4.0 * f64::EPSILON * kronrod.abs()))
}

/// Integrate `f` over `[lo, hi]` split at the supplied interior breakpoints.
///
/// Panels are bisected in order of decreasing error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F>(f: F, breakpoints: &[f64], opts: QuadratureOptions) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    debug_assert!(breakpoints.len() >= 2);
    let mut segments: Vec<Segment> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (value, error) = gk21(&f, w[0], w[1]);
            Segment {
                lo: w[0],
                hi: w[1],
                value,
                error,
            }
        })
        .collect();
    if segments.is_empty() {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }

    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= tol {
            return Ok(QuadratureResult {
                value: total,
                error: err,
                intervals: segments.len(),
            });
        }
        let (worst_idx, worst) = segments
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if segments.len() >= opts.max_intervals || mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Quadrature {
                lo: worst.lo,
                hi: worst.hi,
                err,
            });
        }
        let (lv, le) = gk21(&f, worst.lo, mid);
        let (rv, re) = gk21(&f, mid, worst.hi);
        segments[worst_idx] = Segment {
            lo: worst.lo,
            hi: mid,
            value: lv,
            error: le,
        };
        segments.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: rv,
            error: re,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, &[0.0, 2.0], QuadratureOptions::absolute(1e-14)).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_and_breakpoints() {
        let r = integrate(|x| (5.0 * x).sin(), &[0.0, 1.0, PI], QuadratureOptions::absolute(1e-13)).unwrap();
        let exact = (1.0 - (5.0 * PI).cos()) / 5.0;
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| x.powf(-0.5), &[0.0, 1.0], QuadratureOptions::absolute(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_failure_with_interval() {
        let opts = QuadratureOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_intervals: 3,
        };
        let err = integrate(|x| 1.0 / x.abs().max(1e-300).sqrt(), &[-1.0, 1.0], opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
