//! Scalar distribution functions: standard normal, Student t, F and
//! chi-square, built on the regularized incomplete beta and gamma functions.
//!
//! The incomplete beta is evaluated with the modified Lentz continued
//! fraction; `erfc` comes from `libm`.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;
const FPMIN: f64 = 1e-300;
const CF_EPS: f64 = 1e-16;
const CF_MAXIT: usize = 20_000;

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate for large positive `x`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

// Acklam's rational approximation, relative error about 1.2e-9.
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Inverse of the standard normal CDF without refinement (~1e-9 relative).
/// Good enough inside integrands; use [`normal_quantile`] elsewhere.
#[inline]
pub(crate) fn normal_quantile_fast(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5])
            * q
            / (((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
                + ACKLAM_B[4])
                * r
                + 1.0)
    } else {
        -normal_quantile_fast(1.0 - p)
    }
}

/// Inverse standard normal CDF, refined by one Halley step to full precision.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        // Work in the lower tail so 1 - p stays exact.
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = normal_quantile_fast(p);
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

fn stirling_tail(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `ln Γ(a + b) - ln Γ(a)` without cancellation when `a` is large.
fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 10.0 {
        return ln_gamma(a + b) - ln_gamma(a);
    }
    (a - 0.5) * (b / a).ln_1p() + b * (a + b).ln() - b + stirling_tail(a + b) - stirling_tail(a)
}

/// Natural log of the beta function.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    ln_gamma(small) - ln_gamma_ratio(large, small)
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAXIT {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` and its complement, with
/// `y = 1 - x` supplied by the caller so neither side loses precision.
pub(crate) fn beta_inc_pair(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let v = (ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0);
        (v, 1.0 - v)
    } else {
        let w = (ln_front.exp() * beta_cf(b, a, y) / b).clamp(0.0, 1.0);
        (1.0 - w, w)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta argument {x} outside [0, 1]")));
    }
    Ok(beta_inc_pair(a, b, x, 1.0 - x).0)
}

fn check_df(df: f64) -> Result<()> {
    if df > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("degrees of freedom must be positive, got {df}")))
    }
}

/// Upper tail of Student's t for `x >= 0` (unchecked).
pub(crate) fn t_upper(x: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal_sf(x);
    }
    if x.is_infinite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    let t2 = x * x;
    let denom = df + t2;
    // P(T > |x|) = I_{df/(df+x²)}(df/2, 1/2) / 2
    let (tail, _) = beta_inc_pair(0.5 * df, 0.5, df / denom, t2 / denom);
    if x >= 0.0 {
        0.5 * tail
    } else {
        1.0 - 0.5 * tail
    }
}

/// Student t distribution function. `df = ∞` gives the normal limit.
pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    Ok(t_upper(-x, df))
}

/// Student t survival function `P(T > x)`.
pub fn t_sf(x: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    Ok(t_upper(x, df))
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal_pdf(x);
    }
    let ln_norm = ln_gamma_ratio(0.5 * df, 0.5) - 0.5 * (df * PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

/// Quantile of Student's t.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return t_quantile(1.0 - p, df).map(|x| -x);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if df.is_infinite() {
        return Ok(normal_quantile(p));
    }
    let q = 1.0 - p;
    let mut x = if df == 1.0 {
        (PI * (p - 0.5)).tan()
    } else if df == 2.0 {
        (2.0 * p - 1.0) / (2.0 * p * q).sqrt()
    } else {
        let z = normal_quantile(p);
        let z3 = z * z * z;
        let g1 = (z3 + z) / 4.0;
        let g2 = (5.0 * z3 * z * z + 16.0 * z3 + 3.0 * z) / 96.0;
        z + g1 / df + g2 / (df * df)
    };
    // Newton on the upper tail with a bisection fallback.
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let f = t_upper(x, df) - q;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / t_pdf(x, df);
        let mut next = x + step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// F distribution function.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1)?;
    check_df(df2)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let u = df1 * x;
    let denom = u + df2;
    Ok(beta_inc_pair(0.5 * df1, 0.5 * df2, u / denom, df2 / denom).0)
}

/// F survival function `P(F > x)`.
pub fn f_sf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1)?;
    check_df(df2)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let u = df1 * x;
    let denom = u + df2;
    Ok(beta_inc_pair(0.5 * df1, 0.5 * df2, u / denom, df2 / denom).1)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_p_with_ln(a, x, ln_gamma(a))
}

fn gamma_p_with_ln(a: f64, x: f64, ln_gamma_a: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let ln_front = a * x.ln() - x - ln_gamma_a;
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..CF_MAXIT {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * CF_EPS {
                break;
            }
        }
        (sum * ln_front.exp()).min(1.0)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..CF_MAXIT {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                break;
            }
        }
        (1.0 - ln_front.exp() * h).max(0.0)
    }
}

/// Inverse chi-square distribution, precomputed for one `df`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChiSquareInverse {
    half_df: f64,
    ln_gamma_half_df: f64,
}

impl ChiSquareInverse {
    pub(crate) fn new(df: f64) -> Self {
        let half_df = 0.5 * df;
        Self { half_df, ln_gamma_half_df: ln_gamma(half_df) }
    }

    fn density_half(&self, y: f64) -> f64 {
        // density of Gamma(half_df, 1) at y
        ((self.half_df - 1.0) * y.ln() - y - self.ln_gamma_half_df).exp()
    }

    /// Quantile of the chi-square distribution at probability `p`.
    pub(crate) fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let a = self.half_df;
        // Wilson–Hilferty start on the Gamma(a, 1) scale.
        let z = normal_quantile_fast(p);
        let h = 1.0 / (9.0 * a);
        let mut y = a * (1.0 - h + z * h.sqrt()).powi(3);
        if !(y > 0.0) || !y.is_finite() {
            // Small-p lower tail: P(a, y) ≈ y^a / Γ(a + 1)
            y = (p.ln() + ln_gamma(a + 1.0)) / a;
            y = y.exp();
        }
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        for _ in 0..60 {
            let f = gamma_p_with_ln(a, y, self.ln_gamma_half_df) - p;
            if f < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let dens = self.density_half(y);
            let mut next = if dens > 0.0 { y - f / dens } else { f64::NAN };
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * y.max(1.0) };
            }
            if (next - y).abs() <= 1e-12 * y {
                y = next;
                break;
            }
            y = next;
        }
        2.0 * y
    }
}
