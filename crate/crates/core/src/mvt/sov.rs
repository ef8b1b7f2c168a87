//! Separation-of-variables transform of a box probability to the unit cube.
//!
//! Variables are ordered greedily by smallest expected conditional interval
//! probability while the Cholesky factor is built. Rows whose residual
//! variance vanishes (singular correlation) add no integration dimension;
//! their constraint is attached to the last variable they depend on.

use nalgebra::DMatrix;

use crate::special::{normal_cdf, normal_pdf, normal_quantile_fast, normal_sf, ChiSquareInverse};

const PIVOT_EPS: f64 = 1e-10;
const COEF_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Constraint {
    /// Coefficients on the earlier variables `y_0 … y_{i-1}`.
    coef: Vec<f64>,
    /// Coefficient on `y_i` itself; negative flips the bounds.
    diag: f64,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SovPlan {
    steps: Vec<Vec<Constraint>>,
    chi: Option<(f64, ChiSquareInverse)>,
}

fn truncated_mean(lo: f64, hi: f64) -> f64 {
    let mass = normal_cdf(hi) - normal_cdf(lo);
    if mass > 1e-300 {
        (normal_pdf(lo) - normal_pdf(hi)) / mass
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    }
}

impl SovPlan {
    /// `df = None` is the multivariate normal.
    pub(crate) fn new(lower: &[f64], upper: &[f64], corr: &DMatrix<f64>, df: Option<f64>) -> Self {
        let q = lower.len();
        let mut sigma = corr.clone();
        let mut a = lower.to_vec();
        let mut b = upper.to_vec();
        let mut chol = DMatrix::<f64>::zeros(q, q);
        let mut y = vec![0.0; q];
        let mut rank = 0;

        for i in 0..q {
            let mut best: Option<(usize, f64, f64)> = None;
            for j in i..q {
                let partial: f64 = (0..i).map(|l| chol[(j, l)] * chol[(j, l)]).sum();
                let v = sigma[(j, j)] - partial;
                if v <= PIVOT_EPS {
                    continue;
                }
                let s = v.sqrt();
                let m: f64 = (0..i).map(|l| chol[(j, l)] * y[l]).sum();
                let p = normal_cdf((b[j] - m) / s) - normal_cdf((a[j] - m) / s);
                if best.is_none_or(|(_, bp, _)| p < bp) {
                    best = Some((j, p, v));
                }
            }
            let Some((j, _, v)) = best else { break };
            if j != i {
                sigma.swap_rows(i, j);
                sigma.swap_columns(i, j);
                chol.swap_rows(i, j);
                a.swap(i, j);
                b.swap(i, j);
            }
            let d = v.sqrt();
            chol[(i, i)] = d;
            for r in i + 1..q {
                let dot: f64 = (0..i).map(|l| chol[(r, l)] * chol[(i, l)]).sum();
                chol[(r, i)] = (sigma[(r, i)] - dot) / d;
            }
            let m: f64 = (0..i).map(|l| chol[(i, l)] * y[l]).sum();
            y[i] = truncated_mean((a[i] - m) / d, (b[i] - m) / d);
            rank = i + 1;
        }

        let mut steps: Vec<Vec<Constraint>> = (0..rank)
            .map(|i| {
                vec![Constraint {
                    coef: (0..i).map(|l| chol[(i, l)]).collect(),
                    diag: chol[(i, i)],
                    lower: a[i],
                    upper: b[i],
                }]
            })
            .collect();
        for r in rank..q {
            // Attach to the last variable with a non-negligible coefficient.
            if let Some(last) = (0..rank).rev().find(|&l| chol[(r, l)].abs() > COEF_EPS) {
                steps[last].push(Constraint {
                    coef: (0..last).map(|l| chol[(r, l)]).collect(),
                    diag: chol[(r, last)],
                    lower: a[r],
                    upper: b[r],
                });
            }
        }
        let chi = df.map(|nu| (nu, ChiSquareInverse::new(nu)));
        Self { steps, chi }
    }

    /// Number of unit-cube coordinates the integrand consumes.
    pub(crate) fn dim(&self) -> usize {
        let own = self.steps.len().saturating_sub(1);
        own + usize::from(self.chi.is_some())
    }

    /// Integrand value at a point of `[0, 1]^dim`; `y` is scratch space of
    /// length at least the number of steps.
    pub(crate) fn eval(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let (scale, w) = match &self.chi {
            Some((nu, inv)) => {
                let u = w[0].clamp(1e-300, 1.0 - 1e-16);
                ((inv.quantile(u) / nu).sqrt(), &w[1..])
            }
            None => (1.0, w),
        };
        let last = self.steps.len() - 1;
        let mut f = 1.0;
        for (i, cons) in self.steps.iter().enumerate() {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for c in cons {
                let partial: f64 = c.coef.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
                let l = (c.lower * scale - partial) / c.diag;
                let u = (c.upper * scale - partial) / c.diag;
                let (l, u) = if c.diag > 0.0 { (l, u) } else { (u, l) };
                lo = lo.max(l);
                hi = hi.min(u);
            }
            if !(hi > lo) {
                return 0.0;
            }
            // Work in whichever tail keeps the interval mass accurate.
            if lo > 0.0 {
                let (ql, qu) = (normal_sf(lo), normal_sf(hi));
                let mass = ql - qu;
                f *= mass;
                if i < last {
                    let t = (ql - w[i] * mass).clamp(1e-300, 1.0);
                    y[i] = -normal_quantile_fast(t);
                }
            } else {
                let (pl, pu) = (normal_cdf(lo), normal_cdf(hi));
                let mass = pu - pl;
                f *= mass;
                if i < last {
                    let t = (pl + w[i] * mass).clamp(1e-300, 1.0 - 1e-16);
                    y[i] = normal_quantile_fast(t);
                }
            }
            if f == 0.0 {
                return 0.0;
            }
        }
        f
    }

    /// With a single independent variable every constraint bounds the same
    /// standardized coordinate; returns that combined interval.
    pub(crate) fn single_interval(&self) -> Option<(f64, f64)> {
        let [cons] = self.steps.as_slice() else { return None };
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in cons {
            let (l, u) = (c.lower / c.diag, c.upper / c.diag);
            let (l, u) = if c.diag > 0.0 { (l, u) } else { (u, l) };
            lo = lo.max(l);
            hi = hi.min(u);
        }
        Some((lo, hi))
    }

    pub(crate) fn steps(&self) -> usize {
        self.steps.len()
    }
}
