//! Level-α tests for a single hypothesis node: max-t multiple contrast tests
//! with single-step multivariate-t adjustment, the ANOVA F-test on a subset
//! of groups, and the control-vs-treatment t-test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contrasts::{correlation, pairwise_row, ContrastKind, ContrastMatrix, Subset};
use crate::design::ModelFit;
use crate::error::{Error, Result};
use crate::mvt::{equicoordinate_cdf, MvtOptions, Tail};
use crate::special::{f_sf, t_upper};

/// Direction of the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// Treatment larger than control (`c'μ > 0`).
    Greater,
    /// Treatment smaller than control (`c'μ < 0`).
    Less,
    TwoSided,
}

impl Sidedness {
    pub(crate) fn tail(self) -> Tail {
        match self {
            Sidedness::TwoSided => Tail::TwoSided,
            _ => Tail::OneSided,
        }
    }

    /// Orients a statistic so that large values are evidence against H0.
    pub(crate) fn orient(self, t: f64) -> f64 {
        match self {
            Sidedness::Greater => t,
            Sidedness::Less => -t,
            Sidedness::TwoSided => t.abs(),
        }
    }
}

/// Which test produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    MctDunnett,
    MctGrandMean,
    MctPairwise,
    MctCustom,
    AnovaF,
    PairwiseT,
    TwoSampleT,
}

/// Elementary-node flavour of the ANOVA closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ElementaryMode {
    /// Two-group F-test (loses the other groups' df when refitting).
    SubsetF,
    /// Control-vs-treatment t-test with the full residual variance.
    #[default]
    PairwiseFullDf,
}

/// Residual variance used in subset F-tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FDenominator {
    /// Refit on the compared groups only.
    #[default]
    SubsetRefit,
    /// Residual variance and df of the full fit.
    FullResidual,
}

/// Variance source of the elementary control-vs-treatment t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TwoSampleDf {
    /// Pooled variance and df of all groups.
    #[default]
    PooledFull,
    /// Variance from the two compared groups only.
    PairOnly,
}

/// Serde for statistics that may be infinite: finite values as numbers,
/// others as the strings `"inf"`, `"-inf"` or `"nan"`.
pub(crate) mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(serde::de::Error::custom(format!("invalid number `{t}`"))),
            },
        }
    }
}

/// Per-contrast detail of a max-t test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub label: String,
    #[serde(with = "extended_f64")]
    pub t: f64,
    /// Single-step adjusted p-value.
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub p: f64,
    /// Max oriented t, or F.
    #[serde(with = "extended_f64")]
    pub statistic: f64,
    pub df_used: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_row: Option<Vec<RowResult>>,
    /// Largest integration error bound among the probabilities used.
    #[serde(default)]
    pub mvt_error: f64,
    /// Zero residual variance: statistics follow the ±∞ convention.
    #[serde(default)]
    pub degenerate: bool,
}

/// `t_q = c_qᵀμ̂ / (S·sqrt(c_qᵀVc_q))` per row. With `S² = 0` a nonzero
/// numerator gives `±∞` and a zero numerator gives 0.
pub fn contrast_t(c: &ContrastMatrix, fit: &ModelFit) -> Result<Vec<f64>> {
    if c.columns() != fit.groups() {
        return Err(Error::Dimension(format!(
            "contrast matrix has {} columns for {} groups",
            c.columns(),
            fit.groups()
        )));
    }
    let base = fit.means[0];
    let s = fit.s();
    c.rows
        .iter()
        .enumerate()
        .map(|(q, row)| {
            let var = fit.quadratic(row, row);
            if !(var > 0.0) {
                return Err(Error::DegenerateContrast(q));
            }
            // Σc_i = 0, so centering on μ̂_0 leaves the estimate unchanged and
            // makes equal means give an exact zero.
            let est: f64 = row.iter().zip(&fit.means).map(|(c, m)| c * (m - base)).sum();
            Ok(if est == 0.0 {
                0.0
            } else if s == 0.0 {
                est.signum() * f64::INFINITY
            } else {
                est / (s * var.sqrt())
            })
        })
        .collect()
}

/// p-value of a single t statistic.
pub(crate) fn single_t_pvalue(t: f64, df: f64, side: Sidedness) -> f64 {
    match side {
        Sidedness::Greater => t_upper(t, df),
        Sidedness::Less => t_upper(-t, df),
        Sidedness::TwoSided => (2.0 * t_upper(t.abs(), df)).min(1.0),
    }
}

fn method_for(kind: ContrastKind) -> TestMethod {
    match kind {
        ContrastKind::Dunnett => TestMethod::MctDunnett,
        ContrastKind::GrandMean => TestMethod::MctGrandMean,
        ContrastKind::PairwiseRow => TestMethod::MctPairwise,
        ContrastKind::Custom => TestMethod::MctCustom,
    }
}

/// Max-t multiple contrast test with single-step adjusted p-values
/// `p_q = 1 − P(T ≤ t_q)` (or `P(|T| ≤ |t_q|)` two-sided) under the central
/// multivariate t with the contrasts' correlation. The node p-value is the
/// smallest adjusted p-value, i.e. the p-value of the max statistic.
pub fn mct_maxtest(
    c: &ContrastMatrix,
    fit: &ModelFit,
    side: Sidedness,
    opts: &MvtOptions,
    seed: u64,
) -> Result<TestResult> {
    let t = contrast_t(c, fit)?;
    let df = fit.df as f64;
    let labels = c.named_labels(fit.labels());
    let oriented: Vec<f64> = t.iter().map(|&x| side.orient(x)).collect();
    let mut mvt_error: f64 = 0.0;

    let p_rows: Vec<f64> = if c.q() == 1 {
        vec![single_t_pvalue(t[0], df, side)]
    } else {
        let corr = correlation(c, fit)?;
        let mut out = Vec::with_capacity(c.q());
        for &o in &oriented {
            let p = if o == f64::INFINITY {
                0.0
            } else if o == f64::NEG_INFINITY {
                1.0
            } else {
                let est = equicoordinate_cdf(&corr, df, o, side.tail(), opts, seed)?;
                mvt_error = mvt_error.max(est.abs_error);
                (1.0 - est.value).clamp(0.0, 1.0)
            };
            out.push(p);
        }
        out
    };

    let p = p_rows.iter().copied().fold(1.0, f64::min);
    let statistic = oriented.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_row = labels
        .into_iter()
        .zip(&t)
        .zip(&p_rows)
        .map(|((label, &t), &p_adjusted)| RowResult { label, t, p_adjusted })
        .collect();
    Ok(TestResult {
        method: method_for(c.kind),
        p,
        statistic,
        df_used: fit.df,
        per_row: Some(per_row),
        mvt_error,
        degenerate: fit.s2 == 0.0,
    })
}

/// `F = (Dμ̂)ᵀ(DVDᵀ)⁻¹(Dμ̂) / (r·S²)` for the homogeneity of all groups of
/// `fit`, where `D` has rows `e_i − e_0`.
fn homogeneity_f(fit: &ModelFit, groups: &[usize]) -> Result<(f64, usize)> {
    let r = groups.len() - 1;
    let g = fit.groups();
    let d = DMatrix::from_fn(r, g, |row, col| {
        if col == groups[0] {
            -1.0
        } else if col == groups[row + 1] {
            1.0
        } else {
            0.0
        }
    });
    let diff = DVector::from_iterator(r, groups[1..].iter().map(|&i| fit.means[i] - fit.means[groups[0]]));
    let cov = &d * &fit.covariance_scale * d.transpose();
    let chol = cov.cholesky().ok_or(Error::RankDeficient)?;
    let quad = diff.dot(&chol.solve(&diff));
    let f = if quad == 0.0 {
        0.0
    } else if fit.s2 == 0.0 {
        f64::INFINITY
    } else {
        quad / (r as f64 * fit.s2)
    };
    Ok((f, r))
}

/// ANOVA F-test of `μ_0 = μ_i (i ∈ active)`.
///
/// With one active treatment and [`ElementaryMode::PairwiseFullDf`] the
/// node is tested by the control-vs-treatment t-test with the full residual
/// df instead, using `side`; F-tests are always two-sided.
pub fn anova_f(
    active: Subset,
    fit: &ModelFit,
    mode: ElementaryMode,
    denominator: FDenominator,
    side: Sidedness,
) -> Result<TestResult> {
    if active.is_empty() {
        return Err(Error::EmptySubset);
    }
    if active.max_index() >= fit.groups() {
        return Err(Error::IndexOutOfRange { index: active.max_index(), groups: fit.groups() });
    }
    if active.len() == 1 && mode == ElementaryMode::PairwiseFullDf {
        let i = active.max_index();
        let mut res = two_sample_t(i, fit, side, TwoSampleDf::PooledFull)?;
        res.method = TestMethod::PairwiseT;
        return Ok(res);
    }
    let groups: Vec<usize> = std::iter::once(0).chain(active.iter()).collect();
    let (f, r, df) = match denominator {
        FDenominator::SubsetRefit => {
            let sub = fit.refit_subset(&groups)?;
            let all: Vec<usize> = (0..groups.len()).collect();
            let (f, r) = homogeneity_f(&sub, &all)?;
            (f, r, sub.df)
        }
        FDenominator::FullResidual => {
            let (f, r) = homogeneity_f(fit, &groups)?;
            (f, r, fit.df)
        }
    };
    let p = f_sf(f, r as f64, df as f64)?;
    Ok(TestResult {
        method: TestMethod::AnovaF,
        p,
        statistic: f,
        df_used: df,
        per_row: None,
        mvt_error: 0.0,
        degenerate: fit.s2 == 0.0,
    })
}

/// Control-vs-treatment `i` t-test.
pub fn two_sample_t(i: usize, fit: &ModelFit, side: Sidedness, df_mode: TwoSampleDf) -> Result<TestResult> {
    let row = pairwise_row(fit.groups(), i)?;
    let (t, df, s2) = match df_mode {
        TwoSampleDf::PooledFull => (contrast_t(&row, fit)?[0], fit.df, fit.s2),
        TwoSampleDf::PairOnly => {
            let sub = fit.refit_subset(&[0, i])?;
            (contrast_t(&pairwise_row(2, 1)?, &sub)?[0], sub.df, sub.s2)
        }
    };
    let label = row.named_labels(fit.labels()).remove(0);
    let p = single_t_pvalue(t, df as f64, side);
    Ok(TestResult {
        method: TestMethod::TwoSampleT,
        p,
        statistic: side.orient(t),
        df_used: df,
        per_row: Some(vec![RowResult { label, t, p_adjusted: p }]),
        mvt_error: 0.0,
        degenerate: s2 == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrasts::{dunnett_contrasts, grand_mean_contrasts};
    use crate::design::{fit_one_way, Dataset};
    use crate::special::t_cdf;

    fn fit(samples: &[Vec<f64>]) -> ModelFit {
        fit_one_way(&Dataset::from_samples(samples).unwrap()).unwrap()
    }

    #[test]
    fn hand_computed_t() {
        // means (0, 1), n = (2, 2), s² = 1
        let f = fit(&[vec![-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()], vec![1.0 - 1.0 / 2f64.sqrt(), 1.0 + 1.0 / 2f64.sqrt()]]);
        assert!((f.s2 - 1.0).abs() < 1e-15);
        let t = contrast_t(&pairwise_row(2, 1).unwrap(), &f).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn equal_means_give_zero_t_and_unit_p() {
        let f = fit(&[vec![1.0, 3.0], vec![2.5, 1.5], vec![0.0, 4.0]]);
        let gm = grand_mean_contrasts(3, Subset::full(2)).unwrap();
        assert!(contrast_t(&gm, &f).unwrap().iter().all(|&t| t == 0.0));
        let r = anova_f(Subset::full(2), &f, ElementaryMode::SubsetF, FDenominator::SubsetRefit, Sidedness::TwoSided)
            .unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p, 1.0);
        let r = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn row_scaling_leaves_t_unchanged() {
        let f = fit(&[vec![1.0, 2.0, 3.5], vec![2.0, 4.0, 3.0], vec![0.0, 1.0, 0.2]]);
        let c = dunnett_contrasts(3, Subset::full(2)).unwrap();
        let mut scaled = c.clone();
        for r in &mut scaled.rows {
            for x in r.iter_mut() {
                *x *= 7.0;
            }
        }
        let a = contrast_t(&c, &f).unwrap();
        let b = contrast_t(&scaled, &f).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn single_row_mct_is_the_t_test() {
        let f = fit(&[vec![1.0, 2.0, 3.5], vec![2.0, 4.0, 3.0], vec![0.0, 1.0, 0.2]]);
        for side in [Sidedness::Greater, Sidedness::Less, Sidedness::TwoSided] {
            let m = mct_maxtest(&pairwise_row(3, 1).unwrap(), &f, side, &MvtOptions::default(), 1).unwrap();
            let t = two_sample_t(1, &f, side, TwoSampleDf::PooledFull).unwrap();
            assert_eq!(m.p, t.p);
        }
        let t = two_sample_t(2, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap();
        let tt = t.per_row.as_ref().unwrap()[0].t;
        let expected = 2.0 * t_cdf(-tt.abs(), f.df as f64).unwrap();
        assert!((t.p - expected).abs() < 1e-15);
    }

    #[test]
    fn df_bookkeeping() {
        let f = fit(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 3.0, 5.0], vec![0.0, 1.0], vec![3.0, 3.3]]);
        let pooled = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap();
        let pair = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PairOnly).unwrap();
        assert_eq!(pooled.df_used, 11 - 4);
        assert_eq!(pair.df_used, 3 + 4 - 2);
    }

    #[test]
    fn f_equals_t_squared_for_two_groups() {
        let f = fit(&[vec![0.0, 2.0], vec![1.0, 3.0]]);
        let fr = anova_f(Subset::full(1), &f, ElementaryMode::SubsetF, FDenominator::SubsetRefit, Sidedness::TwoSided)
            .unwrap();
        let tr = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap();
        let t = tr.per_row.unwrap()[0].t;
        assert!((fr.statistic - t * t).abs() < 1e-12);
        assert!((fr.p - tr.p).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_convention() {
        let f = fit(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let r = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
        let r = two_sample_t(1, &f, Sidedness::Less, TwoSampleDf::PooledFull).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn two_sided_mct_invariant_under_negation() {
        let a = vec![vec![1.0, 2.0, 3.5, 2.2], vec![2.0, 4.0, 3.0, 3.9], vec![0.0, 1.0, 0.2, 1.1], vec![3.0, 2.0, 4.1, 5.0]];
        let neg: Vec<Vec<f64>> = a.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let c = dunnett_contrasts(4, Subset::full(3)).unwrap();
        let p1 = mct_maxtest(&c, &fit(&a), Sidedness::TwoSided, &MvtOptions::default(), 3).unwrap();
        let p2 = mct_maxtest(&c, &fit(&neg), Sidedness::TwoSided, &MvtOptions::default(), 3).unwrap();
        assert!((p1.p - p2.p).abs() < 1e-12);
    }

    #[test]
    fn adjusted_p_sandwich() {
        let a = vec![vec![1.0, 2.0, 3.5, 2.2], vec![2.0, 4.0, 3.0, 3.9], vec![0.0, 1.0, 0.2, 1.1], vec![3.0, 2.0, 4.1, 5.0]];
        let f = fit(&a);
        let c = dunnett_contrasts(4, Subset::full(3)).unwrap();
        let r = mct_maxtest(&c, &f, Sidedness::TwoSided, &MvtOptions::default(), 3).unwrap();
        for row in r.per_row.as_ref().unwrap() {
            let raw = single_t_pvalue(row.t, f.df as f64, Sidedness::TwoSided);
            assert!(row.p_adjusted >= raw - r.mvt_error);
            assert!(row.p_adjusted <= (3.0 * raw).min(1.0) + r.mvt_error);
        }
    }
}
