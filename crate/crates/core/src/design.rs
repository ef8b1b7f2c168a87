//! Data model and least-squares fits for the one-way layout, optionally with
//! an additive block factor.
//!
//! Every fit reports group means `μ̂`, the pooled residual variance `S²`,
//! the residual degrees of freedom and a scale matrix `V` with
//! `Cov(μ̂) = S²·V`. For the one-way layout `V = diag(1/n_i)`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation. Group 0 is the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub group: usize,
    pub response: f64,
    pub block: Option<String>,
}

impl Record {
    pub fn new(group: usize, response: f64) -> Self {
        Self { group, response, block: None }
    }

    pub fn with_block(group: usize, response: f64, block: impl Into<String>) -> Self {
        Self { group, response, block: Some(block.into()) }
    }
}

/// Validated collection of observations with group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset whose group labels are the indices `0..g`, where `g`
    /// is one past the largest group index present.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let groups = records.iter().map(|r| r.group + 1).max().unwrap_or(0);
        let labels = (0..groups).map(|i| i.to_string()).collect();
        Self::with_labels(records, labels)
    }

    /// Builds a dataset with explicit group labels; `labels[0]` is the control.
    pub fn with_labels(records: Vec<Record>, labels: Vec<String>) -> Result<Self> {
        let with_block = records.iter().filter(|r| r.block.is_some()).count();
        if with_block != 0 && with_block != records.len() {
            return Err(Error::InvalidData(
                "block level given for some records but not all".into(),
            ));
        }
        for (i, r) in records.iter().enumerate() {
            if !r.response.is_finite() {
                return Err(Error::InvalidData(format!(
                    "record {i}: response {} is not finite",
                    r.response
                )));
            }
            if r.group >= labels.len() {
                return Err(Error::InvalidData(format!(
                    "record {i}: group {} has no label ({} labels)",
                    r.group,
                    labels.len()
                )));
            }
        }
        Ok(Self { records, labels })
    }

    /// Convenience constructor from parallel slices.
    pub fn from_groups(groups: &[usize], responses: &[f64]) -> Result<Self> {
        if groups.len() != responses.len() {
            return Err(Error::Dimension(format!(
                "{} group indices for {} responses",
                groups.len(),
                responses.len()
            )));
        }
        Self::new(groups.iter().zip(responses).map(|(&g, &y)| Record::new(g, y)).collect())
    }

    /// Builds a one-way dataset from per-group response vectors.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let records = samples
            .iter()
            .enumerate()
            .flat_map(|(g, ys)| ys.iter().map(move |&y| Record::new(g, y)))
            .collect();
        let labels = (0..samples.len()).map(|i| i.to_string()).collect();
        Self::with_labels(records, labels)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of groups `g = k + 1`, control included.
    pub fn groups(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_blocks(&self) -> bool {
        self.records.first().is_some_and(|r| r.block.is_some())
    }

    /// Distinct block levels in sorted order.
    pub fn block_levels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().filter_map(|r| r.block.as_deref()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Copy with records in canonical (group, block, response) order.
    fn canonical(&self) -> Dataset {
        let mut records = self.records.clone();
        records.sort_by(canonical_order);
        Dataset { records, labels: self.labels.clone() }
    }

    /// Responses per group, each sorted ascending.
    fn grouped_responses(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.groups()];
        for r in &self.records {
            out[r.group].push(r.response);
        }
        for ys in &mut out {
            ys.sort_by(f64::total_cmp);
        }
        out
    }

    /// Records of the listed groups, relabelled `0..groups.len()` in the
    /// given order.
    fn restrict(&self, groups: &[usize]) -> Result<Dataset> {
        let mut index = vec![None; self.groups()];
        for (new, &old) in groups.iter().enumerate() {
            if old >= self.groups() {
                return Err(Error::IndexOutOfRange { index: old, groups: self.groups() });
            }
            index[old] = Some(new);
        }
        let records = self
            .records
            .iter()
            .filter_map(|r| {
                index[r.group].map(|g| Record { group: g, response: r.response, block: r.block.clone() })
            })
            .collect();
        let labels = groups.iter().map(|&g| self.labels[g].clone()).collect();
        Dataset::with_labels(records, labels)
    }
}

fn canonical_order(a: &Record, b: &Record) -> Ordering {
    a.group
        .cmp(&b.group)
        .then_with(|| a.block.cmp(&b.block))
        .then_with(|| a.response.total_cmp(&b.response))
}

/// Which linear model produced a [`ModelFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    OneWay,
    /// Group plus additive block factor with `blocks` levels.
    Additive { blocks: usize },
}

/// Summaries of a linear-model fit consumed by every test.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: FitModel,
    /// Per-group sample sizes.
    pub n: Vec<usize>,
    /// Per-group (adjusted) mean estimates.
    pub means: Vec<f64>,
    /// Pooled residual variance `S²`.
    pub s2: f64,
    /// Residual degrees of freedom.
    pub df: usize,
    /// `V` with `Cov(μ̂) = S²·V`.
    pub covariance_scale: DMatrix<f64>,
    data: Arc<Dataset>,
}

impl PartialEq for ModelFit {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model
            && self.n == other.n
            && self.means == other.means
            && self.s2 == other.s2
            && self.df == other.df
            && self.covariance_scale == other.covariance_scale
    }
}

impl ModelFit {
    /// Number of groups, control included.
    pub fn groups(&self) -> usize {
        self.n.len()
    }

    pub fn labels(&self) -> &[String] {
        self.data.labels()
    }

    /// Residual standard deviation `S`.
    pub fn s(&self) -> f64 {
        self.s2.sqrt()
    }

    /// `cᵀ V d` for two coefficient vectors.
    pub fn quadratic(&self, c: &[f64], d: &[f64]) -> f64 {
        let v = &self.covariance_scale;
        let mut acc = 0.0;
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for (j, &dj) in d.iter().enumerate() {
                acc += ci * v[(i, j)] * dj;
            }
        }
        acc
    }

    /// Refits the same model on the listed groups only (relabelled in the
    /// given order, so `groups[0]` becomes the new control).
    pub fn refit_subset(&self, groups: &[usize]) -> Result<ModelFit> {
        let data = self.data.restrict(groups)?;
        match self.model {
            FitModel::OneWay => fit_one_way(&data),
            FitModel::Additive { .. } => fit_additive(&data),
        }
    }
}

/// Least-squares fit of the pure one-way layout.
///
/// Block levels, if present, are ignored.
pub fn fit_one_way(data: &Dataset) -> Result<ModelFit> {
    let g = data.groups();
    let samples = data.grouped_responses();
    if let Some(empty) = samples.iter().position(Vec::is_empty) {
        return Err(Error::EmptyGroup(empty));
    }
    let total: usize = samples.iter().map(Vec::len).sum();
    if total <= g {
        return Err(Error::ZeroResidualDf { n: total, params: g });
    }
    let n: Vec<usize> = samples.iter().map(Vec::len).collect();
    let means: Vec<f64> = samples.iter().map(|ys| ys.iter().sum::<f64>() / ys.len() as f64).collect();
    let ss: f64 = samples
        .iter()
        .zip(&means)
        .map(|(ys, m)| ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>())
        .sum();
    let df = total - g;
    let covariance_scale = DMatrix::from_diagonal(&DVector::from_iterator(
        g,
        n.iter().map(|&ni| 1.0 / ni as f64),
    ));
    Ok(ModelFit {
        model: FitModel::OneWay,
        n,
        means,
        s2: ss / df as f64,
        df,
        covariance_scale,
        data: Arc::new(data.canonical()),
    })
}

/// Least-squares fit of `response ~ group + block` (no interaction).
///
/// Group means are estimated marginal means: the fitted value of each group
/// averaged over block levels with equal weights. Treatment coding uses
/// group 0 and the first (sorted) block level as references. A single block
/// level reduces exactly to [`fit_one_way`].
pub fn fit_additive(data: &Dataset) -> Result<ModelFit> {
    if !data.has_blocks() {
        return Err(Error::InvalidData("additive fit requires a block factor".into()));
    }
    let levels = data.block_levels();
    let b = levels.len();
    if b == 1 {
        return fit_one_way(data);
    }
    let data = data.canonical();
    let g = data.groups();
    let mut n = vec![0usize; g];
    for r in data.records() {
        n[r.group] += 1;
    }
    if let Some(empty) = n.iter().position(|&c| c == 0) {
        return Err(Error::EmptyGroup(empty));
    }
    let total = data.len();
    let p = g + b - 1;
    if total <= p {
        return Err(Error::ZeroResidualDf { n: total, params: p });
    }

    let mut x = DMatrix::<f64>::zeros(total, p);
    let mut y = DVector::<f64>::zeros(total);
    for (row, r) in data.records().iter().enumerate() {
        x[(row, 0)] = 1.0;
        if r.group > 0 {
            x[(row, r.group)] = 1.0;
        }
        let level = levels
            .binary_search_by(|l| l.as_str().cmp(r.block.as_deref().unwrap_or_default()))
            .map_err(|_| Error::InvalidData("record without block level".into()))?;
        if level > 0 {
            x[(row, g + level - 1)] = 1.0;
        }
        y[row] = r.response;
    }

    let qr = x.clone().qr();
    let r_mat = qr.r();
    let scale = (0..p).map(|i| r_mat[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r_mat[(i, i)].abs() <= 1e-10 * scale) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r_mat
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let resid = &y - &x * &beta;
    let df = total - p;
    let s2 = resid.norm_squared() / df as f64;

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let r_inv = r_mat
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let mut l = DMatrix::<f64>::zeros(g, p);
    for i in 0..g {
        l[(i, 0)] = 1.0;
        if i > 0 {
            l[(i, i)] = 1.0;
        }
        for j in 0..b - 1 {
            l[(i, g + j)] = 1.0 / b as f64;
        }
    }
    let means = (&l * &beta).iter().copied().collect();
    let covariance_scale = &l * xtx_inv * l.transpose();
    Ok(ModelFit {
        model: FitModel::Additive { blocks: b },
        n,
        means,
        s2,
        df,
        covariance_scale,
        data: Arc::new(data),
    })
}

/// Per-group descriptive summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: usize,
    pub label: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub sd: f64,
    /// Set when the sd is undefined (a single observation).
    pub single_observation: bool,
}

/// Per-group n, mean and sd in group-index order. Groups without data are
/// skipped.
pub fn summarize(data: &Dataset) -> Vec<GroupSummary> {
    data.grouped_responses()
        .into_iter()
        .enumerate()
        .filter(|(_, ys)| !ys.is_empty())
        .map(|(group, ys)| {
            let n = ys.len();
            let mean = ys.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            GroupSummary {
                group,
                label: data.labels()[group].clone(),
                n,
                mean,
                sd,
                single_observation: n == 1,
            }
        })
        .collect()
}
