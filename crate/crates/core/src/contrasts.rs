//! Contrast matrices for many-to-one comparisons and the correlation of the
//! contrast t-statistics they induce.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::design::ModelFit;
use crate::error::{Error, Result};

/// Largest number of treatments a [`Subset`] can hold.
pub const MAX_TREATMENTS: usize = 31;

/// A nonempty set of treatment indices drawn from `1..=k`, stored as a bit
/// mask (bit `i - 1` for treatment `i`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(u32);

impl Subset {
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut bits = 0u32;
        for i in indices {
            if i == 0 || i > MAX_TREATMENTS {
                return Err(Error::IndexOutOfRange { index: i, groups: MAX_TREATMENTS + 1 });
            }
            bits |= 1 << (i - 1);
        }
        Ok(Subset(bits))
    }

    pub fn from_bits(bits: u32) -> Self {
        Subset(bits)
    }

    /// `{1, …, k}`.
    pub fn full(k: usize) -> Self {
        debug_assert!(k <= MAX_TREATMENTS);
        Subset(if k == 32 { u32::MAX } else { (1u32 << k) - 1 })
    }

    pub fn singleton(i: usize) -> Self {
        debug_assert!((1..=MAX_TREATMENTS).contains(&i));
        Subset(1 << (i - 1))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i >= 1 && i <= 32 && self.0 & (1 << (i - 1)) != 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest treatment index in the set (0 when empty).
    pub fn max_index(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    /// Treatment indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (1..=32).filter(move |&i| self.contains(i))
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Subset::from_indices(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastKind {
    Dunnett,
    GrandMean,
    PairwiseRow,
    Custom,
}

/// `q × g` coefficient matrix with row labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastMatrix {
    pub kind: ContrastKind,
    pub active: Subset,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn check_subset(g: usize, active: Subset) -> Result<()> {
    if active.is_empty() {
        return Err(Error::EmptySubset);
    }
    if active.max_index() >= g {
        return Err(Error::IndexOutOfRange { index: active.max_index(), groups: g });
    }
    Ok(())
}

/// Many-to-one rows `μ_i − μ_0` for `i ∈ active`, ascending in `i`.
pub fn dunnett_contrasts(g: usize, active: Subset) -> Result<ContrastMatrix> {
    check_subset(g, active)?;
    let mut rows = Vec::with_capacity(active.len());
    let mut labels = Vec::with_capacity(active.len());
    for i in active.iter() {
        let mut row = vec![0.0; g];
        row[0] = -1.0;
        row[i] = 1.0;
        rows.push(row);
        labels.push(format!("{i} - 0"));
    }
    Ok(ContrastMatrix { kind: ContrastKind::Dunnett, active, labels, rows })
}

/// Grand-mean rows over the compared set `{0} ∪ active`: each group against
/// the average of the other compared groups. Columns outside the set are 0.
pub fn grand_mean_contrasts(g: usize, active: Subset) -> Result<ContrastMatrix> {
    check_subset(g, active)?;
    let members: Vec<usize> = std::iter::once(0).chain(active.iter()).collect();
    let m = members.len();
    let w = 1.0 / (m - 1) as f64;
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for &t in &members {
        let mut row = vec![0.0; g];
        for &j in &members {
            row[j] = if j == t { -1.0 } else { w };
        }
        rows.push(row);
        labels.push(format!("mean(others) - {t}"));
    }
    Ok(ContrastMatrix { kind: ContrastKind::GrandMean, active, labels, rows })
}

/// Single many-to-one row for treatment `i`, tested with the variance of the
/// whole design.
pub fn pairwise_row(g: usize, i: usize) -> Result<ContrastMatrix> {
    if i == 0 || i >= g {
        return Err(Error::IndexOutOfRange { index: i, groups: g });
    }
    let mut row = vec![0.0; g];
    row[0] = -1.0;
    row[i] = 1.0;
    Ok(ContrastMatrix {
        kind: ContrastKind::PairwiseRow,
        active: Subset::singleton(i),
        labels: vec![format!("{i} - 0")],
        rows: vec![row],
    })
}

impl ContrastMatrix {
    /// User-supplied rows; each must be nonzero and sum to zero.
    pub fn custom(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Dimension("contrast matrix has no rows".into()));
        };
        let g = first.len();
        if labels.len() != rows.len() {
            return Err(Error::Dimension(format!("{} labels for {} rows", labels.len(), rows.len())));
        }
        let mut active = 0u32;
        for (q, row) in rows.iter().enumerate() {
            if row.len() != g {
                return Err(Error::Dimension(format!("row {q} has {} columns, expected {g}", row.len())));
            }
            let scale: f64 = row.iter().map(|c| c.abs()).sum();
            if scale == 0.0 || !scale.is_finite() {
                return Err(Error::DegenerateContrast(q));
            }
            if row.iter().sum::<f64>().abs() > 1e-12 * scale {
                return Err(Error::InvalidData(format!("contrast row {q} does not sum to zero")));
            }
            for (j, &c) in row.iter().enumerate().skip(1) {
                if c != 0.0 && j <= 32 {
                    active |= 1 << (j - 1);
                }
            }
        }
        Ok(ContrastMatrix { kind: ContrastKind::Custom, active: Subset(active), labels, rows })
    }

    pub fn q(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Row labels rendered with group names instead of indices.
    pub fn named_labels(&self, groups: &[String]) -> Vec<String> {
        let name = |i: usize| groups.get(i).cloned().unwrap_or_else(|| i.to_string());
        match self.kind {
            ContrastKind::Dunnett | ContrastKind::PairwiseRow => self
                .rows
                .iter()
                .map(|r| {
                    let i = r.iter().position(|&c| c > 0.0).unwrap_or(0);
                    format!("{} - {}", name(i), name(0))
                })
                .collect(),
            ContrastKind::GrandMean => self
                .rows
                .iter()
                .map(|r| {
                    let t = r.iter().position(|&c| c < 0.0).unwrap_or(0);
                    format!("mean(others) - {}", name(t))
                })
                .collect(),
            ContrastKind::Custom => self.labels.clone(),
        }
    }
}

/// Correlation matrix of contrast statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    /// Wraps a matrix after checking shape, symmetry and unit diagonal.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("correlation matrix is {}x{}", m.nrows(), m.ncols())));
        }
        for i in 0..m.nrows() {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Dimension(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 || m[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(Error::Dimension(format!("entry ({i},{j}) is not a valid correlation")));
                }
            }
        }
        Ok(Self(m))
    }

    /// Equicorrelated matrix with off-diagonal `rho`.
    pub fn equicorrelated(q: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rho }))
    }

    pub fn identity(q: usize) -> Self {
        Self(DMatrix::identity(q, q))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone()).eigenvalues.min()
    }

    /// Clips eigenvalues below 1e-10 to zero and rescales to unit diagonal.
    /// Fails when the smallest eigenvalue is clearly negative.
    pub fn repaired(&self) -> Result<CorrelationMatrix> {
        let eig = SymmetricEigen::new(self.0.clone());
        let min = eig.eigenvalues.min();
        if min < -1e-6 {
            return Err(Error::NotPsd(min));
        }
        if min >= 1e-10 {
            return Ok(self.clone());
        }
        let clipped = eig.eigenvalues.map(|l| if l < 1e-10 { 0.0 } else { l });
        let m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].sqrt()).collect();
        if d.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::NotPsd(min));
        }
        let mut out = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / (d[i] * d[j]));
        for i in 0..out.nrows() {
            out[(i, i)] = 1.0;
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(CorrelationMatrix(out))
    }

    /// Joint selection or permutation of rows and columns: entry `(i, j)` of
    /// the result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let q = perm.len();
        Self(DMatrix::from_fn(q, q, |i, j| self.0[(perm[i], perm[j])]))
    }
}

/// `R_{qq'} = c_qᵀVc_{q'} / sqrt(c_qᵀVc_q · c_{q'}ᵀVc_{q'})`.
pub fn correlation(c: &ContrastMatrix, fit: &ModelFit) -> Result<CorrelationMatrix> {
    if c.columns() != fit.groups() {
        return Err(Error::Dimension(format!(
            "contrast matrix has {} columns for {} groups",
            c.columns(),
            fit.groups()
        )));
    }
    let q = c.q();
    let var: Vec<f64> = c.rows.iter().map(|r| fit.quadratic(r, r)).collect();
    if let Some(bad) = var.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateContrast(bad));
    }
    let mut m = DMatrix::<f64>::identity(q, q);
    for i in 0..q {
        for j in 0..i {
            let r = (fit.quadratic(&c.rows[i], &c.rows[j]) / (var[i] * var[j]).sqrt()).clamp(-1.0, 1.0);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix(m))
}
