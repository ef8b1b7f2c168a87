//! Closed testing over the many-to-one intersection hypotheses
//! `H_S: μ_0 = μ_i for all i ∈ S`, plus the single-step Dunnett procedure
//! reported in the same shape.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::{
    correlation, dunnett_contrasts, grand_mean_contrasts, ContrastMatrix, Subset, MAX_TREATMENTS,
};
use crate::design::{FitModel, ModelFit};
use crate::error::{Error, Result};
use crate::marginal::{
    anova_f, mct_maxtest, two_sample_t, ElementaryMode, FDenominator, RowResult, Sidedness, TestMethod,
    TestResult, TwoSampleDf,
};
use crate::mvt::{equicoordinate_quantile, MvtOptions};
use crate::special::{f_sf, t_quantile};

/// Largest supported number of treatments (the closure has `2^k − 1` nodes).
pub const MAX_CLOSURE_TREATMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    /// Single-step Dunnett (not a closed procedure).
    Dunnett,
    /// Closure with ANOVA F-tests.
    CtpF,
    /// Closure with Dunnett tests on each subset.
    CtpDu,
    /// Closure with grand-mean contrast tests.
    CtpGm,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [Procedure::Dunnett, Procedure::CtpDu, Procedure::CtpF, Procedure::CtpGm];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Dunnett => "dunnett",
            Procedure::CtpF => "ctp-f",
            Procedure::CtpDu => "ctp-du",
            Procedure::CtpGm => "ctp-gm",
        }
    }

    pub fn is_closed(self) -> bool {
        self != Procedure::Dunnett
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// Settings shared by all nodes of a closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureOptions {
    pub side: Sidedness,
    /// Level used for the stored rejection set.
    pub alpha: Option<f64>,
    pub mvt: MvtOptions,
    pub elementary: ElementaryMode,
    pub f_denominator: FDenominator,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        Self {
            side: Sidedness::TwoSided,
            alpha: Some(0.05),
            mvt: MvtOptions::default(),
            elementary: ElementaryMode::default(),
            f_denominator: FDenominator::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisNode {
    pub subset: Subset,
    pub local_p: f64,
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub alpha: f64,
    /// Rejected elementary hypotheses (treatment indices).
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureResult {
    pub procedure: Procedure,
    pub side: Sidedness,
    /// Treatment labels, `labels[i - 1]` for treatment `i`.
    pub labels: Vec<String>,
    /// Ordered by size, then lexicographically.
    pub nodes: Vec<HypothesisNode>,
    /// Adjusted p-value of each elementary hypothesis, treatment order.
    pub adjusted: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rejected_at: Option<Rejection>,
}

impl ClosureResult {
    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn node(&self, s: Subset) -> Option<&HypothesisNode> {
        self.nodes.iter().find(|n| n.subset == s)
    }

    /// Largest local p-value over the stored nodes containing `s`. A node is
    /// rejected by the closure exactly when this is below α.
    pub fn node_adjusted(&self, s: Subset) -> f64 {
        self.nodes
            .iter()
            .filter(|n| s.is_subset_of(n.subset))
            .map(|n| n.local_p)
            .fold(0.0, f64::max)
    }

    /// Elementary hypotheses with adjusted p strictly below `alpha`.
    pub fn rejected(&self, alpha: f64) -> Vec<usize> {
        (1..=self.k()).filter(|&i| self.adjusted[i - 1] < alpha).collect()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// All nonempty subsets of `{1..k}`, by size and then lexicographically.
pub fn closure_subsets(k: usize) -> Vec<Subset> {
    let mut all: Vec<Subset> = (1..(1u32 << k)).map(Subset::from_bits).collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.indices().cmp(&b.indices())));
    all
}

fn treatments(fit: &ModelFit) -> Result<usize> {
    let k = fit.groups().saturating_sub(1);
    if k == 0 {
        return Err(Error::InvalidData("need a control and at least one treatment".into()));
    }
    if k > MAX_CLOSURE_TREATMENTS {
        return Err(Error::TooManyGroups(k));
    }
    Ok(k)
}

fn finish(
    procedure: Procedure,
    fit: &ModelFit,
    side: Sidedness,
    nodes: Vec<HypothesisNode>,
    alpha: Option<f64>,
) -> ClosureResult {
    let k = fit.groups() - 1;
    let mut adjusted = vec![0.0f64; k];
    for node in &nodes {
        for i in node.subset.iter() {
            adjusted[i - 1] = adjusted[i - 1].max(node.local_p);
        }
    }
    let mut result = ClosureResult {
        procedure,
        side,
        labels: fit.labels()[1..].to_vec(),
        nodes,
        adjusted,
        rejected_at: None,
    };
    result.rejected_at = alpha.map(|alpha| Rejection { alpha, rejected: result.rejected(alpha) });
    result
}

fn local_test(procedure: Procedure, s: Subset, fit: &ModelFit, opts: &ClosureOptions, seed: u64) -> Result<TestResult> {
    let g = fit.groups();
    match procedure {
        Procedure::CtpDu if s.len() == 1 => two_sample_t(s.max_index(), fit, opts.side, TwoSampleDf::PooledFull),
        Procedure::CtpDu => mct_maxtest(&dunnett_contrasts(g, s)?, fit, opts.side, &opts.mvt, seed),
        Procedure::CtpGm => mct_maxtest(&grand_mean_contrasts(g, s)?, fit, opts.side, &opts.mvt, seed),
        Procedure::CtpF => anova_f(s, fit, opts.elementary, opts.f_denominator, opts.side),
        Procedure::Dunnett => unreachable!("single-step Dunnett has no closure nodes"),
    }
}

/// Runs the closed testing procedure: every nonempty `S ⊆ {1..k}` gets a
/// local test and `p_i = max {p_S : i ∈ S}`. Node seeds derive from
/// `(seed, S)` so the nodes may be evaluated in parallel.
pub fn run_closure(fit: &ModelFit, procedure: Procedure, opts: &ClosureOptions, seed: u64) -> Result<ClosureResult> {
    if procedure == Procedure::Dunnett {
        return dunnett_single_step(fit, opts, seed);
    }
    let k = treatments(fit)?;
    let nodes = closure_subsets(k)
        .into_par_iter()
        .map(|s| {
            let test = local_test(procedure, s, fit, opts, mix_seed(seed, u64::from(s.bits())))?;
            Ok(HypothesisNode { subset: s, local_p: test.p, test })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(procedure, fit, opts.side, nodes, opts.alpha))
}

/// Classical single-step Dunnett: the adjusted p-values of the max-t test
/// on the full Dunnett matrix, one elementary node per treatment.
pub fn dunnett_single_step(fit: &ModelFit, opts: &ClosureOptions, seed: u64) -> Result<ClosureResult> {
    let k = treatments(fit)?;
    let c = dunnett_contrasts(fit.groups(), Subset::full(k))?;
    // Same stream as the global node of the CTP-Du closure.
    let full = mct_maxtest(&c, fit, opts.side, &opts.mvt, mix_seed(seed, u64::from(Subset::full(k).bits())))?;
    let rows = full.per_row.clone().unwrap_or_default();
    let nodes = rows
        .into_iter()
        .enumerate()
        .map(|(q, row)| {
            let test = TestResult {
                method: TestMethod::MctDunnett,
                p: row.p_adjusted,
                statistic: opts.side.orient(row.t),
                df_used: full.df_used,
                per_row: Some(vec![RowResult { ..row.clone() }]),
                mvt_error: full.mvt_error,
                degenerate: full.degenerate,
            };
            HypothesisNode { subset: Subset::singleton(q + 1), local_p: row.p_adjusted, test }
        })
        .collect();
    Ok(finish(Procedure::Dunnett, fit, opts.side, nodes, opts.alpha))
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_id(s: Subset) -> String {
    format!("H{}", s.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join("_"))
}

/// Graphviz DOT rendering of the hypothesis lattice.
///
/// Each node shows its subset and local p-value (4 decimals); edges run from
/// each `S` to every stored superset with one more element. When the result
/// carries a level, nodes rejected by the closure (all supersets locally
/// significant) get `style="filled,bold", fillcolor="#c6e2b5"`; the others
/// get `style="solid"`.
pub fn export_tree(result: &ClosureResult) -> String {
    let mut out = String::new();
    let name = result.procedure.name().replace('-', "_");
    let _ = writeln!(out, "digraph {name} {{");
    let _ = writeln!(out, "  rankdir=BT;");
    let _ = writeln!(out, "  node [shape=box, fontname=\"Helvetica\"];");
    let mut nodes: Vec<&HypothesisNode> = result.nodes.iter().collect();
    nodes.sort_by(|a, b| a.subset.indices().cmp(&b.subset.indices()));
    let alpha = result.rejected_at.as_ref().map(|r| r.alpha);
    for n in &nodes {
        let names: Vec<&str> = n.subset.iter().filter_map(|i| result.labels.get(i - 1).map(String::as_str)).collect();
        let label = format!("{}\\n{}\\np = {:.4}", n.subset, dot_escape(&names.join(", ")), n.local_p);
        let style = match alpha {
            Some(a) if result.node_adjusted(n.subset) < a => "style=\"filled,bold\", fillcolor=\"#c6e2b5\"",
            _ => "style=\"solid\"",
        };
        let _ = writeln!(out, "  {} [label=\"{}\", {}];", node_id(n.subset), label, style);
    }
    for n in &nodes {
        for m in &nodes {
            if m.subset.len() == n.subset.len() + 1 && n.subset.is_subset_of(m.subset) {
                let _ = writeln!(out, "  {} -> {};", node_id(n.subset), node_id(m.subset));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Local rule of one closure node with a precomputed critical value.
#[derive(Debug, Clone)]
enum NodeRule {
    /// Max over the rows of oriented `cᵀμ̂ / (S·scale)` exceeds `crit`.
    MaxT { rows: Vec<Vec<f64>>, scales: Vec<f64>, crit: f64 },
    /// ANOVA F on `{0} ∪ S`, decided through its p-value.
    F { groups: Vec<usize>, full_residual: bool },
}

/// Reject/accept decisions at level α for one-way fits with fixed group
/// sizes, without computing p-values.
///
/// For a one-way layout the correlation of every node's statistics depends
/// only on the sample sizes, so `p_S < α` is equivalent to the node's max
/// statistic exceeding the `1 − α` equicoordinate quantile, computed once.
/// Used by the simulation, where the same design is analysed many times.
#[derive(Debug, Clone)]
pub struct ClosureDecider {
    procedure: Procedure,
    n: Vec<usize>,
    side: Sidedness,
    alpha: f64,
    subsets: Vec<Subset>,
    rules: Vec<NodeRule>,
}

impl ClosureDecider {
    pub fn new(n: &[usize], procedure: Procedure, alpha: f64, opts: &ClosureOptions, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha = {alpha}")));
        }
        let g = n.len();
        let k = g.saturating_sub(1);
        if k == 0 {
            return Err(Error::InvalidData("need a control and at least one treatment".into()));
        }
        if k > MAX_CLOSURE_TREATMENTS {
            return Err(Error::TooManyGroups(k));
        }
        let total: usize = n.iter().sum();
        if n.contains(&0) || total <= g {
            return Err(Error::InvalidData(format!("group sizes {n:?} leave no residual df")));
        }
        let df = (total - g) as f64;
        let fit = ModelFit::one_way_design(n);
        let side = opts.side;
        let t_crit = match side {
            Sidedness::TwoSided => t_quantile(1.0 - alpha / 2.0, df)?,
            _ => t_quantile(1.0 - alpha, df)?,
        };
        let maxt = |c: ContrastMatrix, s: Subset| -> Result<NodeRule> {
            let scales = c.rows.iter().map(|r| fit.quadratic(r, r).sqrt()).collect();
            let crit = if c.q() == 1 {
                t_crit
            } else {
                let corr = correlation(&c, &fit)?;
                equicoordinate_quantile(&corr, df, 1.0 - alpha, side.tail(), &opts.mvt, mix_seed(seed, u64::from(s.bits())))?
            };
            Ok(NodeRule::MaxT { rows: c.rows, scales, crit })
        };
        let subsets = if procedure == Procedure::Dunnett { vec![Subset::full(k)] } else { closure_subsets(k) };
        let rules = subsets
            .iter()
            .map(|&s| match procedure {
                Procedure::Dunnett => maxt(dunnett_contrasts(g, s)?, s),
                Procedure::CtpDu => maxt(dunnett_contrasts(g, s)?, s),
                Procedure::CtpGm => maxt(grand_mean_contrasts(g, s)?, s),
                Procedure::CtpF if s.len() == 1 && opts.elementary == ElementaryMode::PairwiseFullDf => {
                    maxt(crate::contrasts::pairwise_row(g, s.max_index())?, s)
                }
                Procedure::CtpF => Ok(NodeRule::F {
                    groups: std::iter::once(0).chain(s.iter()).collect(),
                    full_residual: opts.f_denominator == FDenominator::FullResidual,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { procedure, n: n.to_vec(), side, alpha, subsets, rules })
    }

    pub fn procedure(&self) -> Procedure {
        self.procedure
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Whether node `idx` rejects, given group means and within-group sums
    /// of squares.
    fn node_rejects(&self, idx: usize, means: &[f64], ss: &[f64], s2: f64, df: usize) -> bool {
        match &self.rules[idx] {
            NodeRule::MaxT { rows, scales, crit } => {
                let s = s2.sqrt();
                rows.iter().zip(scales).any(|(row, &scale)| {
                    let est: f64 = row.iter().zip(means).map(|(c, m)| c * (m - means[0])).sum();
                    let t = if est == 0.0 {
                        0.0
                    } else if s == 0.0 {
                        est.signum() * f64::INFINITY
                    } else {
                        est / (s * scale)
                    };
                    self.side.orient(t) > *crit
                })
            }
            NodeRule::F { groups, full_residual } => {
                let ns: Vec<f64> = groups.iter().map(|&i| self.n[i] as f64).collect();
                let ms: Vec<f64> = groups.iter().map(|&i| means[i]).collect();
                let total: f64 = ns.iter().sum();
                let grand: f64 = ns.iter().zip(&ms).map(|(n, m)| n * m).sum::<f64>() / total;
                let between: f64 = ns.iter().zip(&ms).map(|(n, m)| n * (m - grand) * (m - grand)).sum();
                let r = (groups.len() - 1) as f64;
                let (s2, df) = if *full_residual {
                    (s2, df as f64)
                } else {
                    let d = total - groups.len() as f64;
                    (groups.iter().map(|&i| ss[i]).sum::<f64>() / d, d)
                };
                let f = if between == 0.0 {
                    0.0
                } else if s2 == 0.0 {
                    f64::INFINITY
                } else {
                    between / (r * s2)
                };
                f_sf(f, r, df).is_ok_and(|p| p < self.alpha)
            }
        }
    }

    /// Rejection of each elementary hypothesis from per-group means and
    /// within-group sums of squares.
    pub fn decide(&self, means: &[f64], ss: &[f64]) -> Vec<bool> {
        let g = self.n.len();
        assert_eq!(means.len(), g, "means length");
        assert_eq!(ss.len(), g, "sums of squares length");
        let df = self.n.iter().sum::<usize>() - g;
        let s2 = ss.iter().sum::<f64>() / df as f64;
        let k = g - 1;
        if self.procedure == Procedure::Dunnett {
            let NodeRule::MaxT { rows, scales, crit } = &self.rules[0] else { unreachable!() };
            let s = s2.sqrt();
            return rows
                .iter()
                .zip(scales)
                .map(|(row, &scale)| {
                    let est: f64 = row.iter().zip(means).map(|(c, m)| c * (m - means[0])).sum();
                    let t = if est == 0.0 { 0.0 } else if s == 0.0 { est.signum() * f64::INFINITY } else { est / (s * scale) };
                    self.side.orient(t) > *crit
                })
                .collect();
        }
        let mut alive = vec![true; k];
        // Largest nodes first: once every hypothesis is retained, stop.
        for idx in (0..self.subsets.len()).rev() {
            let s = self.subsets[idx];
            if !s.iter().any(|i| alive[i - 1]) {
                continue;
            }
            if !self.node_rejects(idx, means, ss, s2, df) {
                for i in s.iter() {
                    alive[i - 1] = false;
                }
                if !alive.iter().any(|&a| a) {
                    break;
                }
            }
        }
        alive
    }
}

impl ModelFit {
    /// A one-way fit skeleton with the given group sizes (zero means, unit
    /// variance), enough to derive contrast correlations.
    pub(crate) fn one_way_design(n: &[usize]) -> ModelFit {
        let samples: Vec<Vec<f64>> = n.iter().map(|&ni| (0..ni).map(|j| j as f64).collect()).collect();
        let data = crate::design::Dataset::from_samples(&samples).expect("valid design");
        let fit = crate::design::fit_one_way(&data).expect("valid design");
        debug_assert_eq!(fit.model, FitModel::OneWay);
        fit
    }
}

const _: () = assert!(MAX_CLOSURE_TREATMENTS <= MAX_TREATMENTS);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{fit_one_way, Dataset};

    fn fit(samples: &[Vec<f64>]) -> ModelFit {
        fit_one_way(&Dataset::from_samples(samples).unwrap()).unwrap()
    }

    fn sample_fit() -> ModelFit {
        fit(&[
            vec![10.1, 9.4, 10.8, 9.9, 10.2],
            vec![11.0, 12.3, 10.9, 11.8, 12.0],
            vec![10.0, 10.6, 9.8, 10.9, 10.4],
            vec![13.1, 12.2, 12.9, 13.5, 12.4],
        ])
    }

    #[test]
    fn subsets_ordered_by_size_then_lexicographic() {
        let s: Vec<String> = closure_subsets(3).iter().map(|s| s.to_string()).collect();
        assert_eq!(s, ["{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1,2,3}"]);
    }

    #[test]
    fn single_treatment_collapses() {
        let f = fit(&[vec![1.0, 2.0, 3.0], vec![2.5, 3.1, 4.4]]);
        let t = two_sample_t(1, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap().p;
        for p in Procedure::ALL {
            let r = run_closure(&f, p, &ClosureOptions::default(), 9).unwrap();
            assert_eq!(r.nodes.len(), 1);
            assert!((r.adjusted[0] - t).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn adjusted_is_max_over_supersets() {
        let f = sample_fit();
        let r = run_closure(&f, Procedure::CtpDu, &ClosureOptions::default(), 1).unwrap();
        let p = |bits: u32| r.node(Subset::from_bits(bits)).unwrap().local_p;
        let expect = [p(0b001), p(0b011), p(0b101), p(0b111)].into_iter().fold(0.0, f64::max);
        assert_eq!(r.adjusted[0], expect);
    }

    #[test]
    fn deterministic() {
        let f = sample_fit();
        let a = run_closure(&f, Procedure::CtpGm, &ClosureOptions::default(), 5).unwrap();
        let b = run_closure(&f, Procedure::CtpGm, &ClosureOptions::default(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_step_dominates_raw() {
        let f = sample_fit();
        let r = dunnett_single_step(&f, &ClosureOptions::default(), 2).unwrap();
        for i in 1..=3 {
            let raw = two_sample_t(i, &f, Sidedness::TwoSided, TwoSampleDf::PooledFull).unwrap().p;
            assert!(r.adjusted[i - 1] >= raw - 1e-4);
        }
    }

    #[test]
    fn tree_counts() {
        let f = sample_fit();
        let r = run_closure(&f, Procedure::CtpF, &ClosureOptions::default(), 1).unwrap();
        let dot = export_tree(&r);
        assert_eq!(dot.matches("[label=").count(), 7);
        assert_eq!(dot.matches(" -> ").count(), 9);
        let f2 = fit(&[vec![1.0, 2.0, 3.0], vec![2.5, 3.1, 4.4], vec![0.0, 1.0, 0.5]]);
        let r = run_closure(&f2, Procedure::CtpDu, &ClosureOptions::default(), 1).unwrap();
        let dot = export_tree(&r);
        assert_eq!(dot.matches("[label=").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 2);
    }

    #[test]
    fn too_many_groups() {
        let samples: Vec<Vec<f64>> = (0..22).map(|i| vec![i as f64, i as f64 + 1.0]).collect();
        assert_eq!(
            run_closure(&fit(&samples), Procedure::CtpF, &ClosureOptions::default(), 0).unwrap_err(),
            Error::TooManyGroups(21)
        );
    }

    #[test]
    fn decider_agrees_with_p_values() {
        let f = sample_fit();
        let samples = [
            vec![10.1, 9.4, 10.8, 9.9, 10.2],
            vec![11.0, 12.3, 10.9, 11.8, 12.0],
            vec![10.0, 10.6, 9.8, 10.9, 10.4],
            vec![13.1, 12.2, 12.9, 13.5, 12.4],
        ];
        let means: Vec<f64> = f.means.clone();
        let ss: Vec<f64> = samples
            .iter()
            .zip(&means)
            .map(|(v, m)| v.iter().map(|y| (y - m) * (y - m)).sum())
            .collect();
        for alpha in [0.001, 0.01, 0.05, 0.2] {
            let opts = ClosureOptions { alpha: Some(alpha), ..Default::default() };
            for p in Procedure::ALL {
                let r = run_closure(&f, p, &opts, 3).unwrap();
                let d = ClosureDecider::new(&f.n, p, alpha, &opts, 3).unwrap();
                let got = d.decide(&means, &ss);
                for i in 0..3 {
                    if (r.adjusted[i] - alpha).abs() > 1e-3 {
                        assert_eq!(got[i], r.adjusted[i] < alpha, "{p:?} alpha {alpha} H{}", i + 1);
                    }
                }
            }
        }
    }
}
