//! Monte-Carlo FWER and power estimation for normal one-way designs.
//!
//! Every run draws fresh data from its own ChaCha substream of the scenario
//! seed and feeds the same pseudo-data to every requested procedure. Counts
//! are integers, so the result does not depend on the number of workers.

use std::fmt::Write as _;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closure::{mix_seed, ClosureDecider, ClosureOptions, Procedure};
use crate::error::{Error, Result};
use crate::marginal::Sidedness;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Group sizes, control first.
    pub n: Vec<usize>,
    pub mu: Vec<f64>,
    pub sd: Vec<f64>,
    pub alpha: f64,
    pub side: Sidedness,
    pub runs: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(n: Vec<usize>, mu: Vec<f64>, sd: Vec<f64>) -> Self {
        Self { name: None, n, mu, sd, alpha: 0.05, side: Sidedness::TwoSided, runs: 2000, seed: 1 }
    }

    pub fn with_runs(mut self, runs: u64) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_side(mut self, side: Sidedness) -> Self {
        self.side = side;
        self
    }

    pub fn groups(&self) -> usize {
        self.n.len()
    }

    /// Treatments whose mean equals the control mean.
    pub fn true_nulls(&self) -> Vec<usize> {
        (1..self.groups()).filter(|&i| self.mu[i] == self.mu[0]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.n.len();
        if g < 2 {
            return Err(Error::InvalidData("a scenario needs a control and at least one treatment".into()));
        }
        if self.mu.len() != g || self.sd.len() != g {
            return Err(Error::Dimension(format!(
                "n has {g} entries, mu {}, sd {}",
                self.mu.len(),
                self.sd.len()
            )));
        }
        if let Some(i) = self.n.iter().position(|&n| n < 2) {
            return Err(Error::InvalidData(format!("n[{i}] = {} is below 2", self.n[i])));
        }
        if let Some(i) = self.sd.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidData(format!("sd[{i}] = {} is not positive", self.sd[i])));
        }
        if let Some(i) = self.mu.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidData(format!("mu[{i}] is not finite")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidData(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.runs == 0 {
            return Err(Error::InvalidData("runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which error notion the scenario measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwerType {
    /// All treatment means equal the control (global null).
    Weak,
    /// Some nulls true, some false.
    Strong,
    /// No true null.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRates {
    pub procedure: Procedure,
    /// Fraction of runs rejecting `H_i`, treatment order.
    pub per_pair: Vec<f64>,
    pub per_pair_se: Vec<f64>,
    /// Fraction of runs rejecting at least one hypothesis.
    pub any_pair: f64,
    pub any_pair_se: f64,
    /// Fraction of runs rejecting at least one true null.
    pub fwer: f64,
    pub fwer_se: f64,
    /// `patterns[mask]` counts runs whose rejection set is exactly `mask`
    /// (bit `i - 1` for treatment `i`).
    pub patterns: Vec<u64>,
}

impl ProcedureRates {
    /// Fraction of runs rejecting at least one hypothesis in `mask`.
    pub fn union_rate(&self, mask: u32) -> f64 {
        let runs: u64 = self.patterns.iter().sum();
        let hit: u64 =
            self.patterns.iter().enumerate().filter(|(m, _)| *m as u32 & mask != 0).map(|(_, c)| c).sum();
        hit as f64 / runs as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub scenario: Scenario,
    pub fwer_type: FwerType,
    pub procedures: Vec<ProcedureRates>,
    /// Runs aborted by numeric failures.
    pub failures: u64,
}

impl PowerReport {
    pub fn rates(&self, procedure: Procedure) -> Option<&ProcedureRates> {
        self.procedures.iter().find(|r| r.procedure == procedure)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub procedures: Vec<Procedure>,
    /// Multivariate-t accuracy and CTP-F variants; `side` comes from the
    /// scenario.
    pub closure: ClosureOptions,
    /// Worker cap; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { procedures: Procedure::ALL.to_vec(), closure: ClosureOptions::default(), threads: None }
    }
}

fn se(p: f64, runs: u64) -> f64 {
    (p * (1.0 - p) / runs as f64).sqrt()
}

/// Draws one data set and returns per-group means and sums of squares.
fn draw(sc: &Scenario, run: u64, buf: &mut Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(run);
    let g = sc.groups();
    let mut means = Vec::with_capacity(g);
    let mut ss = Vec::with_capacity(g);
    for i in 0..g {
        buf.clear();
        buf.extend((0..sc.n[i]).map(|_| sc.mu[i] + sc.sd[i] * rng.sample::<f64, _>(StandardNormal)));
        let m = buf.iter().sum::<f64>() / buf.len() as f64;
        means.push(m);
        ss.push(buf.iter().map(|y| (y - m) * (y - m)).sum());
    }
    (means, ss)
}

/// Rejection-pattern counts of each decider over a range of runs.
fn count_runs(sc: &Scenario, deciders: &[ClosureDecider], runs: Range<u64>) -> Vec<Vec<u64>> {
    let k = sc.groups() - 1;
    let mut counts = vec![vec![0u64; 1 << k]; deciders.len()];
    let mut buf = Vec::new();
    for run in runs {
        let (means, ss) = draw(sc, run, &mut buf);
        for (d, c) in deciders.iter().zip(counts.iter_mut()) {
            let mask = d.decide(&means, &ss).iter().enumerate().filter(|(_, &r)| r).fold(0usize, |m, (i, _)| m | 1 << i);
            c[mask] += 1;
        }
    }
    counts
}

/// Estimates per-pair, any-pair and familywise rejection rates.
pub fn simulate(sc: &Scenario, opts: &SimulationOptions) -> Result<PowerReport> {
    sc.validate()?;
    let k = sc.groups() - 1;
    if k > 16 {
        return Err(Error::TooManyGroups(k));
    }
    let closure = ClosureOptions { side: sc.side, alpha: Some(sc.alpha), ..opts.closure };
    // One seed for all procedures: nodes shared between them (the global
    // many-to-one node of Dunnett and CTP-Du) get identical critical values.
    let deciders = opts
        .procedures
        .iter()
        .map(|&p| ClosureDecider::new(&sc.n, p, sc.alpha, &closure, mix_seed(sc.seed, 1)))
        .collect::<Result<Vec<_>>>()?;

    const CHUNK: u64 = 64;
    let chunks: Vec<Range<u64>> =
        (0..sc.runs.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(sc.runs)).collect();
    let work = || {
        chunks
            .par_iter()
            .map(|r| count_runs(sc, &deciders, r.clone()))
            .reduce(
                || vec![vec![0u64; 1 << k]; deciders.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        for (u, v) in x.iter_mut().zip(y) {
                            *u += v;
                        }
                    }
                    a
                },
            )
    };
    let counts = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?
            .install(work),
        None => work(),
    };

    let nulls = sc.true_nulls();
    let null_mask: usize = nulls.iter().fold(0, |m, &i| m | 1 << (i - 1));
    let runs = sc.runs;
    let rate = |c: u64| c as f64 / runs as f64;
    let procedures = opts
        .procedures
        .iter()
        .zip(counts)
        .map(|(&procedure, patterns)| {
            let per_pair: Vec<f64> = (0..k)
                .map(|i| rate(patterns.iter().enumerate().filter(|(m, _)| m & 1 << i != 0).map(|(_, c)| c).sum()))
                .collect();
            let any_pair = rate(patterns.iter().skip(1).sum());
            let fwer = rate(patterns.iter().enumerate().filter(|(m, _)| m & null_mask != 0).map(|(_, c)| c).sum());
            ProcedureRates {
                procedure,
                per_pair_se: per_pair.iter().map(|&p| se(p, runs)).collect(),
                per_pair,
                any_pair,
                any_pair_se: se(any_pair, runs),
                fwer,
                fwer_se: se(fwer, runs),
                patterns,
            }
        })
        .collect();
    let fwer_type = match nulls.len() {
        0 => FwerType::Power,
        n if n == k => FwerType::Weak,
        _ => FwerType::Strong,
    };
    Ok(PowerReport { scenario: sc.clone(), fwer_type, procedures, failures: 0 })
}

mod config {
    use serde::Deserialize;
    use toml::Spanned;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(super) struct File {
        pub alpha: Option<Spanned<f64>>,
        pub side: Option<Spanned<String>>,
        pub runs: Option<Spanned<i64>>,
        pub seed: Option<Spanned<i64>>,
        #[serde(default)]
        pub scenario: Vec<Block>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(super) struct Block {
        pub name: Option<String>,
        pub n: Spanned<Vec<i64>>,
        pub mu: Spanned<Vec<f64>>,
        pub sd: Spanned<Vec<f64>>,
        pub alpha: Option<Spanned<f64>>,
        pub side: Option<Spanned<String>>,
        pub runs: Option<Spanned<i64>>,
        pub seed: Option<Spanned<i64>>,
    }
}

/// Parses a `--side` style value.
pub fn parse_side(s: &str) -> Result<Sidedness> {
    match s {
        "two-sided" | "two" | "both" => Ok(Sidedness::TwoSided),
        "greater" | "upper" => Ok(Sidedness::Greater),
        "less" | "lower" => Ok(Sidedness::Less),
        _ => Err(Error::Parse(format!("unknown side `{s}` (expected two-sided, greater or less)"))),
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses a scenario file.
///
/// Grammar (TOML): optional top-level defaults `alpha`, `side`, `runs` and
/// `seed`, then one `[[scenario]]` table per design with arrays `n`, `mu`,
/// `sd` (control first) and optional `name`, `alpha`, `side`, `runs`,
/// `seed` overrides. Scenarios without their own seed get
/// `mix(seed, position)`.
pub fn parse_scenarios(src: &str) -> Result<Vec<Scenario>> {
    let file: config::File = toml::from_str(src).map_err(|e| {
        let line = e.span().map(|s| line_of(src, s.start)).unwrap_or(0);
        Error::Parse(format!("line {line}: {}", e.message()))
    })?;
    let err = |span: Range<usize>, field: &str, msg: String| {
        Error::Parse(format!("line {}: field `{field}`: {msg}", line_of(src, span.start)))
    };
    let side_of = |s: &toml::Spanned<String>| parse_side(s.get_ref()).map_err(|e| err(s.span(), "side", e.to_string()));
    let nonneg = |v: &toml::Spanned<i64>, field: &str| -> Result<u64> {
        u64::try_from(*v.get_ref()).map_err(|_| err(v.span(), field, "must not be negative".into()))
    };

    let alpha = file.alpha.as_ref().map(|a| *a.get_ref()).unwrap_or(0.05);
    let side = file.side.as_ref().map(side_of).transpose()?.unwrap_or(Sidedness::TwoSided);
    let runs = file.runs.as_ref().map(|r| nonneg(r, "runs")).transpose()?.unwrap_or(2000);
    let seed = file.seed.as_ref().map(|s| nonneg(s, "seed")).transpose()?.unwrap_or(1);
    if let Some(a) = &file.alpha {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(err(a.span(), "alpha", format!("{alpha} outside (0, 1)")));
        }
    }

    file.scenario
        .iter()
        .enumerate()
        .map(|(idx, b)| {
            let g = b.n.get_ref().len();
            if g < 2 {
                return Err(err(b.n.span(), "n", "needs a control and at least one treatment".into()));
            }
            for (field, len, span) in [("mu", b.mu.get_ref().len(), b.mu.span()), ("sd", b.sd.get_ref().len(), b.sd.span())] {
                if len != g {
                    return Err(err(span, field, format!("has {len} entries, n has {g}")));
                }
            }
            let n = b
                .n
                .get_ref()
                .iter()
                .map(|&x| if x >= 2 { Ok(x as usize) } else { Err(err(b.n.span(), "n", format!("{x} is below 2"))) })
                .collect::<Result<Vec<_>>>()?;
            if let Some(s) = b.sd.get_ref().iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
                return Err(err(b.sd.span(), "sd", format!("{s} is not positive")));
            }
            if b.mu.get_ref().iter().any(|m| !m.is_finite()) {
                return Err(err(b.mu.span(), "mu", "entries must be finite".into()));
            }
            let a = match &b.alpha {
                Some(a) if !(*a.get_ref() > 0.0 && *a.get_ref() < 1.0) => {
                    return Err(err(a.span(), "alpha", format!("{} outside (0, 1)", a.get_ref())))
                }
                Some(a) => *a.get_ref(),
                None => alpha,
            };
            let r = b.runs.as_ref().map(|r| nonneg(r, "runs")).transpose()?.unwrap_or(runs);
            if r == 0 {
                let span = b.runs.as_ref().map(|r| r.span()).unwrap_or(b.n.span());
                return Err(err(span, "runs", "must be at least 1".into()));
            }
            Ok(Scenario {
                name: b.name.clone(),
                n,
                mu: b.mu.get_ref().clone(),
                sd: b.sd.get_ref().clone(),
                alpha: a,
                side: b.side.as_ref().map(side_of).transpose()?.unwrap_or(side),
                runs: r,
                seed: b.seed.as_ref().map(|s| nonneg(s, "seed")).transpose()?.unwrap_or(mix_seed(seed, idx as u64)),
            })
        })
        .collect()
}

/// Reads and parses a scenario file.
pub fn scenario_table(path: impl AsRef<std::path::Path>) -> Result<Vec<Scenario>> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_scenarios(&src)
}

/// Bundled designs of the four-group reference table.
pub const REFERENCE_DESIGNS: &str = include_str!("../data/reference_designs.toml");

/// One-letter column prefix of a procedure in tables.
pub fn letter(p: Procedure) -> char {
    match p {
        Procedure::Dunnett => 'D',
        Procedure::CtpDu => 'N',
        Procedure::CtpF => 'C',
        Procedure::CtpGm => 'W',
    }
}

fn from_letter(c: char) -> Option<Procedure> {
    Procedure::ALL.into_iter().find(|&p| letter(p) == c)
}

/// Number formatting of table cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Six significant digits.
    #[default]
    Significant,
    /// Shortest representation that round-trips.
    Full,
}

/// Formats `x` with six significant digits, or exactly with `Full`.
pub fn format_float(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Full => format!("{x}"),
        Precision::Significant => format!("{}", round_significant(x, 6)),
    }
}

/// Rounds to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Header of the CSV table for `g` groups and the given procedures:
/// `n1..ng, s1..sg, m2..mg`, then per procedure letter `P1, P1_se, …, Pk,
/// Pk_se, P, P_se`, then `m1, runs`.
pub fn csv_header(g: usize, procedures: &[Procedure]) -> String {
    let mut cols: Vec<String> = Vec::new();
    cols.extend((1..=g).map(|i| format!("n{i}")));
    cols.extend((1..=g).map(|i| format!("s{i}")));
    cols.extend((2..=g).map(|i| format!("m{i}")));
    for &p in procedures {
        let l = letter(p);
        for i in 1..g {
            cols.push(format!("{l}{i}"));
            cols.push(format!("{l}{i}_se"));
        }
        cols.push(l.to_string());
        cols.push(format!("{l}_se"));
    }
    cols.push("m1".into());
    cols.push("runs".into());
    cols.join(",")
}

fn table_shape(reports: &[PowerReport]) -> Result<(usize, Vec<Procedure>)> {
    let Some(first) = reports.first() else { return Ok((0, Vec::new())) };
    let g = first.scenario.groups();
    let procs: Vec<Procedure> = first.procedures.iter().map(|r| r.procedure).collect();
    for r in reports {
        if r.scenario.groups() != g || r.procedures.iter().map(|p| p.procedure).ne(procs.iter().copied()) {
            return Err(Error::Dimension("reports in one table must share groups and procedures".into()));
        }
    }
    Ok((g, procs))
}

/// CSV rendering: one row per report under [`csv_header`].
pub fn emit_csv(reports: &[PowerReport], precision: Precision) -> Result<String> {
    let (g, procs) = table_shape(reports)?;
    let mut out = String::new();
    if reports.is_empty() {
        return Ok(out);
    }
    out.push_str(&csv_header(g, &procs));
    out.push('\n');
    let f = |x: f64| format_float(x, precision);
    for r in reports {
        let sc = &r.scenario;
        let mut cells: Vec<String> = sc.n.iter().map(|n| n.to_string()).collect();
        cells.extend(sc.sd.iter().map(|&s| f(s)));
        cells.extend(sc.mu[1..].iter().map(|&m| f(m)));
        for p in &r.procedures {
            for (x, e) in p.per_pair.iter().zip(&p.per_pair_se) {
                cells.push(f(*x));
                cells.push(f(*e));
            }
            cells.push(f(p.any_pair));
            cells.push(f(p.any_pair_se));
        }
        cells.push(f(sc.mu[0]));
        cells.push(sc.runs.to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Aligned text rendering in the same column order, without standard
/// errors; rates with three decimals.
pub fn emit_text(reports: &[PowerReport]) -> Result<String> {
    let (g, procs) = table_shape(reports)?;
    if reports.is_empty() {
        return Ok(String::new());
    }
    let mut header: Vec<String> = Vec::new();
    header.extend((1..=g).map(|i| format!("n{i}")));
    header.extend((1..=g).map(|i| format!("s{i}")));
    header.extend((2..=g).map(|i| format!("m{i}")));
    for &p in &procs {
        let l = letter(p);
        header.extend((1..g).map(|i| format!("{l}{i}")));
        header.push(l.to_string());
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let sc = &r.scenario;
            let mut cells: Vec<String> = sc.n.iter().map(|n| n.to_string()).collect();
            cells.extend(sc.sd.iter().map(|s| format!("{s}")));
            cells.extend(sc.mu[1..].iter().map(|m| format!("{m:.1}")));
            for p in &r.procedures {
                cells.extend(p.per_pair.iter().map(|x| format!("{x:.3}")));
                cells.push(format!("{:.3}", p.any_pair));
            }
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

/// Rates of one procedure as stored in a table row.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRates {
    pub procedure: Procedure,
    pub per_pair: Vec<f64>,
    pub per_pair_se: Vec<f64>,
    pub any_pair: f64,
    pub any_pair_se: f64,
}

/// A parsed CSV table row.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: Vec<usize>,
    pub sd: Vec<f64>,
    pub mu: Vec<f64>,
    pub runs: u64,
    pub rates: Vec<TableRates>,
}

impl TableRow {
    pub fn from_report(r: &PowerReport) -> Self {
        Self {
            n: r.scenario.n.clone(),
            sd: r.scenario.sd.clone(),
            mu: r.scenario.mu.clone(),
            runs: r.scenario.runs,
            rates: r
                .procedures
                .iter()
                .map(|p| TableRates {
                    procedure: p.procedure,
                    per_pair: p.per_pair.clone(),
                    per_pair_se: p.per_pair_se.clone(),
                    any_pair: p.any_pair,
                    any_pair_se: p.any_pair_se,
                })
                .collect(),
        }
    }
}

/// Parses CSV written by [`emit_csv`].
pub fn parse_csv(src: &str) -> Result<Vec<TableRow>> {
    let mut rdr = csv::Reader::from_reader(src.as_bytes());
    let header: Vec<String> =
        rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(str::to_string).collect();
    let g = header.iter().filter(|h| h.starts_with('n') && h[1..].parse::<usize>().is_ok()).count();
    let mut procs = Vec::new();
    for h in &header {
        let mut chars = h.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if let Some(p) = from_letter(c) {
                procs.push(p);
            }
        }
    }
    if header.join(",") != csv_header(g, &procs) {
        return Err(Error::Parse("CSV header does not match the table schema".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let cells: Vec<&str> = rec.iter().collect();
            let mut it = cells.iter();
            let mut next = || it.next().copied().ok_or_else(|| Error::Parse("short row".into()));
            let n = (0..g)
                .map(|_| next()?.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let sd = (0..g).map(|_| num(next()?)).collect::<Result<Vec<_>>>()?;
            let tail_mu = (1..g).map(|_| num(next()?)).collect::<Result<Vec<_>>>()?;
            let mut rates = Vec::new();
            for &p in &procs {
                let mut per_pair = Vec::new();
                let mut per_pair_se = Vec::new();
                for _ in 1..g {
                    per_pair.push(num(next()?)?);
                    per_pair_se.push(num(next()?)?);
                }
                let any_pair = num(next()?)?;
                let any_pair_se = num(next()?)?;
                rates.push(TableRates { procedure: p, per_pair, per_pair_se, any_pair, any_pair_se });
            }
            let m1 = num(next()?)?;
            let runs = next()?.parse::<u64>().map_err(|e| Error::Parse(e.to_string()))?;
            let mut mu = vec![m1];
            mu.extend(tail_mu);
            Ok(TableRow { n, sd, mu, runs, rates })
        })
        .collect()
}
