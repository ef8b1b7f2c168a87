//! Command-line front end: `analyze`, `simulate`, `tree` and `summary`.
//!
//! Exit codes: 0 success, 2 usage, data or configuration errors, 3 numeric
//! failures. Diagnostics go to stderr as single lines.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::closure::{export_tree, mix_seed, run_closure, ClosureOptions, ClosureResult, Procedure};
use crate::design::{fit_additive, fit_one_way, summarize};
use crate::error::Error;
use crate::io::{read_dataset, AnalysisReport, CsvSchema, ReportSettings};
use crate::marginal::{ElementaryMode, FDenominator, Sidedness};
use crate::mvt::MvtOptions;
use crate::simulation::{
    emit_csv, emit_text, format_float, scenario_table, simulate, Precision, SimulationOptions,
};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20240501;

#[derive(Debug, Parser)]
#[command(name = "dunnett-ctp", version, about = "Many-to-one comparisons: Dunnett and closed testing procedures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adjusted p-values for a dataset.
    Analyze(AnalyzeArgs),
    /// FWER and power simulation from a scenario file.
    Simulate(SimulateArgs),
    /// DOT decision trees from an analysis report.
    Tree(TreeArgs),
    /// Per-group n, mean and sd of a dataset.
    Summary(SummaryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dunnett,
    CtpF,
    CtpDu,
    CtpGm,
    All,
}

fn expand(methods: &[MethodArg]) -> Vec<Procedure> {
    let mut out = Vec::new();
    for m in methods {
        let add: &[Procedure] = match m {
            MethodArg::Dunnett => &[Procedure::Dunnett],
            MethodArg::CtpF => &[Procedure::CtpF],
            MethodArg::CtpDu => &[Procedure::CtpDu],
            MethodArg::CtpGm => &[Procedure::CtpGm],
            MethodArg::All => &Procedure::ALL,
        };
        for p in add {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    #[value(alias = "two-sided")]
    Two,
    Greater,
    Less,
}

impl From<SideArg> for Sidedness {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Two => Sidedness::TwoSided,
            SideArg::Greater => Sidedness::Greater,
            SideArg::Less => Sidedness::Less,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FDenominatorArg {
    SubsetRefit,
    FullResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ElementaryArg {
    PairwiseFullDf,
    SubsetF,
}

/// Options shared by the computing subcommands.
#[derive(Debug, Args)]
pub struct NumericArgs {
    /// Master seed for every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Absolute error target of multivariate-t probabilities.
    #[arg(long, default_value_t = 1e-4)]
    pub accuracy: f64,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Elementary test of the ANOVA closure.
    #[arg(long, value_enum, default_value_t = ElementaryArg::PairwiseFullDf)]
    pub f_elementary: ElementaryArg,
    /// Residual variance of subset F-tests.
    #[arg(long, value_enum, default_value_t = FDenominatorArg::SubsetRefit)]
    pub f_denominator: FDenominatorArg,
    /// Write floats at full precision instead of six significant digits.
    #[arg(long)]
    pub full_precision: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    pub data: PathBuf,
    #[arg(long, default_value = "group")]
    pub group_column: String,
    #[arg(long, default_value = "response")]
    pub response_column: String,
    /// Additive block factor column; switches to the additive model.
    #[arg(long)]
    pub block_column: Option<String>,
    /// Label of the control group (default: first label in sort order).
    #[arg(long)]
    pub control_label: Option<String>,
}

impl DataArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            group_column: self.group_column.clone(),
            response_column: self.response_column.clone(),
            block_column: self.block_column.clone(),
            control_label: self.control_label.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = SideArg::Two)]
    pub side: SideArg,
    /// Procedures, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub method: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving one `<method>.dot` per closed procedure.
    #[arg(long)]
    pub emit_tree: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    pub config: PathBuf,
    /// Override the runs of every scenario.
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub method: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub numeric: NumericArgs,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Report written by `analyze`.
    pub report: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub method: Vec<MethodArg>,
    /// Output directory (one `<method>.dot` each); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub full_precision: bool,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotPsd(_) | Error::Domain(_) | Error::DegenerateContrast(_) | Error::InvalidBounds(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Tree(a) => tree(a),
        Command::Summary(a) => summary(a),
    }
}

fn install_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        // Fails only if a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, content).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::data(format!("--alpha {alpha} outside (0, 1)")))
    }
}

fn check_accuracy(acc: f64) -> CliResult<()> {
    if acc > 0.0 && acc < 1.0 {
        Ok(())
    } else {
        Err(CliError::data(format!("--accuracy {acc} outside (0, 1)")))
    }
}

fn closure_options(n: &NumericArgs, side: Sidedness, alpha: Option<f64>) -> ClosureOptions {
    ClosureOptions {
        side,
        alpha,
        mvt: MvtOptions::with_accuracy(n.accuracy),
        elementary: match n.f_elementary {
            ElementaryArg::PairwiseFullDf => ElementaryMode::PairwiseFullDf,
            ElementaryArg::SubsetF => ElementaryMode::SubsetF,
        },
        f_denominator: match n.f_denominator {
            FDenominatorArg::SubsetRefit => FDenominator::SubsetRefit,
            FDenominatorArg::FullResidual => FDenominator::FullResidual,
        },
    }
}

fn analyze(a: &AnalyzeArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    check_accuracy(a.numeric.accuracy)?;
    install_threads(a.numeric.threads);
    let data = read_dataset(&a.data.data, &a.data.schema())?;
    let fit = if a.data.block_column.is_some() { fit_additive(&data)? } else { fit_one_way(&data)? };
    let side = Sidedness::from(a.side);
    let opts = closure_options(&a.numeric, side, Some(a.alpha));
    let seed = a.numeric.seed.unwrap_or(DEFAULT_SEED);
    let results = expand(&a.method)
        .into_iter()
        .map(|p| run_closure(&fit, p, &opts, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = ReportSettings {
        alpha: a.alpha,
        side,
        seed,
        accuracy: a.numeric.accuracy,
        f_elementary: opts.elementary,
        f_denominator: opts.f_denominator,
    };
    let report = AnalysisReport::new(&fit, settings, results);
    let precision = if a.numeric.full_precision { Precision::Full } else { Precision::Significant };
    let text = match a.format {
        Format::Json => report.to_json(a.numeric.full_precision)?,
        Format::Csv => adjusted_csv(&report.results, precision),
        Format::Text => adjusted_text(&report.results),
    };
    write_output(a.out.as_deref(), &text)?;
    if let Some(dir) = &a.emit_tree {
        let back = report.reparsed(a.numeric.full_precision)?;
        write_trees(&back.results, Some(dir))?;
    }
    Ok(())
}

/// One row per treatment, one adjusted-p column per procedure.
pub fn adjusted_csv(results: &[ClosureResult], precision: Precision) -> String {
    let mut out = String::from("treatment");
    for r in results {
        out.push(',');
        out.push_str(r.procedure.name());
    }
    out.push('\n');
    if let Some(first) = results.first() {
        for (i, label) in first.labels.iter().enumerate() {
            out.push_str(label);
            for r in results {
                out.push(',');
                out.push_str(&format_float(r.adjusted[i], precision));
            }
            out.push('\n');
        }
    }
    out
}

/// Aligned adjusted p-values (4 decimals); `*` marks rejection at the
/// stored level.
pub fn adjusted_text(results: &[ClosureResult]) -> String {
    let Some(first) = results.first() else { return String::new() };
    let lw = first.labels.iter().map(|l| l.len()).chain(["treatment".len()]).max().unwrap_or(9);
    let mut out = format!("{:<lw$}", "treatment");
    for r in results {
        let _ = write!(out, " {:>9}", r.procedure.name());
    }
    out.push('\n');
    for (i, label) in first.labels.iter().enumerate() {
        let _ = write!(out, "{label:<lw$}");
        for r in results {
            let mark = match &r.rejected_at {
                Some(rej) if rej.rejected.contains(&(i + 1)) => "*",
                _ => " ",
            };
            let _ = write!(out, " {:>8.4}{mark}", r.adjusted[i]);
        }
        out.push('\n');
    }
    if let Some(rej) = first.rejected_at.as_ref() {
        let _ = writeln!(out, "* rejected at alpha = {}", rej.alpha);
    }
    out
}

fn write_trees(results: &[ClosureResult], dir: Option<&Path>) -> CliResult<()> {
    let closed: Vec<&ClosureResult> = results.iter().filter(|r| r.procedure.is_closed()).collect();
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
            for r in closed {
                let path = dir.join(format!("{}.dot", r.procedure.name()));
                write_output(Some(&path), &export_tree(r))?;
            }
        }
        None => {
            for r in closed {
                print!("{}", export_tree(r));
            }
        }
    }
    Ok(())
}

fn tree(a: &TreeArgs) -> CliResult<()> {
    let src = std::fs::read_to_string(&a.report)
        .map_err(|e| CliError::data(format!("{}: {e}", a.report.display())))?;
    let report = AnalysisReport::from_json(&src)?;
    let wanted = expand(&a.method);
    if a.method.iter().all(|m| *m == MethodArg::Dunnett) {
        return Err(CliError::data("dunnett is a single-step procedure and has no closure tree"));
    }
    let chosen: Vec<ClosureResult> =
        report.results.into_iter().filter(|r| r.procedure.is_closed() && wanted.contains(&r.procedure)).collect();
    if chosen.is_empty() {
        return Err(CliError::data("report contains no closed procedure matching --method"));
    }
    write_trees(&chosen, a.out.as_deref())
}

fn simulate_cmd(a: &SimulateArgs) -> CliResult<()> {
    check_accuracy(a.numeric.accuracy)?;
    if let Some(alpha) = a.alpha {
        check_alpha(alpha)?;
    }
    if a.runs == Some(0) {
        return Err(CliError::data("--runs must be at least 1"));
    }
    let mut scenarios = scenario_table(&a.config)?;
    for (i, sc) in scenarios.iter_mut().enumerate() {
        if let Some(r) = a.runs {
            sc.runs = r;
        }
        if let Some(alpha) = a.alpha {
            sc.alpha = alpha;
        }
        if let Some(side) = a.side {
            sc.side = side.into();
        }
        if let Some(seed) = a.numeric.seed {
            sc.seed = mix_seed(seed, i as u64);
        }
    }
    let opts = SimulationOptions {
        procedures: expand(&a.method),
        closure: closure_options(&a.numeric, Sidedness::TwoSided, None),
        threads: a.numeric.threads,
    };
    let total = scenarios.len();
    let mut reports = Vec::with_capacity(total);
    for (i, sc) in scenarios.iter().enumerate() {
        let start = Instant::now();
        let r = simulate(sc, &opts)?;
        eprintln!(
            "[{}/{}] n={:?} mu={:?} sd={:?}: {} runs in {:.1}s",
            i + 1,
            total,
            sc.n,
            sc.mu,
            sc.sd,
            sc.runs,
            start.elapsed().as_secs_f64()
        );
        reports.push(r);
    }
    let precision = if a.numeric.full_precision { Precision::Full } else { Precision::Significant };
    let content = match a.format {
        Format::Csv => emit_csv(&reports, precision)?,
        Format::Text => emit_text(&reports)?,
        Format::Json => {
            let mut v = serde_json::to_value(&reports).map_err(|e| CliError::data(e.to_string()))?;
            if !a.numeric.full_precision {
                crate::io::round_json_numbers(&mut v);
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::data(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_output(a.out.as_deref(), &content)?;
    if a.out.is_some() && a.format == Format::Csv {
        print!("{}", emit_text(&reports)?);
    }
    Ok(())
}

fn summary(a: &SummaryArgs) -> CliResult<()> {
    let data = read_dataset(&a.data.data, &a.data.schema())?;
    let rows = summarize(&data);
    let precision = if a.full_precision { Precision::Full } else { Precision::Significant };
    let content = match a.format {
        Format::Csv => {
            let mut s = String::from("group,label,n,mean,sd,single_observation\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.group,
                    r.label,
                    r.n,
                    format_float(r.mean, precision),
                    format_float(r.sd, precision),
                    r.single_observation
                );
            }
            s
        }
        Format::Text => {
            let mut s = format!("{:>5} {:>12} {:>5} {:>12} {:>12}\n", "group", "label", "n", "mean", "sd");
            for r in &rows {
                let flag = if r.single_observation { " (single observation)" } else { "" };
                let _ = writeln!(s, "{:>5} {:>12} {:>5} {:>12.4} {:>12.4}{flag}", r.group, r.label, r.n, r.mean, r.sd);
            }
            s
        }
        Format::Json => {
            let mut v = serde_json::to_value(&rows).map_err(|e| CliError::data(e.to_string()))?;
            if !a.full_precision {
                crate::io::round_json_numbers(&mut v);
            }
            let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::data(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_output(a.out.as_deref(), &content)
}
