//! Command-line front end: `fit`, `simulate`, `mp`, `weights` and `split`.

mod render;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, ArgGroup, Args, Parser, Subcommand, ValueEnum};
use faer::Mat;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::estimators::{
    bootstrap_t1_interval, eigenprism_estimate, regression_error_interval, snr_interval, t1_interval,
    EigenPrismOptions, Estimand, Target, DEFAULT_BOOTSTRAP_REPLICATES,
};
use crate::io::{read_indices, read_table, read_vector, Table};
use crate::model::{select_rows, split_indices, standardize_columns, whiten, CovarianceSpec, Dataset};
use crate::mp::{are_curve, mp_model, numeric_are};
use crate::sim::{
    run_trials, summarize, BetaFamily, CorrelationSpec, CoverageReport, DesignFamily, Evaluation, NoiseFamily,
    Procedure, Sampler, SimulationScenario,
};
use crate::solver::{quadratic_kkt_residual, kkt_residual, solve_minmax, solve_weighted_quadratic, ConstraintSet};
use crate::spectrum::spectral_decompose;

#[derive(Parser, Debug)]
#[command(name = "eigenprism", version, about = "Variance-component inference for high-dimensional linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format: JSON lines or an aligned text table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write results here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,

    /// Progress messages on standard error.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Confidence interval from a dataset.
    Fit(FitArgs),
    /// Monte-Carlo coverage study.
    Simulate(SimulateArgs),
    /// Marčenko–Pastur constants and efficiency bounds.
    Mp(MpArgs),
    /// Optimal weights for a spectrum.
    Weights(WeightsArgs),
    /// Random row split into two independent parts.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("response_source").required(true).args(["y", "response"])))]
struct DataArgs {
    /// Design matrix, one observation per row (comma or tab separated).
    #[arg(long)]
    x: PathBuf,
    /// Response vector file.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Take the response from this named column of the design file.
    #[arg(long)]
    response: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Theta2,
    Sigma2,
    Snr,
    Error,
}

impl From<TargetArg> for Estimand {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Theta2 => Estimand::ThetaSquared,
            TargetArg::Sigma2 => Estimand::SigmaSquared,
            TargetArg::Snr => Estimand::Snr,
            TargetArg::Error => Estimand::RegressionErrorL2,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = TargetArg::Theta2)]
    target: TargetArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Known noise variance; switches θ² inference to the χ² interval.
    #[arg(long)]
    sigma2: Option<f64>,
    /// BCa bootstrap with this many replicates (with --sigma2).
    #[arg(long, requires = "sigma2")]
    bootstrap: Option<usize>,
    /// Refine the weights with a first-pass signal fraction.
    #[arg(long, conflicts_with = "sigma2")]
    two_step: bool,
    /// Zero the weights of the K largest eigenvalues.
    #[arg(long, default_value_t = 0, conflicts_with = "sigma2")]
    zero_first: usize,
    /// Keep the last weight free even when the smallest eigenvalue is zero.
    #[arg(long, conflicts_with = "sigma2")]
    no_zero_last: bool,
    /// Population covariance of the design rows (p×p); the design is whitened.
    #[arg(long, conflicts_with = "sigma2")]
    covariance: Option<PathBuf>,
    /// Coefficient estimate fitted on independent data (target error).
    #[arg(long)]
    beta_hat: Option<PathBuf>,
    /// 0-based column indices restricting the error norm (target error).
    #[arg(long, conflicts_with = "covariance")]
    subset: Option<PathBuf>,
    /// Standardize design columns before fitting.
    #[arg(long)]
    standardize: bool,
    /// Seed for the bootstrap.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML scenario file: one scenario, or an array of `[[scenario]]` tables.
    #[arg(long, conflicts_with_all = [
        "n", "p", "theta2", "sigma2", "rho", "target", "procedure", "replicates", "design", "beta",
        "noise", "sampler", "fixed_beta", "two_step", "zero_first", "alpha", "trials", "seed", "companion",
    ])]
    config: Option<PathBuf>,
    /// Sample sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Dimensions (comma separated).
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    #[arg(long, conflicts_with = "rho")]
    theta2: Option<f64>,
    #[arg(long, conflicts_with = "rho")]
    sigma2: Option<f64>,
    /// Signal fractions θ²/(θ²+σ²) with θ²+σ² = 1 (comma separated).
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    #[arg(long, value_enum)]
    procedure: Option<ProcedureArg>,
    /// Bootstrap replicates for `--procedure bootstrap`.
    #[arg(long)]
    replicates: Option<usize>,
    /// gaussian | bernoulli:Q | t:DF | dense-corr:RHO | sparse-corr:P
    #[arg(long, value_parser = parse_design)]
    design: Option<DesignFamily>,
    /// dense | sparse:FRACTION
    #[arg(long, value_parser = parse_beta)]
    beta: Option<BetaFamily>,
    /// gaussian | t:DF
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseFamily>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Draw β once and reuse it in every trial.
    #[arg(long)]
    fixed_beta: bool,
    #[arg(long)]
    two_step: bool,
    #[arg(long)]
    zero_first: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra interval on the same trials, as TARGET:PROCEDURE (repeatable).
    #[arg(long, value_parser = parse_companion)]
    companion: Vec<Evaluation>,
    /// Report failed trials instead of aborting.
    #[arg(long)]
    allow_failures: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "EIGENPRISM_THREADS")]
    threads: Option<usize>,
    /// Also write a CSV grid table for plotting.
    #[arg(long)]
    grid_table: Option<PathBuf>,
    /// Also write every trial outcome as JSON lines.
    #[arg(long)]
    trial_records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProcedureArg {
    Eigenprism,
    TwoStep,
    T1,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Explicit,
    Spectral,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["gamma", "are_curve"])))]
struct MpArgs {
    /// Aspect ratio n/p in (0, 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Tabulate the efficiency bound over a γ grid.
    #[arg(long)]
    are_curve: bool,
    /// γ values for the curve (comma separated).
    #[arg(long, value_delimiter = ',', requires = "are_curve")]
    gammas: Vec<f64>,
    /// Spectrum size for the finite-n width ratio.
    #[arg(long, default_value_t = 1000)]
    numeric_n: usize,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("spectrum_source").required(true).args(["lambda", "x"])))]
struct WeightsArgs {
    /// Eigenvalues of XXᵀ/p, one per line or row.
    #[arg(long)]
    lambda: Option<PathBuf>,
    /// Design matrix to take the eigenvalues from.
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightTarget::Theta2)]
    target: WeightTarget,
    #[arg(long, default_value_t = 0)]
    zero_first: usize,
    #[arg(long, default_value_t = 0)]
    zero_last: usize,
    /// Solve the weighted program with c = (ρλ + 1 - ρ)² instead of the min-max one.
    #[arg(long)]
    two_step_rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightTarget {
    Theta2,
    Sigma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StandardizeOrder {
    None,
    Before,
    After,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Share of rows in the first part (rounded half up).
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Column standardization relative to the split.
    #[arg(long, value_enum, default_value_t = StandardizeOrder::After)]
    standardize: StandardizeOrder,
    /// Output files are PREFIX.{1,2}.{x,y}.csv.
    #[arg(long)]
    out_prefix: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Runs the command line `argv` (program name first) against the process's
/// standard streams and returns the exit code: 0 on success, 1 on a data or
/// solver error, 2 on a usage error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let text = e.render().to_string();
            return match e.kind() {
                DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{text}");
                    if e.kind() == DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 }
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match execute(&cli, err) {
        Ok(records) => match emit(&cli, &records, out) {
            Ok(()) => 0,
            Err(e) => report(err, &e.into()),
        },
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Lib(e)) => report(err, &e),
    }
}

fn report(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "{}", json!({ "error": e.category(), "message": e.to_string() }));
    1
}

fn emit(cli: &Cli, records: &[Value], stdout: &mut dyn Write) -> std::io::Result<()> {
    let mut file;
    let out: &mut dyn Write = match &cli.output {
        Some(path) => {
            file = BufWriter::new(File::create(path)?);
            &mut file
        }
        None => stdout,
    };
    match cli.format {
        Format::Json => render::write_json_lines(out, records)?,
        Format::Table => render::write_table(out, records)?,
    }
    out.flush()
}

fn execute(cli: &Cli, err: &mut dyn Write) -> CliResult<Vec<Value>> {
    match &cli.command {
        Command::Fit(a) => fit(a).map(|r| vec![r]),
        Command::Simulate(a) => simulate(a, cli.verbose, err),
        Command::Mp(a) => mp(a),
        Command::Weights(a) => weights(a).map(|r| vec![r]),
        Command::Split(a) => split(a).map(|r| vec![r]),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("records serialize to JSON")
}

struct Loaded {
    data: Dataset,
    columns: Option<Vec<String>>,
}

fn load_data(a: &DataArgs) -> CliResult<Loaded> {
    let mut table = read_table(&a.x)?;
    let y = match (&a.y, &a.response) {
        (Some(path), None) => read_vector(path, None)?,
        (None, Some(name)) => {
            let j = table.column_index(name)?;
            table.take_column(j)
        }
        _ => return usage("exactly one of --y and --response is required"),
    };
    let Table { header, rows } = table;
    Ok(Loaded { data: Dataset::from_rows(&rows, y)?, columns: header })
}

fn read_matrix(path: &Path) -> CliResult<Mat<f64>> {
    let t = read_table(path)?;
    Ok(Mat::from_fn(t.rows.len(), t.ncols(), |i, j| t.rows[i][j]))
}

fn fit(a: &FitArgs) -> CliResult<Value> {
    let estimand: Estimand = a.target.into();
    if a.sigma2.is_some() && a.target != TargetArg::Theta2 {
        return usage("--sigma2 only applies to --target theta2");
    }
    if a.target != TargetArg::Error && (a.beta_hat.is_some() || a.subset.is_some()) {
        return usage("--beta-hat and --subset only apply to --target error");
    }
    if a.target == TargetArg::Error && a.beta_hat.is_none() {
        return usage("--target error requires --beta-hat");
    }
    let mut data = load_data(&a.data)?.data;
    if a.standardize {
        data = standardize_columns(&data)?;
    }
    let (n, p) = (data.n(), data.p());
    let opts = EigenPrismOptions {
        zero_first: a.zero_first,
        zero_last_if_null: !a.no_zero_last,
        alpha: a.alpha,
        two_step: a.two_step,
    };
    let cov = match &a.covariance {
        Some(path) => CovarianceSpec::Explicit(read_matrix(path)?),
        None => CovarianceSpec::Identity,
    };

    let est = if let Some(s2) = a.sigma2 {
        match a.bootstrap {
            Some(b) => bootstrap_t1_interval(data.y(), s2, a.alpha, b, a.seed)?,
            None => t1_interval(data.y(), s2, a.alpha)?,
        }
    } else if estimand == Estimand::RegressionErrorL2 {
        let beta_hat = read_vector(a.beta_hat.as_deref().expect("checked above"), None)?;
        let subset = a.subset.as_deref().map(read_indices).transpose()?;
        regression_error_interval(&data, &beta_hat, subset.as_deref(), &cov, &opts)?
    } else {
        let data = whiten(&data, &cov)?;
        let spec = spectral_decompose(&data)?;
        match estimand {
            Estimand::ThetaSquared => eigenprism_estimate(&spec, Target::ThetaSquared, &opts)?,
            Estimand::SigmaSquared => eigenprism_estimate(&spec, Target::SigmaSquared, &opts)?,
            _ => snr_interval(&spec, &opts)?,
        }
    };
    let mut record = json!({ "n": n, "p": p });
    if let (Value::Object(r), Value::Object(e)) = (&mut record, to_value(&est)) {
        r.extend(e);
    }
    Ok(record)
}

fn parse_kind_value(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((k, v)) => (k.trim(), Some(v.trim())),
        None => (s.trim(), None),
    }
}

fn number(v: Option<&str>, what: &str) -> Result<f64, String> {
    v.ok_or_else(|| format!("{what} needs a value, e.g. {what}:0.1"))?
        .parse()
        .map_err(|_| format!("{what}: not a number"))
}

fn parse_design(s: &str) -> Result<DesignFamily, String> {
    match parse_kind_value(s) {
        ("gaussian", None) => Ok(DesignFamily::GaussianIid),
        ("bernoulli", v) => Ok(DesignFamily::BernoulliIid { q: number(v, "bernoulli")? }),
        ("t", v) => Ok(DesignFamily::StudentT { df: number(v, "t")? }),
        ("dense-corr", v) => {
            Ok(DesignFamily::CorrelatedGaussian { correlation: CorrelationSpec::Dense { rho: number(v, "dense-corr")? } })
        }
        ("sparse-corr", v) => Ok(DesignFamily::CorrelatedGaussian {
            correlation: CorrelationSpec::Sparse { magnitude: number(v, "sparse-corr")? },
        }),
        _ => Err(format!("unknown design {s:?}; expected gaussian, bernoulli:Q, t:DF, dense-corr:RHO or sparse-corr:P")),
    }
}

fn parse_beta(s: &str) -> Result<BetaFamily, String> {
    match parse_kind_value(s) {
        ("dense", None) => Ok(BetaFamily::DenseGaussianDirection),
        ("sparse", v) => Ok(BetaFamily::Sparse { fraction_nonzero: number(v, "sparse")? }),
        _ => Err(format!("unknown coefficient family {s:?}; expected dense or sparse:F")),
    }
}

fn parse_noise(s: &str) -> Result<NoiseFamily, String> {
    match parse_kind_value(s) {
        ("gaussian", None) => Ok(NoiseFamily::Gaussian),
        ("t", v) => Ok(NoiseFamily::StudentT { df: number(v, "t")? }),
        _ => Err(format!("unknown noise {s:?}; expected gaussian or t:DF")),
    }
}

fn procedure_of(p: ProcedureArg, replicates: Option<usize>) -> Procedure {
    match p {
        ProcedureArg::Eigenprism => Procedure::EigenPrism,
        ProcedureArg::TwoStep => Procedure::TwoStep,
        ProcedureArg::T1 => Procedure::KnownSigmaT1,
        ProcedureArg::Bootstrap => {
            Procedure::BootstrapT1 { replicates: replicates.unwrap_or(DEFAULT_BOOTSTRAP_REPLICATES) }
        }
    }
}

fn parse_companion(s: &str) -> Result<Evaluation, String> {
    let (t, p) = s.split_once(':').ok_or_else(|| format!("expected TARGET:PROCEDURE, got {s:?}"))?;
    let target = TargetArg::from_str(t.trim(), true)?;
    let procedure = ProcedureArg::from_str(p.trim(), true)?;
    Ok(Evaluation { target: target.into(), procedure: procedure_of(procedure, None) })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Vec<SimulationScenario>,
}

fn load_scenarios(path: &Path) -> CliResult<Vec<SimulationScenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if let Ok(many) = toml::from_str::<ScenarioFile>(&text) {
        return Ok(many.scenario);
    }
    toml::from_str::<SimulationScenario>(&text)
        .map(|s| vec![s])
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())).into())
}

fn scenarios_from_flags(a: &SimulateArgs) -> CliResult<Vec<SimulationScenario>> {
    if a.replicates.is_some() && a.procedure != Some(ProcedureArg::Bootstrap) {
        return usage("--replicates only applies to --procedure bootstrap");
    }
    let signal: Vec<(f64, f64)> = if a.rho.is_empty() {
        vec![(a.theta2.unwrap_or(1.0), a.sigma2.unwrap_or(1.0))]
    } else {
        a.rho.iter().map(|&r| (r, 1.0 - r)).collect()
    };
    let ns = if a.n.is_empty() { vec![100] } else { a.n.clone() };
    let ps = if a.p.is_empty() { vec![2000] } else { a.p.clone() };
    let target = a.target.unwrap_or(TargetArg::Theta2).into();
    let mut out = Vec::new();
    for &(theta2, sigma2) in &signal {
        for &n in &ns {
            for &p in &ps {
                let mut s = SimulationScenario::new(n, p, theta2, sigma2, target, a.trials.unwrap_or(1000), a.seed.unwrap_or(1));
                s.procedure = procedure_of(a.procedure.unwrap_or(ProcedureArg::Eigenprism), a.replicates);
                s.alpha = a.alpha.unwrap_or(0.05);
                s.design = a.design.unwrap_or(DesignFamily::GaussianIid);
                s.beta_family = a.beta.unwrap_or(BetaFamily::DenseGaussianDirection);
                s.noise = a.noise.unwrap_or(NoiseFamily::Gaussian);
                s.sampler = match a.sampler.unwrap_or(SamplerArg::Explicit) {
                    SamplerArg::Explicit => Sampler::Explicit,
                    SamplerArg::Spectral => Sampler::Spectral,
                };
                s.fixed_beta = a.fixed_beta;
                s.options.two_step = a.two_step;
                s.options.zero_first = a.zero_first.unwrap_or(0);
                s.companions = a.companion.clone();
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Plot-ready row of a coverage report.
#[derive(Serialize)]
struct GridRow {
    target: Estimand,
    procedure: String,
    design: String,
    n: usize,
    p: usize,
    theta2: f64,
    sigma2: f64,
    trials: usize,
    completed: usize,
    failure_count: usize,
    empirical_coverage: f64,
    se_coverage: f64,
    mean_width: f64,
    mean_point: f64,
    expected_undercoverage: bool,
}

impl From<&CoverageReport> for GridRow {
    fn from(r: &CoverageReport) -> Self {
        let s = &r.scenario;
        let tag = |v: Value| v.get("kind").and_then(Value::as_str).unwrap_or("").to_string();
        GridRow {
            target: r.target,
            procedure: tag(to_value(&r.procedure)),
            design: tag(to_value(&s.design)),
            n: s.n,
            p: s.p,
            theta2: s.theta2,
            sigma2: s.sigma2,
            trials: r.trials,
            completed: r.completed,
            failure_count: r.failure_count,
            empirical_coverage: r.empirical_coverage,
            se_coverage: r.se_coverage,
            mean_width: r.mean_width,
            mean_point: r.mean_point,
            expected_undercoverage: r.expected_undercoverage,
        }
    }
}

fn simulate(a: &SimulateArgs, verbose: u8, err: &mut dyn Write) -> CliResult<Vec<Value>> {
    let mut scenarios = match &a.config {
        Some(path) => load_scenarios(path)?,
        None => scenarios_from_flags(a)?,
    };
    if a.allow_failures {
        scenarios.iter_mut().for_each(|s| s.allow_failures = true);
    }
    if a.threads == Some(0) {
        return usage("--threads must be at least 1");
    }
    let mut trial_out = a.trial_records.as_ref().map(|p| File::create(p).map(BufWriter::new)).transpose()?;
    let mut reports = Vec::new();
    for (k, s) in scenarios.iter().enumerate() {
        s.validate()?;
        let records = run_trials(s, a.threads)?;
        if let Some(w) = trial_out.as_mut() {
            for r in &records {
                writeln!(w, "{}", json!({ "scenario": k, "trial": r.trial, "outcomes": to_value(&r.outcomes) }))?;
            }
        }
        let batch = summarize(s, &records)?;
        if verbose > 0 {
            let _ = writeln!(err, "scenario {}/{} done (n = {}, p = {})", k + 1, scenarios.len(), s.n, s.p);
        }
        reports.extend(batch);
    }
    if let Some(w) = trial_out.as_mut() {
        w.flush()?;
    }
    let rows: Vec<GridRow> = reports.iter().map(GridRow::from).collect();
    if let Some(path) = &a.grid_table {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        for r in &rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(reports.iter().map(to_value).collect())
}

const DEFAULT_ARE_GAMMAS: [f64; 15] =
    [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

fn mp(a: &MpArgs) -> CliResult<Vec<Value>> {
    if a.numeric_n < 2 {
        return usage("--numeric-n must be at least 2");
    }
    if a.are_curve {
        let gammas = if a.gammas.is_empty() { DEFAULT_ARE_GAMMAS.to_vec() } else { a.gammas.clone() };
        return Ok(are_curve(&gammas, a.numeric_n)?.iter().map(to_value).collect());
    }
    let g = a.gamma.expect("group requires --gamma or --are-curve");
    let m = mp_model(g)?;
    Ok(vec![json!({
        "gamma": m.gamma,
        "lo": m.support_lo,
        "hi": m.support_hi,
        "median": m.median,
        "a": m.a,
        "b": m.b,
        "sd": m.sd(),
        "are_bound": m.are_upper_bound(),
        "are_numeric": numeric_are(g, a.numeric_n)?,
    })])
}

fn weights(a: &WeightsArgs) -> CliResult<Value> {
    let lambda = match (&a.lambda, &a.x) {
        (Some(path), None) => {
            let mut l = read_vector(path, None)?;
            l.sort_by(|x, y| y.total_cmp(x));
            if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput("eigenvalues must be finite and non-negative".into()).into());
            }
            l
        }
        (None, Some(path)) => {
            let x = read_matrix(path)?;
            let n = x.nrows();
            spectral_decompose(&Dataset::new(x, vec![0.0; n])?)?.lambda().to_vec()
        }
        _ => return usage("exactly one of --lambda and --x is required"),
    };
    let n = lambda.len();
    if a.zero_first + a.zero_last > n {
        return usage(format!("cannot pin {} weights of {n}", a.zero_first + a.zero_last));
    }
    let pinned: BTreeSet<usize> = (0..a.zero_first).chain(n - a.zero_last..n).collect();
    let cons = match a.target {
        WeightTarget::Theta2 => ConstraintSet::theta2(pinned),
        WeightTarget::Sigma2 => ConstraintSet::sigma2(pinned),
    };
    let (sol, kkt) = match a.two_step_rho {
        Some(rho) => {
            if !(0.0..=1.0).contains(&rho) {
                return usage("--two-step-rho must lie in [0, 1]");
            }
            let c: Vec<f64> = lambda.iter().map(|l| (l * rho + 1.0 - rho).powi(2).max(1e-12)).collect();
            let sol = solve_weighted_quadratic(&lambda, &c, &cons)?;
            let kkt = quadratic_kkt_residual(&lambda, &c, &sol, &cons);
            (sol, kkt)
        }
        None => {
            let sol = solve_minmax(&lambda, &cons)?;
            let kkt = kkt_residual(&lambda, &sol, &cons);
            (sol, kkt)
        }
    };
    Ok(json!({
        "target": match a.target { WeightTarget::Theta2 => "theta_squared", WeightTarget::Sigma2 => "sigma_squared" },
        "n": n,
        "objective": sol.objective,
        "delta": sol.delta,
        "kappa1": sol.kappa1,
        "kappa2": sol.kappa2,
        "kkt_residual": kkt,
        "lambda": lambda,
        "w": sol.w,
    }))
}

fn write_csv(path: &Path, header: Option<&[String]>, rows: impl Iterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Io(e.to_string());
    if let Some(h) = header {
        w.write_record(h).map_err(io)?;
    }
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn split(a: &SplitArgs) -> CliResult<Value> {
    let Loaded { mut data, columns } = load_data(&a.data)?;
    if a.standardize == StandardizeOrder::Before {
        data = standardize_columns(&data)?;
    }
    let (first, second) = split_indices(data.n(), a.fraction, a.seed)?;
    let mut files = Vec::new();
    for (k, rows) in [(1, &first), (2, &second)] {
        let mut part = select_rows(&data, rows);
        if a.standardize == StandardizeOrder::After {
            part = standardize_columns(&part)?;
        }
        let stem = a.out_prefix.display().to_string();
        let (xp, yp) = (PathBuf::from(format!("{stem}.{k}.x.csv")), PathBuf::from(format!("{stem}.{k}.y.csv")));
        let x = part.x();
        write_csv(&xp, columns.as_deref(), (0..part.n()).map(|i| (0..part.p()).map(|j| x[(i, j)]).collect()))?;
        write_csv(&yp, None, part.y().iter().map(|v| vec![*v]))?;
        files.push(json!({ "x": xp, "y": yp, "rows": rows }));
    }
    let order = match a.standardize {
        StandardizeOrder::None => "none",
        StandardizeOrder::Before => "before",
        StandardizeOrder::After => "after",
    };
    Ok(json!({ "n": data.n(), "p": data.p(), "seed": a.seed, "standardize": order, "first": files[0], "second": files[1] }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli_with(std::iter::once("eigenprism").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_design("bernoulli:0.01").unwrap(), DesignFamily::BernoulliIid { q: 0.01 });
        assert_eq!(
            parse_design("sparse-corr:0.1").unwrap(),
            DesignFamily::CorrelatedGaussian { correlation: CorrelationSpec::Sparse { magnitude: 0.1 } }
        );
        assert!(parse_design("bernoulli").is_err());
        assert_eq!(parse_beta("sparse:0.1").unwrap(), BetaFamily::Sparse { fraction_nonzero: 0.1 });
        assert_eq!(parse_noise("t:5").unwrap(), NoiseFamily::StudentT { df: 5.0 });
        let c = parse_companion("theta2:two-step").unwrap();
        assert_eq!(c.procedure, Procedure::TwoStep);
        assert!(parse_companion("theta2").is_err());
    }

    #[test]
    fn mp_record() {
        let (code, out, _) = run(&["mp", "--gamma", "0.5", "--numeric-n", "50"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(out.trim()).unwrap();
        assert!((v["b"].as_f64().unwrap() - 1.5).abs() < 1e-3);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&["fit", "--bogus"]).0, 2);
        assert_eq!(run(&["mp"]).0, 2);
        assert_eq!(run(&["mp", "--gamma", "0.5", "--are-curve"]).0, 2);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn library_errors_exit_one_with_category() {
        let (code, _, err) = run(&["mp", "--gamma", "1.5"]);
        assert_eq!(code, 1);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"], "InvalidGamma");
    }
}
