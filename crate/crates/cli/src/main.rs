mod config;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbe_core::asymptotics::{
    estimate_clt_tail, estimate_simplified, estimate_small_moderate, estimate_true_moderate,
    large_dev, rate_curve_row, DeviationEstimate, LARGE_DEV_BAND,
};
use cbe_core::exact_transform::{log_laplace_real, EnsembleParams};
use cbe_core::specfun::QuadratureSpec;
use cbe_core::montecarlo::{empirical_kolmogorov, integrated_autocorr_time, mcmc_sample_with};
use cbe_core::tilt::{classify_regime_real, scheme_estimate, Regime};
use cbe_core::validate::{run_all, Fault, ValidateOptions};
use cbe_core::CbeError;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{ExperimentConfig, Format};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<CbeError> for CliError {
    fn from(e: CbeError) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "cbe", version, about = "Characteristic polynomial of circular beta ensembles: exact transforms, deviation estimates, sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-Laplace transform and its first three derivatives over a z grid
    Exact(Opts),
    /// Tail estimates P[X_N >= x] from every applicable method
    Estimate(Opts),
    /// Large-deviation rate curve beta' I(theta^{-1}(x))
    RateCurve(Opts),
    /// Metropolis samples of X_N with a JSON summary
    Sample(Opts),
    /// Run the validation battery
    Validate(Opts),
}

#[derive(clap::Args, Debug, Default)]
struct Opts {
    /// JSON config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N", value_name = "INT")]
    n: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Evaluation point(s); repeatable or comma separated
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    x: Vec<f64>,
    /// Grid A:B:STEP
    #[arg(long = "x-grid", value_name = "A:B:STEP", allow_hyphen_values = true)]
    x_grid: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Skip the Monte Carlo checks in validate
    #[arg(long)]
    quick: bool,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn merged(opts: &Opts) -> Result<ExperimentConfig, CliError> {
    let mut c = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = opts.n {
        c.n = v;
    }
    if let Some(v) = opts.beta {
        c.beta = v;
    }
    if let Some(v) = opts.delta {
        c.delta = v;
    }
    if !opts.x.is_empty() || opts.x_grid.is_some() {
        c.x = opts.x.clone();
        c.x_grid = opts.x_grid.clone();
    }
    if let Some(v) = opts.samples {
        c.mc.samples = v;
    }
    if let Some(v) = opts.burn {
        c.mc.burn = v;
    }
    if let Some(v) = opts.thin {
        c.mc.thin = v;
    }
    if let Some(v) = opts.chains {
        c.mc.chains = v;
    }
    if let Some(v) = opts.seed {
        c.mc.seed = v;
    }
    if opts.out.is_some() {
        c.out = opts.out.clone();
    }
    if let Some(f) = opts.format {
        c.format = f;
    }
    c.quick |= opts.quick;
    c.validate()?;
    Ok(c)
}

fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("CBE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(CliError::Input(format!("CBE_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Map `f` over `items` on up to `threads` workers, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let chunk = items.len().div_ceil(threads.max(1)).max(1);
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn io_err(path: Option<&Path>, e: impl fmt::Display) -> CliError {
    let target = path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    CliError::Io(format!("{target}: {e}"))
}

fn emit<T: Serialize>(rows: &[T], format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let mut w = open_out(path)?;
    match format {
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            for r in rows {
                cw.serialize(r).map_err(|e| io_err(path, e))?;
            }
            cw.flush().map_err(|e| io_err(path, e))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| io_err(path, e))?;
            writeln!(w).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct ExactRow {
    z: f64,
    lambda: f64,
    lambda_1: f64,
    lambda_2: f64,
    lambda_3: f64,
}

fn cmd_exact(c: &ExperimentConfig) -> Result<(), CliError> {
    let p = EnsembleParams::new(c.n_usize()?, c.beta, c.delta)?;
    let mut zs = c.points()?;
    if zs.is_empty() {
        zs = vec![0.0, 1.0, 2.0];
    }
    let rows = par_map(&zs, thread_cap()?, |&z| {
        Ok(ExactRow {
            z,
            lambda: log_laplace_real(&p, z, 0)?,
            lambda_1: log_laplace_real(&p, z, 1)?,
            lambda_2: log_laplace_real(&p, z, 2)?,
            lambda_3: log_laplace_real(&p, z, 3)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, CbeError>>()?;
    emit(&rows, c.format, c.out.as_deref())
}

#[derive(Serialize)]
struct EstimateRow {
    x: f64,
    regime: &'static str,
    method: &'static str,
    probability: f64,
    log_probability: f64,
    prefactor: f64,
    exponent: f64,
    quality: &'static str,
}

impl EstimateRow {
    fn new(x: f64, regime: Regime, e: &DeviationEstimate) -> Self {
        Self {
            x,
            regime: regime.as_str(),
            method: e.method.as_str(),
            probability: e.probability,
            log_probability: e.log_probability,
            prefactor: e.prefactor,
            exponent: e.exponent,
            quality: e.quality.as_str(),
        }
    }
}

/// Domain errors mean "not applicable here"; anything else is a real failure.
fn applicable(r: cbe_core::Result<DeviationEstimate>) -> Result<Option<DeviationEstimate>, CliError> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(CbeError::Domain(_)) => Ok(None),
        Err(e) => Err(CliError::Numeric(e.to_string())),
    }
}

fn estimate_rows(n: usize, beta: f64, x: f64, spec: &QuadratureSpec) -> Result<Vec<EstimateRow>, CliError> {
    let nf = n as f64;
    let regime = classify_regime_real(nf, beta, x).tag;
    if x >= nf * std::f64::consts::LN_2 {
        return Ok(vec![EstimateRow {
            x,
            regime: Regime::OutOfRange.as_str(),
            method: "none",
            probability: 0.0,
            log_probability: f64::NEG_INFINITY,
            prefactor: 0.0,
            exponent: f64::NEG_INFINITY,
            quality: "Equivalent",
        }]);
    }
    let mut found = vec![applicable(estimate_clt_tail(nf, beta, x))?];
    if x > 0.0 {
        found.push(applicable(estimate_small_moderate(nf, beta, x, spec))?);
        found.push(applicable(estimate_true_moderate(nf, beta, x, spec))?);
        found.push(applicable(estimate_simplified(nf, beta, x, spec))?);
        found.push(applicable(scheme_estimate(n, beta, x))?);
        let alpha0 = x / nf;
        if (LARGE_DEV_BAND.0..=LARGE_DEV_BAND.1).contains(&alpha0) {
            found.push(Some(large_dev(n, beta, alpha0)?.bound));
        }
    }
    Ok(found.into_iter().flatten().map(|e| EstimateRow::new(x, regime, &e)).collect())
}

fn cmd_estimate(c: &ExperimentConfig) -> Result<(), CliError> {
    if c.delta != 0.0 {
        return Err(CliError::Input("estimate works on the untilted ensemble; use delta = 0".into()));
    }
    if c.n < 2 {
        return Err(CliError::Input("estimate needs N >= 2".into()));
    }
    let xs = c.points()?;
    if xs.is_empty() {
        return Err(CliError::Input("estimate needs --x or --x-grid".into()));
    }
    let n = c.n_usize()?;
    let (beta, spec) = (c.beta, &c.quadrature);
    let per_x = par_map(&xs, thread_cap()?, |&x| estimate_rows(n, beta, x, spec));
    let mut rows = Vec::new();
    for r in per_x {
        rows.extend(r?);
    }
    emit(&rows, c.format, c.out.as_deref())
}

fn cmd_rate_curve(c: &ExperimentConfig) -> Result<(), CliError> {
    let mut xs = c.points()?;
    if xs.is_empty() {
        xs = config::parse_grid("0.01:0.69:0.01")?;
    }
    let rows = par_map(&xs, thread_cap()?, |&x| rate_curve_row(x, c.beta))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    emit(&rows, c.format, c.out.as_deref())
}

#[derive(Serialize)]
struct SampleRow {
    chain: usize,
    index: usize,
    x_value: f64,
    log_weight: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    n: usize,
    beta: f64,
    delta: f64,
    samples: usize,
    burn: usize,
    thin: usize,
    chains: usize,
    seed: u64,
    mean: f64,
    variance: f64,
    mean_std_error: f64,
    exact_mean: f64,
    exact_variance: f64,
    acceptance_rate: f64,
    proposal_scale: f64,
    ill_tuned: bool,
    autocorr_time: f64,
    effective_size: f64,
    kolmogorov_statistic: f64,
}

fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn cmd_sample(c: &ExperimentConfig) -> Result<(), CliError> {
    let out = c
        .out
        .as_deref()
        .ok_or_else(|| CliError::Input("sample needs --out PATH".into()))?;
    let p = EnsembleParams::new(c.n_usize()?, c.beta, c.delta)?;
    let batch = mcmc_sample_with(&p, &c.mc_config(thread_cap()?))?;
    let mut rows = Vec::with_capacity(batch.len());
    for (chain, values) in batch.chains().iter().enumerate() {
        for (index, &x_value) in values.iter().enumerate() {
            rows.push(SampleRow { chain, index, x_value, log_weight: None });
        }
    }
    emit(&rows, c.format, Some(out))?;

    let exact_mean = log_laplace_real(&p, 0.0, 1)?;
    let exact_variance = log_laplace_real(&p, 0.0, 2)?;
    let tau = integrated_autocorr_time(&batch.chains());
    let variance = batch.variance();
    let summary = SampleSummary {
        n: p.n,
        beta: p.beta,
        delta: p.delta,
        samples: batch.len(),
        burn: batch.n_burn,
        thin: batch.thinning,
        chains: batch.chain_lengths.len(),
        seed: batch.seed,
        mean: batch.mean(),
        variance,
        mean_std_error: (variance * tau / batch.len() as f64).sqrt(),
        exact_mean,
        exact_variance,
        acceptance_rate: batch.acceptance_rate,
        proposal_scale: batch.proposal_scale,
        ill_tuned: batch.ill_tuned,
        autocorr_time: tau,
        effective_size: batch.len() as f64 / tau,
        kolmogorov_statistic: empirical_kolmogorov(&batch.values, exact_mean, exact_variance.sqrt())?,
    };
    let sp = summary_path(out);
    let mut w = open_out(Some(&sp))?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| io_err(Some(&sp), e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(Some(&sp), e))
}

fn cmd_validate(c: &ExperimentConfig, fault: Option<&str>) -> Result<bool, CliError> {
    let fault = match fault {
        None => None,
        Some("comparison-sign") => Some(Fault::ComparisonSign),
        Some(other) => return Err(CliError::Input(format!("unknown fault {other:?}"))),
    };
    let opts = ValidateOptions { quick: c.quick, seed: c.mc.seed, fault, spec: c.quadrature };
    let results = run_all(&opts);
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(out) = c.out.as_deref() {
        emit(&results, c.format, Some(out))?;
    }
    let ok = results.iter().all(|r| r.passed);
    println!("{}", if ok { "all checks passed" } else { "some checks failed" });
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    thread_cap()?;
    match cli.command {
        Command::Exact(o) => cmd_exact(&merged(&o)?)?,
        Command::Estimate(o) => cmd_estimate(&merged(&o)?)?,
        Command::RateCurve(o) => cmd_rate_curve(&merged(&o)?)?,
        Command::Sample(o) => cmd_sample(&merged(&o)?)?,
        Command::Validate(o) => {
            if !cmd_validate(&merged(&o)?, o.inject_fault.as_deref())? {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cbe: {e}");
            ExitCode::from(e.code())
        }
    }
}
