//! Command-line surface for the `qdeform` library.
//!
//! Every command writes one JSON document or one CSV table, either to stdout
//! or atomically to `--out`. Exit codes: 0 success, 1 usage, 2 domain,
//! 3 divergence or numerical instability.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qdeform::estimation::{qsnr_sweep, report};
use qdeform::montecarlo::crb_benchmark;
use qdeform::states::{distribution, mean_photon, DEFAULT_TOL};
use qdeform::{
    CrbBenchmark, DeformationKind, DeformationParams, DerivativeConfig, DerivativeMethod,
    EstimationReport, PhotonDistribution, ProbeClass, ProbeSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qdeform::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qdeform::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(E::Domain(_) | E::OutOfSupport { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::Json(_) | CliError::Csv(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qdeform",
    version,
    about = "q-deformed photon statistics and deformation estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Photon-number distribution of a deformed probe.
    State(PointArgs),
    /// Fisher information, QFI and QSNR at one point.
    Fisher(FisherArgs),
    /// QSNR table over an (epsilon, intensity) grid.
    Qsnr(QsnrArgs),
    /// Monte Carlo MLE variance against the Cramer-Rao bound.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Subcommand)]
pub enum Probe {
    Coherent {
        #[arg(long, allow_hyphen_values = true)]
        alpha_sq: f64,
    },
    Thermal {
        /// Undeformed mean photon number n_T.
        #[arg(
            long,
            conflicts_with = "beta",
            required_unless_present = "beta",
            allow_hyphen_values = true
        )]
        n_mean: Option<f64>,
        /// Inverse temperature.
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    Cat {
        #[arg(long, allow_hyphen_values = true)]
        alpha_sq: f64,
    },
}

impl Probe {
    fn spec(&self) -> qdeform::Result<ProbeSpec> {
        match *self {
            Probe::Coherent { alpha_sq } => ProbeSpec::coherent(alpha_sq),
            Probe::Cat { alpha_sq } => ProbeSpec::cat(alpha_sq),
            Probe::Thermal {
                n_mean: Some(n), ..
            } => ProbeSpec::thermal_from_mean(n),
            Probe::Thermal { beta: Some(b), .. } => ProbeSpec::thermal(b),
            Probe::Thermal { .. } => unreachable!("clap requires --n-mean or --beta"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Class {
    Coherent,
    Superposition,
    Thermal,
}

impl From<Class> for ProbeClass {
    fn from(c: Class) -> Self {
        match c {
            Class::Coherent => ProbeClass::Coherent,
            Class::Superposition => ProbeClass::Superposition,
            Class::Thermal => ProbeClass::Thermal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeformationArgs {
    /// Deformation kind, M or P.
    #[arg(long, global = true)]
    pub kind: Option<DeformationKind>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// Truncation tolerance on the omitted probability mass.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

impl DeformationArgs {
    fn params(&self) -> Result<DeformationParams, CliError> {
        let kind = self
            .kind
            .ok_or_else(|| CliError::Usage("--kind is required".into()))?;
        let epsilon = self
            .epsilon
            .ok_or_else(|| CliError::Usage("--epsilon is required".into()))?;
        Ok(DeformationParams::new(kind, epsilon)?)
    }
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(subcommand)]
    pub probe: Probe,
    #[command(flatten)]
    pub deformation: DeformationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long, value_enum, default_value = "analytic", global = true)]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct QsnrArgs {
    #[arg(long, value_enum)]
    pub class: Class,
    #[arg(long)]
    pub kind: DeformationKind,
    /// Comma-separated epsilon values.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "epsilon_range"
    )]
    pub epsilon: Vec<f64>,
    /// Log-spaced range START:STOP:COUNT (positive endpoints).
    #[arg(long)]
    pub epsilon_range: Option<String>,
    /// Comma-separated intensities (|alpha|^2 or n_T).
    #[arg(long = "n", value_delimiter = ',', allow_hyphen_values = true)]
    pub intensities: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: Option<u64>,
    #[arg(long, global = true, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// `state` output: the distribution plus its mean photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateOutput {
    #[serde(flatten)]
    pub distribution: PhotonDistribution,
    pub mean_photon: f64,
}

#[derive(Debug, Serialize)]
struct StateCsvRow {
    n: usize,
    prob: f64,
}

/// Flat CSV view of an `EstimationReport`.
#[derive(Debug, Serialize)]
struct FisherCsvRow {
    family: &'static str,
    intensity: f64,
    kind: DeformationKind,
    epsilon: f64,
    fisher: f64,
    qfi: f64,
    qsnr: f64,
    n_mean: f64,
    m_delta_coefficient: f64,
}

/// Flat CSV view of a `CrbBenchmark`.
#[derive(Debug, Serialize)]
struct BenchmarkCsvRow {
    family: &'static str,
    intensity: f64,
    kind: DeformationKind,
    epsilon_true: f64,
    shots: u64,
    replications: usize,
    failed_replications: usize,
    seed: u64,
    qfi: f64,
    mean_estimate: f64,
    empirical_var: f64,
    crb: f64,
    ratio: f64,
    bias: f64,
    std_error: f64,
    estimable: bool,
}

/// Family label and its intensity parameter (`|alpha|^2` or `beta`).
fn family_columns(spec: &ProbeSpec) -> (&'static str, f64) {
    match *spec {
        ProbeSpec::Coherent { alpha_sq } => ("coherent", alpha_sq),
        ProbeSpec::Cat { alpha_sq } => ("cat", alpha_sq),
        ProbeSpec::Thermal { beta } => ("thermal", beta),
    }
}

impl From<&EstimationReport> for FisherCsvRow {
    fn from(r: &EstimationReport) -> Self {
        let (family, intensity) = family_columns(&r.spec);
        FisherCsvRow {
            family,
            intensity,
            kind: r.kind,
            epsilon: r.epsilon,
            fisher: r.fisher,
            qfi: r.qfi,
            qsnr: r.qsnr,
            n_mean: r.n_mean,
            m_delta_coefficient: r.m_delta_coefficient,
        }
    }
}

impl From<&CrbBenchmark> for BenchmarkCsvRow {
    fn from(b: &CrbBenchmark) -> Self {
        let (family, intensity) = family_columns(&b.spec);
        BenchmarkCsvRow {
            family,
            intensity,
            kind: b.kind,
            epsilon_true: b.epsilon_true,
            shots: b.shots,
            replications: b.replications,
            failed_replications: b.failed_replications,
            seed: b.seed,
            qfi: b.qfi,
            mean_estimate: b.mean_estimate,
            empirical_var: b.empirical_var,
            crb: b.crb,
            ratio: b.ratio,
            bias: b.bias,
            std_error: b.std_error,
            estimable: b.estimable,
        }
    }
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if tol > 0.0 && tol <= 1e-6 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--tol must lie in (0, 1e-6], got {tol}"
        )))
    }
}

/// Parses `START:STOP:COUNT` into `COUNT` log-spaced values.
pub fn log_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "--epsilon-range expects START:STOP:COUNT, got {text:?}"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(bad());
    };
    let start: f64 = start.parse().map_err(|_| bad())?;
    let stop: f64 = stop.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    if !(start > 0.0 && stop > 0.0 && start.is_finite() && stop.is_finite()) {
        return Err(CliError::Usage(
            "--epsilon-range endpoints must be positive".into(),
        ));
    }
    Ok(match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    })
}

/// Writes `body` to `out`, or to stdout when `out` is `None`. Files are
/// written to a sibling temporary and renamed into place.
fn emit(
    out: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            body(&mut tmp)?;
            tmp.flush()?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn write_csv<T: Serialize>(
    w: &mut dyn Write,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::State(args) => cmd_state(&args),
        Command::Fisher(args) => cmd_fisher(&args),
        Command::Qsnr(args) => cmd_qsnr(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
    }
}

fn cmd_state(args: &PointArgs) -> Result<(), CliError> {
    check_tol(args.deformation.tol)?;
    let params = args.deformation.params()?;
    let spec = args.probe.spec()?;
    let dist = distribution(&spec, &params, args.deformation.tol)?;
    let output = StateOutput {
        mean_photon: mean_photon(&dist),
        distribution: dist,
    };
    emit(args.output.out.as_deref(), |w| match args.output.format {
        Format::Json => write_json(w, &output),
        Format::Csv => write_csv(
            w,
            output
                .distribution
                .probs
                .iter()
                .enumerate()
                .map(|(n, &prob)| StateCsvRow { n, prob }),
        ),
    })
}

fn cmd_fisher(args: &FisherArgs) -> Result<(), CliError> {
    let point = &args.point;
    check_tol(point.deformation.tol)?;
    let params = point.deformation.params()?;
    let spec = point.probe.spec()?;
    let cfg = DerivativeConfig {
        method: match args.method {
            Method::Analytic => DerivativeMethod::Analytic,
            Method::FiniteDifference => DerivativeMethod::FiniteDifference,
        },
        tol: point.deformation.tol,
        ..DerivativeConfig::default()
    };
    let r = report(&spec, &params, &cfg)?;
    emit(point.output.out.as_deref(), |w| match point.output.format {
        Format::Json => write_json(w, &r),
        Format::Csv => write_csv(w, [FisherCsvRow::from(&r)]),
    })
}

fn cmd_qsnr(args: &QsnrArgs) -> Result<(), CliError> {
    check_tol(args.tol)?;
    let epsilons = match &args.epsilon_range {
        Some(text) => log_range(text)?,
        None => args.epsilon.clone(),
    };
    if epsilons.is_empty() || args.intensities.is_empty() {
        return Err(CliError::Usage(
            "empty grid: give --epsilon or --epsilon-range, and --n".into(),
        ));
    }
    let cfg = DerivativeConfig {
        tol: args.tol,
        ..DerivativeConfig::default()
    };
    let rows = qsnr_sweep(
        args.class.into(),
        args.kind,
        &epsilons,
        &args.intensities,
        &cfg,
    )?;
    emit(args.output.out.as_deref(), |w| match args.output.format {
        Format::Json => write_json(w, &rows),
        Format::Csv => write_csv(w, &rows),
    })
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let point = &args.point;
    let params = point.deformation.params()?;
    let spec = point.probe.spec()?;
    let shots = args
        .shots
        .ok_or_else(|| CliError::Usage("--shots is required".into()))?;
    let b = crb_benchmark(
        &spec,
        params.kind(),
        params.epsilon(),
        shots,
        args.reps,
        args.seed,
    )?;
    emit(point.output.out.as_deref(), |w| match point.output.format {
        Format::Json => write_json(w, &b),
        Format::Csv => write_csv(w, [BenchmarkCsvRow::from(&b)]),
    })
}
