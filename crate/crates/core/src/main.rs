use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use conflict_stats::catalog::{Interpolation, YearWindow};
use conflict_stats::dist::{
    empirical_ccdf, empirical_ccdf_log, fit_log_gaussian, fit_power_law, fit_tail, read_ccdf_csv,
    trimmed_range, EmpiricalCcdf, FitOptions,
};
use conflict_stats::report::{
    load_catalog, load_population, run_pipeline, series_artifacts, write_artifacts, PipelineConfig,
    SeriesKind, Span, PER_CAPITA_GRID_POINTS,
};
use conflict_stats::series::{read_series_values, Attribution};
use conflict_stats::synth::{gen_lognormal, gen_power_law, gen_sinusoid, gen_white_noise, Seed};
use conflict_stats::timefreq::{autocorrelation, periodogram};
use conflict_stats::{Error, Result};

#[derive(Parser)]
#[command(
    name = "conflict-stats",
    version,
    about = "Conflict catalog statistics"
)]
struct Cli {
    /// JSON file with pipeline options; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the catalog, print row counts as JSON.
    Ingest(InputArgs),
    /// Write the yearly and per-war series as CSV.
    Series(InputArgs),
    /// Empirical P(X >= x) of the value column of a series CSV.
    Ccdf(CcdfArgs),
    /// Fit a model to a CCDF CSV and print the fit as JSON.
    Fit(FitArgs),
    /// Autocorrelation with error bands of a series CSV.
    Acf(SeriesFileArgs),
    /// Periodogram of a series CSV.
    Spectrum(SeriesFileArgs),
    /// Run the whole pipeline and write every artifact plus report.json.
    Report(ReportArgs),
    /// Emit synthetic data as an `ordinal,value` CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_name = "PATH")]
    catalog: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    population: Option<PathBuf>,
    /// Analysis window, e.g. 1400:2000.
    #[arg(long, value_name = "LO:HI")]
    window: Option<YearWindow>,
    /// Field delimiter (`,` by default; `tab` or `\t` for TSV).
    #[arg(long, value_name = "CHAR")]
    delimiter: Option<String>,
    /// Population interpolation between anchors: log-linear or linear.
    #[arg(long)]
    interpolation: Option<Interpolation>,
    /// Count wars in their first year instead of their last.
    #[arg(long)]
    attribute_start: bool,
    /// Also produce per-capita series (needs --population).
    #[arg(long)]
    normalize: bool,
    /// Never produce per-capita series.
    #[arg(long, conflicts_with = "normalize")]
    no_normalize: bool,
    /// Series to produce: wars, per-year, per-war (comma separated).
    #[arg(long, value_delimiter = ',')]
    series: Vec<SeriesKind>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CCDF grid step for raw fatality counts.
    #[arg(long, value_name = "N")]
    step: Option<f64>,
    /// Use N log-spaced grid points instead of a uniform step.
    #[arg(long, value_name = "N")]
    log_grid: Option<usize>,
    /// Grid range for the trimmed power-law fit.
    #[arg(long, value_name = "LO:HI")]
    fit_range: Option<Span>,
    /// Threshold for the right-tail power-law fit.
    #[arg(long, value_name = "X")]
    tail_min: Option<f64>,
    /// Fail with exit code 3 when any fit does not converge.
    #[arg(long)]
    strict: bool,
    /// Record the generation time in report.json.
    #[arg(long)]
    timestamp: bool,
}

#[derive(Args)]
struct CcdfArgs {
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "N", conflicts_with_all = ["log_grid", "per_capita"])]
    step: Option<f64>,
    #[arg(long, value_name = "N")]
    log_grid: Option<usize>,
    /// Step = max / 1000, for per-capita values.
    #[arg(long)]
    per_capita: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    PowerLaw,
    LogGaussian,
    Tail,
}

#[derive(Args)]
struct FitArgs {
    /// CCDF CSV with x,prob columns.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "power-law")]
    model: FitModel,
    /// Restrict the fit to grid points in LO:HI. For power-law, `trim`
    /// drops the lowest and highest 10% of grid points.
    #[arg(long, value_name = "LO:HI")]
    fit_range: Option<String>,
    /// Tail threshold; default is the grid point where P(X >= x) is closest to 0.1.
    #[arg(long, value_name = "X")]
    tail_min: Option<f64>,
    #[arg(long)]
    strict: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeriesFileArgs {
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    PowerLaw,
    Lognormal,
    WhiteNoise,
    Sinusoid,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Number of samples (series length for white-noise and sinusoid).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Density exponent of the power law.
    #[arg(long, default_value_t = -2.08, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1000.0)]
    x_min: f64,
    #[arg(long, default_value_t = 7.225, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 50.0)]
    period: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 4,
        Error::Csv { source, .. } if matches!(source.kind(), csv::ErrorKind::Io(_)) => 4,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn parse_delimiter(s: &str) -> Result<char> {
    match s {
        "tab" | "\\t" | "\t" => Ok('\t'),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::InvalidInput(format!(
                    "delimiter {s:?} must be a single character"
                ))),
            }
        }
    }
}

fn base_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

impl InputArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(p) = &self.catalog {
            cfg.catalog = Some(p.clone());
        }
        if let Some(p) = &self.population {
            cfg.population = Some(p.clone());
        }
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(d) = &self.delimiter {
            cfg.delimiter = parse_delimiter(d)?;
        }
        if let Some(i) = self.interpolation {
            cfg.interpolation = i;
        }
        if self.attribute_start {
            cfg.attribution = Attribution::StartYear;
        }
        if self.normalize {
            cfg.normalize = Some(true);
        }
        if self.no_normalize {
            cfg.normalize = Some(false);
        }
        if !self.series.is_empty() {
            cfg.series = self.series.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(())
    }
}

impl ReportArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        self.input.apply(cfg)?;
        if let Some(s) = self.step {
            cfg.step = s;
        }
        if self.log_grid.is_some() {
            cfg.log_grid = self.log_grid;
        }
        if self.fit_range.is_some() {
            cfg.fit_range = self.fit_range;
        }
        if self.tail_min.is_some() {
            cfg.tail_min = self.tail_min;
        }
        cfg.strict |= self.strict;
        cfg.timestamp |= self.timestamp;
        Ok(())
    }
}

/// Writes to `path`, or stdout when absent. A failed write removes the file.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = io::BufWriter::new(file);
            let result = write(&mut w).and_then(|()| w.flush().map_err(|e| Error::io(path, e)));
            if result.is_err() {
                let _ = fs::remove_file(path);
            }
            result
        }
    }
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    emit(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|e| Error::InvalidInput(format!("json output: {e}")))?;
        writeln!(w).map_err(|e| Error::io("<output>", e))
    })
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series_values(BufReader::new(file)).map_err(|e| e.in_file(path))
}

fn catalog_path(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.catalog
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("--catalog is required".into()))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => {
            args.apply(&mut cfg)?;
            let (_, report) = load_catalog(catalog_path(&cfg)?, &cfg)?;
            emit_json(args.out.as_deref(), &report)
        }
        Command::Series(args) => {
            args.apply(&mut cfg)?;
            let (catalog, _) = load_catalog(catalog_path(&cfg)?, &cfg)?;
            let population = cfg
                .population
                .as_deref()
                .map(|p| load_population(p, &cfg))
                .transpose()?;
            let artifacts = series_artifacts(&catalog, population.as_ref(), &cfg)?;
            for path in write_artifacts(&cfg.out, &artifacts)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Ccdf(args) => {
            let samples: Vec<f64> = read_values(&args.input)?
                .into_iter()
                .filter(|&v| v > 0.0)
                .collect();
            let ccdf = if let Some(n) = args.log_grid.or(cfg.log_grid) {
                empirical_ccdf_log(&samples, n)?
            } else if args.per_capita {
                let max = samples.iter().copied().fold(0.0, f64::max);
                empirical_ccdf(&samples, max / PER_CAPITA_GRID_POINTS as f64)?
            } else {
                empirical_ccdf(&samples, args.step.unwrap_or(cfg.step))?
            };
            emit(args.out.as_deref(), |w| ccdf.write_csv(w, &[]))
        }
        Command::Fit(args) => {
            let file = File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
            let ccdf = read_ccdf_csv(BufReader::new(file)).map_err(|e| e.in_file(&args.input))?;
            let mut opts = FitOptions::default();
            opts.nls.max_iterations = cfg.max_iterations;
            let range = match args.fit_range.as_deref() {
                None => cfg.fit_range.map(|s| (s.lo, s.hi)),
                Some("trim") => Some(trimmed_range(&ccdf, cfg.trim_fraction)?),
                Some(s) => {
                    let s: Span = s.parse()?;
                    Some((s.lo, s.hi))
                }
            };
            let result = match args.model {
                FitModel::PowerLaw => fit_power_law(&ccdf, range, &opts)?,
                FitModel::LogGaussian => fit_log_gaussian(&ccdf, range, &opts)?,
                FitModel::Tail => {
                    let x_min = match args.tail_min.or(cfg.tail_min) {
                        Some(x) => x,
                        None => tail_from_ccdf(&ccdf, cfg.tail_quantile),
                    };
                    fit_tail(&ccdf, x_min, &opts)?
                }
            };
            if (args.strict || cfg.strict) && !result.converged {
                emit_json(args.out.as_deref(), &result)?;
                return Err(Error::Numeric(format!(
                    "fit did not converge in {} iterations",
                    result.iterations
                )));
            }
            emit_json(args.out.as_deref(), &result)
        }
        Command::Acf(args) => {
            let acf = autocorrelation(&read_values(&args.input)?)?;
            emit(args.out.as_deref(), |w| acf.write_csv(w))
        }
        Command::Spectrum(args) => {
            let spectrum = periodogram(&read_values(&args.input)?)?;
            emit(args.out.as_deref(), |w| spectrum.write_csv(w))
        }
        Command::Report(args) => {
            args.apply(&mut cfg)?;
            let report = run_pipeline(&cfg)?;
            for block in &report.series {
                if let Some(acf) = &block.acf {
                    eprintln!(
                        "{}: T={} se_white={:.4} inside={:.3} random={}",
                        block.name, acf.t, acf.se_white, acf.fraction_inside, acf.verdict
                    );
                }
            }
            eprintln!("wrote {}", cfg.out.join("report.json").display());
            Ok(())
        }
        Command::Synth(args) => {
            let seed = Seed(args.seed);
            let values = match args.kind {
                SynthKind::PowerLaw => gen_power_law(args.n, args.alpha, args.x_min, seed)?,
                SynthKind::Lognormal => gen_lognormal(args.n, args.mu, args.sigma, seed)?,
                SynthKind::WhiteNoise => gen_white_noise(args.n, seed)?,
                SynthKind::Sinusoid => {
                    gen_sinusoid(args.n, args.period, args.amplitude, args.noise_sd, seed)?
                }
            };
            emit(args.out.as_deref(), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                let ctx = |e| Error::Numeric(format!("writing synth output: {e}"));
                wtr.write_record(["ordinal", "value"]).map_err(ctx)?;
                for (i, v) in values.iter().enumerate() {
                    wtr.write_record([i.to_string(), v.to_string()])
                        .map_err(ctx)?;
                }
                wtr.flush().map_err(|e| Error::io("<synth output>", e))
            })
        }
    }
}

/// Grid point where `P(X >= x)` is closest to `1 - quantile`.
fn tail_from_ccdf(ccdf: &EmpiricalCcdf, quantile: f64) -> f64 {
    let target = 1.0 - quantile;
    ccdf.points()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map_or(ccdf.grid[0], |(x, _)| x)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
