//! End-to-end analysis: catalog in, plot-data CSVs and a JSON report out.

use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    parse_catalog, parse_population, CatalogOptions, ConflictCatalog, Interpolation, ParseReport,
    PopulationTable, YearWindow,
};
use crate::dist::{
    empirical_ccdf, empirical_ccdf_log, fit_log_gaussian, fit_power_law, fit_tail, tail_threshold,
    trimmed_range, EmpiricalCcdf, FitOptions, FitResult,
};
use crate::series::{
    fatalities_per_war, fatalities_per_year, wars_per_year, AnnualSeries, Attribution, Built,
    EventSeries, PerCapita,
};
use crate::timefreq::{autocorrelation, periodogram, whiteness_check, AcfResult, Peak, Spectrum};
use crate::{Error, Result};

pub const TOOL_NAME: &str = "conflict-stats";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Grid step for raw fatality counts.
pub const DEFAULT_STEP: f64 = 1000.0;
/// Per-capita series use `max / PER_CAPITA_GRID_POINTS` as their step.
pub const PER_CAPITA_GRID_POINTS: usize = 1000;
pub const DEFAULT_TRIM_FRACTION: f64 = 0.1;
pub const DEFAULT_TAIL_QUANTILE: f64 = 0.9;

const WHITENESS_RULE: &str =
    "random if at least 95% of lags 1..T-1 satisfy |r| <= multiplier * sqrt(1/T)";

/// Inclusive `LO:HI` range of grid x values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for Span {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("range {s:?} is not LO:HI"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !(lo <= hi) {
            return Err(bad());
        }
        Ok(Span { lo, hi })
    }
}

impl From<Span> for String {
    fn from(s: Span) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Span {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    /// Wars per calendar year.
    Wars,
    /// Fatalities per calendar year.
    PerYear,
    /// Fatalities per war.
    PerWar,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 3] = [SeriesKind::Wars, SeriesKind::PerYear, SeriesKind::PerWar];

    fn file_stem(self) -> &'static str {
        match self {
            SeriesKind::Wars => "wars_per_year",
            SeriesKind::PerYear => "fatalities_per_year",
            SeriesKind::PerWar => "fatalities_per_war",
        }
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wars" | "wars-per-year" => Ok(SeriesKind::Wars),
            "per-year" | "fatalities-per-year" => Ok(SeriesKind::PerYear),
            "per-war" | "fatalities-per-war" => Ok(SeriesKind::PerWar),
            _ => Err(Error::InvalidInput(format!(
                "unknown series {s:?} (wars, per-year, per-war)"
            ))),
        }
    }
}

/// Every option of a pipeline run. Loaded from JSON with `--config`, and
/// echoed verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub catalog: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub window: YearWindow,
    pub delimiter: char,
    pub interpolation: Interpolation,
    pub attribution: Attribution,
    pub series: Vec<SeriesKind>,
    /// `None`: per-capita variants are produced whenever a population file is given.
    pub normalize: Option<bool>,
    /// Grid step for raw fatality CCDFs.
    pub step: f64,
    /// Use this many log-spaced grid points instead of a uniform step.
    pub log_grid: Option<usize>,
    /// Range of the trimmed power-law fit on raw series; default drops the
    /// lowest and highest `trim_fraction` of grid points.
    pub fit_range: Option<Span>,
    pub trim_fraction: f64,
    /// Right-tail threshold on raw series; default is the grid point closest
    /// to the `tail_quantile` of the samples.
    pub tail_min: Option<f64>,
    pub tail_quantile: f64,
    pub confidence_multiplier: f64,
    pub spectrum_peaks: usize,
    pub max_iterations: usize,
    pub strict: bool,
    pub timestamp: bool,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            catalog: None,
            population: None,
            window: YearWindow::default(),
            delimiter: ',',
            interpolation: Interpolation::default(),
            attribution: Attribution::default(),
            series: SeriesKind::ALL.to_vec(),
            normalize: None,
            step: DEFAULT_STEP,
            log_grid: None,
            fit_range: None,
            trim_fraction: DEFAULT_TRIM_FRACTION,
            tail_min: None,
            tail_quantile: DEFAULT_TAIL_QUANTILE,
            confidence_multiplier: crate::timefreq::DEFAULT_CONFIDENCE_MULTIPLIER,
            spectrum_peaks: 5,
            max_iterations: crate::dist::NlsOptions::default().max_iterations,
            strict: false,
            timestamp: false,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| {
                Error::InvalidInput(format!("delimiter {:?} is not ASCII", self.delimiter))
            })
    }

    fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::default();
        o.nls.max_iterations = self.max_iterations;
        o
    }
}

pub fn load_catalog(
    path: &Path,
    config: &PipelineConfig,
) -> Result<(ConflictCatalog, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let opts = CatalogOptions {
        window: config.window,
        delimiter: config.delimiter_byte()?,
    };
    parse_catalog(BufReader::new(file), &opts).map_err(|e| e.in_file(path))
}

pub fn load_population(path: &Path, config: &PipelineConfig) -> Result<PopulationTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_population(BufReader::new(file), config.delimiter_byte()?)
        .map(|t| t.with_interpolation(config.interpolation))
        .map_err(|e| e.in_file(path))
}

/// One fit in the report; failures are kept so that a report is always complete.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitEntry {
    Fitted {
        label: String,
        #[serde(flatten)]
        result: FitResult,
    },
    Failed {
        label: String,
        error: String,
    },
}

impl FitEntry {
    pub fn label(&self) -> &str {
        match self {
            FitEntry::Fitted { label, .. } | FitEntry::Failed { label, .. } => label,
        }
    }

    pub fn result(&self) -> Option<&FitResult> {
        match self {
            FitEntry::Fitted { result, .. } => Some(result),
            FitEntry::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfSummary {
    pub n_samples: usize,
    pub zero_values_excluded: usize,
    pub grid_points: usize,
    /// `"linear"` or `"log"`.
    pub grid: &'static str,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfSummary {
    pub t: usize,
    pub se_white: f64,
    pub multiplier: f64,
    pub band: f64,
    pub fraction_inside: f64,
    pub verdict: bool,
    pub rule: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesBlock {
    pub name: String,
    pub kind: SeriesKind,
    pub per_capita: bool,
    pub length: usize,
    pub total: f64,
    pub zero_values: usize,
    pub included_records: usize,
    pub missing_fatalities: usize,
    pub out_of_window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ccdf: Option<CcdfSummary>,
    pub fits: Vec<FitEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acf: Option<AcfSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acf_error: Option<String>,
    pub spectrum_peaks: Vec<Peak>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetFingerprint {
    pub window: YearWindow,
    pub rows_read: usize,
    pub retained: usize,
    pub missing_fatalities: usize,
    pub out_of_window: usize,
    pub rejected: usize,
    pub population_anchors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub dataset: DatasetFingerprint,
    pub series: Vec<SeriesBlock>,
    pub options: PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
}

/// A file to be written into the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: Vec<u8>,
}

fn csv_artifact(
    file_name: String,
    write: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<Artifact> {
    let mut contents = Vec::new();
    write(&mut contents)?;
    Ok(Artifact {
        file_name,
        contents,
    })
}

enum AnySeries {
    Annual(AnnualSeries),
    Events(EventSeries),
}

impl AnySeries {
    fn values(&self) -> Vec<f64> {
        match self {
            AnySeries::Annual(s) => s.values.clone(),
            AnySeries::Events(s) => s.values(),
        }
    }

    fn normalized(&self, table: &PopulationTable) -> Result<AnySeries> {
        Ok(match self {
            AnySeries::Annual(s) => AnySeries::Annual(s.normalize_per_capita(table)?),
            AnySeries::Events(s) => AnySeries::Events(s.normalize_per_capita(table)?),
        })
    }

    fn write_csv(&self, sink: &mut Vec<u8>) -> Result<()> {
        match self {
            AnySeries::Annual(s) => s.write_csv(sink),
            AnySeries::Events(s) => s.write_csv(sink),
        }
    }
}

fn fit_entry(label: &str, result: Result<FitResult>) -> FitEntry {
    match result {
        Ok(result) => FitEntry::Fitted {
            label: label.into(),
            result,
        },
        Err(e) => FitEntry::Failed {
            label: label.into(),
            error: e.to_string(),
        },
    }
}

struct Analysis {
    ccdf: Option<(EmpiricalCcdf, CcdfSummary)>,
    fits: Vec<FitEntry>,
    acf: std::result::Result<(AcfResult, AcfSummary), String>,
    spectrum: std::result::Result<Spectrum, String>,
}

fn analyze_fatalities(
    values: &[f64],
    per_capita: bool,
    config: &PipelineConfig,
) -> Result<Analysis> {
    let fit_opts = config.fit_options();
    let samples: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let zero_values_excluded = values.len() - samples.len();

    let ccdf = if samples.is_empty() {
        None
    } else {
        let (ccdf, step) = match config.log_grid {
            Some(n) => (empirical_ccdf_log(&samples, n)?, None),
            None => {
                let step = if per_capita {
                    samples.iter().copied().fold(0.0, f64::max) / PER_CAPITA_GRID_POINTS as f64
                } else {
                    config.step
                };
                (empirical_ccdf(&samples, step)?, Some(step))
            }
        };
        let summary = CcdfSummary {
            n_samples: ccdf.n_samples,
            zero_values_excluded,
            grid_points: ccdf.len(),
            grid: if step.is_some() { "linear" } else { "log" },
            step,
        };
        Some((ccdf, summary))
    };

    let mut fits = Vec::new();
    if let Some((ccdf, _)) = &ccdf {
        if per_capita {
            fits.push(fit_entry(
                "power_law_full",
                fit_power_law(ccdf, None, &fit_opts),
            ));
        } else {
            fits.push(fit_entry(
                "log_gaussian",
                fit_log_gaussian(ccdf, None, &fit_opts),
            ));
            let range = match config.fit_range {
                Some(s) => Ok((s.lo, s.hi)),
                None => trimmed_range(ccdf, config.trim_fraction),
            };
            fits.push(fit_entry(
                "power_law_trimmed",
                range.and_then(|r| fit_power_law(ccdf, Some(r), &fit_opts)),
            ));
            let tail = match config.tail_min {
                Some(x) => Ok(x),
                None => tail_threshold(ccdf, &samples, config.tail_quantile),
            };
            fits.push(fit_entry(
                "power_law_tail",
                tail.and_then(|x| fit_tail(ccdf, x, &fit_opts)),
            ));
        }
    }

    let acf = autocorrelation(values)
        .map(|acf| {
            let w = whiteness_check(&acf, config.confidence_multiplier);
            let summary = AcfSummary {
                t: acf.t,
                se_white: acf.se_white,
                multiplier: config.confidence_multiplier,
                band: w.band,
                fraction_inside: w.fraction_inside,
                verdict: w.verdict,
                rule: WHITENESS_RULE,
            };
            (acf, summary)
        })
        .map_err(|e| e.to_string());
    let spectrum = periodogram(values).map_err(|e| e.to_string());

    Ok(Analysis {
        ccdf,
        fits,
        acf,
        spectrum,
    })
}

struct Variant {
    kind: SeriesKind,
    per_capita: bool,
    name: String,
    series: AnySeries,
    counts: (usize, usize, usize),
}

fn build_variants(
    catalog: &ConflictCatalog,
    population: Option<&PopulationTable>,
    config: &PipelineConfig,
) -> Result<Vec<Variant>> {
    let normalize = config.normalize.unwrap_or(population.is_some());
    let table = match (normalize, population) {
        (true, None) => {
            return Err(Error::InvalidInput(
                "per-capita normalization needs a population table".into(),
            ))
        }
        (true, Some(t)) => Some(t),
        (false, _) => None,
    };

    let mut kinds = config.series.clone();
    kinds.sort();
    kinds.dedup();

    let mut variants = Vec::new();
    for kind in kinds {
        let (series, counts) = match kind {
            SeriesKind::Wars => {
                let b = wars_per_year(catalog, config.attribution);
                (AnySeries::Annual(b.series.clone()), strip(&b))
            }
            SeriesKind::PerYear => {
                let b = fatalities_per_year(catalog);
                (AnySeries::Annual(b.series.clone()), strip(&b))
            }
            SeriesKind::PerWar => {
                let b = fatalities_per_war(catalog);
                (AnySeries::Events(b.series.clone()), strip(&b))
            }
        };
        let normalized = table.map(|t| series.normalized(t)).transpose()?;
        variants.push(Variant {
            kind,
            per_capita: false,
            name: kind.file_stem().to_string(),
            series,
            counts,
        });
        if let Some(series) = normalized {
            variants.push(Variant {
                kind,
                per_capita: true,
                name: format!("{}_per_capita", kind.file_stem()),
                series,
                counts,
            });
        }
    }
    Ok(variants)
}

/// Series CSVs only (`<series>.csv` for every selected series and variant).
pub fn series_artifacts(
    catalog: &ConflictCatalog,
    population: Option<&PopulationTable>,
    config: &PipelineConfig,
) -> Result<Vec<Artifact>> {
    build_variants(catalog, population, config)?
        .into_iter()
        .map(|v| csv_artifact(format!("{}.csv", v.name), |buf| v.series.write_csv(buf)))
        .collect()
}

/// Runs every analysis in memory. Nothing touches the file system.
pub fn analyze(
    catalog: &ConflictCatalog,
    parse_report: &ParseReport,
    population: Option<&PopulationTable>,
    config: &PipelineConfig,
) -> Result<(AnalysisReport, Vec<Artifact>)> {
    let mut blocks = Vec::new();
    let mut artifacts = Vec::new();
    for variant in build_variants(catalog, population, config)? {
        let Variant {
            kind,
            per_capita,
            name,
            series,
            counts,
        } = variant;
        artifacts.push(csv_artifact(format!("{name}.csv"), |buf| {
            series.write_csv(buf)
        })?);
        let values = series.values();
        let mut block = SeriesBlock {
            name: name.clone(),
            kind,
            per_capita,
            length: values.len(),
            total: values.iter().sum(),
            zero_values: values.iter().filter(|&&v| v == 0.0).count(),
            included_records: counts.0,
            missing_fatalities: counts.1,
            out_of_window: counts.2,
            ccdf: None,
            fits: Vec::new(),
            acf: None,
            acf_error: None,
            spectrum_peaks: Vec::new(),
            spectrum_error: None,
        };
        if kind != SeriesKind::Wars {
            let a = analyze_fatalities(&values, per_capita, config)?;
            if let Some((ccdf, summary)) = a.ccdf {
                let fitted: Vec<(&str, &FitResult)> = a
                    .fits
                    .iter()
                    .filter_map(|f| f.result().map(|r| (f.label(), r)))
                    .collect();
                artifacts.push(csv_artifact(format!("ccdf_{name}.csv"), |buf| {
                    ccdf.write_csv(buf, &fitted)
                })?);
                block.ccdf = Some(summary);
            }
            block.fits = a.fits;
            match a.acf {
                Ok((acf, summary)) => {
                    artifacts.push(csv_artifact(format!("acf_{name}.csv"), |buf| {
                        acf.write_csv(buf)
                    })?);
                    block.acf = Some(summary);
                }
                Err(e) => block.acf_error = Some(e),
            }
            match a.spectrum {
                Ok(spectrum) => {
                    artifacts.push(csv_artifact(format!("spectrum_{name}.csv"), |buf| {
                        spectrum.write_csv(buf)
                    })?);
                    block.spectrum_peaks = spectrum.peaks(config.spectrum_peaks);
                }
                Err(e) => block.spectrum_error = Some(e),
            }
        }
        blocks.push(block);
    }

    if config.strict {
        let failing: Vec<String> = blocks
            .iter()
            .flat_map(|b| {
                b.fits.iter().filter_map(move |f| match f {
                    FitEntry::Fitted { result, .. } if result.converged => None,
                    FitEntry::Fitted { label, .. } => {
                        Some(format!("{}/{label}: not converged", b.name))
                    }
                    FitEntry::Failed { label, error } => {
                        Some(format!("{}/{label}: {error}", b.name))
                    }
                })
            })
            .collect();
        if !failing.is_empty() {
            return Err(Error::Numeric(failing.join("; ")));
        }
    }

    let report = AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        dataset: DatasetFingerprint {
            window: catalog.window,
            rows_read: parse_report.rows_read,
            retained: parse_report.retained,
            missing_fatalities: parse_report.missing_fatalities,
            out_of_window: parse_report.out_of_window,
            rejected: parse_report.rejected_count(),
            population_anchors: population.map(|p| p.anchors().len()),
        },
        series: blocks,
        options: config.clone(),
        generated_at_unix: config.timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        }),
    };
    let mut json = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("report serialization: {e}")))?;
    json.push(b'\n');
    artifacts.push(Artifact {
        file_name: "report.json".into(),
        contents: json,
    });
    Ok((report, artifacts))
}

fn strip<S>(b: &Built<S>) -> (usize, usize, usize) {
    (b.included, b.missing_fatalities, b.out_of_window)
}

/// Writes artifacts into `dir`. On failure every file written by this call
/// is removed again.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.file_name);
        if let Err(e) = fs::write(&path, &a.contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Loads inputs named in `config`, analyzes, and writes all artifacts to
/// `config.out`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport> {
    let catalog_path = config
        .catalog
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("no catalog given".into()))?;
    let (catalog, parse_report) = load_catalog(catalog_path, config)?;
    let population = config
        .population
        .as_deref()
        .map(|p| load_population(p, config))
        .transpose()?;
    let (report, artifacts) = analyze(&catalog, &parse_report, population.as_ref(), config)?;
    write_artifacts(&config.out, &artifacts)?;
    Ok(report)
}
