//! Conflict catalog and world-population table ingestion.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_YEAR_MIN: i64 = 1400;
pub const DEFAULT_YEAR_MAX: i64 = 2000;

const CATALOG_COLUMNS: [&str; 4] = ["name", "start_year", "end_year", "fatalities"];

/// Inclusive calendar-year range, written `LO:HI` on the command line and in
/// config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearWindow {
    pub min: i64,
    pub max: i64,
}

impl YearWindow {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidInput(format!(
                "window start {min} is after window end {max}"
            )));
        }
        Ok(YearWindow { min, max })
    }

    pub fn contains(&self, year: i64) -> bool {
        (self.min..=self.max).contains(&year)
    }

    /// Number of calendar years covered.
    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow {
            min: DEFAULT_YEAR_MIN,
            max: DEFAULT_YEAR_MAX,
        }
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

impl From<YearWindow> for String {
    fn from(w: YearWindow) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for YearWindow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for YearWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // rsplit so that a negative start year ("-500:100") still parses
        let (lo, hi) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("window {s:?} is not LO:HI")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| Error::InvalidInput(format!("window bound {v:?} is not an integer")))
        };
        YearWindow::new(parse(lo)?, parse(hi)?)
    }
}

/// One catalog row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRecord {
    /// 0-based row index in the source file (data rows only).
    pub id: usize,
    pub name: String,
    pub start_year: i64,
    pub end_year: i64,
    pub fatalities: Option<u64>,
}

impl ConflictRecord {
    pub fn new(
        id: usize,
        name: impl Into<String>,
        start_year: i64,
        end_year: i64,
        fatalities: Option<u64>,
    ) -> Result<Self> {
        if start_year > end_year {
            return Err(Error::InvalidInput(format!(
                "start year {start_year} is after end year {end_year}"
            )));
        }
        Ok(ConflictRecord {
            id,
            name: name.into(),
            start_year,
            end_year,
            fatalities,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictCatalog {
    pub records: Vec<ConflictRecord>,
    pub window: YearWindow,
}

impl ConflictCatalog {
    pub fn new(records: Vec<ConflictRecord>, window: YearWindow) -> Self {
        ConflictCatalog { records, window }
    }

    /// Exact sum of all present fatality counts.
    pub fn total_fatalities(&self) -> u128 {
        self.records
            .iter()
            .filter_map(|r| r.fatalities)
            .map(u128::from)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source, header is line 1.
    pub line: u64,
    pub reason: String,
}

/// Row accounting for one catalog parse.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub retained: usize,
    pub missing_fatalities: usize,
    pub out_of_window: usize,
    pub rejected: Vec<RejectedRow>,
}

impl ParseReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CatalogOptions {
    pub window: YearWindow,
    pub delimiter: u8,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        CatalogOptions {
            window: YearWindow::default(),
            delimiter: b',',
        }
    }
}

fn reader<R: Read>(source: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source)
}

fn parse_fatalities(field: &str) -> Option<u64> {
    if field.is_empty() {
        return None;
    }
    if let Ok(v) = field.parse::<u64>() {
        return Some(v);
    }
    // some exports write counts as "7500000.0" or "7.5e6"
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => {
            Some(v as u64)
        }
        _ => None,
    }
}

/// Parses a catalog CSV with columns `name,start_year,end_year,fatalities`
/// (extra columns are ignored, order is free).
///
/// Rows whose end year lies outside the window are dropped and counted. Rows
/// with an unusable year are rejected and counted; they never abort the parse.
pub fn parse_catalog<R: Read>(
    source: R,
    options: &CatalogOptions,
) -> Result<(ConflictCatalog, ParseReport)> {
    let mut rdr = reader(source, options.delimiter);
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv("catalog header", e))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Format("catalog is empty".into()));
    }
    let mut idx = [0usize; 4];
    for (slot, col) in idx.iter_mut().zip(CATALOG_COLUMNS) {
        *slot = headers.iter().position(|h| h == col).ok_or_else(|| {
            Error::Format(format!(
                "catalog header is missing column {col:?} (expected {})",
                CATALOG_COLUMNS.join(",")
            ))
        })?;
    }
    let [i_name, i_start, i_end, i_fat] = idx;

    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for (this_id, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv("catalog", e))?;
        let line = row.position().map_or(0, |p| p.line());
        report.rows_read += 1;

        let mut reject = |reason: String| report.rejected.push(RejectedRow { line, reason });
        let (Some(name), Some(start), Some(end)) =
            (row.get(i_name), row.get(i_start), row.get(i_end))
        else {
            reject(format!(
                "expected at least {} fields, found {}",
                headers.len(),
                row.len()
            ));
            continue;
        };
        let Ok(start_year) = start.parse::<i64>() else {
            reject(format!("start_year {start:?} is not an integer"));
            continue;
        };
        let Ok(end_year) = end.parse::<i64>() else {
            reject(format!("end_year {end:?} is not an integer"));
            continue;
        };
        if start_year > end_year {
            reject(format!("start_year {start_year} after end_year {end_year}"));
            continue;
        }
        if !options.window.contains(end_year) {
            report.out_of_window += 1;
            continue;
        }
        let fatalities = parse_fatalities(row.get(i_fat).unwrap_or(""));
        if fatalities.is_none() {
            report.missing_fatalities += 1;
        }
        report.retained += 1;
        records.push(ConflictRecord {
            id: this_id,
            name: name.to_string(),
            start_year,
            end_year,
            fatalities,
        });
    }

    Ok((ConflictCatalog::new(records, options.window), report))
}

/// Writes records in the format [`parse_catalog`] reads.
pub fn write_catalog<W: Write>(records: &[ConflictRecord], sink: W, delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(sink);
    let ctx = |e| Error::csv("writing catalog", e);
    wtr.write_record(CATALOG_COLUMNS).map_err(ctx)?;
    for r in records {
        let fat = r.fatalities.map(|f| f.to_string()).unwrap_or_default();
        wtr.write_record([
            r.name.as_str(),
            &r.start_year.to_string(),
            &r.end_year.to_string(),
            &fat,
        ])
        .map_err(ctx)?;
    }
    wtr.flush().map_err(|e| Error::io("<catalog sink>", e))?;
    Ok(())
}

/// How population is estimated between anchor years.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Linear in ln(population): geometric growth between anchors.
    #[default]
    LogLinear,
    Linear,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log-linear" | "log" => Ok(Interpolation::LogLinear),
            "linear" => Ok(Interpolation::Linear),
            _ => Err(Error::InvalidInput(format!(
                "unknown interpolation {s:?} (log-linear, linear)"
            ))),
        }
    }
}

/// World population anchors, strictly increasing in year.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    anchors: Vec<(i64, f64)>,
    interpolation: Interpolation,
}

impl PopulationTable {
    pub fn new(mut anchors: Vec<(i64, f64)>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::Format(format!(
                "population table needs at least 2 anchors, found {}",
                anchors.len()
            )));
        }
        if let Some(&(year, pop)) = anchors.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Format(format!(
                "population {pop} at year {year} is not positive"
            )));
        }
        anchors.sort_by_key(|&(y, _)| y);
        if let Some(w) = anchors.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Format(format!(
                "duplicate population year {}",
                w[0].0
            )));
        }
        Ok(PopulationTable {
            anchors,
            interpolation: Interpolation::default(),
        })
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn anchors(&self) -> &[(i64, f64)] {
        &self.anchors
    }

    pub fn first_year(&self) -> i64 {
        self.anchors[0].0
    }

    pub fn last_year(&self) -> i64 {
        self.anchors[self.anchors.len() - 1].0
    }

    /// Population in `year`; anchor years return the anchor value exactly.
    /// No extrapolation outside the anchor range.
    pub fn population_at(&self, year: i64) -> Result<f64> {
        let (lo, hi) = (self.first_year(), self.last_year());
        if year < lo || year > hi {
            return Err(Error::YearOutOfRange { year, lo, hi });
        }
        let upper = self.anchors.partition_point(|&(y, _)| y < year);
        let (y1, p1) = self.anchors[upper];
        if y1 == year {
            return Ok(p1);
        }
        let (y0, p0) = self.anchors[upper - 1];
        let t = (year - y0) as f64 / (y1 - y0) as f64;
        Ok(match self.interpolation {
            Interpolation::LogLinear => p0 * (p1 / p0).powf(t),
            Interpolation::Linear => p0 + t * (p1 - p0),
        })
    }
}

/// Parses a `year,population` CSV. Population accepts integer or scientific
/// notation; rows may come in any order.
pub fn parse_population<R: Read>(source: R, delimiter: u8) -> Result<PopulationTable> {
    let mut rdr = reader(source, delimiter);
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv("population header", e))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("population header is missing column {name:?}")))
    };
    let (i_year, i_pop) = (col("year")?, col("population")?);

    let mut anchors = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv("population", e))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let year = field(i_year).parse::<i64>().map_err(|_| {
            Error::Format(format!(
                "population line {line}: bad year {:?}",
                field(i_year)
            ))
        })?;
        let pop = field(i_pop).parse::<f64>().map_err(|_| {
            Error::Format(format!(
                "population line {line}: bad population {:?}",
                field(i_pop)
            ))
        })?;
        anchors.push((year, pop));
    }
    PopulationTable::new(anchors)
}
