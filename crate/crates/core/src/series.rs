//! Yearly and per-war series built from a catalog.
//!
//! Fatalities of a multi-year war are never spread over its duration: the
//! whole total lands in the war's end year. War counts use the same year by
//! default; [`Attribution::StartYear`] switches counting to the onset year.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::catalog::{ConflictCatalog, ConflictRecord, PopulationTable, YearWindow};
use crate::{Error, Result};

/// Which year of a war its count is attributed to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attribution {
    #[default]
    EndYear,
    StartYear,
}

impl Attribution {
    fn year(self, r: &ConflictRecord) -> i64 {
        match self {
            Attribution::EndYear => r.end_year,
            Attribution::StartYear => r.start_year,
        }
    }
}

/// One value per calendar year; years without wars hold 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSeries {
    pub start_year: i64,
    pub values: Vec<f64>,
}

impl AnnualSeries {
    pub fn zeros(window: YearWindow) -> Self {
        AnnualSeries {
            start_year: window.min,
            values: vec![0.0; window.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.values.len() as i64).map(move |i| self.start_year + i)
    }

    pub fn get(&self, year: i64) -> Option<f64> {
        let i = usize::try_from(year - self.start_year).ok()?;
        self.values.get(i).copied()
    }

    pub fn zero_years(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    /// Writes `year,value`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let rows = self.years().zip(self.values.iter().copied());
        write_two_column(sink, ["year", "value"], rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    /// Position in chronological order, 0-based.
    pub ordinal: usize,
    /// End year of the war (the year its fatalities are booked in).
    pub year: i64,
    pub value: f64,
}

/// One value per war in chronological order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventSeries {
    pub events: Vec<Event>,
}

impl EventSeries {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.value).collect()
    }

    /// Writes `ordinal,value`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let rows = self.events.iter().map(|e| (e.ordinal, e.value));
        write_two_column(sink, ["ordinal", "value"], rows)
    }
}

fn write_two_column<W, K>(
    sink: W,
    header: [&str; 2],
    rows: impl Iterator<Item = (K, f64)>,
) -> Result<()>
where
    W: Write,
    K: ToString,
{
    let mut wtr = csv::Writer::from_writer(sink);
    let ctx = |e| Error::csv("writing series", e);
    wtr.write_record(header).map_err(ctx)?;
    for (k, v) in rows {
        wtr.write_record([k.to_string(), v.to_string()])
            .map_err(ctx)?;
    }
    wtr.flush().map_err(|e| Error::io("<series sink>", e))
}

/// Reads the `value` column of a series CSV (`year,value` or `ordinal,value`).
pub fn read_series_values<R: Read>(source: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv("series header", e))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Format("series csv has no value column".into()))?;
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv("series", e))?;
        let field = row.get(col).unwrap_or("");
        let v = field.parse::<f64>().map_err(|_| {
            let line = row.position().map_or(0, |p| p.line());
            Error::Format(format!("series line {line}: {field:?} is not a number"))
        })?;
        values.push(v);
    }
    Ok(values)
}

/// Series plus the records that did not make it in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Built<S> {
    pub series: S,
    pub included: usize,
    pub missing_fatalities: usize,
    pub out_of_window: usize,
}

/// Number of wars attributed to each year of the catalog window.
pub fn wars_per_year(catalog: &ConflictCatalog, attribution: Attribution) -> Built<AnnualSeries> {
    let window = catalog.window;
    let mut counts = vec![0u64; window.len()];
    let mut out_of_window = 0;
    for r in &catalog.records {
        let year = attribution.year(r);
        if window.contains(year) {
            counts[(year - window.min) as usize] += 1;
        } else {
            out_of_window += 1;
        }
    }
    Built {
        included: catalog.records.len() - out_of_window,
        series: AnnualSeries {
            start_year: window.min,
            values: counts.into_iter().map(|c| c as f64).collect(),
        },
        missing_fatalities: 0,
        out_of_window,
    }
}

/// Total fatalities booked in each war's end year.
///
/// Accumulation is done in integers, so the series total equals the exact sum
/// of the contributing records as long as each yearly total fits in an f64
/// mantissa.
pub fn fatalities_per_year(catalog: &ConflictCatalog) -> Built<AnnualSeries> {
    let window = catalog.window;
    let mut totals = vec![0u128; window.len()];
    let (mut included, mut missing, mut outside) = (0, 0, 0);
    for r in &catalog.records {
        let Some(f) = r.fatalities else {
            missing += 1;
            continue;
        };
        if !window.contains(r.end_year) {
            outside += 1;
            continue;
        }
        totals[(r.end_year - window.min) as usize] += u128::from(f);
        included += 1;
    }
    Built {
        series: AnnualSeries {
            start_year: window.min,
            values: totals.into_iter().map(|t| t as f64).collect(),
        },
        included,
        missing_fatalities: missing,
        out_of_window: outside,
    }
}

/// One event per war with a known fatality count, ordered by
/// (start year, end year, catalog row).
pub fn fatalities_per_war(catalog: &ConflictCatalog) -> Built<EventSeries> {
    let window = catalog.window;
    let (mut missing, mut outside) = (0, 0);
    let mut wars: Vec<&ConflictRecord> = Vec::with_capacity(catalog.records.len());
    for r in &catalog.records {
        if r.fatalities.is_none() {
            missing += 1;
        } else if !window.contains(r.end_year) {
            outside += 1;
        } else {
            wars.push(r);
        }
    }
    wars.sort_by_key(|r| (r.start_year, r.end_year, r.id));
    let events = wars
        .iter()
        .enumerate()
        .map(|(ordinal, r)| Event {
            ordinal,
            year: r.end_year,
            value: r.fatalities.unwrap_or(0) as f64,
        })
        .collect::<Vec<_>>();
    Built {
        included: events.len(),
        series: EventSeries { events },
        missing_fatalities: missing,
        out_of_window: outside,
    }
}

/// Division by interpolated world population of the relevant year.
pub trait PerCapita: Sized {
    fn normalize_per_capita(&self, table: &PopulationTable) -> Result<Self>;
}

impl PerCapita for AnnualSeries {
    fn normalize_per_capita(&self, table: &PopulationTable) -> Result<Self> {
        let values = self
            .years()
            .zip(&self.values)
            .map(|(year, &v)| Ok(v / table.population_at(year)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnnualSeries {
            start_year: self.start_year,
            values,
        })
    }
}

impl PerCapita for EventSeries {
    fn normalize_per_capita(&self, table: &PopulationTable) -> Result<Self> {
        let events = self
            .events
            .iter()
            .map(|e| {
                Ok(Event {
                    value: e.value / table.population_at(e.year)?,
                    ..*e
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EventSeries { events })
    }
}
