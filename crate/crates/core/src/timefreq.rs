//! Autocorrelation with standard-error bands, and the FFT periodogram.
//!
//! The autocovariance uses the biased estimator
//!
//! ```text
//! c_i = (1/T) Σ_{t=1}^{T-i} (y_t - ȳ)(y_{t+i} - ȳ),    r_i = c_i / c_0
//! ```
//!
//! for every lag up to `T - 1`. Two standard errors are reported: the flat
//! white-noise band `√(1/T)` and the Bartlett band
//! `√((1/T)(1 + 2 Σ_{k=1}^{i-1} r_k²))`, which widens with lag.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::{Error, Result};

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Biased (1/T) autocovariance at one lag.
pub fn autocovariance(series: &[f64], lag: usize) -> Result<f64> {
    let t = series.len();
    if t < 2 {
        return Err(Error::TooFewPoints { needed: 2, have: t });
    }
    if lag >= t {
        return Err(Error::InvalidInput(format!(
            "lag {lag} outside 0..={}",
            t - 1
        )));
    }
    let m = mean(series);
    let s: f64 = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    Ok(s / t as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AcfMethod {
    /// O(T²) sum per lag.
    Direct,
    /// Zero-padded FFT convolution, O(T log T).
    #[default]
    Fft,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfResult {
    /// `r[i]` for lags `0..T`.
    pub r: Vec<f64>,
    pub se_bartlett: Vec<f64>,
    pub se_white: f64,
    pub t: usize,
}

impl AcfResult {
    pub fn lags(&self) -> std::ops::Range<usize> {
        0..self.r.len()
    }

    /// Writes `lag,r,se_bartlett,se_white`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        let ctx = |e| Error::csv("writing acf", e);
        wtr.write_record(["lag", "r", "se_bartlett", "se_white"])
            .map_err(ctx)?;
        for lag in self.lags() {
            wtr.write_record([
                lag.to_string(),
                self.r[lag].to_string(),
                self.se_bartlett[lag].to_string(),
                self.se_white.to_string(),
            ])
            .map_err(ctx)?;
        }
        wtr.flush().map_err(|e| Error::io("<acf sink>", e))
    }
}

fn autocovariances_direct(centered: &[f64]) -> Vec<f64> {
    let t = centered.len();
    (0..t)
        .map(|lag| {
            centered
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / t as f64
        })
        .collect()
}

fn autocovariances_fft(centered: &[f64]) -> Vec<f64> {
    let t = centered.len();
    let n = (2 * t).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for z in &mut buf {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * t as f64);
    buf[..t].iter().map(|z| z.re * scale).collect()
}

/// Autocorrelation for lags `0..T` with both error bands.
pub fn autocorrelation(series: &[f64]) -> Result<AcfResult> {
    autocorrelation_with(series, AcfMethod::default())
}

pub fn autocorrelation_with(series: &[f64], method: AcfMethod) -> Result<AcfResult> {
    let t = series.len();
    if t < 2 {
        return Err(Error::TooFewPoints { needed: 2, have: t });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    let m = mean(series);
    let centered: Vec<f64> = series.iter().map(|v| v - m).collect();
    let c = match method {
        AcfMethod::Direct => autocovariances_direct(&centered),
        AcfMethod::Fft => autocovariances_fft(&centered),
    };
    // exact zero-variance check, independent of FFT round-off
    if centered.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    let c0 = c[0];
    let mut r: Vec<f64> = c.iter().map(|ci| ci / c0).collect();
    r[0] = 1.0;

    let inv_t = 1.0 / t as f64;
    let se_white = inv_t.sqrt();
    let mut se_bartlett = Vec::with_capacity(t);
    let mut sum_sq = 0.0;
    for i in 0..t {
        // q = i - 1: the sum runs over k = 1..=i-1
        if i >= 2 {
            sum_sq += r[i - 1] * r[i - 1];
        }
        se_bartlett.push((inv_t * (1.0 + 2.0 * sum_sq)).sqrt());
    }
    Ok(AcfResult {
        r,
        se_bartlett,
        se_white,
        t,
    })
}

/// One-sided periodogram of a mean-removed series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// `k / T` cycles per sample (per year for annual series).
    pub freqs: Vec<f64>,
    /// `|DFT_k|² / T` for `k = 0..=T/2`.
    pub power: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub freq: f64,
    pub power: f64,
}

impl Spectrum {
    /// Sum of power over all `T` two-sided bins, reconstructed from the
    /// one-sided half. Equals `Σ (y - ȳ)²` by Parseval.
    pub fn two_sided_total(&self) -> f64 {
        let t = self.t;
        let mut total = self.power[0];
        for k in 1..self.power.len() {
            let mirrored = 2 * k != t;
            total += if mirrored {
                2.0 * self.power[k]
            } else {
                self.power[k]
            };
        }
        total
    }

    /// The `count` strongest non-zero-frequency bins, strongest first.
    pub fn peaks(&self, count: usize) -> Vec<Peak> {
        let mut bins: Vec<usize> = (1..self.power.len()).collect();
        bins.sort_by(|&a, &b| self.power[b].total_cmp(&self.power[a]).then(a.cmp(&b)));
        bins.into_iter()
            .take(count)
            .map(|k| Peak {
                freq: self.freqs[k],
                power: self.power[k],
            })
            .collect()
    }

    /// Writes `freq_cycles_per_year,power`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        let ctx = |e| Error::csv("writing spectrum", e);
        wtr.write_record(["freq_cycles_per_year", "power"])
            .map_err(ctx)?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            wtr.write_record([f.to_string(), p.to_string()])
                .map_err(ctx)?;
        }
        wtr.flush().map_err(|e| Error::io("<spectrum sink>", e))
    }
}

/// Rectangular-window periodogram, no zero padding.
pub fn periodogram(series: &[f64]) -> Result<Spectrum> {
    let t = series.len();
    if t < 4 {
        return Err(Error::TooFewPoints { needed: 4, have: t });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    let m = mean(series);
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);
    let half = t / 2;
    Ok(Spectrum {
        freqs: (0..=half).map(|k| k as f64 / t as f64).collect(),
        power: buf[..=half]
            .iter()
            .map(|z| z.norm_sqr() / t as f64)
            .collect(),
        t,
    })
}

pub const DEFAULT_CONFIDENCE_MULTIPLIER: f64 = 1.96;
/// Fraction of lags that must sit inside the band for a "random" verdict.
pub const WHITENESS_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Whiteness {
    pub fraction_inside: f64,
    pub band: f64,
    pub verdict: bool,
}

/// Fraction of lags `1..T` whose `|r|` lies within `multiplier · √(1/T)`;
/// the series counts as white when that fraction is at least 95%.
pub fn whiteness_check(acf: &AcfResult, multiplier: f64) -> Whiteness {
    let band = multiplier * acf.se_white;
    let lags = &acf.r[1..];
    let inside = lags.iter().filter(|r| r.abs() <= band).count();
    let fraction_inside = if lags.is_empty() {
        1.0
    } else {
        inside as f64 / lags.len() as f64
    };
    Whiteness {
        fraction_inside,
        band,
        verdict: fraction_inside >= WHITENESS_FRACTION,
    }
}
