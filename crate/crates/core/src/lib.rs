//! Statistics for historical conflict catalogs.
//!
//! The pipeline turns a catalog of wars (start year, end year, total
//! fatalities) into yearly and per-war series, optionally divided by world
//! population, and then analyses them:
//!
//! * [`dist`]: empirical complementary CDF `P(X >= x)` on a regular grid and
//!   least-squares fits of a power law `a * x^b` and a Gaussian on the
//!   log-fatality axis, with SSE / R² / adjusted R² / RMSE.
//! * [`timefreq`]: biased autocorrelation with white-noise and Bartlett
//!   standard-error bands, and an FFT periodogram.
//! * [`synth`]: seeded generators with known ground truth.
//!
//! The `conflict-stats` binary wires these together and emits plot data as
//! CSV and fit tables as JSON.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod dist;
mod error;
pub mod report;
pub mod series;
pub mod synth;
pub mod timefreq;

pub use error::{Error, Result};
