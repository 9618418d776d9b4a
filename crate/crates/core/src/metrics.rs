//! Forecast evaluation: directional accuracy (trend-state and product-sign
//! forms), RMSE and relative RMSE.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("actual value at index {0} is zero; relative error undefined")]
    ZeroDenominator(usize),
}

fn check(actual: &[f64], predicted: &[f64], need: usize) -> Result<(), MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.len() < need {
        return Err(MetricsError::TooShort {
            need,
            got: actual.len(),
        });
    }
    Ok(())
}

/// Direction of the latest move; flat moves keep the previous direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrendState {
    pub trend: u8,
    /// The latest move was flat and `trend` was inherited.
    pub carried: bool,
}

impl TrendState {
    /// Before any move the trend is 0 (down).
    pub const INITIAL: TrendState = TrendState {
        trend: 0,
        carried: true,
    };

    pub fn step(self, diff: f64) -> TrendState {
        if diff > 0.0 {
            TrendState {
                trend: 1,
                carried: false,
            }
        } else if diff < 0.0 {
            TrendState {
                trend: 0,
                carried: false,
            }
        } else {
            TrendState { carried: true, ..self }
        }
    }
}

/// Trend of each consecutive move of `series` (`len − 1` entries).
pub fn trends(series: &[f64]) -> Vec<TrendState> {
    let mut state = TrendState::INITIAL;
    series
        .windows(2)
        .map(|w| {
            state = state.step(w[1] - w[0]);
            state
        })
        .collect()
}

/// Percentage of moves whose trend state agrees between the two series.
pub fn trend_da(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, 2)?;
    let hits = trends(actual)
        .iter()
        .zip(trends(predicted))
        .filter(|(a, p)| a.trend == p.trend)
        .count();
    Ok(100.0 * hits as f64 / (actual.len() - 1) as f64)
}

/// Percentage of steps where `(Y_{t+1} − Y_t)(Y'_{t+1} − Y'_t) > 0`.
///
/// Flat moves on either side count as misses.
pub fn directional_accuracy(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, 2)?;
    let steps = actual.len() - 1;
    let hits = (0..steps)
        .filter(|&t| (actual[t + 1] - actual[t]) * (predicted[t + 1] - predicted[t]) > 0.0)
        .count();
    Ok(100.0 / steps as f64 * hits as f64)
}

/// The "modified" directional accuracy is the same count.
pub use self::directional_accuracy as mda;

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, 1)?;
    let mse = actual.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum::<f64>() / actual.len() as f64;
    Ok(mse.sqrt())
}

/// Root mean squared relative error `√(mean(((Y' − Y)/Y)²))`.
pub fn rmsre(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(actual, predicted, 1)?;
    if let Some(i) = actual.iter().position(|&y| y == 0.0) {
        return Err(MetricsError::ZeroDenominator(i));
    }
    let msre = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| ((p - y) / y).powi(2))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(msre.sqrt())
}

/// Relative RMSE over the test span; identical to [`rmsre`].
pub use self::rmsre as mrmse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub directional_accuracy_pct: f64,
    pub trend_da_pct: f64,
    pub rmse: f64,
    pub rmsre: f64,
    pub mrmse: f64,
    pub processing_time_s: f64,
    /// Forecast steps `T_0`.
    pub n_points: usize,
}

/// Score aligned series of `T_0 + 1` points.
///
/// The first element anchors the first move: directional metrics use all
/// `T_0` consecutive moves, error metrics use the `T_0` points after the
/// anchor.
pub fn evaluate(actual: &[f64], predicted: &[f64], elapsed: Duration) -> Result<EvalReport, MetricsError> {
    check(actual, predicted, 2)?;
    let (a, p) = (&actual[1..], &predicted[1..]);
    let relative = rmsre(a, p)?;
    Ok(EvalReport {
        directional_accuracy_pct: directional_accuracy(actual, predicted)?,
        trend_da_pct: trend_da(actual, predicted)?,
        rmse: rmse(a, p)?,
        rmsre: relative,
        mrmse: mrmse(a, p)?,
        processing_time_s: elapsed.as_secs_f64(),
        n_points: a.len(),
    })
}

/// Column headings in report order.
pub const TABLE_COLUMNS: [&str; 3] = ["Directional Accuracy", "Processing Time", "MRSE"];

impl EvalReport {
    /// The three table cells: DA percentage, seconds, relative RMSE.
    pub fn table_cells(&self) -> [String; 3] {
        [
            format!("{:.2}%", self.directional_accuracy_pct),
            format!("{:.2} Sec", self.processing_time_s),
            format!("{:.4}", self.mrmse),
        ]
    }

    pub fn to_table(&self) -> String {
        let cells = self.table_cells();
        let mut out = String::new();
        for (h, c) in TABLE_COLUMNS.iter().zip(&cells) {
            out.push_str(&format!("{h:<22}{c:>14}\n"));
        }
        out.push_str(&format!("{:<22}{:>14.6}\n", "RMSE", self.rmse));
        out.push_str(&format!("{:<22}{:>13.2}%\n", "Trend DA", self.trend_da_pct));
        out.push_str(&format!("{:<22}{:>14}\n", "Points", self.n_points));
        out
    }
}
