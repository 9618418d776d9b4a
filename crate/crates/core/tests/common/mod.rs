#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use stockgan_core::ingest::{PriceBar, PriceSeries};

pub fn bar(date: NaiveDate, close: f64, volume: f64) -> PriceBar {
    PriceBar {
        date,
        open: close,
        high: close,
        low: close,
        close,
        adj_close: close,
        volume,
    }
}

pub fn series_from(ticker: &str, values: &[f64]) -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    PriceSeries {
        ticker: ticker.into(),
        bars: values
            .iter()
            .enumerate()
            .map(|(i, &v)| bar(start + Days::new(i as u64), v, 1e6 + 1e3 * (i % 7) as f64))
            .collect(),
    }
}

pub fn sine(n: usize, period: f64) -> Vec<f64> {
    (0..n)
        .map(|t| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * t as f64 / period).sin())
        .collect()
}
