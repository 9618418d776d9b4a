//! OHLCV ingestion: CSV parsing, validation, min-max normalization and
//! chronological splitting.

use std::collections::HashMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod remote;

pub use remote::{fetch_remote, FetchError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("CSV header lacks required column `{0}`")]
    MissingColumn(String),
    #[error("no valid rows in price data")]
    EmptySeries,
    #[error("{bad} of {total} rows are unparseable (first: line {first_line}: {reason})")]
    MalformedRow {
        bad: usize,
        total: usize,
        first_line: usize,
        reason: String,
    },
    #[error("CSV read error: {0}")]
    Csv(String),
    #[error("cannot normalize: all values are equal")]
    DegenerateSeries,
    #[error("normalization needs at least two values, got {0}")]
    TooShort(usize),
    #[error("invalid normalization parameters: max {max} <= min {min}")]
    InvalidParams { min: f64, max: f64 },
    #[error("chronological split of {len} bars at fraction {fraction} leaves one side empty")]
    DegenerateSplit { len: usize, fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

/// Which column of a bar feeds the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Open,
    High,
    Low,
    #[default]
    Close,
    AdjClose,
    Volume,
}

impl Feature {
    pub fn of(self, bar: &PriceBar) -> f64 {
        match self {
            Feature::Open => bar.open,
            Feature::High => bar.high,
            Feature::Low => bar.low,
            Feature::Close => bar.close,
            Feature::AdjClose => bar.adj_close,
            Feature::Volume => bar.volume,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Open => "open",
            Feature::High => "high",
            Feature::Low => "low",
            Feature::Close => "close",
            Feature::AdjClose => "adj_close",
            Feature::Volume => "volume",
        })
    }
}

impl std::str::FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().replace(' ', "_").as_str() {
            "open" => Feature::Open,
            "high" => Feature::High,
            "low" => Feature::Low,
            "close" => Feature::Close,
            "adj_close" => Feature::AdjClose,
            "volume" => Feature::Volume,
            other => return Err(format!("unknown feature `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: String,
    pub bars: Vec<PriceBar>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn values(&self, feature: Feature) -> Vec<f64> {
        self.bars.iter().map(|b| feature.of(b)).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    /// Serialize back to the Yahoo-style CSV layout `parse_csv` reads.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
        for b in &self.bars {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.date.format("%Y-%m-%d"),
                b.open,
                b.high,
                b.low,
                b.close,
                b.adj_close,
                b.volume
            ));
        }
        out
    }
}

/// Result of parsing: the series plus how many rows were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSeries {
    pub series: PriceSeries,
    pub dropped_rows: usize,
}

const REQUIRED: [&str; 6] = ["Date", "Open", "High", "Low", "Close", "Volume"];

enum RowOutcome {
    Bar(PriceBar),
    /// Empty or `null` numeric field; dropped silently.
    Missing,
    Malformed(String),
}

/// Parse Yahoo-format OHLCV CSV text.
///
/// Rows with empty or `null` numeric fields are dropped and counted. Other
/// unparseable rows are dropped too unless they make up more than half the
/// file, in which case the whole parse fails. Duplicate dates keep the first
/// occurrence.
pub fn parse_csv(raw: &str, ticker: &str) -> Result<ParsedSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(raw.as_bytes());
    let headers = reader.headers().map_err(|e| IngestError::Csv(e.to_string()))?.clone();
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_ascii_lowercase(), i))
        .collect();
    let col = |name: &str| index.get(&name.to_ascii_lowercase()).copied();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = col(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }
    let [date_c, open_c, high_c, low_c, close_c, vol_c] = cols;
    let adj_c = col("Adj Close");

    let mut bars = Vec::new();
    let mut dropped = 0usize;
    let mut malformed = 0usize;
    let mut first_malformed: Option<(usize, String)> = None;
    let mut total = 0usize;

    for (i, record) in reader.records().enumerate() {
        total += 1;
        let line = i + 2;
        let outcome = match record {
            Err(e) => RowOutcome::Malformed(e.to_string()),
            Ok(rec) => {
                let field = |c: usize| rec.get(c).unwrap_or("");
                parse_row(
                    field(date_c),
                    [
                        field(open_c),
                        field(high_c),
                        field(low_c),
                        field(close_c),
                        adj_c.map(field).unwrap_or_else(|| field(close_c)),
                        field(vol_c),
                    ],
                )
            }
        };
        match outcome {
            RowOutcome::Bar(b) => bars.push(b),
            RowOutcome::Missing => dropped += 1,
            RowOutcome::Malformed(reason) => {
                malformed += 1;
                dropped += 1;
                first_malformed.get_or_insert((line, reason));
            }
        }
    }

    if total > 0 && malformed * 2 > total {
        let (first_line, reason) = first_malformed.unwrap_or_default();
        return Err(IngestError::MalformedRow {
            bad: malformed,
            total,
            first_line,
            reason,
        });
    }
    bars.sort_by_key(|b| b.date);
    let before = bars.len();
    bars.dedup_by_key(|b| b.date);
    dropped += before - bars.len();
    if bars.is_empty() {
        return Err(IngestError::EmptySeries);
    }
    Ok(ParsedSeries {
        series: PriceSeries {
            ticker: ticker.to_string(),
            bars,
        },
        dropped_rows: dropped,
    })
}

fn parse_row(date: &str, nums: [&str; 6]) -> RowOutcome {
    if nums.iter().any(|s| s.is_empty() || s.eq_ignore_ascii_case("null")) {
        return RowOutcome::Missing;
    }
    let date = match NaiveDate::parse_from_str(date, "%Y-%m-%d") {
        Ok(d) => d,
        Err(e) => return RowOutcome::Malformed(format!("bad date `{date}`: {e}")),
    };
    let mut v = [0.0f64; 6];
    for (slot, s) in v.iter_mut().zip(nums) {
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => *slot = x,
            _ => return RowOutcome::Malformed(format!("bad number `{s}`")),
        }
    }
    RowOutcome::Bar(PriceBar {
        date,
        open: v[0],
        high: v[1],
        low: v[2],
        close: v[3],
        adj_close: v[4],
        volume: v[5],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    NonPositivePrice,
    NonFinitePrice,
    NegativeVolume,
    HighBelowOpenClose,
    LowAboveOpenClose,
    DateNotIncreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub date: NaiveDate,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateGap {
    pub from: NaiveDate,
    pub to: NaiveDate,
    /// Calendar days between the two bars.
    pub span_days: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Consecutive bars more than [`GAP_THRESHOLD_DAYS`] calendar days apart.
    pub gaps: Vec<DateGap>,
    pub max_gap_days: i64,
    pub mean_gap_days: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Weekends and single holidays produce gaps of up to four days.
pub const GAP_THRESHOLD_DAYS: i64 = 4;

pub fn validate(series: &PriceSeries) -> ValidationReport {
    let mut report = ValidationReport::default();
    for b in &series.bars {
        let mut flag = |rule| report.violations.push(Violation { date: b.date, rule });
        let prices = [b.open, b.high, b.low, b.close, b.adj_close];
        if prices.iter().any(|p| !p.is_finite()) {
            flag(Rule::NonFinitePrice);
            continue;
        }
        if prices.iter().any(|&p| p <= 0.0) {
            flag(Rule::NonPositivePrice);
        }
        if b.volume < 0.0 || !b.volume.is_finite() {
            flag(Rule::NegativeVolume);
        }
        if b.high < b.open.max(b.close) {
            flag(Rule::HighBelowOpenClose);
        }
        if b.low > b.open.min(b.close) {
            flag(Rule::LowAboveOpenClose);
        }
    }
    let mut total_gap = 0i64;
    for pair in series.bars.windows(2) {
        let span = (pair[1].date - pair[0].date).num_days();
        if span <= 0 {
            report.violations.push(Violation {
                date: pair[1].date,
                rule: Rule::DateNotIncreasing,
            });
        }
        total_gap += span;
        report.max_gap_days = report.max_gap_days.max(span);
        if span > GAP_THRESHOLD_DAYS {
            report.gaps.push(DateGap {
                from: pair[0].date,
                to: pair[1].date,
                span_days: span,
            });
        }
    }
    if series.len() > 1 {
        report.mean_gap_days = total_gap as f64 / (series.len() - 1) as f64;
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min_value: f64,
    pub max_value: f64,
    pub feature: Feature,
}

impl NormParams {
    pub fn fit(values: &[f64], feature: Feature) -> Result<Self, IngestError> {
        if values.len() < 2 {
            return Err(IngestError::TooShort(values.len()));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(IngestError::DegenerateSeries);
        }
        Ok(Self {
            min_value: min,
            max_value: max,
            feature,
        })
    }

    fn check(&self) -> Result<f64, IngestError> {
        let range = self.max_value - self.min_value;
        if range <= 0.0 || !range.is_finite() {
            return Err(IngestError::InvalidParams {
                min: self.min_value,
                max: self.max_value,
            });
        }
        Ok(range)
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.min_value) / (self.max_value - self.min_value)
    }

    pub fn invert(&self, u: f64) -> f64 {
        self.min_value + u * (self.max_value - self.min_value)
    }

    pub fn apply_all(&self, values: &[f64]) -> Result<Vec<f64>, IngestError> {
        self.check()?;
        Ok(values.iter().map(|&v| self.apply(v)).collect())
    }
}

/// Min-max scale `values` onto `[0, 1]` (close-price feature).
pub fn normalize(values: &[f64]) -> Result<(Vec<f64>, NormParams), IngestError> {
    normalize_feature(values, Feature::Close)
}

pub fn normalize_feature(values: &[f64], feature: Feature) -> Result<(Vec<f64>, NormParams), IngestError> {
    let params = NormParams::fit(values, feature)?;
    Ok((params.apply_all(values)?, params))
}

pub fn denormalize(values: &[f64], params: &NormParams) -> Result<Vec<f64>, IngestError> {
    params.check()?;
    Ok(values.iter().map(|&u| params.invert(u)).collect())
}

/// First `floor(n * train_fraction)` bars train, the rest test.
pub fn split_chronological(
    series: &PriceSeries,
    train_fraction: f64,
) -> Result<(PriceSeries, PriceSeries), IngestError> {
    let n = series.len();
    let degenerate = IngestError::DegenerateSplit {
        len: n,
        fraction: train_fraction,
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(degenerate);
    }
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(degenerate);
    }
    let part = |bars: &[PriceBar]| PriceSeries {
        ticker: series.ticker.clone(),
        bars: bars.to_vec(),
    };
    Ok((part(&series.bars[..cut]), part(&series.bars[cut..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume\n";

    fn bar(date: &str, close: f64) -> PriceBar {
        PriceBar {
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            open: close,
            high: close + 1.0,
            low: close - 1.0,
            close,
            adj_close: close,
            volume: 1000.0,
        }
    }

    fn series(bars: Vec<PriceBar>) -> PriceSeries {
        PriceSeries {
            ticker: "TEST".into(),
            bars,
        }
    }

    #[test]
    fn parses_three_valid_rows() {
        let raw = format!(
            "{HEADER}2013-01-02,10,11,9,10.5,10.5,100\n2013-01-03,10.5,12,10,11,11,200\n2013-01-04,11,11.5,10.5,11.2,11.2,150\n"
        );
        let parsed = parse_csv(&raw, "DJIA").unwrap();
        assert_eq!(parsed.series.len(), 3);
        assert_eq!(parsed.dropped_rows, 0);
        assert_eq!(parsed.series.bars[1].close, 11.0);
        assert_eq!(parsed.series.ticker, "DJIA");
    }

    #[test]
    fn resorts_out_of_order_rows() {
        let raw =
            format!("{HEADER}2013-01-03,1,2,1,1.5,1.5,1\n2013-01-02,1,2,1,1.2,1.2,1\n2013-01-04,1,2,1,1.7,1.7,1\n");
        let s = parse_csv(&raw, "X").unwrap().series;
        let dates = s.dates();
        assert!(dates.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.bars[0].close, 1.2);
    }

    #[test]
    fn drops_null_rows_with_count() {
        let raw = format!(
            "{HEADER}2013-01-02,1,2,1,1.5,1.5,1\n2013-01-03,1,2,1,null,null,1\n2013-01-04,1,2,1,1.7,1.7,1\n2013-01-07,1,2,1,1.9,1.9,1\n"
        );
        let p = parse_csv(&raw, "X").unwrap();
        assert_eq!(p.series.len(), 3);
        assert_eq!(p.dropped_rows, 1);
    }

    #[test]
    fn adj_close_defaults_to_close() {
        let raw = "Date,Open,High,Low,Close,Volume\n2013-01-02,1,2,1,1.5,10\n";
        let s = parse_csv(raw, "X").unwrap().series;
        assert_eq!(s.bars[0].adj_close, 1.5);
    }

    #[test]
    fn missing_column_is_reported() {
        let raw = "Date,Open,High,Close,Volume\n2013-01-02,1,2,1.5,10\n";
        assert_eq!(parse_csv(raw, "X"), Err(IngestError::MissingColumn("Low".into())));
    }

    #[test]
    fn empty_series_is_an_error() {
        assert_eq!(parse_csv(HEADER, "X"), Err(IngestError::EmptySeries));
        let raw = format!("{HEADER}2013-01-02,null,null,null,null,null,null\n");
        assert_eq!(parse_csv(&raw, "X"), Err(IngestError::EmptySeries));
    }

    #[test]
    fn majority_malformed_fails_minority_drops() {
        let bad = format!("{HEADER}2013-01-02,1,2,1,1.5,1.5,1\nnot-a-date,1,2,1,1,1,1\n2013-01-04,abc,2,1,1,1,1\n");
        assert!(matches!(
            parse_csv(&bad, "X"),
            Err(IngestError::MalformedRow { bad: 2, total: 3, .. })
        ));
        let ok = format!("{HEADER}2013-01-02,1,2,1,1.5,1.5,1\nnot-a-date,1,2,1,1,1,1\n2013-01-04,1,2,1,1,1,1\n");
        let p = parse_csv(&ok, "X").unwrap();
        assert_eq!((p.series.len(), p.dropped_rows), (2, 1));
    }

    #[test]
    fn validate_clean_series() {
        let s = series(
            ["2020-01-06", "2020-01-07", "2020-01-08", "2020-01-09", "2020-01-10"]
                .iter()
                .map(|d| bar(d, 10.0))
                .collect(),
        );
        let r = validate(&s);
        assert!(r.is_clean());
        assert!(r.gaps.is_empty());
    }

    #[test]
    fn validate_flags_high_below_close() {
        let mut b = bar("2020-01-06", 10.0);
        b.high = 9.5;
        let r = validate(&series(vec![b]));
        assert_eq!(
            r.violations,
            vec![Violation {
                date: b.date,
                rule: Rule::HighBelowOpenClose
            }]
        );
    }

    #[test]
    fn validate_records_ten_day_gap() {
        let s = series(vec![
            bar("2020-01-01", 10.0),
            bar("2020-01-11", 11.0),
            bar("2020-01-12", 11.0),
        ]);
        let r = validate(&s);
        assert_eq!(r.gaps.len(), 1);
        assert_eq!(r.gaps[0].span_days, 10);
        assert_eq!(r.max_gap_days, 10);
        assert!((r.mean_gap_days - 5.5).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[10.0, 20.0, 30.0]).unwrap().0, vec![0.0, 0.5, 1.0]);
        let (u, _) = normalize(&[2.0, 4.0, 7.0, 4.0]).unwrap();
        for (a, b) in u.iter().zip([0.0, 0.4, 1.0, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(normalize(&[5.0, 5.0, 5.0]), Err(IngestError::DegenerateSeries));
        assert_eq!(normalize(&[5.0]), Err(IngestError::TooShort(1)));
    }

    #[test]
    fn denormalize_examples() {
        let p = NormParams {
            min_value: 10.0,
            max_value: 30.0,
            feature: Feature::Close,
        };
        assert_eq!(denormalize(&[0.0, 0.5, 1.0], &p).unwrap(), vec![10.0, 20.0, 30.0]);
        assert_eq!(denormalize(&[], &p).unwrap(), Vec::<f64>::new());
        let bad = NormParams {
            min_value: 3.0,
            max_value: 3.0,
            feature: Feature::Close,
        };
        assert!(matches!(
            denormalize(&[0.5], &bad),
            Err(IngestError::InvalidParams { .. })
        ));
    }

    #[test]
    fn split_examples() {
        let mk = |n: usize| {
            series(
                (0..n)
                    .map(|i| {
                        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64);
                        PriceBar {
                            date: d,
                            ..bar("2020-01-01", 1.0 + i as f64)
                        }
                    })
                    .collect(),
            )
        };
        let (tr, te) = split_chronological(&mk(10), 0.8).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let (tr, te) = split_chronological(&mk(7), 0.5).unwrap();
        assert_eq!((tr.len(), te.len()), (3, 4));
        let (tr, te) = split_chronological(&mk(10), 0.99).unwrap();
        assert_eq!((tr.len(), te.len()), (9, 1));
        assert!(matches!(
            split_chronological(&mk(1), 0.5),
            Err(IngestError::DegenerateSplit { .. })
        ));
        assert!(matches!(
            split_chronological(&mk(10), 1.0),
            Err(IngestError::DegenerateSplit { .. })
        ));
    }

    fn arb_series() -> impl Strategy<Value = PriceSeries> {
        prop::collection::vec((1.0f64..1e4, 0.0f64..10.0, 0.0f64..1e6), 2..60).prop_map(|rows| {
            let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
            series(
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (close, spread, volume))| PriceBar {
                        date: start + chrono::Days::new(i as u64 * 2),
                        open: close,
                        high: close + spread,
                        low: (close - spread).max(0.5),
                        close,
                        adj_close: close,
                        volume: volume.floor(),
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(values in prop::collection::vec(-1e6f64..1e6, 2..100)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let (u, p) = normalize(&values).unwrap();
            prop_assert!(u.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let back = denormalize(&u, &p).unwrap();
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
            }
        }

        #[test]
        fn csv_parse_is_idempotent(s in arb_series()) {
            let once = parse_csv(&s.to_csv(), "TEST").unwrap().series;
            prop_assert_eq!(&once, &s);
            let twice = parse_csv(&once.to_csv(), "TEST").unwrap().series;
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn split_preserves_order_and_count(s in arb_series(), frac in 0.05f64..0.95) {
            if let Ok((a, b)) = split_chronological(&s, frac) {
                let mut joined = a.bars.clone();
                joined.extend(b.bars.iter().copied());
                prop_assert_eq!(joined, s.bars);
            }
        }
    }
}
