//! Side-by-side baseline vs GAN comparison across tickers.

use serde::{Deserialize, Serialize};

use crate::ingest::PriceSeries;
use crate::metrics::{EvalReport, TABLE_COLUMNS};
use crate::trainer::{run_pipeline, ModelKind, PipelineRun, TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub ticker: String,
    pub baseline: EvalReport,
    pub gan: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Field-wise arithmetic mean of `rows` (`n_points` is the floored mean).
    pub averages: ComparisonRow,
}

pub const AVERAGE_LABEL: &str = "Average";

fn mean_report<'a>(reports: impl ExactSizeIterator<Item = &'a EvalReport>) -> EvalReport {
    let n = reports.len();
    let mut acc = EvalReport {
        directional_accuracy_pct: 0.0,
        trend_da_pct: 0.0,
        rmse: 0.0,
        rmsre: 0.0,
        mrmse: 0.0,
        processing_time_s: 0.0,
        n_points: 0,
    };
    for r in reports {
        acc.directional_accuracy_pct += r.directional_accuracy_pct;
        acc.trend_da_pct += r.trend_da_pct;
        acc.rmse += r.rmse;
        acc.rmsre += r.rmsre;
        acc.mrmse += r.mrmse;
        acc.processing_time_s += r.processing_time_s;
        acc.n_points += r.n_points;
    }
    if n == 0 {
        return acc;
    }
    let k = n as f64;
    EvalReport {
        directional_accuracy_pct: acc.directional_accuracy_pct / k,
        trend_da_pct: acc.trend_da_pct / k,
        rmse: acc.rmse / k,
        rmsre: acc.rmsre / k,
        mrmse: acc.mrmse / k,
        processing_time_s: acc.processing_time_s / k,
        n_points: acc.n_points / n,
    }
}

impl ComparisonReport {
    pub fn from_rows(rows: Vec<ComparisonRow>) -> Self {
        let averages = ComparisonRow {
            ticker: AVERAGE_LABEL.into(),
            baseline: mean_report(rows.iter().map(|r| &r.baseline)),
            gan: mean_report(rows.iter().map(|r| &r.gan)),
        };
        Self { rows, averages }
    }

    fn all_rows(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().chain(std::iter::once(&self.averages))
    }

    /// Tab-separated table: a group header (State of Art / Proposed), the
    /// metric header, one line per ticker, then the averages.
    pub fn to_text(&self) -> String {
        let mut out = String::from("Stock Index\tState of Art\t\t\tProposed\t\t\n");
        out.push('\t');
        out.push_str(&[TABLE_COLUMNS.join("\t"), TABLE_COLUMNS.join("\t")].join("\t"));
        out.push('\n');
        for row in self.all_rows() {
            let cells: Vec<String> = row
                .baseline
                .table_cells()
                .into_iter()
                .chain(row.gan.table_cells())
                .collect();
            out.push_str(&format!("{}\t{}\n", row.ticker, cells.join("\t")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers and strings")
    }

    /// `(ticker, baseline, proposed)` rows for one metric, averages excluded.
    pub fn bar_csv(&self, metric: impl Fn(&EvalReport) -> f64) -> String {
        let mut out = String::from("ticker,baseline,proposed\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.ticker,
                metric(&row.baseline),
                metric(&row.gan)
            ));
        }
        out
    }
}

/// Both pipelines for one ticker, sharing split and seed.
#[derive(Debug, Clone)]
pub struct TickerRun {
    pub ticker: String,
    pub baseline: PipelineRun,
    pub gan: PipelineRun,
}

/// Train and evaluate both model kinds on every series. Series `i` uses seed
/// `cfg.seed + i`, so results do not depend on evaluation order.
pub fn compare(series: &[PriceSeries], cfg: &TrainConfig) -> Result<(ComparisonReport, Vec<TickerRun>), TrainError> {
    let mut runs = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let with = |kind| TrainConfig {
            model_kind: kind,
            seed,
            ..cfg.clone()
        };
        runs.push(TickerRun {
            ticker: s.ticker.clone(),
            baseline: run_pipeline(s, &with(ModelKind::LstmBaseline))?,
            gan: run_pipeline(s, &with(ModelKind::Gan))?,
        });
    }
    let rows = runs
        .iter()
        .map(|r| ComparisonRow {
            ticker: r.ticker.clone(),
            baseline: r.baseline.report,
            gan: r.gan.report,
        })
        .collect();
    Ok((ComparisonReport::from_rows(rows), runs))
}
