use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use stockgan_core::losses::PNorm;
use stockgan_core::preprocess::ThresholdRule;
use stockgan_core::{Feature, ModelKind, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "stockgan", version, about = "PSR + LSTM / GAN stock index forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model on the chronological training split of a CSV.
    Train(TrainArgs),
    /// Walk-forward evaluation of a saved model.
    Evaluate(EvaluateArgs),
    /// Train and evaluate baseline and GAN on each dataset; emit the table.
    Compare(CompareArgs),
    /// Turn a compare output directory into plot-ready CSVs.
    Plotdata(PlotArgs),
    /// Download daily quotes as CSV.
    Fetch(FetchArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label stored in outputs; defaults to the file stem.
    #[arg(long)]
    pub ticker: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Saved model.json.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Evaluate on every bar instead of the held-out tail.
    #[arg(long)]
    pub full: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory written by `compare`.
    #[arg(long)]
    pub from: PathBuf,
    /// Defaults to `<from>/plot`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_ENDPOINT: &str = "https://query1.finance.yahoo.com/v7/finance/download/{ticker}?period1={start_ts}&period2={end_ts}&interval=1d&events=history";

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(long)]
    pub ticker: String,
    #[arg(long)]
    pub start: NaiveDate,
    #[arg(long)]
    pub end: NaiveDate,
    /// URL template with {ticker} and {start}/{end} or {start_ts}/{end_ts}.
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    pub endpoint: String,
    /// Output file; defaults to `<ticker>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Training flags. The same keys form the flat JSON accepted by `--config`;
/// a flag given on the command line wins over the file, which wins over the
/// built-in defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// gan | lstm
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rho_g: Option<f64>,
    #[arg(long)]
    pub rho_d: Option<f64>,
    #[arg(long)]
    pub lambda_adv: Option<f64>,
    #[arg(long)]
    pub lambda_p: Option<f64>,
    #[arg(long)]
    pub lambda_dpl: Option<f64>,
    /// Forecast-loss norm: 1 or 2.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub lstm_layers: Option<usize>,
    #[arg(long)]
    pub peephole: Option<bool>,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub wavelet_levels: Option<usize>,
    /// universal | none | fixed:<value>
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub denoise: Option<bool>,
    #[arg(long)]
    pub feature: Option<Feature>,
    #[arg(long)]
    pub include_volume: Option<bool>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub timing: Option<bool>,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Flat JSON file of training keys (same names as the flags).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record zero durations so every output file is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub flags: Overrides,
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($field:ident),+) => {
        Overrides { $($field: $hi.$field.or($lo.$field)),+ }
    };
}

impl Overrides {
    /// `self` wins wherever both sides are set.
    pub fn over(self, lower: Overrides) -> Overrides {
        layer!(
            self,
            lower,
            model,
            seed,
            rho_g,
            rho_d,
            lambda_adv,
            lambda_p,
            lambda_dpl,
            p,
            batch_size,
            epochs,
            m,
            tau,
            hidden_size,
            lstm_layers,
            peephole,
            grad_clip,
            wavelet_levels,
            threshold,
            denoise,
            feature,
            include_volume,
            train_fraction,
            timing
        )
    }

    pub fn apply(self, mut cfg: TrainConfig) -> Result<TrainConfig, String> {
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),+) => {
                $(if let Some(v) = self.$src { cfg.$($dst).+ = v; })+
            };
        }
        set!(
            model => model_kind, seed => seed, rho_g => rho_g, rho_d => rho_d,
            lambda_adv => weights.lambda_adv, lambda_p => weights.lambda_p, lambda_dpl => weights.lambda_dpl,
            batch_size => batch_size, epochs => epochs, m => m, tau => tau, hidden_size => hidden_size,
            lstm_layers => lstm_layers, peephole => peephole, wavelet_levels => wavelet.levels,
            denoise => denoise, feature => feature, include_volume => include_volume,
            train_fraction => train_fraction, timing => timing
        );
        if let Some(p) = self.p {
            cfg.weights.p = PNorm::try_from(p).map_err(|e| e.to_string())?;
        }
        if let Some(c) = self.grad_clip {
            cfg.grad_clip = (c != 0.0).then_some(c);
        }
        if let Some(t) = &self.threshold {
            cfg.wavelet.threshold = t.parse::<ThresholdRule>().map_err(|e| e.to_string())?;
        }
        Ok(cfg)
    }
}
