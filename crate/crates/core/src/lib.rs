//! Stock index forecasting with phase-space reconstruction and an
//! adversarially trained LSTM generator.
//!
//! Two pipelines share everything up to the training loop:
//!
//! * baseline: wavelet denoise → normalize → delay embedding → LSTM regression
//! * adversarial: same inputs, LSTM generator trained against a 1-D CNN
//!   discriminator with a composite adversarial / forecast / direction loss
//!
//! Both are evaluated walk-forward on a held-out chronological split.

pub mod discriminator;
pub mod generator;
pub mod ingest;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod paramio;
pub mod preprocess;
pub mod report;
pub mod trainer;

pub use ingest::{Feature, NormParams, PriceBar, PriceSeries};
pub use metrics::EvalReport;
pub use report::{ComparisonReport, ComparisonRow};
pub use trainer::{ModelKind, TrainConfig, TrainError, TrainHistory, TrainedModel};
