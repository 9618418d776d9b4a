//! Baseline LSTM regression and adversarial GAN training, prediction, and
//! walk-forward evaluation.
//!
//! Both trainers run the same seeded minibatch SGD loop over delay-embedded
//! samples. Per batch of `K` samples the baseline takes one generator step on
//! the summed squared error. The GAN takes a generator step on the summed
//! composite loss (the discriminator's verdict on `window ++ Y'` supplies the
//! adversarial term), then a discriminator step on a second batch drawn from
//! an independent shuffle, scoring `window ++ Y` as real and `window ++ Y'`
//! as fake.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discriminator::{
    discriminator_backward, discriminator_forward, DiscriminatorConfig, DiscriminatorError, DiscriminatorParams,
};
use crate::generator::{generator_backward, generator_forward, GeneratorConfig, GeneratorError, GeneratorParams};
use crate::ingest::{split_chronological, Feature, IngestError, NormParams, PriceBar, PriceSeries};
use crate::losses::{
    baseline_loss, baseline_loss_grad, discriminator_loss, discriminator_loss_grad, generator_loss, l_adv_g_grad,
    l_p_grad, GeneratorLoss, LossError, LossWeights, PredictionPair,
};
use crate::metrics::{evaluate, EvalReport, MetricsError};
use crate::numerics::{ParamSet, Rng};
use crate::paramio::{NamedParams, ParamDocument, ParamIoError};
use crate::preprocess::{
    phase_space_reconstruct, wavelet_denoise, PreprocessError, ReconstructedDataset, WaveletConfig,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("{what}: need at least {need} values, got {got}")]
    TooShort {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("training diverged in epoch {epoch}: {reason}")]
    DivergenceDetected {
        epoch: usize,
        reason: String,
        /// Records of every epoch completed before the divergence.
        history: TrainHistory,
    },
    #[error("input shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Discriminator(#[from] DiscriminatorError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model file: {0}")]
    ModelFile(#[from] ParamIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gan,
    #[serde(alias = "lstm", alias = "baseline")]
    LstmBaseline,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gan => "gan",
            ModelKind::LstmBaseline => "lstm",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gan" => Ok(ModelKind::Gan),
            "lstm" | "lstm_baseline" | "baseline" => Ok(ModelKind::LstmBaseline),
            other => Err(format!("unknown model kind `{other}` (expected gan or lstm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub rho_g: f64,
    pub rho_d: f64,
    pub weights: LossWeights,
    /// Minibatch size `K`.
    pub batch_size: usize,
    pub epochs: usize,
    /// Embedding dimension (window length).
    pub m: usize,
    /// Delay between window elements.
    pub tau: usize,
    pub hidden_size: usize,
    pub lstm_layers: usize,
    pub peephole: bool,
    pub seed: u64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub wavelet: WaveletConfig,
    /// Apply wavelet denoising to the training series.
    pub denoise: bool,
    pub feature: Feature,
    /// Feed normalized volume as a second generator input per timestep.
    pub include_volume: bool,
    pub train_fraction: f64,
    /// Discriminator layout; `None` adapts the standard one to `m + 1`.
    pub discriminator: Option<DiscriminatorConfig>,
    /// Measure wall time. When off all recorded durations are zero, making
    /// every output byte-reproducible.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Gan,
            rho_g: 0.01,
            rho_d: 0.01,
            weights: LossWeights::default(),
            batch_size: 32,
            epochs: 100,
            m: 121,
            tau: 1,
            hidden_size: 25,
            lstm_layers: 1,
            peephole: true,
            seed: 42,
            grad_clip: Some(5.0),
            wavelet: WaveletConfig::default(),
            denoise: true,
            feature: Feature::Close,
            include_volume: false,
            train_fraction: 0.8,
            discriminator: None,
            timing: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        for (name, v) in [("rho_g", self.rho_g), ("rho_d", self.rho_d)] {
            if v <= 0.0 || !v.is_finite() {
                return bad(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("m", self.m),
            ("tau", self.tau),
            ("hidden_size", self.hidden_size),
            ("lstm_layers", self.lstm_layers),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if let Some(c) = self.grad_clip {
            if c <= 0.0 || c.is_nan() {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.include_volume && self.feature == Feature::Volume {
            return bad("include_volume is redundant when the modeled feature is volume".into());
        }
        self.weights.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.wavelet.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.discriminator_config()
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            window: self.m,
            input_size: if self.include_volume { 2 } else { 1 },
            hidden_size: self.hidden_size,
            layers: self.lstm_layers,
            peephole: self.peephole,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        self.discriminator
            .clone()
            .unwrap_or_else(|| DiscriminatorConfig::fitted(self.m + 1))
    }

    fn clock(&self) -> Clock {
        Clock { enabled: self.timing }
    }
}

#[derive(Debug, Clone, Copy)]
struct Clock {
    enabled: bool,
}

impl Clock {
    fn start(self) -> Option<Instant> {
        self.enabled.then(Instant::now)
    }

    fn since(self, t: Option<Instant>) -> Duration {
        t.map_or(Duration::ZERO, |t| t.elapsed())
    }
}

/// Normalized, delay-embedded training samples plus the scaling that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    /// Modeled feature: windows, targets.
    pub dataset: ReconstructedDataset,
    /// Generator input per sample (`m × input_size`, timestep-major).
    pub inputs: Vec<Vec<f64>>,
    pub norm: NormParams,
    pub volume_norm: Option<NormParams>,
}

impl TrainingData {
    /// Single-feature data: generator inputs are the windows themselves.
    pub fn from_dataset(dataset: ReconstructedDataset, norm: NormParams) -> Self {
        let inputs = dataset.samples.iter().map(|s| s.window.clone()).collect();
        Self {
            dataset,
            inputs,
            norm,
            volume_norm: None,
        }
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }
}

/// Denoise, normalize and embed a training split.
///
/// Scaling parameters are fitted here, on the training bars only.
pub fn prepare_training(train: &PriceSeries, cfg: &TrainConfig) -> Result<TrainingData, TrainError> {
    let raw = train.values(cfg.feature);
    let smoothed = if cfg.denoise {
        wavelet_denoise(&raw, &cfg.wavelet)?
    } else {
        raw
    };
    let norm = NormParams::fit(&smoothed, cfg.feature)?;
    let scaled = norm.apply_all(&smoothed)?;
    let dataset = phase_space_reconstruct(&scaled, cfg.m, cfg.tau)?;
    if !cfg.include_volume {
        return Ok(TrainingData::from_dataset(dataset, norm));
    }
    let volume = train.values(Feature::Volume);
    let volume_norm = NormParams::fit(&volume, Feature::Volume)?;
    let volume_scaled = volume_norm.apply_all(&volume)?;
    let inputs = dataset
        .samples
        .iter()
        .map(|s| interleave(&s.window, &delay_window(&volume_scaled, s.start, cfg.m, cfg.tau)))
        .collect();
    Ok(TrainingData {
        dataset,
        inputs,
        norm,
        volume_norm: Some(volume_norm),
    })
}

fn delay_window(signal: &[f64], start: usize, m: usize, tau: usize) -> Vec<f64> {
    (0..m).map(|d| signal[start + d * tau]).collect()
}

fn interleave(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).flat_map(|(x, y)| [*x, *y]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample generator objective.
    pub g_loss: f64,
    pub g_adv: f64,
    /// Forecast term: `L_p` for the GAN, squared error for the baseline.
    pub g_p: f64,
    pub g_dpl: f64,
    /// Mean per-sample discriminator loss; absent for the baseline.
    pub d_loss: Option<f64>,
    pub seconds: f64,
    pub rho_g: f64,
    pub rho_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn total_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.seconds).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,g_loss,g_adv,g_p,g_dpl,d_loss,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch,
                r.g_loss,
                r.g_adv,
                r.g_p,
                r.g_dpl,
                r.d_loss.map(|d| d.to_string()).unwrap_or_default(),
                r.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub generator: GeneratorParams,
    pub discriminator: Option<DiscriminatorParams>,
    pub norm: NormParams,
    pub volume_norm: Option<NormParams>,
    pub config: TrainConfig,
}

pub const MODEL_FORMAT: &str = "stockgan.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    kind: ModelKind,
    config: TrainConfig,
    norm: NormParams,
    volume_norm: Option<NormParams>,
    generator: ParamDocument<GeneratorConfig>,
    discriminator: Option<ParamDocument<DiscriminatorConfig>>,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String, TrainError> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: self.kind,
            config: self.config.clone(),
            norm: self.norm,
            volume_norm: self.volume_norm,
            generator: self.generator.to_document(),
            discriminator: self.discriminator.as_ref().map(|d| d.to_document()),
        };
        Ok(serde_json::to_string_pretty(&doc).map_err(ParamIoError::from)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(ParamIoError::from)?;
        if doc.format != MODEL_FORMAT {
            return Err(ParamIoError::WrongKind {
                expected: MODEL_FORMAT.into(),
                found: doc.format,
            }
            .into());
        }
        if doc.version != MODEL_VERSION {
            return Err(ParamIoError::UnsupportedVersion(doc.version).into());
        }
        let generator = GeneratorParams::from_document(doc.generator)?;
        let discriminator = doc.discriminator.map(DiscriminatorParams::from_document).transpose()?;
        if generator.config != doc.config.generator_config() {
            return Err(TrainError::ShapeMismatch(format!(
                "generator layout {:?} disagrees with config {:?}",
                generator.config,
                doc.config.generator_config()
            )));
        }
        if doc.config.include_volume != doc.volume_norm.is_some() {
            return Err(TrainError::ShapeMismatch("volume scaling missing or unexpected".into()));
        }
        if (doc.kind == ModelKind::Gan) != discriminator.is_some() {
            return Err(TrainError::ShapeMismatch(
                "discriminator presence does not match model kind".into(),
            ));
        }
        Ok(Self {
            kind: doc.kind,
            generator,
            discriminator,
            norm: doc.norm,
            volume_norm: doc.volume_norm,
            config: doc.config,
        })
    }

    pub fn window(&self) -> usize {
        self.config.m
    }
}

/// Clip `grads` to `clip` global norm, then `params -= rate * grads`.
///
/// Returns the pre-clip norm; `grads` holds the step actually applied.
pub fn sgd_step<P: ParamSet>(params: &mut P, grads: &mut P, rate: f64, clip: Option<f64>) -> f64 {
    let norm = grads.l2_norm();
    if let Some(c) = clip {
        if norm > c {
            grads.scale(c / norm);
        }
    }
    params.add_scaled(-rate, grads);
    norm
}

fn with_terminal(window: &[f64], terminal: f64) -> Vec<f64> {
    let mut seq = Vec::with_capacity(window.len() + 1);
    seq.extend_from_slice(window);
    seq.push(terminal);
    seq
}

/// Summed composite-loss gradient of the generator over `batch`.
pub fn generator_batch_gradient(
    g: &GeneratorParams,
    d: &DiscriminatorParams,
    data: &TrainingData,
    batch: &[usize],
    w: &LossWeights,
) -> Result<(GeneratorParams, GeneratorLoss), TrainError> {
    let mut grads = g.zeroed();
    let mut loss = GeneratorLoss::default();
    for &i in batch {
        let sample = &data.dataset.samples[i];
        let (pred, cache) = generator_forward(g, &data.inputs[i])?;
        let (judged, d_cache) = discriminator_forward(d, &with_terminal(&sample.window, pred))?;
        let last_known = *sample.window.last().expect("m >= 1");
        let pair = PredictionPair::step(last_known, sample.target, pred);
        loss.accumulate(&generator_loss(&pair, judged.logit, w)?);
        // Direction term is piecewise constant and contributes no gradient.
        let (_, d_input) = discriminator_backward(d, &d_cache, 1.0)?;
        let d_terminal = *d_input.last().expect("non-empty sequence");
        let d_pred = w.lambda_adv * l_adv_g_grad(judged.logit) * d_terminal
            + w.lambda_p * l_p_grad(&pair.actual, &pair.predicted, w.p)?[0];
        grads.add_scaled(1.0, &generator_backward(g, &cache, d_pred)?);
    }
    Ok((grads, loss))
}

/// Summed discriminator-loss gradient over `batch`, against the current
/// generator's predictions.
pub fn discriminator_batch_gradient(
    g: &GeneratorParams,
    d: &DiscriminatorParams,
    data: &TrainingData,
    batch: &[usize],
) -> Result<(DiscriminatorParams, f64), TrainError> {
    let mut grads = d.zeroed();
    let mut loss = 0.0;
    for &i in batch {
        let sample = &data.dataset.samples[i];
        let (pred, _) = generator_forward(g, &data.inputs[i])?;
        let (real, real_cache) = discriminator_forward(d, &with_terminal(&sample.window, sample.target))?;
        let (fake, fake_cache) = discriminator_forward(d, &with_terminal(&sample.window, pred))?;
        loss += discriminator_loss(real.logit, fake.logit);
        let (d_real, d_fake) = discriminator_loss_grad(real.logit, fake.logit);
        grads.add_scaled(1.0, &discriminator_backward(d, &real_cache, d_real)?.0);
        grads.add_scaled(1.0, &discriminator_backward(d, &fake_cache, d_fake)?.0);
    }
    Ok((grads, loss))
}

/// Summed squared-error gradient of the generator over `batch`.
pub fn baseline_batch_gradient(
    g: &GeneratorParams,
    data: &TrainingData,
    batch: &[usize],
) -> Result<(GeneratorParams, f64), TrainError> {
    let mut grads = g.zeroed();
    let mut loss = 0.0;
    for &i in batch {
        let (pred, cache) = generator_forward(g, &data.inputs[i])?;
        let target = [data.dataset.samples[i].target];
        loss += baseline_loss(&[pred], &target)?;
        let d_pred = baseline_loss_grad(&[pred], &target)?[0];
        grads.add_scaled(1.0, &generator_backward(g, &cache, d_pred)?);
    }
    Ok((grads, loss))
}

struct Models {
    generator: GeneratorParams,
    discriminator: Option<DiscriminatorParams>,
    shuffle: Rng,
}

fn init_models(data: &TrainingData, cfg: &TrainConfig, adversarial: bool) -> Result<Models, TrainError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let gcfg = cfg.generator_config();
    if data.dataset.m != cfg.m || data.inputs.iter().any(|x| x.len() != cfg.m * gcfg.input_size) {
        return Err(TrainError::ShapeMismatch(format!(
            "dataset windows do not match m = {} with {} input feature(s)",
            cfg.m, gcfg.input_size
        )));
    }
    let mut root = Rng::new(cfg.seed);
    let mut g_rng = root.fork();
    let mut d_rng = root.fork();
    let shuffle = root.fork();
    let generator = GeneratorParams::init(gcfg, &mut g_rng)?;
    let discriminator = adversarial
        .then(|| DiscriminatorParams::init(cfg.discriminator_config(), &mut d_rng))
        .transpose()?;
    Ok(Models {
        generator,
        discriminator,
        shuffle,
    })
}

fn shuffled(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}

fn diverged(epoch: usize, reason: String, history: &TrainHistory) -> TrainError {
    TrainError::DivergenceDetected {
        epoch,
        reason,
        history: history.clone(),
    }
}

/// Adversarial training of the LSTM generator against the CNN discriminator.
pub fn train_gan(data: &TrainingData, cfg: &TrainConfig) -> Result<(TrainedModel, TrainHistory), TrainError> {
    let Models {
        mut generator,
        discriminator,
        mut shuffle,
    } = init_models(data, cfg, true)?;
    let mut discriminator = discriminator.expect("adversarial init builds a discriminator");
    let clock = cfg.clock();
    let n = data.len();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let started = clock.start();
        let g_order = shuffled(n, &mut shuffle);
        let d_order = shuffled(n, &mut shuffle);
        let mut g_sum = GeneratorLoss::default();
        let mut d_sum = 0.0;
        for (g_batch, d_batch) in g_order.chunks(cfg.batch_size).zip(d_order.chunks(cfg.batch_size)) {
            let (mut g_grad, g_loss) =
                generator_batch_gradient(&generator, &discriminator, data, g_batch, &cfg.weights)?;
            if !g_loss.total.is_finite() || !g_grad.all_finite() {
                return Err(diverged(epoch, "non-finite generator loss".into(), &history));
            }
            sgd_step(&mut generator, &mut g_grad, cfg.rho_g, cfg.grad_clip);
            g_sum.accumulate(&g_loss);

            let (mut d_grad, d_loss) = discriminator_batch_gradient(&generator, &discriminator, data, d_batch)?;
            if !d_loss.is_finite() || !d_grad.all_finite() {
                return Err(diverged(epoch, "non-finite discriminator loss".into(), &history));
            }
            sgd_step(&mut discriminator, &mut d_grad, cfg.rho_d, cfg.grad_clip);
            d_sum += d_loss;
        }
        if !generator.all_finite() || !discriminator.all_finite() {
            return Err(diverged(epoch, "non-finite parameters".into(), &history));
        }
        let mean = g_sum.scaled(1.0 / n as f64);
        history.records.push(EpochRecord {
            epoch,
            g_loss: mean.total,
            g_adv: mean.adversarial,
            g_p: mean.forecast,
            g_dpl: mean.direction,
            d_loss: Some(d_sum / n as f64),
            seconds: clock.since(started).as_secs_f64(),
            rho_g: cfg.rho_g,
            rho_d: Some(cfg.rho_d),
        });
    }
    let model = TrainedModel {
        kind: ModelKind::Gan,
        generator,
        discriminator: Some(discriminator),
        norm: data.norm,
        volume_norm: data.volume_norm,
        config: TrainConfig {
            model_kind: ModelKind::Gan,
            ..cfg.clone()
        },
    };
    Ok((model, history))
}

/// Plain LSTM regression on the squared one-step error.
pub fn train_baseline(data: &TrainingData, cfg: &TrainConfig) -> Result<(TrainedModel, TrainHistory), TrainError> {
    let Models {
        mut generator,
        mut shuffle,
        ..
    } = init_models(data, cfg, false)?;
    let clock = cfg.clock();
    let n = data.len();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let started = clock.start();
        let order = shuffled(n, &mut shuffle);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (mut grad, loss) = baseline_batch_gradient(&generator, data, batch)?;
            if !loss.is_finite() || !grad.all_finite() {
                return Err(diverged(epoch, "non-finite loss".into(), &history));
            }
            sgd_step(&mut generator, &mut grad, cfg.rho_g, cfg.grad_clip);
            sum += loss;
        }
        if !generator.all_finite() {
            return Err(diverged(epoch, "non-finite parameters".into(), &history));
        }
        let mean = sum / n as f64;
        history.records.push(EpochRecord {
            epoch,
            g_loss: mean,
            g_adv: 0.0,
            g_p: mean,
            g_dpl: 0.0,
            d_loss: None,
            seconds: clock.since(started).as_secs_f64(),
            rho_g: cfg.rho_g,
            rho_d: None,
        });
    }
    let model = TrainedModel {
        kind: ModelKind::LstmBaseline,
        generator,
        discriminator: None,
        norm: data.norm,
        volume_norm: data.volume_norm,
        config: TrainConfig {
            model_kind: ModelKind::LstmBaseline,
            ..cfg.clone()
        },
    };
    Ok((model, history))
}

/// Dispatch on `cfg.model_kind`.
pub fn train(data: &TrainingData, cfg: &TrainConfig) -> Result<(TrainedModel, TrainHistory), TrainError> {
    match cfg.model_kind {
        ModelKind::Gan => train_gan(data, cfg),
        ModelKind::LstmBaseline => train_baseline(data, cfg),
    }
}

/// One-step prediction from `m` raw prices.
pub fn predict(model: &TrainedModel, window: &[f64]) -> Result<f64, TrainError> {
    if model.volume_norm.is_some() {
        return Err(TrainError::ShapeMismatch(
            "model consumes volume; use predict_with_volume".into(),
        ));
    }
    if window.len() != model.window() {
        return Err(TrainError::ShapeMismatch(format!(
            "model window is {}, got {} values",
            model.window(),
            window.len()
        )));
    }
    let scaled: Vec<f64> = window.iter().map(|&v| model.norm.apply(v)).collect();
    let (y, _) = generator_forward(&model.generator, &scaled)?;
    Ok(model.norm.invert(y))
}

pub fn predict_with_volume(model: &TrainedModel, window: &[f64], volume: &[f64]) -> Result<f64, TrainError> {
    let Some(vn) = model.volume_norm else {
        return predict(model, window);
    };
    if window.len() != model.window() || volume.len() != model.window() {
        return Err(TrainError::ShapeMismatch(format!(
            "model window is {}, got {} prices and {} volumes",
            model.window(),
            window.len(),
            volume.len()
        )));
    }
    let scaled: Vec<f64> = window.iter().map(|&v| model.norm.apply(v)).collect();
    let vol: Vec<f64> = volume.iter().map(|&v| vn.apply(v)).collect();
    let (y, _) = generator_forward(&model.generator, &interleave(&scaled, &vol))?;
    Ok(model.norm.invert(y))
}

/// Aligned walk-forward output. Index 0 of `actual`/`predicted` is the anchor
/// (last observed value before the first forecast); dates start at the first
/// forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkForward {
    pub anchor: f64,
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Source index in the test series of each forecast target.
    pub target_index: Vec<usize>,
}

impl WalkForward {
    pub fn anchored_actual(&self) -> Vec<f64> {
        std::iter::once(self.anchor)
            .chain(self.actual.iter().copied())
            .collect()
    }

    pub fn anchored_predicted(&self) -> Vec<f64> {
        std::iter::once(self.anchor)
            .chain(self.predicted.iter().copied())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,actual,predicted\n");
        for ((d, a), p) in self.dates.iter().zip(&self.actual).zip(&self.predicted) {
            out.push_str(&format!("{},{a},{p}\n", d.format("%Y-%m-%d")));
        }
        out
    }
}

/// Predict one step ahead at every window position inside `test` using
/// only the raw (un-denoised) values inside each window.
pub fn walk_forward(model: &TrainedModel, test: &[PriceBar]) -> Result<WalkForward, TrainError> {
    let (m, tau) = (model.config.m, model.config.tau);
    let values: Vec<f64> = test.iter().map(|b| model.config.feature.of(b)).collect();
    let volumes: Vec<f64> = test.iter().map(|b| b.volume).collect();
    let need = (m - 1) * tau + 2;
    if values.len() < need {
        return Err(TrainError::TooShort {
            what: "walk-forward test span",
            need,
            got: values.len(),
        });
    }
    let embedded = phase_space_reconstruct(&values, m, tau)?;
    let mut out = WalkForward {
        anchor: values[(m - 1) * tau],
        dates: Vec::with_capacity(embedded.len()),
        actual: Vec::with_capacity(embedded.len()),
        predicted: Vec::with_capacity(embedded.len()),
        target_index: Vec::with_capacity(embedded.len()),
    };
    for (i, s) in embedded.samples.iter().enumerate() {
        let target = embedded.target_index(i);
        let pred = if model.volume_norm.is_some() {
            predict_with_volume(model, &s.window, &delay_window(&volumes, s.start, m, tau))?
        } else {
            predict(model, &s.window)?
        };
        out.dates.push(test[target].date);
        out.actual.push(s.target);
        out.predicted.push(pred);
        out.target_index.push(target);
    }
    Ok(out)
}

/// Walk-forward evaluation. Processing time is the wall time of the
/// walk-forward itself (zero when timing is disabled).
pub fn evaluate_on_test(model: &TrainedModel, test: &PriceSeries) -> Result<(EvalReport, WalkForward), TrainError> {
    let clock = model.config.clock();
    let started = clock.start();
    let wf = walk_forward(model, &test.bars)?;
    let elapsed = clock.since(started);
    let report = evaluate(&wf.anchored_actual(), &wf.anchored_predicted(), elapsed)?;
    Ok((report, wf))
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub report: EvalReport,
    pub walk_forward: WalkForward,
}

/// Split chronologically, train on the head, evaluate on the tail.
///
/// The report's processing time is the training wall time.
pub fn run_pipeline(series: &PriceSeries, cfg: &TrainConfig) -> Result<PipelineRun, TrainError> {
    cfg.validate()?;
    let (train_part, test_part) = split_chronological(series, cfg.train_fraction)?;
    let data = prepare_training(&train_part, cfg)?;
    let (model, history) = train(&data, cfg)?;
    let (mut report, walk_forward) = evaluate_on_test(&model, &test_part)?;
    report.processing_time_s = history.total_seconds();
    Ok(PipelineRun {
        model,
        history,
        report,
        walk_forward,
    })
}
