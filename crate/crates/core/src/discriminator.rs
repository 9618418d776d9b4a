//! 1-D CNN discriminator: scores a window followed by one terminal value with
//! the probability that the terminal value is real.
//!
//! Layout: valid (unpadded) strided convolutions, each followed by ReLU, then
//! a channel-major flatten, ReLU dense layers, and a final scalar logit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{relu, sigmoid, xavier_bound, xavier_init, Matrix, ParamSet, Rng};
use crate::paramio::NamedParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscriminatorError {
    #[error("signal of length {len} is shorter than kernel width {width}")]
    SignalTooShort { len: usize, width: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match these parameters: {0}")]
    StaleCache(String),
    #[error("invalid discriminator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub width: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Sequence length: window plus terminal value.
    pub input_len: usize,
    pub conv: Vec<ConvSpec>,
    /// Hidden dense widths; the scalar logit head is always appended.
    pub dense: Vec<usize>,
}

impl DiscriminatorConfig {
    /// Two stride-2 width-5 convolutions (1→8→16 channels) and a 32-unit
    /// hidden dense layer.
    pub fn standard(input_len: usize) -> Self {
        Self {
            input_len,
            conv: vec![
                ConvSpec {
                    out_channels: 8,
                    width: 5,
                    stride: 2,
                },
                ConvSpec {
                    out_channels: 16,
                    width: 5,
                    stride: 2,
                },
            ],
            dense: vec![32],
        }
    }

    /// `(channels, length)` of each conv layer's output.
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize)>, DiscriminatorError> {
        let mut len = self.input_len;
        let mut out = Vec::with_capacity(self.conv.len());
        for (i, c) in self.conv.iter().enumerate() {
            if c.width == 0 || c.stride == 0 || c.out_channels == 0 {
                return Err(DiscriminatorError::InvalidConfig(format!(
                    "conv layer {i} needs positive width, stride and channels"
                )));
            }
            len = conv_output_len(len, c.width, c.stride).ok_or(DiscriminatorError::InvalidConfig(format!(
                "conv layer {i} (width {}) does not fit a length-{len} input",
                c.width
            )))?;
            out.push((c.out_channels, len));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), DiscriminatorError> {
        if self.input_len == 0 {
            return Err(DiscriminatorError::InvalidConfig("input_len must be >= 1".into()));
        }
        if self.dense.contains(&0) {
            return Err(DiscriminatorError::InvalidConfig("dense widths must be >= 1".into()));
        }
        self.conv_shapes().map(|_| ())
    }

    /// Adapts the standard architecture to short inputs by dropping conv
    /// layers that would not fit.
    pub fn fitted(input_len: usize) -> Self {
        let mut cfg = Self::standard(input_len);
        while cfg.conv_shapes().is_err() {
            cfg.conv.pop();
        }
        cfg
    }
}

/// `floor((len - width) / stride) + 1`, or `None` when the kernel is wider
/// than the signal.
pub fn conv_output_len(len: usize, width: usize, stride: usize) -> Option<usize> {
    (len >= width && stride > 0).then(|| (len - width) / stride + 1)
}

/// Single-channel valid cross-correlation.
pub fn conv1d_forward(
    kernel: &[f64],
    bias: f64,
    stride: usize,
    signal: &[f64],
) -> Result<Vec<f64>, DiscriminatorError> {
    let out_len = conv_output_len(signal.len(), kernel.len(), stride).ok_or(DiscriminatorError::SignalTooShort {
        len: signal.len(),
        width: kernel.len(),
    })?;
    Ok((0..out_len)
        .map(|j| {
            let base = j * stride;
            bias + kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * signal[base + k])
                .sum::<f64>()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub stride: usize,
    /// `[out][in][k]`, flattened.
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn kernel(&self, o: usize, c: usize) -> &[f64] {
        let start = (o * self.in_channels + c) * self.width;
        &self.kernels[start..start + self.width]
    }

    /// Input is channel-major `[in][len]`.
    fn forward(&self, input: &[f64], in_len: usize) -> Vec<f64> {
        let out_len = (in_len - self.width) / self.stride + 1;
        let mut out = vec![0.0; self.out_channels * out_len];
        for o in 0..self.out_channels {
            for j in 0..out_len {
                let mut z = self.bias[o];
                for c in 0..self.in_channels {
                    let sig = &input[c * in_len + j * self.stride..];
                    z += self.kernel(o, c).iter().zip(sig).map(|(w, x)| w * x).sum::<f64>();
                }
                out[o * out_len + j] = z;
            }
        }
        out
    }

    /// Accumulates kernel/bias gradients and returns the gradient w.r.t. the
    /// layer input.
    fn backward(&self, input: &[f64], in_len: usize, d_out: &[f64], grads: &mut ConvLayer) -> Vec<f64> {
        let out_len = d_out.len() / self.out_channels;
        let mut d_in = vec![0.0; input.len()];
        for o in 0..self.out_channels {
            for j in 0..out_len {
                let g = d_out[o * out_len + j];
                if g == 0.0 {
                    continue;
                }
                grads.bias[o] += g;
                for c in 0..self.in_channels {
                    let base = c * in_len + j * self.stride;
                    let kstart = (o * self.in_channels + c) * self.width;
                    for k in 0..self.width {
                        grads.kernels[kstart + k] += g * input[base + k];
                        d_in[base + k] += g * self.kernels[kstart + k];
                    }
                }
            }
        }
        d_in
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams {
    pub config: DiscriminatorConfig,
    pub conv: Vec<ConvLayer>,
    /// Hidden dense layers followed by the `1 × n` logit head.
    pub dense: Vec<DenseLayer>,
}

impl DiscriminatorParams {
    fn build(config: DiscriminatorConfig, mut rng: Option<&mut Rng>) -> Result<Self, DiscriminatorError> {
        config.validate()?;
        let shapes = config.conv_shapes()?;
        let mut conv = Vec::with_capacity(config.conv.len());
        let mut in_channels = 1;
        for spec in &config.conv {
            let n = spec.out_channels * in_channels * spec.width;
            let kernels = match rng.as_deref_mut() {
                Some(r) => {
                    let bound = xavier_bound(spec.out_channels * spec.width, in_channels * spec.width);
                    (0..n).map(|_| r.uniform(-bound, bound)).collect()
                }
                None => vec![0.0; n],
            };
            conv.push(ConvLayer {
                in_channels,
                out_channels: spec.out_channels,
                width: spec.width,
                stride: spec.stride,
                kernels,
                bias: vec![0.0; spec.out_channels],
            });
            in_channels = spec.out_channels;
        }
        let mut width = shapes.last().map_or(config.input_len, |(c, l)| c * l);
        let mut dense = Vec::new();
        for &out in config.dense.iter().chain(std::iter::once(&1)) {
            let weights = match rng.as_deref_mut() {
                Some(r) => xavier_init(out, width, r),
                None => Matrix::zeros(out, width),
            };
            dense.push(DenseLayer {
                weights,
                bias: vec![0.0; out],
            });
            width = out;
        }
        Ok(Self { config, conv, dense })
    }

    pub fn zeros(config: DiscriminatorConfig) -> Result<Self, DiscriminatorError> {
        Self::build(config, None)
    }

    pub fn init(config: DiscriminatorConfig, rng: &mut Rng) -> Result<Self, DiscriminatorError> {
        Self::build(config, Some(rng))
    }

    pub fn input_len(&self) -> usize {
        self.config.input_len
    }
}

impl ParamSet for DiscriminatorParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in &self.conv {
            out.push(&c.kernels);
            out.push(&c.bias);
        }
        for d in &self.dense {
            out.push(d.weights.as_slice());
            out.push(&d.bias);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.kernels);
            out.push(&mut c.bias);
        }
        for d in &mut self.dense {
            out.push(d.weights.as_mut_slice());
            out.push(&mut d.bias);
        }
        out
    }
}

impl NamedParams for DiscriminatorParams {
    type Config = DiscriminatorConfig;
    const KIND: &'static str = "cnn_discriminator";

    fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, c) in self.conv.iter().enumerate() {
            out.push((format!("conv{i}.kernels"), vec![c.out_channels, c.in_channels, c.width]));
            out.push((format!("conv{i}.bias"), vec![c.out_channels]));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("dense{i}.weights"), vec![d.weights.rows(), d.weights.cols()]));
            out.push((format!("dense{i}.bias"), vec![d.bias.len()]));
        }
        out
    }

    fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    fn zeros_for(config: &DiscriminatorConfig) -> Result<Self, String> {
        Self::zeros(config.clone()).map_err(|e| e.to_string())
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorCache {
    /// Input to each conv layer and to the flatten (post-ReLU), channel-major.
    conv_inputs: Vec<Vec<f64>>,
    conv_lens: Vec<usize>,
    /// Input to each dense layer (post-ReLU for hidden ones).
    dense_inputs: Vec<Vec<f64>>,
    pub logit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Judgement {
    pub logit: f64,
    pub probability: f64,
}

pub fn discriminator_forward(
    params: &DiscriminatorParams,
    seq: &[f64],
) -> Result<(Judgement, DiscriminatorCache), DiscriminatorError> {
    if seq.len() != params.config.input_len {
        return Err(DiscriminatorError::ShapeMismatch(format!(
            "discriminator expects a length-{} sequence, got {}",
            params.config.input_len,
            seq.len()
        )));
    }
    let mut conv_inputs = vec![seq.to_vec()];
    let mut conv_lens = vec![seq.len()];
    for layer in &params.conv {
        let in_len = *conv_lens.last().unwrap();
        let mut z = layer.forward(conv_inputs.last().unwrap(), in_len);
        z.iter_mut().for_each(|v| *v = relu(*v));
        conv_lens.push(z.len() / layer.out_channels);
        conv_inputs.push(z);
    }
    let mut dense_inputs = vec![conv_inputs.last().unwrap().clone()];
    let last = params.dense.len() - 1;
    let mut logit = 0.0;
    for (i, layer) in params.dense.iter().enumerate() {
        let mut z = layer.bias.clone();
        layer.weights.matvec_acc(dense_inputs.last().unwrap(), &mut z);
        if i == last {
            logit = z[0];
        } else {
            z.iter_mut().for_each(|v| *v = relu(*v));
            dense_inputs.push(z);
        }
    }
    let judgement = Judgement {
        logit,
        probability: sigmoid(logit),
    };
    Ok((
        judgement,
        DiscriminatorCache {
            conv_inputs,
            conv_lens,
            dense_inputs,
            logit,
        },
    ))
}

/// Gradients of `d_logit · logit` w.r.t. every parameter and every input
/// element.
pub fn discriminator_backward(
    params: &DiscriminatorParams,
    cache: &DiscriminatorCache,
    d_logit: f64,
) -> Result<(DiscriminatorParams, Vec<f64>), DiscriminatorError> {
    if cache.conv_inputs.len() != params.conv.len() + 1 || cache.dense_inputs.len() != params.dense.len() {
        return Err(DiscriminatorError::StaleCache(format!(
            "cache has {} conv / {} dense activations for {} conv / {} dense layers",
            cache.conv_inputs.len() - 1,
            cache.dense_inputs.len(),
            params.conv.len(),
            params.dense.len()
        )));
    }
    for (layer, input) in params.dense.iter().zip(&cache.dense_inputs) {
        if layer.weights.cols() != input.len() {
            return Err(DiscriminatorError::StaleCache("dense activation width changed".into()));
        }
    }
    let mut grads = params.zeroed();
    let mut d = vec![d_logit];
    for (i, layer) in params.dense.iter().enumerate().rev() {
        let input = &cache.dense_inputs[i];
        grads.dense[i].weights.outer_acc(&d, input);
        grads.dense[i].bias.iter_mut().zip(&d).for_each(|(b, g)| *b += g);
        let mut d_in = vec![0.0; input.len()];
        layer.weights.matvec_t_acc(&d, &mut d_in);
        if i > 0 {
            // Hidden dense inputs are ReLU outputs.
            for (g, x) in d_in.iter_mut().zip(input) {
                if *x <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        d = d_in;
    }
    for (i, layer) in params.conv.iter().enumerate().rev() {
        let output = &cache.conv_inputs[i + 1];
        for (g, a) in d.iter_mut().zip(output) {
            if *a <= 0.0 {
                *g = 0.0;
            }
        }
        d = layer.backward(&cache.conv_inputs[i], cache.conv_lens[i], &d, &mut grads.conv[i]);
    }
    Ok((grads, d))
}
