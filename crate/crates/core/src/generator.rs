//! LSTM generator: reads a window one timestep at a time and projects the
//! final hidden state to a one-step-ahead prediction.
//!
//! Cell equations, per unit (⊙ is element-wise):
//!
//! ```text
//! f_t = σ(W_f x_t + R_f h_{t-1} + V_f ⊙ c_{t-1} + b_f)
//! i_t = σ(W_i x_t + R_i h_{t-1} + V_i ⊙ c_{t-1} + b_i)
//! ĉ_t = tanh(W_c x_t + R_c h_{t-1} + b_c)
//! c_t = i_t ⊙ ĉ_t + f_t ⊙ c_{t-1}
//! o_t = σ(W_o x_t + R_o h_{t-1} + V_o ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! The `V` peephole terms are dropped when `peephole` is off.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{sigmoid, xavier_bound, xavier_init, Matrix, ParamSet, Rng};
use crate::paramio::NamedParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match these parameters: {0}")]
    StaleCache(String),
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Timesteps per window.
    pub window: usize,
    /// Features per timestep.
    pub input_size: usize,
    pub hidden_size: usize,
    /// Stacked LSTM layers.
    pub layers: usize,
    pub peephole: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            window: 121,
            input_size: 1,
            hidden_size: 25,
            layers: 1,
            peephole: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        for (name, v) in [
            ("window", self.window),
            ("input_size", self.input_size),
            ("hidden_size", self.hidden_size),
            ("layers", self.layers),
        ] {
            if v == 0 {
                return Err(GeneratorError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            self.hidden_size
        }
    }
}

/// Weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub r_i: Matrix,
    pub r_f: Matrix,
    pub r_c: Matrix,
    pub r_o: Matrix,
    pub v_i: Vec<f64>,
    pub v_f: Vec<f64>,
    pub v_o: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let r = || Matrix::zeros(hidden, hidden);
        let v = || vec![0.0; hidden];
        Self {
            w_i: w(),
            w_f: w(),
            w_c: w(),
            w_o: w(),
            r_i: r(),
            r_f: r(),
            r_c: r(),
            r_o: r(),
            v_i: v(),
            v_f: v(),
            v_o: v(),
            b_i: v(),
            b_f: v(),
            b_c: v(),
            b_o: v(),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let peep = xavier_bound(hidden, 1) * 0.1;
        let mut vec = |lo: f64, hi: f64| (0..hidden).map(|_| rng.uniform(lo, hi)).collect::<Vec<_>>();
        let (v_i, v_f, v_o) = (vec(-peep, peep), vec(-peep, peep), vec(-peep, peep));
        Self {
            w_i: xavier_init(hidden, input, rng),
            w_f: xavier_init(hidden, input, rng),
            w_c: xavier_init(hidden, input, rng),
            w_o: xavier_init(hidden, input, rng),
            r_i: xavier_init(hidden, hidden, rng),
            r_f: xavier_init(hidden, hidden, rng),
            r_c: xavier_init(hidden, hidden, rng),
            r_o: xavier_init(hidden, hidden, rng),
            v_i,
            v_f,
            v_o,
            b_i: vec![0.0; hidden],
            // Forget gate starts open.
            b_f: vec![1.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_i.cols()
    }

    fn tensors(&self) -> [&[f64]; 15] {
        [
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            self.r_i.as_slice(),
            self.r_f.as_slice(),
            self.r_c.as_slice(),
            self.r_o.as_slice(),
            &self.v_i,
            &self.v_f,
            &self.v_o,
            &self.b_i,
            &self.b_f,
            &self.b_c,
            &self.b_o,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 15] {
        [
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.r_i.as_mut_slice(),
            self.r_f.as_mut_slice(),
            self.r_c.as_mut_slice(),
            self.r_o.as_mut_slice(),
            &mut self.v_i,
            &mut self.v_f,
            &mut self.v_o,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    fn specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        let (h, n) = (self.hidden_size(), self.input_size());
        let mat = |name: &str, cols: usize| (format!("{prefix}.{name}"), vec![h, cols]);
        let vec = |name: &str| (format!("{prefix}.{name}"), vec![h]);
        vec![
            mat("w_i", n),
            mat("w_f", n),
            mat("w_c", n),
            mat("w_o", n),
            mat("r_i", h),
            mat("r_f", h),
            mat("r_c", h),
            mat("r_o", h),
            vec("v_i"),
            vec("v_f"),
            vec("v_o"),
            vec("b_i"),
            vec("b_f"),
            vec("b_c"),
            vec("b_o"),
        ]
    }

    /// One timestep.
    pub fn cell_forward(
        &self,
        x: &[f64],
        prev: &LstmState,
        peephole: bool,
    ) -> Result<(LstmState, GateRecord), GeneratorError> {
        let h = self.hidden_size();
        if x.len() != self.input_size() || prev.h.len() != h || prev.c.len() != h {
            return Err(GeneratorError::ShapeMismatch(format!(
                "cell expects input {} and state {h}, got input {} and state ({}, {})",
                self.input_size(),
                x.len(),
                prev.h.len(),
                prev.c.len()
            )));
        }
        let pre = |w: &Matrix, r: &Matrix, b: &[f64]| {
            let mut z = b.to_vec();
            w.matvec_acc(x, &mut z);
            r.matvec_acc(&prev.h, &mut z);
            z
        };
        let mut zi = pre(&self.w_i, &self.r_i, &self.b_i);
        let mut zf = pre(&self.w_f, &self.r_f, &self.b_f);
        let zc = pre(&self.w_c, &self.r_c, &self.b_c);
        let mut zo = pre(&self.w_o, &self.r_o, &self.b_o);
        if peephole {
            for k in 0..h {
                zi[k] += self.v_i[k] * prev.c[k];
                zf[k] += self.v_f[k] * prev.c[k];
            }
        }
        let i: Vec<f64> = zi.iter().map(|&z| sigmoid(z)).collect();
        let f: Vec<f64> = zf.iter().map(|&z| sigmoid(z)).collect();
        let g: Vec<f64> = zc.iter().map(|z| z.tanh()).collect();
        let c: Vec<f64> = (0..h).map(|k| i[k] * g[k] + f[k] * prev.c[k]).collect();
        if peephole {
            for k in 0..h {
                zo[k] += self.v_o[k] * c[k];
            }
        }
        let o: Vec<f64> = zo.iter().map(|&z| sigmoid(z)).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_out: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        let state = LstmState { h: h_out, c: c.clone() };
        let record = GateRecord {
            x: x.to_vec(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            input_gate: i,
            forget_gate: f,
            candidate: g,
            output_gate: o,
            c,
            tanh_c,
        };
        Ok((state, record))
    }

    /// Backpropagate one timestep, accumulating into `grads`.
    ///
    /// `dh` is the total gradient reaching `h_t`, `dc_next` the gradient
    /// flowing into `c_t` from step `t + 1`. Returns `(dh_prev, dc_prev, dx)`.
    fn cell_backward(
        &self,
        rec: &GateRecord,
        dh: &[f64],
        dc_next: &[f64],
        peephole: bool,
        grads: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_size();
        let mut dzo = vec![0.0; h];
        let mut dzi = vec![0.0; h];
        let mut dzf = vec![0.0; h];
        let mut dzc = vec![0.0; h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let o = rec.output_gate[k];
            let tc = rec.tanh_c[k];
            dzo[k] = dh[k] * tc * o * (1.0 - o);
            let mut dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            if peephole {
                dc += dzo[k] * self.v_o[k];
            }
            let (i, f, g) = (rec.input_gate[k], rec.forget_gate[k], rec.candidate[k]);
            dzi[k] = dc * g * i * (1.0 - i);
            dzf[k] = dc * rec.c_prev[k] * f * (1.0 - f);
            dzc[k] = dc * i * (1.0 - g * g);
            dc_prev[k] = dc * f;
            if peephole {
                dc_prev[k] += dzi[k] * self.v_i[k] + dzf[k] * self.v_f[k];
                grads.v_i[k] += dzi[k] * rec.c_prev[k];
                grads.v_f[k] += dzf[k] * rec.c_prev[k];
                grads.v_o[k] += dzo[k] * rec.c[k];
            }
        }
        let mut dh_prev = vec![0.0; h];
        let mut dx = vec![0.0; self.input_size()];
        for (dz, w, r, gw, gr, gb) in [
            (
                &dzi,
                &self.w_i,
                &self.r_i,
                &mut grads.w_i,
                &mut grads.r_i,
                &mut grads.b_i,
            ),
            (
                &dzf,
                &self.w_f,
                &self.r_f,
                &mut grads.w_f,
                &mut grads.r_f,
                &mut grads.b_f,
            ),
            (
                &dzc,
                &self.w_c,
                &self.r_c,
                &mut grads.w_c,
                &mut grads.r_c,
                &mut grads.b_c,
            ),
            (
                &dzo,
                &self.w_o,
                &self.r_o,
                &mut grads.w_o,
                &mut grads.r_o,
                &mut grads.b_o,
            ),
        ] {
            gw.outer_acc(dz, &rec.x);
            gr.outer_acc(dz, &rec.h_prev);
            gb.iter_mut().zip(dz.iter()).for_each(|(b, d)| *b += d);
            w.matvec_t_acc(dz, &mut dx);
            r.matvec_t_acc(dz, &mut dh_prev);
        }
        (dh_prev, dc_prev, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one timestep needs for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl GateRecord {
    pub fn h(&self) -> Vec<f64> {
        self.output_gate.iter().zip(&self.tanh_c).map(|(o, t)| o * t).collect()
    }
}

/// Per layer, one [`GateRecord`] per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub layers: Vec<Vec<GateRecord>>,
    pub final_h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub config: GeneratorConfig,
    pub layers: Vec<LstmLayer>,
    /// Output projection, `1 × hidden`.
    pub w_y: Vec<f64>,
    pub b_y: f64,
}

impl GeneratorParams {
    pub fn zeros(config: GeneratorConfig) -> Result<Self, GeneratorError> {
        config.validate()?;
        Ok(Self {
            layers: (0..config.layers)
                .map(|l| LstmLayer::zeros(config.layer_input(l), config.hidden_size))
                .collect(),
            w_y: vec![0.0; config.hidden_size],
            b_y: 0.0,
            config,
        })
    }

    pub fn init(config: GeneratorConfig, rng: &mut Rng) -> Result<Self, GeneratorError> {
        config.validate()?;
        let layers = (0..config.layers)
            .map(|l| LstmLayer::init(config.layer_input(l), config.hidden_size, rng))
            .collect();
        let w_y = xavier_init(1, config.hidden_size, rng).as_slice().to_vec();
        Ok(Self {
            config,
            layers,
            w_y,
            b_y: 0.0,
        })
    }
}

impl ParamSet for GeneratorParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.tensors()).collect();
        out.push(&self.w_y);
        out.push(std::slice::from_ref(&self.b_y));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        out.push(&mut self.w_y);
        out.push(std::slice::from_mut(&mut self.b_y));
        out
    }
}

impl NamedParams for GeneratorParams {
    type Config = GeneratorConfig;
    const KIND: &'static str = "lstm_generator";

    fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<_> = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.specs(&format!("layer{i}")))
            .collect();
        out.push(("w_y".into(), vec![1, self.config.hidden_size]));
        out.push(("b_y".into(), vec![1]));
        out
    }

    fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    fn zeros_for(config: &GeneratorConfig) -> Result<Self, String> {
        Self::zeros(*config).map_err(|e| e.to_string())
    }
}

/// Single step of the first layer from `prev`.
pub fn lstm_cell_forward(
    params: &GeneratorParams,
    x_t: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, GateRecord), GeneratorError> {
    params.layers[0].cell_forward(x_t, prev, params.config.peephole)
}

/// Run a window (`window × input_size` values, timestep-major) through the
/// network from a zero state and return `W_y · h_m + b_y`.
pub fn generator_forward(params: &GeneratorParams, window: &[f64]) -> Result<(f64, ForwardCache), GeneratorError> {
    let cfg = &params.config;
    if window.len() != cfg.window * cfg.input_size {
        return Err(GeneratorError::ShapeMismatch(format!(
            "generator expects {} steps of {} features, got {} values",
            cfg.window,
            cfg.input_size,
            window.len()
        )));
    }
    let mut inputs: Vec<Vec<f64>> = window.chunks(cfg.input_size).map(|c| c.to_vec()).collect();
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let mut state = LstmState::zeros(cfg.hidden_size);
        let mut records = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in &inputs {
            let (next, rec) = layer.cell_forward(x, &state, cfg.peephole)?;
            outputs.push(next.h.clone());
            records.push(rec);
            state = next;
        }
        layers.push(records);
        inputs = outputs;
    }
    let final_h = inputs.pop().unwrap_or_default();
    let prediction = params.b_y + crate::numerics::dot(&params.w_y, &final_h);
    Ok((prediction, ForwardCache { layers, final_h }))
}

/// Gradients of `d_prediction · prediction` with respect to every parameter.
pub fn generator_backward(
    params: &GeneratorParams,
    cache: &ForwardCache,
    d_prediction: f64,
) -> Result<GeneratorParams, GeneratorError> {
    let cfg = &params.config;
    if cache.layers.len() != params.layers.len()
        || cache.final_h.len() != cfg.hidden_size
        || cache.layers.iter().any(|l| l.len() != cfg.window)
    {
        return Err(GeneratorError::StaleCache(format!(
            "cache has {} layers of {:?} steps, params expect {} layers of {} steps",
            cache.layers.len(),
            cache.layers.iter().map(|l| l.len()).collect::<Vec<_>>(),
            params.layers.len(),
            cfg.window
        )));
    }
    let mut grads = params.zeroed();
    grads.b_y = d_prediction;
    for (g, h) in grads.w_y.iter_mut().zip(&cache.final_h) {
        *g = d_prediction * h;
    }
    let steps = cfg.window;
    // Gradient arriving at each timestep's h from above (head or next layer).
    let mut dh_from_above = vec![vec![0.0; cfg.hidden_size]; steps];
    dh_from_above[steps - 1] = params.w_y.iter().map(|w| w * d_prediction).collect();

    for (l, layer) in params.layers.iter().enumerate().rev() {
        let records = &cache.layers[l];
        let mut dh_next = vec![0.0; cfg.hidden_size];
        let mut dc_next = vec![0.0; cfg.hidden_size];
        let mut dx_all = vec![Vec::new(); steps];
        for t in (0..steps).rev() {
            let dh: Vec<f64> = dh_from_above[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dh_prev, dc_prev, dx) =
                layer.cell_backward(&records[t], &dh, &dc_next, cfg.peephole, &mut grads.layers[l]);
            dh_next = dh_prev;
            dc_next = dc_prev;
            dx_all[t] = dx;
        }
        dh_from_above = dx_all;
    }
    Ok(grads)
}
