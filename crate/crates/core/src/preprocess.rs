//! Haar wavelet denoising and phase-space reconstruction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("signal of length {len} is too short (need at least {need})")]
    TooShort { len: usize, need: usize },
    #[error("approximation has {approx} coefficients but detail has {detail}")]
    LengthMismatch { approx: usize, detail: usize },
    #[error("invalid wavelet configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding dimension and delay must both be at least 1 (m={m}, tau={tau})")]
    InvalidEmbedding { m: usize, tau: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// `sigma * sqrt(2 ln n)`, sigma from the MAD of the finest detail level.
    Universal,
    Fixed(f64),
    None,
}

impl std::str::FromStr for ThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "universal" => Ok(ThresholdRule::Universal),
            "none" => Ok(ThresholdRule::None),
            other => other
                .strip_prefix("fixed:")
                .or(Some(other))
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| *v >= 0.0 && v.is_finite())
                .map(ThresholdRule::Fixed)
                .ok_or_else(|| format!("expected universal, none or fixed:<value>, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub levels: usize,
    pub threshold: ThresholdRule,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            levels: 1,
            threshold: ThresholdRule::Universal,
        }
    }
}

impl WaveletConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.levels == 0 {
            return Err(PreprocessError::InvalidConfig("levels must be >= 1".into()));
        }
        if let ThresholdRule::Fixed(v) = self.threshold {
            if v < 0.0 || !v.is_finite() {
                return Err(PreprocessError::InvalidConfig(format!(
                    "threshold {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// One level of an orthonormal Haar decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarLevel {
    pub approx: Vec<f64>,
    pub detail: Vec<f64>,
    /// The input had odd length and its last sample was repeated.
    pub padded: bool,
}

impl HaarLevel {
    /// Inverse transform with any padding stripped.
    pub fn reconstruct(&self) -> Result<Vec<f64>, PreprocessError> {
        let mut out = haar_idwt(&self.approx, &self.detail)?;
        if self.padded {
            out.pop();
        }
        Ok(out)
    }
}

pub fn haar_dwt(signal: &[f64]) -> Result<HaarLevel, PreprocessError> {
    if signal.len() < 2 {
        return Err(PreprocessError::TooShort {
            len: signal.len(),
            need: 2,
        });
    }
    let padded = signal.len() % 2 == 1;
    let last = signal[signal.len() - 1];
    let pairs = signal.len().div_ceil(2);
    let mut approx = Vec::with_capacity(pairs);
    let mut detail = Vec::with_capacity(pairs);
    for k in 0..pairs {
        let a = signal[2 * k];
        let b = signal.get(2 * k + 1).copied().unwrap_or(last);
        approx.push((a + b) * std::f64::consts::FRAC_1_SQRT_2);
        detail.push((a - b) * std::f64::consts::FRAC_1_SQRT_2);
    }
    Ok(HaarLevel { approx, detail, padded })
}

pub fn haar_idwt(approx: &[f64], detail: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    if approx.len() != detail.len() {
        return Err(PreprocessError::LengthMismatch {
            approx: approx.len(),
            detail: detail.len(),
        });
    }
    Ok(approx
        .iter()
        .zip(detail)
        .flat_map(|(a, d)| {
            [
                (a + d) * std::f64::consts::FRAC_1_SQRT_2,
                (a - d) * std::f64::consts::FRAC_1_SQRT_2,
            ]
        })
        .collect())
}

pub fn soft_threshold(d: f64, lambda: f64) -> f64 {
    d.signum() * (d.abs() - lambda).max(0.0)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Universal threshold for a signal of length `n` given its finest details.
pub fn universal_threshold(finest_detail: &[f64], n: usize) -> f64 {
    if finest_detail.is_empty() || n < 2 {
        return 0.0;
    }
    let mut abs: Vec<f64> = finest_detail.iter().map(|d| d.abs()).collect();
    let sigma = median(&mut abs) / 0.6745;
    sigma * (2.0 * (n as f64).ln()).sqrt()
}

/// Multi-level Haar decomposition.
pub fn decompose(signal: &[f64], levels: usize) -> Result<Vec<HaarLevel>, PreprocessError> {
    let need = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if signal.len() < need.max(2) {
        return Err(PreprocessError::TooShort {
            len: signal.len(),
            need: need.max(2),
        });
    }
    let mut out: Vec<HaarLevel> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let input = out.last().map_or(signal, |l| l.approx.as_slice());
        let level = haar_dwt(input)?;
        out.push(level);
    }
    Ok(out)
}

/// Rebuild a signal from the output of [`decompose`].
pub fn recompose(levels: &[HaarLevel]) -> Result<Vec<f64>, PreprocessError> {
    let mut approx = match levels.last() {
        Some(l) => l.approx.clone(),
        None => return Ok(Vec::new()),
    };
    for level in levels.iter().rev() {
        let mut rebuilt = haar_idwt(&approx, &level.detail)?;
        if level.padded {
            rebuilt.pop();
        }
        approx = rebuilt;
    }
    Ok(approx)
}

pub fn wavelet_denoise(signal: &[f64], cfg: &WaveletConfig) -> Result<Vec<f64>, PreprocessError> {
    cfg.validate()?;
    let mut levels = decompose(signal, cfg.levels)?;
    let lambda = match cfg.threshold {
        ThresholdRule::None => return recompose(&levels),
        ThresholdRule::Fixed(v) => v,
        ThresholdRule::Universal => universal_threshold(&levels[0].detail, signal.len()),
    };
    for level in &mut levels {
        for d in &mut level.detail {
            *d = soft_threshold(*d, lambda);
        }
    }
    recompose(&levels)
}

/// One delay-embedded training pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub window: Vec<f64>,
    pub target: f64,
    /// Index in the source signal of the window's first element.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedDataset {
    pub samples: Vec<Sample>,
    pub m: usize,
    pub tau: usize,
}

impl ReconstructedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Source index of sample `i`'s target.
    pub fn target_index(&self, i: usize) -> usize {
        self.samples[i].start + (self.m - 1) * self.tau + 1
    }
}

/// `max(0, n - (m - 1) * tau - 1)`.
pub fn expected_sample_count(n: usize, m: usize, tau: usize) -> usize {
    n.saturating_sub((m - 1) * tau + 1)
}

/// Sliding-window delay embedding.
///
/// Sample `t` has window `[x(t), x(t+tau), ..., x(t+(m-1)tau)]` and target
/// `x(t+(m-1)tau+1)`, the step right after the window's last element.
pub fn phase_space_reconstruct(signal: &[f64], m: usize, tau: usize) -> Result<ReconstructedDataset, PreprocessError> {
    if m == 0 || tau == 0 {
        return Err(PreprocessError::InvalidEmbedding { m, tau });
    }
    let span = (m - 1) * tau;
    let count = expected_sample_count(signal.len(), m, tau);
    let samples = (0..count)
        .map(|t| Sample {
            window: (0..m).map(|d| signal[t + d * tau]).collect(),
            target: signal[t + span + 1],
            start: t,
        })
        .collect();
    Ok(ReconstructedDataset { samples, m, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn dwt_constant_signal() {
        let l = haar_dwt(&[4.0; 4]).unwrap();
        assert!(close(&l.approx, &[5.656854249492381; 2], 1e-12));
        assert_eq!(l.detail, vec![0.0, 0.0]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn dwt_pair() {
        let l = haar_dwt(&[2.0, 4.0]).unwrap();
        assert!(close(&l.approx, &[6.0 / 2f64.sqrt()], 1e-12));
        assert!(close(&l.detail, &[-2.0 / 2f64.sqrt()], 1e-12));
        assert!((l.approx[0] - 4.24264).abs() < 1e-5);
        assert!((l.detail[0] + 1.41421).abs() < 1e-5);
    }

    #[test]
    fn dwt_too_short() {
        assert!(matches!(haar_dwt(&[1.0]), Err(PreprocessError::TooShort { .. })));
    }

    #[test]
    fn odd_length_is_padded_and_stripped() {
        let x = [1.0, 5.0, 2.0];
        let l = haar_dwt(&x).unwrap();
        assert!(l.padded);
        assert_eq!(l.approx.len(), 2);
        assert!(close(&l.reconstruct().unwrap(), &x, 1e-12));
    }

    #[test]
    fn idwt_examples() {
        let l = haar_dwt(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(
            &haar_idwt(&l.approx, &l.detail).unwrap(),
            &[1.0, 2.0, 3.0, 4.0],
            1e-12
        ));
        assert!(close(&haar_idwt(&[4.24264], &[0.0]).unwrap(), &[3.0, 3.0], 1e-5));
        assert_eq!(
            haar_idwt(&[1.0, 2.0], &[1.0]),
            Err(PreprocessError::LengthMismatch { approx: 2, detail: 1 })
        );
    }

    #[test]
    fn denoise_fixed_threshold_collapses_pair_to_mean() {
        let cfg = WaveletConfig {
            levels: 1,
            threshold: ThresholdRule::Fixed(2.0),
        };
        assert!(close(&wavelet_denoise(&[2.0, 4.0], &cfg).unwrap(), &[3.0, 3.0], 1e-12));
    }

    #[test]
    fn denoise_constant_signal_universal_unchanged() {
        let x = vec![7.5; 32];
        let cfg = WaveletConfig {
            levels: 3,
            threshold: ThresholdRule::Universal,
        };
        assert!(close(&wavelet_denoise(&x, &cfg).unwrap(), &x, 1e-9));
    }

    #[test]
    fn denoise_requires_enough_samples() {
        let cfg = WaveletConfig {
            levels: 3,
            threshold: ThresholdRule::None,
        };
        assert!(matches!(
            wavelet_denoise(&[1.0; 7], &cfg),
            Err(PreprocessError::TooShort { len: 7, need: 8 })
        ));
    }

    #[test]
    fn denoise_reduces_noise_on_step_signal() {
        // Alternating +-0.1 noise on a two-level step lives entirely in the
        // finest detail band.
        let clean: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { 2.0 }).collect();
        let noisy: Vec<f64> = clean
            .iter()
            .enumerate()
            .map(|(i, v)| v + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let cfg = WaveletConfig {
            levels: 1,
            threshold: ThresholdRule::Universal,
        };
        let out = wavelet_denoise(&noisy, &cfg).unwrap();
        let err = |s: &[f64]| s.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        assert!(err(&out) < err(&noisy));
    }

    #[test]
    fn threshold_rule_parsing() {
        assert_eq!("universal".parse(), Ok(ThresholdRule::Universal));
        assert_eq!("none".parse(), Ok(ThresholdRule::None));
        assert_eq!("fixed:0.5".parse(), Ok(ThresholdRule::Fixed(0.5)));
        assert!("fixed:-1".parse::<ThresholdRule>().is_err());
    }

    #[test]
    fn psr_examples() {
        let d = phase_space_reconstruct(&[1.0, 2.0, 3.0, 4.0, 5.0], 3, 1).unwrap();
        let pairs: Vec<_> = d.samples.iter().map(|s| (s.window.clone(), s.target)).collect();
        assert_eq!(pairs, vec![(vec![1.0, 2.0, 3.0], 4.0), (vec![2.0, 3.0, 4.0], 5.0)]);
        assert!(phase_space_reconstruct(&[1.0, 2.0, 3.0, 4.0, 5.0], 3, 2)
            .unwrap()
            .is_empty());
        let d = phase_space_reconstruct(&[7.0, 8.0, 9.0], 1, 1).unwrap();
        let pairs: Vec<_> = d.samples.iter().map(|s| (s.window.clone(), s.target)).collect();
        assert_eq!(pairs, vec![(vec![7.0], 8.0), (vec![8.0], 9.0)]);
        assert!(phase_space_reconstruct(&[1.0], 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn zero_threshold_is_identity(x in prop::collection::vec(-100.0f64..100.0, 8..200), levels in 1usize..4) {
            let full = x.len() - x.len() % (1 << levels);
            let x = &x[..full];
            let cfg = WaveletConfig { levels, threshold: ThresholdRule::Fixed(0.0) };
            let y = wavelet_denoise(x, &cfg).unwrap();
            prop_assert!(close(&y, x, 1e-9));
        }

        #[test]
        fn soft_threshold_contracts(x in prop::collection::vec(-10.0f64..10.0, 2..100), lambda in 0.0f64..5.0) {
            let l = haar_dwt(&x).unwrap();
            let before = l.detail.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let after = l.detail.iter().map(|&d| soft_threshold(d, lambda)).fold(0.0f64, |m, d| m.max(d.abs()));
            prop_assert!(after <= before);
        }

        #[test]
        fn psr_windows_never_look_ahead(n in 0usize..40, m in 1usize..7, tau in 1usize..5) {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let d = phase_space_reconstruct(&x, m, tau).unwrap();
            prop_assert_eq!(d.len(), expected_sample_count(n, m, tau));
            for (i, s) in d.samples.iter().enumerate() {
                let target = d.target_index(i);
                prop_assert!(s.window.iter().all(|&w| (w as usize) < target));
                prop_assert_eq!(s.target as usize, target);
            }
        }
    }
}
