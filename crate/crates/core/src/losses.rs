//! Training objectives: the baseline squared error, sigmoid cross-entropy,
//! and the composite adversarial / forecast / direction generator loss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{sigmoid, softplus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("loss needs at least one element")]
    Empty,
    #[error("target {0} is not 0 or 1")]
    TargetOutOfRange(f64),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), LossError> {
    if a.len() != b.len() {
        return Err(LossError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PNorm {
    #[serde(rename = "1")]
    L1,
    #[default]
    #[serde(rename = "2")]
    L2,
}

impl TryFrom<u32> for PNorm {
    type Error = LossError;

    fn try_from(p: u32) -> Result<Self, Self::Error> {
        match p {
            1 => Ok(PNorm::L1),
            2 => Ok(PNorm::L2),
            other => Err(LossError::InvalidWeights(format!("p must be 1 or 2, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_adv: f64,
    pub lambda_p: f64,
    pub lambda_dpl: f64,
    pub p: PNorm,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_adv: 1.0,
            lambda_p: 1.0,
            lambda_dpl: 1.0,
            p: PNorm::L2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let ls = [self.lambda_adv, self.lambda_p, self.lambda_dpl];
        if ls.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(LossError::InvalidWeights(format!(
                "weights must be finite and >= 0, got {ls:?}"
            )));
        }
        if ls.iter().all(|&l| l == 0.0) {
            return Err(LossError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_adv: self.lambda_adv * k,
            lambda_p: self.lambda_p * k,
            lambda_dpl: self.lambda_dpl * k,
            p: self.p,
        }
    }
}

/// Actual vs predicted prices over a span, with the last known price before
/// the predicted step.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPair {
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub last_known: f64,
}

impl PredictionPair {
    /// A single predicted step.
    pub fn step(last_known: f64, actual: f64, predicted: f64) -> Self {
        Self {
            actual: vec![actual],
            predicted: vec![predicted],
            last_known,
        }
    }
}

/// Mean squared error `(1/m) Σ (predicted − actual)²`.
pub fn baseline_loss(predicted: &[f64], actual: &[f64]) -> Result<f64, LossError> {
    same_len(predicted, actual)?;
    if predicted.is_empty() {
        return Err(LossError::Empty);
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok(sse / predicted.len() as f64)
}

/// d(baseline_loss)/d(predicted).
pub fn baseline_loss_grad(predicted: &[f64], actual: &[f64]) -> Result<Vec<f64>, LossError> {
    same_len(predicted, actual)?;
    let m = predicted.len() as f64;
    Ok(predicted.iter().zip(actual).map(|(p, a)| 2.0 * (p - a) / m).collect())
}

/// Sigmoid cross-entropy summed over elements.
///
/// Uses `−[b log σ(a) + (1−b) log(1−σ(a))] = softplus(a) − b·a`.
pub fn l_sce(logits: &[f64], targets: &[f64]) -> Result<f64, LossError> {
    same_len(logits, targets)?;
    let mut total = 0.0;
    for (&a, &b) in logits.iter().zip(targets) {
        if b != 0.0 && b != 1.0 {
            return Err(LossError::TargetOutOfRange(b));
        }
        total += softplus(a) - b * a;
    }
    Ok(total)
}

/// Generator's adversarial term: cross-entropy of D's logit against "real".
pub fn l_adv_g(d_logit_on_fake: f64) -> f64 {
    softplus(-d_logit_on_fake)
}

/// d(l_adv_g)/d(logit).
pub fn l_adv_g_grad(d_logit_on_fake: f64) -> f64 {
    sigmoid(d_logit_on_fake) - 1.0
}

/// `‖actual − predicted‖_p`.
pub fn l_p(actual: &[f64], predicted: &[f64], p: PNorm) -> Result<f64, LossError> {
    same_len(actual, predicted)?;
    let diffs = actual.iter().zip(predicted).map(|(a, b)| a - b);
    Ok(match p {
        PNorm::L1 => diffs.map(f64::abs).sum(),
        PNorm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
    })
}

/// d(l_p)/d(predicted). At a zero difference the subgradient 0 is used.
pub fn l_p_grad(actual: &[f64], predicted: &[f64], p: PNorm) -> Result<Vec<f64>, LossError> {
    same_len(actual, predicted)?;
    Ok(match p {
        PNorm::L1 => actual.iter().zip(predicted).map(|(a, b)| sign(b - a)).collect(),
        PNorm::L2 => {
            let norm = l_p(actual, predicted, p)?;
            if norm == 0.0 {
                vec![0.0; actual.len()]
            } else {
                actual.iter().zip(predicted).map(|(a, b)| (b - a) / norm).collect()
            }
        }
    })
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Direction penalty `|sign(Y'_{T+1} − Y_T) − sign(Y_{T+1} − Y_T)|` ∈ {0, 1, 2}.
pub fn l_dpl(last_known: f64, actual_next: f64, predicted_next: f64) -> f64 {
    (sign(predicted_next - last_known) - sign(actual_next - last_known)).abs()
}

/// Unweighted terms of the generator objective and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adversarial: f64,
    pub forecast: f64,
    pub direction: f64,
}

impl GeneratorLoss {
    pub fn accumulate(&mut self, other: &GeneratorLoss) {
        self.total += other.total;
        self.adversarial += other.adversarial;
        self.forecast += other.forecast;
        self.direction += other.direction;
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            total: self.total * k,
            adversarial: self.adversarial * k,
            forecast: self.forecast * k,
            direction: self.direction * k,
        }
    }
}

/// `λ_adv·L_adv + λ_p·L_p + λ_dpl·L_dpl`; the direction term compares the last
/// elements of the pair against `last_known`.
pub fn generator_loss(
    pair: &PredictionPair,
    d_logit_on_fake: f64,
    w: &LossWeights,
) -> Result<GeneratorLoss, LossError> {
    w.validate()?;
    same_len(&pair.actual, &pair.predicted)?;
    let (Some(&actual_next), Some(&predicted_next)) = (pair.actual.last(), pair.predicted.last()) else {
        return Err(LossError::Empty);
    };
    let adversarial = l_adv_g(d_logit_on_fake);
    let forecast = l_p(&pair.actual, &pair.predicted, w.p)?;
    let direction = l_dpl(pair.last_known, actual_next, predicted_next);
    Ok(GeneratorLoss {
        total: w.lambda_adv * adversarial + w.lambda_p * forecast + w.lambda_dpl * direction,
        adversarial,
        forecast,
        direction,
    })
}

/// Standard GAN discriminator objective: real labelled 1, fake labelled 0.
pub fn discriminator_loss(d_logit_real: f64, d_logit_fake: f64) -> f64 {
    softplus(-d_logit_real) + softplus(d_logit_fake)
}

/// `(d/d real, d/d fake)` of [`discriminator_loss`].
pub fn discriminator_loss_grad(d_logit_real: f64, d_logit_fake: f64) -> (f64, f64) {
    (sigmoid(d_logit_real) - 1.0, sigmoid(d_logit_fake))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(baseline_loss(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert_eq!(baseline_loss(&[4.0], &[1.0]).unwrap(), 9.0);
        assert!(matches!(
            baseline_loss(&[1.0], &[1.0, 2.0]),
            Err(LossError::LengthMismatch { .. })
        ));
        assert_eq!(baseline_loss(&[], &[]), Err(LossError::Empty));
    }

    #[test]
    fn sce_examples() {
        assert!((l_sce(&[0.0], &[1.0]).unwrap() - LN2).abs() < 1e-12);
        assert!((l_sce(&[0.0], &[0.0]).unwrap() - LN2).abs() < 1e-12);
        assert!((l_sce(&[10.0], &[1.0]).unwrap() - 4.539889921686e-5).abs() < 1e-15);
        assert_eq!(l_sce(&[0.0], &[0.5]), Err(LossError::TargetOutOfRange(0.5)));
        assert!(l_sce(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn adversarial_examples() {
        assert!((l_adv_g(0.0) - LN2).abs() < 1e-12);
        assert!((l_adv_g(20.0) - 2.061153620314381e-9).abs() < 1e-20);
        assert!(l_adv_g(-1.0) > l_adv_g(0.0) && l_adv_g(0.0) > l_adv_g(1.0));
    }

    #[test]
    fn p_norm_examples() {
        assert_eq!(l_p(&[1.0, 2.0], &[1.0, 2.0], PNorm::L2).unwrap(), 0.0);
        assert_eq!(l_p(&[3.0, 4.0], &[0.0, 0.0], PNorm::L2).unwrap(), 5.0);
        assert_eq!(l_p(&[1.0, -2.0], &[0.0, 0.0], PNorm::L1).unwrap(), 3.0);
    }

    #[test]
    fn direction_examples() {
        assert_eq!(l_dpl(10.0, 12.0, 11.0), 0.0);
        assert_eq!(l_dpl(10.0, 12.0, 9.0), 2.0);
        assert_eq!(l_dpl(10.0, 12.0, 10.0), 1.0);
    }

    #[test]
    fn composite_examples() {
        let w = LossWeights {
            lambda_adv: 0.0,
            lambda_p: 1.0,
            lambda_dpl: 0.0,
            p: PNorm::L2,
        };
        let same = PredictionPair {
            actual: vec![1.0, 2.0],
            predicted: vec![1.0, 2.0],
            last_known: 0.5,
        };
        assert_eq!(generator_loss(&same, 3.0, &w).unwrap().total, 0.0);

        // Differences [3, 4]; both last elements rise from 10.
        let pair = PredictionPair {
            actual: vec![13.0, 15.0],
            predicted: vec![10.0, 11.0],
            last_known: 10.0,
        };
        let l = generator_loss(&pair, 0.0, &LossWeights::default()).unwrap();
        assert_eq!((l.forecast, l.direction), (5.0, 0.0));
        assert!((l.total - (LN2 + 5.0)).abs() < 1e-12);
        assert!((l.total - 5.693147).abs() < 1e-6);
    }

    #[test]
    fn composite_is_linear_in_weights() {
        let pair = PredictionPair::step(1.0, 1.5, 0.7);
        let base = LossWeights {
            lambda_adv: 0.3,
            lambda_p: 1.7,
            lambda_dpl: 0.4,
            p: PNorm::L1,
        };
        let l1 = generator_loss(&pair, -0.8, &base).unwrap().total;
        for k in [2.0, 0.5, 3.25] {
            let lk = generator_loss(&pair, -0.8, &base.scaled(k)).unwrap().total;
            assert!((lk - k * l1).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::default().validate().is_ok());
        let zero = LossWeights {
            lambda_adv: 0.0,
            lambda_p: 0.0,
            lambda_dpl: 0.0,
            p: PNorm::L2,
        };
        assert!(zero.validate().is_err());
        assert!(LossWeights {
            lambda_p: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PNorm::try_from(3).is_err());
    }

    #[test]
    fn discriminator_examples() {
        assert!((discriminator_loss(0.0, 0.0) - 2.0 * LN2).abs() < 1e-12);
        assert!((discriminator_loss(20.0, -20.0) - 2.0 * (-20.0f64).exp().ln_1p()).abs() < 1e-18);
        assert!((discriminator_loss(-20.0, 20.0) - 40.0).abs() < 1e-8);
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for x in [-3.0, -0.2, 0.0, 1.5] {
            let num = (l_adv_g(x + h) - l_adv_g(x - h)) / (2.0 * h);
            assert!((num - l_adv_g_grad(x)).abs() < 1e-8);
            let (gr, gf) = discriminator_loss_grad(x, 0.4 - x);
            let nr = (discriminator_loss(x + h, 0.4 - x) - discriminator_loss(x - h, 0.4 - x)) / (2.0 * h);
            let nf = (discriminator_loss(x, 0.4 - x + h) - discriminator_loss(x, 0.4 - x - h)) / (2.0 * h);
            assert!((gr - nr).abs() < 1e-8 && (gf - nf).abs() < 1e-8);
        }
        let a = [0.3, -1.2, 2.0];
        let p = [0.1, 0.4, 1.1];
        for norm in [PNorm::L1, PNorm::L2] {
            let g = l_p_grad(&a, &p, norm).unwrap();
            for i in 0..3 {
                let mut up = p;
                let mut dn = p;
                up[i] += h;
                dn[i] -= h;
                let num = (l_p(&a, &up, norm).unwrap() - l_p(&a, &dn, norm).unwrap()) / (2.0 * h);
                assert!((num - g[i]).abs() < 1e-7);
            }
        }
    }

    proptest! {
        #[test]
        fn stable_sce_matches_naive(a in -15.0f64..15.0, label in 0u8..2) {
            let b = label as f64;
            let s = 1.0 / (1.0 + (-a).exp());
            let naive = -(b * s.ln() + (1.0 - b) * (1.0 - s).ln());
            prop_assume!(naive.is_finite());
            let stable = l_sce(&[a], &[b]).unwrap();
            prop_assert!((stable - naive).abs() < 1e-9, "{} vs {}", stable, naive);
            prop_assert!(stable >= 0.0);
        }

        #[test]
        fn losses_non_negative(y in -5.0f64..5.0, yp in -5.0f64..5.0, yt in -5.0f64..5.0, logit in -40.0f64..40.0) {
            let l = generator_loss(&PredictionPair::step(yt, y, yp), logit, &LossWeights::default()).unwrap();
            prop_assert!(l.total >= 0.0 && l.adversarial >= 0.0 && l.forecast >= 0.0);
            prop_assert!([0.0, 1.0, 2.0].contains(&l.direction));
            prop_assert!(discriminator_loss(logit, -logit) >= 0.0);
        }
    }
}
