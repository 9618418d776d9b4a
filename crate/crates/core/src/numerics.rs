//! Dense linear algebra, activations, seeded initialization and gradient checking.
//!
//! Everything is `f64`. Models here are small enough that the extra precision
//! costs nothing and central-difference gradient checks need it.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value {value} at probe index {index}")]
    NonFinite { index: usize, value: f64 },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::ShapeMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(NumericsError::NonFinite { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumericsError::ShapeMismatch("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · v`
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), v);
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::ShapeMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(v, &mut out);
        Ok(out)
    }

    /// `out += selfᵀ · v`
    pub fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += w * vr;
            }
        }
    }

    /// `self += a ⊗ b` (outer product accumulate).
    pub fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (x, &bc) in row.iter_mut().zip(b) {
                *x += ar * bc;
            }
        }
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::ShapeMismatch(format!(
            "{}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic sigmoid, evaluated on the branch that never overflows `exp`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Seeded deterministic generator.
///
/// Backed by ChaCha8 (`rand_chacha`), whose output stream is specified
/// independently of platform and word size, so a seed reproduces the same
/// weights everywhere.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Independent child stream, derived deterministically from this one.
    pub fn fork(&mut self) -> Rng {
        Rng::new(self.inner.random::<u64>())
    }
}

/// Glorot/Xavier uniform initialization.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = xavier_bound(rows, cols);
    let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
    Matrix { rows, cols, data }
}

pub fn xavier_bound(fan_out: usize, fan_in: usize) -> f64 {
    (6.0 / (fan_out + fan_in) as f64).sqrt()
}

pub const DEFAULT_GRAD_EPS: f64 = 1e-5;

/// Maximum relative disagreement between an analytic gradient and central
/// differences of `f` around `params`.
///
/// Per coordinate the error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn gradient_check<F>(f: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64, NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(NumericsError::ShapeMismatch(format!(
            "{} params but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let numeric = numerical_gradient(&f, params, eps)?;
    Ok(max_relative_error(analytic, &numeric))
}

pub fn numerical_gradient<F>(f: F, params: &[f64], eps: f64) -> Result<Vec<f64>, NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        for v in [plus, minus] {
            if !v.is_finite() {
                return Err(NumericsError::NonFinite { index: i, value: v });
            }
        }
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// A set of learnable tensors that can be viewed as one flat vector.
///
/// Gradients use the same type as the parameters they belong to, so the
/// default methods cover SGD updates, clipping and flattening for every model.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<(), NumericsError> {
        if flat.len() != self.num_params() {
            return Err(NumericsError::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// `self += k · other`; shapes must match.
    fn add_scaled(&mut self, k: f64, other: &Self) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(dst.len(), src.len());
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += k * s);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn matmul_hand_example() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0], &[6.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_identity() {
        let m = Matrix::from_rows(&[&[0.3, -1.5], &[2.0, 7.25]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        assert!(matches!(matmul(&a, &b), Err(NumericsError::ShapeMismatch(_))));
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(matches!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(NumericsError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn activation_origins() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(relu(0.0), 0.0);
        assert!((sigmoid(10.0) - 0.999_954_602_131_297_6).abs() < 1e-12);
    }

    #[test]
    fn activations_stay_in_codomain_at_extremes() {
        for x in [-700.0, -50.0, -1.0, 0.0, 1.0, 50.0, 700.0] {
            let s = sigmoid(x);
            assert!((0.0..=1.0).contains(&s) && s.is_finite());
            let t = tanh(x);
            assert!((-1.0..=1.0).contains(&t));
            assert!(relu(x) >= 0.0);
        }
        assert!(sigmoid(-700.0) > 0.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for x in [-20.0, -3.0, 0.0, 2.5, 30.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn xavier_is_deterministic_and_bounded() {
        let a = xavier_init(10, 100, &mut Rng::new(7));
        let b = xavier_init(10, 100, &mut Rng::new(7));
        assert_eq!(a, b);
        let bound = xavier_bound(10, 100);
        assert!(a.as_slice().iter().all(|v| v.abs() <= bound));
        let c = xavier_init(10, 100, &mut Rng::new(8));
        assert_ne!(a, c);
    }

    #[test]
    fn xavier_mean_near_zero() {
        let m = xavier_init(100, 100, &mut Rng::new(123));
        let mean = m.as_slice().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn gradient_check_quadratic() {
        let p = vec![0.5, -1.25, 3.0];
        let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let err = gradient_check(|x| x.iter().map(|v| v * v).sum(), &p, &g, DEFAULT_GRAD_EPS).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn gradient_check_flags_doubled_gradient() {
        let p = vec![0.5, -1.25, 3.0];
        let g: Vec<f64> = p.iter().map(|v| 4.0 * v).collect();
        let err = gradient_check(|x| x.iter().map(|v| v * v).sum(), &p, &g, DEFAULT_GRAD_EPS).unwrap();
        assert!((err - 1.0 / 3.0).abs() < 1e-6, "{err}");
    }

    #[test]
    fn gradient_check_reports_non_finite() {
        let err = gradient_check(|x| x[0] / 0.0, &[1.0], &[0.0], 1e-5);
        assert!(matches!(err, Err(NumericsError::NonFinite { .. })));
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -700.0f64..700.0) {
            prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }

        #[test]
        fn matmul_associative(seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let a = xavier_init(3, 4, &mut rng);
            let b = xavier_init(4, 2, &mut rng);
            let c = xavier_init(2, 5, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()));
            }
        }
    }
}
