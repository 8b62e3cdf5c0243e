//! Floating-point scalar abstraction shared by every numeric kernel.

use std::cell::RefCell;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftPlanner;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// In-place forward DFT, `X[f] = sum_n x[n] exp(-j 2 pi f n / N)`.
    fn fft_forward(buf: &mut [Complex<Self>]);

    /// Converts from `f64`, panicking only on values that cannot be represented at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

thread_local! {
    static PLANNER_F32: RefCell<FftPlanner<f32>> = RefCell::new(FftPlanner::new());
    static PLANNER_F64: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

impl Scalar for f32 {
    fn fft_forward(buf: &mut [Complex<f32>]) {
        PLANNER_F32.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
    }
}

impl Scalar for f64 {
    fn fft_forward(buf: &mut [Complex<f64>]) {
        PLANNER_F64.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
    }
}

/// Numerically stable softmax (max-subtracted), written into `out`.
pub fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Index of the largest element; the first one wins on ties.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0f64, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] >= 0.0 && p[1] < 1e-300_f64.max(f64::MIN_POSITIVE));
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&[2.0f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn fft_matches_direct_dft_f32_and_f64() {
        let n = 16;
        let x: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new((i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut fast = x.clone();
        f64::fft_forward(&mut fast);
        for f in 0..n {
            let direct: Complex<f64> = (0..n)
                .map(|t| x[t] * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (f * t) as f64 / n as f64))
                .sum();
            assert!((direct - fast[f]).norm() < 1e-10);
        }
        let mut fast32: Vec<Complex<f32>> = x.iter().map(|c| Complex::new(c.re as f32, c.im as f32)).collect();
        f32::fft_forward(&mut fast32);
        for f in 0..n {
            assert!((fast32[f].re as f64 - fast[f].re).abs() < 1e-4);
        }
    }
}
