//! Scalar loss kernels, accumulated in `f64` in element order.

use crate::autodiff::BCE_EPS;
use crate::tensor::Scalar;

/// Mean of `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce<T: Scalar>(pred: &[T], target: &[T]) -> f64 {
    let lo = T::from_f64(BCE_EPS).as_f64();
    let hi = (T::one() - T::from_f64(BCE_EPS)).as_f64();
    let total = pred.iter().zip(target).fold(0.0, |acc, (&p, &y)| {
        let p = p.as_f64().clamp(lo, hi);
        let y = y.as_f64();
        acc - (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
    });
    total / pred.len() as f64
}

pub fn mse<T: Scalar>(pred: &[T], target: &[T]) -> f64 {
    let total = pred.iter().zip(target).fold(0.0, |acc, (&p, &y)| {
        let d = p.as_f64() - y.as_f64();
        acc + d * d
    });
    total / pred.len() as f64
}

/// Fraction of pixels where `pred >= 0.5` agrees with the binary target.
pub fn pixel_accuracy<T: Scalar>(pred: &[T], target: &[T]) -> f64 {
    let half = T::from_f64(0.5);
    let hits = pred
        .iter()
        .zip(target)
        .filter(|(&p, &y)| (p >= half) == (y >= half))
        .count();
    hits as f64 / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point_is_ln2() {
        let p = [0.5f64; 6];
        let y = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        assert!((bce(&p, &y) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let y = [1.0f64, 0.0, 1.0];
        let l = bce(&y, &y);
        assert!(l > 0.0 && l < 2e-7, "{l}");
        assert!((l - -(1.0f64 - 1e-7).ln()).abs() < 1e-15);
    }

    #[test]
    fn mse_cases() {
        let y = [0.0f32, 1.0, 0.25];
        assert_eq!(mse(&y, &y), 0.0);
        let p: Vec<f32> = y.iter().map(|v| v + 0.5).collect();
        assert!((mse(&p, &y) - 0.25).abs() < 1e-12);
    }
}
