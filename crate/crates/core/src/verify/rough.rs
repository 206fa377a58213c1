use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Which two-sided inequality a rough map must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "factor", rename_all = "snake_case")]
pub enum RoughMode<T> {
    /// `d/a - k <= d' <= a d + k`, with `a >= 1`.
    QuasiIsometry(T),
    /// `a d - k <= d' <= a d + k`.
    Similarity(T),
}

impl<T: Scalar> RoughMode<T> {
    /// Additive constant needed by one pair `(d, d')`; may be negative.
    #[inline]
    pub fn deviation(&self, d: T, image: T) -> T {
        match *self {
            RoughMode::QuasiIsometry(a) => (d / a - image).max(image - a * d),
            RoughMode::Similarity(a) => (image - a * d).abs(),
        }
    }

    pub fn factor(&self) -> T {
        match *self {
            RoughMode::QuasiIsometry(a) | RoughMode::Similarity(a) => a,
        }
    }
}

/// Smallest `k >= 0` satisfying `mode` on every `(distance, image distance)` pair.
pub fn fit_rough_map<T: Scalar>(pairs: &[(T, T)], mode: RoughMode<T>) -> T {
    pairs
        .iter()
        .map(|&(d, image)| mode.deviation(d, image))
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(
            fit_rough_map::<f64>(&[], RoughMode::QuasiIsometry(2.0)),
            0.0
        );
    }

    #[test]
    fn exact_similarity_is_zero() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.5 * i as f64)).collect();
        assert_eq!(fit_rough_map(&pairs, RoughMode::Similarity(0.5)), 0.0);
        assert_eq!(fit_rough_map(&pairs, RoughMode::QuasiIsometry(2.0)), 0.0);
    }

    #[test]
    fn outlier_sets_the_constant() {
        let mut pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.5 * i as f64)).collect();
        pairs.push((4.0, 3.25));
        assert_eq!(fit_rough_map(&pairs, RoughMode::Similarity(0.5)), 1.25);
        // 3.25 - 2 * 4 < 0 and 4 / 2 - 3.25 < 0: still inside the quasi-isometry cone.
        assert_eq!(fit_rough_map(&pairs, RoughMode::QuasiIsometry(2.0)), 0.0);
        pairs.push((1.0, 5.0));
        assert_eq!(fit_rough_map(&pairs, RoughMode::QuasiIsometry(2.0)), 3.0);
    }
}
