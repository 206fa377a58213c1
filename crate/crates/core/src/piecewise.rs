//! Continuous, non-decreasing piecewise-linear maps of the real line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PiecewiseError {
    #[error("at least one breakpoint is required")]
    Empty,
    #[error("breakpoint abscissae must be finite and strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("breakpoint values must be finite and non-decreasing (index {index})")]
    Decreasing { index: usize },
    #[error("tail slopes must be finite and positive, got {left} and {right}")]
    TailSlope { left: f64, right: f64 },
}

/// Linear interpolation through `breakpoints`, extended by affine tails with
/// slopes `left_slope` and `right_slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearMap<T> {
    breakpoints: Vec<(T, T)>,
    left_slope: T,
    right_slope: T,
}

impl<T: Scalar> PiecewiseLinearMap<T> {
    pub fn new(
        breakpoints: Vec<(T, T)>,
        left_slope: T,
        right_slope: T,
    ) -> Result<Self, PiecewiseError> {
        if breakpoints.is_empty() {
            return Err(PiecewiseError::Empty);
        }
        for (i, &(t, v)) in breakpoints.iter().enumerate() {
            if !t.is_finite() || (i > 0 && t <= breakpoints[i - 1].0) {
                return Err(PiecewiseError::NotIncreasing { index: i });
            }
            if !v.is_finite() || (i > 0 && v < breakpoints[i - 1].1) {
                return Err(PiecewiseError::Decreasing { index: i });
            }
        }
        let ok = |s: T| s.is_finite() && s > T::zero();
        if !ok(left_slope) || !ok(right_slope) {
            return Err(PiecewiseError::TailSlope {
                left: left_slope.to_f64_lossy(),
                right: right_slope.to_f64_lossy(),
            });
        }
        Ok(PiecewiseLinearMap {
            breakpoints,
            left_slope,
            right_slope,
        })
    }

    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.breakpoints
    }

    pub fn left_slope(&self) -> T {
        self.left_slope
    }

    pub fn right_slope(&self) -> T {
        self.right_slope
    }

    /// Smallest and largest breakpoint abscissa.
    pub fn support(&self) -> (T, T) {
        (
            self.breakpoints[0].0,
            self.breakpoints[self.breakpoints.len() - 1].0,
        )
    }

    pub fn eval(&self, t: T) -> T {
        let bp = &self.breakpoints;
        let (t0, v0) = bp[0];
        if t <= t0 {
            return v0 + self.left_slope * (t - t0);
        }
        let (tn, vn) = bp[bp.len() - 1];
        if t >= tn {
            return vn + self.right_slope * (t - tn);
        }
        // First breakpoint strictly right of t; bp[i-1].0 <= t < bp[i].0.
        let i = bp.partition_point(|&(x, _)| x <= t);
        let (l1, v1) = bp[i - 1];
        let (l2, v2) = bp[i];
        if t == l1 {
            return v1;
        }
        v1 + (v2 - v1) / (l2 - l1) * (t - l1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_extends() {
        let p = PiecewiseLinearMap::new(vec![(0.0, 1.0), (4.0, 2.0)], 1.0, 1.0).unwrap();
        assert_eq!(p.eval(3.0), 1.75);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(4.0), 2.0);
        assert_eq!(p.eval(-2.0), -1.0);
        assert_eq!(p.eval(10.0), 8.0);
        assert_eq!(p.support(), (0.0, 4.0));
    }

    #[test]
    fn single_breakpoint_is_a_line() {
        let p = PiecewiseLinearMap::new(vec![(5.0, 3.0)], 1.0, 1.0).unwrap();
        assert_eq!(p.eval(7.0), 5.0);
        assert_eq!(p.eval(0.0), -2.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(
            PiecewiseLinearMap::<f64>::new(vec![], 1.0, 1.0),
            Err(PiecewiseError::Empty)
        );
        assert!(matches!(
            PiecewiseLinearMap::new(vec![(1.0, 0.0), (1.0, 1.0)], 1.0, 1.0),
            Err(PiecewiseError::NotIncreasing { index: 1 })
        ));
        assert!(matches!(
            PiecewiseLinearMap::new(vec![(0.0, 1.0), (1.0, 0.0)], 1.0, 1.0),
            Err(PiecewiseError::Decreasing { index: 1 })
        ));
        assert!(PiecewiseLinearMap::new(vec![(0.0, 1.0)], 0.0, 1.0).is_err());
    }
}
