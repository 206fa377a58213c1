//! The infinite hyperbolic cone `Z x (0, inf)` over a finite base space.
//!
//! Two metrics are provided: the cone metric [`rho_h`] used throughout the
//! crate, and the hyperboloid-style comparison metric [`d_h`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{validate_metric, FiniteMetricSpace, MetricError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("cone heights must be finite and positive, got {height}")]
    NonPositiveHeight { height: f64 },
    #[error("height exponent range {lo}..={hi} is empty")]
    EmptyRange { lo: i32, hi: i32 },
    #[error("capping at the diameter {diameter} removed every height of 2^{lo}..=2^{hi}")]
    EmptySample { lo: i32, hi: i32, diameter: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A point `(x, t)` of the cone: base index and positive height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint<T> {
    pub base: usize,
    pub height: T,
}

impl<T: Scalar> ConePoint<T> {
    pub fn new(base: usize, height: T) -> Result<Self, ConeError> {
        if height.is_finite() && height > T::zero() {
            Ok(ConePoint { base, height })
        } else {
            Err(ConeError::NonPositiveHeight {
                height: height.to_f64_lossy(),
            })
        }
    }
}

/// `2 log((d(x,y) + max(s,t)) / sqrt(s t))`.
pub fn rho_h<T: Scalar>(space: &FiniteMetricSpace<T>, p: ConePoint<T>, q: ConePoint<T>) -> T {
    rho_from_parts(space.d(p.base, q.base), p.height, q.height)
}

/// The cone metric given the base distance and both heights.
///
/// Split as `2 ln(1 + d/hi) + ln(hi/lo)`, which is exactly zero on the
/// diagonal and reduces to `|ln(s/t)|` on a ray.
#[inline]
pub fn rho_from_parts<T: Scalar>(d: T, s: T, t: T) -> T {
    let (hi, lo) = if s >= t { (s, t) } else { (t, s) };
    T::lit(2.0) * (d / hi).ln_1p() + (hi / lo).ln()
}

/// `arccosh(1 + (d(x,y)^2 + (s-t)^2) / (2 s t))`, evaluated as
/// `ln1p(u + sqrt(u (u + 2)))` to stay accurate near the diagonal.
pub fn d_h<T: Scalar>(space: &FiniteMetricSpace<T>, p: ConePoint<T>, q: ConePoint<T>) -> T {
    let d = space.d(p.base, q.base);
    let (s, t) = (p.height, q.height);
    let two = T::lit(2.0);
    let u = (d * d + (s - t) * (s - t)) / (two * s * t);
    (u + (u * (u + two)).sqrt()).ln_1p()
}

/// A finite set of cone points over one base space.
#[derive(Debug, Clone)]
pub struct ConeSample<'a, T> {
    pub space: &'a FiniteMetricSpace<T>,
    pub points: Vec<ConePoint<T>>,
    /// The heights every base point was sampled at, ascending.
    pub height_grid: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeSampleRecord<T> {
    pub space: String,
    pub points: Vec<ConePoint<T>>,
}

/// Every base point at every height `2^k`, `h_lo <= k <= h_hi`, optionally
/// keeping only heights up to the diameter of the base.
pub fn build_cone_sample<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    h_lo: i32,
    h_hi: i32,
    cap_at_diam: bool,
) -> Result<ConeSample<'_, T>, ConeError> {
    if h_lo > h_hi {
        return Err(ConeError::EmptyRange { lo: h_lo, hi: h_hi });
    }
    let diameter = space.diameter();
    let heights: Vec<T> = (h_lo..=h_hi)
        .map(|k| T::lit(2.0).powi(k))
        .filter(|&t| !cap_at_diam || t <= diameter)
        .collect();
    if heights.is_empty() {
        return Err(ConeError::EmptySample {
            lo: h_lo,
            hi: h_hi,
            diameter: diameter.to_f64_lossy(),
        });
    }
    ConeSample::on_grid(space, heights)
}

impl<'a, T: Scalar> ConeSample<'a, T> {
    /// Every base point at every height of `heights` (sorted ascending here).
    pub fn on_grid(
        space: &'a FiniteMetricSpace<T>,
        mut heights: Vec<T>,
    ) -> Result<Self, ConeError> {
        heights.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));
        heights.dedup();
        let mut points = Vec::with_capacity(space.n() * heights.len());
        for base in 0..space.n() {
            for &h in &heights {
                points.push(ConePoint::new(base, h)?);
            }
        }
        Ok(ConeSample {
            space,
            points,
            height_grid: heights,
        })
    }

    pub fn from_points(
        space: &'a FiniteMetricSpace<T>,
        points: Vec<ConePoint<T>>,
    ) -> Result<Self, ConeError> {
        for p in &points {
            space.check_index(p.base)?;
            ConePoint::new(p.base, p.height)?;
        }
        Ok(ConeSample {
            space,
            points,
            height_grid: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Row-major `rho_h` matrix of the sample.
    pub fn distance_matrix(&self) -> Vec<Vec<T>> {
        self.points
            .par_iter()
            .map(|&p| {
                self.points
                    .iter()
                    .map(|&q| rho_h(self.space, p, q))
                    .collect()
            })
            .collect()
    }

    /// The sample as a finite metric space under `rho_h`.
    pub fn to_metric_space(&self, tol: T) -> Result<FiniteMetricSpace<T>, ConeError> {
        let mut m = self.distance_matrix();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = T::zero();
        }
        Ok(validate_metric(&m, None, tol)?)
    }

    pub fn to_record(&self) -> ConeSampleRecord<T> {
        ConeSampleRecord {
            space: self.space.content_hash(),
            points: self.points.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> FiniteMetricSpace<f64> {
        FiniteMetricSpace::from_fn(3, 1e-9, |i, j| (i as f64 - j as f64).abs()).unwrap()
    }

    fn pt(base: usize, height: f64) -> ConePoint<f64> {
        ConePoint::new(base, height).unwrap()
    }

    #[test]
    fn rho_examples() {
        let s = line3();
        assert_eq!(rho_h(&s, pt(0, 1.5), pt(0, 1.5)), 0.0);
        assert_eq!(
            rho_h(&s, pt(0, 1.5), pt(2, 0.7)),
            rho_h(&s, pt(2, 0.7), pt(0, 1.5))
        );
        assert!((rho_h(&s, pt(1, 1.0), pt(1, 4.0)) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((rho_h(&s, pt(0, 1.0), pt(1, 1.0)) - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn d_h_examples() {
        let s = line3();
        assert_eq!(d_h(&s, pt(2, 0.3), pt(2, 0.3)), 0.0);
        assert!((d_h(&s, pt(0, 1.0), pt(0, 2.0)) - 2f64.ln()).abs() < 1e-15);
        let (a, b) = (pt(1, 1.0), pt(1, 1.0 + 1e-8));
        assert!((d_h(&s, a, b) - rho_h(&s, a, b)).abs() < 1e-15);
    }

    #[test]
    fn heights_must_be_positive() {
        assert!(ConePoint::new(0, 0.0f64).is_err());
        assert!(ConePoint::new(0, -1.0f64).is_err());
        assert!(ConePoint::new(0, f64::NAN).is_err());
    }

    #[test]
    fn sample_construction() {
        let s = line3();
        let sample = build_cone_sample(&s, -1, 1, false).unwrap();
        assert_eq!(sample.len(), 9);
        assert_eq!(sample.height_grid, vec![0.5, 1.0, 2.0]);

        let capped = build_cone_sample(&s, 0, 2, true).unwrap();
        assert_eq!(capped.height_grid, vec![1.0, 2.0]);
        assert_eq!(capped.len(), 6);

        assert!(matches!(
            build_cone_sample(&s, 3, 4, true),
            Err(ConeError::EmptySample { .. })
        ));
        assert!(matches!(
            build_cone_sample(&s, 1, 0, false),
            Err(ConeError::EmptyRange { .. })
        ));

        let again = build_cone_sample(&s, -1, 1, false).unwrap();
        assert_eq!(sample.points, again.points);
    }

    #[test]
    fn record_serializes_points() {
        let s = line3();
        let sample = build_cone_sample(&s, 0, 0, false).unwrap();
        let json = serde_json::to_string(&sample.to_record()).unwrap();
        assert!(json.starts_with(&format!("{{\"space\":\"{}\"", s.content_hash())));
        assert!(json.contains("{\"base\":2,\"height\":1.0}"));
    }
}
