//! Extending a bijection of base spaces to the cones over them.
//!
//! Around each base point `x` the distances to the other points fall into
//! dyadic annuli `2^(-l-1) < d <= 2^(-l)`; the set of occupied levels is the
//! scale spectrum of `x`. The level map `phi_x` sends a level `l` to the
//! largest target level reached by any point lying outside the ball of radius
//! `2^(-l-1)`, and `Phi_x` interpolates it linearly between spectrum levels
//! with slope-one tails. The cone map then acts on the ray over `x` by
//!
//! ```text
//! (x, t)  ->  (f(x), 2^(-Phi_x(log2(1/t))))
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::ConePoint;
use crate::metric::FiniteMetricSpace;
use crate::piecewise::PiecewiseLinearMap;
use crate::quasisym::PointMap;
use crate::scalar::{floor_log2, log2_recip, pow2, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtensionError {
    #[error("annulus index needs a finite positive distance, got {d}")]
    NonPositiveDistance { d: f64 },
    #[error("level {level} is not in the scale spectrum of point {base}")]
    LevelNotInSpectrum { base: usize, level: i32 },
    #[error("point index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
}

/// The unique integer `l` with `2^(-l-1) < d <= 2^(-l)`.
///
/// Computed from the binary exponent, so exact powers of two land in the
/// annulus whose outer radius they are.
pub fn annulus_index<T: Scalar>(d: T) -> Result<i32, ExtensionError> {
    match floor_log2(d) {
        Some((k, true)) => Ok(-k),
        Some((k, false)) => Ok(-(k + 1)),
        None => Err(ExtensionError::NonPositiveDistance {
            d: d.to_f64_lossy(),
        }),
    }
}

#[inline]
fn level<T: Scalar>(d: T) -> i32 {
    annulus_index(d).expect("distances between distinct points are positive")
}

/// Occupied annulus levels around `base`, ascending, with `phi` values when
/// they have been computed (same length as `levels`, otherwise empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSpectrum {
    pub base: usize,
    pub levels: Vec<i32>,
    pub phi: Vec<i32>,
}

impl ScaleSpectrum {
    pub fn min_level(&self) -> i32 {
        self.levels[0]
    }

    pub fn max_level(&self) -> i32 {
        self.levels[self.levels.len() - 1]
    }

    pub fn contains(&self, l: i32) -> bool {
        self.levels.binary_search(&l).is_ok()
    }

    pub fn phi(&self, l: i32) -> Option<i32> {
        let i = self.levels.binary_search(&l).ok()?;
        self.phi.get(i).copied()
    }
}

/// Levels of the annuli around `x` that contain at least one point.
pub fn scale_spectrum<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    x: usize,
) -> Result<ScaleSpectrum, ExtensionError> {
    if x >= space.n() {
        return Err(ExtensionError::IndexOutOfRange {
            index: x,
            n: space.n(),
        });
    }
    let mut levels: Vec<i32> = (0..space.n())
        .filter(|&y| y != x)
        .map(|y| level(space.d(y, x)))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    Ok(ScaleSpectrum {
        base: x,
        levels,
        phi: Vec::new(),
    })
}

/// `phi_x(l)`: the largest target level of `f(y)` around `f(x)` over all `y`
/// with `d_Z(y, x) > 2^(-l-1)`.
pub fn phi_at<T: Scalar>(f: &PointMap<T>, x: usize, l: i32) -> Result<i32, ExtensionError> {
    let spectrum = scale_spectrum(&f.source, x)?;
    if !spectrum.contains(l) {
        return Err(ExtensionError::LevelNotInSpectrum { base: x, level: l });
    }
    // d > 2^(-l-1) exactly when the source level of y is at most l.
    Ok((0..f.n())
        .filter(|&y| y != x && level(f.dz(y, x)) <= l)
        .map(|y| level(f.dw(y, x)))
        .max()
        .expect("level l is occupied"))
}

/// Scale spectrum of `x` together with every `phi_x` value, in one pass.
pub fn spectrum_with_phi<T: Scalar>(
    f: &PointMap<T>,
    x: usize,
) -> Result<ScaleSpectrum, ExtensionError> {
    if x >= f.n() {
        return Err(ExtensionError::IndexOutOfRange { index: x, n: f.n() });
    }
    let mut pairs: Vec<(i32, i32)> = (0..f.n())
        .filter(|&y| y != x)
        .map(|y| (level(f.dz(y, x)), level(f.dw(y, x))))
        .collect();
    pairs.sort_unstable();
    let mut levels = Vec::new();
    let mut phi = Vec::new();
    let mut running = i32::MIN;
    for (i, &(l, target)) in pairs.iter().enumerate() {
        running = running.max(target);
        let last_of_level = pairs.get(i + 1).is_none_or(|&(next, _)| next != l);
        if last_of_level {
            levels.push(l);
            phi.push(running);
        }
    }
    Ok(ScaleSpectrum {
        base: x,
        levels,
        phi,
    })
}

/// `Phi_x` from a spectrum carrying `phi` values: breakpoints at every level,
/// linear across gaps, slope one beyond both ends.
pub fn phi_map_from_spectrum<T: Scalar>(spectrum: &ScaleSpectrum) -> PiecewiseLinearMap<T> {
    assert_eq!(
        spectrum.levels.len(),
        spectrum.phi.len(),
        "spectrum without phi values"
    );
    let breakpoints = spectrum
        .levels
        .iter()
        .zip(&spectrum.phi)
        .map(|(&l, &v)| (T::from_level(l), T::from_level(v)))
        .collect();
    PiecewiseLinearMap::new(breakpoints, T::one(), T::one())
        .expect("phi is non-decreasing on the spectrum")
}

/// `Phi_x` for the map `f`.
pub fn build_phi_map<T: Scalar>(
    f: &PointMap<T>,
    x: usize,
) -> Result<PiecewiseLinearMap<T>, ExtensionError> {
    Ok(phi_map_from_spectrum(&spectrum_with_phi(f, x)?))
}

/// The cone map: one interpolated level map per source point.
#[derive(Debug, Clone)]
pub struct ConeMapExtension<T> {
    pub map: PointMap<T>,
    pub spectra: Vec<ScaleSpectrum>,
    pub per_point: Vec<PiecewiseLinearMap<T>>,
}

/// Everything needed to evaluate the cone map without the base spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionRecord<T> {
    pub pairing: Vec<usize>,
    pub per_point: Vec<PiecewiseLinearMap<T>>,
}

pub fn extend_map<T: Scalar>(f: &PointMap<T>) -> ConeMapExtension<T> {
    let spectra: Vec<ScaleSpectrum> = (0..f.n())
        .into_par_iter()
        .map(|x| spectrum_with_phi(f, x).expect("index in range"))
        .collect();
    let per_point = spectra.iter().map(phi_map_from_spectrum).collect();
    ConeMapExtension {
        map: f.clone(),
        spectra,
        per_point,
    }
}

/// Image height of `t` under the ray map with level map `phi`.
#[inline]
pub fn ray_height<T: Scalar>(phi: &PiecewiseLinearMap<T>, t: T) -> T {
    pow2(-phi.eval(log2_recip(t)))
}

impl<T: Scalar> ConeMapExtension<T> {
    pub fn n(&self) -> usize {
        self.per_point.len()
    }

    /// `Phi_x(s)`.
    pub fn phi(&self, x: usize, s: T) -> T {
        self.per_point[x].eval(s)
    }

    pub fn apply(&self, p: ConePoint<T>) -> ConePoint<T> {
        ConePoint {
            base: self.map.image(p.base),
            height: ray_height(&self.per_point[p.base], p.height),
        }
    }

    pub fn to_record(&self) -> ExtensionRecord<T> {
        ExtensionRecord {
            pairing: self.map.pairing().to_vec(),
            per_point: self.per_point.clone(),
        }
    }
}

impl<T: Scalar> ExtensionRecord<T> {
    pub fn apply(&self, p: ConePoint<T>) -> ConePoint<T> {
        ConePoint {
            base: self.pairing[p.base],
            height: ray_height(&self.per_point[p.base], p.height),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric::validate_metric;

    fn line(points: &[f64]) -> Arc<FiniteMetricSpace<f64>> {
        let m: Vec<Vec<f64>> = points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect();
        Arc::new(validate_metric(&m, None, 1e-9).unwrap())
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus_index(1.0f64), Ok(0));
        assert_eq!(annulus_index(2.0f64), Ok(-1));
        assert_eq!(annulus_index(0.125f64), Ok(3));
        assert_eq!(annulus_index(0.126f64), Ok(2));
        assert_eq!(annulus_index(0.124f32), Ok(3));
        assert_eq!(annulus_index(3.0f64), Ok(-2));
        assert!(annulus_index(0.0f64).is_err());
        assert!(annulus_index(-1.0f64).is_err());
    }

    #[test]
    fn spectra_on_a_line() {
        let z = line(&[0.0, 1.0, 2.0]);
        assert_eq!(scale_spectrum(&z, 0).unwrap().levels, vec![-1, 0]);
        let s1 = scale_spectrum(&z, 1).unwrap();
        assert_eq!(s1.levels, vec![0]);
        assert_eq!((s1.min_level(), s1.max_level()), (0, 0));
        let z4 = z.scaled(4.0).unwrap();
        assert_eq!(scale_spectrum(&z4, 0).unwrap().levels, vec![-3, -2]);
        assert!(scale_spectrum(&z, 3).is_err());
    }

    #[test]
    fn phi_identity_and_doubling() {
        let z = line(&[0.0, 0.3, 1.0, 2.5, 6.0]);
        let id = PointMap::identity(z.clone(), z.clone()).unwrap();
        let doubled = PointMap::identity(z.clone(), Arc::new(z.scaled(2.0).unwrap())).unwrap();
        for x in 0..5 {
            let spec = spectrum_with_phi(&id, x).unwrap();
            for (&l, &v) in spec.levels.iter().zip(&spec.phi) {
                assert_eq!(v, l);
                assert_eq!(phi_at(&id, x, l), Ok(l));
                assert_eq!(phi_at(&doubled, x, l), Ok(l - 1));
            }
        }
        assert!(matches!(
            phi_at(&id, 0, 40),
            Err(ExtensionError::LevelNotInSpectrum { .. })
        ));
    }

    #[test]
    fn identity_extension_is_identity() {
        let z = line(&[0.0, 0.3, 1.0, 2.5, 6.0]);
        let id = PointMap::identity(z.clone(), z.clone()).unwrap();
        let ext = extend_map(&id);
        for x in 0..5 {
            for k in -12..=12 {
                let p = ConePoint::new(x, 2f64.powi(k)).unwrap();
                assert_eq!(ext.apply(p), p);
            }
            assert_eq!(ext.phi(x, -17.5), -17.5);
        }
    }

    #[test]
    fn record_round_trip_evaluates_identically() {
        let z = line(&[0.0, 0.3, 1.0, 2.5, 6.0]);
        let w = Arc::new(crate::metric::snowflake_space(&z, 0.5).unwrap());
        let f = PointMap::new(z, w, vec![0, 1, 2, 3, 4]).unwrap();
        let ext = extend_map(&f);
        let json = serde_json::to_string(&ext.to_record()).unwrap();
        let back: ExtensionRecord<f64> = serde_json::from_str(&json).unwrap();
        for x in 0..5 {
            let p = ConePoint::new(x, 0.37).unwrap();
            assert_eq!(back.apply(p), ext.apply(p));
        }
    }
}
