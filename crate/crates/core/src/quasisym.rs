//! Bijections between finite metric spaces and the fitting of their
//! quasi-symmetry and snowflake constants.
//!
//! A `(theta, lambda)`-power quasi-symmetry controls distance ratios through
//! the gauge [`eta_power`]:
//!
//! ```text
//! d_W(f x, f z) / d_W(f y, f z) <= eta(d_Z(x, z) / d_Z(y, z))
//! ```
//!
//! On a finite space the smallest admissible `lambda` for a fixed `theta` is a
//! maximum over ordered triples, which [`fit_power_qs`] computes exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{is_permutation, FiniteMetricSpace};
use crate::reduce::Best;
use crate::scalar::Scalar;

/// Relative slack applied to `lambda_cap` when scanning the theta grid. Fitted
/// ratios that are exactly 1 in real arithmetic can land an ulp above it.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsError {
    #[error("source has {source_n} points but target has {target_n}")]
    SizeMismatch { source_n: usize, target_n: usize },
    #[error("pairing is not a bijection onto 0..{n}")]
    NotBijection { n: usize },
    #[error("cannot compose: the first map's target is not the second map's source")]
    NotComposable,
    #[error("parameter {name} = {value} is outside its domain")]
    Domain { name: &'static str, value: f64 },
    #[error("no theta up to {theta_max} reaches lambda <= {lambda_cap} (best lambda {best_lambda} at theta {theta_max})")]
    NoFeasibleTheta {
        theta_max: f64,
        lambda_cap: f64,
        best_lambda: f64,
    },
}

/// A bijection `f: Z -> W`; `pairing[i]` is the image of source point `i`.
#[derive(Debug, Clone)]
pub struct PointMap<T> {
    pub source: Arc<FiniteMetricSpace<T>>,
    pub target: Arc<FiniteMetricSpace<T>>,
    pairing: Vec<usize>,
}

/// Serializable form: `{"pairing": [j0, j1, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapRecord {
    pub pairing: Vec<usize>,
}

impl<T: Scalar> PointMap<T> {
    pub fn new(
        source: Arc<FiniteMetricSpace<T>>,
        target: Arc<FiniteMetricSpace<T>>,
        pairing: Vec<usize>,
    ) -> Result<Self, QsError> {
        if source.n() != target.n() {
            return Err(QsError::SizeMismatch {
                source_n: source.n(),
                target_n: target.n(),
            });
        }
        if !is_permutation(&pairing, source.n()) {
            return Err(QsError::NotBijection { n: source.n() });
        }
        Ok(PointMap {
            source,
            target,
            pairing,
        })
    }

    /// The pairing `i -> i`.
    pub fn identity(
        source: Arc<FiniteMetricSpace<T>>,
        target: Arc<FiniteMetricSpace<T>>,
    ) -> Result<Self, QsError> {
        let n = source.n();
        Self::new(source, target, (0..n).collect())
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.pairing[i]
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn n(&self) -> usize {
        self.pairing.len()
    }

    /// Source distance `d_Z(i, j)`.
    #[inline]
    pub fn dz(&self, i: usize, j: usize) -> T {
        self.source.d(i, j)
    }

    /// Target distance between the images, `d_W(f i, f j)`.
    #[inline]
    pub fn dw(&self, i: usize, j: usize) -> T {
        self.target.d(self.pairing[i], self.pairing[j])
    }

    pub fn to_record(&self) -> MapRecord {
        MapRecord {
            pairing: self.pairing.clone(),
        }
    }
}

/// Fitted power quasi-symmetry (and optionally snowflake) constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsParams<T> {
    pub theta: T,
    pub lambda: T,
    pub alpha: Option<T>,
    pub c_snow: Option<T>,
}

impl<T: Scalar> QsParams<T> {
    pub fn new(theta: T, lambda: T, alpha: Option<T>, c_snow: Option<T>) -> Result<Self, QsError> {
        check_at_least_one("theta", theta)?;
        check_at_least_one("lambda", lambda)?;
        if let Some(a) = alpha {
            if !(a > T::zero() && a.is_finite()) {
                return Err(QsError::Domain {
                    name: "alpha",
                    value: a.to_f64_lossy(),
                });
            }
        }
        if let Some(c) = c_snow {
            check_at_least_one("c_snow", c)?;
        }
        Ok(QsParams {
            theta,
            lambda,
            alpha,
            c_snow,
        })
    }
}

fn check_at_least_one<T: Scalar>(name: &'static str, v: T) -> Result<(), QsError> {
    if v >= T::one() && v.is_finite() {
        Ok(())
    } else {
        Err(QsError::Domain {
            name,
            value: v.to_f64_lossy(),
        })
    }
}

/// The power gauge: `lambda t^(1/theta)` below 1, `lambda t^theta` from 1 on.
pub fn eta_power<T: Scalar>(theta: T, lambda: T, t: T) -> Result<T, QsError> {
    check_at_least_one("theta", theta)?;
    check_at_least_one("lambda", lambda)?;
    if t.is_nan() || t < T::zero() {
        return Err(QsError::Domain {
            name: "t",
            value: t.to_f64_lossy(),
        });
    }
    Ok(if t < T::one() {
        lambda * t.powf(theta.recip())
    } else {
        lambda * t.powf(theta)
    })
}

/// Sampling policy for triple scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleScan {
    /// Maps on at most this many points are scanned exhaustively.
    pub exhaustive_cutoff: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for TripleScan {
    fn default() -> Self {
        TripleScan {
            exhaustive_cutoff: 150,
            samples: 2_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerQsFit<T> {
    pub theta: T,
    /// Smallest `lambda >= 1` admissible on the scanned triples.
    pub lambda: T,
    /// `(x, y, z)` attaining the maximal ratio.
    pub witness: Option<(usize, usize, usize)>,
    pub triples: u64,
    pub exhaustive: bool,
}

/// Log-domain view of every scanned triple, shared across theta values.
struct TripleLogs<T> {
    /// `(ln r, ln R, packed witness)` with `r` the source and `R` the target ratio.
    rows: Vec<(T, T, u64)>,
    scanned: u64,
    n: u64,
    exhaustive: bool,
}

impl<T: Scalar> TripleLogs<T> {
    fn collect(f: &PointMap<T>, scan: &TripleScan) -> Self {
        let n = f.n();
        let row = |x: usize, y: usize, z: usize| {
            let r = f.dz(x, z) / f.dz(y, z);
            let big_r = f.dw(x, z) / f.dw(y, z);
            (r.ln(), big_r.ln(), ((x * n + y) * n + z) as u64)
        };
        let (rows, exhaustive): (Vec<_>, bool) = if n <= scan.exhaustive_cutoff {
            let rows = (0..n)
                .into_par_iter()
                .flat_map_iter(|z| {
                    (0..n).filter(move |&x| x != z).flat_map(move |x| {
                        (0..n).filter(move |&y| y != z).map(move |y| row(x, y, z))
                    })
                })
                .collect();
            (rows, true)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(scan.seed);
            let mut rows = Vec::with_capacity(scan.samples as usize);
            while (rows.len() as u64) < scan.samples {
                let (x, y, z) = (
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                );
                if x != z && y != z {
                    rows.push(row(x, y, z));
                }
            }
            (rows, false)
        };
        TripleLogs {
            scanned: rows.len() as u64,
            rows,
            n: n as u64,
            exhaustive,
        }
    }

    /// Drops every row that cannot decide a maximum at any theta: a row with
    /// a smaller or equal `ln r`, a larger or equal `ln R` and a smaller
    /// witness beats or ties it under every gauge, and ties go to the smaller
    /// witness.
    fn pruned(mut self) -> Self {
        self.rows.par_sort_unstable_by(|p, q| {
            p.0.partial_cmp(&q.0)
                .expect("finite logs")
                .then(q.1.partial_cmp(&p.1).expect("finite logs"))
                .then(p.2.cmp(&q.2))
        });
        // Undominated (ln R, witness) seen so far; witnesses grow with ln R.
        let mut stairs: BTreeMap<u64, u64> = BTreeMap::new();
        self.rows.retain(|&(_, ln_big_r, w)| {
            let key = order_key(ln_big_r.to_f64_lossy());
            if stairs.range(key..).next().is_some_and(|(_, &m)| m < w) {
                return false;
            }
            let stale: Vec<u64> = stairs
                .range(..=key)
                .rev()
                .take_while(|(_, &m)| m > w)
                .map(|(&k, _)| k)
                .collect();
            for k in stale {
                stairs.remove(&k);
            }
            stairs.insert(key, w);
            true
        });
        self
    }

    fn kernel(self) -> TripleKernel<T> {
        let mut kernel = TripleKernel {
            contract: Columns::default(),
            expand: Columns::default(),
            scanned: self.scanned,
            n: self.n,
            exhaustive: self.exhaustive,
        };
        for (ln_r, ln_big_r, w) in self.rows {
            let side = if ln_r < T::zero() {
                &mut kernel.contract
            } else {
                &mut kernel.expand
            };
            side.ln_r.push(ln_r);
            side.ln_big_r.push(ln_big_r);
            side.witness.push(w);
        }
        kernel
    }
}

/// Maps a float to an integer with the same order.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

#[derive(Default)]
struct Columns<T> {
    ln_r: Vec<T>,
    ln_big_r: Vec<T>,
    witness: Vec<u64>,
}

impl<T: Scalar> Columns<T> {
    /// Largest `ln R - slope * ln r`.
    fn max(&self, slope: T) -> T {
        const LANES: usize = 8;
        let mut acc = [T::neg_infinity(); LANES];
        let (a, b) = (&self.ln_r, &self.ln_big_r);
        let full = a.len() / LANES * LANES;
        for (ca, cb) in a[..full]
            .chunks_exact(LANES)
            .zip(b[..full].chunks_exact(LANES))
        {
            for k in 0..LANES {
                let v = cb[k] - ca[k] * slope;
                acc[k] = if v > acc[k] { v } else { acc[k] };
            }
        }
        let tail = a[full..]
            .iter()
            .zip(&b[full..])
            .map(|(&a, &b)| b - a * slope);
        acc.into_iter()
            .chain(tail)
            .fold(T::neg_infinity(), |m, v| if v > m { v } else { m })
    }

    /// Smallest witness whose row attains `value`.
    fn witness_of(&self, slope: T, value: T) -> Option<u64> {
        (0..self.ln_r.len())
            .filter(|&i| self.ln_big_r[i] - self.ln_r[i] * slope == value)
            .map(|i| self.witness[i])
            .min()
    }
}

/// Triples split by the sign of `ln r`, so each side has a linear gauge.
struct TripleKernel<T> {
    contract: Columns<T>,
    expand: Columns<T>,
    scanned: u64,
    n: u64,
    exhaustive: bool,
}

impl<T: Scalar> TripleKernel<T> {
    fn fit(&self, theta: T) -> PowerQsFit<T> {
        let inv = theta.recip();
        let (lo, hi) = (self.contract.max(inv), self.expand.max(theta));
        let best = if lo > hi { lo } else { hi };
        let witness = if best == T::neg_infinity() {
            None
        } else {
            let a = if lo == best {
                self.contract.witness_of(inv, best)
            } else {
                None
            };
            let b = if hi == best {
                self.expand.witness_of(theta, best)
            } else {
                None
            };
            a.into_iter().chain(b).min()
        };
        let n = self.n;
        PowerQsFit {
            theta,
            lambda: if witness.is_some() && best > T::zero() {
                best.exp()
            } else {
                T::one()
            },
            witness: witness.map(|w| {
                (
                    (w / (n * n)) as usize,
                    ((w / n) % n) as usize,
                    (w % n) as usize,
                )
            }),
            triples: self.scanned,
            exhaustive: self.exhaustive,
        }
    }
}

/// Smallest `lambda` with `R <= eta_{theta,lambda}(r)` over all ordered
/// triples `(x, y, z)` with `x != z`, `y != z`; never below 1.
pub fn fit_power_qs<T: Scalar>(f: &PointMap<T>, theta: T) -> PowerQsFit<T> {
    fit_power_qs_with(f, theta, &TripleScan::default())
}

pub fn fit_power_qs_with<T: Scalar>(f: &PointMap<T>, theta: T, scan: &TripleScan) -> PowerQsFit<T> {
    TripleLogs::collect(f, scan).kernel().fit(theta)
}

/// Evenly spaced theta values `start, start + step, ...` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid {
            start: 1.0,
            stop: 8.0,
            step: 0.05,
        }
    }
}

impl ThetaGrid {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9)
            .floor()
            .max(0.0) as usize;
        (0..=count)
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEnvelope<T> {
    /// Smallest grid theta whose fitted lambda is within the cap.
    pub fit: PowerQsFit<T>,
    pub lambda_cap: T,
    /// `(theta, lambda*)` over the whole grid.
    pub curve: Vec<(T, T)>,
}

/// Scans the theta grid and returns the first theta with `lambda* <= lambda_cap`.
pub fn fit_theta_envelope<T: Scalar>(
    f: &PointMap<T>,
    lambda_cap: T,
    grid: &ThetaGrid,
    scan: &TripleScan,
) -> Result<ThetaEnvelope<T>, QsError> {
    check_at_least_one("lambda_cap", lambda_cap)?;
    if !(grid.start >= 1.0 && grid.step > 0.0 && grid.stop >= grid.start) {
        return Err(QsError::Domain {
            name: "theta grid",
            value: grid.start,
        });
    }
    let kernel = TripleLogs::collect(f, scan).pruned().kernel();
    let fits: Vec<PowerQsFit<T>> = grid
        .values()
        .into_par_iter()
        .map(|th| kernel.fit(T::lit(th)))
        .collect();
    let curve = fits.iter().map(|p| (p.theta, p.lambda)).collect();
    let limit = lambda_cap * (T::one() + T::lit(FEASIBILITY_SLACK));
    match fits.iter().find(|p| p.lambda <= limit) {
        Some(&fit) => Ok(ThetaEnvelope {
            fit,
            lambda_cap,
            curve,
        }),
        None => {
            let last = fits.last().expect("grid has at least one value");
            Err(QsError::NoFeasibleTheta {
                theta_max: last.theta.to_f64_lossy(),
                lambda_cap: lambda_cap.to_f64_lossy(),
                best_lambda: last.lambda.to_f64_lossy(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnowflakeFit<T> {
    pub alpha: T,
    /// Smallest `C` with `C^-1 d_Z^alpha <= d_W <= C d_Z^alpha` on every pair.
    pub c: T,
    pub witness: Option<(usize, usize)>,
}

pub fn fit_snowflake<T: Scalar>(f: &PointMap<T>, alpha: T) -> Result<SnowflakeFit<T>, QsError> {
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(QsError::Domain {
            name: "alpha",
            value: alpha.to_f64_lossy(),
        });
    }
    let n = f.n();
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = Best::none();
            for y in (x + 1)..n {
                let model = f.dz(x, y).powf(alpha);
                let dw = f.dw(x, y);
                best.offer((dw / model).max(model / dw), (x, y));
            }
            best
        })
        .reduce(Best::none, Best::merge);
    Ok(SnowflakeFit {
        alpha,
        c: best.value_or(T::one()),
        witness: best.witness,
    })
}

/// `f^-1: W -> Z`.
pub fn invert_map<T: Scalar>(f: &PointMap<T>) -> PointMap<T> {
    let mut inverse = vec![0; f.n()];
    for (i, &j) in f.pairing.iter().enumerate() {
        inverse[j] = i;
    }
    PointMap {
        source: Arc::clone(&f.target),
        target: Arc::clone(&f.source),
        pairing: inverse,
    }
}

/// `g o f`; requires `f.target` and `g.source` to be the same space.
pub fn compose<T: Scalar>(f: &PointMap<T>, g: &PointMap<T>) -> Result<PointMap<T>, QsError> {
    if !(Arc::ptr_eq(&f.target, &g.source) || *f.target == *g.source) {
        return Err(QsError::NotComposable);
    }
    let pairing = f.pairing.iter().map(|&j| g.pairing[j]).collect();
    Ok(PointMap {
        source: Arc::clone(&f.source),
        target: Arc::clone(&g.target),
        pairing,
    })
}

#[cfg(test)]
mod tests {
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
    fn eta_examples() {
        for t in [0.0, 0.3, 1.0, 7.5] {
            assert_eq!(eta_power(1.0, 1.0, t).unwrap(), t);
        }
        assert_eq!(eta_power(2.5, 3.0, 1.0).unwrap(), 3.0);
        assert_eq!(eta_power(2.0, 3.0, 4.0).unwrap(), 48.0);
        assert_eq!(eta_power(2.0, 3.0, 0.25).unwrap(), 1.5);
        assert!(eta_power(0.5, 1.0, 1.0).is_err());
        assert!(eta_power(1.0, 0.9, 1.0).is_err());
        assert!(eta_power(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn params_domain() {
        assert!(QsParams::new(1.0, 1.0, Some(0.5), Some(1.0)).is_ok());
        assert!(QsParams::new(0.9, 1.0, None, None).is_err());
        assert!(QsParams::new(1.0, 1.0, Some(0.0), None).is_err());
        assert!(QsParams::new(1.0, 1.0, None, Some(0.5)).is_err());
    }

    #[test]
    fn map_construction_rejects_non_bijections() {
        let z = line(&[0.0, 1.0, 3.0]);
        let w = line(&[0.0, 1.0, 3.0, 7.0]);
        assert!(matches!(
            PointMap::identity(z.clone(), w),
            Err(QsError::SizeMismatch { .. })
        ));
        assert!(matches!(
            PointMap::new(z.clone(), z.clone(), vec![0, 0, 1]),
            Err(QsError::NotBijection { .. })
        ));
        assert!(PointMap::new(z.clone(), z, vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn identity_fits_trivially() {
        let z = line(&[0.0, 1.0, 3.0, 7.0, 7.5]);
        let id = PointMap::identity(z.clone(), z.clone()).unwrap();
        let fit = fit_power_qs(&id, 1.0);
        assert_eq!(fit.lambda, 1.0);
        assert!(fit.exhaustive);
        assert_eq!(fit.triples, 5 * 4 * 4);
        let env =
            fit_theta_envelope(&id, 1.0, &ThetaGrid::default(), &TripleScan::default()).unwrap();
        assert_eq!(env.fit.theta, 1.0);
        assert_eq!(env.curve.len(), 141);
        assert_eq!(fit_snowflake(&id, 1.0).unwrap().c, 1.0);
    }

    #[test]
    fn inversion_is_an_involution() {
        let z = line(&[0.0, 1.0, 3.0, 7.0]);
        let w = line(&[0.0, 2.0, 5.0, 6.0]);
        let f = PointMap::new(z, w, vec![3, 1, 0, 2]).unwrap();
        let inv = invert_map(&f);
        assert_eq!(inv.pairing(), &[2, 1, 3, 0]);
        assert_eq!(invert_map(&inv).pairing(), f.pairing());
        let round = compose(&f, &inv).unwrap();
        assert_eq!(round.pairing(), &[0, 1, 2, 3]);
        assert!(matches!(compose(&f, &f), Err(QsError::NotComposable)));
    }

    #[test]
    fn theta_grid_values() {
        let g = ThetaGrid::default().values();
        assert_eq!(g.first(), Some(&1.0));
        assert!((g.last().unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(g[20], 2.0);
    }
}
