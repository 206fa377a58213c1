//! Finite metric spaces, Gromov products and four-point hyperbolicity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::reduce::Best;
use crate::scalar::Scalar;

/// Default relative slack used when validating metric axioms.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// [`DEFAULT_TOLERANCE`], widened to a few ulps for `f32`.
pub fn default_tolerance<T: Scalar>() -> T {
    T::lit(DEFAULT_TOLERANCE).max(T::epsilon() * T::lit(16.0))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("a metric space needs at least three points, got {n}")]
    TooFewPoints { n: usize },
    #[error("label count {labels} does not match point count {n}")]
    LabelCount { labels: usize, n: usize },
    #[error("non-finite distance at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("d({i}, {j}) = {value}: diagonal must be zero and off-diagonal entries positive")]
    NonPositive { i: usize, j: usize, value: f64 },
    #[error("asymmetric distances: d({i}, {j}) = {dij} but d({j}, {i}) = {dji}")]
    Asymmetry {
        i: usize,
        j: usize,
        dij: f64,
        dji: f64,
    },
    #[error("triangle inequality fails for ({a}, {b}, {c}): d(a,c) = {ac} > d(a,b) + d(b,c) = {ab} + {bc}")]
    Triangle {
        a: usize,
        b: usize,
        c: usize,
        ac: f64,
        ab: f64,
        bc: f64,
    },
    #[error("point index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("snowflake exponent {alpha} outside (0, 1]")]
    AlphaOutOfRange { alpha: f64 },
    #[error("scale factor {factor} must be finite and positive")]
    BadScale { factor: f64 },
    #[error("not a permutation of 0..{n}")]
    NotPermutation { n: usize },
}

/// A validated finite metric space with at least three points.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace<T> {
    labels: Vec<String>,
    dist: Vec<T>,
    n: usize,
}

/// Serializable form: `{"labels": [...], "dist": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceRecord<T> {
    #[serde(default)]
    pub labels: Vec<String>,
    pub dist: Vec<Vec<T>>,
}

/// Checks the metric axioms on a raw square matrix and builds a space.
///
/// `tol` is relative to the largest entry. Labels default to `p0, p1, ...`.
pub fn validate_metric<T: Scalar>(
    matrix: &[Vec<T>],
    labels: Option<Vec<String>>,
    tol: T,
) -> Result<FiniteMetricSpace<T>, MetricError> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(MetricError::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
    }
    if n < 3 {
        return Err(MetricError::TooFewPoints { n });
    }
    let labels = match labels {
        Some(l) if l.len() != n => return Err(MetricError::LabelCount { labels: l.len(), n }),
        Some(l) => l,
        None => (0..n).map(|i| format!("p{i}")).collect(),
    };

    let mut scale = T::zero();
    for (i, r) in matrix.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(MetricError::NonFinite { i, j });
            }
            scale = scale.max(v.abs());
        }
    }
    let slack = tol * scale;

    for (i, r) in matrix.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            let bad = if i == j {
                v != T::zero()
            } else {
                v <= T::zero()
            };
            if bad {
                return Err(MetricError::NonPositive {
                    i,
                    j,
                    value: v.to_f64_lossy(),
                });
            }
        }
    }
    for (i, row) in matrix.iter().enumerate() {
        for (j, other) in matrix.iter().enumerate().skip(i + 1) {
            let (a, b) = (row[j], other[i]);
            if (a - b).abs() > slack {
                return Err(MetricError::Asymmetry {
                    i,
                    j,
                    dij: a.to_f64_lossy(),
                    dji: b.to_f64_lossy(),
                });
            }
        }
    }

    // Upper triangle is authoritative.
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            dist[i * n + j] = matrix[i][j];
            dist[j * n + i] = matrix[i][j];
        }
    }
    let space = FiniteMetricSpace { labels, dist, n };
    if let Some((a, b, c)) = space.triangle_violation(slack) {
        return Err(MetricError::Triangle {
            a,
            b,
            c,
            ac: space.d(a, c).to_f64_lossy(),
            ab: space.d(a, b).to_f64_lossy(),
            bc: space.d(b, c).to_f64_lossy(),
        });
    }
    Ok(space)
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Builds and validates a space from a distance function.
    pub fn from_fn(n: usize, tol: T, f: impl Fn(usize, usize) -> T) -> Result<Self, MetricError> {
        let matrix: Vec<Vec<T>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { T::zero() } else { f(i, j) })
                    .collect()
            })
            .collect();
        validate_metric(&matrix, None, tol)
    }

    pub fn from_record(record: SpaceRecord<T>, tol: T) -> Result<Self, MetricError> {
        let labels = if record.labels.is_empty() {
            None
        } else {
            Some(record.labels)
        };
        validate_metric(&record.dist, labels, tol)
    }

    pub fn to_record(&self) -> SpaceRecord<T> {
        SpaceRecord {
            labels: self.labels.clone(),
            dist: self.rows(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.dist.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn diameter(&self) -> T {
        self.dist.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn check_index(&self, index: usize) -> Result<(), MetricError> {
        if index < self.n {
            Ok(())
        } else {
            Err(MetricError::IndexOutOfRange { index, n: self.n })
        }
    }

    /// First triple `(a, b, c)` with `d(a,c) > d(a,b) + d(b,c) + slack`.
    pub fn triangle_violation(&self, slack: T) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.d(a, c) > self.d(a, b) + self.d(b, c) + slack {
                        return Some((a, b, c));
                    }
                }
            }
        }
        None
    }

    /// Same space with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self, MetricError> {
        if !(factor.is_finite() && factor > T::zero()) {
            return Err(MetricError::BadScale {
                factor: factor.to_f64_lossy(),
            });
        }
        Ok(FiniteMetricSpace {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|&v| v * factor).collect(),
            n: self.n,
        })
    }

    /// Relabels points: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MetricError> {
        let n = self.n;
        if !is_permutation(perm, n) {
            return Err(MetricError::NotPermutation { n });
        }
        let mut dist = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = self.d(perm[i], perm[j]);
            }
        }
        Ok(FiniteMetricSpace {
            labels: perm.iter().map(|&p| self.labels[p].clone()).collect(),
            dist,
            n,
        })
    }

    /// Short content hash over labels and the exact bit patterns of the distances.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for l in &self.labels {
            h.update((l.len() as u64).to_le_bytes());
            h.update(l.as_bytes());
        }
        for &v in &self.dist {
            h.update(v.to_f64_lossy().to_bits().to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

pub(crate) fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// `(x|y)_o = (d(x,o) + d(y,o) - d(x,y)) / 2`.
pub fn gromov_product<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    x: usize,
    y: usize,
    o: usize,
) -> Result<T, MetricError> {
    for i in [x, y, o] {
        space.check_index(i)?;
    }
    Ok(gromov(space, x, y, o))
}

#[inline]
fn gromov<T: Scalar>(space: &FiniteMetricSpace<T>, x: usize, y: usize, o: usize) -> T {
    (space.d(x, o) + space.d(y, o) - space.d(x, y)) * T::lit(0.5)
}

#[inline]
fn four_point_defect<T: Scalar>(xy: T, xz: T, zy: T) -> T {
    xz.min(zy) - xy
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaConfig {
    /// Spaces with at most this many points are scanned exhaustively.
    pub exhaustive_cutoff: usize,
    /// Number of uniformly drawn ordered quadruples above the cutoff.
    pub samples: u64,
    pub seed: u64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig {
            exhaustive_cutoff: 60,
            samples: 2_000_000,
            seed: 0,
        }
    }
}

/// Four-point hyperbolicity constant. When `exhaustive` is false the value is
/// a lower estimate from `quadruples` random ordered quadruples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate<T> {
    pub delta: T,
    pub exhaustive: bool,
    pub quadruples: u64,
    /// `(x, y, z, o)` attaining the maximum defect, if any defect was positive.
    pub witness: Option<(usize, usize, usize, usize)>,
}

pub fn delta_hyperbolicity<T: Scalar>(space: &FiniteMetricSpace<T>) -> DeltaEstimate<T> {
    delta_hyperbolicity_with(space, &DeltaConfig::default())
}

/// Smallest `delta >= 0` with `(x|y)_o >= min((x|z)_o, (z|y)_o) - delta` over
/// all ordered quadruples, repeats allowed.
pub fn delta_hyperbolicity_with<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    config: &DeltaConfig,
) -> DeltaEstimate<T> {
    let n = space.n();
    if n <= config.exhaustive_cutoff {
        let best = (0..n)
            .into_par_iter()
            .map(|o| {
                let g: Vec<T> = (0..n * n).map(|k| gromov(space, k / n, k % n, o)).collect();
                let mut best = Best::none();
                for z in 0..n {
                    for x in 0..n {
                        let xz = g[x * n + z];
                        // The defect is symmetric in x and y.
                        for y in x..n {
                            let v = four_point_defect(g[x * n + y], xz, g[z * n + y]);
                            if v > T::zero() {
                                best.offer(v, (x, y, z, o));
                            }
                        }
                    }
                }
                best
            })
            .reduce(Best::none, Best::merge);
        DeltaEstimate {
            delta: best.value_or(T::zero()),
            exhaustive: true,
            quadruples: (n as u64).pow(4),
            witness: best.witness,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut best = Best::none();
        for _ in 0..config.samples {
            let (x, y, z, o) = (
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
            );
            let v = four_point_defect(
                gromov(space, x, y, o),
                gromov(space, x, z, o),
                gromov(space, z, y, o),
            );
            if v > T::zero() {
                // Canonical orientation so ties resolve like the exhaustive scan.
                best.offer(v, (x.min(y), x.max(y), z, o));
            }
        }
        DeltaEstimate {
            delta: best.value_or(T::zero()),
            exhaustive: false,
            quadruples: config.samples,
            witness: best.witness,
        }
    }
}

/// Entrywise `d^alpha`, the canonical `(alpha, 1)`-snowflake of `space`.
pub fn snowflake_space<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    alpha: T,
) -> Result<FiniteMetricSpace<T>, MetricError> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(MetricError::AlphaOutOfRange {
            alpha: alpha.to_f64_lossy(),
        });
    }
    let matrix: Vec<Vec<T>> = space
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.powf(alpha)).collect())
        .collect();
    validate_metric(&matrix, Some(space.labels.clone()), default_tolerance())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect()
    }

    #[test]
    fn line_of_three_is_valid() {
        let s = validate_metric(&line(&[0.0, 1.0, 2.0]), None, 1e-9).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.diameter(), 2.0);
        assert_eq!(s.labels()[2], "p2");
    }

    #[test]
    fn triangle_violation_reports_witness() {
        let m = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        match validate_metric(&m, None, 1e-9) {
            Err(MetricError::Triangle { a, b, c, .. }) => assert_eq!((a, b, c), (0, 1, 2)),
            other => panic!("expected triangle error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_small_and_malformed_matrices() {
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(
            validate_metric(&two, None, 1e-9),
            Err(MetricError::TooFewPoints { n: 2 })
        );

        let mut asym = line(&[0.0, 1.0, 2.0]);
        asym[0][1] = 1.5;
        assert!(matches!(
            validate_metric(&asym, None, 1e-9),
            Err(MetricError::Asymmetry { .. })
        ));

        let mut diag = line(&[0.0, 1.0, 2.0]);
        diag[1][1] = 0.1;
        assert!(matches!(
            validate_metric(&diag, None, 1e-9),
            Err(MetricError::NonPositive { .. })
        ));

        let mut zero = line(&[0.0, 1.0, 2.0]);
        zero[0][2] = 0.0;
        zero[2][0] = 0.0;
        assert!(matches!(
            validate_metric(&zero, None, 1e-9),
            Err(MetricError::NonPositive { .. })
        ));

        let ragged = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0], vec![2.0, 1.0, 0.0]];
        assert!(matches!(
            validate_metric(&ragged, None, 1e-9),
            Err(MetricError::NotSquare { .. })
        ));
    }

    #[test]
    fn tolerance_absorbs_rounding() {
        let mut m = line(&[0.0, 1.0, 2.0]);
        m[0][2] = 2.0 + 1e-12;
        m[2][0] = 2.0 + 1e-12;
        assert!(validate_metric(&m, None, 1e-9).is_ok());
        assert!(validate_metric(&m, None, 0.0).is_err());
    }

    #[test]
    fn gromov_product_cases() {
        let eq = FiniteMetricSpace::from_fn(3, 1e-9, |_, _| 2.0).unwrap();
        assert_eq!(gromov_product(&eq, 0, 1, 2).unwrap(), 1.0);
        assert_eq!(gromov_product(&eq, 0, 2, 2).unwrap(), 0.0);
        assert_eq!(gromov_product(&eq, 0, 0, 2).unwrap(), eq.d(0, 2));
        assert!(gromov_product(&eq, 0, 3, 2).is_err());
    }

    #[test]
    fn sampled_delta_matches_exhaustive_when_covering() {
        let s = validate_metric(&line(&[0.0, 1.0, 3.5]), None, 1e-9).unwrap();
        let exact = delta_hyperbolicity(&s);
        let sampled = delta_hyperbolicity_with(
            &s,
            &DeltaConfig {
                exhaustive_cutoff: 0,
                samples: 20_000,
                seed: 3,
            },
        );
        assert!(exact.exhaustive && !sampled.exhaustive);
        assert_eq!(exact.delta, sampled.delta);
    }

    #[test]
    fn snowflake_examples() {
        let s = validate_metric(&line(&[0.0, 1.0, 4.0]), None, 1e-9).unwrap();
        assert_eq!(snowflake_space(&s, 1.0).unwrap(), s);
        let half = snowflake_space(&s, 0.5).unwrap();
        assert_eq!(
            (half.d(0, 1), half.d(1, 2), half.d(0, 2)),
            (1.0, 3f64.sqrt(), 2.0)
        );
        assert_eq!(
            snowflake_space(&s, 2.0),
            Err(MetricError::AlphaOutOfRange { alpha: 2.0 })
        );
        assert!(snowflake_space(&s, 0.0).is_err());
    }

    #[test]
    fn permutation_and_hash() {
        let s = validate_metric(&line(&[0.0, 1.0, 4.0]), None, 1e-9).unwrap();
        let p = s.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.d(0, 1), s.d(2, 0));
        assert_eq!(p.labels()[0], "p2");
        assert_ne!(p.content_hash(), s.content_hash());
        assert_eq!(s.content_hash(), s.clone().content_hash());
        assert!(s.permuted(&[0, 0, 1]).is_err());
    }
}
