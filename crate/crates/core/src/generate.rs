//! Deterministic test spaces.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{default_tolerance, FiniteMetricSpace, MetricError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Uniform points in the unit cube, Euclidean distance.
    EuclideanCloud,
    /// Path metric of a random recursive tree with weighted edges.
    TreeMetric,
    /// Equally spaced points on a circle, arc-length distance.
    Circle,
    /// Row-major points of a square integer lattice, Euclidean distance.
    Grid,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::EuclideanCloud,
        GeneratorKind::TreeMetric,
        GeneratorKind::Circle,
        GeneratorKind::Grid,
    ];
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::EuclideanCloud => "euclidean_cloud",
            GeneratorKind::TreeMetric => "tree_metric",
            GeneratorKind::Circle => "circle",
            GeneratorKind::Grid => "grid",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GeneratorKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown generator kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Ambient dimension of `EuclideanCloud`.
    pub dim: usize,
    /// Total length of `Circle`.
    pub circumference: f64,
    /// Lattice spacing of `Grid`.
    pub spacing: f64,
    /// Edge weights of `TreeMetric` are uniform in `[min_edge, max_edge)`.
    pub min_edge: f64,
    pub max_edge: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            dim: 2,
            circumference: 1.0,
            spacing: 1.0,
            min_edge: 0.5,
            max_edge: 1.5,
        }
    }
}

/// Builds a validated space. Identical arguments give bitwise-identical output.
pub fn generate_space<T: Scalar>(
    kind: GeneratorKind,
    n: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<FiniteMetricSpace<T>, MetricError> {
    if n < 3 {
        return Err(MetricError::TooFewPoints { n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = default_tolerance();
    match kind {
        GeneratorKind::EuclideanCloud => {
            let dim = params.dim.max(1);
            let pts: Vec<Vec<T>> = (0..n)
                .map(|_| (0..dim).map(|_| T::lit(rng.gen::<f64>())).collect())
                .collect();
            FiniteMetricSpace::from_fn(n, tol, |i, j| euclidean(&pts[i], &pts[j]))
        }
        GeneratorKind::TreeMetric => {
            let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
            for child in 1..n {
                let parent = rng.gen_range(0..child);
                let w = T::lit(rng.gen_range(params.min_edge..params.max_edge));
                adj[child].push((parent, w));
                adj[parent].push((child, w));
            }
            let table: Vec<Vec<T>> = (0..n).map(|s| tree_distances(&adj, s)).collect();
            FiniteMetricSpace::from_fn(n, tol, |i, j| table[i.min(j)][i.max(j)])
        }
        GeneratorKind::Circle => {
            let step = T::lit(params.circumference) / T::lit(n as f64);
            FiniteMetricSpace::from_fn(n, tol, |i, j| {
                let k = i.abs_diff(j);
                T::lit(k.min(n - k) as f64) * step
            })
        }
        GeneratorKind::Grid => {
            let side = (1..).find(|s| s * s >= n).unwrap_or(1);
            let spacing = T::lit(params.spacing);
            let pts: Vec<Vec<T>> = (0..n)
                .map(|i| {
                    vec![
                        T::lit((i % side) as f64) * spacing,
                        T::lit((i / side) as f64) * spacing,
                    ]
                })
                .collect();
            FiniteMetricSpace::from_fn(n, tol, |i, j| euclidean(&pts[i], &pts[j]))
        }
    }
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

fn tree_distances<T: Scalar>(adj: &[Vec<(usize, T)>], source: usize) -> Vec<T> {
    let mut dist = vec![T::neg_infinity(); adj.len()];
    dist[source] = T::zero();
    let mut stack = vec![source];
    while let Some(u) = stack.pop() {
        for &(v, w) in &adj[u] {
            if dist[v] == T::neg_infinity() {
                dist[v] = dist[u] + w;
                stack.push(v);
            }
        }
    }
    dist
}
