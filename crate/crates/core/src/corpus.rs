//! A fixed collection of quasi-symmetric maps used by the tests and the CLI.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generate::{generate_space, GeneratorKind, GeneratorParams};
use crate::metric::{default_tolerance, snowflake_space, FiniteMetricSpace, MetricError};
use crate::quasisym::{invert_map, PointMap};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct CorpusMap<T> {
    pub name: &'static str,
    pub map: PointMap<T>,
    /// Exponent `alpha` with `d_W ~ d_Z^alpha`, when the map is a snowflake.
    pub alpha: Option<T>,
}

/// Identity pairing onto the snowflake `d^alpha` of `z`.
pub fn snowflake_map<T: Scalar>(
    z: Arc<FiniteMetricSpace<T>>,
    alpha: T,
) -> Result<PointMap<T>, MetricError> {
    let w = Arc::new(snowflake_space(&z, alpha)?);
    Ok(PointMap::identity(z, w).expect("same size"))
}

/// Identity pairing onto `factor` times `z`.
pub fn scaling_map<T: Scalar>(
    z: Arc<FiniteMetricSpace<T>>,
    factor: T,
) -> Result<PointMap<T>, MetricError> {
    let w = Arc::new(z.scaled(factor)?);
    Ok(PointMap::identity(z, w).expect("same size"))
}

fn planar_points<T: Scalar>(n: usize, seed: u64) -> Vec<(T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (T::lit(rng.gen::<f64>()), T::lit(rng.gen::<f64>())))
        .collect()
}

fn planar_space<T: Scalar>(pts: &[(T, T)]) -> Result<FiniteMetricSpace<T>, MetricError> {
    FiniteMetricSpace::from_fn(pts.len(), default_tolerance(), |i, j| {
        (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1)
    })
}

/// The standard corpus on `n` points, every space derived from `seed`.
///
/// Every map admits a power quasi-symmetry with `lambda <= 1.5` somewhere on
/// the default theta grid.
pub fn standard_corpus<T: Scalar>(n: usize, seed: u64) -> Result<Vec<CorpusMap<T>>, MetricError> {
    let params = GeneratorParams::default();
    let cloud = Arc::new(generate_space::<T>(
        GeneratorKind::EuclideanCloud,
        n,
        seed,
        &params,
    )?);
    let tree = Arc::new(generate_space::<T>(
        GeneratorKind::TreeMetric,
        n,
        seed,
        &params,
    )?);
    let circle = Arc::new(generate_space::<T>(
        GeneratorKind::Circle,
        n,
        seed,
        &params,
    )?);
    let half = T::lit(0.5);
    let third = T::one() / T::lit(3.0);

    let mut out = vec![
        CorpusMap {
            name: "identity_cloud",
            map: PointMap::identity(cloud.clone(), cloud.clone()).expect("same size"),
            alpha: None,
        },
        CorpusMap {
            name: "doubling_cloud",
            map: scaling_map(cloud.clone(), T::lit(2.0))?,
            alpha: None,
        },
        CorpusMap {
            name: "tripling_tree",
            map: scaling_map(tree.clone(), T::lit(3.0))?,
            alpha: None,
        },
        CorpusMap {
            name: "snowflake_half_cloud",
            map: snowflake_map(cloud.clone(), half)?,
            alpha: Some(half),
        },
        CorpusMap {
            name: "snowflake_third_cloud",
            map: snowflake_map(cloud.clone(), third)?,
            alpha: Some(third),
        },
        CorpusMap {
            name: "snowflake_half_tree",
            map: snowflake_map(tree, half)?,
            alpha: Some(half),
        },
        CorpusMap {
            name: "snowflake_half_circle",
            map: snowflake_map(circle, half)?,
            alpha: Some(half),
        },
    ];

    // Same snowflake with the target points listed in a shuffled order.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let w = Arc::new(snowflake_space(&cloud, half)?.permuted(&perm)?);
    let mut pairing = vec![0; n];
    for (k, &p) in perm.iter().enumerate() {
        pairing[p] = k;
    }
    out.push(CorpusMap {
        name: "snowflake_half_shuffled",
        map: PointMap::new(cloud.clone(), w, pairing).expect("bijection"),
        alpha: Some(half),
    });

    let inverse = invert_map(&snowflake_map(cloud, half)?);
    out.push(CorpusMap {
        name: "inverse_snowflake_half",
        map: inverse,
        alpha: Some(T::lit(2.0)),
    });

    // A linear shear of a planar cloud: bi-Lipschitz, so theta = 1 suffices.
    let pts = planar_points::<T>(n, seed.wrapping_add(1));
    let sheared: Vec<(T, T)> = pts
        .iter()
        .map(|&(x, y)| (x + T::lit(0.1) * y, T::lit(0.95) * y))
        .collect();
    out.push(CorpusMap {
        name: "shear_plane",
        map: PointMap::identity(
            Arc::new(planar_space(&pts)?),
            Arc::new(planar_space(&sheared)?),
        )
        .expect("same size"),
        alpha: None,
    });
    Ok(out)
}
