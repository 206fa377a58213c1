//! Empirical verification of the cone extension.
//!
//! Every check folds a deviation over an exhaustive or seeded sample and
//! reports the smallest constant that makes the corresponding inequality
//! hold on that sample, with a witness that attains it.

mod checks;
mod report;
mod rough;
mod theorem;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quasisym::QsError;
use crate::scalar::Scalar;

pub use checks::{
    check_annulus_gap, check_phi_pair_bounds, check_ray_properties, check_snowflake_alignment,
    check_two_point_bounds, PhiPairBounds, RayChecks, TwoPointBounds,
};
pub use report::{
    verify_map, CheckEntry, DistortionReport, Gate, MapMetadata, ReportSettings, TheoremEntry,
    ANNULUS_GAP_SLACK, SPLIT_IDENTITY_TOL,
};
pub use rough::{fit_rough_map, RoughMode};
pub use theorem::{check_theorem, theorem_pairs, PairBudget, SplitIdentity, TheoremFit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("ray map over point {base} is not monotone: height {t1} maps above the image of {t2}")]
    MonotonicityViolation { base: usize, t1: f64, t2: f64 },
    #[error(transparent)]
    Qs(#[from] QsError),
    #[error("{0}")]
    Config(String),
}

/// Where a fitted constant is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Base point and a second point of the source space.
    Points { x: usize, y: usize },
    /// Base point, a second point, and the evaluation abscissa `s = log2(1/t)`.
    PointsAt { x: usize, y: usize, s: f64 },
    /// One spectrum level around `x`.
    Level { x: usize, l: i32 },
    /// Two spectrum levels around `x`.
    Levels { x: usize, l1: i32, l2: i32 },
    /// Two real abscissae around `x`.
    Reals { x: usize, t1: f64, t2: f64 },
    /// Two heights on the ray over `x`.
    Ray { x: usize, t1: f64, t2: f64 },
    /// Two cone points `(base, height)`.
    Cone { p: (usize, f64), q: (usize, f64) },
}

/// A fitted constant: the maximum deviation over the declared sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitted<T> {
    pub value: T,
    pub witness: Option<Witness>,
    pub sample_size: u64,
    pub exhaustive: bool,
}

impl<T: Scalar> Fitted<T> {
    pub(crate) fn exhaustive(value: T, witness: Option<Witness>, sample_size: u64) -> Self {
        Fitted {
            value,
            witness,
            sample_size,
            exhaustive: true,
        }
    }
}
