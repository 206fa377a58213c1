//! Hyperbolic cones over finite metric spaces and the extension of power
//! quasi-symmetries between base spaces to rough quasi-isometries between
//! their cones.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom fix the scalar for the common cases.

pub mod cone;
pub mod corpus;
pub mod extension;
pub mod generate;
pub mod io;
pub mod metric;
pub mod piecewise;
pub mod quasisym;
pub mod reduce;
pub mod scalar;
pub mod verify;

pub use cone::{
    build_cone_sample, d_h, rho_from_parts, rho_h, ConeError, ConePoint, ConeSample,
    ConeSampleRecord,
};
pub use extension::{
    annulus_index, build_phi_map, extend_map, phi_at, ray_height, scale_spectrum,
    spectrum_with_phi, ConeMapExtension, ExtensionError, ExtensionRecord, ScaleSpectrum,
};
pub use generate::{generate_space, GeneratorKind, GeneratorParams};
pub use io::FormatError;
pub use metric::{
    default_tolerance, delta_hyperbolicity, delta_hyperbolicity_with, gromov_product,
    snowflake_space, validate_metric, DeltaConfig, DeltaEstimate, FiniteMetricSpace, MetricError,
    SpaceRecord, DEFAULT_TOLERANCE,
};
pub use piecewise::{PiecewiseError, PiecewiseLinearMap};
pub use quasisym::{
    compose, eta_power, fit_power_qs, fit_power_qs_with, fit_snowflake, fit_theta_envelope,
    invert_map, MapRecord, PointMap, PowerQsFit, QsError, QsParams, SnowflakeFit, ThetaEnvelope,
    ThetaGrid, TripleScan,
};
pub use scalar::Scalar;

pub type Space = FiniteMetricSpace<f64>;
pub type Space32 = FiniteMetricSpace<f32>;
pub type Map = PointMap<f64>;
pub type Map32 = PointMap<f32>;
pub type Extension = ConeMapExtension<f64>;
pub type Extension32 = ConeMapExtension<f32>;
pub type Point = ConePoint<f64>;
pub type Point32 = ConePoint<f32>;
