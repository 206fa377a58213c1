//! End-to-end verification of one map and its JSON report.

use serde::{Deserialize, Serialize};

use super::checks::{
    check_annulus_gap, check_phi_pair_bounds, check_ray_properties, check_snowflake_alignment,
    check_two_point_bounds,
};
use super::theorem::{check_theorem, PairBudget};
use super::{Fitted, VerifyError, Witness};
use crate::cone::build_cone_sample;
use crate::extension::extend_map;
use crate::quasisym::{fit_snowflake, fit_theta_envelope, PointMap, ThetaGrid, TripleScan};
use crate::scalar::{pow2, Scalar};

/// Absolute tolerance on both ends of `[0, ln 4]` for the pair-splitting identity.
pub const SPLIT_IDENTITY_TOL: f64 = 1e-9;
/// Absolute tolerance on the annulus gap bound `2 + theta + log2 lambda`.
pub const ANNULUS_GAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    /// Height exponents: heights are `2^k` for `lo <= k <= hi`.
    pub heights: (i32, i32),
    pub lambda_cap: f64,
    pub theta_grid: ThetaGrid,
    pub triples: TripleScan,
    pub pairs: PairBudget,
    /// Random real pairs per base point for the interpolated level maps.
    pub real_pairs_per_point: usize,
    pub seed: u64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            heights: (-10, 10),
            lambda_cap: 1.5,
            theta_grid: ThetaGrid::default(),
            triples: TripleScan::default(),
            pairs: PairBudget::default(),
            real_pairs_per_point: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub source_hash: String,
    pub target_hash: String,
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    pub lambda_witness: Option<(usize, usize, usize)>,
    pub triples: u64,
    pub triples_exhaustive: bool,
    pub alpha: Option<f64>,
    pub snowflake_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub id: String,
    pub sample_size: u64,
    pub exhaustive: bool,
    pub value: f64,
    pub witness: Option<Witness>,
}

impl CheckEntry {
    fn new<T: Scalar>(id: &str, fitted: Fitted<T>) -> Self {
        CheckEntry {
            id: id.to_owned(),
            sample_size: fitted.sample_size,
            exhaustive: fitted.exhaustive,
            value: fitted.value.to_f64_lossy(),
            witness: fitted.witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremEntry {
    pub theta: f64,
    pub k: f64,
    pub k_witness: Option<Witness>,
    pub similarity_k: Option<f64>,
    pub cobounded_radius: f64,
    pub split_min: f64,
    pub split_max: f64,
    pub pairs: u64,
    pub exhaustive: bool,
}

/// A hard pass/fail condition: `lower <= value <= upper`, each bound optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub id: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Gate {
    fn new(id: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        Gate {
            id: id.to_owned(),
            value,
            lower,
            upper,
            passed: lower.is_none_or(|b| value >= b) && upper.is_none_or(|b| value <= b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub map: MapMetadata,
    pub settings: ReportSettings,
    pub checks: Vec<CheckEntry>,
    pub theorem: TheoremEntry,
    pub gates: Vec<Gate>,
    pub passed: bool,
}

impl DistortionReport {
    pub fn check(&self, id: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failed_gates(&self) -> Vec<&str> {
        self.gates
            .iter()
            .filter(|g| !g.passed)
            .map(|g| g.id.as_str())
            .collect()
    }
}

/// Fits `theta` and `lambda`, extends `f` to the cones and runs every check.
///
/// A missing feasible theta is an error. A non-monotone ray map is reported
/// as a failed gate, with the ray checks left out.
pub fn verify_map<T: Scalar>(
    f: &PointMap<T>,
    alpha: Option<T>,
    settings: &ReportSettings,
) -> Result<DistortionReport, VerifyError> {
    let (h_lo, h_hi) = settings.heights;
    if h_lo > h_hi {
        return Err(VerifyError::Config(format!(
            "empty height range {h_lo}..={h_hi}"
        )));
    }
    let envelope = fit_theta_envelope(
        f,
        T::lit(settings.lambda_cap),
        &settings.theta_grid,
        &settings.triples,
    )?;
    let theta = envelope.fit.theta;
    let lambda = envelope.fit.lambda;
    let snowflake = alpha.map(|a| fit_snowflake(f, a)).transpose()?;
    let ext = extend_map(f);

    let mut checks = vec![CheckEntry::new("annulus_gap", check_annulus_gap(&ext))];
    let phi = check_phi_pair_bounds(&ext, theta, settings.real_pairs_per_point, settings.seed);
    checks.push(CheckEntry::new("phi_level_pairs", phi.levels));
    checks.push(CheckEntry::new("phi_real_pairs", phi.reals));
    let two = check_two_point_bounds(&ext);
    checks.push(CheckEntry::new("log_similarity", two.log_similarity));
    checks.push(CheckEntry::new("basepoint_gap", two.basepoint_gap));
    checks.push(CheckEntry::new("basepoint_levels", two.basepoint_levels));
    checks.push(CheckEntry::new("basepoint_heights", two.basepoint_heights));
    if let Some(a) = alpha {
        checks.push(CheckEntry::new(
            "snowflake_alignment",
            check_snowflake_alignment(&ext, a),
        ));
    }

    let heights: Vec<T> = (h_lo..=h_hi).map(|k| pow2(T::from_level(k))).collect();
    let monotone_violations = match check_ray_properties(&ext, &heights, theta) {
        Ok(ray) => {
            checks.push(CheckEntry::new("ray_rough_qi", ray.rough_qi));
            checks.push(CheckEntry::new("ray_height_ratio", ray.height_ratio));
            checks.push(CheckEntry::new("ray_pair_distance", ray.pair_distance));
            0.0
        }
        Err(VerifyError::MonotonicityViolation { .. }) => 1.0,
        Err(e) => return Err(e),
    };

    let sample = build_cone_sample(&f.source, h_lo, h_hi, false)
        .map_err(|e| VerifyError::Config(e.to_string()))?;
    let fit = check_theorem(&ext, &sample, theta, alpha, &settings.pairs, settings.seed)?;
    checks.push(CheckEntry::new("theorem_rough_qi", fit.qi));
    if let Some(sim) = fit.similarity {
        checks.push(CheckEntry::new("theorem_rough_similarity", sim));
    }
    checks.push(CheckEntry::new("cobounded_radius", fit.cobounded_radius));

    let theta64 = theta.to_f64_lossy();
    let lambda64 = lambda.to_f64_lossy();
    let ln4 = 4f64.ln();
    let annulus = checks[0].value;
    let gates = vec![
        Gate::new("ray_monotone", monotone_violations, None, Some(0.0)),
        Gate::new(
            "split_identity_lower",
            fit.split.min().to_f64_lossy(),
            Some(-SPLIT_IDENTITY_TOL),
            None,
        ),
        Gate::new(
            "split_identity_upper",
            fit.split.max().to_f64_lossy(),
            None,
            Some(ln4 + SPLIT_IDENTITY_TOL),
        ),
        Gate::new(
            "annulus_gap",
            annulus,
            None,
            Some(2.0 + theta64 + lambda64.log2() + ANNULUS_GAP_SLACK),
        ),
    ];
    let passed = gates.iter().all(|g| g.passed);

    Ok(DistortionReport {
        map: MapMetadata {
            source_hash: f.source.content_hash(),
            target_hash: f.target.content_hash(),
            n: f.n(),
            theta: theta64,
            lambda: lambda64,
            lambda_witness: envelope.fit.witness,
            triples: envelope.fit.triples,
            triples_exhaustive: envelope.fit.exhaustive,
            alpha: alpha.map(Scalar::to_f64_lossy),
            snowflake_c: snowflake.map(|s| s.c.to_f64_lossy()),
        },
        settings: settings.clone(),
        checks,
        theorem: TheoremEntry {
            theta: theta64,
            k: fit.qi.value.to_f64_lossy(),
            k_witness: fit.qi.witness,
            similarity_k: fit.similarity.map(|s| s.value.to_f64_lossy()),
            cobounded_radius: fit.cobounded_radius.value.to_f64_lossy(),
            split_min: fit.split.min().to_f64_lossy(),
            split_max: fit.split.max().to_f64_lossy(),
            pairs: fit.pairs,
            exhaustive: fit.exhaustive,
        },
        gates,
        passed,
    })
}
