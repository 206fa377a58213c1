//! `hypercone` command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | bad command line or inconsistent configuration |
//! | 2 | an input matrix violates the metric axioms |
//! | 3 | an input file is unreadable or malformed |
//! | 4 | no theta on the grid reaches the lambda cap |
//! | 5 | a hard verification gate failed |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypercone::io::{read_map, read_space};
use hypercone::verify::{
    theorem_pairs, verify_map, DistortionReport, PairBudget, ReportSettings, VerifyError,
};
use hypercone::{
    build_cone_sample, default_tolerance, extend_map, fit_snowflake, fit_theta_envelope,
    generate_space, snowflake_space, FormatError, GeneratorKind, GeneratorParams, Map, MetricError,
    PointMap, QsError, Space, ThetaGrid, TripleScan,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_METRIC: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_GATE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Metric(MetricError),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Infeasible(QsError),
    #[error("gates failed: {}", .0.join(", "))]
    Gates(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Metric(_) => EXIT_METRIC,
            CliError::Format(_) => EXIT_FORMAT,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Gates(_) => EXIT_GATE,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Metric(m) if FormatError::Metric(m.clone()).is_metric_violation() => {
                CliError::Metric(m)
            }
            other => CliError::Format(other.to_string()),
        }
    }
}

impl From<QsError> for CliError {
    fn from(e: QsError) -> Self {
        match e {
            QsError::NoFeasibleTheta { .. } => CliError::Infeasible(e),
            QsError::SizeMismatch { .. } | QsError::NotBijection { .. } => {
                CliError::Format(format!("map does not pair the two spaces: {e}"))
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Qs(q) => q.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hypercone",
    version,
    about = "Cone extensions of power quasi-symmetries between finite metric spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a distance matrix file is a metric.
    Validate {
        path: PathBuf,
        /// Relative tolerance for symmetry and the triangle inequality.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Fit the smallest power quasi-symmetry theta whose lambda is within the cap.
    FitQs {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Extend the map to the cones, run every check and write a report.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Height exponents LO:HI; heights are 2^k for LO <= k <= HI.
        #[arg(long, default_value = "-10:10", allow_hyphen_values = true)]
        heights: HeightRange,
        /// Draw this many cone point pairs instead of the default budget.
        #[arg(long)]
        pairs: Option<u64>,
        /// Random real pairs per point for the interpolated level maps.
        #[arg(long, default_value_t = 2_000)]
        real_pairs: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// `json` writes the report; `csv` also writes the (rho, rho') pairs.
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Source space file (CSV or JSON distance matrix).
    #[arg(long, conflicts_with = "gen")]
    pub space_z: Option<PathBuf>,
    /// Target space file; defaults to the alpha-snowflake of the source, or the source itself.
    #[arg(long)]
    pub space_w: Option<PathBuf>,
    /// Map file `{"pairing": [...]}`; defaults to the identity pairing.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Generated source space KIND:N[:PARAM], KIND one of euclidean_cloud, tree_metric, circle, grid.
    #[arg(long)]
    pub gen: Option<GenSpec>,
    /// Snowflake exponent: builds the target when no --space-w is given and fits d_W ~ d_Z^alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Largest theta on the grid 1, 1.05, ...
    #[arg(long, default_value_t = 8.0)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 1.5)]
    pub lambda_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// `KIND:N[:PARAM]`. PARAM is the dimension of a cloud, the circumference of
/// a circle, the spacing of a grid or the largest edge weight of a tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub param: Option<f64>,
}

impl FromStr for GenSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("expected KIND:N[:PARAM], got `{s}`"));
        }
        let kind = parts[0].parse()?;
        let n = parts[1]
            .parse()
            .map_err(|e| format!("bad point count `{}`: {e}", parts[1]))?;
        let param = parts
            .get(2)
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| format!("bad parameter `{p}`: {e}"))
            })
            .transpose()?;
        Ok(GenSpec { kind, n, param })
    }
}

impl GenSpec {
    fn params(&self) -> Result<GeneratorParams, CliError> {
        let mut p = GeneratorParams::default();
        if let Some(v) = self.param {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!(
                    "generator parameter must be positive, got {v}"
                )));
            }
            match self.kind {
                GeneratorKind::EuclideanCloud => p.dim = v as usize,
                GeneratorKind::Circle => p.circumference = v,
                GeneratorKind::Grid => p.spacing = v,
                GeneratorKind::TreeMetric => {
                    if v <= p.min_edge {
                        return Err(CliError::Usage(format!(
                            "largest edge weight must exceed {}",
                            p.min_edge
                        )));
                    }
                    p.max_edge = v;
                }
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeightRange {
    pub lo: i32,
    pub hi: i32,
}

impl FromStr for HeightRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
        let lo = lo
            .trim()
            .parse()
            .map_err(|e| format!("bad LO `{lo}`: {e}"))?;
        let hi = hi
            .trim()
            .parse()
            .map_err(|e| format!("bad HI `{hi}`: {e}"))?;
        if lo > hi {
            return Err(format!("empty height range {lo}:{hi}"));
        }
        Ok(HeightRange { lo, hi })
    }
}

/// Where each input came from, by content.
#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub source: String,
    pub source_hash: String,
    pub target: String,
    pub target_hash: String,
    pub map: String,
    pub pairing_hash: String,
}

/// Everything that determines a report. Its hash names the report file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub inputs: InputSummary,
    pub alpha: Option<f64>,
    pub settings: ReportSettings,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
    report: &'a DistortionReport,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Validate { path, tolerance } => cmd_validate(&path, tolerance, out),
        Command::FitQs { input, fit } => cmd_fit_qs(&input, &fit, out),
        Command::Verify {
            input,
            fit,
            heights,
            pairs,
            real_pairs,
            out: dir,
            format,
        } => {
            let settings = settings_for(&input, &fit, heights, pairs, real_pairs);
            settings.and_then(|s| cmd_verify(&input, s, &dir, format, out).map(|_| ()))
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Honours `HYPERCONE_THREADS` for the global worker pool. Results do not
/// depend on the worker count.
fn configure_threads() {
    if let Some(k) = std::env::var("HYPERCONE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global();
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

pub fn cmd_validate(path: &Path, tolerance: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let space: Space = read_space(path, tolerance)?;
    let _ = writeln!(
        out,
        "valid metric: {} points, diameter {}, hash {}",
        space.n(),
        space.diameter(),
        space.content_hash()
    );
    Ok(())
}

/// Resolved source, target and map, with a content summary.
pub fn load_inputs(input: &InputArgs) -> Result<(Map, InputSummary), CliError> {
    let tol = default_tolerance::<f64>();
    let (z, source) = match (&input.space_z, &input.gen) {
        (Some(path), None) => (read_space(path, tol)?, path.display().to_string()),
        (None, Some(g)) => {
            let space =
                generate_space(g.kind, g.n, input.seed, &g.params()?).map_err(CliError::Metric)?;
            let param = g.param.map(|p| format!(":{p}")).unwrap_or_default();
            (
                space,
                format!("generated {}:{}{param} seed {}", g.kind, g.n, input.seed),
            )
        }
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --space-z and --gen".into(),
            ))
        }
    };
    let z = Arc::new(z);
    let (w, target) = match (&input.space_w, input.alpha) {
        (Some(path), _) => (Arc::new(read_space(path, tol)?), path.display().to_string()),
        (None, Some(a)) => (
            Arc::new(snowflake_space(&z, a).map_err(|e| CliError::Usage(e.to_string()))?),
            format!("snowflake of source, alpha {a}"),
        ),
        (None, None) => (Arc::clone(&z), "source".to_owned()),
    };
    let (f, map) = match &input.map {
        Some(path) => {
            let record = read_map(path)?;
            (
                PointMap::new(Arc::clone(&z), Arc::clone(&w), record.pairing)?,
                path.display().to_string(),
            )
        }
        None => (
            PointMap::identity(Arc::clone(&z), Arc::clone(&w))?,
            "identity".to_owned(),
        ),
    };
    let pairing_bytes = serde_json::to_vec(f.pairing()).expect("pairing serializes");
    let summary = InputSummary {
        source,
        source_hash: z.content_hash(),
        target,
        target_hash: w.content_hash(),
        map,
        pairing_hash: hex::encode(&Sha256::digest(&pairing_bytes)[..8]),
    };
    Ok((f, summary))
}

fn theta_grid(fit: &FitArgs) -> Result<ThetaGrid, CliError> {
    let grid = ThetaGrid {
        stop: fit.theta_max,
        ..ThetaGrid::default()
    };
    if fit.theta_max.is_nan() || fit.theta_max < grid.start {
        return Err(CliError::Usage(format!(
            "--theta-max must be at least {}",
            grid.start
        )));
    }
    Ok(grid)
}

pub fn cmd_fit_qs(input: &InputArgs, fit: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (f, summary) = load_inputs(input)?;
    let scan = TripleScan {
        seed: input.seed,
        ..TripleScan::default()
    };
    let envelope = fit_theta_envelope(&f, fit.lambda_cap, &theta_grid(fit)?, &scan)?;
    let snowflake = input.alpha.map(|a| fit_snowflake(&f, a)).transpose()?;

    #[derive(Serialize)]
    struct Fragment<'a> {
        inputs: &'a InputSummary,
        theta: f64,
        lambda: f64,
        lambda_cap: f64,
        witness: Option<(usize, usize, usize)>,
        triples: u64,
        exhaustive: bool,
        snowflake: Option<hypercone::SnowflakeFit<f64>>,
    }
    let fragment = Fragment {
        inputs: &summary,
        theta: envelope.fit.theta,
        lambda: envelope.fit.lambda,
        lambda_cap: envelope.lambda_cap,
        witness: envelope.fit.witness,
        triples: envelope.fit.triples,
        exhaustive: envelope.fit.exhaustive,
        snowflake,
    };
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&fragment).expect("fragment serializes")
    );
    Ok(())
}

fn settings_for(
    input: &InputArgs,
    fit: &FitArgs,
    heights: HeightRange,
    pairs: Option<u64>,
    real_pairs: usize,
) -> Result<ReportSettings, CliError> {
    let mut settings = ReportSettings {
        heights: (heights.lo, heights.hi),
        lambda_cap: fit.lambda_cap,
        theta_grid: theta_grid(fit)?,
        real_pairs_per_point: real_pairs,
        seed: input.seed,
        ..ReportSettings::default()
    };
    settings.triples.seed = input.seed;
    if let Some(k) = pairs {
        if k == 0 {
            return Err(CliError::Usage("--pairs must be positive".into()));
        }
        settings.pairs = PairBudget::sampled(k);
    }
    if real_pairs == 0 {
        return Err(CliError::Usage("--real-pairs must be positive".into()));
    }
    Ok(settings)
}

/// Writes `bytes` to `path` unless an identical file is already there.
fn write_once(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => Ok(()),
        Ok(_) => Err(CliError::Usage(format!(
            "{} exists with different content; reports are never overwritten",
            path.display()
        ))),
        Err(_) => fs::write(path, bytes).map_err(|e| io_error(path, e)),
    }
}

/// Runs the full pipeline and returns the report path. The report is written
/// before gates are evaluated, so failing runs leave their evidence on disk.
pub fn cmd_verify(
    input: &InputArgs,
    settings: ReportSettings,
    dir: &Path,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<PathBuf, CliError> {
    let (f, inputs) = load_inputs(input)?;
    let config = RunConfig {
        inputs,
        alpha: input.alpha,
        settings,
        format,
    };
    let hash = config.content_hash();
    let report = verify_map(&f, input.alpha, &config.settings)?;

    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(format!("report-{hash}.json"));
    let file = ReportFile {
        config_hash: &hash,
        config: &config,
        report: &report,
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("report serializes");
    bytes.push(b'\n');
    write_once(&path, &bytes)?;

    if format == OutputFormat::Csv {
        let ext = extend_map(&f);
        let (lo, hi) = config.settings.heights;
        let sample = build_cone_sample(&f.source, lo, hi, false)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let pairs = theorem_pairs(&ext, &sample, &config.settings.pairs, config.settings.seed)?;
        let mut text = String::from("rho_source,rho_image\n");
        for (a, b) in pairs {
            text.push_str(&format!("{a},{b}\n"));
        }
        write_once(&dir.join(format!("pairs-{hash}.csv")), text.as_bytes())?;
    }

    let _ = writeln!(
        out,
        "theta {} lambda {} on {} points",
        report.map.theta, report.map.lambda, report.map.n
    );
    for c in &report.checks {
        let _ = writeln!(
            out,
            "  {:<26} {:>12.6}  ({} samples{})",
            c.id,
            c.value,
            c.sample_size,
            if c.exhaustive { ", exhaustive" } else { "" }
        );
    }
    for g in &report.gates {
        let _ = writeln!(
            out,
            "  gate {:<22} {}",
            g.id,
            if g.passed { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(out, "report: {}", path.display());
    if report.passed {
        Ok(path)
    } else {
        Err(CliError::Gates(
            report
                .failed_gates()
                .into_iter()
                .map(str::to_owned)
                .collect(),
        ))
    }
}
