//! Suite configuration: a versioned TOML schema with strict field checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use geq_core::normal_forms::{FormKind, FormParams, LeviCivitaData};
use geq_core::{Chart, GeqError, ScalarFunction1D};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Build(#[from] GeqError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { field: field.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

/// A polynomial; `interval` falls back to the family's default interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolySpec {
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
}

impl PolySpec {
    fn build(&self, fallback: (f64, f64)) -> Result<ScalarFunction1D, GeqError> {
        ScalarFunction1D::new(self.coeffs.clone(), self.interval.unwrap_or(fallback))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartSpec {
    fn build(&self) -> Result<Chart, GeqError> {
        Chart::new(self.lo.clone(), self.hi.clone())
    }
}

/// One sphere factor: `n`, the linear map `a` (diagonal when it has `n + 1`
/// entries, row-major otherwise), chart half width and optional pole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSpec {
    pub n: usize,
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    LcNd {
        lambdas: Vec<PolySpec>,
        chart: ChartSpec,
    },
    TwoDElliptic {
        lambda: PolySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart: Option<ChartSpec>,
    },
    TwoDPolarPlus {
        f: PolySpec,
        lambda1: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart: Option<ChartSpec>,
    },
    TwoDPolarMinus {
        f: PolySpec,
        lambda2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart: Option<ChartSpec>,
    },
    ThreeDAxial {
        f: PolySpec,
        lambda1: PolySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart: Option<ChartSpec>,
    },
    ThreeDFull {
        lambda: PolySpec,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart: Option<ChartSpec>,
    },
    Beltrami(SphereSpec),
    Product {
        factors: Vec<SphereSpec>,
    },
    /// Ordered direct sum of other families.
    Glue {
        factors: Vec<FamilySpec>,
    },
    ControlNonEquivalent,
    ControlNonIntegrable,
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::LcNd { .. } => "lc_nd",
            FamilySpec::TwoDElliptic { .. } => "two_d_elliptic",
            FamilySpec::TwoDPolarPlus { .. } => "two_d_polar_plus",
            FamilySpec::TwoDPolarMinus { .. } => "two_d_polar_minus",
            FamilySpec::ThreeDAxial { .. } => "three_d_axial",
            FamilySpec::ThreeDFull { .. } => "three_d_full",
            FamilySpec::Beltrami(_) => "beltrami",
            FamilySpec::Product { .. } => "product",
            FamilySpec::Glue { .. } => "glue",
            FamilySpec::ControlNonEquivalent => "control_non_equivalent",
            FamilySpec::ControlNonIntegrable => "control_non_integrable",
        }
    }

    /// Normal-form parameters, for the six model families.
    pub fn form_params(&self) -> Result<Option<FormParams>, GeqError> {
        let default_of = |k| FormParams::default_for(k);
        let chart_or = |c: &Option<ChartSpec>, k: FormKind| -> Result<Chart, GeqError> {
            match c {
                Some(c) => c.build(),
                None => Ok(default_of(k).chart().clone()),
            }
        };
        let p = match self {
            FamilySpec::LcNd { lambdas, chart } => {
                let chart = chart.build()?;
                let lambdas = lambdas
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l.build((chart.lo.get(i).copied().unwrap_or(0.0), chart.hi.get(i).copied().unwrap_or(1.0))))
                    .collect::<Result<Vec<_>, _>>()?;
                FormParams::LcNd(LeviCivitaData::new(lambdas, chart)?)
            }
            FamilySpec::TwoDElliptic { lambda, chart } => {
                let k = FormKind::TwoDElliptic;
                let FormParams::TwoDElliptic { lambda: d, .. } = default_of(k) else { unreachable!() };
                FormParams::TwoDElliptic { lambda: lambda.build(d.interval)?, chart: chart_or(chart, k)? }
            }
            FamilySpec::TwoDPolarPlus { f, lambda1, chart } => {
                let k = FormKind::TwoDPolarPlus;
                let FormParams::TwoDPolarPlus { f: d, .. } = default_of(k) else { unreachable!() };
                FormParams::TwoDPolarPlus { f: f.build(d.interval)?, lambda1: *lambda1, chart: chart_or(chart, k)? }
            }
            FamilySpec::TwoDPolarMinus { f, lambda2, chart } => {
                let k = FormKind::TwoDPolarMinus;
                let FormParams::TwoDPolarMinus { f: d, .. } = default_of(k) else { unreachable!() };
                FormParams::TwoDPolarMinus { f: f.build(d.interval)?, lambda2: *lambda2, chart: chart_or(chart, k)? }
            }
            FamilySpec::ThreeDAxial { f, lambda1, chart } => {
                let k = FormKind::ThreeDAxial;
                let FormParams::ThreeDAxial { f: df, lambda1: dl, .. } = default_of(k) else { unreachable!() };
                FormParams::ThreeDAxial {
                    f: f.build(df.interval)?,
                    lambda1: lambda1.build(dl.interval)?,
                    chart: chart_or(chart, k)?,
                }
            }
            FamilySpec::ThreeDFull { lambda, c, chart } => {
                let k = FormKind::ThreeDFull;
                let FormParams::ThreeDFull { lambda: d, .. } = default_of(k) else { unreachable!() };
                FormParams::ThreeDFull { lambda: lambda.build(d.interval)?, c: *c, chart: chart_or(chart, k)? }
            }
            _ => return Ok(None),
        };
        Ok(Some(p))
    }

    /// Cheap structural validation; Levi-Civita separation is checked here.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            FamilySpec::Glue { factors } => {
                if factors.is_empty() {
                    return Err(CliError::schema("family.factors", "at least one factor is required"));
                }
                factors.iter().try_for_each(FamilySpec::validate)
            }
            FamilySpec::Product { factors } if factors.is_empty() => {
                Err(CliError::schema("family.factors", "at least one factor is required"))
            }
            _ => {
                self.form_params()?;
                Ok(())
            }
        }
    }
}

fn d_equiv_traj() -> usize {
    20
}
fn d_t_end() -> f64 {
    1.0
}
fn d_threshold() -> f64 {
    1e-6
}
fn d_points() -> usize {
    200
}
fn d_vectors() -> usize {
    5
}
fn d_eps() -> f64 {
    1e-9
}
fn d_grid_points() -> usize {
    1000
}
fn d_roundtrip_threshold() -> f64 {
    1e-12
}
fn d_normal_threshold() -> f64 {
    1e-8
}
fn d_per_axis() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBlock {
    #[serde(default = "d_equiv_traj")]
    pub n_traj: usize,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
}

impl Default for TrajectoryBlock {
    fn default() -> Self {
        Self { n_traj: d_equiv_traj(), t_end: d_t_end(), threshold: d_threshold() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterlacingBlock {
    #[serde(default = "d_points")]
    pub n_points: usize,
    #[serde(default = "d_vectors")]
    pub n_vectors: usize,
    #[serde(default = "d_eps")]
    pub eps: f64,
}

impl Default for InterlacingBlock {
    fn default() -> Self {
        Self { n_points: d_points(), n_vectors: d_vectors(), eps: d_eps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripBlock {
    /// Block sizes to split at; all `1..n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<usize>>,
    #[serde(default = "d_grid_points")]
    pub n_points: usize,
    #[serde(default = "d_roundtrip_threshold")]
    pub threshold: f64,
}

impl Default for RoundtripBlock {
    fn default() -> Self {
        Self { r: None, n_points: d_grid_points(), threshold: d_roundtrip_threshold() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormBlock {
    #[serde(default = "d_grid_points")]
    pub n_points: usize,
    #[serde(default = "d_normal_threshold")]
    pub threshold: f64,
}

impl Default for NormalFormBlock {
    fn default() -> Self {
        Self { n_points: d_grid_points(), threshold: d_normal_threshold() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NijenhuisBlock {
    #[serde(default = "d_per_axis")]
    pub per_axis: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
}

impl Default for NijenhuisBlock {
    fn default() -> Self {
        Self { per_axis: d_per_axis(), threshold: d_threshold() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Directory for reports, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Fixed RK4 step instead of the adaptive integrator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_step: Option<f64>,
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<TrajectoryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conservation: Option<TrajectoryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interlacing: Option<InterlacingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roundtrip: Option<RoundtripBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_form: Option<NormalFormBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nijenhuis: Option<NijenhuisBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl SuiteConfig {
    /// A config with the default check set (equivalence, conservation,
    /// interlacing) for `family`.
    pub fn for_family(family: FamilySpec, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            tol: DEFAULT_TOL,
            fixed_step: None,
            family,
            equivalence: None,
            conservation: None,
            interlacing: None,
            roundtrip: None,
            normal_form: None,
            nijenhuis: None,
            output: OutputBlock::default(),
        }
    }

    pub fn has_checks(&self) -> bool {
        self.equivalence.is_some()
            || self.conservation.is_some()
            || self.interlacing.is_some()
            || self.roundtrip.is_some()
            || self.normal_form.is_some()
            || self.nijenhuis.is_some()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::schema(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        positive("tol", self.tol)?;
        if let Some(h) = self.fixed_step {
            positive("fixed_step", h)?;
        }
        let traj = |name: &str, b: &TrajectoryBlock| -> Result<(), CliError> {
            count(&format!("{name}.n_traj"), b.n_traj)?;
            positive(&format!("{name}.t_end"), b.t_end)?;
            positive(&format!("{name}.threshold"), b.threshold)
        };
        if let Some(b) = &self.equivalence {
            traj("equivalence", b)?;
        }
        if let Some(b) = &self.conservation {
            traj("conservation", b)?;
        }
        if let Some(b) = &self.interlacing {
            count("interlacing.n_points", b.n_points)?;
            count("interlacing.n_vectors", b.n_vectors)?;
            positive("interlacing.eps", b.eps)?;
        }
        if let Some(b) = &self.roundtrip {
            count("roundtrip.n_points", b.n_points)?;
            positive("roundtrip.threshold", b.threshold)?;
        }
        if let Some(b) = &self.normal_form {
            count("normal_form.n_points", b.n_points)?;
            positive("normal_form.threshold", b.threshold)?;
            if self.family.form_params()?.is_none() {
                return Err(CliError::schema("normal_form", format!("{} is not a normal-form family", self.family.name())));
            }
        }
        if let Some(b) = &self.nijenhuis {
            count("nijenhuis.per_axis", b.per_axis)?;
            positive("nijenhuis.threshold", b.threshold)?;
        }
        self.family.validate()
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(field, format!("must be a positive number, got {v}")))
    }
}

fn count(field: &str, v: usize) -> Result<(), CliError> {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::schema(field, "must be at least 1"))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// The first backquoted name in a deserializer message, if any.
fn quoted_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Parse and validate a config from its text; `path` is only used in messages.
pub fn parse_config(text: &str, path: &str) -> Result<SuiteConfig, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    for required in ["schema_version", "seed", "family"] {
        if !table.contains_key(required) {
            return Err(CliError::schema(required, "missing required field"));
        }
    }
    let cfg: SuiteConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        CliError::schema(quoted_field(&msg).unwrap_or_else(|| format!("line {line}")), format!("line {line}: {msg}"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, parse and validate a config file; also returns the raw bytes.
pub fn load_config(path: &Path) -> Result<(SuiteConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    Ok((parse_config(&text, &path.display().to_string())?, bytes))
}
