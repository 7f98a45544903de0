//! Individual checks; each turns verification output into named metrics and
//! a pass flag derived only from those metrics and the configured threshold.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use geq_core::charts::Stepper;
use geq_core::normal_forms::{canonical_chart_map, canonical_form_error, model_eigenvalue_error, sample_points};
use geq_core::projective::l_eigen;
use geq_core::split_glue::{pair_distance, roundtrip, split_pair};
use geq_core::verify::{
    check_conservation_with, check_equivalence_with, check_interlacing_eps, max_nijenhuis, pinned_root_error,
    DriftRow, RunSettings,
};
use geq_core::{Chart, GeqError};

use crate::config::{InterlacingBlock, NijenhuisBlock, NormalFormBlock, RoundtripBlock, SuiteConfig, TrajectoryBlock};
use crate::family::BuiltFamily;

/// Off-block tolerance for split factors.
pub const BLOCK_TOL: f64 = 1e-10;
/// Agreement required between a glued pair's eigenvalues and its factors'.
pub const EIGEN_UNION_TOL: f64 = 1e-9;
/// Grid resolution for the pushforward comparison.
const PUSHFORWARD_PER_AXIS: usize = 8;
/// Velocities tried at a bifurcation point.
const PINNED_VECTORS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, Value>,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, metrics: BTreeMap<String, Value>) -> Self {
        Self { name: name.to_string(), pass, metrics }
    }

    /// A check whose computation itself failed.
    pub fn errored(name: &str, e: &GeqError) -> Self {
        Self::new(name, false, BTreeMap::from([("error".to_string(), json!(e.to_string()))]))
    }
}

/// Smallest grid resolution with at least `n_points` points in `dim` dimensions.
pub fn per_axis_for(n_points: usize, dim: usize) -> usize {
    let mut m = 2usize;
    while m.pow(dim as u32) < n_points {
        m += 1;
    }
    m
}

pub fn run_settings(cfg: &SuiteConfig, b: &TrajectoryBlock) -> RunSettings {
    let mut s = RunSettings::new(b.n_traj, b.t_end, cfg.tol, cfg.seed);
    if let Some(h) = cfg.fixed_step {
        s.stepper = Stepper::Fixed { h };
    }
    s
}

fn metrics<const N: usize>(items: [(&str, Value); N]) -> BTreeMap<String, Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn equivalence(fam: &BuiltFamily, cfg: &SuiteConfig, b: &TrajectoryBlock) -> Result<CheckOutcome, GeqError> {
    let r = check_equivalence_with(&fam.pair, &run_settings(cfg, b))?;
    let pass = r.passes(b.threshold);
    Ok(CheckOutcome::new(
        "equivalence",
        pass,
        metrics([
            ("max_tangential_defect", json!(r.max_tangential_defect)),
            ("threshold", json!(b.threshold)),
            ("trajectories", json!(r.trajectories)),
            ("truncated", json!(r.truncated)),
            ("samples", json!(r.samples)),
            ("t_end", json!(b.t_end)),
            ("defect_histogram", json!(r.defect_histogram)),
        ]),
    ))
}

pub fn conservation(
    fam: &BuiltFamily,
    cfg: &SuiteConfig,
    b: &TrajectoryBlock,
) -> Result<(CheckOutcome, Vec<DriftRow>), GeqError> {
    let r = check_conservation_with(&fam.pair, &run_settings(cfg, b))?;
    let pass = r.passes(b.threshold);
    let out = CheckOutcome::new(
        "conservation",
        pass,
        metrics([
            ("max_drift", json!(r.max_drift)),
            ("threshold", json!(b.threshold)),
            ("t_values", json!(r.t_values)),
            ("i_t_drift", json!(r.i_t_drift)),
            ("root_drift", json!(r.root_drift)),
            ("f_drift", json!(r.f_drift)),
            ("trajectories", json!(r.trajectories)),
            ("truncated", json!(r.truncated)),
            ("t_end", json!(b.t_end)),
        ]),
    );
    Ok((out, r.rows))
}

pub fn interlacing(fam: &BuiltFamily, cfg: &SuiteConfig, b: &InterlacingBlock) -> Result<CheckOutcome, GeqError> {
    let r = check_interlacing_eps(&fam.pair, b.n_points, b.n_vectors, cfg.seed, b.eps)?;
    let mut m = metrics([
        ("samples", json!(r.samples)),
        ("violations", json!(r.violations)),
        ("bracket_failures", json!(r.bracket_failures)),
        ("max_excursion", json!(r.max_excursion)),
        ("pinned", json!(r.pinned)),
        ("max_pinned_error", json!(r.max_pinned_error)),
        ("eps", json!(b.eps)),
    ]);
    let mut pass = r.passes();
    if let Some(x) = fam.bifurcation_point() {
        let e = pinned_root_error(&fam.pair, &x, PINNED_VECTORS, cfg.seed)?;
        m.insert("bifurcation_point".into(), json!(x));
        m.insert("bifurcation_pinned_error".into(), json!(e));
        // at a bifurcation point some root must be pinned
        pass &= e.is_some_and(|e| e <= b.eps);
    }
    Ok(CheckOutcome::new("interlacing", pass, m))
}

pub fn roundtrip_check(fam: &BuiltFamily, b: &RoundtripBlock) -> Result<CheckOutcome, GeqError> {
    let n = fam.pair.dim();
    let rs: Vec<usize> = b.r.clone().unwrap_or_else(|| (1..n).collect());
    if rs.is_empty() {
        return Err(GeqError::InvalidInput("roundtrip needs dim >= 2".into()));
    }
    let pts = fam.pair.chart().grid(per_axis_for(b.n_points, n));
    let mut worst = BTreeMap::new();
    let mut max = 0.0f64;
    for &r in &rs {
        let back = roundtrip(&fam.pair, r)?;
        let e = pts.iter().map(|x| pair_distance(&fam.pair, &back, x)).fold(0.0, f64::max);
        max = max.max(e);
        worst.insert(r.to_string(), json!(e));
    }
    Ok(CheckOutcome::new(
        "roundtrip",
        max < b.threshold,
        metrics([
            ("max_error", json!(max)),
            ("per_r", json!(worst)),
            ("points", json!(pts.len())),
            ("threshold", json!(b.threshold)),
        ]),
    ))
}

pub fn normal_form(fam: &BuiltFamily, b: &NormalFormBlock) -> Result<CheckOutcome, GeqError> {
    let params = fam
        .params
        .as_ref()
        .ok_or_else(|| GeqError::InvalidInput(format!("{} is not a normal-form family", fam.name)))?;
    let pts = sample_points(params, per_axis_for(b.n_points, fam.pair.dim()));
    let eig = model_eigenvalue_error(params, &fam.pair, &pts)?;
    let mut m = metrics([
        ("eigenvalue_error", json!(eig)),
        ("points", json!(pts.len())),
        ("threshold", json!(b.threshold)),
    ]);
    let mut worst = eig;
    if canonical_chart_map(params).is_ok() {
        let e = canonical_form_error(params, PUSHFORWARD_PER_AXIS)?;
        m.insert("pushforward_error".into(), json!(e));
        worst = worst.max(e);
    }
    Ok(CheckOutcome::new("normal_form", worst < b.threshold, m))
}

pub fn nijenhuis(fam: &BuiltFamily, b: &NijenhuisBlock) -> Result<CheckOutcome, GeqError> {
    let pts = fam.pair.chart().shrink(0.9).grid(b.per_axis);
    let n = max_nijenhuis(&fam.pair, &pts)?;
    Ok(CheckOutcome::new(
        "nijenhuis",
        n < b.threshold,
        metrics([("max_torsion", json!(n)), ("points", json!(pts.len())), ("threshold", json!(b.threshold))]),
    ))
}

/// Eigenvalues of a glued pair against the sorted union of its factors'.
pub fn eigen_union(fam: &BuiltFamily, per_axis: usize) -> Result<CheckOutcome, GeqError> {
    if fam.factors.is_empty() {
        return Err(GeqError::InvalidInput(format!("{} has no recorded factors", fam.name)));
    }
    let pts = fam.pair.chart().grid(per_axis);
    let mut worst = 0.0f64;
    for x in &pts {
        let mut union = Vec::with_capacity(x.len());
        let mut off = 0;
        for f in &fam.factors {
            let d = f.dim();
            union.extend(l_eigen(f, &x[off..off + d])?.values);
            off += d;
        }
        union.sort_by(f64::total_cmp);
        let ev = l_eigen(&fam.pair, x)?.values;
        worst = union.iter().zip(&ev).fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    Ok(CheckOutcome::new(
        "eigen_union",
        worst < EIGEN_UNION_TOL,
        metrics([("max_error", json!(worst)), ("points", json!(pts.len())), ("threshold", json!(EIGEN_UNION_TOL))]),
    ))
}

/// Block factors `(h, hbar)` of a split on a grid, plus a block-structure check.
#[derive(Clone, Debug, Serialize)]
pub struct SplitGrid {
    pub r: usize,
    pub first_block: Vec<usize>,
    pub second_block: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub hbar: Vec<Vec<f64>>,
}

pub fn split_check(fam: &BuiltFamily, r: usize, per_axis: usize) -> Result<(CheckOutcome, SplitGrid), GeqError> {
    let s = split_pair(&fam.pair, r)?;
    let points = fam.pair.chart().grid(per_axis);
    let off = points.iter().map(|x| s.off_block_max(x)).fold(0.0, f64::max);
    let grid = SplitGrid {
        r,
        first_block: s.index_split.first.clone(),
        second_block: s.index_split.second.clone(),
        h: points.iter().map(|x| s.h.raw(x)).collect(),
        hbar: points.iter().map(|x| s.hbar.raw(x)).collect(),
        points,
    };
    let out = CheckOutcome::new(
        "split_block_structure",
        off < BLOCK_TOL,
        metrics([
            ("off_block_max", json!(off)),
            ("threshold", json!(BLOCK_TOL)),
            ("split_threshold", json!(s.threshold)),
            ("points", json!(grid.points.len())),
        ]),
    );
    Ok((out, grid))
}

/// Metric values on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct MetricGrid {
    pub chart: Chart,
    pub points: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub gbar: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Vec<f64>>,
}

pub fn metric_grid(fam: &BuiltFamily, per_axis: usize) -> Result<MetricGrid, GeqError> {
    let points = fam.pair.chart().grid(per_axis);
    let eigenvalues = points.iter().map(|x| l_eigen(&fam.pair, x).map(|e| e.values)).collect::<Result<_, _>>()?;
    Ok(MetricGrid {
        chart: fam.pair.chart().clone(),
        g: points.iter().map(|x| fam.pair.g.raw(x)).collect(),
        gbar: points.iter().map(|x| fam.pair.gbar.raw(x)).collect(),
        eigenvalues,
        points,
    })
}
