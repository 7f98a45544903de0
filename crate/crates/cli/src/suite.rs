//! Running a selection of checks and persisting the report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use geq_core::verify::DriftRow;

use crate::checks::{self, CheckOutcome};
use crate::config::{CliError, InterlacingBlock, SuiteConfig, TrajectoryBlock};
use crate::family::{build_family, BuiltFamily};

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const CSV_FILE: &str = "drifts.csv";
pub const GRID_FILE: &str = "grid.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    /// JSON report plus a flat CSV of per-trajectory drifts.
    Csv,
}

/// Which checks a command runs.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Every configured block, or the default set when none is configured.
    Suite,
    Equivalence,
    Conservation,
    Interlacing,
    Roundtrip,
    /// Eigenvalue union plus equivalence of a glued family.
    Glue,
    Split { r: usize, per_axis: usize },
    Build { per_axis: usize },
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub fixed_step: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SuiteConfig) -> Result<(), CliError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(h) = self.fixed_step {
            cfg.fixed_step = Some(h);
        }
        cfg.validate()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub command: String,
    /// SHA-256 of the config bytes.
    pub config_hash: String,
    pub checks: Vec<CheckOutcome>,
    pub provenance: BTreeMap<String, Value>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            2
        }
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything a run produced; files are written by [`write_outputs`].
pub struct RunOutput {
    pub report: SuiteReport,
    pub timings: BTreeMap<String, f64>,
    pub rows: Vec<DriftRow>,
    /// Extra artifact (file name, JSON) for the build and split commands.
    pub artifact: Option<(&'static str, Value)>,
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.0.insert(name.to_string(), t.elapsed().as_secs_f64());
        r
    }
}

fn guarded(name: &str, r: Result<CheckOutcome, geq_core::GeqError>) -> CheckOutcome {
    r.unwrap_or_else(|e| CheckOutcome::errored(name, &e))
}

/// Build the family and run the selected checks. Build failures are errors;
/// failures inside a check are recorded as a failed check.
pub fn run_suite(cfg: &SuiteConfig, config_bytes: &[u8], command: &str, sel: &Selection) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let mut timer = Timer(BTreeMap::new());
    let fam: BuiltFamily = timer.time("build", || build_family(&cfg.family))?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut artifact = None;

    let defaults = !cfg.has_checks();
    let equivalence = |timer: &mut Timer, b: &TrajectoryBlock| {
        timer.time("equivalence", || guarded("equivalence", checks::equivalence(&fam, cfg, b)))
    };
    match sel {
        Selection::Suite => {
            let want_equiv = cfg.equivalence.clone().or(defaults.then(TrajectoryBlock::default));
            let want_cons = cfg.conservation.clone().or(defaults.then(TrajectoryBlock::default));
            let want_inter = cfg.interlacing.clone().or(defaults.then(InterlacingBlock::default));
            if let Some(b) = want_equiv {
                checks.push(equivalence(&mut timer, &b));
            }
            if let Some(b) = want_cons {
                let (c, r) = conservation(&mut timer, &fam, cfg, &b);
                checks.push(c);
                rows = r;
            }
            if let Some(b) = want_inter {
                checks.push(timer.time("interlacing", || guarded("interlacing", checks::interlacing(&fam, cfg, &b))));
            }
            if let Some(b) = &cfg.roundtrip {
                checks.push(timer.time("roundtrip", || guarded("roundtrip", checks::roundtrip_check(&fam, b))));
            }
            if let Some(b) = &cfg.normal_form {
                checks.push(timer.time("normal_form", || guarded("normal_form", checks::normal_form(&fam, b))));
            }
            if let Some(b) = &cfg.nijenhuis {
                checks.push(timer.time("nijenhuis", || guarded("nijenhuis", checks::nijenhuis(&fam, b))));
            }
        }
        Selection::Equivalence => checks.push(equivalence(&mut timer, &cfg.equivalence.clone().unwrap_or_default())),
        Selection::Conservation => {
            let (c, r) = conservation(&mut timer, &fam, cfg, &cfg.conservation.clone().unwrap_or_default());
            checks.push(c);
            rows = r;
        }
        Selection::Interlacing => {
            let b = cfg.interlacing.clone().unwrap_or_default();
            checks.push(timer.time("interlacing", || guarded("interlacing", checks::interlacing(&fam, cfg, &b))));
        }
        Selection::Roundtrip => {
            let b = cfg.roundtrip.clone().unwrap_or_default();
            checks.push(timer.time("roundtrip", || guarded("roundtrip", checks::roundtrip_check(&fam, &b))));
        }
        Selection::Glue => {
            checks.push(timer.time("eigen_union", || guarded("eigen_union", checks::eigen_union(&fam, 4))));
            checks.push(equivalence(&mut timer, &cfg.equivalence.clone().unwrap_or_default()));
        }
        Selection::Split { r, per_axis } => match timer.time("split", || checks::split_check(&fam, *r, *per_axis)) {
            Ok((c, grid)) => {
                checks.push(c);
                artifact = Some((SPLIT_FILE, serde_json::to_value(grid).expect("serializable")));
            }
            Err(e) => checks.push(CheckOutcome::errored("split_block_structure", &e)),
        },
        Selection::Build { per_axis } => {
            let grid = timer.time("grid", || checks::metric_grid(&fam, *per_axis))?;
            artifact = Some((GRID_FILE, serde_json::to_value(grid).expect("serializable")));
        }
    }

    let mut provenance = BTreeMap::new();
    provenance.insert("library_version".to_string(), json!(env!("CARGO_PKG_VERSION")));
    provenance.insert("family".to_string(), json!(fam.name));
    provenance.insert("pair".to_string(), json!(fam.pair.provenance));
    provenance.insert("dim".to_string(), json!(fam.pair.dim()));
    provenance.insert("chart".to_string(), json!(fam.pair.chart()));
    provenance.insert("seed".to_string(), json!(cfg.seed));
    provenance.insert("integrator_tol".to_string(), json!(cfg.tol));
    provenance.insert("fixed_step".to_string(), json!(cfg.fixed_step));
    timer.0.insert("total".to_string(), start.elapsed().as_secs_f64());
    Ok(RunOutput {
        report: SuiteReport {
            schema_version: crate::config::SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: config_hash(config_bytes),
            checks,
            provenance,
        },
        timings: timer.0,
        rows,
        artifact,
    })
}

fn conservation(timer: &mut Timer, fam: &BuiltFamily, cfg: &SuiteConfig, b: &TrajectoryBlock) -> (CheckOutcome, Vec<DriftRow>) {
    timer.time("conservation", || match checks::conservation(fam, cfg, b) {
        Ok(x) => x,
        Err(e) => (CheckOutcome::errored("conservation", &e), vec![]),
    })
}

pub fn drift_csv(rows: &[DriftRow]) -> String {
    let mut s = String::from("index,quantity,start_value,end_value,rel_drift\n");
    for r in rows {
        s.push_str(&format!("{},{},{:e},{:e},{:e}\n", r.index, r.quantity, r.start_value, r.end_value, r.rel_drift));
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

/// Write the report, the timings sidecar and the optional CSV / artifact.
pub fn write_outputs(out: &RunOutput, dir: &Path, format: Format) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join(REPORT_FILE), &pretty(&out.report))?;
    write_file(&dir.join(TIMINGS_FILE), &pretty(&out.timings))?;
    if format == Format::Csv {
        write_file(&dir.join(CSV_FILE), drift_csv(&out.rows).as_bytes())?;
    }
    if let Some((name, v)) = &out.artifact {
        write_file(&dir.join(name), &pretty(v))?;
    }
    Ok(())
}
