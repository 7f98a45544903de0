//! Argument parsing and exit-code mapping.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, CliError, FamilySpec, SphereSpec, SuiteConfig};
use crate::suite::{run_suite, write_outputs, Format, Overrides, Selection};

#[derive(Parser, Debug)]
#[command(name = "geq", version, about = "Verification suite for projectively equivalent metric pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum FormatArg {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Suite configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integrator tolerance; overrides the config.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Use fixed-step RK4 with this step instead of the adaptive integrator.
    #[arg(long)]
    pub fixed_step: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Emit metric values and L-eigenvalues on a grid.
    Build {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        per_axis: usize,
    },
    /// Unparametrized-geodesic test.
    CheckEquivalence(Common),
    /// Drift of the integrals along geodesics.
    CheckConservation(Common),
    /// Roots of the integral polynomial against eigenvalue brackets.
    CheckInterlacing(Common),
    /// Split into block factors and emit them on a grid.
    Split {
        #[command(flatten)]
        common: Common,
        /// Size of the first block.
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 4)]
        per_axis: usize,
    },
    /// Check a glued family (eigenvalue union and equivalence).
    Glue(Common),
    /// Glue after split, compared with the input.
    Roundtrip(Common),
    /// Default suite on a Beltrami pair given on the command line.
    Beltrami {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Diagonal (n + 1 entries) or row-major linear map.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<f64>,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pole: Option<Vec<f64>>,
    },
    /// Default suite on a product of spheres, each factor as `n:a0,a1,...`.
    Product {
        #[command(flatten)]
        common: Common,
        #[arg(long = "factor", required = true, allow_hyphen_values = true)]
        factors: Vec<String>,
    },
    /// Run every check configured in `--config`.
    Suite(Common),
}

fn parse_factor(s: &str) -> Result<SphereSpec, CliError> {
    let bad = |m: &str| CliError::schema("factor", format!("{m} in `{s}` (expected n:a0,a1,...)"));
    let (n, a) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
    let n = n.trim().parse().map_err(|_| bad("invalid n"))?;
    let a = a.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("invalid entry"))?;
    Ok(SphereSpec { n, a, half_width: None, pole: None })
}

/// A config synthesized from command-line family arguments; its TOML form is
/// what gets hashed.
fn synthesized(family: FamilySpec, common: &Common) -> Result<(SuiteConfig, Vec<u8>), CliError> {
    if common.config.is_some() {
        return Err(CliError::schema("config", "this command takes its family from the command line"));
    }
    let seed = common.seed.ok_or_else(|| CliError::schema("seed", "--seed is required without a config"))?;
    let cfg = SuiteConfig::for_family(family, seed);
    let bytes = toml::to_string(&cfg).map_err(|e| CliError::schema("family", e.to_string()))?.into_bytes();
    Ok((cfg, bytes))
}

fn from_file(common: &Common) -> Result<(SuiteConfig, Vec<u8>), CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::schema("config", "--config is required"))?;
    load_config(path)
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        tol: c.tol,
        out: c.out.clone(),
        format: match c.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        fixed_step: c.fixed_step,
    }
}

/// Run a parsed command; returns the process exit code (0 pass, 2 check
/// failure, errors map to 1 in [`main_with`]).
pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let (name, common, sel, loaded) = match cli.command {
        Command::Build { common, per_axis } => {
            let l = from_file(&common)?;
            ("build", common, Selection::Build { per_axis }, l)
        }
        Command::CheckEquivalence(c) => ("check-equivalence", c.clone(), Selection::Equivalence, from_file(&c)?),
        Command::CheckConservation(c) => ("check-conservation", c.clone(), Selection::Conservation, from_file(&c)?),
        Command::CheckInterlacing(c) => ("check-interlacing", c.clone(), Selection::Interlacing, from_file(&c)?),
        Command::Split { common, r, per_axis } => {
            let l = from_file(&common)?;
            ("split", common, Selection::Split { r, per_axis }, l)
        }
        Command::Glue(c) => ("glue", c.clone(), Selection::Glue, from_file(&c)?),
        Command::Roundtrip(c) => ("roundtrip", c.clone(), Selection::Roundtrip, from_file(&c)?),
        Command::Suite(c) => ("suite", c.clone(), Selection::Suite, from_file(&c)?),
        Command::Beltrami { common, n, a, half_width, pole } => {
            let l = synthesized(FamilySpec::Beltrami(SphereSpec { n, a, half_width, pole }), &common)?;
            ("beltrami", common, Selection::Suite, l)
        }
        Command::Product { common, factors } => {
            let factors = factors.iter().map(|s| parse_factor(s)).collect::<Result<Vec<_>, _>>()?;
            let l = synthesized(FamilySpec::Product { factors }, &common)?;
            ("product", common, Selection::Suite, l)
        }
    };
    let (mut cfg, bytes) = loaded;
    if sel == Selection::Glue && !matches!(cfg.family, FamilySpec::Glue { .. }) {
        return Err(CliError::schema("family.kind", "the glue command needs a `glue` family"));
    }
    let ov = overrides(&common);
    ov.apply(&mut cfg)?;
    let out = run_suite(&cfg, &bytes, name, &sel)?;
    let dir = ov.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&out, &dir, ov.format)?;
    for c in &out.report.checks {
        eprintln!("{}: {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    Ok(out.report.exit_code())
}

/// Parse `args` and run; every error is reported on stderr and yields 1.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
