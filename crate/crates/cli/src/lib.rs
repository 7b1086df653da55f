//! `hyperrigid` command-line front end.
//!
//! Each subcommand parses its flags, runs one experiment and writes a JSON
//! report `{tool, version, command, config, seed, result}` to stdout or to
//! `--out`. A flat `key = value` file given with `--config` supplies default
//! flag values; flags on the command line win. Exit codes: 0 on success, 1 on
//! a domain or validation error, 2 on a usage error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use hyperrigid_core::expr::{parse, ExprError};
use hyperrigid_core::function_system::{
    choquet_boundary, classify_convexity, convexity_tolerance, BoundaryReport, Convexity, FunctionSystem,
    FunctionSystemError,
};
use hyperrigid_core::korovkin::{
    default_probes, korovkin_table, matrix_pinching_family, test_functions, KorovkinError, KorovkinTable, MapFamily,
    NamedFunction, PinchingReport, DEFAULT_PROBES,
};
use hyperrigid_core::lab::{
    almost_dominated_check, discretize_volterra, infinity_obstruction_witness, unitary_generator_demo,
    volterra_spectral_report, DominationParams, DominationReport, LabError, UnitaryDemo, VolterraReport,
};
use hyperrigid_core::linalg::{ComplexMatrix, HermitianMatrix};
use hyperrigid_core::minimax::{
    boundary_envelope, verify_minimax, EnvelopeReport, FiniteFunctionSystem, MinimaxError, MinimaxReport,
};
use hyperrigid_core::rigidity::{rigidity_verdict, RigidityError, Verdict};
use hyperrigid_core::uep::{default_probe, uep_check, OperatorSystemM, UepError, UepParams, UepReport};

pub const TOOL: &str = "hyperrigid";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit code for domain and validation errors.
pub const EXIT_DOMAIN: i32 = 1;
/// Exit code for usage errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    FunctionSystem(#[from] FunctionSystemError),
    #[error(transparent)]
    Rigidity(#[from] RigidityError),
    #[error(transparent)]
    Uep(#[from] UepError),
    #[error(transparent)]
    Korovkin(#[from] KorovkinError),
    #[error(transparent)]
    Minimax(#[from] MinimaxError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "hyperrigid",
    version,
    about = "Experiments on hyperrigidity, boundary points and UCP maps"
)]
pub struct Cli {
    /// Flat `key = value` file of default flag values; `command = <name>`
    /// selects the subcommand when none is given.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: RunConfig,
}

/// One experiment run: the subcommand and its resolved flags.
#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum RunConfig {
    /// Classify f on a grid as strictly convex, strictly concave or neither.
    Convexity(ConvexityArgs),
    /// Flag the Choquet boundary points of span{1, x, f} on a grid.
    Boundary(GraphArgs),
    /// Build the UCP counterexample map for a non-extreme graph point.
    Counterexample(GraphArgs),
    /// Search for a UCP map that fixes span{1, A, ...} but moves a probe.
    Uep(UepArgs),
    /// Spectral report and obstruction state for the discretized Volterra operator.
    Volterra(VolterraArgs),
    /// UEP search on systems spanned by random unitaries.
    IsometryDemo(IsometryArgs),
    /// Korovkin error tables for Bernstein operators or block pinchings.
    Korovkin(KorovkinArgs),
    /// Minimax identity and upper envelopes on a finite function system.
    Minimax(MinimaxArgs),
    /// Almost-domination of a diagonal p by span{V, V†} or span{V, V†, V², V²†}.
    Dominate(DominateArgs),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Convexity(_) => "convexity",
            RunConfig::Boundary(_) => "boundary",
            RunConfig::Counterexample(_) => "counterexample",
            RunConfig::Uep(_) => "uep",
            RunConfig::Volterra(_) => "volterra",
            RunConfig::IsometryDemo(_) => "isometry-demo",
            RunConfig::Korovkin(_) => "korovkin",
            RunConfig::Minimax(_) => "minimax",
            RunConfig::Dominate(_) => "dominate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            RunConfig::Convexity(a) => &a.graph.common,
            RunConfig::Boundary(a) | RunConfig::Counterexample(a) => &a.common,
            RunConfig::Uep(a) => &a.common,
            RunConfig::Volterra(a) => &a.common,
            RunConfig::IsometryDemo(a) => &a.common,
            RunConfig::Korovkin(a) => &a.common,
            RunConfig::Minimax(a) => &a.common,
            RunConfig::Dominate(a) => &a.common,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Seed of every random choice; recorded in the report.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GraphArgs {
    /// Function of x, e.g. "abs(x-1/2)".
    #[arg(long)]
    pub f: String,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [0.0, 1.0])]
    pub interval: Vec<f64>,
    /// Number of grid points.
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(3..=100_001))]
    pub grid: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ConvexityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    /// Threshold on second differences; defaults to 1e-10 times the value scale.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct UepArgs {
    /// Diagonal of A, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub diag: Vec<f64>,
    /// Generators: 1, A, A^k or A* (comma separated).
    #[arg(long, value_delimiter = ',', default_values = ["1", "A"])]
    pub span: Vec<String>,
    /// Probes in the same notation; defaults to the lowest power of A outside the span.
    #[arg(long, value_delimiter = ',')]
    pub probe: Vec<String>,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=1000))]
    pub restarts: u32,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.2, 0.8])]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub violation_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub fix_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct VolterraArgs {
    /// Discretization size.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(16..=1024))]
    pub n: u32,
    /// Include the density matrix of the obstruction state.
    #[arg(long)]
    pub with_state: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct IsometryArgs {
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=6))]
    pub n: u32,
    /// Number of unitaries.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub k: u32,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..=1000))]
    pub restarts: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bernstein,
    Pinching,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct KorovkinArgs {
    #[arg(long, value_enum, default_value_t = Family::Bernstein)]
    pub family: Family,
    /// Bernstein degrees.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000])]
    pub degrees: Vec<usize>,
    /// Evaluation grid size for Bernstein errors.
    #[arg(long, default_value_t = 1001, value_parser = clap::value_parser!(u32).range(2..=100_001))]
    pub grid: u32,
    /// Probe functions, separated by ';'.
    #[arg(long, value_delimiter = ';')]
    pub probes: Vec<String>,
    /// Matrix size for pinchings.
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..=256))]
    pub d: u32,
    /// Block counts for pinchings.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 6, 12])]
    pub blocks: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct MinimaxArgs {
    /// Sample points, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.0, 0.5, 1.0])]
    pub points: Vec<f64>,
    /// Basis functions besides the unit, separated by ';'.
    #[arg(long, value_delimiter = ';', default_values = ["x"])]
    pub functions: Vec<String>,
    /// The state is evaluation at this point index, unless --mixture is given.
    #[arg(long, default_value_t = 1)]
    pub state_point: usize,
    /// Weights on the points defining the state.
    #[arg(long, value_delimiter = ',')]
    pub mixture: Vec<f64>,
    /// The function x whose extensions are compared.
    #[arg(long, default_value = "x^2")]
    pub x: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    /// span{V, V†}
    V,
    /// span{V, V†, V², V²†}
    V2,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DominateArgs {
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(2..=128))]
    pub n: u32,
    #[arg(long, value_enum, default_value_t = Space::V)]
    pub space: Space,
    /// p = diag(p(t_i)) at the midpoints t_i of [0, 1]; must be nonnegative.
    #[arg(long, default_value = "1+x")]
    pub p: String,
    /// Rescale p so its largest entry is half of λ_min(B²).
    #[arg(long)]
    pub below_margin: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1e3)]
    pub radius: f64,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u32).range(1..=10_000))]
    pub max_iterations: u32,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub seed: u64,
    pub result: T,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DOMAIN
        }
    }
}

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("config line {}: expected key = value, got {line:?}", i + 1));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Result<Option<PathBuf>, String> {
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return argv
                .get(i + 1)
                .map(|p| Some(PathBuf::from(p)))
                .ok_or_else(|| "--config needs a file path".to_string());
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(PathBuf::from(p)));
        }
    }
    Ok(None)
}

/// Splices the config file's values in after the subcommand, skipping keys
/// that are also given on the command line.
fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let pairs = parse_config(&text)?;
    let names = [
        "convexity",
        "boundary",
        "counterexample",
        "uep",
        "volterra",
        "isometry-demo",
        "korovkin",
        "minimax",
        "dominate",
    ];
    let given: Vec<String> = argv
        .iter()
        .filter_map(|a| {
            a.to_str()?
                .strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or(f).to_string())
        })
        .collect();
    let mut argv = argv;
    let mut pos = argv.iter().position(|a| names.contains(&a.to_string_lossy().as_ref()));
    let mut flags = Vec::new();
    for (k, v) in pairs {
        if k == "command" {
            if pos.is_none() {
                argv.insert(1, OsString::from(&v));
                pos = Some(1);
            }
            continue;
        }
        if given.contains(&k) {
            continue;
        }
        match v.as_str() {
            "true" => flags.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                flags.push(OsString::from(format!("--{k}")));
                flags.extend(v.split_whitespace().map(OsString::from));
            }
        }
    }
    let Some(pos) = pos else {
        return Err(format!("config {} names no command and none was given", path.display()));
    };
    argv.splice(pos + 1..pos + 1, flags);
    Ok(argv)
}

/// Runs the command and returns the serialized report.
pub fn report_json(config: &RunConfig) -> Result<String, CliError> {
    let seed = config.common().seed;
    let result = match config {
        RunConfig::Convexity(a) => to_value(convexity(a)?),
        RunConfig::Boundary(a) => to_value(boundary(a)?),
        RunConfig::Counterexample(a) => to_value(counterexample(a)?),
        RunConfig::Uep(a) => to_value(uep(a)?),
        RunConfig::Volterra(a) => to_value(volterra(a)?),
        RunConfig::IsometryDemo(a) => to_value(isometry(a)?),
        RunConfig::Korovkin(a) => korovkin(a),
        RunConfig::Minimax(a) => to_value(minimax(a)?),
        RunConfig::Dominate(a) => to_value(dominate(a)?),
    }?;
    let env = Envelope {
        tool: TOOL,
        version: VERSION,
        command: config.name(),
        config,
        seed,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

fn to_value<T: Serialize>(v: T) -> Result<serde_json::Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

fn execute(config: &RunConfig) -> Result<(), CliError> {
    let json = report_json(config)?;
    write_report(config.common().out.as_deref(), &json)
}

fn write_report(out: Option<&Path>, json: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, json).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn function_system(a: &GraphArgs) -> Result<FunctionSystem, CliError> {
    Ok(FunctionSystem::new(
        a.interval[0],
        a.interval[1],
        parse(&a.f)?,
        a.grid as usize,
    )?)
}

#[derive(Debug, Serialize)]
pub struct ConvexityResult {
    pub convexity: Convexity,
    pub tolerance: f64,
}

fn convexity(a: &ConvexityArgs) -> Result<ConvexityResult, CliError> {
    let fs = function_system(&a.graph)?;
    let tolerance = match a.tol {
        Some(t) if t.is_finite() && t >= 0.0 => t,
        Some(t) => {
            return Err(CliError::Input(format!(
                "--tol must be finite and nonnegative, got {t}"
            )))
        }
        None => convexity_tolerance(&fs.sample()?),
    };
    Ok(ConvexityResult {
        convexity: classify_convexity(&fs, tolerance)?,
        tolerance,
    })
}

#[derive(Debug, Serialize)]
pub struct BoundaryResult {
    pub boundary: BoundaryReport,
    /// Flags unchanged on the shared points of the `2m - 1` grid.
    pub refinement_stable: bool,
}

fn boundary(a: &GraphArgs) -> Result<BoundaryResult, CliError> {
    let fs = function_system(a)?;
    Ok(BoundaryResult {
        boundary: choquet_boundary(&fs)?,
        refinement_stable: fs.refinement_is_stable()?,
    })
}

#[derive(Debug, Serialize)]
pub struct CounterexampleResult {
    pub verdict: Verdict,
    pub deviation: Option<f64>,
    pub dimension: Option<usize>,
}

fn counterexample(a: &GraphArgs) -> Result<CounterexampleResult, CliError> {
    let verdict = rigidity_verdict(&function_system(a)?)?;
    let (deviation, dimension) = match &verdict {
        Verdict::RigidCandidate => (None, None),
        Verdict::NotRigid { report } => (Some(report.deviation), Some(report.dimension())),
    };
    Ok(CounterexampleResult {
        verdict,
        deviation,
        dimension,
    })
}

/// Parses `1`, `A`, `A*` or `A^k` (also `Ak`) into a matrix.
pub fn parse_power(token: &str, a: &ComplexMatrix) -> Result<ComplexMatrix, CliError> {
    let t = token.trim();
    let bad = || CliError::Input(format!("unknown generator {t:?}: expected 1, A, A* or A^k"));
    if t == "1" {
        return Ok(ComplexMatrix::identity(a.rows()));
    }
    if t == "A*" {
        return Ok(a.adjoint());
    }
    let rest = t.strip_prefix('A').ok_or_else(bad)?;
    let k: u32 = if rest.is_empty() {
        1
    } else {
        rest.trim_start_matches('^').parse().map_err(|_| bad())?
    };
    if k > 64 {
        return Err(bad());
    }
    let mut p = ComplexMatrix::identity(a.rows());
    for _ in 0..k {
        p = p.matmul(a);
    }
    Ok(p)
}

#[derive(Debug, Serialize)]
pub struct UepResult {
    pub n: usize,
    pub dimension: usize,
    pub probe_labels: Vec<String>,
    /// Whether every probe already lies in the span (then nothing can move it).
    pub probes_in_span: bool,
    pub report: UepReport,
}

fn uep(a: &UepArgs) -> Result<UepResult, CliError> {
    if a.diag.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input("--diag entries must be finite".into()));
    }
    let n = a.diag.len();
    let mat = ComplexMatrix::from_real_diag(&a.diag);
    let gens = a
        .span
        .iter()
        .map(|t| parse_power(t, &mat))
        .collect::<Result<Vec<_>, _>>()?;
    let s = OperatorSystemM::new(n, gens)?;
    let (probes, probe_labels) = if a.probe.is_empty() {
        match default_probe(&s, &mat) {
            Some(p) => {
                let k = (2..=n.max(2))
                    .find(|&k| parse_power(&format!("A^{k}"), &mat).is_ok_and(|q| q == p))
                    .unwrap_or(2);
                (vec![p], vec![format!("A^{k}")])
            }
            None => {
                let k = n.max(2) + 1;
                (vec![parse_power(&format!("A^{k}"), &mat)?], vec![format!("A^{k}")])
            }
        }
    } else {
        let ps = a
            .probe
            .iter()
            .map(|t| parse_power(t, &mat))
            .collect::<Result<Vec<_>, _>>()?;
        (ps, a.probe.clone())
    };
    let probes_in_span = probes.iter().all(|p| s.contains(p));
    let params = UepParams {
        restarts: a.restarts as usize,
        epsilons: a.epsilons.clone(),
        violation_tol: a.violation_tol,
        fix_tol: a.fix_tol,
        seed: a.common.seed,
        ..UepParams::default()
    };
    let report = uep_check(&s, &probes, &params)?;
    Ok(UepResult {
        n,
        dimension: s.dimension(),
        probe_labels,
        probes_in_span,
        report,
    })
}

#[derive(Debug, Serialize)]
pub struct ObstructionSummary {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub rho_a: f64,
    pub rho_b: f64,
    pub rho_one: f64,
    pub rho_v2_sym: f64,
    pub negative_margin: f64,
    pub density: Option<HermitianMatrix>,
}

#[derive(Debug, Serialize)]
pub struct VolterraResult {
    pub spectral: VolterraReport,
    pub obstruction: ObstructionSummary,
}

fn volterra(a: &VolterraArgs) -> Result<VolterraResult, CliError> {
    let n = a.n as usize;
    let spectral = volterra_spectral_report(n)?;
    let w = infinity_obstruction_witness(&discretize_volterra(n)?)?;
    Ok(VolterraResult {
        spectral,
        obstruction: ObstructionSummary {
            lambda_plus: w.lambda_plus,
            lambda_minus: w.lambda_minus,
            rho_a: w.rho_a,
            rho_b: w.rho_b,
            rho_one: w.rho_one,
            rho_v2_sym: w.rho_v2_sym,
            negative_margin: w.negative_margin,
            density: a.with_state.then_some(w.state.density),
        },
    })
}

fn isometry(a: &IsometryArgs) -> Result<UnitaryDemo, CliError> {
    let params = UepParams {
        restarts: a.restarts as usize,
        ..UepParams::default()
    };
    Ok(unitary_generator_demo(
        a.n as usize,
        a.k as usize,
        a.common.seed,
        &params,
    )?)
}

fn named_list(texts: &[String]) -> Result<Vec<NamedFunction>, CliError> {
    Ok(texts
        .iter()
        .map(|t| NamedFunction::parse(t))
        .collect::<Result<Vec<_>, _>>()?)
}

#[derive(Debug, Serialize)]
pub struct BernsteinResult {
    pub table: KorovkinTable,
    pub probes_follow_tests: bool,
}

fn korovkin(a: &KorovkinArgs) -> Result<serde_json::Value, CliError> {
    match a.family {
        Family::Bernstein => {
            let probes = if a.probes.is_empty() {
                default_probes()
            } else {
                named_list(&a.probes)?
            };
            let table = korovkin_table(
                &MapFamily::Bernstein { grid: a.grid as usize },
                &test_functions(),
                &probes,
                &a.degrees,
            )?;
            to_value(BernsteinResult {
                probes_follow_tests: table.probes_follow_tests(),
                table,
            })
        }
        Family::Pinching => {
            let probe = match a.probes.as_slice() {
                [] => NamedFunction::parse(DEFAULT_PROBES[0])?,
                [p] => NamedFunction::parse(p)?,
                _ => return Err(CliError::Input("the pinching family takes a single probe".into())),
            };
            let report: PinchingReport = matrix_pinching_family(a.d as usize, &a.blocks, &probe, a.common.seed)?;
            to_value(report)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MinimaxResult {
    pub points: Vec<f64>,
    pub state: Vec<f64>,
    pub x: Vec<f64>,
    pub minimax: MinimaxReport,
    /// Upper envelope of x at every point.
    pub envelopes: Vec<EnvelopeReport>,
}

fn minimax(a: &MinimaxArgs) -> Result<MinimaxResult, CliError> {
    let eval_on = |text: &str| -> Result<Vec<f64>, CliError> {
        let e = parse(text)?;
        Ok(a.points.iter().map(|&p| e.eval(p)).collect::<Result<Vec<_>, _>>()?)
    };
    let mut basis = vec![vec![1.0; a.points.len()]];
    for f in &a.functions {
        basis.push(eval_on(f)?);
    }
    let fs = FiniteFunctionSystem::new(a.points.clone(), basis)?;
    let state = if a.mixture.is_empty() {
        if a.state_point >= fs.len() {
            return Err(MinimaxError::BadPoint {
                index: a.state_point,
                len: fs.len(),
            }
            .into());
        }
        fs.evaluation(a.state_point)
    } else {
        if a.mixture.len() != fs.len() {
            return Err(MinimaxError::Length {
                expected: fs.len(),
                found: a.mixture.len(),
            }
            .into());
        }
        let total: f64 = a.mixture.iter().sum();
        if a.mixture.iter().any(|w| !(*w >= 0.0)) || !((total - 1.0).abs() <= 1e-12) {
            return Err(CliError::Input(
                "--mixture weights must be nonnegative and sum to 1".into(),
            ));
        }
        fs.mixture(&a.mixture)
    };
    let x = eval_on(&a.x)?;
    let minimax = verify_minimax(&fs, &state, &x, a.tol)?;
    let envelopes = (0..fs.len())
        .map(|p| boundary_envelope(&fs, p, &x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MinimaxResult {
        points: a.points.clone(),
        state,
        x,
        minimax,
        envelopes,
    })
}

#[derive(Debug, Serialize)]
pub struct DominateResult {
    pub n: usize,
    /// `ρ(p)` for the state that kills span{V, V†}: no `s` in that space does
    /// better than this.
    pub state_lower_bound: f64,
    pub report: DominationReport,
}

fn dominate(a: &DominateArgs) -> Result<DominateResult, CliError> {
    let n = a.n as usize;
    let d = discretize_volterra(n)?;
    let e = parse(&a.p)?;
    let diag = (0..n)
        .map(|i| e.eval((i as f64 + 0.5) / n as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let mut diag = diag;
    let w = infinity_obstruction_witness(&d)?;
    if a.below_margin {
        let top = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if top == 0.0 {
            return Err(CliError::Input("--below-margin needs a nonzero p".into()));
        }
        let s = 0.5 * w.negative_margin / top;
        diag.iter_mut().for_each(|v| *v *= s);
    }
    let p = HermitianMatrix::from_real_diag(&diag);
    let mut space = vec![d.v.clone(), d.v.adjoint()];
    if let Space::V2 = a.space {
        let v2 = d.v.matmul(&d.v);
        space.push(v2.adjoint());
        space.push(v2);
    }
    let params = DominationParams {
        radius: a.radius,
        max_iterations: a.max_iterations as usize,
        ..DominationParams::default()
    };
    Ok(DominateResult {
        n,
        state_lower_bound: w.state.expect(p.as_matrix()).re,
        report: almost_dominated_check(&space, &p, &a.eps, &params)?,
    })
}
