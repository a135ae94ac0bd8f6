//! The `bjl` command line: `simulate`, `density`, `verify` and `replay`.
//!
//! Every run writes a `manifest.json` holding the fully resolved command, so
//! `bjl replay manifest.json` reproduces the outputs byte for byte. Options
//! may also come from a flat `key = value` file given with `--config`; keys
//! are long flag names and explicit flags win. `BJL_SEED` supplies the seed
//! when `--seed` is not given.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
//! 3 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::coords::{lambda_to_phi, phi_to_lambda, LambdaPoint};
use crate::dynamics::{simulate_ensemble, PathSample, Scheme, SimConfig, StartPoint};
use crate::error::{Error, Result};
use crate::experiments::{
    run_appendix, run_density_vs_sim, run_hitting, run_identities, run_stationary, AppendixOptions,
    DensityOptions, HittingOptions, HittingPreset, StationaryOptions, SuiteReport,
};
use crate::orthopoly::build_basis;
use crate::output::{write_density_csv, write_json, write_paths_csv, write_paths_json, DensityRow};
use crate::roots::{AlcovePoint, ModelParams};
use crate::semigroup::{
    default_partition_cutoff, default_truncation, km_density_beta2, partition_sum_density_beta2,
    stationary_log_density_unnormalized, stationary_normalizer, univariate_density, DensityEvaluation,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Relative tolerance for the `partition2` vs `km2` agreement flag.
pub const AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "bjl", version, about = "Simulate and verify beta-Jacobi particle systems")]
pub struct Cli {
    /// Flat `key = value` option file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for ensembles (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Manifest location; defaults to `manifest.json` beside `--out`, or in
    /// the working directory.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an ensemble of paths.
    Simulate(SimulateArgs),
    /// Tabulate a closed-form density on a grid.
    Density(DensityArgs),
    /// Run a verification suite and write its JSON report.
    Verify(VerifyArgs),
    /// Rerun the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coords {
    Phi,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Brownian motion in the alcove: beta = 2, q = m + 1/2, p = m + 3/2.
    #[arg(long)]
    pub alcove_bm: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coordinates of `--start` and of the written states.
    #[arg(long, value_enum, default_value_t = Coords::Phi)]
    pub coords: Coords,
    /// Integrator: the angular scheme or the eigenvalue scheme.
    #[arg(long, value_enum, default_value_t = Coords::Phi)]
    pub scheme: Coords,
    /// Comma-separated start point; defaults to the alcove centre.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub boundary_tol: f64,
    #[arg(long, default_value_t = 40)]
    pub max_halvings: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Transition density of one particle, any exponents.
    Univariate,
    /// Karlin–McGregor determinant at beta = 2.
    Km2,
    /// Partition expansion at beta = 2.
    Partition2,
    /// Normalised stationary density.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    pub mode: DensityMode,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// `N` for the midpoints of `N` equal cells of `[0, 1]`, or `a:b:N` for
    /// `N` evenly spaced points from `a` to `b`.
    #[arg(long, default_value = "50")]
    pub grid: String,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated initial eigenvalues; defaults to the image of the
    /// alcove centre.
    #[arg(long)]
    pub theta: Option<String>,
    /// Series order (partition cutoff for `partition2`).
    #[arg(long)]
    pub trunc: Option<usize>,
    /// Quadrature nodes per axis for the stationary normaliser.
    #[arg(long, default_value_t = 201)]
    pub quad_nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Hitting,
    Stationary,
    Appendix,
    Identities,
    DensityVsSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ThresholdGrid,
    Monotonicity,
    RankOne,
}

impl From<Preset> for HittingPreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::ThresholdGrid => HittingPreset::ThresholdGrid,
            Preset::Monotonicity => HittingPreset::Monotonicity,
            Preset::RankOne => HittingPreset::RankOne,
        }
    }
}

/// Knobs left unset take the suite's defaults; the manifest records the
/// values actually used.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Random points per dimension for the appendix bound.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    pub manifest_file: PathBuf,
    /// Write the primary output here instead of the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    /// The resolved command; replaying it reproduces `outputs`.
    pub run: Command,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

/// Result of a dispatched command.
struct Outcome {
    command: Command,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    metadata: serde_json::Map<String, serde_json::Value>,
    passed: bool,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Diagnostics go to stderr.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: invalid parameter: --threads must be >= 1");
            return EXIT_USAGE;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERDICT,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Entry point of the `bjl` binary.
pub fn main_from_env() -> i32 {
    run(std::env::args())
}

const GLOBAL_VALUE_FLAGS: [&str; 3] = ["--config", "--threads", "--manifest"];

fn subcommand_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if GLOBAL_VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn flag_given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key = value", n + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() {
            return Err(Error::InvalidParameter(format!("config line {}: empty key", n + 1)));
        }
        pairs.push((k, v.trim().to_string()));
    }
    Ok(pairs)
}

/// Appends config-file options and `BJL_SEED` for flags absent from `args`.
fn expand_args(mut args: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = subcommand_position(&args) else {
        return Ok(args);
    };
    let sub = args[pos].clone();
    let explicit = args.clone();
    let seeded = matches!(sub.as_str(), "simulate" | "verify");
    let mut extra = Vec::new();
    if seeded && !flag_given(&explicit, "seed") {
        if let Ok(v) = std::env::var("BJL_SEED") {
            extra.push("--seed".to_string());
            extra.push(v.trim().to_string());
        }
    }
    if let Some(path) = config_path(&explicit) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {path}: {e}")))?;
        for (k, v) in parse_config(&text)? {
            if k == "config" || flag_given(&explicit, &k) || (k == "seed" && flag_given(&extra, "seed")) {
                continue;
            }
            match v.as_str() {
                "true" => extra.push(format!("--{k}")),
                "false" => {}
                _ => {
                    extra.push(format!("--{k}"));
                    extra.push(v);
                }
            }
        }
    }
    args.extend(extra);
    Ok(args)
}

fn execute(cli: Cli) -> Result<bool> {
    let (outcome, manifest_path, replayed_from) = match cli.command {
        Command::Replay(r) => {
            let text = std::fs::read_to_string(&r.manifest_file)?;
            let recorded: Manifest = serde_json::from_str(&text)?;
            let mut command = recorded.run;
            if let Some(out) = r.out {
                set_out(&mut command, out);
            }
            (dispatch(command)?, cli.manifest, Some(r.manifest_file))
        }
        command => (dispatch(command)?, cli.manifest, None),
    };
    let manifest = Manifest {
        tool: "bjl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: outcome.seed,
        run: outcome.command.clone(),
        outputs: outcome.outputs.clone(),
        metadata: outcome.metadata,
    };
    let path = manifest_path.unwrap_or_else(|| default_manifest_path(outcome.outputs.first()));
    let same_as_input = replayed_from.as_deref().is_some_and(|src| same_file(src, &path));
    if !same_as_input {
        let mut w = create(&path)?;
        write_json(&mut w, &manifest)?;
        w.flush()?;
    }
    Ok(outcome.passed)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn default_manifest_path(out: Option<&PathBuf>) -> PathBuf {
    match out.and_then(|o| o.parent()) {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join("manifest.json"),
        _ => PathBuf::from("manifest.json"),
    }
}

fn set_out(command: &mut Command, out: PathBuf) {
    match command {
        Command::Simulate(a) => a.out = Some(out),
        Command::Density(a) => a.out = Some(out),
        Command::Verify(a) => a.out = Some(out),
        Command::Replay(_) => {}
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs `write` against `out` or stdout.
fn emit(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<Vec<PathBuf>> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush()?;
            Ok(vec![path.clone()])
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
            Ok(Vec::new())
        }
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Density(a) => cmd_density(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Replay(_) => Err(Error::InvalidParameter("a manifest cannot record a replay".into())),
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("{what}: cannot parse {x:?} as a number")))
        })
        .collect()
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or(0)
}

fn cmd_simulate(mut a: SimulateArgs) -> Result<Outcome> {
    if a.alcove_bm {
        let bm = ModelParams::alcove_brownian_motion(a.m)?;
        (a.beta, a.p, a.q) = (Some(bm.beta), Some(bm.p), Some(bm.q));
    }
    let (Some(beta), Some(p), Some(q)) = (a.beta, a.p, a.q) else {
        return Err(Error::InvalidParameter("simulate needs --beta, --p and --q (or --alcove-bm)".into()));
    };
    let params = ModelParams::new(beta, p, q, a.m)?;
    let seed = resolve_seed(a.seed);
    a.seed = Some(seed);
    let config = SimConfig {
        dt: a.dt,
        horizon: a.horizon,
        seed,
        boundary_tol: a.boundary_tol,
        max_halvings: a.max_halvings,
        scheme: match a.scheme {
            Coords::Phi => Scheme::PhiEuler,
            Coords::Lambda => Scheme::LambdaEuler,
        },
    };
    config.validate()?;
    if a.paths == 0 {
        return Err(Error::InvalidParameter("--paths must be >= 1".into()));
    }
    let start = match &a.start {
        None => StartPoint::Phi(AlcovePoint::centre(a.m)),
        Some(text) => {
            let v = parse_list(text, "--start")?;
            match a.coords {
                Coords::Phi => StartPoint::Phi(AlcovePoint::new(v)?),
                Coords::Lambda => StartPoint::Lambda(LambdaPoint::new(v)?),
            }
        }
    };
    if start.dim() != a.m {
        return Err(Error::InvalidParameter(format!("--start has {} entries but m = {}", start.dim(), a.m)));
    }
    let mut paths = simulate_ensemble(&start, &params, &config, a.paths)?;
    let native = a.scheme;
    if a.coords != native {
        for path in &mut paths {
            convert_states(path, native, a.coords);
        }
    }
    let label = match a.coords {
        Coords::Phi => "phi",
        Coords::Lambda => "lambda",
    };
    let many = a.paths > 1;
    let outputs = emit(&a.out, |w| match a.format {
        Format::Csv => write_paths_csv(w, &paths, label, many),
        Format::Json => write_paths_json(w, &paths),
    })?;
    let hits = paths.iter().filter(|p| p.hit.is_some()).count();
    let mut metadata = serde_json::Map::new();
    metadata.insert("strong_regime".into(), params.strong_regime().into());
    metadata.insert("paths_stopped".into(), hits.into());
    Ok(Outcome { command: Command::Simulate(a), seed: Some(seed), outputs, metadata, passed: true })
}

fn convert_states(path: &mut PathSample, from: Coords, to: Coords) {
    for x in &mut path.states {
        *x = match (from, to) {
            (Coords::Phi, Coords::Lambda) => {
                phi_to_lambda(&AlcovePoint::from_vec_unchecked(std::mem::take(x))).into_vec()
            }
            (Coords::Lambda, Coords::Phi) => {
                lambda_to_phi(&LambdaPoint::from_vec_unchecked(std::mem::take(x))).into_vec()
            }
            _ => std::mem::take(x),
        };
    }
}

/// Grid points from a `N` or `a:b:N` specification.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("--grid {spec:?}: expected N or a:b:N"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [n] => {
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            Ok((0..n).map(|k| (k as f64 + 0.5) / n as f64).collect())
        }
        [a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n < 2 || !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(Error::InvalidParameter(format!(
                    "--grid {spec:?}: need 0 <= a < b <= 1 and N >= 2"
                )));
            }
            Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
        }
        _ => Err(bad()),
    }
}

/// Strictly decreasing `m`-tuples drawn from `grid`, in lexicographic order
/// of grid indices.
fn ordered_tuples(grid: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = Vec::with_capacity(m);
    fn rec(sorted: &[f64], m: usize, from: usize, idx: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if idx.len() == m {
            out.push(idx.iter().map(|&i| sorted[i]).collect());
            return;
        }
        for i in from..sorted.len() {
            idx.push(i);
            rec(sorted, m, i + 1, idx, out);
            idx.pop();
        }
    }
    rec(&sorted, m, 0, &mut idx, &mut out);
    out
}

/// Resolves `(beta, r, s, m)` and the model parameters from either the
/// exponents or `(beta, p, q)`.
fn density_params(a: &DensityArgs, m: usize) -> Result<ModelParams> {
    let by_pq = a.p.is_some() || a.q.is_some();
    let by_rs = a.r.is_some() || a.s.is_some();
    if by_pq && by_rs {
        return Err(Error::InvalidParameter("give either --r/--s or --p/--q, not both".into()));
    }
    let beta = a.beta.unwrap_or(2.0);
    if by_pq {
        let (Some(p), Some(q)) = (a.p, a.q) else {
            return Err(Error::InvalidParameter("--p and --q must be given together".into()));
        };
        return ModelParams::new(beta, p, q, m);
    }
    let (r, s) = (a.r.unwrap_or(0.0), a.s.unwrap_or(0.0));
    if !(r > -1.0 && s > -1.0) {
        return Err(Error::InvalidParameter(format!("need r, s > -1, got r = {r}, s = {s}")));
    }
    // r + 1 = beta (p - m + 1) / 2
    let mf = m as f64;
    ModelParams::new(beta, 2.0 * (r + 1.0) / beta + mf - 1.0, 2.0 * (s + 1.0) / beta + mf - 1.0, m)
}

fn mode_name(mode: DensityMode) -> &'static str {
    match mode {
        DensityMode::Univariate => "univariate",
        DensityMode::Km2 => "km2",
        DensityMode::Partition2 => "partition2",
        DensityMode::Stationary => "stationary",
    }
}

fn cmd_density(mut a: DensityArgs) -> Result<Outcome> {
    let theta_given = match &a.theta {
        Some(text) => Some(parse_list(text, "--theta")?),
        None => None,
    };
    let default_m = match a.mode {
        DensityMode::Univariate | DensityMode::Stationary => 1,
        DensityMode::Km2 | DensityMode::Partition2 => 2,
    };
    let m = a.m.or(theta_given.as_ref().map(Vec::len)).unwrap_or(default_m);
    a.m = Some(m);
    let params = density_params(&a, m)?;
    let e = params.exponents()?;
    if !(a.t.is_finite() && a.t > 0.0) && a.mode != DensityMode::Stationary {
        return Err(Error::InvalidParameter(format!("--t must be > 0, got {}", a.t)));
    }
    match a.mode {
        DensityMode::Univariate if m != 1 => {
            return Err(Error::Unsupported(format!("univariate mode needs m = 1, got m = {m}")));
        }
        DensityMode::Km2 | DensityMode::Partition2 if params.beta != 2.0 => {
            return Err(Error::Unsupported(format!(
                "mode {} needs beta = 2 (got beta = {}): closed-form multivariate densities for general beta are out of scope",
                mode_name(a.mode), params.beta
            )));
        }
        DensityMode::Stationary if m > 3 => {
            return Err(Error::Unsupported(format!("stationary normalisation is implemented for m <= 3, got m = {m}")));
        }
        _ => {}
    }
    let theta = match theta_given {
        Some(v) => LambdaPoint::from_unsorted(v)?,
        None => phi_to_lambda(&AlcovePoint::centre(m)),
    };
    if theta.dim() != m {
        return Err(Error::InvalidParameter(format!("--theta has {} entries but m = {m}", theta.dim())));
    }
    a.theta = Some(theta.as_slice().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
    let grid = parse_grid(&a.grid)?;
    let points = ordered_tuples(&grid, m);
    let mut metadata = serde_json::Map::new();
    metadata.insert("r".into(), e.r.into());
    metadata.insert("s".into(), e.s.into());
    metadata.insert("beta".into(), params.beta.into());
    let row = |x: Vec<f64>, d: DensityEvaluation| DensityRow {
        point: x,
        value: d.value,
        truncation_order: d.truncation_order,
        tail_bound: d.tail_bound,
    };
    let mut rows = Vec::with_capacity(points.len());
    match a.mode {
        DensityMode::Univariate | DensityMode::Km2 => {
            let order = a.trunc.unwrap_or_else(|| default_truncation(a.t));
            a.trunc = Some(order);
            let basis = build_basis(e.r, e.s, order)?;
            for x in points {
                let d = if a.mode == DensityMode::Univariate {
                    univariate_density(theta.as_slice()[0], x[0], a.t, &basis, order)?
                } else {
                    km_density_beta2(&theta, &LambdaPoint::new(x.clone())?, a.t, &basis, order)?
                };
                rows.push(row(x, d));
            }
        }
        DensityMode::Partition2 => {
            let cutoff = a.trunc.unwrap_or_else(|| default_partition_cutoff(a.t, m));
            a.trunc = Some(cutoff);
            let basis = build_basis(e.r, e.s, cutoff + m - 1)?;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for x in points {
                let lam = LambdaPoint::new(x.clone())?;
                let d = partition_sum_density_beta2(&theta, &lam, a.t, &basis, cutoff)?;
                let k = km_density_beta2(&theta, &lam, a.t, &basis, cutoff + m - 1)?;
                worst = worst.max((d.value - k.value).abs());
                scale = scale.max(k.value.abs());
                rows.push(row(x, d));
            }
            let rel = if scale > 0.0 { worst / scale } else { worst };
            metadata.insert("km2_max_relative_difference".into(), rel.into());
            metadata.insert("km2_agreement".into(), (rel <= AGREEMENT_TOL).into());
        }
        DensityMode::Stationary => {
            a.trunc = None;
            let z = stationary_normalizer(&params, a.quad_nodes)?;
            metadata.insert("normalizer".into(), z.into());
            for x in points {
                let lam = LambdaPoint::new(x.clone())?;
                let v = stationary_log_density_unnormalized(&lam, &params)?.exp() / z;
                rows.push(DensityRow { point: x, value: v, truncation_order: 0, tail_bound: 0.0 });
            }
        }
    }
    let outputs = emit(&a.out, |w| match a.format {
        Format::Csv => write_density_csv(w, &rows),
        Format::Json => write_json(w, &serde_json::json!({ "mode": a.mode, "t": a.t, "rows": rows, "metadata": metadata })),
    })?;
    Ok(Outcome { command: Command::Density(a), seed: None, outputs, metadata, passed: true })
}

fn cmd_verify(mut a: VerifyArgs) -> Result<Outcome> {
    let seed = resolve_seed(a.seed);
    a.seed = Some(seed);
    let report: SuiteReport = match a.suite {
        Suite::Identities => run_identities(seed)?,
        Suite::Appendix => {
            let mut o = AppendixOptions { seed, ..AppendixOptions::default() };
            if let Some(m) = a.m {
                if m == 0 {
                    return Err(Error::InvalidParameter("--m must be >= 1".into()));
                }
                o.fd_max_m = m;
                o.bound_max_m = m;
            }
            if let Some(n) = a.points {
                o.n_points = n;
            }
            a.m = Some(o.fd_max_m.max(o.bound_max_m));
            a.points = Some(o.n_points);
            run_appendix(&o)?
        }
        Suite::Hitting => {
            let d = HittingOptions::default();
            let o = HittingOptions {
                preset: a.preset.map_or(d.preset, Into::into),
                n_paths: a.paths.unwrap_or(d.n_paths),
                epsilon_hit: a.epsilon.unwrap_or(d.epsilon_hit),
                horizon: a.horizon.unwrap_or(d.horizon),
                dt: a.dt.unwrap_or(d.dt),
                boundary_tol: d.boundary_tol,
                seed,
            };
            if o.n_paths == 0 || !(o.epsilon_hit > o.boundary_tol) {
                return Err(Error::InvalidParameter("need --paths >= 1 and --epsilon > boundary_tol".into()));
            }
            a.preset = Some(match o.preset {
                HittingPreset::ThresholdGrid => Preset::ThresholdGrid,
                HittingPreset::Monotonicity => Preset::Monotonicity,
                HittingPreset::RankOne => Preset::RankOne,
            });
            (a.paths, a.epsilon, a.horizon, a.dt) = (Some(o.n_paths), Some(o.epsilon_hit), Some(o.horizon), Some(o.dt));
            run_hitting(&o)?
        }
        Suite::Stationary => {
            let d = StationaryOptions::default();
            let m = a.m.unwrap_or(d.params.m);
            let params = ModelParams::new(
                a.beta.unwrap_or(d.params.beta),
                a.p.unwrap_or(d.params.p),
                a.q.unwrap_or(d.params.q),
                m,
            )?;
            if m > 3 {
                return Err(Error::Unsupported(format!("stationary moments are implemented for m <= 3, got m = {m}")));
            }
            let o = StationaryOptions {
                params,
                n_paths: a.paths.unwrap_or(d.n_paths),
                horizon: a.horizon.unwrap_or(d.horizon),
                dt: a.dt.unwrap_or(d.dt),
                seed,
                quad_nodes: d.quad_nodes,
            };
            if o.n_paths < 2 {
                return Err(Error::InvalidParameter("--paths must be >= 2".into()));
            }
            (a.m, a.beta, a.p, a.q) = (Some(m), Some(params.beta), Some(params.p), Some(params.q));
            (a.paths, a.horizon, a.dt) = (Some(o.n_paths), Some(o.horizon), Some(o.dt));
            run_stationary(&o)?
        }
        Suite::DensityVsSim => {
            let d = DensityOptions::default();
            let m = a.m.unwrap_or(d.m);
            let default_paths = if m == 1 { d.n_paths } else { 10_000 };
            let o = DensityOptions {
                m,
                t: a.t.unwrap_or(d.t),
                n_paths: a.paths.unwrap_or(default_paths),
                dt: a.dt.unwrap_or(d.dt),
                seed,
            };
            (a.m, a.t, a.paths, a.dt) = (Some(o.m), Some(o.t), Some(o.n_paths), Some(o.dt));
            run_density_vs_sim(&o)?
        }
    };
    for c in report.failed_checks() {
        eprintln!("check failed: {} = {} (threshold {:?} {})", c.name, c.value, c.relation, c.threshold);
    }
    let outputs = emit(&a.out, |w| write_json(w, &report))?;
    let mut metadata = serde_json::Map::new();
    metadata.insert("passed".into(), report.passed.into());
    Ok(Outcome { command: Command::Verify(a), seed: Some(seed), outputs, metadata, passed: report.passed })
}
