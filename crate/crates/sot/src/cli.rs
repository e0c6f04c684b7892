//! Command-line front end: JSON configuration in, CSV or JSON results out.
//!
//! Every run is seeded (from `--seed` or the config's `seed` field), every
//! output carries a metadata header (tool version, seed, SHA-256 of the config
//! bytes), and all parallel work runs on one worker pool whose size does not
//! affect results.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::acceptance::{run_all, AcceptanceOptions, DEFAULT_SEED};
use crate::concentration::{concentration_batch, ConcentrationBound, SampleMode};
use crate::constructions::{bernoulli_two_point, chi2_hard_example, chi2_hard_ratio, w2_hard_example, HardExampleSchedule};
use crate::dist_core::{AtomicDistribution, SmoothedMixture, SubgaussianProfile};
use crate::divergences::{chi2_mutual_information, renyi_mutual_information};
use crate::experiments::{bernoulli_scan, fit_rate, rate_series, McOptions, RateFit, RateSeries, SweepQuantity};
use crate::functional_ineq::{lsi_lower_bound, t2_lower_bound};
use crate::tail_bounds::{log_spaced_tail_grid, tail_density_inequality_probe};
use crate::transport::{w2_squared_with, MixturePair, W2Options};
use crate::Error;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code when acceptance checks fail or output cannot be written.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for unreadable or schema-violating configuration.
pub const EXIT_SCHEMA: i32 = 2;
/// Exit code for numerical failures inside a module.
pub const EXIT_NUMERIC: i32 = 3;

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "sot", version, about = "Gaussian-smoothed empirical measure laboratory")]
pub struct Cli {
    /// Subcommand to run.
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (`-` for standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "SOT_THREADS")]
    pub threads: Option<usize>,
    /// Reduced-size acceptance run.
    #[arg(long, global = true)]
    pub quick: bool,
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build a distribution from a named family and write it as JSON.
    Construct,
    /// Squared W2 between two smoothed distributions (JSON report).
    W2,
    /// Chi-square or Renyi mutual information with per-atom increments (CSV).
    MiProbe,
    /// Monte Carlo rate sweep over sample sizes (CSV plus JSON fit).
    RateScan,
    /// Weighted CDF concentration replications (CSV).
    Concentration,
    /// Tail versus density probe on a radius grid (CSV).
    TailProbe,
    /// Log-Sobolev lower bounds for two-point mixtures (CSV).
    LsiProbe,
    /// Transport-entropy lower bounds for two-point mixtures (CSV).
    T2Probe,
    /// Run the acceptance suite and print a pass/fail table.
    Accept,
}

impl Command {
    /// Name as typed on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Command::Construct => "construct",
            Command::W2 => "w2",
            Command::MiProbe => "mi-probe",
            Command::RateScan => "rate-scan",
            Command::Concentration => "concentration",
            Command::TailProbe => "tail-probe",
            Command::LsiProbe => "lsi-probe",
            Command::T2Probe => "t2-probe",
            Command::Accept => "accept",
        }
    }
}

/// Failures of a command-line run, each mapped to an exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Configuration missing, unreadable, or violating its schema.
    #[error("configuration error: {0}")]
    Schema(String),
    /// Numerical failure reported by a module.
    #[error("{0}")]
    Numeric(String),
    /// Output could not be written.
    #[error("output error: {0}")]
    Output(String),
    /// Acceptance checks failed.
    #[error("{0} acceptance criteria failed")]
    Failed(usize),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Output(_) | CliError::Failed(_) => EXIT_FAILURE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => CliError::Schema(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance attached to every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metadata {
    /// Tool name.
    pub tool: String,
    /// Tool version.
    pub version: String,
    /// Subcommand.
    pub subcommand: String,
    /// Master seed.
    pub seed: u64,
    /// Hex SHA-256 of the raw configuration bytes.
    pub config_sha256: String,
}

impl Metadata {
    fn new(command: Command, seed: u64, config: &[u8]) -> Self {
        Self {
            tool: "sot".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: command.name().into(),
            seed,
            config_sha256: sha256_hex(config),
        }
    }

    fn csv_header(&self, extra: &[(&str, String)]) -> String {
        let mut s = format!(
            "# tool={}\n# version={}\n# subcommand={}\n# seed={}\n# config_sha256={}\n",
            self.tool, self.version, self.subcommand, self.seed, self.config_sha256
        );
        for (k, v) in extra {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }
}

/// Lower-case hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a distribution comes from in a configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DistributionSource {
    /// Path to a JSON file (relative paths resolve against the config's directory).
    File(PathBuf),
    /// Inline `{"atoms": [{"x": .., "logw": ..}, ...]}`.
    Inline(AtomicDistribution),
    /// Named family.
    Family(FamilyConfig),
}

/// Named distribution families.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Two atoms at `0` and `h` with far weight `exp(-h^2 / (2 K^2))`.
    TwoPoint {
        /// Separation.
        h: f64,
        /// Subgaussian scale.
        k: f64,
    },
    /// Geometric hard example.
    Chi2Hard {
        /// Subgaussian scale.
        k: f64,
        /// Geometric ratio; defaults to the smallest admissible ratio.
        c: Option<f64>,
        /// Number of non-zero atoms.
        k_max: usize,
    },
    /// Super-geometric hard example.
    W2Hard {
        /// Subgaussian scale.
        k: f64,
        /// Noise scale.
        sigma: f64,
        /// Number of stages.
        k_max: usize,
    },
}

impl FamilyConfig {
    fn build(self) -> CliResult<(AtomicDistribution, Option<HardExampleSchedule>)> {
        Ok(match self {
            FamilyConfig::TwoPoint { h, k } => (bernoulli_two_point(h, k)?, None),
            FamilyConfig::Chi2Hard { k, c, k_max } => {
                let c = match c {
                    Some(c) => c,
                    None => chi2_hard_ratio(k)?.0,
                };
                (chi2_hard_example(k, c, k_max)?, None)
            }
            FamilyConfig::W2Hard { k, sigma, k_max } => {
                let (p, s) = w2_hard_example(k, sigma, k_max)?;
                (p, Some(s))
            }
        })
    }
}

impl DistributionSource {
    fn resolve(&self, base: &Path, field: &str) -> CliResult<AtomicDistribution> {
        match self {
            DistributionSource::Inline(p) => Ok(p.clone()),
            DistributionSource::Family(f) => Ok(f.build()?.0),
            DistributionSource::File(path) => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let bytes = std::fs::read(&path)
                    .map_err(|e| CliError::Schema(format!("field `{field}`: cannot read {}: {e}", path.display())))?;
                let mut value: serde_json::Value = serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Schema(format!("field `{field}`: {}: {e}", path.display())))?;
                if let Some(inner) = value.get_mut("distribution") {
                    value = inner.take();
                }
                serde_path_to_error::deserialize(value).map_err(|e| {
                    CliError::Schema(format!("field `{field}` ({}): at `{}`: {}", path.display(), e.path(), e.inner()))
                })
            }
        }
    }
}

/// Configuration of `construct`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Family to build.
    pub family: FamilyConfig,
}

/// Configuration of `w2`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2Config {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Source distribution.
    pub a: DistributionSource,
    /// Target distribution.
    pub b: DistributionSource,
    /// Noise scale shared by both mixtures.
    pub sigma: f64,
    /// Absolute quadrature tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Relative quadrature tolerance.
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    /// Diagnostic grid points to report.
    #[serde(default)]
    pub diagnostic_points: usize,
}

fn default_tol() -> f64 {
    1e-10
}

/// Mutual-information flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MiKind {
    /// Chi-square mutual information.
    Chi2,
    /// Renyi mutual information of order `lambda`.
    Renyi,
}

/// Configuration of `mi-probe`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiProbeConfig {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Input distribution.
    pub distribution: DistributionSource,
    /// Noise scale.
    pub sigma: f64,
    /// Flavor.
    pub kind: MiKind,
    /// Renyi order in `(1, 2)`; required for `renyi`.
    pub lambda: Option<f64>,
    /// Output truncation radii; defaults to one tolerance-driven radius.
    pub truncation_radii: Option<Vec<f64>>,
    /// Quadrature tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// Base law of a rate sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFamily {
    /// Fixed distribution.
    Fixed {
        /// The distribution.
        distribution: DistributionSource,
    },
    /// Two-point law whose separation follows the lower-bound schedule in `n`.
    BernoulliScan {
        /// Subgaussian scale.
        k: f64,
        /// Slack exponent.
        epsilon: f64,
        /// Skip sample sizes failing the feasibility rule.
        #[serde(default = "default_true")]
        enforce_feasibility: bool,
    },
}

fn default_true() -> bool {
    true
}

/// Configuration of `rate-scan`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateScanConfig {
    /// Master seed.
    pub seed: Option<u64>,
    /// Base law.
    pub family: RateFamily,
    /// Noise scale.
    pub sigma: f64,
    /// Sample sizes, strictly increasing.
    pub n_list: Vec<u64>,
    /// Trials per sample size.
    pub trials: usize,
    /// Quantity to estimate.
    #[serde(default = "default_quantity")]
    pub quantity: SweepQuantity,
    /// Per-trial absolute quadrature tolerance.
    #[serde(default = "default_trial_tol")]
    pub tol: f64,
    /// Optional relative standard-error target for early stopping.
    pub early_stop_rel: Option<f64>,
}

fn default_quantity() -> SweepQuantity {
    SweepQuantity::W2Squared
}

fn default_trial_tol() -> f64 {
    1e-12
}

/// Configuration of `concentration`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    /// Master seed.
    pub seed: Option<u64>,
    /// Base law; defaults to a point mass at zero (a centered Gaussian truth).
    pub distribution: Option<DistributionSource>,
    /// Noise scale.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Sample size.
    pub n: usize,
    /// Failure probability.
    pub delta: f64,
    /// Replications.
    pub replications: usize,
    /// How the empirical CDF is formed.
    #[serde(default = "default_mode")]
    pub mode: SampleMode,
    /// Bound compared against.
    #[serde(default = "default_bound")]
    pub bound: ConcentrationBound,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_mode() -> SampleMode {
    SampleMode::Plain
}

fn default_bound() -> ConcentrationBound {
    ConcentrationBound::Smoothed
}

/// Configuration of `tail-probe` (unit noise).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailProbeConfig {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Base law.
    pub distribution: DistributionSource,
    /// Subgaussian scale; the tail constant is fitted to the atoms.
    pub k: f64,
    /// Exponent slack in `(0, beta)`.
    pub epsilon: f64,
    /// Explicit radii; defaults to a log-spaced grid.
    pub r_grid: Option<Vec<f64>>,
    /// Points of the default grid.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    200
}

/// Configuration of `lsi-probe`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsiProbeConfig {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Subgaussian scale.
    pub k: f64,
    /// Noise scale.
    pub sigma: f64,
    /// Separations.
    pub h_list: Vec<f64>,
    /// Left cut point override.
    pub x1: Option<f64>,
    /// Right cut point override.
    pub x2: Option<f64>,
}

/// Configuration of `t2-probe`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T2ProbeConfig {
    /// Seed (recorded only).
    pub seed: Option<u64>,
    /// Subgaussian scale.
    pub k: f64,
    /// Noise scale.
    pub sigma: f64,
    /// Perturbation slack in `(0, 1)`.
    pub delta: f64,
    /// Separations.
    pub h_list: Vec<f64>,
}

/// Loaded configuration with its raw bytes and directory.
struct Loaded<T> {
    config: T,
    bytes: Vec<u8>,
    dir: PathBuf,
}

fn load_config<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<Loaded<T>> {
    let path = path.ok_or_else(|| CliError::Schema("missing --config <path>".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_slice(&bytes);
    let config: T = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| CliError::Schema(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
    de.end()
        .map_err(|e| CliError::Schema(format!("{}: trailing content: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, bytes, dir })
}

fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    cli.or(config)
        .ok_or_else(|| CliError::Schema("no seed: pass --seed or set `seed` in the config".into()))
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        None => Err(CliError::Schema("missing --out <path>".into())),
        Some(p) if p.as_os_str() == "-" => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Output(e.to_string()))
        }
        Some(p) => std::fs::write(p, content).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
    }
}

fn csv_body<R: Serialize>(rows: &[R]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses process arguments, runs, and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sot {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

/// Runs a parsed command line on a worker pool of the requested size.
pub fn run(cli: &Cli) -> CliResult<()> {
    match cli.threads {
        Some(0) => Err(CliError::Schema("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match cli.command {
        Command::Construct => construct(cli, load_config(config)?, out),
        Command::W2 => w2(cli, load_config(config)?, out),
        Command::MiProbe => mi_probe(cli, load_config(config)?, out),
        Command::RateScan => rate_scan(cli, load_config(config)?, out),
        Command::Concentration => concentration(cli, load_config(config)?, out),
        Command::TailProbe => tail_probe(cli, load_config(config)?, out),
        Command::LsiProbe => lsi_probe(cli, load_config(config)?, out),
        Command::T2Probe => t2_probe(cli, load_config(config)?, out),
        Command::Accept => accept(cli, out),
    }
}

#[derive(Serialize)]
struct ConstructOutput {
    meta: Metadata,
    distribution: AtomicDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule: Option<HardExampleSchedule>,
}

fn construct(cli: &Cli, cfg: Loaded<ConstructConfig>, out: Option<&Path>) -> CliResult<()> {
    let seed = resolve_seed(cli.seed, cfg.config.seed)?;
    let (distribution, schedule) = cfg.config.family.build()?;
    let output = ConstructOutput {
        meta: Metadata::new(cli.command, seed, &cfg.bytes),
        distribution,
        schedule,
    };
    write_output(out, &json_text(&output)?)
}

#[derive(Serialize)]
struct W2Output {
    meta: Metadata,
    sigma: f64,
    w2sq: f64,
    tail_bound: f64,
    quadrature_error: f64,
    window: (f64, f64),
    grid: Vec<crate::transport::TransportGridPoint>,
}

fn w2(cli: &Cli, cfg: Loaded<W2Config>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let a = SmoothedMixture::new(c.a.resolve(&cfg.dir, "a")?, c.sigma)?;
    let b = SmoothedMixture::new(c.b.resolve(&cfg.dir, "b")?, c.sigma)?;
    let eval = w2_squared_with(
        &MixturePair::new(&a, &b),
        &W2Options {
            tol: c.tol,
            rel_tol: c.rel_tol,
            diagnostic_points: c.diagnostic_points,
        },
    )?;
    let output = W2Output {
        meta: Metadata::new(cli.command, seed, &cfg.bytes),
        sigma: c.sigma,
        w2sq: eval.total,
        tail_bound: eval.tail_bound,
        quadrature_error: eval.quadrature_error,
        window: eval.window,
        grid: eval.grid,
    };
    write_output(out, &json_text(&output)?)
}

#[derive(Serialize)]
struct MiRow {
    radius: f64,
    value: f64,
    quadrature_error: f64,
    atom: usize,
    location: f64,
    log_weight: f64,
    increment: f64,
}

fn mi_probe(cli: &Cli, cfg: Loaded<MiProbeConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let p = c.distribution.resolve(&cfg.dir, "distribution")?;
    let lambda = match c.kind {
        MiKind::Chi2 => None,
        MiKind::Renyi => Some(
            c.lambda
                .ok_or_else(|| CliError::Schema("at `lambda`: required when kind is renyi".into()))?,
        ),
    };
    let radii: Vec<Option<f64>> = match &c.truncation_radii {
        Some(r) if r.is_empty() => return Err(CliError::Schema("at `truncation_radii`: must not be empty".into())),
        Some(r) => r.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut rows = Vec::new();
    for radius in radii {
        let est = match lambda {
            None => chi2_mutual_information(&p, c.sigma, radius, c.tol)?,
            Some(l) => renyi_mutual_information(&p, c.sigma, l, radius, c.tol)?,
        };
        for (i, ((x, lw), inc)) in p.atoms().zip(&est.partial_by_atom).enumerate() {
            rows.push(MiRow {
                radius: est.truncation_radius,
                value: est.value,
                quadrature_error: est.quadrature_error,
                atom: i,
                location: x,
                log_weight: lw,
                increment: *inc,
            });
        }
    }
    let mut extra = vec![
        ("kind", format!("{:?}", c.kind).to_lowercase()),
        ("sigma", c.sigma.to_string()),
    ];
    if let Some(l) = lambda {
        extra.push(("lambda", l.to_string()));
    }
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    write_output(out, &(meta.csv_header(&extra) + &csv_body(&rows)?))
}

#[derive(Serialize)]
struct FitOutput {
    meta: Metadata,
    quantity: SweepQuantity,
    fit: Option<RateFit>,
    fit_note: Option<String>,
    skipped: Vec<u64>,
    series: RateSeries,
}

/// Path of the JSON fit summary written next to a rate-scan CSV.
pub fn fit_summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".fit.json");
    PathBuf::from(s)
}

fn rate_scan(cli: &Cli, cfg: Loaded<RateScanConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    if c.trials == 0 {
        return Err(CliError::Schema("at `trials`: must be positive".into()));
    }
    let opts = McOptions {
        trials: c.trials,
        early_stop_rel: c.early_stop_rel,
        tol: c.tol,
    };
    let (series, skipped) = match &c.family {
        RateFamily::Fixed { distribution } => {
            let p = distribution.resolve(&cfg.dir, "family.distribution")?;
            (rate_series(&p, c.sigma, &c.n_list, c.quantity, &opts, seed)?, Vec::new())
        }
        RateFamily::BernoulliScan {
            k,
            epsilon,
            enforce_feasibility,
        } => {
            let scan = bernoulli_scan(*k, c.sigma, *epsilon, &c.n_list, &opts, seed, *enforce_feasibility)?;
            let series = match c.quantity {
                SweepQuantity::W2 => scan.w2,
                SweepQuantity::W2Squared => scan.w2sq,
                SweepQuantity::Kl => {
                    return Err(CliError::Schema(
                        "at `quantity`: bernoulli_scan supports w2 and w2_squared only".into(),
                    ))
                }
            };
            (series, scan.skipped)
        }
    };
    let (fit, fit_note) = match fit_rate(&series) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    let mut extra = vec![("quantity", serde_json::to_string(&c.quantity).unwrap_or_default().replace('"', ""))];
    match &fit {
        Some(f) => {
            extra.push(("fit_slope", f.slope.to_string()));
            extra.push(("fit_slope_stderr", f.slope_stderr.to_string()));
        }
        None => extra.push(("fit_slope", "none".into())),
    }
    if !skipped.is_empty() {
        let list: Vec<String> = skipped.iter().map(u64::to_string).collect();
        extra.push(("skipped_n", list.join(" ")));
    }
    let csv = meta.csv_header(&extra) + &csv_body(&series.points)?;
    write_output(out, &csv)?;
    if let Some(path) = out.filter(|p| p.as_os_str() != "-") {
        let summary = FitOutput {
            meta,
            quantity: c.quantity,
            fit,
            fit_note,
            skipped,
            series,
        };
        write_output(Some(&fit_summary_path(path)), &json_text(&summary)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConcentrationRow {
    replication: usize,
    statistic: f64,
    bound: f64,
    violated: bool,
}

fn concentration(cli: &Cli, cfg: Loaded<ConcentrationConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let base = match &c.distribution {
        Some(d) => d.resolve(&cfg.dir, "distribution")?,
        None => AtomicDistribution::point_mass(0.0),
    };
    let truth = SmoothedMixture::new(base, c.sigma)?;
    let batch = concentration_batch(&truth, c.n, c.delta, c.replications, seed, c.mode, c.bound)?;
    let rows: Vec<ConcentrationRow> = batch
        .rows
        .iter()
        .map(|r| ConcentrationRow {
            replication: r.replication,
            statistic: r.statistic,
            bound: r.bound,
            violated: r.violated,
        })
        .collect();
    let extra = [
        ("n", c.n.to_string()),
        ("delta", c.delta.to_string()),
        ("sigma", c.sigma.to_string()),
        ("violation_rate", batch.violation_rate.to_string()),
    ];
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    write_output(out, &(meta.csv_header(&extra) + &csv_body(&rows)?))
}

fn tail_probe(cli: &Cli, cfg: Loaded<TailProbeConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let p = c.distribution.resolve(&cfg.dir, "distribution")?;
    let profile = SubgaussianProfile::fit(&p, c.k)?;
    let grid = match &c.r_grid {
        Some(g) => g.clone(),
        None => log_spaced_tail_grid(&p, 1.0, c.points)?,
    };
    let report = tail_density_inequality_probe(&p, &profile, c.epsilon, &grid)?;
    let extra = [
        ("k", c.k.to_string()),
        ("tail_constant", profile.c.to_string()),
        ("beta", report.beta.to_string()),
        ("epsilon", report.epsilon.to_string()),
        ("log_m_hat", report.log_m_hat.to_string()),
    ];
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    write_output(out, &(meta.csv_header(&extra) + &csv_body(&report.rows)?))
}

#[derive(Serialize)]
struct LsiRow {
    h: f64,
    x1: f64,
    x2: f64,
    q1: f64,
    q2: f64,
    q3: f64,
    q4: f64,
    q5: f64,
    lsi_lower: f64,
    log_bound_plus_one: f64,
    x1_sensitivity: f64,
}

fn lsi_probe(cli: &Cli, cfg: Loaded<LsiProbeConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let rows = c
        .h_list
        .iter()
        .map(|&h| {
            let r = lsi_lower_bound(h, c.k, c.sigma, c.x1, c.x2)?;
            Ok(LsiRow {
                h,
                x1: r.x1,
                x2: r.x2,
                q1: r.q[0],
                q2: r.q[1],
                q3: r.q[2],
                q4: r.q[3],
                q5: r.q[4],
                lsi_lower: r.lsi_lower,
                log_bound_plus_one: r.log_bound_plus_one,
                x1_sensitivity: r.x1_sensitivity,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let extra = [("k", c.k.to_string()), ("sigma", c.sigma.to_string())];
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    write_output(out, &(meta.csv_header(&extra) + &csv_body(&rows)?))
}

fn t2_probe(cli: &Cli, cfg: Loaded<T2ProbeConfig>, out: Option<&Path>) -> CliResult<()> {
    let c = &cfg.config;
    let seed = resolve_seed(cli.seed, c.seed)?;
    let rows = c
        .h_list
        .iter()
        .map(|&h| t2_lower_bound(h, c.k, c.sigma, c.delta).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let extra = [("k", c.k.to_string()), ("sigma", c.sigma.to_string())];
    let meta = Metadata::new(cli.command, seed, &cfg.bytes);
    write_output(out, &(meta.csv_header(&extra) + &csv_body(&rows)?))
}

#[derive(Serialize)]
struct AcceptRow {
    id: u8,
    name: String,
    passed: bool,
    criterion_met: bool,
    within_time: bool,
    seconds: f64,
    limit_seconds: f64,
    detail: String,
}

fn accept(cli: &Cli, out: Option<&Path>) -> CliResult<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let opts = AcceptanceOptions { seed, quick: cli.quick };
    println!("acceptance suite: seed {seed}, {} mode", if cli.quick { "quick" } else { "full" });
    let outcomes = run_all(&opts);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if let Some(path) = out {
        let rows: Vec<AcceptRow> = outcomes
            .iter()
            .map(|o| AcceptRow {
                id: o.id,
                name: o.name.clone(),
                passed: o.passed,
                criterion_met: o.criterion_met,
                within_time: o.within_time,
                seconds: o.seconds,
                limit_seconds: o.limit_seconds,
                detail: o.detail.clone(),
            })
            .collect();
        let config = format!("quick={}", cli.quick);
        let meta = Metadata::new(cli.command, seed, config.as_bytes());
        write_output(Some(path), &(meta.csv_header(&[]) + &csv_body(&rows)?))?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}
