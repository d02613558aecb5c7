//! The `ltlab` experiment runner.
//!
//! Exit codes: 0 on success, 2 when a precondition fails, 3 when an
//! inequality that must hold is violated beyond its tolerance. Failures print
//! a one-line JSON record on stderr.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::constants::SemiclassicalConstants;
use crate::error::{Error, Result};
use crate::inequalities::{
    aggregate_bound, calibrate_constant, hoffmann_ostenhof_report, local_bound_check, lt_ratio, main_inequality_check,
    poincare_sobolev_step, scaled_band, CalibrationRow, InequalityId, InequalityReport, DISCRETIZATION_TOLERANCE,
};
use crate::lattice::{riesz_constant, riesz_mean_capped, Boundary, LocalBoundMode, RieszMeanQuery, DEFAULT_POINT_CAP};
use crate::numeric::{log_log_slope, log_space};
use crate::partition::{
    group, group_inequality_check, subdivide_with_depth, validate_groups, PartitionExport, DEFAULT_MAX_DEPTH,
};
use crate::states::io::{read_state, write_state};
use crate::states::{generate, gradient_term, thomas_fermi_term, DensityField, Family, Grid, OrbitalSet};
use config::{config_hash, parse_list, ConfigFile};
use output::{emit_plot_data, json_bytes, resolve_output, write_output, Cell, Format, Table};

/// Relative tolerance on `Tr(-Delta gamma) - int |grad sqrt(rho)|^2`.
pub const HOFFMANN_OSTENHOF_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "ltlab", version, about = "Numerical checks of semiclassical Lieb-Thirring bounds on box grids")]
pub struct Cli {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Semiclassical constants table.
    Constants(ConstantsArgs),
    /// Lattice Riesz means with Berezin-Li-Yau gaps and Weyl ratios.
    Riesz(RieszArgs),
    /// Generate and store a corpus of states.
    Corpus(CorpusArgs),
    /// Build and export the dyadic partition of a stored state.
    Partition(PartitionArgs),
    /// Evaluate every inequality over a corpus.
    Verify(VerifyArgs),
    /// Kinetic and gradient growth over a range of particle numbers.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: $LTLAB_OUT_DIR/<command>.<ext>, else stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Comma-separated dimensions.
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub q: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RieszArgs {
    /// Comma-separated lattice dimensions.
    #[arg(long)]
    pub k: Option<String>,
    /// Single spectral parameter; overrides the sweep.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub mu_min: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
    /// Log-spaced sweep points.
    #[arg(long)]
    pub points: Option<usize>,
    /// dirichlet or neumann.
    #[arg(long)]
    pub boundary: Option<Boundary>,
    /// Maximum number of contributing lattice points.
    #[arg(long)]
    pub cap: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Default)]
pub struct CorpusSourceArgs {
    /// box, slater or bumps.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Comma-separated particle numbers.
    #[arg(long)]
    pub n_values: Option<String>,
    /// Seeded states per particle number (random families).
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub source: CorpusSourceArgs,
    /// Directory receiving the state files (default: $LTLAB_OUT_DIR/corpus).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Store the density next to the orbitals.
    #[arg(long)]
    pub include_density: Option<bool>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// State header file written by `corpus`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Mass threshold; defaults to `lambda_fraction` times the total mass.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_fraction: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Output JSON file (default: $LTLAB_OUT_DIR/partition.json, else stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: CorpusSourceArgs,
    /// Read states from this directory instead of generating them.
    #[arg(long)]
    pub input_dir: Option<PathBuf>,
    /// Partition threshold as a fraction of each state's mass.
    #[arg(long)]
    pub lambda_fraction: Option<f64>,
    /// Comma-separated epsilons; defaults to a geometric grid.
    #[arg(long)]
    pub epsilons: Option<String>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long)]
    pub eps_points: Option<usize>,
    /// Constant used on the right side of the main inequality.
    #[arg(long)]
    pub constant: Option<f64>,
    /// exact or closed.
    #[arg(long)]
    pub local_mode: Option<String>,
    /// Directory for plot-ready columns.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// box, slater or bumps.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Smallest particle number; doubled up to `n_max`.
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Explicit comma-separated particle numbers.
    #[arg(long)]
    pub n_values: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Result of a successful run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    /// Inequalities violated beyond their tolerance.
    pub violations: usize,
}

/// Runs `cli` on a pool with the requested number of workers.
pub fn run(cli: Cli) -> Result<Outcome> {
    let mut file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let workers = file.pick_opt("workers", cli.workers)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Constants(args) => constants(args, file),
        Command::Riesz(args) => riesz(args, file),
        Command::Corpus(args) => corpus(args, file),
        Command::Partition(args) => partition(args, file),
        Command::Verify(args) => verify(args, file),
        Command::Scan(args) => scan(args, file),
    })
}

/// Short machine-readable name of an error.
pub fn error_kind(error: &Error) -> &'static str {
    match error {
        Error::NonPositive { .. } => "non_positive",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::EnumerationCap { .. } => "enumeration_cap",
        Error::ZeroMass => "zero_mass",
        Error::GridAtomicity { .. } => "grid_atomicity",
        Error::MaxDepthExceeded { .. } => "max_depth_exceeded",
        Error::MisalignedCube { .. } => "misaligned_cube",
        Error::NonCubicCells(_) => "non_cubic_cells",
        Error::Capacity { .. } => "capacity",
        Error::NotOrthonormal { .. } => "not_orthonormal",
        Error::Occupation { .. } => "occupation",
        Error::Format { .. } => "state_format",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// One-line JSON record for stderr.
pub fn error_record(error: &Error) -> String {
    json!({ "status": "error", "exit_code": 2, "kind": error_kind(error), "message": error.to_string() }).to_string()
}

pub fn violation_record(outcome: &Outcome) -> String {
    json!({ "status": "tolerance_violation", "exit_code": 3, "violations": outcome.violations }).to_string()
}

fn write_table(table: &Table, output: OutputArgs, file: &mut ConfigFile, name: &str) -> Result<()> {
    let format = file.pick("format", output.format, Format::Csv)?;
    let out = file.pick_opt("out", output.out)?;
    let path = resolve_output(out, &format!("{name}.{}", format.extension()));
    write_output(path.as_deref(), &table.render(format)?)
}

#[derive(Serialize)]
struct ConstantsSettings {
    d: Vec<usize>,
    q: usize,
}

fn constants(args: ConstantsArgs, mut file: ConfigFile) -> Result<Outcome> {
    let settings = ConstantsSettings { d: file.pick_list("d", args.d, "1,2,3")?, q: file.pick("q", args.q, 1)? };
    let hash = config_hash("constants", &settings)?;
    let mut table = Table::new(vec![
        "d",
        "q",
        "unit_ball_volume",
        "kinetic_constant",
        "eigenvalue_constant",
        "round_trip_error",
        "config_hash",
    ]);
    for &d in &settings.d {
        let c = SemiclassicalConstants::new(d, settings.q)?;
        table.push(vec![
            d.into(),
            settings.q.into(),
            c.unit_ball_volume.into(),
            c.kinetic_constant.into(),
            c.eigenvalue_constant.into(),
            c.round_trip_error().into(),
            hash.clone().into(),
        ]);
    }
    write_table(&table, args.output, &mut file, "constants")?;
    file.finish()?;
    Ok(Outcome::default())
}

#[derive(Serialize)]
struct RieszSettings {
    k: Vec<usize>,
    mu: Vec<f64>,
    boundary: &'static str,
    cap: u64,
}

fn riesz(args: RieszArgs, mut file: ConfigFile) -> Result<Outcome> {
    let k = file.pick_list("k", args.k, "1")?;
    let single = file.pick_opt("mu", args.mu)?;
    let mu_min = file.pick("mu_min", args.mu_min, 1.0)?;
    let mu_max = file.pick("mu_max", args.mu_max, 1e4)?;
    let points = file.pick("points", args.points, 20)?;
    let boundary = file.pick("boundary", args.boundary, Boundary::Dirichlet)?;
    let cap = file.pick("cap", args.cap, DEFAULT_POINT_CAP)?;
    let mu = match single {
        Some(mu) => vec![mu],
        None => {
            if !(mu_min > 0.0 && mu_max >= mu_min) || points == 0 {
                return Err(Error::InvalidArgument("need 0 < mu_min <= mu_max and points >= 1".into()));
            }
            log_space(mu_min, mu_max, points)
        }
    };
    let settings = RieszSettings { k, mu, boundary: boundary.as_str(), cap };
    let hash = config_hash("riesz", &settings)?;
    let mut table = Table::new(vec![
        "k",
        "mu",
        "boundary",
        "value",
        "contributing_points",
        "bly_bound",
        "gap",
        "weyl_ratio",
        "config_hash",
    ]);
    for &k in &settings.k {
        for &mu in &settings.mu {
            let query = RieszMeanQuery { dimension: k, mu, boundary };
            let result = riesz_mean_capped(&query, cap)?;
            let bly = -riesz_constant(k) * mu.powf(1.0 + k as f64 / 2.0);
            let ratio = if result.value == 0.0 { 0.0 } else { result.value / bly };
            table.push(vec![
                k.into(),
                mu.into(),
                boundary.as_str().into(),
                result.value.into(),
                result.contributing_points.into(),
                bly.into(),
                (result.value - bly).into(),
                ratio.into(),
                hash.clone().into(),
            ]);
        }
    }
    write_table(&table, args.output, &mut file, "riesz")?;
    file.finish()?;
    Ok(Outcome::default())
}

/// Generator parameters shared by `corpus` and `verify`.
#[derive(Clone, Debug, Serialize)]
pub struct CorpusSpec {
    pub family: String,
    pub d: usize,
    pub grid_n: usize,
    pub n_values: Vec<usize>,
    pub states: usize,
    pub seed: u64,
}

/// Default grid points per axis for dimension `d`.
pub fn default_grid_n(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 64,
        _ => 32,
    }
}

impl CorpusSpec {
    fn resolve(args: CorpusSourceArgs, file: &mut ConfigFile) -> Result<Self> {
        let family = file.pick("family", args.family, "box".to_string())?;
        let d = file.pick("d", args.d, 1)?;
        let grid_n = file.pick("grid_n", args.grid_n, default_grid_n(d))?;
        let n_values = file.pick_list("n_values", args.n_values, "10")?;
        let states = file.pick("states", args.states, 1)?;
        let seed = file.pick("seed", args.seed, 0)?;
        let spec = Self { family, d, grid_n, n_values, states, seed };
        spec.members()?;
        Ok(spec)
    }

    /// `(state_id, family)` for every member, in output order.
    pub fn members(&self) -> Result<Vec<(String, Family)>> {
        let mut out = Vec::new();
        for &count in &self.n_values {
            let probe = Family::from_name(&self.family, count, self.seed)?;
            if probe.seed().is_none() {
                out.push((format!("{}-d{}-N{count}", self.family, self.d), probe));
                continue;
            }
            for j in 0..self.states as u64 {
                let seed = self.seed + j;
                let family = Family::from_name(&self.family, count, seed)?;
                out.push((format!("{}-d{}-N{count}-s{seed}", self.family, self.d), family));
            }
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<Vec<NamedState>> {
        let grid = Grid::unit(self.d, self.grid_n)?;
        self.members()?
            .into_par_iter()
            .map(|(id, family)| Ok(NamedState { state: generate(&family, &grid)?, id, family: Some(family) }))
            .collect()
    }
}

pub struct NamedState {
    pub id: String,
    pub family: Option<Family>,
    pub state: OrbitalSet,
}

#[derive(Serialize)]
struct CorpusSettings {
    spec: CorpusSpec,
    include_density: bool,
}

fn corpus(args: CorpusArgs, mut file: ConfigFile) -> Result<Outcome> {
    let spec = CorpusSpec::resolve(args.source, &mut file)?;
    let include_density = file.pick("include_density", args.include_density, false)?;
    let out_dir = file
        .pick_opt("out_dir", args.out_dir)?
        .or_else(|| resolve_output(None, "corpus"))
        .ok_or_else(|| Error::InvalidArgument("corpus needs --out-dir or LTLAB_OUT_DIR".into()))?;
    let settings = CorpusSettings { spec, include_density };
    let hash = config_hash("corpus", &settings)?;
    std::fs::create_dir_all(&out_dir)?;
    let states = settings.spec.build()?;
    let mut table = Table::new(vec![
        "state_id",
        "family",
        "d",
        "N",
        "seed",
        "grid_n",
        "trace",
        "kinetic_energy",
        "file",
        "config_hash",
    ]);
    for named in &states {
        let family = named.family.expect("generated states carry their family");
        let file_name = format!("{}.json", named.id);
        write_state(&out_dir.join(&file_name), &named.state, family.name(), family.seed(), include_density)?;
        table.push(vec![
            named.id.clone().into(),
            family.name().into(),
            named.state.dimension().into(),
            family.count().into(),
            family.seed().map_or(Cell::Empty, Cell::from),
            named.state.grid().n.into(),
            named.state.trace().into(),
            named.state.kinetic_energy().into(),
            file_name.into(),
            hash.clone().into(),
        ]);
    }
    write_table(&table, args.output, &mut file, "corpus_index")?;
    file.finish()?;
    Ok(Outcome::default())
}

fn resolve_lambda(mass: f64, lambda: Option<f64>, fraction: f64) -> Result<f64> {
    match lambda {
        Some(l) => Ok(l),
        None if fraction > 0.0 && fraction <= 1.0 => Ok(fraction * mass),
        None => Err(Error::InvalidArgument(format!("lambda_fraction must lie in (0, 1], got {fraction}"))),
    }
}

#[derive(Serialize)]
struct PartitionSettings {
    input: String,
    lambda: f64,
    max_depth: u32,
}

fn partition(args: PartitionArgs, mut file: ConfigFile) -> Result<Outcome> {
    let input: PathBuf =
        file.pick_opt("input", args.input)?.ok_or_else(|| Error::InvalidArgument("partition needs --input".into()))?;
    let lambda = file.pick_opt("lambda", args.lambda)?;
    let fraction = file.pick("lambda_fraction", args.lambda_fraction, 0.25)?;
    let max_depth = file.pick("max_depth", args.max_depth, DEFAULT_MAX_DEPTH)?;
    let out = file.pick_opt("out", args.out)?;
    file.finish()?;

    let loaded = read_state(&input)?;
    let rho: DensityField = match loaded.stored_density {
        Some(rho) => rho,
        None => loaded.state.density().clone(),
    };
    let lambda = resolve_lambda(rho.mass(), lambda, fraction)?;
    let name = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let settings = PartitionSettings { input: name, lambda, max_depth };
    let hash = config_hash("partition", &settings)?;

    let tree = subdivide_with_depth(&rho, lambda, max_depth)?;
    let groups = group(&tree);
    let report = json!({
        "config_hash": hash,
        "partition": PartitionExport::new(&tree, &groups),
        "validation": validate_groups(&tree, &groups),
        "group_inequality": group_inequality_check(&groups, tree.dimension, lambda),
    });
    write_output(resolve_output(out, "partition.json").as_deref(), &json_bytes(&report)?)?;
    Ok(Outcome::default())
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum LocalMode {
    Exact,
    Closed,
}

impl std::str::FromStr for LocalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(LocalMode::Exact),
            "closed" => Ok(LocalMode::Closed),
            other => Err(Error::InvalidArgument(format!("unknown local mode {other:?} (expected exact or closed)"))),
        }
    }
}

#[derive(Serialize)]
struct VerifySettings {
    corpus: Option<CorpusSpec>,
    input_files: Vec<String>,
    lambda_fraction: f64,
    epsilons: Vec<f64>,
    constant: f64,
    local_mode: LocalMode,
}

/// Reports for one state, in emission order.
#[derive(Serialize)]
struct StateReports {
    state_id: String,
    d: usize,
    n: usize,
    grid_n: usize,
    lambda: f64,
    lt_ratio: f64,
    reports: Vec<InequalityReport>,
    #[serde(skip)]
    violations: usize,
}

fn state_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(dir)?.map(|entry| entry.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no state files in {}", dir.display())));
    }
    Ok(files)
}

fn verify_state(named: &NamedState, settings: &VerifySettings) -> Result<StateReports> {
    let state = &named.state;
    let d = state.dimension();
    let rho = state.density();
    let lambda = resolve_lambda(rho.mass(), None, settings.lambda_fraction)?;
    let tree = subdivide_with_depth(rho, lambda, DEFAULT_MAX_DEPTH)?;
    let groups = group(&tree);
    let mode = match settings.local_mode {
        LocalMode::Exact => LocalBoundMode::ExactRiesz,
        LocalMode::Closed => LocalBoundMode::calibrated(d),
    };

    let mut reports = Vec::new();
    let mut violations = 0;
    let ho = hoffmann_ostenhof_report(state);
    violations += usize::from(!ho.holds_within(HOFFMANN_OSTENHOF_TOLERANCE));
    reports.push(ho);
    for leaf in tree.leaves() {
        let mut report = local_bound_check(state, leaf, mode)?;
        report.params.lambda = Some(lambda);
        if settings.local_mode == LocalMode::Exact && !report.holds_within(DISCRETIZATION_TOLERANCE) {
            violations += 1;
        }
        reports.push(report);
    }
    reports.push(aggregate_bound(state, &tree, &groups)?);
    let coupled_epsilon = lambda.powf(-1.0 / d as f64);
    for leaf in tree.leaves() {
        let mut report = poincare_sobolev_step(rho, leaf, coupled_epsilon)?;
        report.params.lambda = Some(lambda);
        reports.push(report);
    }
    for &epsilon in &settings.epsilons {
        reports.push(main_inequality_check(state, epsilon, settings.constant)?);
    }
    Ok(StateReports {
        state_id: named.id.clone(),
        d,
        n: state.rank(),
        grid_n: state.grid().n,
        lambda,
        lt_ratio: lt_ratio(state)?,
        reports,
        violations,
    })
}

fn verify(args: VerifyArgs, mut file: ConfigFile) -> Result<Outcome> {
    let input_dir = file.pick_opt("input_dir", args.input_dir)?;
    let (corpus, named, input_files) = match input_dir {
        Some(dir) => {
            let files = state_files(&dir)?;
            let named = files
                .iter()
                .map(|path| {
                    let loaded = read_state(path)?;
                    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok(NamedState { id, family: None, state: loaded.state })
                })
                .collect::<Result<Vec<_>>>()?;
            let names = files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
            (None, named, names)
        }
        None => {
            let spec = CorpusSpec::resolve(args.source, &mut file)?;
            let named = spec.build()?;
            (Some(spec), named, Vec::new())
        }
    };
    let lambda_fraction = file.pick("lambda_fraction", args.lambda_fraction, 0.25)?;
    let explicit = file.pick_opt::<String>("epsilons", args.epsilons)?;
    let eps_min = file.pick("eps_min", args.eps_min, 0.05)?;
    let eps_max = file.pick("eps_max", args.eps_max, 0.85)?;
    let eps_points = file.pick("eps_points", args.eps_points, 17)?;
    let epsilons = match explicit {
        Some(raw) => parse_list("epsilons", &raw)?,
        None => {
            if !(eps_min > 0.0 && eps_max >= eps_min) || eps_points == 0 {
                return Err(Error::InvalidArgument("need 0 < eps_min <= eps_max and eps_points >= 1".into()));
            }
            log_space(eps_min, eps_max, eps_points)
        }
    };
    let constant = file.pick("constant", args.constant, 1.0)?;
    let local_mode = file.pick("local_mode", args.local_mode.map(|s| s.parse()).transpose()?, LocalMode::Exact)?;
    let plot_dir = file.pick_opt("plot_dir", args.plot_dir)?;
    let settings = VerifySettings { corpus, input_files, lambda_fraction, epsilons, constant, local_mode };
    let hash = config_hash("verify", &settings)?;

    let results: Vec<StateReports> = named.par_iter().map(|n| verify_state(n, &settings)).collect::<Result<_>>()?;
    let violations = results.iter().map(|r| r.violations).sum();

    let dimensions: Vec<usize> = named.iter().map(|n| n.state.dimension()).collect();
    let calibration: Option<Vec<CalibrationRow>> =
        if dimensions.windows(2).all(|w| w[0] == w[1]) && settings.epsilons.iter().all(|&e| e < 1.0) {
            let states: Vec<OrbitalSet> = named.into_iter().map(|n| n.state).collect();
            Some(calibrate_constant(&states, &settings.epsilons)?)
        } else {
            None
        };

    let format = file.pick("format", args.output.format, Format::Csv)?;
    let out = file.pick_opt("out", args.output.out)?;
    file.finish()?;
    let bytes = match format {
        Format::Csv => verify_table(&results, &hash).to_csv()?,
        Format::Json => json_bytes(&json!({
            "config_hash": hash,
            "states": results,
            "calibration": calibration,
            "calibration_band": calibration.as_deref().and_then(scaled_band),
        }))?,
    };
    write_output(resolve_output(out, &format!("verify.{}", format.extension())).as_deref(), &bytes)?;
    if let (Some(dir), Some(rows)) = (plot_dir, &calibration) {
        let columns: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.epsilon, r.constant, r.scaled]).collect();
        let band = scaled_band(rows).map_or("none".to_string(), output::format_float);
        emit_plot_data(
            &dir.join("calibration.dat"),
            &["epsilon", "constant", "scaled"],
            &columns,
            &[format!("config_hash {hash}"), format!("scaled_band {band}")],
        )?;
    }
    Ok(Outcome { violations })
}

fn verify_table(results: &[StateReports], hash: &str) -> Table {
    let mut table = Table::new(vec![
        "state_id",
        "inequality_id",
        "d",
        "N",
        "epsilon",
        "lambda",
        "lhs",
        "rhs",
        "slack",
        "minimal_constant",
        "grid_n",
        "config_hash",
    ]);
    for r in results {
        for report in &r.reports {
            let lambda = match report.id {
                InequalityId::HoffmannOstenhof | InequalityId::MainTheorem => None,
                _ => Some(r.lambda),
            };
            table.push(vec![
                r.state_id.clone().into(),
                report.id.as_str().into(),
                r.d.into(),
                r.n.into(),
                report.params.epsilon.into(),
                lambda.into(),
                report.lhs.into(),
                report.rhs.into(),
                report.slack.into(),
                report.minimal_constant.into(),
                r.grid_n.into(),
                hash.into(),
            ]);
        }
    }
    table
}

#[derive(Serialize)]
struct ScanSettings {
    family: String,
    d: usize,
    grid_n: usize,
    n_values: Vec<usize>,
    seed: u64,
}

/// Particle numbers `n_min, 2 n_min, 4 n_min, ...` up to `n_max`.
pub fn doubling_range(n_min: usize, n_max: usize) -> Result<Vec<usize>> {
    if n_min == 0 || n_max < n_min {
        return Err(Error::InvalidArgument(format!("need 1 <= n_min <= n_max, got {n_min}..{n_max}")));
    }
    Ok(std::iter::successors(Some(n_min), |&n| Some(2 * n)).take_while(|&n| n <= n_max).collect())
}

fn scan(args: ScanArgs, mut file: ConfigFile) -> Result<Outcome> {
    let family = file.pick("family", args.family, "box".to_string())?;
    let d = file.pick("d", args.d, 1)?;
    let grid_n = file.pick("grid_n", args.grid_n, default_grid_n(d))?;
    let n_min = file.pick("n_min", args.n_min, 10)?;
    let n_max = file.pick("n_max", args.n_max, 80)?;
    let explicit = file.pick_opt::<String>("n_values", args.n_values)?;
    let n_values = match explicit {
        Some(raw) => parse_list("n_values", &raw)?,
        None => doubling_range(n_min, n_max)?,
    };
    let seed = file.pick("seed", args.seed, 0)?;
    let plot_dir = file.pick_opt("plot_dir", args.plot_dir)?;
    let format = file.pick("format", args.output.format, Format::Csv)?;
    let out = file.pick_opt("out", args.output.out)?;
    file.finish()?;
    let settings = ScanSettings { family, d, grid_n, n_values, seed };
    let hash = config_hash("scan", &settings)?;

    let grid = Grid::unit(d, grid_n)?;
    let k = SemiclassicalConstants::new(d, 1)?.kinetic_constant;
    let rows: Vec<[f64; 5]> = settings
        .n_values
        .par_iter()
        .map(|&count| {
            let state = generate(&Family::from_name(&settings.family, count, seed)?, &grid)?;
            let rho = state.density();
            let t = state.kinetic_energy();
            let tf = thomas_fermi_term(rho);
            Ok([count as f64, t, tf, gradient_term(rho), t / tf])
        })
        .collect::<Result<_>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (kinetic_exponent, gradient_exponent) = if rows.len() >= 2 {
        let t: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let g: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        (Some(log_log_slope(&ns, &t)), Some(log_log_slope(&ns, &g)))
    } else {
        (None, None)
    };

    let mut table = Table::new(vec![
        "N",
        "kinetic_energy",
        "thomas_fermi",
        "gradient",
        "lt_ratio",
        "ratio_over_kcl",
        "config_hash",
    ]);
    for r in &rows {
        table.push(vec![
            (r[0] as usize).into(),
            r[1].into(),
            r[2].into(),
            r[3].into(),
            r[4].into(),
            (r[4] / k).into(),
            hash.clone().into(),
        ]);
    }
    let bytes = match format {
        Format::Csv => table.to_csv()?,
        Format::Json => json_bytes(&json!({
            "config_hash": hash,
            "rows": table.to_json_rows(),
            "kinetic_exponent": kinetic_exponent,
            "gradient_exponent": gradient_exponent,
        }))?,
    };
    write_output(resolve_output(out, &format!("scan.{}", format.extension())).as_deref(), &bytes)?;
    if let Some(dir) = plot_dir {
        let ratio: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[4] / k]).collect();
        emit_plot_data(&dir.join("ratio.dat"), &["N", "ratio_over_kcl"], &ratio, &[format!("config_hash {hash}")])?;
        let growth: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1], r[3]]).collect();
        let exponent = |e: Option<f64>| e.map_or("none".to_string(), output::format_float);
        emit_plot_data(
            &dir.join("growth.dat"),
            &["N", "kinetic_energy", "gradient"],
            &growth,
            &[
                format!("config_hash {hash}"),
                format!("kinetic_exponent {}", exponent(kinetic_exponent)),
                format!("gradient_exponent {}", exponent(gradient_exponent)),
            ],
        )?;
    }
    Ok(Outcome::default())
}
