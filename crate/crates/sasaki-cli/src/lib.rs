//! Subcommand implementations for the `sasaki` binary.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sasaki::fields::Grid;
use sasaki::flow::{self, FinalMap};
use sasaki::maps::{self, AnalyticMap, MapField};
use sasaki::verify::{self, Selection, SuiteConfig};
use sasaki::{Error, Model, ModelKind, ModelParams};

use config::{ConfigError, Ini, Jets};

pub const ENV_OUT_DIR: &str = "SASAKI_OUT_DIR";
pub const ENV_THREADS: &str = "SASAKI_THREADS";
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "sasaki", version, about = "Pseudo-Hermitian geometry checks and subelliptic heat flows")]
pub struct Cli {
    /// Output directory [env: SASAKI_OUT_DIR] (default: out)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Random seed (default: config [run] seed, else 7)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = available parallelism [env: SASAKI_THREADS]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the identity-check suite
    Verify(VerifyArgs),
    /// Holomorphic sectional curvature and negativity class of a model
    Curvature(CurvatureArgs),
    /// Horizontal energies of a test map
    Energy(EnergyArgs),
    /// Run the subelliptic heat flow described by a config file
    Flow(FlowArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run every registered check
    #[arg(long, conflicts_with = "check")]
    pub all: bool,
    /// Run only this check (repeatable)
    #[arg(long)]
    pub check: Vec<String>,
    /// Report path (default: <out-dir>/verify_report.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the registered check ids and exit
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map spec, e.g. `identity`, `affine:2,0,0,1`, `perturbed:3:0.05`
    #[arg(long)]
    pub map: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Use grid derivatives instead of exact jets
    #[arg(long)]
    pub discrete: bool,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the step count from the config
    #[arg(long)]
    pub steps: Option<usize>,
}

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// Usage or configuration problem: exit 2.
    Config(String),
    /// A check failed or a run aborted: exit 1.
    Run(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Run(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::UnknownModel(_)
            | Error::InvalidParam(_)
            | Error::InvalidGrid(_)
            | Error::UnknownMap(_)
            | Error::Unsupported(_)
            | Error::UnknownCheck(_)
            | Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

/// Settings shared by every subcommand after merging flags, environment and config.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

/// Flag, then environment, then config `[run]`, then default.
pub fn resolve_common(cli: &Cli, ini: Option<&Ini>, env: impl Fn(&str) -> Option<String>) -> Result<Common, Failure> {
    let run = match ini {
        Some(i) => config::run_section(i)?,
        None => Default::default(),
    };
    let env_threads = match env(ENV_THREADS) {
        Some(v) => Some(v.trim().parse::<usize>().map_err(|_| Failure::Config(format!("{ENV_THREADS}: expected a thread count, got `{v}`")))?),
        None => None,
    };
    Ok(Common {
        out_dir: cli.out_dir.clone().or_else(|| env(ENV_OUT_DIR).map(PathBuf::from)).or(run.out_dir).unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed.or(run.seed).unwrap_or(DEFAULT_SEED),
        threads: cli.threads.or(env_threads).or(run.threads).unwrap_or(0),
    })
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| Failure::Run(format!("cannot write {}: {e}", path.display()));
    std::fs::create_dir_all(&dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn load(path: Option<&PathBuf>) -> Result<Option<Ini>, Failure> {
    path.map(|p| Ini::load(p).map_err(Failure::from)).transpose()
}

fn init_threads(n: usize) {
    // a second initialisation (tests calling `run` twice) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

/// Runs one parsed command line; the returned text goes to standard output.
pub fn run(cli: &Cli) -> Result<String, Failure> {
    run_with_env(cli, |k| std::env::var(k).ok())
}

pub fn run_with_env(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<String, Failure> {
    match &cli.command {
        Command::Verify(a) => {
            let ini = load(a.config.as_ref())?;
            let common = resolve_common(cli, ini.as_ref(), env)?;
            init_threads(common.threads);
            verify_cmd(a, ini.as_ref(), &common)
        }
        Command::Curvature(a) => {
            let ini = load(a.config.as_ref())?;
            let common = resolve_common(cli, ini.as_ref(), env)?;
            init_threads(common.threads);
            curvature_cmd(a, ini.as_ref(), &common)
        }
        Command::Energy(a) => {
            let ini = load(a.config.as_ref())?;
            let common = resolve_common(cli, ini.as_ref(), env)?;
            init_threads(common.threads);
            energy_cmd(a, ini.as_ref(), &common)
        }
        Command::Flow(a) => {
            let ini = Ini::load(&a.config)?;
            let common = resolve_common(cli, Some(&ini), env)?;
            init_threads(common.threads);
            flow_cmd(a, &ini, &common)
        }
    }
}

fn verify_cmd(a: &VerifyArgs, ini: Option<&Ini>, common: &Common) -> Result<String, Failure> {
    if a.list {
        return Ok(verify::check_ids().join("\n") + "\n");
    }
    let (cfg_sel, cfg) = match ini {
        Some(i) => config::suite_config(i, common.seed)?,
        None => (Selection::All, SuiteConfig { seed: common.seed, ..SuiteConfig::default() }),
    };
    let sel = if a.all {
        Selection::All
    } else if !a.check.is_empty() {
        Selection::Ids(a.check.clone())
    } else {
        cfg_sel
    };
    let results = verify::run_suite(&sel, &cfg)?;
    let out = a.out.clone().unwrap_or_else(|| common.out_dir.join("verify_report.json"));
    write_atomic(&out, verify::report_json(&results)?.as_bytes())?;
    let table = verify::report_table(&results);
    if verify::all_pass(&results) {
        Ok(table)
    } else {
        Err(Failure::Run(format!("{table}one or more checks failed (report: {})", out.display())))
    }
}

#[derive(Serialize)]
struct CurvaturePoint {
    point: [f64; 3],
    hol_sectional: f64,
    negativity: sasaki::geometry::NegativityClass,
}

#[derive(Serialize)]
struct CurvatureReport {
    model: String,
    seed: u64,
    min_hol_sectional: f64,
    max_hol_sectional: f64,
    points: Vec<CurvaturePoint>,
}

fn curvature_cmd(a: &CurvatureArgs, ini: Option<&Ini>, common: &Common) -> Result<String, Failure> {
    let base = match ini {
        Some(i) => Some(config::curvature_config(i)?),
        None => None,
    };
    let model = match (&a.model, a.lambda, a.scale) {
        (None, None, None) => match &base {
            Some(b) => b.model.clone(),
            None => Model::space_form(-1.0)?,
        },
        _ => {
            let kind = a.model.clone().unwrap_or_else(|| base.as_ref().map_or("space-form-chart".into(), |b| b.model.kind.name().into()));
            sasaki::build_model(&kind, &ModelParams { lambda: a.lambda, scale: a.scale })?
        }
    };
    let n = a.points.or(base.map(|b| b.points)).unwrap_or(50);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let p = model.sample_point(&mut rng);
        points.push(CurvaturePoint { point: p, hol_sectional: model.hol_sectional(&p, &[0.0, 1.0, 0.0])?, negativity: model.negativity_class(&p)? });
    }
    let min = points.iter().map(|p| p.hol_sectional).fold(f64::INFINITY, f64::min);
    let max = points.iter().map(|p| p.hol_sectional).fold(f64::NEG_INFINITY, f64::max);
    let classes: std::collections::BTreeSet<String> = points.iter().map(|p| format!("{:?}", p.negativity)).collect();
    let report = CurvatureReport { model: model.name(), seed: common.seed, min_hol_sectional: min, max_hol_sectional: max, points };
    let out = common.out_dir.join("curvature.json");
    write_atomic(&out, (serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n").as_bytes())?;
    Ok(format!(
        "{}: holomorphic sectional curvature in [{min:.9}, {max:.9}] over {n} points; classes {:?}\nwrote {}\n",
        report.model,
        classes,
        out.display()
    ))
}

#[derive(Serialize)]
struct EnergyReport {
    map: String,
    jets: &'static str,
    grid: [usize; 3],
    energies: maps::Energies,
    #[serde(skip_serializing_if = "Option::is_none")]
    defects: Option<maps::Defects>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pullback_residual: Option<f64>,
}

fn energy_cmd(a: &EnergyArgs, ini: Option<&Ini>, common: &Common) -> Result<String, Failure> {
    let base = match ini {
        Some(i) => config::energy_config(i)?,
        None => config::EnergyConfig { map: "identity".into(), n: 32, jets: Jets::Exact },
    };
    let spec = a.map.clone().unwrap_or(base.map);
    let n = a.n.unwrap_or(base.n);
    let jets = if a.discrete { Jets::Discrete } else { base.jets };
    let map: AnalyticMap = spec.parse()?;
    let grid = match map.source.kind {
        ModelKind::HeisenbergNilmanifold => Grid::nilmanifold(n)?,
        ModelKind::RoundSphere3 => Grid::sphere(&map.source, n, 4 * n, 4 * n)?,
        ModelKind::SpaceFormChart => return Err(Failure::Config("energies need a compact source model".into())),
    };
    let dims = {
        let last = grid.ijk(grid.len() - 1);
        [last[0] + 1, last[1] + 1, last[2] + 1]
    };
    let report = match jets {
        Jets::Exact => EnergyReport {
            map: map.name.clone(),
            jets: "exact",
            grid: dims,
            energies: maps::energies_analytic(&map, &grid)?,
            defects: None,
            pullback_residual: None,
        },
        Jets::Discrete => {
            let f = MapField::from_analytic(&grid, &map)?;
            EnergyReport {
                map: map.name.clone(),
                jets: "discrete",
                grid: dims,
                energies: maps::energies(&f),
                defects: Some(maps::defects(&f)),
                pullback_residual: Some(maps::pullback_residual(&f)),
            }
        }
    };
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
    let out = common.out_dir.join("energy.json");
    write_atomic(&out, json.as_bytes())?;
    Ok(format!("{json}wrote {}\n", out.display()))
}

fn flow_cmd(a: &FlowArgs, ini: &Ini, common: &Common) -> Result<String, Failure> {
    let mut cfg = config::flow_config(ini, common.seed)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    // the stability warning goes out before the run so it is seen even if the flow blows up
    let (_, unstable) = cfg.time_step()?;
    if let Some(w) = &unstable {
        eprintln!("warning: {w}");
    }
    let out = flow::run_flow(&cfg)?;
    for w in out.warnings.iter().filter(|w| Some(*w) != unstable.as_ref()) {
        eprintln!("warning: {w}");
    }
    let csv = common.out_dir.join("flow_trace.csv");
    let summary = common.out_dir.join("flow_summary.json");
    write_atomic(&csv, out.trace.to_csv().as_bytes())?;
    let json = serde_json::to_string_pretty(&out.summary).map_err(Error::from)? + "\n";
    write_atomic(&summary, json.as_bytes())?;
    let grid = match &out.final_map {
        FinalMap::Intrinsic(f) => f.grid.len(),
        FinalMap::Extrinsic(u) => u.grid.len(),
    };
    Ok(format!(
        "{} steps on {grid} nodes, dt = {:e}: {:?}\nwrote {} and {}\n",
        out.summary.steps,
        out.dt,
        out.summary.classification,
        csv.display(),
        summary.display()
    ))
}
