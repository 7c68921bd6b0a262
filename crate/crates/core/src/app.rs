//! Run configuration and the command implementations behind the `leakinv`
//! binary.
//!
//! Every command reads one JSON run configuration (paths inside it are
//! relative to the file), writes plain CSV/JSON into the output directory
//! and finishes with `manifest.json` listing the config hash, seed, version
//! and a digest of each output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cones::{extract_cones, ConeConfig, ConeSet};
use crate::coverage::{coverage_map, coverage_report, CoverageConfig, EvaluationSet, GridSpec, SensorLayout};
use crate::error::{Error, Result};
use crate::geometry::{Point2, SiteSpec};
use crate::inversion::{
    invert, monitor_step, objective_wmse, residuals, seeded, InversionConfig, InversionProblem, InversionSolution,
    MonitorConfig, MonitorEvent, MonitoringState, ProblemClass, SourceCandidate,
};
use crate::io;
use crate::placement::{grow_sensor_count, optimize_placement, PlacementConfig, PlacementProblem};
use crate::plume::{PlumeSource, Receptor, WeatherSample};
use crate::records::{weighted_records, RecordConfig, SensorStream};
use crate::seeds;
use crate::wind::{
    conditioned_wind, parse_wind_rose, synthesize_sensor_data, synthetic_wind, SensorNoise, WindModelConfig,
    WindRealization,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WindModelKind {
    #[default]
    Synthetic,
    Conditioned,
    /// Weather CSVs listed under `replay`.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindSection {
    pub model: WindModelKind,
    pub rose: Option<PathBuf>,
    pub count: usize,
    pub replay: Vec<PathBuf>,
    #[serde(flatten)]
    pub params: WindModelConfig,
}

impl Default for WindSection {
    fn default() -> Self {
        Self {
            model: WindModelKind::default(),
            rose: None,
            count: 1,
            replay: Vec::new(),
            params: WindModelConfig::default(),
        }
    }
}

/// Where candidate leaks come from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluationSource {
    /// The site's evaluation points.
    #[default]
    Site,
    Grid {
        nx: usize,
        ny: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorSection {
    #[serde(flatten)]
    pub config: MonitorConfig,
    /// First step start; defaults to the first weather timestamp.
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementSection {
    #[serde(flatten)]
    pub config: PlacementConfig,
    /// Largest sensor count for growth runs.
    pub grow: Option<usize>,
    pub min_gain: f64,
    pub evaluation: EvaluationSource,
    pub trial_z: f64,
    pub trial_rate: f64,
}

impl Default for PlacementSection {
    fn default() -> Self {
        Self {
            config: PlacementConfig::default(),
            grow: None,
            min_gain: 0.0,
            evaluation: EvaluationSource::default(),
            trial_z: 2.0,
            trial_rate: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageSection {
    #[serde(flatten)]
    pub config: CoverageConfig,
    pub grid: GridSpec,
    /// Sensor positions; the site's sensors when absent.
    pub layout: Option<Vec<[f64; 2]>>,
    pub sensor_z: Option<f64>,
    pub evaluation: EvaluationSource,
    pub trial_z: f64,
    pub trial_rate: f64,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            config: CoverageConfig::default(),
            grid: GridSpec::default(),
            layout: None,
            sensor_z: None,
            evaluation: EvaluationSource::default(),
            trial_z: 2.0,
            trial_rate: 5.0,
        }
    }
}

/// Parameters for every command; each reads the blocks it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub site: Option<PathBuf>,
    /// Sensor CSV.
    pub sensors: Option<PathBuf>,
    /// Weather CSV.
    pub weather: Option<PathBuf>,
    /// Leak used by `simulate`, and as the known truth in `invert` reports.
    pub source: Option<PlumeSource>,
    pub wind: WindSection,
    pub noise: SensorNoise,
    pub records: RecordConfig,
    pub cones: Option<ConeConfig>,
    pub class: Option<ProblemClass>,
    #[serde(alias = "solver")]
    pub inversion: InversionConfig,
    pub monitor: MonitorSection,
    pub placement: PlacementSection,
    pub coverage: CoverageSection,
}

impl RunConfig {
    /// Resolves relative paths against `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.site, &mut self.sensors, &mut self.weather, &mut self.wind.rose].into_iter().flatten() {
            fix(p);
        }
        self.wind.replay.iter_mut().for_each(fix);
    }
}

#[derive(Debug, Parser)]
#[command(name = "leakinv", version, about = "Methane leak inversion and sensor placement")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Synthetic sensor and weather CSVs for a known leak.
    Simulate,
    /// Wind realizations as weather CSVs.
    Wind {
        #[arg(long, value_enum)]
        model: Option<WindModelKind>,
        #[arg(long)]
        count: Option<usize>,
        /// Wind-rose CSV for the conditioned model.
        #[arg(long)]
        rose: Option<PathBuf>,
    },
    /// Locate a leak from sensor and weather CSVs.
    Invert,
    /// Replay CSVs through the moving-window monitor.
    Monitor {
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many steps.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Optimise sensor positions.
    Place {
        /// Grow the sensor count up to N (`N` or `1..N`).
        #[arg(long)]
        grow: Option<String>,
    },
    /// Coverage categories on a grid of trial leaks.
    CoverageMap,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum AppError {
    /// Bad or missing configuration or input files (exit 2).
    Config(String),
    /// Failure while running (exit 1).
    Runtime(Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => AppError::Config(m),
            other => AppError::Runtime(other),
        }
    }
}

type AppResult<T> = std::result::Result<T, AppError>;

fn config_err<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> AppError + '_ {
    move |e| AppError::Config(format!("{what}: {e}"))
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> AppResult<&'a T> {
    v.as_ref().ok_or_else(|| AppError::Config(format!("missing '{what}' in the run configuration")))
}

fn read_input(path: &Path) -> AppResult<String> {
    io::read_to_string(path).map_err(config_err("cannot read input"))
}

/// Loaded configuration plus its hash and the effective seed.
struct Context {
    config: RunConfig,
    config_sha256: String,
    seed: u64,
    out: PathBuf,
    outputs: BTreeMap<String, String>,
    notes: Vec<String>,
}

impl Context {
    fn site(&self) -> AppResult<SiteSpec> {
        let path = require(&self.config.site, "site")?;
        let text = read_input(path)?;
        SiteSpec::from_json_str(&text).map_err(config_err("invalid site file"))
    }

    fn write(&mut self, name: &str, contents: &str) -> AppResult<()> {
        fs::write(self.out.join(name), contents).map_err(|e| AppError::Runtime(e.into()))?;
        self.outputs.insert(name.to_string(), io::sha256_hex(contents.as_bytes()));
        Ok(())
    }

    fn manifest(&mut self, command: &str) -> AppResult<()> {
        let m = Manifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed: self.seed,
            config_sha256: self.config_sha256.clone(),
            config: self.config.clone(),
            outputs: self.outputs.clone(),
            notes: self.notes.clone(),
        };
        let text = io::to_json(&m)?;
        fs::write(self.out.join("manifest.json"), text).map_err(|e| AppError::Runtime(e.into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

fn load(cli: &Cli) -> AppResult<Context> {
    let (mut config, config_sha256) = match &cli.config {
        Some(path) => {
            let text = read_input(path)?;
            let mut c: RunConfig = serde_json::from_str(&text).map_err(config_err("invalid run configuration"))?;
            c.rebase(path.parent().unwrap_or(Path::new(".")));
            (c, io::sha256_hex(text.as_bytes()))
        }
        None => (RunConfig::default(), io::sha256_hex(b"")),
    };
    if let Some(s) = cli.seed {
        config.seed = Some(s);
    }
    let seed = config.seed.unwrap_or(0);
    let mut notes = Vec::new();
    if config.seed.is_none() {
        notes.push("no seed given; using 0".into());
        config.seed = Some(0);
    }
    fs::create_dir_all(&cli.out).map_err(|e| AppError::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    Ok(Context { config, config_sha256, seed, out: cli.out.clone(), outputs: BTreeMap::new(), notes })
}

fn site_receptors(site: &SiteSpec) -> Vec<(String, Receptor)> {
    site.sensors.iter().map(|s| (s.id.clone(), Receptor { x: s.x, y: s.y, z: s.z })).collect()
}

/// Realizations per the wind section; realization `j` is seeded from the
/// master seed and `j`.
fn realizations(ctx: &mut Context, count: usize) -> AppResult<Vec<WindRealization>> {
    let w = ctx.config.wind.clone();
    if count == 0 {
        return Err(AppError::Config("wind count must be at least 1".into()));
    }
    let params = |j: usize| WindModelConfig { seed: seeds::derive(ctx.seed, &[0x77, j as u64]), ..w.params.clone() };
    let out = match w.model {
        WindModelKind::Synthetic => (0..count).map(|j| synthetic_wind(&params(j))).collect::<Result<Vec<_>>>()?,
        WindModelKind::Conditioned => {
            let path = require(&w.rose, "wind.rose")?;
            if !path.exists() {
                return Err(AppError::Config(format!("wind rose {} not found", path.display())));
            }
            let rose = parse_wind_rose(path).map_err(config_err("invalid wind rose"))?;
            (0..count).map(|j| conditioned_wind(&rose, &params(j))).collect::<Result<Vec<_>>>()?
        }
        WindModelKind::Replay => {
            if w.replay.is_empty() {
                return Err(AppError::Config("wind.replay lists no weather CSVs".into()));
            }
            w.replay
                .iter()
                .map(|p| {
                    let samples = io::read_weather_csv(&read_input(p)?).map_err(config_err("invalid weather CSV"))?;
                    Ok(WindRealization { samples, periods: Vec::new(), diagnostics: Vec::new() })
                })
                .collect::<AppResult<Vec<_>>>()?
        }
    };
    for (j, r) in out.iter().enumerate() {
        ctx.notes.extend(r.diagnostics.iter().map(|d| format!("realization {}: {d}", j + 1)));
    }
    Ok(out)
}

fn cmd_simulate(ctx: &mut Context) -> AppResult<()> {
    let site = ctx.site()?;
    let source = *require(&ctx.config.source, "source")?;
    if site.sensors.is_empty() {
        return Err(AppError::Config("the site file lists no sensors".into()));
    }
    let wind = realizations(ctx, 1)?.remove(0);
    let noise_seed = seeds::derive(ctx.seed, &[0x6e]);
    let (streams, weather) =
        synthesize_sensor_data(&wind, &source, &site_receptors(&site), ctx.config.noise, noise_seed)?;
    ctx.write("sensors.csv", &io::write_sensor_csv(&streams))?;
    ctx.write("weather.csv", &io::write_weather_csv(&weather))?;
    ctx.manifest("simulate")
}

fn cmd_wind(
    ctx: &mut Context,
    model: Option<WindModelKind>,
    count: Option<usize>,
    rose: Option<PathBuf>,
) -> AppResult<()> {
    if let Some(m) = model {
        ctx.config.wind.model = m;
    }
    if let Some(c) = count {
        ctx.config.wind.count = c;
    }
    if let Some(r) = rose {
        ctx.config.wind.rose = Some(r);
    }
    let n = ctx.config.wind.count;
    let all = realizations(ctx, n)?;
    for (j, r) in all.iter().enumerate() {
        ctx.write(&format!("wind_{:03}.csv", j + 1), &io::write_weather_csv(&r.samples))?;
    }
    ctx.manifest("wind")
}

fn load_observations(ctx: &Context, site: &SiteSpec) -> AppResult<(Vec<SensorStream>, Vec<WeatherSample>)> {
    let sensors = read_input(require(&ctx.config.sensors, "sensors")?)?;
    let weather = read_input(require(&ctx.config.weather, "weather")?)?;
    let streams = io::read_sensor_csv(&sensors, &site.sensors).map_err(config_err("invalid sensor CSV"))?;
    let weather = io::read_weather_csv(&weather).map_err(config_err("invalid weather CSV"))?;
    Ok((streams, weather))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthReport {
    pub source: SourceCandidate,
    /// Misfit of the known source on the same records.
    pub objective: f64,
    pub gap_2d: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionReport {
    pub solution: InversionSolution,
    pub cones: Option<ConeSet>,
    pub truth: Option<TruthReport>,
    pub diagnostics: Vec<String>,
}

fn resolve_class(
    requested: Option<ProblemClass>,
    site: &SiteSpec,
    cones: Option<&ConeSet>,
    notes: &mut Vec<String>,
) -> ProblemClass {
    let detected = ProblemClass::detect(site, cones);
    match requested {
        Some(c) if (c.uses_cuts() && !detected.uses_cuts()) || (c.uses_subspaces() && site.n_b() < 2) => {
            notes.push(format!("class {c:?} not available with these data; using {detected:?}"));
            detected
        }
        Some(c) => c,
        None => detected,
    }
}

fn cmd_invert(ctx: &mut Context) -> AppResult<()> {
    let site = ctx.site()?;
    let (streams, weather) = load_observations(ctx, &site)?;
    let cfg = ctx.config.clone();
    let out = weighted_records(&streams, &weather, &cfg.records)?;
    let mut diagnostics = out.diagnostics.clone();
    let wants_cuts = cfg.class.is_some_and(|c| c.uses_cuts());
    let cone_cfg = cfg.cones.clone().or_else(|| wants_cuts.then(ConeConfig::default));
    let cones = cone_cfg.map(|c| extract_cones(&streams, &weather, &site.master, &c));
    let class = resolve_class(cfg.class, &site, cones.as_ref(), &mut diagnostics);
    let problem = InversionProblem::new(class, &out.set, &site, cones.as_ref())?;
    let solution = invert(&problem, &seeded(&cfg.inversion, ctx.seed, &[0x69]))?;

    let truth = match (cfg.source, out.set.is_empty()) {
        (Some(s), false) => {
            let t = SourceCandidate::new(s.x, s.y, s.z, s.rate);
            Some(TruthReport {
                source: t,
                objective: objective_wmse(&t, &out.set)?,
                gap_2d: solution.best.map(|b| b.distance_2d(&t)),
            })
        }
        _ => None,
    };
    let resid = match &solution.best {
        Some(b) => residuals(b, &out.set)?,
        None => Vec::new(),
    };
    let report = InversionReport { solution, cones, truth, diagnostics };
    ctx.write("report.json", &io::to_json(&report)?)?;
    ctx.write("residuals.csv", &io::write_residuals_csv(&resid))?;
    ctx.manifest("invert")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub steps: u64,
    pub now: f64,
    pub status: crate::inversion::LeakStatus,
    pub events: usize,
    pub finished: bool,
}

fn cmd_monitor(ctx: &mut Context, resume: bool, max_steps: Option<usize>) -> AppResult<()> {
    let site = ctx.site()?;
    let (streams, weather) = load_observations(ctx, &site)?;
    let mut cfg = ctx.config.monitor.config.clone();
    cfg.seed = ctx.seed;
    let checkpoint = ctx.out.join("checkpoint.json");
    let events_path = ctx.out.join("events.jsonl");

    let t_first = weather.first().map(|w| w.t).ok_or_else(|| AppError::Config("weather CSV is empty".into()))?;
    let t_last = weather.last().map(|w| w.t).unwrap_or(t_first);
    let mut state = if resume {
        let text = read_input(&checkpoint)?;
        serde_json::from_str::<MonitoringState>(&text).map_err(config_err("invalid checkpoint"))?
    } else {
        let origin = match &ctx.config.monitor.origin {
            Some(s) => io::parse_timestamp(s).map_err(config_err("monitor.origin"))?,
            None => t_first,
        };
        fs::write(&events_path, "").map_err(|e| AppError::Runtime(e.into()))?;
        MonitoringState::new(origin, &site_receptors(&site))
    };

    let mut log =
        OpenOptions::new().append(true).create(true).open(&events_path).map_err(|e| AppError::Runtime(e.into()))?;
    let mut done = 0usize;
    while state.now <= t_last && max_steps.is_none_or(|m| done < m) {
        let (t0, t1) = (state.now, state.now + cfg.step_s);
        let batch: Vec<SensorStream> = streams.iter().map(|s| s.slice(t0, t1)).collect();
        let wx: Vec<WeatherSample> = weather.iter().filter(|w| w.t >= t0 && w.t < t1).copied().collect();
        let report = monitor_step(&mut state, &batch, &wx, &site, &cfg)?;
        for e in &report.events {
            let line = serde_json::to_string(e).map_err(|e| AppError::Runtime(e.into()))?;
            writeln!(log, "{line}").map_err(|e| AppError::Runtime(e.into()))?;
        }
        fs::write(&checkpoint, io::to_json(&state)?).map_err(|e| AppError::Runtime(e.into()))?;
        done += 1;
    }
    drop(log);

    let events_text = read_input(&events_path)?;
    let summary = MonitorSummary {
        steps: state.step,
        now: state.now,
        status: state.status,
        events: events_text.lines().count(),
        finished: state.now > t_last,
    };
    ctx.outputs.insert("events.jsonl".into(), io::sha256_hex(events_text.as_bytes()));
    let cp = read_input(&checkpoint)?;
    ctx.outputs.insert("checkpoint.json".into(), io::sha256_hex(cp.as_bytes()));
    ctx.write("monitor.json", &io::to_json(&summary)?)?;
    ctx.manifest("monitor")
}

/// Parses the event log written by `monitor`.
pub fn read_events(text: &str) -> Result<Vec<MonitorEvent>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
}

fn evaluation_set(source: EvaluationSource, z: f64, rate: f64, site: &SiteSpec) -> AppResult<EvaluationSet> {
    let points = match source {
        EvaluationSource::Site => site.evaluation_points(),
        EvaluationSource::Grid { nx, ny } => GridSpec { nx, ny, extent: None }.points(site)?,
    };
    EvaluationSet::new(points, z, rate, site).map_err(config_err("evaluation set"))
}

fn parse_grow(s: &str) -> AppResult<usize> {
    let last = s.rsplit("..").next().unwrap_or(s).trim_start_matches('=');
    let first = s.split("..").next().unwrap_or("1");
    if s.contains("..") && first.trim() != "1" {
        return Err(AppError::Config(format!("--grow ranges must start at 1, got '{s}'")));
    }
    last.trim().parse().map_err(|_| AppError::Config(format!("cannot parse --grow '{s}'")))
}

fn cmd_place(ctx: &mut Context, grow: Option<String>) -> AppResult<()> {
    let site = ctx.site()?;
    let sec = ctx.config.placement.clone();
    let grow = match grow {
        Some(g) => Some(parse_grow(&g)?),
        None => sec.grow,
    };
    let n_w = ctx.config.wind.count;
    let wind = realizations(ctx, n_w)?;
    let set = evaluation_set(sec.evaluation, sec.trial_z, sec.trial_rate, &site)?;
    let mut pc = sec.config.clone();
    pc.ga.seed = seeds::derive(ctx.seed, &[0x70]);
    pc.coverage.seed = seeds::derive(ctx.seed, &[0x63]);
    if pc.initial.is_none() && site.sensors.len() == pc.n_sensors {
        pc.initial = Some(site.sensors.iter().map(|s| Point2::new(s.x, s.y)).collect());
    }
    let problem = PlacementProblem::new(&site, &wind, &set, pc)?;
    match grow {
        Some(max_n) => {
            let frontier = grow_sensor_count(&problem, max_n, sec.min_gain)?;
            let mut csv = String::from("n_sensors,coverage\n");
            for f in &frontier {
                csv.push_str(&format!("{},{}\n", f.n_sensors, f.coverage));
            }
            ctx.write("frontier.csv", &csv)?;
            ctx.write("placement.json", &io::to_json(&frontier)?)?;
        }
        None => {
            let result = optimize_placement(&problem)?;
            let mut csv = String::from("iteration,value,best_feasible\n");
            for t in &result.trace {
                let bf = t.best_feasible.map(|v| v.to_string()).unwrap_or_default();
                csv.push_str(&format!("{},{},{bf}\n", t.iteration, t.value));
            }
            ctx.write("trace.csv", &csv)?;
            ctx.write("placement.json", &io::to_json(&result)?)?;
        }
    }
    ctx.manifest("place")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageMapReport {
    pub layout: SensorLayout,
    pub map_coverage: f64,
    pub map_counts: [usize; 3],
    pub report: crate::coverage::CoverageReport,
}

fn cmd_coverage_map(ctx: &mut Context) -> AppResult<()> {
    let site = ctx.site()?;
    let sec = ctx.config.coverage.clone();
    let positions: Vec<Point2> = match &sec.layout {
        Some(l) => l.iter().map(|[x, y]| Point2::new(*x, *y)).collect(),
        None => site.sensors.iter().map(|s| Point2::new(s.x, s.y)).collect(),
    };
    if positions.is_empty() {
        return Err(AppError::Config("no sensor layout: set coverage.layout or list sensors in the site".into()));
    }
    let z = sec.sensor_z.or_else(|| site.sensors.first().map(|s| s.z)).unwrap_or(crate::coverage::SENSOR_HEIGHT);
    let layout = SensorLayout { positions, z };
    let n_w = ctx.config.wind.count;
    let wind = realizations(ctx, n_w)?;
    let mut cc = sec.config.clone();
    cc.seed = seeds::derive(ctx.seed, &[0x63]);
    let map = coverage_map(&layout, &wind[0], sec.grid, (sec.trial_z, sec.trial_rate), &site, &cc)?;
    let set = evaluation_set(sec.evaluation, sec.trial_z, sec.trial_rate, &site)?;
    let report = coverage_report(&layout, &wind, &set, &site, &cc)?;
    ctx.write("coverage_map.csv", &map.to_csv())?;
    let r = &map.result;
    let summary =
        CoverageMapReport { layout, map_coverage: r.coverage, map_counts: [r.n_good, r.n_medium, r.n_poor], report };
    ctx.write("coverage_report.json", &io::to_json(&summary)?)?;
    ctx.manifest("coverage-map")
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> AppResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut ctx = load(&cli)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&mut ctx),
        Command::Wind { model, count, rose } => cmd_wind(&mut ctx, model, count, rose),
        Command::Invert => cmd_invert(&mut ctx),
        Command::Monitor { resume, max_steps } => cmd_monitor(&mut ctx, resume, max_steps),
        Command::Place { grow } => cmd_place(&mut ctx, grow),
        Command::CoverageMap => cmd_coverage_map(&mut ctx),
    }
}

/// Parses `args`, runs, prints any error, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
