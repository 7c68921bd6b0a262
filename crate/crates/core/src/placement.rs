//! Sensor placement: maximise mean coverage over wind realizations subject
//! to site, subspace, zone and separation penalties.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_report, CoverageConfig, EvaluationSet, SensorLayout, SENSOR_HEIGHT};
use crate::error::{Error, Result};
use crate::geometry::{proximity_penalty, Point2, SiteSpec};
use crate::inversion::InversionConfig;
use crate::seeds;
use crate::solvers::{miga_minimize, GAConfig, Variable, VariableSpec};
use crate::wind::WindRealization;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    pub n_sensors: usize,
    /// Minimum distance between any two sensors, m.
    pub d_min: f64,
    pub gamma: f64,
    pub phi: f64,
    pub tau: f64,
    pub sensor_z: f64,
    pub ga: GAConfig,
    pub coverage: CoverageConfig,
    /// Random draws per sensor when building feasible starting layouts.
    pub repair_budget: usize,
    /// Optional layout scored and seeded into the first generation.
    pub initial: Option<Vec<Point2>>,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        let coverage = CoverageConfig {
            inversion: InversionConfig {
                ga: GAConfig { population: 30, generations: 40, polish_evals: 200, ..GAConfig::default() },
                ..InversionConfig::default()
            },
            ..CoverageConfig::default()
        };
        Self {
            n_sensors: 4,
            d_min: 10.0,
            gamma: 1e5,
            phi: 1e4,
            tau: 12.0,
            sensor_z: SENSOR_HEIGHT,
            ga: GAConfig { population: 16, generations: 15, elite: 2, ..GAConfig::default() },
            coverage,
            repair_budget: 2000,
            initial: None,
        }
    }
}

/// A placement problem with a counter of coverage evaluations.
#[derive(Debug)]
pub struct PlacementProblem<'a> {
    pub site: &'a SiteSpec,
    pub realizations: &'a [WindRealization],
    pub set: &'a EvaluationSet,
    pub config: PlacementConfig,
    coverage_calls: AtomicUsize,
}

impl<'a> PlacementProblem<'a> {
    pub fn new(
        site: &'a SiteSpec,
        realizations: &'a [WindRealization],
        set: &'a EvaluationSet,
        config: PlacementConfig,
    ) -> Result<Self> {
        if realizations.is_empty() {
            return Err(Error::Config("placement needs at least one wind realization".into()));
        }
        if !(config.d_min > 0.0) {
            return Err(Error::Config("d_min must be positive".into()));
        }
        if config.n_sensors == 0 {
            return Err(Error::Config("at least one sensor is needed".into()));
        }
        if !(config.tau > 0.0 && config.gamma >= 0.0 && config.phi >= 0.0) {
            return Err(Error::Config("penalty parameters must be non-negative with tau > 0".into()));
        }
        Ok(Self { site, realizations, set, config, coverage_calls: AtomicUsize::new(0) })
    }

    /// Number of layouts whose coverage has been computed so far.
    pub fn coverage_evaluations(&self) -> usize {
        self.coverage_calls.load(Ordering::Relaxed)
    }

    fn with_sensors(&self, n: usize) -> Self {
        Self {
            site: self.site,
            realizations: self.realizations,
            set: self.set,
            config: PlacementConfig { n_sensors: n, ..self.config.clone() },
            coverage_calls: AtomicUsize::new(0),
        }
    }

    fn layout(&self, u: &[f64]) -> SensorLayout {
        SensorLayout::from_flat(u, self.config.sensor_z)
    }

    fn variable_spec(&self) -> Result<VariableSpec> {
        let (lb, ub) = (self.site.master.lb, self.site.master.ub);
        VariableSpec::new(
            (0..self.config.n_sensors)
                .flat_map(|_| [Variable::continuous(lb[0], ub[0]), Variable::continuous(lb[1], ub[1])])
                .collect(),
        )
    }
}

/// `max(0, d_min − distance)` for each unordered pair, in `(i, j)` order.
pub fn separation_violations(layout: &SensorLayout, d_min: f64) -> Vec<f64> {
    let p = &layout.positions;
    let mut out = Vec::with_capacity(p.len() * p.len().saturating_sub(1) / 2);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            out.push((d_min - p[i].distance(&p[j])).max(0.0));
        }
    }
    out
}

/// Penalty terms of a layout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Penalties {
    pub site: f64,
    pub subspace: f64,
    pub zone: f64,
    pub separation: f64,
}

impl Penalties {
    pub fn total(&self) -> f64 {
        self.site + self.subspace + self.zone + self.separation
    }
}

pub fn layout_penalties(layout: &SensorLayout, site: &SiteSpec, config: &PlacementConfig) -> Penalties {
    let mut p = Penalties::default();
    for s in &layout.positions {
        p.site += config.gamma * site.master.g5.squared_violation_xy(*s);
        for r in &site.subspaces {
            if r.polygon_contains(*s) {
                p.subspace += proximity_penalty(*s, r.com, config.phi, config.tau);
            }
        }
        for z in &site.zones {
            if z.polygon_contains(*s) {
                p.zone += proximity_penalty(*s, z.com, config.phi, config.tau);
            }
        }
    }
    p.separation = config.gamma * separation_violations(layout, config.d_min).iter().sum::<f64>();
    p
}

/// `S`: minus the total penalty when any penalty is active, otherwise the
/// mean coverage. Coverage is only computed for penalty-free layouts.
pub fn placement_objective(layout: &SensorLayout, problem: &PlacementProblem) -> Result<f64> {
    let pen = layout_penalties(layout, problem.site, &problem.config).total();
    if pen > 0.0 {
        return Ok(-pen);
    }
    problem.coverage_calls.fetch_add(1, Ordering::Relaxed);
    let report = coverage_report(layout, problem.realizations, problem.set, problem.site, &problem.config.coverage)?;
    Ok(report.mean)
}

/// One generation of the optimisation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    /// Best `S` in this generation.
    pub value: f64,
    /// Best penalty-free `S` so far, once one exists.
    pub best_feasible: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub layout: SensorLayout,
    pub value: f64,
    /// `S` of `config.initial` when given, else the best starting layout.
    pub initial_value: f64,
    pub per_realization: Vec<f64>,
    pub penalties: Penalties,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub coverage_evaluations: usize,
}

fn blocked(p: Point2, layout: &[Point2], site: &SiteSpec, d_min: f64) -> bool {
    !site.master_contains(p)
        || site.subspaces.iter().any(|r| r.polygon_contains(p))
        || site.zones.iter().any(|z| z.polygon_contains(p))
        || layout.iter().any(|q| q.distance(&p) < d_min)
}

/// Places `n` sensors one at a time by rejection sampling, starting from
/// `base`. Errors when a sensor cannot be placed within the budget.
fn feasible_layout<R: Rng>(
    base: &[Point2],
    n: usize,
    site: &SiteSpec,
    config: &PlacementConfig,
    rng: &mut R,
) -> Result<Vec<Point2>> {
    let (lb, ub) = (site.master.lb, site.master.ub);
    let mut out = base.to_vec();
    while out.len() < n {
        let found = (0..config.repair_budget).find_map(|_| {
            let p = Point2::new(rng.random_range(lb[0]..=ub[0]), rng.random_range(lb[1]..=ub[1]));
            (!blocked(p, &out, site, config.d_min)).then_some(p)
        });
        match found {
            Some(p) => out.push(p),
            None => {
                let zones = site.subspaces.len() + site.zones.len();
                return Err(Error::NoFeasibleLayout(format!(
                    "could not place sensor {} of {n} after {} draws; blocking: {zones} subspace/zone \
                     polygon(s), separation d_min = {} m, site extent {:.1} x {:.1} m",
                    out.len() + 1,
                    config.repair_budget,
                    config.d_min,
                    ub[0] - lb[0],
                    ub[1] - lb[1]
                )));
            }
        }
    }
    Ok(out)
}

fn optimize_from(problem: &PlacementProblem, warm: Option<&[Point2]>) -> Result<PlacementResult> {
    let cfg = &problem.config;
    let n = cfg.n_sensors;
    let spec = problem.variable_spec()?;
    let mut rng = seeds::rng(seeds::derive(cfg.ga.seed, &[0x706c, n as u64]));

    let mut starts: Vec<Vec<Point2>> = Vec::new();
    if let Some(init) = &cfg.initial {
        if init.len() == n {
            starts.push(init.clone());
        }
    }
    if let Some(w) = warm {
        starts.push(feasible_layout(w, n, problem.site, cfg, &mut rng)?);
    }
    while starts.len() < cfg.ga.population {
        starts.push(feasible_layout(&[], n, problem.site, cfg, &mut rng)?);
    }
    let initial: Vec<Vec<f64>> = starts.iter().map(|l| l.iter().flat_map(|p| [p.x, p.y]).collect()).collect();

    let first_err = std::sync::Mutex::new(None);
    let objective = |u: &[f64]| match placement_objective(&problem.layout(u), problem) {
        Ok(s) => -s,
        Err(e) => {
            first_err.lock().unwrap().get_or_insert(e);
            f64::INFINITY
        }
    };
    let ga = miga_minimize(&objective, &spec, &cfg.ga, &initial)?;
    if let Some(e) = first_err.into_inner().unwrap() {
        return Err(e);
    }

    let layout = problem.layout(&ga.best);
    let penalties = layout_penalties(&layout, problem.site, cfg);
    let per_realization = if penalties.total() > 0.0 {
        Vec::new()
    } else {
        coverage_report(&layout, problem.realizations, problem.set, problem.site, &cfg.coverage)?
            .realizations
            .iter()
            .map(|r| r.coverage)
            .collect()
    };
    let initial_value = match &cfg.initial {
        Some(init) if init.len() == n => {
            placement_objective(&SensorLayout::from_flat(&initial[0], cfg.sensor_z), problem)?
        }
        _ => ga.history.first().map(|h| -h.best_in_generation).unwrap_or(f64::NEG_INFINITY),
    };
    let trace = ga
        .history
        .iter()
        .map(|h| TracePoint {
            iteration: h.generation,
            value: -h.best_in_generation,
            best_feasible: (-h.best_so_far >= 0.0).then_some(-h.best_so_far),
        })
        .collect();
    Ok(PlacementResult {
        layout,
        value: -ga.value,
        initial_value,
        per_realization,
        penalties,
        trace,
        evaluations: ga.evaluations,
        coverage_evaluations: problem.coverage_evaluations(),
    })
}

/// Maximises `S` over `n_sensors` positions with the genetic algorithm,
/// starting from feasible random layouts.
pub fn optimize_placement(problem: &PlacementProblem) -> Result<PlacementResult> {
    optimize_from(problem, None)
}

/// One point of the sensor-count frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub n_sensors: usize,
    pub coverage: f64,
    pub result: PlacementResult,
}

/// Optimises `1..=max_n` sensors, warm-starting each count from the
/// previous optimum plus one random feasible sensor. Stops once the gain
/// in mean coverage falls below `min_gain`.
pub fn grow_sensor_count(problem: &PlacementProblem, max_n: usize, min_gain: f64) -> Result<Vec<FrontierPoint>> {
    if max_n == 0 {
        return Err(Error::Config("max sensor count must be at least 1".into()));
    }
    let mut frontier: Vec<FrontierPoint> = Vec::new();
    for n in 1..=max_n {
        let sub = problem.with_sensors(n);
        let warm = frontier.last().map(|f| f.result.layout.positions.clone());
        let result = optimize_from(&sub, warm.as_deref())?;
        let gain = frontier.last().map(|f| result.value - f.coverage);
        frontier.push(FrontierPoint { n_sensors: n, coverage: result.value, result });
        if gain.is_some_and(|g| g < min_gain) {
            break;
        }
    }
    Ok(frontier)
}
