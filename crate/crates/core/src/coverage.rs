//! Coverage of a sensor layout: how many candidate leaks the inversion
//! recovers under a given wind realization.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{extract_cones, ConeConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point2, SiteSpec};
use crate::inversion::{invert, seeded, InversionConfig, InversionProblem, ProblemClass, SourceCandidate};
use crate::plume::{PlumeSource, Receptor};
use crate::records::{weighted_records, Background, RecordConfig};
use crate::seeds;
use crate::wind::{synthesize_sensor_data, SensorNoise, WindRealization};

/// Default sensor height, m (six feet).
pub const SENSOR_HEIGHT: f64 = 1.83;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Good,
    Medium,
    Poor,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Good => "good",
            Category::Medium => "medium",
            Category::Poor => "poor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapThresholds {
    pub good: f64,
    pub medium: f64,
}

impl Default for GapThresholds {
    fn default() -> Self {
        Self { good: 5.0, medium: 15.0 }
    }
}

/// Good below `good`, medium below `medium`, poor otherwise.
pub fn classify_solution(gap: f64, thresholds: &GapThresholds) -> Category {
    if gap < thresholds.good {
        Category::Good
    } else if gap < thresholds.medium {
        Category::Medium
    } else {
        Category::Poor
    }
}

/// How the distance between an estimate and the true leak is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMetric {
    /// Horizontal distance, m.
    #[default]
    Planar,
    /// Distance including height, m.
    Spatial,
    /// Absolute rate error, kg/h.
    Rate,
    /// Euclidean distance over `[x y z r]` scaled by the master bounds.
    Normalized,
}

impl GapMetric {
    pub fn gap(self, estimate: &SourceCandidate, truth: &SourceCandidate, site: &SiteSpec) -> f64 {
        let (e, t) = (estimate.as_array(), truth.as_array());
        match self {
            GapMetric::Planar => estimate.distance_2d(truth),
            GapMetric::Spatial => (0..3).map(|k| (e[k] - t[k]).powi(2)).sum::<f64>().sqrt(),
            GapMetric::Rate => (e[3] - t[3]).abs(),
            GapMetric::Normalized => {
                let (lb, ub) = (site.master.lb, site.master.ub);
                (0..4)
                    .map(|k| {
                        let span = ub[k] - lb[k];
                        if span > 0.0 {
                            ((e[k] - t[k]) / span).powi(2)
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }
}

/// Ground positions of candidate leaks plus the trial leak height and rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSet {
    pub points: Vec<Point2>,
    pub z: f64,
    /// kg/h
    pub rate: f64,
}

impl EvaluationSet {
    pub fn new(points: Vec<Point2>, z: f64, rate: f64, site: &SiteSpec) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("evaluation set is empty".into()));
        }
        if let Some(p) = points.iter().find(|p| !site.master_contains(**p)) {
            return Err(Error::InvalidInput(format!("evaluation point ({}, {}) lies outside the site", p.x, p.y)));
        }
        Ok(Self { points, z, rate })
    }

    /// The site's evaluation points with the default trial leak.
    pub fn from_site(site: &SiteSpec) -> Result<Self> {
        Self::new(site.evaluation_points(), 2.0, 5.0, site)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sensor positions at a common height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub positions: Vec<Point2>,
    pub z: f64,
}

impl SensorLayout {
    pub fn new(positions: Vec<Point2>) -> Self {
        Self { positions, z: SENSOR_HEIGHT }
    }

    /// From `[x1 y1 x2 y2 …]`.
    pub fn from_flat(u: &[f64], z: f64) -> Self {
        Self { positions: u.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect(), z }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sensors named `s1`, `s2`, … in layout order.
    pub fn receptors(&self) -> Vec<(String, Receptor)> {
        self.positions
            .iter()
            .enumerate()
            .map(|(k, p)| (format!("s{}", k + 1), Receptor { x: p.x, y: p.y, z: self.z }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub thresholds: GapThresholds,
    pub metric: GapMetric,
    pub noise: SensorNoise,
    pub records: RecordConfig,
    /// Cone extraction for classes B and D; skipped when `None`.
    pub cones: Option<ConeConfig>,
    pub inversion: InversionConfig,
    /// Fixed problem class; detected from the site and cones otherwise.
    pub class: Option<ProblemClass>,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        let noise = SensorNoise::default();
        Self {
            thresholds: GapThresholds::default(),
            metric: GapMetric::default(),
            noise,
            records: RecordConfig {
                t_w: 120.0,
                background: Background::Fixed { ppm: noise.background },
                ..RecordConfig::default()
            },
            cones: None,
            inversion: InversionConfig::default(),
            class: Some(ProblemClass::A),
            seed: 0,
        }
    }
}

/// Result for one candidate leak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub point: Point2,
    pub records: usize,
    pub estimate: Option<SourceCandidate>,
    /// `None` when the inversion had nothing to work with.
    pub gap: Option<f64>,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Percentage of good candidates.
    pub coverage: f64,
    pub n_good: usize,
    pub n_medium: usize,
    pub n_poor: usize,
    pub points: Vec<PointOutcome>,
}

impl CoverageResult {
    fn from_points(points: Vec<PointOutcome>) -> Self {
        let count = |c: Category| points.iter().filter(|p| p.category == c).count();
        let n_good = count(Category::Good);
        let coverage = if points.is_empty() { 0.0 } else { 100.0 * n_good as f64 / points.len() as f64 };
        Self { coverage, n_good, n_medium: count(Category::Medium), n_poor: count(Category::Poor), points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub mean: f64,
    pub realizations: Vec<CoverageResult>,
}

/// Arithmetic mean of per-realization coverage.
pub fn mean_coverage(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Simulates a trial leak at `point`, inverts, and grades the estimate.
/// `realization_key` distinguishes realizations in the derived seeds.
pub fn evaluate_candidate(
    layout: &SensorLayout,
    realization: &WindRealization,
    realization_key: u64,
    point: Point2,
    trial: (f64, f64),
    site: &SiteSpec,
    config: &CoverageConfig,
) -> Result<PointOutcome> {
    let (z, rate) = trial;
    let truth = SourceCandidate::new(point.x, point.y, z, rate);
    let key = [seeds::point_key(point.x, point.y), realization_key];
    let source = PlumeSource { x: point.x, y: point.y, z, rate };
    let noise_seed = seeds::derive(config.seed, &[key[0], key[1], 0x6e]);
    let (streams, weather) =
        synthesize_sensor_data(realization, &source, &layout.receptors(), config.noise, noise_seed)?;
    let out = weighted_records(&streams, &weather, &config.records)?;
    let cones = config.cones.as_ref().map(|cc| extract_cones(&streams, &weather, &site.master, cc));
    let class = config.class.unwrap_or_else(|| ProblemClass::detect(site, cones.as_ref()));
    let poor = |records| PointOutcome { point, records, estimate: None, gap: None, category: Category::Poor };
    if out.set.is_empty() {
        return Ok(poor(0));
    }
    let problem = match InversionProblem::new(class, &out.set, site, cones.as_ref()) {
        Ok(p) => p,
        // no usable cuts for B/D: nothing to attribute
        Err(Error::InvalidInput(_)) if class.uses_cuts() => return Ok(poor(out.set.len())),
        Err(e) => return Err(e),
    };
    let sol = invert(&problem, &seeded(&config.inversion, config.seed, &key))?;
    Ok(match sol.best {
        Some(best) => {
            let gap = config.metric.gap(&best, &truth, site);
            PointOutcome {
                point,
                records: out.set.len(),
                estimate: Some(best),
                gap: Some(gap),
                category: classify_solution(gap, &config.thresholds),
            }
        }
        None => poor(out.set.len()),
    })
}

fn evaluate_points(
    layout: &SensorLayout,
    realization: &WindRealization,
    realization_key: u64,
    points: &[Point2],
    trial: (f64, f64),
    site: &SiteSpec,
    config: &CoverageConfig,
) -> Result<Vec<PointOutcome>> {
    if realization.samples.is_empty() {
        return Err(Error::InvalidInput("wind realization is empty".into()));
    }
    if layout.is_empty() {
        return Err(Error::InvalidInput("sensor layout is empty".into()));
    }
    points
        .par_iter()
        .map(|p| evaluate_candidate(layout, realization, realization_key, *p, trial, site, config))
        .collect()
}

/// Coverage of `layout` over `set` under one realization.
pub fn coverage(
    layout: &SensorLayout,
    realization: &WindRealization,
    realization_key: u64,
    set: &EvaluationSet,
    site: &SiteSpec,
    config: &CoverageConfig,
) -> Result<CoverageResult> {
    let points = evaluate_points(layout, realization, realization_key, &set.points, (set.z, set.rate), site, config)?;
    Ok(CoverageResult::from_points(points))
}

/// Coverage under each realization (keyed by content) and their mean.
pub fn coverage_report(
    layout: &SensorLayout,
    realizations: &[WindRealization],
    set: &EvaluationSet,
    site: &SiteSpec,
    config: &CoverageConfig,
) -> Result<CoverageReport> {
    if realizations.is_empty() {
        return Err(Error::InvalidInput("at least one wind realization is needed".into()));
    }
    let results =
        realizations.par_iter().map(|w| coverage(layout, w, w.key(), set, site, config)).collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.coverage).collect();
    Ok(CoverageReport { mean: mean_coverage(&values), realizations: results })
}

/// Regular grid of cell centres; the master bounding box by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, y0, x1, y1]`
    pub extent: Option<[f64; 4]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 20, ny: 20, extent: None }
    }
}

impl GridSpec {
    pub fn points(&self, site: &SiteSpec) -> Result<Vec<Point2>> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell per axis".into()));
        }
        let [x0, y0, x1, y1] =
            self.extent.unwrap_or([site.master.lb[0], site.master.lb[1], site.master.ub[0], site.master.ub[1]]);
        let (dx, dy) = ((x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64);
        let pts: Vec<Point2> = (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| Point2::new(x0 + (i as f64 + 0.5) * dx, y0 + (j as f64 + 0.5) * dy))
            })
            .filter(|p| site.master_contains(*p))
            .collect();
        if pts.is_empty() {
            return Err(Error::InvalidInput("grid has no cells inside the site".into()));
        }
        Ok(pts)
    }
}

/// Gridded coverage detail for one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub grid: GridSpec,
    pub result: CoverageResult,
}

impl CoverageMap {
    /// `x,y,gap,category` per cell; the gap is empty for undetected cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,gap,category\n");
        for p in &self.result.points {
            let gap = p.gap.map(|g| g.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", p.point.x, p.point.y, gap, p.category));
        }
        out
    }
}

pub fn coverage_map(
    layout: &SensorLayout,
    realization: &WindRealization,
    grid: GridSpec,
    trial: (f64, f64),
    site: &SiteSpec,
    config: &CoverageConfig,
) -> Result<CoverageMap> {
    let points = grid.points(site)?;
    let outcomes = evaluate_points(layout, realization, 0, &points, trial, site, config)?;
    Ok(CoverageMap { grid, result: CoverageResult::from_points(outcomes) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxRegion, FeasibleSide};
    use crate::wind::{synthetic_wind, WindModelConfig};

    fn site() -> SiteSpec {
        let master = BoxRegion::rectangle(0.0, 0.0, 100.0, 100.0, FeasibleSide::Interior).unwrap();
        SiteSpec::new(master, vec![], vec![]).unwrap()
    }

    fn steady(dir: f64) -> WindRealization {
        synthetic_wind(&WindModelConfig {
            dw1: 0.0,
            ds1: 0.0,
            dw2: 0.0,
            ds2: 0.0,
            start_dir: dir,
            start_speed: 3.0,
            span_hours: 1.0,
            ..WindModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn classification_boundaries() {
        let t = GapThresholds::default();
        assert_eq!(classify_solution(3.0, &t), Category::Good);
        assert_eq!(classify_solution(5.0, &t), Category::Medium);
        assert_eq!(classify_solution(14.99, &t), Category::Medium);
        assert_eq!(classify_solution(15.0, &t), Category::Poor);
        assert_eq!(classify_solution(40.0, &t), Category::Poor);
    }

    #[test]
    fn mean_of_three_realizations() {
        let m = mean_coverage(&[53.2, 51.1, 93.6]);
        assert!((65.9..66.0).contains(&m));
        assert_eq!(mean_coverage(&[42.0]), 42.0);
        assert_eq!(mean_coverage(&[93.6, 53.2, 51.1]), mean_coverage(&[53.2, 51.1, 93.6]));
    }

    #[test]
    fn ratio_bookkeeping() {
        let mk = |c| PointOutcome { point: Point2::new(0.0, 0.0), records: 0, estimate: None, gap: None, category: c };
        let r = CoverageResult::from_points(vec![
            mk(Category::Good),
            mk(Category::Poor),
            mk(Category::Medium),
            mk(Category::Poor),
        ]);
        assert_eq!(r.coverage, 25.0);
        assert_eq!((r.n_good, r.n_medium, r.n_poor), (1, 1, 2));
    }

    #[test]
    fn metrics() {
        let s = site();
        let a = SourceCandidate::new(0.0, 0.0, 2.0, 5.0);
        let b = SourceCandidate::new(3.0, 4.0, 2.0, 7.0);
        assert_eq!(GapMetric::Planar.gap(&a, &b, &s), 5.0);
        assert_eq!(GapMetric::Rate.gap(&a, &b, &s), 2.0);
        assert!(GapMetric::Normalized.gap(&a, &b, &s) > 0.0);
    }

    #[test]
    fn upwind_sensor_sees_nothing() {
        // wind blows towards +x; the sensor sits west of every candidate
        let s = site();
        let layout = SensorLayout::new(vec![Point2::new(2.0, 50.0)]);
        let set = EvaluationSet::new(
            vec![Point2::new(30.0, 50.0), Point2::new(60.0, 40.0), Point2::new(80.0, 70.0)],
            2.0,
            5.0,
            &s,
        )
        .unwrap();
        let r = coverage(&layout, &steady(0.0), 0, &set, &s, &CoverageConfig::default()).unwrap();
        assert_eq!(r.coverage, 0.0);
        assert!(r.points.iter().all(|p| p.records == 0 && p.category == Category::Poor));
    }

    #[test]
    fn dense_noiseless_layout_recovers_all() {
        let s = site();
        let ring = (0..8)
            .map(|k| {
                let a = k as f64 * std::f64::consts::FRAC_PI_4;
                Point2::new(50.0 + 30.0 * a.cos(), 50.0 + 30.0 * a.sin())
            })
            .collect();
        let layout = SensorLayout::new(ring);
        let set = EvaluationSet::new(vec![Point2::new(50.0, 50.0), Point2::new(40.0, 60.0)], 2.0, 40.0, &s).unwrap();
        // steady within each period, so window means match the forward model
        let wind = synthetic_wind(&WindModelConfig {
            seed: 3,
            dw1: 0.0,
            ds1: 0.0,
            span_hours: 6.0,
            ..WindModelConfig::default()
        })
        .unwrap();
        let cfg = CoverageConfig { noise: SensorNoise { background: 2.0, sigma: 0.0 }, ..CoverageConfig::default() };
        let r = coverage(&layout, &wind, 0, &set, &s, &cfg).unwrap();
        assert_eq!(r.coverage, 100.0, "{:?}", r.points);
    }

    #[test]
    fn outside_points_rejected() {
        let s = site();
        assert!(EvaluationSet::new(vec![Point2::new(150.0, 50.0)], 2.0, 5.0, &s).is_err());
        assert!(EvaluationSet::new(vec![], 2.0, 5.0, &s).is_err());
    }

    #[test]
    fn grid_cell_centres() {
        let s = site();
        let g = GridSpec { nx: 1, ny: 1, extent: None };
        assert_eq!(g.points(&s).unwrap(), vec![Point2::new(50.0, 50.0)]);
        let g = GridSpec { nx: 4, ny: 5, extent: None };
        assert_eq!(g.points(&s).unwrap().len(), 20);
    }
}
