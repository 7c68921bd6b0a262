//! Leak-source inversion.
//!
//! Four problem classes are supported. A and B search the site box directly
//! (B adds the cone cuts and reduced bounds). C and D search over subspaces:
//! a candidate carries a subspace index and its location is mapped into
//! that subspace's bounds, with violations of the subspace polygon
//! penalised (D adds the cone cuts).

mod monitor;
mod objective;

pub use monitor::{monitor_step, LeakStatus, MonitorConfig, MonitorEvent, MonitoringState};
pub use objective::{
    objective_wmse, residuals, round_index, transform_variables, untransform, PreparedRecords, SourceCandidate,
};

use serde::{Deserialize, Serialize};

use crate::cones::ConeSet;
use crate::error::{Error, Result};
use crate::geometry::{Point2, SiteSpec};
use crate::records::RecordSet;
use crate::seeds;
use crate::solvers::{mcmc_sample, miga_minimize, GAConfig, MCMCConfig, Marginal, Variable, VariableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemClass {
    A,
    B,
    C,
    D,
}

impl ProblemClass {
    pub fn uses_subspaces(self) -> bool {
        matches!(self, ProblemClass::C | ProblemClass::D)
    }

    pub fn uses_cuts(self) -> bool {
        matches!(self, ProblemClass::B | ProblemClass::D)
    }

    /// Picks the class from what is available.
    pub fn detect(site: &SiteSpec, cones: Option<&ConeSet>) -> Self {
        let cuts = cones.is_some_and(|c| !c.is_empty());
        match (site.n_b() > 1, cuts) {
            (false, false) => ProblemClass::A,
            (false, true) => ProblemClass::B,
            (true, false) => ProblemClass::C,
            (true, true) => ProblemClass::D,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InversionProblem<'a> {
    pub class: ProblemClass,
    pub records: &'a RecordSet,
    pub site: &'a SiteSpec,
    pub cones: Option<&'a ConeSet>,
    pub gamma: f64,
    /// Allow index 1 (the whole master box) as a subspace choice.
    pub include_master: bool,
    /// Replace the rate gene with the best rate for the location.
    pub profile_rate: bool,
}

impl<'a> InversionProblem<'a> {
    pub fn new(
        class: ProblemClass,
        records: &'a RecordSet,
        site: &'a SiteSpec,
        cones: Option<&'a ConeSet>,
    ) -> Result<Self> {
        if class.uses_cuts() && cones.is_none_or(|c| c.is_empty()) {
            return Err(Error::InvalidInput(format!("class {class:?} needs cone cuts")));
        }
        if class.uses_subspaces() && site.n_b() < 2 {
            return Err(Error::InvalidInput(format!("class {class:?} needs at least one subspace")));
        }
        Ok(Self { class, records, site, cones, gamma: 1e5, include_master: false, profile_rate: false })
    }

    /// Search bounds: the cone-reduced box for B/D, the master box otherwise.
    pub fn bounds(&self) -> ([f64; 5], [f64; 5]) {
        match (self.class.uses_cuts(), self.cones) {
            (true, Some(c)) => (c.clb, c.cub),
            _ => (self.site.master.lb, self.site.master.ub),
        }
    }

    fn cut_violation(&self, x: &SourceCandidate) -> f64 {
        match (self.class.uses_cuts(), self.cones) {
            (true, Some(c)) => c.g_cuts.squared_violation_xy(Point2::new(x.x, x.y)),
            _ => 0.0,
        }
    }

    fn site_violation(&self, x: &SourceCandidate) -> f64 {
        self.site.master.g5.squared_violation_xy(Point2::new(x.x, x.y))
    }

    fn index_range(&self) -> (usize, usize) {
        let lo = if self.include_master { 1 } else { 2 };
        (lo, self.site.n_b())
    }

    /// `relax_index` searches the region index as a continuous variable,
    /// rounded on evaluation.
    fn variable_spec(&self, relax_index: bool) -> Result<VariableSpec> {
        let (lb, ub) = self.bounds();
        let mut vars: Vec<Variable> = (0..4).map(|k| Variable::continuous(lb[k], ub[k])).collect();
        if self.class.uses_subspaces() {
            let (lo, hi) = self.index_range();
            vars.push(if relax_index {
                Variable::continuous(lo as f64 - 0.49, hi as f64 + 0.49)
            } else {
                Variable::integer(lo as i64, hi as i64)
            });
        }
        VariableSpec::new(vars)
    }

    /// Decodes a solver vector into a source and region index.
    pub fn decode(&self, v: &[f64]) -> Result<(SourceCandidate, usize)> {
        if self.class.uses_subspaces() {
            let (glb, gub) = self.bounds();
            let (x, b, _) = transform_variables(v, &glb, &gub, self.site)?;
            Ok((x, b))
        } else {
            let x = SourceCandidate::from_slice(v);
            Ok((x, self.site.locate(Point2::new(x.x, x.y))))
        }
    }

    /// [`decode`](Self::decode), then the profiled rate when enabled.
    pub fn resolve(&self, v: &[f64], prepared: &PreparedRecords) -> Result<(SourceCandidate, usize)> {
        let (mut x, b) = self.decode(v)?;
        if self.profile_rate {
            let (lb, ub) = match self.site.region(b) {
                Some(r) if self.class.uses_subspaces() => (r.lb, r.ub),
                _ => self.bounds(),
            };
            x.r = prepared.best_rate(&x, lb[3], ub[3]);
        }
        Ok((x, b))
    }
}

/// Penalised objective: misfit plus `γ` times squared violations of the
/// site constraints, the cone cuts (B/D) and the chosen subspace (C/D).
pub fn penalized_objective(v: &[f64], problem: &InversionProblem, prepared: &PreparedRecords) -> f64 {
    let Ok((x, b)) = problem.resolve(v, prepared) else {
        return f64::INFINITY;
    };
    let f = prepared.wmse(&x);
    let mut violation = problem.site_violation(&x) + problem.cut_violation(&x);
    if problem.class.uses_subspaces() {
        if let Some(region) = problem.site.region(b) {
            violation += region.g5.squared_violation(&x.augmented(b as f64));
        }
    }
    let p = f + problem.gamma * violation;
    if p.is_finite() {
        p
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    pub ga: GAConfig,
    /// Uncertainty sampling around the optimum; skipped when `None`.
    pub mcmc: Option<MCMCConfig>,
    pub min_records: usize,
    pub min_sensors: usize,
    pub gamma: f64,
    pub include_master: bool,
    /// Solve for the rate in closed form at each candidate location
    /// instead of searching over it.
    pub profile_rate: bool,
    /// Classes C/D: after the mixed-integer search, a short search with
    /// the region index held fixed is run in every region.
    pub region_sweep: Option<GAConfig>,
    /// Treat the region index as continuous during the search. Off by
    /// default; worth trying on sites with many regions.
    pub relax_index: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            ga: GAConfig { polish_evals: 400, ..GAConfig::default() },
            mcmc: None,
            min_records: 5,
            min_sensors: 1,
            gamma: 1e5,
            include_master: false,
            profile_rate: true,
            region_sweep: Some(GAConfig { population: 20, generations: 30, polish_evals: 200, ..GAConfig::default() }),
            relax_index: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionStatus {
    NoMeaningfulRecords,
    InsufficientRecords,
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionSolution {
    pub status: InversionStatus,
    pub class: ProblemClass,
    pub best: Option<SourceCandidate>,
    /// 1-based region index (1 = master box).
    pub subspace: Option<usize>,
    /// Misfit at `best`.
    pub objective: Option<f64>,
    /// Penalised objective at the solver optimum.
    pub penalized: Option<f64>,
    /// Histograms over `[x y z r]` when sampling ran.
    pub marginals: Option<Vec<Marginal>>,
    pub acceptance_rate: Option<f64>,
    pub record_count: usize,
    pub sensor_count: usize,
    /// Best-so-far penalised objective per generation.
    pub history: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl InversionSolution {
    fn unsolved(status: InversionStatus, class: ProblemClass, records: &RecordSet, msg: String) -> Self {
        Self {
            status,
            class,
            best: None,
            subspace: None,
            objective: None,
            penalized: None,
            marginals: None,
            acceptance_rate: None,
            record_count: records.len(),
            sensor_count: records.sensor_count(),
            history: Vec::new(),
            diagnostics: vec![msg],
        }
    }

    pub fn is_solved(&self) -> bool {
        self.status == InversionStatus::Solved
    }
}

/// Solves the problem with the GA, then optionally samples around the
/// optimum. Seeds come from `config.ga.seed` / `config.mcmc.seed`.
pub fn invert(problem: &InversionProblem, config: &InversionConfig) -> Result<InversionSolution> {
    let records = problem.records;
    if records.is_empty() {
        return Ok(InversionSolution::unsolved(
            InversionStatus::NoMeaningfulRecords,
            problem.class,
            records,
            "no meaningful records".into(),
        ));
    }
    if records.len() < config.min_records || records.sensor_count() < config.min_sensors {
        return Ok(InversionSolution::unsolved(
            InversionStatus::InsufficientRecords,
            problem.class,
            records,
            format!(
                "insufficient records: {} from {} sensor(s); need {} from {}",
                records.len(),
                records.sensor_count(),
                config.min_records,
                config.min_sensors
            ),
        ));
    }

    let mut problem = problem.clone();
    problem.gamma = config.gamma;
    problem.include_master = config.include_master;
    problem.profile_rate = config.profile_rate;
    let prepared = PreparedRecords::new(records)?;
    let spec = problem.variable_spec(config.relax_index)?;
    let objective = |v: &[f64]| penalized_objective(v, &problem, &prepared);

    let ga = miga_minimize(&objective, &spec, &config.ga, &[])?;
    let (mut best_v, mut best_val) = (ga.best.clone(), ga.value);
    if let (true, Some(sweep)) = (problem.class.uses_subspaces(), &config.region_sweep) {
        let (lo, hi) = problem.index_range();
        for b in lo..=hi {
            let mut vars = spec.vars.clone();
            vars[4] = Variable::integer(b as i64, b as i64);
            let fixed = VariableSpec::new(vars)?;
            let cfg = GAConfig { seed: seeds::derive(config.ga.seed, &[0x7377, b as u64]), ..sweep.clone() };
            let start: Vec<Vec<f64>> =
                if round_index(ga.best[4], lo, hi) == b { vec![ga.best.clone()] } else { Vec::new() };
            let r = miga_minimize(&objective, &fixed, &cfg, &start)?;
            if r.value < best_val {
                best_val = r.value;
                best_v = r.best;
            }
        }
    }
    let (best, b) = problem.resolve(&best_v, &prepared)?;
    let mut diagnostics = Vec::new();
    if let Some(c) = problem.cones {
        diagnostics.extend(c.diagnostics.iter().cloned());
    }

    let (marginals, acceptance_rate) = match &config.mcmc {
        Some(mc) => {
            let r = mcmc_sample(&objective, &best_v, &spec, mc)?;
            diagnostics.extend(r.warnings.iter().cloned());
            let xs: Vec<[f64; 4]> = r
                .samples
                .iter()
                .filter_map(|v| problem.resolve(v, &prepared).ok())
                .map(|(x, _)| x.as_array())
                .collect();
            let (lb, ub) = (problem.site.master.lb, problem.site.master.ub);
            let m = (0..4)
                .map(|k| {
                    let vals: Vec<f64> = xs.iter().map(|x| x[k]).collect();
                    Marginal::from_values(&vals, lb[k].min(ub[k]), ub[k], mc.bins, false)
                })
                .collect();
            (Some(m), Some(r.acceptance_rate))
        }
        None => (None, None),
    };

    Ok(InversionSolution {
        status: InversionStatus::Solved,
        class: problem.class,
        best: Some(best),
        subspace: Some(b),
        objective: Some(prepared.wmse(&best)),
        penalized: Some(best_val),
        marginals,
        acceptance_rate,
        record_count: records.len(),
        sensor_count: records.sensor_count(),
        history: ga.history.iter().map(|h| h.best_so_far).collect(),
        diagnostics,
    })
}

/// Copy of `config` with solver seeds derived from `seed` and `keys`.
pub fn seeded(config: &InversionConfig, seed: u64, keys: &[u64]) -> InversionConfig {
    let mut c = config.clone();
    c.ga.seed = seeds::derive(seed, &[keys, &[1]].concat());
    if let Some(m) = &mut c.mcmc {
        m.seed = seeds::derive(seed, &[keys, &[2]].concat());
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxRegion, FeasibleSide};
    use crate::plume::{classify_stability, concentration, Receptor, WeatherSample};
    use crate::records::Record;

    fn fixture(src: &SourceCandidate, n: usize) -> RecordSet {
        let sensors = [(70.0, 50.0), (50.0, 80.0), (20.0, 30.0)];
        let mut recs = Vec::new();
        let mut i = 0;
        while recs.len() < n {
            let dir = (i as f64 * 23.0) % 360.0;
            let spd = 2.0 + (i % 4) as f64;
            let (sx, sy) = sensors[i % 3];
            let w = WeatherSample::new(0.0, dir, spd, 500.0);
            let rec = Receptor { x: sx, y: sy, z: 1.8 };
            let c = concentration(&src.source(), &w, &rec).unwrap();
            if c > 0.5 {
                recs.push(Record {
                    w_dir: dir,
                    w_spd: spd,
                    w_stab: classify_stability(spd, 500.0),
                    s_x: sx,
                    s_y: sy,
                    s_z: 1.8,
                    c,
                    sensor_id: format!("s{}", i % 3),
                    window_start: 600.0 * i as f64,
                });
            }
            i += 1;
        }
        RecordSet::uniform(recs)
    }

    fn master_only() -> SiteSpec {
        let m = BoxRegion::new(
            &[Point2::new(0.0, 0.0), Point2::new(100.0, 0.0), Point2::new(100.0, 100.0), Point2::new(0.0, 100.0)],
            FeasibleSide::Interior,
            Some(([0.0, 0.0, 0.0, 0.1, 1.0], [100.0, 100.0, 5.0, 20.0, 1.0])),
            None,
        )
        .unwrap();
        SiteSpec::new(m, vec![], vec![]).unwrap()
    }

    #[test]
    fn class_a_recovers_source() {
        let truth = SourceCandidate::new(45.0, 55.0, 2.0, 5.0);
        let recs = fixture(&truth, 40);
        let site = master_only();
        let p = InversionProblem::new(ProblemClass::A, &recs, &site, None).unwrap();
        let s = invert(&p, &InversionConfig::default()).unwrap();
        let best = s.best.unwrap();
        assert!(best.distance_2d(&truth) < 5.0, "{best:?}");
        assert!((best.r - 5.0).abs() < 0.5);
        assert_eq!(s.subspace, Some(1));
    }

    #[test]
    fn empty_and_sparse_outcomes() {
        let site = master_only();
        let empty = RecordSet::default();
        let p = InversionProblem::new(ProblemClass::A, &empty, &site, None).unwrap();
        let s = invert(&p, &InversionConfig::default()).unwrap();
        assert_eq!(s.status, InversionStatus::NoMeaningfulRecords);
        let few = fixture(&SourceCandidate::new(45.0, 55.0, 2.0, 5.0), 3);
        let p = InversionProblem::new(ProblemClass::A, &few, &site, None).unwrap();
        let s = invert(&p, &InversionConfig::default()).unwrap();
        assert_eq!(s.status, InversionStatus::InsufficientRecords);
        assert!(s.best.is_none());
    }

    #[test]
    fn class_requirements() {
        let site = master_only();
        let recs = RecordSet::default();
        assert!(InversionProblem::new(ProblemClass::C, &recs, &site, None).is_err());
        assert!(InversionProblem::new(ProblemClass::B, &recs, &site, None).is_err());
        assert_eq!(ProblemClass::detect(&site, None), ProblemClass::A);
    }

    fn two_box_site() -> SiteSpec {
        let master = BoxRegion::rectangle(0.0, 0.0, 100.0, 100.0, FeasibleSide::Interior).unwrap();
        let a = BoxRegion::rectangle(10.0, 10.0, 40.0, 40.0, FeasibleSide::Interior).unwrap();
        let b = BoxRegion::new(
            &[Point2::new(60.0, 60.0), Point2::new(90.0, 60.0), Point2::new(75.0, 90.0)],
            FeasibleSide::Interior,
            None,
            None,
        )
        .unwrap();
        SiteSpec::new(master, vec![a, b], vec![]).unwrap()
    }

    #[test]
    fn penalty_is_exact_and_dominates() {
        let site = two_box_site();
        let truth = SourceCandidate::new(75.0, 70.0, 2.0, 5.0);
        let recs = fixture(&truth, 20);
        let p = InversionProblem::new(ProblemClass::C, &recs, &site, None).unwrap();
        let prep = PreparedRecords::new(&recs).unwrap();
        let (glb, gub) = p.bounds();
        // feasible: P == F
        let v = untransform(&truth, 3, &glb, &gub, &site).unwrap();
        let pv = penalized_objective(&v, &p, &prep);
        assert!((pv - prep.wmse(&truth)).abs() < 1e-12);
        // a corner of the triangle's bbox violates one edge by a known amount
        let corner = SourceCandidate::new(60.0, 90.0, 2.0, 5.0);
        let v = untransform(&corner, 3, &glb, &gub, &site).unwrap();
        let excess: f64 =
            site.subspaces[1].g5.evaluate_xy(Point2::new(60.0, 90.0)).iter().map(|g| g.max(0.0).powi(2)).sum();
        let pv = penalized_objective(&v, &p, &prep);
        assert!((pv - (prep.wmse(&corner) + 1e5 * excess)).abs() < 1e-6 * pv);
        assert!(pv >= prep.wmse(&corner));
    }

    #[test]
    fn class_c_attributes_subspace() {
        let site = two_box_site();
        let truth = SourceCandidate::new(75.0, 70.0, 2.0, 5.0);
        let recs = fixture(&truth, 40);
        let p = InversionProblem::new(ProblemClass::C, &recs, &site, None).unwrap();
        let cfg = InversionConfig {
            mcmc: Some(MCMCConfig { steps: 600, ..MCMCConfig::default() }),
            ..InversionConfig::default()
        };
        let s = invert(&p, &cfg).unwrap();
        assert_eq!(s.subspace, Some(3));
        assert!(s.best.unwrap().distance_2d(&truth) < 5.0);
        assert_eq!(s.marginals.as_ref().unwrap().len(), 4);
    }

    #[test]
    fn relaxed_index_still_attributes() {
        let site = two_box_site();
        let truth = SourceCandidate::new(75.0, 70.0, 2.0, 5.0);
        let recs = fixture(&truth, 20);
        let p = InversionProblem::new(ProblemClass::C, &recs, &site, None).unwrap();
        let cfg = InversionConfig { relax_index: true, ..InversionConfig::default() };
        let s = invert(&p, &cfg).unwrap();
        assert_eq!(s.subspace, Some(site.locate(Point2::new(truth.x, truth.y))));
        assert!(s.best.unwrap().distance_2d(&truth) < 5.0);
    }

    #[test]
    fn region_sweep_never_worsens() {
        let site = two_box_site();
        let truth = SourceCandidate::new(75.0, 70.0, 2.0, 5.0);
        let recs = fixture(&truth, 20);
        let p = InversionProblem::new(ProblemClass::C, &recs, &site, None).unwrap();
        let ga = GAConfig { population: 8, generations: 3, ..GAConfig::default() };
        let bare = InversionConfig { ga: ga.clone(), region_sweep: None, ..InversionConfig::default() };
        let swept = InversionConfig { ga, ..InversionConfig::default() };
        for seed in 0..5 {
            let a = invert(&p, &seeded(&bare, seed, &[])).unwrap();
            let b = invert(&p, &seeded(&swept, seed, &[])).unwrap();
            assert!(b.penalized.unwrap() <= a.penalized.unwrap());
        }
    }
}
