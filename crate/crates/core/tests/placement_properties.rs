mod common;

use leakinv::coverage::{CoverageConfig, EvaluationSet, SensorLayout};
use leakinv::geometry::{Point2, SiteSpec};
use leakinv::placement::{
    grow_sensor_count, layout_penalties, optimize_placement, placement_objective, PlacementConfig, PlacementProblem,
};
use leakinv::solvers::GAConfig;
use leakinv::wind::{synthetic_wind, WindModelConfig, WindRealization};
use leakinv::Error;
use proptest::prelude::*;

const TWIN_SITE: &str = r#"{
  "master": {"polygon": [[0,0],[100,0],[100,100],[0,100]]},
  "subspaces": [
    {"polygon": [[20,42],[36,42],[36,58],[20,58]], "epts": [[24,46],[32,46],[24,54],[32,54]]},
    {"polygon": [[64,42],[80,42],[80,58],[64,58]], "epts": [[68,46],[76,46],[68,54],[76,54]]}
  ],
  "zones": [
    {"polygon": [[44,0],[56,0],[56,12],[44,12]]}
  ]
}"#;

fn twin() -> SiteSpec {
    SiteSpec::from_json_str(TWIN_SITE).unwrap()
}

fn short_wind(seed: u64) -> WindRealization {
    synthetic_wind(&WindModelConfig { span_hours: 2.0, start_dir: 90.0, start_speed: 3.0, seed, ..Default::default() })
        .unwrap()
}

fn small_config(n: usize, seed: u64) -> PlacementConfig {
    let mut coverage = CoverageConfig::default();
    coverage.inversion.ga = GAConfig { population: 16, generations: 15, polish_evals: 80, ..GAConfig::default() };
    coverage.seed = seed;
    PlacementConfig {
        n_sensors: n,
        ga: GAConfig { population: 8, generations: 4, elite: 2, seed, ..GAConfig::default() },
        coverage,
        ..PlacementConfig::default()
    }
}

fn mirror(p: Point2) -> Point2 {
    Point2::new(100.0 - p.x, p.y)
}

fn point() -> impl Strategy<Value = Point2> {
    (0.0..100.0f64, 0.0..100.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn penalties_mirror_with_the_site(pts in prop::collection::vec(point(), 1..5)) {
        let site = twin();
        let cfg = PlacementConfig::default();
        let a = layout_penalties(&SensorLayout::new(pts.clone()), &site, &cfg);
        let b = layout_penalties(&SensorLayout::new(pts.into_iter().map(mirror).collect()), &site, &cfg);
        prop_assert!((a.total() - b.total()).abs() <= 1e-9 * a.total().max(1.0), "{:?} vs {:?}", a, b);
    }

    #[test]
    fn sensor_on_a_subspace_centre_costs_at_least_phi(others in prop::collection::vec(point(), 0..3), k in 0usize..2) {
        let site = twin();
        let cfg = PlacementConfig::default();
        let mut pts = vec![site.subspaces[k].com];
        pts.extend(others);
        let pen = layout_penalties(&SensorLayout::new(pts), &site, &cfg);
        prop_assert!(pen.subspace >= cfg.phi);
        prop_assert!(-pen.total() <= -cfg.phi);
    }
}

#[test]
fn penalised_layouts_rank_below_feasible_ones() {
    let site = twin();
    let w = vec![short_wind(1)];
    let set = EvaluationSet::from_site(&site).unwrap();
    let problem = PlacementProblem::new(&site, &w, &set, small_config(2, 1)).unwrap();
    let layout = |pts: &[(f64, f64)]| SensorLayout::new(pts.iter().map(|(x, y)| Point2::new(*x, *y)).collect());
    let penalised = [
        layout(&[(28.0, 50.0), (10.0, 10.0)]),
        layout(&[(50.0, 5.0), (90.0, 90.0)]),
        layout(&[(10.0, 80.0), (12.0, 80.0)]),
    ];
    let feasible = [layout(&[(50.0, 40.0), (50.0, 60.0)]), layout(&[(10.0, 80.0), (90.0, 20.0)])];
    let worst_feasible =
        feasible.iter().map(|l| placement_objective(l, &problem).unwrap()).fold(f64::INFINITY, f64::min);
    assert!((0.0..=100.0).contains(&worst_feasible));
    for l in &penalised {
        let s = placement_objective(l, &problem).unwrap();
        assert!(s < 0.0 && s < worst_feasible, "{l:?}: {s}");
    }
}

#[test]
fn mirror_layouts_score_alike_on_a_mirror_site() {
    // steady wind along the mirror axis and noiseless data: both layouts see
    // mirrored records, so only per-point optimizer seeds differ
    let site = twin();
    let w = vec![synthetic_wind(&WindModelConfig {
        span_hours: 2.0,
        dw1: 0.0,
        ds1: 0.0,
        dw2: 0.0,
        ds2: 0.0,
        start_dir: 90.0,
        start_speed: 3.0,
        ..Default::default()
    })
    .unwrap()];
    let set = EvaluationSet::from_site(&site).unwrap();
    let mut cfg = small_config(1, 2);
    cfg.coverage.noise.sigma = 0.0;
    let problem = PlacementProblem::new(&site, &w, &set, cfg).unwrap();
    let p = Point2::new(30.0, 70.0);
    let a = placement_objective(&SensorLayout::new(vec![p]), &problem).unwrap();
    let b = placement_objective(&SensorLayout::new(vec![mirror(p)]), &problem).unwrap();
    // one of 8 evaluation points may fall on the other side of a category edge
    assert!((a - b).abs() <= 12.5 + 1e-9, "{a} vs {b}");
}

#[test]
fn optimum_is_feasible_and_bounded() {
    let site = twin();
    let w = vec![short_wind(3)];
    let set = EvaluationSet::from_site(&site).unwrap();
    let problem = PlacementProblem::new(&site, &w, &set, small_config(2, 3)).unwrap();
    let r = optimize_placement(&problem).unwrap();
    assert_eq!(r.penalties.total(), 0.0);
    assert!(r.value >= r.initial_value, "{} < {}", r.value, r.initial_value);
    assert!((0.0..=100.0).contains(&r.value));
    for t in &r.trace {
        assert!(t.value <= 100.0);
        if let Some(b) = t.best_feasible {
            assert!((0.0..=100.0).contains(&b));
        }
    }
    let best: Vec<f64> = r.trace.iter().filter_map(|t| t.best_feasible).collect();
    assert!(best.windows(2).all(|p| p[1] >= p[0]), "{best:?}");
}

#[test]
fn growth_frontier_at_fixed_seed() {
    let site = twin();
    let w = vec![short_wind(4)];
    let set = EvaluationSet::from_site(&site).unwrap();
    let problem = PlacementProblem::new(&site, &w, &set, small_config(1, 4)).unwrap();
    let frontier = grow_sensor_count(&problem, 3, 0.0).unwrap();
    assert_eq!(frontier.iter().map(|f| f.n_sensors).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(
        frontier.windows(2).all(|p| p[1].coverage >= p[0].coverage),
        "{:?}",
        frontier.iter().map(|f| f.coverage).collect::<Vec<_>>()
    );
    for f in &frontier {
        assert_eq!(f.result.layout.len(), f.n_sensors);
        assert!(f.coverage <= 100.0);
    }

    let early = grow_sensor_count(&problem, 3, 1e9).unwrap();
    assert_eq!(early.len(), 2);
}

#[test]
fn impossible_separation_is_reported() {
    let site = twin();
    let w = vec![short_wind(5)];
    let set = EvaluationSet::from_site(&site).unwrap();
    let cfg = PlacementConfig { d_min: 200.0, repair_budget: 100, ..small_config(3, 5) };
    let problem = PlacementProblem::new(&site, &w, &set, cfg).unwrap();
    match optimize_placement(&problem) {
        Err(Error::NoFeasibleLayout(msg)) => assert!(msg.contains("d_min"), "{msg}"),
        other => panic!("expected NoFeasibleLayout, got {other:?}"),
    }
}
