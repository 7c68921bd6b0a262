mod common;

use leakinv::coverage::{
    coverage, coverage_map, coverage_report, evaluate_candidate, CoverageConfig, EvaluationSet, GridSpec, SensorLayout,
};
use leakinv::geometry::{Point2, SiteSpec};
use leakinv::inversion::{objective_wmse, SourceCandidate};
use leakinv::plume::{PlumeSource, WeatherSample};
use leakinv::records::weighted_records;
use leakinv::seeds;
use leakinv::solvers::GAConfig;
use leakinv::wind::{synthesize_sensor_data, synthetic_wind, SensorNoise, WindModelConfig, WindRealization};
use rand::Rng;

fn open_site() -> SiteSpec {
    SiteSpec::from_json_str(r#"{"master": {"polygon": [[0,0],[100,0],[100,100],[0,100]]}}"#).unwrap()
}

fn quick_config(seed: u64) -> CoverageConfig {
    let mut cfg = CoverageConfig::default();
    cfg.inversion.ga = GAConfig { population: 20, generations: 25, polish_evals: 150, ..GAConfig::default() };
    cfg.seed = seed;
    cfg
}

fn wind(seed: u64) -> WindRealization {
    synthetic_wind(&WindModelConfig { span_hours: 2.0, start_dir: 80.0, start_speed: 4.0, seed, ..Default::default() })
        .unwrap()
}

/// One hour toward each of eight compass points: the mirror image about
/// x = 50 is the same multiset of samples.
fn fan_wind() -> WindRealization {
    let samples = (0..8)
        .flat_map(|j| (0..60).map(move |i| WeatherSample::new(((j * 60 + i) * 60) as f64, 45.0 * j as f64, 6.0, 0.0)))
        .collect();
    WindRealization { samples, periods: Vec::new(), diagnostics: Vec::new() }
}

/// Records for a mirrored leak are the mirror image of the originals, so
/// the objective agrees at mirrored candidates and the map's record counts
/// are symmetric. Categories are not compared: they depend on per-point
/// optimizer seeds.
#[test]
fn mirrored_site_gives_mirrored_map() {
    let site = open_site();
    let layout = SensorLayout::new(vec![
        Point2::new(20.0, 50.0),
        Point2::new(80.0, 50.0),
        Point2::new(50.0, 20.0),
        Point2::new(50.0, 80.0),
    ]);
    let noise = SensorNoise { background: common::BACKGROUND, sigma: 0.0 };
    let wind = fan_wind();
    let rc = common::exact_record_config(0.0, 0.5);
    let points = GridSpec { nx: 4, ny: 4, extent: None }.points(&site).unwrap();
    let mut rng = seeds::rng(31);
    for p in &points {
        let mirror = Point2::new(100.0 - p.x, p.y);
        let set_of = |q: Point2| {
            let src = PlumeSource { x: q.x, y: q.y, z: 2.0, rate: 10.0 };
            let (streams, weather) = synthesize_sensor_data(&wind, &src, &layout.receptors(), noise, 0).unwrap();
            weighted_records(&streams, &weather, &rc).unwrap().set
        };
        let (a, b) = (set_of(*p), set_of(mirror));
        assert_eq!(a.len(), b.len(), "{p:?}");
        if a.is_empty() {
            continue;
        }
        for _ in 0..20 {
            let c = SourceCandidate::new(
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..10.0),
                rng.random_range(0.1..50.0),
            );
            let m = SourceCandidate::new(100.0 - c.x, c.y, c.z, c.r);
            let (fa, fb) = (objective_wmse(&c, &a).unwrap(), objective_wmse(&m, &b).unwrap());
            assert!((fa - fb).abs() <= 1e-9 * fa.abs().max(1.0), "{p:?} {c:?}: {fa} vs {fb}");
        }
    }

    let cfg = CoverageConfig { seed: 3, noise, records: rc, ..CoverageConfig::default() };
    let map = coverage_map(&layout, &wind, GridSpec { nx: 4, ny: 4, extent: None }, (2.0, 10.0), &site, &cfg).unwrap();
    let pts = &map.result.points;
    assert!(map.result.n_good > 0, "{:?}", map.result.coverage);
    for p in pts {
        let q = pts.iter().find(|q| (q.point.x - (100.0 - p.point.x)).abs() < 1e-9 && q.point.y == p.point.y).unwrap();
        assert_eq!(p.records, q.records, "{:?} vs {:?}", p.point, q.point);
    }
}

#[test]
fn extra_sensor_never_loses_records() {
    let site = open_site();
    let base = vec![Point2::new(30.0, 50.0), Point2::new(60.0, 70.0)];
    let mut more = base.clone();
    more.push(Point2::new(75.0, 40.0));
    let cfg = quick_config(4);
    let w = wind(4);
    for p in [Point2::new(20.0, 20.0), Point2::new(50.0, 50.0), Point2::new(80.0, 75.0)] {
        let a = evaluate_candidate(&SensorLayout::new(base.clone()), &w, 1, p, (2.0, 5.0), &site, &cfg).unwrap();
        let b = evaluate_candidate(&SensorLayout::new(more.clone()), &w, 1, p, (2.0, 5.0), &site, &cfg).unwrap();
        assert!(b.records >= a.records, "{p:?}: {} < {}", b.records, a.records);
    }
}

#[test]
fn mean_lies_between_realizations_and_ignores_order() {
    let site = common::site("demo_site.json");
    let set = EvaluationSet::from_site(&site).unwrap();
    let layout = SensorLayout::new(site.sensors.iter().map(|s| Point2::new(s.x, s.y)).collect());
    let cfg = quick_config(5);
    let ws: Vec<_> = (0..3).map(|s| wind(50 + s)).collect();
    let report = coverage_report(&layout, &ws, &set, &site, &cfg).unwrap();
    let values: Vec<f64> = report.realizations.iter().map(|r| r.coverage).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(lo <= report.mean && report.mean <= hi, "{values:?} mean {}", report.mean);

    let reversed: Vec<_> = ws.iter().rev().cloned().collect();
    let again = coverage_report(&layout, &reversed, &set, &site, &cfg).unwrap();
    assert_eq!(again.mean, report.mean);

    let single = coverage_report(&layout, &ws[..1], &set, &site, &cfg).unwrap();
    assert_eq!(single.mean, single.realizations[0].coverage);
}

#[test]
fn singleton_grid_matches_singleton_set() {
    let site = open_site();
    let layout = SensorLayout::new(vec![Point2::new(40.0, 60.0), Point2::new(65.0, 45.0)]);
    let cfg = quick_config(6);
    let w = wind(6);
    let map = coverage_map(&layout, &w, GridSpec { nx: 1, ny: 1, extent: None }, (2.0, 5.0), &site, &cfg).unwrap();
    let set = EvaluationSet::new(vec![Point2::new(50.0, 50.0)], 2.0, 5.0, &site).unwrap();
    let single = coverage(&layout, &w, 0, &set, &site, &cfg).unwrap();
    assert_eq!(map.result, single);
}

#[test]
fn category_counts_add_up() {
    let site = open_site();
    let layout = SensorLayout::new(vec![Point2::new(35.0, 55.0), Point2::new(70.0, 40.0), Point2::new(50.0, 80.0)]);
    let cfg = quick_config(7);
    let map =
        coverage_map(&layout, &wind(7), GridSpec { nx: 5, ny: 5, extent: None }, (2.0, 5.0), &site, &cfg).unwrap();
    let r = &map.result;
    assert_eq!(r.n_good + r.n_medium + r.n_poor, r.points.len());
    assert_eq!(r.points.len(), 25);
    assert!((r.coverage - 100.0 * r.n_good as f64 / 25.0).abs() < 1e-12);
    assert_eq!(map.to_csv().lines().count(), 26);
    for p in &r.points {
        assert_eq!(p.gap.is_none(), p.estimate.is_none());
    }
}
