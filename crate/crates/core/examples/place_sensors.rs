//! Searches for three sensor positions on the demo site.

use std::path::Path;

use leakinv::coverage::EvaluationSet;
use leakinv::geometry::SiteSpec;
use leakinv::placement::{optimize_placement, PlacementConfig, PlacementProblem};
use leakinv::wind::{synthetic_wind, WindModelConfig};

fn main() -> leakinv::Result<()> {
    let site = SiteSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_site.json"))?;
    let set = EvaluationSet::from_site(&site)?;
    let wind: Vec<_> = (0..2)
        .map(|s| synthetic_wind(&WindModelConfig { span_hours: 2.0, start_dir: 225.0, seed: s, ..Default::default() }))
        .collect::<leakinv::Result<_>>()?;
    let mut cfg = PlacementConfig { n_sensors: 3, ..PlacementConfig::default() };
    cfg.ga.population = 10;
    cfg.ga.generations = 6;
    cfg.ga.seed = 6;

    let problem = PlacementProblem::new(&site, &wind, &set, cfg)?;
    let r = optimize_placement(&problem)?;
    for t in &r.trace {
        println!("generation {:>2}: best {:7.2}", t.iteration, t.value);
    }
    for p in &r.layout.positions {
        println!("sensor at ({:.1}, {:.1})", p.x, p.y);
    }
    println!("mean coverage {:.1}% after {} coverage runs", r.value, r.coverage_evaluations);
    Ok(())
}
