//! Coverage as sensors are added one at a time.

use std::path::Path;

use leakinv::coverage::EvaluationSet;
use leakinv::geometry::SiteSpec;
use leakinv::placement::{grow_sensor_count, PlacementConfig, PlacementProblem};
use leakinv::wind::{synthetic_wind, WindModelConfig};

fn main() -> leakinv::Result<()> {
    let site = SiteSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_site.json"))?;
    let set = EvaluationSet::from_site(&site)?;
    let wind =
        vec![synthetic_wind(&WindModelConfig { span_hours: 2.0, start_dir: 225.0, seed: 7, ..Default::default() })?];
    let mut cfg = PlacementConfig::default();
    cfg.ga.population = 8;
    cfg.ga.generations = 4;
    cfg.ga.seed = 7;

    let problem = PlacementProblem::new(&site, &wind, &set, cfg)?;
    for f in grow_sensor_count(&problem, 4, 0.5)? {
        println!("{} sensor(s): {:5.1}%", f.n_sensors, f.coverage);
    }
    Ok(())
}
