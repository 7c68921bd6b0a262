//! Coverage categories of the demo layout on a 10 x 10 grid of trial leaks.

use std::path::Path;

use leakinv::coverage::{coverage_map, CoverageConfig, GridSpec, SensorLayout};
use leakinv::geometry::{Point2, SiteSpec};
use leakinv::wind::{synthetic_wind, WindModelConfig};

fn main() -> leakinv::Result<()> {
    let site = SiteSpec::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_site.json"))?;
    let layout = SensorLayout::new(site.sensors.iter().map(|s| Point2::new(s.x, s.y)).collect());
    let wind = synthetic_wind(&WindModelConfig { span_hours: 3.0, start_dir: 225.0, seed: 4, ..Default::default() })?;
    let mut cfg = CoverageConfig { seed: 4, ..CoverageConfig::default() };
    cfg.inversion.ga.population = 30;
    cfg.inversion.ga.generations = 40;

    let map = coverage_map(&layout, &wind, GridSpec { nx: 10, ny: 10, extent: None }, (2.0, 5.0), &site, &cfg)?;
    let glyph = |p: &leakinv::coverage::PointOutcome| match p.category {
        leakinv::coverage::Category::Good => '#',
        leakinv::coverage::Category::Medium => '+',
        leakinv::coverage::Category::Poor => '.',
    };
    for row in map.result.points.chunks(10).rev() {
        println!("{}", row.iter().map(glyph).collect::<String>());
    }
    println!(
        "coverage {:.0}% ({} good, {} medium, {} poor)",
        map.result.coverage, map.result.n_good, map.result.n_medium, map.result.n_poor
    );
    Ok(())
}
