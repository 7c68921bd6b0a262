//! Attributes the bundled checkerboard leak to one equipment block.

use std::path::Path;

use leakinv::cones::{extract_cones, ConeConfig};
use leakinv::geometry::{Point2, SiteSpec};
use leakinv::inversion::{invert, InversionConfig, InversionProblem, ProblemClass};
use leakinv::io;
use leakinv::records::{weighted_records, RecordConfig};

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("checkerboard_site.json"))?;
    let streams =
        io::read_sensor_csv(&io::read_to_string(&data.join("fixtures/checkerboard_sensors.csv"))?, &site.sensors)?;
    let weather = io::read_weather_csv(&io::read_to_string(&data.join("fixtures/checkerboard_weather.csv"))?)?;

    let records =
        weighted_records(&streams, &weather, &RecordConfig { t_w: 600.0, conc_threshold: 3.0, ..Default::default() })?
            .set;
    let cones = extract_cones(&streams, &weather, &site.master, &ConeConfig::default());
    let problem = InversionProblem::new(ProblemClass::D, &records, &site, Some(&cones))?;
    let sol = invert(&problem, &InversionConfig::default())?;

    let truth = Point2::new(75.0, 45.0);
    println!("site has {} regions; the leak sits in region {}", site.n_b(), site.locate(truth));
    match (sol.best, sol.subspace) {
        (Some(b), Some(k)) => println!("estimate ({:.1}, {:.1}) {:.1} kg/h in region {k}", b.x, b.y, b.r),
        _ => println!("no estimate: {:?}", sol.status),
    }
    Ok(())
}
