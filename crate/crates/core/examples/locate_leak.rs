//! Synthesizes a day of data for a known leak and inverts it.

use std::path::Path;

use leakinv::geometry::SiteSpec;
use leakinv::inversion::{invert, InversionConfig, InversionProblem, ProblemClass};
use leakinv::plume::{PlumeSource, Receptor};
use leakinv::records::{weighted_records, RecordConfig};
use leakinv::wind::{synthesize_sensor_data, synthetic_wind, SensorNoise, WindModelConfig};

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("open_site.json"))?;
    let sensors: Vec<(String, Receptor)> =
        site.sensors.iter().map(|s| (s.id.clone(), Receptor { x: s.x, y: s.y, z: s.z })).collect();

    let truth = PlumeSource { x: 45.0, y: 40.0, z: 2.0, rate: 15.0 };
    let wind = synthetic_wind(&WindModelConfig { span_hours: 24.0, start_dir: 200.0, seed: 3, ..Default::default() })?;
    let (streams, weather) = synthesize_sensor_data(&wind, &truth, &sensors, SensorNoise::default(), 3)?;
    let records = weighted_records(&streams, &weather, &RecordConfig { t_w: 600.0, ..RecordConfig::default() })?.set;

    let problem = InversionProblem::new(ProblemClass::A, &records, &site, None)?;
    let sol = invert(&problem, &InversionConfig::default())?;
    println!("{} records from {} sensors: {:?}", sol.record_count, sol.sensor_count, sol.status);
    if let Some(b) = sol.best {
        println!("estimate ({:.1}, {:.1}) z {:.1} m, {:.1} kg/h", b.x, b.y, b.z, b.r);
        println!("truth    ({:.1}, {:.1}) z {:.1} m, {:.1} kg/h", truth.x, truth.y, truth.z, truth.rate);
    }
    Ok(())
}
