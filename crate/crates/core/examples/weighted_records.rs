//! Turns the bundled sensor and weather CSVs into weighted records.

use std::path::Path;

use leakinv::geometry::SiteSpec;
use leakinv::io;
use leakinv::records::{weighted_records, RecordConfig};

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("open_site.json"))?;
    let streams = io::read_sensor_csv(&io::read_to_string(&data.join("fixtures/open_sensors.csv"))?, &site.sensors)?;
    let weather = io::read_weather_csv(&io::read_to_string(&data.join("fixtures/open_weather.csv"))?)?;

    let cfg = RecordConfig { t_w: 600.0, conc_threshold: 5.0, ..RecordConfig::default() };
    let out = weighted_records(&streams, &weather, &cfg)?;
    println!("{} windows, {} records", out.windows.len(), out.set.len());
    for (r, w) in out.set.records.iter().zip(&out.set.weights).take(10) {
        println!(
            "{:>4} dir {:6.1} spd {:4.1} class {} c {:7.3} ppm weight {:.4}",
            r.sensor_id,
            r.w_dir,
            r.w_spd,
            r.w_stab.letter(),
            r.c,
            w
        );
    }
    for d in &out.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
