//! Direction cones from each sensor and the box they cut from the site.

use std::path::Path;

use leakinv::cones::{extract_cones, ConeConfig};
use leakinv::geometry::SiteSpec;
use leakinv::io;

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("open_site.json"))?;
    let streams = io::read_sensor_csv(&io::read_to_string(&data.join("fixtures/open_sensors.csv"))?, &site.sensors)?;
    let weather = io::read_weather_csv(&io::read_to_string(&data.join("fixtures/open_weather.csv"))?)?;

    let set = extract_cones(&streams, &weather, &site.master, &ConeConfig::default());
    for c in &set.cones {
        println!("{}: toward {:.0} deg, width {:.0} deg", c.sensor_id, c.d_mid, c.width);
    }
    println!("cut box x [{:.1}, {:.1}]  y [{:.1}, {:.1}]", set.clb[0], set.cub[0], set.clb[1], set.cub[1]);
    for d in &set.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
