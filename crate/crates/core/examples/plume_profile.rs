//! Ground-level methane downwind of a 10 kg/h leak in neutral and stable air.

use leakinv::plume::{concentration, PlumeSource, Receptor, WeatherSample};

fn main() -> leakinv::Result<()> {
    let source = PlumeSource { x: 0.0, y: 0.0, z: 2.0, rate: 10.0 };
    let day = WeatherSample::new(0.0, 0.0, 6.0, 0.0);
    let night = WeatherSample::new(0.0, 0.0, 1.5, 0.0);
    println!("{:>8} {:>12} {:>12}", "x (m)", "ppm (D)", "ppm (F)");
    for x in [5.0, 10.0, 25.0, 50.0, 100.0, 200.0] {
        let r = Receptor { x, y: 0.0, z: 1.8 };
        println!("{x:>8.0} {:>12.4} {:>12.4}", concentration(&source, &day, &r)?, concentration(&source, &night, &r)?);
    }
    Ok(())
}
