//! Posterior spread around the best fit from a short sampling run.

use std::path::Path;

use leakinv::geometry::SiteSpec;
use leakinv::inversion::{invert, InversionConfig, InversionProblem, ProblemClass};
use leakinv::io;
use leakinv::records::{weighted_records, RecordConfig};
use leakinv::solvers::MCMCConfig;

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("open_site.json"))?;
    let streams = io::read_sensor_csv(&io::read_to_string(&data.join("fixtures/open_sensors.csv"))?, &site.sensors)?;
    let weather = io::read_weather_csv(&io::read_to_string(&data.join("fixtures/open_weather.csv"))?)?;
    let records =
        weighted_records(&streams, &weather, &RecordConfig { t_w: 600.0, conc_threshold: 5.0, ..Default::default() })?
            .set;

    let cfg =
        InversionConfig { mcmc: Some(MCMCConfig { seed: 1, ..MCMCConfig::default() }), ..InversionConfig::default() };
    let sol = invert(&InversionProblem::new(ProblemClass::A, &records, &site, None)?, &cfg)?;
    println!("acceptance rate {:.2}", sol.acceptance_rate.unwrap_or(f64::NAN));
    for (name, m) in ["x", "y", "z", "rate"].iter().zip(sol.marginals.iter().flatten()) {
        println!("{name:>5}: mean {:8.2}  sd {:6.2}  95% [{:.2}, {:.2}]", m.mean, m.std, m.q025, m.q975);
    }
    Ok(())
}
