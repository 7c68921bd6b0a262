//! Replays the bundled pulse through the moving-window monitor.

use std::path::Path;

use leakinv::geometry::SiteSpec;
use leakinv::inversion::{monitor_step, MonitorConfig, MonitoringState};
use leakinv::io;
use leakinv::plume::{Receptor, WeatherSample};
use leakinv::records::{RecordConfig, SensorStream};

fn main() -> leakinv::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let site = SiteSpec::load(&data.join("open_site.json"))?;
    let streams = io::read_sensor_csv(&io::read_to_string(&data.join("fixtures/pulse_sensors.csv"))?, &site.sensors)?;
    let weather = io::read_weather_csv(&io::read_to_string(&data.join("fixtures/pulse_weather.csv"))?)?;

    let mut cfg = MonitorConfig {
        window_s: 3600.0,
        step_s: 600.0,
        records: RecordConfig { t_w: 300.0, conc_threshold: 3.0, ..RecordConfig::default() },
        seed: 11,
        ..MonitorConfig::default()
    };
    cfg.inversion.ga.population = 30;
    cfg.inversion.ga.generations = 40;
    cfg.inversion.ga.polish_evals = 200;

    let sensors: Vec<(String, Receptor)> =
        site.sensors.iter().map(|s| (s.id.clone(), Receptor { x: s.x, y: s.y, z: s.z })).collect();
    let mut state = MonitoringState::new(weather[0].t, &sensors);
    let end = weather.last().map(|w| w.t).unwrap_or(0.0);
    while state.now <= end {
        let (t0, t1) = (state.now, state.now + cfg.step_s);
        let batch: Vec<SensorStream> = streams.iter().map(|s| s.slice(t0, t1)).collect();
        let wx: Vec<WeatherSample> = weather.iter().filter(|w| w.t >= t0 && w.t < t1).copied().collect();
        let report = monitor_step(&mut state, &batch, &wx, &site, &cfg)?;
        for e in &report.events {
            print!("{} {:<16}", io::format_timestamp(report.t), e.name());
            match report.solution.as_ref().and_then(|s| s.best.map(|b| (b, s.record_count))) {
                Some((b, n)) => println!(" ({:.1}, {:.1}) {:.1} kg/h from {n} records", b.x, b.y, b.r),
                None => println!(" {} records in window", report.records),
            }
        }
    }
    Ok(())
}
