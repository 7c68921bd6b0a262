#![allow(dead_code)]

use leakinv::geometry::SiteSpec;
use leakinv::plume::{PlumeSource, Receptor, WeatherSample};
use leakinv::records::{weighted_records, Background, RecordConfig, RecordSet, SensorStream};
use leakinv::wind::{synthesize_sensor_data, synthetic_wind, SensorNoise, WindModelConfig, WindRealization};

pub const BACKGROUND: f64 = 2.0;

pub fn data_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn site(rel: &str) -> SiteSpec {
    SiteSpec::load(&data_path(rel)).expect("bundled site")
}

pub fn open_square() -> SiteSpec {
    SiteSpec::from_json_str(
        r#"{"master": {"polygon": [[0,0],[100,0],[100,100],[0,100]]},
            "sensors": [{"id":"s1","x":70,"y":50,"z":1.8},
                        {"id":"s2","x":45,"y":72,"z":1.8},
                        {"id":"s3","x":25,"y":30,"z":1.8}]}"#,
    )
    .unwrap()
}

pub fn receptors(site: &SiteSpec) -> Vec<(String, Receptor)> {
    site.sensors.iter().map(|s| (s.id.clone(), Receptor { x: s.x, y: s.y, z: s.z })).collect()
}

/// Wind that is constant within each 10 min period, with no daylight and
/// speeds kept in the neutral band, so every sample is class D and 600 s
/// records aligned to the start reproduce the plume exactly.
pub fn stepwise_wind(seed: u64, hours: f64, start_dir: f64, start_speed: f64) -> WindRealization {
    synthetic_wind(&WindModelConfig {
        span_hours: hours,
        dw1: 0.0,
        ds1: 0.0,
        ds2: 2.0,
        speed_range: (5.0, 11.0),
        start_dir,
        start_speed,
        solar_max: 0.0,
        seed,
        ..WindModelConfig::default()
    })
    .unwrap()
}

pub fn noiseless(
    wind: &WindRealization,
    source: &PlumeSource,
    site: &SiteSpec,
) -> (Vec<SensorStream>, Vec<WeatherSample>) {
    let noise = SensorNoise { background: BACKGROUND, sigma: 0.0 };
    synthesize_sensor_data(wind, source, &receptors(site), noise, 0).unwrap()
}

pub fn exact_record_config(origin: f64, threshold: f64) -> RecordConfig {
    RecordConfig {
        t_w: 600.0,
        conc_threshold: threshold,
        background: Background::Fixed { ppm: BACKGROUND },
        origin: Some(origin),
        ..RecordConfig::default()
    }
}

pub fn records(streams: &[SensorStream], weather: &[WeatherSample], threshold: f64) -> RecordSet {
    let origin = weather.first().map(|w| w.t).unwrap_or(0.0);
    weighted_records(streams, weather, &exact_record_config(origin, threshold)).unwrap().set
}

/// Every `k`-th record so that exactly `n` remain, with uniform weights.
pub fn thin_to(set: &RecordSet, n: usize) -> RecordSet {
    let m = set.len();
    assert!(m >= n, "only {m} records, need {n}");
    let picked = (0..n).map(|i| set.records[i * m / n].clone()).collect();
    RecordSet::uniform(picked)
}
