//! Observation records.
//!
//! Raw sensor streams are cut into fixed windows. A window becomes a record
//! when its mean concentration above background clears the concentration
//! gate and its mean wind speed is below the wind gate. Each record can then
//! be weighted by a signal quality factor and an atmospheric steadiness
//! factor.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plume::{classify_stability, Receptor, StabilityClass, WeatherSample, CALM_WIND};

/// Concentration time series from one fixed sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStream {
    pub sensor_id: String,
    pub position: Receptor,
    /// `(t seconds, c ppm)`, strictly increasing in `t`.
    pub samples: Vec<(f64, f64)>,
}

impl SensorStream {
    pub fn validate(&self) -> Result<()> {
        for w in self.samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::OutOfOrder(format!(
                    "sensor {}: timestamp {} does not follow {}",
                    self.sensor_id, w[1].0, w[0].0
                )));
            }
        }
        if let Some(s) = self.samples.iter().find(|s| !(s.1 >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "sensor {}: negative or non-finite reading {} at t={}",
                self.sensor_id, s.1, s.0
            )));
        }
        Ok(())
    }

    /// Nominal sampling interval (smallest positive spacing; 60 s if unknown).
    pub fn cadence(&self) -> f64 {
        let d = self.samples.windows(2).map(|w| w[1].0 - w[0].0).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            d
        } else {
            60.0
        }
    }

    /// Copy restricted to samples with `t0 <= t < t1`.
    pub fn slice(&self, t0: f64, t1: f64) -> SensorStream {
        let lo = self.samples.partition_point(|s| s.0 < t0);
        let hi = self.samples.partition_point(|s| s.0 < t1);
        SensorStream {
            sensor_id: self.sensor_id.clone(),
            position: self.position,
            samples: self.samples[lo..hi].to_vec(),
        }
    }
}

/// One retained observation `[w_dir w_spd w_stab s_x s_y s_z c]`, plus the
/// sensor and window it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub w_dir: f64,
    pub w_spd: f64,
    pub w_stab: StabilityClass,
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    /// Window-mean concentration above background, ppm.
    pub c: f64,
    pub sensor_id: String,
    pub window_start: f64,
}

impl Record {
    pub fn receptor(&self) -> Receptor {
        Receptor { x: self.s_x, y: self.s_y, z: self.s_z }
    }

    pub fn weather(&self) -> WeatherSample {
        WeatherSample { t: self.window_start, w_dir: self.w_dir, w_spd: self.w_spd, solar: 0.0, stab: self.w_stab }
    }
}

/// Records with their normalised weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub records: Vec<Record>,
    pub weights: Vec<f64>,
}

impl RecordSet {
    /// Uniform weights `1/n_r`.
    pub fn uniform(records: Vec<Record>) -> Self {
        let n = records.len();
        let weights = vec![if n > 0 { 1.0 / n as f64 } else { 0.0 }; n];
        Self { records, weights }
    }

    pub fn with_weights(records: Vec<Record>, weights: Vec<f64>) -> Result<Self> {
        if records.len() != weights.len() {
            return Err(Error::InvalidInput(format!("{} records but {} weights", records.len(), weights.len())));
        }
        Ok(Self { records, weights })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of distinct sensors contributing records.
    pub fn sensor_count(&self) -> usize {
        self.records.iter().map(|r| r.sensor_id.as_str()).collect::<BTreeSet<_>>().len()
    }
}

/// How the per-sensor background level is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    /// Percentile (0–1) of the sensor's readings over a trailing horizon.
    RollingPercentile { percentile: f64, horizon_s: f64 },
    /// A fixed level in ppm.
    Fixed { ppm: f64 },
}

impl Default for Background {
    fn default() -> Self {
        Background::RollingPercentile { percentile: 0.10, horizon_s: 86_400.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordConfig {
    /// Window length `t_w`, seconds (120–600).
    pub t_w: f64,
    /// Minimum mean concentration above background, ppm.
    pub conc_threshold: f64,
    /// Records need a mean wind speed below this, m/s.
    pub max_wind: f64,
    pub background: Background,
    /// Window alignment origin; defaults to each stream's first sample.
    pub origin: Option<f64>,
    /// Only windows starting at or after this time are considered.
    pub since: Option<f64>,
}

impl Default for RecordConfig {
    fn default() -> Self {
        Self {
            t_w: 600.0,
            conc_threshold: 5.0,
            max_wind: 12.0,
            background: Background::default(),
            origin: None,
            since: None,
        }
    }
}

/// Raw contents of a window that produced a record, used for weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordWindow {
    pub sensor_id: String,
    pub start: f64,
    pub background: f64,
    /// Readings minus background.
    pub signal: Vec<f64>,
    pub dirs: Vec<f64>,
    pub speeds: Vec<f64>,
}

/// Output of [`generate_records`]: uniform-weight records, their raw
/// windows (same order), and diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RecordOutput {
    pub set: RecordSet,
    pub windows: Vec<RecordWindow>,
    pub diagnostics: Vec<String>,
}

/// Circular mean of angles in degrees, in `[0, 360)`.
pub fn circular_mean(deg: &[f64]) -> f64 {
    let (s, c) = deg.iter().fold((0.0, 0.0), |(s, c), d| {
        let (ds, dc) = d.to_radians().sin_cos();
        (s + ds, c + dc)
    });
    wrap360(s.atan2(c).to_degrees())
}

/// Wraps into `[0, 360)`.
pub fn wrap360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `a − b` in `(-180, 180]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Nearest-rank percentile (`p` in 0–1) of a slice.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub(crate) fn background_level(stream: &SensorStream, window_end: f64, model: Background) -> f64 {
    match model {
        Background::Fixed { ppm } => ppm,
        Background::RollingPercentile { percentile: p, horizon_s } => {
            let lo = stream.samples.partition_point(|s| s.0 < window_end - horizon_s);
            let hi = stream.samples.partition_point(|s| s.0 < window_end);
            let vals: Vec<f64> = stream.samples[lo..hi].iter().map(|s| s.1).collect();
            percentile(&vals, p)
        }
    }
}

/// Cuts streams into windows and keeps the meaningful ones.
///
/// Windows are non-overlapping and aligned to `config.origin` (or each
/// stream's first sample). A window needs samples covering at least half of
/// `t_w`. Output order is by `(sensor_id, window_start)`, independent of the
/// order of `streams`.
pub fn generate_records(
    streams: &[SensorStream],
    weather: &[WeatherSample],
    config: &RecordConfig,
) -> Result<RecordOutput> {
    if !(120.0..=600.0).contains(&config.t_w) {
        return Err(Error::InvalidInput(format!("record window t_w = {} s is outside [120, 600]", config.t_w)));
    }
    let mut out = RecordOutput::default();
    if streams.is_empty() || weather.is_empty() {
        out.diagnostics.push("no concentration or weather data; no records generated".into());
        return Ok(out);
    }
    if weather.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::OutOfOrder("weather timestamps must be strictly increasing".into()));
    }

    let mut order: Vec<&SensorStream> = streams.iter().collect();
    order.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id));

    let mut rows: Vec<(Record, RecordWindow)> = Vec::new();
    for stream in order {
        stream.validate()?;
        if stream.samples.is_empty() {
            continue;
        }
        let cadence = stream.cadence();
        let origin = config.origin.unwrap_or(stream.samples[0].0);
        let t_w = config.t_w;

        let mut i = stream.samples.partition_point(|s| s.0 < origin);
        while i < stream.samples.len() {
            let k = ((stream.samples[i].0 - origin) / t_w).floor();
            let start = origin + k * t_w;
            let end = start + t_w;
            let j = i + stream.samples[i..].partition_point(|s| s.0 < end);
            let window = &stream.samples[i..j];
            i = j;

            if config.since.is_some_and(|since| start < since) {
                continue;
            }
            if (window.len() as f64) * cadence < 0.5 * t_w {
                continue;
            }
            let w_lo = weather.partition_point(|w| w.t < start);
            let w_hi = weather.partition_point(|w| w.t < end);
            let ws = &weather[w_lo..w_hi];
            if ws.is_empty() {
                out.diagnostics
                    .push(format!("sensor {}: no weather samples in window starting at {start}", stream.sensor_id));
                continue;
            }

            let background = background_level(stream, end, config.background);
            let conc: Vec<f64> = window.iter().map(|s| s.1).collect();
            let enhancement = mean(&conc) - background;
            let dirs: Vec<f64> = ws.iter().map(|w| w.w_dir).collect();
            let speeds: Vec<f64> = ws.iter().map(|w| w.w_spd).collect();
            let w_spd = mean(&speeds);
            if !(enhancement > config.conc_threshold) || !(w_spd < config.max_wind) {
                continue;
            }
            if w_spd < CALM_WIND {
                out.diagnostics.push(format!("sensor {}: calm window at {start} skipped", stream.sensor_id));
                continue;
            }
            let w_dir = circular_mean(&dirs);
            let solar = mean(&ws.iter().map(|w| w.solar).collect::<Vec<_>>());
            let record = Record {
                w_dir,
                w_spd,
                w_stab: classify_stability(w_spd, solar),
                s_x: stream.position.x,
                s_y: stream.position.y,
                s_z: stream.position.z,
                c: enhancement,
                sensor_id: stream.sensor_id.clone(),
                window_start: start,
            };
            let raw = RecordWindow {
                sensor_id: stream.sensor_id.clone(),
                start,
                background,
                signal: conc.iter().map(|c| c - background).collect(),
                dirs,
                speeds,
            };
            rows.push((record, raw));
        }
    }

    if rows.is_empty() {
        out.diagnostics.push("no meaningful records".into());
    }
    let (records, windows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    out.set = RecordSet::uniform(records);
    out.windows = windows;
    Ok(out)
}

/// Signal-to-noise factor of one window.
///
/// `μ/(μ + 2σ)` of the background-subtracted signal, clamped to `[0, 1]`,
/// times 0.1 when no run of at least three consecutive samples exceeds
/// `threshold`. Constant windows score 1 before the run check.
pub fn snr_quality(signal: &[f64], threshold: f64) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let mu = mean(signal);
    let var = signal.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / signal.len() as f64;
    let sigma = var.sqrt();
    let base = if sigma == 0.0 {
        1.0
    } else if mu <= 0.0 {
        0.0
    } else {
        (mu / (mu + 2.0 * sigma)).clamp(0.0, 1.0)
    };
    let mut longest = 0usize;
    let mut run = 0usize;
    for s in signal {
        if *s > threshold {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    if longest < 3 {
        base * 0.1
    } else {
        base
    }
}

/// Atmospheric steadiness factor:
/// `exp(−|Δdir|/45°)·exp(−σ_dir/30°)·exp(−|Δspd|/3)`, where Δ is the
/// difference between the second-half and first-half means.
pub fn atmospheric_quality(dirs: &[f64], speeds: &[f64]) -> f64 {
    let dir_drift = if dirs.len() >= 2 {
        let h = dirs.len() / 2;
        angle_diff(circular_mean(&dirs[h..]), circular_mean(&dirs[..h])).abs()
    } else {
        0.0
    };
    let dir_sigma = if dirs.is_empty() {
        0.0
    } else {
        let m = circular_mean(dirs);
        (dirs.iter().map(|d| angle_diff(*d, m).powi(2)).sum::<f64>() / dirs.len() as f64).sqrt()
    };
    let spd_drift = if speeds.len() >= 2 {
        let h = speeds.len() / 2;
        (mean(&speeds[h..]) - mean(&speeds[..h])).abs()
    } else {
        0.0
    };
    (-dir_drift / 45.0).exp() * (-dir_sigma / 30.0).exp() * (-spd_drift / 3.0).exp()
}

/// Quality `q_i = q_snr · q_atm` for each record window.
pub fn record_quality(windows: &[RecordWindow], conc_threshold: f64) -> Vec<f64> {
    windows.iter().map(|w| snr_quality(&w.signal, conc_threshold) * atmospheric_quality(&w.dirs, &w.speeds)).collect()
}

/// `w_i = q_i / Σq`. An all-zero (or empty-sum) quality array falls back to
/// uniform weights and returns a diagnostic.
pub fn normalize_weights(q: &[f64]) -> (Vec<f64>, Option<String>) {
    let n = q.len();
    if n == 0 {
        return (Vec::new(), None);
    }
    let total: f64 = q.iter().sum();
    if !(total > 0.0) || q.iter().any(|v| !(*v >= 0.0)) {
        return (vec![1.0 / n as f64; n], Some("record qualities sum to zero; using uniform weights".into()));
    }
    (q.iter().map(|v| v / total).collect(), None)
}

/// Generates records and assigns quality-based weights.
pub fn weighted_records(
    streams: &[SensorStream],
    weather: &[WeatherSample],
    config: &RecordConfig,
) -> Result<RecordOutput> {
    let mut out = generate_records(streams, weather, config)?;
    let q = record_quality(&out.windows, config.conc_threshold);
    let (w, diag) = normalize_weights(&q);
    out.set.weights = w;
    out.diagnostics.extend(diag);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(id: &str, pos: (f64, f64, f64), values: &[f64], t0: f64) -> SensorStream {
        SensorStream {
            sensor_id: id.into(),
            position: Receptor { x: pos.0, y: pos.1, z: pos.2 },
            samples: values.iter().enumerate().map(|(i, c)| (t0 + 60.0 * i as f64, *c)).collect(),
        }
    }

    fn weather(n: usize, dir: f64, spd: f64) -> Vec<WeatherSample> {
        (0..n).map(|i| WeatherSample::new(60.0 * i as f64, dir, spd, 400.0)).collect()
    }

    fn cfg() -> RecordConfig {
        RecordConfig { background: Background::Fixed { ppm: 0.0 }, ..RecordConfig::default() }
    }

    #[test]
    fn below_threshold_window_dropped() {
        let s = stream("a", (0.0, 0.0, 1.8), &[4.9; 10], 0.0);
        let out = generate_records(&[s], &weather(10, 30.0, 3.0), &cfg()).unwrap();
        assert!(out.set.is_empty());
        assert!(out.diagnostics.iter().any(|d| d.contains("no meaningful")));
    }

    #[test]
    fn high_wind_window_dropped() {
        let s = stream("a", (0.0, 0.0, 1.8), &[6.2; 10], 0.0);
        let out = generate_records(&[s], &weather(10, 30.0, 12.5), &cfg()).unwrap();
        assert!(out.set.is_empty());
    }

    #[test]
    fn qualifying_window_emits_record() {
        let s = stream("a", (10.0, 20.0, 1.8), &[6.2; 10], 0.0);
        let out = generate_records(&[s], &weather(10, 30.0, 3.1), &cfg()).unwrap();
        assert_eq!(out.set.len(), 1);
        let r = &out.set.records[0];
        assert!((r.w_dir - 30.0).abs() < 1e-9);
        assert!((r.w_spd - 3.1).abs() < 1e-12);
        assert_eq!(r.w_stab, classify_stability(3.1, 400.0));
        assert_eq!((r.s_x, r.s_y, r.s_z), (10.0, 20.0, 1.8));
        assert!((r.c - 6.2).abs() < 1e-12);
        assert_eq!(out.set.weights, vec![1.0]);
    }

    #[test]
    fn background_relative_gate() {
        // 10 readings at 8 ppm after a day at 2 ppm: 6 ppm above background.
        let mut vals = vec![2.0; 1440];
        vals.extend([8.0; 10]);
        let s = stream("a", (0.0, 0.0, 1.8), &vals, 0.0);
        let w = weather(1450, 0.0, 3.0);
        let c = RecordConfig { origin: Some(0.0), since: Some(86_400.0), ..RecordConfig::default() };
        let out = generate_records(&[s], &w, &c).unwrap();
        assert_eq!(out.set.len(), 1);
        assert!((out.set.records[0].c - 6.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trailing_window_rule() {
        // 14 samples: one full window of 10 and a trailing window of 4 (< half).
        let s = stream("a", (0.0, 0.0, 1.8), &[9.0; 14], 0.0);
        let out = generate_records(&[s], &weather(14, 0.0, 3.0), &cfg()).unwrap();
        assert_eq!(out.set.len(), 1);
        let s = stream("a", (0.0, 0.0, 1.8), &[9.0; 15], 0.0);
        let out = generate_records(&[s], &weather(15, 0.0, 3.0), &cfg()).unwrap();
        assert_eq!(out.set.len(), 2);
    }

    #[test]
    fn window_length_precondition() {
        let s = stream("a", (0.0, 0.0, 1.8), &[9.0; 10], 0.0);
        let c = RecordConfig { t_w: 60.0, ..cfg() };
        assert!(generate_records(&[s], &weather(10, 0.0, 3.0), &c).is_err());
    }

    #[test]
    fn empty_inputs_yield_empty_set() {
        let out = generate_records(&[], &weather(10, 0.0, 3.0), &cfg()).unwrap();
        assert!(out.set.is_empty() && !out.diagnostics.is_empty());
    }

    #[test]
    fn out_of_order_stream_rejected() {
        let mut s = stream("a", (0.0, 0.0, 1.8), &[9.0; 10], 0.0);
        s.samples.swap(2, 3);
        assert!(matches!(generate_records(&[s], &weather(10, 0.0, 3.0), &cfg()), Err(Error::OutOfOrder(_))));
    }

    #[test]
    fn circular_mean_wraps() {
        let m = circular_mean(&[350.0, 10.0]);
        assert!(angle_diff(m, 0.0).abs() < 1e-9, "{m}");
        assert!((0.0..360.0).contains(&m));
        assert!((circular_mean(&[80.0, 100.0]) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn constant_window_has_full_quality() {
        let w = RecordWindow {
            sensor_id: "a".into(),
            start: 0.0,
            background: 2.0,
            signal: vec![7.0; 10],
            dirs: vec![45.0; 10],
            speeds: vec![3.0; 10],
        };
        let q = record_quality(&[w], 5.0);
        assert!((q[0] - 1.0).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn isolated_spike_is_downgraded() {
        let mut signal = vec![0.0; 10];
        signal[4] = 28.0;
        let q = snr_quality(&signal, 5.0);
        // μ = 2.8, σ = 8.4 → 2.8/19.6 = 1/7, then ×0.1 for the lone spike.
        assert!((q - 1.0 / 70.0).abs() < 1e-12, "{q}");
        assert!(q < 0.2);
    }

    #[test]
    fn direction_drift_lowers_quality() {
        let dirs: Vec<f64> = (0..10).map(|i| i as f64 * 10.0).collect();
        let q = atmospheric_quality(&dirs, &[3.0; 10]);
        // oracle: first-half mean 20°, second-half mean 70°, circular std of
        // 0..90° evaluated independently below
        let m = 45.0f64;
        let sd = (dirs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / 10.0).sqrt();
        let expect = (-50.0f64 / 45.0).exp() * (-sd / 30.0).exp();
        assert!((q - expect).abs() < 1e-9, "{q} vs {expect}");
        assert!(q <= 0.5);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(normalize_weights(&[1.0; 4]).0, vec![0.25; 4]);
        assert_eq!(normalize_weights(&[2.0, 1.0, 1.0]).0, vec![0.5, 0.25, 0.25]);
        let (w, d) = normalize_weights(&[0.0, 0.0]);
        assert_eq!(w, vec![0.5, 0.5]);
        assert!(d.is_some());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_scale_free(
            q in prop::collection::vec(0.0f64..10.0, 1..40), k in 1e-3f64..1e3
        ) {
            prop_assume!(q.iter().sum::<f64>() > 0.0);
            let (w, _) = normalize_weights(&q);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
            let scaled: Vec<f64> = q.iter().map(|v| v * k).collect();
            let (w2, _) = normalize_weights(&scaled);
            for (a, b) in w.iter().zip(&w2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn records_respect_gates_and_sensor_order(
            vals in prop::collection::vec(0.0f64..20.0, 30..60),
            spd in 0.0f64..15.0,
        ) {
            let a = stream("a", (0.0, 0.0, 1.8), &vals, 0.0);
            let b = stream("b", (5.0, 0.0, 1.8), &vals.iter().rev().copied().collect::<Vec<_>>(), 0.0);
            let w = weather(vals.len(), 10.0, spd);
            let c = cfg();
            let o1 = generate_records(&[a.clone(), b.clone()], &w, &c).unwrap();
            let o2 = generate_records(&[b, a], &w, &c).unwrap();
            prop_assert_eq!(&o1.set, &o2.set);
            for r in &o1.set.records {
                prop_assert!(r.c > c.conc_threshold);
                prop_assert!(r.w_spd < c.max_wind);
            }
        }
    }
}
