//! Stochastic wind realizations and synthetic sensor data.
//!
//! Both generators are two nested random walks. The outer walk moves the
//! period direction and speed once per period; the inner loop jitters each
//! sample around the current period values. The conditioned generator
//! replaces the outer move with a roulette draw over a wind rose restricted
//! to a neighbourhood of the current state.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plume::{concentration, PlumeSource, Receptor, WeatherSample};
use crate::records::{angle_diff, wrap360, SensorStream};
use crate::seeds;

pub const MPH_TO_MS: f64 = 0.44704;
pub const ROSE_DIRECTION_BINS: usize = 36;
pub const ROSE_SPEED_BINS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindModelConfig {
    /// Total span, hours.
    pub span_hours: f64,
    /// Length of one outer period, minutes. The span holds
    /// `60·span_hours/period_minutes` periods.
    pub period_minutes: f64,
    /// Seconds between samples.
    pub sample_interval_s: f64,
    pub dw1: f64,
    pub ds1: f64,
    pub dw2: f64,
    pub ds2: f64,
    pub speed_range: (f64, f64),
    pub start_dir: f64,
    pub start_speed: f64,
    /// Timestamp of the first sample, seconds.
    pub start_t: f64,
    /// Peak of the diurnal solar curve, W/m².
    pub solar_max: f64,
    pub seed: u64,
}

impl Default for WindModelConfig {
    fn default() -> Self {
        Self {
            span_hours: 3.0,
            period_minutes: 10.0,
            sample_interval_s: 60.0,
            dw1: 15.0,
            ds1: 3.0,
            dw2: 45.0,
            ds2: 6.0,
            speed_range: (1.0, 15.0),
            start_dir: 90.0,
            start_speed: 4.0,
            start_t: 9.0 * 3600.0,
            solar_max: 900.0,
            seed: 0,
        }
    }
}

impl WindModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.speed_range;
        if !(self.span_hours > 0.0 && self.period_minutes > 0.0 && self.sample_interval_s > 0.0) {
            return Err(Error::Config("wind span, period and interval must be positive".into()));
        }
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("invalid wind speed range [{lo}, {hi}]")));
        }
        if [self.dw1, self.ds1, self.dw2, self.ds2].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("wind step parameters must be non-negative".into()));
        }
        Ok(())
    }

    pub fn periods(&self) -> usize {
        (60.0 * self.span_hours / self.period_minutes).round().max(1.0) as usize
    }

    pub fn samples_per_period(&self) -> usize {
        (self.period_minutes * 60.0 / self.sample_interval_s).round().max(1.0) as usize
    }
}

/// Time-ordered weather samples plus the outer-walk values that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRealization {
    pub samples: Vec<WeatherSample>,
    /// `(direction, speed)` per period.
    pub periods: Vec<(f64, f64)>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl WindRealization {
    /// Seed key from the sample content, so derived seeds do not depend on
    /// where the realization sits in a list.
    pub fn key(&self) -> u64 {
        self.samples.iter().fold(seeds::mix(self.samples.len() as u64), |acc, w| {
            let k = seeds::derive(w.t.to_bits(), &[w.w_dir.to_bits(), w.w_spd.to_bits(), w.solar.to_bits()]);
            seeds::mix(acc ^ k)
        })
    }
}

/// `±τ·step` with a fair-coin sign and `τ ~ U[0, 1]`.
fn signed_step<R: Rng>(rng: &mut R, step: f64) -> f64 {
    let tau: f64 = rng.random();
    if rng.random::<bool>() {
        tau * step
    } else {
        -tau * step
    }
}

/// Half-sine daylight curve between 06:00 and 18:00 with ±10% noise.
pub fn solar_radiation<R: Rng>(t: f64, max: f64, rng: &mut R) -> f64 {
    let hour = (t / 3600.0).rem_euclid(24.0);
    let base = if (6.0..18.0).contains(&hour) { max * (std::f64::consts::PI * (hour - 6.0) / 12.0).sin() } else { 0.0 };
    let noise = rng.random_range(0.9..=1.1);
    (base * noise).max(0.0)
}

fn generate<R, F>(config: &WindModelConfig, rng: &mut R, mut outer: F) -> Result<WindRealization>
where
    R: Rng,
    F: FnMut(f64, f64, &mut R) -> Result<(f64, f64, Option<String>)>,
{
    config.validate()?;
    let (lo, hi) = config.speed_range;
    let mut dir = wrap360(config.start_dir);
    let mut spd = config.start_speed.clamp(lo, hi);
    let per = config.samples_per_period();
    let mut samples = Vec::with_capacity(config.periods() * per);
    let mut periods = Vec::with_capacity(config.periods());
    let mut diagnostics = Vec::new();
    for j in 0..config.periods() {
        if j > 0 {
            let (d, s, diag) = outer(dir, spd, rng)?;
            dir = wrap360(d);
            spd = s.clamp(lo, hi);
            diagnostics.extend(diag);
        }
        periods.push((dir, spd));
        for k in 0..per {
            let t = config.start_t + ((j * per + k) as f64) * config.sample_interval_s;
            let d = wrap360(dir + signed_step(rng, config.dw1));
            let s = (spd + signed_step(rng, config.ds1)).clamp(lo, hi);
            let solar = solar_radiation(t, config.solar_max, rng);
            samples.push(WeatherSample::new(t, d, s, solar));
        }
    }
    Ok(WindRealization { samples, periods, diagnostics })
}

/// Unconditioned intertwined random walks.
pub fn synthetic_wind(config: &WindModelConfig) -> Result<WindRealization> {
    let mut rng = seeds::rng(seeds::derive(config.seed, &[0x7769]));
    let (dw2, ds2) = (config.dw2, config.ds2);
    generate(config, &mut rng, |d, s, rng| Ok((d + signed_step(rng, dw2), s + signed_step(rng, ds2), None)))
}

/// Empirical direction × speed distribution over 36 × 7 bins.
///
/// Direction bins are math-convention `[lo, lo + width)` with `lo` in
/// `[0, 360)`; speed bins are in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRose {
    /// Normalised mass, `mass[direction][speed]`.
    pub mass: Vec<[f64; ROSE_SPEED_BINS]>,
    pub dir_bins: Vec<[f64; 2]>,
    pub speed_bins: Vec<[f64; 2]>,
    /// Values and edges exactly as read, for re-serialisation.
    pub source: RoseSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoseSource {
    pub direction_label: String,
    pub direction_edges: Vec<f64>,
    pub speed_label: String,
    pub speed_edges: Vec<f64>,
    pub values: Vec<[f64; ROSE_SPEED_BINS]>,
}

fn parse_row(line: &str, lineno: usize) -> Result<(String, Vec<f64>)> {
    let mut cells = line.split(',').map(str::trim);
    let label = cells.next().unwrap_or_default().to_string();
    let vals = cells
        .map(|c| c.parse::<f64>().map_err(|_| Error::WindRose(format!("line {lineno}: cannot parse '{c}'"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((label, vals))
}

impl WindRose {
    /// Builds a rose from raw counts. Direction edges may be compass
    /// (clockwise from north) or math; speed edges mph or m/s.
    pub fn from_source(source: RoseSource) -> Result<Self> {
        let compass = match source.direction_label.as_str() {
            "direction_edges_deg_compass" => true,
            "direction_edges_deg_math" => false,
            other => return Err(Error::WindRose(format!("unknown direction header '{other}'"))),
        };
        let mph = match source.speed_label.as_str() {
            "speed_edges_mph" => true,
            "speed_edges_ms" => false,
            other => return Err(Error::WindRose(format!("unknown speed header '{other}'"))),
        };
        let de = &source.direction_edges;
        if de.len() != ROSE_DIRECTION_BINS + 1 {
            return Err(Error::WindRose(format!(
                "expected {} direction edges, found {}",
                ROSE_DIRECTION_BINS + 1,
                de.len()
            )));
        }
        let se = &source.speed_edges;
        if se.len() != ROSE_SPEED_BINS + 1 {
            return Err(Error::WindRose(format!("expected {} speed edges, found {}", ROSE_SPEED_BINS + 1, se.len())));
        }
        if de.windows(2).any(|w| !(w[1] > w[0])) || se.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::WindRose("bin edges must increase".into()));
        }
        if (de[ROSE_DIRECTION_BINS] - de[0] - 360.0).abs() > 1e-9 {
            return Err(Error::WindRose("direction bins must cover 360 degrees".into()));
        }
        if source.values.len() != ROSE_DIRECTION_BINS {
            return Err(Error::WindRose(format!(
                "expected {ROSE_DIRECTION_BINS} direction rows, found {}",
                source.values.len()
            )));
        }
        if source.values.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::WindRose("negative or non-finite mass".into()));
        }
        let total: f64 = source.values.iter().flatten().sum();
        let mass = source.values.iter().map(|row| row.map(|v| if total > 0.0 { v / total } else { 0.0 })).collect();
        let dir_bins = de
            .windows(2)
            .map(|w| if compass { [wrap360(90.0 - w[1]), w[1] - w[0]] } else { [wrap360(w[0]), w[1] - w[0]] })
            .map(|[lo, width]| [lo, lo + width])
            .collect();
        let factor = if mph { MPH_TO_MS } else { 1.0 };
        let speed_bins = se.windows(2).map(|w| [w[0] * factor, w[1] * factor]).collect();
        Ok(Self { mass, dir_bins, speed_bins, source })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != 2 + ROSE_DIRECTION_BINS {
            return Err(Error::WindRose(format!(
                "expected 2 header lines and {ROSE_DIRECTION_BINS} rows, found {} lines",
                lines.len()
            )));
        }
        let (direction_label, direction_edges) = parse_row(lines[0], 1)?;
        let (speed_label, speed_edges) = parse_row(lines[1], 2)?;
        let mut values = Vec::with_capacity(ROSE_DIRECTION_BINS);
        for (i, line) in lines[2..].iter().enumerate() {
            let vals = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::WindRose(format!("line {}: cannot parse '{c}'", i + 3)))
                })
                .collect::<Result<Vec<_>>>()?;
            let row: [f64; ROSE_SPEED_BINS] = vals.try_into().map_err(|v: Vec<f64>| {
                Error::WindRose(format!("line {}: expected {ROSE_SPEED_BINS} values, found {}", i + 3, v.len()))
            })?;
            values.push(row);
        }
        let rose =
            Self::from_source(RoseSource { direction_label, direction_edges, speed_label, speed_edges, values })?;
        if rose.total_mass() <= 0.0 {
            return Err(Error::WindRose("rose has zero total mass".into()));
        }
        Ok(rose)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flatten().sum()
    }

    /// Writes the rose in the same layout it was read from.
    pub fn to_csv_string(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let s = &self.source;
        let mut out =
            format!("{},{}\n{},{}\n", s.direction_label, join(&s.direction_edges), s.speed_label, join(&s.speed_edges));
        for row in &s.values {
            out.push_str(&join(row));
            out.push('\n');
        }
        out
    }

    /// Index of the direction bin holding `dir`.
    pub fn direction_bin(&self, dir: f64) -> usize {
        let d = wrap360(dir);
        self.dir_bins.iter().position(|[lo, hi]| (d - lo).rem_euclid(360.0) < hi - lo).unwrap_or(0)
    }

    /// Index of the speed bin holding `spd`, clamped to the outer bins.
    pub fn speed_bin(&self, spd: f64) -> usize {
        self.speed_bins.iter().position(|[lo, hi]| spd >= *lo && spd < *hi).unwrap_or(if spd < self.speed_bins[0][0] {
            0
        } else {
            ROSE_SPEED_BINS - 1
        })
    }

    /// Direction bins overlapping `[dir − dw, dir + dw]`, with the overlap
    /// as an offset interval relative to `dir`.
    pub fn direction_window(&self, dir: f64, dw: f64) -> Vec<(usize, f64, f64)> {
        self.dir_bins
            .iter()
            .enumerate()
            .filter_map(|(k, [lo, hi])| {
                let width = hi - lo;
                // bin as offsets from dir, choosing the representation nearest 0
                let start = angle_diff(*lo, dir);
                let candidates = [start, start - 360.0, start + 360.0];
                candidates.iter().find_map(|s| {
                    let a = s.max(-dw);
                    let b = (s + width).min(dw);
                    (b > a || (dw == 0.0 && *s <= 0.0 && s + width > 0.0)).then_some((k, a, b))
                })
            })
            .collect()
    }

    /// Speed bins overlapping `[spd − ds, spd + ds]` and the overlap.
    pub fn speed_window(&self, spd: f64, ds: f64) -> Vec<(usize, f64, f64)> {
        self.speed_bins
            .iter()
            .enumerate()
            .filter_map(|(k, [lo, hi])| {
                let a = lo.max(spd - ds);
                let b = hi.min(spd + ds);
                (b > a).then_some((k, a, b))
            })
            .collect()
    }
}

pub fn parse_wind_rose(path: &Path) -> Result<WindRose> {
    let text = std::fs::read_to_string(path)?;
    WindRose::parse_str(&text)
}

/// Index drawn with probability proportional to `weights`; `None` when all
/// weights are zero.
pub fn roulette<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(k);
        }
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// One inter-period move conditioned on the rose.
///
/// The new direction is drawn from the direction bins within `±dw2`,
/// weighted by the current speed column; the new speed from the speed bins
/// within `±ds2`, weighted by the new direction's row. Values are uniform
/// over the part of the chosen bin inside the window. If every candidate
/// is empty the current value is kept and a diagnostic returned.
pub fn conditioned_step<R: Rng>(
    rose: &WindRose,
    dir: f64,
    spd: f64,
    dw2: f64,
    ds2: f64,
    rng: &mut R,
) -> (f64, f64, Option<String>) {
    let mut diag = None;
    let s_no = rose.speed_bin(spd);
    let dwin = rose.direction_window(dir, dw2);
    let weights: Vec<f64> = dwin.iter().map(|(k, _, _)| rose.mass[*k][s_no]).collect();
    let new_dir = match roulette(&weights, rng) {
        Some(i) => {
            let (_, a, b) = dwin[i];
            wrap360(dir + a + rng.random::<f64>() * (b - a))
        }
        None => {
            diag = Some(format!("no rose mass near direction {dir:.1} at speed bin {s_no}; direction kept"));
            dir
        }
    };
    let w_no = rose.direction_bin(new_dir);
    let swin = rose.speed_window(spd, ds2);
    let weights: Vec<f64> = swin.iter().map(|(k, _, _)| rose.mass[w_no][*k]).collect();
    let new_spd = match roulette(&weights, rng) {
        Some(i) => {
            let (_, a, b) = swin[i];
            a + rng.random::<f64>() * (b - a)
        }
        None => {
            diag.get_or_insert_with(|| format!("no rose mass near speed {spd:.2} in direction bin {w_no}; speed kept"));
            spd
        }
    };
    (new_dir, new_spd, diag)
}

/// Random walks whose outer moves follow the rose.
pub fn conditioned_wind(rose: &WindRose, config: &WindModelConfig) -> Result<WindRealization> {
    let mut rng = seeds::rng(seeds::derive(config.seed, &[0x7772]));
    let (dw2, ds2) = (config.dw2, config.ds2);
    generate(config, &mut rng, |d, s, rng| {
        if !(rose.total_mass() > 0.0) {
            return Err(Error::WindRose("rose has zero total mass".into()));
        }
        Ok(conditioned_step(rose, d, s, dw2, ds2, rng))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// Ambient level added to every reading, ppm.
    pub background: f64,
    /// Gaussian noise σ, ppm.
    pub sigma: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { background: 2.0, sigma: 0.0 }
    }
}

/// Simulated readings at each sensor for one realization and source.
/// Each sensor's noise stream is seeded by `seed` and the sensor position.
pub fn synthesize_sensor_data(
    realization: &WindRealization,
    source: &PlumeSource,
    sensors: &[(String, Receptor)],
    noise: SensorNoise,
    seed: u64,
) -> Result<(Vec<SensorStream>, Vec<WeatherSample>)> {
    if !(noise.sigma >= 0.0) {
        return Err(Error::InvalidInput("noise sigma must be non-negative".into()));
    }
    let dist = Normal::new(0.0, noise.sigma.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let streams = sensors
        .iter()
        .map(|(id, pos)| {
            let mut rng = seeds::rng(seeds::derive(seed, &[seeds::point_key(pos.x, pos.y), pos.z.to_bits()]));
            let samples = realization
                .samples
                .iter()
                .map(|w| {
                    let c = concentration(source, w, pos)?;
                    let e = if noise.sigma > 0.0 { dist.sample(&mut rng) } else { 0.0 };
                    Ok((w.t, (c + noise.background + e).max(0.0)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SensorStream { sensor_id: id.clone(), position: *pos, samples })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((streams, realization.samples.clone()))
}
