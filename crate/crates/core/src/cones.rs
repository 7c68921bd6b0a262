//! Angular receptivity cones.
//!
//! Each sensor's active samples are binned by the bearing the gas came from.
//! The dominant cluster of bearings becomes a cone, and each cone yields two
//! half-plane cuts anchored at the sensor. The cuts shrink the search box to
//! the bounding box of the wedge intersection.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoxRegion, ConstraintSet, LinearConstraint, Point2};
use crate::plume::WeatherSample;
use crate::records::{angle_diff, background_level, wrap360, Background, SensorStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeConfig {
    /// A sample is active when it exceeds background by this much, ppm.
    pub active_threshold: f64,
    /// Narrower cones are widened symmetrically to this span, degrees.
    pub min_span: f64,
    pub bin_width: f64,
    /// Fraction of a cluster's active mass the cone must hold.
    pub mass_fraction: f64,
    pub min_count: usize,
    pub min_ratio: f64,
    pub background: Background,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            active_threshold: 5.0,
            min_span: 10.0,
            bin_width: 5.0,
            mass_fraction: 0.95,
            min_count: 5,
            min_ratio: 0.02,
            background: Background::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeStats {
    pub active_count: usize,
    pub active_ratio: f64,
    pub mean_c: f64,
    pub max_c: f64,
}

/// Upwind wedge seen from one sensor. Angles are math-convention bearings
/// from the sensor towards the likely source; the wedge runs
/// counter-clockwise from `d_min` to `d_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub sensor_id: String,
    pub sensor: Point2,
    pub d_min: f64,
    pub d_mid: f64,
    pub d_max: f64,
    pub width: f64,
    pub stats: ConeStats,
}

impl Cone {
    /// The two half-plane rows bounding the wedge.
    pub fn constraints(&self) -> [LinearConstraint; 2] {
        let (s0, c0) = self.d_min.to_radians().sin_cos();
        let (s1, c1) = self.d_max.to_radians().sin_cos();
        let p = self.sensor;
        // left of the d_min ray, right of the d_max ray
        let lower = LinearConstraint::planar(s0, -c0, -(s0 * p.x - c0 * p.y));
        let upper = LinearConstraint::planar(-s1, c1, -(-s1 * p.x + c1 * p.y));
        [lower, upper]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSet {
    pub cones: Vec<Cone>,
    pub g_cuts: ConstraintSet,
    pub clb: [f64; 5],
    pub cub: [f64; 5],
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl ConeSet {
    pub fn empty(master: &BoxRegion) -> Self {
        Self {
            cones: Vec::new(),
            g_cuts: ConstraintSet::default(),
            clb: master.lb,
            cub: master.ub,
            diagnostics: Vec::new(),
        }
    }

    /// Builds the cut set and reduced bounds from a list of cones.
    pub fn from_cones(cones: Vec<Cone>, master: &BoxRegion) -> Self {
        let rows = cones.iter().flat_map(|c| c.constraints()).collect();
        let mut set =
            Self { cones, g_cuts: ConstraintSet::new(rows), clb: master.lb, cub: master.ub, diagnostics: Vec::new() };
        let (clb, cub, warning) = reduced_bounds(&set, master);
        set.clb = clb;
        set.cub = cub;
        set.diagnostics.extend(warning);
        set
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }
}

struct Cluster {
    lo_bin: usize,
    n_bins: usize,
    count: usize,
    sum_c: f64,
    max_c: f64,
}

/// Contiguous runs of occupied bins on the circle.
fn clusters(counts: &[usize]) -> Vec<(usize, usize)> {
    let n = counts.len();
    let Some(empty) = counts.iter().position(|c| *c == 0) else {
        return vec![(0, n)];
    };
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        let i = (empty + 1 + k) % n;
        if counts[i] == 0 {
            k += 1;
            continue;
        }
        let mut len = 0;
        while k + len < n && counts[(empty + 1 + k + len) % n] > 0 {
            len += 1;
        }
        out.push((i, len));
        k += len;
    }
    out
}

/// Shortest run of bins inside `[lo, lo+len)` holding `fraction` of its mass.
fn trim(counts: &[usize], lo: usize, len: usize, fraction: f64) -> (usize, usize) {
    let n = counts.len();
    let at = |k: usize| counts[(lo + k) % n];
    let total: usize = (0..len).map(at).sum();
    let need = fraction * total as f64;
    let mut best = (0, len);
    for start in 0..len {
        let mut acc = 0usize;
        for width in 1..=(len - start) {
            acc += at(start + width - 1);
            if acc as f64 >= need - 1e-9 {
                if width < best.1 {
                    best = (start, width);
                }
                break;
            }
        }
    }
    ((lo + best.0) % n, best.1)
}

fn weather_at(weather: &[WeatherSample], t: f64) -> Option<&WeatherSample> {
    let k = weather.partition_point(|w| w.t <= t);
    if k > 0 {
        Some(&weather[k - 1])
    } else {
        weather.first()
    }
}

/// Primary cone of one sensor, or a diagnostic explaining why none exists.
pub fn sensor_cone(
    stream: &SensorStream,
    weather: &[WeatherSample],
    config: &ConeConfig,
) -> std::result::Result<Cone, String> {
    let n_bins = (360.0 / config.bin_width).round() as usize;
    let bin_width = 360.0 / n_bins as f64;
    let Some(last) = stream.samples.last() else {
        return Err(format!("sensor {}: no samples", stream.sensor_id));
    };
    let background = background_level(stream, last.0 + 1e-9, config.background);

    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0f64; n_bins];
    let mut maxes = vec![0.0f64; n_bins];
    for &(t, c) in &stream.samples {
        if !(c - background > config.active_threshold) {
            continue;
        }
        let Some(w) = weather_at(weather, t) else {
            continue;
        };
        let bearing = wrap360(w.w_dir + 180.0);
        let k = ((bearing / bin_width).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
        sums[k] += c;
        maxes[k] = maxes[k].max(c);
    }
    if counts.iter().all(|c| *c == 0) {
        return Err(format!("sensor {}: no active samples", stream.sensor_id));
    }

    let mut found: Vec<Cluster> = clusters(&counts)
        .into_iter()
        .map(|(lo, len)| {
            let (lo, len) = trim(&counts, lo, len, config.mass_fraction);
            let bins = (0..len).map(|k| (lo + k) % n_bins);
            Cluster {
                lo_bin: lo,
                n_bins: len,
                count: bins.clone().map(|b| counts[b]).sum(),
                sum_c: bins.clone().map(|b| sums[b]).sum(),
                max_c: bins.map(|b| maxes[b]).fold(0.0, f64::max),
            }
        })
        .collect();

    let total = stream.samples.len() as f64;
    found.retain(|c| {
        let mean = c.sum_c / c.count as f64;
        c.count >= config.min_count
            && c.count as f64 / total >= config.min_ratio
            && mean >= config.active_threshold
            && (c.n_bins as f64) * bin_width < 180.0
    });
    found.sort_by(|a, b| b.count.cmp(&a.count).then((b.sum_c / b.count as f64).total_cmp(&(a.sum_c / a.count as f64))));
    let Some(best) = found.first() else {
        return Err(format!("sensor {}: no valid cone", stream.sensor_id));
    };

    let mut d_min = best.lo_bin as f64 * bin_width;
    let mut width = best.n_bins as f64 * bin_width;
    if width < config.min_span {
        d_min -= (config.min_span - width) / 2.0;
        width = config.min_span;
    }
    let d_min = wrap360(d_min);
    Ok(Cone {
        sensor_id: stream.sensor_id.clone(),
        sensor: Point2::new(stream.position.x, stream.position.y),
        d_min,
        d_mid: wrap360(d_min + width / 2.0),
        d_max: wrap360(d_min + width),
        width,
        stats: ConeStats {
            active_count: best.count,
            active_ratio: best.count as f64 / total,
            mean_c: best.sum_c / best.count as f64,
            max_c: best.max_c,
        },
    })
}

/// One primary cone per sensor with valid activity, plus cuts and reduced
/// bounds. Output order follows sensor id.
pub fn extract_cones(
    streams: &[SensorStream],
    weather: &[WeatherSample],
    master: &BoxRegion,
    config: &ConeConfig,
) -> ConeSet {
    let mut order: Vec<&SensorStream> = streams.iter().collect();
    order.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id));
    let mut cones = Vec::new();
    let mut diagnostics = Vec::new();
    for s in order {
        match sensor_cone(s, weather, config) {
            Ok(c) => cones.push(c),
            Err(d) => diagnostics.push(d),
        }
    }
    let mut set = ConeSet::from_cones(cones, master);
    diagnostics.append(&mut set.diagnostics);
    set.diagnostics = diagnostics;
    set
}

fn clip(poly: &[Point2], row: &LinearConstraint) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (gp, gq) = (row.eval_xy(p), row.eval_xy(q));
        if gp <= 0.0 {
            out.push(p);
        }
        if (gp < 0.0 && gq > 0.0) || (gp > 0.0 && gq < 0.0) {
            let t = gp / (gp - gq);
            out.push(Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
        }
    }
    out
}

/// Bounding box of the master box clipped by every cut. z, r and b bounds
/// are the master's. An empty intersection falls back to the master bounds
/// with a warning.
pub fn reduced_bounds(cones: &ConeSet, master: &BoxRegion) -> ([f64; 5], [f64; 5], Option<String>) {
    let (lb, ub) = (master.lb, master.ub);
    if cones.g_cuts.is_empty() {
        return (lb, ub, None);
    }
    let mut poly = vec![
        Point2::new(lb[0], lb[1]),
        Point2::new(ub[0], lb[1]),
        Point2::new(ub[0], ub[1]),
        Point2::new(lb[0], ub[1]),
    ];
    for row in &cones.g_cuts.rows {
        poly = clip(&poly, row);
        if poly.is_empty() {
            return (lb, ub, Some("cone wedges do not intersect inside the master box; using master bounds".into()));
        }
    }
    let (mut clb, mut cub) = (lb, ub);
    clb[0] = poly.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).max(lb[0]);
    clb[1] = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).max(lb[1]);
    cub[0] = poly.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).min(ub[0]);
    cub[1] = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).min(ub[1]);
    (clb, cub, None)
}

/// Whether bearing `d` lies inside the wedge of `cone`.
pub fn cone_contains_bearing(cone: &Cone, d: f64) -> bool {
    let off = angle_diff(d, cone.d_min).rem_euclid(360.0);
    off <= cone.width + 1e-9
}
