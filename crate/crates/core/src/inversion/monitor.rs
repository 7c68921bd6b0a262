//! Moving-window monitoring and leak lifecycle.
//!
//! Each step advances the clock by `step_s`, rebuilds records over the
//! trailing `window_s`, and inverts when enough records exist. A leak moves
//! through `none → suspected → validated → ended`; a suspected leak that
//! produces no records for `end_steps` steps is dismissed back to `none`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{invert, seeded, InversionConfig, InversionProblem, InversionSolution, ProblemClass, SourceCandidate};
use crate::cones::{extract_cones, ConeConfig};
use crate::error::{Error, Result};
use crate::geometry::SiteSpec;
use crate::plume::{Receptor, WeatherSample};
use crate::records::{weighted_records, Record, RecordConfig, RecordSet, SensorStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakStatus {
    None,
    Suspected,
    Validated,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    /// Processing window `T`, seconds.
    pub window_s: f64,
    /// Step `t`, seconds.
    pub step_s: f64,
    pub records: RecordConfig,
    /// Cone cuts are used when set.
    pub cones: Option<ConeConfig>,
    pub inversion: InversionConfig,
    /// Consecutive consistent attributions needed to validate.
    pub validate_steps: usize,
    /// Consecutive empty steps needed to end (or dismiss).
    pub end_steps: usize,
    /// Raw data older than this (plus the window) is discarded.
    pub retention_s: f64,
    pub class: Option<ProblemClass>,
    pub seed: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            window_s: 3600.0,
            step_s: 600.0,
            records: RecordConfig::default(),
            cones: None,
            inversion: InversionConfig::default(),
            validate_steps: 3,
            end_steps: 3,
            retention_s: 86_400.0,
            class: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MonitorEvent {
    Suspected {
        t: f64,
        leak_start: f64,
        records: usize,
    },
    Dismissed {
        t: f64,
        leak_start: f64,
    },
    Validated {
        t: f64,
        leak_start: f64,
        subspace: usize,
        source: Option<SourceCandidate>,
    },
    Ended {
        t: f64,
        leak_start: f64,
        leak_end: f64,
    },
    /// Re-inversion over every record of the ended leak.
    FinalInversion {
        t: f64,
        leak_start: f64,
        leak_end: f64,
        records: RecordSet,
        solution: Box<InversionSolution>,
    },
}

impl MonitorEvent {
    pub fn name(&self) -> &'static str {
        match self {
            MonitorEvent::Suspected { .. } => "suspected",
            MonitorEvent::Dismissed { .. } => "dismissed",
            MonitorEvent::Validated { .. } => "validated",
            MonitorEvent::Ended { .. } => "ended",
            MonitorEvent::FinalInversion { .. } => "final_inversion",
        }
    }
}

/// Persistent monitor state; serialisable for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringState {
    /// Window alignment origin.
    pub origin: f64,
    /// End of the last processed step.
    pub now: f64,
    pub step: u64,
    pub status: LeakStatus,
    pub leak_start: Option<f64>,
    pub leak_end: Option<f64>,
    pub subspace: Option<usize>,
    pub consistent_steps: usize,
    pub empty_steps: usize,
    pub streams: Vec<SensorStream>,
    pub weather: Vec<WeatherSample>,
    pub leak_records: Vec<Record>,
}

/// What one step produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: f64,
    pub status: LeakStatus,
    pub records: usize,
    pub solution: Option<InversionSolution>,
    pub events: Vec<MonitorEvent>,
    pub diagnostics: Vec<String>,
}

impl MonitoringState {
    pub fn new(origin: f64, sensors: &[(String, Receptor)]) -> Self {
        let mut streams: Vec<SensorStream> = sensors
            .iter()
            .map(|(id, pos)| SensorStream { sensor_id: id.clone(), position: *pos, samples: Vec::new() })
            .collect();
        streams.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id));
        Self {
            origin,
            now: origin,
            step: 0,
            status: LeakStatus::None,
            leak_start: None,
            leak_end: None,
            subspace: None,
            consistent_steps: 0,
            empty_steps: 0,
            streams,
            weather: Vec::new(),
            leak_records: Vec::new(),
        }
    }

    /// Appends a batch, rejecting it whole if any timestamp does not advance.
    pub fn ingest(&mut self, sensors: &[SensorStream], weather: &[WeatherSample]) -> Result<()> {
        let last_w = self.weather.last().map(|w| w.t).unwrap_or(f64::NEG_INFINITY);
        let mut prev = last_w;
        for w in weather {
            if !(w.t > prev) {
                return Err(Error::OutOfOrder(format!("weather sample at {} does not follow {prev}", w.t)));
            }
            prev = w.t;
        }
        for s in sensors {
            s.validate()?;
            let last = self
                .streams
                .iter()
                .find(|x| x.sensor_id == s.sensor_id)
                .and_then(|x| x.samples.last())
                .map(|p| p.0)
                .unwrap_or(f64::NEG_INFINITY);
            if let Some(first) = s.samples.first() {
                if !(first.0 > last) {
                    return Err(Error::OutOfOrder(format!(
                        "sensor {}: sample at {} does not follow {last}",
                        s.sensor_id, first.0
                    )));
                }
            }
        }
        self.weather.extend_from_slice(weather);
        for s in sensors {
            match self.streams.iter_mut().find(|x| x.sensor_id == s.sensor_id) {
                Some(x) => x.samples.extend_from_slice(&s.samples),
                None => self.streams.push(s.clone()),
            }
        }
        self.streams.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id));
        Ok(())
    }

    fn prune(&mut self, keep_from: f64) {
        for s in &mut self.streams {
            let k = s.samples.partition_point(|p| p.0 < keep_from);
            s.samples.drain(..k);
        }
        let k = self.weather.partition_point(|w| w.t < keep_from);
        self.weather.drain(..k);
    }

    fn reset_leak(&mut self) {
        self.leak_start = None;
        self.leak_end = None;
        self.subspace = None;
        self.consistent_steps = 0;
        self.empty_steps = 0;
        self.leak_records.clear();
    }
}

fn solve(
    records: &RecordSet,
    site: &SiteSpec,
    streams: &[SensorStream],
    weather: &[WeatherSample],
    config: &MonitorConfig,
    inversion: &InversionConfig,
) -> Result<InversionSolution> {
    let cones = config.cones.as_ref().map(|c| extract_cones(streams, weather, &site.master, c));
    let detected = ProblemClass::detect(site, cones.as_ref());
    let class = match config.class {
        Some(c) if c.uses_cuts() && !detected.uses_cuts() => detected,
        Some(c) if c.uses_subspaces() && site.n_b() < 2 => detected,
        Some(c) => c,
        None => detected,
    };
    let problem = InversionProblem::new(class, records, site, cones.as_ref())?;
    invert(&problem, inversion)
}

/// Processes the data batch and advances the clock by one step.
pub fn monitor_step(
    state: &mut MonitoringState,
    sensors: &[SensorStream],
    weather: &[WeatherSample],
    site: &SiteSpec,
    config: &MonitorConfig,
) -> Result<StepReport> {
    state.ingest(sensors, weather)?;
    let end = state.now + config.step_s;
    let since = end - config.window_s;
    let mut diagnostics = Vec::new();

    let streams: Vec<SensorStream> = state.streams.iter().map(|s| s.slice(f64::NEG_INFINITY, end)).collect();
    let wx: Vec<WeatherSample> = state.weather.iter().filter(|w| w.t < end).copied().collect();
    let rc = RecordConfig { origin: Some(state.origin), since: Some(since), ..config.records.clone() };
    let out = weighted_records(&streams, &wx, &rc)?;
    let records = out.set;
    let n_r = records.len();

    let inv_cfg = seeded(&config.inversion, config.seed, &[state.step]);
    let recent: Vec<SensorStream> = streams.iter().map(|s| s.slice(since, end)).collect();
    let solution = if n_r > 0 {
        let s = solve(&records, site, &recent, &wx, config, &inv_cfg)?;
        Some(s)
    } else {
        None
    };
    let solved_b = solution.as_ref().filter(|s| s.is_solved()).and_then(|s| s.subspace);

    let mut events = Vec::new();
    if n_r > 0 {
        state.empty_steps = 0;
        if matches!(state.status, LeakStatus::None | LeakStatus::Ended) {
            state.reset_leak();
            let start = records.records.iter().map(|r| r.window_start).fold(f64::INFINITY, f64::min);
            state.status = LeakStatus::Suspected;
            state.leak_start = Some(start);
            events.push(MonitorEvent::Suspected { t: end, leak_start: start, records: n_r });
        }
        let seen: BTreeSet<(String, u64)> =
            state.leak_records.iter().map(|r| (r.sensor_id.clone(), r.window_start.to_bits())).collect();
        for r in &records.records {
            if !seen.contains(&(r.sensor_id.clone(), r.window_start.to_bits())) {
                state.leak_records.push(r.clone());
            }
        }
        let last_end =
            records.records.iter().map(|r| r.window_start + config.records.t_w).fold(f64::NEG_INFINITY, f64::max);
        state.leak_end = Some(state.leak_end.map_or(last_end, |e| e.max(last_end)));

        if let Some(b) = solved_b {
            if state.subspace == Some(b) {
                state.consistent_steps += 1;
            } else {
                state.subspace = Some(b);
                state.consistent_steps = 1;
            }
            if state.status == LeakStatus::Suspected && state.consistent_steps >= config.validate_steps {
                state.status = LeakStatus::Validated;
                events.push(MonitorEvent::Validated {
                    t: end,
                    leak_start: state.leak_start.unwrap_or(end),
                    subspace: b,
                    source: solution.as_ref().and_then(|s| s.best),
                });
            }
        }
    } else if matches!(state.status, LeakStatus::Suspected | LeakStatus::Validated) {
        state.empty_steps += 1;
        if state.empty_steps >= config.end_steps {
            let leak_start = state.leak_start.unwrap_or(end);
            if state.status == LeakStatus::Suspected {
                events.push(MonitorEvent::Dismissed { t: end, leak_start });
                state.status = LeakStatus::None;
                state.reset_leak();
            } else {
                let leak_end = state.leak_end.unwrap_or(end);
                state.status = LeakStatus::Ended;
                events.push(MonitorEvent::Ended { t: end, leak_start, leak_end });
                let mut all = std::mem::take(&mut state.leak_records);
                all.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id).then(a.window_start.total_cmp(&b.window_start)));
                let consolidated = RecordSet::uniform(all);
                let cfg = seeded(&config.inversion, config.seed, &[state.step, 0xf1]);
                let solution = solve(&consolidated, site, &[], &[], config, &cfg)?;
                events.push(MonitorEvent::FinalInversion {
                    t: end,
                    leak_start,
                    leak_end,
                    records: consolidated,
                    solution: Box::new(solution),
                });
            }
        }
    }

    diagnostics.extend(out.diagnostics.into_iter().filter(|d| !d.starts_with("no meaningful")));
    state.now = end;
    state.step += 1;
    state.prune(end - config.window_s - config.retention_s);

    Ok(StepReport { t: end, status: state.status, records: n_r, solution, events, diagnostics })
}
