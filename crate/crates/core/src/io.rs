//! CSV and JSON file formats.
//!
//! Sensor CSV: `timestamp_iso8601,sensor_id,ppm`. Weather CSV:
//! `timestamp_iso8601,wind_dir_deg_math,wind_speed_ms,solar_wm2`.
//! Timestamps are RFC 3339; internally they are seconds since the Unix
//! epoch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, SecondsFormat};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::SensorSpec;
use crate::plume::{Receptor, WeatherSample};
use crate::records::SensorStream;

pub const SENSOR_HEADER: &str = "timestamp_iso8601,sensor_id,ppm";
pub const WEATHER_HEADER: &str = "timestamp_iso8601,wind_dir_deg_math,wind_speed_ms,solar_wm2";

/// RFC 3339 or plain seconds.
pub fn parse_timestamp(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let dt = DateTime::parse_from_rfc3339(s).map_err(|e| Error::Parse(format!("bad timestamp '{s}': {e}")))?;
    Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
}

pub fn format_timestamp(t: f64) -> String {
    let secs = t.floor();
    let nanos = ((t - secs) * 1e9).round().min(999_999_999.0) as u32;
    match DateTime::from_timestamp(secs as i64, nanos) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        None => t.to_string(),
    }
}

fn field(rec: &csv::StringRecord, k: usize, line: u64) -> Result<&str> {
    rec.get(k).ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", k + 1)))
}

fn number(s: &str, line: u64) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse '{s}'")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads sensor readings, attaching positions from `sensors`.
pub fn read_sensor_csv(text: &str, sensors: &[SensorSpec]) -> Result<Vec<SensorStream>> {
    let mut by_id: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let t = parse_timestamp(field(&rec, 0, line)?)?;
        let id = field(&rec, 1, line)?.to_string();
        let c = number(field(&rec, 2, line)?, line)?;
        by_id.entry(id).or_default().push((t, c));
    }
    by_id
        .into_iter()
        .map(|(id, mut samples)| {
            let spec = sensors
                .iter()
                .find(|s| s.id == id)
                .ok_or_else(|| Error::InvalidInput(format!("sensor '{id}' is not in the site file")))?;
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            let s = SensorStream { sensor_id: id, position: Receptor { x: spec.x, y: spec.y, z: spec.z }, samples };
            s.validate()?;
            Ok(s)
        })
        .collect()
}

/// Rows in time order, ties by sensor id.
pub fn write_sensor_csv(streams: &[SensorStream]) -> String {
    let mut rows: Vec<(f64, &str, f64)> =
        streams.iter().flat_map(|s| s.samples.iter().map(move |(t, c)| (*t, s.sensor_id.as_str(), *c))).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let mut out = format!("{SENSOR_HEADER}\n");
    for (t, id, c) in rows {
        let _ = writeln!(out, "{},{id},{c}", format_timestamp(t));
    }
    out
}

pub fn read_weather_csv(text: &str) -> Result<Vec<WeatherSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let t = parse_timestamp(field(&rec, 0, line)?)?;
        let dir = number(field(&rec, 1, line)?, line)?;
        let spd = number(field(&rec, 2, line)?, line)?;
        let solar = number(field(&rec, 3, line)?, line)?;
        out.push(WeatherSample::new(t, dir, spd, solar));
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    if out.windows(2).any(|w| w[0].t == w[1].t) {
        return Err(Error::InvalidInput("duplicate weather timestamps".into()));
    }
    Ok(out)
}

pub fn write_weather_csv(samples: &[WeatherSample]) -> String {
    let mut out = format!("{WEATHER_HEADER}\n");
    for w in samples {
        let _ = writeln!(out, "{},{},{},{}", format_timestamp(w.t), w.w_dir, w.w_spd, w.solar);
    }
    out
}

/// `record,observed,predicted` rows.
pub fn write_residuals_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut out = String::from("record,observed,predicted\n");
    for (i, o, p) in rows {
        let _ = writeln!(out, "{i},{o},{p}");
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensors() -> Vec<SensorSpec> {
        vec![
            SensorSpec { id: "a".into(), x: 1.0, y: 2.0, z: 1.8 },
            SensorSpec { id: "b".into(), x: 5.0, y: 6.0, z: 1.8 },
        ]
    }

    #[test]
    fn timestamps_round_trip() {
        for t in [0.0, 32_400.0, 1_700_000_000.0, 1_700_000_000.5] {
            assert_eq!(parse_timestamp(&format_timestamp(t)).unwrap(), t);
        }
        assert_eq!(format_timestamp(32_400.0), "1970-01-01T09:00:00Z");
        assert_eq!(parse_timestamp("2024-03-01T10:00:00+01:00").unwrap(), 1_709_283_600.0);
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn sensor_csv_round_trip() {
        let text = "timestamp_iso8601,sensor_id,ppm\n\
                    1970-01-01T00:01:00Z,b,2.5\n\
                    1970-01-01T00:00:00Z,a,2.1\n\
                    1970-01-01T00:01:00Z,a,7.25\n\
                    1970-01-01T00:00:00Z,b,2\n";
        let s = read_sensor_csv(text, &sensors()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].samples, vec![(0.0, 2.1), (60.0, 7.25)]);
        assert_eq!(s[1].position.x, 5.0);
        let again = read_sensor_csv(&write_sensor_csv(&s), &sensors()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn unknown_sensor_rejected() {
        let text = "timestamp_iso8601,sensor_id,ppm\n1970-01-01T00:00:00Z,zz,1\n";
        assert!(read_sensor_csv(text, &sensors()).is_err());
    }

    #[test]
    fn weather_csv_round_trip() {
        let w = vec![WeatherSample::new(0.0, 12.5, 3.25, 400.0), WeatherSample::new(60.0, 359.9, 1.0, 0.0)];
        let back = read_weather_csv(&write_weather_csv(&w)).unwrap();
        assert_eq!(back, w);
        let bad = "h,h,h,h\n0,1,x,3\n";
        assert!(matches!(read_weather_csv(bad), Err(Error::Parse(_))));
    }

    #[test]
    fn digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
