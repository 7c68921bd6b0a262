//! Site specification: master box, subspaces, restricted zones and sensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoxRegion, FeasibleSide, Point2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub lb: [f64; 5],
    pub ub: [f64; 5],
}

/// A region as written in a site file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub polygon: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epts: Option<Vec<[f64; 2]>>,
    /// Defaults to interior for the master and subspaces, exterior for zones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<FeasibleSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// The JSON site document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteFile {
    pub master: RegionSpec,
    #[serde(default)]
    pub subspaces: Vec<RegionSpec>,
    #[serde(default)]
    pub zones: Vec<RegionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine_to_gps: Option<[[f64; 3]; 2]>,
    #[serde(default)]
    pub sensors: Vec<SensorSpec>,
}

/// A validated site. Region index 1 is the master box; indices
/// `2..=n_b` are the subspaces in file order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteSpec {
    pub master: BoxRegion,
    pub subspaces: Vec<BoxRegion>,
    pub zones: Vec<BoxRegion>,
    pub affine_to_gps: Option<[[f64; 3]; 2]>,
    pub sensors: Vec<SensorSpec>,
    /// Validation notes, e.g. evaluation points that fall inside zones.
    pub notes: Vec<String>,
}

fn region_from_spec(spec: &RegionSpec, default_side: FeasibleSide) -> Result<BoxRegion> {
    let poly: Vec<Point2> = spec.polygon.iter().copied().map(Point2::from).collect();
    let side = spec.feasible.unwrap_or(default_side);
    BoxRegion::new(
        &poly,
        side,
        spec.bounds.as_ref().map(|b| (b.lb, b.ub)),
        spec.epts.as_ref().map(|e| e.iter().copied().map(Point2::from).collect()),
    )
}

impl SiteSpec {
    /// Assembles a site from already-built regions and validates it.
    pub fn new(mut master: BoxRegion, mut subspaces: Vec<BoxRegion>, zones: Vec<BoxRegion>) -> Result<Self> {
        let n_b = 1 + subspaces.len();
        master.lb[4] = 1.0;
        master.ub[4] = n_b as f64;
        for (k, s) in subspaces.iter_mut().enumerate() {
            let idx = (k + 2) as f64;
            s.lb[4] = idx;
            s.ub[4] = idx;
        }
        let mut site = Self { master, subspaces, zones, affine_to_gps: None, sensors: Vec::new(), notes: Vec::new() };
        site.validate()?;
        Ok(site)
    }

    pub fn from_file_spec(file: &SiteFile) -> Result<Self> {
        let master = region_from_spec(&file.master, FeasibleSide::Interior)?;
        let subspaces =
            file.subspaces.iter().map(|s| region_from_spec(s, FeasibleSide::Interior)).collect::<Result<Vec<_>>>()?;
        let zones =
            file.zones.iter().map(|s| region_from_spec(s, FeasibleSide::Exterior)).collect::<Result<Vec<_>>>()?;
        let mut site = Self::new(master, subspaces, zones)?;
        site.affine_to_gps = file.affine_to_gps;
        site.sensors = file.sensors.clone();
        Ok(site)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: SiteFile = serde_json::from_str(s)?;
        Self::from_file_spec(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn validate(&mut self) -> Result<()> {
        let (lb, ub) = (self.master.lb, self.master.ub);
        let inside = |p: &Point2| p.x >= lb[0] && p.x <= ub[0] && p.y >= lb[1] && p.y <= ub[1];
        for (k, s) in self.subspaces.iter().enumerate() {
            if let Some(p) = s.polygon.iter().find(|p| !inside(p)) {
                return Err(Error::InvalidInput(format!(
                    "subspace {} vertex ({}, {}) lies outside the master bounds",
                    k + 2,
                    p.x,
                    p.y
                )));
            }
        }
        let mut notes = Vec::new();
        for (k, s) in self.subspaces.iter().enumerate() {
            for e in &s.epts {
                for (z, zone) in self.zones.iter().enumerate() {
                    if zone.polygon_contains(*e) {
                        notes.push(format!(
                            "evaluation point ({}, {}) of subspace {} lies inside zone {}",
                            e.x,
                            e.y,
                            k + 2,
                            z + 1
                        ));
                    }
                }
            }
        }
        self.notes = notes;
        Ok(())
    }

    /// Number of boxes including the master.
    pub fn n_b(&self) -> usize {
        1 + self.subspaces.len()
    }

    /// Region by 1-based index (1 = master).
    pub fn region(&self, b: usize) -> Option<&BoxRegion> {
        match b {
            1 => Some(&self.master),
            k if k >= 2 => self.subspaces.get(k - 2),
            _ => None,
        }
    }

    /// Index of the first subspace whose polygon contains `p`, or 1.
    pub fn locate(&self, p: Point2) -> usize {
        self.subspaces.iter().position(|s| s.polygon_contains(p)).map(|k| k + 2).unwrap_or(1)
    }

    /// Collective evaluation set: subspace points when subspaces exist,
    /// otherwise the master's points.
    pub fn evaluation_points(&self) -> Vec<Point2> {
        if self.subspaces.is_empty() {
            self.master.epts.clone()
        } else {
            self.subspaces.iter().flat_map(|s| s.epts.clone()).collect()
        }
    }

    /// Applies the optional affine transform, returning `(lat, lon)`.
    pub fn to_gps(&self, p: Point2) -> Option<(f64, f64)> {
        self.affine_to_gps.map(|a| (a[0][0] * p.x + a[0][1] * p.y + a[0][2], a[1][0] * p.x + a[1][1] * p.y + a[1][2]))
    }

    pub fn master_contains(&self, p: Point2) -> bool {
        let (lb, ub) = (self.master.lb, self.master.ub);
        p.x >= lb[0] && p.x <= ub[0] && p.y >= lb[1] && p.y <= ub[1] && self.master.contains(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SITE: &str = r#"{
        "master": {"polygon": [[0,0],[120,0],[120,90],[0,90]], "feasible": "interior",
                   "epts": [[60,45]]},
        "subspaces": [
            {"polygon": [[10,10],[30,10],[30,25],[10,25]], "epts": [[15,15],[25,20]]},
            {"polygon": [[70,50],[90,48],[95,70],[75,72]], "bounds": {"lb":[70,48,0,0.5,0],"ub":[95,72,3,20,0]}}
        ],
        "zones": [
            {"polygon": [[20,12],[40,12],[40,30],[20,30]], "feasible": "exterior"}
        ],
        "affine_to_gps": [[1e-5, 0, 33.5], [0, 1e-5, -101.9]],
        "sensors": [{"id": "s1", "x": 5, "y": 5, "z": 1.83}]
    }"#;

    #[test]
    fn parses_site_file() {
        let site = SiteSpec::from_json_str(SITE).unwrap();
        assert_eq!(site.n_b(), 3);
        assert_eq!(site.master.lb[4], 1.0);
        assert_eq!(site.master.ub[4], 3.0);
        assert_eq!(site.subspaces[1].lb[4], 3.0);
        assert_eq!(site.subspaces[1].lb[3], 0.5);
        assert_eq!(site.subspaces[0].lb[2], 0.0);
        assert_eq!(site.subspaces[0].ub[2], 6.0);
        assert_eq!(site.subspaces[0].ub[3], 100.0);
        assert_eq!(site.zones[0].feasible_side, FeasibleSide::Exterior);
        assert_eq!(site.sensors.len(), 1);
        assert_eq!(site.evaluation_points().len(), 3);
        let (lat, lon) = site.to_gps(Point2::new(100.0, 200.0)).unwrap();
        assert!((lat - 33.501).abs() < 1e-12 && (lon + 101.898).abs() < 1e-12);
        // (25, 20) lies inside the zone and is kept with a note.
        assert_eq!(site.notes.len(), 1);
    }

    #[test]
    fn epts_of_each_subspace_are_inside() {
        let site = SiteSpec::from_json_str(SITE).unwrap();
        for s in &site.subspaces {
            for e in &s.epts {
                assert!(s.contains(*e));
                // independent containment: winding sign over the hull
                let h = &s.polygon;
                let inside = (0..h.len()).all(|k| {
                    let (a, b) = (h[k], h[(k + 1) % h.len()]);
                    (b.x - a.x) * (e.y - a.y) - (b.y - a.y) * (e.x - a.x) >= 0.0
                });
                assert!(inside);
            }
        }
    }

    #[test]
    fn subspace_outside_master_rejected() {
        let bad = r#"{"master": {"polygon": [[0,0],[10,0],[10,10],[0,10]]},
                      "subspaces": [{"polygon": [[5,5],[15,5],[15,8]]}]}"#;
        assert!(matches!(SiteSpec::from_json_str(bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn locate_finds_subspace() {
        let site = SiteSpec::from_json_str(SITE).unwrap();
        assert_eq!(site.locate(Point2::new(20.0, 20.0)), 2);
        assert_eq!(site.locate(Point2::new(80.0, 60.0)), 3);
        assert_eq!(site.locate(Point2::new(60.0, 5.0)), 1);
        assert!(site.region(0).is_none());
        assert!(site.region(4).is_none());
    }
}
