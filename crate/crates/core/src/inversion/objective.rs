//! Weighted misfit, the subspace variable transform and the penalised objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConstraintSet, SiteSpec};
use crate::plume::{concentration_in_frame, PlumeSource, Receptor, StabilityClass};
use crate::records::RecordSet;

/// Source location and rate `[x y z r]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceCandidate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// kg/h
    pub r: f64,
}

impl SourceCandidate {
    pub fn new(x: f64, y: f64, z: f64, r: f64) -> Self {
        Self { x, y, z, r }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.r]
    }

    /// `[x y z r b]` for constraint evaluation.
    pub fn augmented(&self, b: f64) -> [f64; 5] {
        [self.x, self.y, self.z, self.r, b]
    }

    pub fn source(&self) -> PlumeSource {
        PlumeSource { x: self.x, y: self.y, z: self.z, rate: self.r }
    }

    pub fn distance_2d(&self, other: &SourceCandidate) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy)]
struct Prepared {
    cos: f64,
    sin: f64,
    speed: f64,
    stab: StabilityClass,
    receptor: Receptor,
    obs: f64,
    weight: f64,
}

/// Records with wind unit vectors precomputed, for repeated misfit
/// evaluation.
#[derive(Debug, Clone)]
pub struct PreparedRecords {
    rows: Vec<Prepared>,
}

impl PreparedRecords {
    pub fn new(records: &RecordSet) -> Result<Self> {
        if records.records.len() != records.weights.len() {
            return Err(Error::InvalidInput("record and weight counts differ".into()));
        }
        let rows = records
            .records
            .iter()
            .zip(&records.weights)
            .map(|(r, w)| {
                if !(r.w_spd > 0.0) {
                    return Err(Error::CalmWind(r.w_spd));
                }
                let (sin, cos) = r.w_dir.to_radians().sin_cos();
                Ok(Prepared { cos, sin, speed: r.w_spd, stab: r.w_stab, receptor: r.receptor(), obs: r.c, weight: *w })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn predictions(&self, x: &SourceCandidate) -> Vec<f64> {
        let src = x.source();
        self.rows.iter().map(|p| concentration_in_frame(&src, p.stab, p.speed, p.cos, p.sin, &p.receptor)).collect()
    }

    /// Rate in `[lo, hi]` minimising the misfit at `x`'s location.
    /// Predictions are linear in the rate, so this is a weighted
    /// least-squares ratio.
    pub fn best_rate(&self, x: &SourceCandidate, lo: f64, hi: f64) -> f64 {
        let unit = SourceCandidate { r: 1.0, ..*x }.source();
        let (mut num, mut den) = (0.0, 0.0);
        for p in &self.rows {
            let q = concentration_in_frame(&unit, p.stab, p.speed, p.cos, p.sin, &p.receptor);
            num += p.weight * p.obs * q;
            den += p.weight * q * q;
        }
        if den > 0.0 {
            (num / den).clamp(lo, hi)
        } else {
            x.r.clamp(lo, hi)
        }
    }

    /// `sqrt(Σ w_i (obs_i − pred_i)²)`.
    pub fn wmse(&self, x: &SourceCandidate) -> f64 {
        let src = x.source();
        self.rows
            .iter()
            .map(|p| {
                let pred = concentration_in_frame(&src, p.stab, p.speed, p.cos, p.sin, &p.receptor);
                p.weight * (p.obs - pred).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Weighted root-mean-square misfit of `x` against `records`.
pub fn objective_wmse(x: &SourceCandidate, records: &RecordSet) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("objective needs at least one record".into()));
    }
    Ok(PreparedRecords::new(records)?.wmse(x))
}

/// `(index, observed, predicted)` per record.
pub fn residuals(x: &SourceCandidate, records: &RecordSet) -> Result<Vec<(usize, f64, f64)>> {
    let prepared = PreparedRecords::new(records)?;
    Ok(prepared.predictions(x).into_iter().zip(&records.records).enumerate().map(|(i, (p, r))| (i, r.c, p)).collect())
}

/// `round(v)` with ties away from zero, clamped to `[lo, hi]`.
pub fn round_index(v: f64, lo: usize, hi: usize) -> usize {
    let r = v.round();
    if r.is_nan() || r < lo as f64 {
        lo
    } else if r > hi as f64 {
        hi
    } else {
        r as usize
    }
}

/// Maps `V = [v_x v_y v_z v_r b]`, expressed in the global bounds
/// `[glb, gub]`, into the bounds of subspace `round(b)`.
///
/// Returns the source, the 1-based region index and that region's
/// constraint rows. A degenerate global axis maps to the region's lower
/// bound.
pub fn transform_variables<'a>(
    v: &[f64],
    glb: &[f64; 5],
    gub: &[f64; 5],
    site: &'a SiteSpec,
) -> Result<(SourceCandidate, usize, &'a ConstraintSet)> {
    if v.len() != 5 {
        return Err(Error::InvalidInput(format!("expected 5 variables, got {}", v.len())));
    }
    let b = round_index(v[4], 1, site.n_b());
    let region = site.region(b).ok_or_else(|| Error::InvalidInput(format!("no region with index {b}")))?;
    let mut x = [0.0; 4];
    for k in 0..4 {
        let span = gub[k] - glb[k];
        x[k] = if span > 0.0 {
            (v[k] - glb[k]) / span * (region.ub[k] - region.lb[k]) + region.lb[k]
        } else {
            region.lb[k]
        };
    }
    Ok((SourceCandidate::from_slice(&x), b, &region.g5))
}

/// Inverse of [`transform_variables`] for a fixed region.
pub fn untransform(x: &SourceCandidate, b: usize, glb: &[f64; 5], gub: &[f64; 5], site: &SiteSpec) -> Option<[f64; 5]> {
    let region = site.region(b)?;
    let xs = x.as_array();
    let mut v = [0.0, 0.0, 0.0, 0.0, b as f64];
    for k in 0..4 {
        let span = region.ub[k] - region.lb[k];
        v[k] = if span > 0.0 { (xs[k] - region.lb[k]) / span * (gub[k] - glb[k]) + glb[k] } else { glb[k] };
    }
    Some(v)
}
