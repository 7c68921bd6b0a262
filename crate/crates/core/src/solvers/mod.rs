//! Derivative-free solvers over mixed continuous/integer boxes.

mod ga;
mod mcmc;

pub use ga::{miga_minimize, GAConfig, GAResult, GenerationStats};
pub use mcmc::{mcmc_sample, MCMCConfig, MCMCResult, Marginal};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub kind: VariableKind,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn continuous(lower: f64, upper: f64) -> Self {
        Self { kind: VariableKind::Continuous, lower, upper }
    }

    pub fn integer(lower: i64, upper: i64) -> Self {
        Self { kind: VariableKind::Integer, lower: lower as f64, upper: upper as f64 }
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    /// Clamps into bounds, rounding integer variables.
    pub fn project(&self, v: f64) -> f64 {
        let v = if v.is_finite() { v } else { self.lower };
        let v = v.clamp(self.lower, self.upper);
        match self.kind {
            VariableKind::Continuous => v,
            VariableKind::Integer => v.round().clamp(self.lower, self.upper),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            VariableKind::Continuous if self.upper > self.lower => rng.random_range(self.lower..=self.upper),
            VariableKind::Integer if self.upper > self.lower => {
                rng.random_range(self.lower as i64..=self.upper as i64) as f64
            }
            _ => self.lower,
        }
    }
}

/// Box over a mixed vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub vars: Vec<Variable>,
}

impl VariableSpec {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidInput("no decision variables".into()));
        }
        for (k, v) in vars.iter().enumerate() {
            if !(v.lower <= v.upper) || !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "variable {k}: bounds [{}, {}] are not ordered",
                    v.lower, v.upper
                )));
            }
            if v.kind == VariableKind::Integer && (v.lower.fract() != 0.0 || v.upper.fract() != 0.0) {
                return Err(Error::InvalidInput(format!("variable {k}: integer bounds must be integral")));
            }
        }
        Ok(Self { vars })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, xi) in self.vars.iter().zip(x.iter_mut()) {
            *xi = v.project(*xi);
        }
    }

    /// Inside bounds with integral integer entries.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.vars.len()
            && self.vars.iter().zip(x).all(|(v, xi)| {
                *xi >= v.lower && *xi <= v.upper && (v.kind == VariableKind::Continuous || xi.fract() == 0.0)
            })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.vars.iter().map(|v| v.sample(rng)).collect()
    }
}

/// Non-finite objective values rank as `+∞`.
#[inline]
pub(crate) fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}
