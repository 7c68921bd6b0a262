//! Random-walk Metropolis sampling of `exp(−F/T)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sanitize, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MCMCConfig {
    pub chains: usize,
    pub steps: usize,
    /// Fraction of each chain discarded (and used for adaptation).
    pub burn_in: f64,
    /// Initial proposal σ per variable; defaults to 5% of each range.
    pub proposal_scale: Option<Vec<f64>>,
    /// Defaults to `max(F(start)/10, min_temperature)`.
    pub temperature: Option<f64>,
    pub min_temperature: f64,
    pub seed: u64,
    pub thin: usize,
    pub bins: usize,
    pub adapt: bool,
}

impl Default for MCMCConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            steps: 4000,
            burn_in: 0.25,
            proposal_scale: None,
            temperature: None,
            min_temperature: 1e-3,
            seed: 0,
            thin: 1,
            bins: 20,
            adapt: true,
        }
    }
}

impl MCMCConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::InvalidInput("MCMC needs at least 2 chains".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidInput("MCMC burn-in must lie in [0, 1)".into()));
        }
        if let Some(p) = &self.proposal_scale {
            if p.len() != n {
                return Err(Error::InvalidInput(format!("{} proposal scales for {n} variables", p.len())));
            }
        }
        if self.steps == 0 || self.bins == 0 || self.thin == 0 {
            return Err(Error::InvalidInput("MCMC steps, bins and thin must be positive".into()));
        }
        Ok(())
    }
}

/// Histogram plus summary statistics of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub std: f64,
    pub q025: f64,
    pub q975: f64,
}

impl Marginal {
    pub fn from_values(values: &[f64], lower: f64, upper: f64, bins: usize, integer: bool) -> Self {
        let edges: Vec<f64> = if integer {
            (0..=((upper - lower) as usize + 1)).map(|k| lower - 0.5 + k as f64).collect()
        } else if upper > lower {
            (0..=bins).map(|k| lower + (upper - lower) * k as f64 / bins as f64).collect()
        } else {
            vec![lower, upper]
        };
        let nb = edges.len() - 1;
        let mut counts = vec![0u64; nb];
        for v in values {
            let k = edges.partition_point(|e| e <= v).saturating_sub(1).min(nb - 1);
            counts[k] += 1;
        }
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if sorted.is_empty() {
                f64::NAN
            } else {
                sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)]
            }
        };
        Self { edges, counts, mean, std, q025: q(0.025), q975: q(0.975) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCMCResult {
    pub marginals: Vec<Marginal>,
    /// Post-burn-in acceptance rate pooled over chains.
    pub acceptance_rate: f64,
    pub burn_in_acceptance: f64,
    pub temperature: f64,
    /// Pooled post-burn-in samples, chain by chain.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

struct Chain {
    samples: Vec<Vec<f64>>,
    accepted: usize,
    proposed: usize,
    burn_accepted: usize,
    burn_proposed: usize,
}

fn run_chain<F>(
    objective: &F,
    start: &[f64],
    f_start: f64,
    spec: &VariableSpec,
    config: &MCMCConfig,
    temperature: f64,
    chain: usize,
) -> Chain
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let mut rng = seeds::rng(seeds::derive(config.seed, &[0x6d63, chain as u64]));
    let mut scale: Vec<f64> =
        config.proposal_scale.clone().unwrap_or_else(|| spec.vars.iter().map(|v| 0.05 * v.range()).collect());
    let burn = (config.burn_in * config.steps as f64).floor() as usize;
    let mut x = start.to_vec();
    let mut fx = f_start;
    let mut out = Chain { samples: Vec::new(), accepted: 0, proposed: 0, burn_accepted: 0, burn_proposed: 0 };
    let mut recent = (0usize, 0usize);

    for step in 0..config.steps {
        let mut y = x.clone();
        let mut moved = false;
        for (k, v) in spec.vars.iter().enumerate() {
            match v.kind {
                VariableKind::Continuous => {
                    if v.range() > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        y[k] += z * scale[k];
                        moved = true;
                    }
                }
                VariableKind::Integer => {
                    if v.range() > 0.0 && rng.random::<f64>() < 0.3 {
                        y[k] += if rng.random::<bool>() { 1.0 } else { -1.0 };
                        moved = true;
                    }
                }
            }
        }
        let inside = y.iter().zip(&spec.vars).all(|(yi, v)| *yi >= v.lower && *yi <= v.upper);
        let u: f64 = rng.random();
        let mut accept = false;
        if moved && inside {
            let fy = sanitize(objective(&y));
            if fy.is_finite() && (fy <= fx || u < (-(fy - fx) / temperature).exp()) {
                x = y;
                fx = fy;
                accept = true;
            }
        }
        if step < burn {
            out.burn_proposed += 1;
            out.burn_accepted += accept as usize;
            recent.0 += accept as usize;
            recent.1 += 1;
            if config.adapt && recent.1 == 50 {
                let rate = recent.0 as f64 / 50.0;
                let factor = if rate < 0.25 {
                    0.7
                } else if rate > 0.40 {
                    1.3
                } else {
                    1.0
                };
                for (s, v) in scale.iter_mut().zip(&spec.vars) {
                    *s = (*s * factor).clamp(1e-9 * v.range().max(1e-9), v.range().max(1e-9));
                }
                recent = (0, 0);
            }
        } else {
            out.proposed += 1;
            out.accepted += accept as usize;
            if (step - burn).is_multiple_of(config.thin) {
                out.samples.push(x.clone());
            }
        }
    }
    out
}

/// Runs `config.chains` independent chains from `start` and pools their
/// post-burn-in samples into per-variable marginals.
pub fn mcmc_sample<F>(objective: &F, start: &[f64], spec: &VariableSpec, config: &MCMCConfig) -> Result<MCMCResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    config.validate(spec.len())?;
    if !spec.contains(start) {
        return Err(Error::InvalidInput("MCMC start lies outside the variable box".into()));
    }
    let f_start = objective(start);
    if !f_start.is_finite() {
        return Err(Error::InvalidInput(format!("objective is not finite at the MCMC start ({f_start})")));
    }
    let temperature = config.temperature.unwrap_or((f_start / 10.0).max(config.min_temperature));

    let chains: Vec<Chain> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(objective, start, f_start, spec, config, temperature, c))
        .collect();

    let samples: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.samples.clone()).collect();
    let ratio = |a: usize, p: usize| if p > 0 { a as f64 / p as f64 } else { 0.0 };
    let acceptance_rate = ratio(chains.iter().map(|c| c.accepted).sum(), chains.iter().map(|c| c.proposed).sum());
    let burn_in_acceptance =
        ratio(chains.iter().map(|c| c.burn_accepted).sum(), chains.iter().map(|c| c.burn_proposed).sum());
    let mut warnings = Vec::new();
    if chains.iter().map(|c| c.burn_proposed).sum::<usize>() > 0 && burn_in_acceptance == 0.0 {
        warnings
            .push("no proposals accepted during burn-in; reduce the proposal scale or raise the temperature".into());
    }
    if acceptance_rate == 0.0 {
        warnings.push("no proposals accepted after burn-in; marginals collapse to the start point".into());
    }

    let marginals = spec
        .vars
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let vals: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            Marginal::from_values(&vals, v.lower, v.upper, config.bins, v.kind == VariableKind::Integer)
        })
        .collect();

    Ok(MCMCResult { marginals, acceptance_rate, burn_in_acceptance, temperature, samples, warnings })
}
