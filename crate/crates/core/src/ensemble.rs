//! Seeded particle ensembles, their propagation and Kolmogorov–Smirnov checks against ρ.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`, giving the same stream on every platform. Uniforms are drawn in
//! member order before any parallel work, and each member is then mapped independently,
//! so parallel and sequential runs agree bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::DensityProfile;
use crate::trajectory::{
    flow_map, integrate_ode, BoundaryPolicy, FlowOutcome, OdeControls, Terminal,
};
use crate::velocity::VelocityField;
use crate::{Error, Result};

/// Smallest ensemble accepted by [`ks_distance`].
pub const MIN_KS_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub positions: Vec<f64>,
    pub seed: u64,
    /// Number of propagation steps applied.
    pub generation: u64,
    pub length: f64,
    /// Members removed at an absorbing boundary so far.
    pub absorbed: usize,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Members present plus members absorbed.
    pub fn initial_size(&self) -> usize {
        self.positions.len() + self.absorbed
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.positions.iter().sum::<f64>() / self.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Independent uniforms from the seeded generator.
    #[default]
    MonteCarlo,
    /// Quantiles `(i - 0.5)/n`; the seed is recorded but unused.
    Stratified,
}

/// Draws `n` positions from ρ by inverse-CDF sampling.
pub fn sample_initial(profile: &DensityProfile, n: usize, seed: u64) -> Result<Ensemble> {
    sample_with(profile, n, seed, Sampling::MonteCarlo)
}

pub fn sample_with(
    profile: &DensityProfile,
    n: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    if !profile.is_normalized(1e-9) {
        return Err(Error::DegenerateDensity(format!(
            "profile integrates to {}",
            profile.total()
        )));
    }
    let uniforms: Vec<f64> = match sampling {
        Sampling::MonteCarlo => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random::<f64>()).collect()
        }
        Sampling::Stratified => (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
    };
    let positions = uniforms
        .par_iter()
        .map(|&u| profile.inverse_cdf(u))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        positions,
        seed,
        generation: 0,
        length: profile.length(),
        absorbed: 0,
    })
}

fn advanced(ensemble: &Ensemble, outcomes: Vec<Option<f64>>) -> Ensemble {
    let before = outcomes.len();
    let positions: Vec<f64> = outcomes.into_iter().flatten().collect();
    let absorbed = ensemble.absorbed + (before - positions.len());
    Ensemble {
        positions,
        seed: ensemble.seed,
        generation: ensemble.generation + 1,
        length: ensemble.length,
        absorbed,
    }
}

/// Applies the exact `v = c/ρ` flow for time `dt` to every member.
///
/// Under [`BoundaryPolicy::Absorb`] members that reach the exit are removed and counted.
pub fn propagate(
    ensemble: &Ensemble,
    profile: &DensityProfile,
    c: f64,
    dt: f64,
    policy: BoundaryPolicy,
) -> Result<Ensemble> {
    let outcomes = ensemble
        .positions
        .par_iter()
        .map(|&x| {
            Ok(match flow_map(profile, c, x, dt, policy)? {
                FlowOutcome::Inside(x) => Some(x),
                FlowOutcome::Absorbed { .. } => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(advanced(ensemble, outcomes))
}

/// Propagates every member through an arbitrary field with the adaptive integrator.
pub fn propagate_field(
    ensemble: &Ensemble,
    field: &VelocityField,
    dt: f64,
    policy: BoundaryPolicy,
    controls: OdeControls,
) -> Result<Ensemble> {
    let outcomes = ensemble
        .positions
        .par_iter()
        .map(|&x| {
            let path = integrate_ode(field, x, dt, policy, controls)?;
            match path.terminal {
                Terminal::Completed => Ok(Some(path.final_position())),
                Terminal::Absorbed(_) => Ok(None),
                Terminal::StepLimit => Err(Error::Numerical(format!(
                    "step limit propagating member from x = {x}"
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(advanced(ensemble, outcomes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Significance {
    #[default]
    #[serde(rename = "0.01")]
    OnePercent,
    #[serde(rename = "0.05")]
    FivePercent,
}

impl Significance {
    /// Asymptotic Kolmogorov critical coefficient `c(α)`.
    pub fn coefficient(self) -> f64 {
        match self {
            Self::OnePercent => 1.63,
            Self::FivePercent => 1.36,
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            Self::OnePercent => 0.01,
            Self::FivePercent => 0.05,
        }
    }

    pub fn from_alpha(alpha: f64) -> Option<Self> {
        if alpha == 0.01 {
            Some(Self::OnePercent)
        } else if alpha == 0.05 {
            Some(Self::FivePercent)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub ks_statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub passed: bool,
}

/// KS statistic between the ensemble's empirical CDF and `F`, tested at α = 0.01.
pub fn ks_distance(ensemble: &Ensemble, profile: &DensityProfile) -> Result<GoodnessOfFit> {
    ks_distance_at(ensemble, profile, Significance::OnePercent)
}

pub fn ks_distance_at(
    ensemble: &Ensemble,
    profile: &DensityProfile,
    level: Significance,
) -> Result<GoodnessOfFit> {
    let n = ensemble.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_KS_SAMPLES,
        });
    }
    let mut xs = ensemble.positions.clone();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = profile.cdf(x)?;
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let threshold = level.coefficient() / nf.sqrt();
    Ok(GoodnessOfFit {
        ks_statistic: d,
        n,
        threshold,
        passed: d < threshold,
    })
}

/// Area-normalized histogram over `[0, L]` as `(bin centre, density)`.
pub fn histogram(ensemble: &Ensemble, bins: usize) -> Result<Vec<(f64, f64)>> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins = {bins}, need >= 2")));
    }
    if ensemble.is_empty() {
        return Err(Error::TooFewSamples { n: 0, min: 1 });
    }
    let l = ensemble.length;
    let width = l / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &ensemble.positions {
        let b = ((x / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = ensemble.len() as f64;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &k)| ((i as f64 + 0.5) * width, k as f64 / (n * width)))
        .collect())
}

/// Probability mass of each histogram bin under ρ, divided by the bin width.
pub fn expected_histogram(profile: &DensityProfile, bins: usize) -> Result<Vec<(f64, f64)>> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins = {bins}, need >= 2")));
    }
    let l = profile.length();
    let width = l / bins as f64;
    (0..bins)
        .map(|i| {
            let a = i as f64 * width;
            let b = if i + 1 == bins { l } else { a + width };
            Ok((
                (i as f64 + 0.5) * width,
                (profile.cdf(b)? - profile.cdf(a)?) / width,
            ))
        })
        .collect()
}
