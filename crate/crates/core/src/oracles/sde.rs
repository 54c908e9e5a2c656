use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DriftField, MeasureArg};
use crate::error::{Error, Result};

const BLOW_UP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub n_particles: usize,
    /// Fraction of each path discarded before averaging.
    pub burn_in: f64,
    /// Particles are split into this many groups; the spread of the group
    /// means gives the standard errors.
    pub batches: usize,
    pub seed: u64,
    /// `α_n` for the moment of `V = Σ α_n x_n²`.
    pub weights: Vec<f64>,
}

impl Default for SdeOptions {
    fn default() -> Self {
        SdeOptions {
            dt: 1e-3,
            n_steps: 10_000,
            n_particles: 100,
            burn_in: 0.2,
            batches: 50,
            seed: 0,
            weights: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|a − b| ≤ z √(se_a² + se_b²)`; a deterministic value has `se = 0`.
    pub fn agrees_with(&self, other: &Estimate, z: f64) -> bool {
        (self.value - other.value).abs() <= z * self.se.hypot(other.se)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeEstimates {
    pub dim: usize,
    /// `E[x_i]`.
    pub mean: Vec<Estimate>,
    /// `E[x_i x_j]`, row-major.
    pub second: Vec<Estimate>,
    pub v_moment: Estimate,
    pub particle_steps: u64,
}

impl SdeEstimates {
    pub fn second_moment(&self, i: usize, j: usize) -> Estimate {
        self.second[i * self.dim + j]
    }
}

/// Euler-Maruyama for `dX = (−X + v(p, X))dt + √2 dW` with the measure
/// argument frozen at `p`. Each particle starts from a standard Gaussian
/// draw and owns the ChaCha stream numbered by its index, so results do not
/// depend on thread scheduling.
pub fn oracle_sde(v: &DriftField, p: MeasureArg<'_>, opts: &SdeOptions) -> Result<SdeEstimates> {
    if !(opts.dt > 0.0 && opts.dt <= 0.01) {
        return Err(Error::Argument(format!(
            "dt = {} must lie in (0, 0.01]",
            opts.dt
        )));
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::Argument(format!(
            "burn-in fraction {} outside [0, 1)",
            opts.burn_in
        )));
    }
    if opts.batches < 2
        || opts.n_particles < opts.batches
        || !opts.n_particles.is_multiple_of(opts.batches)
    {
        return Err(Error::Argument(format!(
            "{} particles cannot be split into {} equal batches",
            opts.n_particles, opts.batches
        )));
    }
    let k = v.dim();
    let weights: Vec<f64> = if opts.weights.is_empty() {
        (1..=k).map(|n| 4f64.powi(-(n as i32))).collect()
    } else if opts.weights.len() == k {
        opts.weights.clone()
    } else {
        return Err(Error::Argument(format!(
            "{} weights for dimension {k}",
            opts.weights.len()
        )));
    };
    let burn = (opts.burn_in * opts.n_steps as f64).floor() as usize;
    let kept = opts.n_steps - burn;
    if kept == 0 {
        return Err(Error::Argument("no steps left after burn-in".into()));
    }
    let frozen = v.freeze(p)?;
    let noise = (2.0 * opts.dt).sqrt();
    // per particle: k means, k² products, one V moment
    let width = k + k * k + 1;

    let per_particle: Vec<Vec<f64>> = (0..opts.n_particles)
        .into_par_iter()
        .map(|id| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(id as u64);
            let mut x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut drift = vec![0.0; k];
            let mut acc = vec![0.0; width];
            for step in 0..opts.n_steps {
                frozen.eval_into(&x, &mut drift)?;
                for i in 0..k {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    x[i] += (-x[i] + drift[i]) * opts.dt + noise * xi;
                    if !(x[i].abs() <= BLOW_UP) {
                        return Err(Error::Instability { step });
                    }
                }
                if step >= burn {
                    for i in 0..k {
                        acc[i] += x[i];
                        for j in 0..k {
                            acc[k + i * k + j] += x[i] * x[j];
                        }
                        acc[width - 1] += weights[i] * x[i] * x[i];
                    }
                }
            }
            Ok(acc.into_iter().map(|a| a / kept as f64).collect())
        })
        .collect::<Result<_>>()?;

    let per_batch = opts.n_particles / opts.batches;
    let batch_means: Vec<Vec<f64>> = per_particle
        .chunks(per_batch)
        .map(|chunk| {
            (0..width)
                .map(|c| chunk.iter().map(|row| row[c]).sum::<f64>() / per_batch as f64)
                .collect()
        })
        .collect();
    let nb = opts.batches as f64;
    let estimate = |c: usize| {
        let mean = batch_means.iter().map(|b| b[c]).sum::<f64>() / nb;
        let var = batch_means
            .iter()
            .map(|b| (b[c] - mean).powi(2))
            .sum::<f64>()
            / (nb - 1.0);
        Estimate {
            value: mean,
            se: (var / nb).sqrt(),
        }
    };
    Ok(SdeEstimates {
        dim: k,
        mean: (0..k).map(estimate).collect(),
        second: (k..k + k * k).map(estimate).collect(),
        v_moment: estimate(width - 1),
        particle_steps: (opts.n_particles * opts.n_steps) as u64,
    })
}
