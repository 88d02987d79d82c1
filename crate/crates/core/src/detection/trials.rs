use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::{DetectionHistogram, DetectorModel, RateProfile, SourceFlags, TrialConfig};
use crate::error::{Error, Result};
use crate::solver::SimulationResult;

const CHUNK: u64 = 8192;

/// Simulates `config.n_trials` storage-and-recall attempts and bins every
/// detection.
pub fn run_trials(
    sim: &SimulationResult<f64>,
    detector: &DetectorModel,
    config: &TrialConfig,
    flags: SourceFlags,
    memory_efficiency: Option<f64>,
) -> Result<DetectionHistogram> {
    let profile = RateProfile::build(sim, detector, config, flags, memory_efficiency)?;
    run_trials_with_profile(&profile, config)
}

/// Monte Carlo over a precomputed rate profile.
///
/// Trial `i` draws from its own ChaCha8 stream, so the result does not depend
/// on how trials are distributed over threads.
pub fn run_trials_with_profile(profile: &RateProfile, config: &TrialConfig) -> Result<DetectionHistogram> {
    config.validate()?;
    if profile.counts.is_empty() || profile.cells_per_bin == 0 || !profile.counts.len().is_multiple_of(profile.cells_per_bin) {
        return Err(Error::Config("rate profile does not tile whole bins".into()));
    }
    if profile.counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Config("rate profile has negative or non-finite cells".into()));
    }
    let n_bins = profile.n_bins();
    let empty = DetectionHistogram::uniform(profile.start, profile.bin_width(), n_bins, 0);

    let mut cdf = Vec::with_capacity(profile.counts.len());
    let mut acc = 0.0;
    for c in &profile.counts {
        acc += c;
        cdf.push(acc);
    }
    let mu = acc;
    if mu == 0.0 {
        let mut h = empty;
        h.n_trials = config.n_trials;
        return Ok(h);
    }
    let poisson = Poisson::new(mu).map_err(|e| Error::Config(format!("poisson mean {mu}: {e}")))?;
    let per_bin = profile.cells_per_bin;

    let n_chunks = config.n_trials.div_ceil(CHUNK);
    let parts: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; n_bins];
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(config.n_trials);
            for trial in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(trial);
                let k = poisson.sample(&mut rng) as u64;
                for _ in 0..k {
                    let u: f64 = rng.random::<f64>() * mu;
                    let cell = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
                    counts[cell / per_bin] += 1;
                }
            }
            counts
        })
        .collect();

    let mut h = empty;
    for part in parts {
        for (a, b) in h.counts.iter_mut().zip(part) {
            *a += b;
        }
    }
    h.n_trials = config.n_trials;
    Ok(h)
}
