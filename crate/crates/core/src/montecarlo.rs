//! Deterministic parallel Monte Carlo.
//!
//! Trial `i` always draws from stream `i` of a ChaCha generator keyed by the
//! run seed, and results are reduced as integer counts, so the outcome does
//! not depend on how rayon schedules the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Independent RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Counts how many of `trials` runs of `f` return true.
pub fn count<F>(trials: u64, seed: u64, f: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| u64::from(f(&mut trial_rng(seed, i))))
        .sum()
}

/// Histogram of the category index returned by `f` over `trials` runs.
pub fn tally<F>(trials: u64, seed: u64, categories: usize, f: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng) -> usize + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; categories],
            |mut acc, i| {
                acc[f(&mut trial_rng(seed, i))] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; categories],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Element-wise sum of per-trial count vectors of fixed length.
pub fn accumulate<F>(trials: u64, seed: u64, len: usize, f: F) -> Vec<u64>
where
    F: Fn(&mut ChaCha8Rng, &mut [u64]) + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; len],
            |mut acc, i| {
                f(&mut trial_rng(seed, i), &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Standard error of a binomial proportion with success probability `p`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = trial_rng(7, 3).gen();
        let b: u64 = trial_rng(7, 3).gen();
        let c: u64 = trial_rng(7, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn count_independent_of_thread_pool() {
        let f = |r: &mut ChaCha8Rng| r.gen::<f64>() < 0.3;
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| count(5000, 11, f));
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| count(5000, 11, f));
        assert_eq!(serial, parallel);
        let t = tally(5000, 11, 2, |r| usize::from(r.gen::<f64>() < 0.3));
        assert_eq!(t[1], serial);
    }
}
