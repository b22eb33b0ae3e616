//! Deterministic random streams.
//!
//! Trial `i` of a run seeded with `seed` draws from ChaCha8 keyed by `seed`
//! on stream `i`, so results do not depend on execution order or thread
//! count. Sub-experiments derive their seeds with [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::sum::exact_sum;

pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`, one splitmix round per tag.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Stable 64-bit tag for a label (FNV-1a).
pub fn label_tag(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn trial_rng(seed: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f` once per trial on its own stream; results come back in trial
/// order.
pub fn run_trials<T, F>(seed: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut TrialRng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| f(i, &mut trial_rng(seed, i as u64)))
        .collect()
}

/// Draws group counts from Multinomial(n; probs) by sequential conditional
/// binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: usize, probs: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = n as u64;
    for k in 0..probs.len() {
        if remaining == 0 {
            break;
        }
        let rest = exact_sum(probs[k..].iter().copied());
        if k + 1 == probs.len() || probs[k] >= rest {
            counts[k] = remaining as usize;
            break;
        }
        if probs[k] <= 0.0 {
            continue;
        }
        let draw = Binomial::new(remaining, probs[k] / rest)
            .expect("conditional probability lies in [0, 1]")
            .sample(rng);
        counts[k] = draw as usize;
        remaining -= draw;
    }
    counts
}

/// Draws an index with probability proportional to `probs[k]`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total = exact_sum(probs.iter().copied());
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            return k;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probabilities have positive mass")
}
