//! Coverage lower bounds: closed forms and Monte Carlo estimates.

use serde::{Deserialize, Serialize};

use crate::conformal::{check_alpha, GroupSimplex};
use crate::simulate::rng::{multinomial, run_trials};
use crate::sum::exact_sum;
use crate::{Error, Result};

/// Tolerance used when checking that `(1 - alpha) * K` is an integer.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    Closed,
    MonteCarlo,
}

/// A coverage lower bound. `trials` and `std_error` are zero for closed
/// forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub value: f64,
    pub form: BoundForm,
    pub trials: usize,
    pub std_error: f64,
}

impl BoundEstimate {
    pub fn closed(value: f64) -> Self {
        Self {
            value,
            form: BoundForm::Closed,
            trials: 0,
            std_error: 0.0,
        }
    }

    /// Mean of per-trial values with its standard error.
    fn monte_carlo(samples: &[f64]) -> Self {
        let trials = samples.len();
        let mean = exact_sum(samples.iter().copied()) / trials as f64;
        let std_error = if trials > 1 {
            let ss = exact_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (trials - 1) as f64).sqrt() / (trials as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value: mean,
            form: BoundForm::MonteCarlo,
            trials,
            std_error,
        }
    }
}

fn check_lengths(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::GroupCountMismatch { expected, got });
    }
    Ok(())
}

/// `1 - alpha - max_{k: n_k > 0} q_k / n_k`.
pub fn thm1_bound(q: &GroupSimplex, counts: &[usize], alpha: f64) -> Result<BoundEstimate> {
    check_alpha(alpha)?;
    check_lengths(q.len(), counts.len())?;
    let penalty = counts
        .iter()
        .zip(q.probs())
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &qk)| qk / n as f64)
        .reduce(f64::max)
        .ok_or(Error::NoObservedGroups)?;
    Ok(BoundEstimate::closed(1.0 - alpha - penalty))
}

/// Checks `min_k p_k >= 8 ln(n) / n`.
fn check_hypothesis(p: &GroupSimplex, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSampleSize(n));
    }
    let required = 8.0 * (n as f64).ln() / n as f64;
    let min_p = p.min();
    if min_p < required {
        return Err(Error::HypothesisNotMet { min_p, required });
    }
    Ok(())
}

/// `1 - alpha - (4 / n) max_k q_k / p_k`, valid when `min_k p_k >= 8 ln(n) / n`.
pub fn thm2_closed_bound(
    q: &GroupSimplex,
    p: &GroupSimplex,
    n: usize,
    alpha: f64,
) -> Result<BoundEstimate> {
    check_alpha(alpha)?;
    check_lengths(p.len(), q.len())?;
    check_hypothesis(p, n)?;
    let ratio = q
        .probs()
        .iter()
        .zip(p.probs())
        .map(|(qk, pk)| qk / pk)
        .fold(0.0, f64::max);
    Ok(BoundEstimate::closed(1.0 - alpha - 4.0 / n as f64 * ratio))
}

/// `1 - alpha - 4 / (K n min_k p_k)`, under the same hypothesis.
pub fn corollary_closed_bound(p: &GroupSimplex, n: usize, alpha: f64) -> Result<BoundEstimate> {
    check_alpha(alpha)?;
    check_hypothesis(p, n)?;
    let k = p.len() as f64;
    Ok(BoundEstimate::closed(
        1.0 - alpha - 4.0 / (k * n as f64 * p.min()),
    ))
}

/// Monte Carlo estimate of the expectation-form bound for the
/// unobserved-groups variant: each trial draws calibration counts from
/// Multinomial(n; p) and pays `1 / (K min_{n_k > 0} n_k)` plus
/// `(1 - alpha)` times the fraction of empty groups.
pub fn corollary_empirical_bound(
    p: &GroupSimplex,
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundEstimate> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidSampleSize(n));
    }
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let k = p.len() as f64;
    let samples = run_trials(seed, trials, |_, rng| {
        let counts = multinomial(rng, n, p.probs());
        let min_observed = counts.iter().copied().filter(|&c| c > 0).min();
        let empty = counts.iter().filter(|&&c| c == 0).count() as f64;
        let min_observed = min_observed.expect("multinomial counts sum to n >= 1") as f64;
        1.0 - alpha - (1.0 / (k * min_observed) + (1.0 - alpha) * empty / k)
    });
    Ok(BoundEstimate::monte_carlo(&samples))
}

/// Monte Carlo estimate of the weighted conformal bound
/// `1 - alpha - E|w_hat - w| / 2` when group probabilities are estimated
/// from `n` pretraining points as `(n_k + 1) / (n + K)`.
///
/// Both weight functions are normalized to have mean one under `p`, and the
/// expectation over the covariate is the exact finite sum over groups.
/// Groups with `p_k = 0` never occur under `p` and contribute nothing.
pub fn lei_bound_empirical(
    p: &GroupSimplex,
    q: &GroupSimplex,
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundEstimate> {
    check_alpha(alpha)?;
    check_lengths(p.len(), q.len())?;
    if n == 0 {
        return Err(Error::InvalidSampleSize(n));
    }
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let support: Vec<usize> = (0..p.len()).filter(|&k| p.get(k) > 0.0).collect();
    let w: Vec<f64> = support.iter().map(|&k| q.get(k) / p.get(k)).collect();
    let w_norm = exact_sum(support.iter().zip(&w).map(|(&k, wk)| p.get(k) * wk));
    if w_norm <= 0.0 {
        return Err(Error::InvalidSimplex("q puts no mass on the support of p".into()));
    }
    let k_groups = p.len() as f64;
    let samples = run_trials(seed, trials, |_, rng| {
        let counts = multinomial(rng, n, p.probs());
        let w_hat: Vec<f64> = support
            .iter()
            .map(|&k| q.get(k) * (n as f64 + k_groups) / (counts[k] as f64 + 1.0))
            .collect();
        let w_hat_norm = exact_sum(support.iter().zip(&w_hat).map(|(&k, wk)| p.get(k) * wk));
        let error = exact_sum(
            support
                .iter()
                .enumerate()
                .map(|(i, &k)| p.get(k) * (w_hat[i] / w_hat_norm - w[i] / w_norm).abs()),
        ) / 2.0;
        1.0 - alpha - error
    });
    Ok(BoundEstimate::monte_carlo(&samples))
}

/// Exact coverage `1 - alpha - 1 / (K (n1 + 1))` of the construction showing
/// the fixed-size bound is essentially tight. Requires `(1 - alpha) K` to be
/// an integer.
pub fn tight_example_coverage(num_groups: usize, n1: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if num_groups == 0 {
        return Err(Error::InvalidSimplex("no groups".into()));
    }
    if n1 == 0 {
        return Err(Error::InvalidSampleSize(n1));
    }
    let k = num_groups as f64;
    let target = (1.0 - alpha) * k;
    if (target - target.round()).abs() > INTEGRALITY_TOLERANCE {
        return Err(Error::NonIntegerTargetGroups(target));
    }
    Ok(1.0 - alpha - 1.0 / (k * (n1 as f64 + 1.0)))
}
