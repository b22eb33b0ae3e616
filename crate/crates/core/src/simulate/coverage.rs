//! Monte Carlo coverage of calibration methods.

use serde::{Deserialize, Serialize};

use super::model::{draw_calibration, draw_test, GroupModel, SamplingScheme};
use super::rng::{multinomial, run_trials, TrialRng};
use crate::conformal::{
    check_alpha, corrected_gwcp_thresholds, covers, estimated_weight_threshold, gwcp_threshold,
    gwcp_unobserved_threshold, GroupSimplex, GroupWeights, ThresholdRule, WeightSource,
};
use crate::quantile::ExtendedScore;
use crate::{Error, Result};

/// z-value of the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Calibration method evaluated by [`run_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gwcp,
    GwcpUnobserved,
    CorrectedGwcp,
    /// Weighted conformal with calibration-estimated weights and the `+inf`
    /// atom at the test point's weight.
    WcpPlus,
    /// Weighted quantile without a test atom, weights `q_k / p_hat_k`.
    /// `pretrain_size` is only read for the pretraining source.
    Estimated {
        source: WeightSource,
        pretrain_size: usize,
    },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Gwcp => "gwcp",
            Method::GwcpUnobserved => "gwcp_unobserved",
            Method::CorrectedGwcp => "corrected_gwcp",
            Method::WcpPlus => "wcp_plus",
            Method::Estimated { source, .. } => source.label(),
        }
    }
}

/// Mean coverage over the effective trials with a 95% normal-approximation
/// half-width. `attempted_trials - trials` trials were discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub mean_coverage: f64,
    pub trials: usize,
    pub attempted_trials: usize,
    pub ci_half_width: f64,
    pub seed: u64,
}

impl CoverageSummary {
    pub fn from_hits(hits: usize, trials: usize, attempted_trials: usize, seed: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        Self {
            mean_coverage: mean,
            trials,
            attempted_trials,
            ci_half_width: Z_95 * (mean * (1.0 - mean) / trials as f64).sqrt(),
            seed,
        }
    }
}

/// Covers the test point in a trial, or `None` if the trial is discarded.
fn one_trial(
    model: &GroupModel,
    scheme: &SamplingScheme,
    q: &GroupSimplex,
    alpha: f64,
    method: Method,
    rng: &mut TrialRng,
) -> Result<Option<bool>> {
    let grouped = draw_calibration(model, scheme, rng)?;
    let (k, score) = draw_test(model, q, rng)?;
    let rule = match method {
        Method::Gwcp => gwcp_threshold(&grouped, q, alpha)?,
        Method::GwcpUnobserved => gwcp_unobserved_threshold(&grouped, alpha)?,
        Method::CorrectedGwcp => corrected_gwcp_thresholds(&grouped, q, alpha)?,
        Method::WcpPlus => {
            match estimated_weight_threshold(&grouped, q, GroupWeights::Calibration, alpha, Some(k)) {
                // An unobserved group with target mass has infinite weight.
                Err(Error::UndefinedWeight { .. }) => ThresholdRule::Global(ExtendedScore::INFINITY),
                other => other?,
            }
        }
        Method::Estimated { source, pretrain_size } => match source {
            // Identical to the calibration-weighted quantile when every group
            // is observed; empty groups with target mass contribute `+inf`.
            WeightSource::Calibration => gwcp_threshold(&grouped, q, alpha)?,
            WeightSource::Oracle => {
                let p = scheme.probabilities().ok_or_else(|| {
                    Error::InvalidScheme("oracle weights need a multinomial scheme".into())
                })?;
                estimated_weight_threshold(&grouped, q, GroupWeights::Oracle(p), alpha, None)?
            }
            WeightSource::Pretraining => {
                let p = scheme.probabilities().ok_or_else(|| {
                    Error::InvalidScheme("pretraining weights need a multinomial scheme".into())
                })?;
                let counts = multinomial(rng, pretrain_size, p.probs());
                if counts.contains(&0) {
                    return Ok(None);
                }
                estimated_weight_threshold(&grouped, q, GroupWeights::Pretraining(&counts), alpha, None)?
            }
        },
    };
    covers(&rule, k, score).map(Some)
}

/// Runs `trials` independent calibration/test draws and reports the mean
/// coverage of `method`. Trial `i` uses stream `i` of `seed`.
pub fn run_coverage(
    model: &GroupModel,
    scheme: &SamplingScheme,
    q: &GroupSimplex,
    alpha: f64,
    method: Method,
    trials: usize,
    seed: u64,
) -> Result<CoverageSummary> {
    check_alpha(alpha)?;
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    for got in [scheme.num_groups(), q.len()] {
        if got != model.num_groups() {
            return Err(Error::GroupCountMismatch {
                expected: model.num_groups(),
                got,
            });
        }
    }
    scheme.validate()?;
    if let Method::Estimated {
        source: WeightSource::Pretraining,
        pretrain_size: 0,
    } = method
    {
        return Err(Error::InvalidSampleSize(0));
    }
    let outcomes = run_trials(seed, trials, |_, rng| {
        one_trial(model, scheme, q, alpha, method, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let kept = outcomes.iter().flatten().count();
    if kept == 0 {
        return Err(Error::InvalidScheme("every trial was discarded".into()));
    }
    let hits = outcomes.iter().flatten().filter(|&&c| c).count();
    Ok(CoverageSummary::from_hits(hits, kept, trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::model::ScoreLaw;

    #[test]
    fn forced_blowup_covers_everything() {
        // Group 1 holds 0.7 of the target mass and is never observed.
        let model = GroupModel::new(vec![ScoreLaw::Normal { mean: 0.0 }; 2]).unwrap();
        let scheme = SamplingScheme::FixedCounts(vec![20, 0]);
        let q = GroupSimplex::new(vec![0.3, 0.7]).unwrap();
        let s = run_coverage(&model, &scheme, &q, 0.2, Method::Gwcp, 200, 0).unwrap();
        assert_eq!(s.mean_coverage, 1.0);
        assert_eq!(s.ci_half_width, 0.0);
    }

    #[test]
    fn ci_formula() {
        let s = CoverageSummary::from_hits(80, 100, 100, 5);
        assert!((s.ci_half_width - 1.96 * (0.8f64 * 0.2 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.seed, 5);
    }

    #[test]
    fn reproducible() {
        let model = GroupModel::new(vec![ScoreLaw::Uniform { lo: 0.0, hi: 1.0 }; 3]).unwrap();
        let scheme = SamplingScheme::Multinomial {
            p: GroupSimplex::new(vec![0.5, 0.3, 0.2]).unwrap(),
            n: 30,
        };
        let q = GroupSimplex::uniform(3).unwrap();
        let run = |m| run_coverage(&model, &scheme, &q, 0.1, m, 300, 4).unwrap();
        for m in [
            Method::Gwcp,
            Method::GwcpUnobserved,
            Method::CorrectedGwcp,
            Method::WcpPlus,
            Method::Estimated {
                source: WeightSource::Oracle,
                pretrain_size: 0,
            },
        ] {
            assert_eq!(run(m), run(m));
        }
    }

    #[test]
    fn pretraining_discards_trials() {
        let model = GroupModel::new(vec![ScoreLaw::Normal { mean: 0.0 }; 2]).unwrap();
        let scheme = SamplingScheme::Multinomial {
            p: GroupSimplex::new(vec![0.9, 0.1]).unwrap(),
            n: 50,
        };
        let q = GroupSimplex::uniform(2).unwrap();
        let method = Method::Estimated {
            source: WeightSource::Pretraining,
            pretrain_size: 10,
        };
        let s = run_coverage(&model, &scheme, &q, 0.2, method, 400, 1).unwrap();
        // P(no group-2 point among 10) = 0.9^10, about 35%.
        assert!(s.trials < s.attempted_trials);
        assert!(s.trials > 200);
        assert_eq!(s.attempted_trials, 400);
    }

    #[test]
    fn oracle_needs_probabilities() {
        let model = GroupModel::new(vec![ScoreLaw::PointMass(0.0); 2]).unwrap();
        let scheme = SamplingScheme::FixedCounts(vec![2, 2]);
        let q = GroupSimplex::uniform(2).unwrap();
        let m = Method::Estimated {
            source: WeightSource::Oracle,
            pretrain_size: 0,
        };
        assert!(matches!(
            run_coverage(&model, &scheme, &q, 0.2, m, 5, 0),
            Err(Error::InvalidScheme(_))
        ));
        assert_eq!(
            run_coverage(&model, &scheme, &q, 0.2, Method::Gwcp, 0, 0),
            Err(Error::ZeroTrials)
        );
    }
}
