//! Split-conformal calibration rules over grouped scores.
//!
//! Groups are indexed `0..K` throughout the library. Every rule returns a
//! [`ThresholdRule`]; a test point in group `k` with score `s` is covered
//! when `s <= threshold` for that group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{
    mixture, Atom, CumulativeTable, ExtendedScore, QuantileLevel, WeightedScoreDistribution,
};
use crate::sum::exact_sum;

/// Absolute tolerance on the sum of a [`GroupSimplex`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Calibration scores partitioned into `K` groups. Groups may be empty, but
/// at least one score must be present overall.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedScores {
    groups: Vec<Vec<f64>>,
}

impl GroupedScores {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidGroupedScores("K must be at least 1".into()));
        }
        if groups.iter().all(Vec::is_empty) {
            return Err(Error::InvalidGroupedScores("no calibration scores".into()));
        }
        if let Some(&bad) = groups.iter().flatten().find(|s| !s.is_finite()) {
            return Err(Error::InvalidScore(bad));
        }
        Ok(Self { groups })
    }

    /// Collects `(group, score)` pairs into `num_groups` groups.
    pub fn from_labeled(
        num_groups: usize,
        points: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let mut groups = vec![Vec::new(); num_groups];
        for (group, score) in points {
            groups
                .get_mut(group)
                .ok_or(Error::GroupOutOfRange {
                    group,
                    groups: num_groups,
                })?
                .push(score);
        }
        Self::new(groups)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, k: usize) -> &[f64] {
        &self.groups[k]
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn counts(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Total number of calibration points.
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of groups with at least one score.
    pub fn observed_groups(&self) -> usize {
        self.groups.iter().filter(|g| !g.is_empty()).count()
    }

    /// Empirical score distribution of group `k`, or a point mass at `+inf`
    /// when the group is empty.
    pub fn component(&self, k: usize) -> WeightedScoreDistribution {
        let scores = &self.groups[k];
        let dist = if scores.is_empty() {
            WeightedScoreDistribution::new(vec![Atom::new(ExtendedScore::INFINITY, 1.0)])
        } else {
            WeightedScoreDistribution::uniform(scores)
        };
        dist.expect("group scores are validated on construction")
    }

    fn check_groups(&self, expected: usize) -> Result<()> {
        if self.num_groups() == expected {
            Ok(())
        } else {
            Err(Error::GroupCountMismatch {
                expected: self.num_groups(),
                got: expected,
            })
        }
    }
}

/// Probability vector over the `K` groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSimplex {
    probs: Vec<f64>,
}

impl GroupSimplex {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidSimplex("no groups".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidSimplex(format!("entry {p} is not a probability")));
        }
        let total = exact_sum(probs.iter().copied());
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidSimplex(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_groups: usize) -> Result<Self> {
        if num_groups == 0 {
            return Err(Error::InvalidSimplex("no groups".into()));
        }
        Ok(Self {
            probs: vec![1.0 / num_groups as f64; num_groups],
        })
    }

    /// Proportions `counts[k] / sum(counts)`.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidSimplex("counts sum to zero".into()));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A fitted score threshold: one value for every test point, or one per
/// test-point group.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdRule {
    Global(ExtendedScore),
    PerGroup(Vec<ExtendedScore>),
}

impl ThresholdRule {
    /// Threshold applied to a test point from group `k`.
    pub fn threshold_for(&self, k: usize) -> Result<ExtendedScore> {
        match self {
            ThresholdRule::Global(t) => Ok(*t),
            ThresholdRule::PerGroup(ts) => ts.get(k).copied().ok_or(Error::GroupOutOfRange {
                group: k,
                groups: ts.len(),
            }),
        }
    }

    pub fn global(&self) -> Option<ExtendedScore> {
        match self {
            ThresholdRule::Global(t) => Some(*t),
            ThresholdRule::PerGroup(_) => None,
        }
    }
}

/// Where the group probabilities behind estimated weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Oracle,
    Pretraining,
    Calibration,
}

impl WeightSource {
    pub const ALL: [WeightSource; 3] = [
        WeightSource::Pretraining,
        WeightSource::Calibration,
        WeightSource::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WeightSource::Oracle => "oracle",
            WeightSource::Pretraining => "pretraining",
            WeightSource::Calibration => "calibration",
        }
    }
}

/// Data backing a [`WeightSource`].
#[derive(Debug, Clone, Copy)]
pub enum GroupWeights<'a> {
    /// True training proportions `p`.
    Oracle(&'a GroupSimplex),
    /// Group counts from an independent pretraining sample.
    Pretraining(&'a [usize]),
    /// Proportions `n_k / n` of the calibration set itself.
    Calibration,
}

impl GroupWeights<'_> {
    pub fn source(&self) -> WeightSource {
        match self {
            GroupWeights::Oracle(_) => WeightSource::Oracle,
            GroupWeights::Pretraining(_) => WeightSource::Pretraining,
            GroupWeights::Calibration => WeightSource::Calibration,
        }
    }
}

/// Split conformal threshold: the `ceil((1 - alpha)(n + 1))`-th smallest
/// score, or `+inf` when that rank exceeds `n`.
pub fn split_cp_threshold(scores: &[f64], alpha: f64) -> Result<ExtendedScore> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let weights = vec![1.0; scores.len()];
    wcp_threshold(scores, &weights, 1.0, alpha)
}

/// Weighted conformal threshold: the `1 - alpha` quantile of the atoms
/// `(scores[i], weights[i])` plus an atom at `+inf` carrying `test_weight`.
/// A zero `test_weight` drops the `+inf` atom.
pub fn wcp_threshold(
    scores: &[f64],
    weights: &[f64],
    test_weight: f64,
    alpha: f64,
) -> Result<ExtendedScore> {
    check_alpha(alpha)?;
    if scores.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: weights.len(),
        });
    }
    let mut atoms = scores
        .iter()
        .zip(weights)
        .map(|(&s, &w)| Ok(Atom::new(ExtendedScore::finite(s)?, w)))
        .collect::<Result<Vec<_>>>()?;
    atoms.push(Atom::new(ExtendedScore::INFINITY, test_weight));
    let dist = WeightedScoreDistribution::new(atoms)?;
    Ok(dist.quantile(QuantileLevel::coverage(alpha)?))
}

/// Mixture `sum_k q_k P_k` of the per-group empirical score distributions,
/// with empty groups contributing a point mass at `+inf`.
pub fn group_mixture(grouped: &GroupedScores, q: &GroupSimplex) -> Result<WeightedScoreDistribution> {
    grouped.check_groups(q.len())?;
    let components: Vec<_> = (0..grouped.num_groups())
        .map(|k| grouped.component(k))
        .collect();
    mixture(&components, q.probs())
}

/// Group-weighted conformal threshold: the `1 - alpha` quantile of
/// [`group_mixture`].
pub fn gwcp_threshold(grouped: &GroupedScores, q: &GroupSimplex, alpha: f64) -> Result<ThresholdRule> {
    check_alpha(alpha)?;
    let dist = group_mixture(grouped, q)?;
    Ok(ThresholdRule::Global(
        dist.quantile(QuantileLevel::coverage(alpha)?),
    ))
}

/// GWCP targeting the uniform distribution over observed groups only.
pub fn gwcp_unobserved_threshold(grouped: &GroupedScores, alpha: f64) -> Result<ThresholdRule> {
    check_alpha(alpha)?;
    let observed: Vec<_> = (0..grouped.num_groups())
        .filter(|&k| !grouped.group(k).is_empty())
        .map(|k| grouped.component(k))
        .collect();
    if observed.is_empty() {
        return Err(Error::NoObservedGroups);
    }
    let weights = vec![1.0 / observed.len() as f64; observed.len()];
    let dist = mixture(&observed, &weights)?;
    Ok(ThresholdRule::Global(
        dist.quantile(QuantileLevel::coverage(alpha)?),
    ))
}

/// Per-group miscoverage levels `alpha_k = alpha - q_k / n_k` (`alpha` for
/// empty groups).
pub fn corrected_levels(grouped: &GroupedScores, q: &GroupSimplex, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    grouped.check_groups(q.len())?;
    Ok(grouped
        .counts()
        .iter()
        .zip(q.probs())
        .map(|(&n, &qk)| if n > 0 { alpha - qk / n as f64 } else { alpha })
        .collect())
}

/// Corrected GWCP: group `k` uses the `1 - alpha_k` quantile of the GWCP
/// mixture, and `+inf` when `alpha_k < 0`.
pub fn corrected_gwcp_thresholds(
    grouped: &GroupedScores,
    q: &GroupSimplex,
    alpha: f64,
) -> Result<ThresholdRule> {
    let levels = corrected_levels(grouped, q, alpha)?;
    let table = CumulativeTable::new(&group_mixture(grouped, q)?);
    let thresholds = levels
        .into_iter()
        .map(|alpha_k| {
            if alpha_k < 0.0 {
                Ok(ExtendedScore::INFINITY)
            } else {
                Ok(table.quantile(QuantileLevel::new(1.0 - alpha_k)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdRule::PerGroup(thresholds))
}

/// Group weights `w_k = q_k / p_k` with `p_k` taken from `source`. Groups
/// without target mass get weight 0.
pub fn estimated_group_weights(
    grouped: &GroupedScores,
    q: &GroupSimplex,
    source: GroupWeights<'_>,
) -> Result<Vec<f64>> {
    let num_groups = grouped.num_groups();
    grouped.check_groups(q.len())?;
    let p_hat: Vec<f64> = match source {
        GroupWeights::Oracle(p) => {
            grouped.check_groups(p.len())?;
            p.probs().to_vec()
        }
        GroupWeights::Pretraining(counts) => {
            if counts.len() != num_groups {
                return Err(Error::GroupCountMismatch {
                    expected: num_groups,
                    got: counts.len(),
                });
            }
            if let Some(group) = counts.iter().position(|&c| c == 0) {
                return Err(Error::UndefinedWeight { group });
            }
            let total: usize = counts.iter().sum();
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
        GroupWeights::Calibration => {
            let n = grouped.len() as f64;
            grouped.counts().iter().map(|&c| c as f64 / n).collect()
        }
    };
    q.probs()
        .iter()
        .zip(&p_hat)
        .enumerate()
        .map(|(group, (&qk, &pk))| {
            if qk == 0.0 {
                Ok(0.0)
            } else if pk > 0.0 {
                Ok(qk / pk)
            } else {
                Err(Error::UndefinedWeight { group })
            }
        })
        .collect()
}

/// Weighted conformal threshold with group-constant weights estimated from
/// `source`. With `test_group = Some(k)` the `+inf` atom carries group `k`'s
/// weight; with `None` it is omitted.
pub fn estimated_weight_threshold(
    grouped: &GroupedScores,
    q: &GroupSimplex,
    source: GroupWeights<'_>,
    alpha: f64,
    test_group: Option<usize>,
) -> Result<ThresholdRule> {
    check_alpha(alpha)?;
    let group_weights = estimated_group_weights(grouped, q, source)?;
    let test_weight = match test_group {
        Some(k) => *group_weights.get(k).ok_or(Error::GroupOutOfRange {
            group: k,
            groups: group_weights.len(),
        })?,
        None => 0.0,
    };
    let mut scores = Vec::with_capacity(grouped.len());
    let mut weights = Vec::with_capacity(grouped.len());
    for (k, group) in grouped.groups().iter().enumerate() {
        scores.extend_from_slice(group);
        weights.extend(std::iter::repeat_n(group_weights[k], group.len()));
    }
    wcp_threshold(&scores, &weights, test_weight, alpha).map(ThresholdRule::Global)
}

/// Whether a test point from group `k` with score `score` lies in the
/// prediction set (`score <= threshold`).
pub fn covers(rule: &ThresholdRule, k: usize, score: f64) -> Result<bool> {
    Ok(score <= rule.threshold_for(k)?.value())
}

/// A closed interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Prediction interval `[center - t, center + t]` for the residual score
/// `|y - center|`; the whole line when `t = +inf`.
pub fn prediction_interval(rule: &ThresholdRule, k: usize, center: f64) -> Result<Interval> {
    let t = rule.threshold_for(k)?;
    Ok(match t.finite_value() {
        Some(t) => Interval {
            lower: center - t,
            upper: center + t,
        },
        None => Interval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        },
    })
}
