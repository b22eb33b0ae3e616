//! Weighted empirical distributions over extended-real scores and their
//! exact quantiles.
//!
//! Every calibration rule in this crate reduces to one query: the smallest
//! score whose cumulative normalized weight reaches a level `tau`,
//!
//! ```text
//! Quantile_tau(P) = inf { s : P(score <= s) >= tau }
//! ```
//!
//! with `+inf` returned when no finite atom qualifies. Levels above 1 are
//! legal and always yield `+inf`.
//!
//! Cumulative masses are summed with correctly rounded arithmetic, so the
//! answer does not depend on atom order. The comparison against `tau`
//! accepts a cumulative mass that falls short of `tau * total` by at most
//! [`LEVEL_TOLERANCE`] relative to the total: calibration weights are ratios
//! such as `q_k / n_k` whose exact sums routinely land on the level itself,
//! and those ties must resolve to the lower atom.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::sum::{exact_sum, ExactSum};

/// Relative slack allowed when deciding whether a cumulative mass reaches a
/// quantile level.
pub const LEVEL_TOLERANCE: f64 = 1e-12;

/// A real score or `+inf`. NaN and `-inf` are not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedScore(f64);

impl ExtendedScore {
    pub const INFINITY: Self = Self(f64::INFINITY);

    /// Wraps a finite score.
    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidScore(value))
        }
    }

    /// Wraps a finite score or `+inf`.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() || value == f64::INFINITY {
            Ok(Self(value))
        } else {
            Err(Error::InvalidScore(value))
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }

    /// The score as an `f64`; `+inf` maps to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn finite_value(self) -> Option<f64> {
        (!self.is_infinite()).then_some(self.0)
    }

    /// Applies `g` to a finite score and keeps `+inf` fixed.
    pub fn map_finite(self, g: impl FnOnce(f64) -> f64) -> Result<Self> {
        match self.finite_value() {
            Some(v) => Self::finite(g(v)),
            None => Ok(Self::INFINITY),
        }
    }
}

impl Eq for ExtendedScore {}

impl PartialOrd for ExtendedScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedScore {
    fn cmp(&self, other: &Self) -> Ordering {
        // NaN is rejected on construction.
        self.0.partial_cmp(&other.0).expect("scores are never NaN")
    }
}

impl fmt::Display for ExtendedScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

/// A single point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub score: ExtendedScore,
    pub weight: f64,
}

impl Atom {
    pub fn new(score: ExtendedScore, weight: f64) -> Self {
        Self { score, weight }
    }
}

/// Quantile level `tau > 0`. Levels above 1 are allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidLevel(tau))
        }
    }

    /// The level `1 - alpha` used by every conformal threshold.
    pub fn coverage(alpha: f64) -> Result<Self> {
        Self::new(1.0 - alpha)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A finite collection of weighted score atoms with positive total weight.
///
/// Atoms are kept in insertion order; sorting happens at query time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScoreDistribution {
    atoms: Vec<Atom>,
    total: f64,
}

impl WeightedScoreDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for (index, atom) in atoms.iter().enumerate() {
            if !(atom.weight.is_finite() && atom.weight >= 0.0) {
                return Err(Error::InvalidWeight {
                    index,
                    weight: atom.weight,
                });
            }
        }
        let total = exact_sum(atoms.iter().map(|a| a.weight));
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self { atoms, total })
    }

    /// Builds a distribution from parallel `(score, weight)` slices of finite
    /// scores.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = pairs
            .into_iter()
            .map(|(s, w)| Ok(Atom::new(ExtendedScore::new(s)?, w)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    /// Equal unit weight on every score.
    pub fn uniform(scores: &[f64]) -> Result<Self> {
        Self::from_pairs(scores.iter().map(|&s| (s, 1.0)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// Rescales weights so they sum to one.
    pub fn normalize(&self) -> Self {
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.score, a.weight / self.total))
            .collect();
        let total = exact_sum(atoms.iter().map(|a| a.weight));
        Self { atoms, total }
    }

    /// See [`weighted_quantile`].
    pub fn quantile(&self, level: QuantileLevel) -> ExtendedScore {
        weighted_quantile(self, level)
    }
}

/// Whether a cumulative mass reaches level `tau` of `total`.
#[inline]
pub(crate) fn reaches_level(cumulative: f64, tau: f64, total: f64) -> bool {
    cumulative >= (tau - LEVEL_TOLERANCE) * total
}

/// Smallest score whose normalized cumulative weight is at least `tau`, or
/// `+inf` if no atom qualifies (always the case for `tau > 1`).
pub fn weighted_quantile(dist: &WeightedScoreDistribution, level: QuantileLevel) -> ExtendedScore {
    CumulativeTable::new(dist).quantile(level)
}

/// Sorted support of a distribution with cumulative masses, for answering
/// several quantile queries against one distribution.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    scores: Vec<ExtendedScore>,
    cumulative: Vec<f64>,
    total: f64,
}

impl CumulativeTable {
    pub fn new(dist: &WeightedScoreDistribution) -> Self {
        let mut support: Vec<&Atom> = dist.atoms.iter().filter(|a| a.weight > 0.0).collect();
        support.sort_by(|a, b| a.score.cmp(&b.score));

        let mut scores = Vec::with_capacity(support.len());
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = ExactSum::new();
        let mut i = 0;
        while i < support.len() {
            let score = support[i].score;
            while i < support.len() && support[i].score == score {
                acc.add(support[i].weight);
                i += 1;
            }
            scores.push(score);
            cumulative.push(acc.value());
        }
        Self {
            scores,
            cumulative,
            total: dist.total,
        }
    }

    pub fn quantile(&self, level: QuantileLevel) -> ExtendedScore {
        let tau = level.value();
        if tau > 1.0 {
            return ExtendedScore::INFINITY;
        }
        let idx = self
            .cumulative
            .partition_point(|&c| !reaches_level(c, tau, self.total));
        self.scores
            .get(idx)
            .copied()
            .unwrap_or(ExtendedScore::INFINITY)
    }
}

/// Mixture of component distributions: each component is normalized and
/// then scaled by its mixture weight.
pub fn mixture(
    components: &[WeightedScoreDistribution],
    weights: &[f64],
) -> Result<WeightedScoreDistribution> {
    if components.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: components.len(),
            got: weights.len(),
        });
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidWeight { index, weight: w });
        }
    }
    if exact_sum(weights.iter().copied()) <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let atoms = components
        .iter()
        .zip(weights)
        .flat_map(|(component, &w)| {
            let total = component.total;
            component
                .atoms
                .iter()
                .map(move |a| Atom::new(a.score, w * (a.weight / total)))
        })
        .collect();
    WeightedScoreDistribution::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(tau: f64) -> QuantileLevel {
        QuantileLevel::new(tau).unwrap()
    }

    fn weights(d: &WeightedScoreDistribution) -> Vec<f64> {
        d.atoms().iter().map(|a| a.weight).collect()
    }

    #[test]
    fn infinity_orders_last() {
        let inf = ExtendedScore::INFINITY;
        assert!(ExtendedScore::finite(1e300).unwrap() < inf);
        assert!(ExtendedScore::finite(-3.0).unwrap() < ExtendedScore::finite(2.0).unwrap());
        assert_eq!(inf.to_string(), "inf");
        assert_eq!(ExtendedScore::finite(1.0).unwrap().to_string(), "1.0");
    }

    #[test]
    fn rejects_nan_and_negative_infinity() {
        assert!(ExtendedScore::new(f64::NAN).is_err());
        assert!(ExtendedScore::new(f64::NEG_INFINITY).is_err());
        assert!(ExtendedScore::finite(f64::INFINITY).is_err());
    }

    #[test]
    fn normalize_examples() {
        let d = WeightedScoreDistribution::from_pairs([(1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert_eq!(weights(&d.normalize()), vec![0.5, 0.5]);

        let d = WeightedScoreDistribution::from_pairs([(5.0, 1.0)]).unwrap();
        assert_eq!(weights(&d.normalize()), vec![1.0]);

        let d = WeightedScoreDistribution::from_pairs([(1.0, 1.0), (2.0, 3.0)]).unwrap();
        let n = d.normalize();
        assert_eq!(weights(&n), vec![0.25, 0.75]);
        assert_eq!(n.total_weight(), 1.0);
        assert_eq!(n.atoms()[1].score, ExtendedScore::finite(2.0).unwrap());
    }

    #[test]
    fn zero_total_weight_is_empty() {
        assert_eq!(
            WeightedScoreDistribution::from_pairs([(1.0, 0.0), (2.0, 0.0)]),
            Err(Error::EmptyDistribution)
        );
        assert_eq!(WeightedScoreDistribution::new(vec![]), Err(Error::EmptyDistribution));
        assert!(matches!(
            WeightedScoreDistribution::from_pairs([(1.0, -1.0)]),
            Err(Error::InvalidWeight { index: 0, .. })
        ));
    }

    #[test]
    fn uniform_quantile() {
        let d = WeightedScoreDistribution::uniform(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(d.quantile(level(0.6)).value(), 3.0);
        assert_eq!(d.quantile(level(0.61)).value(), 4.0);
        assert_eq!(d.quantile(level(1.0)).value(), 5.0);
        assert_eq!(d.quantile(level(1e-9)).value(), 1.0);
    }

    #[test]
    fn infinite_atom_dominates_high_levels() {
        let d = WeightedScoreDistribution::from_pairs([(1.0, 0.5), (f64::INFINITY, 0.5)]).unwrap();
        assert!(d.quantile(level(0.7)).is_infinite());
        assert_eq!(d.quantile(level(0.5)).value(), 1.0);
    }

    #[test]
    fn levels_above_one_are_infinite() {
        let d = WeightedScoreDistribution::uniform(&[1.0, 2.0]).unwrap();
        assert!(d.quantile(level(1.0 + 1e-15)).is_infinite());
        assert!(d.quantile(level(1.2)).is_infinite());
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
    }

    #[test]
    fn zero_weight_atoms_are_not_support() {
        let d = WeightedScoreDistribution::from_pairs([(-10.0, 0.0), (1.0, 1.0), (2.0, 1.0)])
            .unwrap();
        assert_eq!(d.quantile(level(1e-6)).value(), 1.0);
    }

    #[test]
    fn ties_on_the_level_resolve_low() {
        // 800 atoms of weight 0.001 followed by one of weight 0.1: cumulative
        // mass is exactly 0.9 at score 0.5 in exact arithmetic.
        let mut pairs: Vec<(f64, f64)> = (0..800).map(|i| (-1.0 + i as f64 * 1e-3, 0.001)).collect();
        pairs.push((0.5, 0.1));
        pairs.extend((0..100).map(|i| (1.0 + i as f64 * 1e-3, 0.001)));
        let d = WeightedScoreDistribution::from_pairs(pairs).unwrap();
        assert_eq!(d.quantile(QuantileLevel::coverage(0.1).unwrap()).value(), 0.5);
    }

    #[test]
    fn mixture_examples() {
        let a = WeightedScoreDistribution::from_pairs([(0.0, 1.0)]).unwrap();
        let b = WeightedScoreDistribution::from_pairs([(1.0, 1.0)]).unwrap();
        let m = mixture(&[a.clone(), b], &[0.5, 0.5]).unwrap();
        assert_eq!(weights(&m), vec![0.5, 0.5]);

        let m = mixture(std::slice::from_ref(&a), &[1.0]).unwrap();
        assert_eq!(m.normalize(), a.normalize());
    }

    #[test]
    fn mixture_component_masses() {
        let comps = vec![
            WeightedScoreDistribution::from_pairs([(0.0, 1.0), (1.0, 3.0)]).unwrap(),
            WeightedScoreDistribution::from_pairs([(2.0, 7.0)]).unwrap(),
            WeightedScoreDistribution::from_pairs([(3.0, 1.0), (4.0, 1.0), (5.0, 2.0)]).unwrap(),
        ];
        let mix = [0.2, 0.3, 0.5];
        let m = mixture(&comps, &mix).unwrap().normalize();
        let w = weights(&m);
        let masses = [w[0] + w[1], w[2], w[3] + w[4] + w[5]];
        for (got, want) in masses.iter().zip(mix) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn mixture_errors() {
        let a = WeightedScoreDistribution::from_pairs([(0.0, 1.0)]).unwrap();
        assert!(matches!(
            mixture(std::slice::from_ref(&a), &[0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert_eq!(mixture(&[a], &[0.0]), Err(Error::EmptyDistribution));
    }
}
