//! Group models and sampling schemes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::{categorical, multinomial};
use crate::conformal::{GroupSimplex, GroupedScores};
use crate::{Error, Result};

/// Law of the score within one group. Normal laws have unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLaw {
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// `|N(mean, 1)|`.
    AbsNormal { mean: f64 },
    /// `N(mean, 1)`.
    Normal { mean: f64 },
    PointMass(f64),
}

impl ScoreLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ScoreLaw::AbsNormal { mean } | ScoreLaw::Normal { mean } => mean.is_finite(),
            ScoreLaw::PointMass(x) => x.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid score law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScoreLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            ScoreLaw::AbsNormal { mean } => (mean + standard_normal(rng)).abs(),
            ScoreLaw::Normal { mean } => mean + standard_normal(rng),
            ScoreLaw::PointMass(x) => x,
        }
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One score law per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    laws: Vec<ScoreLaw>,
}

impl GroupModel {
    pub fn new(laws: Vec<ScoreLaw>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidModel("no groups".into()));
        }
        laws.iter().try_for_each(ScoreLaw::validate)?;
        Ok(Self { laws })
    }

    pub fn num_groups(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[ScoreLaw] {
        &self.laws
    }

    pub fn sample_score<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        self.laws[k].sample(rng)
    }
}

/// How calibration group sizes arise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Exactly `counts[k]` points from group `k`.
    FixedCounts(Vec<usize>),
    /// `n` i.i.d. points whose groups are drawn from `p`.
    Multinomial { p: GroupSimplex, n: usize },
}

impl SamplingScheme {
    pub fn num_groups(&self) -> usize {
        match self {
            SamplingScheme::FixedCounts(c) => c.len(),
            SamplingScheme::Multinomial { p, .. } => p.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplingScheme::FixedCounts(c) if c.iter().sum::<usize>() == 0 => {
                Err(Error::InvalidScheme("fixed counts must have a positive total".into()))
            }
            SamplingScheme::Multinomial { n: 0, .. } => Err(Error::InvalidSampleSize(0)),
            _ => Ok(()),
        }
    }

    /// Training group probabilities, when the scheme has them.
    pub fn probabilities(&self) -> Option<&GroupSimplex> {
        match self {
            SamplingScheme::FixedCounts(_) => None,
            SamplingScheme::Multinomial { p, .. } => Some(p),
        }
    }

    pub fn draw_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            SamplingScheme::FixedCounts(c) => c.clone(),
            SamplingScheme::Multinomial { p, n } => multinomial(rng, *n, p.probs()),
        }
    }
}

fn check_dims(model: &GroupModel, got: usize) -> Result<()> {
    if model.num_groups() != got {
        return Err(Error::GroupCountMismatch {
            expected: model.num_groups(),
            got,
        });
    }
    Ok(())
}

/// Draws a calibration set: group counts from `scheme`, then i.i.d. scores
/// within each group.
pub fn draw_calibration<R: Rng + ?Sized>(
    model: &GroupModel,
    scheme: &SamplingScheme,
    rng: &mut R,
) -> Result<GroupedScores> {
    check_dims(model, scheme.num_groups())?;
    scheme.validate()?;
    let counts = scheme.draw_counts(rng);
    let groups = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (0..c).map(|_| model.sample_score(k, rng)).collect())
        .collect();
    GroupedScores::new(groups)
}

/// Draws a test point: group `k ~ q`, then a score from group `k`.
pub fn draw_test<R: Rng + ?Sized>(
    model: &GroupModel,
    q: &GroupSimplex,
    rng: &mut R,
) -> Result<(usize, f64)> {
    check_dims(model, q.len())?;
    let k = categorical(rng, q.probs());
    Ok((k, model.sample_score(k, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::rng::trial_rng;

    #[test]
    fn fixed_counts_point_masses() {
        let model = GroupModel::new(vec![ScoreLaw::PointMass(3.0), ScoreLaw::PointMass(7.0)]).unwrap();
        let scheme = SamplingScheme::FixedCounts(vec![1, 1]);
        let g = draw_calibration(&model, &scheme, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(g.groups(), &[vec![3.0], vec![7.0]]);
    }

    #[test]
    fn degenerate_multinomial_scheme() {
        let model = GroupModel::new(vec![ScoreLaw::Normal { mean: 0.0 }; 2]).unwrap();
        let scheme = SamplingScheme::Multinomial {
            p: GroupSimplex::new(vec![1.0, 0.0]).unwrap(),
            n: 5,
        };
        let g = draw_calibration(&model, &scheme, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(g.counts(), vec![5, 0]);
    }

    #[test]
    fn uniform_law_support() {
        let law = ScoreLaw::Uniform { lo: 0.4, hi: 0.6 };
        let mut rng = trial_rng(1, 0);
        for _ in 0..1000 {
            let x = law.sample(&mut rng);
            assert!((0.4..0.6).contains(&x));
        }
        assert!(ScoreLaw::AbsNormal { mean: -3.0 }.sample(&mut rng) >= 0.0);
    }

    #[test]
    fn test_point_group_frequencies() {
        let model = GroupModel::new(vec![ScoreLaw::PointMass(0.0); 3]).unwrap();
        let q = GroupSimplex::new(vec![0.0, 1.0, 0.0]).unwrap();
        let mut rng = trial_rng(2, 0);
        for _ in 0..100 {
            assert_eq!(draw_test(&model, &q, &mut rng).unwrap(), (1, 0.0));
        }
    }

    #[test]
    fn rejects_bad_models_and_schemes() {
        assert!(GroupModel::new(vec![]).is_err());
        assert!(GroupModel::new(vec![ScoreLaw::Uniform { lo: 1.0, hi: 1.0 }]).is_err());
        let model = GroupModel::new(vec![ScoreLaw::PointMass(0.0); 2]).unwrap();
        let mut rng = trial_rng(0, 0);
        assert!(matches!(
            draw_calibration(&model, &SamplingScheme::FixedCounts(vec![0, 0]), &mut rng),
            Err(Error::InvalidScheme(_))
        ));
        assert!(matches!(
            draw_calibration(&model, &SamplingScheme::FixedCounts(vec![1]), &mut rng),
            Err(Error::GroupCountMismatch { .. })
        ));
    }
}
