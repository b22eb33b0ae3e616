//! The five figure experiments.
//!
//! Every grid point gets its own seed derived from the user seed and the
//! point's labels, so a single point can be recomputed in isolation. Points
//! that compare methods on the same data share a seed: the two bound curves
//! of the comparison figure see the same multinomial counts, the plain and
//! corrected fixed-size figures see the same calibration sets, and the three
//! weight sources see the same calibration and test draws.

use serde::{Deserialize, Serialize};

use super::coverage::{run_coverage, CoverageSummary, Method, Z_95};
use super::model::{GroupModel, SamplingScheme, ScoreLaw};
use super::rng::{derive_seed, label_tag};
use crate::bounds::{corollary_empirical_bound, lei_bound_empirical, BoundEstimate};
use crate::conformal::{GroupSimplex, WeightSource};
use crate::Result;

pub const DEFAULT_BOUND_TRIALS: usize = 100;
pub const DEFAULT_COVERAGE_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 5] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.id() == id)
    }

    pub fn default_trials(self) -> usize {
        match self {
            Figure::Fig1 | Figure::Fig3 => DEFAULT_BOUND_TRIALS,
            _ => DEFAULT_COVERAGE_TRIALS,
        }
    }

    /// Runs the experiment with `trials` per grid point, or the default.
    pub fn run(self, seed: u64, trials: Option<usize>) -> Result<ExperimentTable> {
        let trials = trials.unwrap_or(self.default_trials());
        match self {
            Figure::Fig1 => figure1_experiment(seed, trials),
            Figure::Fig2 => figure2_experiment(seed, trials),
            Figure::Fig3 => figure3_experiment(seed, trials),
            Figure::Fig4 => figure4_experiment(seed, trials),
            Figure::Fig5 => figure5_experiment(seed, trials),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowValue {
    Coverage(CoverageSummary),
    Bound(BoundEstimate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub regime: String,
    pub param: usize,
    pub method: String,
    pub result: RowValue,
}

impl ExperimentRow {
    pub fn value(&self) -> f64 {
        match &self.result {
            RowValue::Coverage(c) => c.mean_coverage,
            RowValue::Bound(b) => b.value,
        }
    }

    /// 95% half-width: binomial for coverage, `1.96` standard errors for
    /// Monte Carlo bounds, zero for closed forms.
    pub fn ci_half_width(&self) -> f64 {
        match &self.result {
            RowValue::Coverage(c) => c.ci_half_width,
            RowValue::Bound(b) => Z_95 * b.std_error,
        }
    }

    /// Effective trial count.
    pub fn trials(&self) -> usize {
        match &self.result {
            RowValue::Coverage(c) => c.trials,
            RowValue::Bound(b) => b.trials,
        }
    }

    pub fn attempted_trials(&self) -> usize {
        match &self.result {
            RowValue::Coverage(c) => c.attempted_trials,
            RowValue::Bound(b) => b.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    /// Builds a table with rows ordered by regime, then param, then method.
    pub fn new(experiment: &str, seed: u64, mut rows: Vec<ExperimentRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.regime, a.param, &a.method).cmp(&(&b.regime, b.param, &b.method))
        });
        Self {
            experiment: experiment.to_string(),
            seed,
            rows,
        }
    }

    pub fn find(&self, regime: &str, param: usize, method: &str) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.regime == regime && r.param == param && r.method == method)
    }

    /// Rows of one (regime, method) series in param order.
    pub fn series<'a>(&'a self, regime: &'a str, method: &'a str) -> impl Iterator<Item = &'a ExperimentRow> {
        self.rows
            .iter()
            .filter(move |r| r.regime == regime && r.method == method)
    }
}

fn point_seed(seed: u64, family: &str, regime: &str, param: usize) -> u64 {
    derive_seed(seed, &[label_tag(family), label_tag(regime), param as u64])
}

// Bound comparison: n = 100..1000, p = q uniform, alpha = 0.1.

pub const BOUND_ALPHA: f64 = 0.1;

pub fn bound_grid() -> impl Iterator<Item = usize> {
    (100..=1000).step_by(10)
}

/// Group-count regimes of the bound comparison, as `(label, K(n))`.
pub fn bound_regimes() -> [(&'static str, fn(usize) -> usize); 3] {
    [
        ("K=10", |_| 10),
        ("K=floor(sqrt(n))", |n| (n as f64).sqrt().floor() as usize),
        ("K=n/10", |n| n / 10),
    ]
}

fn bound_rows(seed: u64, trials: usize, with_corollary: bool) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::new();
    for (regime, groups) in bound_regimes() {
        for n in bound_grid() {
            let u = GroupSimplex::uniform(groups(n))?;
            let s = point_seed(seed, "bounds", regime, n);
            let mut push = |method: &str, b: BoundEstimate| {
                rows.push(ExperimentRow {
                    regime: regime.to_string(),
                    param: n,
                    method: method.to_string(),
                    result: RowValue::Bound(b),
                })
            };
            push("lei", lei_bound_empirical(&u, &u, n, BOUND_ALPHA, trials, s)?);
            if with_corollary {
                push("corollary", corollary_empirical_bound(&u, n, BOUND_ALPHA, trials, s)?);
            }
        }
    }
    Ok(rows)
}

/// Weight-error bound under estimated group probabilities, per regime and n.
pub fn figure1_experiment(seed: u64, trials: usize) -> Result<ExperimentTable> {
    Ok(ExperimentTable::new("fig1", seed, bound_rows(seed, trials, false)?))
}

/// The weight-error bound next to the unobserved-groups bound.
pub fn figure3_experiment(seed: u64, trials: usize) -> Result<ExperimentTable> {
    Ok(ExperimentTable::new("fig3", seed, bound_rows(seed, trials, true)?))
}

// Fixed group sizes: K = 5..50, alpha = 0.2, group k uniform on [k/K, (k+1)/K).

pub const FIXED_ALPHA: f64 = 0.2;
pub const LARGE_GROUP: usize = 100;

pub fn fixed_grid() -> impl Iterator<Item = usize> {
    (5..=50).step_by(5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeRegime {
    AllSmall,
    OneSmall,
    NoneSmall,
}

impl SizeRegime {
    pub const ALL: [SizeRegime; 3] = [SizeRegime::AllSmall, SizeRegime::OneSmall, SizeRegime::NoneSmall];

    pub fn label(self) -> &'static str {
        match self {
            SizeRegime::AllSmall => "AllSmall",
            SizeRegime::OneSmall => "OneSmall",
            SizeRegime::NoneSmall => "NoneSmall",
        }
    }

    /// Group sizes for `K` groups. In OneSmall the group with 0-based index
    /// `0.8 K` (the `(0.8 K + 1)`-th group) has a single point.
    pub fn counts(self, num_groups: usize) -> Vec<usize> {
        match self {
            SizeRegime::AllSmall => vec![1; num_groups],
            SizeRegime::NoneSmall => vec![LARGE_GROUP; num_groups],
            SizeRegime::OneSmall => {
                let mut c = vec![LARGE_GROUP; num_groups];
                c[num_groups * 4 / 5] = 1;
                c
            }
        }
    }
}

/// Group `k` scores uniform on `[k/K, (k+1)/K)`.
pub fn staircase_model(num_groups: usize) -> Result<GroupModel> {
    let k = num_groups as f64;
    GroupModel::new(
        (0..num_groups)
            .map(|i| ScoreLaw::Uniform {
                lo: i as f64 / k,
                hi: (i + 1) as f64 / k,
            })
            .collect(),
    )
}

fn fixed_rows(seed: u64, trials: usize, method: Method) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::new();
    for regime in SizeRegime::ALL {
        for k in fixed_grid() {
            let model = staircase_model(k)?;
            let scheme = SamplingScheme::FixedCounts(regime.counts(k));
            let q = GroupSimplex::uniform(k)?;
            let s = point_seed(seed, "fixed", regime.label(), k);
            let summary = run_coverage(&model, &scheme, &q, FIXED_ALPHA, method, trials, s)?;
            rows.push(ExperimentRow {
                regime: regime.label().to_string(),
                param: k,
                method: method.label().to_string(),
                result: RowValue::Coverage(summary),
            });
        }
    }
    Ok(rows)
}

/// GWCP coverage under fixed group sizes.
pub fn figure2_experiment(seed: u64, trials: usize) -> Result<ExperimentTable> {
    Ok(ExperimentTable::new("fig2", seed, fixed_rows(seed, trials, Method::Gwcp)?))
}

/// Corrected GWCP coverage under fixed group sizes.
pub fn figure4_experiment(seed: u64, trials: usize) -> Result<ExperimentTable> {
    Ok(ExperimentTable::new(
        "fig4",
        seed,
        fixed_rows(seed, trials, Method::CorrectedGwcp)?,
    ))
}

// Weight sources: K = 5, q uniform, n = n* = 100, scores |N(theta_k, 1)|.

pub const SOURCE_ALPHA: f64 = 0.2;
pub const SOURCE_SAMPLE_SIZE: usize = 100;
pub const SOURCE_PRETRAIN_SIZE: usize = 100;

/// `(label, p, theta)` for the three weight-source settings.
pub fn source_settings() -> [(&'static str, [f64; 5], [f64; 5]); 3] {
    let uniform = [0.2; 5];
    let skewed = [0.4, 0.25, 0.2, 0.1, 0.05];
    let down = [20.0, 15.0, 10.0, 5.0, 0.0];
    let up = [0.0, 5.0, 10.0, 15.0, 20.0];
    [
        ("setting1", uniform, down),
        ("setting2", skewed, down),
        ("setting3", skewed, up),
    ]
}

/// Coverage of the weighted quantile with weights estimated from
/// pretraining data, from the calibration data, or set to the truth.
pub fn figure5_experiment(seed: u64, trials: usize) -> Result<ExperimentTable> {
    let mut rows = Vec::new();
    let q = GroupSimplex::uniform(5)?;
    for (label, p, theta) in source_settings() {
        let model = GroupModel::new(theta.iter().map(|&mean| ScoreLaw::AbsNormal { mean }).collect())?;
        let scheme = SamplingScheme::Multinomial {
            p: GroupSimplex::new(p.to_vec())?,
            n: SOURCE_SAMPLE_SIZE,
        };
        let s = point_seed(seed, "sources", label, SOURCE_SAMPLE_SIZE);
        for source in WeightSource::ALL {
            let method = Method::Estimated {
                source,
                pretrain_size: SOURCE_PRETRAIN_SIZE,
            };
            let summary = run_coverage(&model, &scheme, &q, SOURCE_ALPHA, method, trials, s)?;
            rows.push(ExperimentRow {
                regime: label.to_string(),
                param: SOURCE_SAMPLE_SIZE,
                method: method.label().to_string(),
                result: RowValue::Coverage(summary),
            });
        }
    }
    Ok(ExperimentTable::new("fig5", seed, rows))
}

/// The construction on which the fixed-size bound is attained: `K` groups
/// with target `q` uniform, group 0 uniform on `[0, 1)` with `n1` points,
/// groups `1..(1 - alpha) K` uniform on `[-1, 0)`, the rest uniform on
/// `[1, 2)`, every other group with `others` points.
pub fn tight_example_setup(
    num_groups: usize,
    n1: usize,
    others: usize,
    alpha: f64,
) -> Result<(GroupModel, SamplingScheme)> {
    crate::bounds::tight_example_coverage(num_groups, n1, alpha)?;
    let covered = ((1.0 - alpha) * num_groups as f64).round() as usize;
    let laws = (0..num_groups)
        .map(|k| match k {
            0 => ScoreLaw::Uniform { lo: 0.0, hi: 1.0 },
            k if k < covered => ScoreLaw::Uniform { lo: -1.0, hi: 0.0 },
            _ => ScoreLaw::Uniform { lo: 1.0, hi: 2.0 },
        })
        .collect();
    let mut counts = vec![others; num_groups];
    counts[0] = n1;
    Ok((GroupModel::new(laws)?, SamplingScheme::FixedCounts(counts)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_small_index() {
        assert_eq!(SizeRegime::OneSmall.counts(5), vec![100, 100, 100, 100, 1]);
        let c = SizeRegime::OneSmall.counts(10);
        assert_eq!(c[8], 1);
        assert_eq!(c.iter().filter(|&&x| x == 1).count(), 1);
    }

    #[test]
    fn staircase_laws() {
        let m = staircase_model(5).unwrap();
        assert_eq!(m.laws()[1], ScoreLaw::Uniform { lo: 0.2, hi: 0.4 });
    }

    #[test]
    fn regimes_and_grids() {
        let r = bound_regimes();
        assert_eq!((r[0].1(500), r[1].1(500), r[2].1(500)), (10, 22, 50));
        assert_eq!(bound_grid().count(), 91);
        assert_eq!(fixed_grid().collect::<Vec<_>>(), vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
    }

    #[test]
    fn rows_are_sorted() {
        let t = ExperimentTable::new(
            "x",
            0,
            ["b", "a", "a"]
                .iter()
                .zip([1, 10, 2])
                .map(|(r, p)| ExperimentRow {
                    regime: r.to_string(),
                    param: p,
                    method: "m".into(),
                    result: RowValue::Bound(BoundEstimate::closed(0.5)),
                })
                .collect(),
        );
        let keys: Vec<_> = t.rows.iter().map(|r| (r.regime.as_str(), r.param)).collect();
        assert_eq!(keys, vec![("a", 2), ("a", 10), ("b", 1)]);
    }

    #[test]
    fn tight_setup_layout() {
        let (model, scheme) = tight_example_setup(10, 1, 100, 0.1).unwrap();
        assert_eq!(model.laws()[0], ScoreLaw::Uniform { lo: 0.0, hi: 1.0 });
        assert_eq!(model.laws()[8], ScoreLaw::Uniform { lo: -1.0, hi: 0.0 });
        assert_eq!(model.laws()[9], ScoreLaw::Uniform { lo: 1.0, hi: 2.0 });
        assert_eq!(scheme.draw_counts(&mut crate::simulate::rng::trial_rng(0, 0))[..2], [1, 100]);
    }

    #[test]
    fn figure_ids_round_trip() {
        for f in Figure::ALL {
            assert_eq!(Figure::parse(f.id()), Some(f));
        }
        assert_eq!(Figure::parse("fig6"), None);
    }
}
