use gwcp_core::bounds::{
    corollary_closed_bound, thm1_bound, thm2_closed_bound, tight_example_coverage,
};
use gwcp_core::conformal::{GroupSimplex, WeightSource};
use gwcp_core::report::to_csv;
use gwcp_core::simulate::experiments::{
    bound_regimes, figure1_experiment, figure3_experiment, figure5_experiment, staircase_model,
    tight_example_setup, SizeRegime,
};
use gwcp_core::simulate::rng::trial_rng;
use gwcp_core::simulate::{draw_test, run_coverage, GroupModel, Method, SamplingScheme, ScoreLaw};

#[test]
fn test_group_frequencies_match_q() {
    let model = GroupModel::new(vec![ScoreLaw::PointMass(1.0); 4]).unwrap();
    let q = GroupSimplex::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let draws = 100_000;
    let mut counts = [0usize; 4];
    let mut rng = trial_rng(0, 0);
    for _ in 0..draws {
        let (k, s) = draw_test(&model, &q, &mut rng).unwrap();
        assert_eq!(s, 1.0);
        counts[k] += 1;
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = q.get(k);
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd, "group {k}: {c}");
    }
}

#[test]
fn all_small_coverage_sits_between_bound_and_target() {
    let model = staircase_model(5).unwrap();
    let counts = SizeRegime::AllSmall.counts(5);
    let q = GroupSimplex::uniform(5).unwrap();
    let scheme = SamplingScheme::FixedCounts(counts.clone());
    let s = run_coverage(&model, &scheme, &q, 0.2, Method::Gwcp, 2000, 0).unwrap();
    let bound = thm1_bound(&q, &counts, 0.2).unwrap().value;
    assert!((bound - 0.6).abs() < 1e-12);
    assert!(s.mean_coverage >= bound - s.ci_half_width, "{s:?}");
    assert!((0.6..=0.8).contains(&s.mean_coverage), "{s:?}");
}

#[test]
fn tight_example_within_two_ci() {
    let (model, scheme) = tight_example_setup(10, 1, 100, 0.1).unwrap();
    let q = GroupSimplex::uniform(10).unwrap();
    let s = run_coverage(&model, &scheme, &q, 0.1, Method::Gwcp, 4000, 3).unwrap();
    let target = tight_example_coverage(10, 1, 0.1).unwrap();
    assert!((s.mean_coverage - target).abs() <= 2.0 * s.ci_half_width, "{s:?}");
}

#[test]
fn multinomial_gwcp_respects_closed_form_bound() {
    let model = GroupModel::new(
        (0..10).map(|k| ScoreLaw::Normal { mean: k as f64 }).collect(),
    )
    .unwrap();
    let u = GroupSimplex::uniform(10).unwrap();
    let scheme = SamplingScheme::Multinomial { p: u.clone(), n: 1000 };
    let s = run_coverage(&model, &scheme, &u, 0.1, Method::Gwcp, 1000, 0).unwrap();
    let bound = thm2_closed_bound(&u, &u, 1000, 0.1).unwrap().value;
    assert!(s.mean_coverage >= bound - 3.0 * s.ci_half_width, "{s:?}");
}

#[test]
fn unobserved_variant_and_wcp_plus_run() {
    let model = staircase_model(10).unwrap();
    let u = GroupSimplex::uniform(10).unwrap();
    let scheme = SamplingScheme::Multinomial { p: u.clone(), n: 20 };
    for method in [Method::GwcpUnobserved, Method::WcpPlus] {
        let s = run_coverage(&model, &scheme, &u, 0.1, method, 500, 0).unwrap();
        assert!(s.mean_coverage > 0.5 && s.mean_coverage <= 1.0, "{method:?}: {s:?}");
    }
}

#[test]
fn corrected_gwcp_reaches_target() {
    let model = staircase_model(10).unwrap();
    let q = GroupSimplex::uniform(10).unwrap();
    let scheme = SamplingScheme::FixedCounts(SizeRegime::AllSmall.counts(10));
    let s = run_coverage(&model, &scheme, &q, 0.2, Method::CorrectedGwcp, 2000, 0).unwrap();
    assert!(s.mean_coverage >= 0.8 - 3.0 * s.ci_half_width, "{s:?}");
}

#[test]
fn bound_figure_shapes() {
    let t = figure1_experiment(0, 50).unwrap();
    assert_eq!(t.rows.len(), 3 * 91);
    assert!(t.rows.iter().all(|r| r.value() <= 0.9));
    let k10: Vec<f64> = t.series("K=10", "lei").map(|r| r.value()).collect();
    assert!(k10.last().unwrap() > k10.first().unwrap());
    let params: Vec<usize> = t.series("K=n/10", "lei").map(|r| r.param).collect();
    assert!(params.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn corollary_dominates_lei_in_every_regime() {
    let t = figure3_experiment(0, 100).unwrap();
    for (regime, _) in bound_regimes() {
        for lei in t.series(regime, "lei") {
            let cor = t.find(regime, lei.param, "corollary").unwrap();
            assert!(cor.value() >= lei.value(), "{regime} n={}", lei.param);
            assert!(cor.value() <= 0.9);
        }
    }
}

#[test]
fn closed_bounds_coincide_for_uniform_groups() {
    for (k, n) in [(5, 500), (10, 1000), (20, 2000)] {
        let u = GroupSimplex::uniform(k).unwrap();
        assert_eq!(
            corollary_closed_bound(&u, n, 0.1).unwrap().value,
            thm2_closed_bound(&u, &u, n, 0.1).unwrap().value
        );
    }
}

#[test]
fn thm1_depends_only_on_smallest_group_for_uniform_q() {
    let q = GroupSimplex::uniform(4).unwrap();
    let a = thm1_bound(&q, &[3, 7, 50, 9], 0.1).unwrap().value;
    let b = thm1_bound(&q, &[3, 3, 3, 3], 0.1).unwrap().value;
    let c = thm1_bound(&q, &[0, 3, 100, 0], 0.1).unwrap().value;
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a < 0.9);
}

#[test]
fn weight_source_figure_is_reproducible() {
    let a = figure5_experiment(11, 200).unwrap();
    let b = figure5_experiment(11, 200).unwrap();
    assert_eq!(to_csv(&a), to_csv(&b));
    assert_eq!(a.rows.len(), 9);
    for row in &a.rows {
        assert_eq!(row.attempted_trials(), 200);
        assert!(row.trials() <= 200);
        if row.method != WeightSource::Pretraining.label() {
            assert_eq!(row.trials(), 200);
        }
    }
    let c = figure5_experiment(12, 200).unwrap();
    assert_ne!(to_csv(&a), to_csv(&c));
}
