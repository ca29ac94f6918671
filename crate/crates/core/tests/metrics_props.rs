mod support;

use proptest::prelude::*;
use support::{close, oracle, random_fixture, FixtureShape};
use synthqa::metrics::{evaluate, EvalOptions, NormalizationMode};

fn shape(missing_rate: f64) -> FixtureShape {
    FixtureShape {
        max_cols: 5,
        max_levels: 7,
        max_rows: 120,
        numeric_share: 0.4,
        missing_rate,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_matches_oracle(seed in any::<u64>(), missing in 0.0..0.6f64) {
        let f = random_fixture(seed, &shape(missing));
        let o = oracle(&f);
        let r = evaluate(&f.real, &f.synth, "d", "m", EvalOptions::default()).unwrap();
        prop_assert!(close(r.mae1, o.mae1(), 1e-12));
        prop_assert!(close(r.mae2, o.mae2(), 1e-12));
        prop_assert!(close(r.coverage2, o.coverage2(), 1e-12));
        prop_assert!(close(r.invented2, o.invented2(), 1e-12));
        prop_assert!(close(r.hist_iou1, o.hist_iou1(), 1e-12));
        prop_assert!(close(r.hist_iou2, o.hist_iou2(), 1e-12));
        prop_assert!(close(r.jsd2, o.jsd2(), 1e-12));
    }

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>()) {
        let f = random_fixture(seed, &shape(0.1));
        let r = evaluate(&f.real, &f.synth, "d", "m", EvalOptions::default()).unwrap();
        for d in &r.details {
            for v in [d.mae_point_mean, d.coverage, d.invented, d.hist_iou, d.jsd].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v), "{:?}", d);
            }
            if let Some(l1) = d.mae_variable_l1 {
                prop_assert!((0.0..=2.0 + 1e-12).contains(&l1));
            }
        }
    }

    #[test]
    fn symmetric_metrics(seed in any::<u64>()) {
        let f = random_fixture(seed, &shape(0.1));
        let ab = evaluate(&f.real, &f.synth, "d", "m", EvalOptions::default()).unwrap();
        let ba = evaluate(&f.synth, &f.real, "d", "m", EvalOptions::default()).unwrap();
        // Categorical tables do not depend on which side is real.
        for (x, y) in ab.details.iter().zip(&ba.details).filter(|(x, _)| x.kind == synthqa::dataset::ColumnKind::Categorical) {
            prop_assert!(close(x.mae_point_mean, y.mae_point_mean, 1e-12));
            prop_assert!(close(x.jsd, y.jsd, 1e-12));
        }
    }

    #[test]
    fn mode_only_changes_mae(seed in any::<u64>()) {
        let f = random_fixture(seed, &shape(0.1));
        let pm = evaluate(&f.real, &f.synth, "d", "m", EvalOptions::default()).unwrap();
        let l1 = evaluate(&f.real, &f.synth, "d", "m", EvalOptions { mode: NormalizationMode::VariableL1, bins: 10 }).unwrap();
        prop_assert_eq!(pm.mae_by_mode, l1.mae_by_mode);
        prop_assert_eq!(l1.mae2, pm.mae_by_mode.variable_l1.mae2);
        prop_assert_eq!(&pm.details, &l1.details);
    }
}

#[test]
fn wasserstein_matches_integral_oracle() {
    let mut r = support::rng(5);
    for _ in 0..200 {
        use rand::Rng;
        let a: Vec<f64> = (0..r.random_range(1..40)).map(|_| r.random_range(-3..3) as f64 * 0.5).collect();
        let b: Vec<f64> = (0..r.random_range(1..40)).map(|_| r.random_range(-3..6) as f64 * 0.25).collect();
        let got = synthqa::metrics::wasserstein1d(&a, &b).unwrap();
        let want = support::oracle_wasserstein(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
