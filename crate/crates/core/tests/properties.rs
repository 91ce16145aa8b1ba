use proptest::prelude::*;

use randsub::meantest::{confidence_set, critical_value, linspace, meets_level};
use randsub::{
    draw_bundle, InferenceConfig, MeanStatistic, PermutationBundle, PermutationPrefix, RngStream, Sample, StreamFamily,
};

fn sample_from(values: &[f64]) -> Sample {
    Sample::column(values.to_vec()).unwrap()
}

fn spread(values: &[f64]) -> bool {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() > 1e-3
}

fn small_cfg(n: usize) -> InferenceConfig {
    InferenceConfig { l: 60, s: 30, ..InferenceConfig::for_sample_size(n) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_is_affine_invariant(
        values in prop::collection::vec(-5.0f64..5.0, 12..40),
        mu in -2.0f64..2.0,
        shift in -10.0f64..10.0,
        scale in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&values));
        let n = values.len();
        let bundle = draw_bundle(&mut RngStream::new(seed, 0), n, 3, n).unwrap();
        let x = sample_from(&values);
        let moved: Vec<f64> = values.iter().map(|v| shift + scale * v).collect();
        let y = sample_from(&moved);
        let a = MeanStatistic::new(&x).unwrap().t(&[mu], &bundle).unwrap();
        let b = MeanStatistic::new(&y).unwrap().t(&[shift + scale * mu], &bundle).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn relabelling_rows_with_the_bundle_changes_nothing(
        values in prop::collection::vec(-5.0f64..5.0, 10..30),
        mu in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&values));
        let n = values.len();
        let b = 3;
        let bundle = draw_bundle(&mut RngStream::new(seed, 0), n, b, 2 * n).unwrap();
        // shuffle rows with a fixed rotation and map every prefix index through it
        let shift = 1 + (seed as usize) % (n - 1);
        let new_pos = |i: usize| (i + shift) % n;
        let mut moved = vec![0.0; n];
        for (i, v) in values.iter().enumerate() {
            moved[new_pos(i)] = *v;
        }
        let prefixes: Vec<PermutationPrefix> = bundle
            .prefixes()
            .map(|p| PermutationPrefix::new(p.iter().map(|&i| new_pos(i)).collect(), n).unwrap())
            .collect();
        let relabelled = PermutationBundle::from_prefixes(n, b, &prefixes).unwrap();
        let x = sample_from(&values);
        let y = sample_from(&moved);
        let s1 = MeanStatistic::new(&x).unwrap().s(&[mu], &bundle).unwrap();
        let s2 = MeanStatistic::new(&y).unwrap().s(&[mu], &relabelled).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-10 * (1.0 + s1.abs()));
    }

    #[test]
    fn summary_reproduces_direct_statistic(
        values in prop::collection::vec(-5.0f64..5.0, 10..30),
        mu in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&values));
        let n = values.len();
        let x = sample_from(&values);
        let stat = MeanStatistic::new(&x).unwrap();
        let bundle = draw_bundle(&mut RngStream::new(seed, 0), n, 2, n).unwrap();
        let direct = stat.s(&[mu], &bundle).unwrap();
        let summary = stat.summarize(&bundle).s(&stat, &[mu]);
        prop_assert!((direct - summary).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn critical_value_shrinks_as_alpha_grows(
        values in prop::collection::vec(-5.0f64..5.0, 20..40),
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&values));
        let x = sample_from(&values);
        let stat = MeanStatistic::new(&x).unwrap();
        let cfg = small_cfg(values.len());
        let family = StreamFamily::new(seed, 0);
        let tight = critical_value(&stat, &cfg, 0.01, family).unwrap();
        let loose = critical_value(&stat, &cfg, 0.10, family).unwrap();
        prop_assert!(tight >= loose);
        prop_assert!(loose >= 0.0);
    }
}

#[test]
fn confidence_set_members_follow_the_level_rule() {
    let values: Vec<f64> = (0..60).map(|i| ((i * 37 % 17) as f64 - 8.0) / 4.0).collect();
    let x = sample_from(&values);
    let cfg = small_cfg(values.len());
    let grid: Vec<Vec<f64>> = linspace(-2.0, 2.0, 41).into_iter().map(|m| vec![m]).collect();
    let set = confidence_set(&x, &grid, &cfg, StreamFamily::new(3, 0)).unwrap();
    for (q, member) in set.curve.values.iter().zip(&set.members) {
        assert_eq!(*member, meets_level(*q, cfg.alpha));
        assert!((0.0..=1.0).contains(q));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = set.bounds().expect("non-empty set");
    assert!(lo <= mean && mean <= hi, "{lo} {mean} {hi}");
}

#[test]
fn same_family_same_answer() {
    let values: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
    let x = sample_from(&values);
    let cfg = small_cfg(values.len());
    let a = randsub::mean_test(&x, &[0.1], &cfg, StreamFamily::new(9, 4)).unwrap();
    let b = randsub::mean_test(&x, &[0.1], &cfg, StreamFamily::new(9, 4)).unwrap();
    assert_eq!(a, b);
}
