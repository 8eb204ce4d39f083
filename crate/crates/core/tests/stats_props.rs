use mish_core::stats::{vargha_delaney_a12, wilcoxon_rank_sum, SampleSet};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..30).prop_map(f64::from), 1..25)
}

fn set(v: &[f64]) -> SampleSet {
    SampleSet::new("s", v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn a12_is_complementary(a in sample(), b in sample()) {
        let ab = vargha_delaney_a12(&set(&a), &set(&b)).a12;
        let ba = vargha_delaney_a12(&set(&b), &set(&a)).a12;
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab + ba - 1.0).abs() < 1e-12);
        prop_assert_eq!(vargha_delaney_a12(&set(&a), &set(&a)).a12, 0.5);
    }

    #[test]
    fn a12_ignores_monotone_transforms(a in sample(), b in sample()) {
        let f = |v: &[f64]| v.iter().map(|x| (x * 3.0 + 1.0).powi(3)).collect::<Vec<_>>();
        let raw = vargha_delaney_a12(&set(&a), &set(&b)).a12;
        let moved = vargha_delaney_a12(&set(&f(&a)), &set(&f(&b))).a12;
        prop_assert_eq!(raw, moved);
    }

    #[test]
    fn rank_sum_is_symmetric(a in prop::collection::vec(0i32..30, 3..25), b in prop::collection::vec(0i32..30, 3..25)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = wilcoxon_rank_sum(&set(&a), &set(&b)).unwrap();
        let ba = wilcoxon_rank_sum(&set(&b), &set(&a)).unwrap();
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }
}
