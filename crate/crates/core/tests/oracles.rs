//! Property tests against independent oracles.

mod support;

use nnasp_core::program::{double_evaluate_check, most_appropriate_class, Evaluator};
use nnasp_core::tree::{root_split, TreeData, TreeParams};
use proptest::prelude::*;
use rand::Rng;

use support::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_scalar_loops(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, false);
        let x: Vec<f64> = (0..model.input_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fast = model.forward(&x).unwrap();
        let slow = scalar_forward(&model, &x);
        for (a, b) in fast.activations.iter().flatten().zip(slow.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, false);
        let out = model.output_layer().width();
        let n = rng.gen_range(1..=3);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..model.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| (0..out).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Some(err) = gradient_check(&model, &xs, &ys, 1e-5) {
            prop_assert!(err <= 1e-4, "relative error {err}");
        }
    }

    #[test]
    fn root_split_matches_exhaustive_search(
        rows in (1usize..=4).prop_flat_map(|w| prop::collection::vec(prop::collection::vec(0u8..4, w), 1..=8)),
        labels_seed in any::<u64>(),
        classes in 2usize..=3,
        min_leaf in 1usize..=3,
    ) {
        let mut rng = rng(labels_seed);
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        let labels: Vec<usize> = rows.iter().map(|_| rng.gen_range(0..classes)).collect();
        let names = (0..rows[0].len()).map(|i| format!("a{i}")).collect();
        let data = TreeData::from_rows(names, &rows, labels.clone(), classes).unwrap();
        let params = TreeParams { min_leaf, max_depth: 10 };
        let ours = root_split(&data, &params).map(|(a, t, _)| (a, t));
        prop_assert_eq!(ours, brute_force_split(&rows, &labels, classes, min_leaf));
    }

    #[test]
    fn predict_matches_ordering_oracle(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let answer = random_answer_set(&mut rng);
        let fallback = rng.gen_range(0..3);
        let p = most_appropriate_class(&answer, fallback);
        prop_assert_eq!((p.class, p.abstained), ordering_oracle(&answer, fallback), "{:?}", describe(&answer));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn extracted_programs_are_confluent_layered_and_bounded(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (ex, ds) = random_extraction(&mut rng);
        prop_assert!(ex.program.check_layering().is_ok(), "{:?}", ex.program.check_layering());
        prop_assert!(size_bound_holds(&ex), "{:?}", ex.stats);
        prop_assert!(Evaluator::new(&ex.program).is_ok());
        for inst in ds.instances().iter().take(4) {
            prop_assert!(double_evaluate_check(&ex.program, &inst.features).unwrap());
        }
        let probe: Vec<f64> = (0..ds.feature_count()).map(|_| rng.gen_range(-0.5..1.5)).collect();
        prop_assert!(double_evaluate_check(&ex.program, &probe).unwrap());
    }
}
