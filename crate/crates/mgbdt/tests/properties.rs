//! Property tests over randomized inputs: partition laws for splits and
//! folds, value-based tie-breaking in tree growth, and softmax basics.

use mgbdt::data::{gen_circles, kfold, split};
use mgbdt::layers::{argmax, softmax};
use mgbdt::{Matrix, RegressionTree, TreeGrowthParams};
use proptest::prelude::*;

fn class_dataset(per_class: Vec<usize>) -> mgbdt::data::Dataset {
    // Reuse the circles generator for feature content, then overwrite labels
    // with the requested distribution.
    let n: usize = per_class.iter().sum();
    let mut ds = gen_circles(n.max(2), 0.1, 7).unwrap();
    let mut labels = Vec::with_capacity(n);
    for (c, &count) in per_class.iter().enumerate() {
        labels.extend(std::iter::repeat(c).take(count));
    }
    ds.labels = mgbdt::data::Labels::Classes(labels);
    ds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kfold_partitions_and_balances(
        per_class in proptest::collection::vec(2usize..20, 2..6),
        k in 2usize..8,
        seed in 0u64..1000,
    ) {
        let ds = class_dataset(per_class.clone());
        prop_assume!(k <= ds.rows());
        let plan = kfold(&ds, k, seed).unwrap();
        // partition: every row tested exactly once across folds
        let mut tested = vec![0usize; ds.rows()];
        for fold in 0..k {
            let (train, test) = plan.fold_indices(fold);
            prop_assert_eq!(train.len() + test.len(), ds.rows());
            for r in test {
                tested[r] += 1;
            }
        }
        prop_assert!(tested.iter().all(|&t| t == 1));
        // global balance within one row
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        // per-class spread within one row
        let labels = ds.class_labels().unwrap();
        for class in 0..per_class.len() {
            let mut counts = vec![0usize; k];
            for (r, &l) in labels.iter().enumerate() {
                if l == class {
                    counts[plan.assignments[r]] += 1;
                }
            }
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn split_is_a_partition(
        per_class in proptest::collection::vec(2usize..30, 2..4),
        fraction in 0.1f64..0.9,
        seed in 0u64..1000,
    ) {
        let ds = class_dataset(per_class);
        let (train, test) = split(&ds, fraction, seed).unwrap();
        prop_assert_eq!(train.rows() + test.rows(), ds.rows());
        // disjoint and exhaustive: x0 values are unique per row in circles
        let mut seen: Vec<u64> = train
            .features
            .data()
            .iter()
            .chain(test.features.data())
            .map(|v| v.to_bits())
            .collect();
        let mut all: Vec<u64> = ds.features.data().iter().map(|v| v.to_bits()).collect();
        seen.sort_unstable();
        all.sort_unstable();
        prop_assert_eq!(seen, all);
        // deterministic in the seed
        let again = split(&ds, fraction, seed).unwrap();
        prop_assert_eq!(again.0, train);
    }

    #[test]
    fn tree_fit_ignores_row_order(
        values in proptest::collection::vec((-4i32..=4, -8i32..=8), 2..40),
        seed in 0u64..100,
    ) {
        // Integer residuals make node sums exact under any summation order,
        // so tie-breaking (values, not row order) is all that's left.
        let n = values.len();
        let features = Matrix::from_vec(n, 1, values.iter().map(|&(x, _)| x as f64).collect());
        let residuals: Vec<f64> = values.iter().map(|&(_, r)| r as f64).collect();
        let tree = RegressionTree::fit(&features, &residuals, &TreeGrowthParams::default()).unwrap();

        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed.wrapping_add(1);
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permuted_features = features.select_rows(&perm);
        let permuted_residuals: Vec<f64> = perm.iter().map(|&i| residuals[i]).collect();
        let permuted_tree =
            RegressionTree::fit(&permuted_features, &permuted_residuals, &TreeGrowthParams::default())
                .unwrap();
        prop_assert_eq!(tree, permuted_tree);
    }

    #[test]
    fn softmax_rows_normalize_and_argmax_is_shift_invariant(
        logits in proptest::collection::vec(-30.0f64..30.0, 2..8),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        prop_assert_eq!(argmax(&shifted), argmax(&logits));
    }
}
