use proptest::prelude::*;

use hdtest::asymptotics::{f_w, mixture_normal_cdf, sigma2_nw, HypergeometricLaw, MomentConstants};
use hdtest::permutation::randomization_distribution;
use hdtest::{build_kernel_matrix, permutation_test, KernelFamily, KernelSpec, LabeledSample, PermutationPlan};

fn sample_strategy() -> impl Strategy<Value = (LabeledSample, KernelSpec)> {
    (2usize..7, 2usize..7, 1usize..6, 0usize..4).prop_flat_map(|(n, m, p, k)| {
        prop::collection::vec(-5.0f64..5.0, (n + m) * p).prop_map(move |data| {
            (LabeledSample::from_flat(data, n, m, p).unwrap(), KernelSpec::new(KernelFamily::ALL[k], 1.0).unwrap())
        })
    })
}

fn constants() -> impl Strategy<Value = MomentConstants> {
    (0.1f64..4.0, 0.1f64..4.0, 0.1f64..4.0, 0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0)
        .prop_map(|(a, b, c, d, e, f)| MomentConstants::new(a, b, c, d, e, f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_value_and_decision_agree((sample, spec) in sample_strategy(), seed in any::<u64>()) {
        let r = permutation_test(&sample, &spec, 0.1, &PermutationPlan::monte_carlo(60, seed)).unwrap();
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        if r.reject {
            prop_assert!(r.statistic > r.critical_value);
        }
    }

    #[test]
    fn test_is_invariant_to_order_within_groups((sample, spec) in sample_strategy(), seed in any::<u64>()) {
        let (n, m) = (sample.n(), sample.m());
        let mut rows: Vec<Vec<f64>> = sample.rows().map(|r| r.to_vec()).collect();
        rows[..n].reverse();
        rows[n..].rotate_left(1);
        let shuffled = LabeledSample::from_groups(&rows[..n], &rows[n..]).unwrap();
        prop_assert_eq!(shuffled.m(), m);
        let plan = PermutationPlan::monte_carlo(40, seed);
        let a = permutation_test(&sample, &spec, 0.05, &plan).unwrap();
        let b = permutation_test(&shuffled, &spec, 0.05, &plan).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.abs().max(1.0));
    }

    #[test]
    fn monte_carlo_histogram_counts_draws((sample, spec) in sample_strategy(), seed in any::<u64>(), s in 20usize..80) {
        let km = build_kernel_matrix(&sample, &spec).unwrap();
        let dist = randomization_distribution(&km, &PermutationPlan::monte_carlo(s, seed)).unwrap();
        prop_assert_eq!(dist.count(), s);
        prop_assert_eq!(dist.w_histogram().iter().sum::<u64>() as usize, s);
        prop_assert!(dist.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hypergeometric_law_is_a_distribution(n in 1usize..40, m in 1usize..40) {
        let law = HypergeometricLaw::new(n, m).unwrap();
        let total: f64 = law.support().map(|w| law.pmf(w)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        if n >= 2 && m >= 2 {
            let mean: f64 = law.support().map(|w| law.pmf(w) * f_w(n, m, w).unwrap()).sum();
            prop_assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn limit_variance_is_nonnegative_and_symmetric(n in 2usize..25, m in 2usize..25, c in constants(), k in 0usize..4) {
        let spec = KernelSpec::new(KernelFamily::ALL[k], 1.0).unwrap();
        for w in 0..=n.min(m) {
            let s = sigma2_nw(n, m, w, &c, &spec).unwrap();
            prop_assert!(s >= 0.0);
            // relabelling the groups swaps n with m and x with y
            let t = sigma2_nw(m, n, w, &c.swapped(), &spec).unwrap();
            prop_assert!((s - t).abs() <= 1e-10 * s.max(1e-300).max(t));
        }
    }

    #[test]
    fn mixture_cdf_is_monotone(n in 2usize..12, m in 2usize..12, c in constants(), a in -3.0f64..3.0, d in 0.0f64..2.0) {
        let spec = KernelSpec::l2();
        let lo = mixture_normal_cdf(a, n, m, &c, &spec).unwrap();
        let hi = mixture_normal_cdf(a + d, n, m, &c, &spec).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-12);
    }
}
