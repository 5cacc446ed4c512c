//! Property tests for the density operators: contraction inequalities for
//! the Markov and Bayes operators and the subset characterization of the
//! L1 distance.

use proptest::prelude::*;
use smc_core::ssm::{
    bayes_expansion_coefficient, bayes_update, dobrushin_coefficient, l1_distance,
    markov_propagate, DiscreteDensity, TransitionKernel,
};

fn density_strategy(m: usize) -> impl Strategy<Value = DiscreteDensity> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|w| {
        DiscreteDensity::from_unnormalized(&w).unwrap()
    })
}

fn kernel_strategy(m: usize) -> impl Strategy<Value = TransitionKernel> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), m).prop_map(|rows| {
        let rows = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                let mut r: Vec<f64> = r.into_iter().map(|x| x / s).collect();
                let total: f64 = r.iter().sum();
                let last = r.len() - 1;
                r[last] += 1.0 - total;
                r
            })
            .collect();
        TransitionKernel::new(rows).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // ||A*f - A*g||_1 <= rho(A*) ||f - g||_1
    #[test]
    fn markov_operator_contracts((m, seedless) in (2usize..=5).prop_flat_map(|m| {
        (Just(m), (density_strategy(m), density_strategy(m), kernel_strategy(m)))
    })) {
        let (f, g, k) = seedless;
        let _ = m;
        let lhs = l1_distance(
            &markov_propagate(&f, &k).unwrap(),
            &markov_propagate(&g, &k).unwrap(),
        )
        .unwrap();
        let rhs = dobrushin_coefficient(&k) * l1_distance(&f, &g).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    // ||B(f,b) - B(g,b)||_1 <= beta(f,b) ||f - g||_1
    #[test]
    fn bayes_operator_expansion((m, inputs) in (2usize..=5).prop_flat_map(|m| {
        (
            Just(m),
            (
                density_strategy(m),
                density_strategy(m),
                prop::collection::vec(0.05f64..2.0, m),
            ),
        )
    })) {
        let (f, g, b) = inputs;
        let _ = m;
        let (bf, _) = bayes_update(&f, &b).unwrap();
        let (bg, _) = bayes_update(&g, &b).unwrap();
        let lhs = l1_distance(&bf, &bg).unwrap();
        let rhs = bayes_expansion_coefficient(&f, &b).unwrap() * l1_distance(&f, &g).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    // sum |f_i - g_i| = 2 max over subsets C of |sum_{i in C} (f_i - g_i)|
    #[test]
    fn l1_equals_twice_max_subset_gap((m, pair) in (2usize..=8).prop_flat_map(|m| {
        (Just(m), (density_strategy(m), density_strategy(m)))
    })) {
        let (f, g) = pair;
        let l1 = l1_distance(&f, &g).unwrap();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << m) {
            let mut gap = 0.0;
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    gap += f.probs()[i] - g.probs()[i];
                }
            }
            best = best.max(gap.abs());
        }
        prop_assert!((l1 - 2.0 * best).abs() < 1e-12, "{l1} vs {}", 2.0 * best);
    }

    // operators preserve total mass
    #[test]
    fn mass_preservation((m, inputs) in (2usize..=5).prop_flat_map(|m| {
        (
            Just(m),
            (
                density_strategy(m),
                kernel_strategy(m),
                prop::collection::vec(0.05f64..2.0, m),
            ),
        )
    })) {
        let (f, k, b) = inputs;
        let _ = m;
        let prop_sum: f64 = markov_propagate(&f, &k).unwrap().probs().iter().sum();
        prop_assert!((prop_sum - 1.0).abs() < 1e-12);
        let (post, _) = bayes_update(&f, &b).unwrap();
        let post_sum: f64 = post.probs().iter().sum();
        prop_assert!((post_sum - 1.0).abs() < 1e-12);
    }
}
