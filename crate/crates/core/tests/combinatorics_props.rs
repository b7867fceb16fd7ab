use std::collections::HashSet;

use num_traits::ToPrimitive;
use proptest::prelude::*;
use purify_core::combinatorics::{
    asymptotic_binom_ratio, binom_ratio, enumerate_codewords, herald_prob_bob, log2_binomial, multiset_dim,
    resource_norm_s, resource_norm_s_closed_form, CodeParams,
};

proptest! {
    #[test]
    fn codewords_match_dimension(k in 0u32..12, m in 1u32..8) {
        let p = CodeParams::new(k, m).unwrap();
        let d = multiset_dim(p).to_u64().unwrap();
        prop_assume!(d <= 10_000);
        let words = enumerate_codewords(p).unwrap();
        prop_assert_eq!(words.len() as u64, d);
        let distinct: HashSet<_> = words.iter().map(|w| w.0.clone()).collect();
        prop_assert_eq!(distinct.len(), words.len());
        for w in &words {
            prop_assert_eq!(w.0.len(), m as usize);
            prop_assert_eq!(w.total(), k as u64);
        }
        prop_assert!(words.windows(2).all(|p| p[0].0 > p[1].0));
    }

    #[test]
    fn bob_distribution_normalized(k in 0u32..=50, ei in 0usize..5) {
        let eta = [0.0, 0.25, 0.5, 0.75, 1.0][ei];
        let total: f64 = (0..=k).map(|j| herald_prob_bob(k, j, eta).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
    }

    #[test]
    fn log_binomial_matches_exact(n in 0u64..200, k in 0u64..200) {
        prop_assume!(k <= n);
        let exact = purify_core::combinatorics::big_log2(&purify_core::combinatorics::binomial(n, k));
        prop_assert!((log2_binomial(n, k) - exact).abs() <= 1e-9 * exact.max(1.0));
    }
}

#[test]
fn resource_norm_closed_forms() {
    for k in 1..=4 {
        for m in 1..=8 {
            let p = CodeParams::new(k, m).unwrap();
            assert_eq!(resource_norm_s(p).unwrap(), resource_norm_s_closed_form(p).unwrap(), "k={k} m={m}");
        }
    }
}

#[test]
fn binomial_moments() {
    let (k, eta) = (500u32, 0.3f64);
    for n in 1..=3 {
        let moment: f64 = (0..=k).map(|j| herald_prob_bob(k, j, eta).unwrap() * (j as f64 / k as f64).powi(n)).sum();
        let target = eta.powi(n);
        assert!((moment / target - 1.0).abs() < 0.02, "n={n}: {moment} vs {target}");
    }
}

#[test]
fn binom_ratio_converges() {
    for (frac, m) in [(0.3, 3u32), (0.5, 2), (0.1, 5)] {
        let errors: Vec<f64> = [100u32, 1000, 10_000]
            .iter()
            .map(|&k| {
                let j = (frac * k as f64) as u32;
                let exact = binom_ratio(k, j, m).unwrap();
                let approx = asymptotic_binom_ratio(k, j, m).unwrap();
                (exact / approx - 1.0).abs()
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[2] < 1e-2);
    }
}
