use nvregret::policies::{
    action_werm, p_policy, poisson_binomial_tail, weighted_threshold_bracket, weighted_threshold_tail,
};
use nvregret::regret::{expected_regret_bernoulli, slope_bound, BranchObjective};
use nvregret::{
    BernoulliProfile, Branch, DissimilarityProfile, MixtureEntry, PPoint, Policy, PolicySpec, WeightedMode,
};
use proptest::prelude::*;

fn spec_strategy(n: usize) -> impl Strategy<Value = PolicySpec> {
    prop_oneof![
        Just(PolicySpec::erm(n)),
        prop::collection::vec(0.05f64..3.0, n).prop_map(|weights| PolicySpec::WeightedErm { weights }),
        (1..=n).prop_map(move |k| PolicySpec::nearest_neighbors(k, n)),
        (1..=n)
            .prop_flat_map(|k| (Just(k), 0..=k + 1))
            .prop_map(|(k, r)| PolicySpec::prefix_order_statistic(k, r)),
        (1..=n)
            .prop_flat_map(|k| (Just(k), prop::collection::vec(0.0f64..1.0, k + 2)))
            .prop_filter("some positive weight", |(_, raw)| raw.iter().sum::<f64>() > 1e-3)
            .prop_map(|(k, raw)| {
                let s: f64 = raw.iter().sum();
                let lambdas: Vec<f64> = raw.iter().map(|v| v / s).collect();
                PolicySpec::prefix_mixture(k, &lambdas)
            }),
    ]
}

fn policy_and_h() -> impl Strategy<Value = (Policy, Vec<f64>, f64)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            spec_strategy(n).prop_map(move |s| Policy::new(s, n).unwrap()),
            prop::collection::vec(0.0f64..=1.0, n),
            0.05f64..0.95,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn p_in_unit_interval_and_monotone((p, h, q) in policy_and_h(), i in 0usize..8, bump in 0.0f64..0.5) {
        let base = p_policy(&p, &PPoint::new(h.clone()).unwrap(), q).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let i = i % h.len();
        let mut up = h.clone();
        up[i] = (up[i] + bump).min(1.0);
        let raised = p_policy(&p, &PPoint::new(up).unwrap(), q).unwrap();
        prop_assert!(raised >= base - 1e-12, "{} < {}", raised, base);
    }

    #[test]
    fn counting_matches_action((p, h, q) in policy_and_h(), z in 0.05f64..0.95) {
        // Indicator b_i = 1{y_i <= z}; deterministic policies only.
        prop_assume!(!matches!(p.spec(), PolicySpec::MixtureOs { .. }));
        let b: Vec<bool> = h.iter().map(|&v| v >= 0.5).collect();
        let y: Vec<f64> = b.iter().map(|&bi| if bi { z / 2.0 } else { (1.0 + z) / 2.0 }).collect();
        let action = p.action(q, &y, 0.0).unwrap();
        let counted = p.counting(q, &b).unwrap();
        prop_assert_eq!(counted, if action <= z { 1.0 } else { 0.0 });
    }

    #[test]
    fn mixture_is_convex_combination(n in 1usize..=6, raw in prop::collection::vec(0.01f64..1.0, 8), h in prop::collection::vec(0.0f64..=1.0, 6), q in 0.05f64..0.95) {
        let h = &h[..n];
        let ranks = n + 2;
        let s: f64 = raw[..ranks].iter().sum();
        let lambdas: Vec<f64> = raw[..ranks].iter().map(|v| v / s).collect();
        let mix = Policy::new(PolicySpec::prefix_mixture(n, &lambdas), n).unwrap();
        let point = PPoint::new(h.to_vec()).unwrap();
        let direct = p_policy(&mix, &point, q).unwrap();
        let combined: f64 = lambdas
            .iter()
            .enumerate()
            .map(|(r, l)| l * p_policy(&Policy::new(PolicySpec::prefix_order_statistic(n, r), n).unwrap(), &point, q).unwrap())
            .sum();
        prop_assert!((direct - combined).abs() < 1e-12);
    }

    #[test]
    fn branch_value_equals_bernoulli_regret((p, _h, q) in policy_and_h(), zeta in 0.0f64..0.3, t in 0.0f64..=1.0) {
        let d = DissimilarityProfile::constant(zeta, p.n()).unwrap();
        for branch in [Branch::Up, Branch::Down] {
            let obj = BranchObjective::new(branch, &p, q, &d, WeightedMode::Exact).unwrap();
            let (a, b) = obj.interval();
            let mu0 = a + t * (b - a);
            let via_branch = obj.value(mu0).unwrap();
            let via_psi = expected_regret_bernoulli(&p, q, &BernoulliProfile::extreme(branch, mu0, &d)).unwrap();
            prop_assert!((via_branch - via_psi).abs() < 1e-12, "{} vs {}", via_branch, via_psi);
        }
    }

    #[test]
    fn slope_bound_holds((p, _h, q) in policy_and_h(), zeta in 0.0f64..0.3, t in 0.0f64..1.0) {
        let d = DissimilarityProfile::constant(zeta, p.n()).unwrap();
        let bound: f64 = slope_bound(p.n());
        for branch in [Branch::Up, Branch::Down] {
            let obj = BranchObjective::new(branch, &p, q, &d, WeightedMode::Exact).unwrap();
            let (a, b) = obj.interval();
            let eps = 1e-6 * (b - a);
            let mu0 = a + t * (b - a - eps);
            let diff = (obj.value(mu0 + eps).unwrap() - obj.value(mu0).unwrap()).abs() / eps;
            prop_assert!(diff <= bound * (1.0 + 1e-6) + 1e-6, "{} > {}", diff, bound);
        }
    }

    #[test]
    fn quantized_bracket_contains_exact(w in prop::collection::vec(0.05f64..2.0, 1..=12), probs in prop::collection::vec(0.0f64..=1.0, 12), q in 0.05f64..0.95) {
        let probs = &probs[..w.len()];
        let exact = weighted_threshold_tail(&w, probs, q).unwrap();
        let b = weighted_threshold_bracket(&w, probs, q, 1e3).unwrap();
        prop_assert!(b.lower <= exact + 1e-12 && exact <= b.upper + 1e-12, "{:?} vs {}", b, exact);
    }

    #[test]
    fn poisson_binomial_matches_enumeration(probs in prop::collection::vec(0.0f64..=1.0, 1..=10), m in 0usize..=11) {
        let n = probs.len();
        let mut brute = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize >= m {
                brute += (0..n).map(|i| if mask & (1 << i) != 0 { probs[i] } else { 1.0 - probs[i] }).product::<f64>();
            }
        }
        prop_assert!((poisson_binomial_tail(&probs, m) - brute).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// The weighted ERM action is the smallest minimizer of the weighted
    /// empirical loss over the candidate grid `{0} ∪ y ∪ {1}`.
    #[test]
    fn werm_action_is_smallest_grid_argmin(
        wy in prop::collection::vec((1u32..5, 0u32..=20), 1..=8),
        qi in 1u32..20,
    ) {
        // Integer weights and outcomes on a 1/20 lattice make threshold ties common.
        let w: Vec<f64> = wy.iter().map(|&(a, _)| a as f64).collect();
        let y: Vec<f64> = wy.iter().map(|&(_, b)| b as f64 / 20.0).collect();
        let q = qi as f64 / 20.0;
        let loss = |a: f64| -> f64 {
            w.iter().zip(&y).map(|(wi, yi)| wi * (q * (yi - a).max(0.0) + (1.0 - q) * (a - yi).max(0.0))).sum()
        };
        let mut grid: Vec<f64> = y.clone();
        grid.push(0.0);
        grid.push(1.0);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let best = grid.iter().map(|&a| loss(a)).fold(f64::INFINITY, f64::min);
        let scale: f64 = w.iter().sum();
        let argmin = grid.into_iter().find(|&a| loss(a) <= best + 1e-12 * scale).unwrap();
        prop_assert_eq!(action_werm(&w, q, &y).unwrap(), argmin);
    }
}

#[test]
fn mixture_entries_with_shared_subsets_are_grouped() {
    let entries = vec![
        MixtureEntry {
            subset: vec![0, 1],
            rank: 1,
            weight: 0.25,
        },
        MixtureEntry {
            subset: vec![0, 2],
            rank: 2,
            weight: 0.5,
        },
        MixtureEntry {
            subset: vec![0, 1],
            rank: 2,
            weight: 0.25,
        },
    ];
    let p = Policy::new(PolicySpec::MixtureOs { entries }, 3).unwrap();
    let h = PPoint::new(vec![0.3, 0.6, 0.9]).unwrap();
    let expected = 0.25 * (1.0 - 0.7 * 0.4) + 0.5 * (0.3 * 0.9) + 0.25 * (0.3 * 0.6);
    assert!((p_policy(&p, &h, 0.5).unwrap() - expected).abs() < 1e-15);
}
