use proptest::prelude::*;

use fairlin::design::{d_optimal_design, d_optimal_design_with, g_value, DesignOptions};
use fairlin::instances::ArmSet;

/// Arms in general position: random directions with distinct random radii,
/// so that no two arms tie on norm or predicted variance.
fn arm_sets() -> impl Strategy<Value = ArmSet<f64>> {
    (2usize..=6)
        .prop_flat_map(|d| {
            let n = d..=(4 * d + 8);
            (
                Just(d),
                prop::collection::vec((prop::collection::vec(-1.0f64..1.0, d), 0.2f64..1.0), n),
            )
        })
        .prop_filter_map("degenerate arms", |(d, raw)| {
            let arms: Vec<Vec<f64>> = raw
                .into_iter()
                .map(|(v, r)| {
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
                    v.iter().map(|x| x * r / n).collect()
                })
                .collect();
            let set = ArmSet::new(d, arms).ok()?;
            d_optimal_design(&set, 0.01, 1000 * d).ok().map(|_| set)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kw_bound_holds(arms in arm_sets()) {
        let d = arms.dim() as f64;
        let w = d_optimal_design(&arms, 0.01, 1000 * arms.dim()).unwrap();
        prop_assert!(w.g_value >= d - 1e-6);
        prop_assert!(w.g_value <= d * 1.01);
        let total: f64 = w.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(w.weights.iter().all(|&x| x == 0.0 || x >= 1e-6));
        prop_assert!((g_value(&arms, &w.weights).unwrap() - w.g_value).abs() < 1e-9);
    }

    #[test]
    fn log_det_never_decreases(arms in arm_sets()) {
        let mut hist = Vec::new();
        let _ = d_optimal_design_with(&arms, &DesignOptions::with_eps(1e-4), Some(&mut hist));
        prop_assert!(!hist.is_empty());
        for w in hist.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn permuting_arms_permutes_weights(arms in arm_sets(), seed in any::<u64>()) {
        let n = arms.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = ArmSet::new(arms.dim(), perm.iter().map(|&i| arms.arm(i).to_vec()).collect()).unwrap();
        let a = d_optimal_design(&arms, 0.01, 1000 * arms.dim()).unwrap();
        let b = d_optimal_design(&shuffled, 0.01, 1000 * arms.dim()).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.weights[k] - a.weights[i]).abs() < 1e-9, "{} vs {}", b.weights[k], a.weights[i]);
        }
    }
}
