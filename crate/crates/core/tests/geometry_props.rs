use proptest::prelude::*;

use fairlin::geometry::{
    caratheodory_distribution, chebyshev_center, probe_directions, reduce_support, weighted_mean,
};
use fairlin::instances::ArmSet;
use fairlin::lp::{LinearProgram, Sense};

fn hulls() -> impl Strategy<Value = ArmSet<f64>> {
    (1usize..=4).prop_flat_map(|d| {
        (Just(d), prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), (d + 1)..(3 * d + 6)))
    })
    .prop_map(|(d, raw)| {
        let arms = raw
            .into_iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1.0 { v.iter().map(|x| x / n).collect() } else { v }
            })
            .collect();
        ArmSet::new(d, arms).unwrap()
    })
}

/// Independent membership oracle: is `p` a convex combination of the arms?
fn in_hull(arms: &ArmSet<f64>, p: &[f64], tol: f64) -> bool {
    let n = arms.len();
    // minimize total slack s⁺ + s⁻ subject to Σλx + s⁺ − s⁻ = p, Σλ = 1
    let d = arms.dim();
    let mut obj = vec![0.0; n];
    obj.extend(std::iter::repeat_n(-1.0, 2 * d));
    let mut lp = LinearProgram::new(obj);
    for k in 0..d {
        let mut row: Vec<f64> = arms.iter().map(|x| x[k]).collect();
        row.extend((0..2 * d).map(|j| if j == k { 1.0 } else if j == d + k { -1.0 } else { 0.0 }));
        lp.push(row, Sense::Eq, p[k]);
    }
    let mut ones = vec![1.0; n];
    ones.extend(std::iter::repeat_n(0.0, 2 * d));
    lp.push(ones, Sense::Eq, 1.0);
    match lp.solve() {
        Ok(sol) => -sol.objective <= tol,
        Err(_) => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn center_lies_in_hull(arms in hulls()) {
        let (c, r) = chebyshev_center(&arms, 50).unwrap();
        prop_assert!(r >= 0.0);
        prop_assert!(in_hull(&arms, &c, 1e-6));
    }

    #[test]
    fn radius_shrinks_as_directions_grow(arms in hulls()) {
        let (_, r1) = chebyshev_center(&arms, 20).unwrap();
        let (_, r2) = chebyshev_center(&arms, 60).unwrap();
        prop_assert!(r2 <= r1 + 1e-7, "{r1} -> {r2}");
    }

    #[test]
    fn probed_points_are_in_hull(arms in hulls()) {
        let d = arms.dim();
        let (c, r) = chebyshev_center(&arms, 40).unwrap();
        for u in probe_directions::<f64>(d, 40) {
            let p: Vec<f64> = c.iter().zip(&u).map(|(a, b)| a + r * b).collect();
            prop_assert!(in_hull(&arms, &p, 1e-6));
        }
    }

    #[test]
    fn reduction_keeps_mean_and_bounds_support(arms in hulls(), raw in prop::collection::vec(0.0f64..1.0, 16)) {
        let n = arms.len();
        let mut rho: Vec<f64> = (0..n).map(|i| raw[i % raw.len()] + 1e-3).collect();
        let total: f64 = rho.iter().sum();
        rho.iter_mut().for_each(|x| *x /= total);
        let target = weighted_mean(&arms, &rho);
        reduce_support(&arms, &mut rho);
        let mean = weighted_mean(&arms, &rho);
        for (a, b) in mean.iter().zip(&target) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        prop_assert!(rho.iter().filter(|&&x| x > 0.0).count() <= arms.dim() + 1);
        let from_scratch = caratheodory_distribution(&arms, &target).unwrap();
        prop_assert!(from_scratch.iter().filter(|&&x| x > 0.0).count() <= arms.dim() + 1);
    }
}
