mod common;

use common::deficit;
use edgecache::rate::best_response_rate;
use edgecache::{legit_rate, CoverageProfile, Placement, PopularityDist};
use proptest::prelude::*;

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

/// (popularity, gamma, q, q', cache size) with q' >= q componentwise.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..30, 1usize..=4).prop_flat_map(|(n, s)| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, s),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
            .prop_filter("gamma needs mass", |(_, g, _, _)| {
                g.iter().sum::<f64>() > 0.01
            })
            .prop_map(move |(p, g, a, b)| {
                let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
                let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
                (normalized(p), normalized(g), lo, hi, n as f64)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rates_are_monotone_bounded_and_dominated((p, g, lo, hi, m) in instance()) {
        let pd = PopularityDist::new(p.clone()).unwrap();
        let gd = CoverageProfile::new(g.clone()).unwrap();
        let ql = Placement::new(lo.clone(), m).unwrap();
        let qh = Placement::new(hi, m).unwrap();
        let (rl, rh) = (legit_rate(&ql, &pd, &gd).unwrap(), legit_rate(&qh, &pd, &gd).unwrap());
        prop_assert!(rh <= rl + 1e-15);
        prop_assert!(best_response_rate(&qh, &gd) <= best_response_rate(&ql, &gd) + 1e-15);
        for q in [&ql, &qh] {
            let l = legit_rate(q, &pd, &gd).unwrap();
            let a = best_response_rate(q, &gd);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&l));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
            prop_assert!(a >= l - 1e-12);
        }
        // evaluator equals the formula written out independently
        let direct: f64 = p.iter().zip(&lo).map(|(pj, qj)| pj * deficit(&g, *qj)).sum();
        prop_assert!((rl - direct).abs() < 1e-12);
    }

    #[test]
    fn leader_objective_is_convex((p, g, lo, hi, m) in instance(), lambda in 0.01f64..0.99, alpha in 0.0f64..=1.0) {
        let pd = PopularityDist::new(p).unwrap();
        let gd = CoverageProfile::new(g).unwrap();
        let total = |q: &[f64]| {
            let q = Placement::new(q.to_vec(), m).unwrap();
            edgecache::rate::equilibrium_objective(alpha, &q, &pd, &gd).unwrap().r_total
        };
        let mix: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        prop_assert!(total(&mix) <= lambda * total(&lo) + (1.0 - lambda) * total(&hi) + 1e-12);
    }
}
