mod common;

use common::{brute_force, game, objective, structured_optimum};
use edgecache::game::{
    equilibrium_placement_with, sweep_alpha, threshold_sweep, Formulation, DEFAULT_DISTANCE_TOL,
    DEFAULT_TOL,
};
use edgecache::rate::equilibrium_objective;
use edgecache::{
    equilibrium_placement, no_adversary_placement, worst_case_rate, zipf_popularity, GameConfig,
    Placement, SolverStatus,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Near-exact unit-cell coverage at r = 45 m, d_s = 60 m (fine 1-D integration).
const GAMMA_R45: [f64; 4] = [0.29038, 0.659318, 0.043077, 0.007225];

fn default_game(alpha: f64) -> GameConfig {
    game(
        alpha,
        zipf_popularity(200, 0.7).unwrap().probs().to_vec(),
        GAMMA_R45.to_vec(),
        20.0,
    )
}

fn random_gamma(rng: &mut impl Rng, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

fn random_popularity(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    w.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

#[test]
fn three_file_no_adversary_matches_grid_search() {
    let cfg = game(0.0, vec![0.6, 0.3, 0.1], vec![0.5, 0.5], 1.0);
    let q = no_adversary_placement(&cfg).unwrap();
    let lp = objective(0.0, &[0.6, 0.3, 0.1], &[0.5, 0.5], q.q());
    let (bf, _) = brute_force(0.0, &[0.6, 0.3, 0.1], &[0.5, 0.5], 1.0, 0.02);
    assert!(lp <= bf + 1e-12 && bf - lp <= 0.02, "lp {lp} brute {bf}");
}

#[test]
fn two_file_examples_match_grid_search() {
    for (alpha, expected) in [(0.0, 0.1), (0.5, 0.5)] {
        let (bf, _) = brute_force(alpha, &[0.9, 0.1], &[1.0], 1.0, 0.01);
        assert!((bf - expected).abs() < 1e-9);
        let r = equilibrium_placement(&game(alpha, vec![0.9, 0.1], vec![1.0], 1.0), DEFAULT_TOL)
            .unwrap();
        assert!((r.rates.r_total - expected).abs() < 1e-9);
    }
}

#[test]
fn formulations_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let n = rng.random_range(1..=8);
        let s = rng.random_range(1..=4);
        let p = random_popularity(&mut rng, n);
        let g = random_gamma(&mut rng, s);
        let m = rng.random_range(0.1..n as f64);
        let alpha = rng.random_range(0.0..=1.0);
        let cfg = game(alpha, p, g, m);
        let a = equilibrium_placement_with(&cfg, DEFAULT_TOL, Formulation::Segment).unwrap();
        let b = equilibrium_placement_with(&cfg, DEFAULT_TOL, Formulation::Epigraph).unwrap();
        assert_eq!(a.status, SolverStatus::Optimal);
        assert_eq!(b.status, SolverStatus::Optimal);
        assert!((a.rates.r_total - b.rates.r_total).abs() < 1e-9, "{cfg:?}");
    }
}

#[test]
fn default_instance_matches_structured_optimum() {
    let p = zipf_popularity(200, 0.7).unwrap().probs().to_vec();
    for alpha in [0.0, 0.2, 0.35, 0.5, 0.8, 0.95, 1.0] {
        let r = equilibrium_placement(&default_game(alpha), DEFAULT_TOL).unwrap();
        let (oracle, _) = structured_optimum(alpha, &p, &GAMMA_R45, 20.0);
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!(
            (r.rates.r_total - oracle).abs() < 1e-7,
            "alpha {alpha}: lp {} oracle {oracle}",
            r.rates.r_total
        );
    }
}

#[test]
fn stored_rates_match_recomputation() {
    for alpha in [0.0, 0.4, 1.0] {
        let cfg = default_game(alpha);
        let r = equilibrium_placement(&cfg, DEFAULT_TOL).unwrap();
        let again = objective(
            alpha,
            cfg.popularity.probs(),
            cfg.coverage.gamma(),
            r.q_star.q(),
        );
        assert!((again - r.rates.r_total).abs() < 1e-9);
        assert!(
            (r.rates.r_total - (alpha * r.rates.r_adv + (1.0 - alpha) * r.rates.r_legit)).abs()
                < 1e-12
        );
        assert_eq!(r.q_star.q()[r.j_star], r.q_star.min());
    }
}

#[test]
fn no_adversary_structure_on_default_instance() {
    let q = no_adversary_placement(&default_game(0.0)).unwrap();
    assert_eq!(q.q()[0], 1.0);
    assert_eq!(q.q()[199], 0.0);
    let levels = [1.0, 0.5, 1.0 / 3.0, 0.25, 0.0];
    let off: Vec<f64> = q
        .q()
        .iter()
        .copied()
        .filter(|x| levels.iter().all(|l| (x - l).abs() > 1e-9))
        .collect();
    // only the marginal file sits between breakpoints
    assert!(off.len() <= 1, "{off:?}");
    assert!((q.used() - 20.0).abs() < 1e-9);
}

#[test]
fn uniform_at_alpha_one_matches_closed_form() {
    let cfg = default_game(1.0);
    let r = equilibrium_placement(&cfg, DEFAULT_TOL).unwrap();
    assert!(r.q_star.q().iter().all(|x| (x - 0.1).abs() < 1e-9));
    assert!((r.rates.r_total - worst_case_rate(&cfg)).abs() < 1e-9);
}

#[test]
fn sweep_is_monotone_concave_and_sandwiched() {
    let cfg = default_game(0.0);
    let alphas: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let rows = sweep_alpha(&cfg, &alphas, DEFAULT_TOL).unwrap();
    let reference = no_adversary_placement(&cfg).unwrap();
    let uniform = Placement::uniform(200, 20.0).unwrap();
    for r in &rows {
        let at = |q: &Placement| {
            equilibrium_objective(r.alpha, q, &cfg.popularity, &cfg.coverage)
                .unwrap()
                .r_total
        };
        assert!(r.rates.r_total <= at(&reference) + 1e-9);
        assert!(r.rates.r_total <= at(&uniform) + 1e-9);
        assert!((r.q_star.used() - 20.0).abs() < 1e-6);
    }
    for w in rows.windows(2) {
        assert!(w[1].rates.r_total >= w[0].rates.r_total - 1e-9);
    }
    for w in rows.windows(3) {
        let mid = 0.5 * (w[0].rates.r_total + w[2].rates.r_total);
        assert!(w[1].rates.r_total >= mid - 1e-6);
    }
}

#[test]
fn thresholds_on_default_instance() {
    let alphas: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let s = threshold_sweep(&default_game(0.0), &alphas, DEFAULT_DISTANCE_TOL).unwrap();
    let b = s.thresholds.branching.unwrap();
    let g = s.thresholds.gathering.unwrap();
    assert!((0.24..=0.40).contains(&b.at), "{b:?}");
    assert!((0.85..=0.99).contains(&g.at), "{g:?}");
    assert!((b.at - b.below - 0.01).abs() < 1e-9);
}

fn small_instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64)> {
    (1usize..=6, 1usize..=4).prop_flat_map(|(n, s)| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, s),
            0.05f64..1.0,
            0.0f64..=1.0,
        )
            .prop_map(move |(pw, gw, frac, alpha)| {
                let mut pw = pw;
                pw.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let pt: f64 = pw.iter().sum();
                let gt: f64 = gw.iter().sum();
                (
                    pw.iter().map(|x| x / pt).collect(),
                    gw.iter().map(|x| x / gt).collect(),
                    frac * n as f64,
                    alpha,
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equilibrium_is_feasible_and_beats_references((p, g, m, alpha) in small_instance()) {
        let cfg = game(alpha, p.clone(), g.clone(), m);
        let r = equilibrium_placement(&cfg, DEFAULT_TOL).unwrap();
        let q = r.q_star.q();
        prop_assert!(q.iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
        prop_assert!(r.q_star.used() <= m + 1e-6);
        prop_assert!((r.q_star.used() - m).abs() < 1e-6);
        let uniform = vec![m / p.len() as f64; p.len()];
        prop_assert!(r.rates.r_total <= objective(alpha, &p, &g, &uniform) + 1e-9);
        let (oracle, _) = structured_optimum(alpha, &p, &g, m);
        prop_assert!((r.rates.r_total - oracle).abs() < 1e-7);
        // canonical: non-increasing along non-increasing popularity
        prop_assert!(q.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn sorting_never_hurts((p, g, m, alpha) in small_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = p.len();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let scale = (m / raw.iter().sum::<f64>()).min(1.0);
        let q: Vec<f64> = raw.iter().map(|x| x * scale).collect();
        let mut sorted = q.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert!(objective(alpha, &p, &g, &sorted) <= objective(alpha, &p, &g, &q) + 1e-12);
    }
}
