mod common;

use common::{bellman_ford, brute_cone_sup, random_env, recursion_residual};
use lilypad_core::{pam_lambda, pam_tau, solve_hitting_times, EnvelopeMode, Environment, SiteId};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (u64, usize, f64)> {
    (any::<u64>(), 1usize..=2).prop_flat_map(|(seed, d)| {
        let max = if d == 1 { 99.5 } else { 9.5 };
        (Just(seed), Just(d), 1.5..max)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dijkstra_is_the_bellman_ford_fixed_point((seed, d, rad) in params()) {
        let env = random_env(seed, d, rad);
        let f = solve_hitting_times(&env);
        prop_assert_eq!(f.values(), &bellman_ford(&env)[..]);
        prop_assert!(recursion_residual(&env, f.values()) <= 1e-12);
        prop_assert_eq!(f.settle_order().len(), env.len());
    }

    #[test]
    fn optimal_paths_climb_the_potential((seed, d, rad) in params()) {
        let env = random_env(seed, d, rad);
        let f = solve_hitting_times(&env);
        for z in 0..env.len() {
            let path = f.path_indices(z).unwrap();
            prop_assert_eq!(*path.last().unwrap(), env.origin());
            // the target itself is exempt; the launching lilypads are monotone
            for w in path.windows(2).skip(1) {
                prop_assert!(env.xi_t()[w[1]] <= env.xi_t()[w[0]]);
            }
            let cost = f.path_cost(&path);
            prop_assert!((cost - f.value(z)).abs() <= 1e-12 * f.value(z).max(1.0));
        }
    }

    #[test]
    fn envelope_equals_direct_scan((seed, d, rad) in params(), frac in 0.0..1.5f64) {
        let env = random_env(seed, d, rad);
        let f = solve_hitting_times(&env);
        let hmax = f.values().iter().copied().fold(0.0, f64::max);
        let t = frac * hmax;
        let naive = f.mass_field(t, EnvelopeMode::Naive).unwrap();
        let env_dp = f.mass_field(t, EnvelopeMode::Envelope).unwrap();
        prop_assert!(naive.max_abs_diff(&env_dp) <= 1e-12);
        let brute = brute_cone_sup(&env, f.values(), t);
        for (a, b) in naive.values().iter().zip(&brute) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn pam_lilypad_is_faster_and_lambda_forms_agree((seed, d, rad) in params(), frac in 0.0..1.5f64) {
        let env = random_env(seed, d, rad);
        let h = solve_hitting_times(&env);
        let tau = pam_tau(&env);
        for z in 0..env.len() {
            prop_assert!(tau.value(z) <= h.value(z));
        }
        let t = frac * h.values().iter().copied().fold(0.0, f64::max);
        let lam = pam_lambda(&env, t).unwrap();
        let alt = tau.lambda_alternate(t).unwrap();
        prop_assert!(lam.max_abs_diff(&alt) <= 1e-9);
        prop_assert!(lam.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn certificate_fixes_hitting_times(seed in any::<u64>(), d in 1usize..=2) {
        let rad = if d == 1 { 40.5 } else { 5.5 };
        let small = random_env(seed, d, rad);
        let r = small.window_radius();
        let big = Environment::sample(*small.scaling(), 2.0 * r, seed).unwrap();
        let fs = solve_hitting_times(&small);
        let fb = solve_hitting_times(&big);
        let t_star = fs.exactness_certificate(r).unwrap();
        prop_assert_eq!(t_star, fb.exactness_certificate(r).unwrap());
        for i in 0..small.len() {
            if fs.value(i) < t_star {
                let j = big.window().require(&small.site(i)).unwrap();
                prop_assert_eq!(fs.value(i), fb.value(j));
            }
        }
    }
}

#[test]
fn sub_window_potential_is_shared() {
    let a = random_env(5, 2, 4.5);
    let b = Environment::sample(*a.scaling(), 2.0 * a.window_radius(), 5).unwrap();
    for i in 0..a.len() {
        let j = b.window().require(&a.site(i)).unwrap();
        assert_eq!(a.xi()[i], b.xi()[j]);
    }
}

#[test]
fn mass_field_is_lipschitz_and_nonnegative() {
    let env = random_env(17, 2, 8.5);
    let f = solve_hitting_times(&env);
    let m = f.mass_field(0.5, EnvelopeMode::Envelope).unwrap();
    let q = env.scaling().q;
    for z in 0..env.len() {
        for y in env.window().neighbors(z) {
            assert!((m.values()[z] - m.values()[y]).abs() <= q * env.dist(y, z) + 1e-12);
        }
    }
    assert!(m.at(&SiteId(vec![0, 0])).unwrap() >= 0.0);
}
