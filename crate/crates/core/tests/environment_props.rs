use lilypad_core::environment::{pareto_from_uniform, sample_pareto};
use lilypad_core::lattice::{l1_ball_count, max_norm_below};
use lilypad_core::{Environment, ScalingConstants, SiteId, Window};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pareto_draws_respect_the_floor(u in 1e-300..=1.0f64, alpha in 1.01..8.0f64) {
        prop_assert!(pareto_from_uniform(u, alpha) >= 1.0);
    }

    #[test]
    fn ball_count_between_volume_constants(d in 1usize..=3, x in 1.0..40.0f64) {
        let n = max_norm_below(x).unwrap() as u64;
        let count = l1_ball_count(d, n) as f64;
        let vol = x.powi(d as i32);
        prop_assert!(count >= vol / factorial(d));
        prop_assert!(count <= 3f64.powi(d as i32) * vol);
    }

    #[test]
    fn macro_micro_round_trip(seed in any::<u64>(), d in 1usize..=2, t in 3.0..500.0f64) {
        let s = ScalingConstants::derive(d, d as f64 + 1.0, t).unwrap();
        let env = Environment::sample(s, 6.5 / s.r_t, seed).unwrap();
        for i in 0..env.len() {
            let site = env.site(i);
            let z = site.to_macro(s.r_t);
            prop_assert_eq!(&SiteId::from_macro(&z, s.r_t), &site);
            prop_assert_eq!(&SiteId::floor_of(&z, s.r_t), &site);
            prop_assert_eq!(env.xi_t()[i], env.xi()[i] / s.a_t);
            prop_assert!(env.xi()[i] >= 1.0);
        }
    }

    #[test]
    fn queries_match_linear_scan(seed in any::<u64>(), frac in 0.05..1.0f64, nu in 0.0..3.0f64) {
        let s = ScalingConstants::derive(2, 3.0, 50.0).unwrap();
        let env = Environment::sample(s, 9.5 / s.r_t, seed).unwrap();
        let r = frac * env.window_radius();
        let inside: Vec<usize> = (0..env.len())
            .filter(|&i| (env.window().norm(i) as f64) < r * s.r_t)
            .collect();
        let max = inside.iter().map(|&i| env.xi_t()[i]).fold(0.0, f64::max);
        prop_assert_eq!(env.max_potential(r).unwrap(), max);
        let nu = nu.max(1e-9);
        let count = inside.iter().filter(|&&i| env.xi_t()[i] >= nu).count();
        prop_assert_eq!(env.tail_count(r, nu).unwrap(), count);
    }
}

#[test]
fn one_sided_ks_against_pareto_cdf() {
    let n = 100_000;
    for (k, alpha) in [1.5, 2.0, 3.0, 5.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let mut xs: Vec<f64> = (0..n).map(|_| sample_pareto(&mut rng, alpha)).collect();
        xs.sort_by(f64::total_cmp);
        let d_plus = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (i + 1) as f64 / n as f64 - (1.0 - x.powf(-alpha)))
            .fold(0.0, f64::max);
        // one-sided critical value at level 0.001
        let crit = ((1.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        assert!(d_plus < crit, "alpha {alpha}: D+ = {d_plus} ≥ {crit}");
    }
}

#[test]
fn window_is_the_open_ball() {
    for d in 1..=3 {
        let w = Window::new(d, 4.0).unwrap();
        let n = w.half_width();
        let side = (2 * n + 1) as usize;
        let mut count = 0;
        for b in 0..side.pow(d as u32) {
            let c: Vec<i64> = (0..d)
                .map(|k| (b / side.pow(k as u32) % side) as i64 - n)
                .collect();
            let inside = c.iter().map(|x| x.abs()).sum::<i64>() < 4;
            assert_eq!(w.index_of(&c).is_some(), inside);
            count += usize::from(inside);
        }
        assert_eq!(count, w.len());
    }
}

#[test]
fn floor_assignment_and_rejection() {
    let s = ScalingConstants::derive(1, 2.0, 100.0).unwrap();
    let env = Environment::with_potential(s, 0.01, &[]).unwrap();
    assert!(env.xi_t().iter().all(|&v| v == 1.0 / s.a_t));
    assert!(Environment::with_potential(s, 0.01, &[(SiteId(vec![0]), 0.5 / s.a_t)]).is_err());
    assert_eq!(env.tail_count(0.01, 0.5 / s.a_t).unwrap(), env.len());
    assert_eq!(env.tail_count(0.01, 1.0).unwrap(), 0);
    assert!(env.max_potential(0.02).is_err());
}
