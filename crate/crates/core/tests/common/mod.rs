//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lilypad_core::{Environment, ScalingConstants, SiteId};

/// Scaling with unit macro spacing and `a(T) = 1`, so rescaled and raw
/// potentials coincide.
pub fn unit_scaling(d: usize) -> ScalingConstants {
    ScalingConstants::from_parts(d, 2.0 * d as f64, std::f64::consts::E, 1.0, 1.0).unwrap()
}

/// Window of radius `radius` with every raw potential set to `c`, then
/// overridden at the listed sites.
pub fn flat_env(d: usize, radius: f64, c: f64, spikes: &[(SiteId, f64)]) -> Environment {
    let env = Environment::with_potential(unit_scaling(d), radius, &[]).unwrap();
    let mut all: Vec<_> = (0..env.len()).map(|i| (env.site(i), c)).collect();
    all.extend_from_slice(spikes);
    env.with_overrides(&all).unwrap()
}

/// `log u(z, s)` for `du/ds = (Δ_abs + xi) u`, `u(0) = δ_0`, from a dense
/// matrix exponential.
///
/// The generator is `A - 2d I` with `A = adjacency + diag(xi)` entrywise
/// nonnegative, so every Taylor term of `exp(sA)` is nonnegative and tiny
/// entries keep full relative precision through scaling and squaring.
pub fn expm_logu(env: &Environment, xi: &[f64], s: f64) -> Vec<f64> {
    let n = env.len();
    let w = env.window();
    let mut a = vec![0.0; n * n];
    for z in 0..n {
        a[z * n + z] = xi[z];
        for y in w.neighbors(z) {
            a[z * n + y] = 1.0;
        }
    }
    let norm = (0..n)
        .map(|r| (0..n).map(|c| a[r * n + c]).sum::<f64>())
        .fold(0.0, f64::max)
        * s;
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let h = s / 2f64.powi(squarings);
    let scaled: Vec<f64> = a.iter().map(|x| x * h).collect();
    // Taylor series of exp(hA)
    let mut e = identity(n);
    let mut term = identity(n);
    for k in 1..40 {
        term = matmul(&term, &scaled, n);
        for x in term.iter_mut() {
            *x /= k as f64;
        }
        for (ei, ti) in e.iter_mut().zip(&term) {
            *ei += ti;
        }
        if term.iter().zip(&e).all(|(&t, &x)| t <= 1e-18 * x) {
            break;
        }
    }
    for _ in 0..squarings {
        e = matmul(&e, &e, n);
    }
    let o = env.origin();
    let two_d = 2.0 * env.scaling().d as f64;
    (0..n).map(|z| e[z * n + o].ln() - two_d * s).collect()
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Bellman–Ford fixed point of `h(z) = min_y h(y) + q|z-y|/xi_T(y)`.
pub fn bellman_ford(env: &Environment) -> Vec<f64> {
    let n = env.len();
    let q = env.scaling().q;
    let mut h = vec![f64::INFINITY; n];
    h[env.origin()] = 0.0;
    loop {
        let mut changed = false;
        for y in 0..n {
            if !h[y].is_finite() {
                continue;
            }
            for z in 0..n {
                let cand = h[y] + q * env.dist(y, z) / env.xi_t()[y];
                if cand < h[z] {
                    h[z] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            return h;
        }
    }
}

/// Direct double-loop `sup_y xi_T(y)(t - h(y))_+ - q|z-y|`.
pub fn brute_cone_sup(env: &Environment, h: &[f64], t: f64) -> Vec<f64> {
    let n = env.len();
    let q = env.scaling().q;
    (0..n)
        .map(|z| {
            (0..n)
                .map(|y| env.xi_t()[y] * (t - h[y]).max(0.0) - q * env.dist(y, z))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Double-loop ℓ1 Hausdorff distance in micro units.
pub fn brute_hausdorff(a: &[SiteId], b: &[SiteId]) -> i64 {
    let side = |x: &[SiteId], y: &[SiteId]| {
        x.iter()
            .map(|p| y.iter().map(|q| p.l1_to(q)).min().unwrap())
            .max()
            .unwrap()
    };
    side(a, b).max(side(b, a))
}

/// Pareto environment with at most about `max_sites` sites, `d ∈ {1, 2}`.
pub fn random_env(seed: u64, d: usize, micro_radius: f64) -> Environment {
    let t = 20.0 + (seed % 7) as f64 * 10.0;
    let alpha = d as f64 + 0.5 + (seed % 5) as f64 * 0.5;
    let s = ScalingConstants::derive(d, alpha, t).unwrap();
    Environment::sample(s, micro_radius / s.r_t, seed).unwrap()
}

/// `h(z) - min_{y ≠ z} h(y) + q|z-y|/xi_T(y)` over non-origin sites; the
/// origin contributes `|h(0)|`.
pub fn recursion_residual(env: &Environment, h: &[f64]) -> f64 {
    let q = env.scaling().q;
    let o = env.origin();
    let mut worst = h[o].abs();
    for z in (0..env.len()).filter(|&z| z != o) {
        let best = (0..env.len())
            .filter(|&y| y != z)
            .map(|y| h[y] + q * env.dist(y, z) / env.xi_t()[y])
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((h[z] - best).abs());
    }
    worst
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Sample variance and an estimate of its standard error.
pub fn var_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}
