//! Deterministic potentials that force maximizer agreement, separation or a
//! disconnected PAM lilypad support at a chosen time.

use crate::environment::{Environment, ScalingConstants};
use crate::error::{invalid, LilypadError, Result};
use crate::lattice::SiteId;
use crate::lilypad::solve_hitting_times;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Both lilypad maximizers sit at `x`.
    S1,
    /// A strong site `x'` just outside `B(0, R)` pulls the PAM maximizer away.
    S2,
    /// A site `x'` near `|x'| = 2R` creates a second PAM lilypad island.
    S3,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::S1 => "S1",
            Variant::S2 => "S2",
            Variant::S3 => "S3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "S1" | "s1" => Ok(Variant::S1),
            "S2" | "s2" => Ok(Variant::S2),
            "S3" | "s3" => Ok(Variant::S3),
            _ => Err(invalid(format!("unknown scenario variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub variant: Variant,
    pub t: f64,
    pub kappa: f64,
    pub r: f64,
    pub eta: f64,
    pub big_r: f64,
    /// Rescaled potential at `x`; defaults to `1.5 eta`.
    pub x_potential: Option<f64>,
}

/// Sites and values placed by [`build_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub x: SiteId,
    pub x_potential: f64,
    pub x_prime: Option<(SiteId, f64)>,
    pub window_radius: f64,
}

/// Literal evaluation of every condition; `None` where a condition does not
/// apply to the variant.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioCheck {
    /// `eta ≥ 8qr/t` and `R > max(2 eta t/q, 3 kappa)`.
    pub parameters: bool,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub s1: Option<bool>,
    pub s2: Option<bool>,
    pub s3: Option<bool>,
    /// Site satisfying (A) when one exists.
    pub x: Option<SiteId>,
    pub x_prime: Option<SiteId>,
}

impl ScenarioCheck {
    pub fn all(&self) -> bool {
        self.parameters
            && self.a
            && self.b
            && self.c
            && self.s1.unwrap_or(true)
            && self.s2.unwrap_or(true)
            && self.s3.unwrap_or(true)
    }
}

impl ScenarioSpec {
    pub fn new(variant: Variant, t: f64, kappa: f64, r: f64, eta: f64, big_r: f64) -> Self {
        ScenarioSpec {
            variant,
            t,
            kappa,
            r,
            eta,
            big_r,
            x_potential: None,
        }
    }

    /// Parameters used in the examples: `t = 1, kappa = 1, r = 0.3, eta = 3, R = 7`.
    pub fn example(variant: Variant) -> Self {
        Self::new(variant, 1.0, 1.0, 0.3, 3.0, 7.0)
    }

    fn parameters_ok(&self, q: f64) -> bool {
        self.eta >= 8.0 * q * self.r / self.t
            && self.big_r > (2.0 * self.eta * self.t / q).max(3.0 * self.kappa)
    }

    /// Window radius large enough for the variant's exterior conditions.
    pub fn window_radius(&self) -> f64 {
        match self.variant {
            Variant::S1 | Variant::S2 => self.big_r + 2.0,
            Variant::S3 => 2.0 * self.big_r + 2.0,
        }
    }

    /// Placement of `x` and `x'`, or the first violated inequality.
    pub fn placement(&self, scaling: &ScalingConstants) -> Result<Placement> {
        let q = scaling.q;
        let (t, r, eta, big_r) = (self.t, self.r, self.eta, self.big_r);
        let fail = |m: String| Err(LilypadError::InfeasibleScenario(m));
        for (name, v) in [("t", t), ("kappa", self.kappa), ("r", r), ("eta", eta), ("R", big_r)] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} = {v} must be positive"));
            }
        }
        if !(eta >= 8.0 * q * r / t) {
            return fail(format!("eta ≥ 8qr/t fails: {eta} < {}", 8.0 * q * r / t));
        }
        let lower = (2.0 * eta * t / q).max(3.0 * self.kappa);
        if !(big_r > lower) {
            return fail(format!("R > max(2 eta t/q, 3 kappa) fails: {big_r} ≤ {lower}"));
        }
        let floor = 1.0 / scaling.a_t;
        if !(floor <= eta / 2.0) {
            return fail(format!("eta/2 ≥ 1/a(T) fails: {} < {floor}", eta / 2.0));
        }
        let x_potential = self.x_potential.unwrap_or(1.5 * eta);
        if !(x_potential >= eta && x_potential < 2.0 * eta) {
            return fail(format!("xi_T(x) = {x_potential} is outside [eta, 2 eta)"));
        }
        let d = scaling.d;
        let x_prime = match self.variant {
            Variant::S1 => None,
            Variant::S2 => {
                let m = (big_r * scaling.r_t).ceil() as i64;
                let bound = 2.0 * eta + q * (big_r + 1.0) / t;
                Some((SiteId::on_axis(d, 0, m), bound + q / t))
            }
            Variant::S3 => {
                let (lo, hi) = ((2.0 * big_r + 1.0) * q / t, 2.5 * big_r * q / t);
                if !(lo < hi) {
                    return fail(format!("(2R+1)q/t < 5Rq/(2t) fails: {lo} ≥ {hi}"));
                }
                let m = (2.0 * big_r * scaling.r_t).ceil() as i64;
                Some((SiteId::on_axis(d, 0, m), 0.5 * (lo + hi)))
            }
        };
        Ok(Placement {
            x: SiteId::origin(d),
            x_potential,
            x_prime,
            window_radius: self.window_radius(),
        })
    }
}

/// Floor potential everywhere except `x` and `x'`.
pub fn build_scenario(spec: &ScenarioSpec, scaling: ScalingConstants) -> Result<Environment> {
    let p = spec.placement(&scaling)?;
    let mut assignment = vec![(p.x.clone(), p.x_potential)];
    assignment.extend(p.x_prime.clone());
    let env = Environment::with_potential(scaling, p.window_radius, &assignment)?;
    let check = check_scenario(&env, spec)?;
    if !check.all() {
        return Err(LilypadError::InfeasibleScenario(format!(
            "constructed potential fails its own conditions: {check:?}"
        )));
    }
    Ok(env)
}

fn argmax_where(env: &Environment, keep: impl Fn(usize) -> bool) -> Option<usize> {
    let xi = env.xi_t();
    let mut best: Option<usize> = None;
    for i in (0..env.len()).filter(|&i| keep(i)) {
        if best.is_none_or(|b| xi[i] > xi[b]) {
            best = Some(i);
        }
    }
    best
}

/// Evaluates the conditions on `env` as stated. Conditions that name a site
/// hold when some site of the window witnesses them.
pub fn check_scenario(env: &Environment, spec: &ScenarioSpec) -> Result<ScenarioCheck> {
    let s = env.scaling();
    let q = s.q;
    let (t, r, eta, big_r) = (spec.t, spec.r, spec.eta, spec.big_r);
    let need = match spec.variant {
        Variant::S1 | Variant::S2 => big_r + 1.0,
        Variant::S3 => 2.0 * big_r + 1.0,
    };
    if env.window_radius() <= need {
        return Err(invalid(format!(
            "window radius {} must exceed {need} for {}",
            env.window_radius(),
            spec.variant.as_str()
        )));
    }
    let xi = env.xi_t();
    let norm = |i: usize| env.norm(i);
    let in_ball = |i: usize, radius: f64| env.in_ball(i, radius);

    let n = env.len();
    let a_sites: Vec<usize> = (0..n)
        .filter(|&i| in_ball(i, r) && xi[i] >= eta && xi[i] < 2.0 * eta)
        .collect();
    let a = !a_sites.is_empty();
    let b_holds = |x: usize| {
        (0..n)
            .filter(|&y| y != x && in_ball(y, big_r))
            .all(|y| xi[y] <= eta / 2.0)
    };
    // (B) for the (A) witness; without one, for the strongest site near 0
    let x = a_sites
        .iter()
        .copied()
        .find(|&x| b_holds(x))
        .or_else(|| a_sites.first().copied())
        .or_else(|| argmax_where(env, |i| in_ball(i, r)));
    let b = x.is_some_and(b_holds);
    let h = solve_hitting_times(env);
    let c = (0..env.len())
        .filter(|&z| in_ball(z, r))
        .all(|z| h.value(z) <= t / 8.0);

    let outside = |y: usize| !in_ball(y, big_r);
    let s1_bound = |y: usize| xi[y] < eta + q * (norm(y) - r) / t;
    let mut check = ScenarioCheck {
        parameters: spec.parameters_ok(q),
        a,
        b,
        c,
        s1: None,
        s2: None,
        s3: None,
        x: x.filter(|&i| a_sites.contains(&i)).map(|i| env.site(i)),
        x_prime: None,
    };
    match spec.variant {
        Variant::S1 => {
            check.s1 = Some((0..env.len()).filter(|&y| outside(y)).all(s1_bound));
        }
        Variant::S2 => {
            let xp = (0..n)
                .filter(|&i| in_ball(i, big_r + 1.0) && outside(i))
                .filter(|&i| xi[i] > 2.0 * eta + q * (big_r + 1.0) / t)
                .find(|&xp| (0..n).filter(|&y| y != xp && outside(y)).all(s1_bound));
            check.s2 = Some(xp.is_some());
            check.x_prime = xp.map(|i| env.site(i));
        }
        Variant::S3 => {
            let xp = (0..n)
                .filter(|&i| norm(i) >= 2.0 * big_r && norm(i) <= 2.0 * big_r + 1.0)
                .filter(|&i| {
                    xi[i] > (2.0 * big_r + 1.0) * q / t && xi[i] < 5.0 * big_r * q / (2.0 * t)
                })
                .find(|&xp| {
                    (0..n)
                        .filter(|&y| y != xp && outside(y))
                        .all(|y| xi[y] < q * norm(y) / t)
                });
            check.s3 = Some(xp.is_some());
            check.x_prime = xp.map(|i| env.site(i));
        }
    }
    Ok(check)
}
