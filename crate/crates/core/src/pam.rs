//! Log-domain integration of the parabolic Anderson model
//! `du/ds = Δu + xi u`, `u(., 0) = δ_0`, on a window with absorbing boundary.
//!
//! With `v = log u` the equation becomes
//! `dv/ds (z) = xi(z) - 2d + Σ_{w ~ z} exp(v(w) - v(z))`, which stays finite
//! where `u` itself overflows. Mass absorbed at the boundary is carried as an
//! extra log-domain component.

use std::io::Write;

use statrs::function::gamma::ln_gamma;

use crate::environment::{fmt_f64, Environment};
use crate::error::{invalid, LilypadError, Result};
use crate::lilypad::{MassField, MassKind, SupportSet, SupportSource};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PamOptions {
    /// Local error tolerance on `log u` per step.
    pub tol: f64,
    /// Start time of the numerical integration; before it `u` is replaced by
    /// its leading small-time term.
    pub start: f64,
    pub max_steps: u64,
    /// Bisection depth when refining threshold crossings.
    pub refine_depth: u32,
}

impl Default for PamOptions {
    fn default() -> Self {
        PamOptions {
            tol: 1e-10,
            start: 1e-12,
            max_steps: 50_000_000,
            refine_depth: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegratorStats {
    pub accepted: u64,
    pub rejected: u64,
    pub max_error: f64,
    pub min_step: f64,
}

/// `log u` on a time grid.
#[derive(Clone, Debug)]
pub struct PamField<'a> {
    env: &'a Environment,
    /// Microscopic grid times, starting at 0.
    pub times: Vec<f64>,
    /// `logu[k][z]`.
    pub logu: Vec<Vec<f64>>,
    /// Log of the mass absorbed at the boundary by each grid time.
    pub log_leak: Vec<f64>,
    pub stats: IntegratorStats,
    xi: Vec<f64>,
    opts: PamOptions,
}

/// Log-domain right-hand side over a fixed window.
struct System {
    n: usize,
    shift: Vec<f64>,
    nbr_start: Vec<usize>,
    nbr: Vec<usize>,
    /// `(site, number of outside neighbours)` for boundary sites.
    boundary: Vec<(usize, f64)>,
}

impl System {
    fn new(env: &Environment, xi: &[f64]) -> Self {
        let w = env.window();
        let n = env.len();
        let two_d = 2.0 * env.scaling().d as f64;
        let mut nbr_start = Vec::with_capacity(n + 1);
        let mut nbr = Vec::new();
        let mut boundary = Vec::new();
        for z in 0..n {
            nbr_start.push(nbr.len());
            nbr.extend(w.neighbors(z));
            if w.outside_neighbors(z) > 0 {
                boundary.push((z, w.outside_neighbors(z) as f64));
            }
        }
        nbr_start.push(nbr.len());
        System {
            n,
            shift: xi.iter().map(|&x| x - two_d).collect(),
            nbr_start,
            nbr,
            boundary,
        }
    }

    /// Writes the derivative into `dv` and returns the largest coupling sum,
    /// which bounds the stable step.
    fn rhs(&self, v: &[f64], dv: &mut [f64]) -> f64 {
        let mut stiff: f64 = 0.0;
        for z in 0..self.n {
            let vz = v[z];
            let mut s = 0.0;
            for &w in &self.nbr[self.nbr_start[z]..self.nbr_start[z + 1]] {
                s += (v[w] - vz).exp();
            }
            stiff = stiff.max(s);
            dv[z] = self.shift[z] + s;
        }
        let l = v[self.n];
        let mut s = 0.0;
        for &(z, k) in &self.boundary {
            s += k * (v[z] - l).exp();
        }
        stiff = stiff.max(s);
        dv[self.n] = s;
        stiff
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(m: usize) -> Self {
        Rk4 {
            k1: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            tmp: vec![0.0; m],
        }
    }

    fn step(&mut self, sys: &System, v: &[f64], h: f64, out: &mut [f64]) {
        let m = v.len();
        sys.rhs(v, &mut self.k1);
        for i in 0..m {
            self.tmp[i] = v[i] + 0.5 * h * self.k1[i];
        }
        sys.rhs(&self.tmp, &mut self.k2);
        for i in 0..m {
            self.tmp[i] = v[i] + 0.5 * h * self.k2[i];
        }
        sys.rhs(&self.tmp, &mut self.k3);
        for i in 0..m {
            self.tmp[i] = v[i] + h * self.k3[i];
        }
        sys.rhs(&self.tmp, &mut self.k4);
        for i in 0..m {
            out[i] = v[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Adaptive integrator state shared by the forward solve and the crossing
/// refinement.
struct Integrator<'s> {
    sys: &'s System,
    opts: PamOptions,
    rk: Rk4,
    full: Vec<f64>,
    half: Vec<f64>,
    two: Vec<f64>,
    scratch: Vec<f64>,
    h: f64,
    stats: IntegratorStats,
}

impl<'s> Integrator<'s> {
    fn new(sys: &'s System, opts: PamOptions) -> Self {
        let m = sys.n + 1;
        Integrator {
            sys,
            opts,
            rk: Rk4::new(m),
            full: vec![0.0; m],
            half: vec![0.0; m],
            two: vec![0.0; m],
            scratch: vec![0.0; m],
            h: 0.0,
            stats: IntegratorStats {
                min_step: f64::INFINITY,
                ..Default::default()
            },
        }
    }

    /// Advances `v` from `s` to `target` in place.
    fn advance(&mut self, v: &mut [f64], mut s: f64, target: f64) -> Result<()> {
        let m = v.len();
        if self.h <= 0.0 {
            self.h = (target - s).min(s.max(self.opts.start));
        }
        while s < target {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(LilypadError::Integrator(format!(
                    "step budget {} exhausted at s = {s}",
                    self.opts.max_steps
                )));
            }
            let stiff = self.sys.rhs(v, &mut self.scratch);
            let mut h = self.h.min(2.0 / stiff.max(1e-300)).min(target - s);
            let last = h >= target - s;
            if last {
                h = target - s;
            }
            if h <= s.abs() * f64::EPSILON * 4.0 || h <= 0.0 {
                return Err(LilypadError::Integrator(format!(
                    "step size underflow at s = {s} (stiffness {stiff:.3e})"
                )));
            }
            self.rk.step(self.sys, v, h, &mut self.full);
            self.rk.step(self.sys, v, 0.5 * h, &mut self.half);
            self.rk.step(self.sys, &self.half, 0.5 * h, &mut self.two);
            let mut err: f64 = 0.0;
            for i in 0..m {
                let e = (self.two[i] - self.full[i]).abs();
                // an unactivated leak component stays at -inf in both
                if e.is_finite() {
                    err = err.max(e);
                } else if self.two[i] != self.full[i] {
                    err = f64::INFINITY;
                }
            }
            err /= 15.0;
            if err.is_nan() || self.two.iter().any(|x| x.is_nan()) {
                return Err(LilypadError::Integrator(format!("NaN in log u at s = {s}")));
            }
            if err <= self.opts.tol {
                for i in 0..m {
                    let d = self.two[i] - self.full[i];
                    v[i] = if d.is_finite() { self.two[i] + d / 15.0 } else { self.two[i] };
                }
                s = if last { target } else { s + h };
                self.stats.accepted += 1;
                self.stats.max_error = self.stats.max_error.max(err);
                self.stats.min_step = self.stats.min_step.min(h);
                let grow = if err > 0.0 {
                    (0.9 * (self.opts.tol / err).powf(0.2)).clamp(0.2, 4.0)
                } else {
                    4.0
                };
                if !last || grow < 1.0 {
                    self.h = h * grow;
                }
            } else {
                self.stats.rejected += 1;
                let shrink = if err.is_finite() {
                    (0.9 * (self.opts.tol / err).powf(0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                self.h = h * shrink;
            }
        }
        Ok(())
    }
}

/// Leading small-time behaviour `u(z, s) ≈ s^{|z|} / Π_i |z_i|!`, obtained by
/// counting shortest lattice paths, and the matching absorbed mass.
fn initial_state(env: &Environment, s0: f64) -> Vec<f64> {
    let w = env.window();
    let n = env.len();
    let mut v = vec![0.0; n + 1];
    let ls = s0.ln();
    for (z, vz) in v.iter_mut().enumerate().take(n) {
        let c = w.coords_of(z);
        let log_fact: f64 = c.iter().map(|&x| ln_gamma(x.unsigned_abs() as f64 + 1.0)).sum();
        *vz = w.norm(z) as f64 * ls - log_fact;
    }
    // ∫_0^{s0} Σ out(z) u(z, s) ds with u ∝ s^{|z|}
    let mut terms = Vec::new();
    for z in 0..n {
        let k = w.outside_neighbors(z);
        if k > 0 {
            terms.push((k as f64).ln() + v[z] + ls - (w.norm(z) as f64 + 1.0).ln());
        }
    }
    v[n] = log_sum_exp(&terms);
    v
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn delta_state(env: &Environment) -> Vec<f64> {
    let mut v = vec![f64::NEG_INFINITY; env.len()];
    v[env.origin()] = 0.0;
    v
}

/// Solves up to macro time `t_end` on `grid` equal steps.
pub fn solve_pam(env: &Environment, t_end: f64, grid: usize) -> Result<PamField<'_>> {
    solve_pam_micro(env, t_end * env.scaling().t, grid, PamOptions::default())
}

/// Solves up to microscopic time `s_end` on `grid` equal steps.
pub fn solve_pam_micro(
    env: &Environment,
    s_end: f64,
    grid: usize,
    opts: PamOptions,
) -> Result<PamField<'_>> {
    solve_pam_with_potential(env, env.xi(), s_end, grid, opts)
}

/// Same as [`solve_pam_micro`] with an explicit nonnegative raw potential on
/// the window of `env`, for instance `xi ≡ 0`.
pub fn solve_pam_with_potential<'a>(
    env: &'a Environment,
    xi: &[f64],
    s_end: f64,
    grid: usize,
    opts: PamOptions,
) -> Result<PamField<'a>> {
    if xi.len() != env.len() {
        return Err(LilypadError::EnvironmentMismatch);
    }
    if xi.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("potential must be finite and nonnegative"));
    }
    if env.is_empty() {
        return Err(invalid("empty window"));
    }
    if grid == 0 {
        return Err(invalid("grid must have at least one step"));
    }
    if !(s_end > 0.0) || !s_end.is_finite() {
        return Err(invalid(format!("horizon {s_end} must be positive")));
    }
    let times: Vec<f64> = (0..=grid)
        .map(|k| if k == grid { s_end } else { s_end * k as f64 / grid as f64 })
        .collect();
    let sys = System::new(env, xi);
    let s0 = opts.start.min(times[1] * 1e-3);
    let mut v = initial_state(env, s0);
    let mut integ = Integrator::new(&sys, opts);
    let mut logu = vec![delta_state(env)];
    let mut log_leak = vec![f64::NEG_INFINITY];
    let mut s = s0;
    for &target in &times[1..] {
        integ.advance(&mut v, s, target)?;
        s = target;
        logu.push(v[..env.len()].to_vec());
        log_leak.push(v[env.len()]);
    }
    Ok(PamField {
        env,
        times,
        logu,
        log_leak,
        stats: integ.stats,
        xi: xi.to_vec(),
        opts,
    })
}

impl<'a> PamField<'a> {
    pub fn env(&self) -> &'a Environment {
        self.env
    }

    /// Grid index of macro time `t`.
    fn grid_index(&self, t: f64) -> Result<usize> {
        let s = t * self.env.scaling().t;
        self.times
            .iter()
            .position(|&g| (g - s).abs() <= 1e-12 * s.abs().max(1.0))
            .ok_or(LilypadError::UnknownTime(t))
    }

    /// Macro grid times.
    pub fn macro_times(&self) -> Vec<f64> {
        let t = self.env.scaling().t;
        self.times.iter().map(|s| s / t).collect()
    }

    /// `Σ_z u(z, s_k)`.
    pub fn mass(&self, k: usize) -> f64 {
        self.logu[k].iter().map(|v| v.exp()).sum()
    }

    pub fn leak(&self, k: usize) -> f64 {
        self.log_leak[k].exp()
    }

    /// `Lambda_T(z, t) = log_+ u(z, tT) / (a(T) T)` at a grid time.
    pub fn pam_growth(&self, t: f64) -> Result<MassField<'a>> {
        let k = self.grid_index(t)?;
        let s = self.env.scaling();
        let scale = s.a_t * s.t;
        let values = self.logu[k].iter().map(|&v| v.max(0.0) / scale).collect();
        Ok(MassField::new(self.env, t, values, MassKind::PamGrowth))
    }

    /// Microscopic first time with `u ≥ 1`, `+inf` if not reached on the
    /// grid. Crossings are bracketed by grid times and refined by bisection,
    /// re-integrating from the left grid state.
    pub fn crossing_times(&self) -> Result<Vec<f64>> {
        let n = self.env.len();
        let mut out = vec![f64::INFINITY; n];
        out[self.env.origin()] = 0.0;
        let sys = System::new(self.env, &self.xi);
        for k in 0..self.times.len() - 1 {
            let crossing: Vec<usize> = (0..n)
                .filter(|&z| out[z].is_infinite() && self.logu[k + 1][z] >= 0.0)
                .collect();
            if crossing.is_empty() {
                continue;
            }
            let mut state = self.logu[k].clone();
            state.push(self.log_leak[k]);
            if k == 0 {
                state = initial_state(self.env, self.opts.start.min(self.times[1] * 1e-3));
            }
            let start = if k == 0 {
                self.opts.start.min(self.times[1] * 1e-3)
            } else {
                self.times[k]
            };
            self.refine(&sys, state, start, self.times[k + 1], crossing, 0, &mut out)?;
        }
        Ok(out)
    }

    /// Shared bisection over `[a, b]` for all sites crossing inside it;
    /// `state` is the solution at `a`.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        sys: &System,
        state: Vec<f64>,
        a: f64,
        b: f64,
        sites: Vec<usize>,
        depth: u32,
        out: &mut [f64],
    ) -> Result<()> {
        if depth >= self.opts.refine_depth {
            for z in sites {
                out[z] = 0.5 * (a + b);
            }
            return Ok(());
        }
        let mid = 0.5 * (a + b);
        let mut at_mid = state.clone();
        Integrator::new(sys, self.opts).advance(&mut at_mid, a, mid)?;
        let (left, right): (Vec<usize>, Vec<usize>) =
            sites.into_iter().partition(|&z| at_mid[z] >= 0.0);
        if !left.is_empty() {
            self.refine(sys, state, a, mid, left, depth + 1, out)?;
        }
        if !right.is_empty() {
            self.refine(sys, at_mid, mid, b, right, depth + 1, out)?;
        }
        Ok(())
    }

    /// `T_T(z)`: macro first time with `u ≥ 1`.
    pub fn pam_hitting(&self) -> Result<Vec<f64>> {
        let t = self.env.scaling().t;
        Ok(self.crossing_times()?.into_iter().map(|s| s / t).collect())
    }

    /// `S_T^PAM(t)` from precomputed hitting times.
    pub fn support(&self, hitting: &[f64], t: f64) -> SupportSet {
        SupportSet::from_values(self.env, hitting, t, SupportSource::Pam)
    }

    /// One row per (grid time, site): `s coords logu`.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pam logu")?;
        writeln!(out, "steps {} rejected {}", self.stats.accepted, self.stats.rejected)?;
        writeln!(out, "s site logu")?;
        let w = self.env.window();
        for (k, s) in self.times.iter().enumerate() {
            for z in 0..self.env.len() {
                let coords: Vec<String> = w.coords_of(z).iter().map(|c| c.to_string()).collect();
                writeln!(out, "{} {} {}", fmt_f64(*s), coords.join(","), fmt_f64(self.logu[k][z]))?;
            }
        }
        Ok(())
    }
}
