//! Lilypad hitting times, mass fields and supports.
//!
//! The BRW lilypad hitting time is a first-passage time on the complete
//! directed graph over the window, where the edge `y -> z` takes
//! `q |z - y| / xi_T(y)`. The PAM lilypad replaces the chain of lilypads by a
//! single launching site.

use crate::environment::Environment;
use crate::error::{invalid, LilypadError, Result};
use crate::lattice::SiteId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Brw,
    Pam,
}

/// Per-site hitting times with the predecessor structure that attains them.
#[derive(Clone, Debug)]
pub struct LilypadField<'a> {
    env: &'a Environment,
    h: Vec<f64>,
    pred: Vec<Option<usize>>,
    settle_order: Vec<usize>,
    kind: FieldKind,
}

#[inline]
fn travel_time(q: f64, dist: f64, xi: f64) -> f64 {
    q * dist / xi
}

/// Label-setting first passage from the origin over the complete graph.
///
/// Scan-based Dijkstra: every settle step relaxes all remaining sites, so a
/// heap would not help. Ties in `h` settle the lexicographically smaller site
/// first, and equal relaxations keep the lexicographically smaller
/// predecessor.
pub fn solve_hitting_times(env: &Environment) -> LilypadField<'_> {
    let n = env.len();
    let q = env.scaling().q;
    let xi_t = env.xi_t();
    let mut h = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    h[env.origin()] = 0.0;

    for _ in 0..n {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if !settled[i] && h[i].is_finite() && best.is_none_or(|b| h[i] < h[b]) {
                best = Some(i);
            }
        }
        let Some(y) = best else { break };
        settled[y] = true;
        order.push(y);
        let hy = h[y];
        let speed = xi_t[y];
        for z in 0..n {
            if settled[z] {
                continue;
            }
            let cand = hy + travel_time(q, env.dist(y, z), speed);
            if cand < h[z] || (cand == h[z] && pred[z].is_some_and(|p| y < p)) {
                h[z] = cand;
                pred[z] = Some(y);
            }
        }
    }

    LilypadField {
        env,
        h,
        pred,
        settle_order: order,
        kind: FieldKind::Brw,
    }
}

/// PAM lilypad hitting times `tau_T(z) = min_y q (|y| + |z - y|) / xi_T(y)`.
///
/// `pred(z)` is the launching site `y` when it differs from `z`.
pub fn pam_tau(env: &Environment) -> LilypadField<'_> {
    let n = env.len();
    let q = env.scaling().q;
    let xi_t = env.xi_t();
    let w = env.window();
    let r_t = env.scaling().r_t;
    let mut h = vec![f64::INFINITY; n];
    let mut arg = vec![usize::MAX; n];
    for y in 0..n {
        let ny = w.norm(y);
        for z in 0..n {
            let micro = ny + w.l1_between(y, z);
            let cand = travel_time(q, micro as f64 / r_t, xi_t[y]);
            if cand < h[z] {
                h[z] = cand;
                arg[z] = y;
            }
        }
    }
    let pred = arg
        .iter()
        .enumerate()
        .map(|(z, &y)| (y != z).then_some(y))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    LilypadField {
        env,
        h,
        pred,
        settle_order: order,
        kind: FieldKind::Pam,
    }
}

impl<'a> LilypadField<'a> {
    pub fn env(&self) -> &'a Environment {
        self.env
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Hitting time per site index (`+inf` when unsettled).
    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn value(&self, i: usize) -> f64 {
        self.h[i]
    }

    pub fn pred(&self, i: usize) -> Option<usize> {
        self.pred[i]
    }

    pub fn settle_order(&self) -> &[usize] {
        &self.settle_order
    }

    pub fn is_settled(&self, i: usize) -> bool {
        self.h[i].is_finite()
    }

    /// Hitting time at a site.
    pub fn at(&self, site: &SiteId) -> Result<f64> {
        Ok(self.h[self.env.window().require(site)?])
    }

    /// Predecessor chain `z = y_0, y_1, ..., y_n = 0` as site indices.
    pub fn path_indices(&self, z: usize) -> Result<Vec<usize>> {
        if !self.is_settled(z) {
            return Err(LilypadError::Unsettled(self.env.site(z).0));
        }
        let origin = self.env.origin();
        let mut path = vec![z];
        let mut cur = z;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
            if path.len() > self.h.len() + 1 {
                unreachable!("predecessor links form a cycle");
            }
        }
        if cur != origin {
            // PAM fields launch from `y`, which is reached straight from the origin
            path.push(origin);
        }
        Ok(path)
    }

    /// Optimal path from `z` back to the origin.
    pub fn optimal_path(&self, z: &SiteId) -> Result<Vec<SiteId>> {
        let i = self.env.window().require(z)?;
        Ok(self
            .path_indices(i)?
            .into_iter()
            .map(|j| self.env.site(j))
            .collect())
    }

    /// Weighted cost of a site path under this field's kind.
    pub fn path_cost(&self, path: &[usize]) -> f64 {
        let q = self.env.scaling().q;
        let xi_t = self.env.xi_t();
        match self.kind {
            FieldKind::Brw => path
                .windows(2)
                .map(|w| travel_time(q, self.env.dist(w[0], w[1]), xi_t[w[1]]))
                .sum(),
            FieldKind::Pam => {
                let z = path[0];
                let y = if path.len() > 2 { path[1] } else { z };
                travel_time(q, self.env.norm(y) + self.env.dist(y, z), xi_t[y])
            }
        }
    }

    /// Time `t* = q R / max_{L_T(0,R)} xi_T` below which every hitting time
    /// is unaffected by the potential outside `B(0, R)`.
    pub fn exactness_certificate(&self, radius: f64) -> Result<f64> {
        if self.kind != FieldKind::Brw {
            return Err(invalid("exactness certificate applies to BRW lilypad fields"));
        }
        let max = self.env.max_potential(radius)?;
        Ok(if max > 0.0 {
            self.env.scaling().q * radius / max
        } else {
            f64::INFINITY
        })
    }

    /// Sites whose value is certified exact by the certificate at the full
    /// window radius.
    pub fn certified(&self) -> Result<Vec<bool>> {
        let t_star = self.exactness_certificate(self.env.window_radius())?;
        Ok(self.h.iter().map(|&h| h < t_star).collect())
    }

    /// `m_T(z, t)` for a BRW field.
    pub fn mass_field(&self, t: f64, mode: EnvelopeMode) -> Result<MassField<'a>> {
        if self.kind != FieldKind::Brw {
            return Err(invalid("m_T is defined for BRW lilypad fields; use pam_lambda"));
        }
        check_time(t)?;
        let values = cone_sup(self.env, &self.h, t, mode);
        Ok(MassField {
            env: self.env,
            t,
            values,
            kind: MassKind::MT,
        })
    }

    /// `sup_y xi_T(y) (t - tau_T(y))_+ - q|z - y|`, which equals `lambda_T` on
    /// the same window.
    pub fn lambda_alternate(&self, t: f64) -> Result<MassField<'a>> {
        if self.kind != FieldKind::Pam {
            return Err(invalid("alternate lambda form needs a PAM lilypad field"));
        }
        check_time(t)?;
        Ok(MassField {
            env: self.env,
            t,
            values: cone_sup(self.env, &self.h, t, EnvelopeMode::Envelope),
            kind: MassKind::LambdaT,
        })
    }

    /// One row per site: `coords value`.
    pub fn write_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_columns(self.env, &self.h, out)
    }

    /// Sites with hitting value `≤ t`.
    pub fn support(&self, t: f64) -> Result<SupportSet> {
        check_time(t)?;
        let source = match self.kind {
            FieldKind::Brw => SupportSource::Lilypad,
            FieldKind::Pam => SupportSource::PamLilypad,
        };
        Ok(SupportSet::from_values(self.env, &self.h, t, source))
    }
}

/// Columnar per-site table shared by all exported fields.
pub fn write_columns<W: std::io::Write>(env: &Environment, values: &[f64], mut out: W) -> Result<()> {
    let w = env.window();
    for (i, v) in values.iter().enumerate() {
        let coords: Vec<String> = w.coords_of(i).iter().map(|c| c.to_string()).collect();
        writeln!(out, "{} {}", coords.join(","), crate::environment::fmt_f64(*v))?;
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time {t} must be finite and non-negative")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeMode {
    /// O(n²) scan over all launch sites.
    Naive,
    /// Max-plus cone envelope by lattice sweeps.
    Envelope,
}

/// `sup_y { xi_T(y) (t - h(y))_+ - q |z - y| }` for every window site.
fn cone_sup(env: &Environment, h: &[f64], t: f64, mode: EnvelopeMode) -> Vec<f64> {
    let xi_t = env.xi_t();
    let q = env.scaling().q;
    let f: Vec<f64> = h
        .iter()
        .zip(xi_t)
        .map(|(&h, &xi)| if h < t { xi * (t - h) } else { 0.0 })
        .collect();
    let n = f.len();
    match mode {
        EnvelopeMode::Naive => (0..n)
            .map(|z| {
                (0..n)
                    .map(|y| f[y] - q * env.dist(y, z))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect(),
        EnvelopeMode::Envelope => cone_envelope(env, &f),
    }
}

/// Max-plus propagation of `f` with slope `q` per unit of ℓ1 distance.
///
/// Each site keeps the launch site of its current best cone, and neighbours
/// offer their launch site in alternating lexicographic sweeps until nothing
/// changes. Re-evaluating the offered cone at the receiving site makes the
/// result agree with the direct scan up to rounding of the cone values.
fn cone_envelope(env: &Environment, f: &[f64]) -> Vec<f64> {
    let w = env.window();
    let q = env.scaling().q;
    let n = f.len();
    let mut m = f.to_vec();
    let mut src: Vec<usize> = (0..n).collect();
    let relax = |z: usize, m: &mut [f64], src: &mut [usize]| -> bool {
        let mut changed = false;
        for nb in w.neighbors(z) {
            let s = src[nb];
            let cand = f[s] - q * env.dist(s, z);
            if cand > m[z] {
                m[z] = cand;
                src[z] = s;
                changed = true;
            }
        }
        changed
    };
    let max_rounds = n + 2;
    for round in 0.. {
        let mut changed = false;
        for z in 0..n {
            changed |= relax(z, &mut m, &mut src);
        }
        for z in (0..n).rev() {
            changed |= relax(z, &mut m, &mut src);
        }
        if !changed {
            break;
        }
        assert!(round < max_rounds, "cone envelope failed to converge");
    }
    m
}

/// `lambda_T(z, t) = max(0, sup_y xi_T(y) t - q|y| - q|z - y|)` by direct scan.
pub fn pam_lambda(env: &Environment, t: f64) -> Result<MassField<'_>> {
    check_time(t)?;
    let n = env.len();
    let q = env.scaling().q;
    let xi_t = env.xi_t();
    let launch: Vec<f64> = (0..n).map(|y| xi_t[y] * t - q * env.norm(y)).collect();
    let values = (0..n)
        .map(|z| {
            (0..n)
                .map(|y| launch[y] - q * env.dist(y, z))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(MassField {
        env,
        t,
        values,
        kind: MassKind::LambdaT,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassKind {
    /// `m_T`, lilypad mass.
    MT,
    /// `lambda_T`, PAM lilypad mass.
    LambdaT,
    /// `M_T`, rescaled BRW counts.
    BrwMT,
    /// `Lambda_T`, rescaled PAM solution.
    PamGrowth,
}

/// A per-site real field at one macroscopic time.
#[derive(Clone, Debug)]
pub struct MassField<'a> {
    env: &'a Environment,
    t: f64,
    values: Vec<f64>,
    kind: MassKind,
}

impl<'a> MassField<'a> {
    pub fn new(env: &'a Environment, t: f64, values: Vec<f64>, kind: MassKind) -> Self {
        assert_eq!(values.len(), env.len(), "one value per window site");
        MassField { env, t, values, kind }
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> MassKind {
        self.kind
    }

    pub fn at(&self, site: &SiteId) -> Result<f64> {
        Ok(self.values[self.env.window().require(site)?])
    }

    /// One row per site: `coords value`.
    pub fn write_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_columns(self.env, &self.values, out)
    }

    /// Maximum absolute difference to another field on the same window.
    pub fn max_abs_diff(&self, other: &MassField<'_>) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportSource {
    /// `s_T`: BRW lilypad.
    Lilypad,
    /// `S_T`: simulated BRW.
    Brw,
    /// `s_T^PAM`: PAM lilypad.
    PamLilypad,
    /// `S_T^PAM`: numerical PAM.
    Pam,
}

/// Finite set of lattice sites (micro coordinates) at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    pub sites: Vec<SiteId>,
    pub t: f64,
    pub source: SupportSource,
    pub r_t: f64,
}

impl SupportSet {
    /// Sites of `env` whose value is at most `t`.
    pub fn from_values(env: &Environment, values: &[f64], t: f64, source: SupportSource) -> Self {
        SupportSet {
            sites: (0..env.len())
                .filter(|&i| values[i] <= t)
                .map(|i| env.site(i))
                .collect(),
            t,
            source,
            r_t: env.scaling().r_t,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: &SiteId) -> bool {
        self.sites.binary_search(site).is_ok()
    }
}
