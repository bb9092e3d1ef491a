//! Exact Gillespie simulation of the branching random walk on a window.
//!
//! Particles jump to each lattice neighbour at rate 1 and split in two at rate
//! `xi(z)`. Particles are exchangeable within a site, so the state is a count
//! per site and events are drawn from per-site aggregated rates. A particle
//! that jumps out of the window is absorbed and counted as leak.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::environment::{derive_stream, fmt_f64, uniform_open_closed, Environment};
use crate::error::{invalid, LilypadError, Result};
use crate::lilypad::{MassField, MassKind, SupportSet, SupportSource};

const REFRESH_EVERY: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimCaps {
    pub max_population: u64,
    pub max_events: u64,
}

impl Default for SimCaps {
    fn default() -> Self {
        SimCaps {
            max_population: 10_000_000,
            max_events: 1_000_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    Population,
    Events,
}

impl Truncation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Truncation::Population => "max_population",
            Truncation::Events => "max_events",
        }
    }
}

/// Particle counts over the window at one requested time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Microscopic time.
    pub s: f64,
    pub counts: Vec<f64>,
    /// Particles whose ancestry never left the origin.
    pub stayers: u64,
}

impl Snapshot {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Output of one simulated realisation.
#[derive(Clone, Debug)]
pub struct BRWRecord<'a> {
    env: &'a Environment,
    pub snapshots: Vec<Snapshot>,
    /// Microscopic first-visit time per site, `+inf` if never visited.
    pub first_hit: Vec<f64>,
    /// Microscopic time at which the count first reaches `exp(mu_T)`.
    pub thresh_hit: Vec<f64>,
    pub truncated: Option<Truncation>,
    pub events: u64,
    pub leak: u64,
    pub seed: u64,
}

/// Fenwick tree over per-site rates.
struct RateTree {
    tree: Vec<f64>,
}

impl RateTree {
    fn new(n: usize) -> Self {
        RateTree {
            tree: vec![0.0; n + 1],
        }
    }

    fn rebuild(&mut self, rates: &[f64]) {
        let n = rates.len();
        self.tree[1..].copy_from_slice(rates);
        for i in 1..=n {
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                self.tree[j] += self.tree[i];
            }
        }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn reset(&mut self, x: f64) {
        self.sum = x;
        self.comp = 0.0;
    }
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon {horizon} must be finite and ≥ 0")));
    }
    for w in times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(invalid("snapshot times must be strictly increasing"));
        }
    }
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0) || t > horizon) {
        return Err(invalid(format!("snapshot time {t} is outside [0, {horizon}]")));
    }
    Ok(())
}

/// Simulates up to macro time `t_end` with snapshots at macro times.
pub fn simulate<'a>(
    env: &'a Environment,
    t_end: f64,
    snapshot_times: &[f64],
    seed: u64,
    caps: SimCaps,
) -> Result<BRWRecord<'a>> {
    let t = env.scaling().t;
    let micro: Vec<f64> = snapshot_times.iter().map(|&x| x * t).collect();
    check_times(snapshot_times, t_end)?;
    simulate_micro(env, t_end * t, &micro, seed, caps)
}

/// Simulates up to microscopic time `s_end`.
pub fn simulate_micro<'a>(
    env: &'a Environment,
    s_end: f64,
    snapshot_s: &[f64],
    seed: u64,
    caps: SimCaps,
) -> Result<BRWRecord<'a>> {
    check_times(snapshot_s, s_end)?;
    let w = env.window();
    let n = env.len();
    let d = env.scaling().d;
    let jump_rate = 2.0 * d as f64;
    let xi = env.xi();
    let origin = env.origin();
    let threshold = env.scaling().mu_t.exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut counts = vec![0u64; n];
    let mut stayers = 1u64;
    let mut population = 1u64;
    counts[origin] = 1;
    let site_rate = |i: usize, c: u64| c as f64 * (jump_rate + xi[i]);
    let mut rates = vec![0.0; n];
    rates[origin] = site_rate(origin, 1);
    let mut tree = RateTree::new(n);
    tree.rebuild(&rates);
    let mut total = Kahan::default();
    total.reset(rates[origin]);

    let mut first_hit = vec![f64::INFINITY; n];
    let mut thresh_hit = vec![f64::INFINITY; n];
    first_hit[origin] = 0.0;
    if 1.0 >= threshold {
        thresh_hit[origin] = 0.0;
    }

    let mut snapshots = Vec::with_capacity(snapshot_s.len());
    let mut next_snap = 0;
    let mut clock = 0.0;
    let mut events = 0u64;
    let mut leak = 0u64;
    let mut truncated = None;

    let mut take = |upto: f64, counts: &[u64], stayers: u64, snapshots: &mut Vec<Snapshot>| {
        while next_snap < snapshot_s.len() && snapshot_s[next_snap] <= upto {
            snapshots.push(Snapshot {
                s: snapshot_s[next_snap],
                counts: counts.iter().map(|&c| c as f64).collect(),
                stayers,
            });
            next_snap += 1;
        }
    };

    loop {
        if total.sum <= 0.0 {
            break;
        }
        let dt = -uniform_open_closed(&mut rng).ln() / total.sum;
        let when = clock + dt;
        if when > s_end {
            break;
        }
        take(when, &counts, stayers, &mut snapshots);
        if events >= caps.max_events {
            truncated = Some(Truncation::Events);
            break;
        }
        if population >= caps.max_population {
            truncated = Some(Truncation::Population);
            break;
        }
        clock = when;
        events += 1;

        let mut z = tree.find(rng.random::<f64>() * total.sum);
        if counts[z] == 0 {
            // rounding in the tree can land on an empty slot next to the target
            z = (0..n).rev().find(|&i| counts[i] > 0 && i <= z).unwrap_or_else(|| {
                (0..n).find(|&i| counts[i] > 0).expect("positive rate implies a particle")
            });
        }
        let is_stayer = z == origin && rng.random_range(0..counts[z]) < stayers;
        let total_site = jump_rate + xi[z];
        if rng.random::<f64>() * total_site < xi[z] {
            counts[z] += 1;
            population += 1;
            if is_stayer {
                stayers += 1;
            }
            tree.add(z, total_site);
            total.add(total_site);
            rates[z] += total_site;
            if counts[z] as f64 >= threshold && thresh_hit[z].is_infinite() {
                thresh_hit[z] = clock;
            }
        } else {
            counts[z] -= 1;
            if is_stayer {
                stayers -= 1;
            }
            tree.add(z, -total_site);
            total.add(-total_site);
            rates[z] -= total_site;
            let k = rng.random_range(0..2 * d);
            let mut target = w.coords_of(z).to_vec();
            target[k / 2] += if k % 2 == 0 { -1 } else { 1 };
            match w.index_of(&target) {
                Some(y) => {
                    counts[y] += 1;
                    let ry = jump_rate + xi[y];
                    tree.add(y, ry);
                    total.add(ry);
                    rates[y] += ry;
                    if first_hit[y].is_infinite() {
                        first_hit[y] = clock;
                    }
                    if counts[y] as f64 >= threshold && thresh_hit[y].is_infinite() {
                        thresh_hit[y] = clock;
                    }
                }
                None => {
                    leak += 1;
                    population -= 1;
                }
            }
        }
        if events % REFRESH_EVERY == 0 {
            for (i, r) in rates.iter_mut().enumerate() {
                *r = site_rate(i, counts[i]);
            }
            let exact: f64 = rates.iter().sum();
            debug_assert!((exact - total.sum).abs() <= 1e-9 * exact.max(1.0));
            total.reset(exact);
            tree.rebuild(&rates);
        }
    }
    take(f64::INFINITY, &counts, stayers, &mut snapshots);

    Ok(BRWRecord {
        env,
        snapshots,
        first_hit,
        thresh_hit,
        truncated,
        events,
        leak,
        seed,
    })
}

/// Independent replicates on streams derived from `seed`, in replicate order.
pub fn simulate_replicates<'a>(
    env: &'a Environment,
    s_end: f64,
    snapshot_s: &[f64],
    seed: u64,
    replicates: usize,
    caps: SimCaps,
) -> Result<Vec<BRWRecord<'a>>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|k| simulate_micro(env, s_end, snapshot_s, derive_stream(seed, k), caps))
        .collect()
}

impl<'a> BRWRecord<'a> {
    /// Record assembled from given hit times and snapshots, all microscopic.
    pub fn from_parts(
        env: &'a Environment,
        first_hit: Vec<f64>,
        thresh_hit: Vec<f64>,
        snapshots: Vec<Snapshot>,
    ) -> Result<Self> {
        let n = env.len();
        if first_hit.len() != n || thresh_hit.len() != n || snapshots.iter().any(|s| s.counts.len() != n) {
            return Err(LilypadError::EnvironmentMismatch);
        }
        Ok(BRWRecord {
            env,
            snapshots,
            first_hit,
            thresh_hit,
            truncated: None,
            events: 0,
            leak: 0,
            seed: 0,
        })
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    /// Snapshot at macro time `t`.
    pub fn snapshot(&self, t: f64) -> Result<&Snapshot> {
        let s = t * self.env.scaling().t;
        self.snapshots
            .iter()
            .find(|snap| (snap.s - s).abs() <= 1e-12 * s.abs().max(1.0))
            .ok_or(LilypadError::UnknownTime(t))
    }

    /// Macro snapshot times.
    pub fn times(&self) -> Vec<f64> {
        let t = self.env.scaling().t;
        self.snapshots.iter().map(|s| s.s / t).collect()
    }

    /// `M_T(z, t) = log_+ N(z, tT) / (a(T) T)`.
    pub fn rescaled_counts(&self, t: f64) -> Result<MassField<'a>> {
        let snap = self.snapshot(t)?;
        let s = self.env.scaling();
        let scale = s.a_t * s.t;
        let values = snap
            .counts
            .iter()
            .map(|&c| if c > 1.0 { c.ln() / scale } else { 0.0 })
            .collect();
        Ok(MassField::new(self.env, t, values, MassKind::BrwMT))
    }

    /// Macro `(H_T, H'_T)` per site; unvisited sites are `+inf`.
    pub fn hitting_fields(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.env.scaling().t;
        (
            self.first_hit.iter().map(|&s| s / t).collect(),
            self.thresh_hit.iter().map(|&s| s / t).collect(),
        )
    }

    /// `S_T(t)`: sites visited by macro time `t`.
    pub fn support(&self, t: f64) -> SupportSet {
        let (h, _) = self.hitting_fields();
        SupportSet::from_values(self.env, &h, t, SupportSource::Brw)
    }

    /// Event summary followed by one row per (snapshot, site).
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# brw record")?;
        writeln!(out, "seed {}", self.seed)?;
        writeln!(out, "events {}", self.events)?;
        writeln!(out, "leak {}", self.leak)?;
        writeln!(
            out,
            "truncated {}",
            self.truncated.map_or("none", |t| t.as_str())
        )?;
        writeln!(out, "s site count first_hit thresh_hit")?;
        let w = self.env.window();
        for snap in &self.snapshots {
            for i in 0..self.env.len() {
                let coords: Vec<String> = w.coords_of(i).iter().map(|c| c.to_string()).collect();
                writeln!(
                    out,
                    "{} {} {} {} {}",
                    fmt_f64(snap.s),
                    coords.join(","),
                    snap.counts[i],
                    fmt_f64(self.first_hit[i]),
                    fmt_f64(self.thresh_hit[i])
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ScalingConstants;
    use crate::lattice::SiteId;

    fn flat(c: f64, radius: f64) -> Environment {
        let s = ScalingConstants::from_parts(1, 2.0, std::f64::consts::E, 1.0, 1.0).unwrap();
        let env = Environment::with_potential(s, radius, &[]).unwrap();
        let all: Vec<_> = (0..env.len()).map(|i| (env.site(i), c)).collect();
        env.with_overrides(&all).unwrap()
    }

    #[test]
    fn fenwick_selects_by_prefix() {
        let rates = [1.0, 0.0, 2.0, 3.0];
        let mut t = RateTree::new(4);
        t.rebuild(&rates);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.9), 2);
        assert_eq!(t.find(3.0), 3);
        t.add(1, 5.0);
        assert_eq!(t.find(1.5), 1);
    }

    #[test]
    fn origin_hit_at_zero_and_threshold_ordering() {
        let env = flat(3.0, 6.0);
        let rec = simulate_micro(&env, 2.0, &[0.0, 1.0, 2.0], 7, SimCaps::default()).unwrap();
        assert_eq!(rec.first_hit[env.origin()], 0.0);
        for i in 0..env.len() {
            assert!(rec.thresh_hit[i] >= rec.first_hit[i]);
        }
        assert_eq!(rec.snapshots.len(), 3);
        assert_eq!(rec.snapshots[0].total(), 1.0);
        let (h, hp) = rec.hitting_fields();
        assert_eq!(h[env.origin()], 0.0);
        assert!(hp.iter().zip(&h).all(|(a, b)| a >= b));
    }

    #[test]
    fn populations_never_decrease_without_leak() {
        let env = flat(2.0, 30.0);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.2).collect();
        let rec = simulate_micro(&env, 2.0, &times, 3, SimCaps::default()).unwrap();
        assert_eq!(rec.leak, 0);
        for w in rec.snapshots.windows(2) {
            assert!(w[1].total() >= w[0].total());
        }
    }

    #[test]
    fn far_site_unvisited_in_short_horizon() {
        let env = flat(1.0, 40.0);
        let rec = simulate_micro(&env, 0.01, &[], 1, SimCaps::default()).unwrap();
        let far = env.window().index_of(&[30]).unwrap();
        assert!(rec.hitting_fields().0[far].is_infinite());
    }

    #[test]
    fn population_cap_truncates() {
        let env = flat(5.0, 10.0);
        let caps = SimCaps {
            max_population: 50,
            max_events: u64::MAX,
        };
        let rec = simulate_micro(&env, 10.0, &[10.0], 1, caps).unwrap();
        assert_eq!(rec.truncated, Some(Truncation::Population));
        let caps = SimCaps {
            max_population: u64::MAX,
            max_events: 10,
        };
        let rec = simulate_micro(&env, 10.0, &[], 1, caps).unwrap();
        assert_eq!(rec.truncated, Some(Truncation::Events));
        assert_eq!(rec.events, 10);
    }

    #[test]
    fn narrow_window_leaks() {
        let env = flat(1.0, 1.0);
        let rec = simulate_micro(&env, 5.0, &[], 2, SimCaps::default()).unwrap();
        assert!(rec.leak > 0);
    }

    #[test]
    fn rescaled_counts_rules() {
        let env = flat(1.0, 3.0);
        let s = env.scaling();
        let scale = s.a_t * s.t;
        let x = 0.75;
        let mut counts = vec![0.0; env.len()];
        counts[0] = 1.0;
        counts[1] = (scale * x).exp();
        let snap = Snapshot {
            s: s.t,
            counts,
            stayers: 0,
        };
        let rec = BRWRecord::from_parts(
            &env,
            vec![0.0; env.len()],
            vec![0.0; env.len()],
            vec![snap],
        )
        .unwrap();
        let m = rec.rescaled_counts(1.0).unwrap();
        assert_eq!(m.values()[0], 0.0);
        assert!((m.values()[1] - x).abs() < 1e-15);
        assert_eq!(m.values()[2], 0.0);
        assert!(matches!(rec.rescaled_counts(0.5), Err(LilypadError::UnknownTime(_))));
    }

    #[test]
    fn seeded_runs_reproduce() {
        let env = flat(2.0, 8.0);
        let a = simulate_micro(&env, 1.5, &[1.5], 11, SimCaps::default()).unwrap();
        let b = simulate_micro(&env, 1.5, &[1.5], 11, SimCaps::default()).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.first_hit, b.first_hit);
        let site = SiteId(vec![0]);
        assert!(env.window().require(&site).is_ok());
    }

    #[test]
    fn rejects_bad_snapshot_times() {
        let env = flat(1.0, 3.0);
        assert!(simulate_micro(&env, 1.0, &[0.5, 0.2], 1, SimCaps::default()).is_err());
        assert!(simulate_micro(&env, 1.0, &[2.0], 1, SimCaps::default()).is_err());
        assert!(simulate_micro(&env, -1.0, &[], 1, SimCaps::default()).is_err());
    }
}
