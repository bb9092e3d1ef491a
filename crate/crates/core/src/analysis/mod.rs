//! Statistics comparing simulated, numerical and lilypad fields.

mod bounds;
mod compare;
mod scenario;

use std::collections::{HashMap, VecDeque};

pub use bounds::{error_terms, jump_tail, log_jump_tail, log_poisson_upper_tail, stirling_log_bound};
pub use compare::{compare, ComparisonReport, TimeRow};
pub use scenario::{build_scenario, check_scenario, Placement, ScenarioCheck, ScenarioSpec, Variant};

use crate::brw::BRWRecord;
use crate::error::{invalid, LilypadError, Result};
use crate::lattice::SiteId;
use crate::lilypad::{MassField, SupportSet};

/// Bounding boxes above this many cells fall back to the direct double loop.
const MAX_RASTER: usize = 1 << 22;

/// ℓ1 Hausdorff distance in macro units.
pub fn hausdorff(a: &SupportSet, b: &SupportSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(LilypadError::EmptySet);
    }
    if a.r_t != b.r_t || a.sites[0].dim() != b.sites[0].dim() {
        return Err(LilypadError::EnvironmentMismatch);
    }
    Ok(hausdorff_micro(&a.sites, &b.sites) as f64 / a.r_t)
}

/// Integer ℓ1 Hausdorff distance between nonempty site sets.
pub fn hausdorff_micro(a: &[SiteId], b: &[SiteId]) -> i64 {
    let d = a[0].dim();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for s in a.iter().chain(b) {
        for k in 0..d {
            lo[k] = lo[k].min(s.0[k]);
            hi[k] = hi[k].max(s.0[k]);
        }
    }
    let cells = (0..d).try_fold(1usize, |acc, k| {
        acc.checked_mul((hi[k] - lo[k] + 1) as usize)
            .filter(|&c| c <= MAX_RASTER)
    });
    match cells {
        Some(_) => {
            let da = distance_transform(b, &lo, &hi);
            let db = distance_transform(a, &lo, &hi);
            let side = |set: &[SiteId], dist: &[i64]| {
                set.iter()
                    .map(|s| dist[raster_index(&s.0, &lo, &hi)])
                    .max()
                    .unwrap_or(0)
            };
            side(a, &da).max(side(b, &db))
        }
        None => {
            let side = |x: &[SiteId], y: &[SiteId]| {
                x.iter()
                    .map(|p| y.iter().map(|q| p.l1_to(q)).min().unwrap_or(0))
                    .max()
                    .unwrap_or(0)
            };
            side(a, b).max(side(b, a))
        }
    }
}

fn raster_index(c: &[i64], lo: &[i64], hi: &[i64]) -> usize {
    let mut idx = 0usize;
    for k in 0..c.len() {
        idx = idx * (hi[k] - lo[k] + 1) as usize + (c[k] - lo[k]) as usize;
    }
    idx
}

/// Multi-source BFS over the bounding box. Monotone lattice paths between
/// two points of the box stay in the box, so graph distance equals ℓ1
/// distance.
fn distance_transform(sources: &[SiteId], lo: &[i64], hi: &[i64]) -> Vec<i64> {
    let d = lo.len();
    let dims: Vec<usize> = (0..d).map(|k| (hi[k] - lo[k] + 1) as usize).collect();
    let len: usize = dims.iter().product();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut dist = vec![-1i64; len];
    let mut queue = VecDeque::new();
    for s in sources {
        let i = raster_index(&s.0, lo, hi);
        if dist[i] < 0 {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for k in 0..d {
            let pos = (i / strides[k]) % dims[k];
            if pos > 0 && dist[i - strides[k]] < 0 {
                dist[i - strides[k]] = dist[i] + 1;
                queue.push_back(i - strides[k]);
            }
            if pos + 1 < dims[k] && dist[i + strides[k]] < 0 {
                dist[i + strides[k]] = dist[i] + 1;
                queue.push_back(i + strides[k]);
            }
        }
    }
    dist
}

/// Site of the largest value; ties go to the lexicographically smallest site.
pub fn maximizer(field: &MassField<'_>) -> SiteId {
    let v = field.values();
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    field.env().site(best)
}

/// Fraction of particles at macro time `t` in the open ℓ1 ball of macro
/// radius `radius` around `center`.
pub fn intermittency_ratio(
    record: &BRWRecord<'_>,
    t: f64,
    center: &SiteId,
    radius: f64,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(invalid(format!("radius {radius} must be positive")));
    }
    let snap = record.snapshot(t)?;
    let env = record.env();
    let total: f64 = snap.counts.iter().sum();
    if total <= 0.0 {
        return Err(LilypadError::ZeroMass);
    }
    let micro = radius * env.scaling().r_t;
    let w = env.window();
    let inside: f64 = (0..env.len())
        .filter(|&i| {
            let c = w.coords_of(i);
            let dist: i64 = c.iter().zip(&center.0).map(|(a, b)| (a - b).abs()).sum();
            (dist as f64) < micro
        })
        .map(|i| snap.counts[i])
        .sum();
    Ok(inside / total)
}

/// Number of nearest-neighbour components of a site set.
pub fn connected_components(set: &SupportSet) -> usize {
    let index: HashMap<&SiteId, usize> = set.sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut parent: Vec<usize> = (0..set.sites.len()).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut nb = SiteId(Vec::new());
    for (i, s) in set.sites.iter().enumerate() {
        for k in 0..s.dim() {
            nb.0.clone_from(&s.0);
            nb.0[k] += 1;
            if let Some(&j) = index.get(&nb) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..parent.len()).filter(|&i| root(&mut parent, i) == i).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Environment, ScalingConstants};
    use crate::lilypad::{MassKind, SupportSource};

    fn set(points: &[&[i64]]) -> SupportSet {
        SupportSet {
            sites: points.iter().map(|p| SiteId(p.to_vec())).collect(),
            t: 0.0,
            source: SupportSource::Lilypad,
            r_t: 1.0,
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = set(&[&[0, 0]]);
        let b = set(&[&[0, 0], &[1, 0]]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        assert_eq!(hausdorff(&b, &a).unwrap(), 1.0);
        let empty = set(&[]);
        assert!(matches!(hausdorff(&a, &empty), Err(LilypadError::EmptySet)));
    }

    #[test]
    fn hausdorff_far_sets_use_direct_loop() {
        let a = set(&[&[0, 0]]);
        let b = set(&[&[5_000, 5_000], &[0, 1]]);
        assert_eq!(hausdorff(&a, &b).unwrap(), 10_000.0);
    }

    #[test]
    fn components_examples() {
        assert_eq!(connected_components(&set(&[&[0, 0], &[2, 0]])), 2);
        assert_eq!(connected_components(&set(&[&[0, 0], &[1, 0], &[1, 1]])), 1);
        assert_eq!(connected_components(&set(&[&[0, 0], &[1, 1]])), 2);
        assert_eq!(connected_components(&set(&[])), 0);
    }

    #[test]
    fn maximizer_tie_rule() {
        let s = ScalingConstants::from_parts(1, 2.0, std::f64::consts::E, 1.0, 1.0).unwrap();
        let env = Environment::with_potential(s, 3.5, &[]).unwrap();
        let flat = MassField::new(&env, 1.0, vec![2.0; env.len()], MassKind::MT);
        assert_eq!(maximizer(&flat), SiteId(vec![-3]));
        let mut v = vec![0.0; env.len()];
        v[4] = 1.0;
        let spike = MassField::new(&env, 1.0, v, MassKind::MT);
        assert_eq!(maximizer(&spike), env.site(4));
    }
}
