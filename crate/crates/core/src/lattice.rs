//! Finite ℓ1 windows of the integer lattice.
//!
//! Sites are stored densely over the bounding box `[-n, n]^d` with an
//! in-window mask. Site indices follow lexicographic order of the micro
//! coordinates, so comparing indices is the same as comparing coordinates
//! lexicographically.

use std::fmt;

use crate::error::{LilypadError, Result};

const OUTSIDE: usize = usize::MAX;

/// Integer micro-coordinate of a lattice site. Macro coordinates are derived
/// by dividing by the space scale.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteId(pub Vec<i64>);

impl SiteId {
    pub fn origin(d: usize) -> Self {
        SiteId(vec![0; d])
    }

    /// Unit vector `k * e_axis`.
    pub fn on_axis(d: usize, axis: usize, k: i64) -> Self {
        let mut c = vec![0; d];
        c[axis] = k;
        SiteId(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn l1_to(&self, other: &SiteId) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn to_macro(&self, r_t: f64) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64 / r_t).collect()
    }

    /// Nearest lattice site to a macro point that lies on the lattice.
    pub fn from_macro(z: &[f64], r_t: f64) -> Self {
        SiteId(z.iter().map(|&x| (x * r_t).round() as i64).collect())
    }

    /// The floor map `[z]_T`. Points that sit on the lattice up to rounding
    /// map to themselves.
    pub fn floor_of(z: &[f64], r_t: f64) -> Self {
        SiteId(
            z.iter()
                .map(|&x| {
                    let p = x * r_t;
                    let r = p.round();
                    if (p - r).abs() <= 1e-9 * p.abs().max(1.0) {
                        r as i64
                    } else {
                        p.floor() as i64
                    }
                })
                .collect(),
        )
    }
}

impl fmt::Debug for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Number of integer points with ℓ1 norm at most `n` in dimension `d`:
/// `sum_k 2^k C(d,k) C(n,k)`.
pub fn l1_ball_count(d: usize, n: u64) -> u64 {
    let mut total = 0u64;
    let mut cdk = 1u64; // C(d, k)
    let mut cnk = 1u64; // C(n, k)
    for k in 0..=d as u64 {
        if k > n {
            break;
        }
        total += (1u64 << k) * cdk * cnk;
        cdk = cdk * (d as u64 - k) / (k + 1);
        cnk = cnk * (n - k) / (k + 1);
    }
    total
}

/// Largest integer ℓ1 norm strictly below `micro_radius`, or `None` when no
/// site qualifies.
pub fn max_norm_below(micro_radius: f64) -> Option<i64> {
    if !(micro_radius > 0.0) {
        return None;
    }
    let mut n = micro_radius.ceil() as i64 - 1;
    while (n as f64) >= micro_radius {
        n -= 1;
    }
    while ((n + 1) as f64) < micro_radius {
        n += 1;
    }
    (n >= 0).then_some(n)
}

/// Sites of the open ℓ1 ball `{m : |m|_1 < micro_radius}`.
#[derive(Clone, Debug)]
pub struct Window {
    d: usize,
    half_width: i64,
    side: usize,
    coords: Vec<i64>,
    norms: Vec<i64>,
    box_to_site: Vec<usize>,
    neighbors: Vec<usize>,
    outside_neighbors: Vec<u8>,
}

impl Window {
    pub fn new(d: usize, micro_radius: f64) -> Result<Self> {
        if d == 0 {
            return Err(LilypadError::InvalidParameter("dimension must be ≥ 1".into()));
        }
        let half_width = max_norm_below(micro_radius).ok_or_else(|| {
            LilypadError::InvalidParameter(format!(
                "window of micro radius {micro_radius} contains no site"
            ))
        })?;
        let side = (2 * half_width + 1) as usize;
        let box_len = side
            .checked_pow(d as u32)
            .filter(|&n| n <= 1 << 32)
            .ok_or_else(|| LilypadError::InvalidParameter("window too large".into()))?;

        let mut coords = Vec::new();
        let mut norms = Vec::new();
        let mut box_to_site = vec![OUTSIDE; box_len];
        let mut c = vec![-half_width; d];
        for (b, slot) in box_to_site.iter_mut().enumerate() {
            if b > 0 {
                // odometer increment, last axis fastest
                for axis in (0..d).rev() {
                    if c[axis] < half_width {
                        c[axis] += 1;
                        break;
                    }
                    c[axis] = -half_width;
                }
            }
            let norm: i64 = c.iter().map(|x| x.abs()).sum();
            if (norm as f64) < micro_radius {
                *slot = norms.len();
                norms.push(norm);
                coords.extend_from_slice(&c);
            }
        }

        let n = norms.len();
        let mut w = Window {
            d,
            half_width,
            side,
            coords,
            norms,
            box_to_site,
            neighbors: vec![OUTSIDE; n * 2 * d],
            outside_neighbors: vec![0; n],
        };
        let mut nb = vec![0i64; d];
        for i in 0..n {
            for axis in 0..d {
                for (s, step) in [-1i64, 1].into_iter().enumerate() {
                    nb.copy_from_slice(w.coords_of(i));
                    nb[axis] += step;
                    let j = w.index_of(&nb);
                    match j {
                        Some(j) => w.neighbors[i * 2 * d + 2 * axis + s] = j,
                        None => w.outside_neighbors[i] += 1,
                    }
                }
            }
        }
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn coords_of(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn site(&self, i: usize) -> SiteId {
        SiteId(self.coords_of(i).to_vec())
    }

    /// Integer ℓ1 norm of site `i`.
    pub fn norm(&self, i: usize) -> i64 {
        self.norms[i]
    }

    pub fn l1_between(&self, i: usize, j: usize) -> i64 {
        self.coords_of(i)
            .iter()
            .zip(self.coords_of(j))
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn index_of(&self, c: &[i64]) -> Option<usize> {
        if c.len() != self.d {
            return None;
        }
        let mut b = 0usize;
        for &x in c {
            if x.abs() > self.half_width {
                return None;
            }
            b = b * self.side + (x + self.half_width) as usize;
        }
        match self.box_to_site[b] {
            OUTSIDE => None,
            i => Some(i),
        }
    }

    pub fn require(&self, site: &SiteId) -> Result<usize> {
        self.index_of(&site.0)
            .ok_or_else(|| LilypadError::SiteOutsideWindow(site.0.clone()))
    }

    pub fn origin(&self) -> usize {
        self.index_of(&vec![0; self.d]).expect("window always holds the origin")
    }

    /// In-window nearest neighbours of site `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i * 2 * self.d..(i + 1) * 2 * self.d]
            .iter()
            .copied()
            .filter(|&j| j != OUTSIDE)
    }

    /// Number of lattice neighbours of `i` that fall outside the window.
    pub fn outside_neighbors(&self, i: usize) -> u8 {
        self.outside_neighbors[i]
    }

    /// Site indices with `|m|_1 < micro_radius`.
    pub fn sites_within(&self, micro_radius: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| (self.norms[i] as f64) < micro_radius)
    }

    /// Box side length, for raster export.
    pub fn side(&self) -> usize {
        self.side
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_count_matches_enumeration() {
        for d in 1..=3 {
            for n in 0..6u64 {
                let w = Window::new(d, n as f64 + 0.5).unwrap();
                assert_eq!(w.len() as u64, l1_ball_count(d, n), "d={d} n={n}");
            }
        }
    }

    #[test]
    fn open_ball_excludes_boundary() {
        let w = Window::new(1, 3.0).unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.index_of(&[3]).is_none());
        assert!(w.index_of(&[2]).is_some());
    }

    #[test]
    fn indices_are_lexicographic() {
        let w = Window::new(2, 3.5).unwrap();
        for i in 1..w.len() {
            assert!(w.site(i - 1) < w.site(i));
        }
    }

    #[test]
    fn neighbours_and_outside_counts() {
        let w = Window::new(2, 1.5).unwrap();
        let o = w.origin();
        assert_eq!(w.neighbors(o).count(), 4);
        assert_eq!(w.outside_neighbors(o), 0);
        let e = w.index_of(&[1, 0]).unwrap();
        assert_eq!(w.neighbors(e).count(), 1);
        assert_eq!(w.outside_neighbors(e), 3);
    }

    #[test]
    fn max_norm_below_is_strict() {
        assert_eq!(max_norm_below(3.0), Some(2));
        assert_eq!(max_norm_below(3.0000001), Some(3));
        assert_eq!(max_norm_below(0.5), Some(0));
        assert_eq!(max_norm_below(0.0), None);
    }

    #[test]
    fn floor_map_fixes_lattice_points() {
        let r = std::f64::consts::E * std::f64::consts::E;
        for m in -20i64..20 {
            let z = m as f64 / r;
            assert_eq!(SiteId::floor_of(&[z], r).0[0], m);
            assert_eq!(SiteId::from_macro(&[z], r).0[0], m);
        }
        assert_eq!(SiteId::floor_of(&[0.5 / r], r).0[0], 0);
        assert_eq!(SiteId::floor_of(&[-0.5 / r], r).0[0], -1);
    }
}
