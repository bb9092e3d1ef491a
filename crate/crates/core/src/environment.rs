//! Rescaled Pareto environments on a finite ℓ1 window.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{invalid, LilypadError, Result};
use crate::lattice::{SiteId, Window};

/// Scale factors tying the microscopic lattice to the macroscopic frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingConstants {
    pub d: usize,
    pub alpha: f64,
    pub t: f64,
    pub q: f64,
    /// Potential scale `a(T)`.
    pub a_t: f64,
    /// Space scale `r(T)`.
    pub r_t: f64,
    /// `log^{1/4} T`; particle threshold for the second hitting time is `exp(mu_t)`.
    pub mu_t: f64,
    /// Default intermittency radius `(3/q) log^{-1/4} T`.
    pub eps_t: f64,
}

impl ScalingConstants {
    /// `q = d/(alpha-d)`, `a(T) = (T/log T)^q`, `r(T) = (T/log T)^{q+1}`.
    pub fn derive(d: usize, alpha: f64, t: f64) -> Result<Self> {
        Self::check_base(d, alpha, t)?;
        let q = d as f64 / (alpha - d as f64);
        let base = t / t.ln();
        Self::from_parts(d, alpha, t, base.powf(q), base.powf(q + 1.0))
    }

    /// Scaling with explicit `a(T)` and `r(T)`. Used for toy lattices (for
    /// instance unit macro spacing) where the identity `r(T)^d = a(T)^alpha`
    /// is deliberately broken.
    pub fn from_parts(d: usize, alpha: f64, t: f64, a_t: f64, r_t: f64) -> Result<Self> {
        Self::check_base(d, alpha, t)?;
        if !(a_t > 0.0 && a_t.is_finite() && r_t > 0.0 && r_t.is_finite()) {
            return Err(invalid(format!("scales must be positive, got a={a_t} r={r_t}")));
        }
        let q = d as f64 / (alpha - d as f64);
        let log_t = t.ln();
        Ok(ScalingConstants {
            d,
            alpha,
            t,
            q,
            a_t,
            r_t,
            mu_t: log_t.powf(0.25),
            eps_t: 3.0 / q * log_t.powf(-0.25),
        })
    }

    fn check_base(d: usize, alpha: f64, t: f64) -> Result<()> {
        if d == 0 {
            return Err(invalid("dimension must be ≥ 1"));
        }
        if !(alpha > d as f64) || !alpha.is_finite() {
            return Err(invalid(format!(
                "alpha = {alpha} must exceed d = {d}; otherwise the total PAM mass diverges"
            )));
        }
        if !(t >= std::f64::consts::E) || !t.is_finite() {
            return Err(invalid(format!("T = {t} must be at least e")));
        }
        Ok(())
    }

    /// Macro lattice spacing `1/r(T)`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.r_t
    }

    /// Macro ℓ1 distance for an integer micro distance.
    pub fn macro_dist(&self, micro: i64) -> f64 {
        micro as f64 / self.r_t
    }
}

/// Inverse-CDF Pareto draw: `U^{-1/alpha}` for `U ∈ (0, 1]`.
pub fn pareto_from_uniform(u: f64, alpha: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

/// Uniform on `(0, 1]` with 53 random bits.
pub fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn sample_pareto<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    pareto_from_uniform(uniform_open_closed(rng), alpha)
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream id for replicate `k` of a run seeded with `seed`.
pub fn derive_stream(seed: u64, k: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Counter-based uniform on `(0, 1]` keyed by `(seed, coordinates)`, so a site
/// gets the same potential in every window that contains it.
fn site_uniform(seed: u64, coords: &[i64]) -> f64 {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    for &c in coords {
        h = splitmix64(h ^ c as u64);
    }
    ((h >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A finite window of the lattice with its raw and rescaled potential.
#[derive(Clone, Debug)]
pub struct Environment {
    scaling: ScalingConstants,
    window_radius: f64,
    window: Window,
    xi: Vec<f64>,
    xi_t: Vec<f64>,
    seed: Option<u64>,
}

impl Environment {
    fn build_window(scaling: &ScalingConstants, radius: f64) -> Result<Window> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("window radius {radius} must be positive")));
        }
        if radius * scaling.r_t < 1.0 {
            return Err(invalid(format!(
                "window radius {radius} is below one lattice spacing {}",
                scaling.spacing()
            )));
        }
        Window::new(scaling.d, radius * scaling.r_t)
    }

    /// Samples i.i.d. Pareto(alpha) raw potentials on `L_T(0, radius)`.
    pub fn sample(scaling: ScalingConstants, radius: f64, seed: u64) -> Result<Self> {
        let window = Self::build_window(&scaling, radius)?;
        let xi = (0..window.len())
            .map(|i| pareto_from_uniform(site_uniform(seed, window.coords_of(i)), scaling.alpha))
            .collect();
        Self::from_raw_parts(scaling, radius, window, xi, Some(seed))
    }

    /// Deterministic environment from rescaled values; unassigned sites get the
    /// Pareto floor `xi = 1`.
    pub fn with_potential(
        scaling: ScalingConstants,
        radius: f64,
        assignment: &[(SiteId, f64)],
    ) -> Result<Self> {
        let window = Self::build_window(&scaling, radius)?;
        let mut xi = vec![1.0; window.len()];
        for (site, value) in assignment {
            let i = window.require(site)?;
            xi[i] = raw_from_rescaled(&scaling, *value)?;
        }
        Self::from_raw_parts(scaling, radius, window, xi, None)
    }

    /// Copy of `self` with some rescaled values replaced.
    pub fn with_overrides(&self, assignment: &[(SiteId, f64)]) -> Result<Self> {
        let mut xi = self.xi.clone();
        for (site, value) in assignment {
            let i = self.window.require(site)?;
            xi[i] = raw_from_rescaled(&self.scaling, *value)?;
        }
        Self::from_raw_parts(self.scaling, self.window_radius, self.window.clone(), xi, self.seed)
    }

    fn from_raw_parts(
        scaling: ScalingConstants,
        window_radius: f64,
        window: Window,
        xi: Vec<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if let Some(bad) = xi.iter().position(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(invalid(format!(
                "raw potential {} at {:?} is below the Pareto floor 1",
                xi[bad],
                window.site(bad)
            )));
        }
        let xi_t = xi.iter().map(|&x| x / scaling.a_t).collect();
        Ok(Environment {
            scaling,
            window_radius,
            window,
            xi,
            xi_t,
            seed,
        })
    }

    pub fn scaling(&self) -> &ScalingConstants {
        &self.scaling
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Raw potential `xi(z)` per site index.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Rescaled potential `xi_T(z) = xi(r(T) z)/a(T)` per site index.
    pub fn xi_t(&self) -> &[f64] {
        &self.xi_t
    }

    pub fn site(&self, i: usize) -> SiteId {
        self.window.site(i)
    }

    pub fn origin(&self) -> usize {
        self.window.origin()
    }

    /// Macro ℓ1 distance between two sites.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.scaling.macro_dist(self.window.l1_between(i, j))
    }

    /// Macro ℓ1 norm of a site.
    pub fn norm(&self, i: usize) -> f64 {
        self.scaling.macro_dist(self.window.norm(i))
    }

    /// Site indices of `L_T(0, radius)`; `radius` must not exceed the window.
    pub fn ball(&self, radius: f64) -> Result<Vec<usize>> {
        self.check_radius(radius)?;
        Ok(self.window.sites_within(radius * self.scaling.r_t).collect())
    }

    /// Whether site `i` lies in the open macro ball `B(0, radius)`.
    pub fn in_ball(&self, i: usize, radius: f64) -> bool {
        (self.window.norm(i) as f64) < radius * self.scaling.r_t
    }

    fn check_radius(&self, radius: f64) -> Result<()> {
        if radius > self.window_radius {
            return Err(invalid(format!(
                "radius {radius} exceeds the window radius {}",
                self.window_radius
            )));
        }
        if radius.is_nan() {
            return Err(invalid("radius is NaN"));
        }
        Ok(())
    }

    /// `max_{z ∈ L_T(0,R)} xi_T(z)`, zero on an empty sub-window.
    pub fn max_potential(&self, radius: f64) -> Result<f64> {
        Ok(self
            .ball(radius)?
            .into_iter()
            .map(|i| self.xi_t[i])
            .fold(0.0, f64::max))
    }

    /// `#{z ∈ L_T(0,R) : xi_T(z) ≥ nu}`.
    pub fn tail_count(&self, radius: f64, nu: f64) -> Result<usize> {
        if !(nu > 0.0) {
            return Err(invalid(format!("threshold {nu} must be positive")));
        }
        Ok(self
            .ball(radius)?
            .into_iter()
            .filter(|&i| self.xi_t[i] >= nu)
            .count())
    }

    /// Order-sensitive digest of scaling, window and raw potential.
    pub fn fingerprint(&self) -> u64 {
        let s = &self.scaling;
        let mut h = splitmix64(s.d as u64);
        for v in [s.alpha, s.t, s.a_t, s.r_t, self.window_radius] {
            h = splitmix64(h ^ v.to_bits());
        }
        for (i, x) in self.xi.iter().enumerate() {
            for &c in self.window.coords_of(i) {
                h = splitmix64(h ^ c as u64);
            }
            h = splitmix64(h ^ x.to_bits());
        }
        h
    }

    /// Columnar text export; floats carry 17 significant digits so reading the
    /// file back reproduces every value bit for bit.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.scaling;
        writeln!(out, "# lilypad environment")?;
        writeln!(out, "d {}", s.d)?;
        writeln!(out, "alpha {}", fmt_f64(s.alpha))?;
        writeln!(out, "T {}", fmt_f64(s.t))?;
        writeln!(out, "R {}", fmt_f64(self.window_radius))?;
        match self.seed {
            Some(seed) => writeln!(out, "seed {seed}")?,
            None => writeln!(out, "seed none")?,
        }
        writeln!(out, "aT {}", fmt_f64(s.a_t))?;
        writeln!(out, "rT {}", fmt_f64(s.r_t))?;
        writeln!(out, "# micro_coord... xi_raw")?;
        for i in 0..self.len() {
            for c in self.window.coords_of(i) {
                write!(out, "{c} ")?;
            }
            writeln!(out, "{}", fmt_f64(self.xi[i]))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut rows: Vec<(usize, Vec<i64>, f64)> = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| LilypadError::Parse { line: n + 1, msg };
            let first = line.split_whitespace().next().unwrap_or_default();
            if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let (key, value) = line
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| parse_err(format!("header line without value: {line}")))?;
                header.insert(key.to_string(), (n + 1, value.trim().to_string()));
            } else {
                let fields: Vec<&str> = line.split_whitespace().collect();
                let (xi, coords) = fields.split_last().expect("non-empty line");
                let coords = coords
                    .iter()
                    .map(|c| c.parse::<i64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(e.to_string()))?;
                let xi = xi.parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
                rows.push((n + 1, coords, xi));
            }
        }
        let get = |key: &str| {
            header
                .get(key)
                .ok_or_else(|| LilypadError::Parse { line: 0, msg: format!("missing header `{key}`") })
        };
        let num = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse::<f64>()
                .map_err(|e| LilypadError::Parse { line: *line, msg: format!("{key}: {e}") })
        };
        let (dline, dval) = get("d")?;
        let d: usize = dval
            .parse()
            .map_err(|e| LilypadError::Parse { line: *dline, msg: format!("d: {e}") })?;
        let (sline, sval) = get("seed")?;
        let seed = match sval.as_str() {
            "none" => None,
            v => Some(v.parse::<u64>().map_err(|e| LilypadError::Parse {
                line: *sline,
                msg: format!("seed: {e}"),
            })?),
        };
        let scaling = ScalingConstants::from_parts(d, num("alpha")?, num("T")?, num("aT")?, num("rT")?)?;
        let radius = num("R")?;
        let window = Self::build_window(&scaling, radius)?;
        if rows.len() != window.len() {
            return Err(LilypadError::Parse {
                line: 0,
                msg: format!("expected {} site rows, found {}", window.len(), rows.len()),
            });
        }
        let mut xi = vec![f64::NAN; window.len()];
        for (line, coords, value) in rows {
            let i = window
                .index_of(&coords)
                .ok_or_else(|| LilypadError::Parse { line, msg: format!("site {coords:?} outside window") })?;
            xi[i] = value;
        }
        Self::from_raw_parts(scaling, radius, window, xi, seed)
    }
}

fn raw_from_rescaled(scaling: &ScalingConstants, value: f64) -> Result<f64> {
    let floor = 1.0 / scaling.a_t;
    if !(value >= floor) || !value.is_finite() {
        return Err(invalid(format!(
            "rescaled potential {value} is below the floor 1/a(T) = {floor}"
        )));
    }
    Ok((value * scaling.a_t).max(1.0))
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
