//! Flat `key = value` run configuration with `[section]` headers.
//!
//! Floats are written with 17 significant digits so that parsing a
//! serialized config gives back the same bits.

use std::fmt;
use std::str::FromStr;

use lilypad_core::analysis::{ScenarioSpec, Variant};
use lilypad_core::environment::fmt_f64;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    GenEnv,
    Lilypad,
    PamLilypad,
    Simulate,
    Pam,
    Compare,
    Scenario,
    Frames,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::GenEnv,
        Mode::Lilypad,
        Mode::PamLilypad,
        Mode::Simulate,
        Mode::Pam,
        Mode::Compare,
        Mode::Scenario,
        Mode::Frames,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::GenEnv => "gen-env",
            Mode::Lilypad => "lilypad",
            Mode::PamLilypad => "pam-lilypad",
            Mode::Simulate => "simulate",
            Mode::Pam => "pam",
            Mode::Compare => "compare",
            Mode::Scenario => "scenario",
            Mode::Frames => "frames",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Whether `compare` runs against a simulated record or against a record
/// synthesized from the lilypad field itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareSource {
    Simulate,
    SelfCheck,
}

impl CompareSource {
    fn as_str(&self) -> &'static str {
        match self {
            CompareSource::Simulate => "simulate",
            CompareSource::SelfCheck => "self",
        }
    }
}

impl FromStr for CompareSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(CompareSource::Simulate),
            "self" => Ok(CompareSource::SelfCheck),
            _ => Err(format!("unknown compare source {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub d: usize,
    pub alpha: f64,
    /// One run per entry.
    pub t_ladder: Vec<f64>,
    /// Macroscopic window radius.
    pub radius: f64,
    /// Macroscopic horizon.
    pub t_end: f64,
    /// Macroscopic output times; empty means `t_end` only.
    pub times: Vec<f64>,
    pub replicates: usize,
    pub max_population: u64,
    pub max_events: u64,
    /// Equal PAM grid steps up to `t_end`.
    pub pam_grid: usize,
    pub pam_tol: f64,
    pub frames: usize,
    pub compare_source: CompareSource,
    /// Macro radius of the ball on which hitting times are compared.
    pub hit_radius: f64,
    pub scenario: ScenarioSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Lilypad,
            seed: 1,
            d: 1,
            alpha: 2.0,
            t_ladder: vec![20.0],
            radius: 0.5,
            t_end: 1.0,
            times: Vec::new(),
            replicates: 1,
            max_population: 10_000_000,
            max_events: 1_000_000_000,
            pam_grid: 20,
            pam_tol: 1e-10,
            frames: 16,
            compare_source: CompareSource::Simulate,
            hit_radius: 0.25,
            scenario: ScenarioSpec::example(Variant::S1),
        }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(x.trim())).collect()
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("{s:?}: {e}"))
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sc = &self.scenario;
        writeln!(f, "mode = {}", self.mode.as_str())?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f)?;
        writeln!(f, "[scaling]")?;
        writeln!(f, "d = {}", self.d)?;
        writeln!(f, "alpha = {}", fmt_f64(self.alpha))?;
        writeln!(f, "T = {}", join(&self.t_ladder))?;
        writeln!(f)?;
        writeln!(f, "[window]")?;
        writeln!(f, "radius = {}", fmt_f64(self.radius))?;
        writeln!(f)?;
        writeln!(f, "[time]")?;
        writeln!(f, "t_end = {}", fmt_f64(self.t_end))?;
        writeln!(f, "times = {}", join(&self.times))?;
        writeln!(f)?;
        writeln!(f, "[brw]")?;
        writeln!(f, "replicates = {}", self.replicates)?;
        writeln!(f, "max_population = {}", self.max_population)?;
        writeln!(f, "max_events = {}", self.max_events)?;
        writeln!(f)?;
        writeln!(f, "[pam]")?;
        writeln!(f, "grid = {}", self.pam_grid)?;
        writeln!(f, "tol = {}", fmt_f64(self.pam_tol))?;
        writeln!(f)?;
        writeln!(f, "[frames]")?;
        writeln!(f, "count = {}", self.frames)?;
        writeln!(f)?;
        writeln!(f, "[compare]")?;
        writeln!(f, "source = {}", self.compare_source.as_str())?;
        writeln!(f, "hit_radius = {}", fmt_f64(self.hit_radius))?;
        writeln!(f)?;
        writeln!(f, "[scenario]")?;
        writeln!(f, "variant = {}", sc.variant.as_str())?;
        writeln!(f, "t = {}", fmt_f64(sc.t))?;
        writeln!(f, "kappa = {}", fmt_f64(sc.kappa))?;
        writeln!(f, "r = {}", fmt_f64(sc.r))?;
        writeln!(f, "eta = {}", fmt_f64(sc.eta))?;
        writeln!(f, "R = {}", fmt_f64(sc.big_r))?;
        match sc.x_potential {
            Some(v) => writeln!(f, "x_potential = {}", fmt_f64(v)),
            None => writeln!(f, "x_potential = default"),
        }
    }
}

impl RunConfig {
    /// Parses a config; keys absent from the text keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Config { line: n + 1, msg };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("bad section header {line:?}")))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            cfg.set(&section, key.trim(), value.trim()).map_err(err)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), String> {
        let sc = &mut self.scenario;
        match (section, key) {
            ("", "mode") => self.mode = v.parse()?,
            ("", "seed") => self.seed = parse_num(v)?,
            ("scaling", "d") => self.d = parse_num(v)?,
            ("scaling", "alpha") => self.alpha = parse_f64(v)?,
            ("scaling", "T") => self.t_ladder = parse_list(v)?,
            ("window", "radius") => self.radius = parse_f64(v)?,
            ("time", "t_end") => self.t_end = parse_f64(v)?,
            ("time", "times") => self.times = parse_list(v)?,
            ("brw", "replicates") => self.replicates = parse_num(v)?,
            ("brw", "max_population") => self.max_population = parse_num(v)?,
            ("brw", "max_events") => self.max_events = parse_num(v)?,
            ("pam", "grid") => self.pam_grid = parse_num(v)?,
            ("pam", "tol") => self.pam_tol = parse_f64(v)?,
            ("frames", "count") => self.frames = parse_num(v)?,
            ("compare", "source") => self.compare_source = v.parse()?,
            ("compare", "hit_radius") => self.hit_radius = parse_f64(v)?,
            ("scenario", "variant") => sc.variant = Variant::parse(v).map_err(|e| e.to_string())?,
            ("scenario", "t") => sc.t = parse_f64(v)?,
            ("scenario", "kappa") => sc.kappa = parse_f64(v)?,
            ("scenario", "r") => sc.r = parse_f64(v)?,
            ("scenario", "eta") => sc.eta = parse_f64(v)?,
            ("scenario", "R") => sc.big_r = parse_f64(v)?,
            ("scenario", "x_potential") => {
                sc.x_potential = if v == "default" { None } else { Some(parse_f64(v)?) }
            }
            _ => {
                let at = if section.is_empty() { String::new() } else { format!("[{section}] ") };
                return Err(format!("unknown key {at}{key}"));
            }
        }
        Ok(())
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::InvalidConfig(m));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.alpha > self.d as f64) || !self.alpha.is_finite() {
            return bad(format!("alpha = {} must exceed d = {}", self.alpha, self.d));
        }
        if self.t_ladder.is_empty() {
            return bad("T ladder is empty".into());
        }
        if let Some(t) = self.t_ladder.iter().find(|&&t| !(t >= std::f64::consts::E) || !t.is_finite()) {
            return bad(format!("T = {t} must be at least e"));
        }
        if !positive(self.radius) {
            return bad(format!("radius = {} must be positive", self.radius));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if let Some(t) = self.times.iter().find(|&&t| !(t >= 0.0 && t <= self.t_end)) {
            return bad(format!("time {t} outside [0, t_end]"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be strictly increasing".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.pam_grid == 0 || !positive(self.pam_tol) {
            return bad("pam grid and tol must be positive".into());
        }
        if self.frames == 0 {
            return bad("frame count must be at least 1".into());
        }
        if self.mode == Mode::Frames && self.d > 2 {
            return bad(format!("frames need d ≤ 2, got d = {}", self.d));
        }
        if !positive(self.hit_radius) {
            return bad(format!("hit_radius = {} must be positive", self.hit_radius));
        }
        Ok(())
    }

    /// Output times, `t_end` alone when none are configured.
    pub fn output_times(&self) -> Vec<f64> {
        if self.times.is_empty() {
            vec![self.t_end]
        } else {
            self.times.clone()
        }
    }
}
