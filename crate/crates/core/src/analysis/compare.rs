use std::io::Write;

use super::{hausdorff, intermittency_ratio, maximizer};
use crate::brw::BRWRecord;
use crate::environment::fmt_f64;
use crate::error::{LilypadError, Result};
use crate::lattice::SiteId;
use crate::lilypad::{EnvelopeMode, FieldKind, LilypadField};

/// Per-time statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    /// `sup_z |M_T(z,t) - m_T(z,t)|`.
    pub mass_dev: f64,
    /// `d_H(S_T(t), s_T(t))`.
    pub hausdorff: f64,
    /// Maximizer of `M_T(., t)`.
    pub w_brw: SiteId,
    /// Maximizer of `m_T(., t)`.
    pub w_lily: SiteId,
    /// Macro ℓ1 distance between the two maximizers.
    pub separation: f64,
    /// Mass fraction within `eps_T` of `w_brw`; `None` without particles.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<TimeRow>,
    pub sup_mass_dev: f64,
    /// `sup |H_T - h_T|` over `L_T(0, hit_radius)`.
    pub sup_hit_dev: f64,
    pub hit_radius: f64,
    pub certificate: f64,
    pub truncated: Option<&'static str>,
    pub leak: u64,
    pub fingerprint: u64,
}

/// Compares a BRW record with the BRW lilypad field of the same environment
/// at the given macro times, which must be snapshot times of the record.
pub fn compare(
    brw: &BRWRecord<'_>,
    lily: &LilypadField<'_>,
    times: &[f64],
    hit_radius: f64,
) -> Result<ComparisonReport> {
    let env = lily.env();
    if lily.kind() != FieldKind::Brw {
        return Err(crate::error::invalid("comparison needs a BRW lilypad field"));
    }
    if !std::ptr::eq(brw.env(), env) && brw.env().fingerprint() != env.fingerprint() {
        return Err(LilypadError::EnvironmentMismatch);
    }
    let eps = env.scaling().eps_t;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let big_m = brw.rescaled_counts(t)?;
        let small_m = lily.mass_field(t, EnvelopeMode::Envelope)?;
        let mass_dev = big_m.max_abs_diff(&small_m);
        let hd = hausdorff(&brw.support(t), &lily.support(t)?)?;
        let w_brw = maximizer(&big_m);
        let w_lily = maximizer(&small_m);
        let separation = w_brw.l1_to(&w_lily) as f64 / env.scaling().r_t;
        let ratio = match intermittency_ratio(brw, t, &w_brw, eps) {
            Ok(v) => Some(v),
            Err(LilypadError::ZeroMass) => None,
            Err(e) => return Err(e),
        };
        rows.push(TimeRow {
            t,
            mass_dev,
            hausdorff: hd,
            w_brw,
            w_lily,
            separation,
            ratio,
        });
    }
    let (big_h, _) = brw.hitting_fields();
    let ball = env.ball(hit_radius)?;
    let sup_hit_dev = ball
        .iter()
        .map(|&i| {
            let (a, b) = (big_h[i], lily.value(i));
            if a == b {
                0.0
            } else {
                (a - b).abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(ComparisonReport {
        sup_mass_dev: rows.iter().map(|r| r.mass_dev).fold(0.0, f64::max),
        rows,
        sup_hit_dev,
        hit_radius,
        certificate: lily.exactness_certificate(env.window_radius())?,
        truncated: brw.truncated.map(|t| t.as_str()),
        leak: brw.leak,
        fingerprint: env.fingerprint(),
    })
}

fn site_str(s: &SiteId) -> String {
    s.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl ComparisonReport {
    /// Flat `key = value` summary.
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "fingerprint = {:016x}", self.fingerprint)?;
        writeln!(out, "sup_mass_dev = {}", fmt_f64(self.sup_mass_dev))?;
        writeln!(out, "sup_hit_dev = {}", fmt_f64(self.sup_hit_dev))?;
        writeln!(out, "hit_radius = {}", fmt_f64(self.hit_radius))?;
        writeln!(out, "certificate = {}", fmt_f64(self.certificate))?;
        writeln!(out, "truncated = {}", self.truncated.unwrap_or("none"))?;
        writeln!(out, "leak = {}", self.leak)?;
        let sup_hd = self.rows.iter().map(|r| r.hausdorff).fold(0.0, f64::max);
        writeln!(out, "sup_hausdorff = {}", fmt_f64(sup_hd))?;
        writeln!(out, "times = {}", self.rows.len())?;
        Ok(())
    }

    /// One CSV row per time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mass_dev,hausdorff,w_brw,w_lily,separation,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},\"{}\",\"{}\",{},{}",
                fmt_f64(r.t),
                fmt_f64(r.mass_dev),
                fmt_f64(r.hausdorff),
                site_str(&r.w_brw),
                site_str(&r.w_lily),
                fmt_f64(r.separation),
                r.ratio.map_or("nan".to_string(), fmt_f64)
            )?;
        }
        Ok(())
    }
}
