//! Mode dispatch and artifact writing.
//!
//! Every artifact is written by the main thread after any parallel work is
//! done, and the manifest lists each one with its SHA-256 digest.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lilypad_core::analysis::{
    build_scenario, check_scenario, compare, connected_components, maximizer, ComparisonReport,
};
use lilypad_core::brw::{simulate_replicates, BRWRecord, SimCaps, Snapshot};
use lilypad_core::environment::{derive_stream, fmt_f64};
use lilypad_core::pam::{solve_pam_micro, PamOptions};
use lilypad_core::{
    pam_lambda, pam_tau, solve_hitting_times, EnvelopeMode, Environment, LilypadField,
    ScalingConstants,
};
use sha2::{Digest, Sha256};

use crate::config::{CompareSource, Mode, RunConfig};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Key/value lines of one manifest section plus the files it produced.
struct Section {
    name: String,
    dir: PathBuf,
    entries: Vec<(String, String)>,
    files: Vec<String>,
    /// Human-readable lines echoed to stdout.
    notes: Vec<String>,
}

impl Section {
    fn new(name: String, dir: PathBuf) -> Self {
        Section {
            name,
            dir,
            entries: Vec::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Creates `name` in the section directory and hands a buffered writer to `f`.
    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Runs every entry of the T ladder and writes `manifest.txt` into `out`.
/// Returns the lines to print on success.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let mut sections = Vec::new();
    for &big_t in &cfg.t_ladder {
        let (name, dir) = if cfg.t_ladder.len() == 1 {
            (format!("T={big_t}"), out.to_path_buf())
        } else {
            let name = format!("T_{big_t}");
            (format!("T={big_t}"), out.join(&name))
        };
        fs::create_dir_all(&dir)?;
        let mut sec = Section::new(name, dir);
        let scaling = ScalingConstants::derive(cfg.d, cfg.alpha, big_t)?;
        sec.put("q", fmt_f64(scaling.q));
        sec.put("aT", fmt_f64(scaling.a_t));
        sec.put("rT", fmt_f64(scaling.r_t));
        run_one(cfg, scaling, &mut sec)?;
        sections.push(sec);
    }
    write_manifest(cfg, out, &sections)?;
    let mut lines = Vec::new();
    for sec in &sections {
        for note in &sec.notes {
            lines.push(format!("{}: {note}", sec.name));
        }
    }
    lines.push(format!("manifest: {}", out.join("manifest.txt").display()));
    Ok(lines)
}

fn write_manifest(cfg: &RunConfig, out: &Path, sections: &[Section]) -> Result<()> {
    let mut m = String::new();
    writeln!(m, "# lilypad run manifest").unwrap();
    writeln!(m, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(m, "config_sha256 = {}", sha256_hex(cfg.to_string().as_bytes())).unwrap();
    writeln!(m, "mode = {}", cfg.mode.as_str()).unwrap();
    writeln!(m, "seed = {}", cfg.seed).unwrap();
    for sec in sections {
        writeln!(m, "\n[{}]", sec.name).unwrap();
        for (k, v) in &sec.entries {
            writeln!(m, "{k} = {v}").unwrap();
        }
        let rel = sec.dir.strip_prefix(out).unwrap_or(&sec.dir);
        for f in &sec.files {
            let bytes = fs::read(sec.dir.join(f))?;
            let path = rel.join(f);
            writeln!(m, "file {} = {}", path.display(), sha256_hex(&bytes)).unwrap();
        }
    }
    fs::write(out.join("config.txt"), cfg.to_string())?;
    fs::write(out.join("manifest.txt"), m)?;
    Ok(())
}

fn caps(cfg: &RunConfig) -> SimCaps {
    SimCaps {
        max_population: cfg.max_population,
        max_events: cfg.max_events,
    }
}

fn pam_options(cfg: &RunConfig) -> PamOptions {
    PamOptions {
        tol: cfg.pam_tol,
        ..PamOptions::default()
    }
}

fn run_one(cfg: &RunConfig, scaling: ScalingConstants, sec: &mut Section) -> Result<()> {
    if cfg.mode == Mode::Scenario {
        return scenario(cfg, scaling, sec);
    }
    let env = Environment::sample(scaling, cfg.radius, cfg.seed)?;
    sec.put("sites", env.len());
    sec.put("fingerprint", format!("{:016x}", env.fingerprint()));
    sec.write("env.txt", |w| Ok(env.write_to(w)?))?;
    match cfg.mode {
        Mode::GenEnv => {
            let top = env.max_potential(cfg.radius)?;
            sec.put("max_potential", fmt_f64(top));
            sec.notes.push(format!("{} sites, max rescaled potential {top:.6}", env.len()));
        }
        Mode::Lilypad => lilypad(cfg, &env, sec)?,
        Mode::PamLilypad => pam_lilypad(cfg, &env, sec)?,
        Mode::Simulate => simulate(cfg, &env, sec)?,
        Mode::Pam => pam(cfg, &env, sec)?,
        Mode::Compare => comparison(cfg, &env, sec)?,
        Mode::Frames => frames(cfg, &env, sec)?,
        Mode::Scenario => unreachable!(),
    }
    Ok(())
}

fn certificate(sec: &mut Section, field: &LilypadField<'_>) -> Result<f64> {
    let c = field.exactness_certificate(field.env().window_radius())?;
    sec.put("certificate", fmt_f64(c));
    Ok(c)
}

fn lilypad(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let h = solve_hitting_times(env);
    let cert = certificate(sec, &h)?;
    sec.write("hitting.txt", |w| Ok(h.write_to(w)?))?;
    for (k, &t) in cfg.output_times().iter().enumerate() {
        let m = h.mass_field(t, EnvelopeMode::Envelope)?;
        sec.write(&format!("mass_{k:03}.txt"), |w| Ok(m.write_to(w)?))?;
        let support = h.support(t)?;
        sec.put(&format!("support_{k:03}"), format!("t={} sites={}", fmt_f64(t), support.len()));
    }
    sec.notes.push(format!("lilypad solved on {} sites, certified below {cert:.6}", env.len()));
    Ok(())
}

fn pam_lilypad(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let tau = pam_tau(env);
    sec.write("tau.txt", |w| Ok(tau.write_to(w)?))?;
    for (k, &t) in cfg.output_times().iter().enumerate() {
        let lam = pam_lambda(env, t)?;
        sec.write(&format!("lambda_{k:03}.txt"), |w| Ok(lam.write_to(w)?))?;
        let top = maximizer(&lam);
        sec.put(&format!("maximizer_{k:03}"), format!("{:?}", top.0));
    }
    sec.notes.push(format!("PAM lilypad solved on {} sites", env.len()));
    Ok(())
}

fn simulate(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let big_t = env.scaling().t;
    let snaps: Vec<f64> = cfg.output_times().iter().map(|t| t * big_t).collect();
    let recs = simulate_replicates(env, cfg.t_end * big_t, &snaps, cfg.seed, cfg.replicates, caps(cfg))?;
    let mut truncated = 0;
    sec.write("replicates.txt", |w| {
        writeln!(w, "replicate stream truncated leak events")?;
        for (k, r) in recs.iter().enumerate() {
            let flag = r.truncated.map_or("none", |t| t.as_str());
            writeln!(w, "{k} {} {flag} {} {}", derive_stream(cfg.seed, k as u64), r.leak, r.events)?;
        }
        Ok(())
    })?;
    for (k, r) in recs.iter().enumerate() {
        truncated += r.truncated.is_some() as usize;
        sec.write(&format!("brw_{k:04}.txt"), |w| Ok(r.write_to(w)?))?;
    }
    sec.put("replicates", recs.len());
    sec.put("truncated_replicates", truncated);
    sec.put("leak", recs.iter().map(|r| r.leak).sum::<u64>());
    sec.notes.push(format!("{} replicates, {truncated} truncated", recs.len()));
    Ok(())
}

fn pam(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let big_t = env.scaling().t;
    let f = solve_pam_micro(env, cfg.t_end * big_t, cfg.pam_grid, pam_options(cfg))?;
    sec.write("pam.txt", |w| Ok(f.write_to(w)?))?;
    let hit = f.pam_hitting()?;
    sec.write("pam_hitting.txt", |w| {
        Ok(lilypad_core::lilypad::write_columns(env, &hit, w)?)
    })?;
    let last = f.times.len() - 1;
    sec.put("accepted_steps", f.stats.accepted);
    sec.put("rejected_steps", f.stats.rejected);
    sec.put("max_step_error", fmt_f64(f.stats.max_error));
    sec.put("mass", fmt_f64(f.mass(last)));
    sec.put("leak", fmt_f64(f.leak(last)));
    sec.notes.push(format!(
        "PAM solved with {} accepted and {} rejected steps",
        f.stats.accepted, f.stats.rejected
    ));
    Ok(())
}

/// Record whose counts and hitting times reproduce the lilypad field, so that
/// comparing it with that field measures only the comparison pipeline.
fn synthetic<'a>(lily: &LilypadField<'a>, times: &[f64]) -> Result<BRWRecord<'a>> {
    let env = lily.env();
    let s = env.scaling();
    let scale = s.a_t * s.t;
    let hits: Vec<f64> = lily.values().iter().map(|h| h * s.t).collect();
    let mut snaps = Vec::with_capacity(times.len());
    for &t in times {
        let m = lily.mass_field(t, EnvelopeMode::Envelope)?;
        snaps.push(Snapshot {
            s: t * s.t,
            counts: m.values().iter().map(|v| (scale * v).exp()).collect(),
            stayers: 0,
        });
    }
    Ok(BRWRecord::from_parts(env, hits.clone(), hits, snaps)?)
}

fn comparison(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let lily = solve_hitting_times(env);
    let times = cfg.output_times();
    let big_t = env.scaling().t;
    let rec = match cfg.compare_source {
        CompareSource::SelfCheck => synthetic(&lily, &times)?,
        CompareSource::Simulate => {
            let snaps: Vec<f64> = times.iter().map(|t| t * big_t).collect();
            simulate_replicates(env, cfg.t_end * big_t, &snaps, cfg.seed, 1, caps(cfg))?
                .pop()
                .expect("one replicate")
        }
    };
    let report: ComparisonReport = compare(&rec, &lily, &times, cfg.hit_radius)?;
    sec.write("compare.txt", |w| Ok(report.write_summary(w)?))?;
    sec.write("compare.csv", |w| Ok(report.write_csv(w)?))?;
    sec.put("source", match cfg.compare_source {
        CompareSource::SelfCheck => "self",
        CompareSource::Simulate => "simulate",
    });
    sec.put("certificate", fmt_f64(report.certificate));
    sec.put("truncated", report.truncated.unwrap_or("none"));
    sec.put("leak", report.leak);
    sec.put("sup_mass_dev", fmt_f64(report.sup_mass_dev));
    sec.put("sup_hit_dev", fmt_f64(report.sup_hit_dev));
    let sup_hd = report.rows.iter().map(|r| r.hausdorff).fold(0.0, f64::max);
    sec.put("sup_hausdorff", fmt_f64(sup_hd));
    sec.notes.push(format!(
        "sup mass deviation {:.3e}, sup hitting deviation {:.3e}, sup Hausdorff {sup_hd:.3e}",
        report.sup_mass_dev, report.sup_hit_dev
    ));
    Ok(())
}

fn scenario(cfg: &RunConfig, scaling: ScalingConstants, sec: &mut Section) -> Result<()> {
    let spec = &cfg.scenario;
    let env = build_scenario(spec, scaling)?;
    let check = check_scenario(&env, spec)?;
    sec.put("variant", spec.variant.as_str());
    sec.put("sites", env.len());
    sec.put("fingerprint", format!("{:016x}", env.fingerprint()));
    sec.write("env.txt", |w| Ok(env.write_to(w)?))?;
    let h = solve_hitting_times(&env);
    certificate(sec, &h)?;
    let tau = pam_tau(&env);
    let wm = maximizer(&h.mass_field(spec.t, EnvelopeMode::Envelope)?);
    let wl = maximizer(&pam_lambda(&env, spec.t)?);
    let separation = wm.l1_to(&wl) as f64 / scaling.r_t;
    let pam_cc = connected_components(&tau.support(spec.t)?);
    let brw_cc = connected_components(&h.support(spec.t)?);
    let flag = |b: Option<bool>| b.map_or("n/a".to_string(), |v| v.to_string());
    let rows = [
        ("parameters", check.parameters.to_string()),
        ("A", check.a.to_string()),
        ("B", check.b.to_string()),
        ("C", check.c.to_string()),
        ("S1", flag(check.s1)),
        ("S2", flag(check.s2)),
        ("S3", flag(check.s3)),
        ("all", check.all().to_string()),
        ("brw_maximizer", format!("{:?}", wm.0)),
        ("pam_maximizer", format!("{:?}", wl.0)),
        ("separation", fmt_f64(separation)),
        ("pam_components", pam_cc.to_string()),
        ("brw_components", brw_cc.to_string()),
    ];
    sec.write("scenario.txt", |w| {
        for (k, v) in &rows {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    })?;
    for (k, v) in rows {
        sec.put(k, v);
    }
    let headline = match spec.variant.as_str() {
        "S1" => format!("maximizers {:?} and {:?}", wm.0, wl.0),
        "S2" => format!("maximizer separation {separation:.4} (> 2 kappa = {})", 2.0 * spec.kappa),
        _ => format!("components {pam_cc} (PAM support, >= 2) vs {brw_cc} (BRW lilypad)"),
    };
    sec.notes.push(format!("scenario {} conditions hold; {headline}", spec.variant.as_str()));
    Ok(())
}

/// Plain PGM of `m_T(., t)` on its support, 256 levels: 0 marks sites outside
/// the support (or outside the window), the support spans 1..=255.
fn pgm(env: &Environment, h: &[f64], m: &[f64], t: f64) -> String {
    let w = env.window();
    let side = w.side();
    let hw = w.half_width();
    let (rows, cols) = if env.scaling().d == 1 { (1, side) } else { (side, side) };
    let inside: Vec<usize> = (0..env.len()).filter(|&i| h[i] <= t).collect();
    let lo = inside.iter().map(|&i| m[i]).fold(f64::INFINITY, f64::min);
    let hi = inside.iter().map(|&i| m[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut px = vec![0u8; rows * cols];
    for &i in &inside {
        let c = w.coords_of(i);
        let at = if c.len() == 1 {
            (c[0] + hw) as usize
        } else {
            (c[0] + hw) as usize * cols + (c[1] + hw) as usize
        };
        px[at] = if hi > lo {
            1 + ((m[i] - lo) / (hi - lo) * 254.0).round() as u8
        } else {
            255
        };
    }
    let mut s = String::new();
    writeln!(s, "P2").unwrap();
    writeln!(s, "# t {} min {} max {}", fmt_f64(t), fmt_f64(lo), fmt_f64(hi)).unwrap();
    writeln!(s, "{cols} {rows}").unwrap();
    writeln!(s, "255").unwrap();
    for r in 0..rows {
        let line: Vec<String> = px[r * cols..(r + 1) * cols].iter().map(|p| p.to_string()).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    s
}

fn frames(cfg: &RunConfig, env: &Environment, sec: &mut Section) -> Result<()> {
    let h = solve_hitting_times(env);
    certificate(sec, &h)?;
    let mut sizes = Vec::with_capacity(cfg.frames);
    let mut nested = true;
    let mut prev: Option<Vec<bool>> = None;
    for k in 0..cfg.frames {
        let t = cfg.t_end * (k + 1) as f64 / cfg.frames as f64;
        let m = h.mass_field(t, EnvelopeMode::Envelope)?;
        let image = pgm(env, h.values(), m.values(), t);
        sec.write(&format!("frame_{k:04}.pgm"), |w| Ok(w.write_all(image.as_bytes())?))?;
        let settled: Vec<bool> = h.values().iter().map(|&v| v <= t).collect();
        if let Some(p) = &prev {
            nested &= p.iter().zip(&settled).all(|(a, b)| !a || *b);
        }
        sizes.push(settled.iter().filter(|&&b| b).count());
        prev = Some(settled);
    }
    sec.put("frames", cfg.frames);
    sec.put("support_sizes", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    sec.put("nested", nested);
    sec.notes.push(format!(
        "{} frames, support grows {} -> {} sites, nested = {nested}",
        cfg.frames,
        sizes[0],
        sizes[sizes.len() - 1]
    ));
    Ok(())
}
