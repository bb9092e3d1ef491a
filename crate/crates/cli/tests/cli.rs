use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn lilypad(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lilypad"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LILYPAD_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = lilypad(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from manifest:\n{text}"))
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_SIM: &str = "[window]\nradius = 0.2\n[time]\nt_end = 0.05\ntimes = 0.02,0.05\n\
[brw]\nreplicates = 6\nmax_population = 20000\n";

#[test]
fn reruns_give_identical_manifests() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SIM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["simulate", "--config", &cfg, "--seed", "9", "--threads", "1"], &a);
    ok(&["simulate", "--config", &cfg, "--seed", "9", "--threads", "4"], &b);
    let ma = std::fs::read(a.join("manifest.txt")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.txt")).unwrap());
    assert_eq!(
        std::fs::read(a.join("brw_0005.txt")).unwrap(),
        std::fs::read(b.join("brw_0005.txt")).unwrap()
    );

    let c = tmp.path().join("c");
    ok(&["simulate", "--config", &cfg, "--seed", "10"], &c);
    assert_ne!(ma, std::fs::read(c.join("manifest.txt")).unwrap());
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    ok(&["lilypad", "--seed", "4", "--T-ladder", "30"], &a);
    let cfg = a.join("config.txt");
    let b = tmp.path().join("b");
    ok(&["lilypad", "--config", cfg.to_str().unwrap()], &b);
    assert_eq!(
        std::fs::read(a.join("manifest.txt")).unwrap(),
        std::fs::read(b.join("manifest.txt")).unwrap()
    );
}

#[test]
fn thread_count_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SIM);
    let a = tmp.path().join("a");
    ok(&["simulate", "--config", &cfg], &a);
    let b = tmp.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_lilypad"))
        .args(["simulate", "--config", &cfg, "--out"])
        .arg(&b)
        .env("LILYPAD_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(a.join("manifest.txt")).unwrap(),
        std::fs::read(b.join("manifest.txt")).unwrap()
    );
    let bad = Command::new(env!("CARGO_BIN_EXE_lilypad"))
        .args(["gen-env", "--out"])
        .arg(tmp.path().join("c"))
        .env("LILYPAD_THREADS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn compare_with_itself_reports_zero_deviation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[time]\nt_end = 1\ntimes = 0.25,0.5,1\n[compare]\nsource = self\nhit_radius = 0.4\n",
    );
    let out = tmp.path().join("o");
    ok(&["compare", "--config", &cfg, "--seed", "3"], &out);
    for key in ["sup_mass_dev", "sup_hit_dev"] {
        let v: f64 = manifest_value(&out, key).parse().unwrap();
        assert!(v <= 1e-12, "{key} = {v}");
    }
    assert_eq!(manifest_value(&out, "sup_hausdorff").parse::<f64>().unwrap(), 0.0);
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn scenario_s3_disconnects_the_support() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s3");
    let stdout = ok(&["scenario", "--variant", "S3"], &out);
    assert!(stdout.contains("components 2"), "{stdout}");
    let pam: usize = manifest_value(&out, "pam_components").parse().unwrap();
    assert!(pam >= 2);
    assert_eq!(manifest_value(&out, "all"), "true");
    let report = std::fs::read_to_string(out.join("scenario.txt")).unwrap();
    assert!(report.contains("S3 = true"));
}

#[test]
fn ladder_writes_one_directory_per_t() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("l");
    ok(&["gen-env", "--T-ladder", "20,50"], &out);
    assert!(out.join("T_20/env.txt").exists());
    assert!(out.join("T_50/env.txt").exists());
    let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(m.contains("[T=20]") && m.contains("[T=50]"));
    assert!(m.contains("file T_50/env.txt = "));
}

fn pixels(pgm: &str) -> (String, Vec<u8>) {
    let mut lines = pgm.lines();
    assert_eq!(lines.next(), Some("P2"));
    let header = lines.next().unwrap().to_string();
    lines.next();
    assert_eq!(lines.next(), Some("255"));
    let px = lines.flat_map(|l| l.split_whitespace()).map(|p| p.parse().unwrap()).collect();
    (header, px)
}

#[test]
fn frames_have_nested_supports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[scaling]\nd = 2\nalpha = 3\n[window]\nradius = 0.3\n[frames]\ncount = 8\n",
    );
    let out = tmp.path().join("f");
    ok(&["frames", "--config", &cfg, "--seed", "12"], &out);
    let mut prev: Option<Vec<u8>> = None;
    for k in 0..8 {
        let text = std::fs::read_to_string(out.join(format!("frame_{k:04}.pgm"))).unwrap();
        let (header, px) = pixels(&text);
        assert!(header.contains(" min ") && header.contains(" max "));
        if let Some(p) = &prev {
            assert!(p.iter().zip(&px).all(|(a, b)| *a == 0 || *b > 0), "frame {k} not nested");
        }
        prev = Some(px);
    }
    assert_eq!(manifest_value(&out, "nested"), "true");
}

#[test]
fn errors_are_one_classified_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[window]\nwidth = 2\n");
    let o = lilypad(&["lilypad", "--config", &cfg], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: class=Config detail=config line 2"), "{err}");

    let o = lilypad(&["gen-env", "--T-ladder", "2"], &tmp.path().join("o"));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: class=InvalidConfig"));

    let cfg = write_config(tmp.path(), "[scenario]\neta = 0.1\n");
    let o = lilypad(&["scenario", "--config", &cfg], &tmp.path().join("o"));
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: class=InfeasibleScenario"));

    let o = lilypad(&["scenario", "--variant", "S9"], &tmp.path().join("o"));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error: class=InvalidParameter"));
}
