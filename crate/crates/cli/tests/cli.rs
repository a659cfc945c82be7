use qpat::io::RawField;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const TRANSPORT: &str = "\
regime = transport
nx = 14
ndirs = 8
sigma_a = bump 1.0 0.4 0.4 0.55 0.15
sigma_b = bump 1.0 0.8 0.6 0.45 0.15
sigma_s = 0.5
lower = 0.5
upper = 2
";

const DIFFUSION: &str = "\
regime = diffusion
nx = 20
sigma_a = bump 1.0 0.4 0.4 0.55 0.15
sigma_b = bump 1.0 0.8 0.6 0.45 0.15
gamma = 0.5
lower = 0.5
upper = 2
";

struct Run {
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.output.stdout).into_owned()
    }

    fn text(&self, name: &str) -> String {
        std::fs::read_to_string(self.out.join(name)).unwrap()
    }

    fn field(&self, name: &str) -> RawField {
        RawField::read(self.out.join(name)).unwrap()
    }

    fn report_value(&self, key: &str) -> f64 {
        let text = self.text("report.txt");
        let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} in {text}"));
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    }
}

fn qpat(dir: &Path, config: &str, cmd: &str, out: &str, overrides: &[&str], envs: &[(&str, &str)]) -> Run {
    let cfg = dir.join(format!("{out}.cfg"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(out);
    let mut c = Command::new(env!("CARGO_BIN_EXE_qpat"));
    c.arg("--config").arg(&cfg).arg("--cmd").arg(cmd).arg("--out").arg(&out);
    for o in overrides {
        c.arg("--override").arg(o);
    }
    for (k, v) in envs {
        c.env(k, v);
    }
    Run { output: c.output().unwrap(), out }
}

#[test]
fn forward_without_two_photon_absorption_is_the_scaled_linear_solve() {
    let dir = TempDir::new().unwrap();
    let over = ["sigma_b = 0", "amplitude = 0.01", "transport_tol = 1e-14"];
    let fwd = qpat(dir.path(), TRANSPORT, "forward-transport", "fwd", &over, &[]);
    assert_eq!(fwd.code(), 0, "{}", fwd.stderr());
    let lin = qpat(dir.path(), TRANSPORT, "linearize", "lin", &over, &[]);
    assert_eq!(lin.code(), 0, "{}", lin.stderr());
    let u = fwd.field("u.qf").into_phase().unwrap();
    let u1 = lin.field("u1.qf").into_phase().unwrap();
    let gap = u.zip_map(&u1, |a, b| a - 0.01 * b).max_abs();
    assert!(gap <= 1e-14, "{gap}");
    assert!(lin.field("u2.qf").into_phase().unwrap().max_abs() == 0.0);
}

#[test]
fn diffusion_sigma_b_round_trip_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let run = qpat(dir.path(), DIFFUSION, "recon-sigma-b", "rb", &[], &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let err = run.report_value("relative_l2_error_vs_config");
    assert!(err <= 1e-8, "{err}");
    let names: Vec<String> = run.stdout().lines().map(|l| l.split_whitespace().nth(1).unwrap().to_string()).collect();
    assert_eq!(names, ["config.txt", "report.txt", "sigma_b.qf"]);
}

#[test]
fn transport_sigma_b_needs_the_admissibility_override() {
    let dir = TempDir::new().unwrap();
    let refused = qpat(dir.path(), TRANSPORT, "recon-sigma-b", "refused", &[], &[]);
    assert_eq!(refused.code(), 2);
    assert!(refused.stderr().contains("A2"), "{}", refused.stderr());
    assert!(refused.text("error.txt").contains("A2"));
    assert!(refused.text("manifest.txt").contains("error.txt"));

    let run = qpat(dir.path(), TRANSPORT, "recon-sigma-b", "forced", &["enforce_admissibility=false"], &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let err = run.report_value("relative_l2_error_vs_config");
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn high_contrast_certify_is_a_precondition_failure() {
    let dir = TempDir::new().unwrap();
    let over = ["sigma_a = bump 0.02 1.98 0.5 0.5 0.2", "lower = 0.02", "upper = 2"];
    let run = qpat(dir.path(), TRANSPORT, "certify", "cert", &over, &[]);
    assert_eq!(run.code(), 2, "{}", run.stderr());
    assert!(run.stderr().contains("A2"));
    assert!(run.text("certificate.txt").contains("in_A2 = false"));
}

#[test]
fn recon_from_written_data() {
    let dir = TempDir::new().unwrap();
    let data = qpat(dir.path(), DIFFUSION, "make-data", "data", &[], &[]);
    assert_eq!(data.code(), 0, "{}", data.stderr());
    let h1 = data.out.join("h1.qf");
    let h1_over = format!("data_h1 = {}", h1.display());
    let run = qpat(dir.path(), DIFFUSION, "recon-sigma-a", "ra", &[&h1_over], &[]);
    assert_eq!(run.code(), 0, "{}", run.stderr());
    let err = run.report_value("relative_l2_error_vs_config");
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn manifests_are_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let over = ["noise_std = 0.01", "seed = 11"];
    let a = qpat(dir.path(), TRANSPORT, "make-data", "a", &over, &[]);
    let b = qpat(dir.path(), TRANSPORT, "make-data", "b", &over, &[("QPAT_THREADS", "1")]);
    assert_eq!(a.code(), 0, "{}", a.stderr());
    assert_eq!(b.code(), 0, "{}", b.stderr());
    assert_eq!(a.text("manifest.txt"), b.text("manifest.txt"));
    let c = qpat(dir.path(), TRANSPORT, "make-data", "c", &["noise_std = 0.01", "seed = 12"], &[]);
    assert_ne!(a.text("manifest.txt"), c.text("manifest.txt"));
}

#[test]
fn picard_budget_exhaustion_is_divergence() {
    let dir = TempDir::new().unwrap();
    let run = qpat(dir.path(), DIFFUSION, "forward-diffusion", "fd", &["picard_max_iter = 1"], &[]);
    assert_eq!(run.code(), 3, "{}", run.stderr());
}

#[test]
fn config_errors_exit_with_precondition_code() {
    let dir = TempDir::new().unwrap();
    let missing = qpat(dir.path(), "regime = transport\n", "forward-transport", "m", &[], &[]);
    assert_eq!(missing.code(), 2);
    assert!(missing.stderr().contains("missing required keys"));
    let bad = qpat(dir.path(), TRANSPORT, "forward-transport", "b", &["ndirs = 3"], &[]);
    assert_eq!(bad.code(), 2, "{}", bad.stderr());
    let threads = qpat(dir.path(), TRANSPORT, "forward-transport", "t", &[], &[("QPAT_THREADS", "zero")]);
    assert_eq!(threads.code(), 2);
}

#[test]
fn verify_derivatives_passes_in_both_regimes() {
    let dir = TempDir::new().unwrap();
    for (name, cfg) in [("vt", TRANSPORT), ("vd", DIFFUSION)] {
        let run = qpat(dir.path(), cfg, "verify-derivatives", name, &[], &[]);
        assert_eq!(run.code(), 0, "{name}: {}", run.stderr());
        assert!(run.text("derivatives.txt").contains("passed"));
    }
}
