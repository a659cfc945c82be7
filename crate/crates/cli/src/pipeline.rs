//! Pipeline commands: build the model from a config, run one stage and write
//! its artifacts plus a hash manifest.

use crate::config::{ExperimentConfig, FieldSpec, KernelSpec, SourceSpec};
use qpat::data::{add_gaussian_noise, internal_data_diffusion, internal_data_transport};
use qpat::data::{linearized_data_diffusion, linearized_data_transport, InternalData};
use qpat::diffusion::{solve_semilinear_diffusion, DiffusionOptions, DiffusionPicardOptions};
use qpat::io::RawField;
use qpat::linearization::{
    linearize_diffusion, linearize_transport, solve_u1_diffusion, verify_derivatives_diffusion,
    verify_derivatives_transport,
};
use qpat::reconstruction::{
    certify_admissibility_transport, diffusion_stability_constants, reconstruct_sigma_a_diffusion,
    reconstruct_sigma_a_transport, reconstruct_sigma_b_diffusion, reconstruct_sigma_b_transport,
    ReconstructionOptions, ReconstructionResult,
};
use qpat::transport::{solve_semilinear_rte, PicardOptions, TransportOptions};
use qpat::uq::{uq_diffusion_sweep, uq_transport_sweep, UqOptions};
use qpat::{
    validate_coefficients, Angular, AngularQuadrature, BoundarySource, BoundaryTrace, CoefficientSet,
    KnownLayer, Norm, Regime, ScalarField, ScatteringKernel, SpatialGrid,
};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    ForwardTransport,
    ForwardDiffusion,
    Linearize,
    MakeData,
    Certify,
    ReconSigmaA,
    ReconSigmaB,
    UqSweep,
    VerifyDerivatives,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] qpat::Error),
    /// A verification stage ran to completion but its checks failed.
    #[error("check failed: {0}")]
    Check(String),
}

impl RunError {
    /// 2 for violated preconditions, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_precondition() => 2,
            RunError::Core(e) if e.is_divergence() => 3,
            _ => 1,
        }
    }
}

/// Files written by one run, by name relative to the output directory.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        if !self.names.iter().any(|n| n == name) {
            self.names.push(name.to_string());
        }
        Ok(())
    }

    fn field(&mut self, name: &str, raw: RawField) -> std::io::Result<()> {
        self.write(name, &raw.to_bytes())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Writes `manifest.txt` with `sha256  name` for every artifact, sorted
    /// by name, and returns its text.
    pub fn write_manifest(&self) -> std::io::Result<String> {
        let mut names = self.names.clone();
        names.sort();
        let mut text = String::new();
        for n in &names {
            let digest = Sha256::digest(std::fs::read(self.dir.join(n))?);
            let _ = writeln!(text, "{}  {n}", hex::encode(digest));
        }
        std::fs::write(self.dir.join("manifest.txt"), &text)?;
        Ok(text)
    }
}

/// Everything the commands need, assembled from a config.
pub struct Model {
    pub grid: SpatialGrid,
    pub angular: Angular,
    pub coefficients: CoefficientSet,
    pub source: BoundarySource,
    /// Absent when the source file is direction-resolved.
    trace: Option<BoundaryTrace>,
}

fn field_from_spec(grid: &SpatialGrid, spec: &FieldSpec, name: &str) -> qpat::Result<ScalarField> {
    match spec {
        FieldSpec::Constant(v) => Ok(ScalarField::constant(grid, *v)),
        FieldSpec::Bump { base, amp, center, width } => Ok(ScalarField::from_fn(grid, |x, y| {
            let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            base + amp * (-r2 / (width * width)).exp()
        })),
        FieldSpec::File(p) => {
            let f = RawField::read(p)?.into_scalar()?;
            f.check_grid(grid).map_err(|e| qpat::Error::Shape(format!("{name}: {e}")))?;
            Ok(f)
        }
    }
}

impl Model {
    pub fn from_config(cfg: &ExperimentConfig) -> qpat::Result<Self> {
        let grid = SpatialGrid::new(cfg.nx, cfg.ny, cfg.origin, cfg.extent, cfg.layer_delta)?;
        let quad = AngularQuadrature::uniform_offset(cfg.ndirs, cfg.quadrature_offset)?;
        let kernel = match cfg.kernel {
            KernelSpec::Isotropic => ScatteringKernel::isotropic(cfg.ndirs),
            KernelSpec::HenyeyGreenstein(g) => ScatteringKernel::henyey_greenstein(&quad, g)?,
        };
        let angular = Angular::new(quad, kernel)?;
        let coefficients = CoefficientSet::constant(&grid, 1.0, 1.0, 0.0, 0.0, 1.0, cfg.lower, cfg.upper)
            .with_xi(field_from_spec(&grid, &cfg.xi, "xi")?)
            .with_sigma_a(field_from_spec(&grid, &cfg.sigma_a, "sigma_a")?)
            .with_sigma_b(field_from_spec(&grid, &cfg.sigma_b, "sigma_b")?)
            .with_sigma_s(field_from_spec(&grid, &cfg.sigma_s, "sigma_s")?)
            .with_gamma(field_from_spec(&grid, &cfg.gamma, "gamma")?)
            .with_known_layer(cfg.known_layer.map(|(a, s)| KnownLayer { sigma_a: a, sigma_s: s }));
        validate_coefficients(&coefficients)?;
        let (source, trace) = match &cfg.source {
            SourceSpec::Constant(v) => (
                BoundarySource::constant(&grid, &angular.quadrature, *v),
                Some(BoundaryTrace::constant(&grid, *v)),
            ),
            SourceSpec::File(p) => {
                let raw = RawField::read(p)?;
                match raw.nv {
                    Some(nv) if nv > 1 => (
                        BoundarySource::from_values(&grid, &angular.quadrature, raw.data)?,
                        None,
                    ),
                    _ => {
                        let t = BoundaryTrace::from_values(&grid, raw.data)?;
                        let nv = angular.ndirs();
                        let vals = t.values().iter().flat_map(|v| std::iter::repeat_n(*v, nv)).collect();
                        (BoundarySource::from_values(&grid, &angular.quadrature, vals)?, Some(t))
                    }
                }
            }
        };
        Ok(Self {
            grid,
            angular,
            coefficients,
            source,
            trace,
        })
    }

    pub fn trace(&self) -> qpat::Result<&BoundaryTrace> {
        self.trace.as_ref().ok_or_else(|| {
            qpat::Error::Precondition("a direction-resolved source cannot drive the diffusion model".into())
        })
    }
}

fn transport_opts(cfg: &ExperimentConfig) -> TransportOptions {
    TransportOptions {
        tol: cfg.transport_tol,
        max_iter: cfg.transport_max_iter,
    }
}

fn picard_opts(cfg: &ExperimentConfig) -> PicardOptions {
    PicardOptions {
        tol: cfg.picard_tol,
        max_iter: cfg.picard_max_iter,
        inner: transport_opts(cfg),
        require_certificate: cfg.require_certificate,
    }
}

fn diffusion_opts(cfg: &ExperimentConfig) -> DiffusionOptions {
    DiffusionOptions {
        tol: cfg.diffusion_tol,
        max_iter: cfg.diffusion_max_iter,
    }
}

fn diffusion_picard_opts(cfg: &ExperimentConfig) -> DiffusionPicardOptions {
    DiffusionPicardOptions {
        tol: cfg.picard_tol,
        max_iter: cfg.picard_max_iter,
        inner: diffusion_opts(cfg),
    }
}

fn recon_opts(cfg: &ExperimentConfig) -> ReconstructionOptions {
    ReconstructionOptions {
        tol: cfg.recon_tol,
        max_iter: cfg.recon_max_iter,
        enforce_admissibility: cfg.enforce_admissibility,
        alpha_min: cfg.alpha_min,
        transport: transport_opts(cfg),
        diffusion: diffusion_opts(cfg),
        ..Default::default()
    }
}

/// Linearized data of the configured model for a unit-amplitude source.
fn linearized(cfg: &ExperimentConfig, m: &Model) -> qpat::Result<InternalData> {
    let c = &m.coefficients;
    match cfg.regime {
        Regime::Transport => {
            let b = linearize_transport(c, &m.angular, &m.source, &transport_opts(cfg))?;
            linearized_data_transport(c, &m.angular.quadrature, &b)
        }
        Regime::Diffusion => {
            let b = linearize_diffusion(c, m.trace()?, &diffusion_opts(cfg))?;
            linearized_data_diffusion(c, &b)
        }
    }
}

/// `data_h1`/`data_h2` from file when configured, else generated from the
/// model.
fn data_fields(cfg: &ExperimentConfig, m: &Model) -> qpat::Result<(ScalarField, ScalarField)> {
    let read = |p: &PathBuf| -> qpat::Result<ScalarField> {
        let f = RawField::read(p)?.into_scalar()?;
        f.check_grid(&m.grid)?;
        Ok(f)
    };
    match (&cfg.data_h1, &cfg.data_h2) {
        (Some(a), Some(b)) => Ok((read(a)?, read(b)?)),
        (a, b) => {
            let d = linearized(cfg, m)?;
            Ok((
                a.as_ref().map(read).transpose()?.unwrap_or(d.h1),
                b.as_ref().map(read).transpose()?.unwrap_or(d.h2),
            ))
        }
    }
}

fn relative_l2(a: &ScalarField, truth: &ScalarField, grid: &SpatialGrid) -> qpat::Result<f64> {
    let d = a.zip_map(truth, |x, y| x - y);
    let n = qpat::norms::scalar_norm(truth, grid, Norm::L2Omega)?;
    let e = qpat::norms::scalar_norm(&d, grid, Norm::L2Omega)?;
    Ok(if n > 0.0 { e / n } else { e })
}

fn recon_report(res: &ReconstructionResult, truth: &ScalarField, grid: &SpatialGrid) -> qpat::Result<String> {
    let mut s = res.to_string();
    let _ = writeln!(s, "relative_l2_error_vs_config = {:e}", relative_l2(&res.field, truth, grid)?);
    Ok(s)
}

/// Runs `cmd`, writing artifacts into `out`. Artifacts produced before a
/// failure are kept.
pub fn run_pipeline(cmd: Command, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<(), RunError> {
    out.write("config.txt", cfg.to_string().as_bytes()).map_err(qpat::Error::from)?;
    let m = Model::from_config(cfg)?;
    let c = &m.coefficients;
    let io = |r: std::io::Result<()>| r.map_err(|e| RunError::Core(e.into()));
    match cmd {
        Command::ForwardTransport => {
            let g = m.source.scale(cfg.amplitude);
            let sol = solve_semilinear_rte(c, &m.angular, &g, &picard_opts(cfg))?;
            let h = internal_data_transport(c, &m.angular.quadrature, &sol.u)?;
            io(out.field("u.qf", (&sol.u).into()))?;
            io(out.field("h.qf", (&h).into()))?;
            io(out.write("report.txt", sol.report.to_string().as_bytes()))?;
        }
        Command::ForwardDiffusion => {
            let g = m.trace()?.scale(cfg.amplitude);
            let sol = solve_semilinear_diffusion(c, &g, &diffusion_picard_opts(cfg))?;
            let h = internal_data_diffusion(c, &sol.u)?;
            io(out.field("u.qf", (&sol.u).into()))?;
            io(out.field("h.qf", (&h).into()))?;
            io(out.write("report.txt", sol.report.to_string().as_bytes()))?;
        }
        Command::Linearize => match cfg.regime {
            Regime::Transport => {
                let b = linearize_transport(c, &m.angular, &m.source, &transport_opts(cfg))?;
                let d = linearized_data_transport(c, &m.angular.quadrature, &b)?;
                io(out.field("u1.qf", (&b.u1).into()))?;
                io(out.field("u2.qf", (&b.u2).into()))?;
                io(out.field("h1.qf", (&d.h1).into()))?;
                io(out.field("h2.qf", (&d.h2).into()))?;
            }
            Regime::Diffusion => {
                let b = linearize_diffusion(c, m.trace()?, &diffusion_opts(cfg))?;
                let d = linearized_data_diffusion(c, &b)?;
                io(out.field("u1.qf", (&b.u1).into()))?;
                io(out.field("u2.qf", (&b.u2).into()))?;
                io(out.field("h1.qf", (&d.h1).into()))?;
                io(out.field("h2.qf", (&d.h2).into()))?;
            }
        },
        Command::MakeData => {
            let h = match cfg.regime {
                Regime::Transport => {
                    let g = m.source.scale(cfg.amplitude);
                    let u = solve_semilinear_rte(c, &m.angular, &g, &picard_opts(cfg))?.u;
                    internal_data_transport(c, &m.angular.quadrature, &u)?
                }
                Regime::Diffusion => {
                    let g = m.trace()?.scale(cfg.amplitude);
                    let u = solve_semilinear_diffusion(c, &g, &diffusion_picard_opts(cfg))?.u;
                    internal_data_diffusion(c, &u)?
                }
            };
            let d = linearized(cfg, &m)?;
            let noisy = |f: &ScalarField, k: u64| -> qpat::Result<ScalarField> {
                if cfg.noise_std > 0.0 {
                    add_gaussian_noise(f, cfg.noise_std, cfg.seed.wrapping_add(k))
                } else {
                    Ok(f.clone())
                }
            };
            io(out.field("h1.qf", (&noisy(&d.h1, 0)?).into()))?;
            io(out.field("h2.qf", (&noisy(&d.h2, 1)?).into()))?;
            io(out.field("h.qf", (&noisy(&h, 2)?).into()))?;
        }
        Command::Certify => match cfg.regime {
            Regime::Transport => {
                let (h1, _) = data_fields(cfg, &m)?;
                let cert = certify_admissibility_transport(
                    c,
                    &m.angular,
                    &m.source,
                    &h1,
                    cfg.alpha_min,
                    &transport_opts(cfg),
                )?;
                io(out.write("certificate.txt", cert.to_string().as_bytes()))?;
                if !cert.in_a2 {
                    return Err(qpat::Error::Precondition(format!("A2: Pi >= 1 (Pi = {:.4})", cert.pi)).into());
                }
                if !cert.in_a1 {
                    return Err(qpat::Error::Precondition(format!("A1: alpha = {:.4e}", cert.alpha)).into());
                }
            }
            Regime::Diffusion => {
                let u1 = solve_u1_diffusion(c, m.trace()?, &diffusion_opts(cfg))?;
                let s = diffusion_stability_constants(c, &u1, &diffusion_opts(cfg))?;
                let text = format!(
                    "z_sup = {:e}\nmin_u1 = {:e}\nweighted_constant = {:e}\nplain_constant = {:e}\n",
                    s.z_sup, s.min_u1, s.weighted, s.plain
                );
                io(out.write("certificate.txt", text.as_bytes()))?;
            }
        },
        Command::ReconSigmaA => {
            let (h1, _) = data_fields(cfg, &m)?;
            let opts = recon_opts(cfg);
            let res = match cfg.regime {
                Regime::Transport => reconstruct_sigma_a_transport(c, &m.angular, &m.source, &h1, &opts)?,
                Regime::Diffusion => reconstruct_sigma_a_diffusion(c, m.trace()?, &h1, &opts)?,
            };
            io(out.field("sigma_a.qf", (&res.field).into()))?;
            io(out.write("report.txt", recon_report(&res, &c.sigma_a, &m.grid)?.as_bytes()))?;
        }
        Command::ReconSigmaB => {
            let (_, h2) = data_fields(cfg, &m)?;
            let opts = recon_opts(cfg);
            let res = match cfg.regime {
                Regime::Transport => reconstruct_sigma_b_transport(c, &m.angular, &m.source, &h2, &opts)?,
                Regime::Diffusion => reconstruct_sigma_b_diffusion(c, m.trace()?, &h2, &opts)?,
            };
            io(out.field("sigma_b.qf", (&res.field).into()))?;
            io(out.write("report.txt", recon_report(&res, &c.sigma_b, &m.grid)?.as_bytes()))?;
        }
        Command::UqSweep => {
            let opts = UqOptions {
                reconstruction: ReconstructionOptions {
                    enforce_admissibility: false,
                    ..recon_opts(cfg)
                },
                perturbation: cfg.perturbation,
                p: cfg.uq_p,
            };
            let res = match cfg.regime {
                Regime::Transport => uq_transport_sweep(c, &m.angular, &m.source, &cfg.eta_list, &opts)?,
                Regime::Diffusion => uq_diffusion_sweep(c, m.trace()?, &cfg.eta_list, &opts)?,
            };
            io(out.write("uq.csv", res.to_csv().as_bytes()))?;
            io(out.write("uq_summary.txt", res.to_string().as_bytes()))?;
        }
        Command::VerifyDerivatives => {
            let report = match cfg.regime {
                Regime::Transport => {
                    verify_derivatives_transport(c, &m.angular, &m.source, &cfg.eps_list, &picard_opts(cfg))?
                }
                Regime::Diffusion => {
                    verify_derivatives_diffusion(c, m.trace()?, &cfg.eps_list, &diffusion_picard_opts(cfg))?
                }
            };
            io(out.write("derivatives.txt", report.to_string().as_bytes()))?;
            if !report.passed {
                return Err(RunError::Check("derivative remainders outside the expected band".into()));
            }
        }
    }
    Ok(())
}

/// Runs `cmd` and always finishes with a manifest; a failure is recorded in
/// `error.txt` before the manifest is written.
pub fn execute(cmd: Command, cfg: &ExperimentConfig, dir: &Path) -> Result<String, (RunError, String)> {
    let mut out = match Artifacts::new(dir) {
        Ok(o) => o,
        Err(e) => return Err((RunError::Core(e.into()), String::new())),
    };
    let result = run_pipeline(cmd, cfg, &mut out);
    if let Err(e) = &result {
        let _ = out.write("error.txt", format!("{e}\n").as_bytes());
    }
    let manifest = out.write_manifest().unwrap_or_default();
    match result {
        Ok(()) => Ok(manifest),
        Err(e) => Err((e, manifest)),
    }
}
