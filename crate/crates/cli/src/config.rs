//! Flat `key = value` experiment configuration.

use qpat::uq::Perturbation;
use qpat::Regime;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` is set twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// How a coefficient field is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// `base + amp·exp(−|x − center|²/width²)`.
    Bump {
        base: f64,
        amp: f64,
        center: [f64; 2],
        width: f64,
    },
    File(PathBuf),
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Constant(v) => write!(f, "constant {v}"),
            FieldSpec::Bump { base, amp, center, width } => {
                write!(f, "bump {base} {amp} {} {} {width}", center[0], center[1])
            }
            FieldSpec::File(p) => write!(f, "file {}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Constant(f64),
    File(PathBuf),
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Constant(v) => write!(f, "constant {v}"),
            SourceSpec::File(p) => write!(f, "file {}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Isotropic,
    HenyeyGreenstein(f64),
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Isotropic => write!(f, "isotropic"),
            KernelSpec::HenyeyGreenstein(g) => write!(f, "hg {g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub layer_delta: f64,
    pub ndirs: usize,
    pub quadrature_offset: f64,
    pub kernel: KernelSpec,
    pub xi: FieldSpec,
    pub sigma_a: FieldSpec,
    pub sigma_b: FieldSpec,
    pub sigma_s: FieldSpec,
    pub gamma: FieldSpec,
    pub lower: f64,
    pub upper: f64,
    /// σ_a and σ_s inside the boundary layer.
    pub known_layer: Option<(f64, f64)>,
    pub source: SourceSpec,
    /// Multiplies the boundary source in nonlinear forward solves.
    pub amplitude: f64,
    pub transport_tol: f64,
    pub transport_max_iter: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub require_certificate: bool,
    pub diffusion_tol: f64,
    pub diffusion_max_iter: usize,
    pub recon_tol: f64,
    pub recon_max_iter: usize,
    pub enforce_admissibility: bool,
    pub alpha_min: Option<f64>,
    pub data_h1: Option<PathBuf>,
    pub data_h2: Option<PathBuf>,
    pub noise_std: f64,
    pub seed: u64,
    pub eta_list: Vec<f64>,
    pub perturbation: Perturbation,
    pub uq_p: f64,
    pub eps_list: Vec<f64>,
    pub output_dir: PathBuf,
}

const REQUIRED: [&str; 6] = ["regime", "nx", "sigma_a", "sigma_b", "lower", "upper"];

pub const KEYS: &[&str] = &[
    "regime",
    "nx",
    "ny",
    "x0",
    "y0",
    "lx",
    "ly",
    "layer_delta",
    "ndirs",
    "quadrature_offset",
    "kernel",
    "xi",
    "sigma_a",
    "sigma_b",
    "sigma_s",
    "gamma",
    "lower",
    "upper",
    "known_sigma_a",
    "known_sigma_s",
    "source",
    "amplitude",
    "transport_tol",
    "transport_max_iter",
    "picard_tol",
    "picard_max_iter",
    "require_certificate",
    "diffusion_tol",
    "diffusion_max_iter",
    "recon_tol",
    "recon_max_iter",
    "enforce_admissibility",
    "alpha_min",
    "data_h1",
    "data_h2",
    "noise_std",
    "seed",
    "eta_list",
    "perturbation",
    "uq_p",
    "eps_list",
    "output_dir",
];

/// Raw `key → (line, value)` pairs, checked for syntax, unknown keys and
/// duplicates.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, found {content:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "empty key or value".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { line, key: key.into() });
        }
        if map.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
    }
    Ok(map)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_pairs(parse_pairs(text)?)
}

/// Parses `text` and then applies `key=value` overrides, which may replace
/// keys set in the file.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut map = parse_pairs(text)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("override {o:?} is not key=value"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line: 0, key: k.into() });
        }
        map.insert(k.to_string(), (0, v.to_string()));
    }
    ExperimentConfig::from_pairs(map)
}

struct Reader {
    map: BTreeMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn fail(&mut self, key: &str, line: usize, msg: impl fmt::Display) {
        let at = if line > 0 { format!("line {line}: ") } else { String::new() };
        self.errors.push(format!("{at}{key}: {msg}"));
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        let Some((line, v)) = self.raw(key) else { return default };
        match v.parse::<T>() {
            Ok(x) => x,
            Err(e) => {
                let v = v.to_string();
                self.fail(key, line, format!("cannot parse {v:?}: {e}"));
                default
            }
        }
    }

    fn opt<T: std::str::FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (line, v) = self.raw(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                let v = v.to_string();
                self.fail(key, line, format!("cannot parse {v:?}: {e}"));
                None
            }
        }
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        let Some((line, v)) = self.raw(key) else { return default.to_vec() };
        let parsed: Result<Vec<f64>, _> = v.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(x) => x,
            Err(e) => {
                let v = v.to_string();
                self.fail(key, line, format!("cannot parse list {v:?}: {e}"));
                default.to_vec()
            }
        }
    }

    fn field(&mut self, key: &str, default: FieldSpec) -> FieldSpec {
        let Some((line, v)) = self.raw(key) else { return default };
        let v = v.to_string();
        let words: Vec<&str> = v.split_whitespace().collect();
        let nums = |w: &[&str]| w.iter().map(|t| t.parse::<f64>()).collect::<Result<Vec<_>, _>>();
        let spec = match words.as_slice() {
            [x] => x.parse::<f64>().ok().map(FieldSpec::Constant),
            ["constant", x] => x.parse::<f64>().ok().map(FieldSpec::Constant),
            ["bump", rest @ ..] if rest.len() == 5 => nums(rest).ok().map(|n| FieldSpec::Bump {
                base: n[0],
                amp: n[1],
                center: [n[2], n[3]],
                width: n[4],
            }),
            ["file", p] => Some(FieldSpec::File(PathBuf::from(p))),
            _ => None,
        };
        spec.unwrap_or_else(|| {
            self.fail(
                key,
                line,
                format!("expected `constant <v>`, `bump <base> <amp> <cx> <cy> <width>` or `file <path>`, found {v:?}"),
            );
            default
        })
    }
}

impl ExperimentConfig {
    fn from_pairs(map: BTreeMap<String, (usize, String)>) -> Result<Self, ConfigError> {
        let missing: Vec<&'static str> = REQUIRED.iter().copied().filter(|k| !map.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let mut r = Reader { map, errors: Vec::new() };
        let regime = r.get("regime", Regime::Transport);
        let nx = r.get("nx", 0usize);
        let ny = r.get("ny", nx);
        let origin = [r.get("x0", 0.0), r.get("y0", 0.0)];
        let extent = [r.get("lx", 1.0), r.get("ly", 1.0)];
        let layer_delta = r.get("layer_delta", 0.0);
        let ndirs = r.get("ndirs", 16usize);
        let quadrature_offset = r.get("quadrature_offset", 0.0);
        let kernel = match r.raw("kernel") {
            None => KernelSpec::Isotropic,
            Some((line, v)) => {
                let words: Vec<&str> = v.split_whitespace().collect();
                match words.as_slice() {
                    ["isotropic"] => KernelSpec::Isotropic,
                    ["hg", g] if g.parse::<f64>().is_ok() => KernelSpec::HenyeyGreenstein(g.parse().unwrap()),
                    _ => {
                        let v = v.to_string();
                        r.fail("kernel", line, format!("expected `isotropic` or `hg <g>`, found {v:?}"));
                        KernelSpec::Isotropic
                    }
                }
            }
        };
        let xi = r.field("xi", FieldSpec::Constant(1.0));
        let sigma_a = r.field("sigma_a", FieldSpec::Constant(1.0));
        let sigma_b = r.field("sigma_b", FieldSpec::Constant(0.0));
        let sigma_s = r.field("sigma_s", FieldSpec::Constant(0.0));
        let gamma = r.field("gamma", FieldSpec::Constant(1.0));
        let lower = r.get("lower", 1.0);
        let upper = r.get("upper", 1.0);
        let known_a: Option<f64> = r.opt("known_sigma_a");
        let known_s: Option<f64> = r.opt("known_sigma_s");
        let known_layer = match (known_a, known_s) {
            (Some(a), Some(s)) => Some((a, s)),
            (None, None) => None,
            _ => {
                r.errors.push("known_sigma_a and known_sigma_s must be given together".into());
                None
            }
        };
        let source = match r.raw("source") {
            None => SourceSpec::Constant(1.0),
            Some((line, v)) => {
                let words: Vec<&str> = v.split_whitespace().collect();
                match words.as_slice() {
                    [x] | ["constant", x] if x.parse::<f64>().is_ok() => SourceSpec::Constant(x.parse().unwrap()),
                    ["file", p] => SourceSpec::File(PathBuf::from(p)),
                    _ => {
                        let v = v.to_string();
                        r.fail("source", line, format!("expected `constant <v>` or `file <path>`, found {v:?}"));
                        SourceSpec::Constant(1.0)
                    }
                }
            }
        };
        let perturbation = match r.raw("perturbation") {
            None => Perturbation::Uniform,
            Some((line, v)) => {
                let words: Vec<&str> = v.split_whitespace().collect();
                let nums: Option<Vec<f64>> = words.iter().skip(1).map(|t| t.parse().ok()).collect();
                match (words.first(), nums) {
                    (Some(&"uniform"), Some(n)) if n.is_empty() => Perturbation::Uniform,
                    (Some(&"bump"), Some(n)) if n.len() == 3 => Perturbation::Bump {
                        center: [n[0], n[1]],
                        width: n[2],
                    },
                    _ => {
                        let v = v.to_string();
                        r.fail("perturbation", line, format!("expected `uniform` or `bump <cx> <cy> <width>`, found {v:?}"));
                        Perturbation::Uniform
                    }
                }
            }
        };
        let cfg = ExperimentConfig {
            regime,
            nx,
            ny,
            origin,
            extent,
            layer_delta,
            ndirs,
            quadrature_offset,
            kernel,
            xi,
            sigma_a,
            sigma_b,
            sigma_s,
            gamma,
            lower,
            upper,
            known_layer,
            source,
            amplitude: r.get("amplitude", 1e-2),
            transport_tol: r.get("transport_tol", 1e-12),
            transport_max_iter: r.get("transport_max_iter", 10_000),
            picard_tol: r.get("picard_tol", 1e-10),
            picard_max_iter: r.get("picard_max_iter", 200),
            require_certificate: r.get("require_certificate", true),
            diffusion_tol: r.get("diffusion_tol", 1e-12),
            diffusion_max_iter: r.get("diffusion_max_iter", 100_000),
            recon_tol: r.get("recon_tol", 1e-11),
            recon_max_iter: r.get("recon_max_iter", 500),
            enforce_admissibility: r.get("enforce_admissibility", true),
            alpha_min: r.opt("alpha_min"),
            data_h1: r.opt::<String>("data_h1").map(PathBuf::from),
            data_h2: r.opt::<String>("data_h2").map(PathBuf::from),
            noise_std: r.get("noise_std", 0.0),
            seed: r.get("seed", 0),
            eta_list: r.list("eta_list", &[0.0, 0.01, 0.05, 0.1]),
            perturbation,
            uq_p: r.get("uq_p", 4.0),
            eps_list: r.list("eps_list", &[1e-2, 5e-3, 2.5e-3]),
            output_dir: PathBuf::from(r.get("output_dir", "qpat-out".to_string())),
        };
        let mut errors = r.errors;
        errors.extend(cfg.semantic_errors());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    fn semantic_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        if let Err(err) = qpat::SpatialGrid::new(self.nx, self.ny, self.origin, self.extent, self.layer_delta) {
            e.push(format!("grid invariant violated: {err}"));
        }
        if self.ndirs < 4 || !self.ndirs.is_multiple_of(2) {
            e.push(format!("ndirs must be even and at least 4, got {}", self.ndirs));
        }
        if !(self.lower > 0.0 && self.lower <= self.upper && self.upper.is_finite()) {
            e.push(format!("bounds must satisfy 0 < lower <= upper, got [{}, {}]", self.lower, self.upper));
        }
        if self.known_layer.is_some() && !(self.layer_delta > 0.0) {
            e.push("known_sigma_a/known_sigma_s need layer_delta > 0".into());
        }
        if let KernelSpec::HenyeyGreenstein(g) = self.kernel {
            if !(g.abs() < 1.0) {
                e.push(format!("hg asymmetry must lie in (-1, 1), got {g}"));
            }
        }
        for (name, tol) in [
            ("transport_tol", self.transport_tol),
            ("picard_tol", self.picard_tol),
            ("diffusion_tol", self.diffusion_tol),
            ("recon_tol", self.recon_tol),
        ] {
            if !(tol > 0.0) {
                e.push(format!("{name} must be positive, got {tol}"));
            }
        }
        if !(self.noise_std >= 0.0) {
            e.push(format!("noise_std must be nonnegative, got {}", self.noise_std));
        }
        if !(self.uq_p > 2.0) || !self.uq_p.is_finite() {
            e.push(format!("uq_p must be finite and > 2, got {}", self.uq_p));
        }
        if self.eta_list.is_empty() || self.eta_list.iter().any(|x| !(*x > -1.0) || !x.is_finite()) {
            e.push("eta_list needs finite entries > -1".into());
        }
        if self.eps_list.len() < 2 || self.eps_list.iter().any(|x| !(*x > 0.0)) {
            e.push("eps_list needs at least two positive entries".into());
        }
        let mut files: Vec<(&str, &PathBuf)> = Vec::new();
        for (name, spec) in [
            ("xi", &self.xi),
            ("sigma_a", &self.sigma_a),
            ("sigma_b", &self.sigma_b),
            ("sigma_s", &self.sigma_s),
            ("gamma", &self.gamma),
        ] {
            if let FieldSpec::File(p) = spec {
                files.push((name, p));
            }
        }
        if let SourceSpec::File(p) = &self.source {
            files.push(("source", p));
        }
        if let Some(p) = &self.data_h1 {
            files.push(("data_h1", p));
        }
        if let Some(p) = &self.data_h2 {
            files.push(("data_h2", p));
        }
        for (name, p) in files {
            if !p.is_file() {
                e.push(format!("{name}: file {} does not exist", p.display()));
            }
        }
        e
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime = {}", self.regime)?;
        writeln!(f, "nx = {}", self.nx)?;
        writeln!(f, "ny = {}", self.ny)?;
        writeln!(f, "x0 = {}", self.origin[0])?;
        writeln!(f, "y0 = {}", self.origin[1])?;
        writeln!(f, "lx = {}", self.extent[0])?;
        writeln!(f, "ly = {}", self.extent[1])?;
        writeln!(f, "layer_delta = {}", self.layer_delta)?;
        writeln!(f, "ndirs = {}", self.ndirs)?;
        writeln!(f, "quadrature_offset = {}", self.quadrature_offset)?;
        writeln!(f, "kernel = {}", self.kernel)?;
        writeln!(f, "xi = {}", self.xi)?;
        writeln!(f, "sigma_a = {}", self.sigma_a)?;
        writeln!(f, "sigma_b = {}", self.sigma_b)?;
        writeln!(f, "sigma_s = {}", self.sigma_s)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "lower = {}", self.lower)?;
        writeln!(f, "upper = {}", self.upper)?;
        if let Some((a, s)) = self.known_layer {
            writeln!(f, "known_sigma_a = {a}")?;
            writeln!(f, "known_sigma_s = {s}")?;
        }
        writeln!(f, "source = {}", self.source)?;
        writeln!(f, "amplitude = {}", self.amplitude)?;
        writeln!(f, "transport_tol = {}", self.transport_tol)?;
        writeln!(f, "transport_max_iter = {}", self.transport_max_iter)?;
        writeln!(f, "picard_tol = {}", self.picard_tol)?;
        writeln!(f, "picard_max_iter = {}", self.picard_max_iter)?;
        writeln!(f, "require_certificate = {}", self.require_certificate)?;
        writeln!(f, "diffusion_tol = {}", self.diffusion_tol)?;
        writeln!(f, "diffusion_max_iter = {}", self.diffusion_max_iter)?;
        writeln!(f, "recon_tol = {}", self.recon_tol)?;
        writeln!(f, "recon_max_iter = {}", self.recon_max_iter)?;
        writeln!(f, "enforce_admissibility = {}", self.enforce_admissibility)?;
        if let Some(a) = self.alpha_min {
            writeln!(f, "alpha_min = {a}")?;
        }
        if let Some(p) = &self.data_h1 {
            writeln!(f, "data_h1 = {}", p.display())?;
        }
        if let Some(p) = &self.data_h2 {
            writeln!(f, "data_h2 = {}", p.display())?;
        }
        writeln!(f, "noise_std = {}", self.noise_std)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "eta_list = {}", join(&self.eta_list))?;
        match self.perturbation {
            Perturbation::Uniform => writeln!(f, "perturbation = uniform")?,
            Perturbation::Bump { center, width } => {
                writeln!(f, "perturbation = bump {} {} {width}", center[0], center[1])?
            }
        }
        writeln!(f, "uq_p = {}", self.uq_p)?;
        writeln!(f, "eps_list = {}", join(&self.eps_list))?;
        writeln!(f, "output_dir = {}", self.output_dir.display())
    }
}
