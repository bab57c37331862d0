//! Run configuration: a line-based `key = value` file with dotted keys.
//!
//! ```text
//! # comment
//! model.kind = dyson
//! model.beta = 2
//! sampler.n = 16
//! solver.dt = 1e-3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::configuration::{fmt_f64, LabeledState, Point};
use crate::error::Result;
use crate::integrator::{Scheme, SolverConfig};
use crate::models::{Diffusion, InteractionSpec};
use crate::sampler::{sample_loggas, scale_to_dynamics, LogGasKind, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: key `{}`: {}", self.key, self.message),
            None => write!(f, "config error: key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Free,
    Dyson,
    Bessel,
    GinibreRep1,
    GinibreRep2,
    LennardJones,
    Riesz,
    RuelleBump,
    SkewPoisson,
}

impl ModelName {
    const ALL: [(&'static str, ModelName); 9] = [
        ("free", ModelName::Free),
        ("dyson", ModelName::Dyson),
        ("bessel", ModelName::Bessel),
        ("ginibre_rep1", ModelName::GinibreRep1),
        ("ginibre_rep2", ModelName::GinibreRep2),
        ("lennard_jones", ModelName::LennardJones),
        ("riesz", ModelName::Riesz),
        ("ruelle_bump", ModelName::RuelleBump),
        ("skew_poisson", ModelName::SkewPoisson),
    ];

    pub fn as_str(&self) -> &'static str {
        Self::ALL.iter().find(|(_, m)| m == self).map(|(s, _)| *s).unwrap_or("free")
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|(_, m)| *m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Evenly spaced points (a square grid for d >= 2).
    Lattice,
    /// Equilibrium sample of the matching log-gas.
    LogGas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub kind: ModelName,
    pub beta: f64,
    pub alpha: f64,
    pub riesz_a: f64,
    pub dim: usize,
    pub confinement: Option<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerBlock {
    pub n: usize,
    pub init: InitKind,
    pub spacing: f64,
    pub mcmc_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    pub noise_refinement: usize,
    pub max_substep_depth: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBlock {
    pub ensemble: usize,
    /// Number of tagged particles.
    pub m: usize,
    pub dt_ladder: Vec<f64>,
    pub refine: usize,
    /// Observation radius for collision and NBJ diagnostics.
    pub radius: f64,
    pub bins: usize,
    pub max_separation: f64,
    pub window_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub sampler: SamplerBlock,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelBlock { kind: ModelName::Free, beta: 2.0, alpha: 1.0, riesz_a: 0.5, dim: 1, confinement: None, sigma: 1.0 },
            sampler: SamplerBlock { n: 1, init: InitKind::Lattice, spacing: 1.0, mcmc_steps: None },
            solver: SolverBlock { scheme: Scheme::Euler, dt: 1e-3, horizon: 0.1, noise_refinement: 16, max_substep_depth: 4 },
            experiment: ExperimentBlock {
                ensemble: 1,
                m: 1,
                dt_ladder: vec![4e-3, 2e-3, 1e-3],
                refine: 8,
                radius: 5.0,
                bins: 15,
                max_separation: 3.0,
                window_fraction: 0.5,
            },
            output_dir: None,
            seed: 0,
        }
    }
}

const KEYS: [&str; 24] = [
    "model.kind",
    "model.beta",
    "model.alpha",
    "model.riesz_a",
    "model.dim",
    "model.confinement",
    "model.sigma",
    "sampler.n",
    "sampler.init",
    "sampler.spacing",
    "sampler.mcmc_steps",
    "solver.scheme",
    "solver.dt",
    "solver.horizon",
    "solver.noise_refinement",
    "solver.max_substep_depth",
    "experiment.ensemble",
    "experiment.m",
    "experiment.dt_ladder",
    "experiment.refine",
    "experiment.radius",
    "experiment.bins",
    "experiment.max_separation",
    "experiment.window_fraction",
];

const EXTRA_KEYS: [&str; 2] = ["output.dir", "seed"];

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> std::result::Result<T, ConfigError> {
    v.parse().map_err(|_| err(Some(line), key, format!("cannot parse `{v}`")))
}

fn positive(line: usize, key: &str, v: &str) -> std::result::Result<f64, ConfigError> {
    let x: f64 = num(line, key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(err(Some(line), key, format!("must be positive and finite, got {v}")));
    }
    Ok(x)
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(err(Some(line), body, "expected `key = value`"));
            };
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), line).is_some() {
                return Err(err(Some(line), k, "duplicate key"));
            }
            cfg.set(line, k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, k: &str, v: &str) -> std::result::Result<(), ConfigError> {
        match k {
            "model.kind" => {
                self.model.kind = ModelName::parse(v).ok_or_else(|| {
                    let names: Vec<&str> = ModelName::ALL.iter().map(|(n, _)| *n).collect();
                    err(Some(line), k, format!("unknown model `{v}`; expected one of {}", names.join(", ")))
                })?
            }
            "model.beta" => self.model.beta = positive(line, k, v)?,
            "model.alpha" => self.model.alpha = num(line, k, v)?,
            "model.riesz_a" => self.model.riesz_a = positive(line, k, v)?,
            "model.dim" => self.model.dim = num(line, k, v)?,
            "model.confinement" => self.model.confinement = Some(num(line, k, v)?),
            "model.sigma" => self.model.sigma = num(line, k, v)?,
            "sampler.n" => self.sampler.n = num(line, k, v)?,
            "sampler.init" => {
                self.sampler.init = match v {
                    "lattice" => InitKind::Lattice,
                    "loggas" => InitKind::LogGas,
                    _ => return Err(err(Some(line), k, format!("unknown initial condition `{v}`; expected lattice or loggas"))),
                }
            }
            "sampler.spacing" => self.sampler.spacing = positive(line, k, v)?,
            "sampler.mcmc_steps" => self.sampler.mcmc_steps = Some(num(line, k, v)?),
            "solver.scheme" => self.solver.scheme = v.parse().map_err(|_| err(Some(line), k, format!("unknown scheme `{v}`")))?,
            "solver.dt" => self.solver.dt = positive(line, k, v)?,
            "solver.horizon" => self.solver.horizon = positive(line, k, v)?,
            "solver.noise_refinement" => self.solver.noise_refinement = num(line, k, v)?,
            "solver.max_substep_depth" => self.solver.max_substep_depth = num(line, k, v)?,
            "experiment.ensemble" => self.experiment.ensemble = num(line, k, v)?,
            "experiment.m" => self.experiment.m = num(line, k, v)?,
            "experiment.dt_ladder" => {
                self.experiment.dt_ladder = v.split(',').map(|s| positive(line, k, s.trim())).collect::<std::result::Result<_, _>>()?
            }
            "experiment.refine" => self.experiment.refine = num(line, k, v)?,
            "experiment.radius" => self.experiment.radius = positive(line, k, v)?,
            "experiment.bins" => self.experiment.bins = num(line, k, v)?,
            "experiment.max_separation" => self.experiment.max_separation = positive(line, k, v)?,
            "experiment.window_fraction" => self.experiment.window_fraction = positive(line, k, v)?,
            "output.dir" => self.output_dir = Some(PathBuf::from(v)),
            "seed" => self.seed = num(line, k, v)?,
            _ => return Err(err(Some(line), k, "unknown key")),
        }
        Ok(())
    }

    fn validate(&self) -> std::result::Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(err(None, key, msg)) };
        check(self.model.dim >= 1, "model.dim", "must be at least 1")?;
        check(self.sampler.n >= 1, "sampler.n", "must be at least 1")?;
        check(self.experiment.ensemble >= 1, "experiment.ensemble", "must be at least 1")?;
        check(self.experiment.m >= 1 && self.experiment.m <= self.sampler.n, "experiment.m", "must lie in 1..=sampler.n")?;
        check(self.experiment.refine >= 1, "experiment.refine", "must be at least 1")?;
        check(self.experiment.bins >= 1, "experiment.bins", "must be at least 1")?;
        check(!self.experiment.dt_ladder.is_empty(), "experiment.dt_ladder", "must not be empty")?;
        check(self.solver.noise_refinement.is_power_of_two(), "solver.noise_refinement", "must be a power of two")?;
        check(self.model.sigma >= 0.0, "model.sigma", "must be non-negative")?;
        let steps = self.solver.horizon / self.solver.dt;
        check((steps - steps.round()).abs() <= 1e-9 * steps.max(1.0), "solver.dt", "must divide solver.horizon")?;
        let one_d = matches!(self.model.kind, ModelName::Dyson | ModelName::Bessel | ModelName::LennardJones | ModelName::SkewPoisson);
        let two_d = matches!(self.model.kind, ModelName::GinibreRep1 | ModelName::GinibreRep2);
        check(!one_d || self.model.dim == 1, "model.dim", "this model is one-dimensional")?;
        check(!two_d || self.model.dim == 2, "model.dim", "Ginibre models are two-dimensional")?;
        if self.sampler.init == InitKind::LogGas {
            check(self.loggas_kind().is_some(), "sampler.init", "loggas needs model.kind dyson, bessel or ginibre_*")?;
        }
        Ok(())
    }

    pub fn loggas_kind(&self) -> Option<LogGasKind> {
        match self.model.kind {
            ModelName::Dyson => Some(LogGasKind::Dyson),
            ModelName::Bessel => Some(LogGasKind::Bessel),
            ModelName::GinibreRep1 | ModelName::GinibreRep2 => Some(LogGasKind::Ginibre),
            _ => None,
        }
    }

    /// The interaction model. Dyson defaults to the bulk scaling with
    /// harmonic confinement beta pi^2 / (4 N).
    pub fn spec(&self) -> Result<InteractionSpec> {
        let m = &self.model;
        let spec = match m.kind {
            ModelName::Free => InteractionSpec::free(m.dim)?,
            ModelName::Dyson => match m.confinement {
                None => InteractionSpec::dyson_bulk(m.beta, self.sampler.n)?,
                Some(_) => InteractionSpec::sine_beta(m.beta)?,
            },
            ModelName::Bessel => InteractionSpec::bessel(m.alpha)?,
            ModelName::GinibreRep1 => InteractionSpec::ginibre_rep1()?,
            ModelName::GinibreRep2 => InteractionSpec::ginibre_rep2()?,
            ModelName::LennardJones => InteractionSpec::lennard_jones(m.beta)?,
            ModelName::Riesz => InteractionSpec::riesz(m.beta, m.riesz_a, m.dim)?,
            ModelName::RuelleBump => InteractionSpec::ruelle_bump(m.beta, m.dim)?,
            ModelName::SkewPoisson => InteractionSpec::skew_poisson_default(m.beta)?,
        };
        let spec = match m.confinement {
            Some(c) => spec.with_confinement(c)?,
            None => spec,
        };
        Ok(if m.sigma == 1.0 { spec } else { spec.with_diffusion(Diffusion::Scalar(m.sigma)) })
    }

    pub fn solver(&self, seed: u64) -> SolverConfig {
        let mut s = SolverConfig::new(self.solver.dt, self.solver.horizon, seed).with_scheme(self.solver.scheme);
        s.noise_refinement = self.solver.noise_refinement;
        s.max_substep_depth = self.solver.max_substep_depth;
        s
    }

    /// Initial labeled state of ensemble member drawn with `seed`.
    pub fn initial_state(&self, seed: u64) -> Result<LabeledState> {
        let n = self.sampler.n;
        let h = self.sampler.spacing;
        let d = self.model.dim;
        match self.sampler.init {
            InitKind::LogGas => {
                let kind = self.loggas_kind().expect("validated");
                let mut sc = SamplerConfig::new(n, seed);
                sc.beta = self.model.beta;
                sc.alpha = self.model.alpha;
                sc.mcmc_steps = self.sampler.mcmc_steps;
                let cfg = sample_loggas(&sc, kind)?;
                // an explicit confinement means the sampler's own units
                let cfg = match (kind, self.model.confinement) {
                    (LogGasKind::Dyson, Some(_)) => cfg,
                    _ => scale_to_dynamics(&cfg, kind)?,
                };
                crate::configuration::label(&cfg)
            }
            InitKind::Lattice if self.model.kind == ModelName::Bessel => {
                LabeledState::new(1, (0..n).map(|i| Point::d1((i + 1) as f64 * h)).collect())
            }
            InitKind::Lattice => {
                let side = (n as f64).powf(1.0 / d as f64).ceil() as usize;
                let pts = (0..n)
                    .map(|i| {
                        let mut c = vec![0.0; d];
                        let mut rest = i;
                        for v in c.iter_mut() {
                            *v = ((rest % side) as f64 - (side - 1) as f64 / 2.0) * h;
                            rest /= side;
                        }
                        Point::new(&c)
                    })
                    .collect::<Result<Vec<_>>>()?;
                LabeledState::new(d, pts)
            }
        }
    }

    /// Resolved configuration as sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        put("model.kind", self.model.kind.as_str().into());
        put("model.beta", fmt_f64(self.model.beta));
        put("model.alpha", fmt_f64(self.model.alpha));
        put("model.riesz_a", fmt_f64(self.model.riesz_a));
        put("model.dim", self.model.dim.to_string());
        if let Some(c) = self.model.confinement {
            put("model.confinement", fmt_f64(c));
        }
        put("model.sigma", fmt_f64(self.model.sigma));
        put("sampler.n", self.sampler.n.to_string());
        put("sampler.init", if self.sampler.init == InitKind::Lattice { "lattice" } else { "loggas" }.into());
        put("sampler.spacing", fmt_f64(self.sampler.spacing));
        if let Some(s) = self.sampler.mcmc_steps {
            put("sampler.mcmc_steps", s.to_string());
        }
        put("solver.scheme", self.solver.scheme.name().into());
        put("solver.dt", fmt_f64(self.solver.dt));
        put("solver.horizon", fmt_f64(self.solver.horizon));
        put("solver.noise_refinement", self.solver.noise_refinement.to_string());
        put("solver.max_substep_depth", self.solver.max_substep_depth.to_string());
        put("experiment.ensemble", self.experiment.ensemble.to_string());
        put("experiment.m", self.experiment.m.to_string());
        put("experiment.dt_ladder", self.experiment.dt_ladder.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", "));
        put("experiment.refine", self.experiment.refine.to_string());
        put("experiment.radius", fmt_f64(self.experiment.radius));
        put("experiment.bins", self.experiment.bins.to_string());
        put("experiment.max_separation", fmt_f64(self.experiment.max_separation));
        put("experiment.window_fraction", fmt_f64(self.experiment.window_fraction));
        put("seed", self.seed.to_string());
        e
    }
}

/// Every key the parser accepts.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().chain(EXTRA_KEYS.iter()).copied()
}
