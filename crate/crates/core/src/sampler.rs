//! Equilibrium initial conditions: Poisson fields, finite-N log-gases and
//! grand-canonical Gibbs fields.
//!
//! Log-gas targets have density proportional to
//! `prod_{i<j} |x_i - x_j|^beta * prod_i exp(-w(x_i))` with
//!
//! * dyson:   w(x) = beta N x^2 / 4 (semicircle on [-2, 2]),
//! * ginibre: w(z) = beta N |z|^2 / 2 (uniform on the unit disk),
//! * bessel:  w(x) = beta N x / 2 - alpha ln x on (0, inf) (hard edge at 0).

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::configuration::{label, Configuration, Point};
use crate::error::{Error, Result};
use crate::potentials::PairPotential;
use crate::rng::{rng_from_seed, Rng};

/// Sampling region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// Axis-aligned box [lo, hi] in R^d.
    Box { lo: Point, hi: Point },
    /// Ball of the given radius.
    Ball { center: Point, radius: f64 },
}

impl Window {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Window::Box { lo: Point::d1(lo), hi: Point::d1(hi) }
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        let mut lo = Point::zero(dim);
        let mut hi = Point::zero(dim);
        for k in 0..dim {
            lo.set(k, -half);
            hi.set(k, half);
        }
        Window::Box { lo, hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Box { lo, .. } => lo.dim(),
            Window::Ball { center, .. } => center.dim(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lo, hi } => (0..lo.dim()).map(|k| (hi.get(k) - lo.get(k)).max(0.0)).product(),
            Window::Ball { center, radius } => unit_ball_volume(center.dim()) * radius.powi(center.dim() as i32),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Window::Box { lo, hi } => (0..lo.dim()).all(|k| lo.get(k) <= p.get(k) && p.get(k) <= hi.get(k)),
            Window::Ball { center, radius } => p.dist(center) <= *radius,
        }
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Point {
        match self {
            Window::Box { lo, hi } => {
                let mut p = Point::zero(lo.dim());
                for k in 0..lo.dim() {
                    p.set(k, lo.get(k) + (hi.get(k) - lo.get(k)) * rng.random::<f64>());
                }
                p
            }
            Window::Ball { center, radius } => loop {
                let mut p = Point::zero(center.dim());
                for k in 0..center.dim() {
                    p.set(k, 2.0 * rng.random::<f64>() - 1.0);
                }
                if p.norm_sq() <= 1.0 {
                    return *center + p * *radius;
                }
            },
        }
    }
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_particles: usize,
    pub window: Window,
    /// Poisson intensity (Poisson and Gibbs samplers).
    pub intensity: f64,
    pub beta: f64,
    /// Hard-edge exponent for the Bessel gas.
    pub alpha: f64,
    /// Total proposals; `None` means the floor of 1000 per particle.
    pub mcmc_steps: Option<usize>,
    /// Initial proposal scale; `None` picks a typical spacing.
    pub mcmc_proposal_scale: Option<f64>,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(n_particles: usize, seed: u64) -> Self {
        Self {
            n_particles,
            window: Window::interval(0.0, 1.0),
            intensity: 1.0,
            beta: 2.0,
            alpha: 1.0,
            mcmc_steps: None,
            mcmc_proposal_scale: None,
            seed,
        }
    }

    fn steps(&self, n: usize) -> Result<usize> {
        let floor = 1000 * n.max(1);
        match self.mcmc_steps {
            None => Ok(floor),
            Some(s) if s >= floor => Ok(s),
            Some(s) => Err(Error::InvalidParameter(format!("mcmc_steps {s} below burn-in floor {floor}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogGasKind {
    Dyson,
    Ginibre,
    Bessel,
}

impl LogGasKind {
    pub fn dim(&self) -> usize {
        match self {
            LogGasKind::Ginibre => 2,
            _ => 1,
        }
    }
}

/// One entry of the proposal-scale tuning trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningStep {
    pub proposals: usize,
    pub scale: f64,
    pub acceptance: f64,
}

#[derive(Debug, Clone)]
pub struct McmcOutcome {
    pub configuration: Configuration,
    /// Acceptance over the post-tuning half of the chain.
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub tuning_trace: Vec<TuningStep>,
}

const TARGET_ACCEPTANCE: f64 = 0.3;

fn check_mixing(rate: f64) -> Result<()> {
    if (0.1..=0.7).contains(&rate) {
        Ok(())
    } else {
        Err(Error::McmcNotMixed { rate })
    }
}

/// Metropolis acceptance probability for an energy increase `delta`.
#[inline]
pub(crate) fn acceptance_probability(delta: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta).exp()
    }
}

pub fn sample_poisson(cfg: &SamplerConfig) -> Result<Configuration> {
    let mut rng = rng_from_seed(cfg.seed);
    poisson_with(cfg, &mut rng)
}

fn poisson_with(cfg: &SamplerConfig, rng: &mut Rng) -> Result<Configuration> {
    let dim = cfg.window.dim();
    let mean = cfg.intensity * cfg.window.volume();
    if !(mean > 0.0) {
        return Ok(Configuration::empty(dim));
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let points = (0..count).map(|_| cfg.window.sample_uniform(rng)).collect();
    Configuration::new(dim, points)
}

/// Single-site confinement energy w(x) of a log-gas with n particles.
#[inline]
fn site_energy(kind: LogGasKind, beta: f64, alpha: f64, n: usize, x: &Point) -> f64 {
    let n = n as f64;
    match kind {
        LogGasKind::Dyson => beta * n * x.x() * x.x() / 4.0,
        LogGasKind::Ginibre => beta * n * x.norm_sq() / 2.0,
        LogGasKind::Bessel => {
            if x.x() <= 0.0 {
                f64::INFINITY
            } else {
                beta * n * x.x() / 2.0 - alpha * x.x().ln()
            }
        }
    }
}

/// Energy change of moving particle `i` of `points` to `new`.
pub(crate) fn loggas_delta_energy(
    kind: LogGasKind,
    beta: f64,
    alpha: f64,
    points: &[Point],
    i: usize,
    new: &Point,
) -> f64 {
    let n = points.len();
    let old = points[i];
    let dw = site_energy(kind, beta, alpha, n, new) - site_energy(kind, beta, alpha, n, &old);
    if !dw.is_finite() {
        return f64::INFINITY;
    }
    let mut dlog = 0.0;
    for (j, p) in points.iter().enumerate() {
        if j != i {
            let dn = new.dist(p);
            if dn == 0.0 {
                return f64::INFINITY;
            }
            dlog += (dn / old.dist(p)).ln();
        }
    }
    dw - beta * dlog
}

fn loggas_initial(kind: LogGasKind, n: usize, rng: &mut Rng) -> Vec<Point> {
    match kind {
        // semicircle quantiles by bisection of the CDF
        LogGasKind::Dyson => (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if semicircle_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Point::d1(0.5 * (lo + hi))
            })
            .collect(),
        LogGasKind::Ginibre => {
            let disk = Window::Ball { center: Point::zero(2), radius: 1.0 };
            (0..n).map(|_| disk.sample_uniform(rng)).collect()
        }
        LogGasKind::Bessel => (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                Point::d1(4.0 * u * u)
            })
            .collect(),
    }
}

/// CDF of the semicircle law on [-2, 2].
pub fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-2.0, 2.0);
    0.5 + (x * (4.0 - x * x).sqrt() / 2.0 + 2.0 * (x / 2.0).asin()) / (2.0 * PI)
}

pub fn sample_loggas(cfg: &SamplerConfig, kind: LogGasKind) -> Result<Configuration> {
    sample_loggas_detailed(cfg, kind).map(|o| o.configuration)
}

/// Metropolis sampler for the finite-N log-gas. The first half of the chain
/// tunes the proposal scale toward acceptance 0.3; the second half runs at
/// the tuned scale and its acceptance is the reported rate.
pub fn sample_loggas_detailed(cfg: &SamplerConfig, kind: LogGasKind) -> Result<McmcOutcome> {
    let n = cfg.n_particles;
    let dim = kind.dim();
    if n == 0 {
        return Ok(McmcOutcome {
            configuration: Configuration::empty(dim),
            acceptance_rate: TARGET_ACCEPTANCE,
            proposal_scale: 0.0,
            tuning_trace: Vec::new(),
        });
    }
    if !(cfg.beta > 0.0) {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    let steps = cfg.steps(n)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut points = loggas_initial(kind, n, &mut rng);
    let spacing = match kind {
        LogGasKind::Dyson => 4.0 / n as f64,
        LogGasKind::Ginibre => 1.0 / (n as f64).sqrt(),
        LogGasKind::Bessel => 4.0 / n as f64,
    };
    let mut scale = cfg.mcmc_proposal_scale.unwrap_or(spacing).max(1e-12);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let burn = steps / 2;
    let block = (50 * n).max(100);
    let mut trace = Vec::new();
    let (mut block_acc, mut block_tot) = (0usize, 0usize);
    let (mut acc, mut tot) = (0usize, 0usize);
    for step in 0..steps {
        let i = rng.random_range(0..n);
        let mut prop = points[i];
        for k in 0..dim {
            prop.set(k, prop.get(k) + scale * normal.sample(&mut rng));
        }
        let delta = loggas_delta_energy(kind, cfg.beta, cfg.alpha, &points, i, &prop);
        let accepted = rng.random::<f64>() < acceptance_probability(delta);
        if accepted {
            points[i] = prop;
        }
        if step < burn {
            block_tot += 1;
            block_acc += accepted as usize;
            if block_tot == block {
                let rate = block_acc as f64 / block_tot as f64;
                scale *= ((rate - TARGET_ACCEPTANCE) * 2.0).exp();
                trace.push(TuningStep { proposals: step + 1, scale, acceptance: rate });
                block_acc = 0;
                block_tot = 0;
            }
        } else {
            tot += 1;
            acc += accepted as usize;
        }
    }
    let rate = acc as f64 / tot.max(1) as f64;
    check_mixing(rate)?;
    let cfg_out = Configuration::new(dim, points)?;
    let labeled = label(&cfg_out)?;
    Ok(McmcOutcome {
        configuration: Configuration::new(dim, labeled.positions().to_vec())?,
        acceptance_rate: rate,
        proposal_scale: scale,
        tuning_trace: trace,
    })
}

/// Rescales a log-gas sample to unit bulk density at its reference point.
///
/// The scale is re-estimated from the sample itself (second moment for
/// dyson/ginibre, mean for bessel), so unfolding an unfolded sample is the
/// identity up to rounding. Dyson is normalized to density 1 at the centre,
/// Ginibre to the intensity 1/pi of the infinite Ginibre field, Bessel to
/// the hard-edge variable y = 4 N^2 x.
pub fn unfold_bulk(cfg: &Configuration, kind: LogGasKind) -> Result<Configuration> {
    let n = cfg.len();
    if n == 0 {
        return Ok(cfg.clone());
    }
    let nf = n as f64;
    let pts = cfg.points();
    let mapped: Vec<Point> = match kind {
        LogGasKind::Dyson => {
            let c = pts.iter().map(Point::x).sum::<f64>() / nf;
            let m2 = pts.iter().map(|p| (p.x() - c).powi(2)).sum::<f64>() / nf;
            let radius = 2.0 * m2.sqrt();
            let s = if radius > 0.0 { 2.0 * nf / (PI * radius) } else { 1.0 };
            pts.iter().map(|p| Point::d1((p.x() - c) * s)).collect()
        }
        LogGasKind::Ginibre => {
            let mut c = Point::zero(2);
            for p in pts {
                c += *p;
            }
            c = c * (1.0 / nf);
            let m2 = pts.iter().map(|p| (*p - c).norm_sq()).sum::<f64>() / nf;
            let radius = (2.0 * m2).sqrt();
            let s = if radius > 0.0 { nf.sqrt() / radius } else { 1.0 };
            pts.iter().map(|p| (*p - c) * s).collect()
        }
        LogGasKind::Bessel => {
            let mean = pts.iter().map(Point::x).sum::<f64>() / nf;
            let s = if mean > 0.0 { 4.0 * nf * nf / mean } else { 1.0 };
            pts.iter().map(|p| Point::d1(p.x() * s)).collect()
        }
    };
    let mut out = mapped;
    out.sort_by(Point::label_cmp);
    Configuration::new(cfg.dim(), out)
}

/// Maps a log-gas sample onto the invariant law of the finite-N dynamics
/// with a fixed scale: Dyson by N/pi (the law of `dyson_bulk`, density 1 at
/// the centre) and Ginibre by sqrt(N) (the law of the Ginibre drifts).
/// Bessel samples are returned unchanged. Unlike [`unfold_bulk`] the scale
/// does not depend on the sample, so an equilibrium draw stays one.
pub fn scale_to_dynamics(cfg: &Configuration, kind: LogGasKind) -> Result<Configuration> {
    let nf = cfg.len() as f64;
    let s = match kind {
        LogGasKind::Dyson => nf / PI,
        LogGasKind::Ginibre => nf.sqrt(),
        LogGasKind::Bessel => return Ok(cfg.clone()),
    };
    Configuration::new(cfg.dim(), cfg.points().iter().map(|p| *p * s).collect())
}

/// Unfolds a one-dimensional log-gas sample through the semicircle CDF:
/// u = N (F((x - c) 2 / R) - 1/2) with centre c and radius R = 2 sd taken
/// from the sample. The mean density is 1 across the whole bulk, not only
/// at the centre, so the central half of the spectrum can be used for
/// bulk statistics.
pub fn unfold_semicircle(cfg: &Configuration) -> Result<Configuration> {
    if cfg.dim() != 1 {
        return Err(Error::InvalidParameter("semicircle unfolding is one-dimensional".into()));
    }
    let n = cfg.len();
    if n < 2 {
        return Ok(cfg.clone());
    }
    let nf = n as f64;
    let pts = cfg.points();
    let c = pts.iter().map(Point::x).sum::<f64>() / nf;
    let radius = 2.0 * (pts.iter().map(|p| (p.x() - c).powi(2)).sum::<f64>() / nf).sqrt();
    let mut out: Vec<Point> = pts.iter().map(|p| Point::d1(nf * (semicircle_cdf(2.0 * (p.x() - c) / radius) - 0.5))).collect();
    out.sort_by(Point::label_cmp);
    Configuration::new(1, out)
}

/// Grand-canonical Gibbs sampler on the window: birth, death and
/// displacement moves targeting exp(-beta sum_{i<j} Psi0(x_i - x_j)) relative
/// to the Poisson field of intensity `cfg.intensity`.
pub fn sample_gibbs(cfg: &SamplerConfig, potential: &dyn PairPotential) -> Result<Configuration> {
    sample_gibbs_detailed(cfg, potential).map(|o| o.configuration)
}

pub fn sample_gibbs_detailed(cfg: &SamplerConfig, potential: &dyn PairPotential) -> Result<McmcOutcome> {
    let dim = cfg.window.dim();
    let vol = cfg.window.volume();
    if !(vol > 0.0) {
        return Ok(McmcOutcome {
            configuration: Configuration::empty(dim),
            acceptance_rate: TARGET_ACCEPTANCE,
            proposal_scale: 0.0,
            tuning_trace: Vec::new(),
        });
    }
    let lambda_vol = cfg.intensity * vol;
    let expected = lambda_vol.ceil() as usize;
    let steps = cfg.steps(cfg.n_particles.max(expected))?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut points: Vec<Point> = Vec::new();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut scale = cfg
        .mcmc_proposal_scale
        .unwrap_or_else(|| (vol / lambda_vol.max(1.0)).powf(1.0 / dim as f64));
    let energy_with = |pts: &[Point], skip: Option<usize>, x: &Point| -> f64 {
        pts.iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .map(|(_, y)| potential.value(&(*x - *y)))
            .sum::<f64>()
    };
    let burn = steps / 2;
    let block = 300;
    let mut trace = Vec::new();
    let (mut block_acc, mut block_tot) = (0usize, 0usize);
    let (mut acc, mut tot) = (0usize, 0usize);
    for step in 0..steps {
        match rng.random_range(0..3u8) {
            0 => {
                let x = cfg.window.sample_uniform(&mut rng);
                let de = cfg.beta * energy_with(&points, None, &x);
                let ratio = lambda_vol / (points.len() + 1) as f64 * (-de).exp();
                if rng.random::<f64>() < ratio {
                    points.push(x);
                }
            }
            1 => {
                if !points.is_empty() {
                    let i = rng.random_range(0..points.len());
                    let de = -cfg.beta * energy_with(&points, Some(i), &points[i]);
                    let ratio = points.len() as f64 / lambda_vol * (-de).exp();
                    if rng.random::<f64>() < ratio {
                        points.swap_remove(i);
                    }
                }
            }
            _ => {
                if points.is_empty() {
                    continue;
                }
                let i = rng.random_range(0..points.len());
                let mut prop = points[i];
                for k in 0..dim {
                    prop.set(k, prop.get(k) + scale * normal.sample(&mut rng));
                }
                let accepted = cfg.window.contains(&prop) && {
                    let de = cfg.beta
                        * (energy_with(&points, Some(i), &prop) - energy_with(&points, Some(i), &points[i]));
                    rng.random::<f64>() < acceptance_probability(if de.is_nan() { f64::INFINITY } else { de })
                };
                if accepted {
                    points[i] = prop;
                }
                if step < burn {
                    block_tot += 1;
                    block_acc += accepted as usize;
                    if block_tot == block {
                        let rate = block_acc as f64 / block_tot as f64;
                        scale *= ((rate - TARGET_ACCEPTANCE) * 2.0).exp();
                        trace.push(TuningStep { proposals: step + 1, scale, acceptance: rate });
                        block_acc = 0;
                        block_tot = 0;
                    }
                } else {
                    tot += 1;
                    acc += accepted as usize;
                }
            }
        }
    }
    let rate = if tot == 0 { TARGET_ACCEPTANCE } else { acc as f64 / tot as f64 };
    check_mixing(rate)?;
    let out = Configuration::new(dim, points)?;
    let labeled = label(&out)?;
    Ok(McmcOutcome {
        configuration: Configuration::new(dim, labeled.positions().to_vec())?,
        acceptance_rate: rate,
        proposal_scale: scale,
        tuning_trace: trace,
    })
}
