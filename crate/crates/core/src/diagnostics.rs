//! Collision, tame-set and cut-off diagnostics.
//!
//! * The Lyapunov pair: Upsilon(t) = 1 - ln t (t <= 1), e^{1-t} (t > 1) and
//!   upsilon = -1 / Upsilon'.
//! * The ramp theta: a clamped linear ramp mollified by a smooth bump, so
//!   it is 0 near 0, 1 near 1 and has slope at most 1 / 0.82.
//! * The cut-off chi_{q,Q} = theta(d_{q,Q}) with
//!   d^2 = sum_{r <= Q} sum_{i > a_q(r), |l^i| < r} (r - |l^i|)^2.

use crate::configuration::{label, min_pairwise_gap, unlabel, Configuration, Point};
use crate::error::{Error, Result};
use crate::ifc::ExitTime;
use crate::integrator::Trajectory;
use crate::tame::TameSchedule;

pub fn upsilon(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    Ok(if t <= 1.0 { 1.0 - t.ln() } else { (1.0 - t).exp() })
}

pub fn upsilon_prime(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    Ok(if t <= 1.0 { -1.0 / t } else { -(1.0 - t).exp() })
}

pub fn upsilon_second(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveArgument(t));
    }
    Ok(if t <= 1.0 { 1.0 / (t * t) } else { (1.0 - t).exp() })
}

/// upsilon(t) = -1 / Upsilon'(t), extended by upsilon(0) = 0.
pub fn upsilon_small(t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NonPositiveArgument(t));
    }
    Ok(if t <= 1.0 { t } else { (t - 1.0).exp() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    /// Smallest gap among particles inside the open ball S_R, per grid time;
    /// `None` when fewer than two particles are inside.
    pub min_gaps: Vec<Option<f64>>,
    pub upsilon_start: Option<f64>,
    pub upsilon_end: Option<f64>,
    /// Grid times with a gap below the abort threshold.
    pub flags: usize,
}

pub fn collision_monitor(traj: &Trajectory, radius: f64, abort_gap: f64) -> CollisionReport {
    let min_gaps: Vec<Option<f64>> = traj
        .states
        .iter()
        .map(|s| {
            let inside: Vec<Point> = s.positions().iter().filter(|p| p.norm() < radius).copied().collect();
            min_pairwise_gap(&inside)
        })
        .collect();
    let flags = min_gaps.iter().flatten().filter(|g| **g < abort_gap).count();
    let ups = |g: Option<&Option<f64>>| g.copied().flatten().and_then(|g| upsilon(g).ok());
    CollisionReport { upsilon_start: ups(min_gaps.first()), upsilon_end: ups(min_gaps.last()), min_gaps, flags }
}

/// Smallest m such that every particle with label > m stays outside the
/// closed ball of radius r on [0, T]. Labels follow the initial moduli.
pub fn nbj_counter(traj: &Trajectory, r: f64, horizon: f64) -> usize {
    let Some(first) = traj.states.first() else {
        return 0;
    };
    let mut order: Vec<usize> = (0..first.len()).collect();
    let init = first.positions();
    order.sort_by(|&a, &b| init[a].label_cmp(&init[b]));
    let mut entered = vec![false; first.len()];
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t > horizon + 1e-12 * horizon.max(1.0) {
            break;
        }
        for (i, p) in s.positions().iter().enumerate() {
            if p.norm() <= r {
                entered[i] = true;
            }
        }
    }
    order.iter().rposition(|&i| entered[i]).map_or(0, |k| k + 1)
}

/// Parameters of the ramp theta and the cut-off functions built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffParams {
    pub epsilon: f64,
    pub mollifier_width: f64,
    pub schedule: TameSchedule,
    /// Largest radius Q in d_{q,Q}; `None` means every radius.
    pub q_cap: Option<u32>,
    bump_mass: f64,
}

const SIMPSON_PANELS: usize = 400;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = SIMPSON_PANELS;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

impl CutoffParams {
    pub fn new(schedule: TameSchedule, q_cap: Option<u32>) -> Result<Self> {
        Self::with_shape(0.05, 0.04, schedule, q_cap)
    }

    /// Builds theta and checks its bounds on a 10^5-point grid.
    pub fn with_shape(epsilon: f64, mollifier_width: f64, schedule: TameSchedule, q_cap: Option<u32>) -> Result<Self> {
        if !(mollifier_width > 0.0 && epsilon > 0.0 && 2.0 * (epsilon + mollifier_width) < 1.0) {
            return Err(Error::InvalidParameter("need 0 < epsilon, width and 2 (epsilon + width) < 1".into()));
        }
        let w = mollifier_width;
        let raw = |u: f64| bump_shape(u / w);
        let p = Self { epsilon, mollifier_width, schedule, q_cap, bump_mass: simpson(raw, -w, w) };
        let n = 100_000;
        let mut prev = 0.0;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let (v, dv) = (p.theta(t), p.theta_prime(t));
            if !(0.0..=1.0).contains(&v) || dv.abs() > 2f64.sqrt() || v + 1e-12 < prev {
                return Err(Error::InvalidParameter(format!("ramp fails its bounds at t={t}")));
            }
            prev = v;
        }
        Ok(p)
    }

    fn ramp_lo(&self) -> f64 {
        self.epsilon + self.mollifier_width
    }

    fn ramp_hi(&self) -> f64 {
        1.0 - self.epsilon - self.mollifier_width
    }

    fn slope(&self) -> f64 {
        1.0 / (self.ramp_hi() - self.ramp_lo())
    }

    fn density(&self, u: f64) -> f64 {
        bump_shape(u / self.mollifier_width) / self.bump_mass
    }

    /// Mass of the normalized bump on (-w, v).
    fn bump_cdf(&self, v: f64) -> f64 {
        let w = self.mollifier_width;
        if v <= -w {
            0.0
        } else if v >= w {
            1.0
        } else if v <= 0.0 {
            simpson(|u| self.density(u), -w, v)
        } else {
            1.0 - simpson(|u| self.density(u), v, w)
        }
    }

    /// First moment of the normalized bump on (-w, v).
    fn bump_moment(&self, v: f64) -> f64 {
        let w = self.mollifier_width;
        simpson(|u| u * self.density(u), -w, v.min(w))
    }

    pub fn theta(&self, t: f64) -> f64 {
        let w = self.mollifier_width;
        let (lo, hi) = (self.ramp_lo(), self.ramp_hi());
        if t <= lo - w {
            0.0
        } else if t >= hi + w {
            1.0
        } else if t >= lo + w && t <= hi - w {
            (t - lo) * self.slope()
        } else if t < 0.5 {
            // only the lower clamp is active: E[(t - lo - U)^+] over the bump
            let s = t - lo;
            self.slope() * (s * self.bump_cdf(s) - self.bump_moment(s))
        } else {
            1.0 - self.theta(1.0 - t)
        }
    }

    pub fn theta_prime(&self, t: f64) -> f64 {
        self.slope() * (self.bump_cdf(t - self.ramp_lo()) - self.bump_cdf(t - self.ramp_hi()))
    }

    fn radii(&self, labeled: &[Point]) -> u32 {
        match self.q_cap {
            Some(q) => q,
            None => labeled.last().map_or(0.0, |p| p.norm()).ceil() as u32 + 1,
        }
    }
}

fn bump_shape(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - v * v)).exp()
    }
}

/// Labels of a simple configuration as an index permutation of its points.
fn label_order(cfg: &Configuration) -> Result<Vec<usize>> {
    label(cfg)?;
    let pts = cfg.points();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a].label_cmp(&pts[b]));
    Ok(order)
}

/// d_{q,Q} and its gradient with respect to each point (in input order).
fn distance_and_gradient(cfg: &Configuration, q: u32, params: &CutoffParams) -> Result<(f64, Vec<Point>)> {
    let order = label_order(cfg)?;
    let pts = cfg.points();
    let labeled: Vec<Point> = order.iter().map(|&i| pts[i]).collect();
    let mut d2 = 0.0;
    let mut grad_d2 = vec![Point::zero(cfg.dim()); pts.len()];
    for r in 1..=params.radii(&labeled) {
        let rf = r as f64;
        let start = params.schedule.a(q, r).min(labeled.len() as u64) as usize;
        for (k, p) in labeled.iter().enumerate().skip(start) {
            let m = p.norm();
            if m < rf {
                d2 += (rf - m) * (rf - m);
                if m > 0.0 {
                    let g = &mut grad_d2[order[k]];
                    *g = *g + *p * (-2.0 * (rf - m) / m);
                }
            }
        }
    }
    let d = d2.sqrt();
    let grad = if d > 0.0 { grad_d2.iter().map(|g| *g * (0.5 / d)).collect() } else { grad_d2 };
    Ok((d, grad))
}

pub fn cutoff_distance(cfg: &Configuration, q: u32, params: &CutoffParams) -> Result<f64> {
    distance_and_gradient(cfg, q, params).map(|(d, _)| d)
}

pub fn cutoff_chi(cfg: &Configuration, q: u32, params: &CutoffParams) -> Result<f64> {
    Ok(params.theta(cutoff_distance(cfg, q, params)?))
}

/// Gradient of chi_{q,Q} with respect to each point, in input order.
pub fn cutoff_chi_gradient(cfg: &Configuration, q: u32, params: &CutoffParams) -> Result<Vec<Point>> {
    let (d, g) = distance_and_gradient(cfg, q, params)?;
    let tp = params.theta_prime(d);
    Ok(g.into_iter().map(|v| v * tp).collect())
}

/// sum_{q <= n_levels} chi_{q,Q}.
pub fn chi_coordinate(cfg: &Configuration, n_levels: u32, params: &CutoffParams) -> Result<f64> {
    (1..=n_levels).map(|q| cutoff_chi(cfg, q, params)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiMode {
    Level(u32),
    Coordinate(u32),
}

/// (1/2) sum_i |grad_i chi|^2 for identity diffusion.
pub fn carre_du_champ_chi(cfg: &Configuration, mode: ChiMode, params: &CutoffParams) -> Result<f64> {
    let levels = match mode {
        ChiMode::Level(q) => q..=q,
        ChiMode::Coordinate(n) => 1..=n,
    };
    let mut total = vec![Point::zero(cfg.dim()); cfg.len()];
    for q in levels {
        for (t, g) in total.iter_mut().zip(cutoff_chi_gradient(cfg, q, params)?) {
            *t = *t + g;
        }
    }
    Ok(0.5 * total.iter().map(Point::norm_sq).sum::<f64>())
}

/// First grid time at which the configuration leaves K[a_q].
pub fn kappa_exit(traj: &Trajectory, q: u32, schedule: &TameSchedule) -> ExitTime {
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if !schedule.contains(&unlabel(s), q) {
            return ExitTime::At(*t);
        }
    }
    ExitTime::Censored
}
