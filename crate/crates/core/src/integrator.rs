//! Euler-Maruyama and tamed Euler integration with recorded Brownian
//! increments.
//!
//! Noise is drawn once on a finest grid and every solve aggregates it, so
//! runs at different step sizes, or with different environments, can share
//! one Brownian path.

use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::configuration::{min_pairwise_gap, Configuration, LabeledState, Point};
use crate::error::{Error, Result};
use crate::models::{InteractionSpec, ModelKind};
use crate::rng::rng_from_seed;
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    TamedEuler,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::TamedEuler => "tamed_euler",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "tamed_euler" => Ok(Scheme::TamedEuler),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    /// Gap below which a step is halved; `None` means 10 sqrt(dt). The
    /// threshold shrinks like sqrt(h) with the local step h.
    pub min_gap_substep_threshold: Option<f64>,
    pub max_substep_depth: u32,
    pub collision_abort_gap: f64,
    /// Finest noise steps per solver step (a power of two).
    pub noise_refinement: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            scheme: Scheme::Euler,
            dt,
            horizon,
            min_gap_substep_threshold: None,
            max_substep_depth: 4,
            collision_abort_gap: 1e-8,
            noise_refinement: 16,
            seed,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Number of steps; fails unless dt divides the horizon.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter("dt and horizon must be positive".into()));
        }
        let k = (self.horizon / self.dt).round();
        if ((k * self.dt) - self.horizon).abs() > 1e3 * f64::EPSILON * self.horizon.max(1.0) {
            return Err(Error::InvalidParameter(format!("dt={} does not divide T={}", self.dt, self.horizon)));
        }
        Ok(k as usize)
    }

    pub fn substep_threshold(&self) -> f64 {
        self.min_gap_substep_threshold.unwrap_or(10.0 * self.dt.sqrt())
    }

    fn validate(&self) -> Result<()> {
        if !(self.collision_abort_gap > 0.0) || !(self.substep_threshold() > 0.0) {
            return Err(Error::InvalidParameter("solver thresholds must be positive".into()));
        }
        if !self.noise_refinement.is_power_of_two() {
            return Err(Error::InvalidParameter("noise refinement must be a power of two".into()));
        }
        Ok(())
    }
}

/// Gaussian increments of an n-particle, d-dimensional Brownian motion on a
/// uniform grid of `steps` cells of width `finest_dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dim: usize,
    n_particles: usize,
    finest_dt: f64,
    steps: usize,
    /// index ((step * n) + particle) * dim + k
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(n_particles: usize, dim: usize, finest_dt: f64, steps: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let sd = finest_dt.sqrt();
        let increments = (0..steps * n_particles * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Self { dim, n_particles, finest_dt, steps, increments }
    }

    pub fn from_increments(n_particles: usize, dim: usize, finest_dt: f64, increments: Vec<f64>) -> Result<Self> {
        let cell = n_particles * dim;
        if cell == 0 || increments.len() % cell != 0 {
            return Err(Error::InvalidParameter("increment count does not match n * dim".into()));
        }
        Ok(Self { dim, n_particles, finest_dt, steps: increments.len() / cell, increments })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn finest_dt(&self) -> f64 {
        self.finest_dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn raw(&self) -> &[f64] {
        &self.increments
    }

    pub fn increment(&self, step: usize, particle: usize) -> Point {
        let o = (step * self.n_particles + particle) * self.dim;
        Point::new(&self.increments[o..o + self.dim]).expect("finite increment")
    }

    /// Sum of the increments of `particle` over steps [start, start + len).
    /// Power-of-two blocks are summed pairwise, matching [`Self::coarsen`],
    /// so aggregating first or summing later gives identical bits.
    pub fn sum(&self, particle: usize, start: usize, len: usize) -> Point {
        if len.is_power_of_two() {
            return self.tree_sum(particle, start, len);
        }
        let mut acc = Point::zero(self.dim);
        for s in start..start + len {
            acc = acc + self.cell(s, particle);
        }
        acc
    }

    fn cell(&self, step: usize, particle: usize) -> Point {
        let o = (step * self.n_particles + particle) * self.dim;
        let mut p = Point::zero(self.dim);
        for k in 0..self.dim {
            p.set(k, self.increments[o + k]);
        }
        p
    }

    fn tree_sum(&self, particle: usize, start: usize, len: usize) -> Point {
        if len == 1 {
            return self.cell(start, particle);
        }
        let half = len / 2;
        self.tree_sum(particle, start, half) + self.tree_sum(particle, start + half, half)
    }

    fn halve(&self) -> BrownianPath {
        let cell = self.n_particles * self.dim;
        let steps = self.steps / 2;
        let mut out = vec![0.0; steps * cell];
        for s in 0..steps {
            for c in 0..cell {
                out[s * cell + c] = self.increments[2 * s * cell + c] + self.increments[(2 * s + 1) * cell + c];
            }
        }
        Self { dim: self.dim, n_particles: self.n_particles, finest_dt: self.finest_dt * 2.0, steps, increments: out }
    }

    /// Aggregates consecutive blocks of `factor` steps by exact summation
    /// (pairwise for powers of two, so coarsening composes exactly).
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::IndivisibleFactor { factor, steps: self.steps });
        }
        if factor.is_power_of_two() {
            let mut out = self.clone();
            for _ in 0..factor.trailing_zeros() {
                out = out.halve();
            }
            return Ok(out);
        }
        let steps = self.steps / factor;
        let mut out = Vec::with_capacity(steps * self.n_particles * self.dim);
        for s in 0..steps {
            for i in 0..self.n_particles {
                out.extend_from_slice(self.sum(i, s * factor, factor).coords());
            }
        }
        Ok(Self { dim: self.dim, n_particles: self.n_particles, finest_dt: self.finest_dt * factor as f64, steps, increments: out })
    }

    /// The increments of the first m particles.
    pub fn restrict(&self, m: usize) -> Result<BrownianPath> {
        if m > self.n_particles {
            return Err(Error::IndexOutOfRange { index: m, len: self.n_particles });
        }
        let mut out = Vec::with_capacity(self.steps * m * self.dim);
        for s in 0..self.steps {
            let o = s * self.n_particles * self.dim;
            out.extend_from_slice(&self.increments[o..o + m * self.dim]);
        }
        Ok(Self { dim: self.dim, n_particles: m, finest_dt: self.finest_dt, steps: self.steps, increments: out })
    }

    /// Finest steps per cell of width `dt`, which must be a power of two.
    pub fn cells_per(&self, dt: f64) -> Result<usize> {
        let r = dt / self.finest_dt;
        let k = r.round();
        if k < 1.0 || (r - k).abs() > 1e-9 * k || !(k as usize).is_power_of_two() {
            return Err(Error::GridMismatch(format!("dt={dt} is not a power-of-two multiple of {}", self.finest_dt)));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// The step was split; `depth` is the deepest level reached.
    Substep { depth: u32 },
    /// Sub-steps were exhausted and `count` drift-implicit steps kept the
    /// particle order (one-dimensional sine-beta gas only).
    ImplicitStep { count: u32 },
    /// Nearest matching between consecutive states disagrees with the
    /// particle index, or the match distance exceeds 3 sqrt(d dt).
    LabelSwap { particle: usize, distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub step: usize,
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<LabeledState>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(1, LabeledState::dim)
    }

    pub fn n_particles(&self) -> usize {
        self.states.first().map_or(0, LabeledState::len)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> &LabeledState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn substep_events(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Substep { .. })).count()
    }

    pub fn implicit_steps(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::ImplicitStep { .. })).count()
    }

    pub fn label_swaps(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::LabelSwap { .. })).count()
    }

    /// Every `factor`-th state.
    pub fn subsample(&self, factor: usize) -> Result<Trajectory> {
        let steps = self.times.len() - 1;
        if factor == 0 || steps % factor != 0 {
            return Err(Error::IndivisibleFactor { factor, steps });
        }
        let times = (0..=steps / factor).map(|k| k as f64 * self.dt * factor as f64).collect();
        let states = self.states.iter().step_by(factor).cloned().collect();
        Ok(Trajectory { dt: self.dt * factor as f64, times, states, events: Vec::new() })
    }
}

/// Environment points for the m-particle solve, held piecewise constant on
/// their own grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EnvView<'a> {
    pub states: &'a [Configuration],
    /// Finest noise steps per environment grid cell.
    pub finest_per_cell: usize,
}

impl<'a> EnvView<'a> {
    pub fn empty() -> Self {
        Self { states: &[], finest_per_cell: 1 }
    }

    fn at(&self, finest: usize) -> &'a [Point] {
        if self.states.is_empty() {
            return &[];
        }
        let k = (finest / self.finest_per_cell).min(self.states.len() - 1);
        self.states[k].points()
    }
}

/// Models whose pair kernel blows up at zero separation.
fn is_singular(spec: &InteractionSpec) -> bool {
    !matches!(spec.kind(), ModelKind::Free | ModelKind::RuelleCompact { .. } | ModelKind::SkewPoisson { .. })
}

/// What happened inside one solver step.
#[derive(Default)]
struct StepLog {
    deepest: u32,
    implicit: u32,
}

struct Engine<'a> {
    spec: &'a InteractionSpec,
    solver: &'a SolverConfig,
    noise: &'a BrownianPath,
    env: EnvView<'a>,
    max_depth: u32,
    singular: bool,
    ordered: bool,
    /// Order-preserving implicit fallback available (1-D sine-beta).
    implicit: bool,
}

enum Invalid {
    Order,
    Domain(usize),
    Gap(f64),
}

impl<'a> Engine<'a> {
    fn min_gap(&self, x: &[Point], env: &[Point]) -> Option<f64> {
        if env.is_empty() {
            return min_pairwise_gap(x);
        }
        let mut best = f64::INFINITY;
        for (i, p) in x.iter().enumerate() {
            for q in &x[i + 1..] {
                best = best.min(p.dist(q));
            }
            for q in env {
                best = best.min(p.dist(q));
            }
        }
        best.is_finite().then_some(best)
    }

    /// For each tagged particle: its rank among the tagged, and the number
    /// of environment points to its left.
    fn order_signature(x: &[Point], env: &[Point]) -> Vec<(usize, usize)> {
        if env.is_empty() {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[a].x().total_cmp(&x[b].x()));
            let mut rank = vec![(0, 0); x.len()];
            for (r, &i) in idx.iter().enumerate() {
                rank[i] = (r, 0);
            }
            return rank;
        }
        x.iter()
            .map(|p| {
                (
                    x.iter().filter(|q| q.x() < p.x()).count(),
                    env.iter().filter(|q| q.x() < p.x()).count(),
                )
            })
            .collect()
    }

    fn drifts(&self, x: &[Point], env: &[Point], h: f64) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(x.len());
        for (i, p) in x.iter().enumerate() {
            let others = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q).chain(env.iter());
            let b = self.spec.full_drift(*p, others)?;
            out.push(match self.solver.scheme {
                Scheme::Euler => b,
                Scheme::TamedEuler => b * (1.0 / (1.0 + h * b.norm())),
            });
        }
        Ok(out)
    }

    fn check(&self, before: &[Point], after: &[Point], env: &[Point]) -> Option<Invalid> {
        if self.spec.half_line() {
            if let Some(i) = after.iter().position(|p| !(p.x() > 0.0)) {
                return Some(Invalid::Domain(i));
            }
        }
        if !self.singular {
            return None;
        }
        if self.ordered && Self::order_signature(before, env) != Self::order_signature(after, env) {
            return Some(Invalid::Order);
        }
        match self.min_gap(after, env) {
            Some(g) if g < self.solver.collision_abort_gap => Some(Invalid::Gap(g)),
            _ => None,
        }
    }

    /// Advances `x` over finest steps [start, start + len) with local step h.
    fn advance(&self, x: &mut Vec<Point>, start: usize, len: usize, depth: u32, log: &mut StepLog) -> Result<()> {
        let h = self.solver.dt * 0.5f64.powi(depth as i32);
        let t = start as f64 * self.noise.finest_dt();
        let env = self.env.at(start);
        let can_split = depth < self.max_depth && len % 2 == 0;
        if self.singular {
            if let Some(g) = self.min_gap(x, env) {
                if g < self.solver.collision_abort_gap {
                    return Err(Error::CollisionAbort { time: t, gap: g });
                }
                let threshold = self.solver.substep_threshold() * 0.5f64.powi(depth as i32).sqrt();
                if g < threshold && can_split {
                    return self.split(x, start, len, depth, log);
                }
            }
        }
        let b = self.drifts(x, env, h)?;
        let sigma = self.spec.diffusion().scale();
        let proposal: Vec<Point> = x
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(i, (p, bi))| *p + *bi * h + self.noise.sum(i, start, len) * sigma)
            .collect();
        match self.check(x, &proposal, env) {
            None => {
                *x = proposal;
                log.deepest = log.deepest.max(depth);
                Ok(())
            }
            Some(_) if can_split => self.split(x, start, len, depth, log),
            Some(Invalid::Order | Invalid::Gap(_)) if self.implicit => {
                let z: Vec<f64> =
                    x.iter().enumerate().map(|(i, p)| p.x() + self.noise.sum(i, start, len).x() * sigma).collect();
                let y = self.implicit_step(x, env, &z, h).ok_or(Error::CollisionAbort { time: t, gap: 0.0 })?;
                if let Some(Invalid::Gap(gap)) = self.check(x, &y, env) {
                    return Err(Error::CollisionAbort { time: t, gap });
                }
                *x = y;
                log.deepest = log.deepest.max(depth);
                log.implicit += 1;
                Ok(())
            }
            Some(Invalid::Domain(particle)) => Err(Error::DomainViolation { time: t, particle }),
            Some(Invalid::Gap(gap)) => Err(Error::CollisionAbort { time: t, gap }),
            Some(Invalid::Order) => Err(Error::CollisionAbort { time: t, gap: 0.0 }),
        }
    }

    fn split(&self, x: &mut Vec<Point>, start: usize, len: usize, depth: u32, log: &mut StepLog) -> Result<()> {
        let half = len / 2;
        self.advance(x, start, half, depth + 1, log)?;
        self.advance(x, start + half, half, depth + 1, log)
    }

    /// Drift-implicit step y = z + h b(y), with z the state plus noise, for
    /// the one-dimensional sine-beta gas. y minimises the strictly convex
    /// energy |y - z|^2 / 2 + h c |y|^2 / 2 - h (beta / 2) sum log|y_i - y_j|
    /// (environment pairs included) over the order chamber of `x`. The
    /// logarithmic barrier keeps the minimiser inside the chamber.
    fn implicit_step(&self, x: &[Point], env: &[Point], z: &[f64], h: f64) -> Option<Vec<Point>> {
        let n = x.len();
        let hb = 0.5 * self.spec.beta() * h;
        let hc = self.spec.confinement() * h;
        let e: Vec<f64> = env.iter().map(Point::x).collect();
        let x0: Vec<f64> = x.iter().map(Point::x).collect();
        let same_order = |y: &[f64]| {
            (0..n).all(|i| {
                (i + 1..n).all(|j| (y[i] < y[j]) == (x0[i] < x0[j]) && y[i] != y[j])
                    && e.iter().all(|v| (y[i] < *v) == (x0[i] < *v) && y[i] != *v)
            })
        };
        let energy = |y: &[f64]| {
            let mut f = 0.0;
            for i in 0..n {
                f += 0.5 * (y[i] - z[i]).powi(2) + 0.5 * hc * y[i] * y[i];
                f -= hb * (i + 1..n).map(|j| (y[i] - y[j]).abs().ln()).sum::<f64>();
                f -= hb * e.iter().map(|v| (y[i] - v).abs().ln()).sum::<f64>();
            }
            f
        };
        let mut y = x0.clone();
        for _ in 0..200 {
            let mut g = vec![0.0; n];
            let mut hess = vec![vec![0.0; n]; n];
            for i in 0..n {
                g[i] = y[i] - z[i] + hc * y[i];
                hess[i][i] = 1.0 + hc;
                for j in (0..n).filter(|&j| j != i) {
                    let d = y[i] - y[j];
                    g[i] -= hb / d;
                    hess[i][i] += hb / (d * d);
                    hess[i][j] = -hb / (d * d);
                }
                for v in &e {
                    let d = y[i] - v;
                    g[i] -= hb / d;
                    hess[i][i] += hb / (d * d);
                }
            }
            let p = solve_spd(hess, g.iter().map(|v| -v).collect())?;
            let decrement: f64 = -g.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
            let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if p.iter().all(|v| v.abs() <= 1e-13 * scale) {
                return same_order(&y).then(|| y.iter().map(|v| Point::d1(*v)).collect());
            }
            let f0 = energy(&y);
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a + step * b).collect();
                if trial == y {
                    // the energy no longer resolves the update
                    return same_order(&y).then(|| y.iter().map(|v| Point::d1(*v)).collect());
                }
                if same_order(&trial) && energy(&trial) <= f0 - 1e-4 * step * decrement {
                    y = trial;
                    break;
                }
                step *= 0.5;
            }
        }
        None
    }
}

/// Cholesky solve of a symmetric positive definite system.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        a[j][j] = d.sqrt();
        for i in j + 1..n {
            a[i][j] = (a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>()) / a[j][j];
        }
    }
    for i in 0..n {
        b[i] = (b[i] - (0..i).map(|k| a[i][k] * b[k]).sum::<f64>()) / a[i][i];
    }
    for i in (0..n).rev() {
        b[i] = (b[i] - (i + 1..n).map(|k| a[k][i] * b[k]).sum::<f64>()) / a[i][i];
    }
    Some(b)
}

/// Nearest-position matching between consecutive states.
fn label_swaps(prev: &[Point], next: &[Point], dt: f64, step: usize, time: f64, events: &mut Vec<Event>) {
    if prev.is_empty() {
        return;
    }
    let limit = 3.0 * (prev[0].dim() as f64 * dt).sqrt();
    for (i, p) in prev.iter().enumerate() {
        let own = p.dist(&next[i]);
        let (best, d) = next
            .iter()
            .enumerate()
            .map(|(j, q)| (j, p.dist(q)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if (best != i && d < own) || own > limit {
            events.push(Event { step, time, kind: EventKind::LabelSwap { particle: i, distance: own } });
        }
    }
}

/// Shared integration loop: `initial` are the moving particles, `env` the
/// frozen remainder.
pub(crate) fn integrate(
    initial: &[Point],
    dim: usize,
    env: EnvView<'_>,
    spec: &InteractionSpec,
    solver: &SolverConfig,
    noise: &BrownianPath,
) -> Result<Trajectory> {
    solver.validate()?;
    let steps = solver.steps()?;
    if spec.dim() != dim {
        return Err(Error::InvalidParameter(format!("state dimension {dim} but model dimension {}", spec.dim())));
    }
    if noise.n_particles() != initial.len() || (!initial.is_empty() && noise.dim() != dim) {
        return Err(Error::GridMismatch(format!(
            "noise for {} particles in d={}, state has {} in d={dim}",
            noise.n_particles(),
            noise.dim(),
            initial.len()
        )));
    }
    let per_step = noise.cells_per(solver.dt)?;
    if noise.steps() < steps * per_step {
        return Err(Error::GridMismatch(format!("noise covers {} finest steps, need {}", noise.steps(), steps * per_step)));
    }
    if spec.half_line() {
        if let Some(i) = initial.iter().position(|p| !(p.x() > 0.0)) {
            return Err(Error::DomainViolation { time: 0.0, particle: i });
        }
    }
    let engine = Engine {
        spec,
        solver,
        noise,
        env,
        max_depth: solver.max_substep_depth.min(per_step.trailing_zeros()),
        singular: is_singular(spec),
        ordered: dim == 1 && spec.preserves_order(),
        implicit: dim == 1 && matches!(spec.kind(), ModelKind::SineBeta),
    };
    let mut x = initial.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    times.push(0.0);
    states.push(LabeledState::new(dim, x.clone())?);
    for k in 0..steps {
        let mut log = StepLog::default();
        engine.advance(&mut x, k * per_step, per_step, 0, &mut log)?;
        let t = (k + 1) as f64 * solver.dt;
        if log.deepest > 0 {
            events.push(Event { step: k + 1, time: t, kind: EventKind::Substep { depth: log.deepest } });
        }
        if log.implicit > 0 {
            events.push(Event { step: k + 1, time: t, kind: EventKind::ImplicitStep { count: log.implicit } });
        }
        label_swaps(states[k].positions(), &x, solver.dt, k + 1, t, &mut events);
        times.push(t);
        states.push(LabeledState::new(dim, x.clone())?);
    }
    Ok(Trajectory { dt: solver.dt, times, states, events })
}

/// Brownian path matching a solver: `noise_refinement` finest steps per dt.
pub fn brownian_for(n_particles: usize, dim: usize, solver: &SolverConfig) -> Result<BrownianPath> {
    let steps = solver.steps()?;
    let r = solver.noise_refinement;
    Ok(BrownianPath::generate(n_particles, dim, solver.dt / r as f64, steps * r, solver.seed))
}

/// Simulates the finite system from `initial` with fresh noise from the
/// solver seed and returns the path together with that noise.
pub fn simulate(
    initial: &LabeledState,
    spec: &InteractionSpec,
    solver: &SolverConfig,
) -> Result<(Trajectory, BrownianPath)> {
    let bp = brownian_for(initial.len(), initial.dim(), solver)?;
    let traj = simulate_with_noise(initial, spec, solver, &bp)?;
    Ok((traj, bp))
}

/// Simulates with a supplied Brownian path whose finest step divides dt by a
/// power of two.
pub fn simulate_with_noise(
    initial: &LabeledState,
    spec: &InteractionSpec,
    solver: &SolverConfig,
    noise: &BrownianPath,
) -> Result<Trajectory> {
    integrate(initial.positions(), initial.dim(), EnvView::empty(), spec, solver, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    pub slope: f64,
    pub intercept: f64,
    /// exp(intercept): the fitted constant in E|dX|^4 ~ C |t - u|^slope.
    pub constant: f64,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
}

/// Fits log E[sum_{i<=m} |X_t^i - X_u^i|^4 ; sup |X| <= a] against log|t - u|
/// over the given lags (in steps), pooling all start times and members.
pub fn moment_bound_probe(ensemble: &[Trajectory], m: usize, a: f64, lags: &[usize]) -> Result<MomentFit> {
    if ensemble.len() < 100 {
        return Err(Error::InsufficientEnsemble { needed: 100, got: ensemble.len() });
    }
    let lags: Vec<usize> = lags.iter().copied().filter(|&l| l > 0).collect();
    if lags.len() < 2 {
        return Err(Error::DegenerateRegression("need at least two lags".into()));
    }
    let dt = ensemble[0].dt;
    let mut moments = Vec::with_capacity(lags.len());
    for &lag in &lags {
        let (mut sum, mut count) = (0.0, 0usize);
        for traj in ensemble {
            if traj.n_particles() < m {
                return Err(Error::IndexOutOfRange { index: m, len: traj.n_particles() });
            }
            let inside = traj.states.iter().all(|s| s.positions()[..m].iter().all(|p| p.norm() <= a));
            for u in 0..traj.states.len().saturating_sub(lag) {
                count += 1;
                if inside {
                    let (su, st) = (traj.states[u].positions(), traj.states[u + lag].positions());
                    sum += (0..m).map(|i| (st[i] - su[i]).norm_sq().powi(2)).sum::<f64>();
                }
            }
        }
        if count == 0 {
            return Err(Error::DegenerateRegression(format!("lag {lag} exceeds the horizon")));
        }
        moments.push(sum / count as f64);
    }
    if moments.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateRegression("no member stays inside the ball".into()));
    }
    let lx: Vec<f64> = lags.iter().map(|&l| (l as f64 * dt).ln()).collect();
    let ly: Vec<f64> = moments.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly)?;
    Ok(MomentFit { slope, intercept, constant: intercept.exp(), lags: lags.iter().map(|&l| l as f64 * dt).collect(), moments })
}
