//! m-particle re-solves against a frozen environment.
//!
//! A finite-N run is split into its first m labels and the remaining
//! configuration path. The m tagged particles are then integrated again,
//! with the same Brownian increments, while the environment is replayed
//! from the recorded path. Consistency and pathwise-uniqueness probes
//! compare the resulting solutions.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::configuration::{split_m, Configuration, LabeledState, Point};
use crate::error::{Error, Result};
use crate::integrator::{integrate, simulate_with_noise, BrownianPath, EnvView, SolverConfig, Trajectory};
use crate::models::InteractionSpec;
use crate::rng::rng_from_seed;
use crate::tame::TameSchedule;

/// The environment path t -> configuration of labels m+1, ..., N.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEnvironment {
    pub dt: f64,
    pub times: Vec<f64>,
    pub env_states: Vec<Configuration>,
}

/// Splits every recorded state into the first m labels and the rest.
pub fn freeze_env(traj: &Trajectory, m: usize) -> Result<(Trajectory, FrozenEnvironment)> {
    let mut tagged = Vec::with_capacity(traj.states.len());
    let mut env = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let split = split_m(s, m)?;
        tagged.push(LabeledState::new(s.dim(), split.tagged)?);
        env.push(split.environment);
    }
    Ok((
        Trajectory { dt: traj.dt, times: traj.times.clone(), states: tagged, events: Vec::new() },
        FrozenEnvironment { dt: traj.dt, times: traj.times.clone(), env_states: env },
    ))
}

/// Integrates the tagged particles with the environment held at its left
/// grid value between recorded times.
pub fn solve_frozen(
    tagged0: &[Point],
    env: &FrozenEnvironment,
    bp_m: &BrownianPath,
    spec: &InteractionSpec,
    solver: &SolverConfig,
) -> Result<Trajectory> {
    let ratio = env.dt / bp_m.finest_dt();
    let per_cell = ratio.round();
    if per_cell < 1.0 || (ratio - per_cell).abs() > 1e-9 * per_cell {
        return Err(Error::GridMismatch(format!(
            "environment step {} is not a multiple of the noise step {}",
            env.dt,
            bp_m.finest_dt()
        )));
    }
    let env_horizon = env.times.last().copied().unwrap_or(0.0);
    if env_horizon + 1e-9 * env.dt < solver.horizon {
        return Err(Error::GridMismatch(format!("environment ends at {env_horizon}, solver horizon {}", solver.horizon)));
    }
    let view = EnvView { states: &env.env_states, finest_per_cell: per_cell as usize };
    integrate(tagged0, spec.dim(), view, spec, solver, bp_m)
}

fn check_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.times.len() != b.times.len() {
        return Err(Error::GridMismatch(format!("{} vs {} time points", a.times.len(), b.times.len())));
    }
    if a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-9 * a.dt) {
        return Err(Error::GridMismatch("time points differ".into()));
    }
    if a.n_particles() != b.n_particles() {
        return Err(Error::GridMismatch(format!("{} vs {} particles", a.n_particles(), b.n_particles())));
    }
    Ok(())
}

/// sup over grid times and particles of |Y^i_t - X^i_t|.
pub fn consistency_error(y: &Trajectory, x_tagged: &Trajectory) -> Result<f64> {
    check_grid(y, x_tagged)?;
    let mut sup: f64 = 0.0;
    for (sy, sx) in y.states.iter().zip(&x_tagged.states) {
        for (p, q) in sy.positions().iter().zip(sx.positions()) {
            sup = sup.max(p.dist(q));
        }
    }
    Ok(sup)
}

/// Brings two trajectories to the coarser of their grids.
fn common_grid(a: Trajectory, b: Trajectory) -> Result<(Trajectory, Trajectory)> {
    let ratio = |fine: &Trajectory, coarse: &Trajectory| -> Result<usize> {
        let r = coarse.dt / fine.dt;
        let k = r.round();
        if (r - k).abs() > 1e-9 * k {
            return Err(Error::GridMismatch(format!("steps {} and {} are not nested", fine.dt, coarse.dt)));
        }
        Ok(k as usize)
    };
    if a.dt < b.dt {
        let k = ratio(&a, &b)?;
        Ok((a.subsample(k)?, b))
    } else if b.dt < a.dt {
        let k = ratio(&b, &a)?;
        Ok((a, b.subsample(k)?))
    } else {
        Ok((a, b))
    }
}

/// sup distance between the frozen-environment solutions of two solvers
/// driven by the same Brownian path, compared on the coarser grid.
pub fn uniqueness_probe(
    tagged0: &[Point],
    env: &FrozenEnvironment,
    bp_m: &BrownianPath,
    spec: &InteractionSpec,
    solver_a: &SolverConfig,
    solver_b: &SolverConfig,
) -> Result<f64> {
    let a = solve_frozen(tagged0, env, bp_m, spec, solver_a)?;
    if solver_a == solver_b {
        return consistency_error(&a, &a);
    }
    let b = solve_frozen(tagged0, env, bp_m, spec, solver_b)?;
    let (a, b) = common_grid(a, b)?;
    consistency_error(&a, &b)
}

/// Result of one member of a consistency refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRun {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Error of the m-particle solve at the reference step itself.
    pub reference_error: f64,
}

/// Runs the full system at a reference step dt_min / `refine`, freezes the
/// environment of labels > m and re-solves the tagged particles at each
/// ladder step with the same noise.
pub fn consistency_run(
    initial: &LabeledState,
    spec: &InteractionSpec,
    base: &SolverConfig,
    m: usize,
    dt_ladder: &[f64],
    refine: usize,
) -> Result<ConsistencyRun> {
    let dt_min = dt_ladder.iter().copied().fold(f64::INFINITY, f64::min);
    if !dt_min.is_finite() || refine == 0 {
        return Err(Error::InvalidParameter("empty dt ladder".into()));
    }
    let reference = base.clone().with_dt(dt_min / refine as f64);
    let steps = reference.steps()?;
    let r = reference.noise_refinement;
    let bp = BrownianPath::generate(initial.len(), initial.dim(), reference.dt / r as f64, steps * r, base.seed);
    let x = simulate_with_noise(initial, spec, &reference, &bp)?;
    let (tagged, env) = freeze_env(&x, m)?;
    let bp_m = bp.restrict(m)?;
    let tagged0 = &initial.positions()[..m];
    let y_ref = solve_frozen(tagged0, &env, &bp_m, spec, &reference)?;
    let reference_error = consistency_error(&y_ref, &tagged)?;
    let mut errors = Vec::with_capacity(dt_ladder.len());
    for &dt in dt_ladder {
        let solver = base.clone().with_dt(dt);
        let y = solve_frozen(tagged0, &env, &bp_m, spec, &solver)?;
        let factor = (dt / reference.dt).round() as usize;
        errors.push(consistency_error(&y, &tagged.subsample(factor)?)?);
    }
    Ok(ConsistencyRun { dts: dt_ladder.to_vec(), errors, reference_error })
}

/// A time that may be censored at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExitTime {
    At(f64),
    Censored,
}

impl ExitTime {
    pub fn is_censored(&self) -> bool {
        matches!(self, ExitTime::Censored)
    }
}

/// The set of m-tuples inside the open ball of radius r, with gaps above
/// 2^-p to each other and to the environment, and environment in K[a_{q+1}].
#[derive(Debug, Clone, PartialEq)]
pub struct HRegion {
    pub p: u32,
    pub q: u32,
    pub r: u32,
    pub schedule: TameSchedule,
}

impl HRegion {
    pub fn gap_floor(&self) -> f64 {
        0.5f64.powi(self.p as i32)
    }

    pub fn contains(&self, tagged: &[Point], env: &Configuration) -> bool {
        let floor = self.gap_floor();
        let r = self.r as f64;
        tagged.iter().all(|x| x.norm() < r)
            && min_tagged_gap(tagged, env).is_none_or(|g| g > floor)
            && self.schedule.contains(env, self.q + 1)
            && env.is_simple(0.0)
    }
}

/// Smallest distance from a tagged point to another tagged point or to the
/// environment.
fn min_tagged_gap(tagged: &[Point], env: &Configuration) -> Option<f64> {
    let mut best = f64::INFINITY;
    for (i, x) in tagged.iter().enumerate() {
        for y in tagged[i + 1..].iter().chain(env.points()) {
            best = best.min(x.dist(y));
        }
    }
    best.is_finite().then_some(best)
}

/// First grid time at which the pair (tagged, environment) leaves the region.
pub fn exit_time_sigma(tagged: &Trajectory, env: &FrozenEnvironment, region: &HRegion) -> Result<ExitTime> {
    if tagged.states.len() != env.env_states.len() {
        return Err(Error::GridMismatch("tagged path and environment lengths differ".into()));
    }
    for ((t, s), e) in tagged.times.iter().zip(&tagged.states).zip(&env.env_states) {
        if !region.contains(s.positions(), e) {
            return Ok(ExitTime::At(*t));
        }
    }
    Ok(ExitTime::Censored)
}

/// Per-step componentwise minimal (p, q, r) and their maxima over time.
#[derive(Debug, Clone, PartialEq)]
pub struct B1Report {
    pub per_step: Vec<Option<(u32, u32, u32)>>,
    pub max_pqr: Option<(u32, u32, u32)>,
    pub uncovered_fraction: f64,
}

/// Minimal (p, q, r) for one state, or `None` if no triple within the caps
/// contains it. Membership is monotone in each index, so the minimum is
/// taken coordinate by coordinate.
pub fn minimal_region(
    tagged: &[Point],
    env: &Configuration,
    schedule: &TameSchedule,
    caps: (u32, u32, u32),
) -> Option<(u32, u32, u32)> {
    let (p_max, q_max, r_max) = caps;
    if !env.is_simple(0.0) {
        return None;
    }
    let p = match min_tagged_gap(tagged, env) {
        None => 1,
        Some(g) => (1..=p_max).find(|&p| g > 0.5f64.powi(p as i32))?,
    };
    let q = (1..=q_max).find(|&q| schedule.contains(env, q + 1))?;
    let rad = tagged.iter().map(Point::norm).fold(0.0, f64::max);
    let r = (1..=r_max).find(|&r| rad < r as f64)?;
    Some((p, q, r))
}

pub fn b1_report(
    traj: &Trajectory,
    m: usize,
    schedule: &TameSchedule,
    p_max: u32,
    q_max: u32,
    r_max: u32,
) -> Result<B1Report> {
    let (tagged, env) = freeze_env(traj, m)?;
    let per_step: Vec<Option<(u32, u32, u32)>> = tagged
        .states
        .iter()
        .zip(&env.env_states)
        .map(|(s, e)| minimal_region(s.positions(), e, schedule, (p_max, q_max, r_max)))
        .collect();
    let uncovered = per_step.iter().filter(|v| v.is_none()).count();
    let max_pqr = per_step
        .iter()
        .flatten()
        .copied()
        .reduce(|a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)));
    Ok(B1Report { uncovered_fraction: uncovered as f64 / per_step.len().max(1) as f64, per_step, max_pqr })
}

/// The m-particle drift vector (b(x_1, ...), ..., b(x_m, ...)).
fn tagged_drift(spec: &InteractionSpec, x: &[Point], env: &Configuration) -> Result<Vec<Point>> {
    x.iter()
        .enumerate()
        .map(|(i, p)| {
            let others = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q).chain(env.points());
            spec.full_drift(*p, others)
        })
        .collect()
}

fn tuple_dist(x: &[Point], y: &[Point]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (*a - *b).norm_sq()).sum::<f64>().sqrt()
}

/// Whether x and y lie in the same component of the region: same relative
/// order (d = 1), or a straight segment that keeps every gap above the
/// floor (d >= 2, checked at 64 interior points).
fn same_component(x: &[Point], y: &[Point], env: &Configuration, region: &HRegion) -> bool {
    if x.first().is_some_and(|p| p.dim() == 1) {
        let sig = |z: &[Point]| -> Vec<(usize, usize)> {
            z.iter()
                .map(|p| {
                    (
                        z.iter().filter(|q| q.x() < p.x()).count(),
                        env.points().iter().filter(|q| q.x() < p.x()).count(),
                    )
                })
                .collect()
        };
        return sig(x) == sig(y);
    }
    (1..64).all(|k| {
        let s = k as f64 / 64.0;
        let z: Vec<Point> = x.iter().zip(y).map(|(a, b)| *a + (*b - *a) * s).collect();
        region.contains(&z, env)
    })
}

/// Largest sampled Lipschitz ratio |b^m(x) - b^m(y)| / |x - y| over pairs of
/// m-tuples in one component of the region, against a fixed environment.
pub fn lipschitz_modulus_probe(
    spec: &InteractionSpec,
    region: &HRegion,
    env_sample: &Configuration,
    m: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be at least 1".into()));
    }
    let dim = spec.dim();
    let r = region.r as f64;
    let mut rng = rng_from_seed(seed);
    let uniform_tuple = |rng: &mut crate::rng::Rng| -> Vec<Point> {
        (0..m)
            .map(|_| loop {
                let mut p = Point::zero(dim);
                for k in 0..dim {
                    p.set(k, r * (2.0 * rng.random::<f64>() - 1.0));
                }
                if p.norm() < r {
                    break p;
                }
            })
            .collect()
    };
    let mut best: f64 = 0.0;
    let mut found = 0;
    let mut attempts = 0usize;
    while found < n_pairs {
        attempts += 1;
        if attempts > 10_000 * n_pairs {
            return Err(Error::InvalidParameter("region too thin to sample pairs".into()));
        }
        let x = uniform_tuple(&mut rng);
        if !region.contains(&x, env_sample) {
            continue;
        }
        // log-uniform displacement scale between 1e-3 gap floors and r
        let lo = (1e-3 * region.gap_floor()).ln();
        let scale = (lo + (r.ln() - lo) * rng.random::<f64>()).exp();
        let y: Vec<Point> = x
            .iter()
            .map(|p| {
                let mut d = Point::zero(dim);
                for k in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    d.set(k, scale * z);
                }
                *p + d
            })
            .collect();
        if !region.contains(&y, env_sample) || !same_component(&x, &y, env_sample, region) {
            continue;
        }
        let dist = tuple_dist(&x, &y);
        if dist < 1e-12 {
            return Err(Error::DegeneratePair(dist));
        }
        let bx = tagged_drift(spec, &x, env_sample)?;
        let by = tagged_drift(spec, &y, env_sample)?;
        best = best.max(tuple_dist(&bx, &by) / dist);
        found += 1;
    }
    Ok(best)
}
