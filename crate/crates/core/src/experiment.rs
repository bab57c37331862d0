//! Experiment orchestration behind the command-line tool. Ensemble members
//! run on a worker pool and are reduced in member order, so the worker
//! count never changes an emitted byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    half_time_increment, ito_residual, lyons_zheng_residual, qv_check, reversibility_test, CylinderFunction,
};
use crate::config::{InitKind, ModelName, RunConfig};
use crate::configuration::{fmt_f64, unlabel, LabeledState};
use crate::diagnostics::{collision_monitor, kappa_exit, nbj_counter};
use crate::error::Error;
use crate::fields::{estimate_correlation, estimate_pair_by_separation, sine_pair_bin_average, stationarity_test, sup_gap, Bins};
use crate::ifc::{b1_report, consistency_run, freeze_env, uniqueness_probe, FrozenEnvironment};
use crate::integrator::{simulate, simulate_with_noise, BrownianPath, Scheme, Trajectory};
use crate::io::{write_brownian_csv, write_trajectory_csv};
use crate::report::{Report, Stat};
use crate::rng::stream_seed;
use crate::sampler::{sample_loggas, unfold_semicircle, SamplerConfig};
use crate::stats::{median, observed_order};
use crate::tame::TameSchedule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    IfcCheck,
    Diagnose,
    Fields,
    ReverseCheck,
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::IfcCheck => "ifc-check",
            Command::Diagnose => "diagnose",
            Command::Fields => "fields",
            Command::ReverseCheck => "reverse-check",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub message: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Exit code for a library error: parameter and shape problems are
/// configuration errors, everything else is a numerical abort.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::InsufficientEnsemble { .. }
        | Error::GridMismatch(_)
        | Error::IndivisibleFactor { .. }
        | Error::IndexOutOfRange { .. }
        | Error::SchemaMismatch(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    pool: rayon::ThreadPool,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }

    /// Runs `f` for every member in parallel and returns results in member
    /// order; the first failing member (by index) decides the error.
    fn members<T: Send>(&self, n: usize, f: impl Fn(usize) -> crate::Result<T> + Sync) -> crate::Result<Vec<T>> {
        let results: Vec<crate::Result<T>> = self.pool.install(|| (0..n).into_par_iter().map(&f).collect());
        results.into_iter().collect()
    }

    fn init_seed(&self, k: usize) -> u64 {
        stream_seed(self.cfg.seed, 2 * k as u64)
    }

    fn noise_seed(&self, k: usize) -> u64 {
        stream_seed(self.cfg.seed, 2 * k as u64 + 1)
    }

    fn member_path(&self, k: usize) -> crate::Result<(Trajectory, BrownianPath)> {
        let init = self.cfg.initial_state(self.init_seed(k))?;
        simulate(&init, &self.cfg.spec()?, &self.cfg.solver(self.noise_seed(k)))
    }

    fn base_report(&self, cmd: Command) -> Report {
        let mut r = Report::new();
        r.text("command", cmd.name());
        for (k, v) in self.cfg.entries() {
            r.text(format!("config.{k}"), v);
        }
        r
    }
}

/// Runs one subcommand and writes its artifacts under `opts.out_dir`.
pub fn run_experiment(cfg: &RunConfig, cmd: Command, opts: &RunOptions) -> Outcome {
    let fail = |code, msg: String| Outcome { exit_code: code, artifacts: Vec::new(), message: Some(msg) };
    if let Err(e) = fs::create_dir_all(&opts.out_dir) {
        return fail(EXIT_NUMERICAL, format!("cannot create {}: {e}", opts.out_dir.display()));
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(opts.workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, format!("worker pool: {e}")),
    };
    let mut ctx = Ctx { cfg, out: &opts.out_dir, pool, artifacts: Vec::new() };
    let commands: &[Command] = match cmd {
        Command::All => &[Command::Simulate, Command::IfcCheck, Command::Diagnose, Command::Fields, Command::ReverseCheck],
        _ => std::slice::from_ref(&cmd),
    };
    let mut exit_code = EXIT_OK;
    let mut messages = Vec::new();
    for &c in commands {
        let result = match c {
            Command::Simulate => run_simulate(&mut ctx),
            Command::IfcCheck => run_ifc_check(&mut ctx),
            Command::Diagnose => run_diagnose(&mut ctx),
            Command::Fields => run_fields(&mut ctx),
            Command::ReverseCheck => run_reverse_check(&mut ctx),
            Command::All => unreachable!(),
        };
        let code = match result {
            Ok(true) => EXIT_OK,
            Ok(false) => {
                messages.push(format!("{}: checks failed", c.name()));
                EXIT_CHECKS_FAILED
            }
            Err(Failure::Io(e)) => {
                messages.push(format!("{}: i/o error: {e}", c.name()));
                EXIT_NUMERICAL
            }
            Err(Failure::Core(e)) => {
                let code = exit_code_for(&e);
                messages.push(format!("{}: {e}", c.name()));
                if code == EXIT_NUMERICAL {
                    let log = format!("command = {}\nerror = {e}\n", c.name());
                    if let Err(io) = ctx.write("events.log", &log) {
                        messages.push(format!("events.log: {io}"));
                    }
                }
                code
            }
        };
        exit_code = exit_code.max(code);
    }
    Outcome {
        exit_code,
        artifacts: ctx.artifacts,
        message: if messages.is_empty() { None } else { Some(messages.join("\n")) },
    }
}

fn run_simulate(ctx: &mut Ctx) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let spec = cfg.spec()?;
    let (traj0, bp0) = ctx.member_path(0)?;
    let rest = ctx.members(cfg.experiment.ensemble.saturating_sub(1), |k| ctx.member_path(k + 1).map(|(t, _)| member_summary(&t)))?;
    let mut report = ctx.base_report(Command::Simulate);
    let mut all = vec![member_summary(&traj0)];
    all.extend(rest);
    let mut ms = Stat::default();
    let mut gap = Stat::default();
    let (mut substeps, mut swaps) = (0u64, 0u64);
    for s in &all {
        ms = ms.merge(&Stat::of(s.final_mean_square));
        if let Some(g) = s.min_gap {
            gap = gap.merge(&Stat::of(g));
        }
        substeps += s.substeps;
        swaps += s.swaps;
    }
    report.stat("final_mean_square", ms);
    if gap.count > 0 {
        report.stat("path_min_gap", gap);
    }
    report.count("events.substep", substeps);
    report.count("events.label_swap", swaps);
    let finite = traj0.states.iter().all(|s| s.positions().iter().all(|p| p.is_finite()));
    let pass = report.check("finite_states", finite);
    ctx.write("trajectory.csv", &write_trajectory_csv(&traj0, spec.name(), cfg.seed))?;
    ctx.write("brownian.csv", &write_brownian_csv(&bp0, cfg.seed))?;
    ctx.write("report.txt", &report.to_text())?;
    Ok(pass)
}

struct MemberSummary {
    final_mean_square: f64,
    min_gap: Option<f64>,
    substeps: u64,
    swaps: u64,
}

fn member_summary(t: &Trajectory) -> MemberSummary {
    let last = t.final_state().positions();
    let min_gap = t.states.iter().filter_map(LabeledState::min_gap).reduce(f64::min);
    MemberSummary {
        final_mean_square: last.iter().map(|p| p.norm_sq()).sum::<f64>() / last.len().max(1) as f64,
        min_gap,
        substeps: t.substep_events() as u64,
        swaps: t.label_swaps() as u64,
    }
}

/// Points per unit r^d, twice the largest density seen in balls of radius
/// 1..=10 around the origin, floored at 1.
fn schedule_density(state: &LabeledState) -> f64 {
    let cfg = unlabel(state);
    let d = state.dim() as f64;
    (1..=10).map(|r| 2.0 * cfg.count_closed_ball(r as f64) as f64 / (r as f64).powf(d)).fold(1.0, f64::max)
}

fn run_ifc_check(ctx: &mut Ctx) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let spec = cfg.spec()?;
    let m = cfg.experiment.m;
    let ladder = cfg.experiment.dt_ladder.clone();
    let refine = cfg.experiment.refine;
    let runs = ctx.members(cfg.experiment.ensemble, |k| {
        let init = cfg.initial_state(ctx.init_seed(k))?;
        let base = cfg.solver(ctx.noise_seed(k));
        let run = consistency_run(&init, &spec, &base, m, &ladder, refine)?;
        // uniqueness: euler against tamed euler in a frozen environment, same noise
        let reference = base.clone().with_dt(ladder.iter().copied().fold(f64::INFINITY, f64::min) / refine as f64);
        let steps = reference.steps()?;
        let r = reference.noise_refinement;
        let bp = BrownianPath::generate(init.len(), init.dim(), reference.dt / r as f64, steps * r, base.seed);
        let x = simulate_with_noise(&init, &spec, &reference, &bp)?;
        let (_, env): (Trajectory, FrozenEnvironment) = freeze_env(&x, m)?;
        let bp_m = bp.restrict(m)?;
        let tagged0 = &init.positions()[..m];
        let uniq = ladder
            .iter()
            .map(|&dt| {
                let a = base.clone().with_dt(dt).with_scheme(Scheme::Euler);
                let b = base.clone().with_dt(dt).with_scheme(Scheme::TamedEuler);
                uniqueness_probe(tagged0, &env, &bp_m, &spec, &a, &b)
            })
            .collect::<crate::Result<Vec<f64>>>()?;
        let schedule = TameSchedule::density_default(init.dim(), schedule_density(&init));
        let b1 = b1_report(&x, m, &schedule, 30, 10, 10)?;
        Ok((run, uniq, b1.uncovered_fraction))
    })?;
    let mut report = ctx.base_report(Command::IfcCheck);
    let mut medians = Vec::new();
    let mut uniq_medians = Vec::new();
    for (i, dt) in ladder.iter().enumerate() {
        let errs: Vec<f64> = runs.iter().map(|r| r.0.errors[i]).collect();
        let uq: Vec<f64> = runs.iter().map(|r| r.1[i]).collect();
        report.stat(format!("consistency.rung{i}.error"), Stat::from_values(&errs));
        report.real(format!("consistency.rung{i}.dt"), *dt);
        report.real(format!("consistency.rung{i}.median"), median(&errs));
        report.real(format!("uniqueness.rung{i}.median"), median(&uq));
        medians.push(median(&errs));
        uniq_medians.push(median(&uq));
    }
    report.stat("consistency.reference_error", Stat::from_values(&runs.iter().map(|r| r.0.reference_error).collect::<Vec<_>>()));
    if let Ok(order) = observed_order(&ladder, &uniq_medians) {
        report.real("uniqueness.observed_order", order);
    }
    let uncovered = Stat::from_values(&runs.iter().map(|r| r.2).collect::<Vec<_>>());
    report.stat("b1.uncovered_fraction", uncovered);
    let mut pass = true;
    if m == cfg.sampler.n {
        pass &= report.check("consistency_exact_at_full_tagging", runs.iter().all(|r| r.0.reference_error == 0.0));
    } else {
        let mut order: Vec<(f64, f64)> = ladder.iter().copied().zip(medians.iter().copied()).collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0));
        pass &= report.check("consistency_medians_decrease", order.windows(2).all(|w| w[1].1 < w[0].1));
    }
    pass &= report.check("b1_covered", uncovered.max == 0.0);
    ctx.write("ifc_report.txt", &report.to_text())?;
    Ok(pass)
}

fn run_diagnose(ctx: &mut Ctx) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let radius = cfg.experiment.radius;
    let abort_gap = cfg.solver(0).collision_abort_gap;
    let trajs = ctx.members(cfg.experiment.ensemble, |k| ctx.member_path(k).map(|(t, _)| t))?;
    let mut report = ctx.base_report(Command::Diagnose);
    let mut flags = 0u64;
    let (mut ups0, mut ups1, mut nbj) = (Stat::default(), Stat::default(), Stat::default());
    let mut censored = 0u64;
    for t in &trajs {
        let c = collision_monitor(t, radius, abort_gap);
        flags += c.flags as u64;
        if let (Some(a), Some(b)) = (c.upsilon_start, c.upsilon_end) {
            ups0 = ups0.merge(&Stat::of(a));
            ups1 = ups1.merge(&Stat::of(b));
        }
        nbj = nbj.merge(&Stat::of(nbj_counter(t, radius, t.horizon()) as f64));
        let schedule = TameSchedule::density_default(t.dim(), schedule_density(&t.states[0]));
        censored += kappa_exit(t, 3, &schedule).is_censored() as u64;
    }
    report.count("collision.flags", flags);
    report.count("kappa3.censored", censored);
    report.stat("nbj.m", nbj);
    let mut pass = report.check("no_collisions", flags == 0);
    if ups0.count > 0 {
        report.stat("upsilon.start", ups0);
        report.stat("upsilon.end", ups1);
        pass &= report.check("upsilon_bounded", ups1.mean() <= 3.0 * ups0.mean());
    }
    if trajs.len() >= 100 {
        let steps = trajs[0].times.len() - 1;
        let lags: Vec<usize> = (0..5).map(|k| 1usize << k).filter(|l| *l <= steps / 2).collect();
        match crate::integrator::moment_bound_probe(&trajs, cfg.experiment.m, 10.0 * radius, &lags) {
            Ok(fit) => report.real("moment.slope", fit.slope),
            Err(e) => report.text("moment.skipped", e.to_string()),
        }
    }
    ctx.write("diagnose_report.txt", &report.to_text())?;
    Ok(pass)
}

fn run_fields(ctx: &mut Ctx) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    if cfg.model.kind != ModelName::Dyson {
        return Err(Error::InvalidParameter("fields needs model.kind = dyson".into()).into());
    }
    let n = cfg.sampler.n;
    let ens = ctx.members(cfg.experiment.ensemble, |k| {
        let mut sc = SamplerConfig::new(n, ctx.init_seed(k));
        sc.beta = cfg.model.beta;
        sc.mcmc_steps = cfg.sampler.mcmc_steps;
        unfold_semicircle(&sample_loggas(&sc, crate::sampler::LogGasKind::Dyson)?)
    })?;
    let half = cfg.experiment.window_fraction * n as f64 / 2.0;
    let rho1 = estimate_correlation(&ens, 1, Bins::new(-half, half, cfg.experiment.bins)?)?;
    let sep_bins = Bins::new(0.0, cfg.experiment.max_separation, cfg.experiment.bins)?;
    let rho2 = estimate_pair_by_separation(&ens, half, sep_bins)?;
    let head = format!("# model=dyson N={n} ensemble={} seed={}\n", ens.len(), cfg.seed);
    let mut csv1 = head.clone() + "x,rho1,stderr\n";
    for k in 0..rho1.bins.n {
        let _ = writeln!(csv1, "{},{},{}", fmt_f64(rho1.bins.center(k)), fmt_f64(rho1.values[k]), fmt_f64(rho1.stderr[k]));
    }
    let mut csv2 = head + "s,rho2,stderr,sine\n";
    for k in 0..sep_bins.n {
        let (a, b) = sep_bins.edges(k);
        let _ = writeln!(
            csv2,
            "{},{},{},{}",
            fmt_f64(sep_bins.center(k)),
            fmt_f64(rho2.values[k]),
            fmt_f64(rho2.stderr[k]),
            fmt_f64(sine_pair_bin_average(a, b))
        );
    }
    let mut report = ctx.base_report(Command::Fields);
    let (gap, se) = sup_gap(&rho2, sine_pair_bin_average);
    report.real("rho2.sup_gap_vs_sine", gap);
    report.real("rho2.sup_gap_stderr", se);
    report.stat("rho1.values", Stat::from_values(&rho1.values));
    ctx.write("fields_rho1.csv", &csv1)?;
    ctx.write("fields_rho2_separation.csv", &csv2)?;
    ctx.write("fields_report.txt", &report.to_text())?;
    Ok(true)
}

fn run_reverse_check(ctx: &mut Ctx) -> Result<bool, Failure> {
    let cfg = ctx.cfg;
    let spec = cfg.spec()?;
    let paths = ctx.members(cfg.experiment.ensemble, |k| ctx.member_path(k))?;
    let n = cfg.sampler.n;
    let f = if cfg.model.dim == 1 && n >= 2 { CylinderFunction::central_gap(n)? } else { CylinderFunction::coordinate(0, 0) };
    let x1 = CylinderFunction::coordinate(0, 0);
    let horizon = paths[0].0.horizon();
    let per = ctx.members(paths.len(), |k| {
        let (t, bp) = &paths[k];
        let ito = ito_residual(&f, t, bp, &spec)?;
        let lz = lyons_zheng_residual(&f, t, bp, &spec, horizon)?;
        let qv = qv_check(&x1, t, bp, &spec)?;
        Ok((ito, lz, qv.realized, qv.predicted))
    })?;
    let mut report = ctx.base_report(Command::ReverseCheck);
    let ito: Vec<f64> = per.iter().map(|v| v.0).collect();
    let lz: Vec<f64> = per.iter().map(|v| v.1).collect();
    report.real("ito_residual.median", median(&ito));
    report.real("lyons_zheng_residual.median", median(&lz));
    let realized = Stat::from_values(&per.iter().map(|v| v.2).collect::<Vec<_>>());
    let predicted = Stat::from_values(&per.iter().map(|v| v.3).collect::<Vec<_>>());
    report.stat("qv.realized", realized);
    report.stat("qv.predicted", predicted);
    report.real("qv.relative_gap_of_means", (realized.mean() - predicted.mean()).abs() / predicted.mean());
    let mut pass = true;
    if paths.len() >= 20 {
        let trajs: Vec<Trajectory> = paths.into_iter().map(|(t, _)| t).collect();
        let equilibrium = cfg.sampler.init == InitKind::LogGas;
        let assert_symmetric = equilibrium && cfg.model.kind != ModelName::SkewPoisson;
        let stats = [CylinderFunction::gaussian_sum(1.0), CylinderFunction::gaussian_sum(3.0), CylinderFunction::mean_square()];
        for (i, g) in stats.iter().enumerate() {
            let p = reversibility_test(&trajs, half_time_increment(g), horizon)?;
            report.real(format!("reversibility.stat{i}.p_value"), p);
            report.text(format!("reversibility.stat{i}.function"), g.name());
            if assert_symmetric {
                pass &= report.check(&format!("reversibility_stat{i}"), p > 0.01);
            }
        }
        let p = stationarity_test(&trajs, |c| c.count_open_ball(cfg.experiment.radius) as f64)?;
        report.real("stationarity.p_value", p);
        if equilibrium {
            pass &= report.check("stationarity", p > 0.01);
        }
    } else {
        report.text("reversibility.skipped", "ensemble below 20");
    }
    ctx.write("reverse_report.txt", &report.to_text())?;
    Ok(pass)
}
