//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the libtest harness.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ifc_core::analysis::{
    half_time_increment, ito_residual, lyons_zheng_residual, qv_check, reversibility_test, CylinderFunction,
};
use ifc_core::diagnostics::{
    carre_du_champ_chi, collision_monitor, cutoff_chi, cutoff_chi_gradient, cutoff_distance, kappa_exit, ChiMode,
    CutoffParams,
};
use ifc_core::fields::{h1_convergence_check, stationarity_test, Bins};
use ifc_core::ifc::{b1_report, consistency_run, freeze_env, uniqueness_probe};
use ifc_core::integrator::{
    brownian_for, moment_bound_probe, simulate, simulate_with_noise, BrownianPath, Scheme, SolverConfig, Trajectory,
};
use ifc_core::models::{drift_jacobian, drift_with, finite_n_drift, DriftOptions};
use ifc_core::potentials::{PlanarSkew, SkewPotential};
use ifc_core::rng::{stream_rng, stream_seed};
use ifc_core::sampler::{
    sample_loggas, scale_to_dynamics, unfold_bulk, unfold_semicircle, LogGasKind, SamplerConfig,
};
use ifc_core::stats::{mean, median, observed_order};
use ifc_core::{label, Configuration, InteractionSpec, LabeledState, Point, Result, TameSchedule};
use rand::Rng as _;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

const LADDER: [f64; 3] = [4e-3, 2e-3, 1e-3];

type Verdict = (bool, String);

fn dyson_equilibrium(n: usize, seed: u64) -> Result<LabeledState> {
    let cfg = sample_loggas(&SamplerConfig::new(n, seed), LogGasKind::Dyson)?;
    label(&scale_to_dynamics(&cfg, LogGasKind::Dyson)?)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn c1_consistency() -> Result<Verdict> {
    let n = 16;
    let spec = InteractionSpec::dyson_bulk(2.0, n)?;
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [1, 2, 4] {
        let mut per_rung = vec![Vec::new(); LADDER.len()];
        for k in 0..50u64 {
            let init = dyson_equilibrium(n, stream_seed(101, 2 * k))?;
            let base = SolverConfig::new(1e-3, 0.5, stream_seed(101, 2 * k + 1));
            let run = consistency_run(&init, &spec, &base, m, &LADDER, 8)?;
            for (r, e) in per_rung.iter_mut().zip(run.errors) {
                r.push(e);
            }
        }
        let medians: Vec<f64> = per_rung.iter().map(|v| median(v)).collect();
        pass &= strictly_decreasing(&medians);
        detail.push(format!("m={m} medians [{}]", fmt_list(&medians)));
    }
    let mut exact = true;
    for k in 0..10u64 {
        let init = dyson_equilibrium(n, stream_seed(102, 2 * k))?;
        let base = SolverConfig::new(1e-3, 0.5, stream_seed(102, 2 * k + 1));
        exact &= consistency_run(&init, &spec, &base, n, &LADDER, 8)?.reference_error == 0.0;
    }
    pass &= exact;
    detail.push(format!("m=N exact {exact}"));
    Ok((pass, detail.join("; ")))
}

/// Median over members of the Euler / tamed Euler gap in a frozen
/// environment, per ladder rung.
fn uniqueness_medians(
    spec: &InteractionSpec,
    init: impl Fn(u64) -> Result<LabeledState>,
    m: usize,
    members: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut per_rung = vec![Vec::new(); LADDER.len()];
    for k in 0..members {
        let x0 = init(stream_seed(seed, 2 * k))?;
        let base = SolverConfig::new(1e-3, 0.5, stream_seed(seed, 2 * k + 1));
        let reference = base.clone().with_dt(1e-3 / 8.0);
        let bp = brownian_for(x0.len(), x0.dim(), &reference)?;
        let x = simulate_with_noise(&x0, spec, &reference, &bp)?;
        let (_, env) = freeze_env(&x, m)?;
        let bp_m = bp.restrict(m)?;
        for (r, &dt) in per_rung.iter_mut().zip(&LADDER) {
            let a = base.clone().with_dt(dt).with_scheme(Scheme::Euler);
            let b = base.clone().with_dt(dt).with_scheme(Scheme::TamedEuler);
            r.push(uniqueness_probe(&x0.positions()[..m], &env, &bp_m, spec, &a, &b)?);
        }
    }
    Ok(per_rung.iter().map(|v| median(v)).collect())
}

fn c2_uniqueness() -> Result<Verdict> {
    let ruelle = InteractionSpec::ruelle_bump(1.0, 1)?;
    let lattice = |_| Ok(LabeledState::from_reals(&(0..8).map(|i| i as f64 - 3.5).collect::<Vec<_>>()));
    let r_med = uniqueness_medians(&ruelle, lattice, 3, 20, 201)?;
    let r_order = observed_order(&LADDER, &r_med)?;
    let dyson = InteractionSpec::dyson_bulk(2.0, 8)?;
    let d_med = uniqueness_medians(&dyson, |s| dyson_equilibrium(8, s), 3, 20, 202)?;
    let d_order = observed_order(&LADDER, &d_med)?;
    Ok((
        r_order >= 0.9 && d_order >= 0.4,
        format!("ruelle order {r_order:.3} [{}]; dyson order {d_order:.3} [{}]", fmt_list(&r_med), fmt_list(&d_med)),
    ))
}

/// Dyson beta = 2, N = 16, T = 1, dt = 1e-3, 100 members.
fn dyson_ensemble() -> Result<Vec<Trajectory>> {
    let spec = InteractionSpec::dyson_bulk(2.0, 16)?;
    (0..100u64)
        .map(|k| {
            let init = dyson_equilibrium(16, stream_seed(301, 2 * k))?;
            simulate(&init, &spec, &SolverConfig::new(1e-3, 1.0, stream_seed(301, 2 * k + 1))).map(|(t, _)| t)
        })
        .collect()
}

fn c3_non_collision(ens: &[Trajectory]) -> Verdict {
    let reports: Vec<_> = ens.iter().map(|t| collision_monitor(t, f64::INFINITY, 1e-8)).collect();
    let flags: usize = reports.iter().map(|r| r.flags).sum();
    let start = mean(&reports.iter().filter_map(|r| r.upsilon_start).collect::<Vec<_>>());
    let end = mean(&reports.iter().filter_map(|r| r.upsilon_end).collect::<Vec<_>>());
    let ratio = end / start;
    (
        flags == 0 && (1.0 / 3.0..=3.0).contains(&ratio),
        format!("aborts 0, flags {flags}, mean upsilon start {start:.4} end {end:.4} ratio {ratio:.3}"),
    )
}

fn c4_non_exit(ens: &[Trajectory]) -> Result<Verdict> {
    let schedule = TameSchedule::density_default(1, 2.0);
    let mut worst: f64 = 0.0;
    for t in ens {
        worst = worst.max(b1_report(t, 4, &schedule, 30, 10, 10)?.uncovered_fraction);
    }
    let censored = ens.iter().filter(|t| kappa_exit(t, 3, &schedule).is_censored()).count();
    let frac = censored as f64 / ens.len() as f64;
    Ok((worst == 0.0 && frac >= 0.99, format!("max uncovered fraction {worst}, kappa_3 censored {frac:.3}")))
}

fn c5_cutoff() -> Result<Verdict> {
    let mut rng = stream_rng(501, 0);
    let (mut inside, mut zero_ok, mut one_ok, mut range_ok, mut cdc_ok) = (0, 0, 0, 0, 0);
    let mut grad_checked = 0;
    let mut worst_grad: f64 = 0.0;
    let mut worst_cdc: f64 = 0.0;
    let total = 1000;
    // building the ramp checks it on a fine grid, so build each variant once
    let mut variants = Vec::new();
    for cap in 1..=3u32 {
        for dim in 1..=2usize {
            let schedule = TameSchedule::density_default(dim, 2.0);
            variants.push(CutoffParams::new(schedule.clone(), Some(cap)).map(|p| (schedule, p))?);
        }
    }
    for k in 0..total {
        let dim = 1 + k % 2;
        let q = 1 + (k / 2 % 3) as u32;
        let cap = 1 + (k / 6 % 3) as u32;
        let (schedule, params) = &variants[2 * (cap as usize - 1) + dim - 1];
        let n = rng.random_range(0..12);
        let mut pts: Vec<Point> = (0..n)
            .map(|_| {
                let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-(cap as f64 + 1.0)..cap as f64 + 1.0)).collect();
                Point::new(&c).unwrap()
            })
            .collect();
        let base = Configuration::new(dim, pts.clone())?;
        if schedule.contains_capped(&base, q, Some(cap)) {
            inside += 1;
            zero_ok += (cutoff_chi(&base, q, params)? == 0.0) as usize;
        }
        // deep violation: more than a_q^+(1) points within 0.05 of the origin
        for _ in 0..=schedule.a_plus(q, 1) {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.035..0.035)).collect();
            pts.push(Point::new(&c)?);
        }
        let deep = Configuration::new(dim, pts)?;
        let chi_deep = cutoff_chi(&deep, q, params)?;
        one_ok += (!schedule.contains_plus_capped(&deep, q, Some(cap)) && chi_deep == 1.0) as usize;
        for cfg in [&base, &deep] {
            let chi = cutoff_chi(cfg, q, params)?;
            range_ok += (0.0..=1.0).contains(&chi) as usize;
            let cdc = carre_du_champ_chi(cfg, ChiMode::Level(q), params)?;
            worst_cdc = worst_cdc.max(cdc);
            cdc_ok += (cdc <= 1.0) as usize;
        }
        // gradient check on the base configuration away from label ties
        let mut moduli: Vec<f64> = base.points().iter().map(Point::norm).collect();
        moduli.sort_by(f64::total_cmp);
        let tied = moduli.windows(2).any(|w| w[1] - w[0] < 1e-4) || moduli.iter().any(|m| *m < 1e-3);
        if tied || cutoff_distance(&base, q, params)? == 0.0 {
            continue;
        }
        let g = cutoff_chi_gradient(&base, q, params)?;
        let h = 1e-6;
        let scale = g.iter().map(|p| p.coords().iter().fold(0.0f64, |a, v| a.max(v.abs()))).fold(1e-6, f64::max);
        for i in 0..base.len() {
            for c in 0..dim {
                let shifted = |s: f64| -> Result<f64> {
                    let mut p = base.points().to_vec();
                    let v = p[i].get(c) + s;
                    p[i].set(c, v);
                    cutoff_chi(&Configuration::new(dim, p)?, q, params)
                };
                let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
                worst_grad = worst_grad.max((fd - g[i].get(c)).abs() / scale);
            }
        }
        grad_checked += 1;
    }
    let pass = zero_ok == inside && one_ok == total && range_ok == 2 * total && cdc_ok == 2 * total && worst_grad < 1e-4;
    Ok((
        pass,
        format!(
            "{total} configurations: chi=0 on {zero_ok}/{inside} inside K, chi=1 {one_ok}, range {range_ok}/{}, max carre du champ {worst_cdc:.3}, gradient rel err {worst_grad:.2e} over {grad_checked}",
            2 * total
        ),
    ))
}

fn rel_err(got: &Point, want: &Point) -> f64 {
    (*got - *want).norm() / want.norm().max(1.0)
}

fn c6_drift_oracles() -> Result<Verdict> {
    let inf = f64::INFINITY;
    let opts = DriftOptions::default();
    let sine = InteractionSpec::sine_beta(2.0)?;
    let rep2 = InteractionSpec::ginibre_rep2()?;
    let mut worst: f64 = 0.0;
    let mut check = |got: Point, want: Point| worst = worst.max(rel_err(&got, &want));
    check(drift_with(&Point::d1(1.0), &[Point::d1(-1.0), Point::d1(0.0)], &sine, inf, &opts)?.vector, Point::d1(1.5));
    check(drift_with(&Point::d1(0.0), &[Point::d1(-2.5), Point::d1(2.5)], &sine, inf, &opts)?.vector, Point::d1(0.0));
    check(drift_with(&Point::d2(1.0, 0.0), &[], &rep2, inf, &opts)?.vector, Point::d2(-1.0, 0.0));
    check(drift_with(&Point::d2(1.0, 0.0), &[Point::d2(0.0, 0.0)], &rep2, inf, &opts)?.vector, Point::d2(0.0, 0.0));
    let bessel = InteractionSpec::bessel(1.0)?;
    check(drift_with(&Point::d1(1.0), &[Point::d1(4.0)], &bessel, inf, &opts)?.vector, Point::d1(1.0 / 6.0));
    let lj = InteractionSpec::lennard_jones(1.0)?;
    let e = Point::d3(0.0, 1.0, 0.0);
    check(drift_with(&e, &[Point::d3(0.0, 0.0, 0.0)], &lj, inf, &opts)?.vector, e * 3.0);
    let jac = drift_jacobian(&Point::d1(1.0), &Configuration::from_reals(&[0.0]), &sine)?;
    check(Point::d1(jac.get(0, 0)), Point::d1(-1.0));
    check(finite_n_drift(1, &LabeledState::from_reals(&[0.0, 1.0]), &sine)?.vector, Point::d1(1.0));
    let confined = InteractionSpec::sine_beta(2.0)?.with_confinement(0.7)?;
    check(finite_n_drift(0, &LabeledState::from_reals(&[2.0]), &confined)?.vector, Point::d1(-1.4));
    let oracle_ok = worst < 1e-12;

    let models = [
        InteractionSpec::sine_beta(2.0)?,
        InteractionSpec::dyson_bulk(2.0, 16)?,
        InteractionSpec::bessel(1.5)?,
        InteractionSpec::ginibre_rep1()?,
        InteractionSpec::ginibre_rep2()?,
        InteractionSpec::lennard_jones(1.0)?,
        InteractionSpec::riesz(1.0, 3.0, 2)?,
        InteractionSpec::ruelle_bump(1.0, 2)?,
        InteractionSpec::skew_poisson_default(4.0)?.with_confinement(0.5)?,
    ];
    let mut rng = stream_rng(601, 0);
    let mut worst_jac: f64 = 0.0;
    for spec in &models {
        let d = spec.dim();
        for _ in 0..100 {
            let x = if spec.half_line() {
                Point::d1(rng.random_range(1.0..3.0))
            } else {
                Point::new(&(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>())?
            };
            let mut env = Vec::new();
            while env.len() < 5 {
                let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let dir = Point::new(&dir)?;
                let y = x + dir * (rng.random_range(0.8..2.5) / dir.norm());
                if !spec.half_line() || y.x() > 0.05 {
                    env.push(y);
                }
            }
            let env = Configuration::new(d, env)?;
            let j = drift_jacobian(&x, &env, spec)?;
            let h = 1e-6;
            let scale = (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).fold(1e-8f64, |m, (a, b)| m.max(j.get(a, b).abs()));
            for b in 0..d {
                let shifted = |s: f64| -> Result<Point> {
                    let mut p = x;
                    p.set(b, x.get(b) + s);
                    let o = DriftOptions { gap_threshold: None, ..DriftOptions::default() };
                    drift_with(&p, env.points(), spec, f64::INFINITY, &o).map(|v| v.vector)
                };
                let fd = (shifted(h)? - shifted(-h)?) * (0.5 / h);
                for a in 0..d {
                    worst_jac = worst_jac.max((fd.get(a) - j.get(a, b)).abs() / scale);
                }
            }
        }
    }

    let skew = PlanarSkew::default();
    let mut worst_div: f64 = 0.0;
    for _ in 0..20 {
        let z = Point::new(&(0..3).map(|_| rng.random_range(-0.7..0.7)).collect::<Vec<_>>())?;
        let h = 1e-5;
        let div: f64 = (0..3)
            .map(|k| {
                let (mut a, mut b) = (z, z);
                a.set(k, z.get(k) + h);
                b.set(k, z.get(k) - h);
                (skew.gamma0(&a).get(k) - skew.gamma0(&b).get(k)) / (2.0 * h)
            })
            .sum();
        worst_div = worst_div.max(div.abs());
    }
    Ok((
        oracle_ok && worst_jac < 1e-5 && worst_div < 1e-6,
        format!("oracle rel err {worst:.1e}, jacobian rel err {worst_jac:.1e} (9 models x 100), max |div gamma0| {worst_div:.1e}"),
    ))
}

fn c7_ginibre() -> Result<Verdict> {
    let rep1 = InteractionSpec::ginibre_rep1()?;
    let rep2 = InteractionSpec::ginibre_rep2()?;
    let opts = DriftOptions { gap_threshold: None, ..DriftOptions::default() };
    let cutoffs = [2.0, 4.0, 6.0];
    let mut per_cutoff = vec![Vec::new(); cutoffs.len()];
    for k in 0..50u64 {
        let raw = sample_loggas(&SamplerConfig::new(200, stream_seed(701, k)), LogGasKind::Ginibre)?;
        let cfg = unfold_bulk(&raw, LogGasKind::Ginibre)?;
        let pts = cfg.points();
        for (slot, &r) in per_cutoff.iter_mut().zip(&cutoffs) {
            let mut gaps = Vec::new();
            for (i, x) in pts.iter().enumerate().filter(|(_, p)| p.norm() < 2.0) {
                let env: Vec<Point> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
                let a = drift_with(x, &env, &rep1, r, &opts)?.vector;
                let b = drift_with(x, &env, &rep2, r, &opts)?.vector;
                gaps.push((a - b).norm());
            }
            if !gaps.is_empty() {
                slot.push(mean(&gaps));
            }
        }
    }
    let medians: Vec<f64> = per_cutoff.iter().map(|v| median(v)).collect();
    Ok((strictly_decreasing(&medians), format!("median gap over R=2,4,6: [{}]", fmt_list(&medians))))
}

fn c8_h1() -> Result<Verdict> {
    let mut ladder = Vec::new();
    for n in [50usize, 100, 200] {
        let ens = (0..200u64)
            .map(|k| unfold_semicircle(&sample_loggas(&SamplerConfig::new(n, stream_seed(801 + n as u64, k)), LogGasKind::Dyson)?))
            .collect::<Result<Vec<_>>>()?;
        ladder.push((n, ens));
    }
    let rep = h1_convergence_check(&ladder, 0.5, Bins::new(0.0, 3.0, 15)?)?;
    let last = *rep.sup_gaps.last().unwrap();
    Ok((
        rep.strictly_decreasing && last < 0.1,
        format!(
            "sup gaps [{}] (stderr [{}]), decreasing within 2 stderr {}",
            fmt_list(&rep.sup_gaps),
            fmt_list(&rep.stderr),
            rep.decreasing
        ),
    ))
}

fn c9_moment() -> Result<Verdict> {
    let lags = [1, 2, 4, 8, 16];
    let free = InteractionSpec::free(1)?;
    let bm = (0..100u64)
        .map(|k| {
            simulate(&LabeledState::from_reals(&[0.0]), &free, &SolverConfig::new(1e-3, 0.25, stream_seed(901, k)))
                .map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let bm_slope = moment_bound_probe(&bm, 1, 1e9, &lags)?.slope;
    let dyson = InteractionSpec::dyson_bulk(2.0, 32)?;
    let dy = (0..100u64)
        .map(|k| {
            let init = dyson_equilibrium(32, stream_seed(902, 2 * k))?;
            simulate(&init, &dyson, &SolverConfig::new(1e-3, 0.25, stream_seed(902, 2 * k + 1))).map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let dy_slope = moment_bound_probe(&dy, 4, 1e9, &lags)?.slope;
    Ok((
        (bm_slope - 2.0).abs() <= 0.1 && dy_slope >= 1.8,
        format!("brownian slope {bm_slope:.3}, dyson N=32 slope {dy_slope:.3}"),
    ))
}

fn c10_lyons_zheng() -> Result<Verdict> {
    let n = 8;
    let spec = InteractionSpec::dyson_bulk(2.0, n)?;
    let f = CylinderFunction::central_gap(n)?;
    let horizon = 1.0;
    let finest = LADDER[2] / 16.0;
    let mut ito = vec![Vec::new(); LADDER.len()];
    let mut lz = vec![Vec::new(); LADDER.len()];
    let (mut within, mut total) = (0, 0);
    for k in 0..100u64 {
        let init = dyson_equilibrium(n, stream_seed(1001, 2 * k))?;
        let bp = BrownianPath::generate(n, 1, finest, (horizon / finest).round() as usize, stream_seed(1001, 2 * k + 1));
        for (r, &dt) in LADDER.iter().enumerate() {
            let traj = simulate_with_noise(&init, &spec, &SolverConfig::new(dt, horizon, 0), &bp)?;
            let a = ito_residual(&f, &traj, &bp, &spec)?;
            let b = lyons_zheng_residual(&f, &traj, &bp, &spec, horizon)?;
            within += (b <= 2.0 * a + 1e-12) as usize;
            total += 1;
            ito[r].push(a);
            lz[r].push(b);
        }
    }
    let ito_med: Vec<f64> = ito.iter().map(|v| median(v)).collect();
    let lz_med: Vec<f64> = lz.iter().map(|v| median(v)).collect();
    let ito_order = observed_order(&LADDER, &ito_med)?;
    let lz_order = observed_order(&LADDER, &lz_med)?;

    let free = InteractionSpec::free(1)?;
    let x1 = CylinderFunction::coordinate(0, 0);
    let (mut realized, mut predicted) = (Vec::new(), Vec::new());
    for k in 0..100u64 {
        let (traj, bp) = simulate(&LabeledState::from_reals(&[0.0]), &free, &SolverConfig::new(1e-3, 1.0, stream_seed(1002, k)))?;
        let qv = qv_check(&x1, &traj, &bp, &free)?;
        realized.push(qv.realized);
        predicted.push(qv.predicted);
    }
    let qv_gap = (mean(&realized) - mean(&predicted)).abs() / mean(&predicted);
    Ok((
        ito_order >= 0.4 && lz_order >= 0.4 && qv_gap < 0.01,
        format!(
            "ito order {ito_order:.3} [{}], lz order {lz_order:.3} [{}], qv gap {qv_gap:.4}, lz <= 2 ito on {within}/{total}",
            fmt_list(&ito_med),
            fmt_list(&lz_med)
        ),
    ))
}

fn c11_reversibility() -> Result<Verdict> {
    let horizon = 1.0;
    let stats = [CylinderFunction::gaussian_sum(1.0), CylinderFunction::gaussian_sum(3.0), CylinderFunction::mean_square()];
    let n = 8;
    let dyson = InteractionSpec::dyson_bulk(2.0, n)?;
    let dy = (0..200u64)
        .map(|k| {
            let init = dyson_equilibrium(n, stream_seed(1101, 2 * k))?;
            simulate(&init, &dyson, &SolverConfig::new(1e-3, horizon, stream_seed(1101, 2 * k + 1))).map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = 0.5;
    let skew = InteractionSpec::skew_poisson_default(4.0)?.with_confinement(c)?;
    let sd = (0.5 / c).sqrt();
    let sk = (0..200u64)
        .map(|k| {
            let mut rng = stream_rng(1102, 2 * k);
            let pts = (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..3).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
                    Point::new(&v)
                })
                .collect::<Result<Vec<_>>>()?;
            let init = label(&Configuration::new(3, pts)?)?;
            simulate(&init, &skew, &SolverConfig::new(1e-3, horizon, stream_seed(1102, 2 * k + 1))).map(|(t, _)| t)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pass = true;
    let mut dy_p = Vec::new();
    let mut sk_p = Vec::new();
    for g in &stats {
        let p = reversibility_test(&dy, half_time_increment(g), horizon)?;
        pass &= p > 0.01;
        dy_p.push(p);
        sk_p.push(reversibility_test(&sk, half_time_increment(g), horizon)?);
    }
    let dy_stat = stationarity_test(&dy, |cfg| cfg.count_open_ball(2.0) as f64)?;
    let sk_stat = stationarity_test(&sk, |cfg| cfg.count_open_ball(1.5) as f64)?;
    pass &= dy_stat > 0.01 && sk_stat > 0.01;
    Ok((
        pass,
        format!(
            "dyson reversibility p [{}], stationarity p {dy_stat:.3}; skew control reversibility p [{}] (reported), stationarity p {sk_stat:.3}",
            dy_p.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", "),
            sk_p.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn checksums(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let hex: String = Sha256::digest(fs::read(&p).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex)
        })
        .collect();
    out.sort();
    out
}

fn c12_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        "model.kind = dyson\nsampler.n = 8\nsampler.init = loggas\nsolver.dt = 0.005\nsolver.horizon = 0.1\nexperiment.ensemble = 50\nexperiment.m = 2\nexperiment.dt_ladder = 0.01, 0.005\nexperiment.refine = 2\nexperiment.bins = 6\nexperiment.max_separation = 3\n",
    )
    .expect("config written");
    let mut sums = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let dir = tmp.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_ifc"))
            .args(["all", "--config", cfg.to_str().unwrap(), "--seed", "9", "--workers", workers, "--out"])
            .arg(&dir)
            .env_remove("IFC_OUT_DIR")
            .output()
            .expect("binary runs");
        if !matches!(out.status.code(), Some(0) | Some(1)) {
            return (false, format!("run {name} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        sums.push(checksums(&dir));
    }
    let same = sums[0] == sums[1] && sums[0] == sums[2];
    (same, format!("{} artifacts, identical checksums across 3 runs: {same}", sums[0].len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, started: Instant, res: Result<Verdict>| {
        let secs = started.elapsed().as_secs_f64();
        let (pass, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += (!pass) as usize;
        println!("{} [{n:>2}] {name}: {detail} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
    };
    let t = Instant::now();
    report(1, "consistency", t, c1_consistency());
    let t = Instant::now();
    report(2, "pathwise uniqueness", t, c2_uniqueness());
    let t = Instant::now();
    match dyson_ensemble() {
        Ok(ens) => {
            report(3, "non-collision", t, Ok(c3_non_collision(&ens)));
            let t = Instant::now();
            report(4, "non-exit", t, c4_non_exit(&ens));
        }
        Err(e) => {
            report(3, "non-collision", t, Err(e.clone()));
            report(4, "non-exit", t, Err(e));
        }
    }
    let t = Instant::now();
    report(5, "cut-off functions", t, c5_cutoff());
    let t = Instant::now();
    report(6, "drift oracles", t, c6_drift_oracles());
    let t = Instant::now();
    report(7, "ginibre representations", t, c7_ginibre());
    let t = Instant::now();
    report(8, "H1 convergence", t, c8_h1());
    let t = Instant::now();
    report(9, "moment bound", t, c9_moment());
    let t = Instant::now();
    report(10, "lyons-zheng", t, c10_lyons_zheng());
    let t = Instant::now();
    report(11, "reversibility", t, c11_reversibility());
    let t = Instant::now();
    report(12, "reproducibility", t, Ok(c12_reproducibility()));
    println!("acceptance: {} of 12 passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
