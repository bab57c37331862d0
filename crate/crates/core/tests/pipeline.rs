//! Cross-module checks: configuration to simulation to persisted files,
//! the m-particle re-solve against the full system, and a few properties
//! that must hold for arbitrary inputs.

use ifc_core::config::RunConfig;
use ifc_core::ifc::{consistency_error, freeze_env, solve_frozen};
use ifc_core::integrator::{simulate, simulate_with_noise, BrownianPath, SolverConfig};
use ifc_core::io::{read_brownian_csv, read_trajectory_csv, write_brownian_csv, write_trajectory_csv};
use ifc_core::report::{report_merge, Report, Stat};
use ifc_core::{label, unlabel, Configuration, InteractionSpec, LabeledState, TameSchedule};
use proptest::prelude::*;

#[test]
fn configured_run_survives_a_round_trip_through_csv() {
    let cfg = RunConfig::parse(
        "model.kind = dyson\nsampler.n = 6\nsampler.init = loggas\nsolver.dt = 0.002\nsolver.horizon = 0.1\nseed = 4\n",
    )
    .unwrap();
    let init = cfg.initial_state(1).unwrap();
    let (traj, bp) = simulate(&init, &cfg.spec().unwrap(), &cfg.solver(2)).unwrap();
    let back = read_trajectory_csv(&write_trajectory_csv(&traj, "dyson", 4)).unwrap();
    assert_eq!(back.states, traj.states);
    let bp_back = read_brownian_csv(&write_brownian_csv(&bp, 4)).unwrap();
    // the stored noise reproduces the stored path exactly
    let again = simulate_with_noise(&init, &cfg.spec().unwrap(), &cfg.solver(2), &bp_back).unwrap();
    assert_eq!(again.states, traj.states);
}

#[test]
fn full_tagging_reproduces_the_full_system() {
    let spec = InteractionSpec::dyson_bulk(2.0, 5).unwrap();
    let init = LabeledState::from_reals(&[-2.0, -0.9, 0.1, 1.2, 2.3]);
    let solver = SolverConfig::new(0.01, 0.5, 8);
    let (x, bp) = simulate(&init, &spec, &solver).unwrap();
    let (tagged, env) = freeze_env(&x, 5).unwrap();
    let y = solve_frozen(init.positions(), &env, &bp, &spec, &solver).unwrap();
    assert_eq!(consistency_error(&y, &tagged).unwrap(), 0.0);
}

#[test]
fn frozen_far_environment_leaves_free_motion() {
    let spec = InteractionSpec::ruelle_bump(1.0, 1).unwrap();
    let init = LabeledState::from_reals(&[0.0, 50.0]);
    let solver = SolverConfig::new(0.01, 0.2, 3);
    let (x, bp) = simulate(&init, &spec, &solver).unwrap();
    let (tagged, env) = freeze_env(&x, 1).unwrap();
    let y = solve_frozen(&init.positions()[..1], &env, &bp.restrict(1).unwrap(), &spec, &solver).unwrap();
    let free = simulate_with_noise(
        &LabeledState::from_reals(&[0.0]),
        &InteractionSpec::free(1).unwrap(),
        &solver,
        &bp.restrict(1).unwrap(),
    )
    .unwrap();
    assert_eq!(y.states, free.states);
    assert_eq!(consistency_error(&y, &tagged).unwrap(), 0.0);
}

#[test]
fn shared_noise_refinement_converges() {
    let spec = InteractionSpec::ginibre_rep2().unwrap();
    let init = LabeledState::new(2, vec![ifc_core::Point::d2(0.5, -0.2)]).unwrap();
    let bp = BrownianPath::generate(1, 2, 1e-3 / 16.0, 16_000, 12);
    let fine = simulate_with_noise(&init, &spec, &SolverConfig::new(1e-3, 1.0, 0), &bp).unwrap();
    let coarse = simulate_with_noise(&init, &spec, &SolverConfig::new(4e-3, 1.0, 0), &bp).unwrap();
    let gap = coarse.final_state().positions()[0].dist(&fine.final_state().positions()[0]);
    assert!(gap < 0.02, "{gap}");
}

#[test]
fn merged_reports_pool_statistics() {
    let mut a = Report::new();
    a.real("dt", 0.01);
    a.stat("err", Stat::from_values(&[1.0, 2.0]));
    let mut b = Report::new();
    b.real("dt", 0.01);
    b.stat("err", Stat::from_values(&[3.0]));
    let merged = Report::from_text(&report_merge(&[a, b]).unwrap().to_text()).unwrap();
    assert_eq!(merged.to_text(), report_merge(&[merged.clone()]).unwrap().to_text());
    assert!(merged.to_text().contains("err"));
}

proptest! {
    #[test]
    fn labeling_is_a_sorted_bijection(xs in prop::collection::vec(-100.0f64..100.0, 0..30)) {
        let cfg = Configuration::from_reals(&xs);
        prop_assume!(cfg.is_simple(0.0));
        let state = label(&cfg).unwrap();
        prop_assert!(state.positions().windows(2).all(|w| w[0].norm() <= w[1].norm()));
        let mut a = unlabel(&state).canonical();
        let mut b = cfg.canonical();
        a.sort_by(|p, q| p.lex_cmp(q));
        b.sort_by(|p, q| p.lex_cmp(q));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tame_membership_is_monotone_in_q(xs in prop::collection::vec(-6.0f64..6.0, 0..40), q in 1u32..6) {
        let cfg = Configuration::from_reals(&xs);
        let schedule = TameSchedule::density_default(1, 2.0);
        if schedule.contains(&cfg, q) {
            prop_assert!(schedule.contains(&cfg, q + 1));
        }
    }
}
