use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scatterlab::classifier::HierarchySnapshot;
use scatterlab::dynamics::*;
use scatterlab::integrator::*;
use scatterlab::setup::{build_outcome_ic, OutcomeConfig};
use scatterlab::vec3::Vec3;

fn cfg() -> IntegratorConfig<f64> {
    IntegratorConfig::default()
}

/// Circular binary (15, 15, a = 5) in the x-y plane and a negligible third
/// mass far away.
fn isolated_binary() -> ThreeBodyState<f64> {
    let v = (30.0f64 / 5.0).sqrt() / 2.0;
    ThreeBodyState::new(
        [
            BodyState::new(15.0, Vec3::new(-2.5, 0.0, 0.0), Vec3::new(0.0, -v, 0.0)),
            BodyState::new(15.0, Vec3::new(2.5, 0.0, 0.0), Vec3::new(0.0, v, 0.0)),
            BodyState::new(1e-12, Vec3::new(0.0, 0.0, 1e7), Vec3::zero()),
        ],
        0.0,
    )
    .unwrap()
}

/// Burrau's problem: masses 3, 4, 5 at rest on a 3-4-5 triangle.
fn pythagorean() -> ThreeBodyState<f64> {
    ThreeBodyState::new(
        [
            BodyState::new(3.0, Vec3::new(1.0, 3.0, 0.0), Vec3::zero()),
            BodyState::new(4.0, Vec3::new(-2.0, -1.0, 0.0), Vec3::zero()),
            BodyState::new(5.0, Vec3::new(1.0, -1.0, 0.0), Vec3::zero()),
        ],
        0.0,
    )
    .unwrap()
}

fn max_position_error(a: &ThreeBodyState<f64>, b: &ThreeBodyState<f64>) -> f64 {
    (0..3)
        .map(|i| (a.bodies[i].position - b.bodies[i].position).norm())
        .fold(0.0, f64::max)
}

#[test]
fn circular_orbit_closes_after_one_period() {
    let s0 = isolated_binary();
    let period = 2.0 * PI * (125.0f64 / 30.0).sqrt();
    for transform in [true, false] {
        let mut it = Integrator::new(&s0, IntegratorConfig { time_transform: transform, ..cfg() }).unwrap();
        it.advance_to(period).unwrap();
        let s = it.state();
        assert!((s.time - period).abs() < 1e-12 * period);
        for i in 0..2 {
            let err = (s.bodies[i].position - s0.bodies[i].position).norm() / 2.5;
            assert!(err < 1e-8, "transform {transform}: relative error {err}");
        }
    }
}

#[test]
fn reversed_trajectory_retraces() {
    let s0 = pythagorean();
    // ten crossing times of the initial configuration
    let t_end = 10.0 * (125.0f64 / 12.0).sqrt();
    let mut fwd = Integrator::new(&s0, cfg()).unwrap();
    fwd.advance_to(t_end).unwrap();
    let mut back_start = fwd.state().reversed();
    back_start.time = 0.0;
    let mut bwd = Integrator::new(&back_start, cfg()).unwrap();
    bwd.advance_to(t_end).unwrap();
    let end = bwd.state();
    let err = max_position_error(&end, &s0);
    assert!(err < 1e-6, "retrace error {err}");
}

#[test]
fn equilateral_free_fall_stays_equilateral() {
    let r = 10.0;
    let bodies = [0, 1, 2].map(|k| {
        let a = 2.0 * PI * k as f64 / 3.0;
        BodyState::new(15.0, Vec3::new(r * a.cos(), r * a.sin(), 0.0), Vec3::zero())
    });
    let s0 = ThreeBodyState::new(bodies, 0.0).unwrap();
    let mut it = Integrator::new(&s0, cfg()).unwrap();
    let mut checked = 0;
    while it.time() < 5.0 {
        it.step().unwrap();
        let d = it.state().separations();
        let mean = (d[0] + d[1] + d[2]) / 3.0;
        for x in d {
            assert!((x - mean).abs() < 1e-9 * mean, "separations {d:?}");
        }
        checked += 1;
    }
    assert!(checked > 0);
    assert!(it.state().separations()[0] < r * 3f64.sqrt());
}

#[test]
fn terminator_true_returns_input() {
    let s0 = pythagorean();
    let out = integrate_until(&s0, &cfg(), &mut [], |_, _| true).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(out.reason, Termination::Terminator);
    assert!(max_position_error(&out.final_state, &s0) < 1e-12);
}

#[test]
fn monitors_see_every_accepted_state() {
    let s0 = pythagorean();
    let mut seen = 0u64;
    let mut last_time = -1.0;
    let mut monitor = |s: &ThreeBodyState<f64>, snap: &HierarchySnapshot<f64>| {
        assert!(s.time > last_time);
        assert_eq!(snap.time, s.time);
        last_time = s.time;
        seen += 1;
    };
    let mut stop_after = 0;
    let out = integrate_until(&s0, &cfg(), &mut [&mut monitor], |_, _| {
        stop_after += 1;
        stop_after > 50
    })
    .unwrap();
    assert_eq!(out.steps, 50);
    assert_eq!(seen, 51);
}

#[test]
fn caps_end_the_run() {
    let s0 = pythagorean();
    let out = integrate_until(&s0, &IntegratorConfig { max_steps: 20, ..cfg() }, &mut [], |_, _| false).unwrap();
    assert_eq!(out.reason, Termination::MaxSteps);
    assert_eq!(out.steps, 20);
    let out = integrate_until(&s0, &IntegratorConfig { max_time: 3.0, ..cfg() }, &mut [], |_, _| false).unwrap();
    assert_eq!(out.reason, Termination::MaxTime);
    assert!(out.final_state.time >= 3.0);
}

#[test]
fn outcome_runs_conserve_charges() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = build_outcome_ic(&OutcomeConfig::default(), &mut rng).unwrap();
        let out = integrate_until(&s0, &IntegratorConfig { max_time: 2000.0, ..cfg() }, &mut [], |_, _| false).unwrap();
        assert_eq!(out.reason, Termination::MaxTime);
        assert!(out.energy_drift < 1e-6, "seed {seed}: dE {}", out.energy_drift);
        assert!(out.angular_momentum_drift < 1e-6);
        let e0 = total_energy(&s0).unwrap();
        let e = total_energy(&out.final_state).unwrap();
        assert!(((e - e0) / e0).abs() < 1e-6);
    }
}

#[test]
fn error_decreases_with_tolerance() {
    let s0 = pythagorean();
    let t_end = 10.0;
    let run = |rtol: f64| {
        let mut it = Integrator::new(&s0, IntegratorConfig { relative_tolerance: rtol, ..cfg() }).unwrap();
        it.advance_to(t_end).unwrap();
        it.state()
    };
    let reference = run(1e-14);
    let errors: Vec<f64> = [1e-6, 0.5e-6, 0.25e-6, 0.125e-6]
        .iter()
        .map(|&r| max_position_error(&run(r), &reference))
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "errors {errors:?}");
    }
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s0 = build_outcome_ic(&OutcomeConfig::default(), &mut rng).unwrap();
    let run = || {
        let mut it = Integrator::new(&s0, cfg()).unwrap();
        it.advance_to(500.0).unwrap();
        it.state()
    };
    let (a, b) = (run(), run());
    for i in 0..3 {
        assert_eq!(a.bodies[i].position, b.bodies[i].position);
        assert_eq!(a.bodies[i].velocity, b.bodies[i].velocity);
    }
}

#[test]
fn single_step_respects_tolerance_contract() {
    let s0 = isolated_binary();
    let s1 = advance_step(&s0, &cfg()).unwrap();
    assert!(s1.time > 0.0);
    let e0 = total_energy(&s0).unwrap();
    let e1 = total_energy(&s1).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-10);
}

#[test]
fn config_validation() {
    assert!(cfg().validate().is_ok());
    assert!(IntegratorConfig { relative_tolerance: 1e-5, ..cfg() }.validate().is_err());
    assert!(IntegratorConfig { relative_tolerance: 0.0, ..cfg() }.validate().is_err());
    assert!(IntegratorConfig { conservation_alarm: 1e-13, ..cfg() }.validate().is_err());
    assert!(IntegratorConfig::<f32> { relative_tolerance: 1e-6, conservation_alarm: 1e-3, ..Default::default() }
        .validate()
        .is_ok());
}

#[test]
fn single_precision_orbit_runs() {
    let s0: ThreeBodyState<f32> = isolated_binary().cast();
    let c = IntegratorConfig::<f32> { relative_tolerance: 1e-6, conservation_alarm: 1e-3, ..Default::default() };
    let mut it = Integrator::new(&s0, c).unwrap();
    it.advance_to(10.0).unwrap();
    assert!(it.energy_drift() < 1e-3);
}
