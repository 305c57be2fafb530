use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scatterlab::classifier::*;
use scatterlab::dynamics::*;
use scatterlab::integrator::{integrate_until, IntegratorConfig};
use scatterlab::kepler::{elements_to_cartesian, OrbitalElements};
use scatterlab::setup::*;
use scatterlab::vec3::Vec3;

const M: f64 = 15.0;
const YEAR: f64 = std::f64::consts::TAU;

/// Equal-mass pair (bodies 1, 2) with relative state `rel`, single with
/// relative state `outer` from the pair's center of mass.
fn place(rel: (Vec3<f64>, Vec3<f64>), outer: (Vec3<f64>, Vec3<f64>), time: f64) -> ThreeBodyState<f64> {
    let b1 = BodyState::new(M, rel.0 * -0.5, rel.1 * -0.5);
    let b2 = BodyState::new(M, rel.0 * 0.5, rel.1 * 0.5);
    let b3 = BodyState::new(M, outer.0, outer.1);
    let mut s = ThreeBodyState::from_raw([b1, b2, b3], time);
    s.recenter();
    s
}

fn circular_pair(a: f64) -> (Vec3<f64>, Vec3<f64>) {
    let v = (2.0 * M / a).sqrt();
    (Vec3::new(a, 0.0, 0.0), Vec3::new(0.0, v, 0.0))
}

fn single_at_rest(r: f64) -> ThreeBodyState<f64> {
    place(circular_pair(5.0), (Vec3::new(0.0, 0.0, r), Vec3::zero()), 0.0)
}

fn triangle(sides: [f64; 3]) -> ThreeBodyState<f64> {
    // r12 = c, r13 = b, r23 = a
    let [c, b, a] = sides;
    let x = (b * b + c * c - a * a) / (2.0 * c);
    let y = (b * b - x * x).max(0.0).sqrt();
    let bodies = [
        BodyState::new(1.0, Vec3::zero(), Vec3::zero()),
        BodyState::new(1.0, Vec3::new(c, 0.0, 0.0), Vec3::zero()),
        BodyState::new(1.0, Vec3::new(x, y, 0.0), Vec3::zero()),
    ];
    ThreeBodyState::from_raw(bodies, 0.0)
}

#[test]
fn tidal_factor_examples() {
    let f = tidal_factor(&single_at_rest(10.0), PairId::P12).unwrap();
    assert!((f - 0.5).abs() < 1e-12, "{f}");
    let r1 = 5.0 * 4f64.powf(1.0 / 3.0);
    let f = tidal_factor(&single_at_rest(r1), PairId::P12).unwrap();
    assert!((f - 1.0).abs() < 1e-12, "{f}");
    let far = tidal_factor(&single_at_rest(1e5), PairId::P12).unwrap();
    assert!(far < 1e-11);
}

#[test]
fn snapshot_tidal_factor_matches_direct() {
    let s = single_at_rest(37.0);
    let snap = HierarchySnapshot::of(&s).unwrap();
    assert_eq!(snap.pairing(), PairId::P12);
    let direct = tidal_factor(&s, PairId::P12).unwrap();
    assert!((snap.f_tid - direct).abs() < 1e-12 * direct);
    assert!(snap.single_bound);
    assert!((snap.semi_major_axis.unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn homology_radius_examples() {
    let eq = homology_radius(&triangle([2.0, 2.0, 2.0])).unwrap();
    assert!((eq - 1.0).abs() < 1e-12);
    let iso = homology_radius(&triangle([1.0, 2.0, 2.0])).unwrap();
    assert!((iso - 1.0 / 3.0).abs() < 1e-12);
    let mut prev = 1.0;
    for r in [10.0, 100.0, 1000.0] {
        let h = homology_radius(&single_at_rest(r)).unwrap();
        assert!(h < prev);
        prev = h;
    }
    assert!(prev < 1e-4);
}

fn count(seq: &[f64]) -> u32 {
    seq.iter()
        .fold(DemocracyCounter::new(0.33), |c, r| update_democracy(c, *r))
        .count
}

#[test]
fn democracy_counting_examples() {
    assert_eq!(count(&[0.1, 0.5, 0.1]), 1);
    assert_eq!(count(&[0.1, 0.5, 0.4, 0.5, 0.1]), 1);
    assert_eq!(count(&[0.1, 0.5, 0.1, 0.5, 0.1]), 2);
    assert_eq!(count(&[0.1, 0.2, 0.3]), 0);
    assert_eq!(count(&[0.5, 0.6]), 0);
}

#[test]
fn democracy_count_survives_refinement() {
    let coarse = [0.1, 0.5, 0.2, 0.6, 0.1];
    let mut fine = Vec::new();
    for w in coarse.windows(2) {
        for k in 0..10 {
            fine.push(w[0] + (w[1] - w[0]) * k as f64 / 10.0);
        }
    }
    fine.push(*coarse.last().unwrap());
    assert_eq!(count(&coarse), count(&fine));
}

/// Snapshot stream of a quiet binary whose tidal factor follows `f`.
fn stream(times: &[f64], f: impl Fn(f64) -> f64) -> Vec<HierarchySnapshot<f64>> {
    let base = HierarchySnapshot::of(&single_at_rest(30.0)).unwrap();
    times
        .iter()
        .map(|&t| HierarchySnapshot {
            time: t,
            f_tid: f(t),
            ..base
        })
        .collect()
}

#[test]
fn excursion_detector_examples() {
    let p = HierarchySnapshot::of(&single_at_rest(30.0)).unwrap().binary_period().unwrap();
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1 * p).collect();

    assert!(detect_excursion(&stream(&times, |_| 2.0)).is_none());

    let long = detect_excursion(&stream(&times, |t| if t > p && t < 11.0 * p { 0.5 } else { 2.0 })).unwrap();
    assert!(long.accepted);
    assert!((long.end_time - long.start_time - 10.0 * p).abs() < 0.2 * p);
    assert!((long.median_binary_period - p).abs() < 1e-9 * p);

    let short = detect_excursion(&stream(&times, |t| if t > p && t < 1.5 * p { 0.5 } else { 2.0 })).unwrap();
    assert!(!short.accepted);
}

#[test]
fn excursion_needs_a_bound_single() {
    let p = HierarchySnapshot::of(&single_at_rest(30.0)).unwrap().binary_period().unwrap();
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1 * p).collect();
    let unbound: Vec<_> = stream(&times, |_| 0.5)
        .into_iter()
        .map(|s| HierarchySnapshot { single_bound: false, ..s })
        .collect();
    assert!(detect_excursion(&unbound).is_none());
}

/// Single receding on a hyperbola from a circular a = 5 pair; snapshots from
/// the analytic two-body solution.
fn hyperbolic_escape(radii: &[f64]) -> Vec<HierarchySnapshot<f64>> {
    let outer_mass = 3.0 * M;
    let e = 1.5;
    let spec = 0.2;
    let a_h = outer_mass / (2.0 * spec);
    radii
        .iter()
        .map(|&r| {
            let h = ((r / a_h + 1.0) / e).acosh();
            let mean = e * h.sinh() - h;
            let el = OrbitalElements::hyperbolic(spec, e, 0.4, 0.3, 1.1, mean, outer_mass);
            let outer = elements_to_cartesian(&el).unwrap();
            HierarchySnapshot::of(&place(circular_pair(5.0), outer, r)).unwrap()
        })
        .collect()
}

#[test]
fn breakup_fires_on_receding_hyperbola() {
    let cfg = ClassifierConfig::default();
    let snaps = hyperbolic_escape(&[500.0, 510.0, 520.0, 530.0]);
    let ev = detect_final_breakup(&snaps, &cfg).expect("breakup");
    assert_eq!(ev.decomposition.pairing, PairId::P12);
    assert_eq!(ev.time, 520.0);
    assert!(ev.decomposition.eps_f > 0.0);
}

#[test]
fn breakup_needs_consecutive_receding_snapshots() {
    let cfg = ClassifierConfig::default();
    let mut snaps = hyperbolic_escape(&[500.0, 510.0, 520.0, 530.0]);
    snaps[1].radial_velocity = -1.0;
    assert!(detect_final_breakup(&snaps[..3], &cfg).is_none());
    assert!(detect_final_breakup(&snaps, &cfg).is_none());
}

#[test]
fn breakup_never_fires_for_bound_single() {
    let cfg = ClassifierConfig::default();
    let snaps: Vec<_> = (0..100)
        .map(|i| {
            let r = 200.0 + 10.0 * i as f64;
            let outer = (Vec3::new(r, 0.0, 0.0), Vec3::new(0.01, 0.0, 0.0));
            HierarchySnapshot::of(&place(circular_pair(5.0), outer, i as f64)).unwrap()
        })
        .collect();
    assert!(snaps.iter().all(|s| s.single_bound && s.radial_velocity > 0.0));
    assert!(detect_final_breakup(&snaps, &cfg).is_none());
}

#[test]
fn binary_charges_frozen_after_breakup() {
    let cfg = ClassifierConfig::default();
    let icfg = IntegratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ic = build_outcome_ic(&OutcomeConfig::default(), &mut rng).unwrap();
    let mut det = BreakupDetector::new(cfg);
    let mut fired: Option<HierarchySnapshot<f64>> = None;
    let out = integrate_until(&ic, &icfg, &mut [], |_, snap| match fired {
        None => {
            if det.update(snap).is_some() {
                fired = Some(*snap);
            }
            false
        }
        Some(f) => snap.separation >= 10.0 * f.separation,
    })
    .unwrap();
    let f = fired.expect("run ends in an escape");
    let end = HierarchySnapshot::of(&out.final_state).unwrap();
    assert_eq!(end.pairing(), f.pairing());
    let de = (end.decomposition.eps_b - f.decomposition.eps_b).abs() / f.decomposition.eps_b.abs();
    let dl = (end.decomposition.l_b - f.decomposition.l_b).norm() / f.decomposition.l_b.norm();
    assert!(de < 1e-3, "{de}");
    assert!(dl < 1e-3, "{dl}");
}

fn escape_verdict(lifetime: f64, nd: u32) -> TrajectoryVerdict<f64> {
    TrajectoryVerdict {
        kind: VerdictKind::Escape,
        reason: StopReason::Escape,
        escaper: Some(PairId::P12),
        eps_b: -100.0,
        l_b: Vec3::new(0.0, 0.0, 50.0),
        eps_f: 73.0,
        l_f: Vec3::new(0.0, 0.0, 41.0),
        lifetime,
        democratic_count: nd,
        excursion_count: 0,
        energy_drift: 0.0,
        angular_momentum_drift: 0.0,
        steps: 1,
    }
}

#[test]
fn chaotic_cut_examples() {
    let cut = 50.0 * YEAR;
    assert!(!classify_chaotic_escape(&escape_verdict(10.0 * YEAR, 6), cut, 4).unwrap());
    assert!(!classify_chaotic_escape(&escape_verdict(200.0 * YEAR, 3), cut, 4).unwrap());
    assert!(classify_chaotic_escape(&escape_verdict(200.0 * YEAR, 4), cut, 4).unwrap());
    let mut absorbed = escape_verdict(200.0 * YEAR, 6);
    absorbed.kind = VerdictKind::Absorbed;
    assert!(classify_chaotic_escape(&absorbed, cut, 4).is_err());
}

#[test]
fn absorption_verdicts_are_total_and_consistent() {
    let icfg = IntegratorConfig::default();
    let ccfg = ClassifierConfig::default();
    let cfg = AbsorptivityConfig::reference(-60.0, BinaryAngularMomentum::Magnitude(40.0));
    let mut kinds = std::collections::BTreeSet::new();
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ic = build_absorptivity_ic(&cfg, &mut rng).unwrap();
        let v = classify_absorption(&ic, &icfg, &ccfg).unwrap();
        match v.kind {
            VerdictKind::Absorbed => assert!(v.democratic_count >= ccfg.min_democratic),
            VerdictKind::RegularEjection => assert!(v.democratic_count < ccfg.min_democratic),
            VerdictKind::Undecided => assert!(matches!(
                v.reason,
                StopReason::MaxTime | StopReason::MaxSteps | StopReason::ConservationAlarm | StopReason::StepUnderflow
            )),
            VerdictKind::Escape => panic!("absorption runs never report escapes"),
        }
        if v.kind != VerdictKind::Undecided {
            assert!(matches!(v.reason, StopReason::Excursion | StopReason::Escape));
        }
        kinds.insert(v.kind);
    }
    assert!(kinds.contains(&VerdictKind::Absorbed));
    assert!(kinds.contains(&VerdictKind::RegularEjection));
}

#[test]
fn verdict_names_round_trip() {
    for k in [VerdictKind::Absorbed, VerdictKind::RegularEjection, VerdictKind::Escape, VerdictKind::Undecided] {
        assert_eq!(VerdictKind::parse(k.as_str()), Some(k));
    }
}
