use std::f64::consts::{PI, TAU};

use cvlab::classical::{
    correspondence_defect, fast_forward, hamilton_jacobi_residual, integrate_hamilton, invariant_drift,
    invariant_u, poisson_bracket_defect, write_phase_space_csv, ClassicalDrive, ClassicalModel,
    ClassicalState, ScaleInvariant,
};
use cvlab::dynamics::TimeGrid;
use cvlab::frames::Ramp;
use num_complex::Complex64;
use proptest::prelude::*;

const OMEGA: f64 = 1.0;

fn periodic_theta(amplitude: f64) -> Ramp {
    Ramp::Sinusoidal {
        amplitude,
        period: TAU / OMEGA,
        phase: 0.0,
        offset: 0.0,
    }
}

fn ten_periods() -> TimeGrid {
    TimeGrid::new(0.0, 10.0 * TAU / OMEGA, 100_000).unwrap()
}

#[test]
fn free_oscillator_rotates() {
    let model = ClassicalModel::single(OMEGA, Ramp::constant(0.0));
    let a0 = Complex64::new(0.4, -0.7);
    let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
    let traj = integrate_hamilton(&model, &ClassicalState::new(vec![a0], 0.0), &grid).unwrap();
    for (t, a) in traj.times.iter().zip(&traj.states) {
        let want = a0 * Complex64::from_polar(1.0, -OMEGA * t);
        assert!((a[0] - want).norm() < 1e-12);
    }
}

#[test]
fn single_invariant_is_conserved() {
    let model = ClassicalModel::single(OMEGA, periodic_theta(1.2));
    let s0 = ClassicalState::new(vec![Complex64::new(0.8, 0.3)], 0.0);
    let traj = integrate_hamilton(&model, &s0, &ten_periods()).unwrap();
    let drift = invariant_drift(&model, &traj).unwrap();
    assert!(drift < 1e-8, "{drift:e}");
}

#[test]
fn double_invariant_is_conserved() {
    let model = ClassicalModel::double(OMEGA, periodic_theta(0.9));
    let s0 = ClassicalState::new(vec![Complex64::new(0.8, 0.3), Complex64::new(-0.1, 0.5)], 0.0);
    let traj = integrate_hamilton(&model, &s0, &ten_periods()).unwrap();
    let drift = invariant_drift(&model, &traj).unwrap();
    assert!(drift < 1e-8, "{drift:e}");
}

#[test]
fn violated_constraint_drifts() {
    let model = ClassicalModel::single(OMEGA, periodic_theta(1.2))
        .with_drive(ClassicalDrive::ThetaRate { factor: 1.0 });
    let s0 = ClassicalState::new(vec![Complex64::new(0.8, 0.3)], 0.0);
    let traj = integrate_hamilton(&model, &s0, &ten_periods()).unwrap();
    assert!(invariant_drift(&model, &traj).unwrap() > 1e-2);
    assert!(model.constraint_defect(&traj.times) > 0.1);
}

#[test]
fn squeezing_growth_follows_invariant_transport() {
    // u is constant, so b(t) = cosh θ u + sinh θ u* with θ(0) = 0 and b(0) = u
    let theta = Ramp::linear(PI / 2.0);
    let model = ClassicalModel::single(OMEGA, theta.clone());
    let a0 = Complex64::new(0.3, 0.6);
    let grid = TimeGrid::new(0.0, 1.5, 20_000).unwrap();
    let traj = integrate_hamilton(&model, &ClassicalState::new(vec![a0], 0.0), &grid).unwrap();
    let u = -a0;
    let t = 1.5;
    let th = theta.value(t);
    let b = th.cosh() * u + th.sinh() * u.conj();
    let want = -b * Complex64::from_polar(1.0, -OMEGA * t);
    let got = traj.states.last().unwrap()[0];
    assert!((got - want).norm() < 1e-9 * want.norm(), "{got} vs {want}");
    assert!(got.norm() > 3.0 * a0.norm());
}

#[test]
fn double_growth_is_symmetric_in_seed_swap() {
    let model = ClassicalModel::double(OMEGA, Ramp::linear(0.8));
    let grid = TimeGrid::new(0.0, 2.0, 20_000).unwrap();
    let (x, y) = (Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.2));
    let ab = integrate_hamilton(&model, &ClassicalState::new(vec![x, y], 0.0), &grid).unwrap();
    let ba = integrate_hamilton(&model, &ClassicalState::new(vec![y, x], 0.0), &grid).unwrap();
    let (l, r) = (ab.states.last().unwrap(), ba.states.last().unwrap());
    assert!((l[0] - r[1]).norm() < 1e-10 && (l[1] - r[0]).norm() < 1e-10);
    assert!(l[0].norm() > x.norm() && l[1].norm() > y.norm());
}

#[test]
fn theta_zero_invariant_is_rotated_amplitude() {
    let model = ClassicalModel::single(OMEGA, Ramp::constant(0.0));
    let s = ClassicalState::new(vec![Complex64::new(0.2, 0.1)], 0.7);
    let u = invariant_u(&model, &s)[0];
    assert!((u + s.a[0] * Complex64::from_polar(1.0, 0.7)).norm() < 1e-15);
}

#[test]
fn brackets_are_canonical_along_trajectories() {
    for model in [
        ClassicalModel::single(OMEGA, periodic_theta(1.2)),
        ClassicalModel::double(OMEGA, periodic_theta(0.9)),
    ] {
        let s0 = ClassicalState::new(vec![Complex64::new(0.3, -0.2); model.modes()], 0.0);
        let grid = TimeGrid::new(0.0, TAU, 2000).unwrap();
        let traj = integrate_hamilton(&model, &s0, &grid).unwrap();
        for k in (0..=2000).step_by(250) {
            let s = ClassicalState::new(traj.states[k].clone(), traj.times[k]);
            let d = poisson_bracket_defect(&model, &s);
            assert!(d < 1e-8, "{:?} t = {}: {d:e}", model.kind, s.t);
        }
    }
}

fn trap() -> ScaleInvariant {
    ScaleInvariant {
        m: 1.3,
        beta: Ramp::Sinusoidal {
            amplitude: 0.7,
            period: 3.0,
            phase: 0.4,
            offset: 0.1,
        },
        eta: Ramp::Polynomial {
            coeffs: vec![1.0, 0.3, -0.05, 0.01],
        },
    }
}

#[test]
fn static_trap_has_no_potential() {
    let ff = ScaleInvariant {
        m: 1.0,
        beta: Ramp::constant(0.0),
        eta: Ramp::constant(1.0),
    };
    let r = fast_forward(&ff, 0.8, 1.1).unwrap();
    assert_eq!((r.f2, r.potential, r.v), (0.0, 0.0, 0.0));
}

#[test]
fn pure_transport_is_rigid() {
    let ff = ScaleInvariant {
        m: 2.0,
        beta: Ramp::Polynomial {
            coeffs: vec![0.0, 0.5, 0.3],
        },
        eta: Ramp::constant(1.0),
    };
    for q in [-1.0, 0.0, 2.5] {
        let r = fast_forward(&ff, q, 0.8).unwrap();
        assert!((r.v - (0.5 + 0.6 * 0.8)).abs() < 1e-14);
        assert!((r.acc - 0.6).abs() < 1e-14);
        let beta = 0.5 * 0.8 + 0.3 * 0.64;
        assert!((r.potential + 2.0 * 0.6 * (q - beta)).abs() < 1e-13);
    }
}

#[test]
fn time_derivative_matches_finite_difference() {
    let ff = trap();
    let h = 1e-5;
    for (q, t) in [(0.3, 0.5), (-1.2, 1.7), (2.0, 2.9)] {
        let fd = (fast_forward(&ff, q, t + h).unwrap().f2 - fast_forward(&ff, q, t - h).unwrap().f2) / (2.0 * h);
        let r = fast_forward(&ff, q, t).unwrap();
        assert!((fd - r.f2_t).abs() < 1e-7, "{fd} vs {}", r.f2_t);
        let du = (fast_forward(&ff, q + h, t).unwrap().potential - fast_forward(&ff, q - h, t).unwrap().potential)
            / (2.0 * h);
        assert!((du + ff.m * r.acc).abs() < 1e-7);
    }
}

#[test]
fn non_positive_width_is_rejected() {
    let ff = ScaleInvariant {
        m: 1.0,
        beta: Ramp::constant(0.0),
        eta: Ramp::linear(-1.0),
    };
    assert!(fast_forward(&ff, 0.0, 1.0).is_err());
}

#[test]
fn quantum_rules_reduce_to_classical_constraints() {
    let times: Vec<f64> = (0..=200).map(|k| 1.5 * k as f64 / 200.0).collect();
    for theta in [Ramp::linear(PI / 2.0), periodic_theta(0.7)] {
        let (d1, d2) = correspondence_defect(&theta, &times).unwrap();
        assert!(d1 < 1e-14 && d2 < 1e-14, "{d1:e} {d2:e}");
    }
}

#[test]
fn phase_space_csv_layout() {
    let model = ClassicalModel::single(OMEGA, Ramp::linear(0.3));
    let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
    let traj = integrate_hamilton(&model, &ClassicalState::new(vec![Complex64::new(1.0, 0.0)], 0.0), &grid).unwrap();
    let mut buf = Vec::new();
    write_phase_space_csv(&model, &traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,re_a_1,im_a_1,re_u_1,im_u_1,drift,lambda,chi");
    assert_eq!(lines.count(), 11);
}

proptest! {
    #[test]
    fn hamilton_jacobi_holds_pointwise(q in -3.0f64..3.0, t in 0.0f64..3.0) {
        let r = hamilton_jacobi_residual(&trap(), q, t).unwrap();
        prop_assert!(r.abs() <= 1e-10, "{}", r);
    }

    #[test]
    fn random_seeds_keep_invariant(re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let model = ClassicalModel::single(OMEGA, periodic_theta(0.8));
        prop_assume!(re.abs() + im.abs() > 1e-2);
        let s0 = ClassicalState::new(vec![Complex64::new(re, im)], 0.0);
        let grid = TimeGrid::new(0.0, TAU, 10_000).unwrap();
        let traj = integrate_hamilton(&model, &s0, &grid).unwrap();
        prop_assert!(invariant_drift(&model, &traj).unwrap() < 1e-8);
    }
}
