use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use cvlab::frames::Ramp;
use cvlab::protocols::{
    couple_two, drive_single, gamma_pair, gamma_single, pair_cancellation, theta_linear, three_mode_controls,
    GammaMode, GammaSchedule, PairRates, PhaseRule, ResolvedSingle, ResolvedTwo, SingleModeProtocol,
    ThreeModeProtocol, TwoModeProtocol,
};
use proptest::prelude::*;

/// Composite Simpson rule, for oracles only.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn linear_ramp_values() {
    assert_eq!(theta_linear(0.0, 1.0), 0.0);
    assert!((theta_linear(1.5, 1.0) - 3.0 * FRAC_PI_4).abs() < 1e-15);
    assert!((theta_linear(2.25, 1.0) - 9.0 * PI / 8.0).abs() < 1e-15);
    assert!((theta_linear(3.0, 2.0) - 3.0 * FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn single_drive_examples() {
    let mut p = SingleModeProtocol::standard(1.5);
    p.phi = -FRAC_PI_2;
    p.theta = Ramp::linear(0.8);
    for t in [0.1, 0.5, 1.2] {
        let (big_omega, _) = drive_single(&p, 0.0, t).unwrap();
        assert!((big_omega - 0.4).abs() < 1e-15);
    }

    p.phi = FRAC_PI_2;
    for t in [0.0, 0.3, 1.4] {
        let (big_omega, omega) = drive_single(&p, 0.0, t).unwrap();
        assert!((big_omega + 0.4).abs() < 1e-15);
        assert_eq!(omega, 0.0);
    }

    // θ = 1 with θ̇ = π/2 at t = 2/π
    p.theta = Ramp::linear(FRAC_PI_2);
    let (big_omega, omega) = drive_single(&p, 0.3, 2.0 / PI).unwrap();
    let want = -(FRAC_PI_2 + 0.3 * 1f64.sinh() * 1f64.cosh()) / 2.0;
    assert!((big_omega - want).abs() < 1e-14);
    assert_eq!(omega, 0.0);
}

#[test]
fn drive_phase_guards() {
    let mut p = SingleModeProtocol::standard(1.5);
    p.phi = 0.0;
    assert!(drive_single(&p, 0.0, 0.5).is_err());
    assert!(ResolvedSingle::new(p).is_err());

    // cos(φ+α) ≠ 0 at θ = 0 makes the coth term singular
    let mut p = SingleModeProtocol::standard(1.5);
    p.phi = 1.0;
    assert!(drive_single(&p, 0.0, 0.0).is_err());
    assert!(drive_single(&p, 0.0, 0.5).is_ok());
}

#[test]
fn solved_schedule_cancels_and_flips_sign() {
    for tau in [1.5, 2.25] {
        let r = ResolvedSingle::new(SingleModeProtocol::standard(tau)).unwrap();
        let GammaSchedule::TwoStage { switch, before, after } = r.gamma.clone() else {
            panic!("solved mode gives a two-stage schedule");
        };
        assert_eq!(switch, 6.0 * tau / 7.0);
        assert_eq!(before, 0.5);
        assert!(after < 0.0);
        let f = r.global_phase(tau).unwrap();
        assert!(f.f_i.abs() <= 1e-10, "{:e}", f.f_i);
        assert!((f.modulus() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn solved_second_stage_follows_the_loss_weight() {
    // f_i' = γ sinh²θ / 2 for this frame, so the second-stage rate is
    // −γ₀ ∫₀^τ₁ sinh²θ / ∫_τ₁^τ sinh²θ.
    let tau = 1.5;
    let r = ResolvedSingle::new(SingleModeProtocol::standard(tau)).unwrap();
    let w = |t: f64| (FRAC_PI_2 * t).sinh().powi(2);
    let tau1 = 6.0 * tau / 7.0;
    let want = -0.5 * simpson(w, 0.0, tau1, 4000) / simpson(w, tau1, tau, 4000);
    let GammaSchedule::TwoStage { after, .. } = r.gamma else { unreachable!() };
    assert!((after - want).abs() < 1e-9, "{after} vs {want}");
    assert!((after + 0.4576).abs() < 5e-5);
}

#[test]
fn stage_floor_and_literal_mode() {
    let mut p = SingleModeProtocol::standard(1.5);
    p.tau1 = 1.5 * (1.0 - 0.005);
    assert!(gamma_single(&p, GammaMode::Solved).is_err());
    p.tau1 = 1.5;
    assert!(gamma_single(&p, GammaMode::Solved).is_err());

    let mut p = SingleModeProtocol::standard(1.5);
    p.lambda = 2.0;
    let g = gamma_single(&p, GammaMode::Literal).unwrap();
    assert!(matches!(g, GammaSchedule::Literal { .. }));
    assert!(g.value(0.5) > 0.0 && g.value(1.4) < 0.0);
}

#[test]
fn hermitian_limit_has_no_imaginary_phase() {
    for tau in [1.5, 2.25] {
        let p = SingleModeProtocol::standard(tau);
        let r = ResolvedSingle::with_gamma(p, GammaSchedule::Constant { value: 0.0 }).unwrap();
        for t in [0.3, 1.0, tau] {
            // quadrature roundoff only
            assert!(r.global_phase(t).unwrap().f_i.abs() <= 1e-13);
        }
    }
    let mut two = TwoModeProtocol::standard(1.5);
    two.lambda = 0.0;
    let r = ResolvedTwo::new(two).unwrap();
    assert_eq!((r.gamma1, r.gamma2), (0.0, 0.0));
    assert!(r.global_phase(1.5).unwrap().f_i.abs() <= 1e-13);
}

#[test]
fn two_mode_phase_closed_form() {
    let (g1, g2, tau) = (0.3, -0.1, 1.5);
    let mut p = TwoModeProtocol::standard(tau);
    p.rates = PairRates::Explicit { gamma1: g1, gamma2: g2 };
    let r = ResolvedTwo::new(p).unwrap();
    let thd = FRAC_PI_2;
    let u = (2.0 * thd * tau).sinh() / (2.0 * thd);
    let want = 0.5 * (g1 * (u - tau) / 2.0 + g2 * (u + tau) / 2.0);
    let got = r.global_phase(tau).unwrap().f_i;
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn paired_rates() {
    let theta = Ramp::linear(FRAC_PI_2);
    assert_eq!(gamma_pair(1.5, 0.0, &theta).unwrap(), (0.0, 0.0));

    let (g1, g2) = gamma_pair(1.5, 0.02, &theta).unwrap();
    let want1 = -0.02 * ((1.5 * PI).sinh() + 1.5 * PI);
    assert!((g1 - want1).abs() < 1e-14);
    assert!((g1 + 1.207).abs() < 5e-4);

    let ia = simpson(|t| (FRAC_PI_2 * t).sinh().powi(2), 0.0, 1.5, 20000);
    let ib = simpson(|t| (FRAC_PI_2 * t).cosh().powi(2), 0.0, 1.5, 20000);
    assert!((g1 * ia + g2 * ib).abs() < 1e-10);
    assert!(pair_cancellation(1.5, &theta, g1, g2).abs() <= 1e-12);

    let smooth = Ramp::CosineSmoothed {
        amplitude: 2.0,
        duration: 1.5,
    };
    assert!(gamma_pair(1.5, 0.02, &smooth).is_err());

    let mut p = TwoModeProtocol::standard(1.5);
    p.rates = PairRates::CaptionScaled { target: 0.5 };
    let r = ResolvedTwo::new(p).unwrap();
    assert!((r.gamma1.abs() - 0.5).abs() < 1e-15);
    assert!(pair_cancellation(1.5, &theta, r.gamma1, r.gamma2).abs() <= 1e-12);
}

#[test]
fn two_mode_coupling_examples() {
    let mut p = TwoModeProtocol::standard(1.5);
    p.phi = -FRAC_PI_2;
    p.theta = Ramp::linear(0.9);
    for t in [0.2, 0.8, 1.3] {
        let (g, _, _) = couple_two(&p, 0.0, 0.0, t).unwrap();
        assert!((g - 0.9).abs() < 1e-15);
    }

    let p = TwoModeProtocol::standard(1.5);
    let r = ResolvedTwo::new(p).unwrap();
    let mut g_max: f64 = 0.0;
    for k in 0..=300 {
        let c = r.controls(1.5 * k as f64 / 300.0).unwrap();
        assert!(c.g.is_finite());
        assert_eq!((c.omega1, c.omega2), (0.0, 0.0));
        g_max = g_max.max(c.g.abs());
    }
    let ratio = g_max / r.gamma1.abs();
    assert!((1.0..=10.0).contains(&ratio), "{ratio}");
}

#[test]
fn three_mode_examples() {
    let mut p = ThreeModeProtocol {
        tau: 1.0,
        theta1: Ramp::constant(0.0),
        theta2: Ramp::linear(0.6),
        alpha1: 0.3,
        phase_rule: PhaseRule::Standard,
    };
    let c = three_mode_controls(&p, 0.5);
    assert_eq!((c.g1, c.g2), (0.0, -0.6));
    assert_eq!(c.phi1, FRAC_PI_2);
    assert!((c.phi2 - (FRAC_PI_2 + 0.3)).abs() < 1e-15);
    assert_eq!(c.alpha2, 0.0);

    p.theta1 = Ramp::constant(1.0);
    let c = three_mode_controls(&p, 0.5);
    assert!((c.g1 - 0.6 * 1f64.sinh()).abs() < 1e-15);
    assert!((c.g2 + 0.6 * 1f64.cosh()).abs() < 1e-15);

    p.theta2 = Ramp::constant(0.4);
    let c = three_mode_controls(&p, 0.5);
    assert_eq!((c.g1, c.g2), (0.0, 0.0));
}

#[test]
fn schedule_export_columns() {
    let r = ResolvedSingle::new(SingleModeProtocol::standard(1.5)).unwrap();
    let mut buf = Vec::new();
    r.write_schedule_csv(&mut buf, &[0.0, 0.75, 1.5]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,theta,alpha,Omega,omega,gamma,f_r,f_i");
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last.len(), 8);
    assert!(last[7].abs() < 1e-10);
}

proptest! {
    #[test]
    fn classical_reduction_is_pointwise(slope in 0.05f64..3.0, offset in 0.0f64..1.0, t in 0.0f64..2.0) {
        let theta = Ramp::Linear { slope, offset };
        let mut single = SingleModeProtocol::standard(2.0);
        single.phi = -FRAC_PI_2;
        single.theta = theta.clone();
        let (big_omega, _) = drive_single(&single, 0.0, t).unwrap();
        prop_assert!((big_omega - slope / 2.0).abs() <= 1e-14 * slope);

        let mut two = TwoModeProtocol::standard(2.0);
        two.phi = -FRAC_PI_2;
        two.theta = theta;
        let (g, _, _) = couple_two(&two, 0.0, 0.0, t).unwrap();
        prop_assert!((g - slope).abs() <= 1e-14 * slope);
    }

    #[test]
    fn synthesized_controls_are_finite(
        tau in 0.5f64..2.5,
        frac in 0.3f64..0.95,
        gamma0 in 0.05f64..1.0,
        phi in 0.3f64..2.8,
        offset in 0.1f64..0.3,
    ) {
        let mut p = SingleModeProtocol::standard(tau);
        p.tau1 = frac * tau;
        p.gamma0 = gamma0;
        p.phi = phi;
        p.theta = Ramp::Linear { slope: FRAC_PI_2, offset };
        let r = ResolvedSingle::new(p.clone()).unwrap();
        for k in 0..=100 {
            let c = r.controls(tau * k as f64 / 100.0).unwrap();
            prop_assert!(c.big_omega.is_finite() && c.omega.is_finite() && c.gamma.is_finite());
        }
        // the loss-free part of f_i only vanishes for θ(0) = 0, φ + α = π/2
        p.phi = FRAC_PI_2;
        p.theta = Ramp::linear(FRAC_PI_2);
        let r = ResolvedSingle::new(p).unwrap();
        prop_assert!(r.global_phase(tau).unwrap().f_i.abs() <= 1e-8);
    }
}
