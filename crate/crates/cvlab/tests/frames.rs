use cvlab::fockspace::{lower, raise, BosonOperator, FockSpace, StateVector};
use cvlab::frames::{
    ancillary_operator, canonical_defect, frame_matrix, interior_commutator_defect, interior_difference,
    rotation_unitary, Ramp, SymplecticFrame,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn combo(terms: &[(Complex64, &BosonOperator)]) -> BosonOperator {
    let mut out = BosonOperator::zero(terms[0].1.space());
    for (w, op) in terms {
        out = out.add_scaled(op, *w).unwrap();
    }
    out
}

#[test]
fn zero_angle_gives_identity_and_bare_modes() {
    let frames = [
        SymplecticFrame::single(Ramp::constant(0.0), Ramp::constant(0.7)),
        SymplecticFrame::two(Ramp::constant(0.0), Ramp::linear(0.3)),
        SymplecticFrame::chain(vec![Ramp::constant(0.0); 2], vec![Ramp::constant(1.1); 2]).unwrap(),
    ];
    for f in &frames {
        let m = frame_matrix(f, 0.4);
        let n = m.entries.nrows();
        assert_eq!(max_entry(&(&m.entries - DMatrix::identity(n, n))), 0.0);
    }
    let s = FockSpace::new(&[4, 5]).unwrap();
    for k in 0..2 {
        let mu = ancillary_operator(&frames[1], 0.4, &s, k).unwrap();
        assert_eq!(mu.matrix().to_dense(), lower(&s, k).unwrap().matrix().to_dense());
    }
}

#[test]
fn two_mode_dagger_matrix_elements() {
    let f = SymplecticFrame::two(Ramp::constant(1.0), Ramp::constant(0.0));
    let s = FockSpace::new(&[6, 6]).unwrap();
    let mu2_dag = ancillary_operator(&f, 0.0, &s, 1).unwrap().adjoint();
    let vac = s.flat_index(&[0, 0]).unwrap();
    assert!((mu2_dag.matrix().get(s.flat_index(&[0, 1]).unwrap(), vac) - 1f64.cosh()).norm() < 1e-15);
    assert!((mu2_dag.matrix().get(vac, s.flat_index(&[1, 0]).unwrap()) + 1f64.sinh()).norm() < 1e-15);
}

#[test]
fn three_mode_recipe_matches_explicit_operators() {
    let (th1, th2, al1, al2) = (0.7, -0.4, 0.9, 0.3);
    let f = SymplecticFrame::chain(
        vec![Ramp::constant(th1), Ramp::constant(th2)],
        vec![Ramp::constant(al1), Ramp::constant(al2)],
    )
    .unwrap();
    let s = FockSpace::new(&[4, 4, 4]).unwrap();
    let a: Vec<_> = (0..3).map(|k| lower(&s, k).unwrap()).collect();
    let ad: Vec<_> = (0..3).map(|k| raise(&s, k).unwrap()).collect();
    let e = |x: f64| Complex64::from_polar(1.0, x);
    let ch = |x: f64| Complex64::new(x.cosh(), 0.0);
    let sh = |x: f64| Complex64::new(x.sinh(), 0.0);

    let mu1 = combo(&[(ch(th1), &a[0]), (-sh(th1) * e(-al1), &ad[1])]);
    let b1 = combo(&[(-sh(th1) * e(-al1), &ad[0]), (ch(th1), &a[1])]);
    let mu2 = combo(&[(ch(th2), &b1), (-sh(th2) * e(-al2), &ad[2])]);
    let mu3_dag = combo(&[(-sh(th2) * e(al2), &b1), (ch(th2), &ad[2])]);

    let got: Vec<_> = (0..3).map(|k| ancillary_operator(&f, 0.0, &s, k).unwrap()).collect();
    let diff = |x: &BosonOperator, y: &BosonOperator| max_entry(&(x.matrix().to_dense() - y.matrix().to_dense()));
    assert!(diff(&got[0], &mu1) < 1e-14);
    assert!(diff(&got[1], &mu2) < 1e-14);
    assert!(diff(&got[2].adjoint(), &mu3_dag) < 1e-14);
    assert!(ancillary_operator(&f, 0.0, &s, 3).is_err());
}

#[test]
fn interior_commutators_of_a_chain() {
    let f = SymplecticFrame::chain(
        vec![Ramp::linear(0.4), Ramp::constant(-0.3)],
        vec![Ramp::constant(0.2), Ramp::linear(0.5)],
    )
    .unwrap();
    let s = FockSpace::new(&[9, 9, 9]).unwrap();
    let t = 0.8;
    let mu: Vec<_> = (0..3).map(|k| ancillary_operator(&f, t, &s, k).unwrap()).collect();
    for j in 0..3 {
        for k in 0..3 {
            let want = if j == k { ONE } else { Complex64::new(0.0, 0.0) };
            let d = interior_commutator_defect(&mu[j], &mu[k].adjoint(), want, 2).unwrap();
            assert!(d <= 1e-10, "[mu_{j}, mu_{k}^dag]: {d:e}");
            let d = interior_commutator_defect(&mu[j], &mu[k], Complex64::new(0.0, 0.0), 2).unwrap();
            assert!(d <= 1e-10, "[mu_{j}, mu_{k}]: {d:e}");
        }
    }
    // [μ_j, b_k] = 0 for the bright operators
    let b1 = f.bright_dagger_form(t, 1).unwrap().adjoint().to_operator(&s, &[0, 1, 2]).unwrap();
    let d = interior_commutator_defect(&mu[0], &b1, Complex64::new(0.0, 0.0), 2).unwrap();
    assert!(d <= 1e-10);
}

#[test]
fn rotation_unitary_edge_cases() {
    let s = FockSpace::single(40).unwrap();
    let f = SymplecticFrame::single(Ramp::linear(0.5), Ramp::constant(0.3));
    let v0 = rotation_unitary(&f, 0.0, &s).unwrap();
    let id = DMatrix::<Complex64>::identity(40, 40);
    assert!(max_entry(&(v0.matrix().to_dense() - &id)) < 1e-14);

    // θ(0) = 0: V(t) = S†(θ(t) e^{−iα}) = exp(−G)
    let v = rotation_unitary(&f, 0.8, &s).unwrap();
    let xi = Complex64::from_polar(0.4, -0.3);
    let g = cvlab::fockspace::squeeze_generator(&s, &[0], -xi).unwrap();
    let psi = StateVector::basis(&s, &[3]).unwrap();
    let want = cvlab::fockspace::apply_exponential(&g, &psi).unwrap();
    let got = v.apply(&psi).unwrap();
    let d = got.amplitudes().iter().zip(want.amplitudes()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    assert!(d < 1e-12, "{d:e}");
}

#[test]
fn rotation_unitary_maps_back_to_the_initial_frame() {
    // occupations up to 30 spread to n ≈ 100 under θ = 0.5, so 160 levels
    let f = SymplecticFrame::single(Ramp::linear(0.5), Ramp::constant(0.0));
    let s = FockSpace::single(160).unwrap();
    let v = rotation_unitary(&f, 1.0, &s).unwrap();
    let mu_t = ancillary_operator(&f, 1.0, &s, 0).unwrap();
    let mu_0 = ancillary_operator(&f, 0.0, &s, 0).unwrap();
    let back = v.adjoint().mul(&mu_t).unwrap().mul(&v).unwrap();
    let d = interior_difference(&back, &mu_0, 130).unwrap();
    assert!(d <= 1e-6, "{d:e}");
}

#[test]
fn rotation_unitary_phase_convention() {
    // With α ≠ 0 the product of squeezers conjugates the frame with the
    // opposite phase; the frame built on −α is the one it maps back.
    let s = FockSpace::single(160).unwrap();
    let frame = |alpha: f64| SymplecticFrame::single(Ramp::linear(0.5), Ramp::constant(alpha));
    let mu_t = ancillary_operator(&frame(0.4), 1.0, &s, 0).unwrap();
    let mu_0 = ancillary_operator(&frame(0.4), 0.0, &s, 0).unwrap();
    let residual = |v: &BosonOperator| {
        let back = v.adjoint().mul(&mu_t).unwrap().mul(v).unwrap();
        interior_difference(&back, &mu_0, 130).unwrap()
    };
    let direct = rotation_unitary(&frame(0.4), 1.0, &s).unwrap();
    let flipped = rotation_unitary(&frame(-0.4), 1.0, &s).unwrap();
    assert!(residual(&direct) > 1e-2);
    assert!(residual(&flipped) <= 1e-6, "{:e}", residual(&flipped));
}

fn ramp() -> impl Strategy<Value = Ramp> {
    prop_oneof![
        (-1.5f64..1.5).prop_map(Ramp::constant),
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(slope, offset)| Ramp::Linear { slope, offset }),
        (-1.5f64..1.5, 0.5f64..3.0, -3.0f64..3.0).prop_map(|(amplitude, period, phase)| Ramp::Sinusoidal {
            amplitude,
            period,
            phase,
            offset: 0.0,
        }),
        (-1.5f64..1.5, 0.2f64..2.0).prop_map(|(amplitude, duration)| Ramp::CosineSmoothed { amplitude, duration }),
    ]
}

proptest! {
    #[test]
    fn frames_are_symplectic(
        th in proptest::collection::vec(ramp(), 3),
        al in proptest::collection::vec(ramp(), 3),
        t in 0.0f64..2.0,
    ) {
        let single = SymplecticFrame::single(th[0].clone(), al[0].clone());
        let m = frame_matrix(&single, t);
        let det = m.entries[(0, 0)] * m.entries[(1, 1)] - m.entries[(0, 1)] * m.entries[(1, 0)];
        prop_assert!((det - ONE).norm() < 1e-10 * th[0].value(t).cosh().powi(2));

        let frames = [
            single,
            SymplecticFrame::two(th[1].clone(), al[1].clone()),
            SymplecticFrame::chain(th.clone(), al.clone()).unwrap(),
        ];
        for f in &frames {
            // the defect scales with the entries, cosh²θ ≤ e^{2·Σ|θ|}
            let scale: f64 = (0..f.stages()).map(|k| (2.0 * f.theta(k).value(t).abs()).exp()).product();
            prop_assert!(frame_matrix(f, t).symplectic_defect() <= 1e-12 * scale);
            prop_assert!(canonical_defect(f, t) <= 1e-12 * scale);
        }
    }
}
