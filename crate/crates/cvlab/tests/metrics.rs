use std::f64::consts::PI;

use cvlab::fockspace::{self, FockSpace, StateVector};
use cvlab::metrics::{
    fidelity, squeezed_quadrature, squeezing_from_r, squeezing_level, squeezing_level_truncated, MetricSeries,
};
use num_complex::Complex64;
use proptest::prelude::*;

/// ⟨2n|S(r)|0⟩ = (−tanh r)^n √((2n)!)/(2^n n!)/√cosh r, summed directly.
fn single_overlap_fock_sum(r: f64, dim: usize) -> Vec<f64> {
    let mut amps = vec![0.0; dim];
    let mut c = 1.0 / r.cosh().sqrt();
    for n in 0..dim / 2 {
        if 2 * n < dim {
            amps[2 * n] = c;
        }
        c *= -r.tanh() * (((2 * n + 1) * (2 * n + 2)) as f64).sqrt() / (2.0 * (n + 1) as f64);
    }
    amps
}

#[test]
fn vacuum_overlap_with_single_squeezed() {
    let s = FockSpace::single(200).unwrap();
    for r in [0.1, 0.5, 1.0] {
        let sq = fockspace::squeezed_vacuum(&s, &[0], r, 0.0).unwrap();
        let f = fidelity(&StateVector::vacuum(&s), &sq, false).unwrap();
        assert!((f - 1.0 / r.cosh()).abs() < 1e-10, "r = {r}");
        let brute = single_overlap_fock_sum(r, 200);
        // the truncated exponential departs from the ideal state near the edge
        for (n, b) in brute.iter().enumerate().take(40) {
            assert!((sq.amplitudes()[n].re - b).abs() < 1e-10 && sq.amplitudes()[n].im.abs() < 1e-12);
        }
    }
}

#[test]
fn vacuum_overlap_with_two_mode_squeezed() {
    let s = FockSpace::new(&[40, 40]).unwrap();
    for r in [0.2, 0.7] {
        let sq = fockspace::squeezed_vacuum(&s, &[0, 1], r, 0.0).unwrap();
        let f = fidelity(&StateVector::vacuum(&s), &sq, false).unwrap();
        assert!((f - 1.0 / r.cosh().powi(2)).abs() < 1e-10);
    }
}

#[test]
fn self_fidelity_and_raw_convention() {
    let s = FockSpace::single(20).unwrap();
    let t = fockspace::squeezed_vacuum(&s, &[0], 0.3, 0.4).unwrap();
    assert!((fidelity(&t, &t, false).unwrap() - 1.0).abs() < 1e-12);
    let half = t.scaled(Complex64::new(0.5, 0.0));
    assert!((fidelity(&half, &t, false).unwrap() - 0.25).abs() < 1e-12);
    assert!((fidelity(&half, &t, true).unwrap() - 1.0).abs() < 1e-12);
    assert!(fidelity(&StateVector::zeros(&s), &t, true).is_err());
    assert!(fidelity(&t, &half, false).is_err());
}

#[test]
fn ideal_single_mode_level() {
    let r = 3.0 * PI / 4.0;
    let s = FockSpace::single(1400).unwrap();
    let psi = fockspace::squeezed_vacuum(&s, &[0], r, 0.0).unwrap();
    let x = squeezed_quadrature(&s, &[0], 0.0).unwrap();
    let db = squeezing_level(&psi, &x).unwrap();
    assert!((db - squeezing_from_r(r)).abs() < 1e-3, "{db}");
    assert!((db - 20.47).abs() < 0.01);
}

#[test]
fn ideal_two_mode_level() {
    let r = 0.9;
    let s = FockSpace::new(&[60, 60]).unwrap();
    for alpha in [0.0, 0.8] {
        let psi = fockspace::squeezed_vacuum(&s, &[0, 1], r, alpha).unwrap();
        let x = squeezed_quadrature(&s, &[0, 1], alpha).unwrap();
        let db = squeezing_level(&psi, &x).unwrap();
        assert!((db - squeezing_from_r(r)).abs() < 1e-6, "alpha = {alpha}: {db}");
    }
}

#[test]
fn rotated_single_mode_quadrature() {
    let s = FockSpace::single(120).unwrap();
    let psi = fockspace::squeezed_vacuum(&s, &[0], 0.8, 1.3).unwrap();
    let aligned = squeezing_level(&psi, &squeezed_quadrature(&s, &[0], 1.3).unwrap()).unwrap();
    let wrong = squeezing_level(&psi, &squeezed_quadrature(&s, &[0], 0.0).unwrap()).unwrap();
    assert!((aligned - squeezing_from_r(0.8)).abs() < 1e-8);
    assert!(wrong < aligned - 1.0);
}

#[test]
fn series_csv_has_one_row_per_sample() {
    let s = FockSpace::single(10).unwrap();
    let vac = StateVector::vacuum(&s);
    let x = squeezed_quadrature(&s, &[0], 0.0).unwrap();
    let m = MetricSeries::from_states([(0.0, &vac), (1.0, &vac)], &vac, &x).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,fidelity,fidelity_normalized,squeezing_db,squeezing_db_truncated,norm,mean_n_1");
    assert_eq!(lines.len(), 3);
    let cells: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells.len(), 7);
    assert_eq!(cells[0], 1.0);
    assert!(cells[3].abs() < 1e-12);
}

#[test]
fn truncated_state_never_beats_the_ideal() {
    let r = 7.0 * PI / 8.0;
    let s = FockSpace::single(100).unwrap();
    let (psi, _) = fockspace::squeezed_vacuum_projected(&s, &[0], r, 0.0).unwrap();
    let x = squeezed_quadrature(&s, &[0], 0.0).unwrap();
    let db = squeezing_level(&psi, &x).unwrap();
    assert!(db < squeezing_from_r(r), "{db}");

    // two modes on the |n,n⟩ diagonal of 100⊗100: ⟨X²⟩ ≥ 0.0071930735, 18.4206 dB
    let s2 = FockSpace::new(&[100, 100]).unwrap();
    let (psi2, _) = fockspace::squeezed_vacuum_projected(&s2, &[0, 1], r, 0.0).unwrap();
    let x2 = squeezed_quadrature(&s2, &[0, 1], 0.0).unwrap();
    let db2 = squeezing_level(&psi2, &x2).unwrap();
    assert!(db2 <= 18.4206, "{db2}");
    // the truncated operator product alone reads above the ideal 23.88 dB
    let db2_truncated = squeezing_level_truncated(&psi2, &x2).unwrap();
    assert!(db2_truncated > squeezing_from_r(r), "{db2_truncated}");
}

/// Copies the amplitudes into a space with one more level per mode.
fn embed(psi: &StateVector) -> StateVector {
    let s = psi.space();
    let dims: Vec<usize> = (0..s.modes()).map(|k| s.dim(k) + 1).collect();
    let big = FockSpace::new(&dims).unwrap();
    let mut amps = vec![Complex64::new(0.0, 0.0); big.total_dim()];
    for (i, z) in psi.amplitudes().iter().enumerate() {
        amps[big.flat_index(&s.occupations(i)).unwrap()] = *z;
    }
    StateVector::new(&big, amps).unwrap()
}

fn random_state(space: &FockSpace, parts: &[(f64, f64)]) -> StateVector {
    let amps = parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    StateVector::new(space, amps).unwrap()
}

proptest! {
    #[test]
    fn normalized_fidelity_is_bounded(parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
        let s = FockSpace::single(12).unwrap();
        let psi = random_state(&s, &parts);
        prop_assume!(psi.norm() > 1e-3);
        let target = fockspace::squeezed_vacuum(&s, &[0], 0.2, 0.0).unwrap().normalized().unwrap();
        let f = fidelity(&psi, &target, true).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn squeezing_ignores_global_phase(parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12), phase in 0.0f64..6.3) {
        let s = FockSpace::single(12).unwrap();
        let psi = random_state(&s, &parts);
        prop_assume!(psi.norm() > 1e-3);
        let x = squeezed_quadrature(&s, &[0], 0.0).unwrap();
        let a = squeezing_level(&psi, &x).unwrap();
        let b = squeezing_level(&psi.scaled(Complex64::from_polar(1.0, phase)), &x).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn variance_matches_the_enlarged_space(
        parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20),
        alpha in -3.0f64..3.0,
        two in any::<bool>(),
    ) {
        let (s, modes): (_, &[usize]) = if two {
            (FockSpace::new(&[4, 5]).unwrap(), &[0, 1])
        } else {
            (FockSpace::single(20).unwrap(), &[0])
        };
        let psi = random_state(&s, &parts);
        prop_assume!(psi.norm() > 1e-3);
        let big = embed(&psi);
        // the top level of the enlarged space is empty, so its truncated X is exact on ψ
        let want = fockspace::variance(
            squeezed_quadrature(big.space(), modes, alpha).unwrap().operator(),
            &big,
        )
        .unwrap();
        let got = squeezed_quadrature(&s, modes, alpha).unwrap().variance(&psi).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", got, want);
    }
}
