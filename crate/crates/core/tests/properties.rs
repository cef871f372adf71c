use std::f64::consts::PI;

use proptest::prelude::*;
use worklab::csvio;
use worklab::hermite::hermite_function;
use worklab::openmaps::{
    ancilla_charfn, ancilla_state, apply_channel, diagonal_polarization, displacement,
    kraus_from_environment, open_charfn, oscillator_hamiltonian, CMatrix, DensityMatrix,
    JointUnitary, KrausChannel, TruncatedOperator,
};
use worklab::optics::{fresnel_backpropagate, fresnel_propagate, frft_spectral_with};
use worklab::thermo::thermal_weights;
use worklab::transition::build_matrix;
use worklab::workstats::{charfn_from_dist, workdist_from_trace, WorkDist};
use worklab::{coeff_closed, Complex64, GridSpec, HgBasis};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn free_evolution(dim: usize, s: f64) -> TruncatedOperator {
    TruncatedOperator::new(CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -s * (i as f64 + 0.5))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn hermite_parity(n in 0usize..120, x in -12.0f64..12.0) {
        let a = hermite_function(n, x);
        let b = hermite_function(n, -x);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(a, sign * b);
    }

    #[test]
    fn amplitude_symmetry_and_phase(m in 0usize..60, n in 0usize..60, q in -4.0f64..4.0) {
        let a = coeff_closed(m, n, q);
        let b = coeff_closed(n, m, q);
        prop_assert!((a.norm() - b.norm()).abs() < 1e-12);
        // c(m, n, -q) = conj of c(m, n, q) up to the parity (-1)^k
        let k = m.abs_diff(n);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let r = coeff_closed(m, n, -q);
        prop_assert!((r - a * sign).norm() < 1e-12);
        prop_assert!((r - a.conj()).norm() < 1e-12);
    }

    #[test]
    fn columns_are_normalized(q in 0.0f64..5.0, n in 0usize..80) {
        let t = build_matrix(q, n, 1e-11).unwrap();
        prop_assert!(t.max_unitarity_defect() < 1e-10);
    }

    #[test]
    fn thermal_weights_are_a_distribution(beta in 0.05f64..5.0) {
        let ens = thermal_weights(beta, 1e-8).unwrap();
        let w = ens.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn fourier_round_trip(probs in prop::collection::vec(0.0f64..1.0, 1..40), d_min in -30i64..5, extra in 0usize..10) {
        let total: f64 = probs.iter().sum();
        prop_assume!(total > 1e-3);
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let dist = WorkDist::new(d_min, probs.clone());
        let trace = charfn_from_dist(&dist, probs.len() + extra);
        prop_assert_eq!(trace.hermitian_defect().unwrap(), 0.0);
        let back = workdist_from_trace(&trace).unwrap();
        prop_assert!(back.max_distance(&dist) < 1e-12);
    }

    #[test]
    fn csv_format_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(csvio::fmt(v).parse::<f64>().unwrap(), v);
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn spectral_frft_composes(a in 0.0f64..PI, b in 0.0f64..PI, c0 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
        let basis = HgBasis::new(GridSpec::new(512, 12.0).unwrap(), 16).unwrap();
        let field = basis.synthesize(&[Complex64::new(c0, 0.3), Complex64::new(0.0, 0.0), Complex64::new(c2, -0.2)]);
        let ab = frft_spectral_with(&basis, &frft_spectral_with(&basis, &field, a).unwrap(), b).unwrap();
        let direct = frft_spectral_with(&basis, &field, a + b).unwrap();
        prop_assert!(ab.sub(&direct).unwrap().norm() < 1e-10);
        prop_assert!((ab.norm() - field.norm()).abs() < 1e-10);
    }

    #[test]
    fn free_space_is_unitary(z in 0.0f64..2.0, shift in -2.0f64..2.0) {
        let g = GridSpec::new(512, 16.0).unwrap();
        let basis = HgBasis::new(g, 2).unwrap();
        let field = basis.synthesize(&[Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]);
        let tilted = worklab::SampledField::phase_mask(g, |x| shift * x).multiplied(&field).unwrap();
        let out = fresnel_propagate(&tilted, z).unwrap();
        prop_assert!((out.norm_sqr() - tilted.norm_sqr()).abs() < 1e-12);
        let back = fresnel_backpropagate(&out, z).unwrap();
        prop_assert!(back.sub(&tilted).unwrap().norm() < 1e-12);
    }

    #[test]
    fn mixtures_preserve_trace(w in 0.0f64..1.0, q in -2.0f64..2.0, beta in 0.3f64..3.0) {
        let dim = 24;
        let ch = KrausChannel::mixture(vec![
            (w, displacement(q, dim)),
            (1.0 - w, TruncatedOperator::identity(dim)),
        ]).unwrap();
        let rho = DensityMatrix::thermal(beta, dim).unwrap();
        let out = apply_channel(&ch, &rho).unwrap();
        prop_assert!((out.trace() - 1.0).norm() < 1e-9);
        prop_assert!(out.eigenvalues().iter().all(|l| *l > -1e-10));
    }

    #[test]
    fn kraus_basis_invariance(theta in 0.0f64..PI, phase in 0.0f64..(2.0 * PI), q in -2.0f64..2.0) {
        let dim = 16;
        let joint = JointUnitary::polarization_controlled(displacement(q, dim));
        let xi = diagonal_polarization();
        let (c, s) = (theta.cos(), theta.sin());
        let e = Complex64::from_polar(1.0, phase);
        let basis_a = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        let basis_b = vec![vec![Complex64::new(c, 0.0), e * s], vec![Complex64::new(-s, 0.0), e * c]];
        let a = kraus_from_environment(&joint, &xi, &basis_a).unwrap();
        let b = kraus_from_environment(&joint, &xi, &basis_b).unwrap();
        let rho = DensityMatrix::thermal(0.7, dim).unwrap();
        prop_assert!(apply_channel(&a, &rho).unwrap().distance(&apply_channel(&b, &rho).unwrap()) < 1e-10);
        let h = oscillator_hamiltonian(dim);
        let s0 = Complex64::new(0.9, 0.0);
        let ga = open_charfn(&a, &rho, s0, &h, &h).unwrap();
        let gb = open_charfn(&b, &rho, s0, &h, &h).unwrap();
        prop_assert!((ga - gb).norm() < 1e-10);
    }

    #[test]
    fn ancilla_is_a_state(q in -2.0f64..2.0, s in 0.0f64..(2.0 * PI), beta in 0.3f64..3.0) {
        let dim = 12;
        let joint = JointUnitary::polarization_controlled(displacement(q, dim));
        let v = free_evolution(dim, s);
        let vp = free_evolution(dim, 0.5 * s);
        let rho = DensityMatrix::thermal(beta, dim).unwrap();
        let a = ancilla_state(&joint, &v, &vp, &rho, &diagonal_polarization()).unwrap();
        prop_assert!((a.trace() - 1.0).norm() < 1e-12);
        let herm = a - a.adjoint();
        prop_assert!(herm.iter().all(|z| z.norm() < 1e-12));
        let tr = a.trace().re;
        let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        prop_assert!(tr / 2.0 - disc > -1e-12 && tr / 2.0 + disc < 1.0 + 1e-12);
    }

    #[test]
    fn ancilla_eigenstate_interference(n in 0usize..6, s in 0.0f64..(2.0 * PI), q in -1.5f64..1.5) {
        let dim = 40;
        let u = displacement(q, dim);
        let joint = JointUnitary::uncoupled(u);
        let v = free_evolution(dim, s);
        let rho = DensityMatrix::eigenstate(n, dim).unwrap();
        let a = ancilla_state(&joint, &v, &v, &rho, &diagonal_polarization()).unwrap();
        let expect: Complex64 = (0..dim - 20)
            .map(|m| Complex64::from_polar(coeff_closed(m, n, q).norm_sqr(), s * (m as f64 - n as f64)))
            .sum();
        prop_assert!((ancilla_charfn(&a) - expect).norm() < 1e-8);
    }
}
