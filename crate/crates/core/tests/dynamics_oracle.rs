use std::sync::Arc;

use fockchaos::dynamics::{evolve, full_diagonalize, propagate, KrylovOptions};
use fockchaos::fock::{projected_coherent_state, FockBasis, StateVector};
use fockchaos::hamiltonian::{build_bose_hubbard, BoseHubbardParams, Geometry, SparseHamiltonian};
use fockchaos::scalar::Complex;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hamiltonian(l: usize, n: usize, u: f64, geometry: Geometry, phase: f64) -> SparseHamiltonian<f64> {
    let b = Arc::new(FockBasis::new(l, n).unwrap());
    let p = BoseHubbardParams::new(l, n, 1.0, u, geometry).with_phase(phase);
    build_bose_hubbard(&p, &b).unwrap()
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
    let v: Vec<Complex<f64>> = (0..dim).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

fn expm_oracle(h: &SparseHamiltonian<f64>, v: &[Complex<f64>], t: f64) -> Vec<Complex<f64>> {
    let n = h.dim();
    let dense = h.to_dense();
    let m = DMatrix::from_fn(n, n, |r, c| dense[(r, c)] * Complex::new(0.0, -t));
    let u = m.exp();
    let out = u * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

#[test]
fn krylov_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(l, n, u) in &[(3usize, 6usize, 0.5f64), (3, 10, 0.5), (4, 4, 2.0)] {
        let h = hamiltonian(l, n, u, Geometry::Open, 0.0);
        let v = random_state(h.dim(), &mut rng);
        let (ours, _) = propagate(&h, &v, 10.0, &KrylovOptions::new(1e-13)).unwrap();
        let reference = expm_oracle(&h, &v, 10.0);
        let err = ours.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "L={l} N={n}: {err}");
    }
}

#[test]
fn dense_propagator_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = hamiltonian(4, 3, 1.3, Geometry::Ring, 0.4);
    let spec = full_diagonalize(&h, 500).unwrap();
    let v = random_state(h.dim(), &mut rng);
    let ours = spec.propagate(&v, 4.0);
    let reference = expm_oracle(&h, &v, 4.0);
    let err = ours.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");
}

#[test]
fn full_diagonalization_residual_and_trace() {
    let b = Arc::new(FockBasis::new(3, 5).unwrap());
    let p = BoseHubbardParams::new(3, 5, 1.0, 0.9, Geometry::Ring).with_onsite(vec![0.3, -0.1, 0.2]).with_phase(0.25);
    let h = build_bose_hubbard(&p, &b).unwrap();
    let spec = full_diagonalize(&h, 500).unwrap();
    assert!(spec.max_residual(&h) <= 1e-10 * h.norm_bound());
    let tr: f64 = spec.values.iter().sum();
    assert!((tr - h.trace()).abs() <= 1e-8 * h.trace().abs().max(1.0));
    let dense = h.to_dense();
    let n = h.dim();
    let reference = DMatrix::from_fn(n, n, |r, c| dense[(r, c)]).symmetric_eigen();
    let mut rv: Vec<f64> = reference.eigenvalues.iter().copied().collect();
    rv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in spec.values.iter().zip(&rv) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn open_chain_spectrum_is_gauge_invariant() {
    let a = full_diagonalize(&hamiltonian(4, 3, 1.0, Geometry::Open, 0.0), 500).unwrap();
    let b = full_diagonalize(&hamiltonian(4, 3, 1.0, Geometry::Open, 0.7), 500).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-11);
    }
    let ring = full_diagonalize(&hamiltonian(4, 3, 1.0, Geometry::Ring, 0.7), 500).unwrap();
    assert!(a.values.iter().zip(&ring.values).any(|(x, y)| (x - y).abs() > 1e-6));
}

#[test]
fn forward_then_backward_returns_initial_state() {
    let h = hamiltonian(4, 8, 1.5, Geometry::Ring, 0.3);
    let b = h.basis().clone();
    let psi: Vec<Complex<f64>> = (0..4).map(|i| Complex::from_polar(1.0, 0.7 * i as f64)).collect();
    let v = projected_coherent_state(&psi, &b).unwrap();
    let opts = KrylovOptions::new(1e-12);
    let (fwd, _) = propagate(&h, v.amplitudes(), 25.0, &opts).unwrap();
    let (back, log) = propagate(&h, &fwd, -25.0, &opts).unwrap();
    assert!(log.step_sizes.iter().all(|&dt| dt < 0.0));
    let err = back.iter().zip(v.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-7, "{err}");
}

#[test]
fn evolve_preserves_norm_and_energy() {
    let h = hamiltonian(4, 10, 1.0, Geometry::Ring, 0.0);
    let b = h.basis().clone();
    let psi: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0), Complex::new(0.5, 0.5), Complex::new(0.0, 0.0), Complex::new(-0.3, 0.8)];
    let v: StateVector<f64> = projected_coherent_state(&psi, &b).unwrap();
    let grid: Vec<f64> = (1..=20).map(|k| 5.0 * k as f64).collect();
    let r = evolve(&h, &v, &grid, &KrylovOptions::new(1e-12)).unwrap();
    assert!(r.norm_drift <= 1e-8, "{}", r.norm_drift);
    assert!(r.energy_drift <= 1e-8, "{}", r.energy_drift);
    assert!(r.log.krylov_dims.iter().all(|&m| m <= 64));
}
