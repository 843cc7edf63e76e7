use std::sync::Arc;

use fockchaos::fock::{apply_ladder, projected_coherent_state, quadrature_overlap, sector_dimension, FockBasis, Ladder, QuadraturePoint, StateVector};
use fockchaos::scalar::Complex;
use proptest::prelude::*;

fn random_state(basis: &Arc<FockBasis>, seed: &[(f64, f64)]) -> StateVector<f64> {
    let amp = (0..basis.dim()).map(|k| {
        let (a, b) = seed[k % seed.len()];
        Complex::new(a + 0.01 * k as f64, b - 0.02 * (k % 7) as f64)
    });
    StateVector::from_amplitudes(basis.clone(), amp.collect()).unwrap()
}

/// Brute-force enumeration of all vectors in `{0..=N}^L`, filtered by sum.
fn exhaustive(l: usize, n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; l];
    loop {
        if cur.iter().sum::<u32>() as usize == n {
            out.push(cur.clone());
        }
        // odometer with the last site fastest, which is lexicographic order
        let mut i = l;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if (cur[i] as usize) < n {
                cur[i] += 1;
                for x in cur[i + 1..].iter_mut() {
                    *x = 0;
                }
                break;
            }
        }
    }
}

#[test]
fn large_sector_dimension_matches_exhaustive_count() {
    let b = FockBasis::new(4, 40).unwrap();
    assert_eq!(b.dim(), 12341);
    assert_eq!(exhaustive(4, 40).len(), 12341);
}

#[test]
fn enumeration_order_matches_brute_force() {
    for &(l, n) in &[(1usize, 4usize), (2, 5), (3, 4), (4, 3), (5, 2)] {
        let b = FockBasis::new(l, n).unwrap();
        let ours: Vec<Vec<u32>> = b.states().map(|s| s.to_vec()).collect();
        assert_eq!(ours, exhaustive(l, n));
    }
}

#[test]
fn hermite_functions_are_orthonormal() {
    // trapezoid rule is spectrally accurate for these rapidly decaying functions
    let h = 0.02;
    let grid: Vec<f64> = (-1200..=1200).map(|k| k as f64 * h).collect();
    let table: Vec<Vec<f64>> = (0..=20).map(|n| grid.iter().map(|&q| quadrature_overlap(q, n)).collect()).collect();
    for n in 0..=20 {
        for m in 0..=n {
            let s: f64 = table[n].iter().zip(&table[m]).map(|(a, b)| a * b).sum::<f64>() * h;
            let want = if n == m { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-10, "n={n} m={m}: {s}");
        }
    }
}

#[test]
fn coherent_state_occupations_approach_classical_weights() {
    let psi = [Complex::new(0.8, 0.1), Complex::new(-0.2, 0.5)];
    let w: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut errors = Vec::new();
    for &n in &[4usize, 16, 64] {
        let b = Arc::new(FockBasis::new(2, n).unwrap());
        let v = projected_coherent_state(&psi, &b).unwrap();
        let occ = v.occupations();
        let err = (0..2).map(|i| (occ[i] / n as f64 - psi[i].norm_sqr() / w).abs()).fold(0.0, f64::max);
        errors.push(err);
    }
    for pair in errors.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-13, "{errors:?}");
    }
    assert!(errors.iter().all(|&e| e < 1e-12), "{errors:?}");
}

proptest! {
    #[test]
    fn index_is_inverse_of_enumeration(l in 1usize..6, n in 0usize..9) {
        let b = FockBasis::new(l, n).unwrap();
        prop_assert_eq!(b.dim() as u128, sector_dimension(l, n).unwrap());
        for (k, s) in b.states().enumerate() {
            prop_assert_eq!(s.iter().sum::<u32>() as usize, n);
            prop_assert_eq!(b.index(s), Some(k));
        }
    }

    #[test]
    fn canonical_commutators(l in 1usize..5, n in 1usize..6, i in 0usize..5, j in 0usize..5,
                              seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let (i, j) = (i % l, j % l);
        let lo = Arc::new(FockBasis::new(l, n - 1).unwrap());
        let mid = Arc::new(FockBasis::new(l, n).unwrap());
        let hi = Arc::new(FockBasis::new(l, n + 1).unwrap());
        let v = random_state(&mid, &seed);
        let up = apply_ladder(Ladder::Create, j, &v, &hi).unwrap();
        let a = apply_ladder(Ladder::Annihilate, i, &up, &mid).unwrap();
        let down = apply_ladder(Ladder::Annihilate, i, &v, &lo).unwrap();
        let b = apply_ladder(Ladder::Create, j, &down, &mid).unwrap();
        let scale = v.norm();
        for k in 0..mid.dim() {
            let lhs = a.amplitudes()[k] - b.amplitudes()[k];
            let rhs = if i == j { v.amplitudes()[k] } else { Complex::new(0.0, 0.0) };
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale * (n as f64 + 1.0));
        }
    }

    #[test]
    fn number_operator_sums_to_particle_number(l in 1usize..5, n in 0usize..7,
                                              seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let b = Arc::new(FockBasis::new(l, n).unwrap());
        let v = random_state(&b, &seed);
        let mut total = 0.0;
        for i in 0..l {
            let w = apply_ladder(Ladder::Number, i, &v, &b).unwrap();
            total += v.inner(&w).unwrap().re;
        }
        let nn = v.norm() * v.norm();
        prop_assert!((total - n as f64 * nn).abs() <= 1e-12 * (n as f64 * nn).max(1.0));
        // n_i acts diagonally with eigenvalue n_i on Fock states
        let k = b.dim() / 2;
        let e = StateVector::<f64>::basis_state(b.clone(), k);
        for i in 0..l {
            let w = apply_ladder(Ladder::Number, i, &e, &b).unwrap();
            prop_assert_eq!(w.amplitudes()[k].re, b.state(k)[i] as f64);
        }
    }

    #[test]
    fn coherent_state_is_normalized(l in 1usize..5, n in 0usize..12,
                                    psi in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 4)) {
        let field: Vec<Complex<f64>> = psi[..l].iter().map(|&(a, b)| Complex::new(a, b)).collect();
        prop_assume!(field.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6);
        let b = Arc::new(FockBasis::new(l, n).unwrap());
        let v = projected_coherent_state(&field, &b).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn quadrature_round_trip_is_identity(psi in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..6)) {
        let field: Vec<Complex<f64>> = psi.iter().map(|&(a, b)| Complex::new(a, b)).collect();
        let qp = QuadraturePoint::from_field(&field);
        let back = qp.to_field();
        let again = QuadraturePoint::from_field(&back);
        for (a, b) in field.iter().zip(&back) {
            prop_assert!((a - b).norm() <= 4.0 * f64::EPSILON * a.norm().max(1.0));
        }
        for (a, b) in qp.q.iter().zip(&again.q) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
        }
    }
}
