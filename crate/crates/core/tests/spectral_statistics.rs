use fockchaos::spectral::{
    action_spectrum, form_factor, mean_spacing_ratio, rmt_form_factor, spacing_statistics, unfold, unfold_with,
    ActionSpectrumOptions, SpectralWindow, Symmetry, UnfoldOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

fn poisson_levels(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let s: f64 = Exp1.sample(rng);
            x += s;
            x
        })
        .collect()
}

/// Eigenvalues of a GOE matrix, computed with an independent solver.
fn goe_levels(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for r in 0..dim {
        let d: f64 = StandardNormal.sample(rng);
        m[(r, r)] = d * 2f64.sqrt();
        for c in 0..r {
            let x: f64 = StandardNormal.sample(rng);
            m[(r, c)] = x;
            m[(c, r)] = x;
        }
    }
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

fn tau_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn poisson_unfolded_mean_spacing() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let levels = poisson_levels(10_000, &mut rng);
    let u = unfold(&levels, 9).unwrap();
    let mean = u.spacings().iter().sum::<f64>() / (u.levels.len() - 1) as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn poisson_ratio_and_form_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let levels = poisson_levels(100_000, &mut rng);
    let s: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let r = mean_spacing_ratio(&s);
    assert!((r - (2.0 * 2f64.ln() - 1.0)).abs() < 0.01, "{r}");

    let ensemble: Vec<Vec<f64>> = (0..100)
        .map(|_| unfold_with(&poisson_levels(400, &mut rng), &UnfoldOptions::default()).unwrap().levels)
        .collect();
    let taus = tau_grid(0.2, 2.0, 19);
    let k = form_factor(&ensemble, &taus, SpectralWindow::Gaussian { rel_width: 0.2 }).unwrap();
    for j in 0..taus.len() {
        assert!((k.k[j] - 1.0).abs() < 3.0 * k.sigma[j], "tau={} K={} sigma={}", taus[j], k.k[j], k.sigma[j]);
    }
}

#[test]
fn goe_matrices_match_reference_curve() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spectra: Vec<Vec<f64>> = (0..200).map(|_| goe_levels(200, &mut rng)).collect();
    let ensemble: Vec<Vec<f64>> = spectra.iter().map(|e| unfold_with(e, &UnfoldOptions::default()).unwrap().levels).collect();
    let taus = tau_grid(0.5, 2.0, 16);
    let k = form_factor(&ensemble, &taus, SpectralWindow::Gaussian { rel_width: 0.2 }).unwrap();
    for j in 0..taus.len() {
        let want = rmt_form_factor(Symmetry::Goe, taus[j]);
        assert!((k.k[j] - want).abs() < 3.0 * k.sigma[j], "tau={} K={} want={} sigma={}", taus[j], k.k[j], want, k.sigma[j]);
    }
}

#[test]
fn goe_spacing_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ratios = Vec::new();
    for _ in 0..8 {
        let e = goe_levels(500, &mut rng);
        let u = unfold_with(&e, &UnfoldOptions::default()).unwrap();
        ratios.push(spacing_statistics(&u.levels, 0.1, 4.0).unwrap().mean_ratio);
    }
    let r = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((r - 0.53).abs() < 0.01, "{r}");
}

#[test]
fn phase_randomized_spectra_give_unit_form_factor() {
    // levels with no correlations at all: uniform i.i.d. positions
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let ensemble: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let mut x: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..300.0)).collect();
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            x
        })
        .collect();
    let taus = tau_grid(0.1, 3.0, 30);
    let k = form_factor(&ensemble, &taus, SpectralWindow::Gaussian { rel_width: 0.2 }).unwrap();
    for j in 0..taus.len() {
        assert!((k.k[j] - 1.0).abs() < 3.0 * k.sigma[j], "tau={}", taus[j]);
    }
}

#[test]
fn goe_curve_is_continuous_and_monotone_on_the_right() {
    let left = rmt_form_factor(Symmetry::Goe, 1.0f64);
    let right = rmt_form_factor(Symmetry::Goe, 1.0f64 + 1e-15);
    assert!((left - right).abs() < 1e-12);
    let mut prev = left;
    for k in 1..200 {
        let v = rmt_form_factor(Symmetry::Goe, 1.0 + 0.05 * k as f64);
        assert!(v >= prev && v <= 1.0);
        prev = v;
    }
}

#[test]
fn two_tones_are_resolved() {
    let ns: Vec<f64> = (20..=400).map(|n| n as f64).collect();
    let y: Vec<f64> = ns.iter().map(|n| (n * 0.8).cos() + 0.6 * (n * 2.1 + 0.4).cos()).collect();
    let sp = action_spectrum(&ns, &y, &ActionSpectrumOptions::default()).unwrap();
    let mut top: Vec<f64> = sp.peaks.iter().take(2).map(|p| p.s).collect();
    top.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((top[0] - 0.8).abs() < sp.resolution && (top[1] - 2.1).abs() < sp.resolution, "{top:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn peaks_ignore_polynomial_background(s0 in 0.3f64..2.8, c0 in -50.0f64..50.0, c1 in -2.0f64..2.0, c2 in -0.01f64..0.01) {
        let ns: Vec<f64> = (20..=300).map(|n| n as f64).collect();
        let tone: Vec<f64> = ns.iter().map(|n| (n * s0).sin()).collect();
        let with_bg: Vec<f64> = ns.iter().zip(&tone).map(|(n, y)| y + c0 + c1 * n + c2 * n * n).collect();
        let opts = ActionSpectrumOptions::default();
        let a = action_spectrum(&ns, &tone, &opts).unwrap();
        let b = action_spectrum(&ns, &with_bg, &opts).unwrap();
        prop_assert!((a.peaks[0].s - b.peaks[0].s).abs() <= a.s[1] - a.s[0]);
    }
}
