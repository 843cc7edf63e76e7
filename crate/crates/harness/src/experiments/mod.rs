//! The six experiments and helpers they share.

pub mod actions;
pub mod cbs;
pub mod modes;
pub mod otoc;
pub mod spectral;
pub mod twa;

use fockchaos::meanfield::{mode_from_section, PeriodicModeOptions};
use fockchaos::{Complex64, Flow, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::Pair;
use crate::error::{HarnessError, Result};

/// Independent unit-norm fields drawn isotropically; field `k` uses stream `k`.
pub fn random_unit_fields(sites: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let psi: Vec<Complex64> = (0..sites)
                .map(|_| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(a, b)
                })
                .collect();
            normalized(&psi, 1.0)
        })
        .collect()
}

/// Real sign patterns with a slight site-dependent tilt, then random fields:
/// starting points for the relative-equilibrium search.
pub fn fixed_point_guesses(sites: usize, random: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut g: Vec<Vec<Complex64>> = (0..1u32 << sites)
        .map(|s| {
            let psi: Vec<Complex64> = (0..sites)
                .map(|i| {
                    let sign = if (s >> i) & 1 == 1 { -1.0 } else { 1.0 };
                    Complex64::new(sign * (1.0 + 0.1 * i as f64), 0.0)
                })
                .collect();
            normalized(&psi, 1.0)
        })
        .collect();
    g.extend(random_unit_fields(sites, random, seed));
    g
}

/// `psi` rescaled to squared norm `n`.
pub fn normalized(psi: &[Complex64], n: f64) -> Vec<Complex64> {
    let s: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter().map(|z| z * (n.sqrt() / s)).collect()
}

pub fn field_from_pairs(pairs: &[Pair]) -> Result<Vec<Complex64>> {
    let psi: Vec<Complex64> = pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect();
    if !psi.iter().any(|z| z.norm_sqr() > 0.0) || psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(HarnessError::Config("initial field must be finite and non-zero".into()));
    }
    Ok(psi)
}

/// Gaussian-smoothed level density at `e`.
pub fn smoothed_density(levels: &[f64], e: f64, sigma: f64) -> f64 {
    let norm = 1.0 / (sigma * std::f64::consts::TAU.sqrt());
    levels.iter().map(|x| (-(x - e).powi(2) / (2.0 * sigma * sigma)).exp()).sum::<f64>() * norm
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Starting fields on the section `|psi_a|^2 = |psi_b|^2` at scaled energy
/// `energy`: uniform moduli, site `b` carrying a relative phase found by
/// bracketing the energy on `[0, pi]`.
pub fn section_starts(mf: &Flow, section: (usize, usize), energy: f64) -> Vec<Vec<Complex64>> {
    let l = mf.sites();
    let amp = (1.0 / l as f64).sqrt();
    let field = |phi: f64| -> Vec<Complex64> {
        (0..l).map(|i| if i == section.1 { Complex64::from_polar(amp, phi) } else { Complex64::new(amp, 0.0) }).collect()
    };
    let f = |phi: f64| mf.energy(&field(phi)) - energy;
    const GRID: usize = 256;
    let mut starts = Vec::new();
    let pi = std::f64::consts::PI;
    for k in 0..GRID {
        let (mut a, mut b) = (pi * k as f64 / GRID as f64, pi * (k + 1) as f64 / GRID as f64);
        let (mut fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            starts.push(field(a));
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        starts.push(field(0.5 * (a + b)));
    }
    starts
}

/// Relative-periodic modes at scaled energy `energy`, one per section start
/// that converges; failures come back as messages.
pub fn mode_catalog(
    mf: &Flow,
    section: (usize, usize),
    energy: f64,
    scan_time: f64,
    scan_step: f64,
) -> (Vec<Mode>, Vec<String>) {
    let opts = PeriodicModeOptions { energy: Some(energy), ..PeriodicModeOptions::default() };
    let mut modes: Vec<Mode> = Vec::new();
    let mut failures = Vec::new();
    for psi in section_starts(mf, section, energy) {
        match mode_from_section(mf, &psi, section, scan_time, scan_step, &opts) {
            Ok(m) => {
                let duplicate = modes
                    .iter()
                    .any(|o| (o.period - m.period).abs() < 1e-6 * m.period && (o.action - m.action).abs() < 1e-6);
                if !duplicate {
                    modes.push(m);
                }
            }
            Err(e) => failures.push(format!("section start at E/N = {energy}: {e}")),
        }
    }
    (modes, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fockchaos::hamiltonian::Geometry;
    use fockchaos::Params;

    #[test]
    fn random_fields_are_normalized_and_reproducible() {
        let a = random_unit_fields(4, 3, 9);
        assert_eq!(a, random_unit_fields(4, 3, 9));
        for f in &a {
            assert!((f.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn smoothed_density_integrates_to_level_count() {
        let levels = [0.0, 0.3, 1.1];
        let h = 0.01;
        let total: f64 = (-1000..1300).map(|k| smoothed_density(&levels, k as f64 * h, 0.2) * h).sum();
        assert!((total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn section_starts_sit_on_the_energy_shell() {
        let p = Params::new(2, 10, 1.0, 0.1, Geometry::Open);
        let mf = Flow::scaled(&p);
        let starts = section_starts(&mf, (0, 1), 0.25);
        assert_eq!(starts.len(), 1);
        let psi = &starts[0];
        assert!((mf.energy(psi) - 0.25).abs() < 1e-12);
        assert!((psi[0].norm_sqr() - psi[1].norm_sqr()).abs() < 1e-15);
        assert!(section_starts(&mf, (0, 1), 5.0).is_empty());
    }

    #[test]
    fn guesses_cover_sign_patterns() {
        let g = fixed_point_guesses(3, 2, 1);
        assert_eq!(g.len(), 10);
        assert!(g[..8].iter().all(|f| f.iter().all(|z| z.im == 0.0)));
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert!(mean_stderr(&[1.0]).1.is_nan());
    }
}
