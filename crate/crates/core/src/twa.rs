//! Truncated Wigner approximation for coherent initial states.
//!
//! Fields are unscaled (`sum |Psi|^2 ~ N`). Samples are drawn from the
//! Wigner function of a coherent state and transported by the classical
//! flow of the Weyl symbol of the Hamiltonian; observables enter through
//! their Weyl symbols.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{BoseHubbardParams, ClassicalSymbol};
use crate::meanfield::MeanField;
use crate::scalar::{cplx, Cplx, Real};

const CHUNK: usize = 1024;

/// Wigner samples `Psi_i = psi0_i + (eta_i + i xi_i) / 2`.
#[derive(Debug, Clone)]
pub struct WignerEnsemble<T: Real> {
    pub center: Vec<Cplx<T>>,
    pub samples: Vec<Vec<Cplx<T>>>,
    pub seed: u64,
    pub sample_count: usize,
}

/// Sample the Wigner function of the coherent state centred at `psi0`.
/// Chunk `c` of 1024 samples draws from stream `c` of the seeded generator.
pub fn sample_wigner_coherent<T: Real>(psi0: &[Cplx<T>], count: usize, seed: u64) -> Result<WignerEnsemble<T>> {
    if count == 0 {
        return invalid("Wigner ensemble needs at least one sample");
    }
    let half = T::lit(0.5);
    let samples: Vec<Vec<Cplx<T>>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(count - c * CHUNK);
            (0..n)
                .map(|_| {
                    psi0.iter()
                        .map(|z| {
                            let eta: f64 = StandardNormal.sample(&mut rng);
                            let xi: f64 = StandardNormal.sample(&mut rng);
                            *z + cplx(T::lit(eta), T::lit(xi)) * half
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(WignerEnsemble { center: psi0.to_vec(), samples, seed, sample_count: count })
}

/// A named Weyl symbol `A(Psi, Psi^*)`.
#[derive(Clone)]
pub struct WeylSymbol<T: Real> {
    pub name: String,
    f: Arc<dyn Fn(&[Cplx<T>]) -> T + Send + Sync>,
}

impl<T: Real> std::fmt::Debug for WeylSymbol<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeylSymbol").field("name", &self.name).finish()
    }
}

impl<T: Real> WeylSymbol<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(&[Cplx<T>]) -> T + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    /// `n_i` maps to `|Psi_i|^2 - 1/2`.
    pub fn occupation(site: usize) -> Self {
        Self::new(format!("n{site}"), move |psi: &[Cplx<T>]| psi[site].norm_sqr() - T::lit(0.5))
    }

    /// `sum_i n_i` maps to `sum_i |Psi_i|^2 - L/2`.
    pub fn total_number() -> Self {
        Self::new("N", |psi: &[Cplx<T>]| {
            psi.iter().map(|z| z.norm_sqr()).sum::<T>() - T::of_usize(psi.len()) * T::lit(0.5)
        })
    }

    pub fn eval(&self, psi: &[Cplx<T>]) -> T {
        (self.f)(psi)
    }
}

/// Ensemble mean and standard error of each observable at each time.
#[derive(Debug, Clone)]
pub struct TwaSeries<T: Real> {
    pub times: Vec<T>,
    pub names: Vec<String>,
    /// `mean[k][t]` for observable `k`.
    pub mean: Vec<Vec<T>>,
    pub stderr: Vec<Vec<T>>,
    pub used: usize,
    pub dropped: usize,
}

/// Flow generated by the Weyl symbol of the Bose-Hubbard Hamiltonian:
/// `i dPsi_i/dt = (e_i + U (|Psi_i|^2 - 1)) Psi_i - J (hopping terms)`.
pub fn weyl_flow<T: Real>(params: &BoseHubbardParams<T>) -> MeanField<T> {
    let mut symbol = ClassicalSymbol::unscaled(params);
    for e in symbol.onsite.iter_mut() {
        *e -= params.interaction;
    }
    MeanField { symbol }
}

/// Evolve every sample and average the observables on `t_grid` (from
/// `t = 0`). Samples whose integration fails are dropped; more than 1%
/// drops is an error.
pub fn twa_expectation<T: Real>(
    params: &BoseHubbardParams<T>,
    ensemble: &WignerEnsemble<T>,
    observables: &[WeylSymbol<T>],
    t_grid: &[T],
    tol: T,
) -> Result<TwaSeries<T>> {
    params.validate()?;
    if ensemble.center.len() != params.sites {
        return invalid("ensemble and parameters disagree on the number of sites");
    }
    let mf = weyl_flow(params);
    let runs: Vec<Option<Vec<Vec<T>>>> = ensemble
        .samples
        .par_iter()
        .map(|psi| {
            let tr = mf.flow(psi, t_grid, tol).ok()?;
            Some(observables.iter().map(|o| tr.states.iter().map(|s| o.eval(s)).collect()).collect())
        })
        .collect();
    let dropped = runs.iter().filter(|r| r.is_none()).count();
    if dropped * 100 > ensemble.samples.len() {
        return Err(Error::Integrator(format!("{dropped} of {} samples failed", ensemble.samples.len())));
    }
    let used = runs.len() - dropped;
    if used < 2 {
        return Err(Error::InsufficientData("TWA needs at least two successful samples".into()));
    }
    let nt = t_grid.len();
    let mut sum = vec![vec![T::zero(); nt]; observables.len()];
    let mut sum2 = sum.clone();
    for run in runs.iter().flatten() {
        for (k, vals) in run.iter().enumerate() {
            for (t, v) in vals.iter().enumerate() {
                sum[k][t] += *v;
                sum2[k][t] += *v * *v;
            }
        }
    }
    let nf = T::of_usize(used);
    let mean: Vec<Vec<T>> = sum.iter().map(|s| s.iter().map(|x| *x / nf).collect()).collect();
    let stderr = sum2
        .iter()
        .zip(&mean)
        .map(|(s2, m)| {
            s2.iter()
                .zip(m)
                .map(|(q, mu)| ((*q - nf * *mu * *mu) / (nf - T::one())).max(T::zero()).sqrt() / nf.sqrt())
                .collect()
        })
        .collect();
    Ok(TwaSeries {
        times: t_grid.to_vec(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        mean,
        stderr,
        used,
        dropped,
    })
}

/// CSV with columns `t` and `<name>_mean, <name>_stderr` per observable.
pub fn write_twa_csv<T: Real, W: Write>(mut w: W, series: &TwaSeries<T>) -> std::io::Result<()> {
    write!(w, "t")?;
    for n in &series.names {
        write!(w, ",{n}_mean,{n}_stderr")?;
    }
    writeln!(w)?;
    for (i, t) in series.times.iter().enumerate() {
        write!(w, "{t}")?;
        for k in 0..series.names.len() {
            write!(w, ",{},{}", series.mean[k][i], series.stderr[k][i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Geometry;

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let psi0 = vec![cplx(1.0f64, 0.5), cplx(-0.3, 0.0)];
        let a = sample_wigner_coherent(&psi0, 3000, 5).unwrap();
        let b = sample_wigner_coherent(&psi0, 3000, 5).unwrap();
        let c = sample_wigner_coherent(&psi0, 3000, 6).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, c.samples);
        assert_eq!(a.samples.len(), 3000);
        assert!(sample_wigner_coherent(&psi0, 0, 5).is_err());
    }

    #[test]
    fn occupation_symbol_subtracts_half() {
        let s = WeylSymbol::<f64>::occupation(1);
        assert_eq!(s.eval(&[cplx(3.0, 0.0), cplx(1.0, 1.0)]), 1.5);
        assert_eq!(WeylSymbol::<f64>::total_number().eval(&[cplx(1.0, 0.0), cplx(0.0, 2.0)]), 4.0);
    }

    #[test]
    fn time_zero_reproduces_coherent_occupations() {
        let p = BoseHubbardParams::<f64>::new(2, 4, 1.0, 0.1, Geometry::Open);
        let psi0 = vec![cplx(1.5, 0.0), cplx(0.5, 0.8)];
        let ens = sample_wigner_coherent(&psi0, 20_000, 1).unwrap();
        let s = twa_expectation(&p, &ens, &[WeylSymbol::occupation(0), WeylSymbol::occupation(1)], &[0.0], 1e-9).unwrap();
        for (k, z) in psi0.iter().enumerate() {
            assert!((s.mean[k][0] - z.norm_sqr()).abs() < 3.0 * s.stderr[k][0]);
        }
    }
}
