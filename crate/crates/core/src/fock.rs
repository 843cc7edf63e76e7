//! Fock-space kinematics for `N` bosons on `L` sites.
//!
//! Sites are indexed from zero throughout the crate.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{cis, cplx, czero, norm_sqr, Cplx, Real};

/// Default cap on the number of basis states a sector may hold.
pub const DEFAULT_MAX_STATES: usize = 20_000_000;

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.checked_mul((n - j) as u128)? / (j as u128 + 1);
    }
    Some(acc)
}

/// Number of states in the `(L, N)` sector.
pub fn sector_dimension(sites: usize, particles: usize) -> Option<u128> {
    if sites == 0 {
        return Some(if particles == 0 { 1 } else { 0 });
    }
    binomial((particles + sites - 1) as u64, (sites - 1) as u64)
}

/// Ordered occupation basis of a fixed-`N` sector.
///
/// States are stored lexicographically ascending in `(n_0, ..., n_{L-1})`.
/// Lookup is a combinatorial ranking, `O(L)` per query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    occ: Vec<u32>,
    /// `comp[m][r]`: compositions of `r` into `m` non-negative parts.
    comp: Vec<Vec<u64>>,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        Self::with_cap(sites, particles, DEFAULT_MAX_STATES)
    }

    pub fn with_cap(sites: usize, particles: usize, cap: usize) -> Result<Self> {
        if sites == 0 {
            return invalid("a lattice needs at least one site");
        }
        let dim = sector_dimension(sites, particles)
            .ok_or(Error::DimensionOverflow { dim: u128::MAX, cap })?;
        if dim > cap as u128 {
            return Err(Error::DimensionOverflow { dim, cap });
        }
        let dim = dim as usize;
        let mut comp = vec![vec![0u64; particles + 1]; sites + 1];
        for r in 0..=particles {
            comp[1][r] = 1;
        }
        comp[0][0] = 1;
        for m in 2..=sites {
            let mut acc = 0u64;
            for r in 0..=particles {
                acc += comp[m - 1][r];
                comp[m][r] = acc;
            }
        }
        let mut occ = Vec::with_capacity(dim * sites);
        let mut cur = vec![0u32; sites];
        cur[sites - 1] = particles as u32;
        loop {
            occ.extend_from_slice(&cur);
            // rightmost site j < L-1 whose tail still holds particles
            let mut tail = 0u32;
            let mut j = sites - 1;
            let mut advanced = false;
            while j > 0 {
                tail += cur[j];
                j -= 1;
                if tail > 0 {
                    cur[j] += 1;
                    for x in cur[j + 1..].iter_mut() {
                        *x = 0;
                    }
                    cur[sites - 1] = tail - 1;
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        debug_assert_eq!(occ.len(), dim * sites);
        Ok(Self { sites, particles, occ, comp })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.occ.len() / self.sites
    }

    /// Occupation vector of basis state `k`.
    #[inline]
    pub fn state(&self, k: usize) -> &[u32] {
        &self.occ[k * self.sites..(k + 1) * self.sites]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.occ.chunks_exact(self.sites)
    }

    /// Position of an occupation vector, `None` if it is not in this sector.
    pub fn index(&self, n: &[u32]) -> Option<usize> {
        if n.len() != self.sites || n.iter().map(|&x| x as usize).sum::<usize>() != self.particles {
            return None;
        }
        Some(self.rank(n.iter().copied()))
    }

    /// Rank of `n` with `delta` added to site `site`. The caller guarantees
    /// the shifted vector belongs to this sector.
    #[inline]
    pub(crate) fn index_shifted(&self, n: &[u32], site: usize, delta: i32) -> usize {
        self.rank(n.iter().enumerate().map(|(i, &x)| if i == site { (x as i32 + delta) as u32 } else { x }))
    }

    /// Rank of `n` with one particle moved from site `from` to site `to`.
    #[inline]
    pub(crate) fn index_hopped(&self, n: &[u32], from: usize, to: usize) -> usize {
        self.rank(n.iter().enumerate().map(|(i, &x)| {
            if i == from {
                x - 1
            } else if i == to {
                x + 1
            } else {
                x
            }
        }))
    }

    #[inline]
    fn rank(&self, n: impl Iterator<Item = u32>) -> usize {
        let l = self.sites;
        let mut remaining = self.particles;
        let mut rank = 0u64;
        for (i, ni) in n.take(l - 1).enumerate() {
            let m = l - i - 1;
            let ni = ni as usize;
            rank += self.comp[m + 1][remaining] - self.comp[m + 1][remaining - ni];
            remaining -= ni;
        }
        rank as usize
    }
}

/// Complex amplitudes over a shared basis.
#[derive(Debug, Clone)]
pub struct StateVector<T: Real> {
    basis: Arc<FockBasis>,
    amp: Vec<Cplx<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let amp = vec![czero(); basis.dim()];
        Self { basis, amp }
    }

    /// The Fock state `|basis.state(k)>`.
    pub fn basis_state(basis: Arc<FockBasis>, k: usize) -> Self {
        let mut v = Self::zeros(basis);
        v.amp[k] = cplx(T::one(), T::zero());
        v
    }

    pub fn from_amplitudes(basis: Arc<FockBasis>, amp: Vec<Cplx<T>>) -> Result<Self> {
        if amp.len() != basis.dim() {
            return Err(Error::SectorMismatch(format!(
                "{} amplitudes for a sector of dimension {}",
                amp.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, amp })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Cplx<T>] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Cplx<T>> {
        self.amp
    }

    pub fn norm(&self) -> T {
        norm_sqr(&self.amp).sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.same_sector(other)?;
        Ok(crate::scalar::inner(&self.amp, &other.amp))
    }

    pub fn normalize(&mut self) -> Result<T> {
        let n = self.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return invalid("cannot normalize a zero or non-finite state");
        }
        for a in self.amp.iter_mut() {
            *a = *a / n;
        }
        Ok(n)
    }

    /// Probabilities `|amp_k|^2`.
    pub fn probabilities(&self) -> Vec<T> {
        self.amp.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<n_i>` for every site, not divided by the norm.
    pub fn occupations(&self) -> Vec<T> {
        let l = self.basis.sites();
        let mut out = vec![T::zero(); l];
        for (k, a) in self.amp.iter().enumerate() {
            let w = a.norm_sqr();
            for (o, &n) in out.iter_mut().zip(self.basis.state(k)) {
                *o += w * T::of_usize(n as usize);
            }
        }
        out
    }

    pub(crate) fn same_sector(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis {
            Ok(())
        } else {
            Err(Error::SectorMismatch("states live in different sectors".into()))
        }
    }
}

/// Single-site ladder operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Annihilate,
    Create,
    Number,
}

/// Apply `b_i`, `b_i^dagger` or `n_i` to `v`, writing into `target`, which
/// must be the `N - 1`, `N + 1` or `N` sector respectively.
pub fn apply_ladder<T: Real>(
    op: Ladder,
    site: usize,
    v: &StateVector<T>,
    target: &Arc<FockBasis>,
) -> Result<StateVector<T>> {
    let src = v.basis();
    if site >= src.sites() {
        return Err(Error::SiteOutOfRange { site, sites: src.sites() });
    }
    let expected = match op {
        Ladder::Annihilate => src.particles().checked_sub(1),
        Ladder::Create => Some(src.particles() + 1),
        Ladder::Number => Some(src.particles()),
    };
    if target.sites() != src.sites() || Some(target.particles()) != expected {
        return Err(Error::SectorMismatch(format!(
            "{op:?} on an N={} state needs a target sector with N={expected:?}, got N={}",
            src.particles(),
            target.particles()
        )));
    }
    let amp = v.amplitudes();
    let out: Vec<Cplx<T>> = match op {
        Ladder::Number => (0..src.dim())
            .into_par_iter()
            .map(|k| amp[k] * T::of_usize(src.state(k)[site] as usize))
            .collect(),
        Ladder::Annihilate => (0..target.dim())
            .into_par_iter()
            .map(|k| {
                // b_i |m + e_i> = sqrt(m_i + 1) |m>
                let m = target.state(k);
                let j = src.index_shifted(m, site, 1);
                amp[j] * T::of_usize(m[site] as usize + 1).sqrt()
            })
            .collect(),
        Ladder::Create => (0..target.dim())
            .into_par_iter()
            .map(|k| {
                // b_i^dagger |m - e_i> = sqrt(m_i) |m>
                let m = target.state(k);
                if m[site] == 0 {
                    return czero();
                }
                let j = src.index_shifted(m, site, -1);
                amp[j] * T::of_usize(m[site] as usize).sqrt()
            })
            .collect(),
    };
    StateVector::from_amplitudes(Arc::clone(target), out)
}

/// `ln k!` for `k = 0..=n`.
pub(crate) fn log_factorials<T: Real>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..=n {
        acc += T::of_usize(k).ln();
        out.push(acc);
    }
    out
}

/// Coherent state with field `psi0`, projected onto the sector of `basis`
/// and normalized. The largest amplitude is made real and positive.
pub fn projected_coherent_state<T: Real>(psi0: &[Cplx<T>], basis: &Arc<FockBasis>) -> Result<StateVector<T>> {
    if psi0.len() != basis.sites() {
        return Err(Error::SectorMismatch(format!(
            "field has {} components, lattice has {} sites",
            psi0.len(),
            basis.sites()
        )));
    }
    if norm_sqr(psi0) == T::zero() {
        return invalid("coherent-state field is identically zero");
    }
    let lf = log_factorials::<T>(basis.particles());
    let log_mod: Vec<T> = psi0.iter().map(|z| z.norm().ln()).collect();
    let arg: Vec<T> = psi0.iter().map(|z| z.arg()).collect();
    let half = T::lit(0.5);
    let logs: Vec<(T, T)> = (0..basis.dim())
        .into_par_iter()
        .map(|k| {
            let mut lm = T::zero();
            let mut ph = T::zero();
            for (i, &n) in basis.state(k).iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let nf = T::of_usize(n as usize);
                lm += nf * log_mod[i] - half * lf[n as usize];
                ph += nf * arg[i];
            }
            (lm, ph)
        })
        .collect();
    let top = logs.iter().fold(T::neg_infinity(), |m, &(l, _)| m.max(l));
    let mut amp: Vec<Cplx<T>> = logs
        .iter()
        .map(|&(l, ph)| if l == T::neg_infinity() { czero() } else { cis(ph) * (l - top).exp() })
        .collect();
    let norm = norm_sqr(&amp).sqrt();
    let (mut best, mut best_mag) = (0usize, T::zero());
    for (k, a) in amp.iter().enumerate() {
        let m = a.norm();
        if m > best_mag {
            best = k;
            best_mag = m;
        }
    }
    let fix = amp[best].conj() / (best_mag * norm);
    for a in amp.iter_mut() {
        *a = *a * fix;
    }
    amp[best] = cplx(amp[best].norm(), T::zero());
    StateVector::from_amplitudes(Arc::clone(basis), amp)
}

/// Position-quadrature wavefunction `<q|n>` of the `n`-th oscillator level.
///
/// Evaluated with the normalized Hermite-function recurrence; the running
/// values are rescaled and the scale tracked as a logarithm, so large `n`
/// and large `|q|` neither overflow nor underflow prematurely.
pub fn quadrature_overlap<T: Real>(q: T, n: usize) -> T {
    let big = T::max_value().sqrt().sqrt();
    let two = T::lit(2.0);
    let mut log_scale = T::zero();
    let mut prev = T::zero();
    let mut cur = T::PI().powf(T::lit(-0.25));
    for k in 0..n {
        let kf = T::of_usize(k);
        let next = (two / (kf + T::one())).sqrt() * q * cur - (kf / (kf + T::one())).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > big {
            cur = cur / big;
            prev = prev / big;
            log_scale += big.ln();
        }
    }
    let e = log_scale - q * q / two;
    if cur == T::zero() {
        return T::zero();
    }
    let s = cur.signum();
    s * (cur.abs().ln() + e).exp()
}

/// Real quadratures of a complex field, `psi = (q + i p)/sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePoint<T: Real> {
    pub q: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> QuadraturePoint<T> {
    pub fn from_field(psi: &[Cplx<T>]) -> Self {
        let r2 = T::lit(2.0).sqrt();
        Self { q: psi.iter().map(|z| z.re * r2).collect(), p: psi.iter().map(|z| z.im * r2).collect() }
    }

    pub fn to_field(&self) -> Vec<Cplx<T>> {
        let r = T::lit(0.5).sqrt();
        self.q.iter().zip(&self.p).map(|(&q, &p)| cplx(q * r, p * r)).collect()
    }

    /// Intensive quadratures `Q = q / sqrt(N)`, `P = p / sqrt(N)`.
    pub fn scaled(&self, particles: usize) -> Self {
        let s = T::of_usize(particles).sqrt().recip();
        Self { q: self.q.iter().map(|&x| x * s).collect(), p: self.p.iter().map(|&x| x * s).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}
