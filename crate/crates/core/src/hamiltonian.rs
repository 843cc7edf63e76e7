//! Bose-Hubbard Hamiltonians on chains and rings, and their classical symbol.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fock::FockBasis;
use crate::linalg::Matrix;
use crate::scalar::{cis, cplx, czero, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Open,
    Ring,
}

/// Parameters of
/// `H = sum_i e_i n_i - J sum_<ij> (e^{i phi} b_i^+ b_j + h.c.) + U/2 sum_i n_i (n_i - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoseHubbardParams<T: Real> {
    pub sites: usize,
    pub geometry: Geometry,
    pub hopping: T,
    pub interaction: T,
    pub onsite: Vec<T>,
    /// Peierls phase on every bond, radians.
    pub phase: T,
    pub particles: usize,
}

impl<T: Real> BoseHubbardParams<T> {
    pub fn new(sites: usize, particles: usize, hopping: T, interaction: T, geometry: Geometry) -> Self {
        Self { sites, geometry, hopping, interaction, onsite: vec![T::zero(); sites], phase: T::zero(), particles }
    }

    pub fn with_phase(mut self, phase: T) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_onsite(mut self, onsite: Vec<T>) -> Self {
        self.onsite = onsite;
        self
    }

    /// Same model in another particle-number sector.
    pub fn with_particles(mut self, particles: usize) -> Self {
        self.particles = particles;
        self
    }

    /// `U N`, the interaction held fixed in the classical limit.
    pub fn scaled_interaction(&self) -> T {
        self.interaction * T::of_usize(self.particles)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return invalid("lattice needs at least one site");
        }
        if self.onsite.len() != self.sites {
            return invalid(format!("{} on-site energies for {} sites", self.onsite.len(), self.sites));
        }
        if self.geometry == Geometry::Ring && self.sites < 3 {
            return invalid("a ring needs at least three sites");
        }
        if self.hopping < T::zero() {
            return invalid("hopping must be non-negative");
        }
        let finite = self.hopping.is_finite()
            && self.interaction.is_finite()
            && self.phase.is_finite()
            && self.onsite.iter().all(|e| e.is_finite());
        if !finite {
            return invalid("non-finite model parameter");
        }
        Ok(())
    }

    /// Directed bonds `(i, j)` carrying `-J e^{i phi} b_i^+ b_j`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let l = self.sites;
        let mut b: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.geometry == Geometry::Ring && l >= 3 {
            b.push((l - 1, 0));
        }
        b
    }
}

/// Row-compressed Hermitian Hamiltonian on one sector.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian<T: Real> {
    basis: Arc<FockBasis>,
    params: BoseHubbardParams<T>,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<Cplx<T>>,
    hermitian: bool,
}

/// Assemble the Bose-Hubbard matrix in `basis`.
pub fn build_bose_hubbard<T: Real>(params: &BoseHubbardParams<T>, basis: &Arc<FockBasis>) -> Result<SparseHamiltonian<T>> {
    params.validate()?;
    if basis.sites() != params.sites || basis.particles() != params.particles {
        return Err(Error::SectorMismatch(format!(
            "basis (L={}, N={}) does not match parameters (L={}, N={})",
            basis.sites(),
            basis.particles(),
            params.sites,
            params.particles
        )));
    }
    if basis.dim() > u32::MAX as usize {
        return Err(Error::DimensionOverflow { dim: basis.dim() as u128, cap: u32::MAX as usize });
    }
    let bonds = if params.hopping == T::zero() { Vec::new() } else { params.bonds() };
    let fwd = cis(params.phase) * (-params.hopping);
    let bwd = fwd.conj();
    let half_u = params.interaction * T::lit(0.5);
    let rows: Vec<Vec<(u32, Cplx<T>)>> = (0..basis.dim())
        .into_par_iter()
        .map(|r| {
            let m = basis.state(r);
            let mut diag = T::zero();
            for (i, &n) in m.iter().enumerate() {
                let nf = T::of_usize(n as usize);
                diag += params.onsite[i] * nf + half_u * nf * (nf - T::one());
            }
            let mut row = Vec::with_capacity(2 * bonds.len() + 1);
            row.push((r as u32, cplx(diag, T::zero())));
            for &(i, j) in &bonds {
                let (mi, mj) = (m[i] as usize, m[j] as usize);
                // <m| b_i^+ b_j |c> with c = m - e_i + e_j
                if mi > 0 {
                    let c = basis.index_hopped(m, i, j);
                    let amp = T::of_usize(mi * (mj + 1)).sqrt();
                    row.push((c as u32, fwd * amp));
                }
                // <m| b_j^+ b_i |c> with c = m - e_j + e_i
                if mj > 0 {
                    let c = basis.index_hopped(m, j, i);
                    let amp = T::of_usize(mj * (mi + 1)).sqrt();
                    row.push((c as u32, bwd * amp));
                }
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, Cplx<T>)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged
        })
        .collect();
    let nnz = rows.iter().map(|r| r.len()).sum();
    let mut row_ptr = Vec::with_capacity(basis.dim() + 1);
    let mut col = Vec::with_capacity(nnz);
    let mut val = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for r in rows {
        for (c, v) in r {
            col.push(c);
            val.push(v);
        }
        row_ptr.push(col.len());
    }
    let mut h = SparseHamiltonian { basis: Arc::clone(basis), params: params.clone(), row_ptr, col, val, hermitian: false };
    let scale = h.norm_bound().max(T::one());
    h.hermitian = h.hermiticity_error() <= T::lit(1e-13) * scale;
    Ok(h)
}

impl<T: Real> SparseHamiltonian<T> {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn params(&self) -> &BoseHubbardParams<T> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Stored entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Cplx<T>)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col[span.clone()].iter().zip(&self.val[span]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn entry(&self, r: usize, c: usize) -> Cplx<T> {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_else(czero)
    }

    /// `y = H x`. Rows are independent, each reduced in a fixed order, so the
    /// result does not depend on the thread count.
    pub fn apply(&self, x: &[Cplx<T>], y: &mut [Cplx<T>]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        y.par_iter_mut().with_min_len(256).enumerate().for_each(|(r, out)| {
            let mut acc = czero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            *out = acc;
        });
    }

    pub fn apply_vec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut y = vec![czero(); self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// `<x|H|x>`.
    pub fn expectation(&self, x: &[Cplx<T>]) -> T {
        let hx = self.apply_vec(x);
        crate::scalar::inner(x, &hx).re
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|r| self.entry(r, r).re).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> T {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// `max |H_rc - conj(H_cr)|` over stored entries.
    pub fn hermiticity_error(&self) -> T {
        (0..self.dim())
            .into_par_iter()
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (v - self.entry(c, r).conj()).norm())
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max)
    }

    /// `max |H_rc - H_cr|`, zero exactly when the matrix is symmetric.
    pub fn asymmetry(&self) -> T {
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, v)| (v - self.entry(c, r)).norm()).fold(T::zero(), T::max))
            .fold(T::zero(), T::max)
    }

    pub fn to_dense(&self) -> Matrix<Cplx<T>> {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// The classical (normal-ordered) symbol of the Bose-Hubbard Hamiltonian
/// with a given quartic coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSymbol<T: Real> {
    pub onsite: Vec<T>,
    pub hopping: T,
    pub phase: T,
    /// Coefficient `g` of `(g/2) sum |psi_i|^4`.
    pub coupling: T,
    pub bonds: Vec<(usize, usize)>,
}

impl<T: Real> ClassicalSymbol<T> {
    /// Symbol on unscaled fields, `sum |psi|^2 = N`, with coupling `U`.
    pub fn unscaled(params: &BoseHubbardParams<T>) -> Self {
        Self::with_coupling(params, params.interaction)
    }

    /// Symbol on unit-norm fields with coupling `U N`; `H_cl(sqrt(N) psi; U) = N H_cl(psi; U N)`.
    pub fn scaled(params: &BoseHubbardParams<T>) -> Self {
        Self::with_coupling(params, params.scaled_interaction())
    }

    pub fn with_coupling(params: &BoseHubbardParams<T>, coupling: T) -> Self {
        let bonds = if params.hopping == T::zero() { Vec::new() } else { params.bonds() };
        Self { onsite: params.onsite.clone(), hopping: params.hopping, phase: params.phase, coupling, bonds }
    }

    pub fn sites(&self) -> usize {
        self.onsite.len()
    }

    pub fn energy(&self, psi: &[Cplx<T>]) -> T {
        let half = T::lit(0.5);
        let mut e = T::zero();
        for (i, z) in psi.iter().enumerate() {
            let n = z.norm_sqr();
            e += self.onsite[i] * n + half * self.coupling * n * n;
        }
        let w = cis(self.phase);
        for &(i, j) in &self.bonds {
            e -= T::lit(2.0) * self.hopping * (w * psi[i].conj() * psi[j]).re;
        }
        e
    }

    /// `dH/d psi_i^*`, written into `out`.
    pub fn gradient_into(&self, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        for (i, z) in psi.iter().enumerate() {
            out[i] = *z * (self.onsite[i] + self.coupling * z.norm_sqr());
        }
        let fwd = cis(self.phase) * (-self.hopping);
        let bwd = fwd.conj();
        for &(i, j) in &self.bonds {
            out[i] += fwd * psi[j];
            out[j] += bwd * psi[i];
        }
    }

    pub fn gradient(&self, psi: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut g = vec![czero(); psi.len()];
        self.gradient_into(psi, &mut g);
        g
    }

    /// Single-particle (hopping plus on-site) matrix `h` with `H_2 = psi^+ h psi`.
    pub fn single_particle_matrix(&self) -> Matrix<Cplx<T>> {
        let l = self.sites();
        let mut m = Matrix::zeros(l, l);
        for i in 0..l {
            m[(i, i)] = cplx(self.onsite[i], T::zero());
        }
        let fwd = cis(self.phase) * (-self.hopping);
        for &(i, j) in &self.bonds {
            m[(i, j)] += fwd;
            m[(j, i)] += fwd.conj();
        }
        m
    }
}

/// `H_cl(psi)` on unscaled fields with coupling `U`.
pub fn classical_symbol<T: Real>(params: &BoseHubbardParams<T>, psi: &[Cplx<T>]) -> T {
    ClassicalSymbol::unscaled(params).energy(psi)
}

/// Random on-site energies uniform in `[-W/2, W/2]` added to the base
/// parameters. Member `m` draws from stream `m` of the seeded generator, so
/// members are reproducible individually.
pub fn disorder_ensemble<T: Real>(
    base: &BoseHubbardParams<T>,
    width: T,
    count: usize,
    seed: u64,
) -> Vec<BoseHubbardParams<T>> {
    let half = width.to_f64_lossy() * 0.5;
    (0..count)
        .map(|m| {
            let mut p = base.clone();
            if half > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(m as u64);
                for e in p.onsite.iter_mut() {
                    *e += T::lit(rng.random_range(-half..half));
                }
            }
            p
        })
        .collect()
}
