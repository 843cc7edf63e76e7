//! Exact quantum time evolution: Lanczos propagation for large sectors and a
//! dense eigendecomposition propagator used as the reference on small ones.

use crate::error::{invalid, Error, Result};
use crate::fock::StateVector;
use crate::hamiltonian::SparseHamiltonian;
use crate::linalg::{hermitian_eigen, tridiagonal_eigen, tridiagonal_eigen_rows, Matrix};
use crate::scalar::{axpy, cis, czero, inner, norm_sqr, Cplx, Real};

/// Largest Lanczos subspace the propagator will build.
pub const MAX_KRYLOV_DIM: usize = 64;
/// Default dimension cap for full diagonalization.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions<T: Real> {
    /// Bound on the estimated local error of each substep.
    pub tol: T,
    /// Lanczos subspace size, at most [`MAX_KRYLOV_DIM`].
    pub max_subspace: usize,
    /// Substep budget per call before giving up.
    pub max_substeps: usize,
    /// Orthogonalize each Lanczos vector against the whole basis instead of
    /// the previous two only.
    pub full_reorthogonalization: bool,
}

impl<T: Real> KrylovOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { tol, max_subspace: 40, max_substeps: 1_000_000, full_reorthogonalization: false }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return invalid("Krylov tolerance must be positive");
        }
        if self.max_subspace < 2 || self.max_subspace > MAX_KRYLOV_DIM {
            return invalid(format!("Krylov subspace size must lie in [2, {MAX_KRYLOV_DIM}]"));
        }
        Ok(())
    }
}

/// Bookkeeping of one or more propagation calls.
#[derive(Debug, Clone, Default)]
pub struct StepLog<T: Real> {
    pub step_sizes: Vec<T>,
    pub krylov_dims: Vec<usize>,
    /// Sum of per-substep error estimates.
    pub error_estimate: T,
}

impl<T: Real> StepLog<T> {
    fn merge(&mut self, other: StepLog<T>) {
        self.step_sizes.extend(other.step_sizes);
        self.krylov_dims.extend(other.krylov_dims);
        self.error_estimate += other.error_estimate;
    }
}

struct LanczosBasis<T: Real> {
    vecs: Vec<Vec<Cplx<T>>>,
    alpha: Vec<T>,
    beta: Vec<T>,
}

/// `exp(-i T dt) e_1` for the tridiagonal `T = tri(alpha, beta)`.
fn tridiagonal_exp_e1<T: Real>(alpha: &[T], beta: &[T], dt: T) -> Result<Vec<Cplx<T>>> {
    let m = alpha.len();
    let (vals, z) = tridiagonal_eigen(alpha, &beta[..m - 1])?;
    let coeff: Vec<Cplx<T>> = (0..m).map(|j| cis(-vals[j] * dt) * z[(0, j)]).collect();
    Ok((0..m)
        .map(|k| (0..m).fold(czero(), |acc, j| acc + coeff[j] * z[(k, j)]))
        .collect())
}

/// Local error estimate `beta_m |(exp(-i T dt) e_1)_m|` from the first and
/// last eigenvector rows, reusable for any `dt`.
struct ErrorEstimator<T: Real> {
    vals: Vec<T>,
    weights: Vec<T>,
    beta: T,
}

impl<T: Real> ErrorEstimator<T> {
    fn new(alpha: &[T], beta: &[T]) -> Result<Self> {
        let m = alpha.len();
        let (vals, rows) = tridiagonal_eigen_rows(alpha, &beta[..m - 1], &[0, m - 1])?;
        let weights = rows[0].iter().zip(&rows[1]).map(|(a, b)| *a * *b).collect();
        Ok(Self { vals, weights, beta: beta[m - 1] })
    }

    fn error(&self, dt: T) -> T {
        let c = self.vals.iter().zip(&self.weights).fold(czero(), |acc, (v, w)| acc + cis(-*v * dt) * *w);
        self.beta * c.norm()
    }
}

/// Advance `v` by `t` (either sign) under `H`, adaptively substepping.
pub fn propagate<T: Real>(
    h: &SparseHamiltonian<T>,
    v: &[Cplx<T>],
    t: T,
    opts: &KrylovOptions<T>,
) -> Result<(Vec<Cplx<T>>, StepLog<T>)> {
    opts.check()?;
    if v.len() != h.dim() {
        return Err(Error::SectorMismatch(format!("state of length {} for a sector of dimension {}", v.len(), h.dim())));
    }
    let mut log = StepLog { step_sizes: Vec::new(), krylov_dims: Vec::new(), error_estimate: T::zero() };
    let mut cur = v.to_vec();
    if t == T::zero() {
        return Ok((cur, log));
    }
    let beta0 = norm_sqr(v).sqrt();
    if beta0 == T::zero() {
        return Ok((cur, log));
    }
    let sign = t.signum();
    let mut remaining = t.abs();
    let mut dt_try = remaining;
    let floor = t.abs() * T::epsilon() * T::lit(16.0);
    let mut hw = vec![czero(); h.dim()];
    for _ in 0..opts.max_substeps {
        let norm = norm_sqr(&cur).sqrt();
        let mut basis = LanczosBasis { vecs: Vec::with_capacity(opts.max_subspace), alpha: Vec::new(), beta: Vec::new() };
        basis.vecs.push(cur.iter().map(|z| *z / norm).collect());
        let mut scale = T::zero();
        let mut accepted: Option<(T, T)> = None;
        let mut exhausted = false;
        dt_try = dt_try.min(remaining);
        for j in 0..opts.max_subspace {
            h.apply(&basis.vecs[j], &mut hw);
            let mut w = hw.clone();
            let a = inner(&basis.vecs[j], &w).re;
            basis.alpha.push(a);
            let keep = if opts.full_reorthogonalization { basis.vecs.len() } else { 2.min(basis.vecs.len()) };
            for q in &basis.vecs[basis.vecs.len() - keep..] {
                let c = inner(q, &w);
                axpy(&mut w, -c, q);
            }
            let b = norm_sqr(&w).sqrt();
            scale = scale.max(a.abs()).max(b);
            basis.beta.push(b);
            let m = j + 1;
            if b <= T::lit(64.0) * T::epsilon() * scale.max(T::one()) {
                exhausted = true;
                accepted = Some((dt_try.max(remaining), T::zero()));
                break;
            }
            let err = ErrorEstimator::new(&basis.alpha, &basis.beta)?.error(dt_try);
            if err <= opts.tol {
                accepted = Some((dt_try, err));
                break;
            }
            if m == opts.max_subspace {
                break;
            }
            basis.vecs.push(w.iter().map(|z| *z / b).collect());
        }
        let m = basis.alpha.len();
        let (dt, err) = match accepted {
            Some((dt, err)) => (if exhausted { remaining } else { dt }, err),
            None => {
                // shrink on the same Krylov basis, which does not depend on dt
                let est = ErrorEstimator::new(&basis.alpha, &basis.beta)?;
                let mut dt = dt_try;
                let mut found = None;
                for _ in 0..400 {
                    let err = est.error(dt);
                    if err <= opts.tol {
                        found = Some((dt, err));
                        break;
                    }
                    let ratio = (opts.tol / err).powf(T::one() / T::of_usize(m));
                    dt = dt * (T::lit(0.9) * ratio).max(T::lit(0.1)).min(T::lit(0.95));
                    if dt < floor {
                        break;
                    }
                }
                found.ok_or_else(|| Error::Propagation("step size underflow while meeting the error tolerance".into()))?
            }
        };
        let c = tridiagonal_exp_e1(&basis.alpha, &basis.beta, sign * dt)?;
        let mut next = vec![czero(); h.dim()];
        for (q, ck) in basis.vecs.iter().zip(&c) {
            axpy(&mut next, *ck * norm, q);
        }
        cur = next;
        log.step_sizes.push(sign * dt);
        log.krylov_dims.push(m);
        log.error_estimate += err;
        remaining = remaining - dt;
        if remaining <= floor {
            return Ok((cur, log));
        }
        dt_try = if accepted.is_some() { dt * T::lit(1.5) } else { dt };
    }
    Err(Error::Propagation(format!("no convergence within {} substeps", opts.max_substeps)))
}

/// States (or their summaries) along a time grid.
#[derive(Debug, Clone)]
pub struct PropagationReport<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<StateVector<T>>,
    pub log: StepLog<T>,
    /// `max |‖v(t)‖ - 1|` over the grid.
    pub norm_drift: T,
    /// `max |<H>(t) - <H>(0)|`, relative to `max(|<H>(0)|, 1e-3 ‖H‖)`.
    pub energy_drift: T,
}

/// Evolve a normalized state to every time in `t_grid`.
pub fn evolve<T: Real>(
    h: &SparseHamiltonian<T>,
    v0: &StateVector<T>,
    t_grid: &[T],
    opts: &KrylovOptions<T>,
) -> Result<PropagationReport<T>> {
    opts.check()?;
    if **v0.basis() != **h.basis() {
        return Err(Error::SectorMismatch("initial state and Hamiltonian live in different sectors".into()));
    }
    if (v0.norm() - T::one()).abs() > T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) {
        return invalid("initial state must be normalized");
    }
    let e0 = h.expectation(v0.amplitudes());
    let e_scale = e0.abs().max(T::lit(1e-3) * h.norm_bound());
    let mut cur = v0.amplitudes().to_vec();
    let mut t_prev = T::zero();
    let mut report = PropagationReport {
        times: t_grid.to_vec(),
        states: Vec::with_capacity(t_grid.len()),
        log: StepLog::default(),
        norm_drift: T::zero(),
        energy_drift: T::zero(),
    };
    for &t in t_grid {
        let (next, log) = propagate(h, &cur, t - t_prev, opts)?;
        report.log.merge(log);
        cur = next;
        t_prev = t;
        let n = norm_sqr(&cur).sqrt();
        report.norm_drift = report.norm_drift.max((n - T::one()).abs());
        let e = h.expectation(&cur);
        report.energy_drift = report.energy_drift.max((e - e0).abs() / e_scale);
        report.states.push(StateVector::from_amplitudes(v0.basis().clone(), cur.clone())?);
    }
    Ok(report)
}

/// Full eigendecomposition of a sector Hamiltonian.
#[derive(Debug, Clone)]
pub struct DenseSpectrum<T: Real> {
    pub values: Vec<T>,
    /// Eigenvectors as columns.
    pub vectors: Matrix<Cplx<T>>,
}

fn dense_cap_check(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::DimensionOverflow { dim: dim as u128, cap });
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors; fails if the sector exceeds `cap`.
pub fn full_diagonalize<T: Real>(h: &SparseHamiltonian<T>, cap: usize) -> Result<DenseSpectrum<T>> {
    dense_cap_check(h.dim(), cap)?;
    let e = hermitian_eigen(&h.to_dense(), true)?;
    Ok(DenseSpectrum { values: e.values, vectors: e.vectors.expect("vectors requested") })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues<T: Real>(h: &SparseHamiltonian<T>, cap: usize) -> Result<Vec<T>> {
    dense_cap_check(h.dim(), cap)?;
    Ok(hermitian_eigen(&h.to_dense(), false)?.values)
}

impl<T: Real> DenseSpectrum<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Coefficients `<k|v>` in the eigenbasis.
    pub fn to_eigenbasis(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.dim();
        (0..n)
            .map(|k| (0..n).fold(czero(), |acc, r| acc + self.vectors[(r, k)].conj() * v[r]))
            .collect()
    }

    pub fn from_eigenbasis(&self, c: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).fold(czero(), |acc, k| acc + self.vectors[(r, k)] * c[k]))
            .collect()
    }

    /// `exp(-i H t) v`.
    pub fn propagate(&self, v: &[Cplx<T>], t: T) -> Vec<Cplx<T>> {
        let mut c = self.to_eigenbasis(v);
        for (ck, &e) in c.iter_mut().zip(&self.values) {
            *ck = *ck * cis(-e * t);
        }
        self.from_eigenbasis(&c)
    }

    /// `max_k ‖H v_k - E_k v_k‖`.
    pub fn max_residual(&self, h: &SparseHamiltonian<T>) -> T {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let v = self.vectors.column(k);
                let hv = h.apply_vec(&v);
                hv.iter().zip(&v).map(|(a, b)| (*a - *b * self.values[k]).norm_sqr()).sum::<T>().sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

/// `P(n_i -> n_f, t)` for every final Fock state `n_f`.
pub fn transition_probabilities<T: Real>(
    h: &SparseHamiltonian<T>,
    initial: usize,
    t: T,
    opts: &KrylovOptions<T>,
) -> Result<Vec<T>> {
    if initial >= h.dim() {
        return invalid(format!("initial state {initial} outside a sector of dimension {}", h.dim()));
    }
    let mut v = vec![czero(); h.dim()];
    v[initial] = Cplx::new(T::one(), T::zero());
    let (out, _) = propagate(h, &v, t, opts)?;
    Ok(out.iter().map(|z| z.norm_sqr()).collect())
}

/// Transition probabilities averaged over the given times, from a dense
/// spectrum.
pub fn averaged_transition_probabilities<T: Real>(
    spec: &DenseSpectrum<T>,
    initial: usize,
    times: &[T],
) -> Result<Vec<T>> {
    if initial >= spec.dim() || times.is_empty() {
        return invalid("averaging needs an in-sector initial state and at least one time");
    }
    let n = spec.dim();
    let c: Vec<Cplx<T>> = (0..n).map(|k| spec.vectors[(initial, k)].conj()).collect();
    let mut acc = vec![T::zero(); n];
    for &t in times {
        let ct: Vec<Cplx<T>> = c.iter().zip(&spec.values).map(|(ck, &e)| *ck * cis(-e * t)).collect();
        let v = spec.from_eigenbasis(&ct);
        for (a, z) in acc.iter_mut().zip(&v) {
            *a += z.norm_sqr();
        }
    }
    let w = T::of_usize(times.len());
    Ok(acc.into_iter().map(|a| a / w).collect())
}
