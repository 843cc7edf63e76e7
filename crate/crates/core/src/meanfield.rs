//! Classical limit of the Bose-Hubbard model: the lattice Gross-Pitaevskii
//! flow `i dpsi/dt = dH_cl/dpsi^*`, its tangent dynamics, relative equilibria,
//! relative-periodic modes with their monodromy, and the Weyl density.
//!
//! Real coordinates are stored in block order `(Re psi_0..Re psi_{L-1},
//! Im psi_0..Im psi_{L-1})`. In these coordinates the flow is Hamiltonian
//! with symplectic form `sum_i dx_i ^ dy_i` (up to a constant factor), so
//! symplecticity is checked against `[[0, I], [-I, 0]]`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{BoseHubbardParams, ClassicalSymbol};
use crate::linalg::{general_eigenvalues, least_squares, Matrix};
use crate::ode::{integrate, OdeOptions, OdeStats};
use crate::scalar::{cis, cplx, czero, inner, norm_sqr, Cplx, Real};

fn pack<T: Real>(psi: &[Cplx<T>], out: &mut [T]) {
    let l = psi.len();
    for (i, z) in psi.iter().enumerate() {
        out[i] = z.re;
        out[l + i] = z.im;
    }
}

fn unpack<T: Real>(y: &[T], out: &mut [Cplx<T>]) {
    let l = out.len();
    for (i, z) in out.iter_mut().enumerate() {
        *z = cplx(y[i], y[l + i]);
    }
}

fn packed<T: Real>(psi: &[Cplx<T>]) -> Vec<T> {
    let mut v = vec![T::zero(); 2 * psi.len()];
    pack(psi, &mut v);
    v
}

fn unpacked<T: Real>(y: &[T]) -> Vec<Cplx<T>> {
    let mut v = vec![czero(); y.len() / 2];
    unpack(y, &mut v);
    v
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// `omega(u, v) = sum_i (u_x v_y - u_y v_x)` in block coordinates.
pub fn symplectic_form<T: Real>(u: &[T], v: &[T]) -> T {
    let l = u.len() / 2;
    (0..l).map(|i| u[i] * v[l + i] - u[l + i] * v[i]).sum()
}

/// Standard symplectic matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn symplectic_unit<T: Real>(n: usize) -> Matrix<T> {
    Matrix::from_fn(2 * n, 2 * n, |r, c| {
        if c == r + n {
            T::one()
        } else if r == c + n {
            -T::one()
        } else {
            T::zero()
        }
    })
}

/// `max |M^T Omega M - Omega|`.
pub fn symplectic_defect<T: Real>(m: &Matrix<T>) -> T {
    let n = m.rows() / 2;
    let om = symplectic_unit::<T>(n);
    let lhs = m.transpose().matmul(&om).matmul(m);
    Matrix::from_fn(2 * n, 2 * n, |r, c| lhs[(r, c)] - om[(r, c)]).max_abs()
}

/// Real representation of multiplication by `e^{i theta}`.
fn rotation<T: Real>(l: usize, theta: T) -> Matrix<T> {
    let (s, c) = theta.sin_cos();
    Matrix::from_fn(2 * l, 2 * l, |r, k| {
        let (br, bk) = (r / l, k / l);
        if r % l != k % l {
            return T::zero();
        }
        match (br, bk) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            _ => s,
        }
    })
}

/// GPE flow for a fixed classical symbol.
#[derive(Debug, Clone)]
pub struct MeanField<T: Real> {
    pub symbol: ClassicalSymbol<T>,
}

/// Samples of a mean-field trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<Vec<Cplx<T>>>,
    /// `max |sum |psi|^2 - initial|`.
    pub norm_drift: T,
    /// `max |H_cl - initial| / max(|initial|, 1e-12)`.
    pub energy_drift: T,
    pub stats: OdeStats,
}

/// Result of integrating the flow with tangent vectors and the action.
#[derive(Debug, Clone)]
pub struct VariationalState<T: Real> {
    pub psi: Vec<Cplx<T>>,
    pub tangents: Vec<Vec<Cplx<T>>>,
    /// `int sum_i Re(psi_i^* dH/dpsi_i^*) dt`, which equals `-int Im(psi^+ dpsi/dt) dt`.
    pub action: T,
}

impl<T: Real> MeanField<T> {
    /// Unit-norm fields with coupling `U N`.
    pub fn scaled(params: &BoseHubbardParams<T>) -> Self {
        Self { symbol: ClassicalSymbol::scaled(params) }
    }

    /// Fields with `sum |psi|^2 ~ N` and coupling `U`.
    pub fn unscaled(params: &BoseHubbardParams<T>) -> Self {
        Self { symbol: ClassicalSymbol::unscaled(params) }
    }

    pub fn sites(&self) -> usize {
        self.symbol.sites()
    }

    pub fn energy(&self, psi: &[Cplx<T>]) -> T {
        self.symbol.energy(psi)
    }

    /// `dpsi/dt = -i dH/dpsi^*`.
    pub fn velocity(&self, psi: &[Cplx<T>]) -> Vec<Cplx<T>> {
        self.symbol.gradient(psi).into_iter().map(|g| cplx(g.im, -g.re)).collect()
    }

    fn linear_into(&self, d: &[Cplx<T>], out: &mut [Cplx<T>]) {
        for (i, z) in d.iter().enumerate() {
            out[i] = *z * self.symbol.onsite[i];
        }
        let fwd = cis(self.symbol.phase) * (-self.symbol.hopping);
        let bwd = fwd.conj();
        for &(i, j) in &self.symbol.bonds {
            out[i] += fwd * d[j];
            out[j] += bwd * d[i];
        }
    }

    /// Linearized change of `dH/dpsi^*` along `d` at `psi`.
    fn gradient_variation_into(&self, psi: &[Cplx<T>], d: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self.linear_into(d, out);
        let g = self.symbol.coupling;
        let two = T::lit(2.0);
        for i in 0..psi.len() {
            out[i] += (d[i] * (two * psi[i].norm_sqr()) + psi[i] * psi[i] * d[i].conj()) * g;
        }
    }

    /// Real `2L x 2L` Jacobian of `dH/dpsi^* - mu psi` (rows: real parts,
    /// then imaginary parts).
    pub fn gradient_jacobian(&self, psi: &[Cplx<T>], mu: T) -> Matrix<T> {
        let l = psi.len();
        let mut jac = Matrix::zeros(2 * l, 2 * l);
        let mut col = vec![czero(); l];
        let mut d = vec![czero(); l];
        for k in 0..2 * l {
            for z in d.iter_mut() {
                *z = czero();
            }
            d[k % l] = if k < l { cplx(T::one(), T::zero()) } else { cplx(T::zero(), T::one()) };
            self.gradient_variation_into(psi, &d, &mut col);
            for i in 0..l {
                let v = col[i] - d[i] * mu;
                jac[(i, k)] = v.re;
                jac[(l + i, k)] = v.im;
            }
        }
        jac
    }

    /// Integrate the flow to every time in `t_grid` (from `t = 0`).
    pub fn flow(&self, psi0: &[Cplx<T>], t_grid: &[T], tol: T) -> Result<Trajectory<T>> {
        if psi0.len() != self.sites() {
            return invalid(format!("field of length {} for {} sites", psi0.len(), self.sites()));
        }
        let l = self.sites();
        let mut psi = vec![czero(); l];
        let mut g = vec![czero(); l];
        let rhs = |_: T, y: &[T], dy: &mut [T]| {
            unpack(y, &mut psi);
            self.symbol.gradient_into(&psi, &mut g);
            for i in 0..l {
                dy[i] = g[i].im;
                dy[l + i] = -g[i].re;
            }
        };
        let (ys, stats) = integrate(rhs, T::zero(), &packed(psi0), t_grid, &OdeOptions::new(tol))?;
        let n0 = norm_sqr(psi0);
        let e0 = self.energy(psi0);
        let e_scale = e0.abs().max(T::lit(1e-12));
        let states: Vec<Vec<Cplx<T>>> = ys.iter().map(|y| unpacked(y)).collect();
        let mut norm_drift = T::zero();
        let mut energy_drift = T::zero();
        for s in &states {
            norm_drift = norm_drift.max((norm_sqr(s) - n0).abs());
            energy_drift = energy_drift.max((self.energy(s) - e0).abs() / e_scale);
        }
        Ok(Trajectory { times: t_grid.to_vec(), states, norm_drift, energy_drift, stats })
    }

    /// Flow `psi0` for time `t` (either sign) together with tangent vectors
    /// and the accumulated action.
    pub fn integrate_variational(
        &self,
        psi0: &[Cplx<T>],
        tangents: &[Vec<Cplx<T>>],
        t: T,
        tol: T,
    ) -> Result<VariationalState<T>> {
        let l = self.sites();
        let k = tangents.len();
        let dim = 2 * l * (k + 1) + 1;
        let mut y0 = vec![T::zero(); dim];
        pack(psi0, &mut y0[..2 * l]);
        for (j, v) in tangents.iter().enumerate() {
            pack(v, &mut y0[2 * l * (j + 1)..2 * l * (j + 2)]);
        }
        let mut psi = vec![czero(); l];
        let mut g = vec![czero(); l];
        let mut d = vec![czero(); l];
        let mut dg = vec![czero(); l];
        let rhs = |_: T, y: &[T], dy: &mut [T]| {
            unpack(&y[..2 * l], &mut psi);
            self.symbol.gradient_into(&psi, &mut g);
            let mut s_dot = T::zero();
            for i in 0..l {
                dy[i] = g[i].im;
                dy[l + i] = -g[i].re;
                s_dot += (psi[i].conj() * g[i]).re;
            }
            for j in 0..k {
                let off = 2 * l * (j + 1);
                unpack(&y[off..off + 2 * l], &mut d);
                self.gradient_variation_into(&psi, &d, &mut dg);
                for i in 0..l {
                    dy[off + i] = dg[i].im;
                    dy[off + l + i] = -dg[i].re;
                }
            }
            dy[dim - 1] = s_dot;
        };
        let (ys, _) = integrate(rhs, T::zero(), &y0, &[t], &OdeOptions::new(tol))?;
        let y = &ys[0];
        Ok(VariationalState {
            psi: unpacked(&y[..2 * l]),
            tangents: (0..k).map(|j| unpacked(&y[2 * l * (j + 1)..2 * l * (j + 2)])).collect(),
            action: y[dim - 1],
        })
    }

    /// Real Jacobian of the time-`t` flow map and the end point.
    pub fn flow_jacobian(&self, psi0: &[Cplx<T>], t: T, tol: T) -> Result<(Vec<Cplx<T>>, Matrix<T>, T)> {
        let l = self.sites();
        let basis: Vec<Vec<Cplx<T>>> = (0..2 * l)
            .map(|k| {
                let mut v = vec![czero(); l];
                v[k % l] = if k < l { cplx(T::one(), T::zero()) } else { cplx(T::zero(), T::one()) };
                v
            })
            .collect();
        let st = self.integrate_variational(psi0, &basis, t, tol)?;
        let mut m = Matrix::zeros(2 * l, 2 * l);
        for (k, v) in st.tangents.iter().enumerate() {
            for i in 0..l {
                m[(i, k)] = v[i].re;
                m[(l + i, k)] = v[i].im;
            }
        }
        Ok((st.psi, m, st.action))
    }
}

/// Scaled GPE flow from a unit-norm initial field.
pub fn gpe_flow<T: Real>(params: &BoseHubbardParams<T>, psi0: &[Cplx<T>], t_grid: &[T], tol: T) -> Result<Trajectory<T>> {
    if (norm_sqr(psi0).sqrt() - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
        return invalid("scaled mean-field state must have unit norm");
    }
    MeanField::scaled(params).flow(psi0, t_grid, tol)
}

#[derive(Debug, Clone)]
pub struct LyapunovEstimate<T: Real> {
    /// Final running estimate, in units of the inverse time unit.
    pub lambda: T,
    /// `(t, running estimate)` after each renormalization.
    pub series: Vec<(T, T)>,
    pub renorm_dt: T,
    /// Relative spread of the running estimate over the last half of the run.
    pub variation: T,
    /// `variation <= 0.1`.
    pub converged: bool,
}

fn project_symmetry_directions<T: Real>(psi: &[Cplx<T>], v: &mut [Cplx<T>]) {
    let n = norm_sqr(psi);
    if n == T::zero() {
        return;
    }
    // real inner products with psi (norm change) and i psi (global phase)
    let a = inner(psi, v).re / n;
    let ipsi: Vec<Cplx<T>> = psi.iter().map(|z| cplx(-z.im, z.re)).collect();
    let b = inner(&ipsi, v).re / n;
    for i in 0..v.len() {
        v[i] = v[i] - psi[i] * a - ipsi[i] * b;
    }
}

/// Largest Lyapunov exponent by tangent evolution with periodic
/// renormalization. Deviations along `psi` and `i psi` are removed at each
/// renormalization; the initial tangent vector is drawn from `seed`.
pub fn lyapunov_max<T: Real>(
    mf: &MeanField<T>,
    psi0: &[Cplx<T>],
    t_total: T,
    renorm_dt: T,
    seed: u64,
    tol: T,
) -> Result<LyapunovEstimate<T>> {
    if !(renorm_dt > T::zero()) || !(t_total >= renorm_dt) {
        return invalid("need 0 < renormalization interval <= total time");
    }
    let l = mf.sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Cplx<T>> = (0..l)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            cplx(T::lit(a), T::lit(b))
        })
        .collect();
    let mut psi = psi0.to_vec();
    project_symmetry_directions(&psi, &mut v);
    let n = norm_sqr(&v).sqrt();
    if n == T::zero() {
        return Err(Error::NoConvergence("tangent seed lies in the symmetry directions".into()));
    }
    for z in v.iter_mut() {
        *z = *z / n;
    }
    let steps = (t_total / renorm_dt).round().to_usize().unwrap_or(1).max(1);
    let mut sum = T::zero();
    let mut series = Vec::with_capacity(steps);
    for s in 1..=steps {
        let st = mf.integrate_variational(&psi, std::slice::from_ref(&v), renorm_dt, tol)?;
        psi = st.psi;
        v = st.tangents.into_iter().next().unwrap();
        project_symmetry_directions(&psi, &mut v);
        let n = norm_sqr(&v).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::NoConvergence("tangent vector collapsed".into()));
        }
        sum += n.ln();
        for z in v.iter_mut() {
            *z = *z / n;
        }
        let t = T::of_usize(s) * renorm_dt;
        series.push((t, sum / t));
    }
    let lambda = series.last().unwrap().1;
    let tail = &series[series.len() / 2..];
    let hi = tail.iter().map(|p| p.1).fold(T::neg_infinity(), T::max);
    let lo = tail.iter().map(|p| p.1).fold(T::infinity(), T::min);
    let variation = if lambda.abs() > T::zero() { (hi - lo) / lambda.abs() } else { T::infinity() };
    Ok(LyapunovEstimate { lambda, series, renorm_dt, variation, converged: variation <= T::lit(0.1) })
}

/// `t_E = ln(N) / lambda`.
pub fn ehrenfest_time<T: Real>(lambda: T, particles: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return invalid("Ehrenfest time needs a positive Lyapunov exponent");
    }
    if !(particles >= T::one()) {
        return invalid("Ehrenfest time needs N >= 1");
    }
    Ok(particles.ln() / lambda)
}

/// A relative equilibrium `dH/dpsi^* = mu psi`, `|psi| = 1`.
#[derive(Debug, Clone)]
pub struct FixedPoint<T: Real> {
    pub psi: Vec<Cplx<T>>,
    pub mu: T,
    pub energy: T,
    /// Eigenvalues of the linearized flow in the frame rotating with `mu`.
    pub eigenvalues: Vec<Cplx<T>>,
    /// Largest real part of `eigenvalues`.
    pub max_exponent: T,
    pub residual: T,
}

#[derive(Debug, Clone)]
pub struct FixedPointSearch<T: Real> {
    pub found: Vec<FixedPoint<T>>,
    /// `(guess index, reason)` for guesses that did not converge.
    pub failures: Vec<(usize, String)>,
}

fn anchor_site<T: Real>(psi: &[Cplx<T>]) -> usize {
    let mut best = 0;
    for (i, z) in psi.iter().enumerate() {
        if z.norm() > psi[best].norm() * T::lit(1.0 + 1e-9) {
            best = i;
        }
    }
    best
}

fn rotate_real<T: Real>(psi: &mut [Cplx<T>], site: usize) {
    let z = psi[site];
    if z.norm() > T::zero() {
        let ph = z.conj() / z.norm();
        for w in psi.iter_mut() {
            *w = *w * ph;
        }
    }
}

/// Newton search for a relative equilibrium starting from `guess`.
pub fn find_fixed_point<T: Real>(mf: &MeanField<T>, guess: &[Cplx<T>], tol: T) -> Result<FixedPoint<T>> {
    let l = mf.sites();
    if guess.len() != l {
        return invalid("guess has the wrong number of sites");
    }
    let n0 = norm_sqr(guess).sqrt();
    if n0 == T::zero() {
        return invalid("zero guess");
    }
    let mut psi: Vec<Cplx<T>> = guess.iter().map(|z| *z / n0).collect();
    let a = anchor_site(&psi);
    rotate_real(&mut psi, a);
    let mut mu = inner(&psi, &mf.symbol.gradient(&psi)).re;
    let residual = |psi: &[Cplx<T>], mu: T| -> Vec<T> {
        let g = mf.symbol.gradient(psi);
        let mut r = Vec::with_capacity(2 * l + 2);
        r.extend(g.iter().zip(psi).map(|(g, p)| (*g - *p * mu).re));
        r.extend(g.iter().zip(psi).map(|(g, p)| (*g - *p * mu).im));
        r.push(norm_sqr(psi) - T::one());
        r.push(psi[a].im);
        r
    };
    let rnorm = |r: &[T]| dot(r, r).sqrt();
    let mut r = residual(&psi, mu);
    for _ in 0..100 {
        if rnorm(&r) <= tol {
            break;
        }
        let gj = mf.gradient_jacobian(&psi, mu);
        let mut jac = Matrix::zeros(2 * l + 2, 2 * l + 1);
        for i in 0..2 * l {
            for k in 0..2 * l {
                jac[(i, k)] = gj[(i, k)];
            }
        }
        for i in 0..l {
            jac[(i, 2 * l)] = -psi[i].re;
            jac[(l + i, 2 * l)] = -psi[i].im;
            jac[(2 * l, i)] = T::lit(2.0) * psi[i].re;
            jac[(2 * l, l + i)] = T::lit(2.0) * psi[i].im;
        }
        jac[(2 * l + 1, l + a)] = T::one();
        let rhs: Vec<T> = r.iter().map(|x| -*x).collect();
        let step = least_squares(&jac, &rhs, T::lit(1e-12))?;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<Cplx<T>> = (0..l).map(|i| psi[i] + cplx(step[i], step[l + i]) * alpha).collect();
            let mu_t = mu + step[2 * l] * alpha;
            let rt = residual(&trial, mu_t);
            if rnorm(&rt) < rnorm(&r) {
                psi = trial;
                mu = mu_t;
                r = rt;
                accepted = true;
                break;
            }
            alpha = alpha * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    let res = rnorm(&r);
    if !(res <= tol) {
        return Err(Error::NoConvergence(format!("fixed-point residual {:.3e} above tolerance", res.to_f64_lossy())));
    }
    let jac = mf.gradient_jacobian(&psi, mu);
    // flow in the rotating frame: (dx, dy) = (Im, -Re) of the variation
    let lin = Matrix::from_fn(2 * l, 2 * l, |i, k| if i < l { jac[(l + i, k)] } else { -jac[(i - l, k)] });
    let eigenvalues = general_eigenvalues(&lin)?;
    let max_exponent = eigenvalues.iter().map(|z| z.re).fold(T::neg_infinity(), T::max);
    Ok(FixedPoint { energy: mf.energy(&psi), psi, mu, eigenvalues, max_exponent, residual: res })
}

/// Multi-start fixed-point search; converged results are deduplicated up to
/// global phase.
pub fn find_fixed_points<T: Real>(mf: &MeanField<T>, guesses: &[Vec<Cplx<T>>], tol: T) -> FixedPointSearch<T> {
    let results: Vec<Result<FixedPoint<T>>> = guesses.par_iter().map(|g| find_fixed_point(mf, g, tol)).collect();
    let mut found: Vec<FixedPoint<T>> = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(fp) => {
                let dup = found.iter().any(|f| {
                    inner(&f.psi, &fp.psi).norm() >= T::one() - T::lit(1e-8) && (f.mu - fp.mu).abs() <= T::lit(1e-8)
                });
                if !dup {
                    found.push(fp);
                }
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    FixedPointSearch { found, failures }
}

#[derive(Debug, Clone, Copy)]
pub struct PeriodicModeOptions<T: Real> {
    /// Newton tolerance on the stacked residual.
    pub tol: T,
    pub max_iter: usize,
    /// Energy of the sought mode; defaults to the energy of the guess.
    pub energy: Option<T>,
    /// Integrator tolerance.
    pub integrator_tol: T,
}

impl<T: Real> Default for PeriodicModeOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-10), max_iter: 60, energy: None, integrator_tol: T::lit(1e-13) }
    }
}

/// A relative-periodic solution `psi(T) = e^{-i chi} psi(0)`.
#[derive(Debug, Clone)]
pub struct PeriodicMode<T: Real> {
    pub psi0: Vec<Cplx<T>>,
    pub period: T,
    /// Global phase accumulated over one period.
    pub chi: T,
    /// `chi / T`.
    pub mu_rot: T,
    pub energy: T,
    /// `‖psi(T) - e^{-i chi} psi(0)‖`.
    pub residual: T,
    /// Reduced action `-∮ Im(psi^+ dpsi) - chi |psi|^2`, defined modulo `2 pi`.
    pub action: T,
    /// Linearized return map in the co-rotating frame, `2L x 2L`.
    pub monodromy_full: Matrix<T>,
    /// Monodromy on the symplectic complement of the phase and norm
    /// directions, `2(L-1) x 2(L-1)`, in a symplectic basis.
    pub monodromy: Matrix<T>,
    pub multipliers: Vec<Cplx<T>>,
    /// `ln|multiplier| / T`, descending.
    pub exponents: Vec<T>,
    /// `max(‖M f - f‖/‖f‖, ‖M g - g‖/‖g‖)` for the flow vector `f` and the
    /// phase generator `g`; both are unit multipliers of the full map.
    pub trivial_defect: T,
}

impl<T: Real> PeriodicMode<T> {
    pub fn leading_exponent(&self) -> T {
        self.exponents.first().copied().unwrap_or(T::zero())
    }
}

/// Newton-shooting search for a relative-periodic mode.
///
/// Unknowns are the initial field, the period `T` and the phase `chi`.
/// Besides closure the system pins the phase of the largest component, a
/// Poincare section through the guess, the energy and the norm; the
/// overdetermined system is solved in the least-squares sense so that
/// relative equilibria (where period and section degenerate) still converge.
pub fn find_periodic_mode<T: Real>(
    mf: &MeanField<T>,
    psi_guess: &[Cplx<T>],
    t_guess: T,
    mu_guess: T,
    opts: &PeriodicModeOptions<T>,
) -> Result<PeriodicMode<T>> {
    let l = mf.sites();
    if psi_guess.len() != l {
        return invalid("guess has the wrong number of sites");
    }
    if !(t_guess > T::zero()) {
        return invalid("period guess must be positive");
    }
    let mut psi = psi_guess.to_vec();
    let a = anchor_site(&psi);
    rotate_real(&mut psi, a);
    let n_target = norm_sqr(&psi);
    let e_target = opts.energy.unwrap_or_else(|| mf.energy(&psi));
    let reference = packed(&psi);
    let section = {
        let mut f = mf.velocity(&psi);
        project_out_phase(&psi, &mut f);
        let f = packed(&f);
        let n = dot(&f, &f).sqrt();
        if n > T::lit(1e-10) { f.iter().map(|x| *x / n).collect() } else { vec![T::zero(); 2 * l] }
    };
    let mut period = t_guess;
    let mut chi = mu_guess * t_guess;
    let itol = opts.integrator_tol;

    let eval = |psi: &[Cplx<T>], period: T, chi: T, with_jac: bool| -> Result<(Vec<T>, Option<Matrix<T>>)> {
        let x = packed(psi);
        let (end, dphi) = if with_jac {
            let (end, m, _) = mf.flow_jacobian(psi, period, itol)?;
            (end, Some(m))
        } else {
            (mf.integrate_variational(psi, &[], period, itol)?.psi, None)
        };
        let rot: Vec<Cplx<T>> = psi.iter().map(|z| *z * cis(-chi)).collect();
        let mut r = Vec::with_capacity(2 * l + 4);
        let diff: Vec<Cplx<T>> = end.iter().zip(&rot).map(|(a, b)| *a - *b).collect();
        r.extend(packed(&diff));
        r.push(psi[a].im);
        r.push(dot(&section, &x.iter().zip(&reference).map(|(p, q)| *p - *q).collect::<Vec<T>>()));
        r.push(mf.energy(psi) - e_target);
        r.push(norm_sqr(psi) - n_target);
        let jac = dphi.map(|dphi| {
            let mut jac = Matrix::zeros(2 * l + 4, 2 * l + 2);
            let back = rotation::<T>(l, -chi);
            for i in 0..2 * l {
                for k in 0..2 * l {
                    jac[(i, k)] = dphi[(i, k)] - back[(i, k)];
                }
            }
            let f_end = packed(&mf.velocity(&end));
            let irot = packed(&rot.iter().map(|z| cplx(-z.im, z.re)).collect::<Vec<_>>());
            for i in 0..2 * l {
                jac[(i, 2 * l)] = f_end[i];
                jac[(i, 2 * l + 1)] = irot[i];
            }
            jac[(2 * l, l + a)] = T::one();
            let g = mf.symbol.gradient(psi);
            for k in 0..2 * l {
                jac[(2 * l + 1, k)] = section[k];
            }
            let two = T::lit(2.0);
            for i in 0..l {
                jac[(2 * l + 2, i)] = two * g[i].re;
                jac[(2 * l + 2, l + i)] = two * g[i].im;
                jac[(2 * l + 3, i)] = two * psi[i].re;
                jac[(2 * l + 3, l + i)] = two * psi[i].im;
            }
            jac
        });
        Ok((r, jac))
    };
    let rnorm = |r: &[T]| dot(r, r).sqrt();

    let (mut r, mut jac) = eval(&psi, period, chi, true)?;
    let mut converged = rnorm(&r) <= opts.tol;
    for _ in 0..opts.max_iter {
        if converged {
            break;
        }
        let rhs: Vec<T> = r.iter().map(|x| -*x).collect();
        let step = least_squares(jac.as_ref().unwrap(), &rhs, T::lit(1e-10))?;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..20 {
            let trial: Vec<Cplx<T>> = (0..l).map(|i| psi[i] + cplx(step[i], step[l + i]) * alpha).collect();
            let tp = period + step[2 * l] * alpha;
            let cp = chi + step[2 * l + 1] * alpha;
            if tp > T::zero() {
                let (rt, _) = eval(&trial, tp, cp, false)?;
                if rnorm(&rt) < rnorm(&r) {
                    psi = trial;
                    period = tp;
                    chi = cp;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        if !accepted {
            break;
        }
        let (rn, jn) = eval(&psi, period, chi, true)?;
        r = rn;
        jac = jn;
        converged = rnorm(&r) <= opts.tol;
    }
    if !converged {
        return Err(Error::NoConvergence(format!("periodic-mode residual {:.3e} above tolerance", rnorm(&r).to_f64_lossy())));
    }
    finish_mode(mf, psi, period, chi, itol)
}

/// Period guess from the first return of `|psi_a|^2 - |psi_b|^2` to its
/// initial value with the initial sign of its velocity, then Newton shooting.
/// The flow is sampled every `dt` up to `t_max`.
pub fn mode_from_section<T: Real>(
    mf: &MeanField<T>,
    psi_start: &[Cplx<T>],
    sites: (usize, usize),
    t_max: T,
    dt: T,
    opts: &PeriodicModeOptions<T>,
) -> Result<PeriodicMode<T>> {
    let (a, b) = sites;
    let l = mf.sites();
    if a >= l || b >= l || a == b {
        return invalid(format!("section sites ({a}, {b}) invalid for {l} sites"));
    }
    if !(dt > T::zero()) || !(t_max > dt) {
        return invalid("need 0 < dt < t_max for the section scan");
    }
    let s = |psi: &[Cplx<T>]| psi[a].norm_sqr() - psi[b].norm_sqr();
    let s0 = s(psi_start);
    let v = mf.velocity(psi_start);
    let ds = T::lit(2.0) * ((psi_start[a].conj() * v[a]).re - (psi_start[b].conj() * v[b]).re);
    if ds.abs() < T::lit(1e-9) {
        return Err(Error::NoConvergence("section is tangent to the flow at the starting point".into()));
    }
    let steps = (t_max / dt).ceil().to_f64_lossy() as usize;
    let grid: Vec<T> = (0..=steps).map(|k| dt * T::of_usize(k)).collect();
    let tr = mf.flow(psi_start, &grid, opts.integrator_tol.max(T::lit(1e-12)))?;
    let sign = ds.signum();
    let vals: Vec<T> = tr.states.iter().map(|p| (s(p) - s0) * sign).collect();
    // skip the departure from the section before looking for the return
    let mut k = 1;
    while k < vals.len() && vals[k] <= T::zero() {
        k += 1;
    }
    while k < vals.len() && vals[k] > T::zero() {
        k += 1;
    }
    let mut ret = None;
    while k < vals.len() {
        if vals[k - 1] < T::zero() && vals[k] >= T::zero() {
            let f = vals[k - 1] / (vals[k - 1] - vals[k]);
            ret = Some((k, grid[k - 1] + f * dt));
            break;
        }
        k += 1;
    }
    let (k, t_ret) = ret.ok_or_else(|| Error::NoConvergence(format!("no return to the section before t = {}", t_max.to_f64_lossy())))?;
    let anchor = anchor_site(psi_start);
    let chi = -(tr.states[k][anchor] / psi_start[anchor]).arg() * t_ret / grid[k];
    find_periodic_mode(mf, psi_start, t_ret, chi / t_ret, opts)
}

fn project_out_phase<T: Real>(psi: &[Cplx<T>], v: &mut [Cplx<T>]) {
    let n = norm_sqr(psi);
    let ipsi: Vec<Cplx<T>> = psi.iter().map(|z| cplx(-z.im, z.re)).collect();
    let b = inner(&ipsi, v).re / n;
    for (vi, g) in v.iter_mut().zip(&ipsi) {
        *vi = *vi - *g * b;
    }
}

/// Monodromy, action and stability of a converged relative-periodic orbit.
pub fn finish_mode<T: Real>(mf: &MeanField<T>, psi0: Vec<Cplx<T>>, period: T, chi: T, tol: T) -> Result<PeriodicMode<T>> {
    let l = mf.sites();
    let (end, dphi, action_full) = mf.flow_jacobian(&psi0, period, tol)?;
    let rot: Vec<Cplx<T>> = psi0.iter().map(|z| *z * cis(-chi)).collect();
    let residual = norm_sqr(&end.iter().zip(&rot).map(|(a, b)| *a - *b).collect::<Vec<_>>()).sqrt();
    let m_full = rotation::<T>(l, chi).matmul(&dphi);
    let f = packed(&mf.velocity(&psi0));
    let g = packed(&psi0.iter().map(|z| cplx(-z.im, z.re)).collect::<Vec<_>>());
    let rel = |v: &[T]| {
        let mv = m_full.matvec(v);
        let n = dot(v, v).sqrt();
        let d: Vec<T> = mv.iter().zip(v).map(|(a, b)| *a - *b).collect();
        if n > T::zero() { dot(&d, &d).sqrt() / n } else { T::zero() }
    };
    let trivial_defect = rel(&f).max(rel(&g));
    let monodromy = reduce_monodromy(&m_full, &psi0)?;
    let multipliers = if monodromy.rows() > 0 { general_eigenvalues(&monodromy)? } else { Vec::new() };
    let mut exponents: Vec<T> = multipliers.iter().map(|m| m.norm().ln() / period).collect();
    exponents.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let n = norm_sqr(&psi0);
    Ok(PeriodicMode {
        energy: mf.energy(&psi0),
        psi0,
        period,
        chi,
        mu_rot: chi / period,
        residual,
        action: action_full - chi * n,
        monodromy_full: m_full,
        monodromy,
        multipliers,
        exponents,
        trivial_defect,
    })
}

/// Restrict a full return-map Jacobian to the symplectic complement of the
/// phase generator `i psi` and the radial direction `psi`, expressed in a
/// symplectic basis of that complement.
pub fn reduce_monodromy<T: Real>(m_full: &Matrix<T>, psi0: &[Cplx<T>]) -> Result<Matrix<T>> {
    let l = psi0.len();
    let g = packed(&psi0.iter().map(|z| cplx(-z.im, z.re)).collect::<Vec<_>>());
    let nvec = packed(psi0);
    let w = symplectic_form(&g, &nvec);
    if w == T::zero() {
        return invalid("cannot reduce around a zero field");
    }
    let nprime: Vec<T> = nvec.iter().map(|x| *x / w).collect();
    let project = |v: &[T]| -> Vec<T> {
        let a = symplectic_form(&nprime, v);
        let b = symplectic_form(&g, v);
        v.iter().zip(&g).zip(&nprime).map(|((vi, gi), ni)| *vi + a * *gi - b * *ni).collect()
    };
    let mut pool: Vec<Vec<T>> = (0..2 * l)
        .map(|k| {
            let mut e = vec![T::zero(); 2 * l];
            e[k] = T::one();
            project(&e)
        })
        .collect();
    let mut es: Vec<Vec<T>> = Vec::new();
    let mut fs: Vec<Vec<T>> = Vec::new();
    for _ in 0..l - 1 {
        let (ie, _) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(v, v)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| Error::NoConvergence("symplectic basis construction ran out of vectors".into()))?;
        let mut e = pool.swap_remove(ie);
        let ne = dot(&e, &e).sqrt();
        if !(ne > T::lit(1e-12)) {
            return Err(Error::NoConvergence("degenerate symplectic complement".into()));
        }
        for x in e.iter_mut() {
            *x /= ne;
        }
        let (jf, wf) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, symplectic_form(&e, v)))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .ok_or_else(|| Error::NoConvergence("no symplectic partner".into()))?;
        if !(wf.abs() > T::lit(1e-12)) {
            return Err(Error::NoConvergence("no symplectic partner".into()));
        }
        let mut f = pool.swap_remove(jf);
        for x in f.iter_mut() {
            *x /= wf;
        }
        for v in pool.iter_mut() {
            let a = symplectic_form(v, &f);
            let b = symplectic_form(v, &e);
            for i in 0..2 * l {
                v[i] = v[i] - a * e[i] + b * f[i];
            }
        }
        es.push(e);
        fs.push(f);
    }
    let m = l - 1;
    let mut red = Matrix::zeros(2 * m, 2 * m);
    for k in 0..2 * m {
        let b = if k < m { &es[k] } else { &fs[k - m] };
        let img = m_full.matvec(b);
        for i in 0..m {
            red[(i, k)] = symplectic_form(&img, &fs[i]);
            red[(m + i, k)] = symplectic_form(&es[i], &img);
        }
    }
    Ok(red)
}

/// Smooth density of states from the mean-field energy shell.
#[derive(Debug, Clone)]
pub struct WeylDensity<T: Real> {
    /// Total energies `E` at which the density was evaluated.
    pub energies: Vec<T>,
    /// States per unit `E`.
    pub density: Vec<T>,
    /// Monte Carlo standard errors.
    pub error: Vec<T>,
    /// Kernel bandwidth in scaled energy `E / N`.
    pub bandwidth: T,
    /// `(N + L/2)^(L-1) / (L-1)!`, the shell volume in units of `(2 pi)^L`.
    pub shell_states: T,
}

/// Draw `count` points uniformly on the unit sphere `sum |psi|^2 = 1` and
/// return their scaled energies.
pub fn sample_shell_energies<T: Real>(mf: &MeanField<T>, count: usize, seed: u64) -> Vec<T> {
    const CHUNK: usize = 4096;
    let l = mf.sites();
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(count - c * CHUNK);
            let mut psi = vec![czero::<T>(); l];
            (0..n)
                .map(|_| {
                    for z in psi.iter_mut() {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        *z = cplx(T::lit(a), T::lit(b));
                    }
                    let s = norm_sqr(&psi).sqrt();
                    for z in psi.iter_mut() {
                        *z = *z / s;
                    }
                    mf.energy(&psi)
                })
                .collect::<Vec<T>>()
        })
        .collect()
}

/// Weyl density `rho(E)` of the sector with `params.particles` bosons:
/// shell volume times the Gaussian-kernel density of the scaled energy.
/// `bandwidth` is in scaled energy; `None` uses Silverman's rule.
pub fn weyl_density<T: Real>(
    params: &BoseHubbardParams<T>,
    energies: &[T],
    sample_count: usize,
    seed: u64,
    bandwidth: Option<T>,
) -> Result<WeylDensity<T>> {
    if sample_count < 10_000 {
        return Err(Error::InsufficientData("Weyl density needs at least 10^4 samples".into()));
    }
    if params.particles == 0 {
        return invalid("Weyl density needs N >= 1");
    }
    let mf = MeanField::scaled(params);
    let h = sample_shell_energies(&mf, sample_count, seed);
    let nf = T::of_usize(sample_count);
    let mean = h.iter().copied().sum::<T>() / nf;
    let var = h.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / nf;
    let bw = bandwidth.unwrap_or_else(|| T::lit(1.06) * var.sqrt() * nf.powf(T::lit(-0.2)));
    if !(bw > T::zero()) {
        return invalid("kernel bandwidth must be positive");
    }
    let l = params.sites;
    let n = T::of_usize(params.particles);
    let mut shell = T::one();
    let base = n + T::of_usize(l) / T::lit(2.0);
    for k in 1..l {
        shell = shell * base / T::of_usize(k);
    }
    let norm = T::one() / (bw * T::TAU().sqrt());
    let mut density = Vec::with_capacity(energies.len());
    let mut error = Vec::with_capacity(energies.len());
    for &e in energies {
        let eps = e / n;
        let (mut s1, mut s2) = (T::zero(), T::zero());
        for &x in &h {
            let u = (x - eps) / bw;
            let k = (-u * u / T::lit(2.0)).exp() * norm;
            s1 += k;
            s2 += k * k;
        }
        if s1 == T::zero() {
            return Err(Error::InsufficientData(format!("no shell samples near E = {}", e.to_f64_lossy())));
        }
        let p = s1 / nf;
        let var_p = (s2 / nf - p * p).max(T::zero()) / nf;
        density.push(shell * p / n);
        error.push(shell * var_p.sqrt() / n);
    }
    Ok(WeylDensity { energies: energies.to_vec(), density, error, bandwidth: bw, shell_states: shell })
}

/// CSV catalog of periodic modes: `T, S, residual, leading exponent`,
/// then real and imaginary parts of the initial field.
pub fn write_mode_catalog<T: Real, W: Write>(mut w: W, modes: &[PeriodicMode<T>]) -> std::io::Result<()> {
    let l = modes.first().map(|m| m.psi0.len()).unwrap_or(0);
    write!(w, "T,S,residual,leading_exponent")?;
    for i in 0..l {
        write!(w, ",re_psi{i},im_psi{i}")?;
    }
    writeln!(w)?;
    for m in modes {
        write!(w, "{},{},{},{}", m.period, m.action, m.residual, m.leading_exponent())?;
        for z in &m.psi0 {
            write!(w, ",{},{}", z.re, z.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
