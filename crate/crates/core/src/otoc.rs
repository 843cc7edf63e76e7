//! Out-of-time-order commutators `C(t) = ‖[W(t), V] psi0‖^2` for single-site
//! operators, growth-rate and saturation extraction, and the closed- and
//! open-system theory curves.
//!
//! Operators are intensive: `n_i / N`, `q_i = (b_i + b_i^+) / sqrt(2N)` and
//! `p_i = (b_i - b_i^+) / (i sqrt(2N))`, with `N` the particle number of the
//! initial sector. Quadratures change the particle number by one; states are
//! then carried as a set of sector components, each propagated with the
//! Hamiltonian of its own sector.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::dynamics::{full_diagonalize, propagate, DenseSpectrum, KrylovOptions};
use crate::error::{invalid, Error, Result};
use crate::fock::{apply_ladder, FockBasis, Ladder, StateVector};
use crate::hamiltonian::{build_bose_hubbard, SparseHamiltonian};
use crate::scalar::{cplx, czero, inner, norm_sqr, Cplx, Real};

/// Intensive single-site operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteOperator {
    Number(usize),
    Position(usize),
    Momentum(usize),
}

impl SiteOperator {
    pub fn site(&self) -> usize {
        match *self {
            SiteOperator::Number(i) | SiteOperator::Position(i) | SiteOperator::Momentum(i) => i,
        }
    }

    fn changes_sector(&self) -> bool {
        !matches!(self, SiteOperator::Number(_))
    }
}

impl fmt::Display for SiteOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteOperator::Number(i) => write!(f, "n{i}/N"),
            SiteOperator::Position(i) => write!(f, "q{i}"),
            SiteOperator::Momentum(i) => write!(f, "p{i}"),
        }
    }
}

/// Least-squares line through `ln C(t)` on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit<T: Real> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub t_start: T,
    pub t_end: T,
    pub points: usize,
}

impl<T: Real> GrowthFit<T> {
    pub fn eval(&self, t: T) -> T {
        (self.intercept + self.slope * t).exp()
    }
}

/// Saturation level and onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation<T: Real> {
    pub t_sat: T,
    pub level: T,
}

#[derive(Debug, Clone)]
pub struct OtocSeries<T: Real> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// `F(t) = <psi0| W(t) V W(t) V |psi0>`.
    pub correlator: Vec<Cplx<T>>,
    pub v: SiteOperator,
    pub w: SiteOperator,
    pub initial_state: String,
    pub normalization: String,
    pub fit: Option<GrowthFit<T>>,
    pub saturation: Option<Saturation<T>>,
}

type Sectors<T> = BTreeMap<usize, Vec<Cplx<T>>>;

struct SectorSet {
    sites: usize,
    reference: usize,
    bases: BTreeMap<usize, Arc<FockBasis>>,
}

impl SectorSet {
    fn apply<T: Real>(&self, op: SiteOperator, state: &Sectors<T>) -> Result<Sectors<T>> {
        let site = op.site();
        if site >= self.sites {
            return Err(Error::SiteOutOfRange { site, sites: self.sites });
        }
        let nf = T::of_usize(self.reference);
        let mut out: Sectors<T> = BTreeMap::new();
        let mut add = |n: usize, v: Vec<Cplx<T>>, c: Cplx<T>| {
            let e = out.entry(n).or_insert_with(|| vec![czero(); v.len()]);
            for (a, b) in e.iter_mut().zip(v) {
                *a += b * c;
            }
        };
        for (&n, amp) in state {
            let sv = StateVector::from_amplitudes(Arc::clone(self.basis(n)?), amp.clone())?;
            match op {
                SiteOperator::Number(_) => {
                    let r = apply_ladder(Ladder::Number, site, &sv, self.basis(n)?)?;
                    add(n, r.into_amplitudes(), cplx(T::one() / nf, T::zero()));
                }
                SiteOperator::Position(_) | SiteOperator::Momentum(_) => {
                    let s = T::one() / (T::lit(2.0) * nf).sqrt();
                    let (ca, cc) = if op == SiteOperator::Position(site) {
                        (cplx(s, T::zero()), cplx(s, T::zero()))
                    } else {
                        (cplx(T::zero(), -s), cplx(T::zero(), s))
                    };
                    if n > 0 {
                        let r = apply_ladder(Ladder::Annihilate, site, &sv, self.basis(n - 1)?)?;
                        add(n - 1, r.into_amplitudes(), ca);
                    }
                    let r = apply_ladder(Ladder::Create, site, &sv, self.basis(n + 1)?)?;
                    add(n + 1, r.into_amplitudes(), cc);
                }
            }
        }
        Ok(out)
    }

    fn basis(&self, n: usize) -> Result<&Arc<FockBasis>> {
        self.bases
            .get(&n)
            .ok_or_else(|| Error::SectorMismatch(format!("operator leaves the prepared sectors (N = {n})")))
    }
}

fn sector_range(n: usize, v: SiteOperator, w: SiteOperator) -> std::ops::RangeInclusive<usize> {
    let reach = usize::from(v.changes_sector()) + usize::from(w.changes_sector());
    n.saturating_sub(reach)..=n + reach
}

fn sectors_norm_sqr<T: Real>(s: &Sectors<T>) -> T {
    s.values().map(|v| norm_sqr(v)).sum()
}

fn sectors_inner<T: Real>(a: &Sectors<T>, b: &Sectors<T>) -> Cplx<T> {
    a.iter().filter_map(|(n, va)| b.get(n).map(|vb| inner(va, vb))).fold(czero(), |x, y| x + y)
}

fn sectors_sub<T: Real>(a: &Sectors<T>, b: &Sectors<T>) -> Sectors<T> {
    let mut out = a.clone();
    for (n, vb) in b {
        let e = out.entry(*n).or_insert_with(|| vec![czero(); vb.len()]);
        for (x, y) in e.iter_mut().zip(vb) {
            *x -= *y;
        }
    }
    out
}

fn otoc_core<T: Real>(
    sectors: &SectorSet,
    prop: &(dyn Fn(usize, &[Cplx<T>], T) -> Result<Vec<Cplx<T>>> + Sync),
    v: SiteOperator,
    w: SiteOperator,
    psi0: &StateVector<T>,
    t_grid: &[T],
) -> Result<(Vec<T>, Vec<Cplx<T>>)> {
    let evolve = |s: &Sectors<T>, t: T| -> Result<Sectors<T>> {
        s.iter().map(|(n, a)| Ok((*n, prop(*n, a, t)?))).collect()
    };
    let n0 = psi0.basis().particles();
    let mut fwd_psi: Sectors<T> = BTreeMap::from([(n0, psi0.amplitudes().to_vec())]);
    let mut fwd_vpsi = sectors.apply(v, &fwd_psi)?;
    let mut t_prev = T::zero();
    let mut values = Vec::with_capacity(t_grid.len());
    let mut corr = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_prev;
        if dt != T::zero() {
            let (a, b) = rayon::join(|| evolve(&fwd_psi, dt), || evolve(&fwd_vpsi, dt));
            fwd_psi = a?;
            fwd_vpsi = b?;
        }
        t_prev = t;
        let wa = sectors.apply(w, &fwd_psi)?;
        let wb = sectors.apply(w, &fwd_vpsi)?;
        // W(t) psi0 and W(t) V psi0
        let (a, b) = rayon::join(|| evolve(&wa, -t), || evolve(&wb, -t));
        let (a, b) = (a?, b?);
        let va = sectors.apply(v, &a)?;
        values.push(sectors_norm_sqr(&sectors_sub(&b, &va)));
        corr.push(sectors_inner(&va, &b));
    }
    Ok((values, corr))
}

fn describe_normalization(v: SiteOperator, w: SiteOperator) -> String {
    format!("C = ‖[W(t), V] psi0‖^2 with V = {v}, W = {w}; n_i scaled by 1/N, q and p by 1/sqrt(2N)")
}

fn check_grid<T: Real>(t_grid: &[T]) -> Result<()> {
    if t_grid.is_empty() {
        return invalid("empty time grid");
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return invalid("non-finite time in grid");
    }
    Ok(())
}

/// `C(t)` on `t_grid` (absolute times from 0) by Krylov propagation.
/// Sectors reached by quadrature operators are assembled from the
/// parameters of `h`.
pub fn otoc_exact<T: Real>(
    h: &SparseHamiltonian<T>,
    v: SiteOperator,
    w: SiteOperator,
    psi0: &StateVector<T>,
    t_grid: &[T],
    opts: &KrylovOptions<T>,
) -> Result<OtocSeries<T>> {
    check_grid(t_grid)?;
    if **psi0.basis() != **h.basis() {
        return Err(Error::SectorMismatch("initial state is not in the Hamiltonian's sector".into()));
    }
    let n0 = h.basis().particles();
    let l = h.basis().sites();
    let mut bases = BTreeMap::new();
    let mut hams: BTreeMap<usize, SparseHamiltonian<T>> = BTreeMap::new();
    for n in sector_range(n0, v, w) {
        if n == n0 {
            bases.insert(n, Arc::clone(h.basis()));
            continue;
        }
        let b = Arc::new(FockBasis::new(l, n)?);
        hams.insert(n, build_bose_hubbard(&h.params().clone().with_particles(n), &b)?);
        bases.insert(n, b);
    }
    let sectors = SectorSet { sites: l, reference: n0, bases };
    let prop = |n: usize, a: &[Cplx<T>], t: T| -> Result<Vec<Cplx<T>>> {
        let hn = if n == n0 { h } else { hams.get(&n).ok_or_else(|| Error::SectorMismatch(format!("no sector N = {n}")))? };
        Ok(propagate(hn, a, t, opts)?.0)
    };
    let (values, correlator) = otoc_core(&sectors, &prop, v, w, psi0, t_grid)?;
    Ok(OtocSeries {
        times: t_grid.to_vec(),
        values,
        correlator,
        v,
        w,
        initial_state: format!("L={l}, N={n0}, dim={}", psi0.basis().dim()),
        normalization: describe_normalization(v, w),
        fit: None,
        saturation: None,
    })
}

/// Same as [`otoc_exact`] with propagation by full diagonalization of every
/// sector involved; `cap` bounds the sector dimension.
pub fn otoc_dense<T: Real>(
    h: &SparseHamiltonian<T>,
    v: SiteOperator,
    w: SiteOperator,
    psi0: &StateVector<T>,
    t_grid: &[T],
    cap: usize,
) -> Result<OtocSeries<T>> {
    check_grid(t_grid)?;
    let n0 = h.basis().particles();
    let l = h.basis().sites();
    let mut bases = BTreeMap::new();
    let mut spectra: BTreeMap<usize, DenseSpectrum<T>> = BTreeMap::new();
    for n in sector_range(n0, v, w) {
        let b = if n == n0 { Arc::clone(h.basis()) } else { Arc::new(FockBasis::new(l, n)?) };
        let hn = build_bose_hubbard(&h.params().clone().with_particles(n), &b)?;
        spectra.insert(n, full_diagonalize(&hn, cap)?);
        bases.insert(n, b);
    }
    let sectors = SectorSet { sites: l, reference: n0, bases };
    let prop = |n: usize, a: &[Cplx<T>], t: T| -> Result<Vec<Cplx<T>>> {
        Ok(spectra.get(&n).ok_or_else(|| Error::SectorMismatch(format!("no sector N = {n}")))?.propagate(a, t))
    };
    let (values, correlator) = otoc_core(&sectors, &prop, v, w, psi0, t_grid)?;
    Ok(OtocSeries {
        times: t_grid.to_vec(),
        values,
        correlator,
        v,
        w,
        initial_state: format!("L={l}, N={n0}, dim={}", psi0.basis().dim()),
        normalization: describe_normalization(v, w),
        fit: None,
        saturation: None,
    })
}

/// Window selection for [`fit_growth_rate`].
#[derive(Debug, Clone, Copy)]
pub struct WindowPolicy<T: Real> {
    pub min_points: usize,
    pub r2_min: T,
    /// Numerical floor of `C`; only points above `10 * floor` qualify.
    pub floor: T,
    pub t_min: Option<T>,
    /// Latest admissible time; `None` means the first time `C` reaches
    /// half the plateau when one is detected, and the full series otherwise.
    pub t_max: Option<T>,
}

impl<T: Real> Default for WindowPolicy<T> {
    fn default() -> Self {
        Self { min_points: 5, r2_min: T::lit(0.98), floor: T::lit(1e-14), t_min: None, t_max: None }
    }
}

fn line_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        sxx += (*a - mx) * (*a - mx);
        sxy += (*a - mx) * (*b - my);
        syy += (*b - my) * (*b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    (slope, my - slope * mx, r2)
}

/// Exponential growth rate of `C(t)`: the longest contiguous window whose
/// log-linear fit has `r^2 >= r2_min`.
pub fn fit_growth_rate<T: Real>(times: &[T], values: &[T], policy: &WindowPolicy<T>) -> Result<GrowthFit<T>> {
    if times.len() != values.len() {
        return invalid("times and values differ in length");
    }
    if policy.min_points < 3 {
        return invalid("growth fit needs at least three points per window");
    }
    let t_max = match policy.t_max {
        Some(t) => Some(t),
        None => plateau_level(times, values, &PlateauEstimator::default())
            .ok()
            .and_then(|p| times.iter().zip(values).find(|(_, c)| **c >= p.level * T::lit(0.5)).map(|(t, _)| *t)),
    };
    let ok = |k: usize| {
        values[k] > T::lit(10.0) * policy.floor
            && values[k].is_finite()
            && policy.t_min.is_none_or(|t0| times[k] >= t0)
            && t_max.is_none_or(|t1| times[k] <= t1)
    };
    let mut best: Option<GrowthFit<T>> = None;
    let n = times.len();
    let mut a = 0;
    while a < n {
        if !ok(a) {
            a += 1;
            continue;
        }
        let mut end = a;
        while end + 1 < n && ok(end + 1) {
            end += 1;
        }
        let logs: Vec<T> = values[a..=end].iter().map(|c| c.ln()).collect();
        for i in a..=end {
            for j in (i + policy.min_points - 1)..=end {
                let span = times[j] - times[i];
                if let Some(b) = &best {
                    let cur = b.t_end - b.t_start;
                    if span < cur {
                        continue;
                    }
                }
                let (slope, intercept, r2) = line_fit(&times[i..=j], &logs[i - a..=j - a]);
                if r2 < policy.r2_min {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => span > b.t_end - b.t_start || r2 > b.r2,
                };
                if better {
                    best = Some(GrowthFit { slope, intercept, r2, t_start: times[i], t_end: times[j], points: j - i + 1 });
                }
            }
        }
        a = end + 1;
    }
    best.ok_or_else(|| Error::DegenerateFit("no window with a clean exponential".into()))
}

/// Tail-based plateau detection.
#[derive(Debug, Clone, Copy)]
pub struct PlateauEstimator<T: Real> {
    /// Fraction of the series (at its end) treated as the tail.
    pub tail_fraction: T,
    /// Fraction trimmed from each side before averaging.
    pub trim: T,
    /// A tail is flat when its fitted slope is within this many standard errors of zero.
    pub sigmas: T,
}

impl<T: Real> Default for PlateauEstimator<T> {
    fn default() -> Self {
        Self { tail_fraction: T::lit(1.0 / 3.0), trim: T::lit(0.1), sigmas: T::lit(2.0) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Plateau<T: Real> {
    pub level: T,
    pub tail_slope: T,
    pub tail_slope_error: T,
}

/// Trimmed mean of the tail if the tail is flat.
pub fn plateau_level<T: Real>(times: &[T], values: &[T], est: &PlateauEstimator<T>) -> Result<Plateau<T>> {
    let n = times.len();
    let k = (T::of_usize(n) * est.tail_fraction).floor().to_usize().unwrap_or(0);
    if k < 5 || n != values.len() {
        return Err(Error::InsufficientData("tail too short for a plateau estimate".into()));
    }
    let (x, y) = (&times[n - k..], &values[n - k..]);
    let (slope, intercept, _) = line_fit(x, y);
    let mx = x.iter().copied().sum::<T>() / T::of_usize(k);
    let sxx: T = x.iter().map(|t| (*t - mx) * (*t - mx)).sum();
    let rss: T = x.iter().zip(y).map(|(t, c)| (*c - intercept - slope * *t).powi(2)).sum();
    let se = (rss / T::of_usize(k - 2) / sxx).sqrt();
    if slope.abs() > est.sigmas * se {
        return Err(Error::NoConvergence(format!(
            "no flat tail: slope {:.3e} with standard error {:.3e}",
            slope.to_f64_lossy(),
            se.to_f64_lossy()
        )));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let cut = (T::of_usize(k) * est.trim).floor().to_usize().unwrap_or(0);
    let kept = &sorted[cut..k - cut];
    let level = kept.iter().copied().sum::<T>() / T::of_usize(kept.len());
    Ok(Plateau { level, tail_slope: slope, tail_slope_error: se })
}

/// Plateau level and the time at which the fitted exponential reaches half
/// of it.
pub fn saturation_onset<T: Real>(
    times: &[T],
    values: &[T],
    fit: &GrowthFit<T>,
    est: &PlateauEstimator<T>,
) -> Result<Saturation<T>> {
    let p = plateau_level(times, values, est)?;
    if !(p.level > T::zero()) || !(fit.slope > T::zero()) {
        return Err(Error::DegenerateFit("saturation needs a positive plateau and growth rate".into()));
    }
    let t_sat = ((p.level * T::lit(0.5)).ln() - fit.intercept) / fit.slope;
    Ok(Saturation { t_sat, level: p.level })
}

impl<T: Real> OtocSeries<T> {
    /// Fill `fit` and `saturation`; either stays `None` when its estimator
    /// finds nothing.
    pub fn analyze(&mut self, policy: &WindowPolicy<T>, est: &PlateauEstimator<T>) {
        self.fit = fit_growth_rate(&self.times, &self.values, policy).ok();
        self.saturation = self.fit.as_ref().and_then(|f| saturation_onset(&self.times, &self.values, f, est).ok());
    }
}

/// `t_E = ln N / lambda`.
fn ehrenfest<T: Real>(lambda: T, n: T) -> T {
    n.ln() / lambda
}

/// `N^-2 e^{2 lambda t}` for `t < t_E`, zero afterwards.
pub fn theory_curve_pre<T: Real>(t: T, lambda: T, particles: T) -> T {
    if t < ehrenfest(lambda, particles) { (T::lit(2.0) * lambda * t).exp() / (particles * particles) } else { T::zero() }
}

/// `2 / L^2` for `t >= t_E`, zero before.
pub fn theory_curve_post<T: Real>(t: T, lambda: T, particles: T, sites: usize) -> T {
    if t >= ehrenfest(lambda, particles) { T::lit(2.0) / T::of_usize(sites * sites) } else { T::zero() }
}

/// Open-system envelope with dwell time `t_D`: `N^-2 e^{(2 lambda - 1/t_D) t}`
/// before `t_E` and `(2/L^2) e^{-2 (t - t_E)/t_D}` after, so that each branch
/// reduces to its closed counterpart as `t_D -> infinity`.
pub fn theory_curve_open<T: Real>(t: T, lambda: T, particles: T, sites: usize, t_d: T) -> T {
    let t_e = ehrenfest(lambda, particles);
    if t < t_e {
        ((T::lit(2.0) * lambda - T::one() / t_d) * t).exp() / (particles * particles)
    } else {
        T::lit(2.0) / T::of_usize(sites * sites) * (-T::lit(2.0) * (t - t_e) / t_d).exp()
    }
}

/// CSV `t, C, theory_pre, theory_post` preceded by `# key = value` metadata.
pub fn write_otoc_csv<T: Real, W: Write>(
    mut w: W,
    series: &OtocSeries<T>,
    lambda: T,
    particles: usize,
    sites: usize,
) -> std::io::Result<()> {
    let n = T::of_usize(particles);
    writeln!(w, "# V = {}", series.v)?;
    writeln!(w, "# W = {}", series.w)?;
    writeln!(w, "# initial_state = {}", series.initial_state)?;
    writeln!(w, "# normalization = {}", series.normalization)?;
    writeln!(w, "# lambda = {lambda}")?;
    writeln!(w, "# t_E = {}", ehrenfest(lambda, n))?;
    writeln!(w, "# N = {particles}")?;
    writeln!(w, "# L = {sites}")?;
    if let Some(f) = &series.fit {
        writeln!(w, "# slope = {}", f.slope)?;
        writeln!(w, "# fit_window = {} {}", f.t_start, f.t_end)?;
        writeln!(w, "# fit_r2 = {}", f.r2)?;
    }
    if let Some(s) = &series.saturation {
        writeln!(w, "# t_sat = {}", s.t_sat)?;
        writeln!(w, "# plateau = {}", s.level)?;
    }
    writeln!(w, "t,C,theory_pre,theory_post")?;
    for (t, c) in series.times.iter().zip(&series.values) {
        writeln!(
            w,
            "{t},{c},{},{}",
            theory_curve_pre(*t, lambda, n),
            theory_curve_post(*t, lambda, n, sites)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_slope() {
        let t: Vec<f64> = (0..40).map(|k| 0.1 * k as f64).collect();
        let c: Vec<f64> = t.iter().map(|t| (1.4 * t).exp() * 1e-4).collect();
        let policy = WindowPolicy { t_max: Some(10.0), ..Default::default() };
        let f = fit_growth_rate(&t, &c, &policy).unwrap();
        assert!((f.slope - 1.4).abs() < 1e-6);
        assert_eq!(f.points, 40);
    }

    #[test]
    fn theory_curves_meet_their_anchors() {
        let (lambda, n) = (0.5f64, 40.0f64);
        let te = n.ln() / lambda;
        assert!((theory_curve_pre(te * (1.0 - 1e-12), lambda, n) - 1.0).abs() < 1e-9);
        assert_eq!(theory_curve_post(te * 0.9, lambda, n, 4), 0.0);
        assert_eq!(theory_curve_post(te, lambda, n, 4), 0.125);
        assert_eq!(theory_curve_pre(te, lambda, n), 0.0);
    }

    #[test]
    fn open_curve_rates_and_limit() {
        let (lambda, n, td) = (0.5f64, 40.0f64, 3.0);
        let te = n.ln() / lambda;
        let pre = |t: f64| theory_curve_open(t, lambda, n, 4, td).ln();
        assert!(((pre(2.0) - pre(1.0)) - (2.0 * lambda - 1.0 / td)).abs() < 1e-12);
        assert!(((pre(te + 2.0) - pre(te + 1.0)) + 2.0 / td).abs() < 1e-12);
        for t in [0.5, 3.0, te + 1.0, te + 5.0] {
            let open = theory_curve_open(t, lambda, n, 4, 1e12);
            let closed = theory_curve_pre(t, lambda, n) + theory_curve_post(t, lambda, n, 4);
            assert!((open - closed).abs() < 1e-9 * closed);
        }
    }

    #[test]
    fn ramp_then_plateau_is_recovered() {
        let t: Vec<f64> = (0..300).map(|k| 0.05 * k as f64).collect();
        let (lambda2, level) = (1.2f64, 0.1f64);
        let c: Vec<f64> = t.iter().map(|t| (1e-5 * (lambda2 * t).exp()).min(level)).collect();
        let f = fit_growth_rate(&t, &c, &WindowPolicy::default()).unwrap();
        assert!((f.slope / lambda2 - 1.0).abs() < 0.02);
        let s = saturation_onset(&t, &c, &f, &PlateauEstimator::default()).unwrap();
        let t_true = (0.5 * level / 1e-5).ln() / lambda2;
        assert!((s.level / level - 1.0).abs() < 0.02);
        assert!((s.t_sat / t_true - 1.0).abs() < 0.02);
    }

    #[test]
    fn sloped_tail_is_rejected() {
        let t: Vec<f64> = (0..60).map(|k| k as f64).collect();
        let c: Vec<f64> = t.iter().map(|t| 0.1 + 0.01 * t).collect();
        assert!(plateau_level(&t, &c, &PlateauEstimator::default()).is_err());
    }
}
