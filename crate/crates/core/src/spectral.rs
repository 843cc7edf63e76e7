//! Spectral post-processing: unfolding, level-spacing statistics, the
//! spectral form factor and Fourier analysis of level counts over particle
//! number.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{svd, Matrix};
use crate::scalar::{cis, czero, Real};

/// Chebyshev polynomials `T_0..=T_degree` at `x`.
fn chebyshev<T: Real>(x: T, degree: usize, out: &mut Vec<T>) {
    out.clear();
    out.push(T::one());
    if degree >= 1 {
        out.push(x);
    }
    let two = T::lit(2.0);
    for k in 2..=degree {
        let next = two * x * out[k - 1] - out[k - 2];
        out.push(next);
    }
}

/// Least-squares polynomial fit on `[-1, 1]` in the Chebyshev basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevFit<T: Real> {
    pub coefficients: Vec<T>,
    center: T,
    half_width: T,
}

impl<T: Real> ChebyshevFit<T> {
    pub fn fit(x: &[T], y: &[T], degree: usize) -> Result<Self> {
        if x.len() != y.len() || x.len() <= degree {
            return Err(Error::DegenerateFit(format!("{} points cannot fix a degree-{degree} polynomial", x.len())));
        }
        let lo = x.iter().copied().fold(T::infinity(), T::min);
        let hi = x.iter().copied().fold(T::neg_infinity(), T::max);
        let half_width = (hi - lo) * T::lit(0.5);
        if !(half_width > T::zero()) {
            return Err(Error::DegenerateFit("abscissae span a single point".into()));
        }
        let center = (hi + lo) * T::lit(0.5);
        let mut row = Vec::new();
        let mut a = Matrix::zeros(x.len(), degree + 1);
        for (r, &xi) in x.iter().enumerate() {
            chebyshev((xi - center) / half_width, degree, &mut row);
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        }
        let dec = svd(&a)?;
        let smax = dec.s[0];
        let smin = *dec.s.last().unwrap();
        if !(smin > smax * T::lit(1e-12)) {
            return Err(Error::DegenerateFit("singular design matrix".into()));
        }
        let coefficients = (0..=degree)
            .map(|i| {
                (0..=degree)
                    .map(|j| dec.v[(i, j)] * (0..x.len()).map(|r| dec.u[(r, j)] * y[r]).sum::<T>() / dec.s[j])
                    .sum()
            })
            .collect();
        Ok(Self { coefficients, center, half_width })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: T) -> T {
        let mut row = Vec::new();
        chebyshev((x - self.center) / self.half_width, self.degree(), &mut row);
        row.iter().zip(&self.coefficients).map(|(a, b)| *a * *b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldOptions {
    pub degree: usize,
    /// Fraction of levels kept, centered on the middle of the spectrum.
    pub keep_fraction: f64,
}

impl Default for UnfoldOptions {
    fn default() -> Self {
        Self { degree: 9, keep_fraction: 0.7 }
    }
}

/// A spectrum mapped to unit mean spacing by a fitted smooth staircase.
#[derive(Debug, Clone)]
pub struct UnfoldedSpectrum<T: Real> {
    /// Sorted input levels.
    pub raw: Vec<T>,
    pub staircase: ChebyshevFit<T>,
    /// Unfolded values of the retained levels.
    pub levels: Vec<T>,
    /// Index range of `raw` that was retained.
    pub retained: std::ops::Range<usize>,
}

impl<T: Real> UnfoldedSpectrum<T> {
    pub fn spacings(&self) -> Vec<T> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_spacing(&self) -> T {
        let n = self.levels.len();
        (self.levels[n - 1] - self.levels[0]) / T::of_usize(n - 1)
    }

    pub fn is_monotone(&self) -> bool {
        self.levels.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Unfold with a degree-`degree` staircase fit, keeping every level.
pub fn unfold<T: Real>(levels: &[T], degree: usize) -> Result<UnfoldedSpectrum<T>> {
    unfold_with(levels, &UnfoldOptions { degree, keep_fraction: 1.0 })
}

pub fn unfold_with<T: Real>(levels: &[T], opts: &UnfoldOptions) -> Result<UnfoldedSpectrum<T>> {
    if levels.len() < 50 {
        return Err(Error::InsufficientData(format!("unfolding needs at least 50 levels, got {}", levels.len())));
    }
    if !(3..=15).contains(&opts.degree) {
        return invalid(format!("unfolding degree {} outside [3, 15]", opts.degree));
    }
    if !(opts.keep_fraction > 0.0 && opts.keep_fraction <= 1.0) {
        return invalid("keep fraction must lie in (0, 1]");
    }
    let mut raw = levels.to_vec();
    if raw.iter().any(|x| !x.is_finite()) {
        return invalid("non-finite level");
    }
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let counts: Vec<T> = (0..raw.len()).map(|k| T::of_usize(k) + T::lit(0.5)).collect();
    let staircase = ChebyshevFit::fit(&raw, &counts, opts.degree)?;
    let n = raw.len();
    let keep = ((n as f64) * opts.keep_fraction).round().max(2.0) as usize;
    let start = (n - keep.min(n)) / 2;
    let retained = start..start + keep.min(n);
    let levels = raw[retained.clone()].iter().map(|&e| staircase.eval(e)).collect();
    Ok(UnfoldedSpectrum { raw, staircase, levels, retained })
}

/// Spectral weights applied inside the form factor sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralWindow {
    Rectangular,
    /// Gaussian centered on the band, standard deviation `rel_width` times
    /// the unfolded span.
    Gaussian { rel_width: f64 },
}

#[derive(Debug, Clone)]
pub struct FormFactorEstimate<T: Real> {
    pub taus: Vec<T>,
    pub k: Vec<T>,
    /// Jackknife standard errors of the ensemble mean.
    pub sigma: Vec<T>,
    pub members: usize,
}

fn window_weights<T: Real>(x: &[T], window: SpectralWindow) -> Vec<T> {
    match window {
        SpectralWindow::Rectangular => vec![T::one(); x.len()],
        SpectralWindow::Gaussian { rel_width } => {
            let lo = x[0];
            let hi = x[x.len() - 1];
            let c = (lo + hi) * T::lit(0.5);
            let s = (hi - lo) * T::lit(rel_width);
            let two = T::lit(2.0);
            x.iter().map(|&xi| (-(xi - c) * (xi - c) / (two * s * s)).exp()).collect()
        }
    }
}

/// Form factor of one unfolded spectrum on a grid of `tau`.
pub fn form_factor_single<T: Real>(x: &[T], taus: &[T], window: SpectralWindow) -> Vec<T> {
    let w = window_weights(x, window);
    let norm: T = w.iter().map(|a| *a * *a).sum();
    let two_pi = T::TAU();
    taus.iter()
        .map(|&tau| {
            let s = x.iter().zip(&w).fold(czero::<T>(), |acc, (&xk, &wk)| acc + cis(two_pi * tau * xk) * wk);
            s.norm_sqr() / norm
        })
        .collect()
}

/// Ensemble-averaged form factor with jackknife errors.
pub fn form_factor<T: Real>(ensemble: &[Vec<T>], taus: &[T], window: SpectralWindow) -> Result<FormFactorEstimate<T>> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    if ensemble.iter().any(|x| x.len() < 2) {
        return Err(Error::InsufficientData("ensemble member with fewer than two levels".into()));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("tau grid must be strictly increasing");
    }
    let per: Vec<Vec<T>> = ensemble.par_iter().map(|x| form_factor_single(x, taus, window)).collect();
    let m = per.len();
    let mf = T::of_usize(m);
    let mut k = vec![T::zero(); taus.len()];
    let mut sigma = vec![T::nan(); taus.len()];
    for (j, kj) in k.iter_mut().enumerate() {
        let total: T = per.iter().map(|p| p[j]).sum();
        *kj = total / mf;
        if m >= 2 {
            // leave-one-out means
            let mf1 = T::of_usize(m - 1);
            let ss: T = per.iter().map(|p| {
                let loo = (total - p[j]) / mf1;
                (loo - *kj) * (loo - *kj)
            }).sum();
            sigma[j] = (ss * mf1 / mf).sqrt();
        }
    }
    Ok(FormFactorEstimate { taus: taus.to_vec(), k, sigma, members: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Goe,
    Gue,
}

/// Random-matrix form factor. The GUE curve is the ramp `tau` saturating at 1.
pub fn rmt_form_factor<T: Real>(symmetry: Symmetry, tau: T) -> T {
    let two = T::lit(2.0);
    match symmetry {
        Symmetry::Gue => tau.min(T::one()),
        Symmetry::Goe => {
            if tau <= T::one() {
                two * tau - tau * (two * tau).ln_1p()
            } else {
                two - tau * (two / (two * tau - T::one())).ln_1p()
            }
        }
    }
}

/// Wigner-surmise spacing density, or `exp(-s)` when `symmetry` is `None`.
pub fn spacing_density<T: Real>(symmetry: Option<Symmetry>, s: T) -> T {
    let pi = T::PI();
    match symmetry {
        None => (-s).exp(),
        Some(Symmetry::Goe) => pi / T::lit(2.0) * s * (-pi * s * s / T::lit(4.0)).exp(),
        Some(Symmetry::Gue) => T::lit(32.0) / (pi * pi) * s * s * (-T::lit(4.0) * s * s / pi).exp(),
    }
}

#[derive(Debug, Clone)]
pub struct SpacingStatistics<T: Real> {
    /// Bin lower edges; all bins have width `bin_width`.
    pub bin_edges: Vec<T>,
    pub bin_width: T,
    /// Normalized histogram density of the spacings.
    pub density: Vec<T>,
    /// Mean of `min(s_k, s_k+1) / max(s_k, s_k+1)`.
    pub mean_ratio: T,
    pub spacing_count: usize,
}

/// Histogram of nearest-neighbour spacings on `[0, max_s)` and the mean
/// consecutive-spacing ratio.
pub fn spacing_statistics<T: Real>(levels: &[T], bin_width: T, max_s: T) -> Result<SpacingStatistics<T>> {
    if levels.len() < 3 {
        return Err(Error::InsufficientData("spacing statistics need at least three levels".into()));
    }
    if !(bin_width > T::zero()) || !(max_s > bin_width) {
        return invalid("histogram needs 0 < bin width < max spacing");
    }
    let s: Vec<T> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let ratio = mean_spacing_ratio(&s);
    let bins = (max_s / bin_width).ceil().to_usize().unwrap_or(1);
    let mut counts = vec![0usize; bins];
    for &x in &s {
        if x >= T::zero() {
            let b = (x / bin_width).floor().to_usize().unwrap_or(usize::MAX);
            if b < bins {
                counts[b] += 1;
            }
        }
    }
    let total = T::of_usize(s.len()) * bin_width;
    Ok(SpacingStatistics {
        bin_edges: (0..bins).map(|b| T::of_usize(b) * bin_width).collect(),
        bin_width,
        density: counts.into_iter().map(|c| T::of_usize(c) / total).collect(),
        mean_ratio: ratio,
        spacing_count: s.len(),
    })
}

/// Mean ratio of consecutive spacings; needs no unfolding.
pub fn mean_spacing_ratio<T: Real>(spacings: &[T]) -> T {
    let mut acc = T::zero();
    let mut n = 0usize;
    for w in spacings.windows(2) {
        let (a, b) = (w[0], w[1]);
        let hi = a.max(b);
        if hi > T::zero() {
            acc += a.min(b) / hi;
            n += 1;
        }
    }
    if n == 0 { T::nan() } else { acc / T::of_usize(n) }
}

/// Fold a phase-like conjugate variable onto `[0, pi]`, the range
/// distinguishable from a real series sampled at integer particle numbers.
pub fn fold_action<T: Real>(s: T) -> T {
    let two_pi = T::TAU();
    let r = s - (s / two_pi).floor() * two_pi;
    r.min(two_pi - r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpectrumOptions {
    /// Degree of the polynomial in `N` removed before transforming.
    pub background_degree: usize,
    pub s_max: f64,
    pub grid_points: usize,
    /// Required resolution `2 pi / (N_max - N_min)`, if any.
    pub resolution: Option<f64>,
    /// Peaks below this fraction of the tallest are dropped.
    pub peak_threshold: f64,
}

impl Default for ActionSpectrumOptions {
    fn default() -> Self {
        Self { background_degree: 3, s_max: std::f64::consts::PI, grid_points: 2048, resolution: None, peak_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionPeak<T: Real> {
    pub s: T,
    pub height: T,
}

#[derive(Debug, Clone)]
pub struct ActionSpectrum<T: Real> {
    pub s: Vec<T>,
    pub amplitude: Vec<T>,
    /// Local maxima, tallest first.
    pub peaks: Vec<ActionPeak<T>>,
    pub resolution: T,
}

/// Hann-windowed Fourier transform of a series over particle number after
/// removing a smooth polynomial background.
pub fn action_spectrum<T: Real>(ns: &[T], series: &[T], opts: &ActionSpectrumOptions) -> Result<ActionSpectrum<T>> {
    if ns.len() != series.len() {
        return invalid("particle numbers and series differ in length");
    }
    if ns.len() < 20 {
        return Err(Error::InsufficientData(format!("action spectrum needs at least 20 particle numbers, got {}", ns.len())));
    }
    let lo = ns.iter().copied().fold(T::infinity(), T::min);
    let hi = ns.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    let resolution = T::TAU() / span;
    if let Some(req) = opts.resolution {
        if resolution > T::lit(req) {
            return Err(Error::InsufficientData(format!(
                "particle-number range {} gives resolution {:.4}, coarser than the requested {req}",
                span.to_f64_lossy(),
                resolution.to_f64_lossy()
            )));
        }
    }
    let background = ChebyshevFit::fit(ns, series, opts.background_degree)?;
    let half = T::lit(0.5);
    let weights: Vec<T> = ns.iter().map(|&n| half * (T::one() - (T::TAU() * (n - lo) / span).cos())).collect();
    let wsum: T = weights.iter().copied().sum();
    let osc: Vec<T> = ns.iter().zip(series).map(|(&n, &y)| y - background.eval(n)).collect();
    let g = opts.grid_points.max(8);
    let s_max = T::lit(opts.s_max);
    let s: Vec<T> = (0..g).map(|k| s_max * T::of_usize(k) / T::of_usize(g - 1)).collect();
    let amplitude: Vec<T> = s
        .par_iter()
        .map(|&sk| {
            let f = ns.iter().zip(&osc).zip(&weights).fold(czero::<T>(), |acc, ((&n, &y), &w)| acc + cis(-n * sk) * (y * w));
            T::lit(2.0) * f.norm() / wsum
        })
        .collect();
    let top = amplitude.iter().copied().fold(T::zero(), T::max);
    let mut peaks = Vec::new();
    for k in 0..g {
        let left = if k == 0 { T::neg_infinity() } else { amplitude[k - 1] };
        let right = if k + 1 == g { T::neg_infinity() } else { amplitude[k + 1] };
        let a = amplitude[k];
        if a > left && a >= right && a >= top * T::lit(opts.peak_threshold) && a > T::zero() {
            // parabolic refinement between grid points
            let mut pos = s[k];
            if k > 0 && k + 1 < g {
                let denom = left - T::lit(2.0) * a + right;
                if denom < T::zero() {
                    let shift = half * (left - right) / denom;
                    pos = pos + shift * (s[1] - s[0]);
                }
            }
            peaks.push(ActionPeak { s: pos, height: a });
        }
    }
    peaks.sort_by(|a, b| b.height.partial_cmp(&a.height).unwrap());
    Ok(ActionSpectrum { s, amplitude, peaks, resolution })
}

/// Read one level per line; blank lines and lines starting with `#` are skipped.
pub fn read_levels<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(format!("read error: {e}")))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidArgument(format!("line {}: cannot parse {t:?} as a level", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_form_factor_csv<T: Real, W: Write>(mut w: W, est: &FormFactorEstimate<T>) -> std::io::Result<()> {
    writeln!(w, "tau,K,sigma_K")?;
    for ((t, k), s) in est.taus.iter().zip(&est.k).zip(&est.sigma) {
        writeln!(w, "{t},{k},{s}")?;
    }
    Ok(())
}

pub fn write_spacing_csv<T: Real, W: Write>(mut w: W, stats: &SpacingStatistics<T>) -> std::io::Result<()> {
    writeln!(w, "s,P")?;
    let half = stats.bin_width * T::lit(0.5);
    for (e, p) in stats.bin_edges.iter().zip(&stats.density) {
        writeln!(w, "{},{p}", *e + half)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equally_spaced_levels_unfold_to_unit_spacing() {
        let levels: Vec<f64> = (0..200).map(|k| 0.37 * k as f64 - 3.0).collect();
        let u = unfold(&levels, 9).unwrap();
        assert!(u.spacings().iter().all(|s| (s - 1.0).abs() < 1e-6));
    }

    #[test]
    fn unfolding_is_affine_invariant() {
        let levels: Vec<f64> = (0..120).map(|k| (k as f64).powf(1.3) + (k as f64 * 0.7).sin()).collect();
        let a = unfold(&levels, 7).unwrap();
        let shifted: Vec<f64> = levels.iter().map(|e| 3.5 * e - 11.0).collect();
        let b = unfold(&shifted, 7).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn unfolding_preconditions() {
        assert!(matches!(unfold(&[1.0f64; 10], 5), Err(Error::InsufficientData(_))));
        assert!(matches!(unfold(&[1.0f64; 60], 5), Err(Error::DegenerateFit(_))));
        let levels: Vec<f64> = (0..60).map(|k| k as f64).collect();
        assert!(unfold(&levels, 2).is_err());
        assert!(unfold(&levels, 16).is_err());
    }

    #[test]
    fn goe_reference_values() {
        let tau = 1e-3f64;
        assert!((rmt_form_factor(Symmetry::Goe, tau) / (2.0 * tau) - 1.0).abs() < 0.01);
        assert!((rmt_form_factor(Symmetry::Goe, 1.0f64) - (2.0 - 3f64.ln())).abs() < 1e-12);
        assert!((rmt_form_factor(Symmetry::Goe, 1e6f64) - 1.0).abs() < 1e-9);
        assert_eq!(rmt_form_factor(Symmetry::Gue, 0.4f64), 0.4);
        assert_eq!(rmt_form_factor(Symmetry::Gue, 1.7f64), 1.0);
    }

    #[test]
    fn picket_fence_statistics() {
        let levels: Vec<f64> = (0..300).map(|k| k as f64).collect();
        let st = spacing_statistics(&levels, 0.1, 4.0).unwrap();
        assert_eq!(st.mean_ratio, 1.0);
        let k = form_factor_single(&levels, &[0.25, 0.5, 0.75], SpectralWindow::Gaussian { rel_width: 0.2 });
        assert!(k.iter().all(|&x| x < 1e-6), "{k:?}");
    }

    #[test]
    fn pure_tone_gives_single_peak() {
        let s0 = 1.234;
        let ns: Vec<f64> = (20..=200).map(|n| n as f64).collect();
        let y: Vec<f64> = ns.iter().map(|n| (n * s0).cos()).collect();
        let sp = action_spectrum(&ns, &y, &ActionSpectrumOptions::default()).unwrap();
        assert!((sp.peaks[0].s - s0).abs() < sp.resolution);
        assert!(sp.peaks.iter().skip(1).all(|p| p.height < 0.2 * sp.peaks[0].height));
    }

    #[test]
    fn insufficient_range_is_reported() {
        let ns: Vec<f64> = (0..25).map(|n| n as f64).collect();
        let y = vec![0.0; 25];
        let opts = ActionSpectrumOptions { resolution: Some(0.05), ..Default::default() };
        assert!(matches!(action_spectrum(&ns, &y, &opts), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fold_action_range() {
        assert!((fold_action(0.3f64) - 0.3).abs() < 1e-15);
        assert!((fold_action(2.0 * std::f64::consts::PI - 0.3) - 0.3).abs() < 1e-12);
        assert!((fold_action(-0.3f64) - 0.3).abs() < 1e-12);
        assert!((fold_action(4.0 * std::f64::consts::PI + 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn level_reader_skips_comments() {
        let text = "# levels\n1.5\n\n-2e-1\n";
        assert_eq!(read_levels(text.as_bytes()).unwrap(), vec![1.5, -0.2]);
        assert!(read_levels("abc\n".as_bytes()).is_err());
    }
}
