//! Action spectroscopy: the smoothed level density at fixed energy per
//! particle, Fourier transformed over particle number, joined against the
//! periodic-mode catalog; optionally the Weyl density against exact levels.

use std::sync::Arc;

use fockchaos::dynamics::eigenvalues;
use fockchaos::fock::FockBasis;
use fockchaos::hamiltonian::build_bose_hubbard;
use fockchaos::meanfield::weyl_density;
use fockchaos::spectral::{action_spectrum, fold_action, ActionSpectrumOptions};
use fockchaos::{Flow, Params};
use rayon::prelude::*;

use super::{mode_catalog, smoothed_density};
use crate::config::{ActionsConfig, RunConfig, WeylConfig};
use crate::error::{HarnessError, Result};
use crate::output::{ResultTable, Table};

/// Smoothed level density at `E = energy * N` for every `N` in the scan.
pub fn density_series(cfg: &RunConfig, c: &ActionsConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = &cfg.model;
    for n in [c.n_min, c.n_max] {
        cfg.check_dim(m.sites, n)?;
    }
    let ns: Vec<usize> = (c.n_min..=c.n_max).collect();
    let ys: Vec<f64> = ns
        .par_iter()
        .map(|&n| {
            let p = m.params_at(n);
            let basis = Arc::new(FockBasis::with_cap(m.sites, n, cfg.numerics.max_dim)?);
            let h = build_bose_hubbard(&p, &basis)?;
            let e = eigenvalues(&h, cfg.numerics.max_dim)?;
            Ok(smoothed_density(&e, c.energy * n as f64, c.smoothing))
        })
        .collect::<fockchaos::Result<_>>()?;
    Ok((ns.into_iter().map(|n| n as f64).collect(), ys))
}

/// Peaks of the spectrum of `series` over `ns` joined against folded
/// harmonics of the catalog actions.
pub fn match_peaks(
    ns: &[f64],
    series: &[f64],
    actions: &[f64],
    c: &ActionsConfig,
) -> Result<(Table, Table, usize)> {
    let opts = ActionSpectrumOptions {
        background_degree: c.background_degree,
        s_max: c.s_max,
        peak_threshold: c.peak_threshold,
        ..ActionSpectrumOptions::default()
    };
    let spec = action_spectrum(ns, series, &opts)?;
    let mut amp = Table::new("action_spectrum", &[("S", "1"), ("amplitude", "1")]);
    for (s, a) in spec.s.iter().zip(&spec.amplitude) {
        amp.push(vec![*s, *a])?;
    }
    if spec.peaks.is_empty() {
        return Err(HarnessError::Numerical(fockchaos::Error::InsufficientData("action spectrum has no peaks".into())));
    }
    let mut matches = Table::new(
        "matches",
        &[
            ("peak_S", "1"),
            ("peak_height", "1"),
            ("mode", "1"),
            ("harmonic", "1"),
            ("mode_S_folded", "1"),
            ("relative_error", "1"),
            ("matched", "1"),
        ],
    );
    let mut matched = 0;
    for pk in &spec.peaks {
        // nearest folded harmonic over the whole catalog
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (mi, &s) in actions.iter().enumerate() {
            for h in 1..=c.harmonics {
                let f = fold_action(h as f64 * s);
                let rel = (pk.s - f).abs() / f.max(spec.resolution);
                if best.is_none_or(|b| rel < b.3) {
                    best = Some((mi, h, f, rel));
                }
            }
        }
        match best {
            Some((mi, h, f, rel)) => {
                let ok = rel <= c.match_tolerance;
                matched += ok as usize;
                matches.push(vec![pk.s, pk.height, mi as f64, h as f64, f, rel, ok as u8 as f64])?;
            }
            None => matches.push(vec![pk.s, pk.height, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0.0])?,
        }
    }
    Ok((amp, matches, matched))
}

/// Weyl density against the smoothed exact density on the bulk of the
/// spectrum, the levels between the first and third quartiles.
pub fn weyl_comparison(w: &WeylConfig, cfg: &RunConfig) -> Result<Table> {
    cfg.check_dim(w.sites, w.particles)?;
    let n = w.particles;
    let p = Params::new(w.sites, n, cfg.model.hopping, w.scaled_interaction / n as f64, w.geometry.into())
        .with_onsite(vec![0.0; w.sites]);
    let basis = Arc::new(FockBasis::with_cap(w.sites, n, cfg.numerics.max_dim)?);
    let h = build_bose_hubbard(&p, &basis)?;
    let e = eigenvalues(&h, cfg.numerics.max_dim)?;
    let d = e.len();
    let (lo, hi) = (e[d / 4], e[3 * d / 4]);
    let pts = w.points.max(2);
    let grid: Vec<f64> = (0..pts).map(|k| lo + (hi - lo) * k as f64 / (pts - 1) as f64).collect();
    let weyl = weyl_density(&p, &grid, w.samples, cfg.numerics.seed, Some(w.smoothing / n as f64))?;
    let mut t = Table::new(
        "weyl",
        &[("E", "J"), ("rho_exact", "1/J"), ("rho_weyl", "1/J"), ("rho_weyl_stderr", "1/J"), ("relative_deviation", "1")],
    );
    for (k, &x) in grid.iter().enumerate() {
        let ed = smoothed_density(&e, x, w.smoothing);
        t.push(vec![x, ed, weyl.density[k], weyl.error[k], weyl.density[k] / ed - 1.0])?;
    }
    Ok(t)
}

pub fn run_action_spectroscopy(cfg: &RunConfig) -> Result<ResultTable> {
    let c = cfg.actions.clone().unwrap_or_default();
    let m = &cfg.model;
    let (ns, ys) = density_series(cfg, &c)?;

    let mf = Flow::scaled(&m.params_at(c.n_min));
    let modes_cfg = cfg.modes.clone().unwrap_or_default();
    let section = (modes_cfg.section[0], modes_cfg.section[1]);
    let (modes, failures) = mode_catalog(&mf, section, c.energy, modes_cfg.scan_time, modes_cfg.scan_step);
    if modes.is_empty() {
        return Err(HarnessError::Numerical(fockchaos::Error::InsufficientData(format!(
            "no periodic mode found at E/N = {}: {}",
            c.energy,
            failures.join("; ")
        ))));
    }
    let actions: Vec<f64> = modes.iter().map(|md| md.action).collect();
    let (amp, matches, matched) = match_peaks(&ns, &ys, &actions, &c)?;

    let mut series = Table::new("density_series", &[("N", "1"), ("rho", "1/J")]);
    for (n, y) in ns.iter().zip(&ys) {
        series.push(vec![*n, *y])?;
    }
    let mut catalog = Table::new(
        "modes",
        &[("period", "1/J"), ("chi", "rad"), ("action", "1"), ("action_folded", "1"), ("residual", "1"), ("leading_exponent", "J")],
    );
    for md in &modes {
        catalog.push(vec![md.period, md.chi, md.action, fold_action(md.action), md.residual, md.leading_exponent()])?;
    }

    let mut out = ResultTable::new(matches);
    out.aux.push(amp);
    out.aux.push(series);
    out.aux.push(catalog);
    for f in failures {
        out.note(f);
    }
    out.set("matched_peaks", matched as f64);
    out.set("modes", modes.len() as f64);
    if let Some(w) = &c.weyl {
        let t = weyl_comparison(w, cfg)?;
        let dev = t.column("relative_deviation").unwrap_or_default();
        out.set("weyl_max_relative_deviation", dev.iter().fold(0.0, |a: f64, x| a.max(x.abs())));
        out.aux.push(t);
    }
    out.reference("match_tolerance", c.match_tolerance, "relative peak-to-action tolerance");
    Ok(out)
}
