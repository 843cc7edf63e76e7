//! Level statistics of disordered ensembles: unfolded spectra, form factor
//! and spacing statistics against the random-matrix references.

use std::sync::Arc;

use fockchaos::dynamics::eigenvalues;
use fockchaos::fock::FockBasis;
use fockchaos::hamiltonian::{build_bose_hubbard, disorder_ensemble};
use fockchaos::spectral::{
    form_factor, mean_spacing_ratio, rmt_form_factor, spacing_density, spacing_statistics, unfold_with,
    SpectralWindow, Symmetry, UnfoldOptions,
};
use fockchaos::Params;
use rayon::prelude::*;

use super::mean_stderr;
use crate::config::{Lattice, RunConfig, SpectralConfig};
use crate::error::Result;
use crate::output::{ResultTable, Table};

/// Mean spacing ratio of Poisson levels.
pub const POISSON_RATIO: f64 = 0.386_294_361_119_890_6;
/// Mean spacing ratio of large GOE matrices.
pub const GOE_RATIO: f64 = 0.5307;
/// Mean spacing ratio of large GUE matrices.
pub const GUE_RATIO: f64 = 0.5996;

struct Ensemble {
    label: String,
    phase: f64,
    interaction: f64,
    symmetry: Option<Symmetry>,
    unfolded: Vec<Vec<f64>>,
    ratios: Vec<f64>,
}

fn build_ensemble(
    label: String,
    base: &Params,
    symmetry: Option<Symmetry>,
    c: &SpectralConfig,
    disorder: f64,
    seed: u64,
    basis: &Arc<FockBasis>,
    cap: usize,
) -> Result<Ensemble> {
    let members = disorder_ensemble(base, disorder, c.members, seed);
    let opts = UnfoldOptions { degree: c.unfold_degree, keep_fraction: c.keep_fraction };
    let per: Vec<(Vec<f64>, f64)> = members
        .par_iter()
        .map(|p| {
            let h = build_bose_hubbard(p, basis)?;
            let e = eigenvalues(&h, cap)?;
            let un = unfold_with(&e, &opts)?;
            let r = mean_spacing_ratio(&un.spacings());
            let mid = 0.5 * (un.levels[0] + un.levels[un.levels.len() - 1]);
            Ok((un.levels.iter().map(|x| x - mid).collect(), r))
        })
        .collect::<fockchaos::Result<_>>()?;
    let (unfolded, ratios) = per.into_iter().unzip();
    Ok(Ensemble { label, phase: base.phase, interaction: base.interaction, symmetry, unfolded, ratios })
}

/// Slope of the best line through the origin on `[lo, hi]`.
fn ramp_slope(taus: &[f64], k: &[f64], window: [f64; 2]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (t, y) in taus.iter().zip(k) {
        if *t >= window[0] - 1e-12 && *t <= window[1] + 1e-12 {
            num += t * y;
            den += t * t;
        }
    }
    num / den
}

pub fn run_spectral(cfg: &RunConfig) -> Result<ResultTable> {
    let c = cfg.spectral.clone().unwrap_or_default();
    let m = &cfg.model;
    let dim = cfg.check_dim(m.sites, m.particles)?;
    let basis = Arc::new(FockBasis::with_cap(m.sites, m.particles, cfg.numerics.max_dim)?);
    let seed = cfg.numerics.seed;
    let cap = cfg.numerics.max_dim;

    let mut ensembles = Vec::new();
    for (k, &phi) in c.phases.iter().enumerate() {
        // a flux only breaks time reversal on a ring
        let sym = if phi.sin().abs() > 1e-12 && m.geometry == Lattice::Ring { Symmetry::Gue } else { Symmetry::Goe };
        let base = m.params().with_phase(phi);
        ensembles.push(build_ensemble(format!("phase{k}"), &base, Some(sym), &c, m.disorder, seed, &basis, cap)?);
    }
    if c.poisson_control {
        let mut base = m.params().with_phase(0.0);
        base.interaction = 0.0;
        ensembles.push(build_ensemble("poisson".into(), &base, None, &c, m.disorder, seed, &basis, cap)?);
    }

    let n_tau = (c.tau_max / c.tau_step).round() as usize;
    let taus: Vec<f64> = (1..=n_tau).map(|k| c.tau_step * k as f64).collect();
    let mut cols: Vec<(String, &str)> = vec![("tau".into(), "1")];
    for e in &ensembles {
        cols.push((format!("K_{}", e.label), "1"));
        cols.push((format!("sigma_{}", e.label), "1"));
    }
    cols.push(("K_goe".into(), "1"));
    cols.push(("K_gue".into(), "1"));
    let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut main = Table::new("form_factor", &refs);

    let estimates = ensembles
        .iter()
        .map(|e| form_factor(&e.unfolded, &taus, SpectralWindow::Rectangular))
        .collect::<fockchaos::Result<Vec<_>>>()?;
    for (j, &t) in taus.iter().enumerate() {
        let mut row = vec![t];
        for est in &estimates {
            row.push(est.k[j]);
            row.push(est.sigma[j]);
        }
        row.push(rmt_form_factor(Symmetry::Goe, t));
        row.push(rmt_form_factor(Symmetry::Gue, t));
        main.push(row)?;
    }

    let mut stats = Table::new(
        "ensembles",
        &[
            ("phase", "rad"),
            ("interaction", "J"),
            ("members", "1"),
            ("ratio_mean", "1"),
            ("ratio_stderr", "1"),
            ("worst_z", "1"),
            ("ramp_slope", "1"),
            ("ramp_slope_reference", "1"),
        ],
    );
    let nb = (c.spacing_max / c.spacing_bin).ceil() as usize;
    let mut spacing_cols: Vec<(String, &str)> = vec![("s".into(), "1")];
    for e in &ensembles {
        spacing_cols.push((format!("P_{}", e.label), "1"));
    }
    spacing_cols.extend([("P_poisson_reference".into(), "1"), ("P_goe".into(), "1"), ("P_gue".into(), "1")]);
    let srefs: Vec<(&str, &str)> = spacing_cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut spacing = Table::new("spacings", &srefs);
    let mut histograms = Vec::new();

    let mut out_summary = Vec::new();
    for (e, est) in ensembles.iter().zip(&estimates) {
        let (r_mean, r_se) = mean_stderr(&e.ratios);
        let in_window: Vec<usize> = (0..taus.len())
            .filter(|&j| taus[j] >= c.compare_window[0] - 1e-12 && taus[j] <= c.compare_window[1] + 1e-12)
            .collect();
        let reference = |t: f64| match e.symmetry {
            Some(s) => rmt_form_factor(s, t),
            None => 1.0,
        };
        let worst_z = in_window.iter().map(|&j| ((est.k[j] - reference(taus[j])) / est.sigma[j]).abs()).fold(0.0, f64::max);
        let slope = ramp_slope(&taus, &est.k, c.ramp_window);
        let ref_k: Vec<f64> = taus.iter().map(|&t| reference(t)).collect();
        let ref_slope = ramp_slope(&taus, &ref_k, c.ramp_window);
        stats.push(vec![e.phase, e.interaction, e.unfolded.len() as f64, r_mean, r_se, worst_z, slope, ref_slope])?;
        out_summary.push((format!("ratio_{}", e.label), r_mean));
        out_summary.push((format!("ratio_stderr_{}", e.label), r_se));
        out_summary.push((format!("worst_z_{}", e.label), worst_z));
        out_summary.push((format!("ramp_slope_{}", e.label), slope));
        out_summary.push((format!("ramp_slope_reference_{}", e.label), ref_slope));

        let mut acc = vec![0.0; nb];
        for lv in &e.unfolded {
            let s = spacing_statistics(lv, c.spacing_bin, c.spacing_max)?;
            for (a, d) in acc.iter_mut().zip(&s.density) {
                *a += d / e.unfolded.len() as f64;
            }
        }
        histograms.push(acc);
    }
    for b in 0..nb {
        let s = (b as f64 + 0.5) * c.spacing_bin;
        let mut row = vec![s];
        row.extend(histograms.iter().map(|h| h[b]));
        row.push(spacing_density(None, s));
        row.push(spacing_density(Some(Symmetry::Goe), s));
        row.push(spacing_density(Some(Symmetry::Gue), s));
        spacing.push(row)?;
    }

    let mut out = ResultTable::new(main);
    out.aux.push(stats);
    out.aux.push(spacing);
    for (k, v) in out_summary {
        out.set(&k, v);
    }
    out.set("dimension", dim as f64);
    out.reference("ratio_goe", GOE_RATIO, "large-matrix GOE ensemble");
    out.reference("ratio_gue", GUE_RATIO, "large-matrix GUE ensemble");
    out.reference("ratio_poisson", POISSON_RATIO, "independent levels, 2 ln 2 - 1");
    out.reference("form_factor_poisson", 1.0, "independent levels");
    Ok(out)
}
