//! OTOC growth and saturation from a coherent state centred on a hyperbolic
//! relative equilibrium, against the mean-field exponent.

use std::sync::Arc;

use fockchaos::dynamics::KrylovOptions;
use fockchaos::fock::{projected_coherent_state, FockBasis};
use fockchaos::hamiltonian::build_bose_hubbard;
use fockchaos::meanfield::{find_fixed_point, find_fixed_points, lyapunov_max, FixedPoint};
use fockchaos::otoc::{
    fit_growth_rate, otoc_exact, plateau_level, saturation_onset, theory_curve_post, theory_curve_pre, PlateauEstimator,
    SiteOperator, WindowPolicy,
};
use fockchaos::{Complex64, Flow, Otoc};
use rayon::prelude::*;

use super::{field_from_pairs, fixed_point_guesses, normalized};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::output::{ResultTable, Table};

fn candidate_table(found: &[FixedPoint<f64>], sites: usize) -> Result<Table> {
    let mut cols: Vec<(String, &str)> =
        vec![("mu".into(), "J"), ("energy".into(), "J"), ("max_exponent".into(), "J"), ("residual".into(), "1")];
    for i in 0..sites {
        cols.push((format!("occupation{i}"), "1"));
    }
    let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut t = Table::new("otoc_fixed_points", &refs);
    for f in found {
        let mut row = vec![f.mu, f.energy, f.max_exponent, f.residual];
        row.extend(f.psi.iter().map(|z| z.norm_sqr()));
        t.push(row)?;
    }
    Ok(t)
}

/// Plain least-squares slope and `r^2` of `ln C` on `[t0, t1]`, whatever the
/// quality of the fit; a diagnostic next to the clean-window search.
fn window_regression(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(t, c)| **t >= t0 && **t <= t1 && **c > 0.0).map(|(t, c)| (*t, c.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    Some((sxy / sxx, sxy * sxy / (sxx * syy)))
}

struct PairAnalysis {
    label: &'static str,
    series: Otoc,
}

pub fn run_otoc(cfg: &RunConfig) -> Result<ResultTable> {
    let c = cfg.otoc.clone().unwrap_or_default();
    let m = &cfg.model;
    let (l, n) = (m.sites, m.particles);
    if l < 2 {
        return Err(HarnessError::Config("otoc: adjacent-site operators need at least two sites".into()));
    }
    let dim = cfg.check_dim(l, n)?;
    if c.quadrature {
        for k in n.saturating_sub(2)..=n + 2 {
            cfg.check_dim(l, k)?;
        }
    }
    let tol = cfg.numerics.tol;
    let seed = cfg.numerics.seed;
    let p = m.params();
    let mf = Flow::scaled(&p);

    let (center, candidates, failures) = match &c.initial_field {
        Some(pairs) => {
            let psi = normalized(&field_from_pairs(pairs)?, 1.0);
            let fp = find_fixed_point(&mf, &psi, 1e-12)?;
            (fp.clone(), vec![fp], Vec::new())
        }
        None => {
            let search = find_fixed_points(&mf, &fixed_point_guesses(l, c.random_guesses, seed), 1e-12);
            let best = search.found.iter().max_by(|a, b| a.max_exponent.total_cmp(&b.max_exponent)).cloned();
            match best {
                Some(fp) if fp.max_exponent > 1e-6 => (fp, search.found, search.failures),
                _ => {
                    let list: Vec<String> = search
                        .found
                        .iter()
                        .map(|f| format!("(mu {:.6}, exponent {:.3e})", f.mu, f.max_exponent))
                        .collect();
                    return Err(HarnessError::Numerical(fockchaos::Error::NoConvergence(format!(
                        "no hyperbolic relative equilibrium; candidates: [{}]; {} guesses failed",
                        list.join(", "),
                        search.failures.len()
                    ))));
                }
            }
        }
    };
    let lambda_linear = center.max_exponent;
    let tangent = lyapunov_max(&mf, &center.psi, c.lyapunov_time, 1.0, seed, tol)?;
    let lambda = tangent.lambda;
    let nf = n as f64;
    // a stable centre (only reachable through an explicit initial field) has
    // no growth scale; the OTOC is still computed and the fit left unbounded
    let t_e = (lambda > 1e-6).then(|| nf.ln() / lambda);

    let basis = Arc::new(FockBasis::with_cap(l, n, cfg.numerics.max_dim)?);
    let h = build_bose_hubbard(&p, &basis)?;
    let field: Vec<Complex64> = center.psi.iter().map(|z| z * nf.sqrt()).collect();
    let psi0 = projected_coherent_state(&field, &basis)?;
    let steps = (c.t_max / c.dt).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| c.dt * k as f64).collect();
    let opts = KrylovOptions::new(tol);

    let mut pairs = vec![("number", SiteOperator::Number(0), SiteOperator::Number(1))];
    if c.quadrature {
        pairs.push(("quadrature", SiteOperator::Momentum(0), SiteOperator::Position(1)));
    }
    let runs: Vec<PairAnalysis> = pairs
        .par_iter()
        .map(|&(label, v, w)| otoc_exact(&h, v, w, &psi0, &grid, &opts).map(|series| PairAnalysis { label, series }))
        .collect::<fockchaos::Result<_>>()?;

    let mut cols: Vec<(String, &str)> = vec![("t".into(), "1/J")];
    for r in &runs {
        cols.push((format!("C_{}", r.label), "1"));
    }
    if t_e.is_some() {
        cols.push(("theory_pre".into(), "1"));
        cols.push(("theory_post".into(), "1"));
    }
    let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut main = Table::new("otoc", &refs);
    for (k, &t) in grid.iter().enumerate() {
        let mut row = vec![t];
        row.extend(runs.iter().map(|r| r.series.values[k]));
        if t_e.is_some() {
            row.push(theory_curve_pre(t, lambda, nf));
            row.push(theory_curve_post(t, lambda, nf, l));
        }
        main.push(row)?;
    }

    let mut out = ResultTable::new(main);
    out.aux.push(candidate_table(&candidates, l)?);
    for (k, msg) in failures.iter().take(8) {
        out.note(format!("fixed-point guess {k} did not converge: {msg}"));
    }
    out.set("dimension", dim as f64);
    out.set("lambda_tangent", lambda);
    out.set("lambda_tangent_variation", tangent.variation);
    out.set("lambda_linear", lambda_linear);
    out.set("mu", center.mu);
    out.reference("plateau", 2.0 / (l * l) as f64, "closed-system saturation 2/L^2");
    match t_e {
        Some(t) => {
            out.set("t_ehrenfest", t);
            out.reference("growth_rate", 2.0 * lambda, "twice the tangent-dynamics exponent");
            out.reference("t_ehrenfest", t, "ln N over the tangent-dynamics exponent");
        }
        None => out.note(format!("equilibrium is not hyperbolic (tangent exponent {lambda:.3e}); no Ehrenfest time")),
    }

    let policy = WindowPolicy { min_points: c.min_points, r2_min: c.r2_min, floor: 1e-14, t_min: None, t_max: t_e };
    let est = PlateauEstimator::default();
    for r in &runs {
        let s = &r.series;
        match plateau_level(&s.times, &s.values, &est) {
            Ok(pl) => out.set(&format!("plateau_{}", r.label), pl.level),
            Err(e) => out.note(format!("{} pair: plateau not found: {e}", r.label)),
        }
        let tail = &s.values[s.values.len() * 2 / 3..];
        out.set(&format!("tail_mean_{}", r.label), tail.iter().sum::<f64>() / tail.len() as f64);
        if let Some((slope, r2)) = t_e.and_then(|t| window_regression(&s.times, &s.values, 1.0 / lambda, t)) {
            out.set(&format!("window_slope_{}", r.label), slope);
            out.set(&format!("window_slope_ratio_{}", r.label), slope / (2.0 * lambda));
            out.set(&format!("window_r2_{}", r.label), r2);
        }
        match fit_growth_rate(&s.times, &s.values, &policy) {
            Ok(fit) => {
                out.set(&format!("slope_{}", r.label), fit.slope);
                out.set(&format!("slope_ratio_{}", r.label), fit.slope / (2.0 * lambda));
                out.set(&format!("fit_r2_{}", r.label), fit.r2);
                out.set(&format!("fit_start_{}", r.label), fit.t_start);
                out.set(&format!("fit_end_{}", r.label), fit.t_end);
                match saturation_onset(&s.times, &s.values, &fit, &est) {
                    Ok(sat) => {
                        out.set(&format!("t_saturation_{}", r.label), sat.t_sat);
                        if let Some(t) = t_e {
                            out.set(&format!("onset_ratio_{}", r.label), sat.t_sat / t);
                        }
                    }
                    Err(e) => out.note(format!("{} pair: saturation onset not found: {e}", r.label)),
                }
            }
            Err(e) => out.note(format!("{} pair: growth fit failed: {e}", r.label)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_regression_recovers_an_exponential() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
        let c: Vec<f64> = t.iter().map(|x| 1e-3 * (0.3 * x).exp()).collect();
        let (s, r2) = window_regression(&t, &c, 2.0, 15.0).unwrap();
        assert!((s - 0.3).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert!(window_regression(&t, &c, 30.0, 40.0).is_none());
    }
}
