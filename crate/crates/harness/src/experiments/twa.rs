//! Truncated Wigner site occupations against exact propagation of the
//! projected coherent state.

use std::sync::Arc;

use fockchaos::dynamics::{evolve, KrylovOptions};
use fockchaos::fock::{projected_coherent_state, FockBasis};
use fockchaos::hamiltonian::build_bose_hubbard;
use fockchaos::twa::{sample_wigner_coherent, twa_expectation, WeylSymbol};
use fockchaos::Complex64;

use super::{field_from_pairs, normalized};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{ResultTable, Table};

pub fn run_twa(cfg: &RunConfig) -> Result<ResultTable> {
    let c = cfg.twa.clone().unwrap_or_default();
    let m = &cfg.model;
    let (l, n) = (m.sites, m.particles);
    let dim = cfg.check_dim(l, n)?;
    let p = m.params();
    let field = match &c.initial_field {
        Some(pairs) => field_from_pairs(pairs)?,
        None => (0..l).map(|i| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect(),
    };
    let psi0 = normalized(&field, n as f64);
    let steps = (c.t_max / c.dt).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| c.dt * k as f64).collect();

    let basis = Arc::new(FockBasis::with_cap(l, n, cfg.numerics.max_dim)?);
    let h = build_bose_hubbard(&p, &basis)?;
    let v0 = projected_coherent_state(&psi0, &basis)?;
    let exact = evolve(&h, &v0, &grid, &KrylovOptions::new(cfg.numerics.tol))?;

    let ens = sample_wigner_coherent(&psi0, c.samples, cfg.numerics.seed)?;
    let obs: Vec<WeylSymbol<f64>> = (0..l).map(WeylSymbol::occupation).collect();
    let twa = twa_expectation(&p, &ens, &obs, &grid, cfg.numerics.tol)?;

    let mut cols: Vec<(String, &str)> = vec![("t".into(), "1/J")];
    for i in 0..l {
        cols.push((format!("n{i}_exact"), "1"));
        cols.push((format!("n{i}_twa"), "1"));
        cols.push((format!("n{i}_stderr"), "1"));
    }
    let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut main = Table::new("twa", &refs);
    let mut worst_z: f64 = 0.0;
    for (k, st) in exact.states.iter().enumerate() {
        let occ = st.occupations();
        let mut row = vec![grid[k]];
        for i in 0..l {
            row.extend([occ[i], twa.mean[i][k], twa.stderr[i][k]]);
            if twa.stderr[i][k] > 0.0 {
                worst_z = worst_z.max((twa.mean[i][k] - occ[i]).abs() / twa.stderr[i][k]);
            }
        }
        main.push(row)?;
    }
    let mut out = ResultTable::new(main);
    out.set("dimension", dim as f64);
    out.set("worst_z", worst_z);
    out.set("samples_used", twa.used as f64);
    out.set("samples_dropped", twa.dropped as f64);
    out.reference("z_bound", 3.0, "three standard errors");
    Ok(out)
}
