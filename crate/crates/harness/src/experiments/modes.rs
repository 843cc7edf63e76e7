//! Catalog of relative equilibria and relative-periodic mean-field modes with
//! their actions, periods and stability.

use fockchaos::meanfield::{find_fixed_points, symplectic_defect};
use fockchaos::spectral::fold_action;
use fockchaos::Flow;

use super::{fixed_point_guesses, mode_catalog};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::output::{ResultTable, Table};

pub fn run_modes(cfg: &RunConfig) -> Result<ResultTable> {
    let c = cfg.modes.clone().unwrap_or_default();
    let l = cfg.model.sites;
    let mf = Flow::scaled(&cfg.model.params());

    let mut cols: Vec<(String, &str)> = vec![
        ("kind".into(), "1"),
        ("energy".into(), "J"),
        ("period".into(), "1/J"),
        ("chi".into(), "rad"),
        ("action".into(), "1"),
        ("action_folded".into(), "1"),
        ("residual".into(), "1"),
        ("leading_exponent".into(), "J"),
        ("symplectic_defect".into(), "1"),
    ];
    for i in 0..l {
        cols.push((format!("re_psi{i}"), "1"));
        cols.push((format!("im_psi{i}"), "1"));
    }
    let refs: Vec<(&str, &str)> = cols.iter().map(|(a, b)| (a.as_str(), *b)).collect();
    let mut main = Table::new("modes", &refs);

    // kind 0: relative equilibria
    let guesses = fixed_point_guesses(l, c.random_guesses, cfg.numerics.seed);
    let search = find_fixed_points(&mf, &guesses, 1e-12);
    let mut worst_residual: f64 = 0.0;
    let mut worst_defect: f64 = 0.0;
    for f in &search.found {
        let mut row = vec![0.0, f.energy, 0.0, 0.0, 0.0, 0.0, f.residual, f.max_exponent, 0.0];
        for z in &f.psi {
            row.extend([z.re, z.im]);
        }
        worst_residual = worst_residual.max(f.residual);
        main.push(row)?;
    }

    // kind 1: relative-periodic modes through the section
    let mut out_notes = Vec::new();
    let mut periodic = 0usize;
    for &e in &c.energies {
        let (modes, failures) = mode_catalog(&mf, (c.section[0], c.section[1]), e, c.scan_time, c.scan_step);
        out_notes.extend(failures);
        for md in modes {
            let defect = symplectic_defect(&md.monodromy);
            worst_residual = worst_residual.max(md.residual);
            worst_defect = worst_defect.max(defect);
            let mut row = vec![
                1.0,
                md.energy,
                md.period,
                md.chi,
                md.action,
                fold_action(md.action),
                md.residual,
                md.leading_exponent(),
                defect,
            ];
            for z in &md.psi0 {
                row.extend([z.re, z.im]);
            }
            main.push(row)?;
            periodic += 1;
        }
    }
    if main.rows.is_empty() {
        return Err(HarnessError::Numerical(fockchaos::Error::InsufficientData(
            "no relative equilibrium or periodic mode found".into(),
        )));
    }
    let mut out = ResultTable::new(main);
    for n in out_notes {
        out.note(n);
    }
    out.set("relative_equilibria", search.found.len() as f64);
    out.set("periodic_modes", periodic as f64);
    out.set("worst_residual", worst_residual);
    out.set("worst_symplectic_defect", worst_defect);
    Ok(out)
}
