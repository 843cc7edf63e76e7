//! Result tables and the run manifest.
//!
//! An output directory holds one CSV per table (header row of column names,
//! then one row of floats per record) and `manifest.json`, which carries the
//! full configuration, column units, summary values and reference values with
//! their origin.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self { name: name.into(), unit: unit.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|(n, u)| Column::new(n, u)).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(HarnessError::Output(format!(
                "table '{}': row of {} values for {} columns",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// A reference value the run is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub value: f64,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub file: String,
    pub columns: Vec<Column>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub code_version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub threads: usize,
    pub tables: Vec<TableSchema>,
    pub summary: BTreeMap<String, f64>,
    pub references: Vec<Reference>,
    /// Non-fatal findings, such as estimators that found nothing.
    pub notes: Vec<String>,
}

/// Main table, auxiliary tables and the values that summarize the run.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub main: Table,
    pub aux: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
    pub references: Vec<Reference>,
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn new(main: Table) -> Self {
        Self { main, aux: Vec::new(), summary: BTreeMap::new(), references: Vec::new(), notes: Vec::new() }
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    pub fn reference(&mut self, name: &str, value: f64, origin: &str) {
        self.references.push(Reference { name: name.into(), value, origin: origin.into() });
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        std::iter::once(&self.main).chain(&self.aux).find(|t| t.name == name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        std::iter::once(&self.main).chain(&self.aux)
    }
}

fn write_table(t: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(t.columns.iter().map(|c| c.name.as_str()))?;
    for row in &t.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Write every table as CSV and the manifest into `dir` (created if needed).
/// Returns the manifest path.
pub fn write_results(
    result: &ResultTable,
    config: &RunConfig,
    dir: &Path,
    wall_time_s: f64,
    threads: usize,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tables = Vec::new();
    for t in result.tables() {
        write_table(t, &dir.join(t.file_name()))?;
        tables.push(TableSchema { file: t.file_name(), columns: t.columns.clone(), rows: t.rows.len() });
    }
    let manifest = Manifest {
        experiment: config.experiment.map(|e| e.name().to_string()).unwrap_or_default(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        wall_time_s,
        threads,
        tables,
        summary: result.summary.clone(),
        references: result.references.clone(),
        notes: result.notes.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Load a manifest, for reruns and inspection.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn rows_must_match_columns() {
        let mut t = Table::new("x", &[("a", "1"), ("b", "J")]);
        assert!(t.push(vec![1.0, 2.0]).is_ok());
        assert!(t.push(vec![1.0]).is_err());
        assert_eq!(t.column("b"), Some(vec![2.0]));
        assert_eq!(t.column("c"), None);
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = parse_config("experiment = \"modes\"\n[model]\nsites = 2\nparticles = 1\ninteraction = 0.0\n").unwrap();
        let mut t = Table::new("main", &[("a", "1")]);
        t.push(vec![0.5]).unwrap();
        let mut r = ResultTable::new(t);
        r.aux.push(Table::new("side", &[("b", "1")]));
        r.set("k", 1.25);
        r.reference("r", 2.0, "test");
        r.note("n");
        let dir = tempfile::tempdir().unwrap();
        write_results(&r, &cfg, dir.path(), 0.1, 1).unwrap();
        let m = read_manifest(dir.path()).unwrap();
        assert_eq!(m.config, cfg);
        assert_eq!(m.summary["k"], 1.25);
        assert_eq!(m.tables.len(), 2);
        assert_eq!(m.tables[0].rows, 1);
        let csv = std::fs::read_to_string(dir.path().join("main.csv")).unwrap();
        assert_eq!(csv, "a\n0.5\n");
        assert!(dir.path().join("side.csv").exists());
    }
}
