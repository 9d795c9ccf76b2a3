//! Deterministic artifacts: CSV tables, JSON manifests and the long-format
//! plot tables derived from them.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::RunError;

/// A float with 17 significant digits; non-finite values spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// A table cell.
#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated, LF-terminated, header first.
    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }
}

/// Output directory of one run.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn write_table(&self, name: &str, t: &Table) -> Result<(), RunError> {
        fs::write(self.root.join(name), t.render())?;
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text)?;
        Ok(())
    }

    pub fn write_manifest<T: Serialize>(&self, manifest: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(manifest).map_err(|e| RunError::Math(e.to_string()))?;
        s.push('\n');
        fs::write(self.root.join("manifest.json"), s)?;
        Ok(())
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), RunError> {
    let bad = |e: csv::Error| RunError::Schema(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let header = r.headers().map_err(bad)?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<Result<_, _>>().map_err(bad)?;
    Ok((header, rows))
}

fn cell(s: &str) -> Cell {
    Cell::S(s.into())
}

/// Wide table to `(key, observable, value)` rows; cells are copied verbatim.
pub fn to_long(header: &[String], rows: &[Vec<String>], key: &str, rename: &str) -> Result<Table, RunError> {
    let ki = header.iter().position(|h| h == key).ok_or_else(|| RunError::Schema(format!("no column `{key}`")))?;
    let mut t = Table::new(&[rename, "observable", "value"]);
    for r in rows {
        for (i, h) in header.iter().enumerate() {
            if i != ki {
                t.push(vec![cell(&r[ki]), cell(h), cell(&r[i])]);
            }
        }
    }
    Ok(t)
}

fn select(header: &[String], rows: &[Vec<String>], cols: &[(&str, &str)]) -> Result<Table, RunError> {
    let idx: Vec<usize> = cols
        .iter()
        .map(|(c, _)| header.iter().position(|h| h == c).ok_or_else(|| RunError::Schema(format!("no column `{c}`"))))
        .collect::<Result<_, _>>()?;
    let names: Vec<&str> = cols.iter().map(|(_, n)| *n).collect();
    let mut t = Table::new(&names);
    for r in rows {
        t.push(idx.iter().map(|&i| cell(&r[i])).collect());
    }
    Ok(t)
}

/// Regenerate the long-format plot tables of a finished run directory.
///
/// Rewrites only `plot_*.csv` files, and is byte-identical when repeated.
pub fn emit_plotdata(dir: &Path) -> Result<Vec<String>, RunError> {
    let mut written = Vec::new();
    let mut found = false;
    let mut emit = |name: &str, t: Table| -> Result<(), RunError> {
        fs::write(dir.join(name), t.render())?;
        written.push(name.to_string());
        Ok(())
    };
    if dir.join("kam_steps.csv").exists() {
        found = true;
        let (h, r) = read_table(&dir.join("kam_steps.csv"))?;
        emit("plot_kam.csv", to_long(&h, &r, "step", "index")?)?;
    }
    if dir.join("stability.csv").exists() {
        found = true;
        let (h, r) = read_table(&dir.join("stability.csv"))?;
        let mut t = Table::new(&["delta", "t", "observable", "value"]);
        let di = h.iter().position(|x| x == "delta").ok_or_else(|| RunError::Schema("no column `delta`".into()))?;
        let ti = h.iter().position(|x| x == "t").ok_or_else(|| RunError::Schema("no column `t`".into()))?;
        for row in &r {
            for (i, name) in h.iter().enumerate() {
                if i != di && i != ti {
                    t.push(vec![cell(&row[di]), cell(&row[ti]), cell(name), cell(&row[i])]);
                }
            }
        }
        emit("plot_stability.csv", t)?;
    }
    if dir.join("trajectory.csv").exists() {
        found = true;
        let (h, r) = read_table(&dir.join("trajectory.csv"))?;
        emit("plot_trajectory.csv", to_long(&h, &r, "t", "t")?)?;
    }
    if dir.join("measure.csv").exists() {
        found = true;
        let (h, r) = read_table(&dir.join("measure.csv"))?;
        let cols = [("eta", "eta_acute"), ("removed_fraction", "fraction"), ("ci_lo", "ci_lo"), ("ci_hi", "ci_hi")];
        emit("plot_measure.csv", select(&h, &r, &cols)?)?;
    }
    if dir.join("estimates.csv").exists() {
        found = true;
        let (h, r) = read_table(&dir.join("estimates.csv"))?;
        let cols = [("family", "family"), ("sigma", "sigma"), ("normalized", "value"), ("half", "half")];
        emit("plot_estimates.csv", select(&h, &r, &cols)?)?;
    }
    if !found {
        return Err(RunError::Schema(format!("no run artifacts in {}", dir.display())));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn quoted_cells_survive_a_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::from("x,\"y\""), Cell::from(2usize)]);
        let path = std::env::temp_dir().join(format!("nf-quoted-{}.csv", std::process::id()));
        fs::write(&path, t.render()).unwrap();
        let (h, rows) = read_table(&path).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(rows, vec![vec!["x,\"y\"".to_string(), "2".to_string()]]);
        assert!(t.render().ends_with("2\n"));
    }
}
