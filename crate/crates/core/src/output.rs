//! CSV and text output. Reals are written in `{:.16e}` so files are
//! byte-identical across runs with the same configuration.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::energy::{EnergyRecord, EstimateReport, ENERGY_COLUMNS};
use crate::error::{Error, Result};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes a header and rows to any writer.
pub fn write_csv<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Shape {
                expected: header.len(),
                got: row.len(),
            });
        }
        wr.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    write_csv(File::create(path)?, header, rows)
}

/// Every `every`-th record plus the last one. Empty input gives a
/// header-only file.
pub fn energy_rows(records: &[EnergyRecord], every: usize) -> Vec<Vec<Cell>> {
    let every = every.max(1);
    let n = records.len();
    records
        .iter()
        .enumerate()
        .filter(|(i, _)| i % every == 0 || i + 1 == n)
        .map(|(_, r)| r.values().iter().map(|&v| Cell::Real(v)).collect())
        .collect()
}

pub fn write_energy_csv<W: Write>(w: W, records: &[EnergyRecord], every: usize) -> Result<()> {
    write_csv(w, &ENERGY_COLUMNS, energy_rows(records, every))
}

pub const ESTIMATE_COLUMNS: [&str; 7] = ["name", "lhs", "rhs", "margin", "worst_t", "pass", "note"];

pub fn write_estimates_csv<W: Write>(w: W, report: &EstimateReport) -> Result<()> {
    let rows = report.entries.iter().map(|e| {
        vec![
            Cell::from(e.name.as_str()),
            e.lhs.into(),
            e.rhs.into(),
            e.margin.into(),
            e.worst_t.into(),
            e.pass.into(),
            Cell::from(e.note.as_str()),
        ]
    });
    write_csv(w, &ESTIMATE_COLUMNS, rows)
}

/// Writes `text` to `dir/name`, creating `dir` if needed.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(records: &[EnergyRecord], every: usize) -> String {
        let mut buf = Vec::new();
        write_energy_csv(&mut buf, records, every).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_energy_is_header_only() {
        let s = render(&[], 1);
        assert_eq!(s, format!("{}\n", ENERGY_COLUMNS.join(",")));
    }

    #[test]
    fn energy_keeps_stride_and_last() {
        let recs: Vec<EnergyRecord> = (0..7)
            .map(|i| EnergyRecord {
                t: i as f64 * 0.5,
                ..EnergyRecord::default()
            })
            .collect();
        let s = render(&recs, 3);
        let ts: Vec<&str> = s.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ts, ["0.0000000000000000e0", "1.5000000000000000e0", "3.0000000000000000e0"]);
        let s = render(&recs[..5], 3);
        assert_eq!(s.lines().count(), 1 + 3);
    }

    #[test]
    fn reals_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = Cell::Real(v).render();
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn row_length_checked() {
        let err = write_csv(Vec::new(), &["a", "b"], vec![vec![Cell::Int(1)]]).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 2, got: 1 }));
    }

    #[test]
    fn text_cells_are_quoted_when_needed() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["note"], vec![vec![Cell::from("a, b")]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "note\n\"a, b\"\n");
    }
}
