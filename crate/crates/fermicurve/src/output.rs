//! Output files: CSV tables and handle documents, each preceded by `#`
//! header lines carrying the configuration hash, the window radius and the
//! tail budget.
//!
//! Floats are written in Rust's shortest round-trip exponent form, so the
//! same configuration and seed always give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::handle::HandleRecord;

/// Metadata written at the top of every output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub command: String,
    pub config_hash: String,
    pub window_radius: f64,
    pub tail_budget: f64,
    pub epsilon: f64,
    pub rho: f64,
}

impl Header {
    pub fn lines(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# command = {}", self.command).unwrap();
        writeln!(s, "# config_hash = {}", self.config_hash).unwrap();
        writeln!(s, "# window_radius = {}", num(self.window_radius)).unwrap();
        writeln!(s, "# tail_budget = {}", num(self.tail_budget)).unwrap();
        writeln!(s, "# epsilon = {}", num(self.epsilon)).unwrap();
        writeln!(s, "# rho = {}", num(self.rho)).unwrap();
        s
    }
}

/// A float in shortest round-trip exponent form.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Real and imaginary parts as two fields.
pub fn cnum(z: C) -> [String; 2] {
    [num(z.re), num(z.im)]
}

/// A CSV table with named columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the columns");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// The header lines followed by the CSV text.
    pub fn render(&self, header: &Header) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(header.lines() + &String::from_utf8(body).expect("CSV from strings is UTF-8"))
    }

    pub fn write(&self, path: &Path, header: &Header) -> Result<PathBuf> {
        write_text(path, &self.render(header)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// A parsed output file: header key/value pairs and the table.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvFile {
    pub header: Vec<(String, String)>,
    pub table: Table,
}

impl CsvFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.table.column(name).ok_or_else(|| Error::Io(format!("no column {name:?}")))?;
        self.table
            .rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| Error::Io(format!("column {name}: {e}"))))
            .collect()
    }

    /// Column `name` as text.
    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let i = self.table.column(name).ok_or_else(|| Error::Io(format!("no column {name:?}")))?;
        Ok(self.table.rows.iter().map(|r| r[i].clone()).collect())
    }
}

fn split_header(text: &str) -> (Vec<(String, String)>, &str) {
    let mut header = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (line, tail) = line.split_once('\n').unwrap_or((line, ""));
        if let Some((k, v)) = line.split_once('=') {
            header.push((k.trim().to_string(), v.trim().to_string()));
        }
        rest = tail;
    }
    (header, rest)
}

/// Reads a file written by [`Table::write`].
pub fn read_csv(path: &Path) -> Result<CsvFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<CsvFile> {
    let (header, body) = split_header(text);
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    let mut records = r.records();
    let columns: Vec<String> = match records.next() {
        Some(rec) => rec.map_err(csv_err)?.iter().map(str::to_string).collect(),
        None => Vec::new(),
    };
    let mut table = Table { columns, rows: Vec::new() };
    for rec in records {
        table.rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
    }
    Ok(CsvFile { header, table })
}

/// Writes a handle record as a TOML document after the header lines.
pub fn write_handle_record(path: &Path, header: &Header, record: &HandleRecord) -> Result<PathBuf> {
    let doc = toml::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
    write_text(path, &(header.lines() + &doc))
}

/// Reads a handle document back; the header lines are TOML comments.
pub fn read_handle_record(path: &Path) -> Result<(Vec<(String, String)>, HandleRecord)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let (header, _) = split_header(&text);
    let record = toml::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok((header, record))
}
