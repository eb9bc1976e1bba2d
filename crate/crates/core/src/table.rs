//! Raw string tables read from CSV.

use std::io::Read;
use std::path::Path;

use crate::schema::SchemaError;

/// Header plus rows of untyped cells; typing happens at encode time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, SchemaError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(SchemaError::RaggedRow {
                    row: i,
                    expected: header.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self { header, rows })
    }

    /// Comma separated, header required, `#` starts a comment line.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, SchemaError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| SchemaError::Csv(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(SchemaError::EmptyTable);
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SchemaError::Csv(e.to_string()))?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        if rows.is_empty() {
            return Err(SchemaError::EmptyTable);
        }
        Self::new(header, rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| SchemaError::Csv(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(file)
    }

    pub fn column_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SchemaError::UnknownColumn(name.to_owned()))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[idx].as_str())
    }
}
