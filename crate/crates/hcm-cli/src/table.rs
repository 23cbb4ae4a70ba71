//! Generic named-column CSV tables for the score/calibrate/eval pipeline.

use std::path::Path;

use hcm_core::error::{Error, Result};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                    Error::Io(std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("cannot open {}", path.display()),
                    ))
                }
                _ => Error::CsvParse {
                    line: 1,
                    message: e.to_string(),
                },
            })?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::CsvParse {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() {
            return Err(Error::CsvParse {
                line: 1,
                message: "empty file".into(),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::CsvParse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(Error::CsvParse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        Ok(Table { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// A required numeric column; a missing column is a usage error that
    /// names both what was expected and what is present.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name).ok_or_else(|| Error::CsvHeader {
            expected: name.to_string(),
            found: self.header.join(","),
        })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx].trim().parse::<f64>().map_err(|_| Error::CsvParse {
                    line: i as u64 + 2,
                    message: format!("column {name}: not a number: {:?}", row[idx]),
                })
            })
            .collect()
    }

    /// An optional boolean column encoded as 0/1.
    pub fn flag_column(&self, name: &str) -> Result<Option<Vec<bool>>> {
        let Some(idx) = self.column_index(name) else {
            return Ok(None);
        };
        let mut flags = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            match row[idx].trim() {
                "0" | "false" => flags.push(false),
                "1" | "true" => flags.push(true),
                other => {
                    return Err(Error::CsvParse {
                        line: i as u64 + 2,
                        message: format!("column {name}: not a flag: {other:?}"),
                    })
                }
            }
        }
        Ok(Some(flags))
    }
}
