//! CSV persistence for labeled sets. Columns are `x0..x{p-1}` then
//! `y0..y{q-1}`; the meta map travels in a JSON sidecar next to the file.
//! Values are written in shortest round-trip form, so write-then-read is
//! exact.

use std::path::Path;

use super::{LabeledSet, Meta};
use crate::error::{Error, Result};

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

/// Writes the set and its meta sidecar.
pub fn csv_write(set: &LabeledSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = Vec::with_capacity(set.input_dim() + set.target_dim());
    for i in 0..set.input_dim() {
        header.push(format!("x{i}"));
    }
    for i in 0..set.target_dim() {
        header.push(format!("y{i}"));
    }
    writer.write_record(&header)?;
    for i in 0..set.len() {
        let mut record = Vec::with_capacity(header.len());
        for v in set.input(i) {
            record.push(v.to_string());
        }
        for v in set.target(i) {
            record.push(v.to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    let meta_json = serde_json::to_string_pretty(&set.meta)?;
    std::fs::write(sidecar_path(path), meta_json)?;
    Ok(())
}

/// Reads a set written by [`csv_write`]. A missing sidecar yields empty
/// meta. Header deviations and malformed rows are reported with positions.
pub fn csv_read(path: &Path) -> Result<LabeledSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open {}", path.display()),
            )),
            _ => Error::CsvParse {
                line: 1,
                message: e.to_string(),
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::CsvParse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::CsvParse {
            line: 1,
            message: "empty file".into(),
        });
    }

    // Header must be x0..x{p-1} followed by y0..y{q-1}.
    let mut input_dim = 0usize;
    let mut target_dim = 0usize;
    for (idx, name) in headers.iter().enumerate() {
        let expected_x = format!("x{input_dim}");
        let expected_y = format!("y{target_dim}");
        if target_dim == 0 && name == expected_x {
            input_dim += 1;
        } else if input_dim > 0 && name == expected_y {
            target_dim += 1;
        } else {
            let expected = if target_dim == 0 && input_dim > 0 {
                format!("{expected_x} or {expected_y}")
            } else if target_dim == 0 {
                expected_x
            } else {
                expected_y
            };
            return Err(Error::CsvHeader {
                expected,
                found: format!("{name:?} at column {idx}"),
            });
        }
    }
    if input_dim == 0 {
        return Err(Error::CsvHeader {
            expected: "x0".into(),
            found: headers.iter().next().unwrap_or("").to_string(),
        });
    }

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::CsvParse {
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or(inputs.len() as u64 + 2),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != input_dim + target_dim {
            return Err(Error::CsvParse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    input_dim + target_dim,
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(input_dim + target_dim);
        for field in record.iter() {
            let value: f64 = field.trim().parse().map_err(|_| Error::CsvParse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            row.push(value);
        }
        targets.push(row.split_off(input_dim));
        inputs.push(row);
    }
    if inputs.is_empty() {
        return Err(Error::CsvParse {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let meta: Meta = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Meta::new(),
    };
    LabeledSet::new(inputs, targets, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_cubic;
    use crate::util::rng_for;
    use rand::Rng;

    #[test]
    fn write_then_read_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        let mut rng = rng_for(3, 0);
        let inputs: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-1e3..1e3)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0) * 1e-7).collect())
            .collect();
        let set = LabeledSet::new(inputs, targets, Meta::new()).unwrap();
        csv_write(&set, &path).unwrap();
        let back = csv_read(&path).unwrap();
        // shortest round-trip formatting makes this bit-exact
        assert_eq!(set.inputs(), back.inputs());
        assert_eq!(set.targets(), back.targets());
    }

    #[test]
    fn meta_round_trips_via_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cubic.csv");
        let set = gen_cubic(20, 4).unwrap();
        csv_write(&set, &path).unwrap();
        let back = csv_read(&path).unwrap();
        assert_eq!(set.meta, back.meta);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        let err = csv_read(&path).unwrap_err();
        assert!(matches!(err, Error::CsvParse { .. }), "{err}");
    }

    #[test]
    fn header_mismatch_names_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = csv_read(&path).unwrap_err();
        match err {
            Error::CsvHeader { expected, found } => {
                assert!(expected.contains("x0"));
                assert!(found.contains('a'));
            }
            other => panic!("expected header error, got {other}"),
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad_row.csv");
        std::fs::write(&path, "x0,y0\n1.0,2.0\noops,3.0\n").unwrap();
        let err = csv_read(&path).unwrap_err();
        match err {
            Error::CsvParse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unlabeled_sets_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unlabeled.csv");
        let set = LabeledSet::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![vec![], vec![]],
            Meta::new(),
        )
        .unwrap();
        csv_write(&set, &path).unwrap();
        let back = csv_read(&path).unwrap();
        assert_eq!(back.target_dim(), 0);
        assert_eq!(back.inputs(), set.inputs());
    }
}
