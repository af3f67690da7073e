//! Feature tables: CSV with an integer label in the first column and one real
//! feature per remaining column. A single header row is skipped when its first
//! cell is not a number.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureTableFormat {
    /// Overrides the inferred `max label + 1`.
    pub class_count: Option<usize>,
    pub set_id: usize,
}

pub fn load_feature_table(
    path: impl AsRef<Path>,
    format: &FeatureTableFormat,
) -> Result<(FeatureMatrix, LabelVector)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_feature_table(file, path, format)
}

/// Parses a feature table from any reader; `origin` only labels errors.
pub fn parse_feature_table<R: Read>(
    reader: R,
    origin: impl AsRef<Path>,
    format: &FeatureTableFormat,
) -> Result<(FeatureMatrix, LabelVector)> {
    let origin = origin.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first = true;

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if first {
            first = false;
            if record[0].parse::<f64>().is_err() {
                continue;
            }
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} columns, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        if record.len() < 2 {
            return Err(parse_err(
                line,
                "need a label and at least one feature".into(),
            ));
        }
        let label: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("label {:?} is not an integer", &record[0])))?;
        if label < 0 {
            return Err(parse_err(line, format!("negative label {label}")));
        }
        labels.push(label as usize);
        let features = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(k, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!("feature {} ({cell:?}) is not a finite number", k + 1),
                        )
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(features);
    }

    if rows.is_empty() {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let labels = match format.class_count {
        Some(c) => LabelVector::new(labels, c),
        None => LabelVector::from_labels(labels),
    }
    .map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let x = FeatureMatrix::from_sample_rows(&rows, format.set_id)?;
    Ok((x, labels))
}

/// Writes one row per sample: label, then features. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_feature_table<W: Write>(
    mut out: W,
    x: &FeatureMatrix,
    labels: &LabelVector,
    header: bool,
) -> std::io::Result<()> {
    if labels.len() != x.samples() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "label count does not match sample count",
        ));
    }
    let mut line = String::new();
    if header {
        line.push_str("label");
        for k in 1..=x.dim() {
            line.push_str(&format!(",f{k}"));
        }
        writeln!(out, "{line}")?;
    }
    for (j, col) in x.values().column_iter().enumerate() {
        line.clear();
        line.push_str(&labels.labels()[j].to_string());
        for v in col.iter() {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(FeatureMatrix, LabelVector)> {
        parse_feature_table(text.as_bytes(), "mem.csv", &FeatureTableFormat::default())
    }

    #[test]
    fn two_rows() {
        let (x, labels) = parse("0,1.5,2.0\n1,0.5,1.0\n").unwrap();
        assert_eq!(x.samples(), 2);
        assert_eq!(x.dim(), 2);
        assert_eq!(labels.labels(), &[0, 1]);
        assert_eq!(x.values()[(0, 1)], 0.5);
        assert_eq!(x.values()[(1, 0)], 2.0);
    }

    #[test]
    fn header_skipped() {
        let (x, labels) = parse("label,f1,f2\n0,1.5,2.0\n1,0.5,1.0\n").unwrap();
        assert_eq!((x.dim(), x.samples()), (2, 2));
        assert_eq!(labels.class_count(), 2);
    }

    #[test]
    fn ragged_row_cites_line() {
        let err = parse("0,1.5,2.0\n0,1.5\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_feature() {
        let err = parse("0,1.5,2.0\n1,abc,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn negative_label() {
        let err = parse("0,1,2\n-1,1,2\n1,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn class_count_override() {
        let fmt = FeatureTableFormat {
            class_count: Some(5),
            set_id: 2,
        };
        let (x, labels) = parse_feature_table("0,1\n1,2\n".as_bytes(), "m", &fmt).unwrap();
        assert_eq!(labels.class_count(), 5);
        assert_eq!(x.set_id(), 2);
    }

    #[test]
    fn write_then_read_is_exact() {
        let x = FeatureMatrix::from_sample_rows(
            &[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 12345.678901234567]],
            0,
        )
        .unwrap();
        let labels = LabelVector::from_labels(vec![3, 0]).unwrap();
        let mut buf = Vec::new();
        write_feature_table(&mut buf, &x, &labels, true).unwrap();
        let (y, l2) =
            parse_feature_table(buf.as_slice(), "m", &FeatureTableFormat::default()).unwrap();
        assert_eq!(x, y);
        assert_eq!(labels, l2);
    }
}
