//! Plain-text table input and output.
//!
//! The dialect is deliberately small: comma separators, no quoting, no
//! escaping. A header is detected when the first non-empty line has any
//! field that does not parse as a number. A header column named `label`
//! carries ground truth with the values `inlier` and `outlier`; every other
//! column is a feature. Error messages cite 1-based line numbers.

use std::path::Path;

use crate::data::DataMatrix;
use crate::datagen::{Label, LabeledSet};
use crate::error::{Error, Result};
use crate::svdd::Score;

/// A parsed table: numeric features, optional labels, and the original
/// text of every data line so downstream output can preserve formatting.
#[derive(Debug, Clone)]
pub struct Table {
    pub data: DataMatrix,
    pub labels: Option<Vec<Label>>,
    /// Raw header line, when one was present.
    pub header: Option<String>,
    /// Raw data lines, one per row of `data`.
    pub lines: Vec<String>,
}

fn parse_field(field: &str) -> Option<f64> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return None;
    }
    trimmed.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV text into a [`Table`].
pub fn read_table(text: &str) -> Result<Table> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::InsufficientData("the file has no data rows".into()));
    }

    let first_fields: Vec<&str> = lines[0].1.split(',').collect();
    let has_header = first_fields.iter().any(|f| parse_field(f).is_none());

    let (header, data_lines) = if has_header {
        (Some(lines[0].1.to_string()), &lines[1..])
    } else {
        (None, &lines[..])
    };
    if data_lines.is_empty() {
        return Err(Error::InsufficientData(
            "the file has a header but no data rows".into(),
        ));
    }

    let label_col: Option<usize> = header.as_deref().and_then(|h| {
        h.split(',').position(|name| name.trim() == "label")
    });
    let n_cols = if let Some(h) = &header {
        h.split(',').count()
    } else {
        first_fields.len()
    };
    if label_col.is_some() && n_cols < 2 {
        return Err(Error::Data {
            line: 1,
            message: "a label column needs at least one feature column".into(),
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(data_lines.len());
    let mut labels: Vec<Label> = Vec::new();
    let mut raw: Vec<String> = Vec::with_capacity(data_lines.len());
    for &(line_no, line) in data_lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::Data {
                line: line_no,
                message: format!("expected {n_cols} fields, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(n_cols - usize::from(label_col.is_some()));
        for (col, field) in fields.iter().enumerate() {
            if Some(col) == label_col {
                match field.trim() {
                    "inlier" => labels.push(Label::Inlier),
                    "outlier" => labels.push(Label::Outlier),
                    other => {
                        return Err(Error::Data {
                            line: line_no,
                            message: format!(
                                "label must be 'inlier' or 'outlier', found '{other}'"
                            ),
                        })
                    }
                }
            } else {
                match parse_field(field) {
                    Some(v) => row.push(v),
                    None => {
                        return Err(Error::Data {
                            line: line_no,
                            message: format!(
                                "column {} is not a finite number: '{}'",
                                col + 1,
                                field.trim()
                            ),
                        })
                    }
                }
            }
        }
        rows.push(row);
        raw.push(line.to_string());
    }

    Ok(Table {
        data: DataMatrix::from_rows(&rows)?,
        labels: label_col.map(|_| labels),
        header,
        lines: raw,
    })
}

/// Reads and parses a CSV file.
pub fn read_table_file(path: impl AsRef<Path>) -> Result<Table> {
    read_table(&std::fs::read_to_string(path)?)
}

/// Renders a matrix as CSV with synthesized headers `x1..xp`.
pub fn write_matrix_csv(data: &DataMatrix) -> String {
    let mut out = String::new();
    let headers: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Renders a labeled set as CSV: features `x1..xp` plus a `label` column.
pub fn write_labeled_csv(set: &LabeledSet) -> String {
    let mut out = String::new();
    let headers: Vec<String> = (1..=set.data.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&headers.join(","));
    out.push_str(",label\n");
    for (row, label) in set.data.rows().zip(&set.labels) {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(match label {
            Label::Inlier => "inlier",
            Label::Outlier => "outlier",
        });
        out.push('\n');
    }
    out
}

/// Appends `dist2,outlier` columns to the original rows, preserving the
/// input text of every line verbatim.
pub fn scored_csv(table: &Table, scores: &[Score]) -> Result<String> {
    if table.lines.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: table.lines.len(),
            got: scores.len(),
        });
    }
    let mut out = String::new();
    if let Some(h) = &table.header {
        out.push_str(h);
        out.push_str(",dist2,outlier\n");
    }
    for (line, score) in table.lines.iter().zip(scores) {
        out.push_str(line);
        out.push_str(&format!(",{},{}\n", score.dist2, score.is_outlier));
    }
    Ok(out)
}

/// Reads a loosely formatted numeric table: fields split on commas or any
/// whitespace, one row per non-empty line. Useful for third-party data
/// dumps that do not follow the CSV dialect above.
pub fn read_delimited_numeric(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains(',') {
            trimmed.split(',').collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        let mut row = Vec::with_capacity(fields.len());
        for field in fields {
            match parse_field(field) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::Data {
                        line: i + 1,
                        message: format!("not a finite number: '{}'", field.trim()),
                    })
                }
            }
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("the file has no data rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headerless_numeric_csv_parses() {
        let t = read_table("1.5,2\n3,4.25\n").unwrap();
        assert!(t.header.is_none());
        assert!(t.labels.is_none());
        assert_eq!(t.data.n_rows(), 2);
        assert_eq!(t.data.row(1), &[3.0, 4.25]);
        assert_eq!(t.lines[0], "1.5,2");
    }

    #[test]
    fn header_with_label_column_parses() {
        let t = read_table("x1,x2,label\n0,1,inlier\n2,3,outlier\n").unwrap();
        assert_eq!(t.header.as_deref(), Some("x1,x2,label"));
        assert_eq!(t.data.dim(), 2);
        assert_eq!(
            t.labels.as_deref(),
            Some(&[Label::Inlier, Label::Outlier][..])
        );
    }

    #[test]
    fn header_without_label_column_parses() {
        let t = read_table("a,b\n1,2\n").unwrap();
        assert!(t.labels.is_none());
        assert_eq!(t.data.dim(), 2);
    }

    #[test]
    fn malformed_rows_cite_line_numbers() {
        let err = read_table("x1,x2\n1,2\n1,oops\n").unwrap_err();
        match err {
            Error::Data { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = read_table("x1,x2\n1,2,3\n").unwrap_err();
        match err {
            Error::Data { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = read_table("x1,label\n1,maybe\n").unwrap_err();
        match err {
            Error::Data { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("maybe"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(read_table("").is_err());
        assert!(read_table("x1,x2\n").is_err());
        assert!(read_table("\n\n").is_err());
    }

    #[test]
    fn matrix_csv_round_trips() {
        let data = DataMatrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]).unwrap();
        let text = write_matrix_csv(&data);
        assert!(text.starts_with("x1,x2\n"));
        let back = read_table(&text).unwrap();
        assert_eq!(back.data.as_slice(), data.as_slice());
    }

    #[test]
    fn labeled_csv_round_trips() {
        let set = LabeledSet {
            data: DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            labels: vec![Label::Inlier, Label::Outlier],
        };
        let text = write_labeled_csv(&set);
        assert_eq!(text.lines().next().unwrap(), "x1,x2,label");
        let back = read_table(&text).unwrap();
        assert_eq!(back.labels.as_deref(), Some(&set.labels[..]));
        assert_eq!(back.data.as_slice(), set.data.as_slice());
    }

    #[test]
    fn scored_output_preserves_original_text() {
        let t = read_table("x1,x2\n1.50,2\n0.25,7\n").unwrap();
        let scores = vec![
            Score {
                dist2: 0.5,
                is_outlier: false,
            },
            Score {
                dist2: 1.5,
                is_outlier: true,
            },
        ];
        let out = scored_csv(&t, &scores).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "x1,x2,dist2,outlier");
        assert_eq!(lines[1], "1.50,2,0.5,false");
        assert_eq!(lines[2], "0.25,7,1.5,true");
        assert!(scored_csv(&t, &scores[..1]).is_err());
    }

    #[test]
    fn loose_reader_accepts_spaces_and_commas() {
        let rows = read_delimited_numeric("1 2 3\n4,5,6\n  7\t8 9 \n").unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1], vec![4.0, 5.0, 6.0]);
        assert_eq!(rows[2], vec![7.0, 8.0, 9.0]);
        assert!(read_delimited_numeric("1 2\n3 x\n").is_err());
    }
}
