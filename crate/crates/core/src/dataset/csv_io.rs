use std::path::Path;

use ndarray::Array2;

use super::{AuxiliarySet, Category, LabeledDataset, PseudoQuality};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CATEGORY_COLUMN: &str = "category";
const QUALITY_COLUMN: &str = "pseudo_quality";

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn read_headers(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    let headers = reader.headers().map_err(|e| Error::Csv {
        row: 0,
        column: String::new(),
        message: e.to_string(),
    })?;
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Empty(format!("{} has no header row", path.display())));
    }
    Ok(headers.iter().map(str::to_owned).collect())
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    let value: f64 = cell.parse().map_err(|_| Error::Csv {
        row,
        column: column.to_owned(),
        message: format!("non-numeric cell `{cell}`"),
    })?;
    if !value.is_finite() {
        return Err(Error::Csv { row, column: column.to_owned(), message: "non-finite value".into() });
    }
    Ok(T::lit(value))
}

fn parse_label(cell: &str, row: usize, column: &str) -> Result<u8> {
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::Csv {
            row,
            column: column.to_owned(),
            message: format!("label `{cell}` is not 0 or 1"),
        }),
    }
}

fn record_error(e: csv::Error, row: usize) -> Error {
    Error::Csv { row, column: String::new(), message: e.to_string() }
}

/// Reads a labeled dataset. Every column other than `label_column` is a
/// feature, in header order. Rows are numbered from 1 (the header is row 0).
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset<T>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = read_headers(&mut reader, path)?;
    let label_idx = headers.iter().position(|h| h == label_column).ok_or_else(|| Error::Csv {
        row: 0,
        column: label_column.to_owned(),
        message: "label column not found in header".into(),
    })?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::Empty(format!("{} has no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| record_error(e, row))?;
        for &j in &feature_cols {
            values.push(parse_cell::<T>(&record[j], row, &headers[j])?);
        }
        labels.push(parse_label(&record[label_idx], row, label_column)?);
    }
    if labels.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    let features = Array2::from_shape_vec((labels.len(), feature_cols.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    LabeledDataset::new(features, labels)
}

/// Reads an auxiliary set. Optional `category` and `pseudo_quality` string
/// columns are picked up as tags; a column named `label_column`, if present,
/// is ignored. All other columns are features.
pub fn load_auxiliary_csv<T: Scalar>(path: impl AsRef<Path>, label_column: &str) -> Result<AuxiliarySet<T>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = read_headers(&mut reader, path)?;
    let cat_idx = headers.iter().position(|h| h == CATEGORY_COLUMN);
    let qual_idx = headers.iter().position(|h| h == QUALITY_COLUMN);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| Some(j) != cat_idx && Some(j) != qual_idx && headers[j] != label_column)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Empty(format!("{} has no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut categories = Vec::new();
    let mut qualities = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| record_error(e, row))?;
        for &j in &feature_cols {
            values.push(parse_cell::<T>(&record[j], row, &headers[j])?);
        }
        let tag_err = |column: &str, e: Error| Error::Csv { row, column: column.to_owned(), message: e.to_string() };
        if let Some(j) = cat_idx {
            categories.push(record[j].parse::<Category>().map_err(|e| tag_err(CATEGORY_COLUMN, e))?);
        }
        if let Some(j) = qual_idx {
            qualities.push(record[j].parse::<PseudoQuality>().map_err(|e| tag_err(QUALITY_COLUMN, e))?);
        }
        rows += 1;
    }
    let features = Array2::from_shape_vec((rows, feature_cols.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    AuxiliarySet::new(features, cat_idx.map(|_| categories), qual_idx.map(|_| qualities))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn feature_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

pub fn write_dataset_csv<T: Scalar>(path: impl AsRef<Path>, data: &LabeledDataset<T>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = feature_header(data.d());
    header.push(label_column.to_owned());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..data.n() {
        let mut record: Vec<String> = data.row_slice(i).iter().map(|v| v.to_string()).collect();
        record.push(data.labels()[i].to_string());
        w.write_record(&record).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_auxiliary_csv<T: Scalar>(path: impl AsRef<Path>, aux: &AuxiliarySet<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = feature_header(aux.d());
    if aux.category().is_some() {
        header.push(CATEGORY_COLUMN.into());
    }
    if aux.pseudo_quality().is_some() {
        header.push(QUALITY_COLUMN.into());
    }
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..aux.len() {
        let mut record: Vec<String> = aux.row_slice(i).iter().map(|v| v.to_string()).collect();
        if let Some(c) = aux.category() {
            record.push(c[i].to_string());
        }
        if let Some(q) = aux.pseudo_quality() {
            record.push(q[i].to_string());
        }
        w.write_record(&record).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = temp_csv("f0,f1,label\n0.1,0.2,0\n0.3,0.4,0\n5,6,1\n");
        let data: LabeledDataset<f64> = load_csv(f.path(), "label").unwrap();
        assert_eq!((data.n(), data.d(), data.m()), (3, 2, 1));
        assert_eq!(data.row_slice(2), &[5.0, 6.0]);
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let f = temp_csv("y,a,b\n1,1,2\n0,3,4\n");
        let data: LabeledDataset<f64> = load_csv(f.path(), "y").unwrap();
        assert_eq!(data.row_slice(0), &[1.0, 2.0]);
        assert_eq!(data.labels(), &[1, 0]);
    }

    #[test]
    fn hundred_rows_four_features() {
        let mut text = String::from("a,b,c,d,label\n");
        for i in 0..100 {
            text.push_str(&format!("{i},{},{},{},{}\n", i * 2, i % 7, -i, u8::from(i % 10 == 0)));
        }
        let f = temp_csv(&text);
        let data: LabeledDataset<f64> = load_csv(f.path(), "label").unwrap();
        assert_eq!((data.n(), data.d(), data.m()), (100, 4, 10));
    }

    #[test]
    fn bad_label_reports_its_row() {
        let f = temp_csv("f0,label\n1,0\n2,0\n3,1\n4,0\n5,2\n");
        let err = load_csv::<f64>(f.path(), "label").unwrap_err();
        match err {
            Error::Csv { row, ref column, .. } => {
                assert_eq!(row, 5);
                assert_eq!(column, "label");
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(err.to_string().contains("row 5"));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let f = temp_csv("f0,f1,label\n1,2,0\n1,abc,0\n");
        match load_csv::<f64>(f.path(), "label").unwrap_err() {
            Error::Csv { row, column, .. } => assert_eq!((row, column.as_str()), (2, "f1")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_and_missing_files_fail() {
        let f = temp_csv("");
        assert!(matches!(load_csv::<f64>(f.path(), "label"), Err(Error::Empty(_))));
        let f = temp_csv("f0,label\n");
        assert!(matches!(load_csv::<f64>(f.path(), "label"), Err(Error::Empty(_))));
        assert!(matches!(load_csv::<f64>("/nonexistent/x.csv", "label"), Err(Error::Io { .. })));
    }

    #[test]
    fn auxiliary_tags_round_trip() {
        let aux = AuxiliarySet::with_categories(
            ndarray::array![[1.5, -2.0], [0.25, 3.0]],
            vec![Category::Realistic, Category::Unrealistic],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_auxiliary_csv(f.path(), &aux).unwrap();
        let back: AuxiliarySet<f64> = load_auxiliary_csv(f.path(), "label").unwrap();
        assert_eq!(back, aux);
    }
}
