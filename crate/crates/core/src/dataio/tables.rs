use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::features::FeatureMatrix;
use crate::pipeline::TraceRecord;
use crate::ssc::CodeMatrix;
use crate::{Error, Result};

/// One `(row, col, label)` line of a label CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelEntry {
    pub row: usize,
    pub col: usize,
    pub label: u32,
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::format(path, format!("line {line}: non-finite value")));
    }
    Ok(v)
}

fn parse_pixel(path: &Path, field: &str) -> Result<(usize, usize)> {
    let (r, c) = field
        .split_once(':')
        .ok_or_else(|| Error::format(path, format!("pixel index {field:?} is not r:c")))?;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("pixel index {field:?} is not r:c")))
    };
    Ok((parse(r)?, parse(c)?))
}

/// Feature CSV: a header of `r:c` pixel indices, then one row per feature.
pub fn write_feature_csv(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_err(path.as_ref(), e))?;
    let header: Vec<String> = features.pixel_index.iter().map(|(r, c)| format!("{r}:{c}")).collect();
    w.write_record(&header).map_err(|e| csv_err(path.as_ref(), e))?;
    for row in features.data.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| csv_err(path.as_ref(), e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let pixel_index = header.iter().map(|f| parse_pixel(path, f)).collect::<Result<Vec<_>>>()?;
    let m = pixel_index.len();
    if m == 0 {
        return Err(Error::format(path, "empty header"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != m {
            return Err(Error::format(path, format!("line {}: {} fields, expected {m}", i + 2, rec.len())));
        }
        for f in rec.iter() {
            values.push(parse_f64(path, i + 2, f)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::format(path, "no feature rows"));
    }
    FeatureMatrix::new(DMatrix::from_row_slice(rows, m, &values), pixel_index)
}

/// Plain numeric CSV, no header, row-major.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())
        .map_err(|e| csv_err(path.as_ref(), e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| csv_err(path.as_ref(), e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path, false)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let expected = *cols.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::format(path, format!("line {}: ragged row", i + 1)));
        }
        for f in rec.iter() {
            values.push(parse_f64(path, i + 1, f)?);
        }
        rows += 1;
    }
    match cols {
        Some(c) if c > 0 && rows > 0 => Ok(DMatrix::from_row_slice(rows, c, &values)),
        _ => Err(Error::format(path, "empty matrix")),
    }
}

/// Label CSV: header `row,col,label`, one line per pixel.
pub fn write_label_csv(path: impl AsRef<Path>, entries: &[LabelEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "row,col,label")?;
    for e in entries {
        writeln!(w, "{},{},{}", e.row, e.col, e.label)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_label_csv(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>> {
    let path = path.as_ref();
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["row", "col", "label"] {
        return Err(Error::format(path, format!("expected header row,col,label, got {names:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 3 {
            return Err(Error::format(path, format!("line {}: expected 3 fields", i + 2)));
        }
        let field = |k: usize| {
            rec[k]
                .parse::<u64>()
                .map_err(|_| Error::format(path, format!("line {}: bad integer {:?}", i + 2, &rec[k])))
        };
        let label = u32::try_from(field(2)?)
            .map_err(|_| Error::format(path, format!("line {}: label out of range", i + 2)))?;
        out.push(LabelEntry {
            row: field(0)? as usize,
            col: field(1)? as usize,
            label,
        });
    }
    Ok(out)
}

/// Objective trace: `iter,recon_term,ssc_term,l1_term,total,delta_C`.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "iter,recon_term,ssc_term,l1_term,total,delta_C")?;
    for t in trace {
        let o = &t.objective;
        writeln!(w, "{},{:?},{:?},{:?},{:?},{:?}", t.iter, o.recon, o.ssc, o.l1, o.total, t.delta_c)?;
    }
    w.flush()?;
    Ok(())
}

/// Sparse code export: header `i,j,value`, entries with `|value| > 1e-12`.
pub fn write_code_triplets(path: impl AsRef<Path>, codes: &CodeMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "i,j,value")?;
    for (i, j, v) in codes.triplets(1e-12) {
        writeln!(w, "{i},{j},{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-17, 3.0, 1.0 / 3.0, 7e300, -0.0]);
        let f = FeatureMatrix::new(data, vec![(0, 0), (4, 2), (10, 7)]).unwrap();
        let path = dir.path().join("x.csv");
        write_feature_csv(&path, &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("0:0,4:2,10:7\n"));
        assert_eq!(read_feature_csv(&path).unwrap(), f);
    }

    #[test]
    fn ragged_feature_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "0:0,0:1\n1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_feature_csv(&path), Err(Error::Format { .. })));
        std::fs::write(&path, "0:0,0:1\n1.0,abc\n").unwrap();
        assert!(matches!(read_feature_csv(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn label_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        let entries: Vec<LabelEntry> = (0..7)
            .map(|j| LabelEntry { row: j / 3, col: j % 3, label: (j * 5 % 4) as u32 })
            .collect();
        write_label_csv(&path, &entries).unwrap();
        assert_eq!(read_label_csv(&path).unwrap(), entries);
    }

    #[test]
    fn label_csv_rejects_negative_and_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        std::fs::write(&path, "row,col,label\n0,0,-1\n").unwrap();
        assert!(read_label_csv(&path).is_err());
        std::fs::write(&path, "a,b,c\n0,0,1\n").unwrap();
        assert!(read_label_csv(&path).is_err());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) / (j as f64 + 7.0));
        write_matrix_csv(&path, &m).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
    }
}
