//! Text tables: endmember CSVs, vector CSVs, pixel masks and plain-text
//! spectral matrices.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::raster::{CubeFile, Dtype};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::sampler::EndmemberMatrix;

/// Shortest text that parses back to the same `f64`, in exponent form for
/// very large or small magnitudes.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| {
        Error::Format(format!(
            "non-numeric cell {cell:?} at row {row}, column {col}"
        ))
    })
}

fn records(reader: impl Read) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

fn numeric_rows(recs: &[csv::StringRecord], first_row: usize) -> Result<Vec<Vec<f64>>> {
    let width = recs.first().map(|r| r.len()).unwrap_or(0);
    recs.iter()
        .enumerate()
        .map(|(i, rec)| {
            if rec.len() != width {
                return Err(Error::Format(format!(
                    "ragged row {}: {} cells, expected {width}",
                    i + first_row,
                    rec.len()
                )));
            }
            rec.iter()
                .enumerate()
                .map(|(j, c)| parse_cell(c, i + first_row, j))
                .collect()
        })
        .collect()
}

/// Numeric rows of a CSV. A first row that does not parse as numbers is
/// treated as a header and returned separately.
pub fn read_vectors_from(reader: impl Read) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let recs = records(reader)?;
    let Some(first) = recs.first() else {
        return Ok((None, Vec::new()));
    };
    let is_header = first.iter().any(|c| c.parse::<f64>().is_err());
    if is_header {
        let header = first.iter().map(str::to_owned).collect::<Vec<_>>();
        let rows = numeric_rows(&recs[1..], 1)?;
        if let Some(r) = rows.first() {
            if r.len() != header.len() {
                return Err(Error::Format(
                    "header and data rows have different widths".into(),
                ));
            }
        }
        Ok((Some(header), rows))
    } else {
        Ok((None, numeric_rows(&recs, 0)?))
    }
}

pub fn read_vectors(path: &Path) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    read_vectors_from(std::fs::File::open(path)?)
}

pub fn write_vectors_to(
    out: impl Write,
    header: Option<&[String]>,
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(out);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|x| format_float(*x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vectors(path: &Path, header: Option<&[String]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    write_vectors_to(&mut buf, header, rows)?;
    write_atomic(path, &buf)
}

/// L rows by P columns with a header row of material names.
pub fn load_endmembers(path: &Path) -> Result<EndmemberMatrix> {
    let (header, rows) = read_vectors(path)?;
    let names =
        header.ok_or_else(|| Error::Format("endmember CSV needs a header row of names".into()))?;
    if names.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "endmember CSV has {} column(s); at least 2 materials are needed",
            names.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Format("endmember CSV has no band rows".into()));
    }
    let s = DMatrix::from_fn(rows.len(), names.len(), |l, p| rows[l][p]);
    EndmemberMatrix::new(s, names)
}

pub fn write_endmembers(path: &Path, s: &EndmemberMatrix) -> Result<()> {
    let m = s.matrix();
    let rows = (0..m.nrows())
        .map(|l| m.row(l).iter().copied().collect())
        .collect::<Vec<Vec<f64>>>();
    write_vectors(path, Some(s.names()), &rows)
}

/// Pixel indices, any mix of commas and newlines, optional `index` header.
pub fn load_mask(path: &Path) -> Result<Vec<usize>> {
    let recs = records(std::fs::File::open(path)?)?;
    let mut out = Vec::new();
    for (i, rec) in recs.iter().enumerate() {
        for cell in rec.iter().filter(|c| !c.is_empty()) {
            if i == 0 && cell.eq_ignore_ascii_case("index") {
                continue;
            }
            let v = cell
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("mask entry {cell:?} is not a pixel index")))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn write_mask(path: &Path, indices: &[usize]) -> Result<()> {
    let mut text = String::from("index\n");
    for i in indices {
        text.push_str(&format!("{i}\n"));
    }
    write_atomic(path, text.as_bytes())
}

/// Reads a whitespace- or comma-separated `L×N` reflectance matrix, as found
/// in public text exports of scenes such as Samson. Columns are pixels;
/// `column_major_pixels` marks files whose pixel index runs down image
/// columns first (MATLAB reshape order).
pub fn load_samson_matrix(
    path: &Path,
    width: usize,
    height: usize,
    column_major_pixels: bool,
) -> Result<CubeFile> {
    let text = std::fs::read_to_string(path)?;
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
                .enumerate()
                .map(|(j, c)| parse_cell(c, i, j))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = width * height;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Format(format!(
            "row {i} has {} pixels, expected {n}",
            r.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Format("empty spectral matrix".into()));
    }
    let data = DMatrix::from_fn(rows.len(), n, |l, pix| {
        let src = if column_major_pixels {
            let (y, x) = (pix / width, pix % width);
            x * height + y
        } else {
            pix
        };
        rows[l][src]
    });
    CubeFile::new(data, width, height, Dtype::Float64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_with_and_without_header() {
        let (h, rows) = read_vectors_from("a,b\n0.5,0.5\n0.25,0.75\n".as_bytes()).unwrap();
        assert_eq!(h.unwrap(), vec!["a", "b"]);
        assert_eq!(rows, vec![vec![0.5, 0.5], vec![0.25, 0.75]]);
        let (h, rows) = read_vectors_from("1,2,3\n".as_bytes()).unwrap();
        assert!(h.is_none());
        assert_eq!(rows[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn ragged_and_non_numeric_rows_fail() {
        assert!(read_vectors_from("1,2\n3\n".as_bytes()).is_err());
        assert!(read_vectors_from("a,b\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 5e-324] {
            assert_eq!(
                format_float(x).parse::<f64>().unwrap().to_bits(),
                x.to_bits()
            );
        }
    }

    #[test]
    fn endmember_csv_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.csv");
        std::fs::write(&p, "soil,water\n0.9,0.1\n0.2,0.6\n").unwrap();
        let s = load_endmembers(&p).unwrap();
        assert_eq!((s.bands(), s.components()), (2, 2));
        assert_eq!(s.names(), &["soil", "water"]);

        std::fs::write(&p, "soil\n0.9\n0.2\n").unwrap();
        assert!(matches!(
            load_endmembers(&p),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn mask_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mask.csv");
        std::fs::write(&p, "index\n3\n0,7\n").unwrap();
        assert_eq!(load_mask(&p).unwrap(), vec![3, 0, 7]);
        std::fs::write(&p, "-1\n").unwrap();
        assert!(load_mask(&p).is_err());
    }

    #[test]
    fn samson_text_column_major() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        // 2x2 image, pixels stored down columns: (0,0) (0,1) (1,0) (1,1) as (x,y)
        std::fs::write(&p, "0 2 1 3\n10 12 11 13\n").unwrap();
        let cube = load_samson_matrix(&p, 2, 2, true).unwrap();
        assert_eq!(
            cube.data.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 1.0, 2.0, 3.0]
        );
        assert_eq!(cube.header.bands, 2);
    }
}
