//! Complex sample arrays in CSV: one series per row, cells written `re+imj`,
//! or `pairs` rows of alternating real and imaginary parts.

use std::path::Path;

use blockcorr::{CMatrix, Complex64};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Complex,
    Pairs,
}

pub fn parse_complex(cell: &str) -> Option<Complex64> {
    let s = cell.trim();
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => t.parse().ok(),
    };
    match split {
        Some(k) => Some(Complex64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

/// Shortest round-trip form, `re+imj`.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{sign}{:?}j", z.re, z.im.abs())
}

pub fn read(path: &Path, format: DataFormat) -> Result<CMatrix, String> {
    let where_ = |detail: String| format!("{}: {detail}", path.display());
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| where_(e.to_string()))?;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| where_(e.to_string()))?;
        let row = match format {
            DataFormat::Complex => rec
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    parse_complex(c).ok_or_else(|| {
                        where_(format!("row {}, column {}: bad cell {c:?}", i + 1, j + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            DataFormat::Pairs => {
                if rec.len() % 2 != 0 {
                    return Err(where_(format!(
                        "row {} has an odd number of columns",
                        i + 1
                    )));
                }
                let v: Vec<f64> = rec
                    .iter()
                    .map(|c| {
                        c.parse::<f64>()
                            .map_err(|_| where_(format!("row {}: bad number {c:?}", i + 1)))
                    })
                    .collect::<Result<_, _>>()?;
                v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
            }
        };
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(where_(format!(
                    "row {} has {} samples, row 1 has {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(where_("no samples".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), rows[0].len(), |i, j| {
        rows[i][j]
    }))
}

pub fn write(path: &Path, data: &CMatrix, format: DataFormat) -> Result<(), String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    for i in 0..data.nrows() {
        let row: Vec<String> = match format {
            DataFormat::Complex => (0..data.ncols())
                .map(|j| format_complex(data[(i, j)]))
                .collect(),
            DataFormat::Pairs => (0..data.ncols())
                .flat_map(|j| {
                    [
                        format!("{:?}", data[(i, j)].re),
                        format!("{:?}", data[(i, j)].im),
                    ]
                })
                .collect(),
        };
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_forms() {
        let c = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("1.5-0.25j"), c(1.5, -0.25));
        assert_eq!(parse_complex(" 2 "), c(2.0, 0.0));
        assert_eq!(parse_complex("-3j"), c(0.0, -3.0));
        assert_eq!(parse_complex("1e-3+2E-4j"), c(1e-3, 2e-4));
        assert_eq!(parse_complex("-1e+2-1e+2i"), c(-100.0, -100.0));
        assert_eq!(parse_complex("1+j"), c(1.0, 1.0));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+xj"), None);
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = CMatrix::from_fn(3, 5, |i, j| {
            Complex64::new((i as f64 + 0.1).sin() / 3.0, -(j as f64).exp() * 1e-7)
        });
        for f in [DataFormat::Complex, DataFormat::Pairs] {
            let p = dir.path().join("d.csv");
            write(&p, &data, f).unwrap();
            assert_eq!(read(&p, f).unwrap(), data);
        }
        assert_eq!(format_complex(Complex64::new(1.0, -0.0)), "1.0-0.0j");
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1+1j,2\n3,x\n").unwrap();
        let e = read(&p, DataFormat::Complex).unwrap_err();
        assert!(e.contains("bad.csv") && e.contains("row 2"));
        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read(&p, DataFormat::Complex).unwrap_err().contains("row 2"));
        assert!(read(&dir.path().join("missing.csv"), DataFormat::Complex)
            .unwrap_err()
            .contains("missing.csv"));
    }
}
