use std::path::Path;

use crate::error::{Error, Result};
use crate::krr::LabeledPoint;
use crate::scalar::Real;

/// Reads a headed numeric CSV; the last column is the response.
pub fn ingest_csv(path: &Path) -> Result<Vec<LabeledPoint<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let width = rdr.headers()?.len();
    if width == 0 {
        return Err(Error::EmptyFile);
    }
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least one predictor and a response column".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(width);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not numeric: {field:?}", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {} is not finite", col + 1),
                });
            }
            vals.push(v);
        }
        let y = vals.pop().expect("width >= 2");
        out.push(LabeledPoint::new(vals, y));
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

/// Writes `x1,…,xp,y` with 17 significant digits.
pub fn write_regression_csv<T: Real>(path: &Path, points: &[LabeledPoint<T>]) -> Result<()> {
    let p = points.first().ok_or(Error::EmptyBuffer)?.x.len();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for pt in points {
        if pt.x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: pt.x.len(),
            });
        }
        let row: Vec<String> = pt
            .x
            .iter()
            .chain(std::iter::once(&pt.y))
            .map(|v| format!("{:.16e}", v.as_f64()))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
