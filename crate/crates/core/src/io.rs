//! CSV and JSON encodings for matrices, spectra and trajectories.
//!
//! Every number is written with 17 significant digits so a write/read round
//! trip is exact.

use num_complex::Complex;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::sim::{Trajectory, TrajectoryMeta};

/// `{:.16e}`: 17 significant digits. Non-finite values are written as-is.
pub fn format_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A JSON number carrying exactly the text of [`format_num`]; `null` for
/// non-finite input.
pub fn num(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let n: Number = serde_json::from_str(&format_num(v)).expect("formatted float is valid JSON");
    Value::Number(n)
}

pub fn complex_json(c: Complex<f64>) -> Value {
    let mut m = Map::new();
    m.insert("re".into(), num(c.re));
    m.insert("im".into(), num(c.im));
    Value::Object(m)
}

pub fn matrix_json(a: &Mat<f64>) -> Value {
    Value::Array(
        (0..a.rows())
            .map(|i| Value::Array(a.row(i).iter().map(|&v| num(v)).collect()))
            .collect(),
    )
}

pub fn matrix_from_json(v: &Value) -> Result<Mat<f64>> {
    let bad = || Error::InvalidModel("matrix JSON must be an array of numeric rows".into());
    let rows = v.as_array().ok_or_else(bad)?;
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_f64().ok_or_else(bad))
                .collect()
        })
        .collect::<Result<_>>()?;
    rows_to_mat(parsed)
}

fn rows_to_mat(rows: Vec<Vec<f64>>) -> Result<Mat<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("ragged rows"));
    }
    let r = rows.len();
    Mat::from_vec(r, cols, rows.into_iter().flatten().collect())
}

/// One line per row, comma separated, optional header line.
pub fn matrix_csv(a: &Mat<f64>, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|&v| format_num(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_field(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Syntax {
        pos: line,
        message: format!("line {}: `{}` is not a number", line + 1, s.trim()),
    })
}

/// Parses numeric CSV; a first line that does not parse as numbers is taken
/// as a header and skipped.
pub fn matrix_from_csv(text: &str) -> Result<Mat<f64>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>> = line.split(',').map(|f| parse_field(f, i)).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    rows_to_mat(rows)
}

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=m).map(|i| format!("z{i}")))
        .collect()
}

/// `t,x1,..,xN[,z1,..,zM]`, one row per grid point.
pub fn trajectory_csv(tr: &Trajectory<f64>) -> String {
    let (n, m) = (tr.states.cols(), tr.algebraics.cols());
    let mut out = trajectory_header(n, m).join(",");
    out.push('\n');
    for k in 0..tr.len() {
        let fields: Vec<String> = std::iter::once(tr.times[k])
            .chain(tr.states.row(k).iter().copied())
            .chain(tr.algebraics.row(k).iter().copied())
            .map(format_num)
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn trajectory_from_csv(text: &str) -> Result<Trajectory<f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Syntax {
            pos: 0,
            message: "empty trajectory file".into(),
        })?
        .split(',')
        .map(str::trim)
        .collect();
    if header.first() != Some(&"t") {
        return Err(Error::Syntax {
            pos: 0,
            message: "trajectory header must start with `t`".into(),
        });
    }
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('z')).count();
    if n + m + 1 != header.len() {
        return Err(Error::Syntax {
            pos: 0,
            message: "trajectory header columns must be t, x*, z*".into(),
        });
    }
    let mut times = Vec::new();
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| parse_field(f, i + 1))
            .collect::<Result<_>>()?;
        if v.len() != header.len() {
            return Err(Error::Syntax {
                pos: i + 1,
                message: format!("line {}: {} fields, header has {}", i + 2, v.len(), header.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("trajectory line {}", i + 2)));
        }
        times.push(v[0]);
        xs.extend_from_slice(&v[1..=n]);
        zs.extend_from_slice(&v[1 + n..]);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("times are not strictly increasing".into()));
    }
    let k = times.len();
    Ok(Trajectory {
        times,
        states: Mat::from_vec(k, n, xs)?,
        algebraics: Mat::from_vec(k, m, zs)?,
        meta: TrajectoryMeta {
            model: String::new(),
            method: "csv".into(),
            order: None,
        },
        max_constraint_residual: None,
    })
}
