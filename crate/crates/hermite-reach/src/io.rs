//! CSV formats and grid syntax.
//!
//! Numbers are written with 17 significant digits so every double survives a
//! write/read round trip unchanged.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use hermite_reach_core::images::StateField;
use hermite_reach_core::{ControlSignal, Expr, Interpolation, C64};

use crate::CliError;

pub const CONTROL_HEADER: [&str; 3] = ["t", "re_u", "im_u"];
pub const CONTROL_PAIR_HEADER: [&str; 5] = ["t", "re_uminus", "im_uminus", "re_uplus", "im_uplus"];
pub const STATE_HEADER: [&str; 4] = ["re_z", "im_z", "re_w", "im_w"];
pub const KERNEL_HEADER: [&str; 7] = ["t", "re_x", "im_x", "re_y", "im_y", "re_K", "im_K"];

/// Lossless decimal form of a double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses `v`, `v1,v2,…` or `a:b:n` (`n` equispaced points from `a` to `b`).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::usage(format!("grid spec {spec:?}: {why}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad("not a number"))
            .and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad("values must be finite"))
                }
            })
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [list] => list.split(',').map(num).collect(),
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| bad("count must be a positive integer"))?;
            match n {
                0 => Err(bad("count must be positive")),
                1 if a == b => Ok(vec![a]),
                1 => Err(bad("a single point needs a = b")),
                _ => Ok((0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect()),
            }
        }
        _ => Err(bad("expected v, v1,v2,… or a:b:n")),
    }
}

pub fn parse_interp(s: &str) -> Result<Interpolation, CliError> {
    match s {
        "linear" => Ok(Interpolation::Linear),
        "constant" => Ok(Interpolation::Constant),
        _ => Err(CliError::usage(format!(
            "interpolation must be linear or constant, got {s:?}"
        ))),
    }
}

/// A control given as a formula in `t` or as a CSV file `t,re_u,im_u`.
pub fn control_arg(
    src: &str,
    horizon: f64,
    interp: Interpolation,
) -> Result<ControlSignal, CliError> {
    if src.ends_with(".csv") {
        return read_control(Path::new(src), horizon, interp);
    }
    Ok(ControlSignal::from_expr(
        Expr::parse(src).map_err(hermite_reach_core::Error::from)?,
        horizon,
    )?)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let got: Vec<String> = rd
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_owned)
        .collect();
    if got != header {
        return Err(CliError::usage(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            header.join(","),
            got.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_table<I>(path: Option<&Path>, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        })?),
        None => Box::new(std::io::stdout().lock()),
    };
    let name = path.map_or("<stdout>".to_owned(), |p| p.display().to_string());
    let err = |source| CliError::Csv {
        path: name.clone(),
        source,
    };
    let mut wr = csv::Writer::from_writer(sink);
    wr.write_record(header).map_err(err)?;
    for row in rows {
        wr.write_record(row.iter().map(|&v| fmt_f64(v)))
            .map_err(err)?;
    }
    wr.flush().map_err(|source| CliError::Io {
        path: name.clone(),
        source,
    })
}

pub fn read_control(
    path: &Path,
    horizon: f64,
    interp: Interpolation,
) -> Result<ControlSignal, CliError> {
    let rows = read_table(path, &CONTROL_HEADER)?;
    let t = rows.iter().map(|r| r[0]).collect();
    let u = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
    Ok(ControlSignal::sampled(t, u, interp, horizon)?)
}

/// Both synthesized controls on a shared time grid.
pub fn write_control_pair(path: &Path, t: &[f64], um: &[C64], up: &[C64]) -> Result<(), CliError> {
    let rows = (0..t.len()).map(|i| vec![t[i], um[i].re, um[i].im, up[i].re, up[i].im]);
    write_table(Some(path), &CONTROL_PAIR_HEADER, rows)
}

/// Reads a file written by [`write_control_pair`] as piecewise-linear signals.
pub fn read_control_pair(
    path: &Path,
    horizon: f64,
) -> Result<(ControlSignal, ControlSignal), CliError> {
    let rows = read_table(path, &CONTROL_PAIR_HEADER)?;
    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let um = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
    let up = rows.iter().map(|r| C64::new(r[3], r[4])).collect();
    Ok((
        ControlSignal::sampled(t.clone(), um, Interpolation::Linear, horizon)?,
        ControlSignal::sampled(t, up, Interpolation::Linear, horizon)?,
    ))
}

pub fn write_state(path: Option<&Path>, s: &StateField) -> Result<(), CliError> {
    let rows = s
        .points
        .iter()
        .zip(&s.values)
        .map(|(z, w)| vec![z.re, z.im, w.re, w.im]);
    write_table(path, &STATE_HEADER, rows)
}

pub fn read_state(path: &Path) -> Result<Vec<(C64, C64)>, CliError> {
    Ok(read_table(path, &STATE_HEADER)?
        .into_iter()
        .map(|r| (C64::new(r[0], r[1]), C64::new(r[2], r[3])))
        .collect())
}

pub fn write_kernel(path: Option<&Path>, rows: &[[f64; 7]]) -> Result<(), CliError> {
    write_table(path, &KERNEL_HEADER, rows.iter().map(|r| r.to_vec()))
}

pub fn read_kernel(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    read_table(path, &KERNEL_HEADER)
}
