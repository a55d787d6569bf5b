use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{Error, Result};
use crate::fracops::Grid;
use crate::synthesis::GainSchedule;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with every float written by [`fmt_f64`]; non-finite values
/// become null.
struct ExactFloats<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = ExactFloats {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut ser = Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::input(format!("cannot serialize report: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e))
}

/// Header plus one row per node, floats via [`fmt_f64`].
pub fn write_table(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

fn matrix_names(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

/// trajectory.csv: t, x_i, u_i, lam_i, r_i.
pub fn write_trajectory(
    path: &Path,
    grid: &Grid,
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    lam: &DMatrix<f64>,
    reference: &DMatrix<f64>,
) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(names("x", x.nrows()));
    header.extend(names("u", u.nrows()));
    header.extend(names("lam", lam.nrows()));
    header.extend(names("r", reference.nrows()));
    let rows = (0..grid.len()).map(|k| {
        let mut row = vec![grid.t(k)];
        for m in [x, u, lam, reference] {
            row.extend(m.column(k).iter());
        }
        row
    });
    write_table(path, &header, rows)
}

/// closed_loop.csv: t, x_i, u_i, r_i.
pub fn write_simulation(
    path: &Path,
    grid: &Grid,
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    reference: &DMatrix<f64>,
) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(names("x", x.nrows()));
    header.extend(names("u", u.nrows()));
    header.extend(names("r", reference.nrows()));
    let rows = (0..grid.len()).map(|k| {
        let mut row = vec![grid.t(k)];
        for m in [x, u, reference] {
            row.extend(m.column(k).iter());
        }
        row
    });
    write_table(path, &header, rows)
}

/// gains.csv: t, K row-major, l, P row-major, z.
pub fn write_gains(path: &Path, gains: &GainSchedule) -> Result<()> {
    let (q, r) = (gains.state_dim(), gains.control_dim());
    let mut header = vec!["t".to_string()];
    header.extend(matrix_names("K", r, q));
    header.extend(names("l", r));
    header.extend(matrix_names("P", q, q));
    header.extend(names("z", q));
    let rows = (0..gains.grid.len()).map(|k| {
        let mut row = vec![gains.grid.t(k)];
        row.extend(gains.k[k].transpose().iter());
        row.extend(gains.l.column(k).iter());
        row.extend(gains.p[k].transpose().iter());
        row.extend(gains.z.column(k).iter());
        row
    });
    write_table(path, &header, rows)
}

/// Reads a gains.csv written by [`write_gains`] back into a schedule.
pub fn read_gains(
    path: &Path,
    q: usize,
    r: usize,
    grid: &Grid,
    alpha: crate::fracops::FractionalOrder,
) -> Result<GainSchedule> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    let width = 1 + r * q + r + q * q + q;
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() != width {
        return Err(Error::input(format!(
            "{}: expected {width} columns for q = {q}, r = {r}, found {}",
            path.display(),
            header.len()
        )));
    }
    let mut k = Vec::new();
    let mut p = Vec::new();
    let mut l = Vec::new();
    let mut z = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::input(format!("{} row {}: {e}", path.display(), line + 2)))?;
        let mut off = 1;
        k.push(DMatrix::from_row_slice(r, q, &vals[off..off + r * q]));
        off += r * q;
        l.extend_from_slice(&vals[off..off + r]);
        off += r;
        p.push(DMatrix::from_row_slice(q, q, &vals[off..off + q * q]));
        off += q * q;
        z.extend_from_slice(&vals[off..off + q]);
        let t = vals[0];
        if (t - grid.t(line.min(grid.n_steps()))).abs() > 1e-9 * grid.t_final() {
            return Err(Error::input(format!(
                "{} row {}: time {t} does not match the grid",
                path.display(),
                line + 2
            )));
        }
    }
    grid.check_len(k.len(), "gain table")?;
    let n = k.len();
    Ok(GainSchedule {
        p,
        k,
        z: DMatrix::from_vec(q, n, z),
        l: DMatrix::from_vec(r, n, l),
        grid: *grid,
        alpha,
    })
}
