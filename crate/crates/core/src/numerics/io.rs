use std::io::{Read, Write};

use super::profile::{Grid, Path, Profile};
use crate::error::{MftError, Result};

fn csv_err(e: csv::Error) -> MftError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => MftError::Io(io),
        kind => MftError::Parse {
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Reads a profile from CSV with header `x,value`.
///
/// The `x` column must be the uniform grid `i/n` for some `n >= 2`.
pub fn read_profile_csv<R: Read>(reader: R) -> Result<Profile> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
        return Err(MftError::Parse {
            line: 1,
            msg: format!("expected header 'x,value', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| -> Result<f64> {
            let s = rec.get(k).unwrap_or("");
            let v: f64 = s.parse().map_err(|_| MftError::Parse {
                line,
                msg: format!("cannot parse '{s}' as a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(MftError::Parse {
                    line,
                    msg: format!("non-finite value '{s}'"),
                })
            }
        };
        xs.push((field(0)?, line));
        vs.push(field(1)?);
    }
    if vs.len() < 3 {
        return Err(MftError::Parse {
            line: 1,
            msg: format!("need at least 3 rows, found {}", vs.len()),
        });
    }
    let grid = Grid::new(vs.len() - 1)?;
    for (i, &(x, line)) in xs.iter().enumerate() {
        if (x - grid.node(i)).abs() > 1e-9 {
            return Err(MftError::Parse {
                line,
                msg: format!("x = {x} is not the uniform node {}", grid.node(i)),
            });
        }
    }
    Profile::new(grid, vs)
}

pub fn read_profile_file(path: &std::path::Path) -> Result<Profile> {
    read_profile_csv(std::fs::File::open(path)?)
}

pub fn write_profile_csv<W: Write>(profile: &Profile, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "value"]).map_err(csv_err)?;
    let g = profile.grid();
    for (i, v) in profile.values().iter().enumerate() {
        w.write_record([fmt_real(g.node(i)), fmt_real(*v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_path_csv<W: Write>(path: &Path, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "value"]).map_err(csv_err)?;
    let g = path.grid();
    for (t, frame) in path.times().iter().zip(path.frames()) {
        for (i, v) in frame.values().iter().enumerate() {
            w.write_record([fmt_real(*t), fmt_real(g.node(i)), fmt_real(*v)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}
