//! CSV files: `t,r,value` for fields, `t,value` and `r,value` for profiles,
//! `key,value` for reports. Files are written to a sibling temp file and
//! renamed, so a failed run leaves no partial output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use radkernel::grid::{RadialGrid, SpaceTimeField, TimeGrid};

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes rows under `header` to `path` atomically.
pub fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: &[[String; N]]) -> Result<(), CliError> {
    let tmp: PathBuf = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    };
    let result = (|| {
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| io_err(&tmp, e))?;
        w.write_record(header).map_err(|e| io_err(&tmp, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_err(&tmp, e))?;
        }
        w.flush().map_err(|e| io_err(&tmp, e))?;
        drop(w);
        fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Shortest round-trip formatting, so output is byte-stable.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_field(path: &Path, f: &SpaceTimeField) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(f.values.len());
    for (k, &t) in f.time.nodes().iter().enumerate() {
        for (i, &r) in f.radial.nodes().iter().enumerate() {
            rows.push([num(t), num(r), num(f.values[[k, i]])]);
        }
    }
    write_rows(path, ["t", "r", "value"], &rows)
}

pub fn write_profile(path: &Path, axis: &str, nodes: &[f64], values: &[f64]) -> Result<(), CliError> {
    let rows: Vec<[String; 2]> = nodes.iter().zip(values).map(|(x, v)| [num(*x), num(*v)]).collect();
    write_rows(path, [axis, "value"], &rows)
}

pub fn write_report(path: &Path, entries: &[(String, f64)]) -> Result<(), CliError> {
    let rows: Vec<[String; 2]> = entries.iter().map(|(k, v)| [k.clone(), num(*v)]).collect();
    write_rows(path, ["key", "value"], &rows)
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let got: Vec<String> = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_owned).collect();
    if got != header {
        return Err(CliError::Config(format!(
            "{}: expected header {}, got {}",
            path.display(),
            header.join(","),
            got.join(",")
        )));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| io_err(path, e))?;
            rec.iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Config(format!("{}: bad number '{s}'", path.display())))
                })
                .collect()
        })
        .collect()
}

/// Distinct sorted values, which must be uniformly spaced.
fn uniform_axis(path: &Path, name: &str, xs: impl Iterator<Item = f64>) -> Result<Vec<f64>, CliError> {
    let mut map = BTreeMap::new();
    for x in xs {
        map.insert(x.to_bits(), x);
    }
    let mut v: Vec<f64> = map.into_values().collect();
    v.sort_by(f64::total_cmp);
    if v.len() < 2 {
        return Err(CliError::Config(format!("{}: {name} axis needs at least two values", path.display())));
    }
    let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    for (j, x) in v.iter().enumerate() {
        if (x - (v[0] + j as f64 * h)).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(CliError::Config(format!("{}: {name} axis is not uniform", path.display())));
        }
    }
    Ok(v)
}

fn index_of(axis: &[f64], x: f64) -> usize {
    let h = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    ((x - axis[0]) / h).round() as usize
}

pub fn read_field(path: &Path) -> Result<SpaceTimeField, CliError> {
    let recs = read_records(path, &["t", "r", "value"])?;
    let ts = uniform_axis(path, "t", recs.iter().map(|r| r[0]))?;
    let rs = uniform_axis(path, "r", recs.iter().map(|r| r[1]))?;
    if ts[0] != 0.0 {
        return Err(CliError::Config(format!("{}: time axis must start at 0", path.display())));
    }
    if recs.len() != ts.len() * rs.len() {
        return Err(CliError::Config(format!(
            "{}: expected {} rows, got {}",
            path.display(),
            ts.len() * rs.len(),
            recs.len()
        )));
    }
    let radial = RadialGrid::new(rs[0], rs[rs.len() - 1], rs.len())?;
    let time = TimeGrid::new(ts[ts.len() - 1], ts.len() - 1)?;
    let mut values = Array2::from_elem((ts.len(), rs.len()), f64::NAN);
    for r in &recs {
        values[[index_of(&ts, r[0]), index_of(&rs, r[1])]] = r[2];
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(CliError::Config(format!("{}: missing or duplicate grid points", path.display())));
    }
    Ok(SpaceTimeField::from_values(&radial, &time, values)?)
}

/// Reads an `axis,value` profile and checks its nodes against `nodes`.
pub fn read_profile(path: &Path, axis: &str, nodes: &[f64]) -> Result<Vec<f64>, CliError> {
    let recs = read_records(path, &[axis, "value"])?;
    if recs.len() != nodes.len() {
        return Err(CliError::Config(format!("{}: expected {} rows, got {}", path.display(), nodes.len(), recs.len())));
    }
    for (r, x) in recs.iter().zip(nodes) {
        if (r[0] - x).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(CliError::Config(format!("{}: node {} does not match the grid ({x})", path.display(), r[0])));
        }
    }
    Ok(recs.iter().map(|r| r[1]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let radial = RadialGrid::with_cells(1.0, 2.0, 4).unwrap();
        let time = TimeGrid::new(0.5, 3).unwrap();
        let f = SpaceTimeField::from_fn(&radial, &time, |t, r| t * r + 0.1);
        let p = dir.path().join("f.csv");
        write_field(&p, &f).unwrap();
        let g = read_field(&p).unwrap();
        assert_eq!(f.values, g.values);
        assert!(!dir.path().join("f.csv.tmp").exists());
    }

    #[test]
    fn header_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        write_profile(&p, "t", &[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(read_profile(&p, "r", &[0.0, 1.0]).is_err());
        assert_eq!(read_profile(&p, "t", &[0.0, 1.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
