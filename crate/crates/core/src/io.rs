//! On-disk formats.
//!
//! Grid binary: `u64 N`, `u64 n`, `f64 L`, then `n^N` row-major `f64`, all
//! little-endian. CSV: one row per node, coordinates then value, 17
//! significant digits. Trajectories: a directory of grid binaries plus
//! `manifest.toml` (fields documented on [`TrajectoryManifest`]).

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::duhamel::Trajectory;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_SCHEMA: u32 = 1;

/// Fixed 17-significant-digit scientific notation; round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_binary<W: Write>(g: &GridFunction, mut w: W) -> Result<()> {
    w.write_all(&(g.n_dim as u64).to_le_bytes())?;
    w.write_all(&(g.n as u64).to_le_bytes())?;
    w.write_all(&g.half_width.to_le_bytes())?;
    for v in &g.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read8<R: Read>(r: &mut R) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridFunction> {
    let n_dim = u64::from_le_bytes(read8(&mut r)?) as usize;
    let n = u64::from_le_bytes(read8(&mut r)?) as usize;
    let half_width = f64::from_le_bytes(read8(&mut r)?);
    if !(1..=2).contains(&n_dim) || !(8..=1 << 20).contains(&n) {
        return Err(Error::Io(format!("bad grid header: N = {n_dim}, n = {n}")));
    }
    let len = n.pow(n_dim as u32);
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(f64::from_le_bytes(read8(&mut r)?));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Io("trailing bytes after grid values".into()));
    }
    GridFunction::new(n_dim, n, half_width, values)
}

pub fn save_binary(g: &GridFunction, path: &Path) -> Result<()> {
    write_binary(g, BufWriter::new(fs::File::create(path)?))
}

pub fn load_binary(path: &Path) -> Result<GridFunction> {
    read_binary(BufReader::new(fs::File::open(path)?))
}

/// `x,value` (1D) or `x,y,value` (2D).
pub fn write_csv<W: Write>(g: &GridFunction, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    if g.n_dim == 1 {
        writeln!(w, "x,value")?;
        for (i, v) in g.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt17(g.coord(i)), fmt17(*v))?;
        }
    } else {
        writeln!(w, "x,y,value")?;
        for i in 0..g.n {
            for j in 0..g.n {
                let v = g.values[i * g.n + j];
                writeln!(w, "{},{},{}", fmt17(g.coord(i)), fmt17(g.coord(j)), fmt17(v))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Contents of `manifest.toml` in a trajectory directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    /// Format version, currently 1.
    pub schema_version: u32,
    pub n_dim: usize,
    pub n: usize,
    pub half_width: f64,
    /// Node times `t_0 = 0 < t_1 < ...`.
    pub times: Vec<f64>,
    /// Node index of each stored file, parallel to `files`.
    pub indices: Vec<usize>,
    /// Grid binaries relative to the directory.
    pub files: Vec<String>,
    /// Weight parameter of the solve.
    pub theta: f64,
    pub predicted_factor: f64,
    /// Space of the datum and of the iteration, as `[gamma1, gamma2]`.
    pub gamma: [f64; 2],
    pub alpha: [f64; 2],
    /// Power of `t` in the weighted norm.
    pub weight_exponent: f64,
    pub converged: bool,
    pub stagnated: bool,
    /// Per-sweep relative residuals, weighted and unweighted.
    pub residuals: Vec<f64>,
    pub plain_residuals: Vec<f64>,
}

impl TrajectoryManifest {
    pub fn of(tr: &Trajectory) -> Result<Self> {
        let first = tr
            .states
            .first()
            .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
        let indices: Vec<usize> = (0..tr.states.len()).collect();
        Ok(Self {
            schema_version: MANIFEST_SCHEMA,
            n_dim: first.n_dim,
            n: first.n,
            half_width: first.half_width,
            times: tr.times.clone(),
            files: indices.iter().map(|k| format!("state_{k:05}.bin")).collect(),
            indices,
            theta: tr.theta,
            predicted_factor: tr.predicted_factor,
            gamma: [tr.gamma.g1, tr.gamma.g2],
            alpha: [tr.alpha.g1, tr.alpha.g2],
            weight_exponent: tr.b,
            converged: tr.converged,
            stagnated: tr.stagnated,
            residuals: tr.residuals.clone(),
            plain_residuals: tr.plain_residuals.clone(),
        })
    }
}

/// Writes every node state and the manifest into `dir` (created if needed).
pub fn export_trajectory(tr: &Trajectory, dir: &Path) -> Result<TrajectoryManifest> {
    let m = TrajectoryManifest::of(tr)?;
    fs::create_dir_all(dir)?;
    for (k, file) in m.indices.iter().zip(&m.files) {
        save_binary(&tr.states[*k], &dir.join(file))?;
    }
    let text = toml::to_string(&m).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(m)
}

pub fn import_trajectory(dir: &Path) -> Result<(TrajectoryManifest, Vec<GridFunction>)> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let m: TrajectoryManifest = toml::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
    if m.schema_version != MANIFEST_SCHEMA {
        return Err(Error::Io(format!("unsupported manifest schema {}", m.schema_version)));
    }
    if m.files.len() != m.indices.len() || m.indices.iter().any(|&k| k >= m.times.len()) {
        return Err(Error::Io("manifest indices do not match times/files".into()));
    }
    let states = m
        .files
        .iter()
        .map(|f| {
            let g = load_binary(&dir.join(f))?;
            if g.n_dim != m.n_dim || g.n != m.n || g.half_width != m.half_width {
                return Err(Error::Io(format!("{f}: grid differs from manifest")));
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    Ok((m, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_exact() {
        for nd in [1, 2] {
            let g = GridFunction::from_fn(nd, 16, 3.5, |x| x.iter().map(|c| c.sin()).sum::<f64>() / 3.0)
                .unwrap();
            let mut buf = vec![];
            write_binary(&g, &mut buf).unwrap();
            assert_eq!(buf.len(), 24 + 8 * g.len());
            assert_eq!(&buf[..8], &(nd as u64).to_le_bytes());
            let back = read_binary(&buf[..]).unwrap();
            assert_eq!(back.values, g.values);
            assert_eq!(back.half_width, 3.5);
            buf.push(0);
            assert!(read_binary(&buf[..]).is_err());
        }
    }

    #[test]
    fn csv_has_17_digits() {
        let g = GridFunction::from_fn(1, 8, 1.0, |x| x[0] / 3.0).unwrap();
        let mut buf = vec![];
        write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,value");
        assert_eq!(lines.len(), 9);
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, g.values[1]);
        assert_eq!(fmt17(1.0 / 3.0), "3.3333333333333331e-1");
    }
}
