//! File formats for volumetric data.
//!
//! Binary grid dump, all little-endian:
//!
//! | bytes | content                                          |
//! |-------|--------------------------------------------------|
//! | 8     | magic `SGGRID01`                                 |
//! | 24    | `u64` dims nx, ny, nz                            |
//! | 48    | `f64` extents xmin, xmax, ymin, ymax, zmin, zmax |
//! | 8     | `u64` component count                            |
//! | ...   | `f64` values, x-fastest nodes, components interleaved per node |

use std::io::{self, BufRead, BufWriter, Read, Write};

use crate::error::{Result, SimError};
use crate::grid::{Grid3, ScalarGridField, VecGridField};
use crate::num::Real;

pub const GRID_MAGIC: &[u8; 8] = b"SGGRID01";
pub const GRID_HEADER_LEN: usize = 8 + 3 * 8 + 6 * 8 + 8;

/// Node-major multi-component data on a grid, in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDump {
    pub dims: [usize; 3],
    pub extents: [f64; 6],
    pub components: usize,
    pub values: Vec<f64>,
}

impl GridDump {
    pub fn from_scalar<T: Real>(f: &ScalarGridField<T>) -> Self {
        Self::from_components(
            &f.grid,
            1,
            f.values.iter().map(|v| v.to_f64_lossy()).collect(),
        )
    }

    pub fn from_vector<T: Real>(f: &VecGridField<T>) -> Self {
        let values = f
            .values
            .iter()
            .flat_map(|v| [v.x, v.y, v.z].map(|c| c.to_f64_lossy()))
            .collect();
        Self::from_components(&f.grid, 3, values)
    }

    /// Interleaves several scalar fields sharing one grid.
    pub fn from_scalars<T: Real>(fields: &[&ScalarGridField<T>]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| SimError::InvalidParams("no fields".into()))?;
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(SimError::GridMismatch);
        }
        let n = first.grid.len();
        let values = (0..n)
            .flat_map(|i| fields.iter().map(move |f| f.values[i].to_f64_lossy()))
            .collect();
        Ok(Self::from_components(&first.grid, fields.len(), values))
    }

    fn from_components<T: Real>(g: &Grid3<T>, components: usize, values: Vec<f64>) -> Self {
        Self {
            dims: g.dims,
            extents: g.extents().map(|e| e.to_f64_lossy()),
            components,
            values,
        }
    }

    pub fn write_to(&self, w: impl Write) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(GRID_MAGIC)?;
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for e in self.extents {
            w.write_all(&e.to_le_bytes())?;
        }
        w.write_all(&(self.components as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(SimError::Config("not a grid dump (bad magic)".into()));
        }
        let mut u = [0u8; 8];
        let mut next_u64 = |r: &mut dyn Read| -> io::Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = next_u64(&mut r)? as usize;
        }
        let mut extents = [0f64; 6];
        for e in &mut extents {
            *e = f64::from_bits(next_u64(&mut r)?);
        }
        let components = next_u64(&mut r)? as usize;
        let n = dims[0] * dims[1] * dims[2] * components;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            dims,
            extents,
            components,
            values,
        })
    }

    /// CSV with columns `x,y,z,c0,c1,...` (or the given component names).
    pub fn write_csv(&self, w: impl Write, names: &[&str]) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        write!(w, "x,y,z")?;
        for c in 0..self.components {
            match names.get(c) {
                Some(n) => write!(w, ",{n}")?,
                None => write!(w, ",c{c}")?,
            }
        }
        writeln!(w)?;
        let coord = |axis: usize, i: usize| {
            let (lo, hi) = (self.extents[2 * axis], self.extents[2 * axis + 1]);
            lo + (i as f64 + 0.5) * (hi - lo) / self.dims[axis] as f64
        };
        let [nx, ny, _] = self.dims;
        for (node, vals) in self.values.chunks_exact(self.components).enumerate() {
            let (i, j, k) = (node % nx, (node / nx) % ny, node / (nx * ny));
            write!(w, "{},{},{}", coord(0, i), coord(1, j), coord(2, k))?;
            for v in vals {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Plane through the grid for 2-D exports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlicePlane {
    /// Fixed y index: rows are z (top = +z), columns are x.
    Xz(usize),
    /// Fixed z index: rows are y, columns are x.
    Xy(usize),
    /// Fixed x index: rows are z, columns are y.
    Yz(usize),
}

/// Extracts a 2-D slice as rows of values; the first row is the largest
/// row coordinate so images come out upright.
pub fn slice<T: Real>(f: &ScalarGridField<T>, plane: SlicePlane) -> Vec<Vec<f64>> {
    let g = &f.grid;
    let [nx, ny, nz] = g.dims;
    let at = |i, j, k| f.values[g.index(i, j, k)].to_f64_lossy();
    match plane {
        SlicePlane::Xz(j) => (0..nz)
            .rev()
            .map(|k| (0..nx).map(|i| at(i, j, k)).collect())
            .collect(),
        SlicePlane::Xy(k) => (0..ny)
            .rev()
            .map(|j| (0..nx).map(|i| at(i, j, k)).collect())
            .collect(),
        SlicePlane::Yz(i) => (0..nz)
            .rev()
            .map(|k| (0..ny).map(|j| at(i, j, k)).collect())
            .collect(),
    }
}

pub fn write_text_matrix(rows: &[Vec<f64>], w: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}

/// Binary 8-bit PGM (P5), linearly scaled from `min..max` of the data.
pub fn write_pgm(rows: &[Vec<f64>], w: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    let h = rows.len();
    let wd = rows.first().map_or(0, Vec::len);
    let (lo, hi) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(w, "P5\n{wd} {h}\n255\n")?;
    for row in rows {
        let bytes: Vec<u8> = row
            .iter()
            .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        w.write_all(&bytes)?;
    }
    w.flush()
}

/// Reads a P5 PGM back as (width, height, pixels).
pub fn read_pgm(r: impl BufRead) -> Result<(usize, usize, Vec<u8>)> {
    let mut r = r;
    let mut header = Vec::new();
    let mut fields = Vec::new();
    while fields.len() < 4 {
        header.clear();
        r.read_until(b'\n', &mut header)?;
        if header.is_empty() {
            return Err(SimError::Config("truncated PGM header".into()));
        }
        let s = String::from_utf8_lossy(&header);
        fields.extend(s.split_whitespace().map(str::to_owned));
    }
    if fields[0] != "P5" {
        return Err(SimError::Config("not a P5 graymap".into()));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| SimError::Config(format!("bad PGM header: {e}")))
    };
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let mut px = vec![0u8; w * h];
    r.read_exact(&mut px)?;
    Ok((w, h, px))
}
