//! Flat binary dumps and CSV exports of grids, fields and samples.
//!
//! Both binary formats share a header: `nx, ny, nz` as little-endian `u32`,
//! then `min[3], max[3]` as little-endian `f64`. Occupancy follows as bits,
//! x fastest, least significant bit first; fields follow as one `f64` per
//! voxel in the same order.

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use psfguard_core::grid::{GridDims, GridGeometry, OccupancyGrid, WorldBounds};
use psfguard_core::psf::ScalarField;
use psfguard_core::sampling::SampleSet;
use psfguard_core::Vec3;
use serde::{Deserialize, Serialize};

pub const HEADER_BYTES: usize = 3 * 4 + 6 * 8;

fn write_header(w: &mut impl Write, g: &GridGeometry) -> io::Result<()> {
    for n in g.dims.as_array() {
        let n = u32::try_from(n)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "grid too large"))?;
        w.write_all(&n.to_le_bytes())?;
    }
    for v in g.bounds.min.iter().chain(&g.bounds.max) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn read_header(r: &mut impl Read) -> io::Result<GridGeometry> {
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let mut corners = [0f64; 6];
    for c in &mut corners {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *c = f64::from_le_bytes(b);
    }
    let dims = GridDims::new(dims[0], dims[1], dims[2]).map_err(|e| invalid(e.to_string()))?;
    let bounds = WorldBounds::new(
        [corners[0], corners[1], corners[2]],
        [corners[3], corners[4], corners[5]],
    )
    .map_err(|e| invalid(e.to_string()))?;
    Ok(GridGeometry::new(bounds, dims))
}

pub fn write_occupancy(w: &mut impl Write, grid: &OccupancyGrid) -> io::Result<()> {
    write_header(w, &grid.geometry)?;
    let mut bytes = vec![0u8; grid.occupied.len().div_ceil(8)];
    for (i, _) in grid.occupied.iter().enumerate().filter(|(_, o)| **o) {
        bytes[i / 8] |= 1 << (i % 8);
    }
    w.write_all(&bytes)
}

pub fn read_occupancy(r: &mut impl Read) -> io::Result<OccupancyGrid> {
    let geometry = read_header(r)?;
    let n = geometry.dims.len();
    let mut bytes = vec![0u8; n.div_ceil(8)];
    r.read_exact(&mut bytes)?;
    let mut grid = OccupancyGrid::walls_only(geometry.bounds, geometry.dims);
    for (i, o) in grid.occupied.iter_mut().enumerate() {
        *o = bytes[i / 8] >> (i % 8) & 1 == 1;
    }
    Ok(grid)
}

pub fn write_field(w: &mut impl Write, field: &ScalarField) -> io::Result<()> {
    write_header(w, &field.geometry)?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a field dump. Occupancy is recovered as the nodes equal to zero,
/// which is exact for solved fields.
pub fn read_field(r: &mut impl Read) -> io::Result<ScalarField> {
    let geometry = read_header(r)?;
    let mut values = vec![0f64; geometry.dims.len()];
    let mut b = [0u8; 8];
    for v in &mut values {
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    let occupied = values.iter().map(|v| *v == 0.0).collect();
    ScalarField::from_values(geometry, values, occupied).map_err(|e| invalid(e.to_string()))
}

pub fn save(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<std::fs::File>) -> io::Result<()>,
) -> io::Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// An axis-aligned layer of node values. `values[b][a]` is at in-plane
/// indices `(a, b)`, where `a` runs along the lower remaining axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSlice {
    pub axis: Axis,
    /// Layer index along `axis`.
    pub index: usize,
    /// World coordinate of the layer's voxel centers.
    pub offset: f64,
    /// World position of the `(0, 0)` node.
    pub origin: [f64; 3],
    /// Node spacing along the two in-plane axes.
    pub spacing: [f64; 2],
    pub values: Vec<Vec<f64>>,
}

/// The layer nearest to `offset` along `axis`.
pub fn field_slice(field: &ScalarField, axis: Axis, offset: f64) -> FieldSlice {
    let g = field.geometry;
    let d = g.dims.as_array();
    let e = g.edge();
    let ax = axis.index();
    let (ua, va) = match ax {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let layer = ((offset - g.bounds.min[ax]) / e[ax] - 0.5)
        .round()
        .clamp(0.0, (d[ax] - 1) as f64) as usize;
    let at = |a: usize, b: usize| {
        let mut ijk = [0usize; 3];
        ijk[ax] = layer;
        ijk[ua] = a;
        ijk[va] = b;
        ijk
    };
    let values = (0..d[va])
        .map(|b| {
            (0..d[ua])
                .map(|a| {
                    let [i, j, k] = at(a, b);
                    field.value_at(i, j, k)
                })
                .collect()
        })
        .collect();
    let [i, j, k] = at(0, 0);
    let origin = g.center(i, j, k);
    FieldSlice {
        axis,
        index: layer,
        offset: origin[ax],
        origin: origin.into(),
        spacing: [e[ua], e[va]],
        values,
    }
}

/// Long-format CSV: one `x,y,z,h` row per node of the slice.
pub fn write_slice_csv(
    w: &mut impl Write,
    field: &ScalarField,
    slice: &FieldSlice,
) -> io::Result<()> {
    writeln!(w, "x,y,z,h")?;
    let ax = slice.axis.index();
    for (b, row) in slice.values.iter().enumerate() {
        for (a, h) in row.iter().enumerate() {
            let mut ijk = [0usize; 3];
            let mut free = (0..3).filter(|&x| x != ax);
            ijk[ax] = slice.index;
            ijk[free.next().unwrap_or(0)] = a;
            ijk[free.next().unwrap_or(0)] = b;
            let c = field.geometry.center(ijk[0], ijk[1], ijk[2]);
            writeln!(w, "{},{},{},{}", c.x, c.y, c.z, h)?;
        }
    }
    Ok(())
}

/// Body-frame sample points as `link_index,x,y,z`.
pub fn write_samples_csv(w: &mut impl Write, samples: &SampleSet) -> io::Result<()> {
    writeln!(w, "link_index,x,y,z")?;
    for p in samples.iter() {
        writeln!(w, "{},{},{},{}", p.link, p.local.x, p.local.y, p.local.z)?;
    }
    Ok(())
}

pub fn read_samples_csv(r: impl Read) -> io::Result<Vec<(usize, Vec3)>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || invalid(format!("line {}: expected link_index,x,y,z", n + 1));
        if cols.len() != 4 {
            return Err(bad());
        }
        let link = cols[0].trim().parse().map_err(|_| bad())?;
        let mut xyz = [0.0; 3];
        for (v, c) in xyz.iter_mut().zip(&cols[1..]) {
            *v = c.trim().parse().map_err(|_| bad())?;
        }
        out.push((link, Vec3::from(xyz)));
    }
    Ok(out)
}
