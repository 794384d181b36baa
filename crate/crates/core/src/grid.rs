//! Cell-centered tensor grids on rectangular boxes and grid-field I/O.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

/// Cell-centered grid on the box `[box_min, box_max]`. Cell `j` on axis `i`
/// is centered at `box_min[i] + (j + 1/2) h[i]`; row-major, axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: Vec<usize>,
    pub box_min: Vec<f64>,
    pub box_max: Vec<f64>,
    pub h: Vec<f64>,
}

impl GridSpec {
    pub fn new(dim: usize, n: &[usize], box_min: &[f64], box_max: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(LabError::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n.len() != dim || box_min.len() != dim || box_max.len() != dim {
            return Err(LabError::InvalidGrid(format!(
                "expected {dim} entries per axis, got n={}, min={}, max={}",
                n.len(),
                box_min.len(),
                box_max.len()
            )));
        }
        for i in 0..dim {
            if n[i] < MIN_CELLS {
                return Err(LabError::InvalidGrid(format!(
                    "axis {i} has {} cells, need at least {MIN_CELLS}",
                    n[i]
                )));
            }
            if !(box_max[i] > box_min[i]) || !box_min[i].is_finite() || !box_max[i].is_finite() {
                return Err(LabError::InvalidGrid(format!(
                    "degenerate box on axis {i}: [{}, {}]",
                    box_min[i], box_max[i]
                )));
            }
        }
        let h = (0..dim)
            .map(|i| (box_max[i] - box_min[i]) / n[i] as f64)
            .collect();
        Ok(Self {
            dim,
            n: n.to_vec(),
            box_min: box_min.to_vec(),
            box_max: box_max.to_vec(),
            h,
        })
    }

    /// Grid on the unit cube `(-1/2, 1/2)^d` with `n` cells per axis.
    pub fn unit_cube(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![n; dim], &vec![-0.5; dim], &vec![0.5; dim])
    }

    /// Default resolution per dimension: 512 (1D), 64 (2D), 24 (3D).
    pub fn default_unit_cube(dim: usize) -> Result<Self> {
        let n = match dim {
            1 => 512,
            2 => 64,
            3 => 24,
            _ => return Err(LabError::InvalidGrid(format!("unsupported dim {dim}"))),
        };
        Self::unit_cube(dim, n)
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().product()
    }

    /// Cell counts padded to three axes with trailing ones.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.dim].copy_from_slice(&self.n);
        s
    }

    /// Row-major strides padded to three axes.
    pub fn strides3(&self) -> [usize; 3] {
        let s = self.shape3();
        [s[1] * s[2], s[2], 1]
    }

    /// Center coordinate of cell `j` on `axis`.
    #[inline]
    pub fn center(&self, axis: usize, j: usize) -> f64 {
        self.box_min[axis] + (j as f64 + 0.5) * self.h[axis]
    }

    /// All cell centers along `axis`.
    pub fn centers(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|j| self.center(axis, j)).collect()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        let st = self.strides3();
        idx.iter().zip(st.iter()).map(|(i, s)| i * s).sum()
    }

    /// Multi-index (padded to three axes) of a linear index.
    pub fn multi_index(&self, lin: usize) -> [usize; 3] {
        let s = self.shape3();
        [lin / (s[1] * s[2]), (lin / s[2]) % s[1], lin % s[2]]
    }

    /// Center of the cell with linear index `lin`.
    pub fn point(&self, lin: usize) -> Vec<f64> {
        let m = self.multi_index(lin);
        (0..self.dim).map(|a| self.center(a, m[a])).collect()
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// True if both grids have the same spacing on every axis (to 1e-14 relative).
    pub fn same_spacing(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self
                .h
                .iter()
                .zip(&other.h)
                .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()))
    }

    /// Is the box the unit cube `(-1/2, 1/2)^d`?
    pub fn is_unit_cube(&self) -> bool {
        self.box_min.iter().all(|&v| v == -0.5) && self.box_max.iter().all(|&v| v == 0.5)
    }
}

/// A displacement vector `a`, one entry per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Displacement(pub Vec<f64>);

impl Displacement {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The corner `(d, d, ..., d)`.
    pub fn corner(dim: usize, d: f64) -> Self {
        Self(vec![d; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Snap each component to the nearest multiple of the grid spacing without
    /// exceeding `limit` in absolute value. Returns the snapped vector and
    /// whether anything moved.
    pub fn snapped(&self, grid: &GridSpec, limit: f64) -> (Displacement, bool) {
        let mut moved = false;
        let v = self
            .0
            .iter()
            .zip(&grid.h)
            .map(|(&a, &h)| {
                let max_cells = (limit / h + 1e-9).floor();
                let cells = (a / h).round().clamp(-max_cells, max_cells);
                let s = cells * h;
                if s != a {
                    moved = true;
                }
                s
            })
            .collect();
        (Displacement(v), moved)
    }

    /// Number of grid cells per component if every component is an integer
    /// multiple of the spacing.
    pub fn grid_cells(&self, grid: &GridSpec) -> Option<Vec<i64>> {
        self.0
            .iter()
            .zip(&grid.h)
            .map(|(&a, &h)| {
                let c = (a / h).round();
                ((a - c * h).abs() <= 1e-12 * h).then_some(c as i64)
            })
            .collect()
    }
}

/// Geometry block of a field-file header.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldGeometry {
    Cartesian(GridSpec),
    Polar { radius: f64, nr: usize, nphi: usize },
}

impl FieldGeometry {
    fn len(&self) -> usize {
        match self {
            FieldGeometry::Cartesian(g) => g.cell_count(),
            FieldGeometry::Polar { nr, nphi, .. } => nr * nphi,
        }
    }
}

/// A field file: a short text header terminated by `end`, followed by the
/// values as little-endian f64 in row-major order (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub geometry: FieldGeometry,
    pub values: Vec<f64>,
}

const FIELD_MAGIC: &str = "displab-field v1";

fn join(v: impl IntoIterator<Item = impl ToString>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

impl FieldFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.values.len() != self.geometry.len() {
            return Err(LabError::ShapeMismatch {
                expected: self.geometry.len(),
                got: self.values.len(),
            });
        }
        writeln!(w, "{FIELD_MAGIC}")?;
        match &self.geometry {
            FieldGeometry::Cartesian(g) => {
                writeln!(w, "geometry cartesian")?;
                writeln!(w, "dim {}", g.dim)?;
                writeln!(w, "n {}", join(&g.n))?;
                writeln!(w, "box_min {}", join(&g.box_min))?;
                writeln!(w, "box_max {}", join(&g.box_max))?;
            }
            FieldGeometry::Polar { radius, nr, nphi } => {
                writeln!(w, "geometry polar")?;
                writeln!(w, "radius {radius}")?;
                writeln!(w, "nr {nr}")?;
                writeln!(w, "nphi {nphi}")?;
            }
        }
        writeln!(w, "dtype f64le")?;
        writeln!(w, "end")?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let mut next = |r: &mut R| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(LabError::Format("unexpected end of header".into()));
            }
            Ok(line.trim_end().to_string())
        };
        if next(&mut r)? != FIELD_MAGIC {
            return Err(LabError::Format("missing magic line".into()));
        }
        let mut keys = std::collections::BTreeMap::new();
        loop {
            let l = next(&mut r)?;
            if l == "end" {
                break;
            }
            let (k, v) = l
                .split_once(' ')
                .ok_or_else(|| LabError::Format(format!("bad header line `{l}`")))?;
            keys.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            keys.get(k)
                .cloned()
                .ok_or_else(|| LabError::Format(format!("missing header key `{k}`")))
        };
        let nums = |s: String| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| LabError::Format(e.to_string())))
                .collect()
        };
        if get("dtype")? != "f64le" {
            return Err(LabError::Format("unsupported dtype".into()));
        }
        let geometry = match get("geometry")?.as_str() {
            "cartesian" => {
                let dim = nums(get("dim")?)?[0] as usize;
                let n: Vec<usize> = nums(get("n")?)?.into_iter().map(|v| v as usize).collect();
                FieldGeometry::Cartesian(GridSpec::new(
                    dim,
                    &n,
                    &nums(get("box_min")?)?,
                    &nums(get("box_max")?)?,
                )?)
            }
            "polar" => FieldGeometry::Polar {
                radius: nums(get("radius")?)?[0],
                nr: nums(get("nr")?)?[0] as usize,
                nphi: nums(get("nphi")?)?[0] as usize,
            },
            other => return Err(LabError::Format(format!("unknown geometry `{other}`"))),
        };
        let len = geometry.len();
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { geometry, values })
    }
}

/// Write a 1D or 2D Cartesian field as CSV with columns `x[,y],value`.
pub fn write_field_csv<W: Write>(grid: &GridSpec, values: &[f64], w: W) -> Result<()> {
    if values.len() != grid.cell_count() {
        return Err(LabError::ShapeMismatch { expected: grid.cell_count(), got: values.len() });
    }
    let mut wr = csv::Writer::from_writer(w);
    match grid.dim {
        1 => {
            wr.write_record(["x", "value"])?;
            for (j, v) in values.iter().enumerate() {
                wr.write_record([grid.center(0, j).to_string(), v.to_string()])?;
            }
        }
        2 => {
            wr.write_record(["x", "y", "value"])?;
            for (lin, v) in values.iter().enumerate() {
                let m = grid.multi_index(lin);
                wr.write_record([
                    grid.center(0, m[0]).to_string(),
                    grid.center(1, m[1]).to_string(),
                    v.to_string(),
                ])?;
            }
        }
        _ => return Err(LabError::InvalidRequest("CSV export supports 1D and 2D fields".into())),
    }
    wr.flush()?;
    Ok(())
}
