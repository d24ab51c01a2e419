//! Voxel grid geometry and label storage.
//!
//! Axis order is `(z, y, x)` everywhere, with `dims = (D, H, W)` and `D`
//! along the vertical axis. World points are `(X, Y, Z)` in meters. Voxel
//! `k` spans the half-open interval `[k, k + 1)` in continuous voxel units,
//! so its center sits at `k + 0.5`.

use serde::{Deserialize, Serialize};

use crate::labels::Label;
use crate::{Error, Result};

/// Metric extent and resolution of a voxel grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Minimum corner in world `(X, Y, Z)`.
    pub origin: [f64; 3],
    pub voxel_size: f64,
    /// `(D, H, W)` = `(Z, Y, X)` counts.
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: [f64; 3], voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        let spec = GridSpec { origin, voxel_size, dims };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(Error::InvalidSpec(format!("voxel_size {} must be > 0", self.voxel_size)));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec(format!("dims {:?} must all be >= 1", self.dims)));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid origin"));
        }
        Ok(())
    }

    /// Builds a grid from metric ranges `[min, max]` per world axis.
    pub fn from_ranges(x: [f64; 2], y: [f64; 2], z: [f64; 2], voxel_size: f64) -> Result<Self> {
        let count = |r: [f64; 2]| -> Result<usize> {
            let n = (r[1] - r[0]) / voxel_size;
            let rounded = n.round();
            if !(rounded >= 1.0 && (n - rounded).abs() < 1e-6) {
                return Err(Error::InvalidSpec(format!(
                    "range {r:?} is not a whole number of {voxel_size} m voxels"
                )));
            }
            Ok(rounded as usize)
        };
        GridSpec::new([x[0], y[0], z[0]], voxel_size, [count(z)?, count(y)?, count(x)?])
    }

    /// The benchmark grid: X, Y in [-51.2, 51.2] m, Z in [-3, 5] m at 0.2 m,
    /// giving dims (40, 512, 512).
    pub fn standard() -> Self {
        GridSpec::from_ranges([-51.2, 51.2], [-51.2, 51.2], [-3.0, 5.0], 0.2)
            .expect("standard ranges are exact")
    }

    /// A quarter-area grid (X, Y in [-25.6, 25.6] m) used by the synthetic suites.
    pub fn desk() -> Self {
        GridSpec::from_ranges([-25.6, 25.6], [-25.6, 25.6], [-3.0, 5.0], 0.2)
            .expect("desk ranges are exact")
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains_index(&self, idx: [i64; 3]) -> bool {
        idx.iter().zip(self.dims).all(|(&i, d)| i >= 0 && (i as usize) < d)
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn unravel(&self, linear: usize) -> [usize; 3] {
        let x = linear % self.dims[2];
        let rest = linear / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], x]
    }

    /// Continuous voxel coordinate `(z, y, x)` of a world point. No clamping.
    pub fn world_to_voxel(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("world point"));
        }
        let s = self.voxel_size;
        Ok([
            (p[2] - self.origin[2]) / s,
            (p[1] - self.origin[1]) / s,
            (p[0] - self.origin[0]) / s,
        ])
    }

    /// World `(X, Y, Z)` of the center of voxel `(z, y, x)`.
    pub fn voxel_to_world(&self, idx: [usize; 3]) -> Result<[f64; 3]> {
        let signed = idx.map(|v| v as i64);
        if !self.contains_index(signed) {
            return Err(self.out_of_bounds(signed));
        }
        Ok(self.center_unchecked([idx[0] as f64, idx[1] as f64, idx[2] as f64]))
    }

    /// World point of continuous voxel coordinate `c + 0.5` (the center convention).
    pub fn center_unchecked(&self, c: [f64; 3]) -> [f64; 3] {
        let s = self.voxel_size;
        [
            self.origin[0] + (c[2] + 0.5) * s,
            self.origin[1] + (c[1] + 0.5) * s,
            self.origin[2] + (c[0] + 0.5) * s,
        ]
    }

    /// The voxel containing a world point, if inside the grid.
    pub fn voxel_of(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let c = self.world_to_voxel(p).ok()?;
        let idx = c.map(|v| v.floor() as i64);
        self.contains_index(idx).then(|| idx.map(|v| v as usize))
    }

    pub fn out_of_bounds(&self, idx: [i64; 3]) -> Error {
        Error::OutOfBounds { z: idx[0], y: idx[1], x: idx[2], dims: self.dims }
    }

    /// Grid at stride `s`: same origin, `s`-times coarser voxels, dims rounded up.
    pub fn downsampled(&self, stride: usize) -> GridSpec {
        GridSpec {
            origin: self.origin,
            voxel_size: self.voxel_size * stride as f64,
            dims: self.dims.map(|d| d.div_ceil(stride)),
        }
    }

    /// Grid split `eta` times per axis.
    pub fn refined(&self, eta: usize) -> GridSpec {
        GridSpec {
            origin: self.origin,
            voxel_size: self.voxel_size / eta as f64,
            dims: self.dims.map(|d| d * eta),
        }
    }

    /// Same dims, and origin / voxel size equal to single precision.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()));
        self.dims == other.dims
            && close(self.voxel_size, other.voxel_size)
            && self.origin.iter().zip(other.origin).all(|(&a, b)| close(a, b))
    }

    pub fn ensure_compatible(&self, other: &GridSpec) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::SpecMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// One label per voxel, row-major in `(z, y, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLabelGrid {
    spec: GridSpec,
    labels: Vec<Label>,
}

impl DenseLabelGrid {
    pub fn empty(spec: GridSpec) -> Self {
        let n = spec.num_voxels();
        DenseLabelGrid { spec, labels: vec![Label::EMPTY; n] }
    }

    pub fn from_labels(spec: GridSpec, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != spec.num_voxels() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} voxels",
                labels.len(),
                spec.num_voxels()
            )));
        }
        Ok(DenseLabelGrid { spec, labels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [Label] {
        &mut self.labels
    }

    pub fn get(&self, idx: [usize; 3]) -> Label {
        self.labels[self.spec.linear_index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], label: Label) {
        let i = self.spec.linear_index(idx);
        self.labels[i] = label;
    }

    pub fn occupied_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_occupied()).count()
    }

    pub fn to_sparse(&self) -> SparseOccupancy {
        let records = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_occupied())
            .map(|(i, &label)| {
                let [z, y, x] = self.spec.unravel(i);
                SparseRecord { z: z as u32, y: y as u32, x: x as u32, label }
            })
            .collect();
        SparseOccupancy { spec: self.spec.clone(), records }
    }

    pub fn from_sparse(sparse: &SparseOccupancy) -> Self {
        let mut grid = DenseLabelGrid::empty(sparse.spec.clone());
        for r in &sparse.records {
            grid.set(r.index(), r.label);
        }
        grid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SparseRecord {
    pub z: u32,
    pub y: u32,
    pub x: u32,
    pub label: Label,
}

impl SparseRecord {
    pub fn index(&self) -> [usize; 3] {
        [self.z as usize, self.y as usize, self.x as usize]
    }
}

/// Occupied voxels only, sorted strictly by `(z, y, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOccupancy {
    spec: GridSpec,
    records: Vec<SparseRecord>,
}

impl SparseOccupancy {
    pub fn new(spec: GridSpec, records: Vec<SparseRecord>) -> Result<Self> {
        for r in &records {
            let idx = [r.z as i64, r.y as i64, r.x as i64];
            if !spec.contains_index(idx) {
                return Err(spec.out_of_bounds(idx));
            }
            if r.label.is_empty() {
                return Err(Error::InvalidLabel(r.label.id() as i64));
            }
        }
        if records.windows(2).any(|w| (w[0].z, w[0].y, w[0].x) >= (w[1].z, w[1].y, w[1].x)) {
            return Err(Error::ShapeMismatch("records not strictly increasing".into()));
        }
        Ok(SparseOccupancy { spec, records })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn records(&self) -> &[SparseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
