//! Cell-centred uniform 3-D grids and fields sampled on them.
//!
//! Nodes sit at cell centres `-L + (i + 1/2) h`, symmetric about the origin,
//! and are stored x-fastest: `index = i + nx * (j + ny * k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::num::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid3<T> {
    pub dims: [usize; 3],
    pub halfwidth: [T; 3],
}

impl<T: Real> Grid3<T> {
    pub fn new(dims: [usize; 3], halfwidth: [T; 3]) -> Result<Self> {
        for a in 0..3 {
            if dims[a] == 0 {
                return Err(SimError::GridTooThin {
                    axis: a,
                    n: 0,
                    min: 1,
                });
            }
            if !(halfwidth[a] > T::zero()) {
                return Err(SimError::InvalidParams(format!(
                    "grid halfwidth on axis {a} must be positive"
                )));
            }
        }
        Ok(Self { dims, halfwidth })
    }

    /// Cube with `n` nodes per axis over `[-halfwidth, halfwidth]³`.
    pub fn cube(n: usize, halfwidth: T) -> Result<Self> {
        Self::new([n; 3], [halfwidth; 3])
    }

    #[inline]
    pub fn spacing(&self) -> [T; 3] {
        [0, 1, 2].map(|a| T::lit(2.0) * self.halfwidth[a] / T::of_usize(self.dims[a]))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cell_volume(&self) -> T {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    /// Coordinate of node `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        let h = T::lit(2.0) * self.halfwidth[axis] / T::of_usize(self.dims[axis]);
        -self.halfwidth[axis] + (T::of_usize(i) + T::lit(0.5)) * h
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<T> {
        (0..self.dims[axis]).map(|i| self.coord(axis, i)).collect()
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec3<T> {
        let [i, j, k] = self.unravel(idx);
        Vec3::new(self.coord(0, i), self.coord(1, j), self.coord(2, k))
    }

    /// Iterator over node positions in storage order.
    pub fn positions(&self) -> impl Iterator<Item = Vec3<T>> + '_ {
        let xs = self.axis_coords(0);
        let ys = self.axis_coords(1);
        let zs = self.axis_coords(2);
        let (nx, ny) = (self.dims[0], self.dims[1]);
        (0..self.len()).map(move |idx| {
            let i = idx % nx;
            let r = idx / nx;
            Vec3::new(xs[i], ys[r % ny], zs[r / ny])
        })
    }

    /// True when node `idx` has both neighbours on every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        let ijk = self.unravel(idx);
        (0..3).all(|a| ijk[a] > 0 && ijk[a] + 1 < self.dims[a])
    }

    /// Box extents `[xmin, xmax, ymin, ymax, zmin, zmax]`.
    pub fn extents(&self) -> [T; 6] {
        let [hx, hy, hz] = self.halfwidth;
        [-hx, hx, -hy, hy, -hz, hz]
    }

    /// Whether the ball of radius `r` around `center` fits inside the box.
    pub fn contains_ball(&self, center: Vec3<T>, r: T) -> bool {
        (0..3).all(|a| center[a].abs() + r <= self.halfwidth[a])
    }

    pub fn require_min_dims(&self, min: usize) -> Result<()> {
        for a in 0..3 {
            if self.dims[a] < min {
                return Err(SimError::GridTooThin {
                    axis: a,
                    n: self.dims[a],
                    min,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGridField<T> {
    pub grid: Grid3<T>,
    pub values: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VecGridField<T> {
    pub grid: Grid3<T>,
    pub values: Vec<Vec3<T>>,
}

impl<T: Real> ScalarGridField<T> {
    pub fn from_fn(grid: Grid3<T>, f: impl Fn(Vec3<T>) -> T) -> Self {
        let values = grid.positions().map(f).collect();
        Self { grid, values }
    }

    /// Midpoint-rule integral over the box.
    pub fn integrate(&self) -> T {
        sum_kahan(self.values.iter().copied()) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Maximum of |value| over interior nodes only.
    pub fn max_abs_interior(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_interior(*i))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    /// Total, centroid and per-axis variance of the field treated as a density.
    pub fn moments(&self) -> (T, Vec3<T>, Vec3<T>) {
        let total = self.integrate();
        let dv = self.grid.cell_volume();
        let pos: Vec<Vec3<T>> = self.grid.positions().collect();
        let first =
            |a: usize| sum_kahan(self.values.iter().zip(&pos).map(|(w, p)| *w * p[a])) * dv / total;
        let mean = Vec3::new(first(0), first(1), first(2));
        let second = |a: usize| {
            sum_kahan(self.values.iter().zip(&pos).map(|(w, p)| {
                let d = p[a] - mean[a];
                *w * d * d
            })) * dv
                / total
        };
        (total, mean, Vec3::new(second(0), second(1), second(2)))
    }

    /// Sum over the x–y planes, returning one value per z node (times dV).
    pub fn z_marginal(&self) -> Vec<T> {
        let [nx, ny, nz] = self.grid.dims;
        let dv = self.grid.cell_volume();
        (0..nz)
            .map(|k| {
                let plane = &self.values[k * nx * ny..(k + 1) * nx * ny];
                sum_kahan(plane.iter().copied()) * dv
            })
            .collect()
    }
}

impl<T: Real> VecGridField<T> {
    pub fn from_fn(grid: Grid3<T>, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        sample_field(f, grid)
    }

    pub fn integrate(&self) -> Vec3<T> {
        let dv = self.grid.cell_volume();
        Vec3::new(
            sum_kahan(self.values.iter().map(|v| v.x)),
            sum_kahan(self.values.iter().map(|v| v.y)),
            sum_kahan(self.values.iter().map(|v| v.z)),
        ) * dv
    }

    pub fn component(&self, axis: usize) -> ScalarGridField<T> {
        ScalarGridField {
            grid: self.grid,
            values: self.values.iter().map(|v| v[axis]).collect(),
        }
    }

    pub fn max_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }
}

/// Compensated sum.
pub fn sum_kahan<T: Real>(it: impl Iterator<Item = T>) -> T {
    let mut s = T::zero();
    let mut c = T::zero();
    for v in it {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Evaluates `f` at every node of `grid`.
pub fn sample_field<T: Real>(f: impl Fn(Vec3<T>) -> Vec3<T>, grid: Grid3<T>) -> VecGridField<T> {
    let values = grid.positions().map(f).collect();
    VecGridField { grid, values }
}

/// Derivative of component `comp` along `axis` at node `(i,j,k)`:
/// centred inside, second-order one-sided on the two boundary layers.
#[inline]
fn partial<T: Real>(v: &VecGridField<T>, comp: usize, axis: usize, ijk: [usize; 3]) -> T {
    let g = &v.grid;
    let n = g.dims[axis];
    let h = g.spacing()[axis];
    let at = |s: usize| {
        let mut p = ijk;
        p[axis] = s;
        v.values[g.index(p[0], p[1], p[2])][comp]
    };
    let i = ijk[axis];
    let two = T::lit(2.0);
    if i == 0 {
        (-T::lit(3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) / (two * h)
    } else if i + 1 == n {
        (T::lit(3.0) * at(n - 1) - T::lit(4.0) * at(n - 2) + at(n - 3)) / (two * h)
    } else {
        (at(i + 1) - at(i - 1)) / (two * h)
    }
}

pub fn grid_divergence<T: Real>(v: &VecGridField<T>) -> Result<ScalarGridField<T>> {
    v.grid.require_min_dims(3)?;
    let g = v.grid;
    let values = (0..g.len())
        .map(|idx| {
            let ijk = g.unravel(idx);
            partial(v, 0, 0, ijk) + partial(v, 1, 1, ijk) + partial(v, 2, 2, ijk)
        })
        .collect();
    Ok(ScalarGridField { grid: g, values })
}

pub fn grid_curl<T: Real>(v: &VecGridField<T>) -> Result<VecGridField<T>> {
    v.grid.require_min_dims(3)?;
    let g = v.grid;
    let values = (0..g.len())
        .map(|idx| {
            let ijk = g.unravel(idx);
            Vec3::new(
                partial(v, 2, 1, ijk) - partial(v, 1, 2, ijk),
                partial(v, 0, 2, ijk) - partial(v, 2, 0, ijk),
                partial(v, 1, 0, ijk) - partial(v, 0, 1, ijk),
            )
        })
        .collect();
    Ok(VecGridField { grid: g, values })
}
