//! Densities on axis-parallel cubes, stored as cell grids.
//!
//! A [`Grid`] splits the cube `origin + [0, side]^dim` into `m^dim` equal cells.
//! A [`GridDensity`] holds one nonnegative value per cell and is read as a
//! piecewise-constant function, so `∫ f = Σ values · h^dim`.
//!
//! Cells are stored in row-major order with the **last** axis varying
//! fastest: the fiber `f_y(r) = f(y, r)` along the last coordinate is a
//! contiguous slice, and marginalizing the last coordinate sums consecutive
//! runs of `m` values.

mod conditions;
mod io;
mod spec;
pub(crate) mod stencil;

use serde::{Deserialize, Serialize};

use crate::numeric::neumaier_sum;
use crate::{Error, Result};

pub use conditions::{
    check_midpoint_log_concavity, estimate_axis_convexity_ratio,
    estimate_diag_second_derivative_bound,
};
pub use spec::{build_density, DensitySpec};

/// Mass tolerance after normalization.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A regular grid of `m^dim` cubic cells covering `origin + [0, side]^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    dim: usize,
    cells_per_axis: usize,
    origin: Vec<f64>,
    side: f64,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    dim: usize,
    cells_per_axis: usize,
    origin: Vec<f64>,
    side: f64,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.dim, r.cells_per_axis, r.origin, r.side)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            dim: g.dim,
            cells_per_axis: g.cells_per_axis,
            origin: g.origin,
            side: g.side,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, cells_per_axis: usize, origin: Vec<f64>, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if cells_per_axis == 0 {
            return Err(Error::InvalidGrid("cells_per_axis must be positive".into()));
        }
        if origin.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: origin.len(),
            });
        }
        if !(side.is_finite() && side > 0.0) || origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side {side} must be positive and finite"
            )));
        }
        let cells = (cells_per_axis as u128).checked_pow(dim as u32);
        if cells.is_none_or(|c| c > usize::MAX as u128 / 16) {
            return Err(Error::InvalidGrid("too many cells".into()));
        }
        Ok(Grid {
            dim,
            cells_per_axis,
            origin,
            side,
        })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize, cells_per_axis: usize) -> Result<Self> {
        Grid::new(dim, cells_per_axis, vec![0.0; dim], 1.0)
    }

    /// The cube `[-1/2, 1/2]^dim`.
    pub fn centered_unit(dim: usize, cells_per_axis: usize) -> Result<Self> {
        Grid::new(dim, cells_per_axis, vec![-0.5; dim], 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Cell width `h = side / m`.
    pub fn cell_width(&self) -> f64 {
        self.side / self.cells_per_axis as f64
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .fold(0, |acc, &k| acc * self.cells_per_axis + k)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let m = self.cells_per_axis;
        let mut out = vec![0; self.dim];
        for k in out.iter_mut().rev() {
            *k = flat % m;
            flat /= m;
        }
        out
    }

    /// Center coordinate of cell `k` along `axis`.
    pub fn center_coord(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + (k as f64 + 0.5) * self.cell_width()
    }

    /// Left boundary coordinate of node `k` (0..=m) along `axis`.
    pub fn node_coord(&self, axis: usize, k: usize) -> f64 {
        if k == self.cells_per_axis {
            self.origin[axis] + self.side
        } else {
            self.origin[axis] + k as f64 * self.cell_width()
        }
    }

    pub fn center(&self, multi: &[usize]) -> Vec<f64> {
        multi
            .iter()
            .enumerate()
            .map(|(axis, &k)| self.center_coord(axis, k))
            .collect()
    }

    pub fn center_of_flat(&self, flat: usize) -> Vec<f64> {
        self.center(&self.multi_index(flat))
    }

    /// Index of the cell containing `x` along `axis`, clamped to the grid.
    pub fn locate(&self, axis: usize, x: f64) -> usize {
        let s = (x - self.origin[axis]) / self.cell_width();
        if s <= 0.0 || s.is_nan() {
            0
        } else {
            (s.floor() as usize).min(self.cells_per_axis - 1)
        }
    }

    /// Flat index of the cell containing `point`, clamped to the grid.
    pub fn locate_point(&self, point: &[f64]) -> usize {
        point.iter().enumerate().fold(0, |acc, (axis, &x)| {
            acc * self.cells_per_axis + self.locate(axis, x)
        })
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim
            && point
                .iter()
                .zip(&self.origin)
                .all(|(&x, &o)| x >= o && x <= o + self.side)
    }

    /// The grid of the first `dim - 1` coordinates.
    pub fn project_last(&self) -> Result<Grid> {
        if self.dim < 2 {
            return Err(Error::Dimension("dimension at least 2".into()));
        }
        Grid::new(
            self.dim - 1,
            self.cells_per_axis,
            self.origin[..self.dim - 1].to_vec(),
            self.side,
        )
    }

    /// The one-dimensional grid along `axis`.
    pub fn axis_grid(&self, axis: usize) -> Grid {
        Grid {
            dim: 1,
            cells_per_axis: self.cells_per_axis,
            origin: vec![self.origin[axis]],
            side: self.side,
        }
    }

    /// Flat indices of the first cell of every line parallel to `axis`.
    pub(crate) fn line_starts(&self, axis: usize) -> impl Iterator<Item = usize> + '_ {
        let stride = self.stride(axis);
        let block = stride * self.cells_per_axis;
        let outer = self.num_cells() / block;
        (0..outer).flat_map(move |o| (0..stride).map(move |i| o * block + i))
    }
}

/// Nonnegative cell values on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
    total_mass: f64,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_cells(),
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidValue { index, value });
        }
        let total_mass = neumaier_sum(values.iter().copied()) * grid.cell_volume();
        Ok(GridDensity {
            grid,
            values,
            total_mass,
        })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.num_cells())
            .map(|i| f(&grid.center_of_flat(i)))
            .collect();
        GridDensity::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, multi: &[usize]) -> f64 {
        self.values[self.grid.flat_index(multi)]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rescales the values to total mass one.
    pub fn normalized(&self) -> Result<GridDensity> {
        if !(self.total_mass > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        let scale = 1.0 / self.total_mass;
        let values = self.values.iter().map(|v| v * scale).collect();
        GridDensity::new(self.grid.clone(), values)
    }

    /// Fails unless every cell is strictly positive.
    pub fn require_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            Some(index) => Err(Error::NonPositive {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    /// `ψ = -log f` per cell.
    pub fn psi(&self) -> Result<Vec<f64>> {
        self.require_positive()?;
        Ok(self.values.iter().map(|v| -v.ln()).collect())
    }

    /// `π(f)(y) = ∫ f(y, r) dr`, a density on the first `dim - 1` coordinates.
    pub fn marginalize_last(&self) -> Result<GridDensity> {
        let base = self.grid.project_last()?;
        let m = self.grid.cells_per_axis;
        let h = self.grid.cell_width();
        let values = self
            .values
            .chunks_exact(m)
            .map(|fiber| h * neumaier_sum(fiber.iter().copied()))
            .collect();
        GridDensity::new(base, values)
    }

    /// The unnormalized slice `r ↦ f(y, r)` along the last axis at base cell `y_index`.
    pub fn fiber(&self, y_index: &[usize]) -> Result<GridDensity> {
        let n = self.grid.dim;
        let m = self.grid.cells_per_axis;
        if y_index.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                found: y_index.len(),
            });
        }
        if let Some(k) = y_index.iter().find(|&&k| k >= m) {
            return Err(Error::IndexOutOfRange(format!("fiber index {k} >= {m}")));
        }
        let base_flat = y_index.iter().fold(0, |acc, &k| acc * m + k);
        self.fiber_flat(base_flat)
    }

    pub(crate) fn fiber_flat(&self, base_flat: usize) -> Result<GridDensity> {
        let m = self.grid.cells_per_axis;
        let values = self.values[base_flat * m..(base_flat + 1) * m].to_vec();
        GridDensity::new(self.grid.axis_grid(self.grid.dim - 1), values)
    }

    /// One-dimensional marginal along `axis`.
    pub fn axis_marginal(&self, axis: usize) -> GridDensity {
        let m = self.grid.cells_per_axis;
        let stride = self.grid.stride(axis);
        let mut sums = vec![0.0; m];
        for (i, v) in self.values.iter().enumerate() {
            sums[(i / stride) % m] += v;
        }
        let other = self.grid.cell_volume() / self.grid.cell_width();
        let values = sums.into_iter().map(|s| s * other).collect();
        GridDensity::new(self.grid.axis_grid(axis), values)
            .expect("marginal of a valid density is valid")
    }

    /// Multilinear interpolation of the cell-centered values at `point`,
    /// constant beyond the outermost cell centers.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        stencil::interpolate(&self.grid, &self.values, point)
    }

    /// The fiber along the last axis at an off-grid base point, obtained by
    /// multilinear interpolation in the first `dim - 1` coordinates.
    pub fn interpolated_fiber(&self, base_point: &[f64]) -> Result<GridDensity> {
        let n = self.grid.dim;
        if base_point.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                found: base_point.len(),
            });
        }
        let m = self.grid.cells_per_axis;
        let base = self.grid.project_last()?;
        let mut fiber = vec![0.0; m];
        for (flat, w) in stencil::corner_weights(&base, base_point) {
            let slice = &self.values[flat * m..(flat + 1) * m];
            for (acc, v) in fiber.iter_mut().zip(slice) {
                *acc += w * v;
            }
        }
        GridDensity::new(self.grid.axis_grid(n - 1), fiber)
    }

    /// Centered finite-difference gradient, one-sided at boundary cells.
    /// Returns one array per axis.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        (0..self.grid.dim)
            .map(|axis| stencil::axis_derivative(&self.grid, &self.values, axis))
            .collect()
    }
}

/// Normalized piecewise-linear CDF of a one-dimensional cell density.
#[derive(Clone, Debug, PartialEq)]
pub struct Cdf1D {
    grid: Grid,
    nodes: Vec<f64>,
}

impl Cdf1D {
    pub fn new(d: &GridDensity) -> Result<Self> {
        if d.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: d.dim(),
            });
        }
        if !(d.total_mass() > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        let h = d.grid.cell_width();
        let mut nodes = Vec::with_capacity(d.values.len() + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for v in &d.values {
            acc += v * h;
            nodes.push(acc / d.total_mass);
        }
        *nodes.last_mut().expect("nonempty") = 1.0;
        Ok(Cdf1D {
            grid: d.grid.clone(),
            nodes,
        })
    }

    /// CDF values at the `m + 1` cell boundaries.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval(&self, x: f64) -> f64 {
        let lo = self.grid.node_coord(0, 0);
        let hi = self.grid.node_coord(0, self.grid.cells_per_axis);
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = self.grid.locate(0, x);
        let t = ((x - self.grid.node_coord(0, k)) / self.grid.cell_width()).clamp(0.0, 1.0);
        self.nodes[k] + t * (self.nodes[k + 1] - self.nodes[k])
    }

    /// Smallest `x` with `eval(x) = u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let m = self.grid.cells_per_axis;
        if u >= 1.0 {
            return self.grid.node_coord(0, m);
        }
        let u = u.max(0.0);
        let k = self
            .nodes
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(m - 1);
        let (c0, c1) = (self.nodes[k], self.nodes[k + 1]);
        let t = if c1 > c0 {
            ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.grid.node_coord(0, k) + t * self.grid.cell_width()
    }
}
