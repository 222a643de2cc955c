//! Finite-difference and interpolation stencils on cell-centered grids.

use super::Grid;

/// Per-axis bracketing cells and weights for multilinear interpolation.
fn axis_bracket(grid: &Grid, axis: usize, x: f64) -> [(usize, f64); 2] {
    let m = grid.cells_per_axis();
    if m == 1 {
        return [(0, 1.0), (0, 0.0)];
    }
    let s = ((x - grid.origin()[axis]) / grid.cell_width() - 0.5).clamp(0.0, (m - 1) as f64);
    let i0 = (s.floor() as usize).min(m - 2);
    let t = s - i0 as f64;
    [(i0, 1.0 - t), (i0 + 1, t)]
}

/// Flat indices and weights of the `2^dim` cells used to interpolate at `point`.
pub(crate) fn corner_weights(grid: &Grid, point: &[f64]) -> Vec<(usize, f64)> {
    let brackets: Vec<[(usize, f64); 2]> = point
        .iter()
        .enumerate()
        .map(|(axis, &x)| axis_bracket(grid, axis, x))
        .collect();
    let m = grid.cells_per_axis();
    let mut out = Vec::with_capacity(1 << brackets.len());
    for mask in 0..(1usize << brackets.len()) {
        let mut flat = 0;
        let mut w = 1.0;
        for (axis, b) in brackets.iter().enumerate() {
            let (k, wk) = b[(mask >> axis) & 1];
            flat = flat * m + k;
            w *= wk;
        }
        if w != 0.0 {
            out.push((flat, w));
        }
    }
    out
}

pub(crate) fn interpolate(grid: &Grid, values: &[f64], point: &[f64]) -> f64 {
    corner_weights(grid, point)
        .into_iter()
        .map(|(flat, w)| w * values[flat])
        .sum()
}

/// Derivative along `axis`: centered on interior cells, one-sided at the two
/// boundary cells, zero when the axis has a single cell.
pub(crate) fn axis_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let m = grid.cells_per_axis();
    let h = grid.cell_width();
    let stride = grid.stride(axis);
    let mut out = vec![0.0; values.len()];
    if m == 1 {
        return out;
    }
    for (i, d) in out.iter_mut().enumerate() {
        let k = (i / stride) % m;
        *d = if k == 0 {
            (values[i + stride] - values[i]) / h
        } else if k == m - 1 {
            (values[i] - values[i - stride]) / h
        } else {
            (values[i + stride] - values[i - stride]) / (2.0 * h)
        };
    }
    out
}
