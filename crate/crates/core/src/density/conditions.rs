//! Estimators for the structural constants of a grid density.

use rayon::prelude::*;

use super::GridDensity;
use crate::Result;

/// Smallest `R >= 1` with `f(mid) <= R (f(a) + f(b)) / 2` over every
/// axis-parallel triple whose endpoints are an even number of cells apart.
pub fn estimate_axis_convexity_ratio(d: &GridDensity) -> Result<f64> {
    d.require_positive()?;
    let grid = d.grid();
    let m = grid.cells_per_axis();
    let values = d.values();
    let mut lines = Vec::new();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        lines.extend(grid.line_starts(axis).map(|s| (s, stride)));
    }
    let worst = lines
        .par_iter()
        .map(|&(start, stride)| {
            let line: Vec<f64> = (0..m).map(|k| values[start + k * stride]).collect();
            let mut worst: f64 = 1.0;
            for a in 0..m {
                for b in (a + 2..m).step_by(2) {
                    let mid = line[(a + b) / 2];
                    worst = worst.max(2.0 * mid / (line[a] + line[b]));
                }
            }
            worst
        })
        .reduce(|| 1.0, f64::max);
    Ok(worst)
}

/// Checks `f(mid)^2 >= f(a) f(b) (1 - tol)` on consecutive triples along the
/// coordinate axes and the diagonals `e_i ± e_j`.
///
/// A positive sequence that is log-concave on consecutive triples is
/// log-concave on every on-grid triple of the same line, so consecutive
/// triples cover all on-grid midpoints. Returns the pass flag and the worst
/// violation `max(1 - f(mid)^2 / (f(a) f(b)), 0)`.
pub fn check_midpoint_log_concavity(d: &GridDensity, tol: f64) -> Result<(bool, f64)> {
    d.require_positive()?;
    let grid = d.grid();
    let n = grid.dim();
    let m = grid.cells_per_axis() as isize;
    let values = d.values();

    let mut directions: Vec<Vec<isize>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 1;
        directions.push(e);
        for j in i + 1..n {
            for s in [1, -1] {
                let mut e = vec![0; n];
                e[i] = 1;
                e[j] = s;
                directions.push(e);
            }
        }
    }

    let worst = (0..values.len())
        .into_par_iter()
        .map(|flat| {
            let mid = grid.multi_index(flat);
            let mut worst: f64 = 0.0;
            for dir in &directions {
                let shifted = |sign: isize| -> Option<usize> {
                    let mut idx = 0usize;
                    for (&k, &e) in mid.iter().zip(dir) {
                        let j = k as isize + sign * e;
                        if j < 0 || j >= m {
                            return None;
                        }
                        idx = idx * m as usize + j as usize;
                    }
                    Some(idx)
                };
                if let (Some(a), Some(b)) = (shifted(-1), shifted(1)) {
                    let fm = values[flat];
                    worst = worst.max(1.0 - fm * fm / (values[a] * values[b]));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok((worst <= tol, worst))
}

/// Largest centered second difference of `ψ = -log f` over axes and interior
/// cells, divided by `h²` and clamped at zero.
pub fn estimate_diag_second_derivative_bound(d: &GridDensity) -> Result<f64> {
    let psi = d.psi()?;
    let grid = d.grid();
    let m = grid.cells_per_axis();
    let h2 = grid.cell_width().powi(2);
    if m < 3 {
        return Ok(0.0);
    }
    let worst = (0..psi.len())
        .into_par_iter()
        .map(|flat| {
            let mut worst: f64 = 0.0;
            for axis in 0..grid.dim() {
                let stride = grid.stride(axis);
                let k = (flat / stride) % m;
                if k == 0 || k == m - 1 {
                    continue;
                }
                let second = psi[flat + stride] - 2.0 * psi[flat] + psi[flat - stride];
                worst = worst.max(second / h2);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}
