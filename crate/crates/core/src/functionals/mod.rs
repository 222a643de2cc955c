//! Entropy functionals and the transport-cost chain they control.

mod w2;

pub use w2::{exact_w2_small, min_cost_coupling, w2_lower_bound, CouplingPlan, MAX_ATOMS};

use rayon::prelude::*;

use crate::density::{check_midpoint_log_concavity, GridDensity};
use crate::knothe::{displacement_cost, knothe_map, tire_bracket, KnotheMap};
use crate::numeric::par_sum;
use crate::report::{Tolerance, VerificationReport};
use crate::transport1d::QUADRATIC_CONSTANT;
use crate::{Error, Result};

/// Tolerance of the log-concavity precondition.
pub const LOG_CONCAVITY_TOL: f64 = 1e-9;

fn require_normalized(d: &GridDensity) -> Result<()> {
    if (d.total_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "density must be normalized, total mass is {}",
            d.total_mass()
        )));
    }
    Ok(())
}

/// `D(g || f) = Σ g log(g/f) h^n` for normalized densities on the same grid.
///
/// Cells with `g = 0` contribute zero; a cell with `g > 0 = f` makes the
/// divergence `+∞`.
pub fn relative_entropy(g: &GridDensity, f: &GridDensity) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    require_normalized(f)?;
    require_normalized(g)?;
    let (gv, fv) = (g.values(), f.values());
    if gv.iter().zip(fv).any(|(&a, &b)| a > 0.0 && b == 0.0) {
        return Ok(f64::INFINITY);
    }
    let vol = f.grid().cell_volume();
    Ok(par_sum(gv.len(), |c| {
        if gv[c] == 0.0 {
            0.0
        } else {
            vol * gv[c] * (gv[c] / fv[c]).ln()
        }
    }))
}

fn require_log_concave(f: &GridDensity) -> Result<()> {
    let (pass, worst) = check_midpoint_log_concavity(f, LOG_CONCAVITY_TOL)?;
    if !pass {
        return Err(Error::Precondition(format!(
            "source density is not log-concave (worst midpoint violation {worst:.3e})"
        )));
    }
    Ok(())
}

/// `tire_bracket(f, g, T) <= D(g || f)` for log-concave `f`.
pub fn check_tire_le_entropy(
    f: &GridDensity,
    g: &GridDensity,
    t: &KnotheMap,
) -> Result<VerificationReport> {
    require_log_concave(f)?;
    Ok(VerificationReport::new(
        "tire-le-entropy",
        tire_bracket(f, g, t)?,
        relative_entropy(g, f)?,
        1.0,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// Upper bound on the Tire functional from the Legendre transform of
/// `φ = -log g`, valid for any transport map and without log-concavity.
///
/// Computed in the pointwise form
/// `∫ [∇f · x - f log f + f φ*(∇ψ)] - (∫f) log(∫g / ∫f)`, which is the
/// supremum over `y` of `S_y{g, f}(x)` integrated over the cube. Integrating
/// `∇f · x` by parts turns it into `-n ∫f` plus the boundary flux
/// `∮ f x · ν`; on the whole space the flux vanishes and this is the familiar
/// form `∫ [φ*(∇ψ) - log((∫g/∫f) f) - n] f`. On the cube the flux is kept.
///
/// `φ*` is the exact Legendre transform of the cell-constant `φ`: the sup of
/// `v · y - φ(y)` over a cell is attained at a corner.
pub fn legendre_tire_bound(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    f.require_positive()?;
    let grid = f.grid();
    let n = grid.dim();
    let vol = grid.cell_volume();
    let half = 0.5 * grid.cell_width();
    let centers: Vec<Vec<f64>> = (0..grid.num_cells())
        .map(|c| grid.center_of_flat(c))
        .collect();
    let log_g: Vec<(usize, f64)> = g
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(j, v)| (j, v.ln()))
        .collect();
    if log_g.is_empty() {
        return Err(Error::DegenerateDensity);
    }
    let values = f.values();
    let grad = f.gradient();
    let terms: Vec<f64> = (0..values.len())
        .into_par_iter()
        .map(|c| {
            let fc = values[c];
            let v: Vec<f64> = (0..n).map(|i| -grad[i][c] / fc).collect();
            let corner = half * v.iter().map(|x| x.abs()).sum::<f64>();
            let conj = log_g
                .iter()
                .map(|&(j, lg)| lg + v.iter().zip(&centers[j]).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
                + corner;
            let drift: f64 = (0..n).map(|i| grad[i][c] * centers[c][i]).sum();
            vol * (drift - fc * fc.ln() + fc * conj)
        })
        .collect();
    let total = crate::numeric::neumaier_sum(terms);
    if !total.is_finite() {
        return Err(Error::Saturated);
    }
    let (mf, mg) = (f.total_mass(), g.total_mass());
    Ok(total - mf * (mg / mf).ln())
}

/// `W₂²(f, g) <= ∫ |T(x) - x|² f` for the Knothe map `T`, with the certified
/// lower bound [`w2_lower_bound`] (`refine^n` sub-cells per cell) standing in
/// for `W₂²`.
pub fn check_w2_le_knothe(
    f: &GridDensity,
    g: &GridDensity,
    refine: usize,
) -> Result<VerificationReport> {
    let (w2, _) = w2_lower_bound(f, g, refine)?;
    let t = knothe_map(f, g)?;
    Ok(VerificationReport::new(
        "w2-le-knothe",
        w2,
        displacement_cost(&t, f)?,
        1.0,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// `∫ |T(x) - x|² f <= (40/9) R² D(g || f)` for log-concave `f`.
pub fn check_knothe_le_entropy(
    f: &GridDensity,
    g: &GridDensity,
    r: f64,
) -> Result<VerificationReport> {
    require_log_concave(f)?;
    let t = knothe_map(f, g)?;
    let constant = QUADRATIC_CONSTANT * r * r;
    Ok(VerificationReport::new(
        "knothe-le-entropy",
        displacement_cost(&t, f)?,
        constant * relative_entropy(g, f)?,
        constant,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}
