//! Monotone transportation between densities on an interval.
//!
//! For cell-constant densities the normalized CDFs `F` and `G` are piecewise
//! linear, so `T = G⁻¹ ∘ F` is piecewise linear as well. Merging the CDF
//! nodes of both densities in `u = F(x)` splits the interval into pieces on
//! which `f`, `g` and `T′` are constant and `x`, `T(x)` are linear in `u`.
//! Every integral below is computed exactly piece by piece.

use crate::density::{stencil, Cdf1D, Grid, GridDensity};
use crate::numeric::neumaier_sum;
use crate::report::{Tolerance, VerificationReport};
use crate::{Error, Result};

/// Constant of the quadratic transport-cost inequality on an interval.
pub const QUADRATIC_CONSTANT: f64 = 40.0 / 9.0;
/// Constant of the `Λ(T′ - 1)` inequality.
pub const LAMBDA_CONSTANT: f64 = 10.0 / 3.0;
/// Constant of the `Λ`-Poincaré inequality.
pub const CHEEGER_CONSTANT: f64 = 4.0 / 3.0;
/// Coefficient of `Λ(x - 1)` in the scalar logarithm inequality.
pub const LOG_COEFFICIENT: f64 = 0.3;

/// `Λ(t) = min(|t|, t²)`.
pub fn lambda(t: f64) -> f64 {
    t.abs().min(t * t)
}

/// Antiderivative of `Λ` vanishing at zero.
fn lambda_antiderivative(t: f64) -> f64 {
    let a = t.abs();
    let v = if a <= 1.0 {
        a * a * a / 3.0
    } else {
        1.0 / 3.0 + (a * a - 1.0) / 2.0
    };
    v.copysign(t)
}

/// Mean of `Λ` over the linear segment from `a` to `b`.
fn lambda_mean(a: f64, b: f64) -> f64 {
    if (b - a).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300) {
        lambda(0.5 * (a + b))
    } else {
        (lambda_antiderivative(b) - lambda_antiderivative(a)) / (b - a)
    }
}

/// `-log x + (x - 1) - (3/10) Λ(x - 1)`, nonnegative for every `x > 0`.
pub fn log_inequality_gap(x: f64) -> f64 {
    let d = x - 1.0;
    d - d.ln_1p() - LOG_COEFFICIENT * lambda(d)
}

/// Evaluates the scalar logarithm inequality at `points` log-spaced values in
/// `[lo, hi]` and reports the point with the smallest gap, with exact
/// tolerance.
pub fn check_log_inequality(points: usize, lo: f64, hi: f64) -> Result<VerificationReport> {
    if points < 2 || !(lo > 0.0 && hi > lo) {
        return Err(Error::Precondition(format!(
            "need at least two points in 0 < lo < hi, got {points} in [{lo}, {hi}]"
        )));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (points - 1) as f64;
    let worst = (0..points)
        .map(|i| (llo + i as f64 * step).exp())
        .min_by(|a, b| log_inequality_gap(*a).total_cmp(&log_inequality_gap(*b)))
        .expect("at least two points");
    let d = worst - 1.0;
    Ok(VerificationReport::new(
        "log-inequality",
        LOG_COEFFICIENT * lambda(d),
        d - d.ln_1p(),
        LOG_COEFFICIENT,
        points,
        Tolerance::EXACT,
    ))
}

/// A piece of the interval on which both densities are constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    /// Range of the normalized source CDF.
    pub u0: f64,
    pub u1: f64,
    pub source_cell: usize,
    pub target_cell: usize,
    /// Source points with `F(x) = u0, u1`.
    pub x0: f64,
    pub x1: f64,
    /// Their images `T(x0), T(x1)`.
    pub y0: f64,
    pub y1: f64,
}

/// The increasing map `T` with `F = G ∘ T` between two cell densities.
#[derive(Clone, Debug)]
pub struct MonotoneMap1D {
    source: Grid,
    target: Grid,
    source_values: Vec<f64>,
    target_values: Vec<f64>,
    source_mass: f64,
    target_mass: f64,
    source_cdf: Vec<f64>,
    target_cdf: Vec<f64>,
    node_values: Vec<f64>,
    derivative: Vec<f64>,
}

fn require_1d(d: &GridDensity) -> Result<()> {
    if d.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: d.dim(),
        });
    }
    Ok(())
}

/// Inverse of a piecewise-linear CDF on `grid`, restricted to cell `k`.
fn cdf_inverse_in(grid: &Grid, cdf: &[f64], k: usize, u: f64) -> f64 {
    let (c0, c1) = (cdf[k], cdf[k + 1]);
    if u >= c1 {
        return grid.node_coord(0, k + 1);
    }
    let t = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
    grid.node_coord(0, k) + t * grid.cell_width()
}

fn cdf_cell(cdf: &[f64], u: f64) -> usize {
    let m = cdf.len() - 1;
    cdf.partition_point(|&c| c <= u)
        .saturating_sub(1)
        .min(m - 1)
}

/// Builds the monotone map from `f` to `g`.
///
/// Both densities must be one-dimensional and strictly positive. When their
/// intervals coincide the endpoints are fixed exactly.
pub fn monotone_map(f: &GridDensity, g: &GridDensity) -> Result<MonotoneMap1D> {
    require_1d(f)?;
    require_1d(g)?;
    for d in [f, g] {
        if !(d.total_mass() > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        d.require_positive()?;
    }
    let source_cdf = Cdf1D::new(f)?.nodes().to_vec();
    let target_cdf = Cdf1D::new(g)?.nodes().to_vec();
    let tg = g.grid();
    let m = f.grid().cells_per_axis();
    let mut node_values: Vec<f64> = source_cdf
        .iter()
        .map(|&u| cdf_inverse_in(tg, &target_cdf, cdf_cell(&target_cdf, u), u))
        .collect();
    node_values[0] = tg.node_coord(0, 0);
    node_values[m] = tg.node_coord(0, tg.cells_per_axis());

    let mut map = MonotoneMap1D {
        source: f.grid().clone(),
        target: tg.clone(),
        source_values: f.values().to_vec(),
        target_values: g.values().to_vec(),
        source_mass: f.total_mass(),
        target_mass: g.total_mass(),
        source_cdf,
        target_cdf,
        node_values,
        derivative: Vec::new(),
    };
    map.derivative = map.derivative_at_centers();
    Ok(map)
}

impl MonotoneMap1D {
    pub fn source_grid(&self) -> &Grid {
        &self.source
    }

    pub fn target_grid(&self) -> &Grid {
        &self.target
    }

    /// `T` at the `m + 1` source cell boundaries.
    pub fn node_values(&self) -> &[f64] {
        &self.node_values
    }

    /// `T′` at the source cell centers.
    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    pub fn source_mass(&self) -> f64 {
        self.source_mass
    }

    pub fn target_mass(&self) -> f64 {
        self.target_mass
    }

    /// Normalized source CDF at the cell boundaries.
    pub fn source_cdf(&self) -> &[f64] {
        &self.source_cdf
    }

    pub fn target_cdf(&self) -> &[f64] {
        &self.target_cdf
    }

    /// Normalized source CDF at `x`, clamped to the interval.
    pub fn source_cdf_at(&self, x: f64) -> f64 {
        let k = self.source.locate(0, x);
        let x0 = self.source.node_coord(0, k);
        let t = ((x - x0) / self.source.cell_width()).clamp(0.0, 1.0);
        self.source_cdf[k] + t * (self.source_cdf[k + 1] - self.source_cdf[k])
    }

    /// Inverse of the normalized target CDF.
    pub fn target_quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        cdf_inverse_in(
            &self.target,
            &self.target_cdf,
            cdf_cell(&self.target_cdf, u),
            u,
        )
    }

    /// `T(x)`, exact for the piecewise-constant densities.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.source.locate(0, x);
        let x0 = self.source.node_coord(0, k);
        if x <= x0 {
            return self.node_values[k];
        }
        if x >= self.source.node_coord(0, k + 1) {
            return self.node_values[k + 1];
        }
        self.target_quantile(self.source_cdf_at(x))
    }

    fn derivative_at_centers(&self) -> Vec<f64> {
        let ratio = self.target_mass / self.source_mass;
        (0..self.source.cells_per_axis())
            .map(|k| {
                let y = self.eval(self.source.center_coord(0, k));
                let j = self.target.locate(0, y);
                ratio * self.source_values[k] / self.target_values[j]
            })
            .collect()
    }

    /// Splits the interval into pieces on which both densities are constant.
    pub fn pieces(&self) -> Vec<Piece> {
        let (fc, gc) = (&self.source_cdf, &self.target_cdf);
        let mut cuts = Vec::with_capacity(fc.len() + gc.len());
        let (mut i, mut j) = (0, 0);
        while i < fc.len() || j < gc.len() {
            let next = if j >= gc.len() || (i < fc.len() && fc[i] <= gc[j]) {
                i += 1;
                fc[i - 1]
            } else {
                j += 1;
                gc[j - 1]
            };
            if cuts.last().is_none_or(|&last| next > last) {
                cuts.push(next);
            }
        }
        let mut out = Vec::with_capacity(cuts.len());
        let (mut k, mut l) = (0, 0);
        let (mf, mg) = (fc.len() - 2, gc.len() - 2);
        for w in cuts.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            while k < mf && fc[k + 1] <= u0 {
                k += 1;
            }
            while l < mg && gc[l + 1] <= u0 {
                l += 1;
            }
            out.push(Piece {
                u0,
                u1,
                source_cell: k,
                target_cell: l,
                x0: cdf_inverse_in(&self.source, fc, k, u0),
                x1: cdf_inverse_in(&self.source, fc, k, u1),
                y0: cdf_inverse_in(&self.target, gc, l, u0),
                y1: cdf_inverse_in(&self.target, gc, l, u1),
            });
        }
        out
    }

    /// `T′` on a piece, from the cell values.
    pub fn piece_slope(&self, p: &Piece) -> f64 {
        (self.target_mass / self.source_mass) * self.source_values[p.source_cell]
            / self.target_values[p.target_cell]
    }

    /// `∫ |T(x) - x|² f(x) dx`.
    pub fn transport_cost(&self) -> f64 {
        let mf = self.source_mass;
        neumaier_sum(self.pieces().iter().map(|p| {
            let (d0, d1) = (p.y0 - p.x0, p.y1 - p.x1);
            mf * (p.u1 - p.u0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0
        }))
    }

    /// `∫ Λ(T′(x) - 1) f(x) dx`.
    pub fn lambda_cost(&self) -> f64 {
        let mf = self.source_mass;
        neumaier_sum(
            self.pieces()
                .iter()
                .map(|p| mf * (p.u1 - p.u0) * lambda(self.piece_slope(p) - 1.0)),
        )
    }

    /// `∫ f(x) log g(T(x)) dx`.
    pub fn log_target_integral(&self) -> f64 {
        let mf = self.source_mass;
        neumaier_sum(
            self.pieces()
                .iter()
                .map(|p| mf * (p.u1 - p.u0) * self.target_values[p.target_cell].ln()),
        )
    }

    /// `∫ φ(x) (T(x) - x) dx` for `φ` constant on each source cell.
    pub fn weighted_displacement_integral(&self, phi: &[f64]) -> f64 {
        neumaier_sum(
            self.pieces().iter().map(|p| {
                phi[p.source_cell] * (p.x1 - p.x0) * 0.5 * ((p.y0 - p.x0) + (p.y1 - p.x1))
            }),
        )
    }

    /// Largest `|T(x) - x|` over the cell boundaries.
    pub fn max_displacement(&self) -> f64 {
        self.node_values
            .iter()
            .enumerate()
            .map(|(k, y)| (y - self.source.node_coord(0, k)).abs())
            .fold(0.0, f64::max)
    }

    fn check_densities(&self, f: &GridDensity, g: &GridDensity) -> Result<()> {
        if f.grid() != &self.source || g.grid() != &self.target {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// `T′` at the source cell centers from the density formula
/// `T′(x) = (∫g / ∫f) f(x) / g(T(x))`, reading `g` from the cell containing `T(x)`.
pub fn map_derivative(t: &MonotoneMap1D, f: &GridDensity, g: &GridDensity) -> Result<Vec<f64>> {
    t.check_densities(f, g)?;
    let ratio = g.total_mass() / f.total_mass();
    f.values()
        .iter()
        .enumerate()
        .map(|(k, &fk)| {
            let y = t.eval(f.grid().center_coord(0, k));
            let j = g.grid().locate(0, y);
            let gj = g.values()[j];
            if gj <= 0.0 {
                return Err(Error::NonPositive {
                    index: j,
                    value: gj,
                });
            }
            Ok(ratio * fk / gj)
        })
        .collect()
}

/// `∫ S_T{g, f} - (∫f) log(∫g / ∫f)` with `S_T = f log(g(T)/f) - f′ (T - x)`.
///
/// `f′` is the finite-difference derivative of the cell values.
pub fn deficit_1d(f: &GridDensity, g: &GridDensity, t: &MonotoneMap1D) -> Result<f64> {
    t.check_densities(f, g)?;
    f.require_positive()?;
    g.require_positive()?;
    let df = stencil::axis_derivative(f.grid(), f.values(), 0);
    let (fv, gv) = (f.values(), g.values());
    let mf = f.total_mass();
    let integral = neumaier_sum(t.pieces().iter().map(|p| {
        let (k, j) = (p.source_cell, p.target_cell);
        mf * (p.u1 - p.u0) * (gv[j] / fv[k]).ln()
            - df[k] * (p.x1 - p.x0) * 0.5 * ((p.y0 - p.x0) + (p.y1 - p.x1))
    }));
    Ok(integral - mf * (g.total_mass() / mf).ln())
}

fn require_unit_length(grid: &Grid) -> Result<()> {
    if (grid.side() - 1.0).abs() > 1e-12 {
        return Err(Error::IntervalLength(grid.side()));
    }
    Ok(())
}

/// `∫ Λ(T′ - 1) f <= (10/3) · deficit` for the monotone map from `f` to `g`.
pub fn check_lambda_deficit(f: &GridDensity, g: &GridDensity) -> Result<VerificationReport> {
    let t = monotone_map(f, g)?;
    let deficit = deficit_1d(f, g, &t)?;
    Ok(VerificationReport::new(
        "lambda-deficit-1d",
        t.lambda_cost(),
        LAMBDA_CONSTANT * deficit,
        LAMBDA_CONSTANT,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// `∫ |T(x) - x|² f <= (40/9) R² · deficit` on an interval of length one.
///
/// `r` is the convexity ratio of `f` supplied by the caller; the recorded
/// constant is `(40/9) R²`.
pub fn check_quadratic_transport(
    f: &GridDensity,
    g: &GridDensity,
    r: f64,
) -> Result<VerificationReport> {
    require_1d(f)?;
    require_unit_length(f.grid())?;
    let t = monotone_map(f, g)?;
    let deficit = deficit_1d(f, g, &t)?;
    let constant = QUADRATIC_CONSTANT * r * r;
    Ok(VerificationReport::new(
        "quadratic-transport-1d",
        t.transport_cost(),
        constant * deficit,
        constant,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// `∫_a^b ρ <= (R/2)(ρ(a) + ρ(b))` for `b - a <= 1`.
///
/// The integral is exact for the cell-constant `ρ`; `ρ(a)` and `ρ(b)` are the
/// values of the cells containing `a` and `b`.
pub fn check_segment_bound(
    rho: &GridDensity,
    r: f64,
    a: f64,
    b: f64,
) -> Result<VerificationReport> {
    require_1d(rho)?;
    rho.require_positive()?;
    let grid = rho.grid();
    let (lo, hi) = (
        grid.node_coord(0, 0),
        grid.node_coord(0, grid.cells_per_axis()),
    );
    if !(lo <= a && a < b && b <= hi) {
        return Err(Error::Precondition(format!(
            "need {lo} <= a < b <= {hi}, got a = {a}, b = {b}"
        )));
    }
    if b - a > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "segment length {} exceeds one",
            b - a
        )));
    }
    let values = rho.values();
    let h = grid.cell_width();
    let (ka, kb) = (grid.locate(0, a), grid.locate(0, b));
    let integral = if ka == kb {
        values[ka] * (b - a)
    } else {
        let head = values[ka] * (grid.node_coord(0, ka + 1) - a);
        let tail = values[kb] * (b - grid.node_coord(0, kb));
        let middle = neumaier_sum(values[ka + 1..kb].iter().map(|v| v * h));
        head + middle + tail
    };
    Ok(VerificationReport::new(
        "segment-bound",
        integral,
        0.5 * r * (values[ka] + values[kb]),
        r,
        grid.cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// `∫ Λ(φ) ρ <= (4/3) R² ∫ Λ(φ′) ρ` for a piecewise-linear `φ` vanishing at
/// both endpoints, given by its `m + 1` node values.
pub fn check_cheeger_lambda(
    rho: &GridDensity,
    r: f64,
    test_f: &[f64],
) -> Result<VerificationReport> {
    require_1d(rho)?;
    require_unit_length(rho.grid())?;
    rho.require_positive()?;
    let m = rho.grid().cells_per_axis();
    if test_f.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            found: test_f.len(),
        });
    }
    let (left, right) = (test_f[0], test_f[m]);
    if left.abs() > 1e-15 || right.abs() > 1e-15 {
        return Err(Error::NonzeroEndpoints { left, right });
    }
    let h = rho.grid().cell_width();
    let rv = rho.values();
    let lhs = neumaier_sum((0..m).map(|k| rv[k] * h * lambda_mean(test_f[k], test_f[k + 1])));
    let grad = neumaier_sum((0..m).map(|k| rv[k] * h * lambda((test_f[k + 1] - test_f[k]) / h)));
    let constant = CHEEGER_CONSTANT * r * r;
    Ok(VerificationReport::new(
        "lambda-poincare-1d",
        lhs,
        constant * grad,
        constant,
        m,
        Tolerance::DEFAULT,
    ))
}
