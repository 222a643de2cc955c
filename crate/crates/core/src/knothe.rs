//! Knothe maps on grids.
//!
//! `T(y, r) = (P(y), T_y(r))`, where `P` is the Knothe map between the
//! marginals in the first `n - 1` coordinates and `T_y` is the monotone map
//! from the fiber `r ↦ f(y, r)` to the fiber of `g` over `P(y)`. Since `P(y)`
//! is in general not a cell center, the target fiber is interpolated
//! multilinearly in the base coordinates. One fiber map is built per base
//! cell, from the base cell center.

use std::io::Write;

use rayon::prelude::*;

use crate::density::{Grid, GridDensity};
use crate::numeric::{kolmogorov_sorted, par_sum, sort_floats};
use crate::report::{Tolerance, VerificationReport};
use crate::sampler::sample_grid;
use crate::transport1d::{monotone_map, MonotoneMap1D, QUADRATIC_CONSTANT};
use crate::{Error, Result};

#[derive(Clone, Debug)]
enum Stage {
    Line(Box<MonotoneMap1D>),
    Recursive {
        base: Box<KnotheMap>,
        fibers: Vec<MonotoneMap1D>,
    },
}

/// A triangular transport map on a grid, with its displacement `θ = T - id`
/// at the cell centers.
#[derive(Clone, Debug)]
pub struct KnotheMap {
    grid: Grid,
    stage: Stage,
    displacement: Vec<f64>,
}

fn check_pair(f: &GridDensity, g: &GridDensity) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    f.require_positive()?;
    g.require_positive()
}

/// Builds the Knothe map from `f` to `g`, conditioning on the last coordinate.
pub fn knothe_map(f: &GridDensity, g: &GridDensity) -> Result<KnotheMap> {
    check_pair(f, g)?;
    let grid = f.grid().clone();
    let n = grid.dim();
    if n == 1 {
        let line = monotone_map(f, g)?;
        let displacement = (0..grid.cells_per_axis())
            .map(|k| {
                let x = grid.center_coord(0, k);
                line.eval(x) - x
            })
            .collect();
        return Ok(KnotheMap {
            grid,
            stage: Stage::Line(Box::new(line)),
            displacement,
        });
    }

    let base = knothe_map(&f.marginalize_last()?, &g.marginalize_last()?)?;
    let base_grid = base.grid.clone();
    let fibers: Vec<MonotoneMap1D> = (0..base_grid.num_cells())
        .into_par_iter()
        .map(|b| {
            let y = base_grid.center_of_flat(b);
            let py: Vec<f64> = y.iter().zip(base.theta(b)).map(|(a, t)| a + t).collect();
            monotone_map(&f.fiber_flat(b)?, &g.interpolated_fiber(&py)?)
        })
        .collect::<Result<_>>()?;

    let m = grid.cells_per_axis();
    let mut displacement = vec![0.0; grid.num_cells() * n];
    displacement
        .par_chunks_mut(m * n)
        .enumerate()
        .for_each(|(b, block)| {
            let base_theta = base.theta(b);
            for (r, theta) in block.chunks_exact_mut(n).enumerate() {
                theta[..n - 1].copy_from_slice(base_theta);
                let x = grid.center_coord(n - 1, r);
                theta[n - 1] = fibers[b].eval(x) - x;
            }
        });
    Ok(KnotheMap {
        grid,
        stage: Stage::Recursive {
            base: Box::new(base),
            fibers,
        },
        displacement,
    })
}

impl KnotheMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `θ` at the center of cell `flat`.
    pub fn theta(&self, flat: usize) -> &[f64] {
        let n = self.dim();
        &self.displacement[flat * n..(flat + 1) * n]
    }

    /// All displacement vectors, cell by cell.
    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    /// The map between the marginals, absent in dimension one.
    pub fn base(&self) -> Option<&KnotheMap> {
        match &self.stage {
            Stage::Line(_) => None,
            Stage::Recursive { base, .. } => Some(base),
        }
    }

    /// The monotone maps along the last coordinate, one per base cell. In
    /// dimension one this is the single map on the interval.
    pub fn fibers(&self) -> &[MonotoneMap1D] {
        match &self.stage {
            Stage::Line(line) => std::slice::from_ref(line.as_ref()),
            Stage::Recursive { fibers, .. } => fibers,
        }
    }

    /// `T(x)`. The base map is evaluated exactly at `y`; the fiber map is the
    /// one of the base cell containing `y`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.stage {
            Stage::Line(line) => vec![line.eval(x[0])],
            Stage::Recursive { base, fibers } => {
                let n = self.dim();
                let (y, r) = x.split_at(n - 1);
                let mut out = base.apply(y);
                let b = base.grid.locate_point(y);
                out.push(fibers[b].eval(r[0]));
                out
            }
        }
    }

    /// Strictly increasing node values in every fiber map, recursively.
    pub fn fibers_monotone(&self) -> bool {
        self.fibers()
            .iter()
            .all(|t| t.node_values().windows(2).all(|w| w[1] > w[0]))
            && self.base().is_none_or(KnotheMap::fibers_monotone)
    }

    /// Writes `i0,..,i{n-1},theta0,..,theta{n-1}` rows, one per cell.
    pub fn write_displacement_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        let header: Vec<String> = (0..n)
            .map(|i| format!("i{i}"))
            .chain((0..n).map(|i| format!("theta{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for flat in 0..self.grid.num_cells() {
            let idx = self.grid.multi_index(flat);
            let row: Vec<String> = idx
                .iter()
                .map(|k| k.to_string())
                .chain(self.theta(flat).iter().map(|t| t.to_string()))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `∫ f log g(T(x)) dx` through the chain of conditionals.
    fn log_target(&self) -> f64 {
        match &self.stage {
            Stage::Line(line) => line.log_target_integral(),
            Stage::Recursive { base, fibers } => {
                let w = base.grid.cell_volume();
                base.log_target()
                    + par_sum(fibers.len(), |b| {
                        let t = &fibers[b];
                        w * (t.log_target_integral() - t.source_mass() * t.target_mass().ln())
                    })
            }
        }
    }

    /// Cost through the recursion: the base cost plus the exact cost of every
    /// fiber map. Agrees with [`displacement_cost`] up to discretization.
    pub fn decomposed_cost(&self) -> f64 {
        match &self.stage {
            Stage::Line(line) => line.transport_cost(),
            Stage::Recursive { base, fibers } => {
                let w = base.grid.cell_volume();
                base.decomposed_cost() + par_sum(fibers.len(), |b| w * fibers[b].transport_cost())
            }
        }
    }
}

/// `Σ |θ|² f h^n` over the cells.
pub fn displacement_cost(t: &KnotheMap, f: &GridDensity) -> Result<f64> {
    if f.grid() != t.grid() {
        return Err(Error::GridMismatch);
    }
    let vol = f.grid().cell_volume();
    let values = f.values();
    Ok(par_sum(values.len(), |c| {
        values[c] * vol * t.theta(c).iter().map(|x| x * x).sum::<f64>()
    }))
}

/// `∫ S_T{g, f} = ∫ f log(g(T)/f) - ∇f · θ` with `∇f` by finite differences.
///
/// `g(T(x))` is read through the same chain of conditionals the map was built
/// from: `g(P(y), T_y(r))` is the value at `P(y)` of the marginal, times the
/// normalized (interpolated) target fiber at `T_y(r)`. Along each fiber the
/// logarithm and the last-coordinate drift are integrated exactly over the
/// pieces of the fiber map, so in dimension one this equals the integral in
/// [`crate::transport1d::deficit_1d`]. The drift in the base coordinates uses
/// the cell centers. `t` must be the Knothe map from `f` to `g`.
pub fn s_integral_nd(f: &GridDensity, g: &GridDensity, t: &KnotheMap) -> Result<f64> {
    check_pair(f, g)?;
    if f.grid() != t.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let n = grid.dim();
    let m = grid.cells_per_axis();
    let vol = grid.cell_volume();
    let values = f.values();
    let grad = f.gradient();

    let entropy = par_sum(values.len(), |c| vol * values[c] * values[c].ln());
    let base_drift = par_sum(values.len(), |c| {
        let theta = t.theta(c);
        vol * (0..n - 1).map(|i| grad[i][c] * theta[i]).sum::<f64>()
    });
    let w = vol / grid.cell_width();
    let last = &grad[n - 1];
    let fibers = t.fibers();
    let fiber_drift = par_sum(fibers.len(), |b| {
        w * fibers[b].weighted_displacement_integral(&last[b * m..(b + 1) * m])
    });
    Ok(t.log_target() - entropy - base_drift - fiber_drift)
}

/// [`s_integral_nd`] by the midpoint rule over the cells, with `g(T(x))`
/// interpolated multilinearly at the image of each cell center. First order
/// in `h`; kept as an independent cross-check.
pub fn s_integral_midpoint(f: &GridDensity, g: &GridDensity, t: &KnotheMap) -> Result<f64> {
    check_pair(f, g)?;
    if f.grid() != t.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let grad = f.gradient();
    let vol = grid.cell_volume();
    let n = grid.dim();
    let values = f.values();
    let bad = std::sync::atomic::AtomicBool::new(false);
    let total = par_sum(values.len(), |c| {
        let theta = t.theta(c);
        let image: Vec<f64> = grid
            .center_of_flat(c)
            .iter()
            .zip(theta)
            .map(|(x, d)| x + d)
            .collect();
        let gt = g.interpolate(&image);
        if !(gt > 0.0) {
            bad.store(true, std::sync::atomic::Ordering::Relaxed);
            return 0.0;
        }
        let drift: f64 = (0..n).map(|i| grad[i][c] * theta[i]).sum();
        vol * (values[c] * (gt / values[c]).ln() - drift)
    });
    if bad.into_inner() {
        return Err(Error::Precondition(
            "interpolated g(T(x)) is not positive".into(),
        ));
    }
    Ok(total)
}

/// `∫ S_T{g, f} - (∫f) log(∫g / ∫f)` for the Knothe map `t`.
pub fn tire_bracket(f: &GridDensity, g: &GridDensity, t: &KnotheMap) -> Result<f64> {
    let s = s_integral_nd(f, g, t)?;
    let (mf, mg) = (f.total_mass(), g.total_mass());
    Ok(s - mf * (mg / mf).ln())
}

/// `∫ |T(x) - x|² f <= (40/9) R² · tire_bracket` on the unit cube, with the
/// Knothe map from `f` to `g`.
pub fn check_knothe_transport_cost(
    f: &GridDensity,
    g: &GridDensity,
    r: f64,
) -> Result<VerificationReport> {
    if (f.grid().side() - 1.0).abs() > 1e-12 {
        return Err(Error::IntervalLength(f.grid().side()));
    }
    let t = knothe_map(f, g)?;
    let lhs = displacement_cost(&t, f)?;
    let bracket = tire_bracket(f, g, &t)?;
    let constant = QUADRATIC_CONSTANT * r * r;
    Ok(VerificationReport::new(
        "knothe-transport-cost",
        lhs,
        constant * bracket,
        constant,
        f.grid().cells_per_axis(),
        Tolerance::DEFAULT,
    ))
}

/// Samples `f`, maps the samples by `t` and returns the largest Kolmogorov
/// distance between an image coordinate and the matching marginal of `g`.
pub fn pushforward_error(
    t: &KnotheMap,
    f: &GridDensity,
    g: &GridDensity,
    n_points: usize,
    seed: u64,
) -> Result<f64> {
    check_pair(f, g)?;
    let samples = sample_grid(f, n_points, seed)?;
    let n = t.dim();
    let images: Vec<Vec<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|i| t.apply(samples.point(i)))
        .collect();
    (0..n)
        .map(|axis| {
            let cdf = crate::density::Cdf1D::new(&g.axis_marginal(axis))?;
            let mut xs: Vec<f64> = images.iter().map(|p| p[axis]).collect();
            sort_floats(&mut xs);
            Ok(kolmogorov_sorted(&xs, |x| cdf.eval(x)))
        })
        .try_fold(0.0, |acc: f64, r: Result<f64>| Ok(acc.max(r?)))
}

/// `θ_i = 0` on the facets `x_i = a` and `x_i = a + ℓ`.
///
/// `T` is evaluated exactly at facet points whose other coordinates are cell
/// centers. Passes when the largest `|θ_i|` is at most `2h`.
pub fn check_facet_preservation(t: &KnotheMap) -> VerificationReport {
    let grid = t.grid();
    let n = grid.dim();
    let m = grid.cells_per_axis();
    let faces = m.pow(n as u32 - 1);
    let worst = (0..n)
        .into_par_iter()
        .flat_map(|axis| (0..faces).into_par_iter().map(move |face| (axis, face)))
        .map(|(axis, face)| {
            let mut x = Vec::with_capacity(n);
            let mut rest = face;
            let mut idx = vec![0; n - 1];
            for k in idx.iter_mut().rev() {
                *k = rest % m;
                rest /= m;
            }
            let mut others = idx.into_iter();
            for i in 0..n {
                if i == axis {
                    x.push(0.0);
                } else {
                    x.push(grid.center_coord(i, others.next().expect("n - 1 indices")));
                }
            }
            let mut worst: f64 = 0.0;
            for end in [grid.node_coord(axis, 0), grid.node_coord(axis, m)] {
                x[axis] = end;
                worst = worst.max((t.apply(&x)[axis] - end).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    VerificationReport::new(
        "facet-preservation",
        worst,
        2.0 * grid.cell_width(),
        2.0,
        m,
        Tolerance::EXACT,
    )
}
