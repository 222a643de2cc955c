//! Concentration of measure on the cube.
//!
//! Halfspaces `A = {x · u <= c}` through the median make `A + tBⁿ` explicit:
//! it is `{x · u <= c + t}`. Profiles compare `μ(A + tBⁿ)` with the lower
//! bound `1 - exp(-t²/α²)`. The module also covers Lipschitz tails, the
//! covariance, Poincaré and log-Sobolev inequalities for grid measures, and
//! the scaling experiment for the correlated Gaussian restricted to the cube.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::density::{stencil, Cdf1D, GridDensity};
use crate::numeric::{neumaier_sum, par_sum, sort_floats};
use crate::report::{Tolerance, VerificationReport};
use crate::sampler::{correlated_scale, map_correlated_samples, SampleBatch};
use crate::{Error, Result};

/// Poincaré constant paired with `ℓ² e^{Mℓ²/4}`.
pub const POINCARE_CONSTANT: f64 = 20.0 / 9.0;
/// Log-Sobolev constant paired with `ℓ² e^{Mℓ²/4}`.
pub const LOG_SOBOLEV_CONSTANT: f64 = 160.0 / 9.0;
/// `Φ⁻¹(2/3)` for the standard normal distribution.
pub const PROBIT_TWO_THIRDS: f64 = 0.430_727_299_295_457_6;

/// `α(ℓ, M) = 3ℓ e^{Mℓ²/8}`.
pub fn concentration_alpha(ell: f64, m: f64) -> f64 {
    3.0 * ell * r_from_m(m, ell)
}

/// `R = e^{Mℓ²/8}`, the convexity ratio implied by `∂ᵢᵢψ <= M` on a cube of
/// side `ℓ`.
pub fn r_from_m(m: f64, ell: f64) -> f64 {
    (m * ell * ell / 8.0).exp()
}

/// A measure given either as a grid density or as samples.
#[derive(Clone, Copy, Debug)]
pub enum MeasureRef<'a> {
    Grid(&'a GridDensity),
    Samples(&'a SampleBatch),
}

impl MeasureRef<'_> {
    fn dim(&self) -> usize {
        match self {
            MeasureRef::Grid(d) => d.dim(),
            MeasureRef::Samples(s) => s.dim(),
        }
    }
}

/// `t ↦ μ({x · u <= c + t})` against `1 - exp(-t²/α²)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationProfile {
    pub direction: Vec<f64>,
    /// Median of `x · u`.
    pub median: f64,
    /// `μ(A)`, at least one half.
    pub mass_a: f64,
    pub ts: Vec<f64>,
    pub measured: Vec<f64>,
    /// Monte Carlo standard error of each measured value (zero on grids).
    pub std_error: Vec<f64>,
    pub bound: Vec<f64>,
    pub alpha: f64,
    /// Grid cells per axis, or 0 for samples.
    pub m: usize,
    /// Number of samples, or 0 for grids.
    pub n_points: usize,
}

impl ConcentrationProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,measured,std_error,bound\n");
        for i in 0..self.ts.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                self.ts[i], self.measured[i], self.std_error[i], self.bound[i]
            ));
        }
        out
    }
}

/// `vol({x ∈ box : u · x <= s}) / vol(box)` for the box `lo + [0, h]^n`.
///
/// Inclusion-exclusion over the box vertices; zero components of `u` only
/// scale the volume. Reliable for up to three nonzero components.
fn box_halfspace_fraction(lo: &[f64], h: f64, u: &[f64], s: f64) -> f64 {
    // Reflect so every active component is positive.
    let mut shift = s;
    let mut w = Vec::with_capacity(u.len());
    for (&ui, &li) in u.iter().zip(lo) {
        if ui == 0.0 {
            continue;
        }
        shift -= ui * li;
        if ui < 0.0 {
            // x = li + h - z with z in [0, h]: ui x = ui (li + h) + |ui| z.
            shift -= ui * h;
        }
        w.push(ui.abs());
    }
    if w.is_empty() {
        return if s >= lo.iter().zip(u).map(|(l, x)| l * x).sum::<f64>() {
            1.0
        } else {
            0.0
        };
    }
    let k = w.len();
    let total: f64 = w.iter().sum::<f64>() * h;
    if shift <= 0.0 {
        return 0.0;
    }
    if shift >= total {
        return 1.0;
    }
    let mut acc = 0.0;
    for mask in 0..(1usize << k) {
        let mut t = shift;
        let mut sign = 1.0;
        for (i, wi) in w.iter().enumerate() {
            if mask >> i & 1 == 1 {
                t -= wi * h;
                sign = -sign;
            }
        }
        if t > 0.0 {
            acc += sign * t.powi(k as i32);
        }
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let denom = fact * w.iter().map(|wi| wi * h).product::<f64>();
    (acc / denom).clamp(0.0, 1.0)
}

fn axis_of(u: &[f64]) -> Option<(usize, f64)> {
    let nonzero: Vec<usize> = (0..u.len()).filter(|&i| u[i] != 0.0).collect();
    (nonzero.len() == 1).then(|| (nonzero[0], u[nonzero[0]].signum()))
}

/// Normalized grid measure of `{x · u <= s}`.
fn grid_halfspace_mass(d: &GridDensity, u: &[f64], s: f64) -> f64 {
    let grid = d.grid();
    let h = grid.cell_width();
    let values = d.values();
    let scale = grid.cell_volume() / d.total_mass();
    par_sum(values.len(), |c| {
        if values[c] == 0.0 {
            return 0.0;
        }
        let idx = grid.multi_index(c);
        let lo: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(a, &k)| grid.node_coord(a, k))
            .collect();
        values[c] * scale * box_halfspace_fraction(&lo, h, u, s)
    })
}

fn validate_profile_inputs(dim: usize, u: &[f64], ts: &[f64]) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: u.len(),
        });
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "direction has norm {norm}, expected 1"
        )));
    }
    if ts.is_empty() {
        return Err(Error::Empty("t values".into()));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) || ts[0] < 0.0 {
        return Err(Error::Precondition(
            "t values must be nonnegative and increasing".into(),
        ));
    }
    Ok(())
}

/// Measures `μ({x · u <= c + t})` for each `t`, with `c` the median of `x · u`.
///
/// On a grid the measure is exact for the piecewise-constant density: through
/// the axis marginal when `u` is a signed unit vector, otherwise by
/// box-halfspace volumes (at most three nonzero components of `u`). On
/// samples it is the empirical fraction with standard error `√(p(1-p)/N)`.
pub fn halfspace_profile(
    mu: MeasureRef<'_>,
    u: &[f64],
    ts: &[f64],
    alpha: f64,
) -> Result<ConcentrationProfile> {
    validate_profile_inputs(mu.dim(), u, ts)?;
    let bound: Vec<f64> = ts
        .iter()
        .map(|t| 1.0 - (-(t * t) / (alpha * alpha)).exp())
        .collect();
    match mu {
        MeasureRef::Samples(batch) => {
            if batch.is_empty() {
                return Err(Error::Empty("sample batch".into()));
            }
            let mut proj: Vec<f64> = batch
                .points()
                .map(|p| p.iter().zip(u).map(|(a, b)| a * b).sum())
                .collect();
            sort_floats(&mut proj);
            let n = proj.len();
            let median = proj[n.div_ceil(2) - 1];
            let frac = |s: f64| proj.partition_point(|&x| x <= s) as f64 / n as f64;
            let measured: Vec<f64> = ts.iter().map(|t| frac(median + t)).collect();
            let std_error = measured
                .iter()
                .map(|p| (p * (1.0 - p) / n as f64).sqrt())
                .collect();
            Ok(ConcentrationProfile {
                direction: u.to_vec(),
                median,
                mass_a: frac(median),
                ts: ts.to_vec(),
                measured,
                std_error,
                bound,
                alpha,
                m: 0,
                n_points: n,
            })
        }
        MeasureRef::Grid(d) => {
            let grid = d.grid();
            let (median, mass): (f64, Box<dyn Fn(f64) -> f64 + '_>) =
                if let Some((axis, sign)) = axis_of(u) {
                    let cdf = Cdf1D::new(&d.axis_marginal(axis))?;
                    if sign > 0.0 {
                        let median = cdf.quantile(0.5);
                        (median, Box::new(move |s| cdf.eval(s)))
                    } else {
                        // x · u = -x_axis <= s  ⇔  x_axis >= -s.
                        let median = -cdf.quantile(0.5);
                        (median, Box::new(move |s| 1.0 - cdf.eval(-s)))
                    }
                } else {
                    if u.iter().filter(|&&x| x != 0.0).count() > 3 {
                        return Err(Error::Dimension(
                        "grid halfspace measure with at most three nonzero direction components"
                            .into(),
                    ));
                    }
                    let mass = move |s: f64| grid_halfspace_mass(d, u, s);
                    let (mut lo, mut hi) = (0.0, 0.0);
                    for (i, &ui) in u.iter().enumerate() {
                        let (a, b) = (
                            ui * grid.node_coord(i, 0),
                            ui * grid.node_coord(i, grid.cells_per_axis()),
                        );
                        lo += a.min(b);
                        hi += a.max(b);
                    }
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if mass(mid) >= 0.5 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    (hi, Box::new(mass))
                };
            let measured: Vec<f64> = ts.iter().map(|t| mass(median + t)).collect();
            Ok(ConcentrationProfile {
                direction: u.to_vec(),
                median,
                mass_a: mass(median),
                ts: ts.to_vec(),
                measured,
                std_error: vec![0.0; ts.len()],
                bound,
                alpha,
                m: grid.cells_per_axis(),
                n_points: 0,
            })
        }
    }
}

/// Passes when `measured + 3 SE >= 1 - exp(-t²/α²)` at every `t`; the report
/// shows the `t` with the least room.
pub fn check_concentration(profile: &ConcentrationProfile) -> VerificationReport {
    let worst = (0..profile.ts.len())
        .min_by(|&a, &b| {
            let room =
                |i: usize| profile.measured[i] + 3.0 * profile.std_error[i] - profile.bound[i];
            room(a).total_cmp(&room(b))
        })
        .expect("profiles have at least one t");
    VerificationReport::new(
        "concentration",
        profile.bound[worst],
        profile.measured[worst] + 3.0 * profile.std_error[worst],
        profile.alpha,
        profile.m,
        Tolerance::EXACT,
    )
}

/// Empirical `μ{|F - E F| >= t}` for each `t`, with `E F` the sample mean.
pub fn lipschitz_tail<F>(batch: &SampleBatch, fval: F, ts: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if batch.is_empty() {
        return Err(Error::Empty("sample batch".into()));
    }
    let values: Vec<f64> = batch.points().map(&fval).collect();
    let n = values.len() as f64;
    let mean = neumaier_sum(values.iter().copied()) / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean).abs()).collect();
    sort_floats(&mut dev);
    Ok(ts
        .iter()
        .map(|&t| (dev.len() - dev.partition_point(|&d| d < t)) as f64 / n)
        .collect())
}

/// Fitted sub-Gaussian tail `C exp(-c t²/α²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub c: f64,
    pub big_c: f64,
    pub points_used: usize,
}

/// Least squares of `log tail` against `t²/α²` over the points with a
/// positive tail. `None` with fewer than two such points.
pub fn fit_subgaussian(ts: &[f64], tails: &[f64], alpha: f64) -> Option<TailFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(tails)
        .filter(|(_, &p)| p > 0.0)
        .map(|(t, p)| (t * t / (alpha * alpha), p.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(TailFit {
        c: -slope,
        big_c: (my - slope * mx).exp(),
        points_used: pts.len(),
    })
}

/// Covariance matrix of a grid measure (exact for the piecewise-constant
/// density) or of a sample.
pub fn covariance_matrix(mu: MeasureRef<'_>) -> Result<DMatrix<f64>> {
    let n = mu.dim();
    match mu {
        MeasureRef::Grid(d) => {
            let grid = d.grid();
            let w = grid.cell_volume() / d.total_mass();
            let mut mean = vec![0.0; n];
            let mut second = DMatrix::<f64>::zeros(n, n);
            for (c, &v) in d.values().iter().enumerate() {
                let x = grid.center_of_flat(c);
                let p = v * w;
                for i in 0..n {
                    mean[i] += p * x[i];
                    for j in 0..n {
                        second[(i, j)] += p * x[i] * x[j];
                    }
                }
            }
            let within = grid.cell_width().powi(2) / 12.0;
            Ok(DMatrix::from_fn(n, n, |i, j| {
                second[(i, j)] - mean[i] * mean[j] + if i == j { within } else { 0.0 }
            }))
        }
        MeasureRef::Samples(batch) => {
            if batch.len() < 2 {
                return Err(Error::Empty("need at least two samples".into()));
            }
            let mean = sample_mean(batch);
            let mut cov = DMatrix::<f64>::zeros(n, n);
            for p in batch.points() {
                for i in 0..n {
                    let di = p[i] - mean[i];
                    for j in i..n {
                        cov[(i, j)] += di * (p[j] - mean[j]);
                    }
                }
            }
            let k = (batch.len() - 1) as f64;
            Ok(DMatrix::from_fn(n, n, |i, j| cov[(i.min(j), i.max(j))] / k))
        }
    }
}

fn sample_mean(batch: &SampleBatch) -> Vec<f64> {
    let n = batch.dim();
    let mut mean = vec![0.0; n];
    for p in batch.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    let k = batch.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    mean
}

/// Dimension above which sample covariances use power iteration.
const EXPLICIT_COVARIANCE_MAX_DIM: usize = 64;

fn top_eigenvalue_implicit(batch: &SampleBatch) -> f64 {
    let n = batch.dim();
    let mean = sample_mean(batch);
    let k = (batch.len() - 1) as f64;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; n];
        for p in batch.points() {
            let proj: f64 = p
                .iter()
                .zip(&mean)
                .zip(&v)
                .map(|((x, m), vi)| (x - m) * vi)
                .sum();
            for ((wi, x), m) in w.iter_mut().zip(p).zip(&mean) {
                *wi += proj * (x - m);
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / k;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-10 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Largest eigenvalue of the covariance divided by `α²`.
pub fn covariance_ratio(mu: MeasureRef<'_>, alpha: f64) -> Result<f64> {
    let top = match mu {
        MeasureRef::Samples(batch) if batch.dim() > EXPLICIT_COVARIANCE_MAX_DIM => {
            if batch.len() < 2 {
                return Err(Error::Empty("need at least two samples".into()));
            }
            top_eigenvalue_implicit(batch)
        }
        _ => SymmetricEigen::new(covariance_matrix(mu)?)
            .eigenvalues
            .max(),
    };
    Ok(top / (alpha * alpha))
}

fn probability_weights(mu: &GridDensity) -> Vec<f64> {
    let w = mu.grid().cell_volume() / mu.total_mass();
    mu.values().iter().map(|v| v * w).collect()
}

/// `∫ φ dμ` for a grid function `φ` against the normalized grid measure.
pub fn grid_mean(mu: &GridDensity, phi: &[f64]) -> f64 {
    let p = probability_weights(mu);
    neumaier_sum(p.iter().zip(phi).map(|(a, b)| a * b))
}

/// `∫ (φ - ∫φ dμ)² dμ`.
pub fn grid_variance(mu: &GridDensity, phi: &[f64]) -> f64 {
    let mean = grid_mean(mu, phi);
    let p = probability_weights(mu);
    neumaier_sum(p.iter().zip(phi).map(|(a, b)| a * (b - mean).powi(2)))
}

/// `∫ |∇φ|² dμ` with finite-difference gradients.
pub fn dirichlet_energy(mu: &GridDensity, phi: &[f64]) -> f64 {
    let grid = mu.grid();
    let p = probability_weights(mu);
    let mut sq = vec![0.0; phi.len()];
    for axis in 0..grid.dim() {
        for (s, d) in sq.iter_mut().zip(stencil::axis_derivative(grid, phi, axis)) {
            *s += d * d;
        }
    }
    neumaier_sum(p.iter().zip(&sq).map(|(a, b)| a * b))
}

/// Poincaré and log-Sobolev checks for each test function on a grid measure
/// with `∂ᵢᵢψ <= M` on a cube of side `ℓ`:
///
/// - `Var_μ(φ) <= (20/9) ℓ² e^{Mℓ²/4} ∫|∇φ|² dμ`,
/// - `∫ φ² log φ² dμ <= (160/9) ℓ² e^{Mℓ²/4} ∫|∇φ|² dμ` after scaling to
///   `∫ φ² dμ = 1`; skipped when `φ ≡ 0`.
pub fn poincare_lsi_check(
    mu: &GridDensity,
    m: f64,
    ell: f64,
    test_fs: &[Vec<f64>],
) -> Result<Vec<VerificationReport>> {
    if !(mu.total_mass() > 0.0) {
        return Err(Error::DegenerateDensity);
    }
    let factor = ell * ell * (m * ell * ell / 4.0).exp();
    let cells = mu.grid().cells_per_axis();
    let mut out = Vec::new();
    for phi in test_fs {
        if phi.len() != mu.values().len() {
            return Err(Error::DimensionMismatch {
                expected: mu.values().len(),
                found: phi.len(),
            });
        }
        let energy = dirichlet_energy(mu, phi);
        let pc = POINCARE_CONSTANT * factor;
        out.push(VerificationReport::new(
            "poincare",
            grid_variance(mu, phi),
            pc * energy,
            pc,
            cells,
            Tolerance::DEFAULT,
        ));
        let norm2 = grid_mean(mu, &phi.iter().map(|x| x * x).collect::<Vec<_>>());
        if norm2 > 0.0 {
            let entropy = grid_mean(
                mu,
                &phi.iter()
                    .map(|x| {
                        let s = x * x / norm2;
                        if s > 0.0 {
                            s * s.ln()
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<_>>(),
            );
            let lc = LOG_SOBOLEV_CONSTANT * factor;
            out.push(VerificationReport::new(
                "log-sobolev",
                entropy,
                lc * energy / norm2,
                lc,
                cells,
                Tolerance::DEFAULT,
            ));
        }
    }
    Ok(out)
}

/// Distance from `y ∈ [-1/2, 1/2]^n` to `A = {x ∈ [-1/2, 1/2]^n : Σ xᵢ <= 0}`.
pub fn distance_to_negative_halfcube(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let s: f64 = y.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    let shift = s / n;
    if y.iter().all(|&v| (v - shift).abs() <= 0.5) {
        return s / n.sqrt();
    }
    // Projection is clamp(y - λ) with Σ clamp(y - λ) = 0.
    let clamped_sum = |lambda: f64| {
        y.iter()
            .map(|&v| (v - lambda).clamp(-0.5, 0.5))
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (
        0.0,
        y.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.5,
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamped_sum(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    y.iter()
        .map(|&v| (v - (v - hi).clamp(-0.5, 0.5)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// One dimension of the scaling experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Largest `t` with empirical `μ(A + tBⁿ) <= 2/3`.
    pub t_star: f64,
    /// `κ √n / √log n` with `κ` fitted at the smallest `n`.
    pub predicted: f64,
    /// The Gaussian value `Φ⁻¹(2/3) √(n+1) / (100 √log n)`, ignoring the
    /// conditioning on the cube.
    pub gaussian_oracle: f64,
    /// Empirical `μ(A)`.
    pub mass_a: f64,
    pub acceptance_rate: f64,
    /// Empirical variance of `Σ yᵢ / √n`, the covariance along the diagonal.
    pub diagonal_variance: f64,
    /// `(n + 1) s²`, the top eigenvalue of the unconditioned covariance.
    pub predicted_top_eigenvalue: f64,
    /// `max ∂ᵢᵢψ = n / ((n + 1) s²)` of the Gaussian potential.
    pub m_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub kappa: f64,
    /// Least-squares slope of `log t_star` against `log n`.
    pub slope: f64,
    pub n_points: usize,
    pub seed: u64,
}

/// For each `n`, samples the correlated Gaussian on `[-1/2, 1/2]^n`, takes
/// `A = {Σ xᵢ <= 0}` and finds the largest `t` with `μ(A + tBⁿ) <= 2/3`.
pub fn counterexample_scaling(ns: &[usize], n_points: usize, seed: u64) -> Result<ScalingTable> {
    if ns.is_empty() {
        return Err(Error::Empty("dimension list".into()));
    }
    if n_points < 1000 {
        return Err(Error::Precondition(format!(
            "{n_points} samples are too few for a 2/3 quantile to three digits"
        )));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (mut pairs, rate) =
            map_correlated_samples(n, n_points, seed ^ (n as u64).rotate_left(32), |y| {
                let s: f64 = y.iter().sum();
                (distance_to_negative_halfcube(y), s)
            })?;
        let k = pairs.len() as f64;
        let mass_a = pairs.iter().filter(|p| p.1 <= 0.0).count() as f64 / k;
        let mean_s = neumaier_sum(pairs.iter().map(|p| p.1)) / k;
        let diagonal_variance =
            neumaier_sum(pairs.iter().map(|p| (p.1 - mean_s).powi(2))) / ((k - 1.0) * n as f64);
        let mut dists: Vec<f64> = pairs.drain(..).map(|p| p.0).collect();
        sort_floats(&mut dists);
        let idx = (2 * dists.len() / 3).min(dists.len() - 1);
        let s2 = correlated_scale(n).powi(2);
        let nf = n as f64;
        rows.push(ScalingRow {
            n,
            t_star: dists[idx],
            predicted: 0.0,
            gaussian_oracle: PROBIT_TWO_THIRDS * (nf + 1.0).sqrt() / (100.0 * nf.ln().sqrt()),
            mass_a,
            acceptance_rate: rate,
            diagonal_variance,
            predicted_top_eigenvalue: (nf + 1.0) * s2,
            m_hat: nf / ((nf + 1.0) * s2),
        });
    }
    let shape = |n: usize| (n as f64).sqrt() / (n as f64).ln().sqrt();
    let first = rows.iter().min_by_key(|r| r.n).expect("nonempty");
    let kappa = first.t_star / shape(first.n);
    for r in rows.iter_mut() {
        r.predicted = kappa * shape(r.n);
    }
    let slope = if rows.len() >= 2 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| ((r.n as f64).ln(), r.t_star.ln()))
            .collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };
    Ok(ScalingTable {
        rows,
        kappa,
        slope,
        n_points,
        seed,
    })
}

/// Checks on a scaling table: the slope lies in `[0.40, 0.60]`, each `t_star`
/// is within 15% of the Gaussian value, and `|μ(A) - 1/2| <= 3/√N`.
pub fn scaling_reports(table: &ScalingTable) -> Vec<VerificationReport> {
    let mut out = vec![
        VerificationReport::new(
            "scaling-slope-min",
            0.40,
            table.slope,
            0.40,
            0,
            Tolerance::EXACT,
        ),
        VerificationReport::new(
            "scaling-slope-max",
            table.slope,
            0.60,
            0.60,
            0,
            Tolerance::EXACT,
        ),
    ];
    let band = 3.0 / (table.n_points as f64).sqrt();
    for r in &table.rows {
        out.push(VerificationReport::new(
            format!("scaling-gaussian-oracle-n{}", r.n),
            (r.t_star / r.gaussian_oracle - 1.0).abs(),
            0.15,
            0.15,
            0,
            Tolerance::EXACT,
        ));
        out.push(VerificationReport::new(
            format!("scaling-median-mass-n{}", r.n),
            (r.mass_a - 0.5).abs(),
            band,
            3.0,
            0,
            Tolerance::EXACT,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{build_density, DensitySpec, Grid};
    use crate::sampler::sample_grid;

    fn uniform(n: usize, m: usize) -> GridDensity {
        build_density(&DensitySpec::Uniform, &Grid::unit(n, m).unwrap()).unwrap()
    }

    #[test]
    fn alpha_and_r_examples() {
        assert_eq!(concentration_alpha(1.0, 0.0), 3.0);
        assert!((concentration_alpha(1.0, 8.0 * std::f64::consts::LN_2) - 6.0).abs() < 1e-12);
        assert_eq!(concentration_alpha(2.0, 0.0), 6.0);
        assert_eq!(r_from_m(0.0, 1.0), 1.0);
        assert!((r_from_m(1.0, 1.0) - 1.133_148_453_066_826_3).abs() < 1e-12);
        assert!((r_from_m(3.0, 2.0) - r_from_m(12.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_interval_profile() {
        let d = uniform(1, 64);
        let p = halfspace_profile(MeasureRef::Grid(&d), &[1.0], &[0.0, 0.2, 0.6], 3.0).unwrap();
        assert!((p.median - 0.5).abs() < 1e-12);
        assert!((p.measured[0] - 0.5).abs() < 1e-12);
        assert!((p.measured[1] - 0.7).abs() < 1e-12);
        assert_eq!(p.measured[2], 1.0);
        assert!((p.bound[1] - (1.0 - (-0.04f64 / 9.0).exp())).abs() < 1e-15);
        assert!(check_concentration(&p).pass);
        let neg = halfspace_profile(MeasureRef::Grid(&d), &[-1.0], &[0.2], 3.0).unwrap();
        assert!((neg.measured[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn box_fraction_matches_geometry() {
        // Unit square cut by x + y <= 1 keeps half.
        let u = [1.0, 1.0];
        assert!((box_halfspace_fraction(&[0.0, 0.0], 1.0, &u, 1.0) - 0.5).abs() < 1e-15);
        assert!((box_halfspace_fraction(&[0.0, 0.0], 1.0, &u, 0.5) - 0.125).abs() < 1e-15);
        assert!((box_halfspace_fraction(&[0.0, 0.0], 1.0, &[1.0, -1.0], 0.0) - 0.5).abs() < 1e-15);
        // Unit cube cut by x + y + z <= 1: a corner simplex of volume 1/6.
        let f = box_halfspace_fraction(&[0.0; 3], 1.0, &[1.0, 1.0, 1.0], 1.0);
        assert!((f - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            box_halfspace_fraction(&[0.0, 0.0], 1.0, &[1.0, 0.0], 0.25),
            0.25
        );
    }

    #[test]
    fn diagonal_profile_on_uniform_square() {
        let d = uniform(2, 32);
        let u = [std::f64::consts::FRAC_1_SQRT_2; 2];
        let ts: Vec<f64> = (0..=10).map(|i| 0.08 * i as f64).collect();
        let p = halfspace_profile(MeasureRef::Grid(&d), &u, &ts, 3.0).unwrap();
        assert!((p.median - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        // μ(x + y <= 1 + t√2) = 1 - (1 - t√2)²/2.
        for (t, m) in p.ts.iter().zip(&p.measured) {
            let a = (1.0 - t * std::f64::consts::SQRT_2).max(0.0);
            assert!((m - (1.0 - a * a / 2.0)).abs() < 1e-9);
        }
        assert!(p.measured.windows(2).all(|w| w[1] >= w[0]));
        assert!(check_concentration(&p).pass);
    }

    #[test]
    fn small_alpha_fails() {
        let d = uniform(2, 16);
        let ts: Vec<f64> = (1..=20).map(|i| 0.025 * i as f64).collect();
        let p = halfspace_profile(MeasureRef::Grid(&d), &[1.0, 0.0], &ts, 0.1).unwrap();
        assert!(!check_concentration(&p).pass);
    }

    #[test]
    fn sample_profile_has_standard_errors() {
        let d = uniform(2, 8);
        let s = sample_grid(&d, 50_000, 2).unwrap();
        let p = halfspace_profile(MeasureRef::Samples(&s), &[1.0, 0.0], &[0.0, 0.2], 3.0).unwrap();
        assert!(p.mass_a >= 0.5);
        assert!((p.measured[1] - 0.7).abs() < 4.0 * p.std_error[1]);
        assert!(p.std_error[1] > 0.0);
    }

    #[test]
    fn profile_input_validation() {
        let d = uniform(2, 4);
        assert!(halfspace_profile(MeasureRef::Grid(&d), &[1.0, 1.0], &[0.1], 3.0).is_err());
        assert!(halfspace_profile(MeasureRef::Grid(&d), &[1.0, 0.0], &[], 3.0).is_err());
        assert!(halfspace_profile(MeasureRef::Grid(&d), &[1.0], &[0.1], 3.0).is_err());
    }

    #[test]
    fn lipschitz_tails() {
        let d = uniform(2, 8);
        let s = sample_grid(&d, 20_000, 4).unwrap();
        let ts = [0.0, 0.1, 0.2, 0.3, 0.4];
        let tails = lipschitz_tail(&s, |p| p[0], &ts).unwrap();
        assert_eq!(tails[0], 1.0);
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        let fit = fit_subgaussian(&ts, &tails, 3.0).unwrap();
        assert!(fit.c > 0.0);
        let constant = lipschitz_tail(&s, |_| 1.0, &[0.1, 0.5]).unwrap();
        assert_eq!(constant, vec![0.0, 0.0]);
        let far = lipschitz_tail(&s, |p| (p[0].powi(2) + p[1].powi(2)).sqrt(), &[2.0]).unwrap();
        assert_eq!(far, vec![0.0]);
    }

    #[test]
    fn uniform_covariance() {
        let d = uniform(2, 16);
        let ratio = covariance_ratio(MeasureRef::Grid(&d), 3.0).unwrap();
        assert!((ratio - 1.0 / 108.0).abs() < 1e-12);
        let cov = covariance_matrix(MeasureRef::Grid(&d)).unwrap();
        assert!(cov[(0, 1)].abs() < 1e-15);
        let s = sample_grid(&d, 100_000, 8).unwrap();
        let r = covariance_ratio(MeasureRef::Samples(&s), 3.0).unwrap();
        assert!((r - 1.0 / 108.0).abs() < 5e-4);
    }

    #[test]
    fn power_iteration_matches_explicit() {
        let n = 70;
        let s = crate::sampler::sample_correlated_counterexample(n, 5_000, 1).unwrap();
        let implicit = covariance_ratio(MeasureRef::Samples(&s), 1.0).unwrap();
        let explicit = SymmetricEigen::new(covariance_matrix(MeasureRef::Samples(&s)).unwrap())
            .eigenvalues
            .max();
        assert!((implicit - explicit).abs() < 1e-6 * explicit);
        let predicted = (n as f64 + 1.0) * correlated_scale(n).powi(2);
        assert!((implicit / predicted - 1.0).abs() < 0.1);
    }

    #[test]
    fn cosine_anchor() {
        let m = 1024;
        let d = uniform(1, m);
        let phi: Vec<f64> = (0..m)
            .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / m as f64).cos())
            .collect();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((grid_variance(&d, &phi) - 0.5).abs() < 1e-3);
        assert!((dirichlet_energy(&d, &phi) - pi2 / 2.0).abs() < 1e-3);
        let reports = poincare_lsi_check(&d, 0.0, 1.0, &[phi]).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.pass));
        assert!((reports[0].rhs - 20.0 / 9.0 * pi2 / 2.0).abs() < 1e-2);
    }

    #[test]
    fn constant_and_zero_test_functions() {
        let d = uniform(2, 8);
        let reports = poincare_lsi_check(&d, 0.0, 1.0, &[vec![3.0; 64], vec![0.0; 64]]).unwrap();
        // Constant: both checks, with zero left-hand sides. Zero: Poincaré only.
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.pass && r.lhs.abs() < 1e-12));
    }

    #[test]
    fn distance_to_halfcube() {
        assert_eq!(distance_to_negative_halfcube(&[-0.1, 0.05]), 0.0);
        let d = distance_to_negative_halfcube(&[0.1, 0.3]);
        assert!((d - 0.4 / 2f64.sqrt()).abs() < 1e-15);
        // Projection hits the box: y = (0.5, 0.5, -0.5), λ with clamp sum zero.
        let y = [0.5, 0.5, -0.45];
        let d = distance_to_negative_halfcube(&y);
        // Minimizer x = (0.25, 0.25, -0.5).
        let expected = (2.0 * 0.25f64.powi(2) + 0.05f64.powi(2)).sqrt();
        assert!((d - expected).abs() < 1e-9, "{d} {expected}");
    }

    #[test]
    fn small_scaling_run() {
        let table = counterexample_scaling(&[64, 256], 20_000, 5).unwrap();
        assert_eq!(table.rows.len(), 2);
        for r in &table.rows {
            assert!((r.t_star / r.gaussian_oracle - 1.0).abs() < 0.1, "{r:?}");
            assert!((r.mass_a - 0.5).abs() < 3.0 / (20_000f64).sqrt());
            assert!((r.diagonal_variance / r.predicted_top_eigenvalue - 1.0).abs() < 0.1);
        }
        assert!((table.rows[0].predicted - table.rows[0].t_star).abs() < 1e-15);
        assert!(table.slope > 0.3 && table.slope < 0.6);
        assert_eq!(scaling_reports(&table).len(), 6);
    }
}
