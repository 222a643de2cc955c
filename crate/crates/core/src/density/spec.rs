use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Grid, GridDensity};
use crate::{Error, Result};

/// Analytic density families, serialized as `{"variant": ..., parameters...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum DensitySpec {
    /// `exp(-(x - c)ᵀ A (x - c) / 2)` restricted to the cube.
    RestrictedGaussian {
        center: Vec<f64>,
        inverse_covariance: Vec<Vec<f64>>,
    },
    /// `exp(x · v)`.
    ExponentialTilt {
        v: Vec<f64>,
    },
    /// `(b + x · v)^p` with `p >= 1`; log-concave and convex where positive.
    ConvexPower {
        b: f64,
        v: Vec<f64>,
        p: f64,
    },
    Uniform,
    /// Centered Gaussian with covariance `scale² (Id + J)`, `J` the all-ones
    /// matrix, restricted to the cube.
    CorrelatedGaussian {
        n: usize,
        scale: f64,
    },
    /// Raw cell values in grid order.
    CustomGrid {
        values: Vec<f64>,
    },
}

impl DensitySpec {
    /// Standard Gaussian centered at the origin, identity inverse covariance.
    pub fn standard_gaussian(dim: usize) -> Self {
        DensitySpec::RestrictedGaussian {
            center: vec![0.0; dim],
            inverse_covariance: identity(dim),
        }
    }

    /// The correlated Gaussian with `scale = 1 / (100 √log n)`.
    pub fn correlated_counterexample(n: usize) -> Self {
        DensitySpec::CorrelatedGaussian {
            n,
            scale: 1.0 / (100.0 * (n as f64).ln().sqrt()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensitySpec::RestrictedGaussian { .. } => "RestrictedGaussian",
            DensitySpec::ExponentialTilt { .. } => "ExponentialTilt",
            DensitySpec::ConvexPower { .. } => "ConvexPower",
            DensitySpec::Uniform => "Uniform",
            DensitySpec::CorrelatedGaussian { .. } => "CorrelatedGaussian",
            DensitySpec::CustomGrid { .. } => "CustomGrid",
        }
    }

    /// One-dimensional factors when the density is a product over the axes:
    /// uniform, exponential tilts and Gaussians with diagonal inverse
    /// covariance.
    pub fn axis_factors(&self, dim: usize) -> Option<Vec<DensitySpec>> {
        match self {
            DensitySpec::Uniform => Some(vec![DensitySpec::Uniform; dim]),
            DensitySpec::ExponentialTilt { v } if v.len() == dim => Some(
                v.iter()
                    .map(|&vi| DensitySpec::ExponentialTilt { v: vec![vi] })
                    .collect(),
            ),
            DensitySpec::RestrictedGaussian {
                center,
                inverse_covariance,
            } if center.len() == dim && inverse_covariance.len() == dim => {
                let diagonal = inverse_covariance.iter().enumerate().all(|(i, row)| {
                    row.len() == dim && row.iter().enumerate().all(|(j, &a)| i == j || a == 0.0)
                });
                diagonal.then(|| {
                    (0..dim)
                        .map(|i| DensitySpec::RestrictedGaussian {
                            center: vec![center[i]],
                            inverse_covariance: vec![vec![inverse_covariance[i][i]]],
                        })
                        .collect()
                })
            }
            _ => None,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        let n = grid.dim();
        let check_len = |what: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{what} has length {len}, grid dimension is {n}"
                )))
            }
        };
        match self {
            DensitySpec::RestrictedGaussian {
                center,
                inverse_covariance,
            } => {
                check_len("center", center.len())?;
                check_len("inverse_covariance", inverse_covariance.len())?;
                for row in inverse_covariance {
                    check_len("inverse_covariance row", row.len())?;
                }
                let a = DMatrix::from_fn(n, n, |i, j| inverse_covariance[i][j]);
                let scale = a.amax().max(1.0);
                if (&a - a.transpose()).amax() > 1e-12 * scale {
                    return Err(Error::InvalidSpec(
                        "inverse covariance is not symmetric".into(),
                    ));
                }
                let min_eig = SymmetricEigen::new(a).eigenvalues.min();
                if min_eig < -1e-12 * scale {
                    return Err(Error::InvalidSpec(format!(
                        "inverse covariance is not positive semidefinite (eigenvalue {min_eig})"
                    )));
                }
                Ok(())
            }
            DensitySpec::ExponentialTilt { v } => check_len("v", v.len()),
            DensitySpec::ConvexPower { b, v, p } => {
                check_len("v", v.len())?;
                if !(*p >= 1.0) || !b.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "ConvexPower needs p >= 1, got {p}"
                    )));
                }
                Ok(())
            }
            DensitySpec::Uniform => Ok(()),
            DensitySpec::CorrelatedGaussian { n: k, scale } => {
                if *k != n {
                    return Err(Error::InvalidSpec(format!(
                        "CorrelatedGaussian n = {k} but grid dimension is {n}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(Error::InvalidSpec("scale must be positive".into()));
                }
                Ok(())
            }
            DensitySpec::CustomGrid { values } => {
                if values.len() != grid.num_cells() {
                    return Err(Error::InvalidSpec(format!(
                        "CustomGrid has {} values, grid has {} cells",
                        values.len(),
                        grid.num_cells()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Log of the unnormalized density at `x`; `None` where it is not positive.
    fn log_value(&self, x: &[f64]) -> Option<f64> {
        match self {
            DensitySpec::RestrictedGaussian {
                center,
                inverse_covariance,
            } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let q: f64 = inverse_covariance
                    .iter()
                    .zip(&d)
                    .map(|(row, di)| di * row.iter().zip(&d).map(|(a, dj)| a * dj).sum::<f64>())
                    .sum();
                Some(-0.5 * q)
            }
            DensitySpec::ExponentialTilt { v } => Some(dot(x, v)),
            DensitySpec::ConvexPower { b, v, p } => {
                let base = b + dot(x, v);
                (base > 0.0).then(|| p * base.ln())
            }
            DensitySpec::Uniform => Some(0.0),
            DensitySpec::CorrelatedGaussian { n, scale } => {
                let sq: f64 = x.iter().map(|a| a * a).sum();
                let s: f64 = x.iter().sum();
                Some(-(sq - s * s / (*n as f64 + 1.0)) / (2.0 * scale * scale))
            }
            DensitySpec::CustomGrid { .. } => unreachable!("custom values are not evaluated"),
        }
    }
}

/// Evaluates `spec` at the cell centers of `grid` and normalizes to mass one.
pub fn build_density(spec: &DensitySpec, grid: &Grid) -> Result<GridDensity> {
    spec.validate(grid)?;
    if let DensitySpec::CustomGrid { values } = spec {
        return GridDensity::new(grid.clone(), values.clone())?.normalized();
    }
    let logs: Vec<Option<f64>> = (0..grid.num_cells())
        .into_par_iter()
        .map(|i| spec.log_value(&grid.center_of_flat(i)))
        .collect();
    if let Some(bad) = logs.iter().position(|l| l.is_none()) {
        return Err(Error::InvalidSpec(format!(
            "{} is not positive at cell center {:?}",
            spec.name(),
            grid.center_of_flat(bad)
        )));
    }
    let logs: Vec<f64> = logs.into_iter().flatten().collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = logs.into_iter().map(|l| (l - top).exp()).collect();
    GridDensity::new(grid.clone(), values)?.normalized()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
