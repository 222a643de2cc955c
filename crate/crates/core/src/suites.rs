//! Seeded generators for randomized verification suites.
//!
//! Every generator is a pure function of its seed. Targets are stored as
//! analytic fields rather than grids, so one pair can be built at several
//! resolutions and compared under refinement.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{build_density, DensitySpec, Grid, GridDensity};
use crate::Result;

/// A smooth function on the cube in unit coordinates `s = (x - origin) / side`:
/// `Σ a sin(kπ s_axis + φ)` plus mixed terms `b sin(π(s_i + s_j) + φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothField {
    pub dim: usize,
    /// `(axis, k, amplitude, phase)`.
    pub terms: Vec<(usize, u32, f64, f64)>,
    /// `(i, j, amplitude, phase)`.
    pub mixed: Vec<(usize, usize, f64, f64)>,
}

impl SmoothField {
    /// Random field with `modes` frequencies per axis and amplitudes
    /// `amplitude / k`.
    pub fn random<R: Rng>(dim: usize, modes: u32, amplitude: f64, rng: &mut R) -> Self {
        let tau = std::f64::consts::TAU;
        let mut terms = Vec::new();
        for axis in 0..dim {
            for k in 1..=modes {
                let a = amplitude * rng.gen_range(-1.0..1.0) / k as f64;
                terms.push((axis, k, a, rng.gen_range(0.0..tau)));
            }
        }
        let mut mixed = Vec::new();
        for i in 0..dim {
            for j in i + 1..dim {
                mixed.push((
                    i,
                    j,
                    amplitude * rng.gen_range(-0.5..0.5),
                    rng.gen_range(0.0..tau),
                ));
            }
        }
        SmoothField { dim, terms, mixed }
    }

    pub fn eval_unit(&self, s: &[f64]) -> f64 {
        let pi = std::f64::consts::PI;
        let single: f64 = self
            .terms
            .iter()
            .map(|&(axis, k, a, phase)| a * (k as f64 * pi * s[axis] + phase).sin())
            .sum();
        let mixed: f64 = self
            .mixed
            .iter()
            .map(|&(i, j, b, phase)| b * (pi * (s[i] + s[j]) + phase).sin())
            .sum();
        single + mixed
    }

    /// Values at the cell centers.
    pub fn values(&self, grid: &Grid) -> Vec<f64> {
        let (origin, side) = (grid.origin(), grid.side());
        (0..grid.num_cells())
            .map(|c| {
                let s: Vec<f64> = grid
                    .center_of_flat(c)
                    .iter()
                    .zip(origin)
                    .map(|(x, o)| (x - o) / side)
                    .collect();
                self.eval_unit(&s)
            })
            .collect()
    }
}

/// A target density `base · exp(field)`, normalized; the base is uniform when
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub base: Option<DensitySpec>,
    pub field: SmoothField,
}

impl TargetSpec {
    pub fn build(&self, grid: &Grid) -> Result<GridDensity> {
        let base = match &self.base {
            Some(spec) => build_density(spec, grid)?.into_values(),
            None => vec![1.0; grid.num_cells()],
        };
        let field = self.field.values(grid);
        let top = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let values = base
            .iter()
            .zip(&field)
            .map(|(b, v)| b * (v - top).exp())
            .collect();
        GridDensity::new(grid.clone(), values)?.normalized()
    }
}

/// A source family and a target, independent of the resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub source: DensitySpec,
    pub target: TargetSpec,
}

impl PairSpec {
    pub fn build(&self, grid: &Grid) -> Result<(GridDensity, GridDensity)> {
        Ok((build_density(&self.source, grid)?, self.target.build(grid)?))
    }
}

/// ConvexPower or ExponentialTilt on the unit cube, positive everywhere.
pub fn random_convex_source<R: Rng>(dim: usize, rng: &mut R) -> DensitySpec {
    if rng.gen_bool(0.5) {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // Keep b + x · v >= 0.1 on [0, 1]^dim.
        let low: f64 = v.iter().map(|x| x.min(0.0)).sum();
        let b = 0.1 - low + rng.gen_range(0.0..1.0);
        DensitySpec::ConvexPower {
            b,
            v,
            p: rng.gen_range(1.0..3.0),
        }
    } else {
        DensitySpec::ExponentialTilt {
            v: (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        }
    }
}

/// A Gaussian restricted to the unit cube with `∂ᵢᵢψ <= 1`, so `R <= e^{1/8}`.
///
/// The inverse covariance is `s((1 - c) Id + c u uᵀ)` with `u ∈ {±1}ⁿ`,
/// `c < 1/2` and `s <= 1`.
pub fn random_gaussian_source<R: Rng>(dim: usize, rng: &mut R) -> DensitySpec {
    let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let u: Vec<f64> = (0..dim)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let c = rng.gen_range(0.0..0.5);
    let s = rng.gen_range(0.5..1.0);
    let inverse_covariance = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| s * (if i == j { 1.0 - c } else { 0.0 } + c * u[i] * u[j]))
                .collect()
        })
        .collect();
    DensitySpec::RestrictedGaussian {
        center,
        inverse_covariance,
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 1D pairs: a convex source and a random smooth positive target.
pub fn convex_source_pairs(count: usize, seed: u64) -> Vec<PairSpec> {
    let mut rng = rng_for(seed);
    (0..count)
        .map(|_| PairSpec {
            source: random_convex_source(1, &mut rng),
            target: TargetSpec {
                base: None,
                field: SmoothField::random(1, 4, 1.0, &mut rng),
            },
        })
        .collect()
}

/// Pairs in `dim` dimensions: a restricted Gaussian source and a target that
/// perturbs it by `exp(field)`.
pub fn gaussian_perturbed_pairs(dim: usize, count: usize, seed: u64) -> Vec<PairSpec> {
    let mut rng = rng_for(seed);
    (0..count)
        .map(|_| {
            let source = random_gaussian_source(dim, &mut rng);
            PairSpec {
                target: TargetSpec {
                    base: Some(source.clone()),
                    field: SmoothField::random(dim, 2, 0.8, &mut rng),
                },
                source,
            }
        })
        .collect()
}

/// Pairs in `dim` dimensions: a convex source and a tilted smooth target.
pub fn convex_tilted_pairs(dim: usize, count: usize, seed: u64) -> Vec<PairSpec> {
    let mut rng = rng_for(seed);
    (0..count)
        .map(|_| PairSpec {
            source: random_convex_source(dim, &mut rng),
            target: TargetSpec {
                base: Some(DensitySpec::ExponentialTilt {
                    v: (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                }),
                field: SmoothField::random(dim, 2, 0.5, &mut rng),
            },
        })
        .collect()
}

/// Node values of a random piecewise-linear function on `m` cells with zero
/// endpoints: a sum of a few random hats.
pub fn random_hat_function<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let hats = rng.gen_range(1..=4);
    let mut out = vec![0.0; m + 1];
    for _ in 0..hats {
        let a = rng.gen_range(0.0..0.8);
        let b = rng.gen_range(a + 0.05..1.0);
        let peak = rng.gen_range(a..b);
        let height = rng.gen_range(-2.0..2.0);
        for (k, v) in out.iter_mut().enumerate() {
            let x = k as f64 / m as f64;
            *v += height
                * if x <= a || x >= b {
                    0.0
                } else if x <= peak {
                    (x - a) / (peak - a)
                } else {
                    (b - x) / (b - peak)
                };
        }
    }
    out[0] = 0.0;
    out[m] = 0.0;
    out
}

/// Smooth test functions `field + polynomial` at the cell centers.
pub fn smooth_test_functions(grid: &Grid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed);
    let n = grid.dim();
    (0..count)
        .map(|_| {
            let field = SmoothField::random(n, 3, 1.0, &mut rng);
            let lin: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad = rng.gen_range(-1.0..1.0);
            field
                .values(grid)
                .into_iter()
                .enumerate()
                .map(|(c, v)| {
                    let x = grid.center_of_flat(c);
                    v + x.iter().zip(&lin).map(|(a, b)| a * b).sum::<f64>()
                        + quad * x.iter().map(|a| a * a).sum::<f64>()
                })
                .collect()
        })
        .collect()
}
