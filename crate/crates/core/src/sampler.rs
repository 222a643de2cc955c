//! Seeded sampling from grid densities and from the correlated Gaussian
//! restricted to the centered unit cube.
//!
//! Points are produced in batches of [`BATCH`]. Batch `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so output is identical
//! for any number of worker threads.
//!
//! The grid sampler draws the first coordinate from its marginal and each
//! following coordinate from its conditional given the cells already chosen,
//! then places the point uniformly inside the chosen cell. This is the
//! triangular map from the uniform density applied to uniform samples; it is
//! implemented directly on conditional prefix-sum tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::density::{Cdf1D, Grid, GridDensity};
use crate::numeric::{kolmogorov_sorted, sort_floats};
use crate::{Error, Result};

/// Points per independently seeded batch.
pub const BATCH: usize = 8192;

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// `N` points in `R^dim`, stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    points: Vec<f64>,
    dim: usize,
    seed: u64,
    fingerprint: String,
    acceptance_rate: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    seed: u64,
    fingerprint: &'a str,
    n_points: usize,
    dim: usize,
    acceptance_rate: f64,
}

impl SampleBatch {
    pub fn from_points(
        points: Vec<f64>,
        dim: usize,
        seed: u64,
        fingerprint: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len(),
            });
        }
        Ok(SampleBatch {
            points,
            dim,
            seed,
            fingerprint: fingerprint.into(),
            acceptance_rate: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hash of the sampled density, or a label for analytic constructions.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    /// Coordinate `axis` of every point.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.points().map(|p| p[axis]).collect()
    }

    /// One point per row, coordinates separated by commas.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Sidecar {
            seed: self.seed,
            fingerprint: &self.fingerprint,
            n_points: self.len(),
            dim: self.dim,
            acceptance_rate: self.acceptance_rate,
        })?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv)?))?;
        std::fs::write(&json, self.sidecar_json()?)?;
        Ok((csv, json))
    }
}

/// SHA-256 of the grid header and the cell values.
pub fn density_fingerprint(d: &GridDensity) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(d.grid()).expect("grid serializes"));
    for v in d.values() {
        hasher.update(v.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Conditional prefix-sum tables of a grid density.
#[derive(Clone, Debug)]
pub struct GridSampler {
    grid: Grid,
    /// `levels[k]` holds, for every prefix of `k` cell indices, the running
    /// sums of the mass of the next coordinate's `m` cells.
    levels: Vec<Vec<f64>>,
    fingerprint: String,
}

impl GridSampler {
    pub fn new(d: &GridDensity) -> Result<Self> {
        if !(d.total_mass() > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        let m = d.grid().cells_per_axis();
        let n = d.dim();
        let mut masses = vec![d.values().to_vec()];
        for _ in 1..n {
            let next: Vec<f64> = masses
                .last()
                .expect("nonempty")
                .chunks_exact(m)
                .map(|row| row.iter().sum())
                .collect();
            masses.push(next);
        }
        masses.reverse();
        let levels = masses
            .into_iter()
            .map(|mut level| {
                for row in level.chunks_exact_mut(m) {
                    let mut acc = 0.0;
                    for v in row.iter_mut() {
                        acc += *v;
                        *v = acc;
                    }
                }
                level
            })
            .collect();
        Ok(GridSampler {
            grid: d.grid().clone(),
            levels,
            fingerprint: density_fingerprint(d),
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let m = self.grid.cells_per_axis();
        let h = self.grid.cell_width();
        let mut prefix = 0;
        for (k, level) in self.levels.iter().enumerate() {
            let row = &level[prefix * m..(prefix + 1) * m];
            let u = rng.gen::<f64>() * row[m - 1];
            let j = row.partition_point(|&c| c <= u).min(m - 1);
            let jitter: f64 = rng.gen();
            out[k] = self.grid.origin()[k] + (j as f64 + jitter) * h;
            prefix = prefix * m + j;
        }
    }

    /// `n_points` samples from seed `seed`.
    pub fn sample(&self, n_points: usize, seed: u64) -> SampleBatch {
        let dim = self.grid.dim();
        let batches = n_points.div_ceil(BATCH);
        let parts: Vec<Vec<f64>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let count = BATCH.min(n_points - b * BATCH);
                let mut rng = batch_rng(seed, b);
                let mut pts = vec![0.0; count * dim];
                for p in pts.chunks_exact_mut(dim) {
                    self.draw(&mut rng, p);
                }
                pts
            })
            .collect();
        SampleBatch {
            points: parts.concat(),
            dim,
            seed,
            fingerprint: self.fingerprint.clone(),
            acceptance_rate: 1.0,
        }
    }
}

/// Exact samples from the piecewise-constant density `d`.
pub fn sample_grid(d: &GridDensity, n_points: usize, seed: u64) -> Result<SampleBatch> {
    Ok(GridSampler::new(d)?.sample(n_points, seed))
}

/// Exact samples from the product of one-dimensional grid densities, one
/// factor per coordinate.
///
/// Used when the full grid `m^n` would be too large to tabulate.
pub fn sample_product(factors: &[GridDensity], n_points: usize, seed: u64) -> Result<SampleBatch> {
    if factors.is_empty() {
        return Err(Error::Empty("factor list".into()));
    }
    let samplers = factors
        .iter()
        .map(|f| {
            if f.dim() != 1 {
                return Err(Error::Dimension("one-dimensional factors".into()));
            }
            GridSampler::new(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = factors.len();
    let batches = n_points.div_ceil(BATCH);
    let parts: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(n_points - b * BATCH);
            let mut rng = batch_rng(seed, b);
            let mut pts = vec![0.0; count * dim];
            for p in pts.chunks_exact_mut(dim) {
                for (x, s) in p.iter_mut().zip(&samplers) {
                    s.draw(&mut rng, std::slice::from_mut(x));
                }
            }
            pts
        })
        .collect();
    let mut hasher = Sha256::new();
    for s in &samplers {
        hasher.update(s.fingerprint.as_bytes());
    }
    let fingerprint = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(SampleBatch {
        points: parts.concat(),
        dim,
        seed,
        fingerprint,
        acceptance_rate: 1.0,
    })
}

/// Common scale `1 / (100 √log n)` of the correlated Gaussian construction.
pub fn correlated_scale(n: usize) -> f64 {
    1.0 / (100.0 * (n as f64).ln().sqrt())
}

/// Draws `n_points` accepted samples of `Y = s (X_1 + X_0, ..., X_n + X_0)`,
/// `X_i` independent standard normals and `s = correlated_scale(n)`, conditioned
/// on `[-1/2, 1/2]^n`, and applies `f` to each accepted point.
///
/// Nothing but the results of `f` is stored, so large `n` stays cheap in
/// memory. Returns the results in sample order and the acceptance rate.
pub fn map_correlated_samples<T, F>(
    n: usize,
    n_points: usize,
    seed: u64,
    f: F,
) -> Result<(Vec<T>, f64)>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    if n < 2 {
        return Err(Error::Precondition(format!(
            "dimension {n} must be at least 2"
        )));
    }
    let scale = correlated_scale(n);
    let batches = n_points.div_ceil(BATCH);
    let parts: Vec<(Vec<T>, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH.min(n_points - b * BATCH);
            let mut rng = batch_rng(seed, b);
            let mut y = vec![0.0; n];
            let mut out = Vec::with_capacity(count);
            let mut attempts = 0usize;
            while out.len() < count {
                attempts += 1;
                if attempts > 100 * count + 1000 {
                    return Err(Error::AcceptanceTooLow(out.len() as f64 / attempts as f64));
                }
                let x0: f64 = rng.sample(StandardNormal);
                let mut inside = true;
                for yi in y.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *yi = scale * (xi + x0);
                    inside &= yi.abs() <= 0.5;
                }
                if inside {
                    out.push(f(&y));
                }
            }
            Ok((out, attempts))
        })
        .collect::<Result<_>>()?;
    let attempts: usize = parts.iter().map(|(_, a)| a).sum();
    let results: Vec<T> = parts.into_iter().flat_map(|(v, _)| v).collect();
    let rate = if attempts == 0 {
        1.0
    } else {
        results.len() as f64 / attempts as f64
    };
    if rate < 0.01 {
        return Err(Error::AcceptanceTooLow(rate));
    }
    Ok((results, rate))
}

/// The correlated Gaussian construction as a stored batch.
pub fn sample_correlated_counterexample(
    n: usize,
    n_points: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let (rows, rate) = map_correlated_samples(n, n_points, seed, |y| y.to_vec())?;
    Ok(SampleBatch {
        points: rows.concat(),
        dim: n,
        seed,
        fingerprint: format!("correlated-counterexample(n={n})"),
        acceptance_rate: rate,
    })
}

/// Largest Kolmogorov distance between an axis of `batch` and the matching
/// marginal of `d`.
pub fn empirical_marginal_distance(batch: &SampleBatch, d: &GridDensity) -> Result<f64> {
    if batch.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: batch.dim(),
        });
    }
    if batch.is_empty() {
        return Err(Error::Empty("sample batch".into()));
    }
    (0..d.dim())
        .map(|axis| {
            let cdf = Cdf1D::new(&d.axis_marginal(axis))?;
            let mut xs = batch.axis(axis);
            sort_floats(&mut xs);
            Ok(kolmogorov_sorted(&xs, |x| cdf.eval(x)))
        })
        .try_fold(0.0, |acc: f64, r: Result<f64>| Ok(acc.max(r?)))
}
