//! Exact discrete optimal transport for small instances.
//!
//! Successive shortest paths with Dijkstra on reduced costs over the dense
//! bipartite residual graph. Flows are real-valued; every augmentation
//! saturates a supply, a demand or a reverse edge.

use std::collections::BTreeMap;
use std::io::Write;

use crate::density::GridDensity;
use crate::{Error, Result};

/// Largest number of atoms per side accepted by [`exact_w2_small`].
pub const MAX_ATOMS: usize = 4096;

const MASS_EPS: f64 = 1e-15;

/// A coupling between the cells of two grid densities.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPlan {
    /// `(source_cell, target_cell, weight)`, sorted, weights summing to one.
    pub entries: Vec<Flow>,
}

impl CouplingPlan {
    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Row sums indexed by source cell.
    pub fn source_marginal(&self, cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; cells];
        for &(s, _, w) in &self.entries {
            out[s] += w;
        }
        out
    }

    /// Column sums indexed by target cell.
    pub fn target_marginal(&self, cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; cells];
        for &(_, t, w) in &self.entries {
            out[t] += w;
        }
        out
    }

    /// Sparse CSV triples with a `source_cell,target_cell,weight` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "source_cell,target_cell,weight")?;
        for (s, t, x) in &self.entries {
            writeln!(w, "{s},{t},{x:e}")?;
        }
        Ok(())
    }
}

/// A nonzero flow `(source, target, weight)`.
pub type Flow = (usize, usize, f64);

/// Minimum-cost coupling of `supply` and `demand` for the row-major cost
/// matrix `cost`. Both mass vectors must have equal totals.
///
/// Returns the optimal cost and the nonzero flows `(i, j, flow)`.
pub fn min_cost_coupling(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<(f64, Vec<Flow>)> {
    let (s, t) = (supply.len(), demand.len());
    if s == 0 || t == 0 {
        return Err(Error::Empty("transport problem".into()));
    }
    if cost.len() != s * t {
        return Err(Error::DimensionMismatch {
            expected: s * t,
            found: cost.len(),
        });
    }
    if supply
        .iter()
        .chain(demand)
        .any(|&x| !(x >= 0.0 && x.is_finite()))
    {
        return Err(Error::Precondition(
            "masses must be finite and nonnegative".into(),
        ));
    }
    let (total_s, total_d): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d) {
        return Err(Error::Precondition(format!(
            "supply {total_s} and demand {total_d} differ"
        )));
    }

    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    let mut flow = vec![0.0; s * t];
    let mut pot_u = vec![0.0; s];
    let mut pot_v: Vec<f64> = (0..t)
        .map(|j| {
            (0..s)
                .map(|i| cost[i * t + j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let reduced =
        |i: usize, j: usize, pu: &[f64], pv: &[f64]| (cost[i * t + j] + pu[i] - pv[j]).max(0.0);

    let mut dist_u = vec![0.0; s];
    let mut dist_v = vec![0.0; t];
    let mut done_u = vec![false; s];
    let mut done_v = vec![false; t];
    let mut pred_v = vec![usize::MAX; t];
    let mut pred_u = vec![usize::MAX; s];
    let eps = MASS_EPS * total_s.max(1e-300);

    while sup.iter().sum::<f64>() > 1e-12 * total_s {
        for i in 0..s {
            dist_u[i] = if sup[i] > eps { 0.0 } else { f64::INFINITY };
            done_u[i] = false;
            pred_u[i] = usize::MAX;
        }
        dist_v.fill(f64::INFINITY);
        done_v.fill(false);
        pred_v.fill(usize::MAX);

        let mut sink = None;
        loop {
            let (mut best, mut node) = (f64::INFINITY, None);
            for i in 0..s {
                if !done_u[i] && dist_u[i] < best {
                    best = dist_u[i];
                    node = Some((true, i));
                }
            }
            for j in 0..t {
                if !done_v[j] && dist_v[j] < best {
                    best = dist_v[j];
                    node = Some((false, j));
                }
            }
            let Some((is_source, k)) = node else { break };
            if is_source {
                done_u[k] = true;
                for j in 0..t {
                    if done_v[j] {
                        continue;
                    }
                    let d = best + reduced(k, j, &pot_u, &pot_v);
                    if d < dist_v[j] {
                        dist_v[j] = d;
                        pred_v[j] = k;
                    }
                }
            } else {
                done_v[k] = true;
                if dem[k] > eps {
                    sink = Some(k);
                    break;
                }
                for i in 0..s {
                    if !done_u[i] && flow[i * t + k] > eps && best < dist_u[i] {
                        // Reverse edges carry flow, so their reduced cost is zero.
                        dist_u[i] = best;
                        pred_u[i] = k;
                    }
                }
            }
        }
        let Some(sink) = sink else { break };
        let cap = dist_v[sink];
        for i in 0..s {
            pot_u[i] += dist_u[i].min(cap);
        }
        for j in 0..t {
            pot_v[j] += dist_v[j].min(cap);
        }

        let mut delta = dem[sink];
        let mut j = sink;
        let root = loop {
            let i = pred_v[j];
            match pred_u[i] {
                usize::MAX => break i,
                prev => {
                    delta = delta.min(flow[i * t + prev]);
                    j = prev;
                }
            }
        };
        delta = delta.min(sup[root]);
        let mut j = sink;
        loop {
            let i = pred_v[j];
            flow[i * t + j] += delta;
            match pred_u[i] {
                usize::MAX => break,
                prev => {
                    flow[i * t + prev] -= delta;
                    j = prev;
                }
            }
        }
        sup[root] -= delta;
        dem[sink] -= delta;
    }

    let mut total = 0.0;
    let mut entries = Vec::new();
    for i in 0..s {
        for j in 0..t {
            let x = flow[i * t + j];
            if x > eps {
                total += x * cost[i * t + j];
                entries.push((i, j, x));
            }
        }
    }
    Ok((total, entries))
}

/// Atoms at the centers of the `refine^n` sub-cells of every cell, each with
/// an equal share of its cell's normalized mass.
fn atoms(d: &GridDensity, refine: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let grid = d.grid();
    let n = grid.dim();
    let h = grid.cell_width();
    let sub = h / refine as f64;
    let per_cell = refine.pow(n as u32);
    let scale = grid.cell_volume() / d.total_mass() / per_cell as f64;
    let mut points = Vec::new();
    let mut masses = Vec::new();
    let mut owner = Vec::new();
    for c in 0..grid.num_cells() {
        let idx = grid.multi_index(c);
        for s in 0..per_cell {
            let mut rest = s;
            let mut p = Vec::with_capacity(n);
            for (axis, &k) in idx.iter().enumerate() {
                let q = rest % refine;
                rest /= refine;
                p.push(grid.node_coord(axis, k) + (q as f64 + 0.5) * sub);
            }
            points.push(p);
            masses.push(d.values()[c] * scale);
            owner.push(c);
        }
    }
    (points, masses, owner)
}

fn solve_atoms<C>(
    f: &GridDensity,
    g: &GridDensity,
    refine: usize,
    pair_cost: C,
) -> Result<(f64, CouplingPlan)>
where
    C: Fn(&[f64], &[f64]) -> f64,
{
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    if refine == 0 {
        return Err(Error::Precondition("refine must be positive".into()));
    }
    for d in [f, g] {
        if !(d.total_mass() > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        let size = d.grid().num_cells() * refine.pow(d.dim() as u32);
        if size > MAX_ATOMS {
            return Err(Error::SizeLimit {
                size,
                limit: MAX_ATOMS,
            });
        }
    }
    let (xs, a, owner_a) = atoms(f, refine);
    let (ys, b, owner_b) = atoms(g, refine);
    let cost: Vec<f64> = xs
        .iter()
        .flat_map(|x| ys.iter().map(|y| pair_cost(x, y)))
        .collect();
    let (total, flows) = min_cost_coupling(&a, &b, &cost)?;
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, j, x) in flows {
        *cells.entry((owner_a[i], owner_b[j])).or_insert(0.0) += x;
    }
    let entries = cells.into_iter().map(|((s, t), w)| (s, t, w)).collect();
    Ok((total, CouplingPlan { entries }))
}

/// Exact squared Wasserstein distance between the normalized densities,
/// each cell split into `refine^n` equal atoms at the sub-cell centers.
///
/// With `refine = 1` this is the transport problem between the cell centers.
/// Replacing cells by atoms biases the value upward relative to the
/// continuous densities; see [`w2_lower_bound`] for a certified bound.
pub fn exact_w2_small(
    f: &GridDensity,
    g: &GridDensity,
    refine: usize,
) -> Result<(f64, CouplingPlan)> {
    solve_atoms(f, g, refine, |x, y| {
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
    })
}

/// A lower bound on `W₂²` between the continuous piecewise-constant
/// densities.
///
/// Each cell is split into `refine^n` sub-cells and the transport problem is
/// solved exactly with the squared distance between sub-cell boxes as cost.
/// Any coupling of the densities induces a coupling of the sub-cells whose
/// box cost is no larger, so the optimum is at most `W₂²`. The bound
/// increases to `W₂²` as `refine` grows.
pub fn w2_lower_bound(
    f: &GridDensity,
    g: &GridDensity,
    refine: usize,
) -> Result<(f64, CouplingPlan)> {
    let gap = 0.5 * (f.grid().cell_width() + g.grid().cell_width()) / refine.max(1) as f64;
    solve_atoms(f, g, refine, |x, y| {
        x.iter()
            .zip(y)
            .map(|(p, q)| ((p - q).abs() - gap).max(0.0).powi(2))
            .sum()
    })
}
