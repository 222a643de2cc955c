//! The verification suites behind each subcommand.

use std::f64::consts::{LN_2, PI};

use cube_transport::concentration::{
    check_concentration, concentration_alpha, counterexample_scaling, covariance_ratio,
    dirichlet_energy, fit_subgaussian, grid_variance, halfspace_profile, lipschitz_tail,
    poincare_lsi_check, r_from_m, scaling_reports, ConcentrationProfile, MeasureRef,
};
use cube_transport::density::{
    build_density, check_midpoint_log_concavity, estimate_axis_convexity_ratio,
    estimate_diag_second_derivative_bound, DensitySpec, Grid, GridDensity,
};
use cube_transport::functionals::{
    check_knothe_le_entropy, check_tire_le_entropy, check_w2_le_knothe, legendre_tire_bound,
    relative_entropy, LOG_CONCAVITY_TOL,
};
use cube_transport::knothe::{
    check_facet_preservation, check_knothe_transport_cost, displacement_cost, knothe_map,
    pushforward_error, tire_bracket,
};
use cube_transport::sampler::{sample_product, SampleBatch};
use cube_transport::suites::{
    convex_source_pairs, convex_tilted_pairs, gaussian_perturbed_pairs, random_gaussian_source,
    random_hat_function, smooth_test_functions, PairSpec,
};
use cube_transport::transport1d::{
    check_cheeger_lambda, check_lambda_deficit, check_log_inequality, check_quadratic_transport,
    check_segment_bound, deficit_1d, lambda, monotone_map, LOG_COEFFICIENT,
};
use cube_transport::{Result, Tolerance, VerificationReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

/// Cells per axis of the one-dimensional factors used for product sampling.
const FACTOR_CELLS: usize = 1024;

/// A concentration profile with a label for file names and plots.
#[derive(Clone, Debug)]
pub struct NamedProfile {
    pub label: String,
    pub profile: ConcentrationProfile,
}

/// Everything a suite produces.
#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<VerificationReport>,
    /// Reported quantities that are not asserted.
    pub diagnostics: Map<String, Value>,
    pub profiles: Vec<NamedProfile>,
}

impl Outcome {
    fn push(&mut self, r: VerificationReport) {
        self.reports.push(r);
    }

    fn note(&mut self, key: &str, value: Value) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn merge(&mut self, other: Outcome) {
        self.reports.extend(other.reports);
        self.diagnostics.extend(other.diagnostics);
        self.profiles.extend(other.profiles);
    }
}

/// `|value - expected| <= tol` as a report.
fn closeness(name: &str, value: f64, expected: f64, tol: f64, m: usize) -> VerificationReport {
    VerificationReport::new(
        name,
        (value - expected).abs(),
        tol,
        tol,
        m,
        Tolerance::EXACT,
    )
}

fn seed_for(cfg: &RunConfig, salt: u64) -> u64 {
    cfg.monte_carlo.seed.expect("seed resolved before running")
        ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn user_pair(cfg: &RunConfig, grid: &Grid) -> Result<Option<(GridDensity, GridDensity)>> {
    match (&cfg.source, &cfg.target) {
        (Some(s), Some(t)) => Ok(Some((build_density(s, grid)?, build_density(t, grid)?))),
        _ => Ok(None),
    }
}

fn unit_grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::new(cfg.grid.n, cfg.grid.m, vec![0.0; cfg.grid.n], cfg.grid.ell)
}

/// Structural constants of the configured source density.
pub fn density_check(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let grid = unit_grid(cfg)?;
    let spec = cfg
        .source
        .clone()
        .unwrap_or_else(|| DensitySpec::standard_gaussian(cfg.grid.n));
    let d = build_density(&spec, &grid)?;
    let r_hat = estimate_axis_convexity_ratio(&d)?;
    let m_hat = estimate_diag_second_derivative_bound(&d)?;
    let (log_concave, worst) = check_midpoint_log_concavity(&d, LOG_CONCAVITY_TOL)?;
    let m = grid.cells_per_axis();
    out.push(VerificationReport::new(
        "log-concavity",
        worst,
        LOG_CONCAVITY_TOL,
        LOG_CONCAVITY_TOL,
        m,
        Tolerance::EXACT,
    ));
    let bound = r_from_m(m_hat, cfg.grid.ell);
    out.push(VerificationReport::new(
        "convexity-ratio-from-curvature",
        r_hat,
        bound,
        bound,
        m,
        Tolerance::DEFAULT,
    ));
    out.note(
        "density",
        json!({
            "spec": spec,
            "total_mass": d.total_mass(),
            "r_hat": r_hat,
            "m_hat": m_hat,
            "log_concave": log_concave,
            "worst_midpoint_violation": worst,
        }),
    );
    Ok(out)
}

/// The closed-form anchor, the randomized quadratic-cost suite with a
/// refinement comparison, and the Λ, segment, Λ-Poincaré and logarithm
/// checks.
pub fn verify_1d(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();

    let m = 1024;
    let grid = Grid::unit(1, m)?;
    let f = build_density(&DensitySpec::Uniform, &grid)?;
    let g = build_density(
        &DensitySpec::ConvexPower {
            b: 0.0,
            v: vec![2.0],
            p: 1.0,
        },
        &grid,
    )?;
    let t = monotone_map(&f, &g)?;
    let entropy = relative_entropy(&g, &f)?;
    let deficit = deficit_1d(&f, &g, &t)?;
    out.push(closeness("anchor-map-value", t.eval(0.25), 0.5, 1e-3, m));
    out.push(closeness(
        "anchor-transport-cost",
        t.transport_cost(),
        1.0 / 30.0,
        1e-3,
        m,
    ));
    out.push(closeness(
        "anchor-relative-entropy",
        entropy,
        LN_2 - 0.5,
        1e-3,
        m,
    ));
    out.push(closeness(
        "anchor-deficit-equals-entropy",
        deficit,
        entropy,
        1e-3,
        m,
    ));
    out.push(check_quadratic_transport(&f, &g, 1.0)?);
    out.push(check_lambda_deficit(&f, &g)?);

    let pairs = convex_source_pairs(cfg.suite.line_pairs, seed_for(cfg, 1));
    let coarse = Grid::unit(1, 256)?;
    let fine = Grid::unit(1, 512)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg, 2));
    let mut worst_ratio = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let mut ratios = [0.0; 2];
        for (k, grid) in [&coarse, &fine].into_iter().enumerate() {
            let (f, g) = pair.build(grid)?;
            let r_hat = estimate_axis_convexity_ratio(&f)?;
            let report = check_quadratic_transport(&f, &g, r_hat)?;
            ratios[k] = report.lhs / report.rhs;
            out.push(report);
        }
        // lhs/rhs at 512 cells is no larger than at 256, within tolerance.
        out.push(VerificationReport::new(
            "quadratic-transport-1d-refinement",
            ratios[1],
            ratios[0],
            1.0,
            512,
            Tolerance::DEFAULT,
        ));
        worst_ratio.push(ratios[1]);

        let (f, g) = pair.build(&coarse)?;
        out.push(check_lambda_deficit(&f, &g)?);
        let r_hat = estimate_axis_convexity_ratio(&f)?;
        let a = rng.gen_range(0.0..0.9);
        let b = rng.gen_range(a + 0.01..=1.0);
        out.push(check_segment_bound(&f, r_hat, a, b)?);
        let phi = random_hat_function(256, &mut rng);
        out.push(check_cheeger_lambda(&f, r_hat, &phi)?);
    }
    out.note(
        "quadratic_suite",
        json!({
            "pairs": pairs.len(),
            "max_lhs_over_rhs_at_512": worst_ratio.iter().copied().fold(0.0, f64::max),
        }),
    );

    out.push(check_log_inequality(10_000, 1e-3, 1e3)?);
    out.push(VerificationReport::new(
        "log-inequality-at-two",
        LOG_COEFFICIENT * lambda(1.0),
        1.0 - LN_2,
        LOG_COEFFICIENT,
        0,
        Tolerance::EXACT,
    ));

    if cfg.grid.n == 1 {
        if let Some((f, g)) = user_pair(cfg, &unit_grid(cfg)?)? {
            let r_hat = estimate_axis_convexity_ratio(&f)?;
            if (cfg.grid.ell - 1.0).abs() < 1e-12 {
                out.push(check_quadratic_transport(&f, &g, r_hat)?);
            }
            out.push(check_lambda_deficit(&f, &g)?);
        }
    }
    Ok(out)
}

fn knothe_pairs(cfg: &RunConfig) -> Vec<(PairSpec, usize, usize)> {
    // (pair, dimension, coarse cells per axis); each runs at m and 2m.
    let total = cfg.suite.knothe_pairs;
    let three_d = total / 4;
    let tilted = total / 4;
    let gauss_2d = total - three_d - tilted;
    let mut pairs = Vec::with_capacity(total);
    pairs.extend(
        gaussian_perturbed_pairs(2, gauss_2d, seed_for(cfg, 3))
            .into_iter()
            .map(|p| (p, 2, 32)),
    );
    pairs.extend(
        convex_tilted_pairs(2, tilted, seed_for(cfg, 4))
            .into_iter()
            .map(|p| (p, 2, 32)),
    );
    pairs.extend(
        gaussian_perturbed_pairs(3, three_d, seed_for(cfg, 5))
            .into_iter()
            .map(|p| (p, 3, 8)),
    );
    pairs
}

/// The Knothe transport-cost inequality on randomized pairs in two and three
/// dimensions, the product anchor, facet preservation and pushforward.
pub fn verify_knothe(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n_points = 100_000.min(cfg.monte_carlo.n_points.max(1000));

    let m = 64;
    let grid = Grid::unit(2, m)?;
    let f = build_density(&DensitySpec::Uniform, &grid)?;
    let g = GridDensity::from_fn(grid.clone(), |x| 4.0 * x[0] * x[1])?.normalized()?;
    let t = knothe_map(&f, &g)?;
    out.push(closeness(
        "knothe-anchor-cost",
        displacement_cost(&t, &f)?,
        2.0 / 30.0,
        2e-3,
        m,
    ));
    out.push(check_knothe_transport_cost(&f, &g, 1.0)?);
    out.push(check_facet_preservation(&t));
    let err = pushforward_error(&t, &f, &g, n_points, seed_for(cfg, 6))?;
    let h = grid.cell_width();
    let allowance = 2.0 / (n_points as f64).sqrt() + 2.0 * h;
    out.push(VerificationReport::new(
        "knothe-pushforward",
        err,
        allowance,
        allowance,
        m,
        Tolerance::EXACT,
    ));

    let mut brackets = Vec::new();
    for (k, (pair, dim, coarse)) in knothe_pairs(cfg).into_iter().enumerate() {
        for cells in [coarse, 2 * coarse] {
            let grid = Grid::unit(dim, cells)?;
            let (f, g) = pair.build(&grid)?;
            let r_hat = estimate_axis_convexity_ratio(&f)?;
            let report = check_knothe_transport_cost(&f, &g, r_hat)?;
            brackets.push(json!({"pair": k, "dim": dim, "m": cells, "r_hat": r_hat, "lhs": report.lhs, "rhs": report.rhs}));
            out.push(report);
            if cells == coarse {
                let t = knothe_map(&f, &g)?;
                out.push(check_facet_preservation(&t));
                if k % 5 == 0 {
                    let err =
                        pushforward_error(&t, &f, &g, n_points, seed_for(cfg, 100 + k as u64))?;
                    let allowance = 2.0 / (n_points as f64).sqrt() + 2.0 * grid.cell_width();
                    out.push(VerificationReport::new(
                        "knothe-pushforward",
                        err,
                        allowance,
                        allowance,
                        cells,
                        Tolerance::EXACT,
                    ));
                }
            }
        }
    }
    out.note("knothe_suite", Value::Array(brackets));

    if cfg.grid.n >= 2 && (cfg.grid.ell - 1.0).abs() < 1e-12 {
        if let Some((f, g)) = user_pair(cfg, &unit_grid(cfg)?)? {
            let r_hat = estimate_axis_convexity_ratio(&f)?;
            out.push(check_knothe_transport_cost(&f, &g, r_hat)?);
        }
    }
    Ok(out)
}

/// The Tire-entropy comparison, the Legendre upper bound and the
/// `W₂ <= Knothe <= entropy` sandwich on small grids.
pub fn tire(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();

    let grid = Grid::unit(1, 1024)?;
    let f = build_density(&DensitySpec::Uniform, &grid)?;
    let g = build_density(
        &DensitySpec::ConvexPower {
            b: 0.0,
            v: vec![2.0],
            p: 1.0,
        },
        &grid,
    )?;
    let t = knothe_map(&f, &g)?;
    out.push(check_tire_le_entropy(&f, &g, &t)?);
    let bound = legendre_tire_bound(&f, &g)?;
    out.push(VerificationReport::new(
        "legendre-bound",
        tire_bracket(&f, &g, &t)?,
        bound,
        1.0,
        1024,
        Tolerance::DEFAULT,
    ));

    let mut cases: Vec<(PairSpec, usize, usize)> = Vec::new();
    cases.extend(
        gaussian_perturbed_pairs(1, 5, seed_for(cfg, 7))
            .into_iter()
            .map(|p| (p, 1, 256)),
    );
    cases.extend(
        gaussian_perturbed_pairs(2, 5, seed_for(cfg, 8))
            .into_iter()
            .map(|p| (p, 2, 32)),
    );
    for (pair, dim, m) in &cases {
        let (f, g) = pair.build(&Grid::unit(*dim, *m)?)?;
        let t = knothe_map(&f, &g)?;
        out.push(check_tire_le_entropy(&f, &g, &t)?);
        out.push(VerificationReport::new(
            "legendre-bound",
            tire_bracket(&f, &g, &t)?,
            legendre_tire_bound(&f, &g)?,
            1.0,
            *m,
            Tolerance::DEFAULT,
        ));
    }

    let count = cfg.suite.sandwich_pairs;
    let mut sandwich = gaussian_perturbed_pairs(2, count.div_ceil(2), seed_for(cfg, 9));
    sandwich.extend(convex_tilted_pairs(2, count / 2, seed_for(cfg, 10)));
    let grid = Grid::unit(2, 8)?;
    let mut rows = Vec::new();
    for pair in &sandwich {
        let (f, g) = pair.build(&grid)?;
        let r_hat = estimate_axis_convexity_ratio(&f)?;
        let low = check_w2_le_knothe(&f, &g, 2)?;
        let high = check_knothe_le_entropy(&f, &g, r_hat)?;
        rows.push(
            json!({"w2_lower_bound": low.lhs, "knothe_cost": low.rhs, "entropy_bound": high.rhs}),
        );
        out.push(low);
        out.push(high);
    }
    out.note("sandwich", Value::Array(rows));
    Ok(out)
}

fn unit_directions(n: usize, rng: &mut ChaCha8Rng) -> Vec<(String, Vec<f64>)> {
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let mut last = vec![0.0; n];
    last[n - 1] = -1.0;
    let diag = vec![1.0 / (n as f64).sqrt(); n];
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let random = raw.iter().map(|x| x / norm).collect();
    vec![
        ("e1".into(), e1),
        ("minus-last".into(), last),
        ("diagonal".into(), diag),
        ("random".into(), random),
    ]
}

fn t_values() -> Vec<f64> {
    (1..=20).map(|k| 0.05 * k as f64).collect()
}

/// Samples a product-form density exactly through its axis factors.
fn sample_spec(
    spec: &DensitySpec,
    n: usize,
    n_points: usize,
    seed: u64,
) -> Result<(SampleBatch, f64)> {
    let factors = spec
        .axis_factors(n)
        .expect("concentration measures are products over the axes");
    let line = Grid::unit(1, FACTOR_CELLS)?;
    let built = factors
        .iter()
        .map(|f| build_density(f, &line))
        .collect::<Result<Vec<_>>>()?;
    let mut m_hat: f64 = 0.0;
    for f in &built {
        m_hat = m_hat.max(estimate_diag_second_derivative_bound(f)?);
    }
    Ok((sample_product(&built, n_points, seed)?, m_hat))
}

/// Halfspace concentration with both constants, the uniform case, the
/// Poincaré and log-Sobolev suite, and the reported covariance and tail fits.
pub fn concentration(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n_points = cfg.monte_carlo.n_points;
    let ts = t_values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg, 11));
    let mut measures = Map::new();

    for &n in &cfg.suite.concentration_dims {
        for (kind, spec) in [
            ("gaussian", DensitySpec::standard_gaussian(n)),
            ("uniform", DensitySpec::Uniform),
        ] {
            let (batch, m_hat) = sample_spec(&spec, n, n_points, seed_for(cfg, 1000 + n as u64))?;
            let alphas: Vec<(&str, f64)> = if kind == "gaussian" {
                vec![
                    ("concentration-ratio-route", 3.0 * (0.125f64).exp()),
                    (
                        "concentration-curvature-route",
                        concentration_alpha(1.0, m_hat),
                    ),
                ]
            } else {
                vec![("concentration-uniform", 3.0)]
            };
            for (dir_name, u) in unit_directions(n, &mut rng) {
                for &(tag, alpha) in &alphas {
                    let profile = halfspace_profile(MeasureRef::Samples(&batch), &u, &ts, alpha)?;
                    let mut report = check_concentration(&profile);
                    report.name = tag.to_string();
                    out.push(report);
                    out.profiles.push(NamedProfile {
                        label: format!("{tag}-{kind}-n{n}-{dir_name}"),
                        profile,
                    });
                }
            }
            let alpha = alphas[0].1;
            let cov = covariance_ratio(MeasureRef::Samples(&batch), alpha)?;
            let tail_ts: Vec<f64> = (1..=12).map(|k| 0.04 * k as f64).collect();
            let tails = lipschitz_tail(&batch, |x| x[0], &tail_ts)?;
            let fit = fit_subgaussian(&tail_ts, &tails, alpha);
            measures.insert(
                format!("{kind}-n{n}"),
                json!({"m_hat": m_hat, "alpha": alpha, "covariance_ratio": cov, "tail_fit": fit}),
            );
        }
    }
    out.note("concentration_measures", Value::Object(measures));

    // Poincaré and log-Sobolev on several measures.
    let m = 1024;
    let line = Grid::unit(1, m)?;
    let uniform = build_density(&DensitySpec::Uniform, &line)?;
    let phi: Vec<f64> = (0..m)
        .map(|k| (PI * (k as f64 + 0.5) / m as f64).cos())
        .collect();
    out.push(closeness(
        "poincare-anchor-variance",
        grid_variance(&uniform, &phi),
        0.5,
        1e-3,
        m,
    ));
    out.push(closeness(
        "poincare-anchor-energy",
        dirichlet_energy(&uniform, &phi),
        PI * PI / 2.0,
        1e-3,
        m,
    ));
    out.reports
        .extend(poincare_lsi_check(&uniform, 0.0, 1.0, &[phi])?);

    let square = Grid::unit(2, 64)?;
    let mut spec_rng = ChaCha8Rng::seed_from_u64(seed_for(cfg, 12));
    let measures: Vec<(DensitySpec, Grid)> = vec![
        (DensitySpec::Uniform, line.clone()),
        (DensitySpec::standard_gaussian(1), line.clone()),
        (random_gaussian_source(2, &mut spec_rng), square.clone()),
        (
            DensitySpec::ExponentialTilt { v: vec![1.5, -0.5] },
            square.clone(),
        ),
    ];
    for (k, (spec, grid)) in measures.iter().enumerate() {
        let mu = build_density(spec, grid)?;
        let m_hat = estimate_diag_second_derivative_bound(&mu)?;
        let fs = smooth_test_functions(
            grid,
            cfg.suite.test_functions,
            seed_for(cfg, 200 + k as u64),
        );
        out.reports
            .extend(poincare_lsi_check(&mu, m_hat, 1.0, &fs)?);
    }
    Ok(out)
}

/// The correlated-Gaussian scaling experiment.
pub fn counterexample(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let table = counterexample_scaling(
        &cfg.suite.counterexample_ns,
        cfg.monte_carlo.n_points,
        seed_for(cfg, 13),
    )?;
    out.reports.extend(scaling_reports(&table));
    out.note(
        "scaling",
        serde_json::to_value(&table).expect("table serializes"),
    );
    Ok(out)
}
