//! Property tests for the monotone map and the one-dimensional inequalities.

use cube_transport::density::{
    build_density, estimate_axis_convexity_ratio, DensitySpec, Grid, GridDensity,
};
use cube_transport::suites::{convex_source_pairs, random_hat_function, SmoothField};
use cube_transport::transport1d::{
    check_cheeger_lambda, check_lambda_deficit, check_log_inequality, check_quadratic_transport,
    check_segment_bound, deficit_1d, lambda, log_inequality_gap, monotone_map, LOG_COEFFICIENT,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, m: usize) -> (GridDensity, GridDensity) {
    convex_source_pairs(1, seed)[0]
        .build(&Grid::unit(1, m).unwrap())
        .unwrap()
}

fn positive_density(values: Vec<f64>) -> GridDensity {
    let m = values.len();
    GridDensity::new(Grid::unit(1, m).unwrap(), values)
        .unwrap()
        .normalized()
        .unwrap()
}

#[test]
fn closed_form_anchor() {
    let grid = Grid::unit(1, 1024).unwrap();
    let f = build_density(&DensitySpec::Uniform, &grid).unwrap();
    let g = build_density(
        &DensitySpec::ConvexPower {
            b: 0.0,
            v: vec![2.0],
            p: 1.0,
        },
        &grid,
    )
    .unwrap();
    let t = monotone_map(&f, &g).unwrap();
    assert!((t.eval(0.25) - 0.5).abs() < 1e-3);
    assert!((t.transport_cost() - 1.0 / 30.0).abs() < 1e-3);
    let d = deficit_1d(&f, &g, &t).unwrap();
    assert!((d - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-3);
}

#[test]
fn log_inequality_gap_at_two() {
    let gap = log_inequality_gap(2.0);
    assert!((gap - (1.0 - std::f64::consts::LN_2 - 0.3)).abs() < 1e-12);
    assert!((gap - 0.006_852_8).abs() < 1e-6);
    let r = check_log_inequality(10_000, 1e-6, 1e6).unwrap();
    assert!(r.pass, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pushforward_matches_cdfs(values in prop::collection::vec(0.05f64..5.0, 8..64),
                                target in prop::collection::vec(0.05f64..5.0, 8..64)) {
        let f = positive_density(values);
        let g = positive_density(target);
        let t = monotone_map(&f, &g).unwrap();
        // F(x) = G(T(x)) at every source node.
        let fc = t.source_cdf();
        let m = f.grid().cells_per_axis();
        for k in 0..=m {
            let x = k as f64 / m as f64;
            let y = t.eval(x);
            let gy = cube_transport::density::Cdf1D::new(&g).unwrap().eval(y);
            prop_assert!((gy - fc[k] / fc[m]).abs() < 1e-10);
        }
        prop_assert!(t.node_values().windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(t.derivative().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn deficit_is_nonnegative(fs in any::<u64>(), gs in any::<u64>(), m in 64usize..512) {
        // Resolved smooth pairs: the finite-difference f′ is only meaningful
        // when f varies slowly from cell to cell.
        let grid = Grid::unit(1, m).unwrap();
        let build = |seed: u64| {
            let field = SmoothField::random(1, 4, 1.5, &mut ChaCha8Rng::seed_from_u64(seed));
            positive_density(field.values(&grid).into_iter().map(f64::exp).collect())
        };
        let (f, g) = (build(fs), build(gs));
        let t = monotone_map(&f, &g).unwrap();
        prop_assert!(deficit_1d(&f, &g, &t).unwrap() >= -1e-6);
    }

    #[test]
    fn self_transport_is_identity(values in prop::collection::vec(0.05f64..5.0, 4..64)) {
        let f = positive_density(values);
        let t = monotone_map(&f, &f).unwrap();
        prop_assert!(t.transport_cost() < 1e-24);
        prop_assert!(deficit_1d(&f, &f, &t).unwrap().abs() < 1e-12);
        let r = check_quadratic_transport(&f, &f, 1.0).unwrap();
        prop_assert!(r.pass);
    }

    #[test]
    fn lambda_identity_and_growth(t in -50.0f64..50.0) {
        prop_assert_eq!(lambda(t), t.abs().min(t * t));
        prop_assert!(lambda(t) >= 0.0);
        prop_assert_eq!(lambda(t), lambda(-t));
    }

    #[test]
    fn log_inequality_pointwise(log_x in -20.0f64..20.0) {
        let x = log_x.exp();
        prop_assert!(log_inequality_gap(x) >= -1e-15);
        let d = x - 1.0;
        prop_assert!(LOG_COEFFICIENT * lambda(d) <= d - d.ln_1p() + 1e-15);
    }

    #[test]
    fn lambda_deficit_on_convex_sources(seed in any::<u64>()) {
        let (f, g) = pair(seed, 256);
        let r = check_lambda_deficit(&f, &g).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn quadratic_bound_on_convex_sources(seed in any::<u64>()) {
        let (f, g) = pair(seed, 256);
        let r_hat = estimate_axis_convexity_ratio(&f).unwrap();
        let r = check_quadratic_transport(&f, &g, r_hat).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn segment_bound_on_convex_densities(seed in any::<u64>(), a in 0.0f64..0.9, len in 0.01f64..1.0) {
        let (f, _) = pair(seed, 256);
        let b = (a + len).min(1.0);
        prop_assume!(b > a);
        let r = check_segment_bound(&f, 1.0, a, b).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn cheeger_lambda_on_hat_functions(seed in any::<u64>()) {
        let (rho, _) = pair(seed, 256);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_hat_function(256, &mut rng);
        let r_hat = estimate_axis_convexity_ratio(&rho).unwrap();
        let r = check_cheeger_lambda(&rho, r_hat, &phi).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_then_backward_is_identity(seed in any::<u64>()) {
        let (f, g) = pair(seed, 128);
        let h = f.grid().cell_width();
        let forward = monotone_map(&f, &g).unwrap();
        let backward = monotone_map(&g, &f).unwrap();
        for k in 0..=128 {
            let x = k as f64 * h;
            prop_assert!((backward.eval(forward.eval(x)) - x).abs() <= 2.0 * h);
        }
    }

    #[test]
    fn endpoints_are_fixed(seed in any::<u64>()) {
        let (f, g) = pair(seed, 64);
        let t = monotone_map(&f, &g).unwrap();
        prop_assert_eq!(t.node_values()[0], 0.0);
        prop_assert_eq!(t.node_values()[64], 1.0);
    }

    #[test]
    fn sampled_pushforward_matches_target(seed in any::<u64>()) {
        let (f, g) = pair(seed, 128);
        let t = monotone_map(&f, &g).unwrap();
        let n = 20_000;
        let samples = cube_transport::sampler::sample_grid(&f, n, seed).unwrap();
        let images: Vec<f64> = samples.points().map(|p| t.eval(p[0])).collect();
        let batch = cube_transport::sampler::SampleBatch::from_points(images, 1, seed, "image").unwrap();
        let dist = cube_transport::sampler::empirical_marginal_distance(&batch, &g).unwrap();
        prop_assert!(dist <= 3.0 / (n as f64).sqrt() + 2.0 * f.grid().cell_width(), "{}", dist);
    }
}
