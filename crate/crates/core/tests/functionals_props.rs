//! Properties of the entropy functionals and the transport-cost sandwich.

use cube_transport::density::{
    build_density, estimate_axis_convexity_ratio, DensitySpec, Grid, GridDensity,
};
use cube_transport::functionals::{
    check_knothe_le_entropy, check_tire_le_entropy, check_w2_le_knothe, exact_w2_small,
    legendre_tire_bound, min_cost_coupling, relative_entropy, w2_lower_bound,
};
use cube_transport::knothe::{knothe_map, tire_bracket};
use cube_transport::suites::{convex_tilted_pairs, gaussian_perturbed_pairs, SmoothField};
use cube_transport::transport1d::monotone_map;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn smooth(dim: usize, m: usize, seed: u64) -> GridDensity {
    let grid = Grid::unit(dim, m).unwrap();
    let field = SmoothField::random(dim, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    GridDensity::new(
        grid.clone(),
        field.values(&grid).into_iter().map(f64::exp).collect(),
    )
    .unwrap()
    .normalized()
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gibbs_inequality(a in any::<u64>(), b in any::<u64>(), dim in 1usize..=2) {
        let (f, g) = (smooth(dim, 16, a), smooth(dim, 16, b));
        let d = relative_entropy(&g, &f).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(relative_entropy(&f, &f).unwrap(), 0.0);
        if a != b {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn coupling_has_requested_marginals(supply in prop::collection::vec(0.0f64..1.0, 2..12),
                                        demand in prop::collection::vec(0.0f64..1.0, 2..12),
                                        xs in prop::collection::vec(-1.0f64..1.0, 12),
                                        ys in prop::collection::vec(-1.0f64..1.0, 12)) {
        let (ts, td): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
        prop_assume!(ts > 1e-3 && td > 1e-3);
        let a: Vec<f64> = supply.iter().map(|x| x / ts).collect();
        let b: Vec<f64> = demand.iter().map(|x| x / td).collect();
        let (xs, ys) = (&xs, &ys);
        let cost: Vec<f64> = (0..a.len())
            .flat_map(|i| (0..b.len()).map(move |j| (xs[i] - ys[j]).powi(2)))
            .collect();
        let (total, flows) = min_cost_coupling(&a, &b, &cost).unwrap();
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, w) in &flows {
            prop_assert!(w > 0.0);
            rows[i] += w;
            cols[j] += w;
        }
        for (r, x) in rows.iter().zip(&a) {
            prop_assert!((r - x).abs() < 1e-9);
        }
        for (c, y) in cols.iter().zip(&b) {
            prop_assert!((c - y).abs() < 1e-9);
        }
        // Never worse than the independent coupling.
        let independent: f64 = (0..a.len())
            .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
            .map(|(i, j)| a[i] * b[j] * cost[i * b.len() + j])
            .sum();
        prop_assert!(total <= independent + 1e-12);
    }

    #[test]
    fn legendre_bound_dominates_bracket(seed in any::<u64>(), dim in 1usize..=2) {
        let m = if dim == 1 { 128 } else { 16 };
        let pair = &gaussian_perturbed_pairs(dim, 1, seed)[0];
        let (f, g) = pair.build(&Grid::unit(dim, m).unwrap()).unwrap();
        let t = knothe_map(&f, &g).unwrap();
        let bracket = tire_bracket(&f, &g, &t).unwrap();
        let bound = legendre_tire_bound(&f, &g).unwrap();
        prop_assert!(bracket <= bound * 1.05 + 1e-6, "{} > {}", bracket, bound);
    }

    #[test]
    fn bracket_below_entropy_for_log_concave_sources(seed in any::<u64>(), dim in 1usize..=2) {
        let m = if dim == 1 { 128 } else { 16 };
        let (f, g) = gaussian_perturbed_pairs(dim, 1, seed)[0].build(&Grid::unit(dim, m).unwrap()).unwrap();
        let t = knothe_map(&f, &g).unwrap();
        let r = check_tire_le_entropy(&f, &g, &t).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn knothe_cost_below_entropy_bound(seed in any::<u64>()) {
        let (f, g) = convex_tilted_pairs(2, 1, seed)[0].build(&Grid::unit(2, 16).unwrap()).unwrap();
        let r_hat = estimate_axis_convexity_ratio(&f).unwrap();
        let r = check_knothe_le_entropy(&f, &g, r_hat).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn w2_in_one_dimension_matches_monotone_cost(a in any::<u64>(), b in any::<u64>()) {
        let m = 48;
        let (f, g) = (smooth(1, m, a), smooth(1, m, b));
        let cost = monotone_map(&f, &g).unwrap().transport_cost();
        let (w2, _) = exact_w2_small(&f, &g, 1).unwrap();
        prop_assert!((w2 - cost).abs() <= 3.0 / m as f64);
        let (lb, _) = w2_lower_bound(&f, &g, 2).unwrap();
        prop_assert!(lb <= cost + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn w2_lower_bound_below_knothe_cost(seed in any::<u64>()) {
        let (f, g) = gaussian_perturbed_pairs(2, 1, seed)[0].build(&Grid::unit(2, 8).unwrap()).unwrap();
        let r = check_w2_le_knothe(&f, &g, 2).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }
}

#[test]
fn uniform_to_product_chain() {
    let grid = Grid::unit(2, 8).unwrap();
    let f = build_density(&DensitySpec::Uniform, &grid).unwrap();
    let g = GridDensity::from_fn(grid, |x| 4.0 * x[0] * x[1])
        .unwrap()
        .normalized()
        .unwrap();
    let w2 = check_w2_le_knothe(&f, &g, 2).unwrap();
    assert!(w2.pass, "{w2:?}");
    let k = check_knothe_le_entropy(&f, &g, 1.0).unwrap();
    assert!(k.pass, "{k:?}");
    assert!((w2.rhs - k.lhs).abs() < 1e-15);
}
