//! Properties of the recursive Knothe map.

use cube_transport::density::{estimate_axis_convexity_ratio, DensitySpec, Grid, GridDensity};
use cube_transport::knothe::{
    check_facet_preservation, check_knothe_transport_cost, displacement_cost, knothe_map,
    pushforward_error, tire_bracket,
};
use cube_transport::suites::{convex_tilted_pairs, gaussian_perturbed_pairs, SmoothField};
use cube_transport::transport1d::{deficit_1d, monotone_map};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn smooth_1d(m: usize, seed: u64) -> Vec<f64> {
    let field = SmoothField::random(1, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    field
        .values(&Grid::unit(1, m).unwrap())
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn normalized(grid: Grid, values: Vec<f64>) -> GridDensity {
    GridDensity::new(grid, values)
        .unwrap()
        .normalized()
        .unwrap()
}

fn product(a: &[f64], b: &[f64]) -> GridDensity {
    let m = a.len();
    let values = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect();
    normalized(Grid::unit(2, m).unwrap(), values)
}

#[test]
fn uniform_to_product_anchor() {
    let grid = Grid::unit(2, 64).unwrap();
    let f = normalized(grid.clone(), vec![1.0; grid.num_cells()]);
    let g = GridDensity::from_fn(grid, |x| 4.0 * x[0] * x[1])
        .unwrap()
        .normalized()
        .unwrap();
    let t = knothe_map(&f, &g).unwrap();
    assert!((displacement_cost(&t, &f).unwrap() - 2.0 / 30.0).abs() < 2e-3);
    let r = check_knothe_transport_cost(&f, &g, 1.0).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(check_facet_preservation(&t).pass);
    let err = pushforward_error(&t, &f, &g, 100_000, 3).unwrap();
    assert!(err <= 2.0 / (100_000f64).sqrt() + 2.0 / 64.0, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_dimensional_knothe_is_monotone_map(fs in any::<u64>(), gs in any::<u64>()) {
        let grid = Grid::unit(1, 96).unwrap();
        let f = normalized(grid.clone(), smooth_1d(96, fs));
        let g = normalized(grid, smooth_1d(96, gs));
        let t = knothe_map(&f, &g).unwrap();
        let line = monotone_map(&f, &g).unwrap();
        for c in 0..96 {
            let x = (c as f64 + 0.5) / 96.0;
            prop_assert!((t.theta(c)[0] - (line.eval(x) - x)).abs() < 1e-12);
        }
        prop_assert!((tire_bracket(&f, &g, &t).unwrap() - deficit_1d(&f, &g, &line).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn product_bracket_is_sum_of_line_deficits(s in any::<[u64; 4]>()) {
        let m = 32;
        let (f1, f2, g1, g2) = (smooth_1d(m, s[0]), smooth_1d(m, s[1]), smooth_1d(m, s[2]), smooth_1d(m, s[3]));
        let f = product(&f1, &f2);
        let g = product(&g1, &g2);
        let t = knothe_map(&f, &g).unwrap();
        let line = Grid::unit(1, m).unwrap();
        let deficit = |a: &[f64], b: &[f64]| {
            let (a, b) = (normalized(line.clone(), a.to_vec()), normalized(line.clone(), b.to_vec()));
            deficit_1d(&a, &b, &monotone_map(&a, &b).unwrap()).unwrap()
        };
        let expected = deficit(&f1, &g1) + deficit(&f2, &g2);
        let h = 1.0 / m as f64;
        prop_assert!((tire_bracket(&f, &g, &t).unwrap() - expected).abs() <= 5.0 * h);
    }

    #[test]
    fn cost_decomposes_over_base_and_fibers(seed in any::<u64>(), dim in 2usize..=3) {
        let m = if dim == 2 { 24 } else { 10 };
        let (f, g) = gaussian_perturbed_pairs(dim, 1, seed)[0].build(&Grid::unit(dim, m).unwrap()).unwrap();
        let t = knothe_map(&f, &g).unwrap();
        let h = 1.0 / m as f64;
        prop_assert!((t.decomposed_cost() - displacement_cost(&t, &f).unwrap()).abs() <= 5.0 * h);
    }

    #[test]
    fn fibers_are_monotone_and_facets_fixed(seed in any::<u64>(), dim in 2usize..=3) {
        let m = if dim == 2 { 16 } else { 8 };
        let (f, g) = convex_tilted_pairs(dim, 1, seed)[0].build(&Grid::unit(dim, m).unwrap()).unwrap();
        let t = knothe_map(&f, &g).unwrap();
        prop_assert!(t.fibers_monotone());
        let facet = check_facet_preservation(&t);
        prop_assert!(facet.pass && facet.lhs == 0.0, "{:?}", facet);
    }

    #[test]
    fn transport_cost_bound_holds_on_gaussian_pairs(seed in any::<u64>()) {
        let (f, g) = gaussian_perturbed_pairs(2, 1, seed)[0].build(&Grid::unit(2, 32).unwrap()).unwrap();
        let r = estimate_axis_convexity_ratio(&f).unwrap();
        let report = check_knothe_transport_cost(&f, &g, r).unwrap();
        prop_assert!(report.pass, "{:?}", report);
    }

    #[test]
    fn self_map_has_zero_cost(seed in any::<u64>()) {
        let grid = Grid::unit(2, 12).unwrap();
        let f = cube_transport::density::build_density(
            &cube_transport::suites::random_gaussian_source(2, &mut ChaCha8Rng::seed_from_u64(seed)),
            &grid,
        ).unwrap();
        let t = knothe_map(&f, &f).unwrap();
        prop_assert!(displacement_cost(&t, &f).unwrap() < 1e-20);
        prop_assert!(tire_bracket(&f, &f, &t).unwrap().abs() < 1e-10);
    }
}

#[test]
fn uniform_spec_is_accepted_by_cost_check() {
    let grid = Grid::unit(3, 8).unwrap();
    let f = cube_transport::density::build_density(&DensitySpec::Uniform, &grid).unwrap();
    let r = check_knothe_transport_cost(&f, &f, 1.0).unwrap();
    assert!(r.pass && r.lhs == 0.0);
}
