mod common;

use common::rng;
use invberge::correspondence::Correspondence;
use invberge::fixedpoint::{
    diagonal_gap, fixed_point_via_minimax, kakutani_via_nash, kyfan_minimax_check, square_side, verify_fixed_point,
    Verdict,
};
use invberge::synthesis::distance_payoff;
use invberge::{build_grid, Metric, ProductGrid, ScalarField};
use proptest::prelude::*;
use rand::Rng;

/// `(min_x max_y f, max_x f(x, x))` by direct scan of a square field.
fn minimax_scan(f: &ScalarField) -> (f64, f64) {
    let side = (f.grid().len() as f64).sqrt().round() as usize;
    let v = f.values();
    let lhs = (0..side)
        .map(|x| v[x * side..(x + 1) * side].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let rhs = (0..side).map(|x| v[x * side + x]).fold(f64::NEG_INFINITY, f64::max);
    (lhs, rhs)
}

/// `f(x, y) = b(x) − a(x) Σ_k (y_k − c_k(x))²`, a negated convex bump in `y`.
/// Each `c_k` is nondecreasing in `x_k`, so the rounded peak is a monotone
/// self-map of the grid and has a fixed point.
fn monotone_bumps(seed: u64, x_grid: &ProductGrid) -> ScalarField {
    let mut r = rng(seed);
    let n = x_grid.axis(0).len();
    let d = x_grid.dim();
    let centers: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let mut c: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    let a: Vec<f64> = (0..x_grid.len()).map(|_| r.gen_range(0.1..5.0)).collect();
    let b: Vec<f64> = (0..x_grid.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let side = x_grid.len();
    let grid = x_grid.product(x_grid);
    let values = (0..grid.len())
        .map(|l| {
            let (x, y) = (l / side, l % side);
            let (xi, yc) = (x_grid.multi_index(x), x_grid.coords(y));
            let bump: f64 = (0..d).map(|k| (yc[k] - centers[k][xi[k]]).powi(2)).sum();
            b[x] - a[x] * bump
        })
        .collect();
    ScalarField::new(grid, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kyfan_report_matches_scan_and_holds(seed: u64, n in 2usize..25, two_d: bool) {
        let x_grid = if two_d {
            build_grid(&[(0.0, 1.0, n.min(8)), (0.0, 1.0, n.min(8))]).unwrap()
        } else {
            build_grid(&[(0.0, 1.0, n)]).unwrap()
        };
        let f = monotone_bumps(seed, &x_grid);
        let report = kyfan_minimax_check(&f, 1e-12).unwrap();
        let (lhs, rhs) = minimax_scan(&f);
        prop_assert_eq!((report.lhs, report.rhs), (lhs, rhs));
        prop_assert!(report.holds, "lhs {} rhs {}", lhs, rhs);
    }

    // f(x, y) = θ(x, y) − θ(x, x) vanishes on the diagonal.
    #[test]
    fn diagonal_gap_has_zero_rhs(seed: u64, n in 2usize..20) {
        let x = build_grid(&[(0.0, 1.0, n)]).unwrap();
        let theta = common::random_field(&mut rng(seed), &x.product(&x), 9);
        let report = kyfan_minimax_check(&diagonal_gap(&theta).unwrap(), 0.0).unwrap();
        prop_assert_eq!(report.rhs, 0.0);
        prop_assert!(report.lhs >= 0.0);
    }
}

// The discrete inequality needs more than quasi-concave rows: two rows
// peaking at each other's diagonal point break it.
#[test]
fn crossing_rows_violate_the_discrete_inequality() {
    let x = build_grid(&[(0.0, 1.0, 2)]).unwrap();
    let f = ScalarField::new(x.product(&x), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let report = kyfan_minimax_check(&f, 1e-12).unwrap();
    assert_eq!((report.lhs, report.rhs), (1.0, 0.0));
    assert!(!report.holds);
}

/// `θ(x, y) = 1 − min(d((x, y), gra T), 1)` for a self-map given by a predicate on coordinates.
fn self_map(
    x_grid: &ProductGrid,
    graph: impl Fn(&[f64], &[f64]) -> bool + Sync + Send,
) -> (Correspondence, ScalarField) {
    let t = Correspondence::from_predicate(x_grid.clone(), x_grid.clone(), graph);
    let theta = distance_payoff(t.graph(), Metric::Euclid).unwrap();
    (t, theta)
}

fn battery(x_grid: &ProductGrid) -> Vec<(&'static str, Correspondence, ScalarField)> {
    let h = x_grid.max_step();
    let near = move |a: f64, b: f64| (a - b).abs() <= h / 2.0 + 1e-12;
    vec![
        ("identity", self_map(x_grid, |x, y| x.iter().zip(y).all(|(a, b)| a == b))),
        ("reflection", self_map(x_grid, move |x, y| x.iter().zip(y).all(|(a, b)| near(1.0 - a, *b)))),
        ("half", self_map(x_grid, move |x, y| x.iter().zip(y).all(|(a, b)| near(a / 2.0, *b)))),
        ("band", self_map(x_grid, |_, y| y.iter().all(|b| (0.2 - 1e-12..=0.8 + 1e-12).contains(b)))),
    ]
    .into_iter()
    .map(|(name, (t, theta))| (name, t, theta))
    .collect()
}

#[test]
fn both_fixed_point_routes_certify_and_agree() {
    for x_grid in [build_grid(&[(0.0, 1.0, 21)]).unwrap(), build_grid(&[(0.0, 1.0, 9), (0.0, 1.0, 9)]).unwrap()] {
        let h = x_grid.max_step();
        for (name, t, theta) in battery(&x_grid) {
            assert_eq!(square_side(theta.grid()).unwrap(), x_grid);
            let mm = fixed_point_via_minimax(&theta, 1e-12).unwrap();
            assert!(mm.certified, "{name}: residual {}", mm.residual);
            assert!(mm.distance_to_image <= h + 1e-12, "{name}");
            assert!(verify_fixed_point(&t, &mm.point, h, Metric::Euclid).unwrap(), "{name}");

            let kk = kakutani_via_nash(&theta, Metric::Euclid, h).unwrap();
            assert_eq!(kk.verdict, Verdict::Found, "{name}");
            let point = kk.point.unwrap();
            assert!(kk.gap.unwrap() <= h + 1e-12, "{name}");
            assert!(verify_fixed_point(&t, &point, h, Metric::Euclid).unwrap(), "{name}");
            let apart = x_grid.lattice_distance(&point, &mm.point, Metric::Euclid);
            assert!(apart <= h + 1e-12, "{name}: {point:?} vs {:?}", mm.point);
        }
    }
}
