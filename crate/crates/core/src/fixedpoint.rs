//! Fixed points of argmax correspondences `T(x) = argmax_y θ(x, y)` on a
//! box grid `X`, found through a two-player Nash game and through the Ky Fan
//! minimax inequality, plus a standalone minimax checker.
//!
//! Fields here live on `X × X` with the first copy of `X` first; the linear
//! index of `(x, y)` is `x · |X| + y`.

use serde::{Deserialize, Serialize};

use crate::correspondence::{analytic_tolerance, quasiconcavity_check, Correspondence};
use crate::error::{Error, Result};
use crate::games::{enumerate_with_tolerances, NepProblem};
use crate::grid::{BlockLayout, Metric, ProductGrid, ScalarField};
use crate::par;

/// `X` for a field on `X × X`; errors unless both halves have identical axes.
pub fn square_side(grid: &ProductGrid) -> Result<ProductGrid> {
    let d = grid.dim();
    if !d.is_multiple_of(2) || grid.axes()[..d / 2] != grid.axes()[d / 2..] {
        return Err(Error::GridMismatch(format!("expected a square grid X × X, got axes {:?}", grid.shape())));
    }
    grid.sub_grid(0..d / 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxReport {
    /// `min_x max_y f(x, y)`.
    pub lhs: f64,
    /// `max_x f(x, x)`.
    pub rhs: f64,
    pub tol: f64,
    /// `lhs ≤ rhs + tol`.
    pub holds: bool,
    /// Lowest-index `x` attaining `lhs`.
    pub argmin_witness: Vec<usize>,
    /// Lowest-index maximizer of `f(x₀, ·)`.
    pub inner_argmax: Vec<usize>,
    /// Every row `f(x, ·)` passed the quasi-concavity check.
    pub rows_quasiconcave: bool,
    /// The row check is a midpoint test rather than exact (dimension > 1).
    pub rows_check_surrogate: bool,
}

/// Row maxima of a square field and the lowest index attaining each.
fn row_maxima(f: &ScalarField, side: usize) -> Vec<(f64, usize)> {
    par::map_range(side, |x| {
        let row = &f.values()[x * side..(x + 1) * side];
        row.iter().enumerate().fold((f64::NEG_INFINITY, 0), |(b, j), (k, &v)| if v > b { (v, k) } else { (b, j) })
    })
}

fn lowest_argmin(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values.enumerate().fold((f64::INFINITY, 0), |(b, j), (k, v)| if v < b { (v, k) } else { (b, j) })
}

/// Exact discrete `min_x max_y f` against `max_x f(x, x)`.
pub fn kyfan_minimax_check(f: &ScalarField, tol: f64) -> Result<MinimaxReport> {
    let x_grid = square_side(f.grid())?;
    let side = x_grid.len();
    let rows = row_maxima(f, side);
    let (lhs, x0) = lowest_argmin(rows.iter().map(|r| r.0));
    let rhs = (0..side).map(|x| f.get(x * side + x)).fold(f64::NEG_INFINITY, f64::max);
    let d = x_grid.dim();
    let qc = quasiconcavity_check(f, d..2 * d, 0.0)?;
    Ok(MinimaxReport {
        lhs,
        rhs,
        tol,
        holds: lhs <= rhs + tol,
        argmin_witness: x_grid.multi_index(x0),
        inner_argmax: x_grid.multi_index(rows[x0].1),
        rows_quasiconcave: qc.holds,
        rows_check_surrogate: qc.surrogate,
    })
}

/// `f(x, y) = θ(x, y) − θ(x, x)`, which vanishes on the diagonal.
pub fn diagonal_gap(theta: &ScalarField) -> Result<ScalarField> {
    let side = square_side(theta.grid())?.len();
    let values = par::map_range(theta.grid().len(), |l| {
        let x = l / side;
        theta.get(l) - theta.get(x * side + x)
    });
    ScalarField::new(theta.grid().clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Found,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxFixedPoint {
    /// `x₀ = argmin_x max_y f(x, y)`, lowest index.
    pub point: Vec<usize>,
    /// `max_y f(x₀, y) ≥ 0`.
    pub residual: f64,
    /// `residual ≤ tol`, i.e. `x₀ ∈ T(x₀)` up to `tol`.
    pub certified: bool,
    /// Euclidean distance from `x₀` to the exact row argmax `T(x₀)`.
    pub distance_to_image: f64,
    pub report: MinimaxReport,
}

pub fn fixed_point_via_minimax(theta: &ScalarField, tol: f64) -> Result<MinimaxFixedPoint> {
    let x_grid = square_side(theta.grid())?;
    let side = x_grid.len();
    let f = diagonal_gap(theta)?;
    let report = kyfan_minimax_check(&f, 0.0)?;
    let x0 = x_grid.linear(&report.argmin_witness)?;
    let row = &theta.values()[x0 * side..(x0 + 1) * side];
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let here = x_grid.multi_index(x0);
    let distance_to_image = row
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(y, _)| x_grid.lattice_distance(&here, &x_grid.multi_index(y), Metric::Euclid))
        .fold(f64::INFINITY, f64::min);
    Ok(MinimaxFixedPoint { point: here, residual: report.lhs, certified: report.lhs <= tol, distance_to_image, report })
}

/// `−‖x − y‖` on `X × X`: the first player's payoff in the Nash construction.
pub fn proximity_payoff(x_grid: &ProductGrid, metric: Metric) -> Result<ScalarField> {
    let side = x_grid.len();
    let grid = x_grid.product(x_grid);
    let values = par::map_range(grid.len(), |l| {
        -x_grid.lattice_distance(&x_grid.multi_index(l / side), &x_grid.multi_index(l % side), metric)
    });
    ScalarField::new(grid, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KakutaniResult {
    pub verdict: Verdict,
    /// `x̂`, the first player's choice.
    pub point: Option<Vec<usize>>,
    /// `ŷ ∈ argmax θ(x̂, ·)`, the second player's choice.
    pub partner: Option<Vec<usize>>,
    /// `‖x̂ − ŷ‖` in the chosen norm.
    pub gap: Option<f64>,
    /// Equilibria of the two-player game.
    pub equilibria: usize,
    /// Argmax tolerance used for the second player.
    pub tolerance: f64,
}

/// Player 1 picks `x` to minimize `‖x − y‖`, player 2 picks `y` to maximize
/// `θ(x, ·)`. An equilibrium `(x̂, ŷ)` with `‖x̂ − ŷ‖ ≤ epsilon` certifies
/// `x̂ ∈ T(x̂)` up to `epsilon`. The lowest-index such equilibrium is returned.
pub fn kakutani_via_nash(theta: &ScalarField, metric: Metric, epsilon: f64) -> Result<KakutaniResult> {
    let x_grid = square_side(theta.grid())?;
    let d = x_grid.dim();
    let layout = BlockLayout::new(&[d, d])?;
    let tol = analytic_tolerance(theta);
    let nep =
        NepProblem::from_fields(theta.grid().clone(), layout, vec![proximity_payoff(&x_grid, metric)?, theta.clone()])?;
    let eq = enumerate_with_tolerances(&nep, &[0.0, tol])?;
    let side = x_grid.len();
    let hit = eq.profiles.iter().find_map(|&l| {
        let (x, y) = (x_grid.multi_index(l / side), x_grid.multi_index(l % side));
        let gap = x_grid.lattice_distance(&x, &y, metric);
        (gap <= epsilon).then_some((x, y, gap))
    });
    Ok(match hit {
        Some((x, y, gap)) => KakutaniResult {
            verdict: Verdict::Found,
            point: Some(x),
            partner: Some(y),
            gap: Some(gap),
            equilibria: eq.len(),
            tolerance: tol,
        },
        None => KakutaniResult {
            verdict: Verdict::NotFound,
            point: None,
            partner: None,
            gap: None,
            equilibria: eq.len(),
            tolerance: tol,
        },
    })
}

/// `d(x, T(x)) ≤ epsilon` for a self-map `T : X ⇉ X`.
pub fn verify_fixed_point(t: &Correspondence, x: &[usize], epsilon: f64, metric: Metric) -> Result<bool> {
    if t.domain() != t.codomain() {
        return Err(Error::GridMismatch("a fixed point needs T : X => X".into()));
    }
    let lin = t.domain().linear(x)?;
    let image = t.value_points(lin);
    if image.is_empty() {
        return Err(Error::EmptyValue { point: x.to_vec(), context: "T(x) is empty".into() });
    }
    let g = t.codomain();
    let d = image.iter().map(|&y| g.lattice_distance(x, &g.multi_index(y), metric)).fold(f64::INFINITY, f64::min);
    Ok(d <= epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::synthesis::synth_distance_payoff;

    fn unit(n: usize) -> ProductGrid {
        build_grid(&[(0.0, 1.0, n)]).unwrap()
    }

    fn square(x: &ProductGrid, f: impl Fn(&[f64], &[f64]) -> f64 + Sync + Send) -> ScalarField {
        let d = x.dim();
        ScalarField::from_fn(x.product(x), move |p| f(&p[..d], &p[d..])).unwrap()
    }

    #[test]
    fn linear_minimax() {
        let f = square(&unit(11), |x, y| y[0] - x[0]);
        let r = kyfan_minimax_check(&f, 0.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (0.0, 0.0, true));
        assert_eq!(r.argmin_witness, vec![10]);
    }

    #[test]
    fn diagonal_peak_minimax() {
        let f = square(&unit(9), |x, y| -(y[0] - x[0]).powi(2));
        let r = kyfan_minimax_check(&f, 0.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.rows_quasiconcave);
    }

    #[test]
    fn non_square_rejected() {
        let f = ScalarField::constant(unit(3).product(&unit(4)), 0.0).unwrap();
        assert!(matches!(kyfan_minimax_check(&f, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn diagonal_gap_has_zero_rhs() {
        let theta = square(&unit(13), |x, y| (3.0 * x[0] * y[0]).sin() - y[0] * y[0]);
        let r = kyfan_minimax_check(&diagonal_gap(&theta).unwrap(), 0.0).unwrap();
        assert_eq!(r.rhs, 0.0);
        assert!(r.lhs >= 0.0);
    }

    #[test]
    fn half_map_fixed_point() {
        let theta = square(&unit(65), |x, y| -(y[0] - x[0] / 2.0).powi(2));
        let fp = fixed_point_via_minimax(&theta, 0.0).unwrap();
        assert_eq!(fp.point, vec![0]);
        assert_eq!(fp.residual, 0.0);
        assert_eq!(fp.distance_to_image, 0.0);
    }

    #[test]
    fn identity_every_point_fixed() {
        let x = unit(7);
        let theta = square(&x, |x, y| -(y[0] - x[0]).powi(2));
        let fp = fixed_point_via_minimax(&theta, 0.0).unwrap();
        assert!(fp.certified);
        let k = kakutani_via_nash(&theta, Metric::Euclid, 0.0).unwrap();
        assert_eq!(k.verdict, Verdict::Found);
        assert_eq!(k.equilibria, 7);
        assert_eq!(k.gap, Some(0.0));
    }

    #[test]
    fn reflection_fixed_at_half() {
        let x = unit(11);
        let t = Correspondence::from_index_predicate(x.clone(), x.clone(), |a, b| a[0] + b[0] == 10);
        let theta = synth_distance_payoff(&t, Metric::Euclid, None).unwrap();
        let fp = fixed_point_via_minimax(&theta, 0.0).unwrap();
        assert_eq!(fp.point, vec![5]);
        let k = kakutani_via_nash(&theta, Metric::Linf, 0.0).unwrap();
        assert_eq!(k.point, Some(vec![5]));
        assert_eq!(k.partner, Some(vec![5]));
        assert!(verify_fixed_point(&t, &[5], 0.0, Metric::Euclid).unwrap());
        assert!(!verify_fixed_point(&t, &[0], 0.99, Metric::Euclid).unwrap());
    }

    #[test]
    fn constant_band() {
        let x = unit(11);
        let t =
            Correspondence::from_predicate(x.clone(), x.clone(), |_, y| (0.2 - 1e-12..=0.8 + 1e-12).contains(&y[0]));
        let theta = synth_distance_payoff(&t, Metric::Euclid, None).unwrap();
        for metric in [Metric::Euclid, Metric::L1, Metric::Linf] {
            let k = kakutani_via_nash(&theta, metric, 0.0).unwrap();
            let p = k.point.unwrap();
            assert_eq!(k.partner.unwrap(), p);
            assert!((2..=8).contains(&p[0]));
        }
    }

    #[test]
    fn identity_correspondence_verifies() {
        let x = unit(5);
        let t = Correspondence::from_index_predicate(x.clone(), x, |a, b| a == b);
        for i in 0..5 {
            assert!(verify_fixed_point(&t, &[i], 0.0, Metric::L1).unwrap());
        }
    }

    #[test]
    fn empty_image_rejected() {
        let x = unit(3);
        let t = Correspondence::from_index_predicate(x.clone(), x, |a, _| a[0] > 0);
        assert!(matches!(verify_fixed_point(&t, &[0], 1.0, Metric::L1), Err(Error::EmptyValue { .. })));
    }

    #[test]
    fn proximity_payoff_midpoint_concave() {
        let x = build_grid(&[(0.0, 1.0, 5), (0.0, 2.0, 5)]).unwrap();
        let side = x.len();
        for metric in [Metric::Euclid, Metric::L1, Metric::Linf] {
            let f = proximity_payoff(&x, metric).unwrap();
            for y in 0..side {
                for a in 0..side {
                    for b in 0..side {
                        let (ia, ib) = (x.multi_index(a), x.multi_index(b));
                        if ia.iter().zip(&ib).any(|(u, v)| (u + v) % 2 != 0) {
                            continue;
                        }
                        let mid: Vec<usize> = ia.iter().zip(&ib).map(|(u, v)| (u + v) / 2).collect();
                        let m = x.linear(&mid).unwrap();
                        let at = |p: usize| f.get(p * side + y);
                        assert!(at(m) >= 0.5 * (at(a) + at(b)) - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn two_dimensional_box() {
        let x = build_grid(&[(0.0, 1.0, 5), (0.0, 1.0, 5)]).unwrap();
        let theta = square(&x, |a, b| -((b[0] - (1.0 - a[0])).powi(2) + (b[1] - a[1] / 2.0).powi(2)));
        let fp = fixed_point_via_minimax(&theta, 0.0).unwrap();
        assert_eq!(fp.point, vec![2, 0]);
        let k = kakutani_via_nash(&theta, Metric::Euclid, 0.0).unwrap();
        assert_eq!(k.point, Some(vec![2, 0]));
    }
}
