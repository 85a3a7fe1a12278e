mod common;

use common::{random_field, random_mask, random_nonempty_rows, rng, unit_grid};
use invberge::correspondence::{argmax_correspondence, Correspondence};
use invberge::games::{brute_force_nash, NepProblem};
use invberge::synthesis::{expansion_family, rational_levels, synth_tau_payoff};
use invberge::{build_grid, distance_transform, par, BlockLayout, Metric};

// Results are assembled in index order, so thread count cannot change a bit.
#[test]
fn sequential_and_parallel_agree_bitwise() {
    let g = unit_grid(&[97, 83]);
    let mask = random_mask(&mut rng(1), &g, 0.01);
    for metric in [Metric::Euclid, Metric::L1, Metric::Linf] {
        let par_d = distance_transform(&mask, metric).unwrap();
        let seq_d = par::sequential(|| distance_transform(&mask, metric).unwrap());
        assert_eq!(par_d.values(), seq_d.values());
    }

    let x = build_grid(&[(0.0, 1.0, 40)]).unwrap();
    let y = build_grid(&[(-1.0, 1.0, 50)]).unwrap();
    let mut r = rng(2);
    let k = Correspondence::new(x.clone(), y.clone(), random_nonempty_rows(&mut r, &x.product(&y), 50, 0.3)).unwrap();
    let theta = random_field(&mut r, &x.product(&y), 11);
    let am = argmax_correspondence(&k, &theta, 0.0).unwrap();
    assert_eq!(&am, &par::sequential(|| argmax_correspondence(&k, &theta, 0.0).unwrap()));

    let family = expansion_family(&am, &rational_levels(12), Metric::Euclid).unwrap();
    let tau = synth_tau_payoff(&family).unwrap();
    assert_eq!(tau.values(), par::sequential(|| synth_tau_payoff(&family).unwrap()).values());

    let grid = unit_grid(&[30, 30]);
    let payoffs = vec![random_field(&mut r, &grid, 6), random_field(&mut r, &grid, 6)];
    let nep = NepProblem::from_fields(grid, BlockLayout::new(&[1, 1]).unwrap(), payoffs).unwrap();
    let eq = brute_force_nash(&nep, 0.0).unwrap();
    assert_eq!(eq, par::sequential(|| brute_force_nash(&nep, 0.0).unwrap()));
}
