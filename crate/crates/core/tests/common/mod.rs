//! Brute-force oracles. Each one recomputes a quantity by the definition,
//! without the library's algorithms.
#![allow(dead_code)]

use invberge::{BlockLayout, CellMask, Metric, ProductGrid, ScalarField};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn unravel(shape: &[usize], mut lin: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = lin % shape[k];
        lin /= shape[k];
    }
    idx
}

fn ravel(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Squared Euclidean, l1 or linf index distance to the nearest member, by scanning all members.
pub fn index_distances(shape: &[usize], bits: &[bool], metric: Metric) -> Vec<u64> {
    let members: Vec<Vec<usize>> = (0..bits.len()).filter(|&l| bits[l]).map(|l| unravel(shape, l)).collect();
    (0..bits.len())
        .map(|l| {
            let p = unravel(shape, l);
            members
                .iter()
                .map(|q| {
                    let d = p.iter().zip(q).map(|(&a, &b)| a.abs_diff(b) as u64);
                    match metric {
                        Metric::Euclid => d.map(|v| v * v).sum(),
                        Metric::L1 => d.sum(),
                        Metric::Linf => d.max().unwrap_or(0),
                    }
                })
                .min()
                .expect("non-empty mask")
        })
        .collect()
}

/// Physical distances from coordinates, by scanning all members.
pub fn physical_distances(grid: &ProductGrid, bits: &[bool], metric: Metric) -> Vec<f64> {
    let members: Vec<Vec<f64>> = (0..bits.len()).filter(|&l| bits[l]).map(|l| grid.coords(l)).collect();
    (0..bits.len())
        .map(|l| {
            let p = grid.coords(l);
            members
                .iter()
                .map(|q| {
                    let d = p.iter().zip(q).map(|(a, b)| (a - b).abs());
                    match metric {
                        Metric::Euclid => d.map(|v| v * v).sum::<f64>().sqrt(),
                        Metric::L1 => d.sum(),
                        Metric::Linf => d.fold(0.0, f64::max),
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Argmax graph for a correspondence stored domain-major (`x * cod_len + y`).
pub fn argmax_graph(k: &[bool], theta: &[f64], cod_len: usize, tol: f64) -> Vec<bool> {
    let mut out = vec![false; k.len()];
    for x in 0..k.len() / cod_len {
        let row = x * cod_len..(x + 1) * cod_len;
        let best = row.clone().filter(|&l| k[l]).map(|l| theta[l]).fold(f64::NEG_INFINITY, f64::max);
        for l in row {
            out[l] = k[l] && best - theta[l] <= tol;
        }
    }
    out
}

/// Equilibria by checking every unilateral deviation of every profile.
pub fn equilibria(
    grid: &ProductGrid,
    layout: &BlockLayout,
    payoffs: &[&[f64]],
    constraints: Option<&[&[bool]]>,
    eps: f64,
) -> Vec<usize> {
    let shape = grid.shape();
    let feasible = |l: usize, i: usize| constraints.is_none_or(|c| c[i][l]);
    let mut out = Vec::new();
    'profile: for l in 0..grid.len() {
        if (0..layout.players()).any(|i| !feasible(l, i)) {
            continue;
        }
        let base = unravel(&shape, l);
        for (i, theta) in payoffs.iter().enumerate() {
            let block = layout.block(i);
            let sub: Vec<usize> = shape[block.clone()].to_vec();
            let count: usize = sub.iter().product();
            for o in 0..count {
                let mut dev = base.clone();
                dev[block.clone()].copy_from_slice(&unravel(&sub, o));
                let d = ravel(&shape, &dev);
                if feasible(d, i) && theta[d] - theta[l] > eps {
                    continue 'profile;
                }
            }
        }
        out.push(l);
    }
    out
}

pub fn random_mask(rng: &mut ChaCha8Rng, grid: &ProductGrid, density: f64) -> CellMask {
    let mut bits: Vec<bool> = (0..grid.len()).map(|_| rng.gen_bool(density)).collect();
    if !bits.iter().any(|&b| b) {
        let l = rng.gen_range(0..grid.len());
        bits[l] = true;
    }
    CellMask::from_bits(grid.clone(), bits).unwrap()
}

/// A random mask with at least one point in every row `x * cod_len .. (x + 1) * cod_len`.
pub fn random_nonempty_rows(rng: &mut ChaCha8Rng, grid: &ProductGrid, cod_len: usize, density: f64) -> CellMask {
    let mut bits: Vec<bool> = (0..grid.len()).map(|_| rng.gen_bool(density)).collect();
    for row in bits.chunks_mut(cod_len) {
        if !row.iter().any(|&b| b) {
            let k = rng.gen_range(0..cod_len);
            row[k] = true;
        }
    }
    CellMask::from_bits(grid.clone(), bits).unwrap()
}

/// Values on a coarse lattice of levels so that ties occur.
pub fn random_field(rng: &mut ChaCha8Rng, grid: &ProductGrid, levels: u32) -> ScalarField {
    let values = (0..grid.len()).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
    ScalarField::new(grid.clone(), values).unwrap()
}

pub fn unit_grid(sizes: &[usize]) -> ProductGrid {
    let axes: Vec<(f64, f64, usize)> = sizes.iter().map(|&n| (0.0, 1.0, n)).collect();
    invberge::build_grid(&axes).unwrap()
}
