//! Exact distance transforms on product grids.
//!
//! Distances are separable for all three metrics: a transform in `d`
//! dimensions is `d` one-dimensional passes, one per axis. On grids whose
//! axes share a step the passes run on integer index offsets (squared for
//! the Euclidean metric) and are exact; the physical distance is obtained by
//! a final scaling. Anisotropic grids run the same passes in `f64` with the
//! per-axis steps folded into the weights.

use std::ops::{Add, Mul, Sub};

use super::{CellMask, Metric, ProductGrid, ScalarField};
use crate::error::{Error, Result};
use crate::par;

trait Cost: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync {
    const INF: Self;
    const ZERO: Self;
    fn from_index(k: usize) -> Self;
    /// `floor(self / den)` for `den > 0`.
    fn floor_div(self, den: Self) -> i64;
    fn is_inf(self) -> bool;
}

impl Cost for i64 {
    const INF: Self = i64::MAX;
    const ZERO: Self = 0;

    fn from_index(k: usize) -> Self {
        k as i64
    }

    fn floor_div(self, den: Self) -> i64 {
        self.div_euclid(den)
    }

    fn is_inf(self) -> bool {
        self == i64::MAX
    }
}

impl Cost for f64 {
    const INF: Self = f64::INFINITY;
    const ZERO: Self = 0.0;

    fn from_index(k: usize) -> Self {
        k as f64
    }

    fn floor_div(self, den: Self) -> i64 {
        (self / den).floor().clamp(i64::MIN as f64, i64::MAX as f64) as i64
    }

    fn is_inf(self) -> bool {
        self == f64::INFINITY
    }
}

/// Lower envelope of parabolas `w (x - i)^2 + g(i)` (Meijster et al.).
fn euclid_line<T: Cost>(g: &[T], w: T, out: &mut [T]) {
    let n = g.len();
    let f = |x: usize, i: usize| {
        let d = T::from_index(x.abs_diff(i));
        w * d * d + g[i]
    };
    let mut s: Vec<usize> = Vec::new();
    let mut t: Vec<usize> = Vec::new();
    for u in 0..n {
        if g[u].is_inf() {
            continue;
        }
        while let (Some(&sq), Some(&tq)) = (s.last(), t.last()) {
            if f(tq, sq) > f(tq, u) {
                s.pop();
                t.pop();
            } else {
                break;
            }
        }
        match s.last() {
            None => {
                s.push(u);
                t.push(0);
            }
            Some(&sq) => {
                let (fu, fs) = (T::from_index(u), T::from_index(sq));
                let num = w * (fu * fu - fs * fs) + g[u] - g[sq];
                let den = w * T::from_index(2 * (u - sq));
                // Rounding in f64 can place the crossing at or before the
                // previous start; region starts must stay strictly increasing.
                let prev = *t.last().expect("s and t grow together") as i64;
                let start = (1 + num.floor_div(den)).max(prev + 1);
                if start < n as i64 {
                    s.push(u);
                    t.push(start as usize);
                }
            }
        }
    }
    if s.is_empty() {
        out.fill(T::INF);
        return;
    }
    let mut q = s.len() - 1;
    for x in (0..n).rev() {
        while q > 0 && x < t[q] {
            q -= 1;
        }
        out[x] = f(x, s[q]);
    }
}

/// `min_i g(i) + w |x - i|` by a forward and a backward sweep.
fn l1_line<T: Cost>(g: &[T], w: T, out: &mut [T]) {
    let mut best = T::INF;
    for (x, &v) in g.iter().enumerate() {
        let carried = if best.is_inf() { T::INF } else { best + w };
        best = if v < carried { v } else { carried };
        out[x] = best;
    }
    let mut best = T::INF;
    for x in (0..g.len()).rev() {
        let carried = if best.is_inf() { T::INF } else { best + w };
        if carried < out[x] {
            out[x] = carried;
        }
        best = out[x];
    }
}

/// Lower envelope of `max(w |x - i|, g(i))`. For `i < u` the points where
/// `u` is strictly better form a final segment, so each region start is
/// found by binary search.
fn linf_line<T: Cost>(g: &[T], w: T, out: &mut [T]) {
    let n = g.len();
    let f = |x: usize, i: usize| {
        let reach = w * T::from_index(x.abs_diff(i));
        if g[i] > reach {
            g[i]
        } else {
            reach
        }
    };
    let mut s: Vec<usize> = Vec::new();
    let mut t: Vec<usize> = Vec::new();
    for (u, gu) in g.iter().enumerate() {
        if gu.is_inf() {
            continue;
        }
        while let (Some(&sq), Some(&tq)) = (s.last(), t.last()) {
            if f(tq, sq) > f(tq, u) {
                s.pop();
                t.pop();
            } else {
                break;
            }
        }
        match (s.last(), t.last()) {
            (Some(&sq), Some(&tq)) => {
                let (mut lo, mut hi) = (tq + 1, n);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if f(mid, u) < f(mid, sq) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                if lo < n {
                    s.push(u);
                    t.push(lo);
                }
            }
            _ => {
                s.push(u);
                t.push(0);
            }
        }
    }
    if s.is_empty() {
        out.fill(T::INF);
        return;
    }
    let mut q = s.len() - 1;
    for x in (0..n).rev() {
        while q > 0 && x < t[q] {
            q -= 1;
        }
        out[x] = f(x, s[q]);
    }
}

fn separable<T: Cost>(mask: &CellMask, metric: Metric, weights: &[T]) -> Vec<T> {
    let grid = mask.grid();
    let mut cur: Vec<T> = mask.bits().iter().map(|&b| if b { T::ZERO } else { T::INF }).collect();
    for (axis, &w) in weights.iter().enumerate() {
        let n = grid.axis(axis).len();
        let stride = grid.strides()[axis];
        let lines = grid.len() / n;
        let base = |l: usize| (l / stride) * stride * n + l % stride;
        let src = &cur;
        let results: Vec<Vec<T>> = par::map_range(lines, |l| {
            let b = base(l);
            let line: Vec<T> = (0..n).map(|k| src[b + k * stride]).collect();
            let mut out = vec![T::INF; n];
            match metric {
                Metric::Euclid => euclid_line(&line, w, &mut out),
                Metric::L1 => l1_line(&line, w, &mut out),
                Metric::Linf => linf_line(&line, w, &mut out),
            }
            out
        });
        for (l, line) in results.into_iter().enumerate() {
            let b = base(l);
            for (k, v) in line.into_iter().enumerate() {
                cur[b + k * stride] = v;
            }
        }
    }
    cur
}

/// Distances to the mask in index units: squared offsets for the Euclidean
/// metric, plain offsets for `l1` and `linf`. Exact integer arithmetic.
pub fn index_distance_transform(mask: &CellMask, metric: Metric) -> Result<Vec<u64>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let weights = vec![1i64; mask.grid().dim()];
    Ok(separable(mask, metric, &weights).into_iter().map(|v| v as u64).collect())
}

/// Field of physical distances to the points of `mask`.
///
/// Exactly zero on the mask and strictly positive elsewhere.
pub fn distance_transform(mask: &CellMask, metric: Metric) -> Result<ScalarField> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let grid: &ProductGrid = mask.grid();
    let values = match grid.uniform_step() {
        Some(h) => {
            let raw = index_distance_transform(mask, metric)?;
            match metric {
                Metric::Euclid => raw.into_iter().map(|v| h * (v as f64).sqrt()).collect(),
                Metric::L1 | Metric::Linf => raw.into_iter().map(|v| h * v as f64).collect(),
            }
        }
        None => {
            let steps = grid.steps();
            match metric {
                Metric::Euclid => {
                    let w: Vec<f64> = steps.iter().map(|h| h * h).collect();
                    separable(mask, metric, &w).into_iter().map(f64::sqrt).collect()
                }
                Metric::L1 | Metric::Linf => separable(mask, metric, &steps),
            }
        }
    };
    ScalarField::new(grid.clone(), values)
}
