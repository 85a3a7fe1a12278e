//! Payoff synthesis: given a correspondence `M` (and an ambient `K ⊇ M`),
//! build a continuous payoff `θ` whose argmax correspondence is exactly `M`.
//!
//! Every construction here attains the value `1` exactly on `gra(M)` and
//! stays strictly below `1` elsewhere, so the argmax of `θ(x, ·)` over any
//! set meeting `M(x)` is `M(x)` itself.

use serde::{Deserialize, Serialize};

use crate::correspondence::{argmax_correspondence, hull, Correspondence};
use crate::error::{Error, Result};
use crate::grid::{distance_transform, CellMask, Metric, ScalarField};
use crate::par;

/// Default number of dyadic terms in [`synth_urysohn_sum`].
pub const DEFAULT_URYSOHN_TERMS: usize = 16;

const EMPTY_VALUE_CONTEXT: &str =
    "synthesis needs non-empty values: on an empty value every point of the slice would maximize the payoff";

/// `1 - min(d(p, S), 1)` for an arbitrary non-empty mask `S`.
pub fn distance_payoff(set: &CellMask, metric: Metric) -> Result<ScalarField> {
    let d = distance_transform(set, metric)?;
    d.map(|v| 1.0 - v.min(1.0))
}

/// Restriction of `m` to the physical box `window` (domain axes, then codomain axes).
pub fn window_correspondence(m: &Correspondence, window: &[(f64, f64)]) -> Result<Correspondence> {
    let ranges = m.graph().grid().window_ranges(window)?;
    let d = m.domain().dim();
    m.crop(&ranges[..d], &ranges[d..])
}

/// Distance construction: `θ = 1 − min(d(·, gra M), 1)`.
///
/// With a window, `M` is first restricted to it and the field lives on the
/// windowed grid. Every value of (the windowed) `M` must be non-empty.
pub fn synth_distance_payoff(m: &Correspondence, metric: Metric, window: Option<&[(f64, f64)]>) -> Result<ScalarField> {
    let windowed;
    let m = match window {
        Some(w) => {
            windowed = window_correspondence(m, w)?;
            &windowed
        }
        None => m,
    };
    m.require_nonempty(EMPTY_VALUE_CONTEXT)?;
    distance_payoff(m.graph(), metric)
}

/// A finite nested family `gra(M) ⊆ U_{t_1} ⊆ … ⊆ U_{t_k}` of graph masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionFamily {
    base: Correspondence,
    levels: Vec<f64>,
    masks: Vec<CellMask>,
    metric: Metric,
}

impl ExpansionFamily {
    /// Validates levels (positive, strictly increasing) and nesting.
    pub fn new(base: Correspondence, levels: Vec<f64>, masks: Vec<CellMask>, metric: Metric) -> Result<Self> {
        check_levels(&levels)?;
        if masks.len() != levels.len() {
            return Err(Error::InvalidFamily(format!("{} masks for {} levels", masks.len(), levels.len())));
        }
        let mut prev = base.graph();
        for (j, m) in masks.iter().enumerate() {
            if m.grid() != base.graph().grid() {
                return Err(Error::GridMismatch(format!("family mask {j} is on another grid")));
            }
            if !prev.is_subset(m)? {
                let what = if j == 0 { "gra(M)".to_string() } else { format!("U at level {}", levels[j - 1]) };
                return Err(Error::InvalidFamily(format!(
                    "family is not nested: {what} is not contained in U at level {}",
                    levels[j]
                )));
            }
            prev = m;
        }
        Ok(ExpansionFamily { base, levels, masks, metric })
    }

    pub fn base(&self) -> &Correspondence {
        &self.base
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn masks(&self) -> &[CellMask] {
        &self.masks
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `τ` assigned to points outside every mask.
    pub fn cap(&self) -> f64 {
        1.0 + self.levels.last().copied().unwrap_or(0.0)
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidFamily("no levels".into()));
    }
    if levels.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::InvalidFamily(format!("levels must be positive and finite: {levels:?}")));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidFamily(format!("levels must be strictly increasing: {levels:?}")));
    }
    Ok(())
}

/// `U_t = { p : d(p, gra M) < t }` for each level `t`.
pub fn expansion_family(m: &Correspondence, levels: &[f64], metric: Metric) -> Result<ExpansionFamily> {
    check_levels(levels)?;
    let d = distance_transform(m.graph(), metric)?;
    let masks = levels
        .iter()
        .map(|&t| CellMask::from_bits(d.grid().clone(), d.values().iter().map(|&v| v < t).collect()))
        .collect::<Result<Vec<_>>>()?;
    ExpansionFamily::new(m.clone(), levels.to_vec(), masks, metric)
}

/// Level-set construction: `τ(p)` is 0 on `gra(M)`, the smallest level whose
/// mask holds `p`, or [`ExpansionFamily::cap`]; `θ = 1 − min(τ, 1)`.
pub fn synth_tau_payoff(family: &ExpansionFamily) -> Result<ScalarField> {
    family.base.require_nonempty(EMPTY_VALUE_CONTEXT)?;
    let base = family.base.graph();
    let grid = base.grid();
    let cap = family.cap();
    let values = par::map_range(grid.len(), |p| {
        let tau = if base.get(p) {
            0.0
        } else {
            family.masks.iter().zip(&family.levels).find(|(m, _)| m.get(p)).map_or(cap, |(_, &t)| t)
        };
        1.0 - tau.min(1.0)
    });
    ScalarField::new(grid.clone(), values)
}

/// `U_n = { p ∈ gra K : d(p, gra M) < r_n }` for decreasing radii `r_n`.
pub fn shrinking_opens(m: &Correspondence, k: &Correspondence, radii: &[f64], metric: Metric) -> Result<Vec<CellMask>> {
    let d = distance_transform(m.graph(), metric)?;
    radii
        .iter()
        .map(|&r| {
            let bits = d.values().iter().zip(k.graph().bits()).map(|(&v, &kk)| kk && v < r).collect();
            CellMask::from_bits(d.grid().clone(), bits)
        })
        .collect()
}

/// Truncated dyadic sum of metric Urysohn functions.
///
/// `θ_n(p) = d(p, F_n) / (d(p, F_n) + d(p, gra M))` with `F_n = gra K \ U_n`
/// (distance to an empty `F_n` is the ambient diameter), and
/// `θ = Σ 2^{-n} θ_n / Σ 2^{-n}` over the first `n_terms` sets. Numerator and
/// denominator are accumulated in the same order, so `θ = 1` exactly where
/// every `θ_n = 1`, which is exactly `gra(M)`.
pub fn synth_urysohn_sum(
    m: &Correspondence,
    k: &Correspondence,
    opens: &[CellMask],
    n_terms: usize,
    metric: Metric,
) -> Result<ScalarField> {
    if m.graph().grid() != k.graph().grid() {
        return Err(Error::GridMismatch("M and K live on different grids".into()));
    }
    if n_terms == 0 || n_terms > opens.len() || n_terms > 52 {
        return Err(Error::InvalidArgument(format!("need 1 <= n_terms <= min(52, {}), got {n_terms}", opens.len())));
    }
    m.require_nonempty(EMPTY_VALUE_CONTEXT)?;
    let gm = m.graph();
    let gk = k.graph();
    if !gm.is_subset(gk)? {
        return Err(Error::InvalidFamily("gra(M) is not contained in gra(K)".into()));
    }
    let opens = &opens[..n_terms];
    for (n, u) in opens.iter().enumerate() {
        if !u.is_subset(gk)? {
            return Err(Error::InvalidFamily(format!("U_{} is not contained in gra(K)", n + 1)));
        }
        if !gm.is_subset(u)? {
            return Err(Error::InvalidFamily(format!("gra(M) is not contained in U_{}", n + 1)));
        }
        if n > 0 && !u.is_subset(&opens[n - 1])? {
            return Err(Error::InvalidFamily(format!("U_{} is not contained in U_{}", n + 1, n)));
        }
    }
    let grid = gm.grid();
    let cap = grid.diameter(metric).max(f64::MIN_POSITIVE);
    let d_m = distance_transform(gm, metric)?;
    let d_far = opens
        .iter()
        .map(|u| {
            let far = gk.and_not(u)?;
            if far.is_empty() {
                Ok(None)
            } else {
                distance_transform(&far, metric).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (1..=n_terms).map(|n| 0.5f64.powi(n as i32)).collect();
    let total: f64 = weights.iter().sum();
    let values = par::map_range(grid.len(), |p| {
        let dm = d_m.get(p);
        let mut num = 0.0;
        for (w, df) in weights.iter().zip(&d_far) {
            let df = df.as_ref().map_or(cap, |f| f.get(p));
            let denom = df + dm;
            if denom == 0.0 {
                return Err(p);
            }
            num += w * (df / denom);
        }
        Ok(num / total)
    });
    let values = values
        .into_iter()
        .collect::<std::result::Result<Vec<_>, usize>>()
        .map_err(|p| Error::InvalidFamily(format!("gra(M) meets gra(K) \\ U_n at {:?}", grid.multi_index(p))))?;
    ScalarField::new(grid.clone(), values)
}

/// Replaces each slice `U_t(x)` by its lattice convex hull (codomain
/// dimension 1 or 2). The base correspondence is kept as is.
pub fn convexify_slices(family: &ExpansionFamily) -> Result<ExpansionFamily> {
    let base = family.base();
    let cod = base.codomain();
    if cod.dim() > 2 {
        return Err(Error::Unsupported(format!(
            "lattice hulls are implemented for codomain dimension <= 2, got {}",
            cod.dim()
        )));
    }
    let m = cod.len();
    let masks = family
        .masks
        .iter()
        .map(|mask| {
            let mut bits = mask.bits().to_vec();
            par::for_each_chunk(&mut bits, m, |_, slice| hull_fill(slice, cod));
            CellMask::from_bits(mask.grid().clone(), bits)
        })
        .collect::<Result<Vec<_>>>()?;
    ExpansionFamily::new(base.clone(), family.levels.clone(), masks, family.metric)
}

fn hull_fill(slice: &mut [bool], cod: &crate::grid::ProductGrid) {
    let members: Vec<usize> = slice.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    if members.len() < 2 {
        return;
    }
    if cod.dim() == 1 {
        let (a, b) = (members[0], *members.last().unwrap());
        slice[a..=b].iter_mut().for_each(|v| *v = true);
        return;
    }
    let s = cod.strides()[0];
    let pt = |l: usize| [(l / s) as i64, (l % s) as i64];
    let pts: Vec<hull::Pt> = members.iter().map(|&l| pt(l)).collect();
    let h = hull::convex_hull(&pts);
    for (l, v) in slice.iter_mut().enumerate() {
        if !*v && hull::contains(&h, pt(l)) {
            *v = true;
        }
    }
}

/// Comparison of an argmax correspondence with a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub equal: bool,
    /// Points of `gra(M)` the payoff fails to select.
    pub missing: usize,
    /// Points the payoff selects outside `gra(M)`.
    pub extra: usize,
    /// Up to [`InverseReport::MAX_WITNESSES`] points of the symmetric difference (graph multi-indices).
    pub witnesses: Vec<Vec<usize>>,
}

impl InverseReport {
    pub const MAX_WITNESSES: usize = 16;

    pub fn mismatches(&self) -> usize {
        self.missing + self.extra
    }
}

/// Computes `argmax(K, θ, tol)` and compares its graph with `gra(M)`.
pub fn verify_inverse(theta: &ScalarField, m: &Correspondence, k: &Correspondence, tol: f64) -> Result<InverseReport> {
    if m.graph().grid() != k.graph().grid() {
        return Err(Error::GridMismatch("M and K live on different grids".into()));
    }
    let am = argmax_correspondence(k, theta, tol)?;
    let missing = m.graph().difference_points(am.graph())?;
    let extra = am.graph().difference_points(m.graph())?;
    let grid = m.graph().grid();
    let mut all: Vec<usize> = missing.iter().chain(&extra).copied().collect();
    all.sort_unstable();
    Ok(InverseReport {
        equal: missing.is_empty() && extra.is_empty(),
        missing: missing.len(),
        extra: extra.len(),
        witnesses: all.into_iter().take(InverseReport::MAX_WITNESSES).map(|p| grid.multi_index(p)).collect(),
    })
}

/// `h ∘ θ` for an `h` that must be strictly increasing on the values `θ` takes.
pub fn reparameterize(theta: &ScalarField, h: impl Fn(f64) -> f64 + Sync + Send) -> Result<ScalarField> {
    let mut vals: Vec<f64> = theta.values().to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let mapped: Vec<f64> = vals.iter().map(|&v| h(v)).collect();
    if let Some(w) = mapped.windows(2).position(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::InvalidArgument(format!(
            "reparameterization is not strictly increasing between {} and {}",
            vals[w],
            vals[w + 1]
        )));
    }
    theta.map(h)
}

/// All rationals `a/b` in `(0, 1]` with `b <= max_den`, ascending.
pub fn rational_levels(max_den: u32) -> Vec<f64> {
    let mut q: Vec<(u32, u32)> =
        (1..=max_den).flat_map(|b| (1..=b).map(move |a| (a, b))).filter(|&(a, b)| gcd(a, b) == 1).collect();
    q.sort_by(|x, y| (x.0 as u64 * y.1 as u64).cmp(&(y.0 as u64 * x.1 as u64)));
    q.into_iter().map(|(a, b)| a as f64 / b as f64).collect()
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest slope `|θ(p) − θ(q)| / d(p, q)` over axis-adjacent lattice pairs.
pub fn adjacent_lipschitz(theta: &ScalarField, metric: Metric) -> f64 {
    let g = theta.grid();
    let steps = g.steps();
    let slopes = par::map_range(g.len(), |p| {
        let idx = g.multi_index(p);
        (0..g.dim())
            .filter(|&k| idx[k] + 1 < g.axis(k).len())
            .map(|k| {
                let q = p + g.strides()[k];
                let d = metric.combine([steps[k]]);
                (theta.get(p) - theta.get(q)).abs() / d
            })
            .fold(0.0, f64::max)
    });
    slopes.into_iter().fold(0.0, f64::max)
}
