//! Correspondences as graph masks, the forward maximum theorem and
//! finite-resolution checks of continuity-type hypotheses.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance_transform, BlockLayout, BlockView, CellMask, Metric, ProductGrid, ScalarField};
use crate::par;

/// A set-valued map `T: X => Y` stored as its graph on `X × Y` (domain axes first).
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    domain: ProductGrid,
    codomain: ProductGrid,
    graph: CellMask,
}

impl Correspondence {
    pub fn new(domain: ProductGrid, codomain: ProductGrid, graph: CellMask) -> Result<Self> {
        if *graph.grid() != domain.product(&codomain) {
            return Err(Error::GridMismatch("graph grid must be the product of domain and codomain".into()));
        }
        Ok(Correspondence { domain, codomain, graph })
    }

    /// `y ∈ T(x)` iff `pred(x, y)`, on physical coordinates.
    pub fn from_predicate(
        domain: ProductGrid,
        codomain: ProductGrid,
        pred: impl Fn(&[f64], &[f64]) -> bool + Sync + Send,
    ) -> Self {
        let d = domain.dim();
        let graph = CellMask::from_fn(domain.product(&codomain), |p| pred(&p[..d], &p[d..]));
        Correspondence { domain, codomain, graph }
    }

    /// `y ∈ T(x)` iff `pred(x, y)`, on multi-indices.
    pub fn from_index_predicate(
        domain: ProductGrid,
        codomain: ProductGrid,
        pred: impl Fn(&[usize], &[usize]) -> bool + Sync + Send,
    ) -> Self {
        let d = domain.dim();
        let graph = CellMask::from_index_fn(domain.product(&codomain), |p| pred(&p[..d], &p[d..]));
        Correspondence { domain, codomain, graph }
    }

    pub fn domain(&self) -> &ProductGrid {
        &self.domain
    }

    pub fn codomain(&self) -> &ProductGrid {
        &self.codomain
    }

    pub fn graph(&self) -> &CellMask {
        &self.graph
    }

    pub fn into_graph(self) -> CellMask {
        self.graph
    }

    /// The axis block of the graph grid holding the codomain.
    pub fn codomain_block(&self) -> Range<usize> {
        self.domain.dim()..self.domain.dim() + self.codomain.dim()
    }

    /// Membership bits of `T(x)` for the domain point with linear index `x`.
    pub fn value(&self, x: usize) -> &[bool] {
        let m = self.codomain.len();
        &self.graph.bits()[x * m..(x + 1) * m]
    }

    /// Linear codomain indices of `T(x)`.
    pub fn value_points(&self, x: usize) -> Vec<usize> {
        self.value(x).iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn value_mask(&self, x: usize) -> CellMask {
        CellMask::from_bits(self.codomain.clone(), self.value(x).to_vec()).expect("codomain sized")
    }

    /// First domain point with an empty value, if any.
    pub fn first_empty_value(&self) -> Option<usize> {
        (0..self.domain.len()).find(|&x| !self.value(x).contains(&true))
    }

    pub fn is_nonempty_valued(&self) -> bool {
        self.first_empty_value().is_none()
    }

    pub(crate) fn require_nonempty(&self, context: &str) -> Result<()> {
        match self.first_empty_value() {
            None => Ok(()),
            Some(x) => Err(Error::EmptyValue { point: self.domain.multi_index(x), context: context.to_string() }),
        }
    }

    /// Restriction to an index box of the domain and of the codomain.
    pub fn crop(&self, domain: &[Range<usize>], codomain: &[Range<usize>]) -> Result<Self> {
        let ranges: Vec<Range<usize>> = domain.iter().chain(codomain).cloned().collect();
        let graph = self.graph.crop(&ranges)?;
        Correspondence::new(self.domain.crop(domain)?, self.codomain.crop(codomain)?, graph)
    }
}

/// Checked hypothesis of a correspondence or payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Usc,
    Lsc,
    ClosedGraph,
    NonemptyValues,
    CompactValues,
    ConvexValues,
    QuasiConcavity,
}

/// Where a check failed: the base point, an optional neighbouring domain
/// point, the offending codomain points and the radius in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<usize>,
    pub neighbor: Option<Vec<usize>>,
    pub values: Vec<Vec<usize>>,
    pub radius: f64,
}

/// Outcome of a finite-resolution property check.
///
/// `surrogate` marks checks that test a grid-scale stand-in for a
/// topological property rather than the property itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub property: Property,
    pub holds: bool,
    pub witness: Option<Witness>,
    pub delta_used: f64,
    pub surrogate: bool,
}

impl ContinuityReport {
    fn from_witness(property: Property, witness: Option<Witness>, delta: f64, surrogate: bool) -> Self {
        ContinuityReport { property, holds: witness.is_none(), witness, delta_used: delta, surrogate }
    }
}

/// Relative slack on distance comparisons against `delta`.
const RADIUS_SLACK: f64 = 1e-12;

fn within(d: f64, delta: f64) -> bool {
    d <= delta * (1.0 + RADIUS_SLACK) + RADIUS_SLACK
}

/// Argmax over a contiguous block of axes of `theta`'s grid, restricted to
/// `feasible` when given: a point is kept iff it is feasible and its value
/// is within `tol` of the best feasible value at the same rival configuration
/// (`best − θ ≤ tol`).
/// Ties are all kept. Errors name the first rival configuration without a
/// feasible point.
pub fn argmax_in_block(
    theta: &ScalarField,
    view: &BlockView,
    feasible: Option<&CellMask>,
    tol: f64,
) -> Result<CellMask> {
    let grid = theta.grid();
    let best = max_in_block(theta, view, feasible)?;
    let bits = par::map_range(grid.len(), |lin| {
        let (r, _) = view.split(lin);
        // Same comparison as the equilibrium gap; −∞ entries never qualify.
        feasible.is_none_or(|f| f.get(lin)) && best[r] - theta.get(lin) <= tol
    });
    CellMask::from_bits(grid.clone(), bits)
}

/// Maximum of `theta` over the block at each rival configuration.
pub fn max_in_block(theta: &ScalarField, view: &BlockView, feasible: Option<&CellMask>) -> Result<Vec<f64>> {
    let grid = theta.grid();
    if let Some(f) = feasible {
        if f.grid() != grid {
            return Err(Error::GridMismatch("feasible mask and payoff differ in grid".into()));
        }
    }
    let best = par::map_range(view.rival_len(), |r| {
        (0..view.block_len())
            .map(|o| view.join(r, o))
            .filter(|&l| feasible.is_none_or(|f| f.get(l)))
            .map(|l| theta.get(l))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    });
    best.into_iter()
        .enumerate()
        .map(|(r, b)| {
            b.ok_or_else(|| {
                let lin = view.join(r, 0);
                let mut point = grid.multi_index(lin);
                for k in view.block() {
                    point[k] = 0;
                }
                let point =
                    point.into_iter().enumerate().filter(|(k, _)| !view.block().contains(k)).map(|(_, v)| v).collect();
                Error::EmptyValue { point, context: "no feasible choice to maximize over".into() }
            })
        })
        .collect()
}

fn check_theta_grid(k: &Correspondence, theta: &ScalarField) -> Result<()> {
    if theta.grid() != k.graph().grid() {
        return Err(Error::GridMismatch("payoff must live on the graph grid of K".into()));
    }
    Ok(())
}

/// `M(x) = { y ∈ K(x) : θ(x,y) ≥ max_{z ∈ K(x)} θ(x,z) − tol }`.
pub fn argmax_correspondence(k: &Correspondence, theta: &ScalarField, tol: f64) -> Result<Correspondence> {
    check_theta_grid(k, theta)?;
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!("argmax tolerance must be >= 0, got {tol}")));
    }
    let view = theta.grid().block_view(k.codomain_block())?;
    let graph = argmax_in_block(theta, &view, Some(k.graph()), tol)?;
    Correspondence::new(k.domain.clone(), k.codomain.clone(), graph)
}

/// `m(x) = max_{y ∈ K(x)} θ(x,y)` as a field on the domain.
pub fn value_function(k: &Correspondence, theta: &ScalarField) -> Result<ScalarField> {
    check_theta_grid(k, theta)?;
    let view = theta.grid().block_view(k.codomain_block())?;
    let best = max_in_block(theta, &view, Some(k.graph()))?;
    if theta.is_extended() {
        ScalarField::new_extended(k.domain.clone(), best)
    } else {
        ScalarField::new(k.domain.clone(), best)
    }
}

/// A tolerance at machine scale relative to the range of `theta`, for
/// argmax of payoffs evaluated from closed-form expressions.
pub fn analytic_tolerance(theta: &ScalarField) -> f64 {
    let finite = theta.values().iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let range = if hi >= lo { hi - lo } else { 0.0 };
    16.0 * f64::EPSILON * range.max(1.0)
}

/// Domain points within `delta` of `x` (excluding `x`).
fn neighbors(domain: &ProductGrid, x: usize, delta: f64, metric: Metric) -> Vec<usize> {
    let center = domain.multi_index(x);
    let radii: Vec<usize> =
        domain.axes().iter().map(|a| ((delta / a.step()) * (1.0 + RADIUS_SLACK)).floor() as usize).collect();
    let lo: Vec<usize> = center.iter().zip(&radii).map(|(&c, &r)| c.saturating_sub(r)).collect();
    let hi: Vec<usize> =
        center.iter().zip(&radii).zip(domain.axes()).map(|((&c, &r), a)| (c + r).min(a.len() - 1)).collect();
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        let lin = domain.linear_unchecked(&cur);
        if lin != x && within(domain.lattice_distance(&center, &cur, metric), delta) {
            out.push(lin);
        }
        let mut k = cur.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < hi[k] {
                cur[k] += 1;
                break;
            }
            cur[k] = lo[k];
        }
    }
}

/// `T(x') ⊆ B_delta(T(x))` for every `x'` within `delta` of `x`; returns a
/// violation `(x, x', y')` when `sub_from_neighbor`, else checks `T(x) ⊆ B_delta(T(x'))`.
fn semicontinuity_witness(t: &Correspondence, delta: f64, metric: Metric, sub_from_neighbor: bool) -> Option<Witness> {
    let dom = t.domain();
    let dists: Vec<Option<ScalarField>> =
        par::map_range(dom.len(), |x| distance_transform(&t.value_mask(x), metric).ok());
    let found = par::map_range(dom.len(), |x| {
        for xn in neighbors(dom, x, delta, metric) {
            let (inner, outer) = if sub_from_neighbor { (xn, x) } else { (x, xn) };
            // every point of T(inner) must lie within delta of T(outer)
            for y in t.value_points(inner) {
                let ok = dists[outer].as_ref().is_some_and(|d| within(d.get(y), delta));
                if !ok {
                    return Some(Witness {
                        point: dom.multi_index(x),
                        neighbor: Some(dom.multi_index(xn)),
                        values: vec![t.codomain().multi_index(y)],
                        radius: delta,
                    });
                }
            }
        }
        None
    });
    found.into_iter().flatten().next()
}

/// Finite-resolution check of `property` for `t`, Euclidean metric.
pub fn check_property(t: &Correspondence, property: Property, delta: f64) -> ContinuityReport {
    check_property_in(t, property, delta, Metric::Euclid)
}

/// As [`check_property`] with an explicit metric on domain and codomain.
///
/// `delta` is raised to the largest domain step if smaller.
pub fn check_property_in(t: &Correspondence, property: Property, delta: f64, metric: Metric) -> ContinuityReport {
    let delta = delta.max(t.domain().max_step());
    let dom = t.domain();
    match property {
        Property::Usc => {
            ContinuityReport::from_witness(property, semicontinuity_witness(t, delta, metric, true), delta, true)
        }
        Property::Lsc => {
            ContinuityReport::from_witness(property, semicontinuity_witness(t, delta, metric, false), delta, true)
        }
        // A finite mask is its own closure, and finite values are compact.
        Property::ClosedGraph | Property::CompactValues => ContinuityReport::from_witness(property, None, delta, false),
        Property::NonemptyValues => {
            let w = t.first_empty_value().map(|x| Witness {
                point: dom.multi_index(x),
                neighbor: None,
                values: vec![],
                radius: 0.0,
            });
            ContinuityReport::from_witness(property, w, delta, false)
        }
        // The graph indicator is quasi-concave in y exactly when values are convex.
        Property::ConvexValues | Property::QuasiConcavity => {
            let cod = t.codomain();
            let found = par::map_range(dom.len(), |x| {
                lattice_convexity_violation(&t.value_mask(x)).map(|vals| Witness {
                    point: dom.multi_index(x),
                    neighbor: None,
                    values: vals.iter().map(|&v| cod.multi_index(v)).collect(),
                    radius: 0.0,
                })
            })
            .into_iter()
            .flatten()
            .next();
            ContinuityReport::from_witness(property, found, delta, cod.dim() > 2)
        }
    }
}

/// Re-runs the local test at a failure witness; true iff the failure reproduces.
pub fn witness_reproduces(t: &Correspondence, report: &ContinuityReport, metric: Metric) -> bool {
    let Some(w) = &report.witness else { return false };
    let dom = t.domain();
    let cod = t.codomain();
    let Ok(x) = dom.linear(&w.point) else { return false };
    match report.property {
        Property::Usc | Property::Lsc => {
            let (Some(n), Some(y)) = (&w.neighbor, w.values.first()) else { return false };
            let (Ok(xn), Ok(y)) = (dom.linear(n), cod.linear(y)) else { return false };
            if !within(dom.lattice_distance(&w.point, n, metric), w.radius) {
                return false;
            }
            let (inner, outer) = if report.property == Property::Usc { (xn, x) } else { (x, xn) };
            if !t.value(inner)[y] {
                return false;
            }
            let yi = cod.multi_index(y);
            !t.value_points(outer)
                .into_iter()
                .any(|z| within(cod.lattice_distance(&yi, &cod.multi_index(z), metric), w.radius))
        }
        Property::NonemptyValues => !t.value(x).contains(&true),
        Property::ConvexValues | Property::QuasiConcavity => lattice_convexity_violation(&t.value_mask(x)).is_some(),
        _ => false,
    }
}

/// Points of `mask` (linear indices) demonstrating non-convexity on the
/// lattice: `[missing, a, b]` where `missing` lies in the convex hull of the
/// members but is not a member, and `a`, `b` are members around it.
/// Exact hulls in one and two dimensions; in higher dimensions the test
/// looks for a missing exact midpoint of two members.
pub(crate) fn lattice_convexity_violation(mask: &CellMask) -> Option<Vec<usize>> {
    let g = mask.grid();
    let members = mask.indices();
    if members.len() < 2 {
        return None;
    }
    match g.dim() {
        1 => {
            let (a, b) = (members[0], *members.last().unwrap());
            (a..=b).find(|&i| !mask.get(i)).map(|i| vec![i, a, b])
        }
        2 => {
            let pts: Vec<[i64; 2]> = members.iter().map(|&l| to_pt2(g, l)).collect();
            let hull = hull::convex_hull(&pts);
            (0..g.len()).find(|&l| !mask.get(l) && hull::contains(&hull, to_pt2(g, l))).map(|l| {
                let p = to_pt2(g, l);
                let (a, b) = hull::straddling_pair(&pts, p);
                vec![l, members[a], members[b]]
            })
        }
        _ => {
            let idx: Vec<Vec<usize>> = members.iter().map(|&l| g.multi_index(l)).collect();
            for i in 0..idx.len() {
                for j in i + 1..idx.len() {
                    if idx[i].iter().zip(&idx[j]).all(|(a, b)| (a + b) % 2 == 0) {
                        let mid: Vec<usize> = idx[i].iter().zip(&idx[j]).map(|(a, b)| (a + b) / 2).collect();
                        let m = g.linear_unchecked(&mid);
                        if !mask.get(m) {
                            return Some(vec![m, members[i], members[j]]);
                        }
                    }
                }
            }
            None
        }
    }
}

fn to_pt2(g: &ProductGrid, lin: usize) -> [i64; 2] {
    let s = g.strides()[0];
    [(lin / s) as i64, (lin % s) as i64]
}

/// Lattice convex hulls in the plane with exact integer arithmetic.
pub(crate) mod hull {
    pub type Pt = [i64; 2];

    fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }

    /// Counter-clockwise hull without collinear vertices (monotone chain).
    pub fn convex_hull(points: &[Pt]) -> Vec<Pt> {
        let mut pts = points.to_vec();
        pts.sort_unstable();
        pts.dedup();
        if pts.len() < 3 {
            return pts;
        }
        let mut lower: Vec<Pt> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Pt> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    /// Closed-hull membership.
    pub fn contains(hull: &[Pt], p: Pt) -> bool {
        match hull.len() {
            0 => false,
            1 => hull[0] == p,
            2 => {
                let (a, b) = (hull[0], hull[1]);
                cross(a, b, p) == 0
                    && p[0] >= a[0].min(b[0])
                    && p[0] <= a[0].max(b[0])
                    && p[1] >= a[1].min(b[1])
                    && p[1] <= a[1].max(b[1])
            }
            n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
        }
    }

    /// Two members on opposite sides of `p` along some axis or diagonal, used
    /// only to decorate witnesses; falls back to the first two points.
    pub fn straddling_pair(points: &[Pt], p: Pt) -> (usize, usize) {
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let (a, b) = (points[i], points[j]);
                if cross(a, b, p) == 0 && (a[0] - p[0]) * (b[0] - p[0]) <= 0 && (a[1] - p[1]) * (b[1] - p[1]) <= 0 {
                    return (i, j);
                }
            }
        }
        (0, 1)
    }
}

/// Re-embeds player `i`'s graph on `C_{-i} × C_i` into the full grid `C`.
pub fn embed_player_graph(
    full: &ProductGrid,
    layout: &BlockLayout,
    player: usize,
    corr: &Correspondence,
) -> Result<CellMask> {
    let block = layout.block(player);
    let view = full.block_view(block.clone())?;
    let rivals = full.complement_grid(block.clone());
    let own = full.sub_grid(block)?;
    if Some(corr.domain()) != rivals.as_ref() || *corr.codomain() != own {
        return Err(Error::GridMismatch(format!(
            "correspondence of player {player} does not match C_-i => C_i of the game"
        )));
    }
    let m = own.len();
    let bits = par::map_range(full.len(), |lin| {
        let (r, o) = view.split(lin);
        corr.graph().get(r * m + o)
    });
    CellMask::from_bits(full.clone(), bits)
}

/// Reads player `i`'s correspondence `C_{-i} => C_i` out of an aligned mask.
/// Needs at least two players (otherwise `C_{-i}` has no axes).
pub fn player_correspondence(mask: &CellMask, layout: &BlockLayout, player: usize) -> Result<Correspondence> {
    let full = mask.grid();
    let block = layout.block(player);
    let view = full.block_view(block.clone())?;
    let rivals = full
        .complement_grid(block.clone())
        .ok_or_else(|| Error::Unsupported("a single-player game has no rival domain".into()))?;
    let own = full.sub_grid(block)?;
    let m = own.len();
    let bits = (0..rivals.len() * m).map(|l| mask.get(view.join(l / m, l % m))).collect();
    Correspondence::new(rivals.clone(), own.clone(), CellMask::from_bits(rivals.product(&own), bits)?)
}

/// Pointwise intersection of graph masks already aligned on one grid.
pub fn graph_intersection(masks: &[&CellMask]) -> Result<CellMask> {
    let (first, rest) =
        masks.split_first().ok_or_else(|| Error::InvalidArgument("graph_intersection of an empty list".into()))?;
    rest.iter().try_fold((*first).clone(), |acc, m| acc.and(m))
}

/// Intersection of player graphs given on `C_{-i} × C_i`, aligned into `C`.
pub fn graph_intersection_aligned(
    full: &ProductGrid,
    layout: &BlockLayout,
    graphs: &[Correspondence],
) -> Result<CellMask> {
    if graphs.len() != layout.players() {
        return Err(Error::InvalidArgument(format!("{} graphs for {} players", graphs.len(), layout.players())));
    }
    let aligned =
        graphs.iter().enumerate().map(|(i, c)| embed_player_graph(full, layout, i, c)).collect::<Result<Vec<_>>>()?;
    graph_intersection(&aligned.iter().collect::<Vec<_>>())
}

/// Quasi-concavity of `theta` in the axis block `block`, at every
/// configuration of the other axes.
///
/// One-dimensional blocks are checked exactly: every superlevel set of the
/// slice must be a contiguous run (up to `tol`). Higher-dimensional blocks
/// use the exact-midpoint test `θ((a+b)/2) ≥ min(θ(a), θ(b)) − tol` over all
/// member pairs whose midpoint is a lattice point.
pub fn quasiconcavity_check(theta: &ScalarField, block: Range<usize>, tol: f64) -> Result<ContinuityReport> {
    let grid = theta.grid();
    let view = grid.block_view(block.clone())?;
    let sub = grid.sub_grid(block.clone())?;
    let rivals = grid.complement_grid(block.clone());
    let found = par::map_range(view.rival_len(), |r| {
        let vals: Vec<f64> = (0..view.block_len()).map(|o| theta.get(view.join(r, o))).collect();
        let bad = if sub.dim() == 1 { unimodality_violation(&vals, tol) } else { midpoint_violation(&sub, &vals, tol) };
        bad.map(|[a, b, m]| Witness {
            point: rivals.as_ref().map_or_else(Vec::new, |g| g.multi_index(r)),
            neighbor: None,
            values: vec![sub.multi_index(a), sub.multi_index(b), sub.multi_index(m)],
            radius: tol,
        })
    });
    let w = found.into_iter().flatten().next();
    Ok(ContinuityReport::from_witness(Property::QuasiConcavity, w, 0.0, sub.dim() > 1))
}

/// `[a, b, m]` with `a < m < b` and `v[m] < min(v[a], v[b]) - tol`.
fn unimodality_violation(v: &[f64], tol: f64) -> Option<[usize; 3]> {
    let n = v.len();
    if n < 3 {
        return None;
    }
    // suffix argmax, first occurrence from the right
    let mut suf = vec![n - 1; n];
    for i in (0..n - 1).rev() {
        suf[i] = if v[i] > v[suf[i + 1]] { i } else { suf[i + 1] };
    }
    let mut pre = 0;
    for m in 1..n - 1 {
        if v[m - 1] > v[pre] {
            pre = m - 1;
        }
        let right = suf[m + 1];
        if v[m] < v[pre].min(v[right]) - tol {
            return Some([pre, right, m]);
        }
    }
    None
}

fn midpoint_violation(sub: &ProductGrid, v: &[f64], tol: f64) -> Option<[usize; 3]> {
    let idx: Vec<Vec<usize>> = (0..sub.len()).map(|l| sub.multi_index(l)).collect();
    let mut mid = vec![0; sub.dim()];
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if !idx[a].iter().zip(&idx[b]).all(|(x, y)| (x + y) % 2 == 0) {
                continue;
            }
            for (k, m) in mid.iter_mut().enumerate() {
                *m = (idx[a][k] + idx[b][k]) / 2;
            }
            let m = sub.linear_unchecked(&mid);
            if v[m] < v[a].min(v[b]) - tol {
                return Some([a, b, m]);
            }
        }
    }
    None
}
