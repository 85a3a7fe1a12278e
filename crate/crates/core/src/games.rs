//! Classical and generalized Nash games on product grids.
//!
//! A game lives on the full profile grid `C = C_1 × … × C_p`, each player
//! owning a contiguous block of axes (a [`BlockLayout`]). Payoffs are
//! tabulated on `C`; constraints `K_i : C_{-i} ⇉ C_i` are stored as graph
//! masks aligned on `C`. Equilibria are found by exact enumeration: for each
//! player and rival configuration the best value is computed once, and a
//! profile is an equilibrium when every player's gap to that value is within
//! tolerance.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correspondence::{argmax_in_block, embed_player_graph, max_in_block, Correspondence};
use crate::error::{Error, Result};
use crate::grid::{BlockLayout, BlockView, CellMask, Metric, ProductGrid, ScalarField};
use crate::par;
use crate::synthesis::distance_payoff;

/// Default cap on `|C| × Σ_i |C_i|` profile–deviation pairs.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A payoff on the full profile grid.
#[derive(Clone)]
pub enum PayoffSpec {
    /// Evaluated at the coordinates of each profile, in axis order.
    Analytic(PayoffFn),
    Tabulated(ScalarField),
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffSpec::Analytic(_) => f.write_str("Analytic(..)"),
            PayoffSpec::Tabulated(t) => f.debug_tuple("Tabulated").field(t).finish(),
        }
    }
}

impl PayoffSpec {
    pub fn analytic(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PayoffSpec::Analytic(Arc::new(f))
    }

    /// Table of values on `grid`. Analytic payoffs must be finite everywhere.
    pub fn materialize(&self, grid: &ProductGrid) -> Result<ScalarField> {
        match self {
            PayoffSpec::Analytic(f) => ScalarField::from_fn(grid.clone(), |x| f(x)),
            PayoffSpec::Tabulated(t) if t.grid() == grid => Ok(t.clone()),
            PayoffSpec::Tabulated(_) => Err(Error::GridMismatch("tabulated payoff is on another grid".into())),
        }
    }
}

/// `max θ_i(x_i, x_{-i})` over `x_i ∈ C_i`, for every player.
#[derive(Debug, Clone, PartialEq)]
pub struct NepProblem {
    grid: ProductGrid,
    layout: BlockLayout,
    payoffs: Vec<ScalarField>,
}

impl NepProblem {
    /// Full grid is the product of `blocks` in player order.
    pub fn new(blocks: &[ProductGrid], payoffs: &[PayoffSpec]) -> Result<Self> {
        let (first, rest) =
            blocks.split_first().ok_or_else(|| Error::InvalidArgument("a game needs at least one player".into()))?;
        let grid = rest.iter().fold(first.clone(), |g, b| g.product(b));
        let layout = BlockLayout::new(&blocks.iter().map(|b| b.dim()).collect::<Vec<_>>())?;
        let tables = payoffs.iter().map(|p| p.materialize(&grid)).collect::<Result<Vec<_>>>()?;
        Self::from_fields(grid, layout, tables)
    }

    pub fn from_fields(grid: ProductGrid, layout: BlockLayout, payoffs: Vec<ScalarField>) -> Result<Self> {
        if layout.dim() != grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "player blocks cover {} axes, grid has {}",
                layout.dim(),
                grid.dim()
            )));
        }
        if payoffs.len() != layout.players() {
            return Err(Error::InvalidArgument(format!("{} payoffs for {} players", payoffs.len(), layout.players())));
        }
        if let Some(i) = payoffs.iter().position(|t| t.grid() != &grid) {
            return Err(Error::GridMismatch(format!("payoff of player {i} is on another grid")));
        }
        Ok(NepProblem { grid, layout, payoffs })
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn players(&self) -> usize {
        self.layout.players()
    }

    pub fn payoffs(&self) -> &[ScalarField] {
        &self.payoffs
    }

    /// Strategy grid `C_i`.
    pub fn strategy_grid(&self, player: usize) -> Result<ProductGrid> {
        self.grid.sub_grid(self.layout.block(player))
    }

    pub fn view(&self, player: usize) -> Result<BlockView> {
        self.grid.block_view(self.layout.block(player))
    }

    /// Number of profile–deviation pairs a naive enumeration would visit.
    pub fn budget_estimate(&self) -> u128 {
        let devs: u128 = (0..self.players())
            .map(|i| self.grid.axes()[self.layout.block(i)].iter().map(|a| a.len() as u128).product::<u128>())
            .sum();
        self.grid.len() as u128 * devs
    }
}

/// A Nash problem whose players are restricted to `x_i ∈ K_i(x_{-i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnepProblem {
    nep: NepProblem,
    constraints: Vec<CellMask>,
}

impl GnepProblem {
    /// Constraints given as correspondences `C_{-i} ⇉ C_i` (two or more players).
    pub fn new(nep: NepProblem, constraints: &[Correspondence]) -> Result<Self> {
        let masks = align_constraints(nep.grid(), nep.layout(), constraints)?;
        Self::from_aligned(nep, masks)
    }

    /// Constraints given as graph masks on the full grid.
    pub fn from_aligned(nep: NepProblem, constraints: Vec<CellMask>) -> Result<Self> {
        if constraints.len() != nep.players() {
            return Err(Error::InvalidArgument(format!(
                "{} constraints for {} players",
                constraints.len(),
                nep.players()
            )));
        }
        for (i, k) in constraints.iter().enumerate() {
            if k.grid() != nep.grid() {
                return Err(Error::GridMismatch(format!("constraint of player {i} is on another grid")));
            }
            require_nonempty_slices(k, &nep.view(i)?, i)?;
        }
        Ok(GnepProblem { nep, constraints })
    }

    /// The same game with `K_i ≡ C_i`.
    pub fn unconstrained(nep: NepProblem) -> Self {
        let full = CellMask::full(nep.grid().clone());
        let constraints = vec![full; nep.players()];
        GnepProblem { nep, constraints }
    }

    pub fn nep(&self) -> &NepProblem {
        &self.nep
    }

    pub fn constraints(&self) -> &[CellMask] {
        &self.constraints
    }

    /// `⋂_i gra(K_i)`: profiles where every player's choice is admissible.
    pub fn feasible(&self) -> CellMask {
        let bits = par::map_range(self.nep.grid.len(), |l| self.constraints.iter().all(|k| k.get(l)));
        CellMask::from_bits(self.nep.grid.clone(), bits).expect("length matches grid")
    }
}

/// Embeds each `K_i : C_{-i} ⇉ C_i` into the full grid.
pub fn align_constraints(grid: &ProductGrid, layout: &BlockLayout, ks: &[Correspondence]) -> Result<Vec<CellMask>> {
    if ks.len() != layout.players() {
        return Err(Error::InvalidArgument(format!("{} constraints for {} players", ks.len(), layout.players())));
    }
    ks.iter().enumerate().map(|(i, k)| embed_player_graph(grid, layout, i, k)).collect()
}

fn require_nonempty_slices(k: &CellMask, view: &BlockView, player: usize) -> Result<()> {
    let empty = (0..view.rival_len()).find(|&r| (0..view.block_len()).all(|o| !k.get(view.join(r, o))));
    match empty {
        None => Ok(()),
        Some(r) => {
            let mut point = k.grid().multi_index(view.join(r, 0));
            let block = view.block();
            point.drain(block);
            Err(Error::EmptyValue { point, context: format!("constraint of player {player} has an empty value") })
        }
    }
}

/// Profiles whose every unilateral deviation gains at most `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub grid: ProductGrid,
    /// Linear indices into `grid`, ascending.
    pub profiles: Vec<usize>,
    /// `residuals[k][i] = max_z θ_i(z, x_{-i}) − θ_i(x)` for profile `k`.
    pub residuals: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn mask(&self) -> CellMask {
        let mut m = CellMask::empty(self.grid.clone());
        for &p in &self.profiles {
            m.set(p, true);
        }
        m
    }

    pub fn contains(&self, lin: usize) -> bool {
        self.profiles.binary_search(&lin).is_ok()
    }

    /// Profiles as multi-indices.
    pub fn points(&self) -> Vec<Vec<usize>> {
        self.profiles.iter().map(|&p| self.grid.multi_index(p)).collect()
    }
}

/// `ε = L · h` with `h` the largest grid step.
pub fn default_epsilon(lipschitz: f64, grid: &ProductGrid) -> f64 {
    lipschitz * grid.max_step()
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {eps}")));
    }
    Ok(())
}

fn enumerate(nep: &NepProblem, constraints: Option<&[CellMask]>, eps: &[f64], budget: u128) -> Result<EquilibriumSet> {
    eps.iter().try_for_each(|&e| check_epsilon(e))?;
    let estimate = nep.budget_estimate();
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let p = nep.players();
    let views = (0..p).map(|i| nep.view(i)).collect::<Result<Vec<_>>>()?;
    let best = (0..p)
        .map(|i| max_in_block(&nep.payoffs[i], &views[i], constraints.map(|c| &c[i])))
        .collect::<Result<Vec<_>>>()?;
    let rows = par::map_range(nep.grid.len(), |lin| {
        if constraints.is_some_and(|c| c.iter().any(|k| !k.get(lin))) {
            return None;
        }
        let mut gaps = Vec::with_capacity(p);
        for i in 0..p {
            let (r, _) = views[i].split(lin);
            let gap = best[i][r] - nep.payoffs[i].get(lin);
            // NaN (−∞ against −∞) and +∞ gaps both fail here.
            let within = gap <= eps[i];
            if !within {
                return None;
            }
            gaps.push(gap);
        }
        Some(gaps)
    });
    let (profiles, residuals) = rows.into_iter().enumerate().filter_map(|(l, r)| r.map(|r| (l, r))).unzip();
    Ok(EquilibriumSet { grid: nep.grid.clone(), profiles, residuals, epsilon: eps.iter().copied().fold(0.0, f64::max) })
}

/// Enumeration with a separate tolerance per player and the default budget.
pub fn enumerate_with_tolerances(p: &NepProblem, eps: &[f64]) -> Result<EquilibriumSet> {
    if eps.len() != p.players() {
        return Err(Error::InvalidArgument(format!("{} tolerances for {} players", eps.len(), p.players())));
    }
    enumerate(p, None, eps, DEFAULT_BUDGET)
}

pub fn brute_force_nash(p: &NepProblem, epsilon: f64) -> Result<EquilibriumSet> {
    brute_force_nash_budgeted(p, epsilon, DEFAULT_BUDGET)
}

pub fn brute_force_nash_budgeted(p: &NepProblem, epsilon: f64, budget: u128) -> Result<EquilibriumSet> {
    enumerate(p, None, &vec![epsilon; p.players()], budget)
}

pub fn brute_force_gnash(p: &GnepProblem, epsilon: f64) -> Result<EquilibriumSet> {
    brute_force_gnash_budgeted(p, epsilon, DEFAULT_BUDGET)
}

pub fn brute_force_gnash_budgeted(p: &GnepProblem, epsilon: f64, budget: u128) -> Result<EquilibriumSet> {
    enumerate(&p.nep, Some(&p.constraints), &vec![epsilon; p.nep.players()], budget)
}

/// Aligned graphs of `M_i(x_{-i}) = argmax_{K_i(x_{-i})} θ_i(·, x_{-i})` up to `tol[i]`.
pub fn best_response_masks(p: &GnepProblem, tol: &[f64]) -> Result<Vec<CellMask>> {
    if tol.len() != p.nep.players() {
        return Err(Error::InvalidArgument(format!("{} tolerances for {} players", tol.len(), p.nep.players())));
    }
    (0..p.nep.players())
        .map(|i| {
            check_epsilon(tol[i])?;
            argmax_in_block(&p.nep.payoffs[i], &p.nep.view(i)?, Some(&p.constraints[i]), tol[i])
        })
        .collect()
}

/// Comparison of two equilibrium masks on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCertificate {
    #[serde(rename = "match")]
    pub matches: bool,
    pub left: usize,
    pub right: usize,
    pub symmetric_difference: usize,
    /// Up to 16 points of the symmetric difference.
    pub witnesses: Vec<Vec<usize>>,
}

impl MatchCertificate {
    pub fn compare(left: &CellMask, right: &CellMask) -> Result<Self> {
        let mut diff = left.difference_points(right)?;
        diff.extend(right.difference_points(left)?);
        diff.sort_unstable();
        Ok(MatchCertificate {
            matches: diff.is_empty(),
            left: left.count(),
            right: right.count(),
            symmetric_difference: diff.len(),
            witnesses: diff.iter().take(16).map(|&p| left.grid().multi_index(p)).collect(),
        })
    }
}

/// A NEP with the same equilibria as a GNEP.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub nep: NepProblem,
    /// Aligned best-response graphs `M_i` of the original game.
    pub best_responses: Vec<CellMask>,
    /// Per-player argmax tolerance used for `M_i`.
    pub tolerances: Vec<f64>,
    /// Original GNEP (at the same tolerances) against the reduced NEP at `ε = 0`.
    pub certificate: MatchCertificate,
}

/// Replaces each `(θ_i, K_i)` by `ϑ_i = 1 − min(d(·, gra M_i), 1)` on the full
/// grid, where `M_i` is the argmax correspondence of `θ_i` over `K_i`.
///
/// `tol = None` uses a machine-scale tolerance per payoff.
pub fn reduce_gnep_to_nep(p: &GnepProblem, tol: Option<f64>, metric: Metric) -> Result<Reduction> {
    let tolerances: Vec<f64> = match tol {
        Some(t) => vec![t; p.nep.players()],
        None => p.nep.payoffs.iter().map(crate::correspondence::analytic_tolerance).collect(),
    };
    let best_responses = best_response_masks(p, &tolerances)?;
    for (i, m) in best_responses.iter().enumerate() {
        require_nonempty_slices(m, &p.nep.view(i)?, i)?;
    }
    let payoffs = best_responses.iter().map(|m| distance_payoff(m, metric)).collect::<Result<Vec<_>>>()?;
    let nep = NepProblem::from_fields(p.nep.grid.clone(), p.nep.layout.clone(), payoffs)?;
    let original = enumerate(&p.nep, Some(&p.constraints), &tolerances, DEFAULT_BUDGET)?;
    let reduced = brute_force_nash(&nep, 0.0)?;
    let certificate = MatchCertificate::compare(&original.mask(), &reduced.mask())?;
    Ok(Reduction { nep, best_responses, tolerances, certificate })
}

/// Payoffs synthesized for a target equilibrium set.
#[derive(Debug, Clone)]
pub struct InverseNash {
    /// `θ_i = 1 − min(d(·, X̂), 1)`, identical for all players.
    pub payoffs: Vec<ScalarField>,
    pub problem: GnepProblem,
    /// Equilibria of `problem` at `ε = 0` against the target.
    pub certificate: MatchCertificate,
}

/// Synthesizes payoffs whose generalized equilibrium set is `target`, and
/// certifies the result by enumeration. A negative certificate is returned,
/// not raised.
pub fn inverse_nash(
    grid: &ProductGrid,
    layout: &BlockLayout,
    constraints: Vec<CellMask>,
    target: &CellMask,
    metric: Metric,
) -> Result<InverseNash> {
    if target.grid() != grid {
        return Err(Error::GridMismatch("target is on another grid".into()));
    }
    if target.is_empty() {
        return Err(Error::InvalidArgument("target equilibrium set is empty".into()));
    }
    let placeholder = vec![ScalarField::constant(grid.clone(), 0.0)?; layout.players()];
    let shell =
        GnepProblem::from_aligned(NepProblem::from_fields(grid.clone(), layout.clone(), placeholder)?, constraints)?;
    let outside = target.difference_points(&shell.feasible())?;
    if let Some(&first) = outside.first() {
        return Err(Error::TargetNotFeasible { count: outside.len(), first: grid.multi_index(first) });
    }
    let theta = distance_payoff(target, metric)?;
    let payoffs = vec![theta; layout.players()];
    let problem =
        GnepProblem { nep: NepProblem { payoffs: payoffs.clone(), ..shell.nep }, constraints: shell.constraints };
    let eq = brute_force_gnash(&problem, 0.0)?;
    let certificate = MatchCertificate::compare(&eq.mask(), target)?;
    Ok(InverseNash { payoffs, problem, certificate })
}

/// `φ_i = θ_i` on `gra(K_i)` and `−∞` off it, with a certificate comparing
/// both games at `epsilon`.
pub fn indicator_reformulation(p: &GnepProblem, epsilon: f64) -> Result<(NepProblem, MatchCertificate)> {
    let payoffs = p
        .nep
        .payoffs
        .iter()
        .zip(&p.constraints)
        .map(|(t, k)| {
            let v = t.values().iter().zip(k.bits()).map(|(&v, &b)| if b { v } else { f64::NEG_INFINITY }).collect();
            ScalarField::new_extended(t.grid().clone(), v)
        })
        .collect::<Result<Vec<_>>>()?;
    let nep = NepProblem::from_fields(p.nep.grid.clone(), p.nep.layout.clone(), payoffs)?;
    let a = brute_force_gnash(p, epsilon)?;
    let b = brute_force_nash(&nep, epsilon)?;
    Ok((nep, MatchCertificate::compare(&a.mask(), &b.mask())?))
}

/// Shrinking superlevel sets `S_n = { x feasible : θ_i(x) ≥ (1 − 1/n) m_i(x_{-i}) ∀i }`.
#[derive(Debug, Clone, PartialEq)]
pub struct GdeltaReport {
    pub levels: Vec<u32>,
    pub sets: Vec<CellMask>,
    /// `|S_n|` per level.
    pub sizes: Vec<usize>,
    /// `|S_n ∖ GNG|` per level.
    pub excess: Vec<usize>,
    /// Size of the equilibrium set at `ε = 0`.
    pub equilibria: usize,
    pub nested: bool,
    pub contains_equilibria: bool,
    pub excess_nonincreasing: bool,
}

impl GdeltaReport {
    /// The last level equals the equilibrium set.
    pub fn reaches_equilibria(&self) -> bool {
        self.excess.last() == Some(&0)
    }
}

pub fn gng_gdelta_check(p: &GnepProblem, levels: &[u32]) -> Result<GdeltaReport> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidArgument(format!("levels must be positive integers, got {levels:?}")));
    }
    let nep = &p.nep;
    let views = (0..nep.players()).map(|i| nep.view(i)).collect::<Result<Vec<_>>>()?;
    let best = (0..nep.players())
        .map(|i| max_in_block(&nep.payoffs[i], &views[i], Some(&p.constraints[i])))
        .collect::<Result<Vec<_>>>()?;
    let feasible = p.feasible();
    let gng = brute_force_gnash(p, 0.0)?.mask();
    let sets = levels
        .iter()
        .map(|&n| {
            let factor = 1.0 - 1.0 / n as f64;
            let bits = par::map_range(nep.grid.len(), |l| {
                feasible.get(l)
                    && (0..nep.players()).all(|i| nep.payoffs[i].get(l) >= factor * best[i][views[i].split(l).0])
            });
            CellMask::from_bits(nep.grid.clone(), bits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut nested = true;
    for w in sets.windows(2) {
        nested &= w[1].is_subset(&w[0])?;
    }
    let mut contains_equilibria = true;
    for s in &sets {
        contains_equilibria &= gng.is_subset(s)?;
    }
    let excess = sets.iter().map(|s| s.and_not(&gng).map(|d| d.count())).collect::<Result<Vec<_>>>()?;
    Ok(GdeltaReport {
        levels: levels.to_vec(),
        sizes: sets.iter().map(CellMask::count).collect(),
        excess_nonincreasing: excess.windows(2).all(|w| w[1] <= w[0]),
        excess,
        equilibria: gng.count(),
        sets,
        nested,
        contains_equilibria,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationVerdict {
    Converged,
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseRun {
    pub verdict: IterationVerdict,
    /// Sweeps that changed the profile.
    pub iterations: usize,
    /// Start, then the profile after each changing sweep.
    pub trajectory: Vec<Vec<usize>>,
    /// A profile repeated at a sweep boundary; the dynamics are periodic from there on.
    pub cycle_detected: bool,
}

impl BestResponseRun {
    pub fn last(&self) -> &[usize] {
        self.trajectory.last().expect("trajectory holds the start")
    }
}

/// Cyclic exact best responses, players in order. A player keeps the current
/// choice when it is feasible and within `tol` of the best; otherwise it moves
/// to the lowest-index maximizer.
pub fn best_response_iteration(p: &GnepProblem, start: &[usize], max_iter: usize, tol: f64) -> Result<BestResponseRun> {
    check_epsilon(tol)?;
    let nep = &p.nep;
    let mut lin = nep.grid.linear(start)?;
    if p.constraints.iter().any(|k| !k.get(lin)) {
        return Err(Error::Infeasible(start.to_vec()));
    }
    let views = (0..nep.players()).map(|i| nep.view(i)).collect::<Result<Vec<_>>>()?;
    let mut trajectory = vec![start.to_vec()];
    let mut seen = std::collections::HashSet::from([lin]);
    let mut iterations = 0;
    loop {
        let before = lin;
        for (i, view) in views.iter().enumerate() {
            let theta = &nep.payoffs[i];
            let k = &p.constraints[i];
            let (r, _) = view.split(lin);
            let mut best: Option<(f64, usize)> = None;
            for o in 0..view.block_len() {
                let l = view.join(r, o);
                if k.get(l) && best.is_none_or(|(b, _)| theta.get(l) > b) {
                    best = Some((theta.get(l), l));
                }
            }
            let (b, arg) = best.expect("constraint slices are non-empty");
            if !(k.get(lin) && theta.get(lin) >= b - tol) {
                lin = arg;
            }
        }
        if lin == before {
            return Ok(BestResponseRun {
                verdict: IterationVerdict::Converged,
                iterations,
                trajectory,
                cycle_detected: false,
            });
        }
        iterations += 1;
        trajectory.push(nep.grid.multi_index(lin));
        let repeated = !seen.insert(lin);
        if repeated || iterations >= max_iter {
            return Ok(BestResponseRun {
                verdict: IterationVerdict::NoConvergence,
                iterations,
                trajectory,
                cycle_detected: repeated,
            });
        }
    }
}

/// [`best_response_iteration`] on an unconstrained game.
pub fn best_response_iteration_nep(
    p: &NepProblem,
    start: &[usize],
    max_iter: usize,
    tol: f64,
) -> Result<BestResponseRun> {
    best_response_iteration(&GnepProblem::unconstrained(p.clone()), start, max_iter, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::graph_intersection;
    use crate::grid::build_grid;

    fn unit(n: usize) -> ProductGrid {
        build_grid(&[(0.0, 1.0, n)]).unwrap()
    }

    fn two_player(
        n: usize,
        t1: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        t2: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> NepProblem {
        NepProblem::new(&[unit(n), unit(n)], &[PayoffSpec::analytic(t1), PayoffSpec::analytic(t2)]).unwrap()
    }

    /// `K_1(y) = [0, y]`, `K_2(x) = [0, 1 − x]` on the index lattice.
    fn triangles(g: &ProductGrid) -> Vec<CellMask> {
        let n = g.axis(0).len() - 1;
        vec![
            CellMask::from_index_fn(g.clone(), |p| p[0] <= p[1]),
            CellMask::from_index_fn(g.clone(), move |p| p[1] <= n - p[0]),
        ]
    }

    fn example_gnep(n: usize) -> GnepProblem {
        let nep = two_player(n, |p| p[1] - p[0] * p[0], |p| 2.0 * p[0] - p[1] * p[1]);
        let k = triangles(nep.grid());
        GnepProblem::from_aligned(nep, k).unwrap()
    }

    #[test]
    fn single_player_is_argmax() {
        let g = unit(9);
        let nep = NepProblem::new(&[g], &[PayoffSpec::analytic(|p| -(p[0] - 0.25).powi(2))]).unwrap();
        let eq = brute_force_nash(&nep, 0.0).unwrap();
        assert_eq!(eq.points(), vec![vec![2]]);
    }

    #[test]
    fn linear_costs_equilibrium_at_origin() {
        let nep = two_player(5, |p| -p[0], |p| -p[1]);
        let eq = brute_force_nash(&nep, 0.0).unwrap();
        assert_eq!(eq.points(), vec![vec![0, 0]]);
        assert_eq!(eq.residuals, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn zero_payoffs_everything_is_equilibrium() {
        let nep = two_player(4, |_| 0.0, |_| 0.0);
        assert_eq!(brute_force_nash(&nep, 0.0).unwrap().len(), 16);
    }

    #[test]
    fn unconstrained_gnep_matches_nep() {
        let nep = two_player(7, |p| (3.0 * p[0] * p[1]).sin() - p[0], |p| p[0] * p[1] - p[1] * p[1]);
        let a = brute_force_nash(&nep, 1e-3).unwrap();
        let b = brute_force_gnash(&GnepProblem::unconstrained(nep), 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn example_gnep_at_zero_tolerance() {
        let p = example_gnep(26);
        let eq = brute_force_gnash(&p, 0.0).unwrap();
        assert_eq!(eq.points(), vec![vec![0, 0]]);
        // At ε = 2h the grid admits near-equilibria next to the origin.
        let h = 1.0 / 25.0;
        let loose = brute_force_gnash(&p, 2.0 * h).unwrap();
        assert!(loose.contains(p.nep().grid().linear(&[0, 1]).unwrap()));
    }

    #[test]
    fn triangle_distance_payoffs_give_intersection() {
        let g = unit(21).product(&unit(21));
        let layout = BlockLayout::new(&[1, 1]).unwrap();
        let k = triangles(&g);
        let payoffs = k.iter().map(|m| distance_payoff(m, Metric::Euclid).unwrap()).collect();
        let p = GnepProblem::from_aligned(NepProblem::from_fields(g, layout, payoffs).unwrap(), k.clone()).unwrap();
        let target = graph_intersection(&[&k[0], &k[1]]).unwrap();
        assert_eq!(brute_force_gnash(&p, 0.0).unwrap().mask(), target);
    }

    #[test]
    fn reduction_of_the_example() {
        let p = example_gnep(26);
        let r = reduce_gnep_to_nep(&p, None, Metric::Euclid).unwrap();
        assert!(r.certificate.matches, "{:?}", r.certificate);
        assert_eq!(brute_force_nash(&r.nep, 0.0).unwrap().points(), vec![vec![0, 0]]);
    }

    #[test]
    fn reduction_without_constraints_preserves_argmax() {
        let nep = two_player(9, |p| (p[0] - p[1]).abs(), |p| p[0] * (1.0 - p[1]) + p[1]);
        let p = GnepProblem::unconstrained(nep);
        let r = reduce_gnep_to_nep(&p, Some(0.0), Metric::L1).unwrap();
        assert!(r.certificate.matches);
    }

    #[test]
    fn reduction_with_one_player() {
        let nep = NepProblem::new(&[unit(11)], &[PayoffSpec::analytic(|p| (p[0] * 7.0).cos())]).unwrap();
        let r = reduce_gnep_to_nep(&GnepProblem::unconstrained(nep), None, Metric::Euclid).unwrap();
        assert!(r.certificate.matches);
        assert_eq!(r.nep.payoffs()[0].level_mask(1.0), r.best_responses[0]);
    }

    #[test]
    fn inverse_nash_triangles() {
        let g = unit(21).product(&unit(21));
        let layout = BlockLayout::new(&[1, 1]).unwrap();
        let k = triangles(&g);
        let target = graph_intersection(&[&k[0], &k[1]]).unwrap();
        let inv = inverse_nash(&g, &layout, k, &target, Metric::Euclid).unwrap();
        assert!(inv.certificate.matches);
        assert!(inv.payoffs[0].values().iter().zip(target.bits()).all(|(&v, &b)| !b || v == 1.0));
    }

    #[test]
    fn inverse_nash_single_point() {
        let g = unit(11).product(&unit(11));
        let layout = BlockLayout::new(&[1, 1]).unwrap();
        let k = vec![CellMask::full(g.clone()), CellMask::full(g.clone())];
        let target = CellMask::from_points(g.clone(), &[vec![5, 4]]).unwrap();
        let inv = inverse_nash(&g, &layout, k, &target, Metric::Euclid).unwrap();
        assert!(inv.certificate.matches, "{:?}", inv.certificate);
    }

    #[test]
    fn inverse_nash_rejects_infeasible_target() {
        let g = unit(5).product(&unit(5));
        let layout = BlockLayout::new(&[1, 1]).unwrap();
        let k = triangles(&g);
        let target = CellMask::from_points(g.clone(), &[vec![4, 4], vec![3, 4]]).unwrap();
        let e = inverse_nash(&g, &layout, k, &target, Metric::Euclid).unwrap_err();
        assert_eq!(e, Error::TargetNotFeasible { count: 2, first: vec![3, 4] });
    }

    #[test]
    fn indicator_reformulation_matches() {
        let p = example_gnep(11);
        let (nep, cert) = indicator_reformulation(&p, 0.0).unwrap();
        assert!(cert.matches);
        assert_eq!(brute_force_nash(&nep, 0.0).unwrap().points(), vec![vec![0, 0]]);
        let infeasible = nep.grid().linear(&[10, 10]).unwrap();
        assert_eq!(nep.payoffs()[1].get(infeasible), f64::NEG_INFINITY);
        assert!(nep.payoffs()[0].get(infeasible).is_finite());

        let free = GnepProblem::unconstrained(two_player(5, |p| p[0] * p[1], |p| -p[1]));
        let (same, cert) = indicator_reformulation(&free, 0.0).unwrap();
        assert!(cert.matches);
        for (a, b) in same.payoffs().iter().zip(free.nep().payoffs()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn gdelta_constant_payoffs() {
        let p = GnepProblem::unconstrained(two_player(4, |_| 1.0, |_| 1.0));
        let r = gng_gdelta_check(&p, &[1, 2, 4]).unwrap();
        assert_eq!(r.sizes, vec![16, 16, 16]);
        assert!(r.reaches_equilibria() && r.nested && r.contains_equilibria);
    }

    #[test]
    fn gdelta_shrinks_on_example() {
        let p = example_gnep(26);
        let r = gng_gdelta_check(&p, &[1, 2, 4, 8, 16]).unwrap();
        assert!(r.nested && r.contains_equilibria && r.excess_nonincreasing);
        assert_eq!(r.equilibria, 1);
        assert!(r.excess[4] < r.excess[0]);
        let fine = gng_gdelta_check(&p, &[64]).unwrap();
        assert!(fine.reaches_equilibria());
    }

    #[test]
    fn best_response_example() {
        let p = example_gnep(11);
        assert_eq!(best_response_iteration(&p, &[10, 10], 10, 0.0).unwrap_err(), Error::Infeasible(vec![10, 10]));
        let reduced = reduce_gnep_to_nep(&p, None, Metric::Euclid).unwrap().nep;
        let run = best_response_iteration_nep(&reduced, &[10, 10], 10, 0.0).unwrap();
        assert_eq!(run.verdict, IterationVerdict::Converged);
        assert_eq!(run.last(), &[0, 0]);
        assert!(run.iterations <= 2);
        let again = best_response_iteration_nep(&reduced, &[0, 0], 10, 0.0).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn matching_pennies_cycles() {
        let g = build_grid(&[(0.0, 1.0, 2)]).unwrap();
        let nep = NepProblem::new(
            &[g.clone(), g],
            &[
                PayoffSpec::analytic(|p| if p[0] == p[1] { 1.0 } else { 0.0 }),
                PayoffSpec::analytic(|p| if p[0] != p[1] { 1.0 } else { 0.0 }),
            ],
        )
        .unwrap();
        assert!(brute_force_nash(&nep, 0.0).unwrap().is_empty());
        let run = best_response_iteration_nep(&nep, &[0, 0], 50, 0.0).unwrap();
        assert_eq!(run.verdict, IterationVerdict::NoConvergence);
        assert!(run.cycle_detected);
    }

    #[test]
    fn budget_is_enforced() {
        let nep = two_player(101, |_| 0.0, |_| 0.0);
        let e = brute_force_nash_budgeted(&nep, 0.0, 1000).unwrap_err();
        assert_eq!(e, Error::BudgetExceeded { estimate: 10201 * 202, budget: 1000 });
    }

    #[test]
    fn empty_constraint_value_rejected() {
        let nep = two_player(3, |_| 0.0, |_| 0.0);
        let g = nep.grid().clone();
        let k = vec![CellMask::from_index_fn(g.clone(), |p| p[1] > 0), CellMask::full(g)];
        let e = GnepProblem::from_aligned(nep, k).unwrap_err();
        assert!(matches!(e, Error::EmptyValue { ref point, .. } if point == &vec![0]));
    }
}
