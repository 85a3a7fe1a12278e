//! Product grids over compact boxes, fields and masks living on them.
//!
//! All physical distances between lattice points are measured per axis as
//! `step_k * |i_k - j_k|` and then combined by the chosen [`Metric`]; nothing
//! here ever subtracts two floating-point coordinates.

mod distance;

pub use distance::{distance_transform, index_distance_transform};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// One axis of a box: `n` equally spaced points from `lo` to `hi`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::validated(0, lo, hi, n)
    }

    fn validated(index: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let bad = |reason: String| Err(Error::InvalidAxis { index, reason });
        if !lo.is_finite() || !hi.is_finite() {
            return bad(format!("bounds must be finite, got [{lo}, {hi}]"));
        }
        if lo >= hi {
            return bad(format!("lo ({lo}) must be < hi ({hi})"));
        }
        if n < 2 {
            return bad(format!("needs at least 2 points, got {n}"));
        }
        let axis = Axis { lo, hi, n };
        if axis.step() <= 0.0 {
            return bad("grid step underflows to zero".into());
        }
        Ok(axis)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    /// Coordinate of grid point `k`: `lo + k * step`.
    pub fn coord(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step()
    }

    /// Index of the grid point nearest to `x` (clamped to the axis).
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.step()).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Distance used on physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclid,
    L1,
    Linf,
}

impl Metric {
    /// Combines per-axis absolute differences into a distance.
    pub fn combine(self, diffs: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Metric::Euclid => diffs.into_iter().map(|d| d * d).sum::<f64>().sqrt(),
            Metric::L1 => diffs.into_iter().sum(),
            Metric::Linf => diffs.into_iter().fold(0.0, f64::max),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclid => "euclid",
            Metric::L1 => "l1",
            Metric::Linf => "linf",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclid" => Ok(Metric::Euclid),
            "l1" => Ok(Metric::L1),
            "linf" => Ok(Metric::Linf),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}, expected euclid, l1 or linf"))),
        }
    }
}

/// A uniform lattice on a product of axes, indexed row-major in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl ProductGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for (i, a) in axes.iter().enumerate() {
            Axis::validated(i, a.lo, a.hi, a.n)?;
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].n;
        }
        let len = strides[0] * axes[0].n;
        Ok(ProductGrid { axes, strides, len })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::step).collect()
    }

    pub fn max_step(&self) -> f64 {
        self.steps().into_iter().fold(0.0, f64::max)
    }

    /// The common step when every axis has bitwise the same step.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = self.axes[0].step();
        self.axes.iter().all(|a| a.step() == h).then_some(h)
    }

    pub fn linear(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dim() {
            return Err(Error::IndexOutOfRange(format!(
                "multi-index {idx:?} has {} entries, grid has {} axes",
                idx.len(),
                self.dim()
            )));
        }
        if let Some(k) = (0..idx.len()).find(|&k| idx[k] >= self.axes[k].n) {
            return Err(Error::IndexOutOfRange(format!(
                "multi-index {idx:?}: entry {k} exceeds axis length {}",
                self.axes[k].n
            )));
        }
        Ok(self.linear_unchecked(idx))
    }

    pub(crate) fn linear_unchecked(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(lin, &mut out);
        out
    }

    pub fn multi_index_into(&self, mut lin: usize, out: &mut [usize]) {
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = lin / s;
            lin %= s;
        }
    }

    pub fn coords(&self, lin: usize) -> Vec<f64> {
        self.multi_index(lin).iter().zip(&self.axes).map(|(&k, a)| a.coord(k)).collect()
    }

    pub fn coords_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.axes).map(|(&k, a)| a.coord(k)).collect()
    }

    /// Physical distance between two lattice points given as multi-indices.
    pub fn lattice_distance(&self, a: &[usize], b: &[usize], metric: Metric) -> f64 {
        metric.combine(a.iter().zip(b).zip(&self.axes).map(|((&i, &j), ax)| ax.step() * i.abs_diff(j) as f64))
    }

    /// Largest distance between two points of the box.
    pub fn diameter(&self, metric: Metric) -> f64 {
        metric.combine(self.axes.iter().map(|a| a.step() * (a.n - 1) as f64))
    }

    /// `self × other`, axes of `self` first.
    pub fn product(&self, other: &ProductGrid) -> ProductGrid {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        ProductGrid::new(axes).expect("product of valid grids is valid")
    }

    /// Grid made of the axes in `range`.
    pub fn sub_grid(&self, range: Range<usize>) -> Result<ProductGrid> {
        if range.start >= range.end || range.end > self.dim() {
            return Err(Error::IndexOutOfRange(format!("axis range {range:?} on a {}-axis grid", self.dim())));
        }
        ProductGrid::new(self.axes[range].to_vec())
    }

    /// Grid made of all axes outside `range`, or `None` if `range` covers every axis.
    pub fn complement_grid(&self, range: Range<usize>) -> Option<ProductGrid> {
        let axes: Vec<Axis> =
            self.axes.iter().enumerate().filter(|(k, _)| !range.contains(k)).map(|(_, a)| *a).collect();
        (!axes.is_empty()).then(|| ProductGrid::new(axes).expect("valid axes"))
    }

    /// Restriction to the index box `ranges` (one half-open range per axis).
    pub fn crop(&self, ranges: &[Range<usize>]) -> Result<ProductGrid> {
        if ranges.len() != self.dim() {
            return Err(Error::IndexOutOfRange("crop needs one range per axis".into()));
        }
        let axes = ranges
            .iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(k, (r, a))| {
                if r.end > a.n || r.end < r.start + 2 {
                    return Err(Error::IndexOutOfRange(format!("crop range {r:?} on axis {k} of length {}", a.n)));
                }
                Axis::validated(k, a.coord(r.start), a.coord(r.end - 1), r.end - r.start)
            })
            .collect::<Result<Vec<_>>>()?;
        ProductGrid::new(axes)
    }

    /// Index ranges of the points lying inside the physical box `window`.
    pub fn window_ranges(&self, window: &[(f64, f64)]) -> Result<Vec<Range<usize>>> {
        if window.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "window has {} intervals, grid has {} axes",
                window.len(),
                self.dim()
            )));
        }
        let slack = 1e-9;
        window
            .iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(k, (&(lo, hi), a))| {
                let tol = slack * a.step();
                let inside: Vec<usize> =
                    (0..a.n).filter(|&i| a.coord(i) >= lo - tol && a.coord(i) <= hi + tol).collect();
                match (inside.first(), inside.last()) {
                    (Some(&s), Some(&e)) if e > s => Ok(s..e + 1),
                    _ => Err(Error::InvalidArgument(format!(
                        "window [{lo}, {hi}] holds fewer than two points of axis {k}"
                    ))),
                }
            })
            .collect()
    }

    /// The points whose axes in `block` vary while the remaining axes are
    /// fixed at `rival` (a multi-index over the non-block axes, in order).
    pub fn section(&self, block: Range<usize>, rival: &[usize]) -> Result<Section> {
        let grid = self.sub_grid(block.clone())?;
        let fixed: Vec<usize> = (0..self.dim()).filter(|k| !block.contains(k)).collect();
        if rival.len() != fixed.len() {
            return Err(Error::IndexOutOfRange(format!("rival point {rival:?} needs {} entries", fixed.len())));
        }
        let mut full = vec![0; self.dim()];
        for (&k, &v) in fixed.iter().zip(rival) {
            if v >= self.axes[k].n {
                return Err(Error::IndexOutOfRange(format!(
                    "rival entry {v} exceeds axis {k} of length {}",
                    self.axes[k].n
                )));
            }
            full[k] = v;
        }
        let mut local = vec![0; grid.dim()];
        let indices = (0..grid.len())
            .map(|l| {
                grid.multi_index_into(l, &mut local);
                for (j, k) in block.clone().enumerate() {
                    full[k] = local[j];
                }
                self.linear_unchecked(&full)
            })
            .collect();
        Ok(Section { grid, indices })
    }

    /// Decomposition of linear indices around the contiguous axis block `block`.
    pub fn block_view(&self, block: Range<usize>) -> Result<BlockView> {
        if block.start >= block.end || block.end > self.dim() {
            return Err(Error::IndexOutOfRange(format!("axis block {block:?} on a {}-axis grid", self.dim())));
        }
        let inner = if block.end == self.dim() { 1 } else { self.strides[block.end - 1] };
        let block_len = self.axes[block.clone()].iter().map(|a| a.n).product::<usize>();
        Ok(BlockView { block_len, inner, outer: self.len / (block_len * inner), block })
    }
}

/// Splits linear indices of a grid into (rival index, own index) around one
/// contiguous block of axes. The rival index is row-major over the axes
/// outside the block, in their original order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockView {
    block_len: usize,
    inner: usize,
    outer: usize,
    block: Range<usize>,
}

impl BlockView {
    pub fn block(&self) -> Range<usize> {
        self.block.clone()
    }

    /// Number of points in the block.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Number of distinct rival configurations.
    pub fn rival_len(&self) -> usize {
        self.outer * self.inner
    }

    #[inline]
    pub fn split(&self, lin: usize) -> (usize, usize) {
        let span = self.block_len * self.inner;
        let (o, rest) = (lin / span, lin % span);
        let (own, i) = (rest / self.inner, rest % self.inner);
        (o * self.inner + i, own)
    }

    #[inline]
    pub fn join(&self, rival: usize, own: usize) -> usize {
        let (o, i) = (rival / self.inner, rival % self.inner);
        (o * self.block_len + own) * self.inner + i
    }
}

/// Axis blocks owned by each player, contiguous and in player order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    ranges: Vec<Range<usize>>,
}

impl BlockLayout {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid block sizes {sizes:?}")));
        }
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect();
        Ok(BlockLayout { ranges })
    }

    pub fn players(&self) -> usize {
        self.ranges.len()
    }

    pub fn block(&self, player: usize) -> Range<usize> {
        self.ranges[player].clone()
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// A section of a grid: the sub-grid and the source linear index of each of its points.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub grid: ProductGrid,
    pub indices: Vec<usize>,
}

/// Real values, one per grid point.
///
/// Extended fields additionally allow `-inf` (never `+inf` or NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: ProductGrid,
    values: Vec<f64>,
    extended: bool,
}

impl ScalarField {
    pub fn new(grid: ProductGrid, values: Vec<f64>) -> Result<Self> {
        Self::checked(grid, values, false)
    }

    pub fn new_extended(grid: ProductGrid, values: Vec<f64>) -> Result<Self> {
        Self::checked(grid, values, true)
    }

    fn checked(grid: ProductGrid, values: Vec<f64>, extended: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        let ok = |v: f64| v.is_finite() || (extended && v == f64::NEG_INFINITY);
        if let Some(i) = values.iter().position(|&v| !ok(v)) {
            return Err(Error::InvalidArgument(format!(
                "value {} at point {:?} is not allowed in a{} field",
                values[i],
                grid.multi_index(i),
                if extended { "n extended" } else { " finite" }
            )));
        }
        Ok(ScalarField { grid, values, extended })
    }

    pub fn constant(grid: ProductGrid, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    /// Evaluates `f` at the physical coordinates of every grid point.
    pub fn from_fn(grid: ProductGrid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Result<Self> {
        let values = par::map_range(grid.len(), |i| f(&grid.coords(i)));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    pub fn get(&self, lin: usize) -> f64 {
        self.values[lin]
    }

    pub fn at(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.values[self.grid.linear(idx)?])
    }

    /// Pointwise `h(value)`; the result must be finite.
    pub fn map(&self, h: impl Fn(f64) -> f64 + Sync + Send) -> Result<ScalarField> {
        let values = par::map_range(self.values.len(), |i| h(self.values[i]));
        Self::new(self.grid.clone(), values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values on a section, in section order.
    pub fn slice(&self, section: &Section) -> Result<ScalarField> {
        if section.indices.iter().any(|&i| i >= self.values.len()) {
            return Err(Error::IndexOutOfRange("section does not belong to this grid".into()));
        }
        let values = section.indices.iter().map(|&i| self.values[i]).collect();
        Self::checked(section.grid.clone(), values, self.extended)
    }

    /// Points where the value is exactly `v`.
    pub fn level_mask(&self, v: f64) -> CellMask {
        CellMask::from_bits(self.grid.clone(), self.values.iter().map(|&x| x == v).collect()).expect("same grid")
    }
}

/// Boolean indicator of a subset of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    grid: ProductGrid,
    bits: Vec<bool>,
}

// ProductGrid holds f64 bounds but never NaN (validated), so Eq is sound.
impl Eq for ProductGrid {}

impl CellMask {
    pub fn from_bits(grid: ProductGrid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} bits for a grid of {} points", bits.len(), grid.len())));
        }
        Ok(CellMask { grid, bits })
    }

    pub fn empty(grid: ProductGrid) -> Self {
        let n = grid.len();
        CellMask { grid, bits: vec![false; n] }
    }

    pub fn full(grid: ProductGrid) -> Self {
        let n = grid.len();
        CellMask { grid, bits: vec![true; n] }
    }

    /// Membership by a predicate on physical coordinates.
    pub fn from_fn(grid: ProductGrid, pred: impl Fn(&[f64]) -> bool + Sync + Send) -> Self {
        let bits = par::map_range(grid.len(), |i| pred(&grid.coords(i)));
        CellMask { grid, bits }
    }

    /// Membership by a predicate on multi-indices.
    pub fn from_index_fn(grid: ProductGrid, pred: impl Fn(&[usize]) -> bool + Sync + Send) -> Self {
        let bits = par::map_range(grid.len(), |i| pred(&grid.multi_index(i)));
        CellMask { grid, bits }
    }

    pub fn from_points(grid: ProductGrid, points: &[Vec<usize>]) -> Result<Self> {
        let mut mask = CellMask::empty(grid);
        for p in points {
            let i = mask.grid.linear(p)?;
            mask.bits[i] = true;
        }
        Ok(mask)
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, lin: usize) -> bool {
        self.bits[lin]
    }

    pub fn set(&mut self, lin: usize, v: bool) {
        self.bits[lin] = v;
    }

    pub fn contains(&self, idx: &[usize]) -> Result<bool> {
        Ok(self.bits[self.grid.linear(idx)?])
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.contains(&true)
    }

    /// Linear indices of members, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn points(&self) -> Vec<Vec<usize>> {
        self.indices().into_iter().map(|i| self.grid.multi_index(i)).collect()
    }

    fn same_grid(&self, other: &CellMask) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("masks live on different grids".into()));
        }
        Ok(())
    }

    fn zip_with(&self, other: &CellMask, f: impl Fn(bool, bool) -> bool) -> Result<CellMask> {
        self.same_grid(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(CellMask { grid: self.grid.clone(), bits })
    }

    pub fn and(&self, other: &CellMask) -> Result<CellMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &CellMask) -> Result<CellMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &CellMask) -> Result<CellMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn not(&self) -> CellMask {
        CellMask { grid: self.grid.clone(), bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn is_subset(&self, other: &CellMask) -> Result<bool> {
        self.same_grid(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    /// Members of `self` missing from `other`.
    pub fn difference_points(&self, other: &CellMask) -> Result<Vec<usize>> {
        Ok(self.and_not(other)?.indices())
    }

    pub fn slice(&self, section: &Section) -> Result<CellMask> {
        if section.indices.iter().any(|&i| i >= self.bits.len()) {
            return Err(Error::IndexOutOfRange("section does not belong to this grid".into()));
        }
        let bits = section.indices.iter().map(|&i| self.bits[i]).collect();
        CellMask::from_bits(section.grid.clone(), bits)
    }

    /// Restriction to an index box of the grid (see [`ProductGrid::crop`]).
    pub fn crop(&self, ranges: &[Range<usize>]) -> Result<CellMask> {
        let grid = self.grid.crop(ranges)?;
        let bits = crop_values(&self.grid, &grid, ranges, &self.bits);
        CellMask::from_bits(grid, bits)
    }
}

pub(crate) fn crop_values<T: Copy>(
    src: &ProductGrid,
    dst: &ProductGrid,
    ranges: &[Range<usize>],
    values: &[T],
) -> Vec<T> {
    let mut idx = vec![0; dst.dim()];
    (0..dst.len())
        .map(|l| {
            dst.multi_index_into(l, &mut idx);
            for (k, r) in ranges.iter().enumerate() {
                idx[k] += r.start;
            }
            values[src.linear_unchecked(&idx)]
        })
        .collect()
}

/// Builds a product grid from `(lo, hi, n)` triples.
pub fn build_grid(axes: &[(f64, f64, usize)]) -> Result<ProductGrid> {
    if axes.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let axes =
        axes.iter().enumerate().map(|(i, &(lo, hi, n))| Axis::validated(i, lo, hi, n)).collect::<Result<Vec<_>>>()?;
    ProductGrid::new(axes)
}

/// Pointwise `min(value, 1)`.
pub fn clamp_unit(field: &ScalarField) -> ScalarField {
    ScalarField {
        grid: field.grid.clone(),
        values: field.values.iter().map(|&v| v.min(1.0)).collect(),
        extended: field.extended,
    }
}

/// Pointwise `sum_k weights[k] * fields[k]`, accumulated in list order.
pub fn weighted_sum(fields: &[&ScalarField], weights: &[f64]) -> Result<ScalarField> {
    if fields.is_empty() || fields.len() != weights.len() {
        return Err(Error::InvalidArgument(format!("{} fields with {} weights", fields.len(), weights.len())));
    }
    let grid = fields[0].grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch("weighted_sum over fields on different grids".into()));
    }
    if fields.iter().any(|f| f.is_extended()) {
        return Err(Error::InvalidArgument("weighted_sum needs finite fields".into()));
    }
    let values =
        par::map_range(grid.len(), |i| fields.iter().zip(weights).fold(0.0, |acc, (f, w)| acc + w * f.values[i]));
    ScalarField::new(grid.clone(), values)
}
