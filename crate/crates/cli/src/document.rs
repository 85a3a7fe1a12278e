//! Problem documents: the JSON input model and its compilation to library objects.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use invberge::correspondence::Correspondence;
use invberge::games::{GnepProblem, NepProblem};
use invberge::{build_grid, BlockLayout, CellMask, Metric, ProductGrid, ScalarField};

use crate::expr::{EvalError, Expr, ParseError, Predicate};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Synthesis,
    Nep,
    Gnep,
    InverseNash,
    Fixedpoint,
    Minimax,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Synthesis => "synthesis",
            Kind::Nep => "nep",
            Kind::Gnep => "gnep",
            Kind::InverseNash => "inverse_nash",
            Kind::Fixedpoint => "fixedpoint",
            Kind::Minimax => "minimax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

/// A set of grid points: a predicate over coordinates, or explicit multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Predicate(String),
    Points(Vec<Vec<usize>>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsRepr {
    points: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SetRepr {
    Predicate(String),
    Points(PointsRepr),
}

impl Serialize for SetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SetSpec::Predicate(p) => s.serialize_str(p),
            SetSpec::Points(points) => PointsRepr { points: points.clone() }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for SetSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        SetRepr::deserialize(d)
            .map(|r| match r {
                SetRepr::Predicate(p) => SetSpec::Predicate(p),
                SetRepr::Points(p) => SetSpec::Points(p.points),
            })
            .map_err(|_| serde::de::Error::custom("expected a predicate string or {\"points\": [[i, j, ...], ...]}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Distance,
    Tau,
    Urysohn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    /// The first `domain_axes` grid axes form the domain; the rest the codomain.
    pub domain_axes: usize,
    pub graph: SetSpec,
    /// Ambient correspondence `K ⊇ M`; the whole grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<SetSpec>,
    #[serde(default)]
    pub method: Method,
    /// Expansion levels for `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Number of dyadic terms for `urysohn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub convexify: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Equilibrium gap tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Lipschitz bound `L`; the default epsilon is `L · h` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Argmax tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<f64>,
    /// Tolerance for minimax and fixed-point residuals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub schema_version: String,
    pub kind: Kind,
    pub grid: GridSpec,
    /// Axes per player, in order; one axis per player when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub payoffs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SetSpec>,
    /// `θ(x, y)` for `fixedpoint`, `f(x, y)` for `minimax`; `x` is `x1..xd`, `y` is `x{d+1}..x{2d}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn is_default<T: Default + PartialEq>(t: &T) -> bool {
    *t == T::default()
}

#[derive(Debug, Error)]
pub enum DocError {
    #[error("{pointer}: {message}")]
    Json { pointer: String, message: String },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: expression error: {source}")]
    Expression { pointer: String, source: ParseError },
    #[error("{pointer}: {message}")]
    Materialize { pointer: String, message: String },
}

impl DocError {
    fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        DocError::Schema { pointer: pointer.into(), message: message.into() }
    }

    fn materialize(pointer: impl Into<String>, message: impl ToString) -> Self {
        DocError::Materialize { pointer: pointer.into(), message: message.to_string() }
    }
}

/// Parses and schema-checks a document. Does not compile expressions.
pub fn parse_document(text: &str) -> Result<ProblemDocument, DocError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ProblemDocument = serde_path_to_error::deserialize(de)
        .map_err(|e| DocError::Json { pointer: json_pointer(e.path()), message: e.inner().to_string() })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(DocError::schema(
            "/schema_version",
            format!("unsupported schema version '{}', expected '{SCHEMA_VERSION}'", doc.schema_version),
        ));
    }
    if doc.grid.axes.is_empty() {
        return Err(DocError::schema("/grid/axes", "a grid needs at least one axis"));
    }
    Ok(doc)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Canonical serialization used for digests and round trips.
pub fn to_canonical_json(doc: &ProblemDocument) -> String {
    serde_json::to_string(doc).expect("document model always serializes")
}

/// A compiled document, ready for the library.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)] // one value per run
pub enum Compiled {
    Synthesis {
        m: Correspondence,
        k: Correspondence,
        spec: SynthesisSpec,
    },
    Nep(NepProblem),
    Gnep(GnepProblem),
    InverseNash {
        grid: ProductGrid,
        layout: BlockLayout,
        constraints: Vec<CellMask>,
        target: CellMask,
    },
    /// A field on `X × X`.
    Square(ScalarField),
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub doc: ProblemDocument,
    pub grid: ProductGrid,
    pub compiled: Compiled,
}

/// Parses, validates and materializes a document.
pub fn parse_problem(text: &str) -> Result<Problem, DocError> {
    compile(parse_document(text)?)
}

pub fn compile(doc: ProblemDocument) -> Result<Problem, DocError> {
    let axes: Vec<(f64, f64, usize)> = doc.grid.axes.iter().map(|a| (a.lo, a.hi, a.n)).collect();
    let grid = build_grid(&axes).map_err(|e| match e {
        invberge::Error::InvalidAxis { index, reason } => DocError::schema(format!("/grid/axes/{index}"), reason),
        other => DocError::schema("/grid", other.to_string()),
    })?;
    let compiled = match doc.kind {
        Kind::Synthesis => compile_synthesis(&doc, &grid)?,
        Kind::Nep => Compiled::Nep(compile_nep(&doc, &grid)?),
        Kind::Gnep => {
            let nep = compile_nep(&doc, &grid)?;
            let ks = compile_constraints(&doc, &grid, nep.players())?;
            Compiled::Gnep(GnepProblem::from_aligned(nep, ks).map_err(|e| DocError::materialize("/constraints", e))?)
        }
        Kind::InverseNash => {
            let layout = layout(&doc, &grid)?;
            let constraints = compile_constraints(&doc, &grid, layout.players())?;
            let target = set_mask(doc.target.as_ref().ok_or_else(|| missing("/target", doc.kind))?, &grid, "/target")?;
            Compiled::InverseNash { grid: grid.clone(), layout, constraints, target }
        }
        Kind::Fixedpoint | Kind::Minimax => {
            let src = doc.payoff.as_ref().ok_or_else(|| missing("/payoff", doc.kind))?;
            let square = grid.product(&grid);
            Compiled::Square(field(src, &square, "/payoff")?)
        }
    };
    Ok(Problem { doc, grid, compiled })
}

fn missing(pointer: &str, kind: Kind) -> DocError {
    DocError::schema(pointer, format!("required for kind '{}'", kind.name()))
}

fn layout(doc: &ProblemDocument, grid: &ProductGrid) -> Result<BlockLayout, DocError> {
    let sizes = doc.players.clone().unwrap_or_else(|| vec![1; grid.dim()]);
    let layout = BlockLayout::new(&sizes).map_err(|e| DocError::schema("/players", e.to_string()))?;
    if layout.dim() != grid.dim() {
        return Err(DocError::schema(
            "/players",
            format!("players own {} axes but the grid has {}", layout.dim(), grid.dim()),
        ));
    }
    Ok(layout)
}

fn compile_nep(doc: &ProblemDocument, grid: &ProductGrid) -> Result<NepProblem, DocError> {
    let layout = layout(doc, grid)?;
    if doc.payoffs.len() != layout.players() {
        return Err(DocError::schema(
            "/payoffs",
            format!("{} payoffs for {} players", doc.payoffs.len(), layout.players()),
        ));
    }
    let fields = doc
        .payoffs
        .iter()
        .enumerate()
        .map(|(i, src)| field(src, grid, &format!("/payoffs/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    NepProblem::from_fields(grid.clone(), layout, fields).map_err(|e| DocError::materialize("/payoffs", e))
}

fn compile_constraints(doc: &ProblemDocument, grid: &ProductGrid, players: usize) -> Result<Vec<CellMask>, DocError> {
    if doc.constraints.is_empty() {
        return Ok(vec![CellMask::full(grid.clone()); players]);
    }
    if doc.constraints.len() != players {
        return Err(DocError::schema(
            "/constraints",
            format!("{} constraints for {} players", doc.constraints.len(), players),
        ));
    }
    doc.constraints.iter().enumerate().map(|(i, s)| set_mask(s, grid, &format!("/constraints/{i}"))).collect()
}

fn compile_synthesis(doc: &ProblemDocument, grid: &ProductGrid) -> Result<Compiled, DocError> {
    let spec = doc.synthesis.clone().ok_or_else(|| missing("/synthesis", doc.kind))?;
    if spec.domain_axes == 0 || spec.domain_axes >= grid.dim() {
        return Err(DocError::schema(
            "/synthesis/domain_axes",
            format!("must be between 1 and {} for a {}-axis grid", grid.dim() - 1, grid.dim()),
        ));
    }
    if let Some(w) = &spec.window {
        if w.len() != grid.dim() {
            return Err(DocError::schema("/synthesis/window", format!("needs {} intervals", grid.dim())));
        }
    }
    let domain = grid.sub_grid(0..spec.domain_axes).map_err(|e| DocError::schema("/synthesis", e.to_string()))?;
    let codomain =
        grid.sub_grid(spec.domain_axes..grid.dim()).map_err(|e| DocError::schema("/synthesis", e.to_string()))?;
    let corr = |mask: CellMask, pointer: &str| {
        Correspondence::new(domain.clone(), codomain.clone(), mask).map_err(|e| DocError::materialize(pointer, e))
    };
    let m = corr(set_mask(&spec.graph, grid, "/synthesis/graph")?, "/synthesis/graph")?;
    if let Some(x) = m.first_empty_value() {
        if spec.window.is_none() {
            return Err(DocError::materialize(
                "/synthesis/graph",
                format!("the correspondence has an empty value at domain point {:?}", domain.multi_index(x)),
            ));
        }
    }
    let k = match &spec.ambient {
        Some(s) => corr(set_mask(s, grid, "/synthesis/ambient")?, "/synthesis/ambient")?,
        None => corr(CellMask::full(grid.clone()), "/synthesis/ambient")?,
    };
    Ok(Compiled::Synthesis { m, k, spec })
}

fn field(src: &str, grid: &ProductGrid, pointer: &str) -> Result<ScalarField, DocError> {
    let e = Expr::parse(src, grid.dim()).map_err(|source| DocError::Expression { pointer: pointer.into(), source })?;
    let values = invberge::par::map_range(grid.len(), |l| e.eval(&grid.coords(l)));
    let values = values
        .into_iter()
        .enumerate()
        .map(|(l, v)| v.map_err(|err| (l, err)))
        .collect::<Result<Vec<_>, (usize, EvalError)>>();
    let values = values
        .map_err(|(l, err)| DocError::materialize(pointer, format!("{err} at grid point {:?}", grid.multi_index(l))))?;
    ScalarField::new(grid.clone(), values).map_err(|e| DocError::materialize(pointer, e))
}

fn set_mask(spec: &SetSpec, grid: &ProductGrid, pointer: &str) -> Result<CellMask, DocError> {
    match spec {
        SetSpec::Predicate(src) => {
            let p = Predicate::parse(src, grid.dim())
                .map_err(|source| DocError::Expression { pointer: pointer.into(), source })?;
            let bits = invberge::par::map_range(grid.len(), |l| p.eval(&grid.coords(l)));
            let bits =
                bits.into_iter().enumerate().map(|(l, v)| v.map_err(|err| (l, err))).collect::<Result<Vec<_>, _>>();
            let bits = bits.map_err(|(l, err)| {
                DocError::materialize(pointer, format!("{err} at grid point {:?}", grid.multi_index(l)))
            })?;
            CellMask::from_bits(grid.clone(), bits).map_err(|e| DocError::materialize(pointer, e))
        }
        SetSpec::Points(points) => {
            CellMask::from_points(grid.clone(), points).map_err(|e| DocError::materialize(pointer, e))
        }
    }
}

/// Epsilon precedence: explicit override, document epsilon, `L · h`, zero.
pub fn effective_epsilon(doc: &ProblemDocument, grid: &ProductGrid, over: Option<f64>) -> f64 {
    over.or(doc.tolerances.epsilon)
        .or(doc.tolerances.lipschitz.map(|l| invberge::games::default_epsilon(l, grid)))
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"{
        "schema_version": "1",
        "kind": "gnep",
        "grid": {"axes": [{"lo": 0, "hi": 1, "n": 26}, {"lo": 0, "hi": 1, "n": 26}]},
        "payoffs": ["x2−x1^2", "2*x1−x2^2"],
        "constraints": ["x1<=x2", "x2<=1−x1"]
    }"#;

    #[test]
    fn example_round_trips() {
        let doc = parse_document(EXAMPLE).unwrap();
        let again = parse_document(&to_canonical_json(&doc)).unwrap();
        assert_eq!(doc, again);
        let p = compile(doc).unwrap();
        match p.compiled {
            Compiled::Gnep(g) => assert_eq!(g.nep().players(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_axes_rejected() {
        let e = parse_document(r#"{"schema_version":"1","kind":"nep","grid":{"axes":[]}}"#).unwrap_err();
        assert!(matches!(e, DocError::Schema { ref pointer, .. } if pointer == "/grid/axes"), "{e}");
    }

    #[test]
    fn unknown_field_has_pointer() {
        let e =
            parse_document(r#"{"schema_version":"1","kind":"nep","grid":{"axes":[{"lo":0,"hi":1,"n":2,"step":1}]}}"#)
                .unwrap_err();
        assert!(matches!(e, DocError::Json { ref pointer, .. } if pointer.starts_with("/grid/axes/0")), "{e}");
    }

    #[test]
    fn wrong_version_rejected() {
        let e = parse_document(r#"{"schema_version":"2","kind":"nep","grid":{"axes":[{"lo":0,"hi":1,"n":2}]}}"#);
        assert!(matches!(e, Err(DocError::Schema { .. })));
    }

    #[test]
    fn malformed_expression_reports_offset() {
        let text = EXAMPLE.replace("x2−x1^2", "x1++");
        match parse_problem(&text).unwrap_err() {
            DocError::Expression { pointer, source } => {
                assert_eq!(pointer, "/payoffs/0");
                assert_eq!(source.offset, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_constraint_slice_rejected() {
        let text = EXAMPLE.replace("x1<=x2", "x1<x2");
        assert!(matches!(parse_problem(&text), Err(DocError::Materialize { .. })));
    }

    #[test]
    fn division_guard_is_a_document_error() {
        let text = EXAMPLE.replace("x2−x1^2", "1/x1");
        assert!(matches!(parse_problem(&text), Err(DocError::Materialize { .. })));
    }

    #[test]
    fn explicit_points_and_synthesis() {
        let text = r#"{
            "schema_version": "1", "kind": "synthesis",
            "grid": {"axes": [{"lo": 0, "hi": 1, "n": 3}, {"lo": 0, "hi": 1, "n": 3}]},
            "synthesis": {"domain_axes": 1, "graph": {"points": [[0, 0], [1, 1], [2, 2]]}}
        }"#;
        let p = parse_problem(text).unwrap();
        let again = parse_document(&to_canonical_json(&p.doc)).unwrap();
        assert_eq!(p.doc, again);
        match p.compiled {
            Compiled::Synthesis { m, .. } => assert_eq!(m.graph().count(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
