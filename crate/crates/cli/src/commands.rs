//! Subcommands and the result document they emit.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use invberge::correspondence::{
    analytic_tolerance, argmax_correspondence, check_property_in, graph_intersection, Correspondence, Property,
};
use invberge::fixedpoint::{
    diagonal_gap, fixed_point_via_minimax, kakutani_via_nash, kyfan_minimax_check, square_side, Verdict,
};
use invberge::games::{
    best_response_masks, brute_force_gnash_budgeted, brute_force_nash_budgeted, indicator_reformulation, inverse_nash,
    reduce_gnep_to_nep, EquilibriumSet, GnepProblem, DEFAULT_BUDGET,
};
use invberge::synthesis::{
    adjacent_lipschitz, convexify_slices, expansion_family, reparameterize, shrinking_opens, synth_distance_payoff,
    synth_tau_payoff, synth_urysohn_sum, verify_inverse, window_correspondence, DEFAULT_URYSOHN_TERMS,
};
use invberge::{Metric, ProductGrid, ScalarField};

use crate::document::{self, effective_epsilon, Compiled, DocError, Method, Problem, SynthesisSpec};
use crate::field_io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "invberge", version, about = "Inverse maximum theorems, Nash games and fixed points on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a payoff whose argmax is the document's correspondence.
    Synth(Common),
    /// Enumerate the equilibria of a nep or gnep document.
    Solve(Common),
    /// Reduce a generalized game to a classical one and certify the reduction.
    Reduce(Common),
    /// Synthesize payoffs realizing a target equilibrium set.
    Invert(Common),
    /// Fixed points through the minimax and Nash constructions.
    Fixpoint(Common),
    /// Check the Ky Fan minimax inequality on a tabulated f(x, y).
    Minimax(Common),
    /// Run the property suite for a document.
    Check(Common),
    /// Convert a binary field file to CSV.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Problem document (JSON).
    input: PathBuf,
    /// Distance used by the constructions: euclid, l1 or linf.
    #[arg(long)]
    metric: Option<Metric>,
    /// Equilibrium tolerance; overrides the document.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Cap on profile-deviation pairs for enumeration.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "INVBERGE_THREADS")]
    threads: Option<usize>,
    /// Output directory; the result document goes to standard output without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock runtime in the result document (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Binary field file.
    field: PathBuf,
    /// CSV destination; standard output without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Name of the value column.
    #[arg(long, default_value = "theta")]
    name: String,
    #[arg(long, env = "INVBERGE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Document(#[from] DocError),
    #[error("{0}")]
    Library(#[from] invberge::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
}

/// The machine-readable outcome of one command.
#[derive(Debug, Clone, Serialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub operation: String,
    /// `sha256:` + hex digest of the canonical input document.
    pub input_digest: String,
    pub seed: u64,
    pub settings: Value,
    /// `pass` or `fail`.
    pub verdict: String,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

pub fn input_digest(doc: &document::ProblemDocument) -> String {
    let digest = Sha256::digest(document::to_canonical_json(doc).as_bytes());
    format!("sha256:{}", hex::encode(digest))
}

struct Outcome {
    pass: bool,
    outputs: Value,
    artifacts: Vec<(String, Vec<u8>)>,
}

struct Settings {
    metric: Metric,
    epsilon: f64,
    budget: u128,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        // A closed pipe on standard output (`| head`) is not a failure of the run.
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    let (name, file, common) = match command {
        Command::Export(args) => return with_threads(args.threads, || export(&args))?,
        Command::Synth(c) => ("synth", "synthesis.json", c),
        Command::Solve(c) => ("solve", "equilibria.json", c),
        Command::Reduce(c) => ("reduce", "reduction.json", c),
        Command::Invert(c) => ("invert", "inverse.json", c),
        Command::Fixpoint(c) => ("fixpoint", "fixpoint.json", c),
        Command::Minimax(c) => ("minimax", "minimax.json", c),
        Command::Check(c) => ("check", "check.json", c),
    };
    let text = fs::read_to_string(&common.input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", common.input.display())))?;
    let start = Instant::now();
    let (problem, outcome, settings) = with_threads(common.threads, || -> Result<_, CliError> {
        let problem = document::parse_problem(&text)?;
        let settings = Settings {
            metric: common.metric.unwrap_or(problem.doc.metric),
            epsilon: effective_epsilon(&problem.doc, &problem.grid, common.epsilon),
            budget: common.budget.or(problem.doc.budget).map_or(DEFAULT_BUDGET, u128::from),
        };
        if settings.epsilon.is_nan() || settings.epsilon < 0.0 {
            return Err(CliError::Usage(format!("epsilon must be >= 0, got {}", settings.epsilon)));
        }
        let outcome = match name {
            "synth" => synth(&problem, &settings)?,
            "solve" => solve(&problem, &settings)?,
            "reduce" => reduce(&problem, &settings)?,
            "invert" => invert(&problem, &settings)?,
            "fixpoint" => fixpoint(&problem, &settings)?,
            "minimax" => minimax(&problem)?,
            _ => check(&problem, &settings)?,
        };
        Ok((problem, outcome, settings))
    })??;
    let result = ResultDocument {
        schema_version: document::SCHEMA_VERSION.into(),
        operation: name.into(),
        input_digest: input_digest(&problem.doc),
        seed: problem.doc.seed.unwrap_or(0),
        settings: json!({
            "metric": settings.metric,
            "epsilon": settings.epsilon,
            "budget": settings.budget as u64,
        }),
        verdict: if outcome.pass { "pass" } else { "fail" }.into(),
        outputs: outcome.outputs,
        runtime_ms: common.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    let mut body = serde_json::to_string(&result).expect("result document serializes");
    body.push('\n');
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, bytes) in &outcome.artifacts {
                write_atomic(&dir.join(name), bytes)?;
            }
            write_atomic(&dir.join(file), body.as_bytes())?;
        }
        None => {
            if !outcome.artifacts.is_empty() {
                eprintln!("note: {} artifact file(s) not written; pass --out to keep them", outcome.artifacts.len());
            }
            io::stdout().write_all(body.as_bytes())?;
        }
    }
    if !outcome.pass {
        eprintln!("verdict: fail");
    }
    Ok(if outcome.pass { EXIT_OK } else { EXIT_NEGATIVE })
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(1) => Ok(invberge::par::sequential(f)),
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Writes through a temporary file in the destination directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn field_bytes(field: &ScalarField) -> Vec<u8> {
    let mut out = Vec::new();
    field_io::write_field(&mut out, field).expect("writing to memory");
    out
}

fn csv_bytes(field: &ScalarField, name: &str) -> Vec<u8> {
    let mut out = Vec::new();
    field_io::write_csv(&mut out, field, name).expect("writing to memory");
    out
}

fn wrong_kind(command: &str, expected: &str, p: &Problem) -> CliError {
    CliError::Usage(format!("{command} expects a {expected} document, got kind '{}'", p.doc.kind.name()))
}

fn equilibria_json(eq: &EquilibriumSet) -> Value {
    json!({
        "count": eq.len(),
        "epsilon": eq.epsilon,
        "profiles": eq.points(),
        "coordinates": eq.profiles.iter().map(|&p| eq.grid.coords(p)).collect::<Vec<_>>(),
        "residuals": eq.residuals,
    })
}

fn field_stats(field: &ScalarField) -> Value {
    json!({
        "shape": field.grid().shape(),
        "min": field.min(),
        "max": field.max(),
        "ones": field.values().iter().filter(|&&v| v == 1.0).count(),
    })
}

/// `M` and `K` after the optional window.
fn synthesis_inputs(
    m: &Correspondence,
    k: &Correspondence,
    spec: &SynthesisSpec,
) -> Result<(Correspondence, Correspondence), CliError> {
    match &spec.window {
        Some(w) => {
            let w: Vec<(f64, f64)> = w.iter().map(|&[a, b]| (a, b)).collect();
            Ok((window_correspondence(m, &w)?, window_correspondence(k, &w)?))
        }
        None => Ok((m.clone(), k.clone())),
    }
}

fn default_levels() -> Vec<f64> {
    (1..=16).map(|k| k as f64 / 16.0).collect()
}

fn synthesize(
    m: &Correspondence,
    k: &Correspondence,
    spec: &SynthesisSpec,
    method: Method,
    metric: Metric,
) -> Result<ScalarField, CliError> {
    if spec.convexify && method != Method::Tau {
        return Err(CliError::Usage("convexify applies to method 'tau' only".into()));
    }
    Ok(match method {
        Method::Distance => synth_distance_payoff(m, metric, None)?,
        Method::Tau => {
            let levels = spec.levels.clone().unwrap_or_else(default_levels);
            let mut family = expansion_family(m, &levels, metric)?;
            if spec.convexify {
                family = convexify_slices(&family)?;
            }
            synth_tau_payoff(&family)?
        }
        Method::Urysohn => {
            let terms = spec.terms.unwrap_or(DEFAULT_URYSOHN_TERMS);
            let diameter = m.graph().grid().diameter(metric);
            let radii: Vec<f64> = (1..=terms).map(|n| diameter * 0.5f64.powi(n as i32)).collect();
            let opens = shrinking_opens(m, k, &radii, metric)?;
            synth_urysohn_sum(m, k, &opens, terms, metric)?
        }
    })
}

fn synth(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let Compiled::Synthesis { m, k, spec } = &p.compiled else {
        return Err(wrong_kind("synth", "synthesis", p));
    };
    let (m, k) = synthesis_inputs(m, k, spec)?;
    let theta = synthesize(&m, &k, spec, spec.method, s.metric)?;
    let report = verify_inverse(&theta, &m, &k, 0.0)?;
    let outputs = json!({
        "method": spec.method,
        "field": field_stats(&theta),
        "graph_points": m.graph().count(),
        "inverse": report,
        "lipschitz_adjacent": adjacent_lipschitz(&theta, s.metric),
        "files": ["theta.bin", "theta.csv"],
    });
    Ok(Outcome {
        pass: report.equal,
        outputs,
        artifacts: vec![("theta.bin".into(), field_bytes(&theta)), ("theta.csv".into(), csv_bytes(&theta, "theta"))],
    })
}

fn as_gnep(p: &Problem, command: &str) -> Result<GnepProblem, CliError> {
    match &p.compiled {
        Compiled::Nep(n) => Ok(GnepProblem::unconstrained(n.clone())),
        Compiled::Gnep(g) => Ok(g.clone()),
        _ => Err(wrong_kind(command, "nep or gnep", p)),
    }
}

fn solve(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let eq = match &p.compiled {
        Compiled::Nep(n) => brute_force_nash_budgeted(n, s.epsilon, s.budget)?,
        Compiled::Gnep(g) => brute_force_gnash_budgeted(g, s.epsilon, s.budget)?,
        _ => return Err(wrong_kind("solve", "nep or gnep", p)),
    };
    Ok(Outcome { pass: !eq.is_empty(), outputs: equilibria_json(&eq), artifacts: vec![] })
}

fn reduce(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let g = as_gnep(p, "reduce")?;
    let r = reduce_gnep_to_nep(&g, p.doc.tolerances.argmax, s.metric)?;
    let reduced = brute_force_nash_budgeted(&r.nep, 0.0, s.budget)?;
    let artifacts = r
        .nep
        .payoffs()
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("reduced_payoff_{}.bin", i + 1), field_bytes(f)))
        .collect::<Vec<_>>();
    let outputs = json!({
        "tolerances": r.tolerances,
        "best_response_points": r.best_responses.iter().map(|m| m.count()).collect::<Vec<_>>(),
        "certificate": r.certificate,
        "reduced_equilibria": equilibria_json(&reduced),
        "files": artifacts.iter().map(|a| a.0.clone()).collect::<Vec<_>>(),
    });
    Ok(Outcome { pass: r.certificate.matches, outputs, artifacts })
}

fn invert(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let Compiled::InverseNash { grid, layout, constraints, target } = &p.compiled else {
        return Err(wrong_kind("invert", "inverse_nash", p));
    };
    let inv = inverse_nash(grid, layout, constraints.clone(), target, s.metric)?;
    let artifacts = inv
        .payoffs
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("payoff_{}.bin", i + 1), field_bytes(f)))
        .collect::<Vec<_>>();
    let outputs = json!({
        "target_points": target.count(),
        "certificate": inv.certificate,
        "files": artifacts.iter().map(|a| a.0.clone()).collect::<Vec<_>>(),
    });
    Ok(Outcome { pass: inv.certificate.matches, outputs, artifacts })
}

fn square(p: &Problem, command: &str, kind: &str) -> Result<ScalarField, CliError> {
    match &p.compiled {
        Compiled::Square(f) => Ok(f.clone()),
        _ => Err(wrong_kind(command, kind, p)),
    }
}

/// One grid step, the fixed-point tolerance when none is given.
fn step_tolerance(x: &ProductGrid) -> f64 {
    x.max_step()
}

fn fixpoint(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let theta = square(p, "fixpoint", "fixedpoint")?;
    let x = square_side(theta.grid())?;
    let eps =
        p.doc.tolerances.epsilon.or(s.epsilon.gt(&0.0).then_some(s.epsilon)).unwrap_or_else(|| step_tolerance(&x));
    let residual_tol = p.doc.tolerances.residual.unwrap_or_else(|| analytic_tolerance(&theta));
    let mm = fixed_point_via_minimax(&theta, residual_tol)?;
    let kk = kakutani_via_nash(&theta, s.metric, eps)?;
    let apart = kk.point.as_ref().map(|q| x.lattice_distance(&mm.point, q, s.metric));
    let minimax_ok = mm.certified && mm.distance_to_image <= eps;
    let nash_ok = kk.verdict == Verdict::Found;
    let outputs = json!({
        "epsilon": eps,
        "residual_tolerance": residual_tol,
        "minimax": mm,
        "minimax_coordinates": x.coords_of(&mm.point),
        "nash": kk,
        "distance_between_methods": apart,
    });
    Ok(Outcome { pass: minimax_ok && nash_ok, outputs, artifacts: vec![] })
}

fn minimax(p: &Problem) -> Result<Outcome, CliError> {
    let f = square(p, "minimax", "minimax")?;
    let tol = p.doc.tolerances.residual.unwrap_or(1e-12);
    let r = kyfan_minimax_check(&f, tol)?;
    Ok(Outcome { pass: r.holds, outputs: json!({ "report": r }), artifacts: vec![] })
}

fn check(p: &Problem, s: &Settings) -> Result<Outcome, CliError> {
    let mut checks: Vec<(String, bool, Value)> = Vec::new();
    let mut info = serde_json::Map::new();
    match &p.compiled {
        Compiled::Synthesis { m, k, spec } => {
            let (m, k) = synthesis_inputs(m, k, spec)?;
            let delta = m.domain().max_step();
            let props: Vec<Value> = [
                Property::NonemptyValues,
                Property::ClosedGraph,
                Property::CompactValues,
                Property::ConvexValues,
                Property::Usc,
                Property::Lsc,
            ]
            .into_iter()
            .map(|prop| serde_json::to_value(check_property_in(&m, prop, delta, s.metric)).expect("report serializes"))
            .collect();
            info.insert("properties".into(), Value::Array(props));
            for method in [Method::Distance, Method::Tau, Method::Urysohn] {
                let plain = SynthesisSpec { convexify: spec.convexify && method == Method::Tau, ..spec.clone() };
                let theta = synthesize(&m, &k, &plain, method, s.metric)?;
                let exact = theta.level_mask(1.0) == *m.graph();
                let report = verify_inverse(&theta, &m, &k, 0.0)?;
                checks.push((format!("{method:?}: theta = 1 exactly on gra(M)").to_lowercase(), exact, json!(null)));
                checks.push((format!("{method:?}: argmax equals M").to_lowercase(), report.equal, json!(report)));
                if method == Method::Distance {
                    let lip = adjacent_lipschitz(&theta, s.metric);
                    checks.push(("distance: adjacent slope <= 1".into(), lip <= 1.0 + 1e-12, json!(lip)));
                    let cubed = reparameterize(&theta, |u| u * u * u)?;
                    let same = argmax_correspondence(&k, &cubed, 0.0)? == argmax_correspondence(&k, &theta, 0.0)?;
                    checks.push(("distance: argmax invariant under u^3".into(), same, json!(null)));
                }
            }
        }
        Compiled::Nep(_) | Compiled::Gnep(_) => {
            let g = as_gnep(p, "check")?;
            let eq = brute_force_gnash_budgeted(&g, s.epsilon, s.budget)?;
            let brs = best_response_masks(&g, &vec![s.epsilon; g.nep().players()])?;
            let inter = graph_intersection(&brs.iter().collect::<Vec<_>>())?;
            checks.push((
                "equilibria equal the intersection of best-response graphs".into(),
                eq.mask() == inter,
                json!(eq.len()),
            ));
            let r = reduce_gnep_to_nep(&g, p.doc.tolerances.argmax, s.metric)?;
            checks.push(("reduction preserves equilibria".into(), r.certificate.matches, json!(r.certificate)));
            let (_, cert) = indicator_reformulation(&g, s.epsilon)?;
            checks.push(("indicator reformulation preserves equilibria".into(), cert.matches, json!(cert)));
        }
        Compiled::InverseNash { grid, layout, constraints, target } => {
            let inv = inverse_nash(grid, layout, constraints.clone(), target, s.metric)?;
            checks.push((
                "synthesized payoffs realize the target".into(),
                inv.certificate.matches,
                json!(inv.certificate),
            ));
        }
        Compiled::Square(f) => match p.doc.kind {
            document::Kind::Minimax => {
                let r = kyfan_minimax_check(f, p.doc.tolerances.residual.unwrap_or(1e-12))?;
                let ok = !r.rows_quasiconcave || r.holds;
                checks.push(("quasi-concave rows imply the minimax inequality".into(), ok, json!(r)));
            }
            _ => {
                let r = kyfan_minimax_check(&diagonal_gap(f)?, 0.0)?;
                checks.push(("diagonal gap: rhs = 0 and inequality holds".into(), r.rhs == 0.0 && r.holds, json!(r)));
            }
        },
    }
    let pass = checks.iter().all(|c| c.1);
    let list: Vec<Value> =
        checks.into_iter().map(|(name, ok, detail)| json!({"name": name, "pass": ok, "detail": detail})).collect();
    info.insert("checks".into(), Value::Array(list));
    Ok(Outcome { pass, outputs: Value::Object(info), artifacts: vec![] })
}

fn export(args: &ExportArgs) -> Result<i32, CliError> {
    let bytes =
        fs::read(&args.field).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.field.display())))?;
    let field = field_io::read_field(&mut bytes.as_slice())?;
    let csv = csv_bytes(&field, &args.name);
    match &args.out {
        Some(path) => write_atomic(path, &csv)?,
        None => io::stdout().write_all(&csv)?,
    }
    Ok(EXIT_OK)
}
