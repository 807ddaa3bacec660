//! Batch surface over the library. Every invocation reads JSON files,
//! writes exactly one JSON document to stdout, and keeps human-readable
//! notes on stderr. Exit codes are a stable contract:
//!
//! * 0 — success (a stuck back-and-forth run is a reported outcome, not
//!   a failure);
//! * 1 — input error: unreadable files, malformed JSON or rationals,
//!   flag misuse, inputs over an explicit ceiling;
//! * 2 — validation failure: well-formed input whose mathematical
//!   content is rejected (an invalid space, non-isometric legs, an
//!   infeasible sandwich);
//! * 3 — property failure: a re-verification or property suite found a
//!   counterexample; the document carries the witness.
//!
//! All randomness flows from `--seed` through ChaCha8 (case `i` of a
//! suite runs on stream `i`), so any counterexample replays bit-for-bit
//! on any platform.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use polybase::polytope::FACET_DIM_LIMIT;
use polybase::{
    amalgamate, back_and_forth_epsilon, back_and_forth_exact, build_generic_chain, extension_ball,
    fraisse_step, run_suite, BackForthOutcome, BasedMorphism, BasedSpace, Chain, ComplexityBound,
    EmbeddingSearch, GrowthPolicy, Polytope, Rational, RationalVector, SandwichParams, SUITE_NAMES,
};

/// Subset scans (brute-force suppression) are refused above this size.
const BRUTE_DIM_LIMIT: usize = 16;

#[derive(Parser)]
#[command(
    name = "polybase",
    version,
    about = "Exact toolkit for based spaces with polyhedral unit balls",
    after_help = "Exit codes: 0 success, 1 input error, 2 validation failure, 3 property failure."
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunConfig {
    /// Seed for every random choice (ChaCha8; identical seeds replay).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Write the primary document here; stdout then carries a receipt.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Re-verify outputs through an independent route before reporting
    /// success; disable with `--verify false`.
    #[arg(
        long,
        global = true,
        default_value_t = true,
        action = ArgAction::Set,
        num_args = 0..=1,
        default_missing_value = "true"
    )]
    verify: bool,

    /// Ceiling on space dimension (used by build-universal; elsewhere an
    /// input guard when set).
    #[arg(long = "max-dim", global = true)]
    max_dim: Option<usize>,

    /// Ceiling on vertex-coordinate denominators (same roles as --max-dim).
    #[arg(long = "max-den", global = true)]
    max_den: Option<u32>,

    /// Ceiling on ball generator pairs (same roles as --max-dim).
    #[arg(long = "max-gen", global = true)]
    max_gen: Option<usize>,

    /// Write the vertices of the command's 2-dimensional ball as CSV.
    #[arg(long = "plot-data", global = true)]
    plot_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact validation report for a space file.
    Validate {
        /// Space JSON: {"labels": [...], "k_bound": "3/2", "ball": {...}}.
        #[arg(long)]
        space: PathBuf,
    },
    /// Exact norm of a point in a space.
    Norm {
        #[arg(long)]
        space: PathBuf,
        /// Comma-separated rational coordinates, e.g. "5/4,1/2".
        #[arg(long)]
        point: String,
    },
    /// Exact suppression constant of a space.
    Suppress {
        #[arg(long)]
        space: PathBuf,
    },
    /// Pushout of two isometric legs out of a shared space.
    Amalgamate {
        /// Morphism JSON for the left leg Z -> X.
        #[arg(long)]
        left: PathBuf,
        /// Morphism JSON for the right leg Z -> Y.
        #[arg(long)]
        right: PathBuf,
    },
    /// Extend a perturbed subspace ball to the whole space, keeping the
    /// basis normalized and suppression exactly 1.
    Extend {
        /// A 1-based space file.
        #[arg(long)]
        space: PathBuf,
        /// Comma-separated subspace labels.
        #[arg(long)]
        labels: String,
        /// Polytope JSON for the perturbed ball on those coordinates.
        #[arg(long)]
        ball: PathBuf,
        /// Strict sandwich bound, a positive rational.
        #[arg(long)]
        epsilon: String,
    },
    /// Grow a chain by draining the one-point-extension queue.
    BuildUniversal {
        /// Suppression bound for every stage.
        #[arg(long, default_value = "1")]
        k: String,
        /// Stop after this many executed extensions even if the queue is
        /// not empty.
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
    },
    /// Alternate embeddings between two chain files, emitting a
    /// transcript.
    Backforth {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum, default_value_t = BackForthMode::Exact)]
        mode: BackForthMode,
        /// Certification bound for eps mode, a positive rational.
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        /// Grow a chain by amalgamation when a completion is missing
        /// (exact mode; eps mode always grows).
        #[arg(long)]
        grow: bool,
        /// Seed morphism file for eps mode; defaults to the empty map
        /// between the two initial stages.
        #[arg(long)]
        f0: Option<PathBuf>,
    },
    /// Renormalize a space to suppression exactly 1.
    Renorm {
        #[arg(long)]
        space: PathBuf,
    },
    /// Run a seeded property suite, or `chain` to audit a built chain
    /// file.
    Suite {
        /// amalgam | quotient | l1sum | suppression | extension | renorm
        /// | chain
        name: String,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Chain file to audit (required for `chain`).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackForthMode {
    Exact,
    Eps,
}

/// A failed invocation: the kind fixes the exit code, the document (when
/// present) still goes to stdout so witnesses reach pipelines.
struct Failure {
    kind: FailureKind,
    message: String,
    doc: Option<Value>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum FailureKind {
    Input,
    Validation,
    Property,
}

impl FailureKind {
    fn exit_code(self) -> u8 {
        match self {
            FailureKind::Input => 1,
            FailureKind::Validation => 2,
            FailureKind::Property => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            FailureKind::Input => "input",
            FailureKind::Validation => "validation",
            FailureKind::Property => "property",
        }
    }
}

impl Failure {
    fn new(kind: FailureKind, message: impl Display) -> Self {
        Failure {
            kind,
            message: message.to_string(),
            doc: None,
        }
    }

    fn with_doc(kind: FailureKind, message: impl Display, doc: Value) -> Self {
        Failure {
            kind,
            message: message.to_string(),
            doc: Some(doc),
        }
    }
}

fn input(e: impl Display) -> Failure {
    Failure::new(FailureKind::Input, e)
}

fn validation(e: impl Display) -> Failure {
    Failure::new(FailureKind::Validation, e)
}

fn property(e: impl Display) -> Failure {
    Failure::new(FailureKind::Property, e)
}

type CmdResult = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = dispatch(&cli.command, &cli.run);
    match outcome {
        Ok(doc) => match emit(doc, &cli.run) {
            Ok(printed) => {
                println!("{printed}");
                ExitCode::SUCCESS
            }
            Err(f) => fail(f),
        },
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    let doc = f.doc.unwrap_or_else(|| {
        json!({ "error": f.message, "kind": f.kind.label() })
    });
    println!("{doc}");
    eprintln!("error ({}): {}", f.kind.label(), f.message);
    ExitCode::from(f.kind.exit_code())
}

fn dispatch(command: &Command, cfg: &RunConfig) -> CmdResult {
    match command {
        Command::Validate { space } => cmd_validate(space, cfg),
        Command::Norm { space, point } => cmd_norm(space, point, cfg),
        Command::Suppress { space } => cmd_suppress(space, cfg),
        Command::Amalgamate { left, right } => cmd_amalgamate(left, right, cfg),
        Command::Extend {
            space,
            labels,
            ball,
            epsilon,
        } => cmd_extend(space, labels, ball, epsilon, cfg),
        Command::BuildUniversal { k, steps } => cmd_build_universal(k, *steps, cfg),
        Command::Backforth {
            x,
            y,
            mode,
            epsilon,
            rounds,
            grow,
            f0,
        } => cmd_backforth(x, y, *mode, epsilon.as_deref(), *rounds, *grow, f0.as_deref(), cfg),
        Command::Renorm { space } => cmd_renorm(space, cfg),
        Command::Suite { name, cases, file } => cmd_suite(name, *cases, file.as_deref(), cfg),
    }
}

// ---------------------------------------------------------------------
// Plumbing

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("cannot parse {}: {e}", path.display())))
}

fn parse_rational(text: &str) -> Result<Rational, Failure> {
    text.trim().parse::<Rational>().map_err(input)
}

fn parse_point(text: &str) -> Result<RationalVector, Failure> {
    let coords = text
        .split(',')
        .map(parse_rational)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RationalVector::new(coords))
}

fn parse_labels(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn to_value(v: impl serde::Serialize) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(input)
}

/// Enforces the explicit ceilings on an input space; absent flags do not
/// constrain.
fn check_ceilings(space: &BasedSpace, cfg: &RunConfig) -> Result<(), Failure> {
    if let Some(d) = cfg.max_dim {
        if space.dim() > d {
            return Err(input(format!(
                "space dimension {} exceeds --max-dim {d}",
                space.dim()
            )));
        }
    }
    if let Some(g) = cfg.max_gen {
        if space.ball().generator_count() > g {
            return Err(input(format!(
                "{} generator pairs exceed --max-gen {g}",
                space.ball().generator_count()
            )));
        }
    }
    if let Some(den) = cfg.max_den {
        let cap = num_bigint::BigInt::from(den);
        for gen in space.ball().generators() {
            for i in 0..space.dim() {
                if gen.entry(i).denom() > &cap {
                    return Err(input(format!(
                        "a vertex coordinate has denominator above --max-den {den}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn emit(doc: Value, cfg: &RunConfig) -> Result<Value, Failure> {
    match &cfg.out {
        None => Ok(doc),
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&doc).map_err(input)?;
            text.push('\n');
            fs::write(path, text)
                .map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
            Ok(json!({ "status": "ok", "wrote": path.display().to_string() }))
        }
    }
}

/// Writes the ±vertex list of a 2-dimensional ball as `x,y` CSV rows in
/// counterclockwise order, starting in the closed upper half-plane.
fn write_plot_data(path: &Path, ball: &Polytope) -> Result<(), Failure> {
    if ball.dim() != 2 {
        return Err(input(format!(
            "--plot-data needs a 2-dimensional ball, this one has dimension {}",
            ball.dim()
        )));
    }
    let pruned = ball.prune_redundant().map_err(validation)?;
    let mut vertices: Vec<(Rational, Rational)> = Vec::new();
    for g in pruned.generators() {
        let (x, y) = (g.entry(0), g.entry(1));
        vertices.push((x.clone(), y.clone()));
        vertices.push((-&x, -&y));
    }
    vertices.sort_by(|a, b| angular_order(a, b));
    let mut csv = String::from("x,y\n");
    for (x, y) in &vertices {
        csv.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, csv).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

/// Counterclockwise from the positive x-axis, exactly: upper half-plane
/// (including the positive axis) first, ties within a half-plane broken
/// by the cross product.
fn angular_order(a: &(Rational, Rational), b: &(Rational, Rational)) -> std::cmp::Ordering {
    fn half(p: &(Rational, Rational)) -> u8 {
        let zero = Rational::zero();
        if p.1 > zero || (p.1 == zero && p.0 > zero) {
            0
        } else {
            1
        }
    }
    half(a).cmp(&half(b)).then_with(|| {
        let cross = &(&a.0 * &b.1) - &(&a.1 * &b.0);
        let zero = Rational::zero();
        if cross > zero {
            std::cmp::Ordering::Less
        } else if cross < zero {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    })
}

fn maybe_plot(ball: &Polytope, cfg: &RunConfig) -> Result<(), Failure> {
    match &cfg.plot_data {
        Some(path) => write_plot_data(path, ball),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------
// Commands

fn cmd_validate(path: &Path, cfg: &RunConfig) -> CmdResult {
    let space: BasedSpace = read_json(path)?;
    check_ceilings(&space, cfg)?;
    maybe_plot(space.ball(), cfg)?;
    let report = space.validate().map_err(validation)?;
    let doc = json!({ "valid": report.is_valid(), "report": report });
    if report.is_valid() {
        Ok(doc)
    } else {
        Err(Failure::with_doc(
            FailureKind::Validation,
            format!(
                "space fails validation at bound {} ({} basis failures, {} suppression witnesses)",
                space.k_bound(),
                report.basis_failures.len(),
                report.suppression_failures.len()
            ),
            doc,
        ))
    }
}

fn cmd_norm(path: &Path, point: &str, cfg: &RunConfig) -> CmdResult {
    let space: BasedSpace = read_json(path)?;
    check_ceilings(&space, cfg)?;
    maybe_plot(space.ball(), cfg)?;
    let p = parse_point(point)?;
    if p.dim() != space.dim() {
        return Err(input(format!(
            "point has {} coordinates, the space has {}",
            p.dim(),
            space.dim()
        )));
    }
    let norm = space.norm(&p).map_err(validation)?;
    if cfg.verify {
        if let Some(v) = &norm {
            if space.dim() <= FACET_DIM_LIMIT {
                let dual = space.ball().gauge_via_facets(&p).map_err(validation)?;
                if &dual != v {
                    return Err(property(format!(
                        "vertex route gives {v}, facet route gives {dual}"
                    )));
                }
            }
        }
    }
    Ok(json!({ "point": to_value(&p)?, "norm": norm }))
}

fn cmd_suppress(path: &Path, cfg: &RunConfig) -> CmdResult {
    let space: BasedSpace = read_json(path)?;
    check_ceilings(&space, cfg)?;
    maybe_plot(space.ball(), cfg)?;
    let fast = space.suppression_constant().map_err(validation)?;
    if cfg.verify && space.dim() <= BRUTE_DIM_LIMIT {
        let brute = space.suppression_constant_brute().map_err(validation)?;
        if brute != fast {
            return Err(property(format!(
                "support scan gives {fast:?}, subset brute force gives {brute:?}"
            )));
        }
    }
    Ok(json!({ "suppression": fast }))
}

fn cmd_amalgamate(left: &Path, right: &Path, cfg: &RunConfig) -> CmdResult {
    let f: BasedMorphism = read_json(left)?;
    let g: BasedMorphism = read_json(right)?;
    let am = amalgamate(&f, &g).map_err(validation)?;
    if cfg.verify {
        am.left.certify_isometry().map_err(property)?;
        am.right.certify_isometry().map_err(property)?;
        let via_left = f.then(&am.left).map_err(property)?;
        let via_right = g.then(&am.right).map_err(property)?;
        if via_left.label_map() != via_right.label_map() {
            return Err(property("the pushout square does not commute"));
        }
        let kx = f.codomain().k_bound();
        let ky = g.codomain().k_bound();
        let bound = if kx >= ky { kx.clone() } else { ky.clone() };
        match am.space.suppression_constant().map_err(property)? {
            Some(s) if s <= bound => {}
            s => {
                return Err(property(format!(
                    "pushout suppression {s:?} exceeds the bound {bound}"
                )))
            }
        }
    }
    maybe_plot(am.space.ball(), cfg)?;
    to_value(&am)
}

fn cmd_extend(
    space: &Path,
    labels: &str,
    ball: &Path,
    epsilon: &str,
    cfg: &RunConfig,
) -> CmdResult {
    let a: BasedSpace = read_json(space)?;
    check_ceilings(&a, cfg)?;
    let lambda_labels = parse_labels(labels);
    let b_prime: Polytope = read_json(ball)?;
    let eps = parse_rational(epsilon)?;
    if !eps.is_positive() {
        return Err(input("epsilon must be positive"));
    }
    let section = a.based_subspace(&lambda_labels).map_err(validation)?;
    let params = SandwichParams::derive(&b_prime, section.ball(), &eps).map_err(validation)?;
    let result = extension_ball(&a, &lambda_labels, &b_prime, &params).map_err(validation)?;
    if cfg.verify {
        let r = &result.report;
        let ok = r.restriction_equal
            && r.basis_norms_one
            && r.suppression == Rational::one()
            && r.expansion_max < r.bound
            && r.contraction_max < r.bound;
        if !ok {
            return Err(Failure::with_doc(
                FailureKind::Property,
                "an extension obligation fails on re-check",
                to_value(&result)?,
            ));
        }
    }
    maybe_plot(result.a_prime.ball(), cfg)?;
    to_value(&result)
}

fn cmd_build_universal(k: &str, steps: usize, cfg: &RunConfig) -> CmdResult {
    let defaults = ComplexityBound::default();
    let bound = ComplexityBound::new(
        cfg.max_dim.unwrap_or(defaults.max_dim),
        cfg.max_den.unwrap_or(defaults.max_denominator),
        cfg.max_gen.unwrap_or(defaults.max_generators),
    )
    .map_err(input)?;
    let k = parse_rational(k)?;
    let start = Instant::now();
    let chain = build_generic_chain(&bound, &k, steps, cfg.seed).map_err(validation)?;
    eprintln!(
        "built {} stages (top dimension {}) in {:.1}s",
        chain.stages().len(),
        chain.top().dim(),
        start.elapsed().as_secs_f64()
    );
    if cfg.verify {
        chain.validate().map_err(property)?;
    }
    to_value(&chain)
}

#[allow(clippy::too_many_arguments)]
fn cmd_backforth(
    x: &Path,
    y: &Path,
    mode: BackForthMode,
    epsilon: Option<&str>,
    rounds: usize,
    grow: bool,
    f0: Option<&Path>,
    cfg: &RunConfig,
) -> CmdResult {
    let mut x_chain: Chain = read_json(x)?;
    let mut y_chain: Chain = read_json(y)?;
    match mode {
        BackForthMode::Exact => {
            if epsilon.is_some() {
                return Err(input("--epsilon only applies to --mode eps"));
            }
            let policy = if grow {
                GrowthPolicy::Growable
            } else {
                GrowthPolicy::Frozen
            };
            let outcome = back_and_forth_exact(&mut x_chain, &mut y_chain, rounds, policy)
                .map_err(validation)?;
            match outcome {
                BackForthOutcome::Complete(t) => {
                    if cfg.verify {
                        t.validate(&x_chain, &y_chain).map_err(property)?;
                    }
                    Ok(json!({ "status": "complete", "transcript": to_value(&t)? }))
                }
                BackForthOutcome::Stuck(s) => {
                    eprintln!(
                        "stuck after {} rounds; rerun with --grow to extend by amalgamation",
                        s.rounds_completed
                    );
                    Ok(json!({ "status": "stuck", "report": to_value(&s)? }))
                }
            }
        }
        BackForthMode::Eps => {
            let eps = parse_rational(epsilon.ok_or_else(|| input("--mode eps needs --epsilon"))?)?;
            let seed_map = match f0 {
                Some(path) => read_json::<BasedMorphism>(path)?,
                None => BasedMorphism::new(
                    x_chain.stages()[0].clone(),
                    y_chain.stages()[0].clone(),
                    BTreeMap::new(),
                )
                .map_err(validation)?,
            };
            let t = back_and_forth_epsilon(&mut x_chain, &mut y_chain, &seed_map, &eps, rounds)
                .map_err(validation)?;
            if cfg.verify {
                t.validate(&x_chain, &y_chain).map_err(property)?;
            }
            Ok(json!({ "status": "complete", "transcript": to_value(&t)? }))
        }
    }
}

fn cmd_renorm(path: &Path, cfg: &RunConfig) -> CmdResult {
    let space: BasedSpace = read_json(path)?;
    check_ceilings(&space, cfg)?;
    let renormed = space.renorm_to_one_based().map_err(validation)?;
    if cfg.verify {
        let report = renormed.validate().map_err(property)?;
        if !report.is_valid() || report.suppression != Some(Rational::one()) {
            return Err(Failure::with_doc(
                FailureKind::Property,
                "renormed space does not validate at suppression exactly 1",
                json!({ "report": report }),
            ));
        }
    }
    maybe_plot(renormed.ball(), cfg)?;
    to_value(&renormed)
}

fn cmd_suite(name: &str, cases: usize, file: Option<&Path>, cfg: &RunConfig) -> CmdResult {
    if name == "chain" {
        let path = file.ok_or_else(|| input("suite chain needs --file with a built chain"))?;
        return audit_chain(path, cfg);
    }
    if file.is_some() {
        return Err(input("--file only applies to the chain suite"));
    }
    let report = run_suite(name, cases, cfg.seed).map_err(|_| {
        input(format!(
            "unknown suite {name:?}; expected one of {} or chain",
            SUITE_NAMES.join(", ")
        ))
    })?;
    eprintln!(
        "suite {name}: {}/{} cases passed (seed {})",
        report.passed, report.cases, cfg.seed
    );
    let doc = to_value(&report)?;
    if report.all_passed() {
        Ok(doc)
    } else {
        Err(Failure::with_doc(
            FailureKind::Property,
            format!(
                "suite {name}: {} of {} cases failed; counterexamples replay from (seed, case)",
                report.failures.len(),
                report.cases
            ),
            doc,
        ))
    }
}

/// Audits a built chain file: structural validation, then a replay of the
/// request log checking that every pushout leg closes its triangle
/// (g∘f = inclusion) and that the replayed chain reproduces the file
/// verbatim. With all three ceilings set, additionally checks that every
/// space enumerable at that bound embeds into the final stage.
fn audit_chain(path: &Path, cfg: &RunConfig) -> CmdResult {
    let chain: Chain = read_json(path)?;
    chain.validate().map_err(property)?;
    let mut replica = Chain::trivial(chain.k_bound().clone()).map_err(property)?;
    for (step, req) in chain.request_log().iter().enumerate() {
        let leg = fraisse_step(&mut replica, req)
            .map_err(|e| property(format!("replaying logged step {step}: {e}")))?;
        let composite = req
            .embedding()
            .then(&leg)
            .map_err(|e| property(format!("composing logged step {step}: {e}")))?;
        let source = &replica.stages()[req.source_stage()];
        let inclusion = BasedMorphism::inclusion(source, replica.top()).map_err(property)?;
        if composite.label_map() != inclusion.label_map()
            || composite.domain() != inclusion.domain()
            || composite.codomain() != inclusion.codomain()
        {
            return Err(property(format!(
                "logged step {step}: pushout leg composed with the request embedding is not \
                 the stage inclusion"
            )));
        }
    }
    let replica_json = serde_json::to_string(&replica).map_err(input)?;
    let original_json = serde_json::to_string(&chain).map_err(input)?;
    if replica_json != original_json {
        return Err(property(
            "replaying the request log does not reproduce the chain file",
        ));
    }
    let mut swept = None;
    if let (Some(d), Some(den), Some(g)) = (cfg.max_dim, cfg.max_den, cfg.max_gen) {
        let bound = ComplexityBound::new(d, den, g).map_err(input)?;
        let spaces =
            polybase::enumerate_spaces(&bound, chain.k_bound()).map_err(validation)?;
        let mut search = EmbeddingSearch::new(chain.top());
        for (i, a) in spaces.iter().enumerate() {
            let found = search
                .find(a, &BTreeMap::new())
                .map_err(|e| property(format!("probing enumerated space {i}: {e}")))?;
            let f = found.ok_or_else(|| {
                property(format!(
                    "enumerated space {i} (dim {}) does not embed into the final stage",
                    a.dim()
                ))
            })?;
            f.certify_isometry()
                .map_err(|e| property(format!("embedding of space {i}: {e}")))?;
        }
        swept = Some(spaces.len());
    } else {
        eprintln!("set --max-dim/--max-den/--max-gen to also sweep enumerated spaces");
    }
    Ok(json!({
        "stages": chain.stages().len(),
        "replayed_steps": chain.request_log().len(),
        "replay_reproduces_file": true,
        "swept_spaces": swept,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_the_stable_contract() {
        assert_eq!(FailureKind::Input.exit_code(), 1);
        assert_eq!(FailureKind::Validation.exit_code(), 2);
        assert_eq!(FailureKind::Property.exit_code(), 3);
        assert_eq!(input("x").kind.exit_code(), 1);
        assert_eq!(validation("x").kind.exit_code(), 2);
        assert_eq!(property("x").kind.exit_code(), 3);
    }

    #[test]
    fn zero_denominators_are_input_errors() {
        assert!(parse_point("1,1/0").is_err());
        assert!(parse_point("1,1/2").is_ok());
        assert_eq!(
            parse_point("5/4,1/2").unwrap(),
            RationalVector::new(vec![Rational::frac(5, 4), Rational::frac(1, 2)])
        );
    }

    #[test]
    fn plot_vertices_come_out_counterclockwise() {
        let q = |p: i64, d: i64| Rational::frac(p, d);
        let mut pts = vec![
            (q(-5, 4), q(-1, 2)),
            (q(0, 1), q(1, 1)),
            (q(5, 4), q(1, 2)),
            (q(1, 1), q(0, 1)),
            (q(-1, 1), q(0, 1)),
            (q(0, 1), q(-1, 1)),
        ];
        pts.sort_by(angular_order);
        let expect = vec![
            (q(1, 1), q(0, 1)),
            (q(5, 4), q(1, 2)),
            (q(0, 1), q(1, 1)),
            (q(-1, 1), q(0, 1)),
            (q(-5, 4), q(-1, 2)),
            (q(0, 1), q(-1, 1)),
        ];
        assert_eq!(pts, expect);
    }
}
