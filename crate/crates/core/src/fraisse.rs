//! Bounded enumeration of K-based spaces with rational balls, extension
//! requests out of chain stages, and the dovetailed builder that produces
//! finite prefixes of the generic chain.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::amalgam::amalgamate;
use crate::error::{Error, Result};
use crate::exactnum::{Rational, RationalVector};
use crate::morphism::{BasedMorphism, IsometryOutcome};
use crate::polytope::Polytope;
use crate::space::{generator_matrix, permutations, BasedSpace};

/// Generator-subset scans beyond this many subsets are refused rather than
/// silently run for hours.
const ENUMERATION_SUBSET_LIMIT: usize = 200_000;

/// Finite-enumeration ceilings: ambient dimension, entry denominators, and
/// signed generator count of every emitted ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityBound {
    pub max_dim: usize,
    pub max_denominator: u32,
    pub max_generators: usize,
}

impl Default for ComplexityBound {
    fn default() -> Self {
        ComplexityBound {
            max_dim: 3,
            max_denominator: 4,
            max_generators: 12,
        }
    }
}

impl ComplexityBound {
    pub fn new(max_dim: usize, max_denominator: u32, max_generators: usize) -> Result<Self> {
        if max_dim == 0 || max_denominator == 0 || max_generators == 0 {
            return Err(Error::InvalidInput(
                "complexity bounds must all be positive".into(),
            ));
        }
        Ok(ComplexityBound {
            max_dim,
            max_denominator,
            max_generators,
        })
    }

    /// `max_generators` counts signed generators; the ball stores one
    /// canonical representative per ± pair.
    fn pair_budget(&self) -> usize {
        self.max_generators / 2
    }

    fn check(&self) -> Result<()> {
        ComplexityBound::new(self.max_dim, self.max_denominator, self.max_generators).map(|_| ())
    }
}

/// A certified isometry out of a chain stage into a bounded space: the unit
/// of work the chain builder satisfies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionRequest {
    source_stage: usize,
    target: BasedSpace,
    embedding: BasedMorphism,
}

impl ExtensionRequest {
    pub fn new(source_stage: usize, target: BasedSpace, embedding: BasedMorphism) -> Result<Self> {
        if embedding.codomain() != &target {
            return Err(Error::SpaceMismatch(
                "request embedding must land in the request target".into(),
            ));
        }
        embedding.certify_isometry()?;
        Ok(ExtensionRequest {
            source_stage,
            target,
            embedding,
        })
    }

    pub fn source_stage(&self) -> usize {
        self.source_stage
    }

    pub fn target(&self) -> &BasedSpace {
        &self.target
    }

    pub fn embedding(&self) -> &BasedMorphism {
        &self.embedding
    }
}

/// An increasing sequence of based spaces, each sitting inside the next as
/// a based subspace with the same-label inclusion an exact isometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    stages: Vec<BasedSpace>,
    inclusions: Vec<BasedMorphism>,
    k_bound: Rational,
    request_log: Vec<ExtensionRequest>,
}

impl Chain {
    /// A chain consisting of the zero space alone.
    pub fn trivial(k_bound: Rational) -> Result<Self> {
        if k_bound < Rational::one() {
            return Err(Error::InvalidInput(
                "suppression bound must be at least 1".into(),
            ));
        }
        let stage = BasedSpace::new(Vec::new(), Polytope::new(0, Vec::new())?, k_bound.clone())?;
        stage.mark_one_based();
        Ok(Chain {
            stages: vec![stage],
            inclusions: Vec::new(),
            k_bound,
            request_log: Vec::new(),
        })
    }

    /// Reassembles a chain from its pieces, re-verifying every invariant.
    pub fn from_parts(
        stages: Vec<BasedSpace>,
        inclusions: Vec<BasedMorphism>,
        k_bound: Rational,
        request_log: Vec<ExtensionRequest>,
    ) -> Result<Self> {
        let chain = Chain {
            stages,
            inclusions,
            k_bound,
            request_log,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn stages(&self) -> &[BasedSpace] {
        &self.stages
    }

    pub fn inclusions(&self) -> &[BasedMorphism] {
        &self.inclusions
    }

    pub fn request_log(&self) -> &[ExtensionRequest] {
        &self.request_log
    }

    pub fn k_bound(&self) -> &Rational {
        &self.k_bound
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn top_index(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn top(&self) -> &BasedSpace {
        self.stages.last().expect("a chain has at least one stage")
    }

    /// The same-label inclusion of a stage into the current top.
    pub fn inclusion_to_top(&self, stage: usize) -> Result<BasedMorphism> {
        let s = self
            .stages
            .get(stage)
            .ok_or_else(|| Error::InvalidInput(format!("stage {stage} out of range")))?;
        BasedMorphism::inclusion(s, self.top())
    }

    /// Re-checks every chain invariant exactly: stages validate at the
    /// shared suppression bound, inclusions are same-label injections
    /// between consecutive stages, and each stage is precisely the section
    /// of the next over its labels (which makes every inclusion an
    /// isometry).
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::ConstructionViolated("chain has no stages".into()));
        }
        if self.inclusions.len() + 1 != self.stages.len() {
            return Err(Error::ConstructionViolated(format!(
                "{} stages need {} inclusions, found {}",
                self.stages.len(),
                self.stages.len() - 1,
                self.inclusions.len()
            )));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.k_bound() != &self.k_bound {
                return Err(Error::ConstructionViolated(format!(
                    "stage {i} carries bound {} instead of the chain bound {}",
                    stage.k_bound(),
                    self.k_bound
                )));
            }
            if !stage.validate()?.is_valid() {
                return Err(Error::ConstructionViolated(format!(
                    "stage {i} fails validation at bound {}",
                    self.k_bound
                )));
            }
        }
        for (i, inc) in self.inclusions.iter().enumerate() {
            if inc.domain() != &self.stages[i] || inc.codomain() != &self.stages[i + 1] {
                return Err(Error::ConstructionViolated(format!(
                    "inclusion {i} does not connect stages {i} and {}",
                    i + 1
                )));
            }
            if inc.label_map().iter().any(|(a, b)| a != b) {
                return Err(Error::ConstructionViolated(format!(
                    "inclusion {i} renames labels"
                )));
            }
            let section = self.stages[i + 1].based_subspace(self.stages[i].labels())?;
            if !balls_equal(section.ball(), self.stages[i].ball())? {
                return Err(Error::ConstructionViolated(format!(
                    "stage {i} is not the section of stage {} over its labels",
                    i + 1
                )));
            }
        }
        for (i, req) in self.request_log.iter().enumerate() {
            if req.source_stage >= self.stages.len() {
                return Err(Error::ConstructionViolated(format!(
                    "logged request {i} cites stage {} beyond the chain",
                    req.source_stage
                )));
            }
            if req.embedding.domain() != &self.stages[req.source_stage] {
                return Err(Error::ConstructionViolated(format!(
                    "logged request {i} does not start at stage {}",
                    req.source_stage
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RequestWire {
    source_stage: usize,
    target: BasedSpace,
    embedding: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ChainWire {
    k_bound: Rational,
    stages: Vec<BasedSpace>,
    inclusions: Vec<BTreeMap<String, String>>,
    log: Vec<RequestWire>,
}

impl Serialize for Chain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChainWire {
            k_bound: self.k_bound.clone(),
            stages: self.stages.clone(),
            inclusions: self
                .inclusions
                .iter()
                .map(|m| m.label_map().clone())
                .collect(),
            log: self
                .request_log
                .iter()
                .map(|r| RequestWire {
                    source_stage: r.source_stage,
                    target: r.target.clone(),
                    embedding: r.embedding.label_map().clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Chain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ChainWire::deserialize(d)?;
        let rebuild = || -> Result<Chain> {
            let mut inclusions = Vec::with_capacity(wire.inclusions.len());
            for (i, map) in wire.inclusions.iter().enumerate() {
                let cod = wire.stages.get(i + 1).ok_or_else(|| {
                    Error::InvalidInput("more inclusions than stage gaps".into())
                })?;
                inclusions.push(BasedMorphism::new(
                    wire.stages[i].clone(),
                    cod.clone(),
                    map.clone(),
                )?);
            }
            let mut log = Vec::with_capacity(wire.log.len());
            for r in &wire.log {
                let dom = wire.stages.get(r.source_stage).ok_or_else(|| {
                    Error::InvalidInput("logged request cites a missing stage".into())
                })?;
                let emb = BasedMorphism::new(dom.clone(), r.target.clone(), r.embedding.clone())?;
                log.push(ExtensionRequest::new(r.source_stage, r.target.clone(), emb)?);
            }
            Chain::from_parts(wire.stages, inclusions, wire.k_bound, log)
        };
        rebuild().map_err(D::Error::custom)
    }
}

/// Exact set equality of two symmetric bodies via mutual vertex
/// containment; avoids facet enumeration entirely.
fn balls_equal(p: &Polytope, q: &Polytope) -> Result<bool> {
    if p.dim() != q.dim() {
        return Ok(false);
    }
    let one = Rational::one();
    for g in p.generators() {
        match q.gauge(&g.resized(p.dim()))? {
            Some(v) if v <= one => {}
            _ => return Ok(false),
        }
    }
    for g in q.generators() {
        match p.gauge(&g.resized(q.dim()))? {
            Some(v) if v <= one => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Every distinct rational in `[-k, k]` whose reduced denominator is at
/// most `max_den`, in ascending order.
fn grid_values(max_den: u32, k: &Rational) -> Result<Vec<Rational>> {
    let mut set: BTreeSet<Rational> = BTreeSet::new();
    set.insert(Rational::zero());
    for q in 1..=i64::from(max_den) {
        let max_p = (k * &Rational::from_int(q)).floor_int();
        let max_p = max_p
            .to_i64()
            .filter(|&p| p <= 10_000)
            .ok_or_else(|| Error::InvalidInput(
                "suppression bound too large for grid enumeration".into(),
            ))?;
        for p in 1..=max_p {
            let v = Rational::frac(p, q);
            set.insert(-&v);
            set.insert(v);
        }
    }
    Ok(set.into_iter().collect())
}

fn l1_norm(v: &RationalVector) -> Rational {
    let mut s = Rational::zero();
    for e in v.iter() {
        s = &s + &e.abs();
    }
    s
}

/// First nonzero entry positive: the representative the ball itself would
/// store for the ± pair.
fn canonical_sign(v: &RationalVector) -> bool {
    v.iter()
        .find(|e| !e.is_zero())
        .is_some_and(|e| e.is_positive())
}

/// Grid vectors eligible as non-basis ball vertices: entries from
/// `values`, ℓ1 norm strictly above 1 (anything else lies in the hull of
/// the basis already), one representative per ± pair.
fn candidate_generators(dim: usize, values: &[Rational]) -> Vec<RationalVector> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let v = RationalVector::new(idx.iter().map(|&i| values[i].clone()).collect());
        if canonical_sign(&v) && l1_norm(&v) > Rational::one() {
            out.push(v);
        }
        let mut d = 0;
        loop {
            if d == dim {
                break 'outer;
            }
            idx[d] += 1;
            if idx[d] < values.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
    out
}

/// Σ_{s ≤ max} C(n, s), refused beyond the subset-scan ceiling.
fn guard_subset_count(n: usize, max: usize) -> Result<()> {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for s in 0..=max {
        total += c;
        if total > ENUMERATION_SUBSET_LIMIT as u128 {
            return Err(Error::CeilingExceeded {
                what: "space enumeration (generator subset scan)",
                dim: n,
                limit: ENUMERATION_SUBSET_LIMIT,
            });
        }
        c = c * (n - s) as u128 / (s as u128 + 1);
    }
    Ok(())
}

fn subsets_up_to(
    n: usize,
    max: usize,
    cur: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    f(cur)?;
    if cur.len() == max {
        return Ok(());
    }
    let start = cur.last().map_or(0, |&l| l + 1);
    for i in start..n {
        cur.push(i);
        subsets_up_to(n, max, cur, f)?;
        cur.pop();
    }
    Ok(())
}

/// All spaces within the bound that validate at suppression bound `k`, one
/// canonical representative per basis-relabeling class, in a deterministic
/// order.
///
/// Completeness rests on two exact facts: every ball contains `±e_i`, so
/// the basis vectors can always be listed among the generators; and every
/// vertex `v` has `|v_i| ≤ k` (coordinate projections contract by at most
/// `k`) with ℓ1 norm above 1 unless it is a basis vector. The grid of such
/// vertices is finite, and subsets of it are scanned exhaustively.
pub fn enumerate_spaces(bound: &ComplexityBound, k: &Rational) -> Result<Vec<BasedSpace>> {
    bound.check()?;
    if *k < Rational::one() {
        return Err(Error::InvalidInput(
            "suppression bound must be at least 1".into(),
        ));
    }
    let values = grid_values(bound.max_denominator, k)?;
    let budget = bound.pair_budget();
    let mut seen: BTreeMap<(usize, Vec<Vec<Rational>>), BasedSpace> = BTreeMap::new();
    for dim in 1..=bound.max_dim {
        if dim > budget {
            continue;
        }
        let extras = candidate_generators(dim, &values);
        let max_extra = budget.min(extras.len());
        guard_subset_count(extras.len(), max_extra)?;
        let labels: Vec<String> = (0..dim).map(|i| format!("b{i}")).collect();
        let mut cur = Vec::new();
        subsets_up_to(extras.len(), max_extra, &mut cur, &mut |subset| {
            let mut gens: Vec<RationalVector> =
                (0..dim).map(|i| RationalVector::unit(dim, i)).collect();
            gens.extend(subset.iter().map(|&i| extras[i].clone()));
            let space = BasedSpace::new(labels.clone(), Polytope::new(dim, gens)?, k.clone())?;
            if !space.validate()?.is_valid() {
                return Ok(());
            }
            let canon = space.canonical_form()?;
            if canon.ball().generator_count() > budget {
                return Ok(());
            }
            if *k == Rational::one() {
                // Valid at bound 1 means 1-based; warm the section route.
                let _ = canon.is_one_based()?;
            }
            seen.entry((dim, generator_matrix(canon.ball())))
                .or_insert(canon);
            Ok(())
        })?;
    }
    Ok(seen.into_values().collect())
}

/// Coordinate permutations that fix the pruned ball setwise.
fn ball_automorphisms(y: &BasedSpace) -> Result<Vec<Vec<usize>>> {
    let pruned = y.ball().prune_redundant()?;
    let mut auts = Vec::new();
    for p in permutations(y.dim()) {
        if pruned.map(y.dim(), |g| g.extract(&p))? == pruned {
            auts.push(p);
        }
    }
    Ok(auts)
}

fn ordered_injections(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in 0..n {
            if !cur.contains(&c) {
                cur.push(c);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}

/// Requests out of `u`: every bounded space containing a based-subspace
/// copy of `u`, paired with each certified label injection, one request
/// per orbit of the target's ball automorphisms.
fn extensions_into(
    u: &BasedSpace,
    source_stage: usize,
    spaces: &[BasedSpace],
) -> Result<Vec<ExtensionRequest>> {
    let mut out = Vec::new();
    for y in spaces {
        if u.dim() > y.dim() {
            continue;
        }
        let auts = ball_automorphisms(y)?;
        for inj in ordered_injections(y.dim(), u.dim()) {
            let orbit_min = auts
                .iter()
                .map(|p| inj.iter().map(|&c| p[c]).collect::<Vec<usize>>())
                .min()
                .expect("the identity permutation is always an automorphism");
            if orbit_min != inj {
                continue;
            }
            let image_labels: Vec<String> =
                inj.iter().map(|&c| y.labels()[c].clone()).collect();
            let section = y.based_subspace(&image_labels)?;
            if !balls_equal(section.ball(), u.ball())? {
                continue;
            }
            let map: BTreeMap<String, String> = u
                .labels()
                .iter()
                .cloned()
                .zip(image_labels.into_iter())
                .collect();
            let embedding = BasedMorphism::new(u.clone(), y.clone(), map)?;
            out.push(ExtensionRequest::new(source_stage, y.clone(), embedding)?);
        }
    }
    Ok(out)
}

/// All extension requests out of `u`, minted against stage index
/// `source_stage`, over the bounded space enumeration.
pub fn enumerate_extensions(
    u: &BasedSpace,
    source_stage: usize,
    bound: &ComplexityBound,
    k: &Rational,
) -> Result<Vec<ExtensionRequest>> {
    if !u.validate()?.is_valid() {
        return Err(Error::InvalidSpace(
            "extension source must validate at its own bound".into(),
        ));
    }
    let spaces = enumerate_spaces(bound, k)?;
    extensions_into(u, source_stage, &spaces)
}

/// Amalgamates the request target onto the current top over the request's
/// source stage and appends the pushout as a new stage. The returned leg
/// `g: target → new top` composed with the request embedding is literally
/// the same-label inclusion of the source stage — checked, not assumed.
pub fn fraisse_step(chain: &mut Chain, request: &ExtensionRequest) -> Result<BasedMorphism> {
    let n = request.source_stage;
    let z = chain
        .stages
        .get(n)
        .cloned()
        .ok_or_else(|| Error::InvalidInput(format!("source stage {n} out of range")))?;
    if request.embedding.domain() != &z {
        return Err(Error::SpaceMismatch(
            "request embedding does not start at the chain stage it cites".into(),
        ));
    }
    let base_to_top = BasedMorphism::inclusion(&z, chain.top())?;
    grow_chain(
        chain,
        &base_to_top,
        &request.embedding,
        Some(request.clone()),
    )
}

/// Chain-growth core shared by `fraisse_step` and the ε-extension path:
/// appends the pushout of the top and `attach`'s codomain over their
/// common subspace, where `base_to_top: Z → top` and `attach: Z → target`
/// are exact isometries. Adjoined target labels get globally fresh stage
/// names; labels identified through `attach` never appear in the pushout.
/// Returns the leg `target → new top`, whose composition with `attach` is
/// checked to agree with `base_to_top` followed by the new inclusion.
pub(crate) fn grow_chain(
    chain: &mut Chain,
    base_to_top: &BasedMorphism,
    attach: &BasedMorphism,
    log: Option<ExtensionRequest>,
) -> Result<BasedMorphism> {
    if base_to_top.codomain() != chain.top() {
        return Err(Error::SpaceMismatch(
            "growth base must land in the current top".into(),
        ));
    }
    if base_to_top.domain() != attach.domain() {
        return Err(Error::SpaceMismatch(
            "growth legs must share their domain".into(),
        ));
    }
    let target = attach.codomain();
    if target.k_bound() > &chain.k_bound {
        return Err(Error::InvalidInput(format!(
            "target bound {} exceeds the chain bound {}",
            target.k_bound(),
            chain.k_bound
        )));
    }

    let next_index = chain.stages.len();
    let image: BTreeSet<&String> = attach.label_map().values().collect();
    // Fresh names must dodge both the top's labels and the target's own:
    // a target produced outside this chain may already carry stage names.
    let mut taken: BTreeSet<&String> = chain.top().labels().iter().collect();
    taken.extend(target.labels().iter());
    let mut fresh = 0usize;
    let new_labels: Vec<String> = target
        .labels()
        .iter()
        .map(|l| {
            if image.contains(l) {
                l.clone()
            } else {
                loop {
                    let name = format!("stage{next_index}:{fresh}");
                    fresh += 1;
                    if !taken.contains(&name) {
                        break name;
                    }
                }
            }
        })
        .collect();
    let relabeled = BasedSpace::new(
        new_labels.clone(),
        target.ball().clone(),
        target.k_bound().clone(),
    )?;
    if target.one_based_hint() == Some(true) {
        relabeled.mark_one_based();
    }
    let g = BasedMorphism::new(
        attach.domain().clone(),
        relabeled,
        attach.label_map().clone(),
    )?;

    let am = amalgamate(base_to_top, &g)?;
    let mut leg_map: BTreeMap<String, String> = BTreeMap::new();
    for (orig, renamed) in target.labels().iter().zip(&new_labels) {
        leg_map.insert(orig.clone(), am.right.label_map()[renamed].clone());
    }
    for (zl, tl) in attach.label_map() {
        if leg_map[tl] != base_to_top.label_map()[zl] {
            return Err(Error::ConstructionViolated(
                "pushout leg composed with the attaching map is not the base leg".into(),
            ));
        }
    }
    let leg = BasedMorphism::new(target.clone(), am.space.clone(), leg_map)?;
    chain.stages.push(am.space);
    chain.inclusions.push(am.left);
    if let Some(request) = log {
        chain.request_log.push(request);
    }
    Ok(leg)
}

/// Label-keyed unit and pair norms, shared across searches against the
/// stages of one chain. Sound because a stage is the exact section of
/// every later stage: once a label appears, `‖e_l‖` and `‖e_l ± e_l′‖`
/// never change again. Pair values are stored against the sorted label
/// pair; `‖e_i − e_j‖ = ‖e_j − e_i‖` by symmetry of the ball.
#[derive(Default)]
pub(crate) struct NormCache {
    single: HashMap<String, Rational>,
    pair: HashMap<(String, String), (Rational, Rational)>,
}

impl NormCache {
    pub(crate) fn new() -> Self {
        NormCache::default()
    }

    fn single(&mut self, space: &BasedSpace, c: usize) -> Result<&Rational> {
        let label = &space.labels()[c];
        if !self.single.contains_key(label) {
            let v = unit_norm(space, c)?;
            self.single.insert(label.clone(), v);
        }
        Ok(&self.single[label])
    }

    fn pair(&mut self, space: &BasedSpace, c: usize, c2: usize) -> Result<&(Rational, Rational)> {
        let (a, b) = (&space.labels()[c], &space.labels()[c2]);
        let key = (a.min(b).clone(), a.max(b).clone());
        if !self.pair.contains_key(&key) {
            let v = pair_norm(space, c.min(c2), c.max(c2))?;
            self.pair.insert(key.clone(), v);
        }
        Ok(&self.pair[&key])
    }
}

/// Lazily memoized norms of `e_i` and `e_i ± e_j`, the cheap invariants a
/// label injection must preserve before full certification is worth it.
/// The codomain side lives in the caller's cache and survives the call.
struct PairNorms<'a> {
    a: &'a BasedSpace,
    top: &'a BasedSpace,
    a_single: HashMap<usize, Rational>,
    a_pair: HashMap<(usize, usize), (Rational, Rational)>,
    top_cache: &'a mut NormCache,
}

fn unit_norm(space: &BasedSpace, i: usize) -> Result<Rational> {
    space
        .norm(&RationalVector::unit(space.dim(), i))?
        .ok_or_else(|| Error::DegenerateBall("basis vector outside the ball's span".into()))
}

fn pair_norm(space: &BasedSpace, i: usize, j: usize) -> Result<(Rational, Rational)> {
    let mut plus = RationalVector::zeros(space.dim());
    plus.set(i, Rational::one());
    plus.set(j, Rational::one());
    let mut minus = RationalVector::zeros(space.dim());
    minus.set(i, Rational::one());
    minus.set(j, -&Rational::one());
    let p = space
        .norm(&plus)?
        .ok_or_else(|| Error::DegenerateBall("basis vector outside the ball's span".into()))?;
    let m = space
        .norm(&minus)?
        .ok_or_else(|| Error::DegenerateBall("basis vector outside the ball's span".into()))?;
    Ok((p, m))
}

impl<'a> PairNorms<'a> {
    fn new(a: &'a BasedSpace, top: &'a BasedSpace, top_cache: &'a mut NormCache) -> Self {
        PairNorms {
            a,
            top,
            a_single: HashMap::new(),
            a_pair: HashMap::new(),
            top_cache,
        }
    }

    fn compatible(&mut self, j: usize, c: usize, fixed: &[(usize, usize)]) -> Result<bool> {
        if !self.a_single.contains_key(&j) {
            let v = unit_norm(self.a, j)?;
            self.a_single.insert(j, v);
        }
        if &self.a_single[&j] != self.top_cache.single(self.top, c)? {
            return Ok(false);
        }
        for &(j2, c2) in fixed {
            let ka = (j.min(j2), j.max(j2));
            if !self.a_pair.contains_key(&ka) {
                let v = pair_norm(self.a, ka.0, ka.1)?;
                self.a_pair.insert(ka, v);
            }
            if &self.a_pair[&ka] != self.top_cache.pair(self.top, c, c2)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Searches label injections of `a` into `top` extending the pinned
/// partial map, in lexicographic order, certifying each survivor of the
/// pair-norm filter exactly. Returns the first certified isometry and the
/// number of full candidates that reached certification.
pub(crate) fn find_completion(
    top: &BasedSpace,
    a: &BasedSpace,
    pinned: &BTreeMap<String, String>,
    cache: &mut NormCache,
) -> Result<(Option<BasedMorphism>, usize)> {
    if a.dim() > top.dim() {
        return Ok((None, 0));
    }
    let mut used = vec![false; top.dim()];
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    for (al, tl) in pinned {
        let j = a.label_index(al)?;
        let c = top.label_index(tl)?;
        if used[c] {
            return Err(Error::InvalidInput(
                "pinned partial map is not injective".into(),
            ));
        }
        used[c] = true;
        fixed.push((j, c));
    }
    let free: Vec<usize> = (0..a.dim())
        .filter(|j| !fixed.iter().any(|&(fj, _)| fj == *j))
        .collect();
    let mut norms = PairNorms::new(a, top, cache);
    let mut certified = 0usize;
    let found = complete(
        &mut norms,
        a,
        top,
        &free,
        0,
        &mut used,
        &mut fixed,
        &mut certified,
    )?;
    Ok((found, certified))
}

#[allow(clippy::too_many_arguments)]
fn complete(
    norms: &mut PairNorms<'_>,
    a: &BasedSpace,
    top: &BasedSpace,
    free: &[usize],
    slot: usize,
    used: &mut Vec<bool>,
    fixed: &mut Vec<(usize, usize)>,
    certified: &mut usize,
) -> Result<Option<BasedMorphism>> {
    if slot == free.len() {
        let map: BTreeMap<String, String> = fixed
            .iter()
            .map(|&(j, c)| (a.labels()[j].clone(), top.labels()[c].clone()))
            .collect();
        let m = BasedMorphism::new(a.clone(), top.clone(), map)?;
        *certified += 1;
        return Ok(match m.is_isometry()? {
            IsometryOutcome::Isometric => Some(m),
            IsometryOutcome::Defect { .. } => None,
        });
    }
    let j = free[slot];
    for c in 0..top.dim() {
        if used[c] || !norms.compatible(j, c, fixed)? {
            continue;
        }
        used[c] = true;
        fixed.push((j, c));
        if let Some(m) = complete(norms, a, top, free, slot + 1, used, fixed, certified)? {
            return Ok(Some(m));
        }
        fixed.pop();
        used[c] = false;
    }
    Ok(None)
}

/// Whether some certified `g: target → top` inverts the request embedding
/// back onto the chain, i.e. the request is satisfied with no new stage.
fn already_satisfied(
    chain: &Chain,
    request: &ExtensionRequest,
    cache: &mut NormCache,
) -> Result<bool> {
    let pinned: BTreeMap<String, String> = request
        .embedding
        .label_map()
        .iter()
        .map(|(zl, yl)| (yl.clone(), zl.clone()))
        .collect();
    Ok(find_completion(chain.top(), &request.target, &pinned, cache)?
        .0
        .is_some())
}

/// Outcome of a universality probe against the current top of a chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniversalityOutcome {
    /// A certified isometric extension of the partial map into the top.
    Extended(BasedMorphism),
    /// No label injection extends the partial map. On a finite prefix this
    /// signals "grow the chain", not a refutation.
    NoExtension { candidates_certified: usize },
}

/// Tries to extend an exact isometry, defined on the subspace of `a`
/// spanned by `lambda_labels` into some chain stage, to all of `a` into
/// the top stage.
pub fn check_universality(
    chain: &Chain,
    a: &BasedSpace,
    lambda_labels: &[String],
    f: &BasedMorphism,
) -> Result<UniversalityOutcome> {
    let lam = a.based_subspace(lambda_labels)?;
    if f.domain() != &lam {
        return Err(Error::SpaceMismatch(
            "partial map must be defined on the named subspace of the extension source".into(),
        ));
    }
    if !chain.stages.iter().any(|s| s == f.codomain()) {
        return Err(Error::SpaceMismatch(
            "partial map must land in a chain stage".into(),
        ));
    }
    f.certify_isometry()?;
    let to_top = BasedMorphism::inclusion(f.codomain(), chain.top())?;
    let comp = f.then(&to_top)?;
    let mut cache = NormCache::new();
    let (found, certified) = find_completion(chain.top(), a, comp.label_map(), &mut cache)?;
    Ok(match found {
        Some(m) => UniversalityOutcome::Extended(m),
        None => UniversalityOutcome::NoExtension {
            candidates_certified: certified,
        },
    })
}

/// Repeated embedding probes against one fixed space, sharing the label
/// norm cache between calls. Sound only because the probed space never
/// changes: `‖e_l‖` and `‖e_l ± e_l′‖` are cached by label.
pub struct EmbeddingSearch<'a> {
    top: &'a BasedSpace,
    cache: NormCache,
}

impl<'a> EmbeddingSearch<'a> {
    pub fn new(top: &'a BasedSpace) -> Self {
        EmbeddingSearch {
            top,
            cache: NormCache::new(),
        }
    }

    /// First certified isometric embedding of `a` extending the pinned
    /// partial label map, if any.
    pub fn find(
        &mut self,
        a: &BasedSpace,
        pinned: &BTreeMap<String, String>,
    ) -> Result<Option<BasedMorphism>> {
        Ok(find_completion(self.top, a, pinned, &mut self.cache)?.0)
    }
}

/// Dovetailed chain construction: starting from the zero space, keeps a
/// FIFO queue of every extension request enumerated against every stage
/// produced so far (each stage's batch shuffled once, deterministically in
/// `schedule_seed`), and performs up to `steps` rounds. A popped request
/// already satisfied in the current top is skipped — its witness exists —
/// which is what lets the queue drain; a full drain therefore satisfies
/// every request the bound can express.
pub fn build_generic_chain(
    bound: &ComplexityBound,
    k: &Rational,
    steps: usize,
    schedule_seed: u64,
) -> Result<Chain> {
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    let spaces = enumerate_spaces(bound, k)?;
    let mut chain = Chain::trivial(k.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule_seed);
    let mut queue: VecDeque<ExtensionRequest> = VecDeque::new();
    // One label-norm cache for the whole run: stages only ever extend, so
    // every cached top norm stays valid as the chain grows.
    let mut cache = NormCache::new();
    enqueue_stage(&chain, 0, bound, &spaces, &mut rng, &mut queue)?;
    for _ in 0..steps {
        let Some(request) = queue.pop_front() else {
            break;
        };
        if already_satisfied(&chain, &request, &mut cache)? {
            continue;
        }
        fraisse_step(&mut chain, &request)?;
        enqueue_stage(
            &chain,
            chain.top_index(),
            bound,
            &spaces,
            &mut rng,
            &mut queue,
        )?;
    }
    Ok(chain)
}

fn enqueue_stage(
    chain: &Chain,
    stage: usize,
    bound: &ComplexityBound,
    spaces: &[BasedSpace],
    rng: &mut ChaCha8Rng,
    queue: &mut VecDeque<ExtensionRequest>,
) -> Result<()> {
    let u = &chain.stages()[stage];
    if u.dim() > bound.max_dim {
        return Ok(());
    }
    let mut batch = extensions_into(u, stage, spaces)?;
    batch.shuffle(rng);
    queue.extend(batch);
    Ok(())
}
