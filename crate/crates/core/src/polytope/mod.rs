//! Symmetric rational polytopes in V-representation, with exact gauges,
//! facet enumeration, and coordinate sections.
//!
//! A `Polytope` stores one generator per antipodal pair; the body is the
//! convex hull of `±g` over all stored generators. Generators are kept in a
//! canonical form (sign-fixed, deduplicated, sorted, trailing zeros
//! stripped) and shared by reference, so large ambient spaces built from
//! smaller pieces stay cheap.

mod dd;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exactnum::{
    solve_lp, LpOutcome, LpProblem, Rational, RationalMatrix, RationalVector, VarSign,
};

/// Facet enumeration is refused above this ambient dimension.
pub const FACET_DIM_LIMIT: usize = 6;

/// One closed halfspace `⟨normal, x⟩ ≤ offset` with `offset > 0`; facets of
/// symmetric bodies always come in antipodal pairs and both are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    pub normal: RationalVector,
    pub offset: Rational,
}

/// Coordinate-connected block of generators: `coords` is the union of the
/// member supports, disjoint from every other component's coords.
#[derive(Clone, Debug)]
pub(crate) struct Component {
    pub coords: Vec<usize>,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug)]
struct ComponentData {
    comps: Vec<Component>,
    /// coord → component index, `usize::MAX` when no generator touches it.
    owner: Vec<usize>,
}

/// Convex hull of `±g` over the stored generators, inside `ℚ^dim`.
#[derive(Clone, Default)]
pub struct Polytope {
    dim: usize,
    generators: Vec<Arc<RationalVector>>,
    facets: OnceLock<Arc<Vec<Facet>>>,
    components: OnceLock<Arc<ComponentData>>,
}

/// Sign-fix (first nonzero entry positive) and strip trailing zeros.
fn canonical_vector(v: &RationalVector) -> Option<RationalVector> {
    let last = (0..v.dim()).rev().find(|&i| !v.entry(i).is_zero())?;
    let first = (0..=last).find(|&i| !v.entry(i).is_zero()).unwrap();
    let mut entries: Vec<Rational> = (0..=last).map(|i| v.entry(i)).collect();
    if entries[first].is_negative() {
        for e in entries.iter_mut() {
            *e = -&*e;
        }
    }
    Some(RationalVector::new(entries))
}

fn is_canonical(v: &RationalVector) -> bool {
    let n = v.dim();
    if n > 0 && v.entry(n - 1).is_zero() {
        return false;
    }
    match (0..n).find(|&i| !v.entry(i).is_zero()) {
        Some(i) => v.entry(i).is_positive(),
        None => false,
    }
}

fn cmp_padded(a: &RationalVector, b: &RationalVector, dim: usize) -> std::cmp::Ordering {
    for i in 0..dim {
        match a.entry(i).cmp(&b.entry(i)) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

impl Polytope {
    /// Hull of `±generators`. Zero vectors are dropped; the rest are brought
    /// to canonical form. Fails if a generator has a nonzero entry at or
    /// beyond `dim`.
    pub fn new(dim: usize, generators: Vec<RationalVector>) -> Result<Self> {
        let mut shared = Vec::with_capacity(generators.len());
        for g in generators {
            if g.support().iter().any(|&i| i >= dim) {
                return Err(Error::DimensionMismatch {
                    context: "polytope generator",
                    expected: dim,
                    got: g.dim(),
                });
            }
            shared.push(Arc::new(g));
        }
        Ok(Self::from_shared(dim, shared))
    }

    /// Arc-preserving constructor: inputs already in canonical form are
    /// shared rather than copied.
    pub(crate) fn from_shared(dim: usize, generators: Vec<Arc<RationalVector>>) -> Self {
        let mut canon: Vec<Arc<RationalVector>> = Vec::with_capacity(generators.len());
        for g in generators {
            debug_assert!(g.support().iter().all(|&i| i < dim));
            if is_canonical(&g) {
                canon.push(g);
            } else if let Some(c) = canonical_vector(&g) {
                canon.push(Arc::new(c));
            }
        }
        canon.sort_by(|a, b| cmp_padded(a, b, dim));
        canon.dedup_by(|a, b| cmp_padded(a, b, dim) == std::cmp::Ordering::Equal);
        Polytope {
            dim,
            generators: canon,
            facets: OnceLock::new(),
            components: OnceLock::new(),
        }
    }

    /// Unit ball of `ℓ1^dim`: hull of the ± standard basis vectors.
    pub fn l1_ball(dim: usize) -> Self {
        Self::new(dim, (0..dim).map(|i| RationalVector::unit(dim, i)).collect())
            .expect("basis vectors fit their own dimension")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One representative per antipodal generator pair, canonical order.
    pub fn generators(&self) -> impl ExactSizeIterator<Item = &RationalVector> {
        self.generators.iter().map(|g| g.as_ref())
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub(crate) fn shared_generators(&self) -> &[Arc<RationalVector>] {
        &self.generators
    }

    /// `x` is literally `±g` for a stored generator.
    pub fn is_signed_generator(&self, x: &RationalVector) -> bool {
        let neg = -x;
        let dim = self.dim.max(x.dim());
        self.generators.iter().any(|g| {
            cmp_padded(g, x, dim) == std::cmp::Ordering::Equal
                || cmp_padded(g, &neg, dim) == std::cmp::Ordering::Equal
        })
    }

    fn component_data(&self) -> &ComponentData {
        self.components.get_or_init(|| {
            let mut parent: Vec<usize> = (0..self.dim).collect();
            fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
                while parent[i] != i {
                    parent[i] = parent[parent[i]];
                    i = parent[i];
                }
                i
            }
            for g in &self.generators {
                let supp = g.support();
                let r0 = find(&mut parent, supp[0]);
                for &c in &supp[1..] {
                    let r = find(&mut parent, c);
                    parent[r] = r0;
                }
            }
            let mut comps: Vec<Component> = Vec::new();
            let mut owner = vec![usize::MAX; self.dim];
            let mut root_to_comp: Vec<usize> = vec![usize::MAX; self.dim];
            for (gi, g) in self.generators.iter().enumerate() {
                let root = find(&mut parent, g.support()[0]);
                if root_to_comp[root] == usize::MAX {
                    root_to_comp[root] = comps.len();
                    comps.push(Component {
                        coords: Vec::new(),
                        members: Vec::new(),
                    });
                }
                comps[root_to_comp[root]].members.push(gi);
            }
            for c in 0..self.dim {
                let root = find(&mut parent, c);
                let ci = root_to_comp[root];
                if ci != usize::MAX {
                    comps[ci].coords.push(c);
                    owner[c] = ci;
                }
            }
            Arc::new(ComponentData { comps, owner })
        })
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.component_data().comps
    }

    /// Minkowski gauge `min { Σ|λ_g| : x = Σ λ_g g }`, or `None` when `x`
    /// lies outside the span of the generators.
    ///
    /// The minimization splits exactly across coordinate-connected
    /// components — generators on disjoint coordinates cannot trade mass —
    /// so each LP stays at the size of one component.
    pub fn gauge(&self, x: &RationalVector) -> Result<Option<Rational>> {
        if x.is_zero() {
            return Ok(Some(Rational::zero()));
        }
        let data = self.component_data();
        let mut needed: BTreeSet<usize> = BTreeSet::new();
        for i in x.support() {
            if i >= self.dim || data.owner[i] == usize::MAX {
                return Ok(None);
            }
            needed.insert(data.owner[i]);
        }
        let mut total = Rational::zero();
        for ci in needed {
            let comp = &data.comps[ci];
            let gens: Vec<RationalVector> = comp
                .members
                .iter()
                .map(|&gi| self.generators[gi].extract(&comp.coords))
                .collect();
            match gauge_lp(&gens, &x.extract(&comp.coords))? {
                Some(v) => total += &v,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    /// `gauge(x) ≤ 1`, with a literal generator scan as the fast path.
    pub fn contains(&self, x: &RationalVector) -> Result<bool> {
        if x.is_zero() || self.is_signed_generator(x) {
            return Ok(true);
        }
        Ok(matches!(self.gauge(x)?, Some(v) if v <= Rational::one()))
    }

    /// Facets `⟨n, x⟩ ≤ c` of the body, computed once by double description
    /// and cached. Requires full-dimensional generators and `dim` within
    /// `FACET_DIM_LIMIT`.
    pub fn facets(&self) -> Result<&[Facet]> {
        if let Some(f) = self.facets.get() {
            return Ok(f.as_slice());
        }
        if self.dim > FACET_DIM_LIMIT {
            return Err(Error::CeilingExceeded {
                what: "facet enumeration",
                dim: self.dim,
                limit: FACET_DIM_LIMIT,
            });
        }
        let computed = self.compute_facets()?;
        let _ = self.facets.set(Arc::new(computed));
        Ok(self.facets.get().expect("just set").as_slice())
    }

    fn compute_facets(&self) -> Result<Vec<Facet>> {
        // Facet cone of conv(±g): rays (n, c) with ±⟨n, g⟩ ≤ c for all g.
        let d = self.dim + 1;
        let mut rows: Vec<dd::IntVec> = Vec::with_capacity(2 * self.generators.len() + 1);
        for g in &self.generators {
            let mut l = BigInt::from(1);
            for i in 0..self.dim {
                l = l.lcm(g.entry(i).denom());
            }
            let ints: Vec<BigInt> = (0..self.dim)
                .map(|i| {
                    let e = g.entry(i);
                    e.numer() * (&l / e.denom())
                })
                .collect();
            let mut row: dd::IntVec = ints.iter().map(|v| -v).collect();
            row.push(l.clone());
            rows.push(row);
            let mut row: dd::IntVec = ints;
            row.push(l);
            rows.push(row);
        }
        let mut t_row = vec![BigInt::from(0); d];
        t_row[self.dim] = BigInt::from(1);
        rows.push(t_row);

        let rays = dd::extreme_rays(&rows, d)?;
        let mut facets = Vec::with_capacity(rays.len());
        for ray in rays {
            let c = &ray[self.dim];
            assert!(
                c.is_positive(),
                "facet cone of a spanning symmetric hull is strictly positive in the offset"
            );
            facets.push(Facet {
                normal: RationalVector::new(
                    ray[..self.dim]
                        .iter()
                        .map(|v| Rational::from_bigint(v.clone()))
                        .collect(),
                ),
                offset: Rational::from_bigint(c.clone()),
            });
        }
        Ok(facets)
    }

    /// Gauge through the facet description: `max_i ⟨n_i, x⟩ / c_i`.
    /// Independent route from `gauge`; the two must agree on the nose.
    pub fn gauge_via_facets(&self, x: &RationalVector) -> Result<Rational> {
        let x = x.resized(self.dim);
        let mut best = Rational::zero();
        for f in self.facets()? {
            let v = &f.normal.dot(&x) / &f.offset;
            if v > best {
                best = v;
            }
        }
        Ok(best)
    }

    /// Dual (polar) gauge of a functional: `max_g |⟨f, g⟩|`. Exact because
    /// the polar of a V-polytope reads off the generators directly.
    pub fn dual_gauge(&self, f: &RationalVector) -> Rational {
        let mut best = Rational::zero();
        for g in &self.generators {
            let v = f.dot(g).abs();
            if v > best {
                best = v;
            }
        }
        best
    }

    pub fn is_full_dimensional(&self) -> bool {
        if self.generators.len() < self.dim {
            return false;
        }
        let rows: Vec<RationalVector> = self
            .generators
            .iter()
            .map(|g| g.resized(self.dim))
            .collect();
        RationalMatrix::from_rows(rows, self.dim).rank() == self.dim
    }

    /// Image under a linear map given by its action on generators.
    pub fn map<F>(&self, dim_out: usize, f: F) -> Result<Polytope>
    where
        F: Fn(&RationalVector) -> RationalVector,
    {
        Polytope::new(dim_out, self.generators.iter().map(|g| f(g)).collect())
    }

    /// Hull of the union of the two generator sets (same ambient dim).
    pub fn hull_union(&self, other: &Polytope) -> Polytope {
        assert_eq!(self.dim, other.dim, "hull_union over mismatched ambients");
        let mut gens = self.generators.clone();
        gens.extend(other.generators.iter().cloned());
        Polytope::from_shared(self.dim, gens)
    }

    /// `|c|·B`, by scaling generators.
    pub fn scaled(&self, c: &Rational) -> Polytope {
        assert!(!c.is_zero(), "scaling a body by zero");
        Polytope::from_shared(
            self.dim,
            self.generators
                .iter()
                .map(|g| Arc::new(g.scale(c)))
                .collect(),
        )
    }

    /// Drops every generator lying in the hull of the others. What remains
    /// is exactly the vertex set (one per pair), independent of scan order.
    pub fn prune_redundant(&self) -> Result<Polytope> {
        let n = self.generators.len();
        let mut alive = vec![true; n];
        for i in 0..n {
            alive[i] = false;
            let rest: Vec<Arc<RationalVector>> = (0..n)
                .filter(|&j| alive[j])
                .map(|j| self.generators[j].clone())
                .collect();
            if rest.is_empty() {
                alive[i] = true;
                continue;
            }
            let sub = Polytope::from_shared(self.dim, rest);
            let redundant = matches!(sub.gauge(&self.generators[i])?, Some(v) if v <= Rational::one());
            if !redundant {
                alive[i] = true;
            }
        }
        Ok(Polytope::from_shared(
            self.dim,
            (0..n)
                .filter(|&i| alive[i])
                .map(|i| self.generators[i].clone())
                .collect(),
        ))
    }

    /// Exact section `B ∩ span(e_c : c ∈ coords)`, re-indexed to the order
    /// of `coords`. Goes through the facet description, so the ambient
    /// dimension must be within `FACET_DIM_LIMIT`.
    pub fn restrict_to_coordinate_subspace(&self, coords: &[usize]) -> Result<Polytope> {
        check_coords(coords, self.dim)?;
        let facets = self.facets()?;
        let sub: Vec<Facet> = facets
            .iter()
            .map(|f| Facet {
                normal: f.normal.extract(coords),
                offset: f.offset.clone(),
            })
            .collect();
        Polytope::from_facets(coords.len(), &sub)
    }

    /// Coordinate projection `pr_coords(B)`, re-indexed to the order of
    /// `coords`. This is the section fast path: the two coincide exactly
    /// when every basis vector of the ambient body has gauge 1 (the bodies
    /// this toolkit calls 1-based); in general the projection is larger.
    pub fn restrict_via_projection(&self, coords: &[usize]) -> Result<Polytope> {
        check_coords(coords, self.dim)?;
        Ok(Polytope::from_shared(
            coords.len(),
            self.generators
                .iter()
                .map(|g| Arc::new(g.extract(coords)))
                .collect(),
        ))
    }

    /// `max { ⟨n, y⟩ : y ∈ B, y_j = 0 for j ∉ coords }`, with a witness.
    ///
    /// Components disjoint from `coords` can neither contribute to the
    /// objective nor relax the budget, so they are dropped before the LP.
    pub fn section_support(&self, coords: &[usize], n: &RationalVector) -> Result<(Rational, RationalVector)> {
        check_coords(coords, self.dim)?;
        let n = n.project_onto(coords);
        let data = self.component_data();
        let in_section = {
            let mut mask = vec![false; self.dim];
            for &c in coords {
                mask[c] = true;
            }
            mask
        };
        let kept: Vec<usize> = (0..data.comps.len())
            .filter(|&ci| data.comps[ci].coords.iter().any(|&c| in_section[c]))
            .collect();
        let mut gens: Vec<&Arc<RationalVector>> = Vec::new();
        let mut constrained: Vec<usize> = Vec::new();
        for &ci in &kept {
            let comp = &data.comps[ci];
            gens.extend(comp.members.iter().map(|&gi| &self.generators[gi]));
            constrained.extend(comp.coords.iter().filter(|&&c| !in_section[c]).copied());
        }
        constrained.sort_unstable();
        if gens.is_empty() {
            return Ok((Rational::zero(), RationalVector::zeros(self.dim)));
        }

        // Vars: u_g, w_g ≥ 0 (signed weights), s ≥ 0 (slack of the budget
        // Σ(u+w) + s = 1); rows kill the off-section coordinates.
        let k = gens.len();
        let nvars = 2 * k + 1;
        let mut objective = RationalVector::zeros(nvars);
        for (j, g) in gens.iter().enumerate() {
            let c = n.dot(g);
            objective.set(j, -&c);
            objective.set(k + j, c);
        }
        let mut rows: Vec<RationalVector> = Vec::with_capacity(constrained.len() + 1);
        for &coord in &constrained {
            let mut row = RationalVector::zeros(nvars);
            for (j, g) in gens.iter().enumerate() {
                let e = g.entry(coord);
                row.set(j, e.clone());
                row.set(k + j, -&e);
            }
            rows.push(row);
        }
        let mut budget = RationalVector::zeros(nvars);
        for j in 0..nvars {
            budget.set(j, Rational::one());
        }
        rows.push(budget);
        let mut rhs = RationalVector::zeros(constrained.len() + 1);
        rhs.set(constrained.len(), Rational::one());

        let nrows = rows.len();
        let problem = LpProblem::new(
            objective,
            RationalMatrix::from_rows(rows, nvars),
            rhs,
            vec![VarSign::NonNeg; nvars],
        )?;
        match solve_lp(&problem)? {
            LpOutcome::Optimal { value, point, .. } => {
                let mut witness = RationalVector::zeros(self.dim);
                for (j, g) in gens.iter().enumerate() {
                    let lam = &point.entry(j) - &point.entry(k + j);
                    if !lam.is_zero() {
                        witness = &witness + &g.scale(&lam);
                    }
                }
                Ok((-&value, witness))
            }
            other => unreachable!(
                "section-support LP over {nrows} rows is feasible and bounded, got {other:?}"
            ),
        }
    }

    /// `from_facets` after deduplicating facets up to positive scaling.
    pub(crate) fn from_facets_dedup(dim: usize, facets: Vec<Facet>) -> Result<Polytope> {
        let mut seen = BTreeSet::new();
        let mut unique = Vec::new();
        for f in facets {
            let mut v: Vec<Rational> = (0..dim).map(|i| f.normal.entry(i)).collect();
            v.push(f.offset.clone());
            if seen.insert(dd::to_int_ray(&RationalVector::new(v))) {
                unique.push(f);
            }
        }
        Polytope::from_facets(dim, &unique)
    }

    /// V-representation from a facet list (`⟨n, x⟩ ≤ c`, `c > 0`). The body
    /// must be bounded; unbounded input is reported as degenerate.
    pub(crate) fn from_facets(dim: usize, facets: &[Facet]) -> Result<Polytope> {
        // Vertex cone: rays (x, t) with ⟨n_i, x⟩ ≤ c_i t for all i, t ≥ 0.
        let d = dim + 1;
        let mut rows: Vec<dd::IntVec> = Vec::with_capacity(facets.len() + 1);
        for f in facets {
            assert!(f.offset.is_positive(), "facet with nonpositive offset");
            let mut l = f.offset.denom().clone();
            for i in 0..dim {
                l = l.lcm(f.normal.entry(i).denom());
            }
            let mut row: dd::IntVec = (0..dim)
                .map(|i| {
                    let e = f.normal.entry(i);
                    -(e.numer() * (&l / e.denom()))
                })
                .collect();
            row.push(f.offset.numer() * (&l / f.offset.denom()));
            rows.push(row);
        }
        let mut t_row = vec![BigInt::from(0); d];
        t_row[dim] = BigInt::from(1);
        rows.push(t_row);

        let rays = dd::extreme_rays(&rows, d)?;
        let mut gens: Vec<RationalVector> = Vec::new();
        for ray in rays {
            let t = &ray[dim];
            if t.is_zero() {
                return Err(Error::DegenerateBall(
                    "facet list describes an unbounded body".into(),
                ));
            }
            let tq = Rational::from_bigint(t.clone());
            gens.push(RationalVector::new(
                ray[..dim]
                    .iter()
                    .map(|v| &Rational::from_bigint(v.clone()) / &tq)
                    .collect(),
            ));
        }
        Polytope::new(dim, gens)
    }
}

fn check_coords(coords: &[usize], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    for &c in coords {
        if c >= dim {
            return Err(Error::DimensionMismatch {
                context: "coordinate subset",
                expected: dim,
                got: c + 1,
            });
        }
        if seen[c] {
            return Err(Error::InvalidInput(format!("repeated coordinate {c}")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// `min Σ(u+w)  s.t.  Σ(u_j − w_j) g_j = x`, or `None` if `x ∉ span(gens)`.
fn gauge_lp(gens: &[RationalVector], x: &RationalVector) -> Result<Option<Rational>> {
    let k = gens.len();
    let d = x.dim();
    let mut objective = RationalVector::zeros(2 * k);
    for j in 0..2 * k {
        objective.set(j, Rational::one());
    }
    let mut rows = Vec::with_capacity(d);
    for coord in 0..d {
        let mut row = RationalVector::zeros(2 * k);
        for (j, g) in gens.iter().enumerate() {
            let e = g.entry(coord);
            row.set(j, e.clone());
            row.set(k + j, -&e);
        }
        rows.push(row);
    }
    let problem = LpProblem::new(
        objective,
        RationalMatrix::from_rows(rows, 2 * k),
        x.clone(),
        vec![VarSign::NonNeg; 2 * k],
    )?;
    match solve_lp(&problem)? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded { .. } => unreachable!("gauge objective is bounded below by zero"),
    }
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.generators == other.generators
    }
}

impl Eq for Polytope {}

impl fmt::Debug for Polytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Polytope(dim={}, {} generator pairs)",
            self.dim,
            self.generators.len()
        )
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeWire {
    dim: usize,
    generators: Vec<Vec<Rational>>,
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = PolytopeWire {
            dim: self.dim,
            generators: self
                .generators
                .iter()
                .map(|g| (0..self.dim).map(|i| g.entry(i)).collect())
                .collect(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = PolytopeWire::deserialize(d)?;
        for g in &wire.generators {
            if g.len() != wire.dim {
                return Err(D::Error::custom(format!(
                    "generator has {} entries, expected {}",
                    g.len(),
                    wire.dim
                )));
            }
        }
        Polytope::new(
            wire.dim,
            wire.generators.into_iter().map(RationalVector::new).collect(),
        )
        .map_err(D::Error::custom)
    }
}
