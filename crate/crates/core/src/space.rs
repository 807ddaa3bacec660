//! Based spaces: a polytope unit ball together with a distinguished labeled
//! basis and a suppression bound.
//!
//! The basis `e_1 … e_n` (one coordinate per label) is required to be
//! normalized, and every coordinate projection `pr_F` must have operator
//! norm at most the space's `k_bound`. `validate` checks all of this
//! exactly and reports witnesses instead of throwing.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exactnum::{Rational, RationalVector};
use crate::polytope::{Polytope, FACET_DIM_LIMIT};

/// Subset scans are refused above this support size (2^n blowup).
const SUBSET_SCAN_LIMIT: usize = 16;

/// A finite-dimensional based space: distinct coordinate labels, a symmetric
/// full-dimensional unit ball, and a certified suppression bound `K ≥ 1`.
#[derive(Clone)]
pub struct BasedSpace {
    labels: Vec<String>,
    ball: Polytope,
    k_bound: Rational,
    one_based: OnceLock<bool>,
}

/// One basis vector whose gauge is not 1 (`None` = outside the span).
#[derive(Clone, Debug, Serialize)]
pub struct BasisFailure {
    pub label: String,
    pub gauge: Option<Rational>,
}

/// A coordinate subset on which some generator's projection exceeds the
/// suppression bound.
#[derive(Clone, Debug, Serialize)]
pub struct SuppressionWitness {
    pub labels: Vec<String>,
    pub generator: RationalVector,
    pub norm: Rational,
}

/// Outcome of `BasedSpace::validate`; never an error, always a report.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub full_dimensional: bool,
    /// Basis vectors with gauge ≠ 1.
    pub basis_failures: Vec<BasisFailure>,
    /// Exact suppression constant; `None` when the ball is degenerate.
    pub suppression: Option<Rational>,
    /// Subset/generator pairs whose projected norm exceeds the bound.
    pub suppression_failures: Vec<SuppressionWitness>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.full_dimensional
            && self.basis_failures.is_empty()
            && self.suppression.is_some()
            && self.suppression_failures.is_empty()
    }
}

impl BasedSpace {
    pub fn new(labels: Vec<String>, ball: Polytope, k_bound: Rational) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::LabelCollision(l.clone()));
            }
        }
        if ball.dim() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "based space ball",
                expected: labels.len(),
                got: ball.dim(),
            });
        }
        if k_bound < Rational::one() {
            return Err(Error::InvalidInput(format!(
                "suppression bound {k_bound} is below 1"
            )));
        }
        Ok(BasedSpace {
            labels,
            ball,
            k_bound,
            one_based: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ball(&self) -> &Polytope {
        &self.ball
    }

    pub fn k_bound(&self) -> &Rational {
        &self.k_bound
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn basis_vector(&self, label: &str) -> Result<RationalVector> {
        Ok(RationalVector::unit(self.dim(), self.label_index(label)?))
    }

    /// Norm of `x` in this space (`None` when `x` is outside the span of a
    /// degenerate ball).
    pub fn norm(&self, x: &RationalVector) -> Result<Option<Rational>> {
        self.ball.gauge(x)
    }

    /// Seeds the 1-based flag for spaces whose construction guarantees it,
    /// skipping the subset scan.
    pub(crate) fn mark_one_based(&self) {
        let _ = self.one_based.set(true);
    }

    /// Cached 1-based verdict, if any; never computes.
    pub(crate) fn one_based_hint(&self) -> Option<bool> {
        self.one_based.get().copied()
    }

    /// Operator norm of the coordinate projection onto `sub`:
    /// `max_g gauge(pr_sub g)`. `None` when some projection leaves the span.
    pub fn projection_norm(&self, sub: &[String]) -> Result<Option<Rational>> {
        let coords = self.coords_of(sub)?;
        let mut best = Rational::zero();
        for g in self.ball.generators() {
            match self.ball.gauge(&g.project_onto(&coords))? {
                Some(v) => best = best.max(v),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }

    /// Exact suppression constant `max_F ‖pr_F‖`.
    ///
    /// Since `pr_F g` depends only on `F ∩ supp(g)`, it suffices to scan,
    /// for every generator, the subsets of its own support — exponential in
    /// the support size rather than the dimension.
    pub fn suppression_constant(&self) -> Result<Option<Rational>> {
        let mut best = Rational::zero();
        for g in self.ball.generators() {
            let supp = g.support();
            if supp.len() > SUBSET_SCAN_LIMIT {
                return Err(Error::CeilingExceeded {
                    what: "suppression subset scan",
                    dim: supp.len(),
                    limit: SUBSET_SCAN_LIMIT,
                });
            }
            for mask in 1u32..(1 << supp.len()) {
                let coords: Vec<usize> = supp
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> *b & 1 == 1)
                    .map(|(_, &c)| c)
                    .collect();
                match self.ball.gauge(&g.project_onto(&coords))? {
                    Some(v) => best = best.max(v),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(best))
    }

    /// Reference implementation of the suppression constant: the full
    /// `2^dim` scan over coordinate subsets, with no support restriction.
    /// Kept as an independent cross-check for the optimized route.
    pub fn suppression_constant_brute(&self) -> Result<Option<Rational>> {
        if self.dim() > SUBSET_SCAN_LIMIT {
            return Err(Error::CeilingExceeded {
                what: "suppression subset scan",
                dim: self.dim(),
                limit: SUBSET_SCAN_LIMIT,
            });
        }
        let mut best = Rational::zero();
        for mask in 1u32..(1 << self.dim()) {
            let coords: Vec<usize> = (0..self.dim()).filter(|c| mask >> c & 1 == 1).collect();
            for g in self.ball.generators() {
                match self.ball.gauge(&g.project_onto(&coords))? {
                    Some(v) => best = best.max(v),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(best))
    }

    /// Basis normalized and suppression constant exactly 1.
    pub fn is_one_based(&self) -> Result<bool> {
        if let Some(b) = self.one_based.get() {
            return Ok(*b);
        }
        let normalized = (0..self.dim()).all(|i| {
            matches!(
                self.ball.gauge(&RationalVector::unit(self.dim(), i)),
                Ok(Some(v)) if v.is_one()
            )
        });
        let v = normalized && self.suppression_constant()? == Some(Rational::one());
        let _ = self.one_based.set(v);
        Ok(v)
    }

    /// Full exact validation: dimensionality, basis normalization, and the
    /// suppression bound, each failure carrying a witness.
    pub fn validate(&self) -> Result<ValidationReport> {
        let full_dimensional = self.ball.is_full_dimensional();
        let mut basis_failures = Vec::new();
        for (i, label) in self.labels.iter().enumerate() {
            let g = self.ball.gauge(&RationalVector::unit(self.dim(), i))?;
            if g != Some(Rational::one()) {
                basis_failures.push(BasisFailure {
                    label: label.clone(),
                    gauge: g,
                });
            }
        }
        let mut suppression: Option<Rational> = Some(Rational::zero());
        let mut suppression_failures = Vec::new();
        'scan: for g in self.ball.generators() {
            let supp = g.support();
            if supp.len() > SUBSET_SCAN_LIMIT {
                return Err(Error::CeilingExceeded {
                    what: "suppression subset scan",
                    dim: supp.len(),
                    limit: SUBSET_SCAN_LIMIT,
                });
            }
            for mask in 1u32..(1 << supp.len()) {
                let coords: Vec<usize> = supp
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> *b & 1 == 1)
                    .map(|(_, &c)| c)
                    .collect();
                match self.ball.gauge(&g.project_onto(&coords))? {
                    Some(v) => {
                        if v > self.k_bound {
                            suppression_failures.push(SuppressionWitness {
                                labels: coords.iter().map(|&c| self.labels[c].clone()).collect(),
                                generator: g.resized(self.dim()),
                                norm: v.clone(),
                            });
                        }
                        suppression = suppression.map(|b| b.max(v));
                    }
                    None => {
                        suppression = None;
                        break 'scan;
                    }
                }
            }
        }
        Ok(ValidationReport {
            full_dimensional,
            basis_failures,
            suppression,
            suppression_failures,
        })
    }

    fn coords_of(&self, sub: &[String]) -> Result<Vec<usize>> {
        let mut coords = Vec::with_capacity(sub.len());
        for l in sub {
            coords.push(self.label_index(l)?);
        }
        let mut dedup = coords.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != coords.len() {
            return Err(Error::InvalidInput("repeated label in subset".into()));
        }
        Ok(coords)
    }

    /// Based subspace on a subset of labels; the ball is the exact section
    /// `B ∩ span(sub)`. Uses the coordinate projection when the space is
    /// known 1-based (sections equal projections there) and the facet route
    /// otherwise.
    pub fn based_subspace(&self, sub: &[String]) -> Result<BasedSpace> {
        let coords = self.coords_of(sub)?;
        let one_based_known = self.one_based.get() == Some(&true);
        let section = if one_based_known {
            self.ball.restrict_via_projection(&coords)?
        } else if self.dim() <= FACET_DIM_LIMIT {
            self.ball.restrict_to_coordinate_subspace(&coords)?
        } else if self.is_one_based()? {
            self.ball.restrict_via_projection(&coords)?
        } else {
            return Err(Error::CeilingExceeded {
                what: "section of a non-1-based ball (facet enumeration)",
                dim: self.dim(),
                limit: FACET_DIM_LIMIT,
            });
        };
        let out = BasedSpace::new(sub.to_vec(), section, self.k_bound.clone())?;
        if self.one_based.get() == Some(&true) {
            // Coordinate sections of a 1-based ball are again 1-based.
            out.mark_one_based();
        }
        Ok(out)
    }

    /// Equivalent renorming with suppression constant 1: the new ball is
    /// `⋂_F pr_F⁻¹(B)`, i.e. the unit ball of `|x| = max_F ‖pr_F x‖`.
    ///
    /// The result satisfies `‖x‖ ≤ |x| ≤ K·‖x‖` and keeps every basis
    /// vector at norm 1, so the identity map is a K-equivalence onto a
    /// 1-based space. Requires a normalized basis and the facet ceiling.
    pub fn renorm_to_one_based(&self) -> Result<BasedSpace> {
        let n = self.dim();
        for i in 0..n {
            if self.ball.gauge(&RationalVector::unit(n, i))? != Some(Rational::one()) {
                return Err(Error::InvalidSpace(format!(
                    "basis vector {:?} is not normalized; renorming requires a normalized basis",
                    self.labels[i]
                )));
            }
        }
        if n > SUBSET_SCAN_LIMIT {
            return Err(Error::CeilingExceeded {
                what: "renorm subset scan",
                dim: n,
                limit: SUBSET_SCAN_LIMIT,
            });
        }
        let facets = self.ball.facets()?;
        let mut pulled: Vec<crate::polytope::Facet> = Vec::new();
        for mask in 1u64..(1 << n) {
            let coords: Vec<usize> = (0..n).filter(|c| mask >> c & 1 == 1).collect();
            for f in facets {
                let normal = f.normal.project_onto(&coords);
                if normal.is_zero() {
                    continue;
                }
                pulled.push(crate::polytope::Facet {
                    normal,
                    offset: f.offset.clone(),
                });
            }
        }
        let ball = Polytope::from_facets_dedup(n, pulled)?;
        let out = BasedSpace::new(self.labels.clone(), ball, Rational::one())?;
        out.mark_one_based();
        Ok(out)
    }

    /// Representative of the relabeling-isomorphism class: labels sorted,
    /// redundant generators pruned, and the generator matrix minimized over
    /// all coordinate permutations. Two spaces on the same label set have
    /// equal canonical forms exactly when a relabeling isometry exists.
    /// Does not preserve which label names which coordinate.
    pub fn canonical_form(&self) -> Result<BasedSpace> {
        if self.dim() > FACET_DIM_LIMIT {
            return Err(Error::CeilingExceeded {
                what: "canonical form (permutation scan)",
                dim: self.dim(),
                limit: FACET_DIM_LIMIT,
            });
        }
        let pruned = self.ball.prune_redundant()?;
        let mut sorted_labels = self.labels.clone();
        sorted_labels.sort();
        let mut best: Option<(Vec<Vec<Rational>>, Polytope)> = None;
        for perm in permutations(self.dim()) {
            let cand = pruned.map(self.dim(), |g| g.extract(&perm))?;
            let key = generator_matrix(&cand);
            if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
                best = Some((key, cand));
            }
        }
        let (_, ball) = best.expect("at least the identity permutation");
        let out = BasedSpace::new(sorted_labels, ball, self.k_bound.clone())?;
        if self.one_based.get() == Some(&true) {
            out.mark_one_based();
        }
        Ok(out)
    }

}

pub(crate) fn generator_matrix(p: &Polytope) -> Vec<Vec<Rational>> {
    p.generators()
        .map(|g| (0..p.dim()).map(|i| g.entry(i)).collect())
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, &mut cur, &mut used, &mut out);
    out
}

impl PartialEq for BasedSpace {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.ball == other.ball && self.k_bound == other.k_bound
    }
}

impl Eq for BasedSpace {}

impl fmt::Debug for BasedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BasedSpace(labels={:?}, K={}, {} generator pairs)",
            self.labels,
            self.k_bound,
            self.ball.generator_count()
        )
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceWire {
    labels: Vec<String>,
    k_bound: Rational,
    ball: Polytope,
}

impl Serialize for BasedSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceWire {
            labels: self.labels.clone(),
            k_bound: self.k_bound.clone(),
            ball: self.ball.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasedSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = SpaceWire::deserialize(d)?;
        BasedSpace::new(wire.labels, wire.ball, wire.k_bound).map_err(D::Error::custom)
    }
}
