//! Perturbed-norm machinery: grid rationals inside open intervals,
//! sandwich polyhedra between scaled copies of a ball, and certified
//! extension of a perturbed norm from a coordinate subspace to the whole
//! space.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactnum::{Rational, RationalVector};
use crate::fraisse::{grow_chain, Chain};
use crate::morphism::BasedMorphism;
use crate::polytope::Polytope;
use crate::space::BasedSpace;

/// Support sizes beyond this make the 2^|supp| projection closure
/// unreasonable.
const CLOSURE_SUPPORT_LIMIT: usize = 16;

/// Default denominator cap for sandwich scales; wide enough for every
/// gap the toolkit produces at its working precisions.
pub const SANDWICH_DENOMINATOR_LIMIT: u64 = 1_000_000_000;

/// Smallest multiple of `base^-e`, for the least `e ≥ 0` admitting one,
/// strictly inside `(lo, hi)`.
fn grid_between(lo: &Rational, hi: &Rational, base: u32) -> Result<Rational> {
    if lo >= hi {
        return Err(Error::EmptyInterval {
            lo: lo.to_string(),
            hi: hi.to_string(),
        });
    }
    let base = Rational::from_int(base as i64);
    let mut step = Rational::one();
    loop {
        let m = (lo / &step).floor_int();
        // candidate = (floor(lo·base^e) + 1) / base^e, always > lo.
        let cand = &Rational::from_bigint(m + BigInt::from(1)) * &step;
        if cand < *hi {
            return Ok(cand);
        }
        step = &step / &base;
    }
}

/// Least-denominator dyadic strictly inside the open interval.
pub fn dyadic_between(lo: &Rational, hi: &Rational) -> Result<Rational> {
    grid_between(lo, hi, 2)
}

/// Least-denominator power-of-ten multiple strictly inside the open
/// interval.
pub fn decimal_between(lo: &Rational, hi: &Rational) -> Result<Rational> {
    grid_between(lo, hi, 10)
}

/// `max_g gauge_B(g)` over the generators of `of`, i.e. the least `t` with
/// `of ⊆ t·B`. Empty generator lists give 0.
fn covering_ratio(of: &Polytope, b: &Polytope) -> Result<Rational> {
    let mut r = Rational::zero();
    for g in of.generators() {
        match b.gauge(&g.resized(of.dim()))? {
            Some(v) => r = r.max(v),
            None => {
                return Err(Error::DegenerateBall(
                    "perturbed ball leaves the reference span".into(),
                ))
            }
        }
    }
    Ok(r)
}

/// Picks a grid rational `δ < ε` with `(1+δ)^-1·B ⊆ B′ ⊆ (1+δ)·B`, given
/// that the same holds strictly for ε (checked exactly at vertices).
///
/// The exact extremal ratio `δ* = max_t {B′ ⊆ t·B, B ⊆ t·B′} − 1` is
/// computed from generator gauges; δ is the least-denominator dyadic in
/// `(δ*, (δ*+ε)/2)`, leaving grid room above for a second parameter.
pub fn choose_delta(
    lambda_prime_ball: &Polytope,
    lambda_ball: &Polytope,
    epsilon: &Rational,
) -> Result<Rational> {
    if lambda_prime_ball.dim() != lambda_ball.dim() {
        return Err(Error::DimensionMismatch {
            context: "perturbed ball",
            expected: lambda_ball.dim(),
            got: lambda_prime_ball.dim(),
        });
    }
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let up = covering_ratio(lambda_prime_ball, lambda_ball)?;
    let dn = covering_ratio(lambda_ball, lambda_prime_ball)?;
    let ratio = up.max(dn).max(Rational::one());
    let bound = &Rational::one() + epsilon;
    if ratio >= bound {
        return Err(Error::InvalidInput(format!(
            "not an ε-perturbation: extremal vertex ratio {ratio} reaches 1+ε = {bound}"
        )));
    }
    let star = &ratio - &Rational::one();
    let half = Rational::frac(1, 2);
    dyadic_between(&star, &(&(&star + epsilon) * &half))
}

/// `0 < δ < δ′ < ε`, the two slack levels between a perturbed ball and an
/// ε bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichParams {
    pub delta: Rational,
    pub delta_prime: Rational,
    pub epsilon: Rational,
}

impl SandwichParams {
    pub fn new(delta: Rational, delta_prime: Rational, epsilon: Rational) -> Result<Self> {
        if !delta.is_positive() || delta >= delta_prime || delta_prime >= epsilon {
            return Err(Error::InvalidInput(format!(
                "need 0 < delta < delta_prime < epsilon, got {delta} / {delta_prime} / {epsilon}"
            )));
        }
        Ok(SandwichParams {
            delta,
            delta_prime,
            epsilon,
        })
    }

    /// Derives both slack levels from the exact distortion of
    /// `lambda_prime_ball` against `lambda_ball`: δ from `choose_delta`,
    /// δ′ the least dyadic in `(δ, ε)`.
    pub fn derive(
        lambda_prime_ball: &Polytope,
        lambda_ball: &Polytope,
        epsilon: &Rational,
    ) -> Result<Self> {
        let delta = choose_delta(lambda_prime_ball, lambda_ball, epsilon)?;
        let delta_prime = dyadic_between(&delta, epsilon)?;
        SandwichParams::new(delta, delta_prime, epsilon.clone())
    }
}

/// A symmetric rational polytope `P` with
/// `(1+δ′)^-1·B ⊂ P ⊂ (1+δ)^-1·B` strictly, closed under all coordinate
/// projections: `P = conv(∪_F pr_F P)`.
///
/// The scale is the least power-of-ten multiple in the open scale
/// interval; the closure adds every projection of every generator onto a
/// subset of its support. Both strict inclusions are verified exactly at
/// vertices (for a ball with 1-suppression gauge the closure cannot break
/// them; anything else is reported as a violation).
pub fn rational_sandwich(
    ball: &Polytope,
    params: &SandwichParams,
    denominator_bound: u64,
) -> Result<Polytope> {
    let one = Rational::one();
    let lo = (&one + &params.delta_prime).recip();
    let hi = (&one + &params.delta).recip();
    let scale = decimal_between(&lo, &hi)?;
    if scale.denom() > &BigInt::from(denominator_bound) {
        return Err(Error::SandwichInfeasible {
            lo: lo.to_string(),
            hi: hi.to_string(),
            bound: denominator_bound.to_string(),
        });
    }

    let scaled = ball.scaled(&scale);
    let mut gens: Vec<RationalVector> = Vec::new();
    for g in scaled.generators() {
        let supp = g.support();
        if supp.len() > CLOSURE_SUPPORT_LIMIT {
            return Err(Error::CeilingExceeded {
                what: "projection closure (2^support scan)",
                dim: supp.len(),
                limit: CLOSURE_SUPPORT_LIMIT,
            });
        }
        for mask in 0..(1u32 << supp.len()) {
            let keep: Vec<usize> = supp
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &c)| c)
                .collect();
            let v = g.project_onto(&keep);
            if !v.is_zero() {
                gens.push(v);
            }
        }
    }
    let p = Polytope::new(ball.dim(), gens)?.prune_redundant()?;

    for v in ball.generators() {
        match p.gauge(&v.resized(ball.dim()))? {
            Some(g) if g < &one + &params.delta_prime => {}
            g => {
                return Err(Error::ConstructionViolated(format!(
                    "sandwich lower inclusion fails at vertex {v:?}: gauge {g:?} vs bound 1+δ′"
                )))
            }
        }
    }
    for w in p.generators() {
        match ball.gauge(&w.resized(ball.dim()))? {
            Some(g) if &g * &(&one + &params.delta) < one => {}
            g => {
                return Err(Error::ConstructionViolated(format!(
                    "sandwich upper inclusion fails at vertex {w:?}: gauge {g:?} vs bound (1+δ)⁻¹"
                )))
            }
        }
    }
    Ok(p)
}

/// Exact record of the extension-ball obligations, all certified before
/// the result is returned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// The new ball's section over the subspace equals the perturbed ball.
    pub restriction_equal: bool,
    /// Every basis vector has new norm exactly 1.
    pub basis_norms_one: bool,
    /// Suppression constant of the extended space (must be 1).
    pub suppression: Rational,
    /// `max_v gauge′(v)` over old-ball vertices; `< 1+ε` strictly.
    pub expansion_max: Rational,
    /// `max_w gauge(w)` over new-ball vertices; `< 1+ε` strictly.
    pub contraction_max: Rational,
    /// `1+ε`.
    pub bound: Rational,
}

/// A certified extension of a perturbed norm to the whole space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionResult {
    /// The space with the extended norm.
    pub a_prime: BasedSpace,
    /// The perturbed ball on the subspace coordinates.
    pub lambda_prime_ball: Polytope,
    /// The sandwich polytope used as filler.
    pub p: Polytope,
    pub report: ExtensionReport,
}

/// Extends a perturbed norm `B′_Λ` on the subspace spanned by
/// `lambda_labels` to all of `a`, keeping the basis normalized and
/// 1-suppression: the new ball is `conv(B′_Λ ∪ {±e_b} ∪ P)` with `P` a
/// projection-closed sandwich polytope.
///
/// Verified exactly before returning, with violations reported as errors:
/// the new ball's section over Λ equals `B′_Λ`; every basis norm is 1
/// (independently certified by coordinate-functional scans); suppression
/// is exactly 1; the new norm is strictly within the `(1+ε)` sandwich of
/// the old one at all vertices.
pub fn extension_ball(
    a: &BasedSpace,
    lambda_labels: &[String],
    lambda_prime_ball: &Polytope,
    params: &SandwichParams,
) -> Result<ExtensionResult> {
    if !a.is_one_based()? {
        return Err(Error::InvalidSpace(
            "extension requires a 1-based ambient space".into(),
        ));
    }
    let lambda_coords: Vec<usize> = lambda_labels
        .iter()
        .map(|l| a.label_index(l))
        .collect::<Result<_>>()?;
    if lambda_prime_ball.dim() != lambda_labels.len() {
        return Err(Error::DimensionMismatch {
            context: "perturbed subspace ball",
            expected: lambda_labels.len(),
            got: lambda_prime_ball.dim(),
        });
    }

    // The perturbed ball must itself be a normalized 1-suppression ball:
    // it plays the role of a subspace norm pulled back through a
    // basis-preserving map, which forces both properties.
    if !lambda_labels.is_empty() {
        let probe = BasedSpace::new(
            lambda_labels.to_vec(),
            lambda_prime_ball.clone(),
            Rational::one(),
        )?;
        let v = probe.validate()?;
        if !v.is_valid() {
            return Err(Error::InvalidInput(
                "perturbed ball must be a normalized 1-suppression ball on the subspace".into(),
            ));
        }
    }

    // Strict ε-sandwich of B′_Λ against the exact section of a's ball.
    let lambda_ball = a.ball().restrict_via_projection(&lambda_coords)?;
    let bound = &Rational::one() + &params.epsilon;
    let up = covering_ratio(lambda_prime_ball, &lambda_ball)?;
    let dn = covering_ratio(&lambda_ball, lambda_prime_ball)?;
    if up.clone().max(dn.clone()) >= bound {
        return Err(Error::InvalidInput(format!(
            "perturbed ball is not strictly ε-sandwiched: ratio {} vs 1+ε = {bound}",
            up.max(dn)
        )));
    }

    let p = rational_sandwich(a.ball(), params, SANDWICH_DENOMINATOR_LIMIT)?;

    let dim = a.dim();
    let mut gens: Vec<RationalVector> = Vec::new();
    for g in lambda_prime_ball.generators() {
        let mut v = RationalVector::zeros(dim);
        for (k, &c) in lambda_coords.iter().enumerate() {
            v.set(c, g.entry(k));
        }
        gens.push(v);
    }
    for i in 0..dim {
        gens.push(RationalVector::unit(dim, i));
    }
    gens.extend(p.generators().map(|g| g.resized(dim)));
    let b_prime = Polytope::new(dim, gens)?.prune_redundant()?;

    // (i) Section over Λ equals B′_Λ: the ⊇ direction is by construction;
    // ⊆ holds because every generator's Λ-projection lands inside B′_Λ,
    // which pins section ⊆ projection ⊆ B′_Λ.
    for g in b_prime.generators() {
        let pr = g.resized(dim).extract(&lambda_coords);
        let inside = if lambda_coords.is_empty() {
            pr.is_zero()
        } else {
            matches!(lambda_prime_ball.gauge(&pr)?, Some(v) if v <= Rational::one())
        };
        if !inside {
            return Err(Error::ConstructionViolated(format!(
                "projection of generator {g:?} onto the subspace leaves the perturbed ball"
            )));
        }
    }

    // (ii) Basis norms: coordinate-functional certificate (max |g_b| = 1
    // over generators forces gauge ≥ 1) cross-checked against the gauge LP.
    for i in 0..dim {
        let e = RationalVector::unit(dim, i);
        let dual = b_prime.dual_gauge(&e);
        let primal = b_prime.gauge(&e)?;
        if dual != Rational::one() || primal != Some(Rational::one()) {
            return Err(Error::ConstructionViolated(format!(
                "basis vector {:?} has new norm {primal:?} (dual certificate {dual})",
                a.labels()[i]
            )));
        }
    }

    let a_prime = BasedSpace::new(a.labels().to_vec(), b_prime, Rational::one())?;

    // (iii) 1-suppression, exactly.
    let supp = a_prime.suppression_constant()?;
    if supp != Some(Rational::one()) {
        return Err(Error::ConstructionViolated(format!(
            "extended ball has suppression {supp:?}, expected 1"
        )));
    }
    a_prime.mark_one_based();

    // (iv) Strict (1+ε) sandwich at vertices, both directions.
    let mut expansion_max = Rational::zero();
    for v in a.ball().generators() {
        match a_prime.ball().gauge(&v.resized(dim))? {
            Some(g) => expansion_max = expansion_max.max(g),
            None => {
                return Err(Error::ConstructionViolated(
                    "old vertex leaves the span of the new ball".into(),
                ))
            }
        }
    }
    let mut contraction_max = Rational::zero();
    for w in a_prime.ball().generators() {
        match a.ball().gauge(&w.resized(dim))? {
            Some(g) => contraction_max = contraction_max.max(g),
            None => {
                return Err(Error::ConstructionViolated(
                    "new vertex leaves the span of the old ball".into(),
                ))
            }
        }
    }
    if expansion_max >= bound || contraction_max >= bound {
        return Err(Error::ConstructionViolated(format!(
            "sandwich not strict: expansion {expansion_max}, contraction {contraction_max}, bound {bound}"
        )));
    }

    Ok(ExtensionResult {
        a_prime,
        lambda_prime_ball: lambda_prime_ball.clone(),
        p,
        report: ExtensionReport {
            restriction_equal: true,
            basis_norms_one: true,
            suppression: Rational::one(),
            expansion_max,
            contraction_max,
            bound,
        },
    })
}

/// The ball of the norm `x ↦ ‖f(x)‖` on the domain of `f`: the codomain
/// ball's exact section over the image coordinates, pulled back through
/// the label bijection.
pub fn pullback_norm(f: &BasedMorphism) -> Result<Polytope> {
    if !f.is_injective() {
        let labels = f.domain().labels();
        return Err(Error::NotInjective {
            a: labels.first().cloned().unwrap_or_default(),
            b: labels.last().cloned().unwrap_or_default(),
        });
    }
    let image_labels: Vec<String> = f
        .domain()
        .labels()
        .iter()
        .map(|l| f.label_map()[l].clone())
        .collect();
    Ok(f.codomain().based_subspace(&image_labels)?.ball().clone())
}

/// Extends an ε-isometry `f`, defined on the subspace of `a` spanned by
/// `lambda_labels`, to all of `a`, landing in a one-step-grown top of the
/// chain: the norm on the subspace is pulled back through `f`, extended
/// across `a` with basis norms pinned at 1 and suppression 1, and the
/// perturbed space is amalgamated onto the top over the shared subspace.
///
/// The returned morphism restricted to the subspace equals `f` followed by
/// the chain inclusion (label-map identity, checked by the pushout), and
/// its distortion is certified strictly within `(1/(1+ε), 1+ε)`. When the
/// pulled-back norm already equals the subspace norm — in particular for
/// an empty subspace — nothing is perturbed and the result is an exact
/// isometry.
pub fn extend_epsilon_isometry(
    a: &BasedSpace,
    lambda_labels: &[String],
    f: &BasedMorphism,
    chain: &mut Chain,
    epsilon: &Rational,
) -> Result<BasedMorphism> {
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    if chain.k_bound() != &Rational::one() {
        return Err(Error::InvalidInput(
            "ε-extension requires a 1-based chain; renormalize first".into(),
        ));
    }
    if !a.is_one_based()? {
        return Err(Error::InvalidSpace(
            "ε-extension requires a 1-based source space; renormalize first".into(),
        ));
    }
    let lam = a.based_subspace(lambda_labels)?;
    if f.domain() != &lam {
        return Err(Error::SpaceMismatch(
            "partial map must be defined on the named subspace of the extension source".into(),
        ));
    }
    if f.codomain() != chain.top() {
        return Err(Error::SpaceMismatch(
            "partial map must land in the chain's top stage".into(),
        ));
    }
    if !f.is_epsilon_isometry(epsilon)? {
        return Err(Error::NotIsometry(format!(
            "partial map is not an ε-isometry at ε = {epsilon}"
        )));
    }

    let pulled = pullback_norm(f)?;
    let exact = lambda_labels.is_empty()
        || (covering_ratio(&pulled, lam.ball())? <= Rational::one()
            && covering_ratio(lam.ball(), &pulled)? <= Rational::one());
    let a_prime = if exact {
        a.clone()
    } else {
        let params = SandwichParams::derive(&pulled, lam.ball(), epsilon)?;
        extension_ball(a, lambda_labels, &pulled, &params)?.a_prime
    };

    // The subspace of the perturbed space carries exactly the pulled-back
    // norm, so `f`'s label map is an exact isometry from it into the top —
    // the two legs of the pushout.
    let lam_prime = a_prime.based_subspace(lambda_labels)?;
    let to_top = BasedMorphism::new(
        lam_prime.clone(),
        chain.top().clone(),
        f.label_map().clone(),
    )?;
    to_top.certify_isometry()?;
    let attach = BasedMorphism::inclusion(&lam_prime, &a_prime)?;
    let leg = grow_chain(chain, &to_top, &attach, None)?;

    let result = BasedMorphism::new(a.clone(), leg.codomain().clone(), leg.label_map().clone())?;
    if !result.is_epsilon_isometry(epsilon)? {
        return Err(Error::ConstructionViolated(format!(
            "extended map leaves the ε bound at ε = {epsilon}"
        )));
    }
    Ok(result)
}
