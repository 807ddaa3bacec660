//! ℓ1-sums and pushout amalgamation of based spaces over a common
//! isometrically embedded subspace, with an exact quotient-distance oracle.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactnum::{
    solve_lp, LpOutcome, LpProblem, Rational, RationalMatrix, RationalVector, VarSign,
};
use crate::morphism::BasedMorphism;
use crate::polytope::Polytope;
use crate::space::BasedSpace;

/// Pushout of `f: Z → X`, `g: Z → Y` along isometric legs: a space `W`
/// containing both through `left: X → W` and `right: Y → W`, which agree
/// on the shared subspace (`left ∘ f = right ∘ g` as label maps).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amalgam {
    pub space: BasedSpace,
    pub left: BasedMorphism,
    pub right: BasedMorphism,
}

/// `X ⊕₁ Y`: concatenated labels, ball `conv(B_X × {0} ∪ {0} × B_Y)`, so
/// the norm is `‖x‖ + ‖y‖`. Both blocks include isometrically.
pub fn l1_sum(x: &BasedSpace, y: &BasedSpace) -> Result<BasedSpace> {
    let mut labels: Vec<String> = x.labels().to_vec();
    for l in y.labels() {
        if x.labels().contains(l) {
            return Err(Error::LabelCollision(l.clone()));
        }
        labels.push(l.clone());
    }
    let dim = x.dim() + y.dim();
    let mut gens: Vec<RationalVector> = x
        .ball()
        .generators()
        .map(|g| g.resized(dim))
        .collect();
    for g in y.ball().generators() {
        let mut v = RationalVector::zeros(dim);
        for (k, e) in g.iter().enumerate() {
            v.set(x.dim() + k, e.clone());
        }
        gens.push(v);
    }
    let ball = Polytope::new(dim, gens)?;
    let space = BasedSpace::new(labels, ball, x.k_bound().clone().max(y.k_bound().clone()))?;
    if x.one_based_hint() == Some(true) && y.one_based_hint() == Some(true) {
        space.mark_one_based();
    }
    Ok(space)
}

/// Amalgamates `f: Z → X` and `g: Z → Y` over their common domain.
///
/// Both legs must be isometric embeddings (checked; failures surface as
/// `AmalgamPrecondition`). The result identifies `f(z)` with `g(z)`: its
/// label set is `labels(X) ∪ (labels(Y) ∖ g(labels(Z)))`, its ball the
/// hull of both embedded generator families. This is the quotient of
/// `X ⊕₁ Y` by the diagonal `{(f(z), −g(z))}`, so both legs of the result
/// are again isometric; `quotient_distance` recomputes the same norm from
/// the ⊕₁ side without ever building `W`, for independent verification.
pub fn amalgamate(f: &BasedMorphism, g: &BasedMorphism) -> Result<Amalgam> {
    if f.domain() != g.domain() {
        return Err(Error::SpaceMismatch(
            "amalgamation legs must share their domain".into(),
        ));
    }
    f.certify_isometry()
        .map_err(|e| Error::AmalgamPrecondition(format!("left leg: {e}")))?;
    g.certify_isometry()
        .map_err(|e| Error::AmalgamPrecondition(format!("right leg: {e}")))?;
    if !f.is_injective() || !g.is_injective() {
        return Err(Error::AmalgamPrecondition(
            "legs must be injective label maps".into(),
        ));
    }

    let x = f.codomain();
    let y = g.codomain();
    let z = f.domain();

    // Y-labels hit by g get identified with their f-partner; the rest are
    // adjoined and must not clash with X.
    let mut y_to_w: BTreeMap<String, String> = BTreeMap::new();
    for l in z.labels() {
        y_to_w.insert(g.label_map()[l].clone(), f.label_map()[l].clone());
    }
    let mut labels: Vec<String> = x.labels().to_vec();
    let taken: BTreeSet<&String> = x.labels().iter().collect();
    for l in y.labels() {
        if y_to_w.contains_key(l) {
            continue;
        }
        if taken.contains(l) {
            return Err(Error::LabelCollision(l.clone()));
        }
        y_to_w.insert(l.clone(), l.clone());
        labels.push(l.clone());
    }

    let dim = labels.len();
    let index: BTreeMap<&String, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut gens: Vec<RationalVector> = x
        .ball()
        .generators()
        .map(|gx| gx.resized(dim))
        .collect();
    for gy in y.ball().generators() {
        let mut v = RationalVector::zeros(dim);
        for (k, e) in gy.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let w_idx = index[&y_to_w[&y.labels()[k]]];
            let cur = v.entry(w_idx);
            v.set(w_idx, &cur + e);
        }
        gens.push(v);
    }

    let ball = Polytope::new(dim, gens)?;
    let space = BasedSpace::new(labels, ball, x.k_bound().clone().max(y.k_bound().clone()))?;
    if x.one_based_hint() == Some(true) && y.one_based_hint() == Some(true) {
        space.mark_one_based();
    }

    let left = BasedMorphism::inclusion(x, &space)?;
    let right = BasedMorphism::new(y.clone(), space.clone(), y_to_w)?;
    assert_eq!(
        f.then(&left)?,
        g.then(&right)?,
        "pushout square must commute"
    );
    Ok(Amalgam { space, left, right })
}

/// Distance from `(x, y)` to the diagonal `Δ = span{(f(z), −g(z))}` inside
/// `X ⊕₁ Y`, as one exact LP:
/// `min Σ|α| + Σ|β|  s.t.  Σ αᵢ gˣᵢ + F z = x,  Σ βⱼ gʸⱼ − G z = y`
/// over free `z`. Equals the amalgam norm of `left(x) + right(y)`.
/// `None` when `(x, y)` is not reachable, i.e. lies outside `span(B_X × B_Y) + Δ`.
pub fn quotient_distance(
    f: &BasedMorphism,
    g: &BasedMorphism,
    x: &RationalVector,
    y: &RationalVector,
) -> Result<Option<Rational>> {
    if f.domain() != g.domain() {
        return Err(Error::SpaceMismatch(
            "quotient distance needs legs over a common domain".into(),
        ));
    }
    let (dx, dy, dz) = (f.codomain().dim(), g.codomain().dim(), f.domain().dim());
    let gens_x: Vec<RationalVector> = f
        .codomain()
        .ball()
        .generators()
        .map(|v| v.resized(dx))
        .collect();
    let gens_y: Vec<RationalVector> = g
        .codomain()
        .ball()
        .generators()
        .map(|v| v.resized(dy))
        .collect();
    let ncols = 2 * (gens_x.len() + gens_y.len()) + dz;
    let nrows = dx + dy;
    let mut m = RationalMatrix::zeros(nrows, ncols);
    let mut obj = RationalVector::zeros(ncols);
    let mut signs = vec![VarSign::NonNeg; ncols];
    let mut col = 0;
    for gv in &gens_x {
        for (r, e) in gv.iter().enumerate() {
            m.set(r, col, e.clone());
            m.set(r, col + 1, -e.clone());
        }
        obj.set(col, Rational::one());
        obj.set(col + 1, Rational::one());
        col += 2;
    }
    for gv in &gens_y {
        for (r, e) in gv.iter().enumerate() {
            m.set(dx + r, col, e.clone());
            m.set(dx + r, col + 1, -e.clone());
        }
        obj.set(col, Rational::one());
        obj.set(col + 1, Rational::one());
        col += 2;
    }
    for k in 0..dz {
        let fz = f.apply(&RationalVector::unit(dz, k));
        let gz = g.apply(&RationalVector::unit(dz, k));
        for (r, e) in fz.iter().enumerate() {
            m.set(r, col, e.clone());
        }
        for (r, e) in gz.iter().enumerate() {
            m.set(dx + r, col, -e.clone());
        }
        signs[col] = VarSign::Free;
        col += 1;
    }
    let mut rhs = RationalVector::zeros(nrows);
    for (r, e) in x.resized(dx).iter().enumerate() {
        rhs.set(r, e.clone());
    }
    for (r, e) in y.resized(dy).iter().enumerate() {
        rhs.set(dx + r, e.clone());
    }
    let p = LpProblem::new(obj, m, rhs, signs)?;
    match solve_lp(&p)? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded { .. } => {
            unreachable!("nonnegative objective over nonnegative budget variables")
        }
    }
}
