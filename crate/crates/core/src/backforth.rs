//! Back-and-forth between two chains: interleaved sequences
//! `f_k: X_{n_{k-1}} → Y_{m_k}` and `g_k: Y_{m_k} → X_{n_k}` whose
//! round-trip composites are same-label inclusions, so each finite stage
//! of either chain is eventually carried into the other. The exact flavor
//! searches the receiving chain's stages for completions, optionally
//! growing it by pushout when none exists; the ε flavor always grows,
//! through perturbed-ball extensions, and certifies every map against one
//! dyadic δ chosen from the seed's exact distortion.

use std::collections::BTreeMap;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::approx::{dyadic_between, extend_epsilon_isometry};
use crate::error::{Error, Result};
use crate::exactnum::Rational;
use crate::fraisse::{find_completion, grow_chain, Chain, ExtensionRequest, NormCache};
use crate::morphism::{BasedMorphism, Distortion};
use crate::space::BasedSpace;

/// Whether a receiving chain may be extended by pushout when none of its
/// stages admits the required completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthPolicy {
    Frozen,
    Growable,
}

/// Certification regime of a transcript: exact isometries throughout, or
/// δ-isometries for the one recorded dyadic δ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptMode {
    Exact,
    Epsilon(Rational),
}

/// The interleaved morphism sequences of one run.
/// Shape: `f_list[i]: X_{n_indices[i]} → Y_{m_indices[i]}` and
/// `g_list[i]: Y_{m_indices[i]} → X_{n_indices[i+1]}`; `f_list` may carry
/// one dangling forward map beyond the last backward one.
#[derive(Clone, Debug)]
pub struct BackForthTranscript {
    f_list: Vec<BasedMorphism>,
    g_list: Vec<BasedMorphism>,
    n_indices: Vec<usize>,
    m_indices: Vec<usize>,
    mode: TranscriptMode,
}

fn stage<'a>(chain: &'a Chain, index: usize, side: &str) -> Result<&'a BasedSpace> {
    chain.stages().get(index).ok_or_else(|| {
        Error::ConstructionViolated(format!(
            "transcript cites stage {index} missing from the {side} chain"
        ))
    })
}

impl BackForthTranscript {
    pub fn f_list(&self) -> &[BasedMorphism] {
        &self.f_list
    }

    pub fn g_list(&self) -> &[BasedMorphism] {
        &self.g_list
    }

    pub fn n_indices(&self) -> &[usize] {
        &self.n_indices
    }

    pub fn m_indices(&self) -> &[usize] {
        &self.m_indices
    }

    pub fn mode(&self) -> &TranscriptMode {
        &self.mode
    }

    /// Checks the transcript against the chains it was built between:
    /// shapes, strictly increasing stage indices, stage identity of every
    /// domain and codomain, both round-trip families and coherence as
    /// label-map equalities, and the mode's certificate on every map.
    pub fn validate(&self, x_chain: &Chain, y_chain: &Chain) -> Result<()> {
        if self.n_indices.len() != self.g_list.len() + 1 {
            return Err(Error::ConstructionViolated(format!(
                "{} backward maps need {} X-indices, found {}",
                self.g_list.len(),
                self.g_list.len() + 1,
                self.n_indices.len()
            )));
        }
        if self.m_indices.len() != self.f_list.len() {
            return Err(Error::ConstructionViolated(format!(
                "{} forward maps need as many Y-indices, found {}",
                self.f_list.len(),
                self.m_indices.len()
            )));
        }
        if self.f_list.len() != self.g_list.len() && self.f_list.len() != self.g_list.len() + 1 {
            return Err(Error::ConstructionViolated(format!(
                "{} forward maps cannot interleave with {} backward maps",
                self.f_list.len(),
                self.g_list.len()
            )));
        }
        for w in self.n_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::ConstructionViolated(
                    "X-stage indices must strictly increase".into(),
                ));
            }
        }
        for w in self.m_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::ConstructionViolated(
                    "Y-stage indices must strictly increase".into(),
                ));
            }
        }
        for (i, f) in self.f_list.iter().enumerate() {
            if f.domain() != stage(x_chain, self.n_indices[i], "first")? {
                return Err(Error::ConstructionViolated(format!(
                    "forward map {i} does not start at its cited stage"
                )));
            }
            if f.codomain() != stage(y_chain, self.m_indices[i], "second")? {
                return Err(Error::ConstructionViolated(format!(
                    "forward map {i} does not land in its cited stage"
                )));
            }
        }
        for (i, g) in self.g_list.iter().enumerate() {
            if g.domain() != stage(y_chain, self.m_indices[i], "second")? {
                return Err(Error::ConstructionViolated(format!(
                    "backward map {i} does not start at its cited stage"
                )));
            }
            if g.codomain() != stage(x_chain, self.n_indices[i + 1], "first")? {
                return Err(Error::ConstructionViolated(format!(
                    "backward map {i} does not land in its cited stage"
                )));
            }
        }
        for (i, g) in self.g_list.iter().enumerate() {
            for (xl, yl) in self.f_list[i].label_map() {
                if g.label_map().get(yl) != Some(xl) {
                    return Err(Error::ConstructionViolated(format!(
                        "backward map {i} does not invert the forward map before it"
                    )));
                }
            }
            if let Some(f_next) = self.f_list.get(i + 1) {
                for (yl, xl) in g.label_map() {
                    if f_next.label_map().get(xl) != Some(yl) {
                        return Err(Error::ConstructionViolated(format!(
                            "forward map {} does not invert the backward map before it",
                            i + 1
                        )));
                    }
                }
            }
        }
        for w in self.f_list.windows(2) {
            for (xl, yl) in w[0].label_map() {
                if w[1].label_map().get(xl) != Some(yl) {
                    return Err(Error::ConstructionViolated(
                        "a forward map does not extend its predecessor".into(),
                    ));
                }
            }
        }
        match &self.mode {
            TranscriptMode::Exact => {
                for m in self.f_list.iter().chain(&self.g_list) {
                    m.certify_isometry()?;
                }
            }
            TranscriptMode::Epsilon(delta) => {
                if !delta.is_positive() {
                    return Err(Error::InvalidInput(
                        "recorded δ must be positive".into(),
                    ));
                }
                for m in self.f_list.iter().chain(&self.g_list) {
                    if !m.is_epsilon_isometry(delta)? {
                        return Err(Error::NotIsometry(format!(
                            "a transcript map exceeds the recorded δ = {delta}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Serialize for BackForthTranscript {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("BackForthTranscript", 5)?;
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("n_indices", &self.n_indices)?;
        st.serialize_field("m_indices", &self.m_indices)?;
        let f: Vec<&BTreeMap<String, String>> =
            self.f_list.iter().map(|m| m.label_map()).collect();
        st.serialize_field("f", &f)?;
        let g: Vec<&BTreeMap<String, String>> =
            self.g_list.iter().map(|m| m.label_map()).collect();
        st.serialize_field("g", &g)?;
        st.end()
    }
}

/// A first-class outcome, not an error: finite frozen chains legitimately
/// lack extensions. Names the direction, the stage whose span could not be
/// carried over, and the partial map that had to be extended.
#[derive(Clone, Debug, Serialize)]
pub struct StuckReport {
    pub rounds_completed: usize,
    pub into_y: bool,
    pub source_stage: usize,
    pub pinned: BTreeMap<String, String>,
    pub transcript: BackForthTranscript,
}

#[derive(Clone, Debug)]
pub enum BackForthOutcome {
    Complete(BackForthTranscript),
    Stuck(StuckReport),
}

fn inverted(map: &BTreeMap<String, String>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, v) in map {
        if out.insert(v.clone(), k.clone()).is_some() {
            return Err(Error::InvalidInput(
                "cannot invert a non-injective label map".into(),
            ));
        }
    }
    Ok(out)
}

enum Step {
    Found { map: BasedMorphism, stage: usize },
    Blocked { pinned: BTreeMap<String, String> },
}

/// One direction of the exact engine: embed `source` isometrically into a
/// stage of `target` strictly above `last_used`, extending the inverse of
/// `prev: (target stage) → source`. Searches first; under `Growable`, a
/// miss is realized instead by pushing `source` onto the target's top over
/// `prev`'s domain, which makes the round-trip identity hold by
/// construction.
fn advance_step(
    source: &BasedSpace,
    prev: &BasedMorphism,
    last_used: Option<usize>,
    target: &mut Chain,
    policy: GrowthPolicy,
    cache: &mut NormCache,
) -> Result<Step> {
    let pinned = inverted(prev.label_map())?;
    let from = last_used.map_or(0, |i| i + 1);
    for j in from..target.len() {
        let (found, _) = find_completion(&target.stages()[j], source, &pinned, cache)?;
        if let Some(map) = found {
            return Ok(Step::Found { map, stage: j });
        }
    }
    match policy {
        GrowthPolicy::Frozen => Ok(Step::Blocked { pinned }),
        GrowthPolicy::Growable => {
            let request =
                ExtensionRequest::new(last_used.unwrap_or(0), source.clone(), prev.clone())?;
            let base_to_top = BasedMorphism::inclusion(prev.domain(), target.top())?;
            let map = grow_chain(target, &base_to_top, prev, Some(request))?;
            Ok(Step::Found {
                map,
                stage: target.top_index(),
            })
        }
    }
}

/// Runs `rounds` alternations between two chains sharing a suppression
/// bound, both starting at the zero space. Each round completes the
/// inverse of the last backward map forward into the second chain, then
/// the inverse of that forward map back into the first, so both round-trip
/// families hold by construction. A missing completion under `Frozen` ends
/// the run with a report instead of an error.
pub fn back_and_forth_exact(
    x_chain: &mut Chain,
    y_chain: &mut Chain,
    rounds: usize,
    policy: GrowthPolicy,
) -> Result<BackForthOutcome> {
    x_chain.validate()?;
    y_chain.validate()?;
    if x_chain.k_bound() != y_chain.k_bound() {
        return Err(Error::SpaceMismatch(format!(
            "chains carry different suppression bounds {} and {}",
            x_chain.k_bound(),
            y_chain.k_bound()
        )));
    }
    if x_chain.stages()[0].dim() != 0 || y_chain.stages()[0].dim() != 0 {
        return Err(Error::InvalidInput(
            "back-and-forth chains must start at the zero space".into(),
        ));
    }
    let mut transcript = BackForthTranscript {
        f_list: Vec::new(),
        g_list: Vec::new(),
        n_indices: vec![0],
        m_indices: Vec::new(),
        mode: TranscriptMode::Exact,
    };
    let mut x_cache = NormCache::new();
    let mut y_cache = NormCache::new();
    // The empty map between the zero stages seeds the inversion chain.
    let mut prev_g = BasedMorphism::new(
        y_chain.stages()[0].clone(),
        x_chain.stages()[0].clone(),
        BTreeMap::new(),
    )?;
    let mut last_n = 0usize;
    let mut last_m: Option<usize> = None;
    for round in 1..=rounds {
        let source = x_chain.stages()[last_n].clone();
        let (f_k, m_k) =
            match advance_step(&source, &prev_g, last_m, y_chain, policy, &mut y_cache)? {
                Step::Found { map, stage } => (map, stage),
                Step::Blocked { pinned } => {
                    return Ok(BackForthOutcome::Stuck(StuckReport {
                        rounds_completed: round - 1,
                        into_y: true,
                        source_stage: last_n,
                        pinned,
                        transcript,
                    }))
                }
            };
        transcript.f_list.push(f_k.clone());
        transcript.m_indices.push(m_k);
        let y_source = y_chain.stages()[m_k].clone();
        let (g_k, n_k) =
            match advance_step(&y_source, &f_k, Some(last_n), x_chain, policy, &mut x_cache)? {
                Step::Found { map, stage } => (map, stage),
                Step::Blocked { pinned } => {
                    return Ok(BackForthOutcome::Stuck(StuckReport {
                        rounds_completed: round - 1,
                        into_y: false,
                        source_stage: m_k,
                        pinned,
                        transcript,
                    }))
                }
            };
        transcript.g_list.push(g_k.clone());
        transcript.n_indices.push(n_k);
        prev_g = g_k;
        last_n = n_k;
        last_m = Some(m_k);
    }
    Ok(BackForthOutcome::Complete(transcript))
}

fn stage_index_of(chain: &Chain, space: &BasedSpace, side: &str) -> Result<usize> {
    chain
        .stages()
        .iter()
        .position(|s| s == space)
        .ok_or_else(|| {
            Error::SpaceMismatch(format!(
                "the seed map must connect stages of the two chains; its {side} end matches none"
            ))
        })
}

/// The least dyadic strictly between the seed's attained bound
/// `δ* = max(upper − 1, 1/lower − 1, 0)` and the midpoint `(δ* + ε)/2`.
fn delta_from_seed(d: &Distortion, epsilon: &Rational) -> Result<Rational> {
    let one = Rational::one();
    let star = (&d.upper - &one)
        .max(&d.lower.recip() - &one)
        .max(Rational::zero());
    let half = Rational::frac(1, 2);
    dyadic_between(&star, &(&(&star + epsilon) * &half))
}

/// Extends the inverse of `prev: X-side stage → (stage of the other
/// chain)` over the whole stage `dom_chain.stages()[dom_stage]`, growing
/// `grow` by one pushout. Returns the extension and the new top's index.
fn extend_inverse(
    dom_chain: &Chain,
    dom_stage: usize,
    prev: &BasedMorphism,
    grow: &mut Chain,
    delta: &Rational,
) -> Result<(BasedMorphism, usize)> {
    let a = dom_chain.stages()[dom_stage].clone();
    let lam_labels: Vec<String> = prev.label_map().values().cloned().collect();
    let lam = a.based_subspace(&lam_labels)?;
    let partial = BasedMorphism::new(lam, grow.top().clone(), inverted(prev.label_map())?)?;
    let map = extend_epsilon_isometry(&a, &lam_labels, &partial, grow, delta)?;
    Ok((map, grow.top_index()))
}

/// Alternating δ-isometric extension seeded by `f0` between stages of two
/// 1-based chains: each round extends the inverse of the last forward map
/// over its whole stage back into the first chain, then symmetrically
/// forward, growing the receiving chain each time. Every map certifies
/// against the one dyadic δ chosen strictly between `f0`'s exact
/// distortion bound and ε, so the run never gets stuck.
pub fn back_and_forth_epsilon(
    x_chain: &mut Chain,
    y_chain: &mut Chain,
    f0: &BasedMorphism,
    epsilon: &Rational,
    rounds: usize,
) -> Result<BackForthTranscript> {
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    x_chain.validate()?;
    y_chain.validate()?;
    let one = Rational::one();
    if x_chain.k_bound() != &one || y_chain.k_bound() != &one {
        return Err(Error::InvalidInput(
            "ε back-and-forth requires 1-based chains; renormalize first".into(),
        ));
    }
    // Validation at bound 1 certifies every stage 1-based.
    for s in x_chain.stages().iter().chain(y_chain.stages()) {
        s.mark_one_based();
    }
    let n0 = stage_index_of(x_chain, f0.domain(), "first")?;
    let m0 = stage_index_of(y_chain, f0.codomain(), "second")?;
    let d = f0.distortion()?;
    if !d.within_epsilon(epsilon) {
        return Err(Error::NotIsometry(format!(
            "seed map distortion [{}, {}] is not within ε = {epsilon}",
            d.lower, d.upper
        )));
    }
    let delta = delta_from_seed(&d, epsilon)?;
    let mut transcript = BackForthTranscript {
        f_list: vec![f0.clone()],
        g_list: Vec::new(),
        n_indices: vec![n0],
        m_indices: vec![m0],
        mode: TranscriptMode::Epsilon(delta.clone()),
    };
    let mut f_k = f0.clone();
    let mut last_m = m0;
    for _ in 0..rounds {
        let (g_k, n_k) = extend_inverse(y_chain, last_m, &f_k, x_chain, &delta)?;
        transcript.g_list.push(g_k.clone());
        transcript.n_indices.push(n_k);
        let (f_next, m_k) = extend_inverse(x_chain, n_k, &g_k, y_chain, &delta)?;
        transcript.f_list.push(f_next.clone());
        transcript.m_indices.push(m_k);
        last_m = m_k;
        f_k = f_next;
    }
    Ok(transcript)
}

/// Forward-only engine: carries every stage of `space_chain` into
/// `universal` by a coherent sequence of certified embeddings, each
/// extending the previous one exactly on the previous stage's labels. The
/// receiving chain grows by one pushout per stage that adjoins labels.
/// Both chains must already be 1-based; renormalize first when not.
pub fn embed_any(
    space_chain: &Chain,
    universal: &mut Chain,
    epsilon: &Rational,
) -> Result<Vec<BasedMorphism>> {
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    space_chain.validate()?;
    universal.validate()?;
    let one = Rational::one();
    if space_chain.k_bound() != &one {
        return Err(Error::InvalidInput(
            "embedding source must be a 1-based chain; renormalize first".into(),
        ));
    }
    if universal.k_bound() != &one {
        return Err(Error::InvalidInput(
            "receiving chain must be 1-based; renormalize first".into(),
        ));
    }
    for s in space_chain.stages().iter().chain(universal.stages()) {
        s.mark_one_based();
    }
    let delta = dyadic_between(&Rational::zero(), &(epsilon * &Rational::frac(1, 2)))?;
    let mut out: Vec<BasedMorphism> = Vec::new();
    for k in 0..space_chain.len() {
        let a = space_chain.stages()[k].clone();
        let lam_labels: Vec<String> = if k == 0 {
            Vec::new()
        } else {
            space_chain.stages()[k - 1].labels().to_vec()
        };
        let prev_map: BTreeMap<String, String> = out
            .last()
            .map(|m| m.label_map().clone())
            .unwrap_or_default();
        if lam_labels.len() == a.dim() {
            // Nothing to adjoin at this stage; re-aim the previous map at
            // the current top.
            let f = BasedMorphism::new(a, universal.top().clone(), prev_map)?;
            out.push(f);
            continue;
        }
        let lam = a.based_subspace(&lam_labels)?;
        let partial = BasedMorphism::new(lam, universal.top().clone(), prev_map)?;
        let f = extend_epsilon_isometry(&a, &lam_labels, &partial, universal, &delta)?;
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::RationalVector;
    use crate::fraisse::{build_generic_chain, ComplexityBound};
    use crate::polytope::Polytope;

    fn q(p: i64, d: i64) -> Rational {
        Rational::frac(p, d)
    }

    fn rv(ints: &[i64]) -> RationalVector {
        RationalVector::from_ints(ints)
    }

    fn rv2(fracs: &[(i64, i64)]) -> RationalVector {
        RationalVector::new(fracs.iter().map(|&(p, d)| q(p, d)).collect())
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn space(names: &[&str], gens: Vec<RationalVector>, k: Rational) -> BasedSpace {
        BasedSpace::new(labels(names), Polytope::new(names.len(), gens).unwrap(), k).unwrap()
    }

    fn trivial_space(k: Rational) -> BasedSpace {
        BasedSpace::new(Vec::new(), Polytope::new(0, Vec::new()).unwrap(), k).unwrap()
    }

    fn l1_space(names: &[&str]) -> BasedSpace {
        BasedSpace::new(labels(names), Polytope::l1_ball(names.len()), Rational::one()).unwrap()
    }

    fn chain_of(stages: Vec<BasedSpace>, k: Rational) -> Chain {
        let mut inclusions = Vec::new();
        for w in stages.windows(2) {
            inclusions.push(BasedMorphism::inclusion(&w[0], &w[1]).unwrap());
        }
        Chain::from_parts(stages, inclusions, k, Vec::new()).unwrap()
    }

    /// 0 ⊂ [−1,1] ⊂ conv{±(1,3/5), ±e₁, ±e₂}: every completion is unique.
    fn forced_chain() -> Chain {
        let one = Rational::one();
        let s0 = trivial_space(one.clone());
        let s1 = space(&["u"], vec![rv(&[1])], one.clone());
        let s2 = space(
            &["u", "v"],
            vec![rv2(&[(1, 1), (3, 5)]), rv(&[1, 0]), rv(&[0, 1])],
            one.clone(),
        );
        chain_of(vec![s0, s1, s2], one)
    }

    /// Hexagon conv{±(1,3/4), ±e₁, ±e₂} against ℓ1: extremal ratio 7/4.
    fn prepared_pair() -> (Chain, Chain, BasedMorphism) {
        let one = Rational::one();
        let hexagon = space(
            &["a", "b"],
            vec![rv2(&[(1, 1), (3, 4)]), rv(&[1, 0]), rv(&[0, 1])],
            one.clone(),
        );
        let x = chain_of(vec![trivial_space(one.clone()), hexagon], one.clone());
        let y = chain_of(
            vec![trivial_space(one.clone()), l1_space(&["c", "d"])],
            one,
        );
        let f0 = BasedMorphism::new(
            x.stages()[1].clone(),
            y.stages()[1].clone(),
            [
                ("a".to_string(), "c".to_string()),
                ("b".to_string(), "d".to_string()),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();
        (x, y, f0)
    }

    #[test]
    fn identical_forced_chains_produce_identity_inclusions() {
        let mut x = forced_chain();
        let mut y = forced_chain();
        let t = match back_and_forth_exact(&mut x, &mut y, 2, GrowthPolicy::Frozen).unwrap() {
            BackForthOutcome::Complete(t) => t,
            BackForthOutcome::Stuck(_) => panic!("identical chains complete"),
        };
        assert_eq!(t.n_indices(), &[0, 1, 2]);
        assert_eq!(t.m_indices(), &[0, 1]);
        for m in t.f_list().iter().chain(t.g_list()) {
            for (a, b) in m.label_map() {
                assert_eq!(a, b);
            }
        }
        t.validate(&x, &y).unwrap();
    }

    #[test]
    fn frozen_short_chain_reports_the_missing_extension() {
        let mut x = forced_chain();
        let mut y = chain_of(vec![trivial_space(Rational::one())], Rational::one());
        let report = match back_and_forth_exact(&mut x, &mut y, 2, GrowthPolicy::Frozen).unwrap() {
            BackForthOutcome::Stuck(r) => r,
            BackForthOutcome::Complete(_) => panic!("a one-stage chain cannot host a line"),
        };
        assert_eq!(report.rounds_completed, 1);
        assert!(report.into_y);
        assert_eq!(report.source_stage, 1);
        assert!(report.pinned.is_empty());
        assert_eq!(report.transcript.f_list().len(), 1);
        report.transcript.validate(&x, &y).unwrap();
    }

    #[test]
    fn growth_realizes_missing_extensions_by_pushout() {
        let mut x = forced_chain();
        let mut y = chain_of(vec![trivial_space(Rational::one())], Rational::one());
        let t = match back_and_forth_exact(&mut x, &mut y, 2, GrowthPolicy::Growable).unwrap() {
            BackForthOutcome::Complete(t) => t,
            BackForthOutcome::Stuck(_) => panic!("growth realizes every extension"),
        };
        // The line was pushed onto the trivial top; the hexagon round then
        // completed against the first chain without growing it.
        assert_eq!(y.len(), 2);
        assert_eq!(y.top().dim(), 1);
        assert_eq!(y.request_log().len(), 1);
        assert_eq!(x.len(), 3);
        y.validate().unwrap();
        t.validate(&x, &y).unwrap();
    }

    #[test]
    fn seeded_generic_chains_complete_three_rounds() {
        let bound = ComplexityBound::new(2, 2, 4).unwrap();
        let one = Rational::one();
        let mut x = build_generic_chain(&bound, &one, 1_000_000, 7).unwrap();
        let mut y = build_generic_chain(&bound, &one, 1_000_000, 13).unwrap();
        let t = match back_and_forth_exact(&mut x, &mut y, 3, GrowthPolicy::Growable).unwrap() {
            BackForthOutcome::Complete(t) => t,
            BackForthOutcome::Stuck(_) => panic!("growable runs cannot stick"),
        };
        assert_eq!(t.f_list().len(), 3);
        assert_eq!(t.g_list().len(), 3);
        t.validate(&x, &y).unwrap();
        x.validate().unwrap();
        y.validate().unwrap();
    }

    #[test]
    fn zero_rounds_transcript_is_just_the_seed() {
        let (mut x, mut y, f0) = prepared_pair();
        let t = back_and_forth_epsilon(&mut x, &mut y, &f0, &Rational::one(), 0).unwrap();
        assert_eq!(t.f_list().len(), 1);
        assert!(t.g_list().is_empty());
        assert_eq!(t.n_indices(), &[1]);
        assert_eq!(t.m_indices(), &[1]);
        assert_eq!(t.mode(), &TranscriptMode::Epsilon(q(13, 16)));
        t.validate(&x, &y).unwrap();
    }

    #[test]
    fn exact_seed_reduces_to_exact_certificates() {
        let one = Rational::one();
        let mut x = chain_of(
            vec![trivial_space(one.clone()), l1_space(&["a", "b"])],
            one.clone(),
        );
        let mut y = chain_of(
            vec![trivial_space(one.clone()), l1_space(&["c", "d"])],
            one,
        );
        let f0 = BasedMorphism::new(
            x.stages()[1].clone(),
            y.stages()[1].clone(),
            [
                ("a".to_string(), "c".to_string()),
                ("b".to_string(), "d".to_string()),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();
        let t = back_and_forth_epsilon(&mut x, &mut y, &f0, &q(1, 2), 2).unwrap();
        assert_eq!(t.mode(), &TranscriptMode::Epsilon(q(1, 8)));
        for m in t.f_list().iter().chain(t.g_list()) {
            assert!(m.distortion().unwrap().is_exact());
        }
        t.validate(&x, &y).unwrap();
        x.validate().unwrap();
        y.validate().unwrap();
    }

    #[test]
    fn perturbed_seed_records_the_dyadic_delta() {
        let (mut x, mut y, f0) = prepared_pair();
        let t = back_and_forth_epsilon(&mut x, &mut y, &f0, &Rational::one(), 2).unwrap();
        assert_eq!(t.mode(), &TranscriptMode::Epsilon(q(13, 16)));
        assert_eq!(t.n_indices(), &[1, 2, 3]);
        assert_eq!(t.m_indices(), &[1, 2, 3]);
        assert_eq!(
            t.g_list()[0].distortion().unwrap(),
            Distortion {
                lower: q(4, 7),
                upper: Rational::one(),
            }
        );
        let d = t.f_list()[1].distortion().unwrap();
        assert_eq!(
            d,
            Distortion {
                lower: Rational::one(),
                upper: q(7, 4),
            }
        );
        assert!(!d.is_exact());
        t.validate(&x, &y).unwrap();
        x.validate().unwrap();
        y.validate().unwrap();
    }

    #[test]
    fn epsilon_engine_requires_one_based_chains_and_a_bounded_seed() {
        let k = q(3, 2);
        let mut x = chain_of(vec![trivial_space(k.clone())], k.clone());
        let mut y = chain_of(vec![trivial_space(k.clone())], k);
        let f0 = BasedMorphism::new(
            x.stages()[0].clone(),
            y.stages()[0].clone(),
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(
            back_and_forth_epsilon(&mut x, &mut y, &f0, &Rational::one(), 1),
            Err(Error::InvalidInput(_))
        ));

        // A seed outside the ε band is rejected with its certificate.
        let (mut x, mut y, f0) = prepared_pair();
        assert!(matches!(
            back_and_forth_epsilon(&mut x, &mut y, &f0, &q(1, 2), 1),
            Err(Error::NotIsometry(_))
        ));

        // Seeds must connect actual stages.
        let (mut x, mut y, _) = prepared_pair();
        let stray = BasedMorphism::new(
            l1_space(&["a", "b"]),
            y.stages()[1].clone(),
            [
                ("a".to_string(), "c".to_string()),
                ("b".to_string(), "d".to_string()),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();
        assert!(matches!(
            back_and_forth_epsilon(&mut x, &mut y, &stray, &Rational::one(), 1),
            Err(Error::SpaceMismatch(_))
        ));
    }

    #[test]
    fn l1_chain_embeds_exactly() {
        let one = Rational::one();
        let x = chain_of(
            vec![
                l1_space(&["a"]),
                l1_space(&["a", "b"]),
                l1_space(&["a", "b", "c"]),
            ],
            one.clone(),
        );
        let mut u = Chain::trivial(one).unwrap();
        let fs = embed_any(&x, &mut u, &q(1, 2)).unwrap();
        assert_eq!(fs.len(), 3);
        for f in &fs {
            assert!(f.distortion().unwrap().is_exact());
        }
        for w in fs.windows(2) {
            for (l, target) in w[0].label_map() {
                assert_eq!(&w[1].label_map()[l], target);
            }
        }
        assert_eq!(u.len(), 4);
        u.validate().unwrap();
    }

    #[test]
    fn renormed_chain_embeds_strictly_within_bounds() {
        let k = q(5, 4);
        let original = chain_of(
            vec![
                space(&["r"], vec![rv(&[1])], k.clone()),
                space(
                    &["r", "s"],
                    vec![rv2(&[(5, 4), (1, 2)]), rv(&[1, 0]), rv(&[0, 1])],
                    k.clone(),
                ),
                space(
                    &["r", "s", "t"],
                    vec![
                        rv2(&[(5, 4), (1, 2), (0, 1)]),
                        rv(&[1, 0, 0]),
                        rv(&[0, 1, 0]),
                        rv(&[0, 0, 1]),
                    ],
                    k.clone(),
                ),
            ],
            k,
        );
        let renormed = chain_of(
            original
                .stages()
                .iter()
                .map(|s| s.renorm_to_one_based().unwrap())
                .collect(),
            Rational::one(),
        );
        let mut u = Chain::trivial(Rational::one()).unwrap();
        let fs = embed_any(&renormed, &mut u, &q(1, 2)).unwrap();
        let composite: Vec<Distortion> = original
            .stages()
            .iter()
            .zip(renormed.stages().iter().zip(&fs))
            .map(|(orig, (re, f))| {
                let id_map: BTreeMap<String, String> = orig
                    .labels()
                    .iter()
                    .map(|l| (l.clone(), l.clone()))
                    .collect();
                let renorm_id = BasedMorphism::new(orig.clone(), re.clone(), id_map).unwrap();
                renorm_id.then(f).unwrap().distortion().unwrap()
            })
            .collect();
        assert!(composite[0].is_exact());
        for d in &composite[1..] {
            assert_eq!(
                d,
                &Distortion {
                    lower: Rational::one(),
                    upper: q(5, 4),
                }
            );
        }
        for d in &composite {
            assert!(d.within_epsilon(&q(1, 2)));
        }
        u.validate().unwrap();
    }

    #[test]
    fn unrenormed_chains_are_rejected() {
        let k = q(5, 4);
        let stretched = chain_of(vec![space(&["r"], vec![rv(&[1])], k.clone())], k.clone());
        let mut u = Chain::trivial(Rational::one()).unwrap();
        assert!(matches!(
            embed_any(&stretched, &mut u, &Rational::one()),
            Err(Error::InvalidInput(_))
        ));
        let flat = chain_of(
            vec![space(&["r"], vec![rv(&[1])], Rational::one())],
            Rational::one(),
        );
        let mut u = Chain::trivial(k).unwrap();
        assert!(matches!(
            embed_any(&flat, &mut u, &Rational::one()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn transcripts_serialize_deterministically() {
        let run = || {
            let (mut x, mut y, f0) = prepared_pair();
            let t = back_and_forth_epsilon(&mut x, &mut y, &f0, &Rational::one(), 2).unwrap();
            serde_json::to_string(&t).unwrap()
        };
        let first = run();
        assert_eq!(first, run());
        assert!(first.contains("\"mode\":{\"epsilon\":\"13/16\"}"));
        assert!(first.contains("\"n_indices\":[1,2,3]"));
    }
}
