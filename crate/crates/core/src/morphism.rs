//! Based morphisms: linear maps determined by sending basis vectors to
//! basis vectors along a label map, with exact operator norms, distortion,
//! and an isometry decision procedure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exactnum::{Rational, RationalVector};
use crate::polytope::Polytope;
use crate::space::BasedSpace;

/// `T e_l = e_{label_map(l)}`, extended linearly.
#[derive(Clone)]
pub struct BasedMorphism {
    domain: BasedSpace,
    codomain: BasedSpace,
    label_map: BTreeMap<String, String>,
    /// domain coordinate → codomain coordinate.
    coord_map: Vec<usize>,
}

/// Outcome of the isometry check. A defect always carries a witness vector
/// whose norm the map fails to preserve.
#[derive(Clone, Debug)]
pub enum IsometryOutcome {
    Isometric,
    Defect {
        witness: RationalVector,
        domain_norm: Option<Rational>,
        image_norm: Option<Rational>,
    },
}

/// Attained two-sided bounds: `lower·‖x‖ ≤ ‖Tx‖ ≤ upper·‖x‖` for all x,
/// with equality reached at ball vertices in both directions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distortion {
    pub lower: Rational,
    pub upper: Rational,
}

impl Distortion {
    /// Strict ε-isometry test: `lower > 1/(1+ε)` and `upper < 1+ε`.
    pub fn within_epsilon(&self, eps: &Rational) -> bool {
        let bound = &Rational::one() + eps;
        self.lower > bound.recip() && self.upper < bound
    }

    pub fn is_exact(&self) -> bool {
        self.lower == Rational::one() && self.upper == Rational::one()
    }
}

impl IsometryOutcome {
    pub fn is_isometric(&self) -> bool {
        matches!(self, IsometryOutcome::Isometric)
    }
}

impl BasedMorphism {
    pub fn new(
        domain: BasedSpace,
        codomain: BasedSpace,
        label_map: BTreeMap<String, String>,
    ) -> Result<Self> {
        for k in label_map.keys() {
            if !domain.labels().contains(k) {
                return Err(Error::UnknownLabel(k.clone()));
            }
        }
        let mut coord_map = Vec::with_capacity(domain.dim());
        for l in domain.labels() {
            let target = label_map
                .get(l)
                .ok_or_else(|| Error::InvalidInput(format!("label {l:?} has no image")))?;
            coord_map.push(codomain.label_index(target)?);
        }
        Ok(BasedMorphism {
            domain,
            codomain,
            label_map,
            coord_map,
        })
    }

    pub fn identity(space: &BasedSpace) -> Self {
        let map = space
            .labels()
            .iter()
            .map(|l| (l.clone(), l.clone()))
            .collect();
        BasedMorphism::new(space.clone(), space.clone(), map)
            .expect("identity label map is total and well-typed")
    }

    /// Inclusion of a space into a larger one sharing its labels verbatim.
    pub fn inclusion(domain: &BasedSpace, codomain: &BasedSpace) -> Result<Self> {
        let map = domain
            .labels()
            .iter()
            .map(|l| (l.clone(), l.clone()))
            .collect();
        BasedMorphism::new(domain.clone(), codomain.clone(), map)
    }

    pub fn domain(&self) -> &BasedSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &BasedSpace {
        &self.codomain
    }

    pub fn label_map(&self) -> &BTreeMap<String, String> {
        &self.label_map
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.coord_map.iter().all(|c| seen.insert(*c))
    }

    fn injectivity_defect(&self) -> Option<(usize, usize)> {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &c) in self.coord_map.iter().enumerate() {
            if let Some(&j) = seen.get(&c) {
                return Some((j, i));
            }
            seen.insert(c, i);
        }
        None
    }

    pub fn apply(&self, x: &RationalVector) -> RationalVector {
        let mut y = RationalVector::zeros(self.codomain.dim());
        for (i, &c) in self.coord_map.iter().enumerate() {
            let v = x.entry(i);
            if !v.is_zero() {
                let cur = y.entry(c);
                y.set(c, &cur + &v);
            }
        }
        y
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &BasedMorphism) -> Result<BasedMorphism> {
        if self.codomain != other.domain {
            return Err(Error::SpaceMismatch(
                "composition: codomain of the first map differs from domain of the second".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (k, v) in &self.label_map {
            map.insert(k.clone(), other.label_map[v].clone());
        }
        BasedMorphism::new(self.domain.clone(), other.codomain.clone(), map)
    }

    /// Pushforward `T(B_domain)` as a polytope in the codomain's ambient.
    pub fn image_ball(&self) -> Polytope {
        self.domain
            .ball()
            .map(self.codomain.dim(), |g| self.apply(g))
            .expect("image generators live in the codomain ambient")
    }

    /// `‖T‖ = max_g ‖T g‖`, exact because the maximum of a gauge over a
    /// polytope is attained at generators. `None` when some image leaves
    /// the span of a degenerate codomain ball.
    pub fn operator_norm(&self) -> Result<Option<Rational>> {
        let mut best = Rational::zero();
        for g in self.domain.ball().generators() {
            match self.codomain.ball().gauge(&self.apply(g))? {
                Some(v) => best = best.max(v),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }

    /// Exact two-sided distortion. Requires an injective label map.
    pub fn distortion(&self) -> Result<Distortion> {
        if let Some((i, j)) = self.injectivity_defect() {
            return Err(Error::NotInjective {
                a: self.domain.labels()[i].clone(),
                b: self.domain.labels()[j].clone(),
            });
        }
        if self.domain.dim() == 0 {
            return Ok(Distortion {
                lower: Rational::one(),
                upper: Rational::one(),
            });
        }
        let upper = self
            .operator_norm()?
            .ok_or_else(|| Error::DegenerateBall("image leaves the codomain span".into()))?;

        // ‖T⁻¹‖ over the image: the image span is the coordinate subspace S
        // hit by the label map, so it is the max of the image-ball gauge
        // over the exact section B_cod ∩ span(S). Swapping the two maxima
        // turns this into one section-support value per image-ball facet.
        let s_coords: Vec<usize> = {
            let mut c = self.coord_map.clone();
            c.sort_unstable();
            c
        };
        let image = self
            .image_ball()
            .map(s_coords.len(), |g| g.extract(&s_coords))?;
        let mut inv_norm = Rational::zero();
        for f in image.facets()? {
            let mut n_ambient = RationalVector::zeros(self.codomain.dim());
            for (k, &c) in s_coords.iter().enumerate() {
                n_ambient.set(c, f.normal.entry(k));
            }
            let (val, _) = self.codomain.ball().section_support(&s_coords, &n_ambient)?;
            inv_norm = inv_norm.max(&val / &f.offset);
        }
        if inv_norm.is_zero() {
            return Err(Error::DegenerateBall(
                "codomain section is trivial on the image span".into(),
            ));
        }
        Ok(Distortion {
            lower: inv_norm.recip(),
            upper,
        })
    }

    /// Strict ε-isometry: `lower > 1/(1+ε)` and `upper < 1+ε`.
    pub fn is_epsilon_isometry(&self, eps: &Rational) -> Result<bool> {
        Ok(self.distortion()?.within_epsilon(eps))
    }

    /// Decides `‖Tx‖ = ‖x‖ for all x` exactly, with a witness on failure.
    ///
    /// Tiers: kernel vectors from a non-injective label map; trivial
    /// domains; an ℓ1-decomposition of the domain ball into coordinate
    /// components that recurses when the components land in disjoint
    /// codomain components (gauges add across both decompositions); and a
    /// base check — generator scan plus gauge LPs for the expanding
    /// direction, image-ball facets against section supports for the
    /// contracting direction.
    pub fn is_isometry(&self) -> Result<IsometryOutcome> {
        if let Some((i, j)) = self.injectivity_defect() {
            let mut witness = RationalVector::zeros(self.domain.dim());
            witness.set(i, Rational::one());
            witness.set(j, -Rational::one());
            let domain_norm = self.domain.ball().gauge(&witness)?;
            return Ok(IsometryOutcome::Defect {
                witness,
                domain_norm,
                image_norm: Some(Rational::zero()),
            });
        }
        if self.domain.dim() == 0 {
            return Ok(IsometryOutcome::Isometric);
        }
        self.isometry_by_components()
    }

    fn isometry_by_components(&self) -> Result<IsometryOutcome> {
        let comps: Vec<(Vec<usize>, Vec<RationalVector>)> = self
            .domain
            .ball()
            .components()
            .iter()
            .map(|c| {
                (
                    c.coords.clone(),
                    c.members
                        .iter()
                        .map(|&gi| {
                            self.domain.ball().shared_generators()[gi].extract(&c.coords)
                        })
                        .collect(),
                )
            })
            .collect();
        if comps.len() > 1 && self.image_clusters_disjoint(&comps)? {
            for (coords, gens) in &comps {
                let labels: Vec<String> = coords
                    .iter()
                    .map(|&c| self.domain.labels()[c].clone())
                    .collect();
                // Over disjoint coordinates the section equals the hull of
                // the component's own generators.
                let sub_space = BasedSpace::new(
                    labels.clone(),
                    Polytope::new(coords.len(), gens.clone())?,
                    self.domain.k_bound().clone(),
                )?;
                let sub_map: BTreeMap<String, String> = labels
                    .iter()
                    .map(|l| (l.clone(), self.label_map[l].clone()))
                    .collect();
                let sub = BasedMorphism::new(sub_space, self.codomain.clone(), sub_map)?;
                if let IsometryOutcome::Defect {
                    witness,
                    domain_norm,
                    image_norm,
                } = sub.isometry_base()?
                {
                    let mut lifted = RationalVector::zeros(self.domain.dim());
                    for (k, &c) in coords.iter().enumerate() {
                        lifted.set(c, witness.entry(k));
                    }
                    return Ok(IsometryOutcome::Defect {
                        witness: lifted,
                        domain_norm,
                        image_norm,
                    });
                }
            }
            return Ok(IsometryOutcome::Isometric);
        }
        self.isometry_base()
    }

    /// Codomain components hit by distinct domain components are pairwise
    /// disjoint (so codomain gauges add across the domain decomposition).
    fn image_clusters_disjoint(&self, comps: &[(Vec<usize>, Vec<RationalVector>)]) -> Result<bool> {
        let cod_comps = self.codomain.ball().components();
        let mut owner = vec![usize::MAX; self.codomain.dim()];
        for (ci, c) in cod_comps.iter().enumerate() {
            for &k in &c.coords {
                owner[k] = ci;
            }
        }
        let mut used: BTreeSet<usize> = BTreeSet::new();
        for (coords, _) in comps {
            let mut mine: BTreeSet<usize> = BTreeSet::new();
            for &c in coords {
                let o = owner[self.coord_map[c]];
                if o == usize::MAX {
                    // Image coordinate outside every codomain component:
                    // the base tier will surface the infinite norm.
                    return Ok(false);
                }
                mine.insert(o);
            }
            for o in mine {
                if !used.insert(o) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn isometry_base(&self) -> Result<IsometryOutcome> {
        // Expanding direction: ‖Tg‖ ≤ 1 for every generator, literal
        // generator hits first, gauge LPs only on the misses.
        for g in self.domain.ball().generators() {
            let y = self.apply(g);
            if self.codomain.ball().is_signed_generator(&y) {
                continue;
            }
            let image_norm = self.codomain.ball().gauge(&y)?;
            if !matches!(&image_norm, Some(v) if *v <= Rational::one()) {
                return Ok(IsometryOutcome::Defect {
                    witness: g.resized(self.domain.dim()),
                    domain_norm: self.domain.ball().gauge(g)?,
                    image_norm,
                });
            }
        }

        // Contracting direction: every facet ⟨n,·⟩ ≤ c of the image ball
        // must dominate the codomain section on the image span. The scan
        // against projected codomain generators is sound (projections
        // contain sections); failures escalate to the exact section LP.
        let s_coords: Vec<usize> = {
            let mut c = self.coord_map.clone();
            c.sort_unstable();
            c
        };
        let image = self
            .image_ball()
            .map(s_coords.len(), |g| g.extract(&s_coords))?;
        for f in image.facets()? {
            let mut scan = Rational::zero();
            for g in self.codomain.ball().generators() {
                scan = scan.max(f.normal.dot(&g.extract(&s_coords)).abs());
            }
            if scan <= f.offset {
                continue;
            }
            let mut n_ambient = RationalVector::zeros(self.codomain.dim());
            for (k, &c) in s_coords.iter().enumerate() {
                n_ambient.set(c, f.normal.entry(k));
            }
            let (val, witness_y) = self.codomain.ball().section_support(&s_coords, &n_ambient)?;
            if val <= f.offset {
                continue;
            }
            // witness_y is in the codomain section with image-gauge > 1;
            // pull it back through the coordinate bijection.
            let mut witness = RationalVector::zeros(self.domain.dim());
            for (i, &c) in self.coord_map.iter().enumerate() {
                witness.set(i, witness_y.entry(c));
            }
            return Ok(IsometryOutcome::Defect {
                witness: witness.clone(),
                domain_norm: self.domain.ball().gauge(&witness)?,
                image_norm: self.codomain.ball().gauge(&witness_y)?,
            });
        }
        Ok(IsometryOutcome::Isometric)
    }

    /// `is_isometry` collapsed to a hard precondition.
    pub fn certify_isometry(&self) -> Result<()> {
        match self.is_isometry()? {
            IsometryOutcome::Isometric => Ok(()),
            IsometryOutcome::Defect {
                witness,
                domain_norm,
                image_norm,
            } => Err(Error::NotIsometry(format!(
                "witness {witness:?} has norm {} but image norm {}",
                norm_str(&domain_norm),
                norm_str(&image_norm)
            ))),
        }
    }
}

fn norm_str(v: &Option<Rational>) -> String {
    match v {
        Some(v) => v.to_string(),
        None => "∞".into(),
    }
}

impl PartialEq for BasedMorphism {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.codomain == other.codomain
            && self.label_map == other.label_map
    }
}

impl Eq for BasedMorphism {}

impl fmt::Debug for BasedMorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BasedMorphism({:?} → {:?}, {:?})",
            self.domain.labels(),
            self.codomain.labels(),
            self.label_map
        )
    }
}

#[derive(Serialize, Deserialize)]
struct MorphismWire {
    domain: BasedSpace,
    codomain: BasedSpace,
    label_map: BTreeMap<String, String>,
}

impl Serialize for BasedMorphism {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MorphismWire {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            label_map: self.label_map.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasedMorphism {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = MorphismWire::deserialize(d)?;
        BasedMorphism::new(wire.domain, wire.codomain, wire.label_map).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(ints: &[i64]) -> RationalVector {
        RationalVector::from_ints(ints)
    }

    fn q(p: i64, d: i64) -> Rational {
        Rational::frac(p, d)
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn l1_space(names: &[&str]) -> BasedSpace {
        BasedSpace::new(labels(names), Polytope::l1_ball(names.len()), Rational::one()).unwrap()
    }

    fn square_space(names: &[&str; 2]) -> BasedSpace {
        BasedSpace::new(
            labels(names),
            Polytope::new(2, vec![rv(&[1, 1]), rv(&[1, -1])]).unwrap(),
            Rational::one(),
        )
        .unwrap()
    }

    fn hexagon_space() -> BasedSpace {
        BasedSpace::new(
            labels(&["a", "b"]),
            Polytope::new(
                2,
                vec![
                    RationalVector::new(vec![q(5, 4), q(1, 2)]),
                    rv(&[1, 0]),
                    rv(&[0, 1]),
                ],
            )
            .unwrap(),
            q(5, 4),
        )
        .unwrap()
    }

    #[test]
    fn identity_is_an_isometry() {
        for s in [l1_space(&["a", "b"]), square_space(&["a", "b"]), hexagon_space()] {
            assert!(BasedMorphism::identity(&s).is_isometry().unwrap().is_isometric());
        }
    }

    #[test]
    fn basis_inclusion_into_l1_is_an_isometry() {
        let inc = BasedMorphism::inclusion(&l1_space(&["a"]), &l1_space(&["a", "b"])).unwrap();
        assert!(inc.is_isometry().unwrap().is_isometric());
        assert!(inc.distortion().unwrap().is_exact());
    }

    #[test]
    fn non_injective_maps_fail_with_a_kernel_witness() {
        let m = BasedMorphism::new(
            l1_space(&["a", "b"]),
            l1_space(&["z"]),
            [("a", "z"), ("b", "z")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
        .unwrap();
        match m.is_isometry().unwrap() {
            IsometryOutcome::Defect {
                witness,
                domain_norm,
                image_norm,
            } => {
                assert_eq!(witness, rv(&[1, -1]));
                assert_eq!(domain_norm, Some(Rational::from_int(2)));
                assert_eq!(image_norm, Some(Rational::zero()));
            }
            other => panic!("expected defect, got {other:?}"),
        }
        assert!(matches!(m.distortion(), Err(Error::NotInjective { .. })));
    }

    #[test]
    fn expanding_defect_is_caught_with_generator_witness() {
        // Square ball into ℓ1: ‖(1,1)‖ goes from 1 to 2.
        let m = BasedMorphism::identity(&square_space(&["a", "b"]));
        let m = BasedMorphism::new(
            m.domain().clone(),
            l1_space(&["a", "b"]),
            m.label_map().clone(),
        )
        .unwrap();
        match m.is_isometry().unwrap() {
            IsometryOutcome::Defect {
                witness,
                domain_norm,
                image_norm,
            } => {
                assert!(m.domain().ball().is_signed_generator(&witness));
                assert_eq!(domain_norm, Some(Rational::one()));
                assert_eq!(image_norm, Some(Rational::from_int(2)));
            }
            other => panic!("expected defect, got {other:?}"),
        }
    }

    #[test]
    fn contracting_defect_is_caught_with_section_witness() {
        // ℓ1 into the square ball: ‖(1,1)‖ goes from 2 to 1.
        let m = BasedMorphism::new(
            l1_space(&["a", "b"]),
            square_space(&["a", "b"]),
            BasedMorphism::identity(&l1_space(&["a", "b"])).label_map().clone(),
        )
        .unwrap();
        match m.is_isometry().unwrap() {
            IsometryOutcome::Defect {
                witness,
                domain_norm,
                image_norm,
            } => {
                let d = domain_norm.unwrap();
                let i = image_norm.unwrap();
                assert!(d > i, "domain norm {d} should exceed image norm {i}");
                assert!(!witness.is_zero());
            }
            other => panic!("expected defect, got {other:?}"),
        }
    }

    #[test]
    fn hexagon_into_l1_has_the_frozen_distortion() {
        let m = BasedMorphism::new(
            hexagon_space(),
            l1_space(&["a", "b"]),
            BasedMorphism::identity(&hexagon_space()).label_map().clone(),
        )
        .unwrap();
        let d = m.distortion().unwrap();
        assert_eq!((d.lower.clone(), d.upper.clone()), (Rational::one(), q(7, 4)));
        assert!(m.is_epsilon_isometry(&Rational::one()).unwrap());
        assert!(!m.is_epsilon_isometry(&q(3, 4)).unwrap());
    }

    #[test]
    fn component_recursion_handles_block_domains() {
        // Domain = ℓ1(2) ⊕ square(2) with blocks mapped to disjoint blocks
        // of the same shape in a bigger codomain.
        let dom_ball = Polytope::new(
            4,
            vec![rv(&[1, 0, 0, 0]), rv(&[0, 1, 0, 0]), rv(&[0, 0, 1, 1]), rv(&[0, 0, 1, -1])],
        )
        .unwrap();
        let dom =
            BasedSpace::new(labels(&["a", "b", "c", "d"]), dom_ball, Rational::one()).unwrap();
        let cod_ball = Polytope::new(
            5,
            vec![
                rv(&[1, 0, 0, 0, 0]),
                rv(&[0, 1, 1, 0, 0]),
                rv(&[0, 1, -1, 0, 0]),
                rv(&[0, 0, 0, 1, 0]),
                rv(&[0, 0, 0, 0, 1]),
            ],
        )
        .unwrap();
        let cod = BasedSpace::new(labels(&["p", "q", "r", "s", "t"]), cod_ball, Rational::one())
            .unwrap();
        let map: BTreeMap<String, String> = [("a", "s"), ("b", "t"), ("c", "q"), ("d", "r")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let m = BasedMorphism::new(dom.clone(), cod.clone(), map).unwrap();
        assert!(m.is_isometry().unwrap().is_isometric());

        // Same blocks, but the square block lands on ℓ1 coordinates.
        let bad_map: BTreeMap<String, String> = [("a", "q"), ("b", "r"), ("c", "s"), ("d", "t")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let bad = BasedMorphism::new(dom, cod, bad_map).unwrap();
        assert!(!bad.is_isometry().unwrap().is_isometric());
    }

    #[test]
    fn composition_matches_pointwise_application() {
        let f = BasedMorphism::inclusion(&l1_space(&["a"]), &l1_space(&["a", "b"])).unwrap();
        let g = BasedMorphism::inclusion(&l1_space(&["a", "b"]), &l1_space(&["a", "b", "c"]))
            .unwrap();
        let gf = f.then(&g).unwrap();
        let x = rv(&[3]);
        assert_eq!(gf.apply(&x), g.apply(&f.apply(&x)));
        assert!(gf.is_isometry().unwrap().is_isometric());
        assert!(matches!(g.then(&f), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn operator_norm_is_attained_on_generators() {
        let m = BasedMorphism::new(
            hexagon_space(),
            l1_space(&["a", "b"]),
            BasedMorphism::identity(&hexagon_space()).label_map().clone(),
        )
        .unwrap();
        assert_eq!(m.operator_norm().unwrap(), Some(q(7, 4)));
    }

    #[test]
    fn serde_round_trip() {
        let m = BasedMorphism::inclusion(&l1_space(&["a"]), &l1_space(&["a", "b"])).unwrap();
        let js = serde_json::to_string(&m).unwrap();
        let back: BasedMorphism = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m);
    }

    /// Oracle: compares gauges at all vertices of both restricted balls
    /// via the facet route, with no shared code path beyond the gauge LP.
    fn isometry_brute(m: &BasedMorphism) -> bool {
        if !m.is_injective() {
            return false;
        }
        for g in m.domain().ball().generators() {
            if !m.codomain().ball().contains(&m.apply(g)).unwrap() {
                return false;
            }
        }
        let mut s: Vec<usize> = m.coord_map.clone();
        s.sort_unstable();
        let section = m.codomain().ball().restrict_to_coordinate_subspace(&s).unwrap();
        for v in section.generators() {
            let mut x = RationalVector::zeros(m.domain().dim());
            for (i, &c) in m.coord_map.iter().enumerate() {
                let pos = s.binary_search(&c).unwrap();
                x.set(i, v.entry(pos));
            }
            match m.domain().ball().gauge(&x).unwrap() {
                Some(g) if g <= Rational::one() => {}
                _ => return false,
            }
        }
        true
    }

    use proptest::prelude::*;

    fn cube_vector(dim: usize) -> impl Strategy<Value = RationalVector> {
        proptest::collection::vec(
            (-2i64..=2, 1i64..=2).prop_map(|(p, d)| Rational::frac(p, d.max(p.abs()))),
            dim,
        )
        .prop_map(RationalVector::new)
    }

    fn valid_space_with(dim: usize, names: Vec<String>) -> impl Strategy<Value = BasedSpace> {
        proptest::collection::vec(cube_vector(dim), 0..=2).prop_map(move |extra| {
            let mut gens: Vec<RationalVector> =
                (0..dim).map(|i| RationalVector::unit(dim, i)).collect();
            gens.extend(extra);
            let ball = Polytope::new(dim, gens).unwrap();
            let probe = BasedSpace::new(names.clone(), ball.clone(), Rational::one()).unwrap();
            let k = probe
                .suppression_constant()
                .unwrap()
                .unwrap()
                .max(Rational::one());
            BasedSpace::new(names.clone(), ball, k).unwrap()
        })
    }

    fn arb_morphism() -> impl Strategy<Value = BasedMorphism> {
        (1usize..=2, 2usize..=3).prop_flat_map(|(dd, cd)| {
            let dom_names: Vec<String> = (0..dd).map(|i| format!("d{i}")).collect();
            let cod_names: Vec<String> = (0..cd).map(|i| format!("c{i}")).collect();
            (
                valid_space_with(dd, dom_names),
                valid_space_with(cd, cod_names),
                proptest::sample::subsequence((0..cd).collect::<Vec<usize>>(), dd),
            )
                .prop_map(|(dom, cod, targets)| {
                    let map: BTreeMap<String, String> = dom
                        .labels()
                        .iter()
                        .zip(&targets)
                        .map(|(l, &t)| (l.clone(), cod.labels()[t].clone()))
                        .collect();
                    BasedMorphism::new(dom, cod, map).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn isometry_check_agrees_with_vertex_brute_force(m in arb_morphism()) {
            prop_assert_eq!(m.is_isometry().unwrap().is_isometric(), isometry_brute(&m));
        }

        #[test]
        fn isometry_iff_unit_distortion(m in arb_morphism()) {
            let d = m.distortion().unwrap();
            prop_assert_eq!(m.is_isometry().unwrap().is_isometric(), d.is_exact());
            // Both bounds are attained: some generator's image has gauge
            // exactly `upper`, and `lower` pulls back from a section vertex.
            let mut hit_upper = false;
            for g in m.domain().ball().generators() {
                let v = m.codomain().ball().gauge(&m.apply(g)).unwrap().unwrap();
                prop_assert!(v <= d.upper);
                hit_upper |= v == d.upper;
            }
            prop_assert!(hit_upper);
        }

        #[test]
        fn operator_norm_is_submultiplicative(
            (a, b, c) in (1usize..=2).prop_flat_map(|d| {
                let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
                (
                    valid_space_with(d, names.clone()),
                    valid_space_with(d, names.clone()),
                    valid_space_with(d, names),
                )
            })
        ) {
            let t = BasedMorphism::inclusion(&a, &b).unwrap();
            let s = BasedMorphism::inclusion(&b, &c).unwrap();
            let st = t.then(&s).unwrap();
            let (nt, ns, nst) = (
                t.operator_norm().unwrap().unwrap(),
                s.operator_norm().unwrap().unwrap(),
                st.operator_norm().unwrap().unwrap(),
            );
            prop_assert!(nst <= &nt * &ns);
        }
    }
}
