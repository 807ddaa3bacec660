//! Seeded property suites over randomly generated spaces, each checking an
//! optimized computation against an independent reference route (LP vs.
//! gauge, brute-force subset scans vs. support scans, section equality vs.
//! construction). Shared by the acceptance tests and the CLI `suite`
//! command.
//!
//! All randomness comes from ChaCha8 keyed by the suite seed; case `i` runs
//! on stream `i` of that key, so a case is reproducible from `(seed, i)`
//! alone, no matter how much entropy earlier cases consumed.

use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amalgam::{amalgamate, l1_sum, quotient_distance, Amalgam};
use crate::approx::{extension_ball, SandwichParams};
use crate::error::Result;
use crate::exactnum::{Rational, RationalVector};
use crate::morphism::BasedMorphism;
use crate::polytope::Polytope;
use crate::space::BasedSpace;

/// Suites runnable by name through `run_suite`.
pub const SUITE_NAMES: &[&str] = &[
    "amalgam",
    "quotient",
    "l1sum",
    "suppression",
    "extension",
    "renorm",
];

/// One failed case: enough to replay it from the suite seed.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteFailure {
    pub case: usize,
    pub detail: String,
}

/// Outcome of one suite run.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: usize,
    pub failures: Vec<SuiteFailure>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.passed == self.cases
    }
}

/// Runs the named suite; `Err` only for unknown names, never for failing
/// properties — those are reported.
pub fn run_suite(name: &str, cases: usize, seed: u64) -> Result<SuiteReport> {
    match name {
        "amalgam" => Ok(amalgam_suite(cases, seed)),
        "quotient" => Ok(quotient_suite(cases, seed)),
        "l1sum" => Ok(l1_sum_suite(cases, seed)),
        "suppression" => Ok(suppression_suite(cases, seed)),
        "extension" => Ok(extension_suite(cases, seed)),
        "renorm" => Ok(renorm_suite(cases, seed)),
        _ => Err(crate::error::Error::InvalidInput(format!(
            "unknown suite {name:?}; known: {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

fn run_cases(
    suite: &str,
    cases: usize,
    seed: u64,
    mut case: impl FnMut(&mut ChaCha8Rng, usize) -> std::result::Result<(), String>,
) -> SuiteReport {
    let mut failures = Vec::new();
    for i in 0..cases {
        let mut rng = case_rng(seed, i);
        if let Err(detail) = case(&mut rng, i) {
            failures.push(SuiteFailure { case: i, detail });
        }
    }
    SuiteReport {
        suite: suite.to_string(),
        seed,
        cases,
        passed: cases - failures.len(),
        failures,
    }
}

/// A uniform rational `p/q` with `q ≤ max_den` and `|p/q| ≤ limit`.
fn rand_rational(rng: &mut ChaCha8Rng, max_den: u32, limit: &Rational) -> Rational {
    let q = rng.gen_range(1..=i64::from(max_den));
    let max_p = (limit * &Rational::from_int(q))
        .floor_int()
        .to_i64()
        .unwrap_or(0)
        .max(0);
    Rational::frac(rng.gen_range(-max_p..=max_p), q)
}

fn rand_point(rng: &mut ChaCha8Rng, dim: usize, max_den: u32, limit: &Rational) -> RationalVector {
    RationalVector::new((0..dim).map(|_| rand_rational(rng, max_den, limit)).collect())
}

fn l1_norm(v: &RationalVector) -> Rational {
    let mut s = Rational::zero();
    for e in v.iter() {
        s = &s + &e.abs();
    }
    s
}

fn suite_k(rng: &mut ChaCha8Rng) -> Rational {
    [Rational::one(), Rational::frac(3, 2), Rational::from_int(2)]
        .choose(rng)
        .cloned()
        .expect("nonempty")
}

/// Rejection-samples a space that validates at bound `k`: the signed basis
/// plus up to `max_extras` random grid vertices. Extras shrink as attempts
/// fail; with none left the ℓ1 ball remains, which validates at every
/// `k ≥ 1`, so the loop always terminates.
pub fn random_valid_space(
    rng: &mut ChaCha8Rng,
    labels: Vec<String>,
    max_den: u32,
    k: &Rational,
    max_extras: usize,
) -> std::result::Result<BasedSpace, String> {
    let dim = labels.len();
    for attempt in 0..120usize {
        let extras = match attempt {
            0..=39 => max_extras,
            40..=79 => max_extras.min(1),
            _ => 0,
        };
        let mut gens: Vec<RationalVector> = (0..dim).map(|i| RationalVector::unit(dim, i)).collect();
        for _ in 0..extras {
            let v = rand_point(rng, dim, max_den, k);
            if l1_norm(&v) > Rational::one() {
                gens.push(v);
            }
        }
        let Ok(ball) = Polytope::new(dim, gens) else {
            continue;
        };
        let Ok(space) = BasedSpace::new(labels.clone(), ball, k.clone()) else {
            continue;
        };
        match space.validate() {
            Ok(report) if report.is_valid() => return Ok(space),
            Ok(_) => continue,
            Err(e) => return Err(format!("validation errored during sampling: {e}")),
        }
    }
    Err("sampler failed to produce a valid space (ℓ1 fallback unreachable)".into())
}

/// A pushout test case: legs are same-label inclusions of sections of one
/// ambient space, hence exact isometries by construction.
pub struct TripleCase {
    pub k: Rational,
    pub z: BasedSpace,
    pub x: BasedSpace,
    pub y: BasedSpace,
    /// `Z → X`.
    pub left: BasedMorphism,
    /// `Z → Y`.
    pub right: BasedMorphism,
}

/// Draws the triple for one amalgamation case: `X` and `Y` are sections of
/// a common ambient space over label sets meeting exactly in `Z`'s.
pub fn sample_triple(rng: &mut ChaCha8Rng) -> std::result::Result<TripleCase, String> {
    let k = suite_k(rng);
    let dz = rng.gen_range(0..=2usize);
    let dx_extra = rng.gen_range(usize::from(dz == 0)..=(3 - dz));
    let dy_cap = (3 - dz).min(5 - dz - dx_extra);
    let dy_extra = rng.gen_range(usize::from(dz == 0).min(dy_cap)..=dy_cap);

    let z_labels: Vec<String> = (0..dz).map(|i| format!("z{i}")).collect();
    let x_labels: Vec<String> = (0..dx_extra).map(|i| format!("x{i}")).collect();
    let y_labels: Vec<String> = (0..dy_extra).map(|i| format!("y{i}")).collect();
    let mut all = z_labels.clone();
    all.extend(x_labels.iter().cloned());
    all.extend(y_labels.iter().cloned());

    let extras = rng.gen_range(1..=3usize);
    let ambient = random_valid_space(rng, all, 8, &k, extras)?;

    let zx: Vec<String> = z_labels.iter().chain(&x_labels).cloned().collect();
    let zy: Vec<String> = z_labels.iter().chain(&y_labels).cloned().collect();
    let err = |e: crate::error::Error| format!("section construction failed: {e}");
    let x = ambient.based_subspace(&zx).map_err(err)?;
    let y = ambient.based_subspace(&zy).map_err(err)?;
    let z = ambient.based_subspace(&z_labels).map_err(err)?;
    let left = BasedMorphism::inclusion(&z, &x).map_err(err)?;
    let right = BasedMorphism::inclusion(&z, &y).map_err(err)?;
    Ok(TripleCase {
        k,
        z,
        x,
        y,
        left,
        right,
    })
}

fn amalgamate_case(t: &TripleCase) -> std::result::Result<Amalgam, String> {
    amalgamate(&t.left, &t.right).map_err(|e| format!("amalgamation failed: {e}"))
}

/// Pushout suite: legs of the amalgam certify as isometries, the square
/// commutes as label maps, the result's suppression constant stays within
/// `max(K_X, K_Y)`, and the whole amalgam survives a serialization round
/// trip with exact rational data.
pub fn amalgam_suite(cases: usize, seed: u64) -> SuiteReport {
    run_cases("amalgam", cases, seed, |rng, _| {
        let t = sample_triple(rng)?;
        let am = amalgamate_case(&t)?;
        am.left
            .certify_isometry()
            .map_err(|e| format!("left pushout leg not isometric: {e}"))?;
        am.right
            .certify_isometry()
            .map_err(|e| format!("right pushout leg not isometric: {e}"))?;
        for zl in t.z.labels() {
            let via_x = &am.left.label_map()[&t.left.label_map()[zl]];
            let via_y = &am.right.label_map()[&t.right.label_map()[zl]];
            if via_x != via_y {
                return Err(format!(
                    "pushout square breaks at {zl:?}: {via_x:?} vs {via_y:?}"
                ));
            }
        }
        let bound = t.x.k_bound().clone().max(t.y.k_bound().clone());
        match am.space.suppression_constant() {
            Ok(Some(s)) if s <= bound => {}
            Ok(s) => {
                return Err(format!(
                    "amalgam suppression {s:?} exceeds max(K_X, K_Y) = {bound}"
                ))
            }
            Err(e) => return Err(format!("suppression computation failed: {e}")),
        }
        let wire = serde_json::to_string(&am).map_err(|e| format!("serialize: {e}"))?;
        let back: Amalgam =
            serde_json::from_str(&wire).map_err(|e| format!("deserialize: {e}"))?;
        if back != am {
            return Err("amalgam does not survive a serialization round trip".into());
        }
        Ok(())
    })
}

/// Quotient-norm suite: on the same triples as `amalgam_suite`, the gauge
/// of `left(x)` in the amalgam equals the distance from `(x, 0)` to the
/// diagonal in `X ⊕₁ Y`, computed by an independent exact LP.
pub fn quotient_suite(cases: usize, seed: u64) -> SuiteReport {
    let two = Rational::from_int(2);
    run_cases("quotient", cases, seed, |rng, _| {
        let t = sample_triple(rng)?;
        let am = amalgamate_case(&t)?;
        let y_zero = RationalVector::zeros(t.y.dim());
        for _ in 0..10 {
            let p = rand_point(rng, t.x.dim(), 8, &two);
            let w_pt = am.left.apply(&p);
            let via_gauge = am
                .space
                .norm(&w_pt)
                .map_err(|e| format!("gauge failed: {e}"))?
                .ok_or("amalgam gauge degenerate")?;
            let via_lp = quotient_distance(&t.left, &t.right, &p, &y_zero)
                .map_err(|e| format!("LP failed: {e}"))?
                .ok_or("LP reports the point unreachable")?;
            if via_gauge != via_lp {
                return Err(format!(
                    "quotient norm mismatch at {p:?}: gauge {via_gauge} vs LP {via_lp}"
                ));
            }
        }
        Ok(())
    })
}

/// ℓ1-sum suite: the sum norm is exactly additive across the two blocks.
pub fn l1_sum_suite(cases: usize, seed: u64) -> SuiteReport {
    let two = Rational::from_int(2);
    run_cases("l1sum", cases, seed, |rng, _| {
        let kx = suite_k(rng);
        let ky = suite_k(rng);
        let dx = rng.gen_range(1..=3usize);
        let dy = rng.gen_range(1..=3usize);
        let x = random_valid_space(
            rng,
            (0..dx).map(|i| format!("x{i}")).collect(),
            8,
            &kx,
            2,
        )?;
        let y = random_valid_space(
            rng,
            (0..dy).map(|i| format!("y{i}")).collect(),
            8,
            &ky,
            2,
        )?;
        let s = l1_sum(&x, &y).map_err(|e| format!("ℓ1 sum failed: {e}"))?;
        for _ in 0..20 {
            let px = rand_point(rng, dx, 8, &two);
            let py = rand_point(rng, dy, 8, &two);
            let mut joint = RationalVector::zeros(dx + dy);
            for (i, e) in px.iter().enumerate() {
                joint.set(i, e.clone());
            }
            for (i, e) in py.iter().enumerate() {
                joint.set(dx + i, e.clone());
            }
            let err = |e: crate::error::Error| format!("gauge failed: {e}");
            let sum = s.norm(&joint).map_err(err)?.ok_or("sum gauge degenerate")?;
            let nx = x.norm(&px).map_err(err)?.ok_or("x gauge degenerate")?;
            let ny = y.norm(&py).map_err(err)?.ok_or("y gauge degenerate")?;
            if sum != &nx + &ny {
                return Err(format!(
                    "ℓ1 additivity fails at ({px:?}, {py:?}): {sum} vs {nx} + {ny}"
                ));
            }
        }
        Ok(())
    })
}

/// Suppression suite: the support-scan computation agrees with the full
/// `2^dim` brute force on random validated spaces, and pins the reference
/// value 5/4 on `conv{±(5/4, 1/2), ±e₁, ±e₂}`.
pub fn suppression_suite(cases: usize, seed: u64) -> SuiteReport {
    run_cases("suppression", cases, seed, |rng, i| {
        if i == 0 {
            let ball = Polytope::new(
                2,
                vec![
                    RationalVector::new(vec![Rational::frac(5, 4), Rational::frac(1, 2)]),
                    RationalVector::unit(2, 0),
                    RationalVector::unit(2, 1),
                ],
            )
            .map_err(|e| format!("fixture ball: {e}"))?;
            let space = BasedSpace::new(
                vec!["a".into(), "b".into()],
                ball,
                Rational::frac(5, 4),
            )
            .map_err(|e| format!("fixture space: {e}"))?;
            let expected = Some(Rational::frac(5, 4));
            let fast = space.suppression_constant().map_err(|e| e.to_string())?;
            let brute = space
                .suppression_constant_brute()
                .map_err(|e| e.to_string())?;
            if fast != expected || brute != expected {
                return Err(format!(
                    "fixture suppression: optimized {fast:?}, brute {brute:?}, expected 5/4"
                ));
            }
        }
        let k = suite_k(rng);
        let dim = rng.gen_range(1..=3usize);
        let space = random_valid_space(
            rng,
            (0..dim).map(|i| format!("e{i}")).collect(),
            8,
            &k,
            3,
        )?;
        let fast = space.suppression_constant().map_err(|e| e.to_string())?;
        let brute = space
            .suppression_constant_brute()
            .map_err(|e| e.to_string())?;
        if fast != brute {
            return Err(format!(
                "suppression mismatch on {space:?}: optimized {fast:?} vs brute {brute:?}"
            ));
        }
        Ok(())
    })
}

/// Exact set equality of two symmetric bodies via mutual vertex
/// containment.
fn balls_match(p: &Polytope, q: &Polytope) -> std::result::Result<bool, String> {
    if p.dim() != q.dim() {
        return Ok(false);
    }
    let one = Rational::one();
    let err = |e: crate::error::Error| format!("gauge failed: {e}");
    for g in p.generators() {
        match q.gauge(&g.resized(p.dim())).map_err(err)? {
            Some(v) if v <= one => {}
            _ => return Ok(false),
        }
    }
    for g in q.generators() {
        match p.gauge(&g.resized(q.dim())).map_err(err)? {
            Some(v) if v <= one => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Perturbs the section ball within a strict `(1+ε)` sandwich: non-basis
/// generators get scaled by factors from `{1−ε/4, 1, 1+ε/4}`, and the
/// result must itself be a normalized 1-suppression ball. Falls back to
/// the unperturbed section when rejection sampling runs dry.
fn perturbed_section_ball(
    rng: &mut ChaCha8Rng,
    lam: &BasedSpace,
    epsilon: &Rational,
) -> std::result::Result<Polytope, String> {
    let quarter = Rational::frac(1, 4);
    let one = Rational::one();
    let factors = [
        &one - &(epsilon * &quarter),
        one.clone(),
        &one + &(epsilon * &quarter),
    ];
    let dim = lam.dim();
    for _ in 0..60 {
        let mut gens: Vec<RationalVector> = (0..dim).map(|i| RationalVector::unit(dim, i)).collect();
        let mut perturbed = false;
        for g in lam.ball().generators() {
            let g = g.resized(dim);
            if gens.iter().any(|e| *e == g) {
                continue;
            }
            let c = factors.choose(rng).expect("nonempty");
            perturbed = perturbed || !c.is_one();
            gens.push(g.scale(c));
        }
        if !perturbed {
            continue;
        }
        let Ok(ball) = Polytope::new(dim, gens) else {
            continue;
        };
        let Ok(probe) = BasedSpace::new(lam.labels().to_vec(), ball.clone(), Rational::one())
        else {
            continue;
        };
        match probe.validate() {
            Ok(r) if r.is_valid() => return Ok(ball),
            Ok(_) => continue,
            Err(e) => return Err(format!("perturbation validation errored: {e}")),
        }
    }
    Ok(lam.ball().clone())
}

/// Extension-ball suite: each case extends a strictly sandwiched perturbed
/// norm on a subspace of a 1-based space and re-verifies all four
/// postconditions through independent routes (exact-section comparison,
/// direct basis gauges, brute-force suppression, vertex gauges both ways).
pub fn extension_suite(cases: usize, seed: u64) -> SuiteReport {
    let epsilons = [
        Rational::frac(1, 4),
        Rational::frac(1, 2),
        Rational::one(),
    ];
    run_cases("extension", cases, seed, |rng, i| {
        let epsilon = &epsilons[i % epsilons.len()];
        let dim = rng.gen_range(2..=3usize);
        let a = random_valid_space(
            rng,
            (0..dim).map(|i| format!("a{i}")).collect(),
            8,
            &Rational::one(),
            2,
        )?;
        let lam_size = rng.gen_range(dim - 1..=dim);
        let mut lam_labels = a.labels().to_vec();
        lam_labels.shuffle(rng);
        lam_labels.truncate(lam_size);
        lam_labels.sort();

        let err = |e: crate::error::Error| format!("case setup failed: {e}");
        let lam = a.based_subspace(&lam_labels).map_err(err)?;
        let b_prime = perturbed_section_ball(rng, &lam, epsilon)?;
        let params = SandwichParams::derive(&b_prime, lam.ball(), epsilon)
            .map_err(|e| format!("slack derivation failed: {e}"))?;
        let r = extension_ball(&a, &lam_labels, &b_prime, &params)
            .map_err(|e| format!("extension failed: {e}"))?;

        // (i) The new ball's exact section over Λ is the perturbed ball,
        // recomputed through the facet route rather than projections.
        let coords: Vec<usize> = lam_labels
            .iter()
            .map(|l| a.label_index(l))
            .collect::<Result<_>>()
            .map_err(err)?;
        let section = r
            .a_prime
            .ball()
            .restrict_to_coordinate_subspace(&coords)
            .map_err(err)?;
        if !balls_match(&section, &b_prime)? {
            return Err("new ball's section over Λ differs from the perturbed ball".into());
        }
        // (ii) Every basis vector keeps norm exactly 1.
        for i in 0..a.dim() {
            let n = r
                .a_prime
                .norm(&RationalVector::unit(a.dim(), i))
                .map_err(err)?;
            if n != Some(Rational::one()) {
                return Err(format!("basis vector {i} has extended norm {n:?}"));
            }
        }
        // (iii) Suppression is exactly 1, by the full 2^dim scan.
        let brute = r
            .a_prime
            .suppression_constant_brute()
            .map_err(|e| e.to_string())?;
        if brute != Some(Rational::one()) {
            return Err(format!("extended suppression is {brute:?}, not 1"));
        }
        // (iv) Strict (1+ε) vertex sandwich in both directions.
        let bound = &Rational::one() + epsilon;
        for v in a.ball().generators() {
            match r.a_prime.ball().gauge(&v.resized(a.dim())).map_err(err)? {
                Some(g) if g < bound => {}
                g => return Err(format!("old vertex {v:?} has new gauge {g:?} ≥ 1+ε")),
            }
        }
        for w in r.a_prime.ball().generators() {
            match a.ball().gauge(&w.resized(a.dim())).map_err(err)? {
                Some(g) if g < bound => {}
                g => return Err(format!("new vertex {w:?} has old gauge {g:?} ≥ 1+ε")),
            }
        }
        if !(r.report.restriction_equal
            && r.report.basis_norms_one
            && r.report.suppression == Rational::one()
            && r.report.expansion_max < bound
            && r.report.contraction_max < bound)
        {
            return Err(format!("extension report disagrees: {:?}", r.report));
        }
        Ok(())
    })
}

/// Renorming suite: `renorm_to_one_based` yields suppression exactly 1
/// (brute-force verified) and a norm within `[‖·‖, K‖·‖]` pointwise.
pub fn renorm_suite(cases: usize, seed: u64) -> SuiteReport {
    let two = Rational::from_int(2);
    run_cases("renorm", cases, seed, |rng, _| {
        let k = [
            Rational::one(),
            Rational::frac(5, 4),
            Rational::frac(3, 2),
            Rational::from_int(2),
        ]
        .choose(rng)
        .cloned()
        .expect("nonempty");
        let dim = rng.gen_range(1..=3usize);
        let space = random_valid_space(
            rng,
            (0..dim).map(|i| format!("e{i}")).collect(),
            8,
            &k,
            3,
        )?;
        let renormed = space
            .renorm_to_one_based()
            .map_err(|e| format!("renorm failed: {e}"))?;
        let brute = renormed
            .suppression_constant_brute()
            .map_err(|e| e.to_string())?;
        if brute != Some(Rational::one()) {
            return Err(format!("renormed suppression is {brute:?}, not 1"));
        }
        match renormed.validate() {
            Ok(r) if r.is_valid() => {}
            Ok(_) => return Err("renormed space fails validation at bound 1".into()),
            Err(e) => return Err(format!("renormed validation errored: {e}")),
        }
        for _ in 0..10 {
            let p = rand_point(rng, dim, 8, &two);
            let err = |e: crate::error::Error| format!("gauge failed: {e}");
            let old = space.norm(&p).map_err(err)?.ok_or("old gauge degenerate")?;
            let new = renormed.norm(&p).map_err(err)?.ok_or("new gauge degenerate")?;
            if new < old || new > &k * &old {
                return Err(format!(
                    "renormed gauge at {p:?} leaves [‖x‖, K‖x‖]: {old} vs {new} (K = {k})"
                ));
            }
        }
        Ok(())
    })
}
