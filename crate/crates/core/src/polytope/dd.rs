//! Double-description kernel: exact extreme rays of a pointed polyhedral
//! cone `{z : R z ≥ 0}` over integer row data.
//!
//! Used in both directions of the V/H conversion for symmetric polytopes.
//! Rays are content-normalized integer vectors, returned in sorted order so
//! downstream facet lists are deterministic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::exactnum::{solve_linear_system, LinearSolution, Rational, RationalMatrix, RationalVector};

pub(crate) type IntVec = Vec<BigInt>;

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Divides through by the gcd of the entries.
fn content_normalize(v: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        g = g.gcd(x);
    }
    if !g.is_zero() && g != BigInt::from(1) {
        for x in v.iter_mut() {
            *x = &*x / &g;
        }
    }
}

/// Clears denominators and normalizes content.
pub(crate) fn to_int_ray(v: &RationalVector) -> IntVec {
    let mut l = BigInt::from(1);
    for x in v.iter() {
        l = l.lcm(x.denom());
    }
    let mut out: IntVec = v
        .iter()
        .map(|x| x.numer() * (&l / x.denom()))
        .collect();
    content_normalize(&mut out);
    out
}

/// Zero-set bitmask over processed row indices.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn intersect(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

struct Ray {
    v: IntVec,
    zeros: Bits,
}

/// Extreme rays of `{z ∈ ℚ^dim : rows·z ≥ 0}`.
///
/// Errors with `DegenerateBall` when the rows do not have full rank, i.e.
/// the cone has a lineality space and extreme rays do not exist.
pub(crate) fn extreme_rays(rows: &[IntVec], dim: usize) -> Result<Vec<IntVec>> {
    for r in rows {
        assert_eq!(r.len(), dim, "ragged cone rows");
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    let m = rows.len();

    // Greedy full-rank subsystem; its simplicial cone seeds the insertion.
    let mut chosen: Vec<usize> = Vec::new();
    let mut echelon: Vec<(usize, RationalVector)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if chosen.len() == dim {
            break;
        }
        let mut r = RationalVector::new(row.iter().map(|x| Rational::from_bigint(x.clone())).collect());
        for (p, e) in &echelon {
            let f = r.entry(*p);
            if !f.is_zero() {
                r = &r - &e.scale(&f);
            }
        }
        if let Some(p) = (0..dim).find(|&j| !r.entry(j).is_zero()) {
            let r = r.scale(&r.entry(p).recip());
            echelon.push((p, r));
            chosen.push(i);
        }
    }
    if chosen.len() < dim {
        return Err(Error::DegenerateBall(format!(
            "cone rows span only {} of {} dimensions",
            chosen.len(),
            dim
        )));
    }

    let basis = RationalMatrix::from_rows(
        chosen
            .iter()
            .map(|&i| {
                RationalVector::new(
                    rows[i]
                        .iter()
                        .map(|x| Rational::from_bigint(x.clone()))
                        .collect(),
                )
            })
            .collect(),
        dim,
    );
    let mut rays: Vec<Ray> = Vec::with_capacity(dim);
    for j in 0..dim {
        let sol = solve_linear_system(&basis, &RationalVector::unit(dim, j))?;
        let LinearSolution::Solved { point, unique: true } = sol else {
            unreachable!("seed subsystem is square and nonsingular");
        };
        let v = to_int_ray(&point);
        let mut zeros = Bits::new(m);
        for &i in &chosen {
            if dot(&rows[i], &v).is_zero() {
                zeros.set(i);
            }
        }
        rays.push(Ray { v, zeros });
    }

    let mut processed = chosen.clone();
    for t in 0..m {
        if chosen.contains(&t) {
            continue;
        }
        let d: Vec<BigInt> = rays.iter().map(|r| dot(&rows[t], &r.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&k| d[k].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&k| d[k].is_negative()).collect();

        let mut fresh: Vec<Ray> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros.intersect(&rays[n].zeros);
                if common.count() + 2 < dim {
                    continue;
                }
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(k, v)| k != p && k != n && common.is_subset_of(&v.zeros));
                if blocked {
                    continue;
                }
                let mut w: IntVec = (0..dim)
                    .map(|j| &d[p] * &rays[n].v[j] - &d[n] * &rays[p].v[j])
                    .collect();
                content_normalize(&mut w);
                let mut zeros = Bits::new(m);
                for &i in &processed {
                    if dot(&rows[i], &w).is_zero() {
                        zeros.set(i);
                    }
                }
                zeros.set(t);
                fresh.push(Ray { v: w, zeros });
            }
        }

        let mut kept: Vec<Ray> = Vec::new();
        for (k, ray) in rays.into_iter().enumerate() {
            if d[k].is_negative() {
                continue;
            }
            let mut ray = ray;
            if d[k].is_zero() {
                ray.zeros.set(t);
            }
            kept.push(ray);
        }
        kept.extend(fresh);
        rays = kept;
        processed.push(t);
    }

    let mut out: Vec<IntVec> = rays.into_iter().map(|r| r.v).collect();
    out.sort();
    Ok(out)
}
