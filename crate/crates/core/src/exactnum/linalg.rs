use std::fmt;
use std::ops::{Add, Index, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::Rational;
use crate::error::{Error, Result};

/// Dense vector of rationals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct RationalVector {
    entries: Vec<Rational>,
}

impl RationalVector {
    pub fn new(entries: Vec<Rational>) -> Self {
        RationalVector { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        RationalVector {
            entries: vec![Rational::zero(); dim],
        }
    }

    /// Standard basis vector `e_i`.
    pub fn unit(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut v = Self::zeros(dim);
        v.entries[i] = Rational::one();
        v
    }

    pub fn from_ints(entries: &[i64]) -> Self {
        RationalVector {
            entries: entries.iter().map(|&n| Rational::from_int(n)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Entry at `i`, treating indices beyond the stored length as zero.
    /// Lets short vectors stand for zero-padded ones in larger ambients.
    pub fn entry(&self, i: usize) -> Rational {
        self.entries.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn set(&mut self, i: usize, v: Rational) {
        self.entries[i] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rational::is_zero)
    }

    /// Indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy padded or truncated to `dim`; truncation asserts the tail is zero.
    pub fn resized(&self, dim: usize) -> Self {
        if dim >= self.entries.len() {
            let mut e = self.entries.clone();
            e.resize(dim, Rational::zero());
            RationalVector { entries: e }
        } else {
            assert!(
                self.entries[dim..].iter().all(Rational::is_zero),
                "resize would drop nonzero entries"
            );
            RationalVector {
                entries: self.entries[..dim].to_vec(),
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        RationalVector {
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    /// Inner product; the shorter vector is implicitly zero-padded.
    pub fn dot(&self, other: &RationalVector) -> Rational {
        let n = self.entries.len().min(other.entries.len());
        let mut acc = Rational::zero();
        for i in 0..n {
            if !self.entries[i].is_zero() && !other.entries[i].is_zero() {
                acc += &(&self.entries[i] * &other.entries[i]);
            }
        }
        acc
    }

    /// Keeps entries at `coords`, zeroing the rest (a coordinate projection).
    pub fn project_onto(&self, coords: &[usize]) -> Self {
        let mut v = Self::zeros(self.entries.len());
        for &c in coords {
            if c < self.entries.len() {
                v.entries[c] = self.entries[c].clone();
            }
        }
        v
    }

    /// Extracts entries at `coords` into a |coords|-dimensional vector.
    pub fn extract(&self, coords: &[usize]) -> Self {
        RationalVector {
            entries: coords.iter().map(|&c| self.entry(c)).collect(),
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.entries.iter()
    }
}

impl Index<usize> for RationalVector {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.entries[i]
    }
}

impl fmt::Debug for RationalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Add for &RationalVector {
    type Output = RationalVector;
    fn add(self, rhs: &RationalVector) -> RationalVector {
        let n = self.entries.len().max(rhs.entries.len());
        RationalVector {
            entries: (0..n).map(|i| self.entry(i) + rhs.entry(i)).collect(),
        }
    }
}

impl Sub for &RationalVector {
    type Output = RationalVector;
    fn sub(self, rhs: &RationalVector) -> RationalVector {
        let n = self.entries.len().max(rhs.entries.len());
        RationalVector {
            entries: (0..n).map(|i| self.entry(i) - rhs.entry(i)).collect(),
        }
    }
}

impl Neg for &RationalVector {
    type Output = RationalVector;
    fn neg(self) -> RationalVector {
        RationalVector {
            entries: self.entries.iter().map(|v| -v).collect(),
        }
    }
}

/// Dense row-major matrix of rationals.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalMatrix {
    rows: Vec<RationalVector>,
    ncols: usize,
}

impl RationalMatrix {
    pub fn from_rows(rows: Vec<RationalVector>, ncols: usize) -> Self {
        for r in &rows {
            assert_eq!(r.dim(), ncols, "ragged matrix rows");
        }
        RationalMatrix { rows, ncols }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        RationalMatrix {
            rows: vec![RationalVector::zeros(ncols); nrows],
            ncols,
        }
    }

    pub fn identity(n: usize) -> Self {
        RationalMatrix {
            rows: (0..n).map(|i| RationalVector::unit(n, i)).collect(),
            ncols: n,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &RationalVector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[RationalVector] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> Rational {
        self.rows[i].entry(j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.rows[i].set(j, v);
    }

    /// `M·x`; `x` is implicitly zero-padded to `ncols`.
    pub fn mul_vec(&self, x: &RationalVector) -> RationalVector {
        RationalVector::new(self.rows.iter().map(|r| r.dot(x)).collect())
    }

    /// Rank via exact Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut m: Vec<Vec<Rational>> = self
            .rows
            .iter()
            .map(|r| (0..self.ncols).map(|j| r.entry(j)).collect())
            .collect();
        let mut rank = 0;
        for col in 0..self.ncols {
            let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
                continue;
            };
            m.swap(rank, p);
            let inv = m[rank][col].recip();
            for j in col..self.ncols {
                m[rank][j] = &m[rank][j] * &inv;
            }
            for i in 0..m.len() {
                if i != rank && !m[i][col].is_zero() {
                    let f = m[i][col].clone();
                    for j in col..self.ncols {
                        let t = &m[rank][j] * &f;
                        m[i][j] = &m[i][j] - &t;
                    }
                }
            }
            rank += 1;
            if rank == m.len() {
                break;
            }
        }
        rank
    }
}

/// Outcome of `solve_linear_system`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearSolution {
    /// `point` solves `A x = b`; `unique` is false when the kernel is
    /// nontrivial (free variables were pinned to zero).
    Solved { point: RationalVector, unique: bool },
    /// `certificate` is a row combination `y` with `yᵀA = 0`, `yᵀb ≠ 0`.
    Inconsistent { certificate: RationalVector },
}

/// Exact solution of `A x = b` by Gauss–Jordan elimination over rationals,
/// carrying the row-operation matrix so inconsistency comes with a checkable
/// certificate.
pub fn solve_linear_system(a: &RationalMatrix, b: &RationalVector) -> Result<LinearSolution> {
    let (nrows, ncols) = (a.nrows(), a.ncols());
    if b.dim() != nrows {
        return Err(Error::DimensionMismatch {
            context: "solve_linear_system right-hand side",
            expected: nrows,
            got: b.dim(),
        });
    }

    let mut m: Vec<Vec<Rational>> = a
        .rows
        .iter()
        .map(|r| (0..ncols).map(|j| r.entry(j)).collect())
        .collect();
    let mut rhs: Vec<Rational> = (0..nrows).map(|i| b.entry(i)).collect();
    // Row-operation tracker: t · A_original = current m.
    let mut t: Vec<Vec<Rational>> = (0..nrows)
        .map(|i| {
            (0..nrows)
                .map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();

    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..nrows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        rhs.swap(rank, p);
        t.swap(rank, p);
        let inv = m[rank][col].recip();
        for j in 0..ncols {
            m[rank][j] = &m[rank][j] * &inv;
        }
        rhs[rank] = &rhs[rank] * &inv;
        for j in 0..nrows {
            t[rank][j] = &t[rank][j] * &inv;
        }
        for i in 0..nrows {
            if i != rank && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..ncols {
                    let v = &m[rank][j] * &f;
                    m[i][j] = &m[i][j] - &v;
                }
                let v = &rhs[rank] * &f;
                rhs[i] = &rhs[i] - &v;
                for j in 0..nrows {
                    let v = &t[rank][j] * &f;
                    t[i][j] = &t[i][j] - &v;
                }
            }
        }
        pivots.push((rank, col));
        rank += 1;
        if rank == nrows {
            break;
        }
    }

    for i in rank..nrows {
        if !rhs[i].is_zero() {
            let certificate = RationalVector::new(t[i].clone());
            return Ok(LinearSolution::Inconsistent { certificate });
        }
    }

    let mut point = RationalVector::zeros(ncols);
    for &(r, c) in &pivots {
        point.set(c, rhs[r].clone());
    }
    Ok(LinearSolution::Solved {
        point,
        unique: rank == ncols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(ints: &[i64]) -> RationalVector {
        RationalVector::from_ints(ints)
    }

    #[test]
    fn solves_unique_system_exactly() {
        // 2x + y = 5, x - y = 1  =>  x = 2, y = 1
        let a = RationalMatrix::from_rows(vec![rv(&[2, 1]), rv(&[1, -1])], 2);
        let b = rv(&[5, 1]);
        match solve_linear_system(&a, &b).unwrap() {
            LinearSolution::Solved { point, unique } => {
                assert!(unique);
                assert_eq!(point, rv(&[2, 1]));
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn singular_consistent_system_is_flagged_non_unique() {
        let a = RationalMatrix::from_rows(vec![rv(&[1, 1]), rv(&[2, 2])], 2);
        let b = rv(&[3, 6]);
        match solve_linear_system(&a, &b).unwrap() {
            LinearSolution::Solved { point, unique } => {
                assert!(!unique);
                assert_eq!(a.mul_vec(&point), b);
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_system_yields_a_checkable_certificate() {
        let a = RationalMatrix::from_rows(vec![rv(&[1, 1]), rv(&[1, 1])], 2);
        let b = rv(&[1, 2]);
        match solve_linear_system(&a, &b).unwrap() {
            LinearSolution::Inconsistent { certificate } => {
                // yᵀA = 0 and yᵀb ≠ 0, verified exactly.
                for j in 0..2 {
                    let col = RationalVector::new(vec![a.entry(0, j), a.entry(1, j)]);
                    assert!(certificate.dot(&col).is_zero());
                }
                assert!(!certificate.dot(&b).is_zero());
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn residual_of_any_returned_solution_is_exactly_zero() {
        let a = RationalMatrix::from_rows(
            vec![
                RationalVector::new(vec![
                    Rational::frac(1, 3),
                    Rational::frac(2, 7),
                    Rational::frac(-5, 2),
                ]),
                RationalVector::new(vec![
                    Rational::frac(4, 9),
                    Rational::frac(1, 11),
                    Rational::frac(3, 13),
                ]),
            ],
            3,
        );
        let b = RationalVector::new(vec![Rational::frac(22, 7), Rational::frac(-9, 4)]);
        match solve_linear_system(&a, &b).unwrap() {
            LinearSolution::Solved { point, .. } => {
                assert_eq!(a.mul_vec(&point), b);
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn rank_counts_independent_rows() {
        let a = RationalMatrix::from_rows(vec![rv(&[1, 0, 1]), rv(&[0, 1, 1]), rv(&[1, 1, 2])], 3);
        assert_eq!(a.rank(), 2);
        assert_eq!(RationalMatrix::identity(4).rank(), 4);
    }
}
