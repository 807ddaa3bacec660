//! Exact linear programming over the rationals.
//!
//! Equality-form problems `min c·x  s.t.  A x = b` with per-variable sign
//! constraints, solved by two-phase simplex under Bland's rule. Everything is
//! exact arithmetic, so termination is a theorem rather than a tolerance, and
//! every outcome carries a certificate that is re-verified before it is
//! returned:
//!
//! - `Optimal`: a feasible `point` plus a `dual` vector `y` with
//!   `yᵀA_j ≤ c_j` (equality on free columns) and `yᵀb = value`.
//! - `Infeasible`: a Farkas vector `y` with `yᵀA_j ≤ 0` (zero on free
//!   columns) and `yᵀb > 0`.
//! - `Unbounded`: a `ray` `r` with `A r = 0`, sign-feasible, and `c·r < 0`.

use super::{Rational, RationalMatrix, RationalVector};
use crate::error::{Error, Result};

/// Default cap on tableau width (sign-split columns plus rows). Solves above
/// this size are refused rather than silently attempted.
pub const LP_SIZE_LIMIT: usize = 512;

/// Sign constraint on a single variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarSign {
    NonNeg,
    Free,
}

/// `min objective·x  s.t.  matrix·x = rhs`, with `signs[j]` constraining `x_j`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: RationalVector,
    pub matrix: RationalMatrix,
    pub rhs: RationalVector,
    pub signs: Vec<VarSign>,
}

/// Certified outcome of an exact LP solve.
#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal {
        value: Rational,
        point: RationalVector,
        dual: RationalVector,
    },
    Infeasible {
        farkas: RationalVector,
    },
    Unbounded {
        ray: RationalVector,
    },
}

impl LpProblem {
    pub fn new(
        objective: RationalVector,
        matrix: RationalMatrix,
        rhs: RationalVector,
        signs: Vec<VarSign>,
    ) -> Result<Self> {
        if objective.dim() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "lp objective",
                expected: matrix.ncols(),
                got: objective.dim(),
            });
        }
        if signs.len() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "lp variable signs",
                expected: matrix.ncols(),
                got: signs.len(),
            });
        }
        if rhs.dim() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                context: "lp right-hand side",
                expected: matrix.nrows(),
                got: rhs.dim(),
            });
        }
        Ok(LpProblem {
            objective,
            matrix,
            rhs,
            signs,
        })
    }

    pub fn nvars(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    fn column_dot(&self, y: &RationalVector, j: usize) -> Rational {
        let mut acc = Rational::zero();
        for i in 0..self.nrows() {
            let a = self.matrix.entry(i, j);
            if !a.is_zero() {
                acc += &(&y.entry(i) * &a);
            }
        }
        acc
    }

    /// `x` satisfies the sign constraints and `A x = b`.
    pub fn is_feasible_point(&self, x: &RationalVector) -> bool {
        if x.dim() != self.nvars() {
            return false;
        }
        for (j, s) in self.signs.iter().enumerate() {
            if *s == VarSign::NonNeg && x.entry(j).is_negative() {
                return false;
            }
        }
        self.matrix.mul_vec(x) == self.rhs.resized(self.nrows())
    }

    /// `y` proves `value` is a lower bound: `yᵀA_j ≤ c_j` (equality on free
    /// columns) and `yᵀb = value`.
    pub fn is_valid_dual(&self, y: &RationalVector, value: &Rational) -> bool {
        if y.dim() != self.nrows() {
            return false;
        }
        for (j, s) in self.signs.iter().enumerate() {
            let ya = self.column_dot(y, j);
            let c = self.objective.entry(j);
            match s {
                VarSign::NonNeg => {
                    if ya > c {
                        return false;
                    }
                }
                VarSign::Free => {
                    if ya != c {
                        return false;
                    }
                }
            }
        }
        y.dot(&self.rhs) == *value
    }

    /// `y` proves infeasibility: `yᵀA_j ≤ 0` (zero on free columns), `yᵀb > 0`.
    pub fn is_valid_farkas(&self, y: &RationalVector) -> bool {
        if y.dim() != self.nrows() {
            return false;
        }
        for (j, s) in self.signs.iter().enumerate() {
            let ya = self.column_dot(y, j);
            match s {
                VarSign::NonNeg => {
                    if ya.is_positive() {
                        return false;
                    }
                }
                VarSign::Free => {
                    if !ya.is_zero() {
                        return false;
                    }
                }
            }
        }
        y.dot(&self.rhs).is_positive()
    }

    /// `r` proves unboundedness: sign-feasible, `A r = 0`, `c·r < 0`.
    pub fn is_valid_ray(&self, r: &RationalVector) -> bool {
        if r.dim() != self.nvars() {
            return false;
        }
        for (j, s) in self.signs.iter().enumerate() {
            if *s == VarSign::NonNeg && r.entry(j).is_negative() {
                return false;
            }
        }
        self.matrix.mul_vec(r).is_zero() && self.objective.dot(r).is_negative()
    }
}

/// Full-tableau simplex state. Artificial columns occupy the tail and double
/// as an explicit basis inverse, since they start as the identity.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    ncols: usize,
}

enum SimplexEnd {
    Optimal,
    Unbounded { entering: usize },
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in self.rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        self.rhs[r] = &self.rhs[r] * &inv;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for j in 0..self.ncols {
                if !self.rows[r][j].is_zero() {
                    let t = &self.rows[r][j] * &f;
                    self.rows[i][j] = &self.rows[i][j] - &t;
                }
            }
            let t = &self.rhs[r] * &f;
            self.rhs[i] = &self.rhs[i] - &t;
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[c] = true;
        self.basis[r] = c;
    }

    /// Bland's rule: enter the lowest-index improving column among
    /// `0..enter_limit`, leave by minimum ratio with lowest-variable
    /// tie-break. Terminates without anti-cycling tolerances.
    fn run(&mut self, costs: &[Rational], enter_limit: usize) -> SimplexEnd {
        loop {
            let basic_costs: Vec<(usize, Rational)> = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| !costs[b].is_zero())
                .map(|(k, &b)| (k, costs[b].clone()))
                .collect();
            let mut entering = None;
            for j in 0..enter_limit {
                if self.in_basis[j] {
                    continue;
                }
                let mut rc = costs[j].clone();
                for (k, cb) in &basic_costs {
                    if !self.rows[*k][j].is_zero() {
                        rc -= &(cb * &self.rows[*k][j]);
                    }
                }
                if rc.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return SimplexEnd::Optimal;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for k in 0..self.rows.len() {
                if !self.rows[k][j].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[k] / &self.rows[k][j];
                let better = match &leave {
                    None => true,
                    Some((lk, lr)) => {
                        ratio < *lr || (ratio == *lr && self.basis[k] < self.basis[*lk])
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
            match leave {
                Some((k, _)) => self.pivot(k, j),
                None => return SimplexEnd::Unbounded { entering: j },
            }
        }
    }

    /// Row multipliers `y` for the given costs, read off the artificial
    /// columns (the running basis inverse). `y` is indexed by original row.
    fn multipliers(&self, costs: &[Rational], art0: usize, nrows_orig: usize) -> Vec<Rational> {
        let mut y = vec![Rational::zero(); nrows_orig];
        for (k, &b) in self.basis.iter().enumerate() {
            if costs[b].is_zero() {
                continue;
            }
            for (i, slot) in y.iter_mut().enumerate() {
                let t = &self.rows[k][art0 + i];
                if !t.is_zero() {
                    *slot += &(&costs[b] * t);
                }
            }
        }
        y
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome> {
    solve_lp_with_limit(p, LP_SIZE_LIMIT)
}

pub fn solve_lp_with_limit(p: &LpProblem, limit: usize) -> Result<LpOutcome> {
    let n = p.nvars();
    let m = p.nrows();

    // Free variables split as x = x⁺ − x⁻; col_map records (source, negated).
    let mut col_map: Vec<(usize, bool)> = Vec::new();
    for (o, s) in p.signs.iter().enumerate() {
        col_map.push((o, false));
        if *s == VarSign::Free {
            col_map.push((o, true));
        }
    }
    let n_std = col_map.len();
    if n_std + m > limit {
        return Err(Error::LpTooLarge {
            vars: n_std,
            rows: m,
            limit,
        });
    }

    let costs_std: Vec<Rational> = col_map
        .iter()
        .map(|(o, neg)| {
            let c = p.objective.entry(*o);
            if *neg {
                -&c
            } else {
                c
            }
        })
        .collect();

    // Rows normalized to rhs ≥ 0; row_neg remembers flips for dual recovery.
    let ncols = n_std + m;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut row_neg = Vec::with_capacity(m);
    for i in 0..m {
        let neg = p.rhs.entry(i).is_negative();
        let mut row = vec![Rational::zero(); ncols];
        for (j, (o, col_neg)) in col_map.iter().enumerate() {
            let mut v = p.matrix.entry(i, *o);
            if *col_neg {
                v = -&v;
            }
            if neg {
                v = -&v;
            }
            row[j] = v;
        }
        row[n_std + i] = Rational::one();
        rows.push(row);
        rhs.push(if neg {
            -&p.rhs.entry(i)
        } else {
            p.rhs.entry(i)
        });
        row_neg.push(neg);
    }

    let mut in_basis = vec![false; ncols];
    for slot in in_basis.iter_mut().skip(n_std) {
        *slot = true;
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (0..m).map(|i| n_std + i).collect(),
        in_basis,
        ncols,
    };

    let unflip = |y: Vec<Rational>| -> RationalVector {
        RationalVector::new(
            y.into_iter()
                .zip(&row_neg)
                .map(|(v, neg)| if *neg { -&v } else { v })
                .collect(),
        )
    };

    // Phase 1: minimize the artificial total. Artificial columns never enter;
    // a positive stall value then directly yields a Farkas certificate.
    let mut costs1 = vec![Rational::zero(); ncols];
    for c in costs1.iter_mut().skip(n_std) {
        *c = Rational::one();
    }
    match t.run(&costs1, n_std) {
        SimplexEnd::Optimal => {}
        SimplexEnd::Unbounded { .. } => unreachable!("phase-1 objective is bounded below by zero"),
    }
    let phase1_value: Rational = t
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= n_std)
        .map(|(k, _)| t.rhs[k].clone())
        .sum();
    if phase1_value.is_positive() {
        let farkas = unflip(t.multipliers(&costs1, n_std, m));
        assert!(
            p.is_valid_farkas(&farkas),
            "internal: infeasibility certificate failed verification"
        );
        return Ok(LpOutcome::Infeasible { farkas });
    }

    // Drive zero-level artificials out of the basis; rows with no real pivot
    // are redundant combinations of the others and can be dropped outright.
    let mut k = 0;
    while k < t.basis.len() {
        if t.basis[k] >= n_std {
            if let Some(j) = (0..n_std).position(|j| !t.rows[k][j].is_zero()) {
                t.pivot(k, j);
            } else {
                t.in_basis[t.basis[k]] = false;
                t.rows.remove(k);
                t.rhs.remove(k);
                t.basis.remove(k);
                continue;
            }
        }
        k += 1;
    }

    // Phase 2 over the real costs; artificials stay barred and nonbasic.
    let mut costs2 = vec![Rational::zero(); ncols];
    costs2[..n_std].clone_from_slice(&costs_std);
    let merge = |x_std: &[Rational]| -> RationalVector {
        let mut x = RationalVector::zeros(n);
        for (j, (o, neg)) in col_map.iter().enumerate() {
            if x_std[j].is_zero() {
                continue;
            }
            let cur = x.entry(*o);
            let v = if *neg { &cur - &x_std[j] } else { &cur + &x_std[j] };
            x.set(*o, v);
        }
        x
    };
    match t.run(&costs2, n_std) {
        SimplexEnd::Optimal => {
            let mut x_std = vec![Rational::zero(); ncols];
            for (k, &b) in t.basis.iter().enumerate() {
                x_std[b] = t.rhs[k].clone();
            }
            let point = merge(&x_std);
            let value = p.objective.dot(&point);
            let dual = unflip(t.multipliers(&costs2, n_std, m));
            assert!(
                p.is_feasible_point(&point),
                "internal: optimal point failed feasibility verification"
            );
            assert!(
                p.is_valid_dual(&dual, &value),
                "internal: dual certificate failed verification"
            );
            Ok(LpOutcome::Optimal { value, point, dual })
        }
        SimplexEnd::Unbounded { entering } => {
            let mut r_std = vec![Rational::zero(); ncols];
            r_std[entering] = Rational::one();
            for (k, &b) in t.basis.iter().enumerate() {
                if !t.rows[k][entering].is_zero() {
                    r_std[b] = -&t.rows[k][entering];
                }
            }
            let ray = merge(&r_std);
            assert!(
                p.is_valid_ray(&ray),
                "internal: unbounded ray failed verification"
            );
            Ok(LpOutcome::Unbounded { ray })
        }
    }
}
