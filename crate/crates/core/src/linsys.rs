//! Exact Gaussian elimination with symbolic right-hand sides.
//!
//! The unknowns of a [`LinearSystem`] are implicit column indices; the
//! right members are [`AffineExpr`]s that may mention output, free and slack
//! variables. All three shapes of a linear layer are covered:
//!
//! * square: [`gauss_solve`], `x = A·rhs`;
//! * wide (more unknowns than equations): [`solve_wide`], non-pivot columns
//!   become fresh free variables;
//! * tall (more equations than unknowns): [`solve_tall`], the surplus
//!   equations are absorbed by promoting free variables of the right-hand
//!   side to unknowns.
//!
//! [`least_squares_project`] handles a tall system whose concrete target is not
//! reachable by moving the target to the closest point of the column space.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{AffineExpr, AffineMap, FreshVars, VarId};
use crate::rational::Rational;

/// Dense row-major matrix.
pub type Matrix = Vec<Vec<Rational>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearSystemError {
    #[error("matrix has no rows or no columns")]
    Empty,
    #[error("matrix row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("right-hand side has {found} entries for {rows} rows")]
    RhsLength { rows: usize, found: usize },
    #[error("system is {rows}x{cols}, expected a square system")]
    NonSquare { rows: usize, cols: usize },
    #[error("system is {rows}x{cols}, expected more columns than rows")]
    NonWide { rows: usize, cols: usize },
    #[error("system is {rows}x{cols}, expected more rows than columns")]
    NonTall { rows: usize, cols: usize },
    #[error("no invertible {rows}x{rows} column subset exists (rank {rank})")]
    RankDeficientAllPivots { rows: usize, rank: usize },
    #[error("{unresolved} surplus equation(s) cannot be absorbed by free variables of the right-hand side")]
    InsufficientFreeVariables { unresolved: usize },
    #[error("column rank {rank} is below column count {cols}")]
    RankDeficientColumns { rank: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pivoting {
    /// Largest absolute value in the column, lowest row on ties.
    #[default]
    LargestMagnitude,
    /// First nonzero entry in row order.
    FirstNonzero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub pivoting: Pivoting,
}

/// Returns `(rows, cols)` after checking the matrix is rectangular and nonempty.
pub fn dims(coeffs: &Matrix) -> Result<(usize, usize), LinearSystemError> {
    let rows = coeffs.len();
    let cols = coeffs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(LinearSystemError::Empty);
    }
    for (row, r) in coeffs.iter().enumerate() {
        if r.len() != cols {
            return Err(LinearSystemError::Ragged { row, expected: cols, found: r.len() });
        }
    }
    Ok((rows, cols))
}

/// `coeffs · x = rhs`, with symbolic right members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    coeffs: Matrix,
    rhs: Vec<AffineExpr>,
}

impl LinearSystem {
    pub fn new(coeffs: Matrix, rhs: Vec<AffineExpr>) -> Result<Self, LinearSystemError> {
        let (rows, _) = dims(&coeffs)?;
        if rhs.len() != rows {
            return Err(LinearSystemError::RhsLength { rows, found: rhs.len() });
        }
        Ok(LinearSystem { coeffs, rhs })
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn rhs(&self) -> &[AffineExpr] {
        &self.rhs
    }

    pub fn rows(&self) -> usize {
        self.coeffs.len()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].len()
    }

    /// `row · x − rhs` for each row, after substituting `x`.
    pub fn residuals(&self, x: &[AffineExpr]) -> Vec<AffineExpr> {
        self.coeffs
            .iter()
            .zip(&self.rhs)
            .map(|(row, rhs)| {
                let mut acc = -rhs;
                for (c, xi) in row.iter().zip(x) {
                    acc.add_scaled(xi, c);
                }
                acc
            })
            .collect()
    }
}

/// Reduced row echelon form of `[coeffs | rhs]`.
struct Echelon {
    cols: usize,
    /// `(pivot column, reduced coefficient row, reduced rhs)`.
    pivot_rows: Vec<(usize, Vec<Rational>, AffineExpr)>,
    free_columns: Vec<usize>,
    /// Right members of rows whose coefficients reduced to zero; each must equal 0.
    residual: Vec<AffineExpr>,
}

impl Echelon {
    fn rank(&self) -> usize {
        self.pivot_rows.len()
    }
}

fn reduce(coeffs: &Matrix, rhs: &[AffineExpr], options: SolveOptions) -> Echelon {
    let rows = coeffs.len();
    let cols = coeffs[0].len();
    let mut a = coeffs.clone();
    let mut b = rhs.to_vec();
    let mut pivots = Vec::new();
    let mut free_columns = Vec::new();
    let mut row = 0;

    for col in 0..cols {
        if row == rows {
            free_columns.push(col);
            continue;
        }
        let candidates = (row..rows).filter(|&i| !a[i][col].is_zero());
        let pick = match options.pivoting {
            Pivoting::FirstNonzero => candidates.into_iter().next(),
            Pivoting::LargestMagnitude => candidates.fold(None, |best: Option<usize>, i| match best {
                Some(j) if a[j][col].abs() >= a[i][col].abs() => Some(j),
                _ => Some(i),
            }),
        };
        let Some(p) = pick else {
            free_columns.push(col);
            continue;
        };
        a.swap(row, p);
        b.swap(row, p);

        let inv = a[row][col].recip();
        for v in a[row].iter_mut() {
            *v *= &inv;
        }
        b[row] = b[row].scale(&inv);

        let pivot_row = a[row].clone();
        let pivot_rhs = b[row].clone();
        for i in 0..rows {
            if i == row || a[i][col].is_zero() {
                continue;
            }
            let factor = a[i][col].clone();
            for (dst, src) in a[i].iter_mut().zip(&pivot_row) {
                *dst -= src * &factor;
            }
            b[i].add_scaled(&pivot_rhs, &-factor);
        }
        pivots.push(col);
        row += 1;
    }

    let residual = b.split_off(row);
    let pivot_rows = pivots.into_iter().zip(a).zip(b).map(|((col, coeffs), rhs)| (col, coeffs, rhs)).collect();
    Echelon { cols, pivot_rows, free_columns, residual }
}

/// Expresses the unknowns from an echelon form, binding every free column to
/// a fresh variable in column order.
fn back_substitute(ech: &Echelon, fresh: &mut FreshVars) -> (Vec<AffineExpr>, Vec<VarId>) {
    let mut x = vec![AffineExpr::zero(); ech.cols];
    let mut fresh_vars = Vec::with_capacity(ech.free_columns.len());
    for &f in &ech.free_columns {
        let v = fresh.next_free();
        fresh_vars.push(v);
        x[f] = AffineExpr::var(v);
    }
    for (col, coeffs, rhs) in &ech.pivot_rows {
        let mut e = rhs.clone();
        for (f, v) in ech.free_columns.iter().zip(&fresh_vars) {
            let c = &coeffs[*f];
            if !c.is_zero() {
                e.add_term(*v, -c.clone());
            }
        }
        x[*col] = e;
    }
    (x, fresh_vars)
}

pub enum GaussOutcome {
    Unique(AffineMap),
    /// Consistent rows may remain conditional on `conditions` (each `= 0`).
    RankDeficient {
        free_columns: Vec<usize>,
        conditions: Vec<AffineExpr>,
    },
    /// A row reduced to `0 = c` with `c` a nonzero constant.
    Inconsistent {
        condition: AffineExpr,
    },
}

/// Solves a square system.
pub fn gauss_solve(system: &LinearSystem, options: SolveOptions) -> Result<GaussOutcome, LinearSystemError> {
    let (rows, cols) = (system.rows(), system.cols());
    if rows != cols {
        return Err(LinearSystemError::NonSquare { rows, cols });
    }
    let ech = reduce(&system.coeffs, &system.rhs, options);
    if ech.rank() == cols {
        let mut fresh = FreshVars::new(0);
        let (x, _) = back_substitute(&ech, &mut fresh);
        return Ok(GaussOutcome::Unique(AffineMap::new(x)));
    }
    if let Some(bad) = ech.residual.iter().find(|e| e.is_constant() && !e.is_zero()) {
        return Ok(GaussOutcome::Inconsistent { condition: bad.clone() });
    }
    Ok(GaussOutcome::RankDeficient {
        free_columns: ech.free_columns.clone(),
        conditions: ech.residual.into_iter().filter(|e| !e.is_zero()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WideSolution {
    pub input_map: AffineMap,
    pub free_vars: Vec<VarId>,
    /// Input indices that became free, parallel to `free_vars`.
    pub free_columns: Vec<usize>,
}

/// Solves a system with more unknowns than equations.
pub fn solve_wide(
    coeffs: &Matrix,
    rhs: &[AffineExpr],
    fresh: &mut FreshVars,
    options: SolveOptions,
) -> Result<WideSolution, LinearSystemError> {
    let system = LinearSystem::new(coeffs.clone(), rhs.to_vec())?;
    let (rows, cols) = (system.rows(), system.cols());
    if cols <= rows {
        return Err(LinearSystemError::NonWide { rows, cols });
    }
    let ech = reduce(coeffs, rhs, options);
    if ech.rank() < rows {
        return Err(LinearSystemError::RankDeficientAllPivots { rows, rank: ech.rank() });
    }
    let (x, free_vars) = back_substitute(&ech, fresh);
    Ok(WideSolution { input_map: AffineMap::new(x), free_vars, free_columns: ech.free_columns })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallSolution {
    pub input_map: AffineMap,
    /// Right-hand-side variables promoted to unknowns, with their solved values.
    pub promoted: BTreeMap<VarId, AffineExpr>,
    /// Fresh variables for unknown columns left undetermined (rank-deficient weights).
    pub fresh_vars: Vec<VarId>,
}

/// Solves a system with more equations than unknowns by promoting free
/// variables of the right-hand side.
pub fn solve_tall(
    coeffs: &Matrix,
    rhs: &[AffineExpr],
    fresh: &mut FreshVars,
    options: SolveOptions,
) -> Result<TallSolution, LinearSystemError> {
    let system = LinearSystem::new(coeffs.clone(), rhs.to_vec())?;
    let (rows, cols) = (system.rows(), system.cols());
    if cols >= rows {
        return Err(LinearSystemError::NonTall { rows, cols });
    }
    let solved = solve_general(coeffs, rhs, fresh, options)?;
    if !solved.residual.is_empty() {
        return Err(LinearSystemError::InsufficientFreeVariables { unresolved: solved.residual.len() });
    }
    Ok(TallSolution { input_map: solved.input_map, promoted: solved.promoted, fresh_vars: solved.fresh_vars })
}

/// Result of [`solve_general`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralSolution {
    pub input_map: AffineMap,
    pub fresh_vars: Vec<VarId>,
    pub free_columns: Vec<usize>,
    pub promoted: BTreeMap<VarId, AffineExpr>,
    /// Conditions (each `= 0`) over non-eliminable variables that could not be
    /// absorbed. Constant entries are nonzero, i.e. contradictions.
    pub residual: Vec<AffineExpr>,
}

/// Shape-agnostic solve: pivot columns are solved, non-pivot columns become
/// fresh free variables, surplus equations promote eliminable variables of
/// the right-hand side, and whatever remains is reported as residual
/// conditions.
pub fn solve_general(
    coeffs: &Matrix,
    rhs: &[AffineExpr],
    fresh: &mut FreshVars,
    options: SolveOptions,
) -> Result<GeneralSolution, LinearSystemError> {
    LinearSystem::new(coeffs.clone(), rhs.to_vec())?;
    let ech = reduce(coeffs, rhs, options);
    let (x, fresh_vars) = back_substitute(&ech, fresh);
    let (promoted, residual) = promote_conditions(ech.residual.clone());
    let input_map = AffineMap::new(x).substitute(&promoted);
    Ok(GeneralSolution { input_map, fresh_vars, free_columns: ech.free_columns, promoted, residual })
}

/// Solves the equations `conditions[i] = 0` for free/slack variables.
///
/// Returns the bindings (expressed only in non-promoted variables) and the
/// conditions that mention no eliminable variable. Conditions that reduce to
/// `0 = 0` are dropped.
pub fn promote_conditions(conditions: Vec<AffineExpr>) -> (BTreeMap<VarId, AffineExpr>, Vec<AffineExpr>) {
    let mut bindings: BTreeMap<VarId, AffineExpr> = BTreeMap::new();
    let mut residual = Vec::new();
    for cond in conditions {
        let cond = cond.substitute(&bindings);
        if cond.is_zero() {
            continue;
        }
        let pivot = cond
            .terms()
            .iter()
            .filter(|(v, _)| v.is_eliminable())
            .fold(None, |best: Option<(&VarId, &Rational)>, (v, c)| match best {
                Some((_, bc)) if bc.abs() >= c.abs() => best,
                _ => Some((v, c)),
            })
            .map(|(v, c)| (*v, c.clone()));
        let Some((var, coeff)) = pivot else {
            residual.push(cond);
            continue;
        };
        let mut value = cond.clone();
        value.take_term(&var);
        let value = value.scale(&(-coeff.recip()));
        let single = BTreeMap::from([(var, value.clone())]);
        for bound in bindings.values_mut() {
            *bound = bound.substitute(&single);
        }
        bindings.insert(var, value);
    }
    let residual = residual.into_iter().map(|r| r.substitute(&bindings)).filter(|r| !r.is_zero()).collect();
    (bindings, residual)
}

/// Closest reachable target in the least-squares sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionResult {
    /// `ŷ`, the projected target.
    pub projected_target: Vec<Rational>,
    /// `ε = ŷ − target`.
    pub residual: Vec<Rational>,
    /// The unique `x` with `coeffs·x = ŷ`.
    pub solution: Vec<Rational>,
}

/// Projects `target` onto the column space of a tall, full-column-rank matrix
/// through the normal equations `WᵀW x = Wᵀ target`.
pub fn least_squares_project(coeffs: &Matrix, target: &[Rational]) -> Result<ProjectionResult, LinearSystemError> {
    let (rows, cols) = dims(coeffs)?;
    if target.len() != rows {
        return Err(LinearSystemError::RhsLength { rows, found: target.len() });
    }
    if cols >= rows {
        return Err(LinearSystemError::NonTall { rows, cols });
    }
    let zero_rhs = vec![AffineExpr::zero(); rows];
    let rank = reduce(coeffs, &zero_rhs, SolveOptions::default()).rank();
    if rank < cols {
        return Err(LinearSystemError::RankDeficientColumns { rank, cols });
    }

    let gram: Matrix =
        (0..cols).map(|i| (0..cols).map(|j| coeffs.iter().map(|row| &row[i] * &row[j]).sum()).collect()).collect();
    let moment: Vec<AffineExpr> =
        (0..cols).map(|i| AffineExpr::constant(coeffs.iter().zip(target).map(|(row, t)| &row[i] * t).sum())).collect();
    let ech = reduce(&gram, &moment, SolveOptions::default());
    let (x, _) = back_substitute(&ech, &mut FreshVars::new(0));
    let solution: Vec<Rational> = x.iter().map(|e| e.constant_term().clone()).collect();
    let projected_target: Vec<Rational> =
        coeffs.iter().map(|row| row.iter().zip(&solution).map(|(w, s)| w * s).sum()).collect();
    let residual = projected_target.iter().zip(target).map(|(p, t)| p - t).collect();
    Ok(ProjectionResult { projected_target, residual, solution })
}

/// `Wᵀ v` for a row-major `W`.
pub fn transpose_apply(coeffs: &Matrix, v: &[Rational]) -> Vec<Rational> {
    let cols = coeffs.first().map_or(0, Vec::len);
    (0..cols).map(|j| coeffs.iter().zip(v).map(|(row, vi)| &row[j] * vi).sum()).collect()
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn y(i: u32) -> AffineExpr {
        AffineExpr::var(VarId::output(i))
    }

    fn mat(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()
    }

    fn assert_identity(system: &LinearSystem, x: &[AffineExpr]) {
        for r in system.residuals(x) {
            assert!(r.is_zero(), "residual {r}");
        }
    }

    #[test]
    fn identity_square() {
        let b = [int(1), int(-2)];
        let rhs: Vec<_> = (0..2).map(|i| &y(i) - &AffineExpr::constant(b[i as usize].clone())).collect();
        let sys = LinearSystem::new(identity(2), rhs.clone()).unwrap();
        let GaussOutcome::Unique(map) = gauss_solve(&sys, SolveOptions::default()).unwrap() else {
            panic!("expected unique");
        };
        assert_eq!(map.outputs(), &rhs[..]);
    }

    #[test]
    fn sum_difference_square() {
        let sys = LinearSystem::new(mat(&[&[1, 1], &[1, -1]]), vec![y(0), y(1)]).unwrap();
        let GaussOutcome::Unique(map) = gauss_solve(&sys, SolveOptions::default()).unwrap() else {
            panic!("expected unique");
        };
        let half = frac(1, 2);
        let x0 = AffineExpr::from_parts([(VarId::output(0), half.clone()), (VarId::output(1), half.clone())], int(0));
        let x1 = AffineExpr::from_parts([(VarId::output(0), half.clone()), (VarId::output(1), -half)], int(0));
        assert_eq!(map.outputs(), &[x0, x1]);
        assert_identity(&sys, map.outputs());
    }

    #[test]
    fn dependent_rows_are_rank_deficient() {
        let sys = LinearSystem::new(mat(&[&[1, 1], &[2, 2]]), vec![y(0), y(1)]).unwrap();
        match gauss_solve(&sys, SolveOptions::default()).unwrap() {
            GaussOutcome::RankDeficient { free_columns, conditions } => {
                assert_eq!(free_columns, vec![1]);
                assert_eq!(conditions.len(), 1);
                // the condition vanishes exactly when 2·y0 = y1
                let a = BTreeMap::from([(VarId::output(0), int(3)), (VarId::output(1), int(6))]);
                assert!(conditions[0].evaluate(&a).unwrap().is_zero());
            }
            _ => panic!("expected rank deficiency"),
        }
        let concrete = LinearSystem::new(
            mat(&[&[1, 1], &[2, 2]]),
            vec![AffineExpr::constant(int(1)), AffineExpr::constant(int(3))],
        )
        .unwrap();
        assert!(matches!(gauss_solve(&concrete, SolveOptions::default()).unwrap(), GaussOutcome::Inconsistent { .. }));
        let bad = LinearSystem::new(mat(&[&[1, 1]]), vec![y(0)]).unwrap();
        assert!(matches!(gauss_solve(&bad, SolveOptions::default()), Err(LinearSystemError::NonSquare { .. })));
    }

    #[test]
    fn wide_already_solved() {
        let mut fresh = FreshVars::new(1);
        let sol = solve_wide(&mat(&[&[1, 0, 0]]), &[y(0)], &mut fresh, SolveOptions::default()).unwrap();
        let t0 = VarId::free(1, 0);
        let t1 = VarId::free(1, 1);
        assert_eq!(sol.input_map.outputs(), &[y(0), AffineExpr::var(t0), AffineExpr::var(t1)]);
        assert_eq!(sol.free_columns, vec![1, 2]);
    }

    #[test]
    fn wide_sum() {
        let mut fresh = FreshVars::new(0);
        let rhs = &y(0) - &AffineExpr::constant(int(2));
        let sol =
            solve_wide(&mat(&[&[1, 1]]), std::slice::from_ref(&rhs), &mut fresh, SolveOptions::default()).unwrap();
        let t = VarId::free(0, 0);
        assert_eq!(sol.input_map.outputs()[0], &rhs - &AffineExpr::var(t));
        assert_eq!(sol.input_map.outputs()[1], AffineExpr::var(t));
        let sys = LinearSystem::new(mat(&[&[1, 1]]), vec![rhs]).unwrap();
        assert_identity(&sys, sol.input_map.outputs());
        let err = solve_wide(&mat(&[&[2, 4], &[1, 2]]), &[y(0), y(1)], &mut fresh, SolveOptions::default());
        assert!(matches!(err, Err(LinearSystemError::NonWide { .. })));
        let err = solve_wide(&mat(&[&[1, 2, 3], &[2, 4, 6]]), &[y(0), y(1)], &mut fresh, SolveOptions::default());
        assert!(matches!(err, Err(LinearSystemError::RankDeficientAllPivots { rank: 1, .. })));
    }

    #[test]
    fn wide_without_pivoting_frees_last_columns() {
        let mut fresh = FreshVars::new(0);
        let opts = SolveOptions { pivoting: Pivoting::FirstNonzero };
        let sol = solve_wide(&mat(&[&[1, 2, 3], &[0, 1, 4]]), &[y(0), y(1)], &mut fresh, opts).unwrap();
        assert_eq!(sol.free_columns, vec![2]);
        // singular leading block: pivot-driven selection frees a different column
        let sol = solve_wide(&mat(&[&[1, 2, 3], &[2, 4, 1]]), &[y(0), y(1)], &mut fresh, opts).unwrap();
        assert_eq!(sol.free_columns, vec![1]);
    }

    #[test]
    fn tall_promotes_free_variable() {
        let tau = VarId::free(1, 0);
        let rhs = [y(0), AffineExpr::var(tau)];
        let mut fresh = FreshVars::new(0);
        let sol = solve_tall(&mat(&[&[1], &[0]]), &rhs, &mut fresh, SolveOptions::default()).unwrap();
        assert_eq!(sol.input_map.outputs(), &[y(0)]);
        assert_eq!(sol.promoted.get(&tau), Some(&AffineExpr::zero()));

        let sol = solve_tall(&mat(&[&[1], &[1]]), &rhs, &mut fresh, SolveOptions::default()).unwrap();
        assert_eq!(sol.input_map.outputs(), &[y(0)]);
        assert_eq!(sol.promoted.get(&tau), Some(&y(0)));
        let sys =
            LinearSystem::new(mat(&[&[1], &[1]]), rhs.iter().map(|e| e.substitute(&sol.promoted)).collect()).unwrap();
        assert_identity(&sys, sol.input_map.outputs());
    }

    #[test]
    fn tall_without_free_variables_fails() {
        let mut fresh = FreshVars::new(0);
        let err = solve_tall(&mat(&[&[1], &[0]]), &[y(0), y(1)], &mut fresh, SolveOptions::default());
        assert!(matches!(err, Err(LinearSystemError::InsufficientFreeVariables { unresolved: 1 })));
    }

    #[test]
    fn projection_examples() {
        let p = least_squares_project(&mat(&[&[1], &[1]]), &[int(0), int(2)]).unwrap();
        assert_eq!(p.projected_target, vec![int(1), int(1)]);
        assert_eq!(p.residual, vec![int(1), int(-1)]);

        let p = least_squares_project(&mat(&[&[1], &[0]]), &[int(3), int(5)]).unwrap();
        assert_eq!(p.projected_target, vec![int(3), int(0)]);
        assert_eq!(p.residual, vec![int(0), int(-5)]);

        let p = least_squares_project(&mat(&[&[1], &[2]]), &[int(1), int(2)]).unwrap();
        assert!(p.residual.iter().all(Zero::is_zero));

        let err = least_squares_project(&mat(&[&[1, 2], &[2, 4], &[3, 6]]), &[int(0), int(0), int(0)]);
        assert!(matches!(err, Err(LinearSystemError::RankDeficientColumns { rank: 1, cols: 2 })));
    }

    /// Minimizes (x−0)² + (x−2)² by setting the derivative 2x + 2(x−2) to zero.
    #[test]
    fn projection_matches_calculus_oracle() {
        let x_star = int(4) / int(4);
        let p = least_squares_project(&mat(&[&[1], &[1]]), &[int(0), int(2)]).unwrap();
        assert_eq!(p.solution, vec![x_star]);
    }

    #[test]
    fn promotion_leaves_output_only_conditions() {
        let tau = VarId::free(0, 0);
        let conds =
            vec![&AffineExpr::var(tau) - &y(0), &(&AffineExpr::var(tau) + &y(1)) - &AffineExpr::constant(int(1))];
        let (bindings, residual) = promote_conditions(conds);
        assert_eq!(bindings.get(&tau), Some(&y(0)));
        assert_eq!(residual, vec![&(&y(0) + &y(1)) - &AffineExpr::constant(int(1))]);
    }

    #[test]
    fn ragged_and_length_errors() {
        let bad = vec![vec![int(1), int(2)], vec![int(1)]];
        assert!(matches!(LinearSystem::new(bad, vec![y(0), y(1)]), Err(LinearSystemError::Ragged { row: 1, .. })));
        assert!(matches!(LinearSystem::new(identity(2), vec![y(0)]), Err(LinearSystemError::RhsLength { .. })));
        assert!(matches!(LinearSystem::new(vec![], vec![]), Err(LinearSystemError::Empty)));
    }
}
