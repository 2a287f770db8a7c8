//! Linear inequality systems and their exact solution by Fourier–Motzkin
//! elimination.
//!
//! Constraints are stored normalized as `expr ≥ 0` or `expr > 0`. Eliminating
//! a variable pairs every constraint where it has a positive coefficient
//! with every constraint where it has a negative one, each scaled to a unit
//! coefficient, and keeps the constraints that do not mention it. Once only
//! the kept variables remain, each is eliminated in turn while its lower and
//! upper bounds are recorded, giving a solved form `max(lower) ≤ v ≤ min(upper)`
//! that can be back-substituted by [`sample_point`].
//!
//! Every derived row remembers the positive combination of input constraints
//! that produced it, so an infeasible system comes with a [`Certificate`]
//! that can be checked without trusting the elimination.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::expr::{AffineExpr, AlgebraError, VarId};
use crate::rational::{int, midpoint, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sense {
    /// `expr ≥ 0`
    Ge,
    /// `expr > 0`
    Gt,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Ge => "ge",
            Sense::Gt => "gt",
        }
    }

    fn combine(self, other: Sense) -> Sense {
        if self == Sense::Gt || other == Sense::Gt {
            Sense::Gt
        } else {
            Sense::Ge
        }
    }

    fn accepts(self, value: &Rational) -> bool {
        match self {
            Sense::Ge => !value.is_negative(),
            Sense::Gt => value.is_positive(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub expr: AffineExpr,
    pub sense: Sense,
}

impl LinearConstraint {
    pub fn ge(expr: AffineExpr) -> Self {
        LinearConstraint { expr, sense: Sense::Ge }
    }

    pub fn gt(expr: AffineExpr) -> Self {
        LinearConstraint { expr, sense: Sense::Gt }
    }

    /// `expr ≤ 0`, stored as `−expr ≥ 0`.
    pub fn le(expr: &AffineExpr) -> Self {
        Self::ge(-expr)
    }

    /// `expr < 0`, stored as `−expr > 0`.
    pub fn lt(expr: &AffineExpr) -> Self {
        Self::gt(-expr)
    }

    /// `expr = 0` as the pair `expr ≥ 0`, `−expr ≥ 0`.
    pub fn equality(expr: &AffineExpr) -> [Self; 2] {
        [Self::ge(expr.clone()), Self::le(expr)]
    }

    pub fn is_ground(&self) -> bool {
        self.expr.is_constant()
    }

    /// `Some(truth)` for a constraint without variables.
    pub fn ground_truth(&self) -> Option<bool> {
        self.is_ground().then(|| self.sense.accepts(self.expr.constant_term()))
    }

    pub fn holds(&self, assignment: &BTreeMap<VarId, Rational>) -> Result<bool, AlgebraError> {
        Ok(self.sense.accepts(&self.expr.evaluate(assignment)?))
    }

    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> Self {
        LinearConstraint { expr: self.expr.substitute(bindings), sense: self.sense }
    }

    pub fn partial_evaluate(&self, assignment: &BTreeMap<VarId, Rational>) -> Self {
        LinearConstraint { expr: self.expr.partial_evaluate(assignment), sense: self.sense }
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.sense {
            Sense::Ge => ">=",
            Sense::Gt => ">",
        };
        write!(f, "{} {op} 0", self.expr)
    }
}

impl Serialize for LinearConstraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.expr.serialize_with_key(serializer, "coeffs", Some(("sense", self.sense.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InequalitySystem {
    constraints: Vec<LinearConstraint>,
    universe: BTreeSet<VarId>,
}

impl InequalitySystem {
    pub fn new(constraints: Vec<LinearConstraint>) -> Self {
        Self::with_universe(constraints, [])
    }

    /// Builds a system whose universe also includes `extra` variables that
    /// may not appear in any constraint.
    pub fn with_universe(constraints: Vec<LinearConstraint>, extra: impl IntoIterator<Item = VarId>) -> Self {
        let mut universe: BTreeSet<VarId> = extra.into_iter().collect();
        universe.extend(constraints.iter().flat_map(|c| c.expr.vars().copied()));
        InequalitySystem { constraints, universe }
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn universe(&self) -> &BTreeSet<VarId> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn push(&mut self, constraint: LinearConstraint) {
        self.universe.extend(constraint.expr.vars().copied());
        self.constraints.push(constraint);
    }

    pub fn extend(&mut self, constraints: impl IntoIterator<Item = LinearConstraint>) {
        for c in constraints {
            self.push(c);
        }
    }

    pub fn is_satisfied_by(&self, assignment: &BTreeMap<VarId, Rational>) -> Result<bool, AlgebraError> {
        for c in &self.constraints {
            if !c.holds(assignment)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A constraint together with the positive multipliers of the input
/// constraints it was derived from.
#[derive(Debug, Clone)]
struct Row {
    expr: AffineExpr,
    sense: Sense,
    origin: BTreeMap<usize, Rational>,
}

impl Row {
    fn scaled(&self, factor: &Rational) -> Row {
        Row {
            expr: self.expr.scale(factor),
            sense: self.sense,
            origin: self.origin.iter().map(|(i, m)| (*i, m * factor)).collect(),
        }
    }

    fn normalized(self) -> Row {
        match self.expr.leading_coeff() {
            Some(lead) if !lead.abs().is_one() => {
                let factor = lead.abs().recip();
                self.scaled(&factor)
            }
            _ => self,
        }
    }

    fn constraint(&self) -> LinearConstraint {
        LinearConstraint { expr: self.expr.clone(), sense: self.sense }
    }
}

/// Sum of a positive-coefficient row and a negative-coefficient row, each
/// scaled so `var` cancels.
fn combine(plus: &Row, minus: &Row, var: &VarId) -> Row {
    let a = plus.expr.coeff(var).recip();
    let b = minus.expr.coeff(var).abs().recip();
    let mut expr = plus.expr.scale(&a);
    expr.add_scaled(&minus.expr, &b);
    let mut origin = plus.origin.iter().map(|(i, m)| (*i, m * &a)).collect::<BTreeMap<_, _>>();
    for (i, m) in &minus.origin {
        *origin.entry(*i).or_insert_with(Rational::zero) += m * &b;
    }
    Row { expr, sense: plus.sense.combine(minus.sense), origin }
}

struct Partition<'a> {
    plus: Vec<&'a Row>,
    minus: Vec<&'a Row>,
    other: Vec<&'a Row>,
}

fn partition<'a>(rows: &'a [Row], var: &VarId) -> Partition<'a> {
    let mut p = Partition { plus: Vec::new(), minus: Vec::new(), other: Vec::new() };
    for row in rows {
        let c = row.expr.coeff(var);
        if c.is_positive() {
            p.plus.push(row);
        } else if c.is_negative() {
            p.minus.push(row);
        } else {
            p.other.push(row);
        }
    }
    p
}

/// A single textbook elimination step: `|plus|·|minus| + |other|` rows.
fn eliminate_all_pairs(rows: &[Row], var: &VarId) -> Vec<Row> {
    let p = partition(rows, var);
    let mut out = Vec::with_capacity(p.plus.len() * p.minus.len() + p.other.len());
    for plus in &p.plus {
        for minus in &p.minus {
            out.push(combine(plus, minus, var));
        }
    }
    out.extend(p.other.into_iter().cloned());
    out
}

/// Finds `e ≥ 0` and `−e ≥ 0` (an implicit equality) among the rows that
/// mention `var`. Rows must already be normalized.
fn equality_pair(p: &Partition<'_>) -> Option<(usize, usize)> {
    let minus_index: HashMap<&AffineExpr, usize> =
        p.minus.iter().enumerate().filter(|(_, r)| r.sense == Sense::Ge).map(|(i, r)| (&r.expr, i)).collect();
    p.plus.iter().enumerate().filter(|(_, r)| r.sense == Sense::Ge).find_map(|(i, r)| {
        let negated = -&r.expr;
        minus_index.get(&negated).map(|&j| (i, j))
    })
}

/// Elimination that substitutes through an implicit equality when one is
/// present; the pairwise products are then redundant.
fn eliminate_rows(rows: &[Row], var: &VarId) -> Vec<Row> {
    let p = partition(rows, var);
    let Some((pi, mi)) = equality_pair(&p) else {
        return eliminate_all_pairs(rows, var);
    };
    let mut out = Vec::with_capacity(p.plus.len() + p.minus.len() + p.other.len());
    for (i, plus) in p.plus.iter().enumerate() {
        if i != pi {
            out.push(combine(plus, p.minus[mi], var));
        }
    }
    for (j, minus) in p.minus.iter().enumerate() {
        if j != mi {
            out.push(combine(p.plus[pi], minus, var));
        }
    }
    out.extend(p.other.into_iter().cloned());
    out
}

/// Net change in row count when eliminating `var`.
fn elimination_cost(rows: &[Row], var: &VarId) -> i64 {
    let p = partition(rows, var);
    let (pl, mi) = (p.plus.len() as i64, p.minus.len() as i64);
    if equality_pair(&p).is_some() {
        return -2;
    }
    pl * mi - (pl + mi)
}

fn dedup_rows(rows: Vec<Row>) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::with_capacity(rows.len());
    let mut index: HashMap<BTreeMap<VarId, Rational>, usize> = HashMap::new();
    for row in rows {
        let row = row.normalized();
        match index.get(row.expr.terms()) {
            Some(&at) => {
                let kept = &out[at];
                let tighter = row.expr.constant_term() < kept.expr.constant_term()
                    || (row.expr.constant_term() == kept.expr.constant_term()
                        && row.sense == Sense::Gt
                        && kept.sense == Sense::Ge);
                if tighter {
                    out[at] = row;
                }
            }
            None => {
                index.insert(row.expr.terms().clone(), out.len());
                out.push(row);
            }
        }
    }
    out
}

/// Drops syntactic duplicates and constraints dominated by one with the same
/// (scale-normalized) coefficients and a tighter constant. First occurrence
/// order is kept.
pub fn deduplicate(constraints: Vec<LinearConstraint>) -> Vec<LinearConstraint> {
    let rows = constraints.into_iter().map(|c| Row { expr: c.expr, sense: c.sense, origin: BTreeMap::new() }).collect();
    dedup_rows(rows).iter().map(Row::constraint).collect()
}

/// Raw output of one elimination step, before redundancy removal.
#[derive(Debug, Clone)]
pub struct EliminationStep {
    pub system: InequalitySystem,
    pub plus: usize,
    pub minus: usize,
    pub other: usize,
}

fn input_rows(system: &InequalitySystem) -> Vec<Row> {
    system
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| Row { expr: c.expr.clone(), sense: c.sense, origin: BTreeMap::from([(i, Rational::one())]) })
        .collect()
}

fn system_without(rows: &[Row], universe: &BTreeSet<VarId>, var: &VarId) -> InequalitySystem {
    let mut universe = universe.clone();
    universe.remove(var);
    InequalitySystem { constraints: rows.iter().map(Row::constraint).collect(), universe }
}

/// One Fourier–Motzkin step without deduplication.
pub fn fm_eliminate_step(system: &InequalitySystem, var: &VarId) -> EliminationStep {
    let rows = input_rows(system);
    let p = partition(&rows, var);
    let (plus, minus, other) = (p.plus.len(), p.minus.len(), p.other.len());
    let out = eliminate_all_pairs(&rows, var);
    EliminationStep { system: system_without(&out, &system.universe, var), plus, minus, other }
}

/// Projects the solution set onto the universe minus `var`.
pub fn fm_eliminate(system: &InequalitySystem, var: &VarId) -> InequalitySystem {
    let rows = input_rows(system);
    let out = dedup_rows(eliminate_all_pairs(&rows, var));
    system_without(&out, &system.universe, var)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bound {
    pub expr: AffineExpr,
    pub strict: bool,
}

/// Solved-form bounds of one variable, `max(lower) ≤ var ≤ min(upper)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBounds {
    pub var: VarId,
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SolvedBounds {
    /// In elimination order; each entry references only later entries or
    /// unconstrained variables.
    pub entries: Vec<VarBounds>,
    pub unconstrained: BTreeSet<VarId>,
}

impl SolvedBounds {
    pub fn elimination_order(&self) -> impl Iterator<Item = &VarId> {
        self.entries.iter().map(|e| &e.var)
    }

    pub fn get(&self, var: &VarId) -> Option<&VarBounds> {
        self.entries.iter().find(|e| &e.var == var)
    }
}

/// Positive combination of input constraints that yields a violated ground
/// constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// `(constraint index, multiplier)`, multipliers strictly positive.
    pub multipliers: Vec<(usize, Rational)>,
    pub derived: LinearConstraint,
}

impl Certificate {
    /// Recomputes the combination against `system` and checks that it is a
    /// contradiction.
    pub fn verify(&self, system: &InequalitySystem) -> bool {
        let mut sum = AffineExpr::zero();
        let mut strict = false;
        for (i, m) in &self.multipliers {
            let Some(c) = system.constraints.get(*i) else {
                return false;
            };
            if !m.is_positive() {
                return false;
            }
            strict |= c.sense == Sense::Gt;
            sum.add_scaled(&c.expr, m);
        }
        if !sum.is_constant() || sum != self.derived.expr {
            return false;
        }
        let c = sum.constant_term();
        if strict {
            !c.is_positive()
        } else {
            c.is_negative()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasible {
    pub certificate: Certificate,
}

fn certificate_of(row: &Row) -> Certificate {
    Certificate {
        multipliers: row.origin.iter().filter(|(_, m)| !m.is_zero()).map(|(i, m)| (*i, m.clone())).collect(),
        derived: row.constraint(),
    }
}

/// Removes ground-true rows; fails on the first ground-false one.
fn check_ground(rows: Vec<Row>) -> Result<Vec<Row>, Infeasible> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.expr.is_constant() {
            if !row.sense.accepts(row.expr.constant_term()) {
                return Err(Infeasible { certificate: certificate_of(&row) });
            }
        } else {
            out.push(row);
        }
    }
    Ok(out)
}

fn bounds_of(rows: &[Row], var: &VarId) -> VarBounds {
    let mut vb = VarBounds { var: *var, lower: Vec::new(), upper: Vec::new() };
    for row in rows {
        let a = row.expr.coeff(var);
        if a.is_zero() {
            continue;
        }
        let mut rest = row.expr.clone();
        rest.take_term(var);
        let bound = Bound { expr: rest.scale(&(-a.recip())), strict: row.sense == Sense::Gt };
        if a.is_positive() {
            vb.lower.push(bound);
        } else {
            vb.upper.push(bound);
        }
    }
    vb
}

fn pick_var<'a>(rows: &[Row], candidates: impl Iterator<Item = &'a VarId>) -> Option<VarId> {
    candidates
        .map(|v| (elimination_cost(rows, v), v))
        .fold(None, |best: Option<(i64, &VarId)>, (cost, v)| match best {
            Some((bc, _)) if bc <= cost => best,
            _ => Some((cost, v)),
        })
        .map(|(_, v)| *v)
}

/// Eliminates every variable outside `keep`, then solves for the kept
/// variables in a back-substitutable order.
pub fn fm_solve(system: &InequalitySystem, keep: &[VarId]) -> Result<SolvedBounds, Infeasible> {
    let keep_set: BTreeSet<VarId> = keep.iter().copied().collect();
    let mut rows = check_ground(dedup_rows(input_rows(system)))?;

    loop {
        let present: BTreeSet<VarId> = rows.iter().flat_map(|r| r.expr.vars().copied()).collect();
        let Some(var) = pick_var(&rows, present.iter().filter(|v| !keep_set.contains(v))) else {
            break;
        };
        log::trace!("fm: eliminating {var} from {} rows", rows.len());
        rows = check_ground(dedup_rows(eliminate_rows(&rows, &var)))?;
    }

    let mut solved = SolvedBounds::default();
    let mut pending: Vec<VarId> = Vec::new();
    for v in keep {
        if !pending.contains(v) {
            pending.push(*v);
        }
    }
    while !pending.is_empty() {
        let present: BTreeSet<VarId> = rows.iter().flat_map(|r| r.expr.vars().copied()).collect();
        pending.retain(|v| {
            let live = present.contains(v);
            if !live {
                solved.unconstrained.insert(*v);
            }
            live
        });
        let Some(var) = pick_var(&rows, pending.iter()) else {
            break;
        };
        pending.retain(|v| v != &var);
        solved.entries.push(bounds_of(&rows, &var));
        rows = check_ground(dedup_rows(eliminate_rows(&rows, &var)))?;
    }
    debug_assert!(rows.is_empty());
    Ok(solved)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible(Certificate),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

pub fn feasibility(system: &InequalitySystem) -> Feasibility {
    match fm_solve(system, &[]) {
        Ok(_) => Feasibility::Feasible,
        Err(Infeasible { certificate }) => Feasibility::Infeasible(certificate),
    }
}

/// Evaluated extreme of a bound list: `(value, strict)`, strict when any
/// entry attaining the extreme is strict.
fn extreme(bounds: &[Bound], assignment: &BTreeMap<VarId, Rational>, upper: bool) -> Option<(Rational, bool)> {
    let mut best: Option<(Rational, bool)> = None;
    for b in bounds {
        let value = b.expr.evaluate(assignment).expect("solved bounds reference assigned variables");
        best = match best {
            None => Some((value, b.strict)),
            Some((bv, bs)) => {
                let better = if upper { value < bv } else { value > bv };
                if better {
                    Some((value, b.strict))
                } else if value == bv {
                    Some((bv, bs || b.strict))
                } else {
                    Some((bv, bs))
                }
            }
        };
    }
    best
}

fn inside(value: &Rational, lo: &Option<(Rational, bool)>, hi: &Option<(Rational, bool)>) -> bool {
    let above = match lo {
        Some((l, true)) => value > l,
        Some((l, false)) => value >= l,
        None => true,
    };
    let below = match hi {
        Some((h, true)) => value < h,
        Some((h, false)) => value <= h,
        None => true,
    };
    above && below
}

/// Back-substitutes a solved form into a concrete point. Each variable takes
/// its hint when the hint lies inside its interval, otherwise the midpoint
/// (or `lower + 1` / `upper − 1` for half-bounded intervals). Returns `None`
/// if an interval is empty.
pub fn sample_point(bounds: &SolvedBounds, hints: &BTreeMap<VarId, Rational>) -> Option<BTreeMap<VarId, Rational>> {
    let mut assignment = BTreeMap::new();
    for v in &bounds.unconstrained {
        assignment.insert(*v, hints.get(v).cloned().unwrap_or_else(Rational::zero));
    }
    for entry in bounds.entries.iter().rev() {
        let lo = extreme(&entry.lower, &assignment, false);
        let hi = extreme(&entry.upper, &assignment, true);
        if let (Some((l, ls)), Some((h, hs))) = (&lo, &hi) {
            if l > h || (l == h && (*ls || *hs)) {
                return None;
            }
        }
        let value = match hints.get(&entry.var) {
            Some(h) if inside(h, &lo, &hi) => h.clone(),
            _ => match (&lo, &hi) {
                (Some((l, _)), Some((h, _))) if l == h => l.clone(),
                (Some((l, _)), Some((h, _))) => midpoint(l, h),
                (Some((l, _)), None) => l + int(1),
                (None, Some((h, _))) => h - int(1),
                (None, None) => Rational::zero(),
            },
        };
        assignment.insert(entry.var, value);
    }
    Some(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn x() -> VarId {
        VarId::free(0, 0)
    }
    fn y() -> VarId {
        VarId::free(0, 1)
    }
    fn lin(terms: &[(VarId, i64)], c: i64) -> AffineExpr {
        AffineExpr::from_parts(terms.iter().map(|(v, k)| (*v, int(*k))), int(c))
    }

    #[test]
    fn eliminate_to_tautology() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], -1)),
            LinearConstraint::ge(lin(&[(x(), -1)], 3)),
        ]);
        let out = fm_eliminate(&sys, &x());
        assert_eq!(out.constraints(), &[LinearConstraint::ge(AffineExpr::constant(int(2)))]);
        assert!(out.universe().is_empty());
    }

    #[test]
    fn eliminate_to_contradiction() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], -3)),
            LinearConstraint::ge(lin(&[(x(), -1)], 1)),
        ]);
        let out = fm_eliminate(&sys, &x());
        assert_eq!(out.constraints(), &[LinearConstraint::ge(AffineExpr::constant(int(-2)))]);
    }

    #[test]
    fn eliminate_two_dimensional() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1), (y(), 1)], 0)),
            LinearConstraint::ge(lin(&[(x(), 1), (y(), -1)], 0)),
            LinearConstraint::ge(lin(&[(x(), -1)], 2)),
        ]);
        let out = fm_eliminate(&sys, &x());
        assert_eq!(
            out.constraints(),
            &[LinearConstraint::ge(lin(&[(y(), 1)], 2)), LinearConstraint::ge(lin(&[(y(), -1)], 2))]
        );
        // grid oracle: y ∈ [−3, 3] step 1/4 extends to some x on a 1/4 grid
        for k in -12..=12 {
            let yv = frac(k, 4);
            let projected = out.constraints().iter().all(|c| c.holds(&BTreeMap::from([(y(), yv.clone())])).unwrap());
            let extends = (-40..=40).any(|j| {
                let a = BTreeMap::from([(x(), frac(j, 4)), (y(), yv.clone())]);
                sys.is_satisfied_by(&a).unwrap()
            });
            assert_eq!(projected, extends, "y = {yv}");
        }
    }

    #[test]
    fn solve_single_lower_bound() {
        let sys = InequalitySystem::new(vec![LinearConstraint::ge(lin(&[(x(), 1)], 0))]);
        let solved = fm_solve(&sys, &[x()]).unwrap();
        let b = solved.get(&x()).unwrap();
        assert_eq!(b.lower, vec![Bound { expr: AffineExpr::zero(), strict: false }]);
        assert!(b.upper.is_empty());
    }

    #[test]
    fn solve_interval_max_min() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], -1)),
            LinearConstraint::ge(lin(&[(x(), 1)], -2)),
            LinearConstraint::ge(lin(&[(x(), -1)], 5)),
        ]);
        let solved = fm_solve(&sys, &[x()]).unwrap();
        let b = solved.get(&x()).unwrap();
        let empty = BTreeMap::new();
        assert_eq!(extreme(&b.lower, &empty, false), Some((int(2), false)));
        assert_eq!(extreme(&b.upper, &empty, true), Some((int(5), false)));
        // enumeration oracle over integer candidates 0..6
        let members: Vec<i64> =
            (0..=6).filter(|&k| sys.is_satisfied_by(&BTreeMap::from([(x(), int(k))])).unwrap()).collect();
        assert_eq!(members, vec![2, 3, 4, 5]);
    }

    #[test]
    fn infeasible_pair_has_certificate() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1), (y(), 1)], 0)),
            LinearConstraint::ge(lin(&[(x(), -1), (y(), -1)], -1)),
        ]);
        let err = fm_solve(&sys, &[]).unwrap_err();
        assert_eq!(err.certificate.derived, LinearConstraint::ge(AffineExpr::constant(int(-1))));
        assert!(err.certificate.verify(&sys));
    }

    #[test]
    fn feasibility_contracts() {
        assert!(feasibility(&InequalitySystem::default()).is_feasible());
        let sys = InequalitySystem::new(vec![
            LinearConstraint::gt(lin(&[(x(), 1)], 0)),
            LinearConstraint::ge(lin(&[(x(), -1)], 0)),
        ]);
        match feasibility(&sys) {
            Feasibility::Infeasible(cert) => {
                assert_eq!(cert.derived, LinearConstraint::gt(AffineExpr::zero()));
                assert!(cert.verify(&sys));
            }
            Feasibility::Feasible => panic!("0 > 0 must be refuted"),
        }
        let ok = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], 0)),
            LinearConstraint::ge(lin(&[(x(), -1)], 0)),
        ]);
        assert!(feasibility(&ok).is_feasible());
    }

    #[test]
    fn tampered_certificate_is_rejected() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], -3)),
            LinearConstraint::ge(lin(&[(x(), -1)], 1)),
        ]);
        let Feasibility::Infeasible(mut cert) = feasibility(&sys) else { panic!() };
        assert!(cert.verify(&sys));
        cert.multipliers[0].1 = int(2);
        assert!(!cert.verify(&sys));
    }

    #[test]
    fn sample_policies() {
        let interval = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1)], -2)),
            LinearConstraint::ge(lin(&[(x(), -1)], 5)),
        ]);
        let b = fm_solve(&interval, &[x()]).unwrap();
        assert_eq!(sample_point(&b, &BTreeMap::new()).unwrap()[&x()], frac(7, 2));
        assert_eq!(sample_point(&b, &BTreeMap::from([(x(), int(4))])).unwrap()[&x()], int(4));
        assert_eq!(sample_point(&b, &BTreeMap::from([(x(), int(9))])).unwrap()[&x()], frac(7, 2));

        let half = InequalitySystem::new(vec![LinearConstraint::ge(lin(&[(x(), 1)], -2))]);
        let b = fm_solve(&half, &[x()]).unwrap();
        assert_eq!(sample_point(&b, &BTreeMap::new()).unwrap()[&x()], int(3));

        let open = InequalitySystem::new(vec![
            LinearConstraint::gt(lin(&[(x(), 1)], 0)),
            LinearConstraint::gt(lin(&[(x(), -1)], 1)),
        ]);
        let b = fm_solve(&open, &[x()]).unwrap();
        let p = sample_point(&b, &BTreeMap::new()).unwrap();
        assert_eq!(p[&x()], frac(1, 2));
        assert!(open.is_satisfied_by(&p).unwrap());
        // boundary hints are rejected for strict bounds
        let p = sample_point(&b, &BTreeMap::from([(x(), int(0))])).unwrap();
        assert_eq!(p[&x()], frac(1, 2));
    }

    #[test]
    fn unconstrained_and_dependent_variables() {
        let sys = InequalitySystem::with_universe(
            vec![LinearConstraint::ge(lin(&[(x(), 1), (y(), -1)], 0))],
            [VarId::free(0, 2)],
        );
        let keep = [x(), y(), VarId::free(0, 2)];
        let solved = fm_solve(&sys, &keep).unwrap();
        assert!(solved.unconstrained.contains(&VarId::free(0, 2)));
        let hints = BTreeMap::from([(y(), int(4)), (x(), int(1)), (VarId::free(0, 2), int(7))]);
        let p = sample_point(&solved, &hints).unwrap();
        assert!(sys.is_satisfied_by(&p).unwrap());
        assert_eq!(p[&VarId::free(0, 2)], int(7));
    }

    #[test]
    fn equality_pairs_are_substituted() {
        // x = y + 1, x ≥ 0, y ≤ 3
        let sys = InequalitySystem::new(vec![
            LinearConstraint::equality(&lin(&[(x(), 1), (y(), -1)], -1))[0].clone(),
            LinearConstraint::equality(&lin(&[(x(), 1), (y(), -1)], -1))[1].clone(),
            LinearConstraint::ge(lin(&[(x(), 1)], 0)),
            LinearConstraint::ge(lin(&[(y(), -1)], 3)),
        ]);
        let solved = fm_solve(&sys, &[x(), y()]).unwrap();
        for h in -6..=6 {
            let hints = BTreeMap::from([(x(), int(h)), (y(), int(h))]);
            let p = sample_point(&solved, &hints).unwrap();
            assert!(sys.is_satisfied_by(&p).unwrap());
        }
    }

    #[test]
    fn dedup_keeps_tightest() {
        let got = deduplicate(vec![
            LinearConstraint::ge(lin(&[(x(), 2)], -2)),
            LinearConstraint::ge(lin(&[(x(), 1)], -3)),
            LinearConstraint::ge(lin(&[(x(), 1)], -1)),
        ]);
        assert_eq!(got, vec![LinearConstraint::ge(lin(&[(x(), 1)], -3))]);
        let strict =
            deduplicate(vec![LinearConstraint::ge(lin(&[(x(), 1)], 0)), LinearConstraint::gt(lin(&[(x(), 1)], 0))]);
        assert_eq!(strict, vec![LinearConstraint::gt(lin(&[(x(), 1)], 0))]);
    }

    #[test]
    fn growth_law_small() {
        let sys = InequalitySystem::new(vec![
            LinearConstraint::ge(lin(&[(x(), 1), (y(), 1)], 0)),
            LinearConstraint::ge(lin(&[(x(), 2)], 1)),
            LinearConstraint::ge(lin(&[(x(), -1)], 4)),
            LinearConstraint::ge(lin(&[(x(), -3), (y(), 1)], 0)),
            LinearConstraint::gt(lin(&[(y(), 1)], 0)),
        ]);
        let step = fm_eliminate_step(&sys, &x());
        assert_eq!((step.plus, step.minus, step.other), (2, 2, 1));
        assert_eq!(step.system.len(), 5);
    }
}
