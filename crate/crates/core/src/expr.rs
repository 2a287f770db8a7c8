//! Symbolic affine expressions over a typed variable universe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::ser::{Serialize, SerializeMap, SerializeStruct, Serializer};
use thiserror::Error;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    /// Target component `y_i`.
    Output,
    /// Free parameter `τ` introduced when a layer has more unknowns than equations.
    Free,
    /// Input `x_i` of the layer currently being inverted.
    Input,
    /// Nonpositive pre-activation of a clamped ReLU unit.
    Slack,
}

/// Identity of a symbolic variable. `generation` is the index of the layer
/// that introduced it, so variables from different layers never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub kind: VarKind,
    pub generation: u32,
    pub index: u32,
}

impl VarId {
    pub fn output(index: u32) -> Self {
        VarId { kind: VarKind::Output, generation: 0, index }
    }

    pub fn free(generation: u32, index: u32) -> Self {
        VarId { kind: VarKind::Free, generation, index }
    }

    pub fn input(generation: u32, index: u32) -> Self {
        VarId { kind: VarKind::Input, generation, index }
    }

    pub fn slack(generation: u32, index: u32) -> Self {
        VarId { kind: VarKind::Slack, generation, index }
    }

    /// Free and slack variables may be solved for; outputs and inputs may not.
    pub fn is_eliminable(&self) -> bool {
        matches!(self.kind, VarKind::Free | VarKind::Slack)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Output => write!(f, "y{}", self.index),
            VarKind::Free => write!(f, "t{}.{}", self.generation, self.index),
            VarKind::Input => write!(f, "x{}.{}", self.generation, self.index),
            VarKind::Slack => write!(f, "s{}.{}", self.generation, self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid variable name `{0}`")]
pub struct VarParseError(pub String);

impl std::str::FromStr for VarId {
    type Err = VarParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || VarParseError(s.to_string());
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('y') => VarKind::Output,
            Some('t') => VarKind::Free,
            Some('x') => VarKind::Input,
            Some('s') => VarKind::Slack,
            _ => return Err(err()),
        };
        let rest = chars.as_str();
        if kind == VarKind::Output {
            return Ok(VarId::output(rest.parse().map_err(|_| err())?));
        }
        let (gen, idx) = rest.split_once('.').ok_or_else(err)?;
        Ok(VarId { kind, generation: gen.parse().map_err(|_| err())?, index: idx.parse().map_err(|_| err())? })
    }
}

/// Allocates fresh variables of one generation.
#[derive(Debug, Clone)]
pub struct FreshVars {
    generation: u32,
    next_free: u32,
}

impl FreshVars {
    pub fn new(generation: u32) -> Self {
        FreshVars { generation, next_free: 0 }
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn next_free(&mut self) -> VarId {
        let v = VarId::free(self.generation, self.next_free);
        self.next_free += 1;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("variable {0} has no assigned value")]
    MissingVariable(VarId),
}

/// `Σ cᵢ·vᵢ + constant`, stored sparsely. No stored coefficient is zero, so
/// structural equality is mathematical equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AffineExpr {
    terms: BTreeMap<VarId, Rational>,
    constant: Rational,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: Rational) -> Self {
        AffineExpr { terms: BTreeMap::new(), constant: value }
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, Rational::one())
    }

    pub fn term(v: VarId, coeff: Rational) -> Self {
        let mut e = Self::zero();
        e.add_term(v, coeff);
        e
    }

    pub fn from_parts(terms: impl IntoIterator<Item = (VarId, Rational)>, constant: Rational) -> Self {
        let mut e = Self::constant(constant);
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    pub fn terms(&self) -> &BTreeMap<VarId, Rational> {
        &self.terms
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    pub fn coeff(&self, v: &VarId) -> Rational {
        self.terms.get(v).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarId> {
        self.terms.keys()
    }

    pub fn mentions(&self, v: &VarId) -> bool {
        self.terms.contains_key(v)
    }

    pub fn add_term(&mut self, v: VarId, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.terms.entry(v).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn add_constant(&mut self, c: &Rational) {
        self.constant += c;
    }

    /// In-place `self += factor * other`.
    pub fn add_scaled(&mut self, other: &AffineExpr, factor: &Rational) {
        if factor.is_zero() {
            return;
        }
        for (v, c) in &other.terms {
            self.add_term(*v, c * factor);
        }
        self.constant += &other.constant * factor;
    }

    pub fn scale(&self, factor: &Rational) -> AffineExpr {
        if factor.is_zero() {
            return AffineExpr::zero();
        }
        AffineExpr {
            terms: self.terms.iter().map(|(v, c)| (*v, c * factor)).collect(),
            constant: &self.constant * factor,
        }
    }

    /// Removes `v` and returns its coefficient.
    pub fn take_term(&mut self, v: &VarId) -> Rational {
        self.terms.remove(v).unwrap_or_else(Rational::zero)
    }

    /// Replaces every bound variable by its expression. Unbound variables pass
    /// through unchanged.
    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> AffineExpr {
        if bindings.is_empty() || !self.terms.keys().any(|v| bindings.contains_key(v)) {
            return self.clone();
        }
        let mut out = AffineExpr::constant(self.constant.clone());
        for (v, c) in &self.terms {
            match bindings.get(v) {
                Some(replacement) => out.add_scaled(replacement, c),
                None => out.add_term(*v, c.clone()),
            }
        }
        out
    }

    pub fn evaluate(&self, assignment: &BTreeMap<VarId, Rational>) -> Result<Rational, AlgebraError> {
        let mut total = self.constant.clone();
        for (v, c) in &self.terms {
            let value = assignment.get(v).ok_or(AlgebraError::MissingVariable(*v))?;
            total += c * value;
        }
        Ok(total)
    }

    /// Binds the variables present in `assignment`, leaving the rest symbolic.
    pub fn partial_evaluate(&self, assignment: &BTreeMap<VarId, Rational>) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant.clone());
        for (v, c) in &self.terms {
            match assignment.get(v) {
                Some(value) => out.constant += c * value,
                None => out.add_term(*v, c.clone()),
            }
        }
        out
    }

    /// Coefficient of the first variable in `VarId` order.
    pub fn leading_coeff(&self) -> Option<&Rational> {
        self.terms.values().next()
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let mag = c.abs();
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{}*{v}", format_rational(&mag))?;
            }
            first = false;
        }
        if first {
            return write!(f, "{}", format_rational(&self.constant));
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() { "-" } else { "+" };
            write!(f, " {sign} {}", format_rational(&self.constant.abs()))?;
        }
        Ok(())
    }
}

struct TermsMap<'a>(&'a BTreeMap<VarId, Rational>);

impl Serialize for TermsMap<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (v, c) in self.0 {
            map.serialize_entry(&v.to_string(), &format_rational(c))?;
        }
        map.end()
    }
}

impl AffineExpr {
    /// Serializes as `{"<terms_key>": {...}, "const": "p/q"}`.
    pub(crate) fn serialize_with_key<S: Serializer>(
        &self,
        serializer: S,
        terms_key: &'static str,
        extra: Option<(&'static str, &'static str)>,
    ) -> Result<S::Ok, S::Error> {
        let fields = if extra.is_some() { 3 } else { 2 };
        let mut st = serializer.serialize_struct("AffineExpr", fields)?;
        st.serialize_field(terms_key, &TermsMap(&self.terms))?;
        st.serialize_field("const", &format_rational(&self.constant))?;
        if let Some((key, value)) = extra {
            st.serialize_field(key, value)?;
        }
        st.end()
    }
}

impl Serialize for AffineExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.serialize_with_key(serializer, "terms", None)
    }
}

impl Add for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, &Rational::one());
        out
    }
}

impl Sub for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Rational::one());
        out
    }
}

impl Neg for &AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(&-Rational::one())
    }
}

impl Mul<&Rational> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: &Rational) -> AffineExpr {
        self.scale(rhs)
    }
}

/// Ordered list of affine expressions, one per produced component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    outputs: Vec<AffineExpr>,
    input_universe: BTreeSet<VarId>,
}

impl AffineMap {
    pub fn new(outputs: Vec<AffineExpr>) -> Self {
        let input_universe = outputs.iter().flat_map(|e| e.vars().copied()).collect();
        AffineMap { outputs, input_universe }
    }

    pub fn outputs(&self) -> &[AffineExpr] {
        &self.outputs
    }

    pub fn into_outputs(self) -> Vec<AffineExpr> {
        self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input_universe(&self) -> &BTreeSet<VarId> {
        &self.input_universe
    }

    pub fn substitute(&self, bindings: &BTreeMap<VarId, AffineExpr>) -> AffineMap {
        AffineMap::new(self.outputs.iter().map(|e| e.substitute(bindings)).collect())
    }

    pub fn evaluate(&self, assignment: &BTreeMap<VarId, Rational>) -> Result<Vec<Rational>, AlgebraError> {
        self.outputs.iter().map(|e| e.evaluate(assignment)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn x() -> VarId {
        VarId::input(0, 0)
    }
    fn y() -> VarId {
        VarId::output(0)
    }
    fn tau() -> VarId {
        VarId::free(1, 0)
    }

    #[test]
    fn substitute_constant_value() {
        let e = AffineExpr::from_parts([(x(), int(3))], int(1));
        let b = BTreeMap::from([(x(), AffineExpr::constant(int(2)))]);
        assert_eq!(e.substitute(&b), AffineExpr::constant(int(7)));
    }

    #[test]
    fn substitute_cancels() {
        let e = &AffineExpr::var(x()) - &AffineExpr::var(y());
        let b = BTreeMap::from([(x(), AffineExpr::from_parts([(y(), int(1))], int(1)))]);
        assert_eq!(e.substitute(&b), AffineExpr::constant(int(1)));
    }

    #[test]
    fn substitute_two_bindings() {
        let x1 = VarId::input(0, 0);
        let x2 = VarId::input(0, 1);
        let e = AffineExpr::from_parts([(x1, int(1)), (x2, int(1))], int(5));
        let b = BTreeMap::from([(x1, AffineExpr::var(tau())), (x2, AffineExpr::from_parts([(tau(), int(2))], int(1)))]);
        let got = e.substitute(&b);
        assert_eq!(got, AffineExpr::from_parts([(tau(), int(3))], int(6)));
        // both sides at τ = 0 and τ = 1
        for t in [int(0), int(1)] {
            let a = BTreeMap::from([(tau(), t.clone())]);
            let direct = int(0) + &t + (int(2) * &t + int(1)) + int(5);
            assert_eq!(got.evaluate(&a).unwrap(), direct);
        }
    }

    #[test]
    fn evaluate_contracts() {
        assert_eq!(AffineExpr::constant(int(5)).evaluate(&BTreeMap::new()).unwrap(), int(5));
        let e = AffineExpr::from_parts([(x(), frac(1, 2))], frac(1, 3));
        let a = BTreeMap::from([(x(), frac(2, 3))]);
        assert_eq!(e.evaluate(&a).unwrap(), frac(2, 3));
        // other order: 1/3 + (2/3)/2
        assert_eq!(frac(1, 3) + frac(2, 3) / int(2), frac(2, 3));
        let sum = &AffineExpr::var(x()) + &AffineExpr::var(y());
        assert_eq!(sum.evaluate(&a), Err(AlgebraError::MissingVariable(y())));
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let mut e = AffineExpr::term(x(), int(2));
        e.add_term(x(), int(-2));
        assert!(e.is_zero());
        assert_eq!(e, AffineExpr::zero());
        assert!(AffineExpr::term(x(), int(0)).terms().is_empty());
    }

    #[test]
    fn var_names_round_trip() {
        for v in [VarId::output(3), VarId::free(0, 2), VarId::slack(1, 0), VarId::input(2, 5)] {
            assert_eq!(v.to_string().parse::<VarId>().unwrap(), v);
        }
        assert_eq!(VarId::free(0, 2).to_string(), "t0.2");
        assert_eq!(VarId::slack(1, 0).to_string(), "s1.0");
        assert!("q1".parse::<VarId>().is_err());
        assert!("t1".parse::<VarId>().is_err());
    }

    #[test]
    fn display_is_readable() {
        let e = AffineExpr::from_parts([(y(), int(1)), (tau(), frac(-1, 2))], int(-3));
        assert_eq!(e.to_string(), "y0 - 1/2*t1.0 - 3");
        assert_eq!(AffineExpr::constant(frac(-1, 4)).to_string(), "-1/4");
    }

    #[test]
    fn affine_map_tracks_universe() {
        let m = AffineMap::new(vec![AffineExpr::var(y()), AffineExpr::var(tau()), AffineExpr::constant(int(1))]);
        assert_eq!(m.input_universe().len(), 2);
        assert!(m.input_universe().contains(&tau()));
    }
}
