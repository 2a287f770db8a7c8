//! Layer-by-layer inversion of a network into a finite union of constrained
//! affine solution branches.
//!
//! Layers are inverted from the output towards the input. Each live branch
//! carries the current frontier (the previous layer's outputs expressed over
//! output, free and slack variables) and the constraints accumulated so far.
//! A piecewise layer of width `w` forks every branch into `2^w` sign
//! patterns; each fork is solved as an affine layer and adds the sign
//! constraints that select its linear piece. With a concrete target, every
//! fork is checked for feasibility immediately and empty ones are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{AffineExpr, AffineMap, FreshVars, VarId, VarKind};
use crate::linsys::{
    gauss_solve, least_squares_project, solve_general, solve_tall, solve_wide, GaussOutcome, LinearSystem,
    LinearSystemError, Matrix, ProjectionResult, SolveOptions,
};
use crate::network::{Activation, Layer, Network};
use crate::polyhedra::{
    deduplicate, feasibility, fm_solve, Feasibility, InequalitySystem, LinearConstraint, SolvedBounds,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreimageError {
    #[error("target has {found} components, network output has {expected}")]
    TargetLength { expected: usize, found: usize },
    #[error("sign patterns need a positive width")]
    ZeroWidth,
    #[error("{0} piecewise units exceed the supported branch space")]
    TooManyPiecewiseUnits(usize),
    #[error("layer {layer}: expected a {expected} activation")]
    ActivationMismatch { layer: usize, expected: &'static str },
    #[error("layer {layer}: right-hand side has {found} entries for {expected} units")]
    RhsLength { layer: usize, expected: usize, found: usize },
    #[error("branch budget exceeded ({0})")]
    BudgetExceeded(String),
    #[error("layer {layer}, branch `{branch}`: {source}")]
    Solver {
        layer: usize,
        branch: String,
        #[source]
        source: LinearSystemError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    NonPositive,
    Positive,
}

/// Regime of every unit of one piecewise layer. Ordered by layer, then mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern {
    pub layer_index: usize,
    pub bits: Vec<Sign>,
}

impl SignPattern {
    fn from_mask(layer_index: usize, width: usize, mask: u128) -> Self {
        let bits = (0..width).map(|i| if (mask >> i) & 1 == 1 { Sign::Positive } else { Sign::NonPositive }).collect();
        SignPattern { layer_index, bits }
    }

    pub fn mask(&self) -> u128 {
        self.bits.iter().enumerate().filter(|(_, s)| **s == Sign::Positive).fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }
}

impl Ord for SignPattern {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.layer_index, self.width(), self.mask()).cmp(&(other.layer_index, other.width(), other.mask()))
    }
}

impl PartialOrd for SignPattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Binary digits with unit 0 as the least significant (rightmost) digit.
impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.bits.iter().rev() {
            f.write_str(if *s == Sign::Positive { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All `2^width` patterns of a layer in increasing bitmask order.
pub fn enumerate_sign_patterns(
    layer_index: usize,
    width: usize,
) -> Result<impl Iterator<Item = SignPattern>, PreimageError> {
    if width == 0 {
        return Err(PreimageError::ZeroWidth);
    }
    if width >= 128 {
        return Err(PreimageError::TooManyPiecewiseUnits(width));
    }
    Ok((0..(1u128 << width)).map(move |m| SignPattern::from_mask(layer_index, width, m)))
}

/// One sign pattern's share of the preimage: `input_map` over output, free
/// and slack variables, valid wherever `constraints` hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionBranch {
    /// One pattern per piecewise layer, in network order.
    pub id: Vec<SignPattern>,
    pub input_map: AffineMap,
    pub constraints: InequalitySystem,
    /// Solved form; present once the constraints were certified feasible.
    pub solved: Option<SolvedBounds>,
    /// Free variables that no longer range freely: solved for in terms of
    /// others while inverting, or pinned to a single value by the constraints.
    pub eliminated: Vec<VarId>,
}

impl SolutionBranch {
    pub fn id_string(&self) -> String {
        self.id.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        let mut vars = self.constraints.universe().clone();
        vars.extend(self.input_map.input_universe().iter().copied());
        vars
    }

    fn vars_of(&self, kind: VarKind) -> Vec<VarId> {
        self.variables().into_iter().filter(|v| v.kind == kind).collect()
    }

    pub fn free_vars(&self) -> Vec<VarId> {
        self.vars_of(VarKind::Free)
    }

    pub fn slack_vars(&self) -> Vec<VarId> {
        self.vars_of(VarKind::Slack)
    }
}

/// Limits on the branch search. Truncation is deterministic: candidates are
/// visited in branch order then bitmask order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BranchBudget {
    /// Maximum number of live branches at any layer.
    pub max_branches: Option<usize>,
    /// Maximum number of layer systems solved in total.
    pub max_forks: Option<usize>,
    /// Fail with [`PreimageError::BudgetExceeded`] instead of returning a partial result.
    pub strict: bool,
}

impl BranchBudget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn max_branches(n: usize) -> Self {
        BranchBudget { max_branches: Some(n), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    pub budget: BranchBudget,
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineStats {
    /// Layer systems solved.
    pub forks: usize,
    /// Largest accumulated constraint list of any branch.
    pub peak_constraints: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preimage {
    /// Concrete constants, or output variables in symbolic mode.
    pub target: Vec<AffineExpr>,
    /// Set when the concrete target was unreachable and was replaced by its
    /// least-squares projection.
    pub projection: Option<ProjectionResult>,
    pub branches: Vec<SolutionBranch>,
    /// Sign-pattern combinations decided: realized branches plus every
    /// combination below a pruned fork.
    pub enumerated_count: u128,
    pub omega_bound: u128,
    pub partial: bool,
    pub stats: EngineStats,
}

impl Preimage {
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn is_symbolic(&self) -> bool {
        self.target.iter().any(|t| !t.is_constant())
    }

    /// The output every branch maps to: the projected target if one was
    /// needed, otherwise the target itself. `None` in symbolic mode.
    pub fn effective_target(&self) -> Option<Vec<Rational>> {
        if let Some(p) = &self.projection {
            return Some(p.projected_target.clone());
        }
        self.target.iter().map(|t| t.is_constant().then(|| t.constant_term().clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerContext {
    pub layer_index: usize,
    /// Allow replacing an unreachable concrete target by its least-squares
    /// projection. Only meaningful for the output layer.
    pub allow_projection: bool,
    pub solve: SolveOptions,
}

impl LayerContext {
    pub fn new(layer_index: usize) -> Self {
        LayerContext { layer_index, allow_projection: false, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInversion {
    /// The layer's inputs.
    pub input_map: AffineMap,
    /// Constraints introduced by this layer, with `bindings` applied.
    pub constraints: Vec<LinearConstraint>,
    /// Variables of the right-hand side that were solved for.
    pub bindings: BTreeMap<VarId, AffineExpr>,
    pub fresh_vars: Vec<VarId>,
    pub projection: Option<ProjectionResult>,
}

fn solver_error(ctx: &LayerContext, source: LinearSystemError) -> PreimageError {
    PreimageError::Solver { layer: ctx.layer_index, branch: String::new(), source }
}

fn drop_ground_true(constraints: Vec<LinearConstraint>) -> Vec<LinearConstraint> {
    deduplicate(constraints.into_iter().filter(|c| c.ground_truth() != Some(true)).collect())
}

/// Inverts an identity or linear layer against `rhs` (the layer's outputs).
pub fn invert_affine_layer(
    layer: &Layer,
    rhs: &[AffineExpr],
    ctx: &LayerContext,
) -> Result<LayerInversion, PreimageError> {
    let (weights, biases): (Matrix, Vec<Rational>) = match layer.activation() {
        Activation::Identity => (layer.weights().clone(), layer.biases().to_vec()),
        Activation::Linear { alpha, beta } => (
            layer.weights().iter().map(|r| r.iter().map(|w| alpha * w).collect()).collect(),
            layer.biases().iter().map(|b| alpha * b + beta).collect(),
        ),
        _ => return Err(PreimageError::ActivationMismatch { layer: ctx.layer_index, expected: "identity or linear" }),
    };
    if rhs.len() != layer.outputs() {
        return Err(PreimageError::RhsLength { layer: ctx.layer_index, expected: layer.outputs(), found: rhs.len() });
    }
    let targets: Vec<AffineExpr> = rhs.iter().zip(&biases).map(|(r, b)| &AffineExpr::constant(-b) + r).collect();
    solve_layer_system(&weights, &biases, targets, ctx)
}

fn solve_layer_system(
    weights: &Matrix,
    biases: &[Rational],
    targets: Vec<AffineExpr>,
    ctx: &LayerContext,
) -> Result<LayerInversion, PreimageError> {
    let (rows, cols) = (weights.len(), weights[0].len());
    let mut fresh = FreshVars::new(ctx.layer_index as u32);
    let err = |e| solver_error(ctx, e);

    if rows == cols {
        let system = LinearSystem::new(weights.clone(), targets.clone()).map_err(err)?;
        if let GaussOutcome::Unique(map) = gauss_solve(&system, ctx.solve).map_err(err)? {
            return Ok(LayerInversion {
                input_map: map,
                constraints: Vec::new(),
                bindings: BTreeMap::new(),
                fresh_vars: Vec::new(),
                projection: None,
            });
        }
    } else if cols > rows {
        match solve_wide(weights, &targets, &mut fresh, ctx.solve) {
            Ok(sol) => {
                return Ok(LayerInversion {
                    input_map: sol.input_map,
                    constraints: Vec::new(),
                    bindings: BTreeMap::new(),
                    fresh_vars: sol.free_vars,
                    projection: None,
                });
            }
            Err(LinearSystemError::RankDeficientAllPivots { .. }) => fresh = FreshVars::new(ctx.layer_index as u32),
            Err(e) => return Err(err(e)),
        }
    } else {
        match solve_tall(weights, &targets, &mut fresh, ctx.solve) {
            Ok(sol) => {
                return Ok(LayerInversion {
                    input_map: sol.input_map,
                    constraints: Vec::new(),
                    bindings: sol.promoted,
                    fresh_vars: sol.fresh_vars,
                    projection: None,
                });
            }
            Err(LinearSystemError::InsufficientFreeVariables { .. }) => {
                fresh = FreshVars::new(ctx.layer_index as u32);
                if ctx.allow_projection && targets.iter().all(AffineExpr::is_constant) {
                    let concrete: Vec<Rational> = targets.iter().map(|t| t.constant_term().clone()).collect();
                    if let Ok(proj) = least_squares_project(weights, &concrete) {
                        log::info!("target unreachable; using its least-squares projection");
                        let projected: Vec<AffineExpr> =
                            proj.projected_target.iter().cloned().map(AffineExpr::constant).collect();
                        let sol = solve_general(weights, &projected, &mut fresh, ctx.solve).map_err(err)?;
                        let output_target: Vec<Rational> =
                            proj.projected_target.iter().zip(biases).map(|(p, b)| p + b).collect();
                        let projection = ProjectionResult {
                            projected_target: output_target,
                            residual: proj.residual,
                            solution: proj.solution,
                        };
                        return Ok(LayerInversion {
                            input_map: sol.input_map,
                            constraints: Vec::new(),
                            bindings: BTreeMap::new(),
                            fresh_vars: sol.fresh_vars,
                            projection: Some(projection),
                        });
                    }
                }
            }
            Err(e) => return Err(err(e)),
        }
    }

    let sol = solve_general(weights, &targets, &mut fresh, ctx.solve).map_err(err)?;
    let constraints = sol.residual.iter().flat_map(LinearConstraint::equality).collect();
    Ok(LayerInversion {
        input_map: sol.input_map,
        constraints: drop_ground_true(constraints),
        bindings: sol.promoted,
        fresh_vars: sol.fresh_vars,
        projection: None,
    })
}

/// `W·x + b` for unit `j`, with the layer inputs replaced by `input_map`.
fn pre_activation(layer: &Layer, j: usize, input_map: &AffineMap) -> AffineExpr {
    let mut e = AffineExpr::constant(layer.biases()[j].clone());
    for (w, x) in layer.weights()[j].iter().zip(input_map.outputs()) {
        e.add_scaled(x, w);
    }
    e
}

fn check_pattern(
    layer: &Layer,
    rhs: &[AffineExpr],
    pattern: &SignPattern,
    ctx: &LayerContext,
) -> Result<(), PreimageError> {
    if rhs.len() != layer.outputs() {
        return Err(PreimageError::RhsLength { layer: ctx.layer_index, expected: layer.outputs(), found: rhs.len() });
    }
    if pattern.width() != layer.outputs() {
        return Err(PreimageError::RhsLength {
            layer: ctx.layer_index,
            expected: layer.outputs(),
            found: pattern.width(),
        });
    }
    Ok(())
}

fn sign_constraints(layer: &Layer, pattern: &SignPattern, input_map: &AffineMap) -> Vec<LinearConstraint> {
    pattern
        .bits
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let pre = pre_activation(layer, j, input_map);
            match s {
                Sign::Positive => LinearConstraint::gt(pre),
                Sign::NonPositive => LinearConstraint::le(&pre),
            }
        })
        .collect()
}

fn identity_layer(layer: &Layer) -> Layer {
    layer.with_activation(Activation::Identity).expect("weights were validated")
}

/// Inverts a PReLU layer for one sign pattern: positive units pass their
/// target through, nonpositive units divide it by `α`.
pub fn invert_prelu_layer(
    layer: &Layer,
    rhs: &[AffineExpr],
    pattern: &SignPattern,
    ctx: &LayerContext,
) -> Result<LayerInversion, PreimageError> {
    let Activation::PRelu { alpha } = layer.activation() else {
        return Err(PreimageError::ActivationMismatch { layer: ctx.layer_index, expected: "prelu" });
    };
    check_pattern(layer, rhs, pattern, ctx)?;
    let inv_alpha = alpha.recip();
    let targets: Vec<AffineExpr> = rhs
        .iter()
        .zip(&pattern.bits)
        .map(|(r, s)| match s {
            Sign::Positive => r.clone(),
            Sign::NonPositive => r.scale(&inv_alpha),
        })
        .collect();
    let ctx = LayerContext { allow_projection: false, ..*ctx };
    let mut inv = invert_affine_layer(&identity_layer(layer), &targets, &ctx)?;
    let signs = sign_constraints(layer, pattern, &inv.input_map);
    inv.constraints.extend(signs);
    inv.constraints = drop_ground_true(inv.constraints);
    Ok(inv)
}

/// Inverts a ReLU layer for one sign pattern. A clamped unit's pre-activation
/// becomes a fresh slack variable `s ≤ 0`, and its consumed output is pinned
/// to zero.
pub fn invert_relu_layer(
    layer: &Layer,
    rhs: &[AffineExpr],
    pattern: &SignPattern,
    ctx: &LayerContext,
) -> Result<LayerInversion, PreimageError> {
    if layer.activation() != &Activation::Relu {
        return Err(PreimageError::ActivationMismatch { layer: ctx.layer_index, expected: "relu" });
    }
    check_pattern(layer, rhs, pattern, ctx)?;
    let mut targets = Vec::with_capacity(rhs.len());
    let mut constraints = Vec::new();
    for (j, (r, s)) in rhs.iter().zip(&pattern.bits).enumerate() {
        match s {
            Sign::Positive => {
                constraints.push(LinearConstraint::gt(r.clone()));
                targets.push(r.clone());
            }
            Sign::NonPositive => {
                let slack = AffineExpr::var(VarId::slack(ctx.layer_index as u32, j as u32));
                constraints.push(LinearConstraint::le(&slack));
                constraints.extend(LinearConstraint::equality(r));
                targets.push(slack);
            }
        }
    }
    let ctx = LayerContext { allow_projection: false, ..*ctx };
    let mut inv = invert_affine_layer(&identity_layer(layer), &targets, &ctx)?;
    let mut all: Vec<LinearConstraint> = constraints.iter().map(|c| c.substitute(&inv.bindings)).collect();
    all.append(&mut inv.constraints);
    all.extend(sign_constraints(layer, pattern, &inv.input_map));
    inv.constraints = drop_ground_true(all);
    Ok(inv)
}

#[derive(Debug, Clone)]
struct BranchState {
    /// Patterns in walking order (output layer first).
    patterns: Vec<SignPattern>,
    frontier: Vec<AffineExpr>,
    constraints: Vec<LinearConstraint>,
    eliminated: Vec<VarId>,
}

impl BranchState {
    fn label(&self) -> String {
        self.patterns.iter().rev().map(ToString::to_string).collect::<Vec<_>>().join("-")
    }
}

enum Resolved {
    Live(BranchState, Option<ProjectionResult>),
    Pruned,
}

fn resolve(
    layer: &Layer,
    state: &BranchState,
    pattern: Option<&SignPattern>,
    ctx: &LayerContext,
    concrete: bool,
) -> Result<Resolved, PreimageError> {
    let inv = match (layer.activation(), pattern) {
        (Activation::PRelu { .. }, Some(p)) => invert_prelu_layer(layer, &state.frontier, p, ctx),
        (Activation::Relu, Some(p)) => invert_relu_layer(layer, &state.frontier, p, ctx),
        _ => invert_affine_layer(layer, &state.frontier, ctx),
    };
    let inv = inv.map_err(|e| match e {
        PreimageError::Solver { layer, source, .. } => {
            let mut label = state.label();
            if let Some(p) = pattern {
                label = if label.is_empty() { p.to_string() } else { format!("{p}-{label}") };
            }
            PreimageError::Solver { layer, branch: label, source }
        }
        other => other,
    })?;

    let mut constraints: Vec<LinearConstraint> =
        state.constraints.iter().map(|c| c.substitute(&inv.bindings)).collect();
    constraints.extend(inv.constraints);
    let constraints = drop_ground_true(constraints);
    if constraints.iter().any(|c| c.ground_truth() == Some(false)) {
        return Ok(Resolved::Pruned);
    }
    if concrete {
        if let Feasibility::Infeasible(_) = feasibility(&InequalitySystem::new(constraints.clone())) {
            return Ok(Resolved::Pruned);
        }
    }
    let mut patterns = state.patterns.clone();
    patterns.extend(pattern.cloned());
    let mut eliminated = state.eliminated.clone();
    eliminated.extend(inv.bindings.keys().filter(|v| v.kind == VarKind::Free));
    Ok(Resolved::Live(
        BranchState { patterns, frontier: inv.input_map.into_outputs(), constraints, eliminated },
        inv.projection,
    ))
}

fn pow2(exp: usize) -> Result<u128, PreimageError> {
    if exp >= 128 {
        return Err(PreimageError::TooManyPiecewiseUnits(exp));
    }
    Ok(1u128 << exp)
}

/// Free variables whose solved range collapses to a single expression.
fn pinned_free_vars(solved: &SolvedBounds) -> Vec<VarId> {
    solved
        .entries
        .iter()
        .filter(|e| e.var.kind == VarKind::Free)
        .filter(|e| e.lower.iter().any(|l| !l.strict && e.upper.iter().any(|u| !u.strict && u.expr == l.expr)))
        .map(|e| e.var)
        .collect()
}

/// Preimage of a concrete target.
pub fn compute_preimage(
    net: &Network,
    target: &[Rational],
    options: &EngineOptions,
) -> Result<Preimage, PreimageError> {
    let exprs: Vec<AffineExpr> = target.iter().cloned().map(AffineExpr::constant).collect();
    run(net, exprs, true, options)
}

/// Preimage with the target kept as output variables `y0, y1, …`. Only
/// ground-false constraints are pruned, so every sign pattern that is not
/// trivially empty is reported.
pub fn compute_symbolic_preimage(net: &Network, options: &EngineOptions) -> Result<Preimage, PreimageError> {
    let exprs = (0..net.output_dim()).map(|i| AffineExpr::var(VarId::output(i as u32))).collect();
    run(net, exprs, false, options)
}

fn run(
    net: &Network,
    target: Vec<AffineExpr>,
    concrete: bool,
    options: &EngineOptions,
) -> Result<Preimage, PreimageError> {
    if target.len() != net.output_dim() {
        return Err(PreimageError::TargetLength { expected: net.output_dim(), found: target.len() });
    }
    let layers = net.layers();
    let omega_bound = pow2(net.piecewise_width())?;
    let budget = options.budget;

    let mut live = vec![BranchState {
        patterns: Vec::new(),
        frontier: target.clone(),
        constraints: Vec::new(),
        eliminated: Vec::new(),
    }];
    let mut enumerated: u128 = 0;
    let mut partial = false;
    let mut stats = EngineStats::default();
    let mut projection = None;

    for (index, layer) in layers.iter().enumerate().rev() {
        let below: usize = layers[..index].iter().filter(|l| l.activation().is_piecewise()).map(Layer::outputs).sum();
        let pruned_weight = pow2(below)?;
        let ctx = LayerContext {
            layer_index: index,
            allow_projection: concrete && index + 1 == layers.len() && !layer.activation().is_piecewise(),
            solve: options.solve,
        };

        let patterns: Vec<Option<SignPattern>> = if layer.activation().is_piecewise() {
            enumerate_sign_patterns(index, layer.outputs())?.map(Some).collect()
        } else {
            vec![None]
        };
        let mut candidates: Vec<(usize, Option<&SignPattern>)> =
            (0..live.len()).flat_map(|s| patterns.iter().map(move |p| (s, p.as_ref()))).collect();
        if let Some(max) = budget.max_forks {
            let remaining = max.saturating_sub(stats.forks);
            if candidates.len() > remaining {
                if budget.strict {
                    return Err(PreimageError::BudgetExceeded(format!("max_forks = {max}")));
                }
                candidates.truncate(remaining);
                partial = true;
            }
        }
        stats.forks += candidates.len();
        log::debug!("layer {index}: {} live branches, {} forks", live.len(), candidates.len());

        let results: Vec<Result<Resolved, PreimageError>> =
            candidates.par_iter().map(|(s, p)| resolve(layer, &live[*s], *p, &ctx, concrete)).collect();

        let mut next = Vec::new();
        let total = results.len();
        for (k, result) in results.into_iter().enumerate() {
            match result? {
                Resolved::Pruned => enumerated += pruned_weight,
                Resolved::Live(state, proj) => {
                    if budget.max_branches.is_some_and(|max| next.len() >= max) {
                        if budget.strict {
                            return Err(PreimageError::BudgetExceeded(format!(
                                "max_branches = {}",
                                budget.max_branches.unwrap_or_default()
                            )));
                        }
                        log::debug!("layer {index}: branch budget reached, {} candidates dropped", total - k);
                        partial = true;
                        break;
                    }
                    if proj.is_some() {
                        projection = proj;
                    }
                    stats.peak_constraints = stats.peak_constraints.max(state.constraints.len());
                    next.push(state);
                }
            }
        }
        live = next;
    }

    let mut branches = Vec::with_capacity(live.len());
    for state in live {
        let mut id = state.patterns;
        id.reverse();
        let input_map = AffineMap::new(state.frontier);
        let mut extra: BTreeSet<VarId> = input_map.input_universe().clone();
        extra.retain(|v| v.kind != VarKind::Output);
        let constraints = InequalitySystem::with_universe(state.constraints, extra);
        let solved = if concrete {
            let keep: Vec<VarId> = constraints.universe().iter().copied().collect();
            match fm_solve(&constraints, &keep) {
                Ok(s) => Some(s),
                Err(_) => {
                    enumerated += 1;
                    continue;
                }
            }
        } else {
            None
        };
        enumerated += 1;
        let mut eliminated: BTreeSet<VarId> = state.eliminated.into_iter().collect();
        if let Some(s) = &solved {
            eliminated.extend(pinned_free_vars(s));
        }
        let eliminated = eliminated.into_iter().collect();
        branches.push(SolutionBranch { id, input_map, constraints, solved, eliminated });
    }
    branches.sort_by(|a, b| a.id.cmp(&b.id));

    Ok(Preimage { target, projection, branches, enumerated_count: enumerated, omega_bound, partial, stats })
}

/// Whether `candidate` lies in the branch for the given output values:
/// decided by adding `input_map = candidate` to the constraints and testing
/// feasibility exactly.
pub fn branch_membership(
    branch: &SolutionBranch,
    target_bindings: &BTreeMap<VarId, Rational>,
    candidate: &[Rational],
) -> bool {
    if candidate.len() != branch.input_map.len() {
        return false;
    }
    let mut system: Vec<LinearConstraint> =
        branch.constraints.constraints().iter().map(|c| c.partial_evaluate(target_bindings)).collect();
    for (e, c) in branch.input_map.outputs().iter().zip(candidate) {
        let mut diff = e.partial_evaluate(target_bindings);
        diff.add_constant(&-c);
        system.extend(LinearConstraint::equality(&diff));
    }
    if system.iter().any(|c| c.ground_truth() == Some(false)) {
        return false;
    }
    let system: Vec<LinearConstraint> = system.into_iter().filter(|c| c.ground_truth().is_none()).collect();
    feasibility(&InequalitySystem::new(system)).is_feasible()
}

/// Output-variable bindings for a concrete target.
pub fn target_bindings(target: &[Rational]) -> BTreeMap<VarId, Rational> {
    target.iter().enumerate().map(|(i, v)| (VarId::output(i as u32), v.clone())).collect()
}

/// Whether any constraint of the branch is a ground contradiction. Used when
/// resolving symbolic preimages against a concrete output later.
pub fn has_ground_contradiction(constraints: &[LinearConstraint]) -> bool {
    constraints.iter().any(|c| c.ground_truth() == Some(false))
}
