//! Checks a computed preimage against the network it came from.
//!
//! * Round trip: sample points from every branch, map them through the
//!   network and compare with the target exactly.
//! * Completeness: scan a rational grid of inputs and require every point
//!   that reaches the target to lie in exactly one branch.
//! * Oracle: decide every branch's feasibility a second way, by enumerating
//!   candidate minimal faces with a small dense solver of its own, and compare
//!   with the elimination result.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::VarId;
use crate::network::Network;
use crate::polyhedra::{feasibility, fm_solve, sample_point, InequalitySystem, Sense};
use crate::preimage::{branch_membership, Preimage, SolutionBranch};
use crate::random::random_rational;
use crate::rational::{format_rational, Rational};

/// Inclusive grid `lo, lo + step, …, ≤ hi` in every input coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub lo: Rational,
    pub hi: Rational,
    pub step: Rational,
}

impl GridSpec {
    pub fn axis(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        if !self.step.is_positive() {
            return out;
        }
        let mut v = self.lo.clone();
        while v <= self.hi {
            out.push(v.clone());
            v += &self.step;
        }
        out
    }

    pub fn point_count(&self, dim: usize) -> Option<usize> {
        self.axis().len().checked_pow(dim as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    pub samples_per_branch: usize,
    pub seed: u64,
    /// Hints for sampling are drawn as `p/q` with `|p| ≤ hint_num`, `q ≤ hint_den`.
    pub hint_num: i64,
    pub hint_den: i64,
    pub grid: Option<GridSpec>,
    pub grid_limit: usize,
    pub oracle: bool,
    pub oracle_limit: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples_per_branch: 8,
            seed: 0,
            hint_num: 20,
            hint_den: 4,
            grid: None,
            grid_limit: 1_000_000,
            oracle: false,
            oracle_limit: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundTripFailure {
    pub branch: String,
    pub input: Vec<String>,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletenessMiss {
    pub input: Vec<String>,
    /// Branches that claim the point; a miss has none, an overlap several.
    pub claimed_by: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleDisagreement {
    pub branch: String,
    pub elimination_feasible: bool,
    pub oracle_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VerificationReport {
    pub branches_checked: usize,
    pub samples_per_branch: usize,
    pub samples_drawn: usize,
    /// Branches whose constraints turned out to be empty.
    pub empty_branches: Vec<String>,
    pub round_trip_failures: Vec<RoundTripFailure>,
    pub grid_points: usize,
    pub grid_hits: usize,
    pub completeness_misses: Vec<CompletenessMiss>,
    pub overlaps: Vec<CompletenessMiss>,
    pub oracle_checked: usize,
    pub oracle_skipped: usize,
    pub oracle_disagreements: Vec<OracleDisagreement>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.round_trip_failures.is_empty()
            && self.completeness_misses.is_empty()
            && self.overlaps.is_empty()
            && self.oracle_disagreements.is_empty()
    }
}

fn strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

/// Runs every check enabled in `options`.
pub fn verify(net: &Network, preimage: &Preimage, options: &VerifyOptions) -> VerificationReport {
    let mut report = verify_round_trip(net, preimage, options.samples_per_branch, options);
    if let Some(grid) = &options.grid {
        let g = verify_completeness_grid(net, preimage, grid, options.grid_limit);
        report.grid_points = g.grid_points;
        report.grid_hits = g.grid_hits;
        report.completeness_misses = g.completeness_misses;
        report.overlaps = g.overlaps;
    }
    if options.oracle {
        for b in &preimage.branches {
            let elimination = feasibility(&b.constraints).is_feasible();
            match vertex_oracle(&b.constraints, options.oracle_limit) {
                Some(verdict) => {
                    report.oracle_checked += 1;
                    if verdict.is_some() != elimination {
                        report.oracle_disagreements.push(OracleDisagreement {
                            branch: b.id_string(),
                            elimination_feasible: elimination,
                            oracle_feasible: verdict.is_some(),
                        });
                    }
                }
                None => report.oracle_skipped += 1,
            }
        }
    }
    report
}

fn branch_vars(branch: &SolutionBranch) -> Vec<VarId> {
    branch.variables().into_iter().collect()
}

/// Samples `samples` points per branch and checks `forward(x) = target`
/// exactly. In symbolic mode the output variables are sampled too and the
/// network must reproduce the sampled values.
pub fn verify_round_trip(
    net: &Network,
    preimage: &Preimage,
    samples: usize,
    options: &VerifyOptions,
) -> VerificationReport {
    let mut report = VerificationReport { samples_per_branch: samples, ..Default::default() };
    let fixed = preimage.effective_target();
    for (bi, branch) in preimage.branches.iter().enumerate() {
        report.branches_checked += 1;
        let vars = branch_vars(branch);
        let solved = match fm_solve(&branch.constraints, &vars) {
            Ok(s) => s,
            Err(_) => {
                report.empty_branches.push(branch.id_string());
                continue;
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ (bi as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..samples {
            let hints: BTreeMap<VarId, Rational> =
                vars.iter().map(|v| (*v, random_rational(&mut rng, options.hint_num, options.hint_den))).collect();
            let Some(mut point) = sample_point(&solved, &hints) else {
                report.empty_branches.push(branch.id_string());
                break;
            };
            for v in &vars {
                point.entry(*v).or_insert_with(|| hints[v].clone());
            }
            report.samples_drawn += 1;
            let x = branch.input_map.evaluate(&point).expect("all branch variables are assigned");
            let expected: Vec<Rational> = match &fixed {
                Some(t) => t.clone(),
                None => (0..net.output_dim()).map(|i| point[&VarId::output(i as u32)].clone()).collect(),
            };
            let actual = net.forward(&x).expect("input map has the network's input dimension");
            let holds = branch.constraints.is_satisfied_by(&point).unwrap_or(false);
            if actual != expected || !holds {
                report.round_trip_failures.push(RoundTripFailure {
                    branch: branch.id_string(),
                    input: strings(&x),
                    expected: strings(&expected),
                    actual: strings(&actual),
                });
            }
        }
    }
    report
}

fn grid_points(axis: &[Rational], dim: usize) -> impl Iterator<Item = Vec<Rational>> + '_ {
    let total = axis.len().pow(dim as u32);
    (0..total).map(move |mut k| {
        let mut p = Vec::with_capacity(dim);
        for _ in 0..dim {
            p.push(axis[k % axis.len()].clone());
            k /= axis.len();
        }
        p
    })
}

/// Scans the grid in input space. For a concrete target, every point that
/// reaches it must belong to exactly one branch; in symbolic mode every
/// point must belong to exactly one branch once the output variables are
/// bound to its own image.
pub fn verify_completeness_grid(
    net: &Network,
    preimage: &Preimage,
    grid: &GridSpec,
    limit: usize,
) -> VerificationReport {
    let mut report = VerificationReport::default();
    let axis = grid.axis();
    let dim = net.input_dim();
    match grid.point_count(dim) {
        Some(n) if n <= limit && !axis.is_empty() => {}
        _ => return report,
    }
    let fixed = preimage.effective_target();
    for x in grid_points(&axis, dim) {
        report.grid_points += 1;
        let y = net.forward(&x).expect("grid point has input dimension");
        let bindings: BTreeMap<VarId, Rational> = match &fixed {
            Some(t) if &y != t => continue,
            Some(_) => BTreeMap::new(),
            None => y.iter().enumerate().map(|(i, v)| (VarId::output(i as u32), v.clone())).collect(),
        };
        report.grid_hits += 1;
        let claimed: Vec<String> = preimage
            .branches
            .iter()
            .filter(|b| branch_membership(b, &bindings, &x))
            .map(SolutionBranch::id_string)
            .collect();
        match claimed.len() {
            1 => {}
            0 if preimage.partial => {}
            0 => report.completeness_misses.push(CompletenessMiss { input: strings(&x), claimed_by: claimed }),
            _ => report.overlaps.push(CompletenessMiss { input: strings(&x), claimed_by: claimed }),
        }
    }
    report
}

/// Dense `coeffs · z = rhs` solve by row reduction; undetermined
/// coordinates are set to zero. `None` if inconsistent.
fn dense_solve(mut rows: Vec<Vec<Rational>>, mut rhs: Vec<Rational>, dim: usize) -> Option<Vec<Rational>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..dim {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        rhs.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        rhs[r] *= &inv;
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                let pivot = rows[r].clone();
                for (dst, src) in rows[i].iter_mut().zip(&pivot) {
                    *dst -= &f * src;
                }
                let d = &f * &rhs[r];
                rhs[i] -= d;
            }
        }
        pivots.push(c);
        r += 1;
    }
    if rhs[r..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let mut z = vec![Rational::zero(); dim];
    for (i, c) in pivots.into_iter().enumerate() {
        z[c] = rhs[i].clone();
    }
    Some(z)
}

fn subsets(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    go(0, m, k, &mut Vec::with_capacity(k), f);
}

fn binomial_sum(m: usize, d: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut c: usize = 1;
    for k in 0..=d.min(m) {
        total = total.checked_add(c)?;
        c = c.checked_mul(m - k)? / (k + 1);
    }
    Some(total)
}

/// Independent feasibility decision. Every nonempty polyhedron contains a
/// minimal face `{z : A_I z = b_I}`, so solving every row subset of size up to
/// the dimension as equalities and keeping solutions that satisfy all rows
/// finds a point whenever one exists. Strict rows are handled by maximizing a
/// slack `t ≤ 1` subtracted from them; the system is feasible iff the best
/// candidate has `t > 0`.
///
/// Returns `None` when more than `limit` subsets would be needed, otherwise
/// `Some(witness)` with `witness = None` for an infeasible system.
pub fn vertex_oracle(system: &InequalitySystem, limit: usize) -> Option<Option<BTreeMap<VarId, Rational>>> {
    let vars: Vec<VarId> = system.universe().iter().copied().collect();
    let n = vars.len();
    let strict = system.constraints().iter().any(|c| c.sense == Sense::Gt);
    let dim = n + usize::from(strict);

    // rows: a·z + c ≥ 0
    let mut rows: Vec<(Vec<Rational>, Rational)> = system
        .constraints()
        .iter()
        .map(|c| {
            let mut a: Vec<Rational> = vars.iter().map(|v| c.expr.coeff(v)).collect();
            if strict {
                a.push(if c.sense == Sense::Gt { -Rational::one() } else { Rational::zero() });
            }
            (a, c.expr.constant_term().clone())
        })
        .collect();
    if strict {
        let mut a = vec![Rational::zero(); dim];
        a[n] = -Rational::one();
        rows.push((a, Rational::one()));
    }
    if binomial_sum(rows.len(), dim)? > limit {
        return None;
    }

    let inside = |z: &[Rational]| {
        rows.iter().all(|(a, c)| {
            let v: Rational = a.iter().zip(z).map(|(x, y)| x * y).sum::<Rational>() + c;
            !v.is_negative()
        })
    };
    let mut best: Option<Vec<Rational>> = None;
    for k in 0..=dim.min(rows.len()) {
        subsets(rows.len(), k, &mut |idx| {
            if !strict && best.is_some() {
                return;
            }
            let a = idx.iter().map(|&i| rows[i].0.clone()).collect();
            let b = idx.iter().map(|&i| -&rows[i].1).collect();
            let Some(z) = dense_solve(a, b, dim) else {
                return;
            };
            if !inside(&z) {
                return;
            }
            let better = match &best {
                None => true,
                Some(cur) => strict && z[n] > cur[n],
            };
            if better {
                best = Some(z);
            }
        });
    }
    let witness = best.filter(|z| !strict || z[n].is_positive());
    Some(witness.map(|z| vars.iter().copied().zip(z).collect()))
}

/// Searches a grid of values for a point satisfying the system. Finding one
/// proves feasibility; finding none proves nothing.
pub fn grid_witness(system: &InequalitySystem, grid: &GridSpec, limit: usize) -> Option<BTreeMap<VarId, Rational>> {
    let vars: Vec<VarId> = system.universe().iter().copied().collect();
    let axis = grid.axis();
    if axis.is_empty() || grid.point_count(vars.len()).is_none_or(|n| n > limit) {
        return None;
    }
    let found = grid_points(&axis, vars.len())
        .map(|p| vars.iter().copied().zip(p).collect::<BTreeMap<_, _>>())
        .find(|a| system.is_satisfied_by(a).unwrap_or(false));
    found
}
