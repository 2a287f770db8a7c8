//! JSON and text renderings of a preimage.
//!
//! The JSON document is written field by field in a fixed order so that
//! identical runs produce byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::expr::{AffineExpr, AffineMap, VarId, VarKind};
use crate::linsys::ProjectionResult;
use crate::network::Network;
use crate::polyhedra::{fm_solve, Bound, InequalitySystem, LinearConstraint, Sense, SolvedBounds};
use crate::preimage::{EngineStats, Preimage, Sign, SignPattern, SolutionBranch};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::verify::VerificationReport;

#[derive(Serialize)]
struct BoundsDoc<'a> {
    var: String,
    lower: &'a [Bound],
    upper: &'a [Bound],
}

#[derive(Serialize)]
struct BranchDoc<'a> {
    id: String,
    input_map: &'a [AffineExpr],
    constraints: &'a [LinearConstraint],
    free_vars: Vec<String>,
    slack_vars: Vec<String>,
    eliminated_vars: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<BoundsDoc<'a>>>,
}

#[derive(Serialize)]
struct PreimageDoc<'a> {
    target: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projected_target: Option<Vec<String>>,
    omega_bound: u128,
    enumerated: u128,
    partial: bool,
    branches: Vec<BranchDoc<'a>>,
}

#[derive(Serialize)]
struct VerifiedDoc<'a> {
    preimage: PreimageDoc<'a>,
    verification: &'a VerificationReport,
}

fn names(vars: impl IntoIterator<Item = VarId>) -> Vec<String> {
    vars.into_iter().map(|v| v.to_string()).collect()
}

fn bounds_doc(solved: &SolvedBounds) -> Vec<BoundsDoc<'_>> {
    solved.entries.iter().map(|e| BoundsDoc { var: e.var.to_string(), lower: &e.lower, upper: &e.upper }).collect()
}

fn branch_doc(b: &SolutionBranch) -> BranchDoc<'_> {
    BranchDoc {
        id: b.id_string(),
        input_map: b.input_map.outputs(),
        constraints: b.constraints.constraints(),
        free_vars: names(b.free_vars()),
        slack_vars: names(b.slack_vars()),
        eliminated_vars: names(b.eliminated.iter().copied()),
        bounds: b.solved.as_ref().map(bounds_doc),
    }
}

fn preimage_doc(p: &Preimage) -> PreimageDoc<'_> {
    PreimageDoc {
        target: p.target.iter().map(ToString::to_string).collect(),
        projected_target: p.projection.as_ref().map(|pr| pr.projected_target.iter().map(format_rational).collect()),
        omega_bound: p.omega_bound,
        enumerated: p.enumerated_count,
        partial: p.partial,
        branches: p.branches.iter().map(branch_doc).collect(),
    }
}

pub fn to_json(preimage: &Preimage) -> String {
    serde_json::to_string_pretty(&preimage_doc(preimage)).expect("document is serializable")
}

pub fn to_json_with_report(preimage: &Preimage, report: &VerificationReport) -> String {
    let doc = VerifiedDoc { preimage: preimage_doc(preimage), verification: report };
    serde_json::to_string_pretty(&doc).expect("document is serializable")
}

pub fn report_to_json(report: &VerificationReport) -> String {
    serde_json::to_string_pretty(report).expect("report is serializable")
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

fn bound_line(var: &VarId, lower: &[Bound], upper: &[Bound]) -> String {
    let side = |bounds: &[Bound], func: &str| -> Option<(String, &'static str)> {
        if bounds.is_empty() {
            return None;
        }
        let strict = bounds.iter().all(|b| b.strict);
        let mixed = !strict && bounds.iter().any(|b| b.strict);
        let items = join(bounds.iter().map(|b| {
            if mixed && b.strict {
                format!("{} (strict)", b.expr)
            } else {
                b.expr.to_string()
            }
        }));
        let text = if bounds.len() == 1 { items } else { format!("{func}({items})") };
        Some((text, if strict { "<" } else { "<=" }))
    };
    let mut line = String::new();
    if let Some((lo, op)) = side(lower, "max") {
        line.push_str(&format!("{lo} {op} "));
    }
    line.push_str(&var.to_string());
    if let Some((hi, op)) = side(upper, "min") {
        line.push_str(&format!(" {op} {hi}"));
    }
    line
}

/// Human-readable rendering: per branch, the input assignments, the
/// constraints they are valid under, and the solved variable ranges.
pub fn to_text(preimage: &Preimage) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "target: ({})", join(&preimage.target));
    if let Some(p) = &preimage.projection {
        let _ = writeln!(out, "projected target: ({})", join(p.projected_target.iter().map(format_rational)));
    }
    let _ = writeln!(
        out,
        "branches: {} of {} sign patterns ({} decided){}",
        preimage.branches.len(),
        preimage.omega_bound,
        preimage.enumerated_count,
        if preimage.partial { ", partial" } else { "" }
    );
    if preimage.branches.is_empty() {
        let _ = writeln!(out, "empty preimage");
    }
    for b in &preimage.branches {
        let id = b.id_string();
        let _ = writeln!(out, "\nbranch {}", if id.is_empty() { "-" } else { &id });
        for (i, e) in b.input_map.outputs().iter().enumerate() {
            let _ = writeln!(out, "  x[{i}] = {e}");
        }
        if !b.constraints.is_empty() {
            let _ = writeln!(out, "  where");
            for c in b.constraints.constraints() {
                let _ = writeln!(out, "    {c}");
            }
        }
        let free = b.free_vars();
        if !free.is_empty() {
            let _ = writeln!(out, "  free: {}", join(&free));
        }
        let slack = b.slack_vars();
        if !slack.is_empty() {
            let _ = writeln!(out, "  slack: {}", join(&slack));
        }
        if !b.eliminated.is_empty() {
            let _ = writeln!(out, "  eliminated: {}", join(&b.eliminated));
        }
        if let Some(s) = b.solved.as_ref().filter(|s| !s.entries.is_empty()) {
            let _ = writeln!(out, "  ranges");
            for e in s.entries.iter().rev() {
                let _ = writeln!(out, "    {}", bound_line(&e.var, &e.lower, &e.upper));
            }
        }
    }
    out
}

pub fn report_to_text(report: &VerificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "verification: {}", if report.passed() { "passed" } else { "FAILED" });
    let _ = writeln!(
        out,
        "  round trip: {} samples over {} branches, {} failures",
        report.samples_drawn,
        report.branches_checked,
        report.round_trip_failures.len()
    );
    for f in &report.round_trip_failures {
        let _ = writeln!(
            out,
            "    branch {}: x = ({}) gives ({}), expected ({})",
            f.branch,
            f.input.join(", "),
            f.actual.join(", "),
            f.expected.join(", ")
        );
    }
    if report.grid_points > 0 {
        let _ = writeln!(
            out,
            "  grid: {} points, {} reach the target, {} missed, {} overlapping",
            report.grid_points,
            report.grid_hits,
            report.completeness_misses.len(),
            report.overlaps.len()
        );
        for m in report.completeness_misses.iter().chain(&report.overlaps) {
            let _ = writeln!(out, "    x = ({}) claimed by [{}]", m.input.join(", "), m.claimed_by.join(", "));
        }
    }
    if report.oracle_checked + report.oracle_skipped > 0 {
        let _ = writeln!(
            out,
            "  oracle: {} branches checked, {} skipped, {} disagreements",
            report.oracle_checked,
            report.oracle_skipped,
            report.oracle_disagreements.len()
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("preimage document: {path}: {message}")]
pub struct DocumentError {
    pub path: String,
    pub message: String,
}

fn doc_err(path: &str, message: impl Into<String>) -> DocumentError {
    DocumentError { path: path.to_string(), message: message.into() }
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value, DocumentError> {
    v.get(key).ok_or_else(|| doc_err(path, format!("missing `{key}`")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, DocumentError> {
    v.as_array().ok_or_else(|| doc_err(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str, DocumentError> {
    v.as_str().ok_or_else(|| doc_err(path, "expected a string"))
}

fn rational(v: &Value, path: &str) -> Result<Rational, DocumentError> {
    parse_rational(string(v, path)?).map_err(|e| doc_err(path, e.to_string()))
}

fn var(name: &str, path: &str) -> Result<VarId, DocumentError> {
    name.parse().map_err(|_| doc_err(path, format!("invalid variable `{name}`")))
}

fn count(v: &Value, path: &str) -> Result<u128, DocumentError> {
    v.to_string().parse().map_err(|_| doc_err(path, "expected a nonnegative integer"))
}

fn affine(v: &Value, terms_key: &str, path: &str) -> Result<AffineExpr, DocumentError> {
    let terms = field(v, terms_key, path)?
        .as_object()
        .ok_or_else(|| doc_err(path, format!("`{terms_key}` must be an object")))?;
    let mut parsed = Vec::with_capacity(terms.len());
    for (name, c) in terms {
        let p = format!("{path}.{terms_key}.{name}");
        parsed.push((var(name, &p)?, rational(c, &p)?));
    }
    Ok(AffineExpr::from_parts(parsed, rational(field(v, "const", path)?, &format!("{path}.const"))?))
}

fn pattern_ids(id: &str, net: &Network, path: &str) -> Result<Vec<SignPattern>, DocumentError> {
    let layers: Vec<(usize, usize)> = net
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.activation().is_piecewise())
        .map(|(i, l)| (i, l.outputs()))
        .collect();
    let parts: Vec<&str> = if id.is_empty() { Vec::new() } else { id.split('-').collect() };
    if parts.len() != layers.len() {
        return Err(doc_err(path, format!("id `{id}` does not match {} piecewise layers", layers.len())));
    }
    parts
        .iter()
        .zip(layers)
        .map(|(bits, (layer_index, width))| {
            if bits.len() != width || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(doc_err(path, format!("id segment `{bits}` is not a {width}-bit mask")));
            }
            let bits = bits.chars().rev().map(|c| if c == '1' { Sign::Positive } else { Sign::NonPositive }).collect();
            Ok(SignPattern { layer_index, bits })
        })
        .collect()
}

/// Reads a document written by [`to_json`] (or [`to_json_with_report`])
/// back into a [`Preimage`] for `net`. Solved bounds are recomputed.
pub fn parse_preimage(text: &str, net: &Network) -> Result<Preimage, DocumentError> {
    let root: Value = serde_json::from_str(text).map_err(|e| doc_err("$", e.to_string()))?;
    let doc = root.get("preimage").unwrap_or(&root);
    let target: Vec<AffineExpr> = array(field(doc, "target", "$")?, "target")?
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = format!("target[{i}]");
            let s = string(t, &p)?;
            match parse_rational(s) {
                Ok(r) => Ok(AffineExpr::constant(r)),
                Err(_) => Ok(AffineExpr::var(var(s, &p)?)),
            }
        })
        .collect::<Result<_, DocumentError>>()?;
    if target.len() != net.output_dim() {
        return Err(doc_err("target", format!("expected {} components", net.output_dim())));
    }
    let concrete = target.iter().all(AffineExpr::is_constant);
    let projection = match doc.get("projected_target") {
        None => None,
        Some(v) => {
            let projected = array(v, "projected_target")?
                .iter()
                .enumerate()
                .map(|(i, x)| rational(x, &format!("projected_target[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let residual = projected.iter().zip(&target).map(|(p, t)| p - t.constant_term()).collect();
            Some(ProjectionResult { projected_target: projected, residual, solution: Vec::new() })
        }
    };

    let mut branches = Vec::new();
    for (bi, b) in array(field(doc, "branches", "$")?, "branches")?.iter().enumerate() {
        let path = format!("branches[{bi}]");
        let id = pattern_ids(string(field(b, "id", &path)?, &path)?, net, &format!("{path}.id"))?;
        let outputs = array(field(b, "input_map", &path)?, &path)?
            .iter()
            .enumerate()
            .map(|(i, e)| affine(e, "terms", &format!("{path}.input_map[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        if outputs.len() != net.input_dim() {
            return Err(doc_err(&path, format!("input_map needs {} entries", net.input_dim())));
        }
        let constraints = array(field(b, "constraints", &path)?, &path)?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = format!("{path}.constraints[{i}]");
                let expr = affine(c, "coeffs", &p)?;
                match string(field(c, "sense", &p)?, &p)? {
                    "ge" => Ok(LinearConstraint { expr, sense: Sense::Ge }),
                    "gt" => Ok(LinearConstraint { expr, sense: Sense::Gt }),
                    other => Err(doc_err(&p, format!("unknown sense `{other}`"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let eliminated = match b.get("eliminated_vars") {
            None => Vec::new(),
            Some(v) => array(v, &path)?.iter().map(|n| var(string(n, &path)?, &path)).collect::<Result<Vec<_>, _>>()?,
        };
        let input_map = AffineMap::new(outputs);
        let extra =
            input_map.input_universe().iter().copied().filter(|v| v.kind != VarKind::Output).collect::<Vec<_>>();
        let constraints = InequalitySystem::with_universe(constraints, extra);
        let solved = if concrete {
            let keep: Vec<VarId> = constraints.universe().iter().copied().collect();
            fm_solve(&constraints, &keep).ok()
        } else {
            None
        };
        branches.push(SolutionBranch { id, input_map, constraints, solved, eliminated });
    }

    Ok(Preimage {
        target,
        projection,
        branches,
        enumerated_count: count(field(doc, "enumerated", "$")?, "enumerated")?,
        omega_bound: count(field(doc, "omega_bound", "$")?, "omega_bound")?,
        partial: field(doc, "partial", "$")?.as_bool().ok_or_else(|| doc_err("partial", "expected a boolean"))?,
        stats: EngineStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer, Network};
    use crate::preimage::{compute_preimage, EngineOptions};
    use crate::rational::int;

    fn relu_net() -> Network {
        Network::new(2, vec![Layer::new(vec![vec![int(1), int(1)]], vec![int(0)], Activation::Relu).unwrap()]).unwrap()
    }

    #[test]
    fn json_shape() {
        let pre = compute_preimage(&relu_net(), &[int(2)], &EngineOptions::default()).unwrap();
        let text = to_json(&pre);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["target"], serde_json::json!(["2"]));
        assert_eq!(v["omega_bound"].to_string(), "2");
        assert_eq!(v["partial"], serde_json::json!(false));
        let b = &v["branches"][0];
        assert_eq!(b["id"], "1");
        assert_eq!(b["input_map"][0]["terms"]["t0.0"], "-1");
        assert_eq!(b["input_map"][0]["const"], "2");
        assert_eq!(b["free_vars"], serde_json::json!(["t0.0"]));
        assert!(v.get("projected_target").is_none());
        let keys: Vec<&str> =
            text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim().split('"').nth(1).unwrap()).collect();
        assert_eq!(keys, ["target", "omega_bound", "enumerated", "partial", "branches"]);
    }

    #[test]
    fn json_round_trips() {
        let net = Network::new(
            2,
            vec![
                Layer::new(vec![vec![int(1), int(-1)], vec![int(2), int(1)]], vec![int(0), int(1)], Activation::Relu)
                    .unwrap(),
                Layer::new(vec![vec![int(1), int(1)]], vec![int(0)], Activation::Identity).unwrap(),
            ],
        )
        .unwrap();
        let pre = compute_preimage(&net, &[int(3)], &EngineOptions::default()).unwrap();
        let text = to_json(&pre);
        let back = parse_preimage(&text, &net).unwrap();
        assert_eq!(back.branches, pre.branches);
        assert_eq!(to_json(&back), text);
        let sym = crate::preimage::compute_symbolic_preimage(&net, &EngineOptions::default()).unwrap();
        assert_eq!(parse_preimage(&to_json(&sym), &net).unwrap().branches, sym.branches);
        let err = parse_preimage(&text.replace("\"ge\"", "\"le\""), &net).unwrap_err();
        assert!(err.path.contains("constraints"), "{err}");
    }

    #[test]
    fn text_lists_assignments() {
        let pre = compute_preimage(&relu_net(), &[int(2)], &EngineOptions::default()).unwrap();
        let text = to_text(&pre);
        assert!(text.contains("branch 1\n"));
        assert!(text.contains("  x[0] = -t0.0 + 2\n"), "{text}");
        assert!(text.contains("free: t0.0"));
        let empty = compute_preimage(&relu_net(), &[int(-1)], &EngineOptions::default()).unwrap();
        assert!(to_text(&empty).contains("empty preimage"));
    }
}
