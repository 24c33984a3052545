//! Replication of pattern nodes according to bounded multiplicities of the
//! arrows a META arrow is bound to.

use std::collections::BTreeSet;

use super::{McmtRule, MetaRef, PatternDecl};
use crate::graph::Element;
use crate::matcher::{MetaMatch, Stack};

/// A group of pattern nodes to replicate, and the admissible counts.
struct Factor {
    nodes: Vec<String>,
    counts: Vec<u32>,
}

fn factors(rule: &McmtRule, meta: &MetaMatch, stack: &Stack) -> Vec<Factor> {
    let mut out = Vec::new();
    let decls = rule.pattern_decls();
    for d in rule.meta.iter().filter(|d| d.ends.is_some()) {
        let Element::Arrow(a) = rule.meta_element(d) else {
            continue;
        };
        let Some(bound) = meta.bindings.get(d.level).and_then(|b| b.arrow(&a)) else {
            continue;
        };
        let mult = stack.multiplicity(meta.level_map[d.level], bound);
        let Some(upper) = mult.upper else {
            continue;
        };
        let arrow_ty = MetaRef::new(d.level, d.name.clone());
        let target_ty = MetaRef::new(d.level, a.target.clone());
        let targets: BTreeSet<&str> = decls
            .iter()
            .filter(|p| p.ty == arrow_ty)
            .filter_map(|p| p.ends.as_ref().map(|(_, t)| t.as_str()))
            .collect();
        let nodes: Vec<String> = decls
            .iter()
            .filter(|p| p.ends.is_none() && p.ty == target_ty && targets.contains(p.name.as_str()))
            .map(|p| p.name.clone())
            .collect();
        if !nodes.is_empty() && mult.lower <= upper {
            out.push(Factor {
                nodes,
                counts: (mult.lower..=upper).collect(),
            });
        }
    }
    out
}

fn fresh(base: &str, from: usize, taken: &BTreeSet<String>) -> String {
    (from..)
        .map(|k| format!("{base}${k}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded search")
}

/// Makes `count` copies of pattern node `node` (removing it for zero),
/// copying its incident arrows alongside.
fn replicate(rule: &mut McmtRule, node: &str, count: u32) {
    let incident = |d: &PatternDecl| matches!(&d.ends, Some((s, t)) if s == node || t == node);
    if count == 0 {
        for side in [&mut rule.from, &mut rule.to] {
            side.retain(|d| d.name != node && !incident(d));
        }
        return;
    }
    let mut taken: BTreeSet<String> = rule
        .from
        .iter()
        .chain(&rule.to)
        .map(|d| d.name.clone())
        .collect();
    let arrows: Vec<String> = rule
        .pattern_decls()
        .into_iter()
        .filter(|d| incident(d))
        .map(|d| d.name)
        .collect();
    for j in 1..count as usize {
        let copy = fresh(node, j, &taken);
        taken.insert(copy.clone());
        let arrow_copies: Vec<(String, String)> = arrows
            .iter()
            .map(|a| {
                let c = fresh(a, j, &taken);
                taken.insert(c.clone());
                (a.clone(), c)
            })
            .collect();
        for side in [&mut rule.from, &mut rule.to] {
            let mut added = Vec::new();
            if let Some(d) = side.iter().find(|d| d.name == node) {
                added.push(PatternDecl {
                    name: copy.clone(),
                    ..d.clone()
                });
            }
            for (a, c) in &arrow_copies {
                if let Some(d) = side.iter().find(|d| &d.name == a) {
                    let (s, t) = d.ends.clone().expect("incident arrows have ends");
                    let swap = |x: String| if x == node { copy.clone() } else { x };
                    added.push(PatternDecl {
                        name: c.clone(),
                        ends: Some((swap(s), swap(t))),
                        ..d.clone()
                    });
                }
            }
            side.extend(added);
        }
    }
}

/// The rules obtained by expanding the cardinalities bound by `meta`, in META
/// order with counts ascending. A rule without bounded arrows yields itself.
pub fn expand_cardinalities(rule: &McmtRule, meta: &MetaMatch, stack: &Stack) -> Vec<McmtRule> {
    let fs = factors(rule, meta, stack);
    let mut combos: Vec<Vec<u32>> = vec![Vec::new()];
    for f in &fs {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                f.counts.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|counts| {
            let mut r = rule.clone();
            for (f, v) in fs.iter().zip(counts) {
                for n in &f.nodes {
                    replicate(&mut r, n, v);
                }
            }
            r
        })
        .collect()
}
