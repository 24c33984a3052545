//! Matching the META part of rules against the models above a target model,
//! and proliferation of rules into two-level rules.

use std::collections::{BTreeMap, BTreeSet};

use log::debug;
use serde_json::{json, Value};

use crate::graph::{Arrow, Element, Graph};
use crate::hierarchy::{HierarchyError, MultilevelHierarchy, Multiplicity, Potency, TypeRef};
use crate::mcmt::{expand_cardinalities, McmtRule, PatternDecl};
use crate::morphism::Morphism;
use crate::typing::{LevelRef, TypedLevels};

/// The branch of a hierarchy from the root down to a target model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stack {
    /// Model names, root first, target last.
    pub models: Vec<String>,
    pub levels: TypedLevels,
    pub potency: Vec<BTreeMap<Element, Potency>>,
    pub multiplicity: Vec<BTreeMap<Arrow, Multiplicity>>,
}

impl Stack {
    pub fn from_hierarchy(h: &MultilevelHierarchy, target: &str) -> Result<Self, HierarchyError> {
        let branch = h.branch(target)?;
        Ok(Stack {
            models: branch.iter().map(|m| m.name.clone()).collect(),
            levels: h.typed_levels(target)?,
            potency: branch
                .iter()
                .map(|m| m.info.iter().map(|(e, i)| (e.clone(), i.potency)).collect())
                .collect(),
            multiplicity: branch
                .iter()
                .map(|m| {
                    m.info
                        .iter()
                        .filter_map(|(e, i)| e.as_arrow().map(|a| (a.clone(), i.multiplicity)))
                        .collect()
                })
                .collect(),
        })
    }

    /// Index of the target model.
    pub fn bottom(&self) -> usize {
        self.levels.depth()
    }

    pub fn graph(&self, level: usize) -> &Graph {
        &self.levels.graphs[level]
    }

    pub fn target(&self) -> &Graph {
        self.graph(self.bottom())
    }

    pub fn potency(&self, level: usize, e: &Element) -> Potency {
        self.potency[level].get(e).copied().unwrap_or_default()
    }

    pub fn multiplicity(&self, level: usize, a: &Arrow) -> Multiplicity {
        self.multiplicity[level].get(a).copied().unwrap_or_default()
    }

    pub fn type_ref(&self, (level, e): &LevelRef) -> TypeRef {
        TypeRef::new(self.models[*level].clone(), e.clone())
    }
}

/// A match of the META levels of a rule into the stack: `level_map[k]` is
/// the stack level META level `k` maps to, `bindings[k]` the graph match.
/// Level 0 always maps the root onto itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaMatch {
    pub level_map: Vec<usize>,
    pub bindings: Vec<Morphism>,
}

impl MetaMatch {
    pub fn root(root: &Graph) -> Self {
        MetaMatch {
            level_map: vec![0],
            bindings: vec![Morphism::identity(root)],
        }
    }

    /// Number of bound levels below the root.
    pub fn len(&self) -> usize {
        self.level_map.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn extended(&self, t: usize, b: Morphism) -> Self {
        let mut out = self.clone();
        out.level_map.push(t);
        out.bindings.push(b);
        out
    }

    /// The chain morphism `(f, b)` from the META chain to the stack.
    pub fn to_chain_morphism(&self) -> crate::chain::ChainMorphism {
        crate::chain::ChainMorphism {
            level_map: self.level_map.clone(),
            components: self.bindings.clone(),
        }
    }
}

/// Typed variant of Ullmann's algorithm: candidate sets filtered by
/// `node_ok` and (when injective) degrees, refined by arrow consistency
/// until stable, then explored by backtracking. Results come out in target
/// node order.
pub fn ullmann<N, A>(
    pattern: &Graph,
    target: &Graph,
    node_ok: N,
    arrow_ok: A,
    injective: bool,
) -> Vec<Morphism>
where
    N: Fn(&str, &str) -> bool,
    A: Fn(&Arrow, &Arrow) -> bool,
{
    let pnodes: Vec<&String> = pattern.nodes().collect();
    let mut cand: BTreeMap<&str, Vec<&String>> = BTreeMap::new();
    for p in &pnodes {
        let (pout, pin) = (pattern.outgoing(p).count(), pattern.incoming(p).count());
        let c: Vec<&String> = target
            .nodes()
            .filter(|t| node_ok(p, t))
            .filter(|t| {
                !injective
                    || (target.outgoing(t).count() >= pout && target.incoming(t).count() >= pin)
            })
            .collect();
        if c.is_empty() {
            return Vec::new();
        }
        cand.insert(p.as_str(), c);
    }

    // refinement: every pattern arrow at p must have a counterpart at c
    loop {
        let mut changed = false;
        for p in &pnodes {
            let keep: Vec<&String> = cand[p.as_str()]
                .iter()
                .copied()
                .filter(|c| {
                    pattern.outgoing(p).all(|a| {
                        target.outgoing(c).any(|b| {
                            arrow_ok(a, b)
                                && if a.target == **p {
                                    b.target == **c
                                } else {
                                    cand[a.target.as_str()].contains(&&b.target)
                                }
                        })
                    }) && pattern.incoming(p).all(|a| {
                        target
                            .incoming(c)
                            .any(|b| arrow_ok(a, b) && cand[a.source.as_str()].contains(&&b.source))
                    })
                })
                .collect();
            if keep.is_empty() {
                return Vec::new();
            }
            if keep.len() != cand[p.as_str()].len() {
                changed = true;
                cand.insert(p.as_str(), keep);
            }
        }
        if !changed {
            break;
        }
    }

    let parrows: Vec<&Arrow> = pattern.arrows().collect();
    let mut out = Vec::new();
    let mut current = Morphism::new(pattern.name(), target.name());
    let mut search = Search {
        pattern,
        target,
        pnodes: &pnodes,
        parrows: &parrows,
        cand: &cand,
        arrow_ok: &arrow_ok,
        injective,
        out: &mut out,
    };
    search.nodes(0, &mut current);
    out
}

struct Search<'a, A> {
    pattern: &'a Graph,
    target: &'a Graph,
    pnodes: &'a [&'a String],
    parrows: &'a [&'a Arrow],
    cand: &'a BTreeMap<&'a str, Vec<&'a String>>,
    arrow_ok: &'a A,
    injective: bool,
    out: &'a mut Vec<Morphism>,
}

impl<A: Fn(&Arrow, &Arrow) -> bool> Search<'_, A> {
    fn nodes(&mut self, i: usize, current: &mut Morphism) {
        if i == self.pnodes.len() {
            self.arrows(0, current);
            return;
        }
        let p = self.pnodes[i];
        for &c in &self.cand[p.as_str()] {
            if self.injective && current.node_map().values().any(|v| v == c) {
                continue;
            }
            current.map_node(p.clone(), c.clone());
            // forward check the arrows between already assigned nodes
            let ok = self
                .pattern
                .outgoing(p)
                .chain(self.pattern.incoming(p))
                .all(
                    |a| match (current.node(&a.source), current.node(&a.target)) {
                        (Some(s), Some(t)) => self
                            .target
                            .outgoing(s)
                            .any(|b| &b.target == t && (self.arrow_ok)(a, b)),
                        _ => true,
                    },
                );
            if ok {
                self.nodes(i + 1, current);
            }
            current.unmap(&Element::node(p.clone()));
        }
    }

    fn arrows(&mut self, i: usize, current: &mut Morphism) {
        if i == self.parrows.len() {
            self.out.push(current.clone());
            return;
        }
        let a = self.parrows[i];
        let s = current.node(&a.source).expect("nodes assigned").clone();
        let t = current.node(&a.target).expect("nodes assigned").clone();
        let candidates: Vec<&Arrow> = self
            .target
            .outgoing(&s)
            .filter(|b| b.target == t && (self.arrow_ok)(a, b))
            .collect();
        for b in candidates {
            if self.injective && current.arrow_map().values().any(|v| v == b) {
                continue;
            }
            current.map_arrow(a.clone(), b.clone());
            self.arrows(i + 1, current);
            current.unmap(&Element::Arrow(a.clone()));
        }
    }
}

/// Whether META element `x` at level `k` may bind stack element `y` at
/// level `t`, given the bindings of the levels above.
fn meta_compatible(
    rule: &McmtRule,
    meta: &TypedLevels,
    k: usize,
    x: &Element,
    stack: &Stack,
    t: usize,
    y: &Element,
    partial: &MetaMatch,
) -> bool {
    let Some(decl) = rule
        .meta
        .iter()
        .find(|d| d.level == k && d.name == x.name() && d.ends.is_some() == !x.is_node())
    else {
        return false;
    };
    if decl.constant && x.name() != y.name() {
        return false;
    }
    if let Some(p) = decl.potency {
        if !p.within(&stack.potency(t, y)) {
            return false;
        }
    }
    if let (Some(m), Some(a)) = (decl.multiplicity, y.as_arrow()) {
        if !m.within(&stack.multiplicity(t, a)) {
            return false;
        }
    }
    (0..k).all(|i| {
        let tx = meta.transitive_type(k, x, i);
        let ty = stack.levels.transitive_type(t, y, partial.level_map[i]);
        match (tx, ty) {
            (None, None) => true,
            (Some(a), Some(b)) => partial.bindings[i].apply(&a).as_ref() == Some(&b),
            _ => false,
        }
    })
}

/// Every injective, type-consistent binding of META level `k` into stack
/// level `t`.
pub fn graph_match(
    rule: &McmtRule,
    meta: &TypedLevels,
    k: usize,
    stack: &Stack,
    t: usize,
    partial: &MetaMatch,
) -> Vec<Morphism> {
    let pattern = &meta.graphs[k];
    let target = stack.graph(t);
    ullmann(
        pattern,
        target,
        |x, y| {
            meta_compatible(
                rule,
                meta,
                k,
                &Element::node(x),
                stack,
                t,
                &Element::node(y),
                partial,
            )
        },
        |a, b| {
            meta_compatible(
                rule,
                meta,
                k,
                &Element::Arrow(a.clone()),
                stack,
                t,
                &Element::Arrow(b.clone()),
                partial,
            )
        },
        true,
    )
}

/// All complete matches of the META levels of `rule` into the levels of
/// `stack` strictly between the root and the target model, in discovery
/// order (stack level ascending, then binding order).
pub fn match_meta(rule: &McmtRule, stack: &Stack) -> Vec<MetaMatch> {
    let meta = rule.meta_levels(stack.graph(0));
    let mut out = Vec::new();
    descend(
        rule,
        &meta,
        stack,
        1,
        1,
        MetaMatch::root(stack.graph(0)),
        &mut out,
    );
    out
}

fn descend(
    rule: &McmtRule,
    meta: &TypedLevels,
    stack: &Stack,
    k: usize,
    from: usize,
    partial: MetaMatch,
    out: &mut Vec<MetaMatch>,
) {
    let n = meta.depth();
    if k > n {
        out.push(partial);
        return;
    }
    // leave one stack level for each remaining META level
    let last = stack.bottom().saturating_sub(1 + n - k);
    for t in from..=last {
        for b in graph_match(rule, meta, k, stack, t, &partial) {
            descend(rule, meta, stack, k + 1, t + 1, partial.extended(t, b), out);
        }
    }
}

/// Line by line rendering of the recursive matching procedure with an
/// in-out list of partial matches. Kept alongside [`match_meta`] so both can
/// be checked against each other.
pub fn match_meta_literal(rule: &McmtRule, stack: &Stack) -> Vec<MetaMatch> {
    let meta = rule.meta_levels(stack.graph(0));
    let mm: Vec<usize> = (1..=meta.depth()).collect();
    let tg: Vec<usize> = (1..stack.bottom()).collect();
    let mut matches: Vec<Option<MetaMatch>> = Vec::new();
    literal(rule, &meta, stack, &mm, &tg, 0, 0, &mut matches);
    matches.into_iter().flatten().collect()
}

#[allow(clippy::too_many_arguments)]
fn literal(
    rule: &McmtRule,
    meta: &TypedLevels,
    stack: &Stack,
    mm: &[usize],
    tg: &[usize],
    mm_level: usize,
    mut tg_level: usize,
    matches: &mut Vec<Option<MetaMatch>>,
) -> bool {
    if mm_level == mm.len() {
        return true;
    }
    let mut found = false;
    while tg_level < tg.len() {
        let partial = if mm_level == 0 {
            MetaMatch::root(stack.graph(0))
        } else {
            matches
                .last()
                .cloned()
                .flatten()
                .unwrap_or_else(|| MetaMatch::root(stack.graph(0)))
        };
        let maps = graph_match(rule, meta, mm[mm_level], stack, tg[tg_level], &partial);
        for m in maps {
            let size = matches.len();
            if size > 0 && mm_level > 0 {
                let current = matches[size - 1].clone();
                matches[size - 1] = current.as_ref().map(|c| c.extended(tg[tg_level], m));
                // evaluated unconditionally: every branch must be explored
                let sub = literal(
                    rule,
                    meta,
                    stack,
                    mm,
                    tg,
                    mm_level + 1,
                    tg_level + 1,
                    matches,
                );
                found = found || sub;
                matches.push(current);
            } else {
                matches.push(Some(
                    MetaMatch::root(stack.graph(0)).extended(tg[tg_level], m),
                ));
                let sub = literal(
                    rule,
                    meta,
                    stack,
                    mm,
                    tg,
                    mm_level + 1,
                    tg_level + 1,
                    matches,
                );
                found = found || sub;
            }
        }
        tg_level += 1;
    }
    if mm_level > 0 {
        if let Some(last) = matches.last_mut() {
            *last = None;
        }
    }
    found
}

/// A rule whose elements are typed directly by elements of the stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoLevelRule {
    pub name: String,
    pub source_rule: String,
    /// The model the rule applies to.
    pub model: String,
    pub meta_match: MetaMatch,
    pub lhs: Graph,
    pub interface: Graph,
    pub rhs: Graph,
    /// Type of every interface element.
    pub types: BTreeMap<Element, LevelRef>,
    /// Declared potencies.
    pub potencies: BTreeMap<Element, Potency>,
    /// Elements that only match host elements of the same name.
    pub constants: BTreeSet<Element>,
}

impl TwoLevelRule {
    pub fn created(&self) -> Vec<Element> {
        self.rhs
            .elements()
            .filter(|e| !self.lhs.contains(e))
            .collect()
    }

    pub fn deleted(&self) -> Vec<Element> {
        self.lhs
            .elements()
            .filter(|e| !self.rhs.contains(e))
            .collect()
    }

    fn graph_json(&self, g: &Graph, stack: &Stack) -> Value {
        let ty = |e: &Element| self.types.get(e).map(|t| stack.type_ref(t).to_string());
        json!({
            "nodes": g.nodes().map(|n| json!({"name": n, "type": ty(&Element::node(n.clone()))})).collect::<Vec<_>>(),
            "arrows": g.arrows().map(|a| json!({
                "name": a.label,
                "source": a.source,
                "target": a.target,
                "type": ty(&Element::Arrow(a.clone())),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self, stack: &Stack) -> Value {
        json!({
            "name": self.name,
            "lhs": self.graph_json(&self.lhs, stack),
            "interface": self.graph_json(&self.interface, stack),
            "rhs": self.graph_json(&self.rhs, stack),
        })
    }
}

/// Instantiates the FROM and TO patterns of `rule` with the types bound by
/// `mm`. `None` when some type is left unbound.
fn instantiate(
    rule: &McmtRule,
    mm: &MetaMatch,
    stack: &Stack,
    name: String,
) -> Option<TwoLevelRule> {
    let root = stack.graph(0);
    let mut types = BTreeMap::new();
    let mut potencies = BTreeMap::new();
    let mut constants = BTreeSet::new();
    let decls: Vec<PatternDecl> = rule.pattern_decls();
    for d in &decls {
        let meta_el = rule.type_element(&d.ty, root)?;
        let bound = mm.bindings.get(d.ty.level)?.apply(&meta_el)?;
        let e = d.element();
        types.insert(e.clone(), (mm.level_map[d.ty.level], bound));
        if let Some(p) = d.potency {
            potencies.insert(e.clone(), p);
        }
        if d.constant {
            constants.insert(e);
        }
    }
    Some(TwoLevelRule {
        name,
        source_rule: rule.name.clone(),
        model: stack.models.last().cloned().unwrap_or_default(),
        meta_match: mm.clone(),
        lhs: rule.lhs(),
        interface: rule.interface(),
        rhs: rule.rhs(),
        types,
        potencies,
        constants,
    })
}

/// Two-level rules for every META match of `rule` and every cardinality
/// expansion, named `Rule_k` (or `Rule_k.e` when a match expands to several
/// rules).
pub fn proliferate(rule: &McmtRule, stack: &Stack) -> Vec<TwoLevelRule> {
    let mut out = Vec::new();
    for (k, mm) in match_meta(rule, stack).iter().enumerate() {
        let expanded = expand_cardinalities(rule, mm, stack);
        let many = expanded.len() > 1;
        for (e, r) in expanded.iter().enumerate() {
            let name = if many {
                format!("{}_{}.{}", rule.name, k + 1, e + 1)
            } else {
                format!("{}_{}", rule.name, k + 1)
            };
            match instantiate(r, mm, stack, name) {
                Some(t) => out.push(t),
                None => debug!(
                    "{}: match {} leaves a pattern type unbound",
                    rule.name,
                    k + 1
                ),
            }
        }
    }
    debug!("{}: {} two-level rules", rule.name, out.len());
    out
}

/// Proliferation of a whole rule set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proliferation {
    pub rules: Vec<TwoLevelRule>,
    /// Number of two-level rules per source rule, in input order.
    pub breakdown: Vec<(String, usize)>,
}

impl Proliferation {
    pub fn to_json(&self, stack: &Stack) -> Value {
        json!({
            "rules": self.rules.iter().map(|r| r.to_json(stack)).collect::<Vec<_>>(),
            "breakdown": self.breakdown.iter().map(|(n, c)| json!({"rule": n, "count": c})).collect::<Vec<_>>(),
        })
    }
}

pub fn proliferate_all(rules: &[McmtRule], stack: &Stack) -> Proliferation {
    let mut out = Proliferation {
        rules: Vec::new(),
        breakdown: Vec::new(),
    };
    for r in rules {
        let p = proliferate(r, stack);
        out.breakdown.push((r.name.clone(), p.len()));
        out.rules.extend(p);
    }
    out
}
