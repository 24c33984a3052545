//! Multilevel coupled rules: a META pattern chain plus FROM and TO
//! patterns typed over it.
//!
//! Rules are written in a small textual DSL:
//!
//! ```text
//! rules Plant {
//!   rule CreatePart {
//!     meta {
//!       M1 : Machine mm1
//!       P1 : Part mm1
//!       creates : creates mm1
//!       creates = M1 -> P1
//!     }
//!     from {
//!       m1 : M1
//!     }
//!     to {
//!       m1 : M1
//!       p1 : P1
//!       c1 : creates
//!       c1 = m1 -> p1
//!     }
//!   }
//! }
//! ```
//!
//! A type reference `T mm k` names the element `T` living at META level `k`
//! (level 0 is the hierarchy root). A META node sits one level below its
//! type; a META arrow sits at the level of its endpoints. Referring to a
//! name with `mm k` that is not declared at level `k` introduces an implicit
//! constant there. A `$` after the type marks the declared element as a
//! constant, matched by name as well as by type.

mod expand;
mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::graph::{Element, Graph};
use crate::hierarchy::{Multiplicity, Potency};
use crate::typing::{LevelRef, TypedLevels};

pub use expand::expand_cardinalities;
use parse::{parse_raw, Pos, RawAssign, RawBlock, RawDecl, RawRule};

/// Name of the root node type.
pub const ROOT_NODE: &str = "Node";
/// Name of the root arrow type.
pub const ROOT_ARROW: &str = "Arrow";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unresolved reference `{name}`")]
    UnresolvedReference {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: duplicate declaration of `{name}`")]
    DuplicateDeclaration {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("{line}:{column}: invalid declaration of `{name}`: {message}")]
    InvalidDeclaration {
        name: String,
        message: String,
        line: usize,
        column: usize,
    },
}

fn unresolved(name: &str, pos: Pos) -> RuleError {
    RuleError::UnresolvedReference {
        name: name.to_string(),
        line: pos.line,
        column: pos.column,
    }
}

fn duplicate(name: &str, pos: Pos) -> RuleError {
    RuleError::DuplicateDeclaration {
        name: name.to_string(),
        line: pos.line,
        column: pos.column,
    }
}

fn invalid(name: &str, pos: Pos, message: impl Into<String>) -> RuleError {
    RuleError::InvalidDeclaration {
        name: name.to_string(),
        message: message.into(),
        line: pos.line,
        column: pos.column,
    }
}

/// An element of the META chain: `name` at `level`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaRef {
    pub level: usize,
    pub name: String,
}

impl MetaRef {
    pub fn new(level: usize, name: impl Into<String>) -> Self {
        MetaRef {
            level,
            name: name.into(),
        }
    }
}

impl fmt::Display for MetaRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mm{}", self.name, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaDecl {
    pub name: String,
    pub level: usize,
    pub ty: MetaRef,
    pub constant: bool,
    pub potency: Option<Potency>,
    pub multiplicity: Option<Multiplicity>,
    /// Source and target for arrows.
    pub ends: Option<(String, String)>,
    /// Introduced by a reference rather than declared.
    pub implicit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternDecl {
    pub name: String,
    pub ty: MetaRef,
    pub constant: bool,
    pub potency: Option<Potency>,
    pub ends: Option<(String, String)>,
}

impl PatternDecl {
    pub fn element(&self) -> Element {
        match &self.ends {
            Some((s, t)) => Element::arrow(s.clone(), self.name.clone(), t.clone()),
            None => Element::node(self.name.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McmtRule {
    pub name: String,
    /// Explicit declarations ordered by level, then implicit ones.
    pub meta: Vec<MetaDecl>,
    pub from: Vec<PatternDecl>,
    pub to: Vec<PatternDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleModule {
    pub name: String,
    pub rules: Vec<McmtRule>,
}

impl RuleModule {
    pub fn rule(&self, name: &str) -> Option<&McmtRule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

/// Parses and resolves a rule module.
pub fn parse_rule_module(text: &str) -> Result<RuleModule, RuleError> {
    let raw = parse_raw(text)?;
    let mut seen = BTreeSet::new();
    let mut rules = Vec::new();
    for r in &raw.rules {
        if !seen.insert(r.name.clone()) {
            return Err(duplicate(&r.name, r.pos));
        }
        rules.push(Resolver::new(r)?.resolve()?);
    }
    Ok(RuleModule {
        name: raw.name,
        rules,
    })
}

pub use print::print_module;

impl McmtRule {
    /// Number of META levels below the root.
    pub fn meta_depth(&self) -> usize {
        self.meta.iter().map(|d| d.level).max().unwrap_or(0)
    }

    pub fn meta_decl(&self, r: &MetaRef) -> Option<&MetaDecl> {
        self.meta
            .iter()
            .find(|d| d.level == r.level && d.name == r.name)
    }

    pub fn meta_element(&self, d: &MetaDecl) -> Element {
        match &d.ends {
            Some((s, t)) => Element::arrow(s.clone(), d.name.clone(), t.clone()),
            None => Element::node(d.name.clone()),
        }
    }

    /// The element a type reference denotes, looking in `root` for level 0.
    pub fn type_element(&self, r: &MetaRef, root: &Graph) -> Option<Element> {
        if r.level == 0 {
            if root.has_node(&r.name) {
                return Some(Element::node(r.name.clone()));
            }
            return root
                .arrows()
                .find(|a| a.label == r.name)
                .cloned()
                .map(Element::Arrow);
        }
        self.meta_decl(r).map(|d| self.meta_element(d))
    }

    /// The type of `r` at `at`, following META types upwards.
    pub fn meta_transitive(&self, r: &MetaRef, at: usize) -> Option<String> {
        let mut cur = r.clone();
        while cur.level > at {
            let d = self.meta_decl(&cur)?;
            if d.ty.level >= cur.level {
                return None;
            }
            cur = d.ty.clone();
        }
        (cur.level == at).then_some(cur.name)
    }

    /// The META chain with the root graph at level 0.
    pub fn meta_levels(&self, root: &Graph) -> TypedLevels {
        let n = self.meta_depth();
        let mut graphs = vec![root.clone()];
        let mut types: Vec<BTreeMap<Element, LevelRef>> =
            vec![root.elements().map(|e| (e.clone(), (0, e))).collect()];
        for k in 1..=n {
            let mut g = Graph::empty(format!("{}.meta{k}", self.name));
            let mut t = BTreeMap::new();
            let decls: Vec<&MetaDecl> = self.meta.iter().filter(|d| d.level == k).collect();
            for d in decls.iter().filter(|d| d.ends.is_none()) {
                // a duplicate here is a validation error, not a structural one
                let _ = g.add_node(d.name.clone());
            }
            for d in decls.iter().filter(|d| d.ends.is_some()) {
                let e = self.meta_element(d);
                if let Some(a) = e.as_arrow() {
                    if g.add_arrow(a.clone()).is_err() {
                        continue;
                    }
                }
                if let Some(te) = self.type_element(&d.ty, root) {
                    t.insert(e, (d.ty.level, te));
                }
            }
            for d in decls.iter().filter(|d| d.ends.is_none()) {
                if let Some(te) = self.type_element(&d.ty, root) {
                    t.insert(self.meta_element(d), (d.ty.level, te));
                }
            }
            graphs.push(g);
            types.push(t);
        }
        TypedLevels { graphs, types }
    }

    fn side_graph(decls: &[PatternDecl], name: &str) -> Graph {
        let mut g = Graph::empty(name);
        for d in decls.iter().filter(|d| d.ends.is_none()) {
            let _ = g.add_node(d.name.clone());
        }
        for d in decls.iter().filter(|d| d.ends.is_some()) {
            if let Element::Arrow(a) = d.element() {
                let _ = g.add_arrow(a);
            }
        }
        g
    }

    pub fn lhs(&self) -> Graph {
        Self::side_graph(&self.from, "L")
    }

    pub fn rhs(&self) -> Graph {
        Self::side_graph(&self.to, "R")
    }

    /// `I = L ∪ R`.
    pub fn interface(&self) -> Graph {
        Self::side_graph(&self.pattern_decls(), "I")
    }

    /// FROM declarations followed by TO-only ones.
    pub fn pattern_decls(&self) -> Vec<PatternDecl> {
        let mut out = self.from.clone();
        for d in &self.to {
            if !out.iter().any(|x| x.name == d.name) {
                out.push(d.clone());
            }
        }
        out
    }

    pub fn pattern_decl(&self, name: &str) -> Option<&PatternDecl> {
        self.from.iter().chain(&self.to).find(|d| d.name == name)
    }

    /// Elements of FROM that are not in TO.
    pub fn deleted(&self) -> Vec<Element> {
        let to: BTreeSet<&str> = self.to.iter().map(|d| d.name.as_str()).collect();
        self.from
            .iter()
            .filter(|d| !to.contains(d.name.as_str()))
            .map(PatternDecl::element)
            .collect()
    }

    /// Elements of TO that are not in FROM.
    pub fn created(&self) -> Vec<Element> {
        let from: BTreeSet<&str> = self.from.iter().map(|d| d.name.as_str()).collect();
        self.to
            .iter()
            .filter(|d| !from.contains(d.name.as_str()))
            .map(PatternDecl::element)
            .collect()
    }

    /// The typing of an interface element over the META chain at `level`.
    pub fn pattern_type_at(&self, d: &PatternDecl, level: usize, root: &Graph) -> Option<Element> {
        let name = self.meta_transitive(&d.ty, level)?;
        self.type_element(&MetaRef::new(level, name), root)
    }

    /// `σ_i` for every META level, for the pattern elements in `decls`.
    pub fn pattern_typing(
        &self,
        decls: &[PatternDecl],
        graph: &Graph,
        root: &Graph,
    ) -> Vec<crate::morphism::Morphism> {
        let meta = self.meta_levels(root);
        (0..=self.meta_depth())
            .map(|i| {
                let mut m = crate::morphism::Morphism::new(graph.name(), meta.graphs[i].name());
                for d in decls {
                    if let Some(t) = self.pattern_type_at(d, i, root) {
                        m.map(d.element(), t);
                    }
                }
                m
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleViolationKind {
    MetaEmpty,
    /// A level-0 type that the root does not contain.
    UnknownRootType,
    /// A type that does not live strictly above the element.
    LevelOrder,
    TypingIncompatibility(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleViolation {
    pub rule: String,
    pub element: String,
    pub kind: RuleViolationKind,
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: `{}`: ", self.rule, self.element)?;
        match &self.kind {
            RuleViolationKind::MetaEmpty => write!(f, "the meta block must contain a pattern"),
            RuleViolationKind::UnknownRootType => write!(f, "type is not part of the root"),
            RuleViolationKind::LevelOrder => {
                write!(f, "type must live on a level above the element")
            }
            RuleViolationKind::TypingIncompatibility(why) => write!(f, "{why}"),
        }
    }
}

/// Checks a parsed rule against the root graph of the hierarchy it will be
/// used with.
pub fn validate_rule(rule: &McmtRule, root: &Graph) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    let mut push = |element: &str, kind| {
        out.push(RuleViolation {
            rule: rule.name.clone(),
            element: element.to_string(),
            kind,
        })
    };
    if rule.meta.iter().all(|d| d.implicit) {
        push("meta", RuleViolationKind::MetaEmpty);
    }
    // (name, own level, type, endpoints)
    let mut items: Vec<(&str, usize, &MetaRef, Option<&(String, String)>, bool)> = rule
        .meta
        .iter()
        .map(|d| (d.name.as_str(), d.level, &d.ty, d.ends.as_ref(), true))
        .collect();
    let bottom = rule.meta_depth() + 1;
    for d in rule.from.iter().chain(&rule.to) {
        items.push((d.name.as_str(), bottom, &d.ty, d.ends.as_ref(), false));
    }
    for (name, level, ty, ends, is_meta) in items {
        if ty.level >= level {
            push(name, RuleViolationKind::LevelOrder);
            continue;
        }
        let Some(te) = rule.type_element(ty, root) else {
            if ty.level == 0 {
                push(name, RuleViolationKind::UnknownRootType);
            } else {
                push(
                    name,
                    RuleViolationKind::TypingIncompatibility(format!("unknown type {ty}")),
                );
            }
            continue;
        };
        if te.is_node() != ends.is_none() {
            push(
                name,
                RuleViolationKind::TypingIncompatibility(format!(
                    "kind differs from its type {ty}"
                )),
            );
            continue;
        }
        let (Some((s, t)), Element::Arrow(ta)) = (ends, &te) else {
            continue;
        };
        for (end, expected) in [(s, &ta.source), (t, &ta.target)] {
            let end_ty = if is_meta {
                rule.meta
                    .iter()
                    .find(|d| d.level == level && &d.name == end)
                    .map(|d| d.ty.clone())
            } else {
                rule.pattern_decl(end).map(|d| d.ty.clone())
            };
            let got = end_ty.and_then(|r| rule.meta_transitive(&r, ty.level));
            if got.as_deref() != Some(expected.as_str()) {
                push(
                    name,
                    RuleViolationKind::TypingIncompatibility(format!(
                        "endpoint `{end}` is not typed by `{expected}` at level {}",
                        ty.level
                    )),
                );
            }
        }
    }
    out
}

struct Implicit {
    ends: Option<(String, String)>,
}

struct Resolver<'a> {
    raw: &'a RawRule,
    meta_decls: BTreeMap<&'a str, &'a RawDecl>,
    meta_assigns: BTreeMap<&'a str, &'a RawAssign>,
    levels: BTreeMap<String, usize>,
    types: BTreeMap<String, MetaRef>,
    visiting: BTreeSet<String>,
    implicit: BTreeMap<(usize, String), Implicit>,
}

fn index_block(
    block: &RawBlock,
) -> Result<(BTreeMap<&str, &RawDecl>, BTreeMap<&str, &RawAssign>), RuleError> {
    let mut decls = BTreeMap::new();
    for d in &block.decls {
        if decls.insert(d.name.as_str(), d).is_some() {
            return Err(duplicate(&d.name, d.pos));
        }
    }
    let mut assigns = BTreeMap::new();
    for a in &block.assigns {
        if !decls.contains_key(a.name.as_str()) {
            return Err(unresolved(&a.name, a.pos));
        }
        if assigns.insert(a.name.as_str(), a).is_some() {
            return Err(duplicate(&a.name, a.pos));
        }
    }
    Ok((decls, assigns))
}

impl<'a> Resolver<'a> {
    fn new(raw: &'a RawRule) -> Result<Self, RuleError> {
        let (meta_decls, meta_assigns) = index_block(&raw.meta)?;
        Ok(Resolver {
            raw,
            meta_decls,
            meta_assigns,
            levels: BTreeMap::new(),
            types: BTreeMap::new(),
            visiting: BTreeSet::new(),
            implicit: BTreeMap::new(),
        })
    }

    fn resolve(mut self) -> Result<McmtRule, RuleError> {
        for d in &self.raw.meta.decls {
            self.meta_level(&d.name)?;
        }
        let mut meta: Vec<MetaDecl> = self
            .raw
            .meta
            .decls
            .iter()
            .map(|d| MetaDecl {
                name: d.name.clone(),
                level: self.levels[&d.name],
                ty: self.types[&d.name].clone(),
                constant: d.constant,
                potency: d.potency,
                multiplicity: d.multiplicity,
                ends: self
                    .meta_assigns
                    .get(d.name.as_str())
                    .map(|a| (a.source.clone(), a.target.clone())),
                implicit: false,
            })
            .collect();
        meta.sort_by_key(|d| d.level);

        let from = self.side(&self.raw.from)?;
        let to = self.side(&self.raw.to)?;
        for t in &to {
            if let Some(f) = from.iter().find(|f| f.name == t.name) {
                if f != t {
                    let pos = self
                        .raw
                        .to
                        .decls
                        .iter()
                        .find(|d| d.name == t.name)
                        .map(|d| d.pos)
                        .unwrap_or(self.raw.pos);
                    return Err(duplicate(&t.name, pos));
                }
            }
        }

        for ((level, name), imp) in &self.implicit {
            meta.push(MetaDecl {
                name: name.clone(),
                level: *level,
                ty: MetaRef::new(
                    0,
                    if imp.ends.is_some() {
                        ROOT_ARROW
                    } else {
                        ROOT_NODE
                    },
                ),
                constant: true,
                potency: None,
                multiplicity: None,
                ends: imp.ends.clone(),
                implicit: true,
            });
        }
        Ok(McmtRule {
            name: self.raw.name.clone(),
            meta,
            from,
            to,
        })
    }

    /// Level of an explicit META declaration, resolving its type on the way.
    fn meta_level(&mut self, name: &str) -> Result<usize, RuleError> {
        if let Some(&l) = self.levels.get(name) {
            return Ok(l);
        }
        let decl = *self.meta_decls.get(name).expect("caller checks the name");
        if !self.visiting.insert(name.to_string()) {
            return Err(invalid(name, decl.pos, "cyclic typing"));
        }
        let (level, ty) = match self.meta_assigns.get(name).copied() {
            None => {
                let ty = self.meta_type(decl, None)?;
                (ty.level + 1, ty)
            }
            Some(a) => {
                for end in [&a.source, &a.target] {
                    if !self.meta_decls.contains_key(end.as_str())
                        || self.meta_assigns.contains_key(end.as_str())
                    {
                        return Err(unresolved(end, a.pos));
                    }
                }
                let ls = self.meta_level(&a.source)?;
                let lt = self.meta_level(&a.target)?;
                if ls != lt {
                    return Err(invalid(
                        name,
                        decl.pos,
                        "arrow endpoints live on different levels",
                    ));
                }
                let ty = self.meta_type(decl, Some((&a.source, &a.target)))?;
                (ls, ty)
            }
        };
        self.visiting.remove(name);
        self.levels.insert(name.to_string(), level);
        self.types.insert(name.to_string(), ty);
        Ok(level)
    }

    /// The name of the type of META element `r` at level `at`.
    fn transitive(&self, r: &MetaRef, at: usize) -> Option<String> {
        let mut cur = r.clone();
        while cur.level > at {
            if self.implicit.contains_key(&(cur.level, cur.name.clone()))
                && self.levels.get(&cur.name) != Some(&cur.level)
            {
                cur = MetaRef::new(0, ROOT_NODE);
                continue;
            }
            cur = self.types.get(&cur.name)?.clone();
        }
        (cur.level == at).then_some(cur.name)
    }

    fn meta_type(
        &mut self,
        decl: &RawDecl,
        ends: Option<(&str, &str)>,
    ) -> Result<MetaRef, RuleError> {
        match decl.mm {
            Some(0) => Ok(MetaRef::new(0, decl.ty.clone())),
            Some(k) => {
                if decl.ty != decl.name
                    && self.meta_decls.contains_key(decl.ty.as_str())
                    && self.meta_level(&decl.ty)? == k
                {
                    return Ok(MetaRef::new(k, decl.ty.clone()));
                }
                let ends = match ends {
                    Some((s, t)) => {
                        let s_ty = MetaRef::new(self.levels[s], s.to_string());
                        let t_ty = MetaRef::new(self.levels[t], t.to_string());
                        Some((self.transitive(&s_ty, k), self.transitive(&t_ty, k)))
                    }
                    None => None,
                };
                self.add_implicit(decl, k, ends)
            }
            None => {
                if decl.ty != decl.name && self.meta_decls.contains_key(decl.ty.as_str()) {
                    let l = self.meta_level(&decl.ty)?;
                    return Ok(MetaRef::new(l, decl.ty.clone()));
                }
                if decl.ty == ROOT_NODE || decl.ty == ROOT_ARROW {
                    return Ok(MetaRef::new(0, decl.ty.clone()));
                }
                Err(unresolved(&decl.ty, decl.pos))
            }
        }
    }

    fn add_implicit(
        &mut self,
        decl: &RawDecl,
        level: usize,
        ends: Option<(Option<String>, Option<String>)>,
    ) -> Result<MetaRef, RuleError> {
        let ends = match ends {
            Some((Some(s), Some(t))) => Some((s, t)),
            Some(_) => {
                return Err(invalid(
                    &decl.name,
                    decl.pos,
                    format!(
                        "cannot infer the endpoints of `{}` at level {level}",
                        decl.ty
                    ),
                ))
            }
            None => None,
        };
        match self.implicit.get(&(level, decl.ty.clone())) {
            Some(existing) if existing.ends != ends => Err(invalid(
                &decl.name,
                decl.pos,
                format!("conflicting uses of `{}` at level {level}", decl.ty),
            )),
            Some(_) => Ok(MetaRef::new(level, decl.ty.clone())),
            None => {
                self.implicit
                    .insert((level, decl.ty.clone()), Implicit { ends });
                Ok(MetaRef::new(level, decl.ty.clone()))
            }
        }
    }

    fn side(&mut self, block: &'a RawBlock) -> Result<Vec<PatternDecl>, RuleError> {
        let (decls, assigns) = index_block(block)?;
        let mut types: BTreeMap<&str, MetaRef> = BTreeMap::new();
        for d in block
            .decls
            .iter()
            .filter(|d| !assigns.contains_key(d.name.as_str()))
        {
            let ty = self.pattern_type(d, None)?;
            types.insert(&d.name, ty);
        }
        for d in block
            .decls
            .iter()
            .filter(|d| assigns.contains_key(d.name.as_str()))
        {
            let a = assigns[d.name.as_str()];
            let mut ends = Vec::new();
            for end in [&a.source, &a.target] {
                match types.get(end.as_str()) {
                    Some(t) => ends.push(t.clone()),
                    None => return Err(unresolved(end, a.pos)),
                }
            }
            let ty = self.pattern_type(d, Some((&ends[0], &ends[1])))?;
            types.insert(&d.name, ty);
        }
        let _ = decls;
        Ok(block
            .decls
            .iter()
            .map(|d| PatternDecl {
                name: d.name.clone(),
                ty: types[d.name.as_str()].clone(),
                constant: d.constant,
                potency: d.potency,
                ends: assigns
                    .get(d.name.as_str())
                    .map(|a| (a.source.clone(), a.target.clone())),
            })
            .collect())
    }

    fn pattern_type(
        &mut self,
        d: &RawDecl,
        ends: Option<(&MetaRef, &MetaRef)>,
    ) -> Result<MetaRef, RuleError> {
        match d.mm {
            Some(0) => Ok(MetaRef::new(0, d.ty.clone())),
            Some(k) => {
                if self.levels.get(&d.ty) == Some(&k) {
                    return Ok(MetaRef::new(k, d.ty.clone()));
                }
                let ends = ends.map(|(s, t)| (self.transitive(s, k), self.transitive(t, k)));
                self.add_implicit(d, k, ends)
            }
            None => {
                if let Some(&l) = self.levels.get(&d.ty) {
                    return Ok(MetaRef::new(l, d.ty.clone()));
                }
                let implicit: Vec<usize> = self
                    .implicit
                    .keys()
                    .filter(|(_, n)| n == &d.ty)
                    .map(|(l, _)| *l)
                    .collect();
                if let [l] = implicit.as_slice() {
                    return Ok(MetaRef::new(*l, d.ty.clone()));
                }
                if d.ty == ROOT_NODE || d.ty == ROOT_ARROW {
                    return Ok(MetaRef::new(0, d.ty.clone()));
                }
                Err(unresolved(&d.ty, d.pos))
            }
        }
    }
}
