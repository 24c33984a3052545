//! Tree-shaped multilevel hierarchies of models.
//!
//! Every element carries a direct type in an ancestor model (or, for the
//! root, in the root itself), a potency interval and, for arrows, a
//! multiplicity. The root is self-typed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, GraphChain, MultilevelTyping};
use crate::graph::{Arrow, Element, Graph, GraphError};
use crate::typing::TypedLevels;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("inheritance cycle through `{model}.{node}`")]
    InheritanceCycle { model: String, node: String },
    #[error("`{model}.{node}` inherits conflicting types")]
    TypeConflict { model: String, node: String },
}

/// Allowed level jumps of instances, `min-max`; `max = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Potency {
    pub min: u32,
    pub max: Option<u32>,
}

impl Potency {
    pub const DEFAULT: Potency = Potency {
        min: 1,
        max: Some(1),
    };
    pub const UNBOUNDED: Potency = Potency { min: 1, max: None };

    pub fn new(min: u32, max: Option<u32>) -> Self {
        Potency { min, max }
    }

    pub fn allows(&self, jump: u32) -> bool {
        jump >= self.min && self.max.is_none_or(|m| jump <= m)
    }

    /// Whether `self` is contained in `other`.
    pub fn within(&self, other: &Potency) -> bool {
        self.min >= other.min
            && match (self.max, other.max) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a <= b,
            }
    }
}

impl Default for Potency {
    fn default() -> Self {
        Potency::DEFAULT
    }
}

impl fmt::Display for Potency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) => write!(f, "{}-{}", self.min, m),
            None => write!(f, "{}-*", self.min),
        }
    }
}

impl FromStr for Potency {
    type Err = String;

    /// Accepts `a`, `a-b` and `a-*`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid potency `{s}`");
        let (min, max) = match s.split_once('-') {
            Some((a, "*")) => (a.parse().map_err(|_| bad())?, None),
            Some((a, b)) => (
                a.parse().map_err(|_| bad())?,
                Some(b.parse().map_err(|_| bad())?),
            ),
            None => {
                let a = s.parse().map_err(|_| bad())?;
                (a, Some(a))
            }
        };
        if max.is_some_and(|m| m < min) {
            return Err(format!("potency `{s}` has max below min"));
        }
        Ok(Potency { min, max })
    }
}

/// Arrow multiplicity `lower..upper`; `upper = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiplicity {
    pub lower: u32,
    pub upper: Option<u32>,
}

impl Multiplicity {
    pub const DEFAULT: Multiplicity = Multiplicity {
        lower: 0,
        upper: None,
    };

    pub fn new(lower: u32, upper: Option<u32>) -> Self {
        Multiplicity { lower, upper }
    }

    /// Whether `self` is contained in `other`.
    pub fn within(&self, other: &Multiplicity) -> bool {
        self.lower >= other.lower
            && match (self.upper, other.upper) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a <= b,
            }
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Multiplicity::DEFAULT
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "{}..{}", self.lower, u),
            None => write!(f, "{}..n", self.lower),
        }
    }
}

impl FromStr for Multiplicity {
    type Err = String;

    /// Accepts `l..u` where `u` is a number, `n` or `*`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid multiplicity `{s}`");
        let (l, u) = s.split_once("..").ok_or_else(bad)?;
        let lower = l.parse().map_err(|_| bad())?;
        let upper = match u {
            "n" | "*" => None,
            _ => Some(u.parse().map_err(|_| bad())?),
        };
        if upper.is_some_and(|u| u < lower) {
            return Err(format!("multiplicity `{s}` has upper below lower"));
        }
        Ok(Multiplicity { lower, upper })
    }
}

/// A type: an element of a named model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeRef {
    pub model: String,
    pub element: Element,
}

impl TypeRef {
    pub fn new(model: impl Into<String>, element: Element) -> Self {
        TypeRef {
            model: model.into(),
            element,
        }
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.model, self.element.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementInfo {
    pub ty: TypeRef,
    pub potency: Potency,
    /// Only meaningful for arrows.
    pub multiplicity: Multiplicity,
    /// Same-model nodes this node inherits from.
    pub supertypes: BTreeSet<String>,
}

impl ElementInfo {
    pub fn typed(ty: TypeRef) -> Self {
        ElementInfo {
            ty,
            potency: Potency::DEFAULT,
            multiplicity: Multiplicity::DEFAULT,
            supertypes: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub name: String,
    pub parent: Option<String>,
    /// Distance from the root.
    pub level: usize,
    pub graph: Graph,
    pub info: BTreeMap<Element, ElementInfo>,
}

impl Model {
    pub fn info(&self, e: &Element) -> Option<&ElementInfo> {
        self.info.get(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilevelHierarchy {
    models: Vec<Model>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    MissingType,
    /// The type lives in a model that is not a strict ancestor.
    JumpOutOfRange {
        type_model: String,
    },
    UnknownType(TypeRef),
    /// A node typed by an arrow or the other way round.
    KindMismatch(TypeRef),
    RootNotSelfTyped,
    /// Arrow endpoints are not typed by the endpoints of the arrow's type.
    DanglingTyping {
        endpoint: String,
    },
    PotencyViolation {
        jump: u32,
        potency: Potency,
    },
    UnknownSupertype(String),
    InheritanceCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub model: String,
    pub element: Element,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: ", self.model, self.element)?;
        match &self.kind {
            ViolationKind::MissingType => write!(f, "element has no type"),
            ViolationKind::JumpOutOfRange { type_model } => {
                write!(f, "type model `{type_model}` is not above this model")
            }
            ViolationKind::UnknownType(t) => write!(f, "type {t} does not exist"),
            ViolationKind::KindMismatch(t) => write!(f, "type {t} is of the wrong kind"),
            ViolationKind::RootNotSelfTyped => write!(f, "root elements must be typed in the root"),
            ViolationKind::DanglingTyping { endpoint } => {
                write!(f, "endpoint `{endpoint}` is not typed by the matching endpoint of the arrow's type")
            }
            ViolationKind::PotencyViolation { jump, potency } => {
                write!(f, "level jump {jump} outside the type's potency {potency}")
            }
            ViolationKind::UnknownSupertype(s) => write!(f, "unknown supertype `{s}`"),
            ViolationKind::InheritanceCycle => write!(f, "inheritance cycle"),
        }
    }
}

impl MultilevelHierarchy {
    /// Builds a hierarchy from models in any order. Levels are recomputed
    /// from the tree shape.
    pub fn new(mut models: Vec<Model>) -> Result<Self, HierarchyError> {
        let names: BTreeSet<&str> = models.iter().map(|m| m.name.as_str()).collect();
        if names.len() != models.len() {
            return Err(HierarchyError::Schema("duplicate model names".into()));
        }
        let roots = models.iter().filter(|m| m.parent.is_none()).count();
        if roots != 1 {
            return Err(HierarchyError::Schema(format!(
                "expected exactly one root model, found {roots}"
            )));
        }
        if let Some(m) = models
            .iter()
            .find(|m| m.parent.as_deref().is_some_and(|p| !names.contains(p)))
        {
            return Err(HierarchyError::Schema(format!(
                "model `{}` has unknown parent `{}`",
                m.name,
                m.parent.as_deref().unwrap_or_default()
            )));
        }
        let parents: BTreeMap<String, Option<String>> = models
            .iter()
            .map(|m| (m.name.clone(), m.parent.clone()))
            .collect();
        for m in &mut models {
            let mut level = 0;
            let mut cur = m.parent.clone();
            while let Some(p) = cur {
                level += 1;
                if level > parents.len() {
                    return Err(HierarchyError::Schema(format!(
                        "model `{}` is on a parent cycle",
                        m.name
                    )));
                }
                cur = parents[&p].clone();
            }
            m.level = level;
        }
        Ok(MultilevelHierarchy { models })
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn root(&self) -> &Model {
        self.models
            .iter()
            .find(|m| m.parent.is_none())
            .expect("one root")
    }

    pub fn model(&self, name: &str) -> Option<&Model> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn model_mut(&mut self, name: &str) -> Option<&mut Model> {
        self.models.iter_mut().find(|m| m.name == name)
    }

    /// Finds a model by name or by a dotted path whose last components
    /// follow the parent links, e.g. `hammer_plant.hammer_config`.
    pub fn find(&self, path: &str) -> Result<&Model, HierarchyError> {
        let mut parts = path.rsplit('.');
        let last = parts.next().unwrap_or_default();
        let model = self
            .model(last)
            .ok_or_else(|| HierarchyError::UnknownModel(path.to_string()))?;
        let mut cur = model;
        for p in parts {
            match cur.parent.as_deref().and_then(|q| self.model(q)) {
                Some(parent) if parent.name == p => cur = parent,
                _ => return Err(HierarchyError::UnknownModel(path.to_string())),
            }
        }
        Ok(model)
    }

    /// Models from the root down to `name`, inclusive.
    pub fn branch(&self, name: &str) -> Result<Vec<&Model>, HierarchyError> {
        let mut out = Vec::new();
        let mut cur = self.model(name);
        if cur.is_none() {
            return Err(HierarchyError::UnknownModel(name.to_string()));
        }
        while let Some(m) = cur {
            out.push(m);
            cur = m.parent.as_deref().and_then(|p| self.model(p));
        }
        out.reverse();
        Ok(out)
    }

    /// The branch ending at `name` as graphs with direct types.
    pub fn typed_levels(&self, name: &str) -> Result<TypedLevels, HierarchyError> {
        let branch = self.branch(name)?;
        let level_of: BTreeMap<&str, usize> =
            branch.iter().map(|m| (m.name.as_str(), m.level)).collect();
        let types = branch
            .iter()
            .map(|m| {
                m.info
                    .iter()
                    .filter_map(|(e, info)| {
                        level_of
                            .get(info.ty.model.as_str())
                            .map(|&l| (e.clone(), (l, info.ty.element.clone())))
                    })
                    .collect()
            })
            .collect();
        Ok(TypedLevels {
            graphs: branch.iter().map(|m| m.graph.clone()).collect(),
            types,
        })
    }

    /// The typing chain of `name` (root first, `name` last) together with
    /// the multilevel typing of `name` over its ancestors.
    pub fn derive_typing_chain(
        &self,
        name: &str,
    ) -> Result<(GraphChain, MultilevelTyping), HierarchyError> {
        let levels = self.typed_levels(name)?;
        let chain = levels.chain()?;
        if levels.depth() == 0 {
            let root = levels.graphs[0].clone();
            let typing = MultilevelTyping {
                subject: root.clone(),
                chain: GraphChain::single(root.clone()),
                sigmas: vec![crate::morphism::Morphism::identity(&root)],
            };
            return Ok((chain, typing));
        }
        let typing = levels.bottom_typing()?;
        Ok((chain, typing))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        for model in &self.models {
            self.validate_model(model, &mut report);
        }
        report
    }

    fn validate_model(&self, model: &Model, report: &mut Vec<Violation>) {
        let mut push = |element: &Element, kind| {
            report.push(Violation {
                model: model.name.clone(),
                element: element.clone(),
                kind,
            })
        };
        let levels = self.typed_levels(&model.name).expect("model exists");
        let ancestors: BTreeMap<&str, &Model> = self
            .branch(&model.name)
            .expect("model exists")
            .into_iter()
            .map(|m| (m.name.as_str(), m))
            .collect();
        for e in model.graph.elements() {
            let Some(info) = model.info(&e) else {
                push(&e, ViolationKind::MissingType);
                continue;
            };
            let ty = &info.ty;
            let type_model = match ancestors.get(ty.model.as_str()) {
                Some(tm) if tm.level < model.level || (model.level == 0 && tm.level == 0) => *tm,
                _ if model.level == 0 => {
                    push(&e, ViolationKind::RootNotSelfTyped);
                    continue;
                }
                _ => {
                    push(
                        &e,
                        ViolationKind::JumpOutOfRange {
                            type_model: ty.model.clone(),
                        },
                    );
                    continue;
                }
            };
            if e.is_node() != ty.element.is_node() {
                push(&e, ViolationKind::KindMismatch(ty.clone()));
                continue;
            }
            if !type_model.graph.contains(&ty.element) {
                push(&e, ViolationKind::UnknownType(ty.clone()));
                continue;
            }
            if model.level == 0 {
                continue;
            }
            if let (Element::Arrow(a), Element::Arrow(t)) = (&e, &ty.element) {
                for (end, expected) in [(&a.source, &t.source), (&a.target, &t.target)] {
                    let got = levels.transitive_type(
                        model.level,
                        &Element::node(end.clone()),
                        type_model.level,
                    );
                    if got.as_ref() != Some(&Element::node(expected.clone())) {
                        push(
                            &e,
                            ViolationKind::DanglingTyping {
                                endpoint: end.clone(),
                            },
                        );
                    }
                }
            }
            let jump = (model.level - type_model.level) as u32;
            if let Some(tinfo) = type_model.info(&ty.element) {
                if !tinfo.potency.allows(jump) {
                    push(
                        &e,
                        ViolationKind::PotencyViolation {
                            jump,
                            potency: tinfo.potency,
                        },
                    );
                }
            }
        }
        for (e, info) in &model.info {
            for s in &info.supertypes {
                if !model.graph.has_node(s) {
                    push(e, ViolationKind::UnknownSupertype(s.clone()));
                }
            }
        }
        for n in model.graph.nodes() {
            if inheritance_cycle(model, n) {
                push(&Element::node(n.clone()), ViolationKind::InheritanceCycle);
            }
        }
    }

    /// Replaces every inheritance edge by copies of the parent's type,
    /// potency and incident arrows.
    pub fn flatten_inheritance(&self) -> Result<Self, HierarchyError> {
        let mut out = self.clone();
        for model in &mut out.models {
            flatten_model(model)?;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HierarchyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HierarchyError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let file: FileHierarchy =
            serde_json::from_str(text).map_err(|e| HierarchyError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        file.resolve()
    }

    pub fn to_json(&self) -> String {
        let file = FileHierarchy {
            models: self.models.iter().map(FileModel::from_model).collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("serialisable");
        s.push('\n');
        s
    }
}

fn inheritance_cycle(model: &Model, start: &str) -> bool {
    let mut stack: Vec<&str> = vec![start];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if let Some(info) = model.info(&Element::node(n)) {
            for s in &info.supertypes {
                if s == start {
                    return true;
                }
                if seen.insert(s.as_str()) {
                    stack.push(s);
                }
            }
        }
    }
    false
}

fn flatten_model(model: &mut Model) -> Result<(), HierarchyError> {
    // parents before children
    let mut order: Vec<String> = Vec::new();
    let mut done = BTreeSet::new();
    fn visit(
        model: &Model,
        n: &str,
        order: &mut Vec<String>,
        done: &mut BTreeSet<String>,
        active: &mut BTreeSet<String>,
    ) -> Result<(), HierarchyError> {
        if done.contains(n) {
            return Ok(());
        }
        if !active.insert(n.to_string()) {
            return Err(HierarchyError::InheritanceCycle {
                model: model.name.clone(),
                node: n.to_string(),
            });
        }
        if let Some(info) = model.info(&Element::node(n)) {
            for s in &info.supertypes {
                visit(model, s, order, done, active)?;
            }
        }
        active.remove(n);
        done.insert(n.to_string());
        order.push(n.to_string());
        Ok(())
    }
    let nodes: Vec<String> = model.graph.nodes().cloned().collect();
    for n in &nodes {
        visit(model, n, &mut order, &mut done, &mut BTreeSet::new())?;
    }
    for n in order {
        let key = Element::node(n.clone());
        let supers = match model.info(&key) {
            Some(info) if !info.supertypes.is_empty() => info.supertypes.clone(),
            _ => continue,
        };
        for s in &supers {
            let parent = model
                .info(&Element::node(s.clone()))
                .cloned()
                .ok_or_else(|| {
                    HierarchyError::Schema(format!(
                        "unknown supertype `{s}` of `{}.{n}`",
                        model.name
                    ))
                })?;
            let info = model.info.get_mut(&key).expect("checked");
            if info.ty != parent.ty {
                return Err(HierarchyError::TypeConflict {
                    model: model.name.clone(),
                    node: n.clone(),
                });
            }
            info.potency = parent.potency;
            let incident: Vec<Arrow> = model
                .graph
                .arrows()
                .filter(|a| &a.source == s || &a.target == s)
                .cloned()
                .collect();
            for a in incident {
                let swap = |x: &String| if x == s { n.clone() } else { x.clone() };
                let copy = Arrow::new(swap(&a.source), a.label.clone(), swap(&a.target));
                if !model.graph.has_arrow(&copy) {
                    model.graph.add_arrow(copy.clone())?;
                    let ainfo = model.info[&Element::Arrow(a.clone())].clone();
                    model.info.insert(Element::Arrow(copy), ainfo);
                }
            }
        }
        model
            .info
            .get_mut(&key)
            .expect("checked")
            .supertypes
            .clear();
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHierarchy {
    models: Vec<FileModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    name: String,
    parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
    #[serde(default)]
    nodes: Vec<FileNode>,
    #[serde(default)]
    arrows: Vec<FileArrow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNode {
    name: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    ty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    potency: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    supertypes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileArrow {
    name: String,
    source: String,
    target: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    potency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multiplicity: Option<String>,
}

impl FileModel {
    fn from_model(m: &Model) -> Self {
        let potency = |e: &Element| {
            m.info(e)
                .map(|i| i.potency)
                .filter(|p| *p != Potency::DEFAULT)
                .map(|p| p.to_string())
        };
        FileModel {
            name: m.name.clone(),
            parent: m.parent.clone(),
            level: None,
            nodes: m
                .graph
                .nodes()
                .map(|n| {
                    let e = Element::node(n.clone());
                    let info = m.info(&e);
                    FileNode {
                        name: n.clone(),
                        ty: info.map(|i| i.ty.to_string()),
                        potency: potency(&e),
                        supertypes: info
                            .map(|i| i.supertypes.iter().cloned().collect())
                            .unwrap_or_default(),
                    }
                })
                .collect(),
            arrows: m
                .graph
                .arrows()
                .map(|a| {
                    let e = Element::Arrow(a.clone());
                    let info = m.info(&e);
                    FileArrow {
                        name: a.label.clone(),
                        source: a.source.clone(),
                        target: a.target.clone(),
                        ty: info.map(|i| i.ty.to_string()).unwrap_or_default(),
                        potency: potency(&e),
                        multiplicity: info
                            .map(|i| i.multiplicity)
                            .filter(|x| *x != Multiplicity::DEFAULT)
                            .map(|x| x.to_string()),
                    }
                })
                .collect(),
        }
    }
}

fn split_ref(s: &str) -> Result<(&str, &str), HierarchyError> {
    s.split_once('.').ok_or_else(|| {
        HierarchyError::Schema(format!("type `{s}` is not of the form model.element"))
    })
}

impl FileHierarchy {
    fn resolve(self) -> Result<MultilevelHierarchy, HierarchyError> {
        let schema = HierarchyError::Schema;
        let mut models = Vec::new();
        for fm in &self.models {
            let mut graph = Graph::empty(fm.name.clone());
            for n in &fm.nodes {
                graph
                    .add_node(n.name.clone())
                    .map_err(|e| schema(format!("model `{}`: {e}", fm.name)))?;
            }
            for a in &fm.arrows {
                graph
                    .add_arrow(Arrow::new(
                        a.source.clone(),
                        a.name.clone(),
                        a.target.clone(),
                    ))
                    .map_err(|e| schema(format!("model `{}`: {e}", fm.name)))?;
            }
            models.push(Model {
                name: fm.name.clone(),
                parent: fm.parent.clone(),
                level: 0,
                graph,
                info: BTreeMap::new(),
            });
        }
        let mut h = MultilevelHierarchy::new(models)?;
        for fm in &self.models {
            let level = h.model(&fm.name).expect("just built").level;
            if fm.level.is_some_and(|l| l != level) {
                return Err(schema(format!(
                    "model `{}` declares level {} but sits at level {level}",
                    fm.name,
                    fm.level.unwrap_or_default()
                )));
            }
        }

        // node types first, inherited types resolved to a fixpoint
        let mut pending: Vec<(String, &FileNode)> = Vec::new();
        for fm in &self.models {
            for n in &fm.nodes {
                pending.push((fm.name.clone(), n));
            }
        }
        let mut node_info: BTreeMap<(String, String), ElementInfo> = BTreeMap::new();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for (model, n) in pending {
                let own = match &n.ty {
                    Some(t) => {
                        let (tm, te) = split_ref(t)?;
                        let type_model = h.model(tm).ok_or_else(|| {
                            schema(format!(
                                "`{model}.{}` refers to unknown model `{tm}`",
                                n.name
                            ))
                        })?;
                        if !type_model.graph.has_node(te) {
                            return Err(schema(format!(
                                "`{model}.{}` refers to unknown node type `{t}`",
                                n.name
                            )));
                        }
                        Some(TypeRef::new(tm, Element::node(te)))
                    }
                    None => None,
                };
                let inherited: Option<Option<TypeRef>> = match n.supertypes.first() {
                    Some(s) => node_info
                        .get(&(model.clone(), s.clone()))
                        .map(|i| Some(i.ty.clone())),
                    None => Some(None),
                };
                let Some(inherited) = inherited else {
                    rest.push((model, n));
                    continue;
                };
                let ty = match (own, inherited) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(HierarchyError::TypeConflict {
                            model,
                            node: n.name.clone(),
                        })
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => {
                        return Err(schema(format!("node `{model}.{}` has no type", n.name)))
                    }
                };
                let potency = match &n.potency {
                    Some(p) => p.parse().map_err(schema)?,
                    None => Potency::DEFAULT,
                };
                node_info.insert(
                    (model.clone(), n.name.clone()),
                    ElementInfo {
                        ty,
                        potency,
                        multiplicity: Multiplicity::DEFAULT,
                        supertypes: n.supertypes.iter().cloned().collect(),
                    },
                );
            }
            if rest.len() == before {
                let (model, n) = &rest[0];
                return Err(HierarchyError::InheritanceCycle {
                    model: model.clone(),
                    node: n.name.clone(),
                });
            }
            pending = rest;
        }
        for ((model, node), info) in node_info {
            h.model_mut(&model)
                .expect("exists")
                .info
                .insert(Element::Node(node), info);
        }

        // arrow types, disambiguated by the types of their endpoints
        for fm in &self.models {
            let levels = h.typed_levels(&fm.name)?;
            let level = h.model(&fm.name).expect("exists").level;
            let mut infos = Vec::new();
            for a in &fm.arrows {
                let (tm, te) = split_ref(&a.ty)?;
                let type_model = h.model(tm).ok_or_else(|| {
                    schema(format!(
                        "arrow `{}.{}` refers to unknown model `{tm}`",
                        fm.name, a.name
                    ))
                })?;
                let candidates: Vec<&Arrow> = type_model
                    .graph
                    .arrows()
                    .filter(|t| t.label == te)
                    .collect();
                let chosen = match candidates.as_slice() {
                    [] => {
                        return Err(schema(format!(
                            "arrow `{}.{}` refers to unknown arrow type `{}`",
                            fm.name, a.name, a.ty
                        )))
                    }
                    [only] => (*only).clone(),
                    many => {
                        let ends = |n: &String| {
                            levels.transitive_type(
                                level,
                                &Element::node(n.clone()),
                                type_model.level,
                            )
                        };
                        let (s, t) = (ends(&a.source), ends(&a.target));
                        let fits: Vec<&&Arrow> = many
                            .iter()
                            .filter(|c| {
                                s == Some(Element::node(c.source.clone()))
                                    && t == Some(Element::node(c.target.clone()))
                            })
                            .collect();
                        match fits.as_slice() {
                            [one] => (**one).clone(),
                            _ => {
                                return Err(schema(format!(
                                    "arrow type `{}` of `{}.{}` is ambiguous",
                                    a.ty, fm.name, a.name
                                )))
                            }
                        }
                    }
                };
                infos.push((
                    Element::arrow(a.source.clone(), a.name.clone(), a.target.clone()),
                    ElementInfo {
                        ty: TypeRef::new(tm, Element::Arrow(chosen)),
                        potency: match &a.potency {
                            Some(p) => p.parse().map_err(schema)?,
                            None => Potency::DEFAULT,
                        },
                        multiplicity: match &a.multiplicity {
                            Some(m) => m.parse().map_err(schema)?,
                            None => Multiplicity::DEFAULT,
                        },
                        supertypes: BTreeSet::new(),
                    },
                ));
            }
            h.model_mut(&fm.name).expect("exists").info.extend(infos);
        }
        Ok(h)
    }
}
