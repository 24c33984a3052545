//! Directed multigraphs with named elements.
//!
//! Nodes are identified by name. Arrows are identified by the full triple
//! `(source, label, target)`, so two arrows may share a label as long as
//! their endpoints differ.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate arrow {0}")]
    DuplicateArrow(Arrow),
    #[error("arrow {arrow} refers to undeclared node `{node}`")]
    DanglingArrow { arrow: Arrow, node: String },
    #[error("morphism from `{left}` cannot be composed with morphism from `{right}`")]
    GraphMismatch { left: String, right: String },
    #[error("morphism is not an inclusion: {0}")]
    NotInclusion(String),
    #[error("morphism is not a total homomorphism: {0}")]
    NotTotal(String),
    #[error("deleting node `{node}` would leave arrow {arrow} dangling")]
    DanglingDeletion { node: String, arrow: Arrow },
    #[error("element {0} is both preserved and deleted")]
    DeletionConflict(Element),
}

/// An arrow, identified by its full triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arrow {
    pub source: String,
    pub label: String,
    pub target: String,
}

impl Arrow {
    pub fn new(
        source: impl Into<String>,
        label: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Arrow {
            source: source.into(),
            label: label.into(),
            target: target.into(),
        }
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}->{}", self.source, self.label, self.target)
    }
}

/// Either a node or an arrow of some graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Node(String),
    Arrow(Arrow),
}

impl Element {
    pub fn node(name: impl Into<String>) -> Self {
        Element::Node(name.into())
    }

    pub fn arrow(
        source: impl Into<String>,
        label: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Element::Arrow(Arrow::new(source, label, target))
    }

    /// The node name, or the arrow label.
    pub fn name(&self) -> &str {
        match self {
            Element::Node(n) => n,
            Element::Arrow(a) => &a.label,
        }
    }

    pub fn is_node(&self) -> bool {
        matches!(self, Element::Node(_))
    }

    pub fn as_arrow(&self) -> Option<&Arrow> {
        match self {
            Element::Arrow(a) => Some(a),
            Element::Node(_) => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Node(n) => f.write_str(n),
            Element::Arrow(a) => a.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    name: String,
    nodes: BTreeSet<String>,
    arrows: BTreeSet<Arrow>,
}

impl Graph {
    pub fn empty(name: impl Into<String>) -> Self {
        Graph {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Builds a graph, rejecting duplicate nodes, duplicate arrow triples and
    /// arrows whose endpoints are not declared.
    pub fn build<N, A, S>(name: impl Into<String>, nodes: N, arrows: A) -> Result<Self, GraphError>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        A: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut graph = Graph::empty(name);
        for n in nodes {
            graph.add_node(n)?;
        }
        for (s, l, t) in arrows {
            graph.add_arrow(Arrow::new(s, l, t))?;
        }
        Ok(graph)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> Result<(), GraphError> {
        let name = name.into();
        if self.nodes.contains(&name) {
            return Err(GraphError::DuplicateNode(name));
        }
        self.nodes.insert(name);
        Ok(())
    }

    pub fn add_arrow(&mut self, arrow: Arrow) -> Result<(), GraphError> {
        for end in [&arrow.source, &arrow.target] {
            if !self.nodes.contains(end) {
                return Err(GraphError::DanglingArrow {
                    node: end.clone(),
                    arrow: arrow.clone(),
                });
            }
        }
        if self.arrows.contains(&arrow) {
            return Err(GraphError::DuplicateArrow(arrow));
        }
        self.arrows.insert(arrow);
        Ok(())
    }

    pub fn add_element(&mut self, element: Element) -> Result<(), GraphError> {
        match element {
            Element::Node(n) => self.add_node(n),
            Element::Arrow(a) => self.add_arrow(a),
        }
    }

    /// Removes an element. Removing a node also removes its incident arrows.
    pub fn remove(&mut self, element: &Element) {
        match element {
            Element::Node(n) => {
                self.nodes.remove(n);
                self.arrows.retain(|a| &a.source != n && &a.target != n);
            }
            Element::Arrow(a) => {
                self.arrows.remove(a);
            }
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &String> + Clone {
        self.nodes.iter()
    }

    pub fn arrows(&self) -> impl ExactSizeIterator<Item = &Arrow> + Clone {
        self.arrows.iter()
    }

    /// Nodes first, then arrows, both in name order.
    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.nodes
            .iter()
            .cloned()
            .map(Element::Node)
            .chain(self.arrows.iter().cloned().map(Element::Arrow))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arrow_count(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_node(&self, name: &str) -> bool {
        self.nodes.contains(name)
    }

    pub fn has_arrow(&self, arrow: &Arrow) -> bool {
        self.arrows.contains(arrow)
    }

    pub fn contains(&self, element: &Element) -> bool {
        match element {
            Element::Node(n) => self.has_node(n),
            Element::Arrow(a) => self.has_arrow(a),
        }
    }

    pub fn outgoing<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Arrow> + 'a {
        self.arrows.iter().filter(move |a| a.source == node)
    }

    pub fn incoming<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Arrow> + 'a {
        self.arrows.iter().filter(move |a| a.target == node)
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.nodes.is_subset(&other.nodes) && self.arrows.is_subset(&other.arrows)
    }

    pub fn intersection(&self, other: &Graph, name: impl Into<String>) -> Graph {
        Graph {
            name: name.into(),
            nodes: self.nodes.intersection(&other.nodes).cloned().collect(),
            arrows: self.arrows.intersection(&other.arrows).cloned().collect(),
        }
    }

    /// The subgraph spanned by `elements`; arrows whose endpoints are not
    /// both kept are dropped.
    pub fn restrict<'a>(
        &self,
        elements: impl IntoIterator<Item = &'a Element>,
        name: impl Into<String>,
    ) -> Graph {
        let mut nodes = BTreeSet::new();
        let mut arrows = BTreeSet::new();
        for e in elements {
            match e {
                Element::Node(n) if self.nodes.contains(n) => {
                    nodes.insert(n.clone());
                }
                Element::Arrow(a) if self.arrows.contains(a) => {
                    arrows.insert(a.clone());
                }
                _ => {}
            }
        }
        arrows.retain(|a: &Arrow| nodes.contains(&a.source) && nodes.contains(&a.target));
        Graph {
            name: name.into(),
            nodes,
            arrows,
        }
    }

    /// Checks that `elements` are closed under taking arrow endpoints.
    pub fn is_closed<'a>(elements: impl IntoIterator<Item = &'a Element> + Clone) -> bool {
        let nodes: BTreeSet<&String> = elements
            .clone()
            .into_iter()
            .filter_map(|e| match e {
                Element::Node(n) => Some(n),
                _ => None,
            })
            .collect();
        elements.into_iter().all(|e| match e {
            Element::Arrow(a) => nodes.contains(&a.source) && nodes.contains(&a.target),
            Element::Node(_) => true,
        })
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.name)?;
        let mut first = true;
        for e in self.elements() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, " {e}")?;
        }
        f.write_str(" }")
    }
}
