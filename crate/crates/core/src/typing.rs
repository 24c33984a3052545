//! Stacks of graphs whose elements carry a direct type at a higher level.
//!
//! Both a branch of a hierarchy and the META part of a rule are described
//! this way; the partial typings of a graph chain are derived from it.

use std::collections::BTreeMap;

use crate::chain::{ChainError, GraphChain, MultilevelTyping};
use crate::graph::{Element, Graph};
use crate::morphism::Morphism;

/// A reference to an element at a given level of a [`TypedLevels`].
pub type LevelRef = (usize, Element);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypedLevels {
    /// Level 0 is the root.
    pub graphs: Vec<Graph>,
    /// Direct type of every element, per level.
    pub types: Vec<BTreeMap<Element, LevelRef>>,
}

impl TypedLevels {
    pub fn depth(&self) -> usize {
        self.graphs.len() - 1
    }

    pub fn direct_type(&self, level: usize, e: &Element) -> Option<&LevelRef> {
        self.types.get(level)?.get(e)
    }

    /// The type of `e` (living at `level`) at level `at`, following direct
    /// types upwards. `e` itself when `at == level`.
    pub fn transitive_type(&self, level: usize, e: &Element, at: usize) -> Option<Element> {
        let (mut lvl, mut cur) = (level, e.clone());
        while lvl > at {
            let (tl, t) = self.direct_type(lvl, &cur)?;
            if *tl >= lvl {
                return None;
            }
            lvl = *tl;
            cur = t.clone();
        }
        (lvl == at).then_some(cur)
    }

    /// `τ_{j,i}` collecting the transitive types of level `j` at level `i`.
    pub fn typing(&self, j: usize, i: usize) -> Morphism {
        let mut m = Morphism::new(self.graphs[j].name(), self.graphs[i].name());
        for e in self.graphs[j].elements() {
            if let Some(t) = self.transitive_type(j, &e, i) {
                m.map(e, t);
            }
        }
        m
    }

    pub fn chain(&self) -> Result<GraphChain, ChainError> {
        let mut typings = BTreeMap::new();
        for j in 1..self.graphs.len() {
            for i in 0..j {
                typings.insert((j, i), self.typing(j, i));
            }
        }
        GraphChain::new(self.graphs.clone(), typings)
    }

    /// The bottom level as a graph typed over the levels above it.
    pub fn bottom_typing(&self) -> Result<MultilevelTyping, ChainError> {
        let n = self.depth();
        let upper = TypedLevels {
            graphs: self.graphs[..n].to_vec(),
            types: self.types[..n].to_vec(),
        };
        Ok(MultilevelTyping {
            subject: self.graphs[n].clone(),
            chain: upper.chain()?,
            sigmas: (0..n).map(|i| self.typing(n, i)).collect(),
        })
    }

    /// Recovers direct types from a typing family: the type of `e` is its
    /// image at the lowest level above it where it is typed.
    pub fn direct_types_from(sigmas: &[Morphism], graph: &Graph) -> BTreeMap<Element, LevelRef> {
        graph
            .elements()
            .filter_map(|e| {
                (0..sigmas.len())
                    .rev()
                    .find_map(|i| sigmas[i].apply(&e).map(|t| (i, t)))
                    .map(|t| (e, t))
            })
            .collect()
    }
}
