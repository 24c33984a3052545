//! Multilevel model transformations: typed multigraphs organised in
//! metamodelling hierarchies, coupled rules written in a small DSL, their
//! proliferation into two-level rules, and in-place execution by co-span
//! rewriting.

pub mod chain;
pub mod engine;
pub mod graph;
pub mod hierarchy;
pub mod matcher;
pub mod mcmt;
pub mod morphism;
pub mod typing;

pub use chain::{
    chain_pullback_complement, chain_pushout, inclusion_chain, validate_chain_morphism, ChainError,
    ChainMorphism, GraphChain, MorphismViolation, MultilevelTyping,
};
pub use graph::{Arrow, Element, Graph, GraphError};
pub use morphism::{
    find_homomorphisms, pullback_complement, pushout, Morphism, PullbackComplement, Pushout,
};
pub use typing::TypedLevels;
