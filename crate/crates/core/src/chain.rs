//! Graph chains, chain morphisms and multilevel typings, together with the
//! pushout and pullback complement constructions on inclusion chains.
//!
//! Levels are indexed from the top: level 0 is the root graph and level `n`
//! the bottom of a chain of depth `n`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{Element, Graph, GraphError};
use crate::morphism::{pullback_complement, pushout, Morphism};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("typing {j}->{i} is not a partial homomorphism: {reason}")]
    InvalidTyping { j: usize, i: usize, reason: String },
    #[error("element {element} of level {level} has no type in the root")]
    NonTotalRootTyping { level: usize, element: Element },
    #[error("uniqueness fails on levels ({k}, {j}, {i}) at {element}")]
    UniquenessViolation {
        k: usize,
        j: usize,
        i: usize,
        element: Element,
    },
    #[error("level 0 of an inclusion chain must be the whole graph `{0}`")]
    RootMismatch(String),
    #[error("level {0} is not a subgraph of level 0")]
    NotSubgraph(usize),
    #[error("depth mismatch: {0}")]
    DepthMismatch(String),
    #[error("not an inclusion chain: {0}")]
    NotInclusionChain(String),
    #[error("typing compatibility fails on levels ({j}, {i}) at {element}")]
    CompatibilityViolation {
        j: usize,
        i: usize,
        element: Element,
    },
    #[error("level {level}: {source}")]
    AtLevel { level: usize, source: GraphError },
}

/// A sequence of graphs `G_0 (root) … G_n` with partial typings
/// `τ_{j,i}: G_j ⇀ G_i` for every `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphChain {
    graphs: Vec<Graph>,
    typings: BTreeMap<(usize, usize), Morphism>,
}

impl GraphChain {
    /// Builds a chain, checking that every typing is a partial homomorphism,
    /// that typings into the root are total, and the uniqueness condition
    /// `τ_{k,j};τ_{j,i} ⪯ τ_{k,i}`. Missing typings are taken to be empty.
    pub fn new(
        graphs: Vec<Graph>,
        mut typings: BTreeMap<(usize, usize), Morphism>,
    ) -> Result<Self, ChainError> {
        assert!(!graphs.is_empty(), "a chain has at least a root graph");
        let n = graphs.len() - 1;
        for j in 1..=n {
            for i in 0..j {
                let t = typings
                    .entry((j, i))
                    .or_insert_with(|| Morphism::new(graphs[j].name(), graphs[i].name()));
                t.check_partial(&graphs[j], &graphs[i])
                    .map_err(|reason| ChainError::InvalidTyping { j, i, reason })?;
            }
            let root = &typings[&(j, 0)];
            if let Some(element) = graphs[j].elements().find(|e| !root.is_defined(e)) {
                return Err(ChainError::NonTotalRootTyping { level: j, element });
            }
        }
        let chain = GraphChain { graphs, typings };
        chain.check_uniqueness()?;
        Ok(chain)
    }

    pub fn single(root: Graph) -> Self {
        GraphChain {
            graphs: vec![root],
            typings: BTreeMap::new(),
        }
    }

    fn check_uniqueness(&self) -> Result<(), ChainError> {
        let n = self.depth();
        for k in 2..=n {
            for j in 1..k {
                for i in 0..j {
                    let composed = self.typing(k, j).compose_unchecked(self.typing(j, i));
                    let direct = self.typing(k, i);
                    let bad = composed
                        .pairs()
                        .find(|(x, y)| direct.apply(x).as_ref() != Some(y));
                    if let Some((element, _)) = bad {
                        return Err(ChainError::UniquenessViolation { k, j, i, element });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.graphs.len() - 1
    }

    pub fn graph(&self, level: usize) -> &Graph {
        &self.graphs[level]
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn typing(&self, j: usize, i: usize) -> &Morphism {
        assert!(i < j, "typings go upwards");
        &self.typings[&(j, i)]
    }

    /// `τ_{j,i}`, also defined for `i == j`.
    pub fn typing_between(&self, j: usize, i: usize) -> Morphism {
        if i == j {
            Morphism::identity(&self.graphs[j])
        } else {
            self.typing(j, i).clone()
        }
    }

    /// Whether every graph is a subgraph of level 0 and every typing is the
    /// identity on the intersection of its two levels.
    pub fn is_inclusion_chain(&self) -> bool {
        let root = &self.graphs[0];
        self.graphs.iter().all(|g| g.is_subgraph_of(root))
            && self.typings.iter().all(|(&(j, i), t)| {
                let common = self.graphs[j].intersection(&self.graphs[i], "");
                t.pairs().all(|(x, y)| x == y) && t.domain_elements() == common.elements().collect()
            })
    }
}

/// Builds the inclusion chain `S_0 = S, S_1, …, S_m` whose typings are the
/// identity on `S_j ∩ S_i`.
pub fn inclusion_chain(whole: &Graph, levels: Vec<Graph>) -> Result<GraphChain, ChainError> {
    if levels.first() != Some(whole) {
        return Err(ChainError::RootMismatch(whole.name().to_string()));
    }
    if let Some(bad) = levels.iter().position(|g| !g.is_subgraph_of(whole)) {
        return Err(ChainError::NotSubgraph(bad));
    }
    let mut typings = BTreeMap::new();
    for j in 1..levels.len() {
        for i in 0..j {
            let common = levels[j].intersection(&levels[i], levels[j].name());
            typings.insert((j, i), Morphism::inclusion(&common, levels[i].name()));
        }
    }
    GraphChain::new(levels, typings)
}

/// A morphism between chains: a level map `f` and total components
/// `φ_i: G_i → H_{f(i)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMorphism {
    pub level_map: Vec<usize>,
    pub components: Vec<Morphism>,
}

impl ChainMorphism {
    pub fn identity(chain: &GraphChain) -> Self {
        ChainMorphism {
            level_map: (0..=chain.depth()).collect(),
            components: chain.graphs().iter().map(Morphism::identity).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphismViolation {
    RootNotFixed,
    NotMonotone {
        level: usize,
    },
    LevelOutOfRange {
        level: usize,
    },
    WrongArity {
        expected: usize,
        found: usize,
    },
    Component {
        level: usize,
        reason: String,
    },
    /// Typing is not reflected: `element` is typed at `i` on one side only.
    Reflection {
        j: usize,
        i: usize,
        element: Element,
    },
    /// The square for `(j, i)` does not commute at `element`.
    Commutation {
        j: usize,
        i: usize,
        element: Element,
    },
}

/// Checks `f(0) = 0`, strict monotonicity, totality of the components and,
/// for every `i < j`, that typing is both preserved and reflected.
pub fn validate_chain_morphism(
    cm: &ChainMorphism,
    from: &GraphChain,
    to: &GraphChain,
) -> Vec<MorphismViolation> {
    let mut report = Vec::new();
    let n = from.depth();
    if cm.level_map.len() != n + 1 || cm.components.len() != n + 1 {
        report.push(MorphismViolation::WrongArity {
            expected: n + 1,
            found: cm.level_map.len().min(cm.components.len()),
        });
        return report;
    }
    let f = &cm.level_map;
    if f[0] != 0 {
        report.push(MorphismViolation::RootNotFixed);
    }
    for i in 1..=n {
        if f[i] <= f[i - 1] {
            report.push(MorphismViolation::NotMonotone { level: i });
        }
    }
    for (i, &fi) in f.iter().enumerate() {
        if fi > to.depth() {
            report.push(MorphismViolation::LevelOutOfRange { level: i });
        }
    }
    if !report.is_empty() {
        return report;
    }
    for i in 0..=n {
        if let Err(reason) = cm.components[i].check_total(from.graph(i), to.graph(f[i])) {
            report.push(MorphismViolation::Component { level: i, reason });
        }
    }
    if !report.is_empty() {
        return report;
    }
    for j in 1..=n {
        for i in 0..j {
            let tg = from.typing(j, i);
            let th = to.typing(f[j], f[i]);
            for x in from.graph(j).elements() {
                let image = cm.components[j].apply(&x).expect("component total");
                match (tg.apply(&x), th.apply(&image)) {
                    (None, None) => {}
                    (Some(tx), Some(ty)) => {
                        if cm.components[i].apply(&tx).as_ref() != Some(&ty) {
                            report.push(MorphismViolation::Commutation { j, i, element: x });
                        }
                    }
                    _ => report.push(MorphismViolation::Reflection { j, i, element: x }),
                }
            }
        }
    }
    report
}

/// A graph `S` typed over a chain by partial morphisms `σ_i: S ⇀ TG_i`,
/// with `σ_0` total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilevelTyping {
    pub subject: Graph,
    pub chain: GraphChain,
    pub sigmas: Vec<Morphism>,
}

impl MultilevelTyping {
    /// Checks that every `σ_i` is a partial homomorphism, `σ_0` is total,
    /// `σ_j;τ_{j,i} ⪯ σ_i`, and `σ_j⁻¹(D(τ_{j,i})) = D(σ_j) ∩ D(σ_i)`.
    pub fn check(&self) -> Result<(), ChainError> {
        let m = self.chain.depth();
        if self.sigmas.len() != m + 1 {
            return Err(ChainError::DepthMismatch(format!(
                "{} typing morphisms for a chain of depth {m}",
                self.sigmas.len()
            )));
        }
        for (i, s) in self.sigmas.iter().enumerate() {
            s.check_partial(&self.subject, self.chain.graph(i))
                .map_err(|reason| ChainError::InvalidTyping {
                    j: m + 1,
                    i,
                    reason,
                })?;
        }
        if let Some(element) = self
            .subject
            .elements()
            .find(|e| !self.sigmas[0].is_defined(e))
        {
            return Err(ChainError::NonTotalRootTyping {
                level: m + 1,
                element,
            });
        }
        for j in 1..=m {
            for i in 0..j {
                let tau = self.chain.typing(j, i);
                for x in self.subject.elements() {
                    let through = self.sigmas[j].apply(&x).and_then(|y| tau.apply(&y));
                    let direct = self.sigmas[i].apply(&x);
                    let ok = match (&through, &direct) {
                        (Some(a), Some(b)) => a == b,
                        (Some(_), None) => false,
                        // typed at both levels forces the type to be typed
                        (None, Some(_)) => !self.sigmas[j].is_defined(&x),
                        (None, None) => true,
                    };
                    if !ok {
                        return Err(ChainError::CompatibilityViolation { j, i, element: x });
                    }
                }
            }
        }
        Ok(())
    }

    /// `S_i = D(σ_i)` as a graph.
    pub fn level_graph(&self, i: usize) -> Graph {
        let name = if i == 0 {
            self.subject.name().to_string()
        } else {
            format!("{}@{i}", self.subject.name())
        };
        self.subject
            .restrict(&self.sigmas[i].domain_elements(), name)
    }

    /// The inclusion chain of the domains of definition together with the
    /// chain morphism `(σ, id)` into the typing chain.
    pub fn to_chain(&self) -> Result<(GraphChain, ChainMorphism), ChainError> {
        self.check()?;
        let levels: Vec<Graph> = (0..self.sigmas.len())
            .map(|i| self.level_graph(i))
            .collect();
        let components = self
            .sigmas
            .iter()
            .zip(&levels)
            .map(|(s, g)| s.restrict(g))
            .collect();
        let chain = inclusion_chain(&self.subject, levels)?;
        Ok((
            chain,
            ChainMorphism {
                level_map: (0..self.sigmas.len()).collect(),
                components,
            },
        ))
    }
}

#[derive(Debug, Clone)]
pub struct ChainPushout {
    pub chain: GraphChain,
    pub s: ChainMorphism,
    pub d: ChainMorphism,
}

fn require_inclusion(chain: &GraphChain, what: &str) -> Result<(), ChainError> {
    if chain.is_inclusion_chain() {
        Ok(())
    } else {
        Err(ChainError::NotInclusionChain(what.to_string()))
    }
}

/// Pushout of a same-depth inclusion `l: ℒ ↪ ℐ` along `m: ℒ → 𝒮`.
///
/// The bottom graph is the ordinary pushout of `L_0 ↪ I_0` along `m_0`.
/// Level `f(i)` of the result is `S_{f(i)}` together with the image of
/// `I_i`; levels outside the image of `f` are copied from `𝒮`.
pub fn chain_pushout(
    l: &ChainMorphism,
    lhs: &GraphChain,
    interface: &GraphChain,
    m: &ChainMorphism,
    host: &GraphChain,
) -> Result<ChainPushout, ChainError> {
    let n = lhs.depth();
    if interface.depth() != n || l.level_map != (0..=n).collect::<Vec<_>>() {
        return Err(ChainError::DepthMismatch(
            "l must be a same-depth inclusion".into(),
        ));
    }
    if m.level_map.len() != n + 1 || m.level_map.last().is_some_and(|&top| top > host.depth()) {
        return Err(ChainError::DepthMismatch(format!(
            "match of a depth-{n} chain into a depth-{} chain",
            host.depth()
        )));
    }
    require_inclusion(lhs, "left-hand side")?;
    require_inclusion(interface, "interface")?;
    require_inclusion(host, "host")?;

    let base = pushout(
        lhs.graph(0),
        interface.graph(0),
        &l.components[0],
        host.graph(0),
        &m.components[0],
    )
    .map_err(|source| ChainError::AtLevel { level: 0, source })?;
    let f = &m.level_map;
    let mut levels = Vec::with_capacity(host.depth() + 1);
    for j in 0..=host.depth() {
        let sj = host.graph(j);
        match f.iter().position(|&fi| fi == j) {
            Some(i) => {
                let mut elements: BTreeSet<Element> = sj.elements().collect();
                elements.extend(
                    interface
                        .graph(i)
                        .elements()
                        .map(|x| base.d.apply(&x).expect("d total")),
                );
                levels.push(base.object.restrict(&elements, sj.name()));
            }
            None => levels.push(sj.clone()),
        }
    }
    levels[0] = base.object.clone();
    let chain = inclusion_chain(&base.object, levels)?;
    let s = ChainMorphism {
        level_map: (0..=host.depth()).collect(),
        components: (0..=host.depth())
            .map(|j| Morphism::inclusion(host.graph(j), chain.graph(j).name()))
            .collect(),
    };
    let d = ChainMorphism {
        level_map: f.clone(),
        components: (0..=n)
            .map(|i| {
                base.d
                    .restrict(interface.graph(i))
                    .renamed(interface.graph(i).name(), chain.graph(f[i]).name())
            })
            .collect(),
    };
    Ok(ChainPushout { chain, s, d })
}

#[derive(Debug, Clone)]
pub struct ChainPullbackComplement {
    pub chain: GraphChain,
    pub t: ChainMorphism,
    pub inclusion: ChainMorphism,
}

/// Pullback complement of a same-depth inclusion `r: ℛ ↪ ℐ` and `d: ℐ → 𝒟`.
///
/// The bottom graph is the ordinary pullback complement; every other level
/// is the corresponding level of `𝒟` restricted to what survives.
pub fn chain_pullback_complement(
    r: &ChainMorphism,
    rhs: &GraphChain,
    interface: &GraphChain,
    d: &ChainMorphism,
    host: &GraphChain,
) -> Result<ChainPullbackComplement, ChainError> {
    let n = rhs.depth();
    if interface.depth() != n || r.level_map != (0..=n).collect::<Vec<_>>() {
        return Err(ChainError::DepthMismatch(
            "r must be a same-depth inclusion".into(),
        ));
    }
    if d.level_map.len() != n + 1 || d.level_map.last().is_some_and(|&top| top > host.depth()) {
        return Err(ChainError::DepthMismatch(
            "comatch does not fit the host chain".into(),
        ));
    }
    require_inclusion(rhs, "right-hand side")?;
    require_inclusion(interface, "interface")?;
    require_inclusion(host, "host")?;

    let base = pullback_complement(
        rhs.graph(0),
        interface.graph(0),
        &r.components[0],
        host.graph(0),
        &d.components[0],
    )
    .map_err(|source| ChainError::AtLevel { level: 0, source })?;
    let levels: Vec<Graph> = (0..=host.depth())
        .map(|j| {
            if j == 0 {
                base.object.clone()
            } else {
                host.graph(j)
                    .intersection(&base.object, host.graph(j).name())
            }
        })
        .collect();
    let chain = inclusion_chain(&base.object, levels)?;
    let f = &d.level_map;
    let t = ChainMorphism {
        level_map: f.clone(),
        components: (0..=n)
            .map(|i| {
                base.t
                    .restrict(rhs.graph(i))
                    .renamed(rhs.graph(i).name(), chain.graph(f[i]).name())
            })
            .collect(),
    };
    let inclusion = ChainMorphism {
        level_map: (0..=host.depth()).collect(),
        components: (0..=host.depth())
            .map(|j| Morphism::inclusion(chain.graph(j), host.graph(j).name()))
            .collect(),
    };
    Ok(ChainPullbackComplement {
        chain,
        t,
        inclusion,
    })
}
