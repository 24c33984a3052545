//! In-place rule application: two-level rules by pushout and pullback
//! complement on the target model, coupled rules by the same constructions
//! on typing chains, and a seeded execution loop.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::chain::{
    chain_pullback_complement, chain_pushout, ChainError, ChainMorphism, GraphChain,
    MultilevelTyping,
};
use crate::graph::{Element, Graph, GraphError};
use crate::hierarchy::{ElementInfo, HierarchyError, MultilevelHierarchy, Potency};
use crate::matcher::{proliferate_all, ullmann, MetaMatch, Stack, TwoLevelRule};
use crate::mcmt::McmtRule;
use crate::morphism::{pullback_complement, pushout, Morphism};
use crate::typing::TypedLevels;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rule `{rule}` applies to `{expected}`, not `{found}`")]
    TypeMismatch {
        rule: String,
        expected: String,
        found: String,
    },
    #[error("match disagrees with the typing at level {level} on {element}")]
    IncompatibleMatch { level: usize, element: Element },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// The outcome of applying a rule at one match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub hierarchy: MultilevelHierarchy,
    /// The match `L → S`.
    pub matched: Morphism,
    pub created: Vec<Element>,
    pub deleted: Vec<Element>,
}

fn host_compatible(rule: &TwoLevelRule, stack: &Stack, x: &Element, y: &Element) -> bool {
    if rule.constants.contains(x) && x.name() != y.name() {
        return false;
    }
    match rule.types.get(x) {
        Some((level, ty)) => {
            stack
                .levels
                .transitive_type(stack.bottom(), y, *level)
                .as_ref()
                == Some(ty)
        }
        None => false,
    }
}

/// Injective matches of the left-hand side into the target model whose
/// elements are typed, possibly transitively, by the rule's types.
pub fn find_matches(rule: &TwoLevelRule, stack: &Stack) -> Vec<Morphism> {
    ullmann(
        &rule.lhs,
        stack.target(),
        |x, y| host_compatible(rule, stack, &Element::node(x), &Element::node(y)),
        |a, b| {
            host_compatible(
                rule,
                stack,
                &Element::Arrow(a.clone()),
                &Element::Arrow(b.clone()),
            )
        },
        true,
    )
}

/// Whether deleting the image of `L ∖ R` would leave arrows dangling.
pub fn would_dangle(lhs: &Graph, rhs: &Graph, m: &Morphism, host: &Graph) -> bool {
    let deleted: BTreeSet<Element> = lhs
        .elements()
        .filter(|e| !rhs.contains(e))
        .filter_map(|e| m.apply(&e))
        .collect();
    deleted.iter().any(|e| match e {
        Element::Node(n) => host
            .outgoing(n)
            .chain(host.incoming(n))
            .any(|a| !deleted.contains(&Element::Arrow(a.clone()))),
        Element::Arrow(_) => false,
    })
}

fn inclusion(sub: &Graph, of: &Graph) -> Morphism {
    Morphism::inclusion(sub, of.name())
}

/// Replaces the target model's graph by `t`, keeping the information of
/// surviving elements and describing new ones with `fresh`.
fn install<F>(
    h: &MultilevelHierarchy,
    target: &str,
    t: &Graph,
    fresh: F,
) -> Result<Application, EngineError>
where
    F: Fn(&Element) -> Option<ElementInfo>,
{
    let mut out = h.clone();
    let model = out
        .model_mut(target)
        .ok_or_else(|| HierarchyError::UnknownModel(target.to_string()))?;
    let old = model.graph.clone();
    let mut info = BTreeMap::new();
    for e in t.elements() {
        let i = match model.info.get(&e) {
            Some(i) if old.contains(&e) => Some(i.clone()),
            _ => fresh(&e),
        };
        if let Some(i) = i {
            info.insert(e, i);
        }
    }
    let created = t.elements().filter(|e| !old.contains(e)).collect();
    let deleted = old.elements().filter(|e| !t.contains(e)).collect();
    model.graph = t.clone().with_name(old.name());
    model.info = info;
    Ok(Application {
        hierarchy: out,
        matched: Morphism::new("", ""),
        created,
        deleted,
    })
}

fn check_model(rule: &TwoLevelRule, target: &str) -> Result<(), EngineError> {
    if rule.model != target {
        return Err(EngineError::TypeMismatch {
            rule: rule.name.clone(),
            expected: rule.model.clone(),
            found: target.to_string(),
        });
    }
    Ok(())
}

/// Applies a two-level rule at one match.
pub fn apply_two_level_at(
    rule: &TwoLevelRule,
    h: &MultilevelHierarchy,
    stack: &Stack,
    m: &Morphism,
) -> Result<Application, EngineError> {
    check_model(
        rule,
        stack.models.last().map(String::as_str).unwrap_or_default(),
    )?;
    let host = stack.target();
    let l = inclusion(&rule.lhs, &rule.interface);
    let po = pushout(&rule.lhs, &rule.interface, &l, host, m)?;
    let r = inclusion(&rule.rhs, &rule.interface);
    let pbc = pullback_complement(&rule.rhs, &rule.interface, &r, &po.object, &po.d)?;
    let mut app = install(h, &rule.model, &pbc.object, |e| {
        let x = pbc.t.preimage_of(e)?;
        let ty = rule.types.get(&x)?;
        let mut i = ElementInfo::typed(stack.type_ref(ty));
        i.potency = rule.potencies.get(&x).copied().unwrap_or(Potency::DEFAULT);
        Some(i)
    })?;
    app.matched = m.clone();
    Ok(app)
}

/// Applies a two-level rule at `at`, or at every match that does not
/// leave dangling arrows.
pub fn apply_two_level_rule(
    rule: &TwoLevelRule,
    h: &MultilevelHierarchy,
    target: &str,
    at: Option<&Morphism>,
) -> Result<Vec<Application>, EngineError> {
    check_model(rule, target)?;
    let stack = Stack::from_hierarchy(h, target)?;
    let matches = match at {
        Some(m) => vec![m.clone()],
        None => find_matches(rule, &stack),
    };
    let mut out = Vec::new();
    for m in matches {
        match apply_two_level_at(rule, h, &stack, &m) {
            Ok(a) => out.push(a),
            Err(EngineError::Graph(
                e @ (GraphError::DanglingDeletion { .. } | GraphError::DeletionConflict(_)),
            )) => {
                debug!("{}: skipping match: {e}", rule.name)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// A pattern side of a coupled rule as an inclusion chain over the META
/// chain.
fn side_chain(
    rule: &McmtRule,
    graph: &Graph,
    meta: &GraphChain,
    root: &Graph,
) -> Result<(GraphChain, ChainMorphism, MultilevelTyping), ChainError> {
    let sigmas = rule.pattern_typing(&rule.pattern_decls(), graph, root);
    let typing = MultilevelTyping {
        subject: graph.clone(),
        chain: meta.clone(),
        sigmas: sigmas.iter().map(|s| s.restrict(graph)).collect(),
    };
    let (chain, sigma) = typing.to_chain()?;
    Ok((chain, sigma, typing))
}

fn inclusion_morphism(sub: &GraphChain, of: &GraphChain) -> ChainMorphism {
    ChainMorphism {
        level_map: (0..=sub.depth()).collect(),
        components: (0..=sub.depth())
            .map(|i| Morphism::inclusion(sub.graph(i), of.graph(i).name()))
            .collect(),
    }
}

/// Matches `L → S` compatible with `meta`: wherever a pattern element is
/// typed at META level `i`, its image is typed by the bound type at `f(i)`.
pub fn find_mcmt_matches(rule: &McmtRule, stack: &Stack, meta: &MetaMatch) -> Vec<Morphism> {
    let root = stack.graph(0);
    let decls = rule.pattern_decls();
    let ok = |x: &Element, y: &Element| {
        let Some(d) = decls.iter().find(|d| &d.element() == x) else {
            return false;
        };
        if d.constant && x.name() != y.name() {
            return false;
        }
        (0..=rule.meta_depth()).all(|i| match rule.pattern_type_at(d, i, root) {
            Some(t) => {
                let want = meta.bindings[i].apply(&t);
                want.is_some()
                    && stack
                        .levels
                        .transitive_type(stack.bottom(), y, meta.level_map[i])
                        == want
            }
            None => true,
        })
    };
    ullmann(
        &rule.lhs(),
        stack.target(),
        |x, y| ok(&Element::node(x), &Element::node(y)),
        |a, b| ok(&Element::Arrow(a.clone()), &Element::Arrow(b.clone())),
        true,
    )
}

/// Applies a coupled rule directly: chain pushout along the META match and
/// the bottom match, then chain pullback complement, then the induced
/// typing of the result.
pub fn apply_mcmt(
    rule: &McmtRule,
    h: &MultilevelHierarchy,
    target: &str,
    meta: &MetaMatch,
    m: &Morphism,
) -> Result<Application, EngineError> {
    let stack = Stack::from_hierarchy(h, target)?;
    let root = stack.graph(0);
    let meta_chain = rule.meta_levels(root).chain()?;
    let (lhs, rhs, interface) = (rule.lhs(), rule.rhs(), rule.interface());
    let (l_chain, sigma_l, _) = side_chain(rule, &lhs, &meta_chain, root)?;
    let (i_chain, _, i_typing) = side_chain(rule, &interface, &meta_chain, root)?;
    let (r_chain, _, _) = side_chain(rule, &rhs, &meta_chain, root)?;

    let s_typing = stack.levels.bottom_typing()?;
    let (s_chain, _) = s_typing.to_chain()?;
    let f = &meta.level_map;

    // the square σ^L_i ; b_i = m ; σ^S_{f(i)}
    for (i, sl) in sigma_l.components.iter().enumerate() {
        for (x, t) in sl.pairs() {
            let want = meta.bindings[i].apply(&t);
            let got = m.apply(&x).and_then(|y| s_typing.sigmas[f[i]].apply(&y));
            if want.is_none() || want != got {
                return Err(EngineError::IncompatibleMatch {
                    level: i,
                    element: x,
                });
            }
        }
    }

    let m_chain = ChainMorphism {
        level_map: f.clone(),
        components: (0..=l_chain.depth())
            .map(|i| {
                m.restrict(l_chain.graph(i))
                    .renamed(l_chain.graph(i).name(), s_chain.graph(f[i]).name())
            })
            .collect(),
    };
    let po = chain_pushout(
        &inclusion_morphism(&l_chain, &i_chain),
        &l_chain,
        &i_chain,
        &m_chain,
        &s_chain,
    )?;
    let pbc = chain_pullback_complement(
        &inclusion_morphism(&r_chain, &i_chain),
        &r_chain,
        &i_chain,
        &po.d,
        &po.chain,
    )?;
    let t = pbc.chain.graph(0).clone();

    // σ^T: old elements keep their types, new ones get b_i(σ^I_i(y))
    let host = stack.target();
    let sigmas: Vec<Morphism> = (0..s_typing.sigmas.len())
        .map(|j| {
            let mut sj = Morphism::new(t.name(), s_typing.chain.graph(j).name());
            for x in pbc.chain.graph(j).elements() {
                let ty = if host.contains(&x) {
                    s_typing.sigmas[j].apply(&x)
                } else {
                    f.iter().position(|&fi| fi == j).and_then(|i| {
                        let y = po.d.components[i].preimage_of(&x)?;
                        meta.bindings[i].apply(&i_typing.sigmas[i].apply(&y)?)
                    })
                };
                if let Some(ty) = ty {
                    sj.map(x, ty);
                }
            }
            sj
        })
        .collect();
    let t_typing = MultilevelTyping {
        subject: t.clone(),
        chain: s_typing.chain.clone(),
        sigmas,
    };
    t_typing.check()?;
    let direct = TypedLevels::direct_types_from(&t_typing.sigmas, &t);
    let decls = rule.pattern_decls();
    let mut app = install(h, target, &t, |e| {
        let ty = direct.get(e)?;
        let mut i = ElementInfo::typed(stack.type_ref(ty));
        let x = po.d.components[0].preimage_of(e);
        i.potency = x
            .and_then(|x| decls.iter().find(|d| d.element() == x))
            .and_then(|d| d.potency)
            .unwrap_or(Potency::DEFAULT);
        Some(i)
    })?;
    app.matched = m.clone();
    Ok(app)
}

/// One step of an execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub step: usize,
    pub rule: String,
    pub matched: Morphism,
    pub created: Vec<Element>,
    pub deleted: Vec<Element>,
}

impl Step {
    pub fn to_json(&self) -> Value {
        let matched: Map<String, Value> = self
            .matched
            .pairs()
            .map(|(x, y)| (x.to_string(), Value::String(y.to_string())))
            .collect();
        let names = |es: &[Element]| es.iter().map(|e| e.to_string()).collect::<Vec<_>>();
        json!({
            "step": self.step,
            "rule": self.rule,
            "match": matched,
            "created": names(&self.created),
            "deleted": names(&self.deleted),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub hierarchy: MultilevelHierarchy,
    pub trace: Vec<Step>,
}

impl Execution {
    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|s| format!("{}\n", s.to_json()))
            .collect()
    }
}

/// Every applicable (rule, match) pair on the current target model.
pub fn applicable<'r>(
    rules: &'r [TwoLevelRule],
    stack: &Stack,
) -> Vec<(&'r TwoLevelRule, Morphism)> {
    let mut out = Vec::new();
    for r in rules {
        for m in find_matches(r, stack) {
            if !would_dangle(&r.lhs, &r.rhs, &m, stack.target()) {
                out.push((r, m));
            }
        }
    }
    out
}

/// Proliferates `rules` once, then repeatedly applies a uniformly chosen
/// applicable (rule, match) pair until none is left or `max_steps` is
/// reached.
pub fn run(
    rules: &[McmtRule],
    h: &MultilevelHierarchy,
    target: &str,
    max_steps: usize,
    seed: u64,
) -> Result<Execution, EngineError> {
    run_observed(rules, h, target, max_steps, seed, |_, _| {})
}

/// [`run`], calling `observe` with every step and the hierarchy it produced.
pub fn run_observed<F>(
    rules: &[McmtRule],
    h: &MultilevelHierarchy,
    target: &str,
    max_steps: usize,
    seed: u64,
    mut observe: F,
) -> Result<Execution, EngineError>
where
    F: FnMut(&Step, &MultilevelHierarchy),
{
    let stack = Stack::from_hierarchy(h, target)?;
    let two_level = proliferate_all(rules, &stack).rules;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = h.clone();
    let mut trace = Vec::new();
    for step in 0..max_steps {
        let stack = Stack::from_hierarchy(&current, target)?;
        let options = applicable(&two_level, &stack);
        if options.is_empty() {
            info!("no applicable rule after {step} steps");
            break;
        }
        let (rule, m) = &options[rng.random_range(0..options.len())];
        let app = apply_two_level_at(rule, &current, &stack, m)?;
        debug!("step {step}: {}", rule.name);
        let s = Step {
            step,
            rule: rule.name.clone(),
            matched: app.matched,
            created: app.created,
            deleted: app.deleted,
        };
        observe(&s, &app.hierarchy);
        trace.push(s);
        current = app.hierarchy;
    }
    Ok(Execution {
        hierarchy: current,
        trace,
    })
}
