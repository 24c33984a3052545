//! Reference implementations and random generators shared by the
//! acceptance and property tests. Everything here works on plain maps and
//! exhaustive enumeration, independently of the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mcmt_core::graph::{Arrow, Element, Graph};
use mcmt_core::hierarchy::{Multiplicity, Potency};
use mcmt_core::matcher::Stack;
use mcmt_core::mcmt::{McmtRule, MetaDecl, MetaRef};
use mcmt_core::{Morphism, TypedLevels};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type PMap = BTreeMap<Element, Element>;

pub fn pmap(m: &Morphism) -> PMap {
    m.pairs().collect()
}

pub fn morphism(map: &PMap, from: &str, to: &str) -> Morphism {
    let mut m = Morphism::new(from, to);
    for (x, y) in map {
        m.map(x.clone(), y.clone());
    }
    m
}

fn endpoints(e: &Element) -> Option<(Element, Element)> {
    e.as_arrow().map(|a| {
        (
            Element::node(a.source.clone()),
            Element::node(a.target.clone()),
        )
    })
}

/// Whether `m` is a partial homomorphism `g ⇀ h` with a closed domain.
pub fn is_partial_hom(m: &PMap, g: &Graph, h: &Graph) -> bool {
    m.iter().all(|(x, y)| {
        if !g.contains(x) || !h.contains(y) || x.is_node() != y.is_node() {
            return false;
        }
        match (endpoints(x), endpoints(y)) {
            (Some((xs, xt)), Some((ys, yt))) => m.get(&xs) == Some(&ys) && m.get(&xt) == Some(&yt),
            _ => true,
        }
    })
}

pub fn is_total(m: &PMap, g: &Graph) -> bool {
    g.elements().all(|e| m.contains_key(&e))
}

/// Composition by inverse image.
pub fn compose(f: &PMap, g: &PMap) -> PMap {
    f.iter()
        .filter_map(|(x, y)| g.get(y).map(|z| (x.clone(), z.clone())))
        .collect()
}

pub fn below(f: &PMap, g: &PMap) -> bool {
    f.iter().all(|(x, y)| g.get(x) == Some(y))
}

/// Every homomorphism `p → t` by enumerating all node assignments, then all
/// arrow assignments.
pub fn all_homs(p: &Graph, t: &Graph, injective: bool) -> Vec<PMap> {
    let pn: Vec<String> = p.nodes().cloned().collect();
    let tn: Vec<String> = t.nodes().cloned().collect();
    let mut out = Vec::new();
    if pn.is_empty() {
        extend_arrows(p, t, PMap::new(), injective, &mut out);
        return out;
    }
    if tn.is_empty() {
        return out;
    }
    let mut idx = vec![0usize; pn.len()];
    loop {
        let images: Vec<&String> = idx.iter().map(|&i| &tn[i]).collect();
        let distinct: BTreeSet<&&String> = images.iter().collect();
        if !injective || distinct.len() == images.len() {
            let map: PMap = pn
                .iter()
                .zip(&images)
                .map(|(a, b)| (Element::node(a.clone()), Element::node((*b).clone())))
                .collect();
            extend_arrows(p, t, map, injective, &mut out);
        }
        // odometer
        let mut k = pn.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < tn.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn extend_arrows(p: &Graph, t: &Graph, nodes: PMap, injective: bool, out: &mut Vec<PMap>) {
    let arrows: Vec<&Arrow> = p.arrows().collect();
    let options: Vec<Vec<Arrow>> = arrows
        .iter()
        .map(|a| {
            let s = nodes[&Element::node(a.source.clone())].name().to_string();
            let tt = nodes[&Element::node(a.target.clone())].name().to_string();
            t.arrows()
                .filter(|b| b.source == s && b.target == tt)
                .cloned()
                .collect()
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; arrows.len()];
    loop {
        let chosen: Vec<&Arrow> = idx.iter().zip(&options).map(|(&i, o)| &o[i]).collect();
        let distinct: BTreeSet<&&Arrow> = chosen.iter().collect();
        if !injective || distinct.len() == chosen.len() {
            let mut m = nodes.clone();
            for (a, b) in arrows.iter().zip(&chosen) {
                m.insert(Element::Arrow((*a).clone()), Element::Arrow((*b).clone()));
            }
            out.push(m);
        }
        let mut k = arrows.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

pub fn random_graph(
    rng: &mut ChaCha8Rng,
    name: &str,
    prefix: &str,
    nodes: usize,
    arrows: usize,
) -> Graph {
    let mut g = Graph::empty(name);
    let n = rng.random_range(1..=nodes);
    for i in 0..n {
        g.add_node(format!("{prefix}{i}")).unwrap();
    }
    let names: Vec<String> = g.nodes().cloned().collect();
    for _ in 0..rng.random_range(0..=arrows) {
        let s = names.choose(rng).unwrap().clone();
        let t = names.choose(rng).unwrap().clone();
        let label = ["a", "b"].choose(rng).unwrap();
        let _ = g.add_arrow(Arrow::new(s, *label, t));
    }
    g
}

/// A random subgraph closed under arrow endpoints.
pub fn random_subgraph(rng: &mut ChaCha8Rng, g: &Graph, name: &str) -> Graph {
    let keep: Vec<Element> = g
        .nodes()
        .filter(|_| rng.random_bool(0.6))
        .map(|n| Element::node(n.clone()))
        .collect();
    let mut sub = g.restrict(&keep, name);
    let arrows: Vec<Arrow> = sub.arrows().cloned().collect();
    for a in arrows {
        if rng.random_bool(0.3) {
            sub.remove(&Element::Arrow(a));
        }
    }
    sub
}

/// A random partial homomorphism `from ⇀ to`, or `None` if the chosen
/// domain has no homomorphism into `to`.
pub fn random_partial(rng: &mut ChaCha8Rng, from: &Graph, to: &Graph) -> Option<PMap> {
    let dom = random_subgraph(rng, from, "dom");
    let homs = all_homs(&dom, to, false);
    homs.choose(rng).cloned()
}

/// Transitive type of `e` at level `at` by following direct types.
pub fn transitive(
    types: &[BTreeMap<Element, (usize, Element)>],
    level: usize,
    e: &Element,
    at: usize,
) -> Option<Element> {
    let (mut l, mut cur) = (level, e.clone());
    while l > at {
        let (tl, t) = types[l].get(&cur)?;
        if *tl >= l {
            return None;
        }
        l = *tl;
        cur = t.clone();
    }
    (l == at).then_some(cur)
}

pub fn root_graph() -> Graph {
    Graph::build("root", ["Node"], [("Node", "Arrow", "Node")]).unwrap()
}

/// A random well-formed stack of `depth + 1` levels: every element points
/// to a direct type on some level above whose endpoints agree.
pub fn random_levels(
    rng: &mut ChaCha8Rng,
    depth: usize,
    nodes: usize,
    arrows: usize,
) -> TypedLevels {
    let root = root_graph();
    let mut types: Vec<BTreeMap<Element, (usize, Element)>> =
        vec![root.elements().map(|e| (e.clone(), (0, e))).collect()];
    let mut graphs = vec![root];
    for j in 1..=depth {
        let mut g = Graph::empty(format!("g{j}"));
        let mut t = BTreeMap::new();
        let n = rng.random_range(1..=nodes);
        for k in 0..n {
            let name = format!("n{}", rng.random_range(0..nodes + 2));
            if g.add_node(name.clone()).is_err() {
                continue;
            }
            let _ = k;
            let lvl = rng.random_range(0..j);
            let candidates: Vec<String> = graphs[lvl].nodes().cloned().collect();
            let ty = candidates.choose(rng).unwrap().clone();
            t.insert(Element::node(name), (lvl, Element::node(ty)));
        }
        let names: Vec<String> = g.nodes().cloned().collect();
        for _ in 0..rng.random_range(0..=arrows) {
            let lvl = rng.random_range(0..j);
            let Some(ta) = graphs[lvl]
                .arrows()
                .cloned()
                .collect::<Vec<_>>()
                .choose(rng)
                .cloned()
            else {
                continue;
            };
            let fits = |n: &String, want: &str| {
                transitive(&types_with(&types, &t), j, &Element::node(n.clone()), lvl)
                    == Some(Element::node(want))
            };
            let sources: Vec<&String> = names.iter().filter(|n| fits(n, &ta.source)).collect();
            let targets: Vec<&String> = names.iter().filter(|n| fits(n, &ta.target)).collect();
            let (Some(s), Some(tt)) = (sources.choose(rng), targets.choose(rng)) else {
                continue;
            };
            let label = ["a", "b", "c"].choose(rng).unwrap();
            let a = Arrow::new((*s).clone(), *label, (*tt).clone());
            if g.add_arrow(a.clone()).is_ok() {
                t.insert(Element::Arrow(a), (lvl, Element::Arrow(ta)));
            }
        }
        graphs.push(g);
        types.push(t);
    }
    TypedLevels { graphs, types }
}

fn types_with(
    types: &[BTreeMap<Element, (usize, Element)>],
    last: &BTreeMap<Element, (usize, Element)>,
) -> Vec<BTreeMap<Element, (usize, Element)>> {
    let mut v = types.to_vec();
    v.push(last.clone());
    v
}

/// All `τ_{j,i}` of a stack as plain maps.
pub fn typing_maps(levels: &TypedLevels) -> BTreeMap<(usize, usize), PMap> {
    let mut out = BTreeMap::new();
    for j in 1..levels.graphs.len() {
        for i in 0..j {
            let m: PMap = levels.graphs[j]
                .elements()
                .filter_map(|e| transitive(&levels.types, j, &e, i).map(|t| (e, t)))
                .collect();
            out.insert((j, i), m);
        }
    }
    out
}

/// Graph chain conditions: partial homomorphisms, total root typing,
/// uniqueness.
pub fn chain_ok(graphs: &[Graph], typings: &BTreeMap<(usize, usize), PMap>) -> bool {
    let n = graphs.len() - 1;
    let empty = PMap::new();
    let t = |j: usize, i: usize| typings.get(&(j, i)).unwrap_or(&empty);
    for j in 1..=n {
        for i in 0..j {
            if !is_partial_hom(t(j, i), &graphs[j], &graphs[i]) {
                return false;
            }
        }
        if !is_total(t(j, 0), &graphs[j]) {
            return false;
        }
    }
    for k in 0..=n {
        for j in 0..k {
            for i in 0..j {
                if !below(&compose(t(k, j), t(j, i)), t(k, i)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Chain morphism conditions, including preservation and reflection of
/// typing.
pub fn chain_morphism_ok(
    f: &[usize],
    phi: &[PMap],
    g: (&[Graph], &BTreeMap<(usize, usize), PMap>),
    h: (&[Graph], &BTreeMap<(usize, usize), PMap>),
) -> bool {
    let n = g.0.len() - 1;
    if f.len() != n + 1 || phi.len() != n + 1 || f[0] != 0 {
        return false;
    }
    if f.windows(2).any(|w| w[0] >= w[1]) || f[n] >= h.0.len() {
        return false;
    }
    for i in 0..=n {
        if !is_partial_hom(&phi[i], &g.0[i], &h.0[f[i]]) || !is_total(&phi[i], &g.0[i]) {
            return false;
        }
    }
    let empty = PMap::new();
    for j in 1..=n {
        for i in 0..j {
            let tg = g.1.get(&(j, i)).unwrap_or(&empty);
            let th = h.1.get(&(f[j], f[i])).unwrap_or(&empty);
            // τ^G;φ_i = φ_j;τ^H as partial maps
            if compose(tg, &phi[i]) != compose(&phi[j], th) {
                return false;
            }
        }
    }
    true
}

/// Multilevel typing conditions: partial homomorphisms, total `σ_0`,
/// `σ_j;τ_{j,i} ⪯ σ_i` and `σ_j⁻¹(D(τ_{j,i})) = D(σ_j) ∩ D(σ_i)`.
pub fn typing_ok(
    subject: &Graph,
    graphs: &[Graph],
    typings: &BTreeMap<(usize, usize), PMap>,
    sigmas: &[PMap],
) -> bool {
    if sigmas.len() != graphs.len() {
        return false;
    }
    for (i, s) in sigmas.iter().enumerate() {
        if !is_partial_hom(s, subject, &graphs[i]) {
            return false;
        }
    }
    if !is_total(&sigmas[0], subject) {
        return false;
    }
    let empty = PMap::new();
    for j in 1..graphs.len() {
        for i in 0..j {
            let tau = typings.get(&(j, i)).unwrap_or(&empty);
            let through = compose(&sigmas[j], tau);
            if !below(&through, &sigmas[i]) {
                return false;
            }
            let pre: BTreeSet<&Element> = through.keys().collect();
            let both: BTreeSet<&Element> = sigmas[j]
                .keys()
                .filter(|x| sigmas[i].contains_key(*x))
                .collect();
            if pre != both {
                return false;
            }
        }
    }
    true
}

/// Randomly disturbs a map: drops or redirects one pair, or adds one.
pub fn perturb(rng: &mut ChaCha8Rng, m: &mut PMap, from: &Graph, to: &Graph) {
    match rng.random_range(0..3) {
        0 if !m.is_empty() => {
            let k = m.keys().nth(rng.random_range(0..m.len())).unwrap().clone();
            m.remove(&k);
        }
        1 if !m.is_empty() => {
            let k = m.keys().nth(rng.random_range(0..m.len())).unwrap().clone();
            let pool: Vec<Element> = to
                .elements()
                .filter(|e| e.is_node() == k.is_node())
                .collect();
            if let Some(v) = pool.choose(rng) {
                m.insert(k, v.clone());
            }
        }
        _ => {
            let pool: Vec<Element> = from.elements().filter(|e| !m.contains_key(e)).collect();
            if let Some(k) = pool.choose(rng) {
                let targets: Vec<Element> = to
                    .elements()
                    .filter(|e| e.is_node() == k.is_node())
                    .collect();
                if let Some(v) = targets.choose(rng) {
                    m.insert(k.clone(), v.clone());
                }
            }
        }
    }
}

pub fn random_stack(rng: &mut ChaCha8Rng, depth: usize) -> Stack {
    let levels = random_levels(rng, depth, 4, 4);
    let mut potency = Vec::new();
    let mut multiplicity = Vec::new();
    for g in &levels.graphs {
        let mut pot = BTreeMap::new();
        for e in g.elements() {
            if rng.random_bool(0.3) {
                let min = rng.random_range(0..2);
                let max = *[Some(min + 1), None].choose(rng).unwrap();
                pot.insert(e, Potency::new(min, max));
            }
        }
        potency.push(pot);
        let mut mult = BTreeMap::new();
        for a in g.arrows() {
            if rng.random_bool(0.4) {
                let lower = rng.random_range(0..2);
                let upper = *[Some(lower + 1), None].choose(rng).unwrap();
                mult.insert(a.clone(), Multiplicity::new(lower, upper));
            }
        }
        multiplicity.push(mult);
    }
    Stack {
        models: (0..levels.graphs.len()).map(|i| format!("m{i}")).collect(),
        levels,
        potency,
        multiplicity,
    }
}

/// A random META pattern of `depth` levels whose names overlap with the
/// names used by [`random_levels`], so constants sometimes match.
pub fn random_meta_rule(rng: &mut ChaCha8Rng, depth: usize) -> McmtRule {
    let mut meta: Vec<MetaDecl> = Vec::new();
    for k in 1..=depth {
        let mut names = BTreeSet::new();
        let mut nodes = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            let name = format!("n{}", rng.random_range(0..5));
            if !names.insert(name.clone()) {
                continue;
            }
            let ty = above(rng, &meta, k, None);
            nodes.push(name.clone());
            meta.push(MetaDecl {
                name,
                level: k,
                ty,
                constant: rng.random_bool(0.2),
                potency: rng.random_bool(0.15).then(|| Potency::new(1, Some(1))),
                multiplicity: None,
                ends: None,
                implicit: false,
            });
        }
        for _ in 0..rng.random_range(0..=1) {
            let s = nodes.choose(rng).unwrap().clone();
            let t = nodes.choose(rng).unwrap().clone();
            let name = ["a", "b", "c"].choose(rng).unwrap().to_string();
            if !names.insert(name.clone()) {
                continue;
            }
            let ty = above(rng, &meta, k, Some((&s, &t)));
            meta.push(MetaDecl {
                name,
                level: k,
                ty,
                constant: rng.random_bool(0.2),
                potency: None,
                multiplicity: rng.random_bool(0.3).then(|| Multiplicity::new(1, Some(1))),
                ends: Some((s, t)),
                implicit: false,
            });
        }
    }
    McmtRule {
        name: "R".into(),
        meta,
        from: Vec::new(),
        to: Vec::new(),
    }
}

/// A type for a new element at level `k`: a node or arrow on a level above
/// whose endpoints agree with `ends`.
fn above(
    rng: &mut ChaCha8Rng,
    meta: &[MetaDecl],
    k: usize,
    ends: Option<(&String, &String)>,
) -> MetaRef {
    let mut pool: Vec<MetaRef> = Vec::new();
    let ty_of = |name: &str, level: usize| {
        meta.iter()
            .find(|d| d.level == level && d.name == name && d.ends.is_none())
    };
    let trans = |name: &str, at: usize| {
        let mut cur = MetaRef::new(k, name);
        while cur.level > at {
            let d = ty_of(&cur.name, cur.level)?;
            cur = d.ty.clone();
        }
        (cur.level == at).then_some(cur.name)
    };
    match ends {
        None => {
            pool.push(MetaRef::new(0, "Node"));
            pool.extend(
                meta.iter()
                    .filter(|d| d.level < k && d.ends.is_none())
                    .map(|d| MetaRef::new(d.level, d.name.clone())),
            );
        }
        Some((s, t)) => {
            pool.push(MetaRef::new(0, "Arrow"));
            for d in meta.iter().filter(|d| d.level < k) {
                if let Some((ds, dt)) = &d.ends {
                    if trans(s, d.level).as_ref() == Some(ds)
                        && trans(t, d.level).as_ref() == Some(dt)
                    {
                        pool.push(MetaRef::new(d.level, d.name.clone()));
                    }
                }
            }
        }
    }
    pool.choose(rng).unwrap().clone()
}

/// Every complete match of the META part of `rule` into `stack`, by
/// enumerating strictly increasing level maps and all injective
/// homomorphisms per level, then filtering by the matching conditions.
pub fn brute_force_matches(rule: &McmtRule, stack: &Stack) -> Vec<(Vec<usize>, Vec<PMap>)> {
    let root = stack.levels.graphs[0].clone();
    let meta = rule.meta_levels(&root);
    let n = meta.graphs.len() - 1;
    let top = stack.levels.graphs.len() - 1;
    let mut out = Vec::new();
    let mut maps: Vec<Vec<usize>> = Vec::new();
    level_maps(n, 1, top, &mut vec![0], &mut maps);
    for f in maps {
        let per_level: Vec<Vec<PMap>> = (1..=n)
            .map(|k| all_homs(&meta.graphs[k], &stack.levels.graphs[f[k]], true))
            .collect();
        let mut idx = vec![0usize; n];
        if per_level.iter().any(Vec::is_empty) {
            continue;
        }
        loop {
            let mut b: Vec<PMap> = vec![root.elements().map(|e| (e.clone(), e)).collect()];
            b.extend(idx.iter().zip(&per_level).map(|(&i, l)| l[i].clone()));
            if conditions_hold(rule, &meta, stack, &f, &b) {
                out.push((f.clone(), b));
            }
            let mut k = n;
            let done = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_level[k].len() {
                    break false;
                }
                idx[k] = 0;
            };
            if done {
                break;
            }
        }
    }
    out
}

fn level_maps(n: usize, from: usize, top: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == n + 1 {
        out.push(cur.clone());
        return;
    }
    for t in from..top {
        cur.push(t);
        level_maps(n, t + 1, top, cur, out);
        cur.pop();
    }
}

fn conditions_hold(
    rule: &McmtRule,
    meta: &TypedLevels,
    stack: &Stack,
    f: &[usize],
    b: &[PMap],
) -> bool {
    for k in 1..f.len() {
        for (x, y) in &b[k] {
            let d = rule
                .meta
                .iter()
                .find(|d| d.level == k && d.name == x.name() && d.ends.is_some() != x.is_node())
                .unwrap();
            if d.constant && x.name() != y.name() {
                return false;
            }
            if let Some(p) = d.potency {
                let sp = stack.potency[f[k]].get(y).copied().unwrap_or_default();
                let inside =
                    p.min >= sp.min && sp.max.is_none_or(|m| p.max.is_some_and(|pm| pm <= m));
                if !inside {
                    return false;
                }
            }
            if let (Some(m), Some(a)) = (d.multiplicity, y.as_arrow()) {
                let sm = stack.multiplicity[f[k]].get(a).copied().unwrap_or_default();
                let inside = m.lower >= sm.lower
                    && sm.upper.is_none_or(|u| m.upper.is_some_and(|mu| mu <= u));
                if !inside {
                    return false;
                }
            }
            for i in 0..k {
                let tx = transitive(&meta.types, k, x, i);
                let ty = transitive(&stack.levels.types, f[k], y, f[i]);
                let ok = match (tx, ty) {
                    (None, None) => true,
                    (Some(a), Some(c)) => b[i].get(&a) == Some(&c),
                    _ => false,
                };
                if !ok {
                    return false;
                }
            }
        }
    }
    true
}
