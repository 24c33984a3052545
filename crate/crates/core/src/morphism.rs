//! Graph homomorphisms, total and partial, and the constructions built on
//! them: composition by inverse image, pushout along an injective morphism,
//! and pullback complement.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{Arrow, Element, Graph, GraphError};

/// A (possibly partial) graph homomorphism between two named graphs.
///
/// The keys of the node and arrow maps are the domain of definition. A
/// morphism is total on a graph when every element of that graph is a key.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Morphism {
    source: String,
    target: String,
    nodes: BTreeMap<String, String>,
    arrows: BTreeMap<Arrow, Arrow>,
}

impl Morphism {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Morphism {
            source: source.into(),
            target: target.into(),
            ..Default::default()
        }
    }

    pub fn identity(graph: &Graph) -> Self {
        Self::inclusion(graph, graph.name())
    }

    /// The inclusion of `sub` into a graph named `into`.
    pub fn inclusion(sub: &Graph, into: impl Into<String>) -> Self {
        let mut m = Morphism::new(sub.name(), into);
        for n in sub.nodes() {
            m.nodes.insert(n.clone(), n.clone());
        }
        for a in sub.arrows() {
            m.arrows.insert(a.clone(), a.clone());
        }
        m
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn renamed(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.source = source.into();
        self.target = target.into();
        self
    }

    pub fn map_node(&mut self, from: impl Into<String>, to: impl Into<String>) {
        self.nodes.insert(from.into(), to.into());
    }

    pub fn map_arrow(&mut self, from: Arrow, to: Arrow) {
        self.arrows.insert(from, to);
    }

    /// The element mapped to `e`, if exactly one is.
    pub fn preimage_of(&self, e: &Element) -> Option<Element> {
        let mut found = self.pairs().filter(|(_, y)| y == e).map(|(x, _)| x);
        let x = found.next()?;
        found.next().is_none().then_some(x)
    }

    /// Removes `e` from the domain.
    pub fn unmap(&mut self, e: &Element) {
        match e {
            Element::Node(n) => {
                self.nodes.remove(n);
            }
            Element::Arrow(a) => {
                self.arrows.remove(a);
            }
        }
    }

    pub fn map(&mut self, from: Element, to: Element) {
        match (from, to) {
            (Element::Node(a), Element::Node(b)) => self.map_node(a, b),
            (Element::Arrow(a), Element::Arrow(b)) => self.map_arrow(a, b),
            (from, to) => panic!("cannot map {from} to {to}: element kinds differ"),
        }
    }

    pub fn node(&self, n: &str) -> Option<&String> {
        self.nodes.get(n)
    }

    pub fn arrow(&self, a: &Arrow) -> Option<&Arrow> {
        self.arrows.get(a)
    }

    pub fn apply(&self, e: &Element) -> Option<Element> {
        match e {
            Element::Node(n) => self.nodes.get(n).cloned().map(Element::Node),
            Element::Arrow(a) => self.arrows.get(a).cloned().map(Element::Arrow),
        }
    }

    pub fn is_defined(&self, e: &Element) -> bool {
        match e {
            Element::Node(n) => self.nodes.contains_key(n),
            Element::Arrow(a) => self.arrows.contains_key(a),
        }
    }

    pub fn node_map(&self) -> &BTreeMap<String, String> {
        &self.nodes
    }

    pub fn arrow_map(&self) -> &BTreeMap<Arrow, Arrow> {
        &self.arrows
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Element, Element)> + '_ {
        self.nodes
            .iter()
            .map(|(a, b)| (Element::Node(a.clone()), Element::Node(b.clone())))
            .chain(
                self.arrows
                    .iter()
                    .map(|(a, b)| (Element::Arrow(a.clone()), Element::Arrow(b.clone()))),
            )
    }

    pub fn domain_elements(&self) -> BTreeSet<Element> {
        self.pairs().map(|(k, _)| k).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.arrows.is_empty()
    }

    /// The domain of definition as a graph.
    pub fn domain(&self, name: impl Into<String>) -> Graph {
        let mut g = Graph::empty(name);
        for n in self.nodes.keys() {
            g.add_node(n.clone()).expect("keys are unique");
        }
        for a in self.arrows.keys() {
            // a partial homomorphism has a closed domain; skip otherwise
            let _ = g.add_arrow(a.clone());
        }
        g
    }

    pub fn is_total_on(&self, graph: &Graph) -> bool {
        graph.nodes().all(|n| self.nodes.contains_key(n))
            && graph.arrows().all(|a| self.arrows.contains_key(a))
    }

    pub fn is_injective(&self) -> bool {
        let n: BTreeSet<_> = self.nodes.values().collect();
        let a: BTreeSet<_> = self.arrows.values().collect();
        n.len() == self.nodes.len() && a.len() == self.arrows.len()
    }

    /// Checks that this is a partial homomorphism `from ⇀ to`: the domain is
    /// a subgraph of `from`, images live in `to`, and sources and targets are
    /// preserved.
    pub fn check_partial(&self, from: &Graph, to: &Graph) -> Result<(), String> {
        for (k, v) in &self.nodes {
            if !from.has_node(k) {
                return Err(format!("node `{k}` is not in `{}`", from.name()));
            }
            if !to.has_node(v) {
                return Err(format!("image `{v}` of `{k}` is not in `{}`", to.name()));
            }
        }
        for (k, v) in &self.arrows {
            if !from.has_arrow(k) {
                return Err(format!("arrow {k} is not in `{}`", from.name()));
            }
            if !to.has_arrow(v) {
                return Err(format!("image {v} of {k} is not in `{}`", to.name()));
            }
            match (self.nodes.get(&k.source), self.nodes.get(&k.target)) {
                (Some(s), Some(t)) if s == &v.source && t == &v.target => {}
                (Some(_), Some(_)) => return Err(format!("{k} ↦ {v} does not preserve endpoints")),
                _ => return Err(format!("domain is not closed at {k}")),
            }
        }
        Ok(())
    }

    /// Checks that this is a total homomorphism `from → to`.
    pub fn check_total(&self, from: &Graph, to: &Graph) -> Result<(), String> {
        self.check_partial(from, to)?;
        if let Some(e) = from.elements().find(|e| !self.is_defined(e)) {
            return Err(format!("undefined on {e}"));
        }
        Ok(())
    }

    /// Diagrammatic composition `self ; then`, defined on the inverse image
    /// under `self` of the domain of `then`.
    pub fn compose(&self, then: &Morphism) -> Result<Morphism, GraphError> {
        if self.target != then.source {
            return Err(GraphError::GraphMismatch {
                left: self.target.clone(),
                right: then.source.clone(),
            });
        }
        Ok(self.compose_unchecked(then))
    }

    pub(crate) fn compose_unchecked(&self, then: &Morphism) -> Morphism {
        let mut out = Morphism::new(self.source.clone(), then.target.clone());
        for (k, v) in &self.nodes {
            if let Some(w) = then.nodes.get(v) {
                out.nodes.insert(k.clone(), w.clone());
            }
        }
        for (k, v) in &self.arrows {
            if let Some(w) = then.arrows.get(v) {
                out.arrows.insert(k.clone(), w.clone());
            }
        }
        out
    }

    /// `self ⪯ other`: the domain of `self` is contained in the domain of
    /// `other` and both agree there.
    pub fn is_below(&self, other: &Morphism) -> bool {
        self.nodes
            .iter()
            .all(|(k, v)| other.nodes.get(k) == Some(v))
            && self
                .arrows
                .iter()
                .all(|(k, v)| other.arrows.get(k) == Some(v))
    }

    /// Restriction to the elements of `sub`.
    pub fn restrict(&self, sub: &Graph) -> Morphism {
        let mut out = Morphism::new(sub.name(), self.target.clone());
        for n in sub.nodes() {
            if let Some(v) = self.nodes.get(n) {
                out.nodes.insert(n.clone(), v.clone());
            }
        }
        for a in sub.arrows() {
            if let Some(v) = self.arrows.get(a) {
                out.arrows.insert(a.clone(), v.clone());
            }
        }
        out
    }

    /// Elements of the domain whose image lies in `sub`.
    pub fn preimage(&self, sub: &Graph) -> BTreeSet<Element> {
        self.pairs()
            .filter(|(_, v)| sub.contains(v))
            .map(|(k, _)| k)
            .collect()
    }
}

/// Result of [`pushout`]: the object `D`, the inclusion `s: S ↪ D` and the
/// comatch `d: I → D`.
#[derive(Debug, Clone)]
pub struct Pushout {
    pub object: Graph,
    pub s: Morphism,
    pub d: Morphism,
}

/// Smallest `k` such that `<base>$k` is not taken.
pub(crate) fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    (0..)
        .map(|k| format!("{base}${k}"))
        .find(|n| !taken(n))
        .expect("unbounded search")
}

/// Pushout of an injective `l: L → I` along a total `m: L → S`.
///
/// `D` is `S` extended with a copy of `I ∖ l(L)`. Copied nodes are renamed
/// `<name>$k` with the smallest free `k`; copied arrows keep their label
/// unless the resulting triple is already taken.
pub fn pushout(
    lhs: &Graph,
    interface: &Graph,
    l: &Morphism,
    host: &Graph,
    m: &Morphism,
) -> Result<Pushout, GraphError> {
    l.check_total(lhs, interface)
        .map_err(GraphError::NotInclusion)?;
    if !l.is_injective() {
        return Err(GraphError::NotInclusion(format!(
            "`{}` → `{}` is not injective",
            lhs.name(),
            interface.name()
        )));
    }
    m.check_total(lhs, host).map_err(GraphError::NotTotal)?;

    let mut object = host.clone();
    let s = Morphism::identity(host).renamed(host.name(), host.name());
    let mut d = Morphism::new(interface.name(), host.name());

    // elements of I in the image of l are sent where m sends their preimage
    let mut image_nodes = BTreeSet::new();
    let mut image_arrows = BTreeSet::new();
    for (x, y) in l.node_map() {
        d.map_node(y.clone(), m.node(x).expect("m total").clone());
        image_nodes.insert(y.clone());
    }
    for (x, y) in l.arrow_map() {
        d.map_arrow(y.clone(), m.arrow(x).expect("m total").clone());
        image_arrows.insert(y.clone());
    }

    for n in interface.nodes().filter(|n| !image_nodes.contains(*n)) {
        let fresh = fresh_name(n, |c| object.has_node(c));
        object.add_node(fresh.clone())?;
        d.map_node(n.clone(), fresh);
    }
    for a in interface.arrows().filter(|a| !image_arrows.contains(*a)) {
        let source = d.node(&a.source).expect("endpoint mapped").clone();
        let target = d.node(&a.target).expect("endpoint mapped").clone();
        let mut copy = Arrow::new(source, a.label.clone(), target);
        if object.has_arrow(&copy) {
            copy.label = fresh_name(&a.label, |c| {
                object.has_arrow(&Arrow::new(copy.source.clone(), c, copy.target.clone()))
            });
        }
        object.add_arrow(copy.clone())?;
        d.map_arrow(a.clone(), copy);
    }
    Ok(Pushout { object, s, d })
}

/// Result of [`pullback_complement`]: the object `T`, the morphism
/// `t: R → T` and the inclusion `T ↪ D`.
#[derive(Debug, Clone)]
pub struct PullbackComplement {
    pub object: Graph,
    pub t: Morphism,
    pub inclusion: Morphism,
}

/// Pullback complement of an injective `r: R → I` and a total `d: I → D`:
/// `T` is `D` without the images of `I ∖ r(R)`.
///
/// Fails with [`GraphError::DanglingDeletion`] when a deleted node still has
/// an arrow that is not deleted, and with [`GraphError::DeletionConflict`]
/// when a deleted image is also the image of a preserved element.
pub fn pullback_complement(
    rhs: &Graph,
    interface: &Graph,
    r: &Morphism,
    host: &Graph,
    d: &Morphism,
) -> Result<PullbackComplement, GraphError> {
    r.check_total(rhs, interface)
        .map_err(GraphError::NotInclusion)?;
    if !r.is_injective() {
        return Err(GraphError::NotInclusion(format!(
            "`{}` → `{}` is not injective",
            rhs.name(),
            interface.name()
        )));
    }
    d.check_total(interface, host)
        .map_err(GraphError::NotTotal)?;

    let kept: BTreeSet<Element> = r.pairs().map(|(_, v)| v).collect();
    let deleted: BTreeSet<Element> = interface
        .elements()
        .filter(|e| !kept.contains(e))
        .map(|e| d.apply(&e).expect("d total"))
        .collect();
    for e in &kept {
        let img = d.apply(e).expect("d total");
        if deleted.contains(&img) {
            return Err(GraphError::DeletionConflict(img));
        }
    }
    for e in &deleted {
        if let Element::Node(n) = e {
            if let Some(a) = host.arrows().find(|a| {
                (&a.source == n || &a.target == n)
                    && !deleted.contains(&Element::Arrow((*a).clone()))
            }) {
                return Err(GraphError::DanglingDeletion {
                    node: n.clone(),
                    arrow: a.clone(),
                });
            }
        }
    }
    let remaining: Vec<Element> = host.elements().filter(|e| !deleted.contains(e)).collect();
    let object = host.restrict(&remaining, host.name());
    let t = r.compose_unchecked(d).renamed(rhs.name(), host.name());
    let inclusion = Morphism::inclusion(&object, host.name());
    Ok(PullbackComplement {
        object,
        t,
        inclusion,
    })
}

/// Enumerates every homomorphism `pattern → target` (injective ones only if
/// asked). Plain backtracking, used as a reference for the typed matcher.
pub fn find_homomorphisms(pattern: &Graph, target: &Graph, injective: bool) -> Vec<Morphism> {
    let pnodes: Vec<&String> = pattern.nodes().collect();
    let parrows: Vec<&Arrow> = pattern.arrows().collect();
    let tnodes: Vec<&String> = target.nodes().collect();
    let mut out = Vec::new();
    let mut current = Morphism::new(pattern.name(), target.name());
    assign_nodes(
        &pnodes,
        &parrows,
        &tnodes,
        target,
        injective,
        0,
        &mut current,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn assign_nodes(
    pnodes: &[&String],
    parrows: &[&Arrow],
    tnodes: &[&String],
    target: &Graph,
    injective: bool,
    i: usize,
    current: &mut Morphism,
    out: &mut Vec<Morphism>,
) {
    if i == pnodes.len() {
        assign_arrows(parrows, target, injective, 0, current, out);
        return;
    }
    for t in tnodes {
        if injective && current.nodes.values().any(|v| v == *t) {
            continue;
        }
        current.nodes.insert(pnodes[i].clone(), (*t).clone());
        assign_nodes(
            pnodes,
            parrows,
            tnodes,
            target,
            injective,
            i + 1,
            current,
            out,
        );
        current.nodes.remove(pnodes[i]);
    }
}

fn assign_arrows(
    parrows: &[&Arrow],
    target: &Graph,
    injective: bool,
    i: usize,
    current: &mut Morphism,
    out: &mut Vec<Morphism>,
) {
    if i == parrows.len() {
        out.push(current.clone());
        return;
    }
    let a = parrows[i];
    let s = current.nodes[&a.source].clone();
    let t = current.nodes[&a.target].clone();
    let candidates: Vec<Arrow> = target
        .outgoing(&s)
        .filter(|b| b.target == t)
        .cloned()
        .collect();
    for b in candidates {
        if injective && current.arrows.values().any(|v| v == &b) {
            continue;
        }
        current.arrows.insert(a.clone(), b);
        assign_arrows(parrows, target, injective, i + 1, current, out);
        current.arrows.remove(a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(name: &str, nodes: &[&str], arrows: &[(&str, &str, &str)]) -> Graph {
        Graph::build(name, nodes.iter().copied(), arrows.iter().copied()).unwrap()
    }

    #[test]
    fn composition_of_totals_is_total() {
        let a = g("A", &["x", "y"], &[("x", "e", "y")]);
        let b = g("B", &["u"], &[("u", "l", "u")]);
        let c = g("C", &["v"], &[("v", "k", "v")]);
        let mut f = Morphism::new("A", "B");
        f.map_node("x", "u");
        f.map_node("y", "u");
        f.map_arrow(Arrow::new("x", "e", "y"), Arrow::new("u", "l", "u"));
        let mut h = Morphism::new("B", "C");
        h.map_node("u", "v");
        h.map_arrow(Arrow::new("u", "l", "u"), Arrow::new("v", "k", "v"));
        let fh = f.compose(&h).unwrap();
        assert!(fh.is_total_on(&a));
        fh.check_total(&a, &c).unwrap();
        let _ = b;
    }

    #[test]
    fn composition_with_empty_domain_is_empty() {
        let f = Morphism::new("A", "B");
        let mut h = Morphism::new("B", "C");
        h.map_node("u", "v");
        assert!(f.compose(&h).unwrap().is_empty());
    }

    #[test]
    fn composition_restricts_to_preimage() {
        // A = {x, y}; g defined on x only, h defined on g(x)
        let mut f = Morphism::new("A", "B");
        f.map_node("x", "b1");
        let mut h = Morphism::new("B", "C");
        h.map_node("b1", "c1");
        h.map_node("b2", "c2");
        let fh = f.compose(&h).unwrap();
        assert_eq!(
            fh.domain_elements(),
            [Element::node("x")].into_iter().collect()
        );
        assert_eq!(fh.node("x").map(String::as_str), Some("c1"));
    }

    #[test]
    fn composition_mismatch() {
        let f = Morphism::new("A", "B");
        let h = Morphism::new("X", "C");
        assert!(matches!(
            f.compose(&h),
            Err(GraphError::GraphMismatch { .. })
        ));
    }

    #[test]
    fn pushout_identity_rule_keeps_host() {
        let l = g("L", &["x"], &[]);
        let s = g("S", &["s1", "s2"], &[("s1", "e", "s2")]);
        let mut m = Morphism::new("L", "S");
        m.map_node("x", "s1");
        let po = pushout(&l, &l, &Morphism::identity(&l), &s, &m).unwrap();
        assert_eq!(po.object, s);
        assert_eq!(po.d.node("x").unwrap(), "s1");
    }

    #[test]
    fn pushout_adds_fresh_copy() {
        let l = g("L", &["x"], &[]);
        let i = g("I", &["x", "y"], &[("x", "e", "y")]);
        let s = g("S", &["s1"], &[]);
        let mut m = Morphism::new("L", "S");
        m.map_node("x", "s1");
        let po = pushout(&l, &i, &Morphism::inclusion(&l, "I"), &s, &m).unwrap();
        let expected = g("S", &["s1", "y$0"], &[("s1", "e", "y$0")]);
        assert_eq!(po.object, expected);
        // l;d = m;s
        let ld = Morphism::inclusion(&l, "I").compose(&po.d).unwrap();
        let ms = m.compose(&po.s).unwrap();
        assert_eq!(ld, ms);
    }

    #[test]
    fn pushout_fresh_names_avoid_collisions() {
        let l = g("L", &[], &[]);
        let i = g("I", &["y"], &[]);
        let s = g("S", &["y$0", "y$1"], &[]);
        let po = pushout(
            &l,
            &i,
            &Morphism::inclusion(&l, "I"),
            &s,
            &Morphism::new("L", "S"),
        )
        .unwrap();
        assert!(po.object.has_node("y$2"));
    }

    #[test]
    fn pushout_rejects_non_injective_l() {
        let l = g("L", &["a", "b"], &[]);
        let i = g("I", &["c"], &[]);
        let mut li = Morphism::new("L", "I");
        li.map_node("a", "c");
        li.map_node("b", "c");
        let s = g("S", &["a", "b"], &[]);
        let m = Morphism::identity(&l).renamed("L", "S");
        assert!(matches!(
            pushout(&l, &i, &li, &s, &m),
            Err(GraphError::NotInclusion(_))
        ));
    }

    #[test]
    fn pullback_complement_cases() {
        let i = g("I", &["a", "b"], &[("a", "e", "b")]);
        let host = g("D", &["a", "b"], &[("a", "e", "b")]);
        let d = Morphism::identity(&i).renamed("I", "D");
        // nothing deleted
        let pbc = pullback_complement(&i, &i, &Morphism::identity(&i), &host, &d).unwrap();
        assert_eq!(pbc.object, host);
        // delete the arrow only
        let r = g("R", &["a", "b"], &[]);
        let pbc = pullback_complement(&r, &i, &Morphism::inclusion(&r, "I"), &host, &d).unwrap();
        assert_eq!(pbc.object, g("D", &["a", "b"], &[]));
        // delete node a while the arrow survives
        let r = g("R", &["b"], &[]);
        let i2 = g("I", &["a", "b"], &[]);
        let d2 = Morphism::identity(&i2).renamed("I", "D");
        let err =
            pullback_complement(&r, &i2, &Morphism::inclusion(&r, "I"), &host, &d2).unwrap_err();
        assert!(matches!(err, GraphError::DanglingDeletion { ref node, .. } if node == "a"));
    }

    #[test]
    fn homomorphism_counts() {
        let empty = Graph::empty("P");
        let target = g(
            "T",
            &["a", "b", "c"],
            &[("a", "e", "b"), ("b", "e", "c"), ("c", "e", "a")],
        );
        assert_eq!(find_homomorphisms(&empty, &target, false).len(), 1);
        let single = g("P", &["x"], &[]);
        assert_eq!(find_homomorphisms(&single, &target, false).len(), 3);
        let loop_ = g("P", &["x"], &[("x", "l", "x")]);
        assert_eq!(find_homomorphisms(&loop_, &target, false).len(), 0);
        let edge = g("P", &["x", "y"], &[("x", "l", "y")]);
        assert_eq!(find_homomorphisms(&edge, &target, true).len(), 3);
    }
}
