//! Inputs shared by the benchmarks.

use mcmt_core::hierarchy::MultilevelHierarchy;
use mcmt_core::matcher::Stack;
use mcmt_core::mcmt::{parse_rule_module, McmtRule};
use mcmt_core::{Arrow, Graph};

pub const HIERARCHY: &str = include_str!("../../core/fixtures/pls.json");
pub const RULES: &str = include_str!("../../core/fixtures/pls.mcmt");

pub struct Fixture {
    pub hierarchy: MultilevelHierarchy,
    pub rules: Vec<McmtRule>,
    pub stack: Stack,
}

pub fn fixture(target: &str) -> Fixture {
    let hierarchy = MultilevelHierarchy::from_json(HIERARCHY).expect("hierarchy fixture");
    let rules = parse_rule_module(RULES).expect("rule fixture").rules;
    let stack = Stack::from_hierarchy(&hierarchy, target).expect("target model");
    Fixture {
        hierarchy,
        rules,
        stack,
    }
}

/// A ring of `n` nodes with one chord per node, labelled `e` and `c`.
pub fn ring(name: &str, n: usize) -> Graph {
    let mut g = Graph::empty(name);
    for i in 0..n {
        g.add_node(format!("v{i}")).unwrap();
    }
    for i in 0..n {
        let v = |k: usize| format!("v{}", k % n);
        g.add_arrow(Arrow::new(v(i), "e", v(i + 1))).unwrap();
        g.add_arrow(Arrow::new(v(i), "c", v(i + 2))).unwrap();
    }
    g
}

/// A path of `n` nodes labelled like [`ring`].
pub fn path(name: &str, n: usize) -> Graph {
    let mut g = Graph::empty(name);
    for i in 0..n {
        g.add_node(format!("p{i}")).unwrap();
    }
    for i in 1..n {
        g.add_arrow(Arrow::new(format!("p{}", i - 1), "e", format!("p{i}")))
            .unwrap();
    }
    g
}
