//! Canonical textual form of a rule module.

use std::fmt::Write;

use super::{McmtRule, MetaRef, RuleModule};
use crate::hierarchy::{Multiplicity, Potency};

fn typeref(
    out: &mut String,
    name: &str,
    ty: &MetaRef,
    constant: bool,
    potency: Option<Potency>,
    multiplicity: Option<Multiplicity>,
    ends: Option<&(String, String)>,
) {
    let _ = write!(out, "      {name} : {}", ty.name);
    if constant {
        out.push('$');
    }
    let _ = write!(out, " mm{}", ty.level);
    if let Some(p) = potency {
        let _ = write!(out, " @{p}");
    }
    if let Some(m) = multiplicity {
        let _ = write!(out, " [{m}]");
    }
    out.push('\n');
    if let Some((s, t)) = ends {
        let _ = writeln!(out, "      {name} = {s} -> {t}");
    }
}

fn rule(out: &mut String, r: &McmtRule) {
    let _ = writeln!(out, "  rule {} {{", r.name);
    let explicit: Vec<_> = r.meta.iter().filter(|d| !d.implicit).collect();
    if explicit.is_empty() {
        out.push_str("    meta {}\n");
    } else {
        out.push_str("    meta {\n");
        for d in explicit {
            typeref(
                out,
                &d.name,
                &d.ty,
                d.constant,
                d.potency,
                d.multiplicity,
                d.ends.as_ref(),
            );
        }
        out.push_str("    }\n");
    }
    for (kw, side) in [("from", &r.from), ("to", &r.to)] {
        if side.is_empty() {
            let _ = writeln!(out, "    {kw} {{}}");
            continue;
        }
        let _ = writeln!(out, "    {kw} {{");
        for d in side {
            typeref(
                out,
                &d.name,
                &d.ty,
                d.constant,
                d.potency,
                None,
                d.ends.as_ref(),
            );
        }
        out.push_str("    }\n");
    }
    out.push_str("  }\n");
}

/// Prints a module so that parsing the output yields the same module.
pub fn print_module(m: &RuleModule) -> String {
    let mut out = String::new();
    if m.rules.is_empty() {
        let _ = writeln!(out, "rules {} {{}}", m.name);
        return out;
    }
    let _ = writeln!(out, "rules {} {{", m.name);
    for (i, r) in m.rules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        rule(&mut out, r);
    }
    out.push_str("}\n");
    out
}
