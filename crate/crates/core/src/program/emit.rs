//! Solver-syntax rendering of programs (`.lp` text).

use std::fmt::Write as _;

use super::{Atom, BodyElement, LogicRule, Program, RuleLevel};
use crate::fixed_point;

/// Feature names become bare constants when they are valid ASP identifiers,
/// quoted strings otherwise.
fn constant(name: &str) -> String {
    let mut chars = name.chars();
    let bare = chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if bare {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn atom_text(atom: &Atom, digits: u32) -> String {
    match atom {
        Atom::Input { feature, value } => {
            format!("input({},{})", constant(feature), fixed_point::encode(value.0, digits))
        }
        Atom::Hidden(h) => h.to_string(),
        Atom::Output(o) => format!(
            "potential_predict_output({},{},{})",
            o.class,
            o.rule_index,
            fixed_point::encode(o.confidence.0, digits)
        ),
    }
}

fn element_text(element: &BodyElement, digits: u32) -> String {
    match element {
        BodyElement::Positive(a) => atom_text(a, digits),
        BodyElement::Negated(h) => format!("not {h}"),
        BodyElement::Bind { feature, var } => format!("input({},{var})", constant(feature)),
        BodyElement::Compare { var, op, bound } => {
            format!("{var} {} {}", op.symbol(), fixed_point::encode(bound.0, digits))
        }
    }
}

/// One rule as a single line, without a trailing newline.
pub fn rule_text(rule: &LogicRule, digits: u32) -> String {
    let head = atom_text(&rule.head, digits);
    if rule.body.is_empty() {
        return format!("{head}.");
    }
    let body: Vec<String> = rule.body.iter().map(|e| element_text(e, digits)).collect();
    format!("{head} :- {}.", body.join(", "))
}

/// Renders the program one rule per line in rule order. Rules with known
/// provenance are preceded by a `%` comment giving the tree rule index and
/// its cover/ok counts.
pub fn emit_text(program: &Program) -> String {
    let digits = program.meta.scale_digits;
    let mut out = String::new();
    for rule in &program.rules {
        if let Some(p) = &rule.provenance {
            let level = match p.level {
                RuleLevel::Top => "top",
                RuleLevel::Intermediate => "intermediate",
                RuleLevel::Bottom => "bottom",
            };
            let _ = writeln!(out, "% {level} tree rule {}: cover={} ok={}", p.tree_rule, p.cover, p.ok);
        }
        out.push_str(&rule_text(rule, digits));
        out.push('\n');
    }
    out
}

/// Input facts for one instance, e.g. `input(input_feat_0,250000).`
pub fn emit_input_facts(program: &Program, features: &[f64]) -> String {
    let digits = program.meta.scale_digits;
    program
        .meta
        .feature_names
        .iter()
        .zip(features)
        .map(|(name, &v)| format!("{}.\n", atom_text(&Atom::input(name.clone(), v), digits)))
        .collect()
}
