//! Logic programs extracted from a network and their evaluation.
//!
//! A program has three kinds of rules:
//!
//! * bottom rules: `h(1,N,Op,Key,true) :- input(f,V), V <= t, ...`
//! * intermediate rules: `h(L,N,Op,Key,true) :- h(L-1,...), not h(L-1,...)`
//! * top rules: `potential_predict_output(Class,Index,Conf) :- h(K,...), ...`
//!
//! Negation only ever refers to atoms of the layer below, so every program
//! built this way is stratified and has exactly one answer set for a given
//! set of input facts.

mod emit;
mod eval;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

pub use emit::{emit_input_facts, emit_text, rule_text};
pub use eval::{
    double_evaluate_check, evaluate, most_appropriate_class, predict, AnswerSet, Evaluator, Prediction,
};

use crate::fixed_point;
use crate::tree::CmpOp;

/// A real with a total order, so atoms can live in ordered sets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Real(pub f64);

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Real {}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Real {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

/// Fixed-point name of a threshold.
///
/// `value` is the truncated scaled threshold. When two different thresholds
/// on the same node truncate to the same value, `disc` tells them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ThresholdKey {
    pub value: i64,
    pub disc: u32,
}

impl ThresholdKey {
    pub fn new(value: i64) -> Self {
        ThresholdKey { value, disc: 0 }
    }
}

impl fmt::Display for ThresholdKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disc == 0 {
            write!(f, "{}", self.value)
        } else {
            write!(f, "\"{}_{}\"", self.value, self.disc)
        }
    }
}

/// `h(level, node, op, key, true)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HiddenAtom {
    pub level: usize,
    pub node: usize,
    pub op: CmpOp,
    pub key: ThresholdKey,
}

impl HiddenAtom {
    pub fn new(level: usize, node: usize, op: CmpOp, key: i64) -> Self {
        HiddenAtom {
            level,
            node,
            op,
            key: ThresholdKey::new(key),
        }
    }
}

impl fmt::Display for HiddenAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h({},{},\"{}\",{},true)", self.level, self.node, self.op.name(), self.key)
    }
}

/// `potential_predict_output(class, rule_index, confidence)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputAtom {
    pub class: usize,
    pub rule_index: usize,
    /// Fraction in [0, 1].
    pub confidence: Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Input { feature: String, value: Real },
    Hidden(HiddenAtom),
    Output(OutputAtom),
}

impl Atom {
    pub fn input(feature: impl Into<String>, value: f64) -> Atom {
        Atom::Input {
            feature: feature.into(),
            value: Real(value),
        }
    }

    pub fn output(class: usize, rule_index: usize, confidence: f64) -> Atom {
        Atom::Output(OutputAtom {
            class,
            rule_index,
            confidence: Real(confidence),
        })
    }

    pub fn as_hidden(&self) -> Option<&HiddenAtom> {
        match self {
            Atom::Hidden(h) => Some(h),
            _ => None,
        }
    }
}

impl From<HiddenAtom> for Atom {
    fn from(h: HiddenAtom) -> Self {
        Atom::Hidden(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BodyElement {
    Positive(Atom),
    /// Negation as failure over an intermediate atom.
    Negated(HiddenAtom),
    /// `input(feature, Var)`
    Bind { feature: String, var: String },
    /// `Var op bound`; compared exactly, emitted in fixed point.
    Compare { var: String, op: CmpOp, bound: Real },
}

impl BodyElement {
    pub fn hidden(&self) -> Option<&HiddenAtom> {
        match self {
            BodyElement::Positive(Atom::Hidden(h)) | BodyElement::Negated(h) => Some(h),
            _ => None,
        }
    }
}

/// Which stage of extraction produced a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleLevel {
    Top,
    Intermediate,
    Bottom,
}

/// Where a logic rule came from: the tree rule's position and statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub level: RuleLevel,
    pub tree_rule: usize,
    pub cover: usize,
    pub ok: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicRule {
    pub head: Atom,
    pub body: Vec<BodyElement>,
    pub provenance: Option<Provenance>,
}

impl LogicRule {
    pub fn new(head: Atom, body: Vec<BodyElement>) -> Self {
        LogicRule {
            head,
            body,
            provenance: None,
        }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Same head and body, ignoring provenance.
    pub fn same_clause(&self, other: &LogicRule) -> bool {
        self.head == other.head && self.body == other.body
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    /// Width of each hidden layer; its length is the layer count `k`.
    pub hidden_widths: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_count: usize,
    /// Class returned when no output atom is derivable.
    pub majority_class: usize,
    /// Decimal digits of the fixed-point encoding.
    pub scale_digits: u32,
}

impl ProgramMeta {
    pub fn layer_count(&self) -> usize {
        self.hidden_widths.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub rules: Vec<LogicRule>,
    pub meta: ProgramMeta,
}

impl Program {
    pub fn new(rules: Vec<LogicRule>, meta: ProgramMeta) -> Self {
        Program { rules, meta }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn fixed(&self, x: f64) -> i64 {
        fixed_point::encode(x, self.meta.scale_digits)
    }

    /// Checks that every rule's body only mentions the layer directly below
    /// its head (inputs are layer 0, outputs layer k+1).
    pub fn check_layering(&self) -> std::result::Result<(), String> {
        let k = self.meta.layer_count();
        for (i, rule) in self.rules.iter().enumerate() {
            let head_layer = match &rule.head {
                Atom::Hidden(h) => h.level,
                Atom::Output(_) => k + 1,
                Atom::Input { .. } => return Err(format!("rule {i}: input atom in head")),
            };
            for element in &rule.body {
                let body_layer = match element {
                    BodyElement::Positive(Atom::Hidden(h)) | BodyElement::Negated(h) => h.level,
                    BodyElement::Positive(Atom::Input { .. })
                    | BodyElement::Bind { .. }
                    | BodyElement::Compare { .. } => 0,
                    BodyElement::Positive(Atom::Output(_)) => k + 1,
                };
                if body_layer + 1 != head_layer {
                    return Err(format!(
                        "rule {i}: head at layer {head_layer} depends on layer {body_layer}"
                    ));
                }
            }
            let bound: Vec<&str> = rule
                .body
                .iter()
                .filter_map(|e| match e {
                    BodyElement::Bind { var, .. } => Some(var.as_str()),
                    _ => None,
                })
                .collect();
            for element in &rule.body {
                if let BodyElement::Compare { var, .. } = element {
                    if !bound.contains(&var.as_str()) {
                        return Err(format!("rule {i}: variable {var} is not bound"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
