//! Layer-wise rule extraction from a trained network.
//!
//! Extraction walks the network from the output back to the inputs:
//!
//! 1. A tree fitted on the last hidden layer's activations against the class
//!    labels yields the top rules `potential_predict_output(..) :- h(k,..)`.
//!    Every threshold test in those rules becomes a registered [`Condition`].
//! 2. For each condition on layer `i+1`, the condition's truth value over
//!    the training set becomes the boolean target of a tree fitted on layer
//!    `i`'s activations. Only leaves predicting `true` produce rules, with
//!    the condition's atom as head. Their tests are the conditions of layer
//!    `i`, processed the same way for the layer below.
//! 3. Conditions on the first hidden layer are explained by trees over the
//!    raw input features, giving bottom rules with arithmetic comparisons.
//!
//! A test whose opposite (same node and threshold, flipped operator) is
//! already registered in the current scope is written as the negation of the
//! registered atom instead of introducing a new one.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fixed_point;
use crate::network::{ActivationTrace, Mlp};
use crate::program::{
    Atom, BodyElement, HiddenAtom, LogicRule, Program, ProgramMeta, Provenance, Real, RuleLevel, ThresholdKey,
};
use crate::tree::{self, hidden_attribute_name, AttrCondition, AttributeRef, CmpOp, TreeData, TreeParams};

/// Threshold predicate on one hidden node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Hidden layer, 1-based.
    pub level: usize,
    pub node: usize,
    pub op: CmpOp,
    pub threshold: f64,
    /// `trunc(threshold * 10^digits)`
    pub threshold_key: i64,
}

type ConditionId = (usize, usize, CmpOp, u64);

impl Condition {
    pub fn new(level: usize, node: usize, op: CmpOp, threshold: f64, digits: u32) -> Self {
        Condition {
            level,
            node,
            op,
            threshold,
            threshold_key: fixed_point::encode(threshold, digits),
        }
    }

    /// Converts a tree test on a hidden-node attribute.
    pub fn from_attr(t: &AttrCondition, digits: u32) -> Result<Self> {
        match t.parse_attribute()? {
            AttributeRef::Hidden { level, node } => Ok(Condition::new(level, node, t.op, t.threshold, digits)),
            AttributeRef::Input { .. } => Err(Error::Condition(format!(
                "`{}` is an input feature, not a hidden node",
                t.attribute
            ))),
        }
    }

    pub fn opposite(&self) -> Condition {
        Condition {
            op: self.op.opposite(),
            ..*self
        }
    }

    fn id(&self) -> ConditionId {
        (self.level, self.node, self.op, self.threshold.to_bits())
    }

    pub fn holds(&self, activation: f64) -> bool {
        self.op.holds(activation, self.threshold)
    }

    /// Atom naming this condition, before collision handling.
    pub fn atom(&self) -> HiddenAtom {
        HiddenAtom::new(self.level, self.node, self.op, self.threshold_key)
    }

    /// Column label used in debug dumps, e.g. `h_2_n_0_leq_than_minus372440`.
    pub fn label_name(&self) -> String {
        let key = if self.threshold_key < 0 {
            format!("minus{}", self.threshold_key.unsigned_abs())
        } else {
            self.threshold_key.to_string()
        };
        format!(
            "{}_{}_than_{key}",
            hidden_attribute_name(self.level, self.node),
            self.op.name()
        )
    }

    fn sort_key(&self) -> (usize, usize, CmpOp, crate::program::Real) {
        (self.level, self.node, self.op, Real(self.threshold))
    }
}

/// Set of conditions registered within one extraction scope.
#[derive(Debug, Clone, Default)]
pub struct ConditionRegistry {
    conditions: Vec<Condition>,
    ids: HashSet<ConditionId>,
}

impl ConditionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, t: &Condition) -> bool {
        self.ids.contains(&t.id())
    }

    /// Registers `t`; returns false if it was already present.
    fn insert(&mut self, t: Condition) -> bool {
        if self.ids.insert(t.id()) {
            self.conditions.push(t);
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Conditions in registration order.
    pub fn iter(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter()
    }

    /// Conditions ordered by level, node, operator and threshold.
    pub fn sorted(&self) -> Vec<Condition> {
        let mut out = self.conditions.clone();
        out.sort_by_key(|a| a.sort_key());
        out
    }

    /// Set union; conditions already present are skipped.
    pub fn merge(&mut self, other: &ConditionRegistry) {
        for t in &other.conditions {
            self.insert(*t);
        }
    }
}

/// A body literal over a registered condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionLiteral {
    pub condition: Condition,
    pub negated: bool,
}

/// Registers `t` unless it or its opposite is already known, and returns
/// the literal expressing `t`: the positive atom of `t`, or `not` of the
/// opposite atom when the opposite is registered.
pub fn process_condition(t: &Condition, registry: &mut ConditionRegistry) -> ConditionLiteral {
    let opposite = t.opposite();
    if !registry.contains(t) && !registry.contains(&opposite) {
        registry.insert(*t);
    }
    if registry.contains(&opposite) {
        ConditionLiteral {
            condition: opposite,
            negated: true,
        }
    } else {
        ConditionLiteral {
            condition: *t,
            negated: false,
        }
    }
}

/// Head of an extracted rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtractedHead {
    Output {
        class: usize,
        index: usize,
        confidence: f64,
    },
    Hidden(Condition),
}

/// Body element of an extracted rule.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractedLiteral {
    Condition(ConditionLiteral),
    /// Test on raw input feature `feature`.
    Input { feature: usize, op: CmpOp, threshold: f64 },
}

/// A rule as produced by one extraction stage, before atoms get their final
/// fixed-point names.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRule {
    pub head: ExtractedHead,
    pub body: Vec<ExtractedLiteral>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub tree: TreeParams,
    /// Fixed-point digits; the scale is `10^scale_digits`.
    pub scale_digits: u32,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            tree: TreeParams::default(),
            scale_digits: fixed_point::DEFAULT_DIGITS,
        }
    }
}

fn hidden_names(level: usize, width: usize) -> Vec<String> {
    (0..width).map(|j| hidden_attribute_name(level, j)).collect()
}

/// Tree data over one hidden level's activations.
pub fn level_data(trace: &ActivationTrace, level: usize, labels: Vec<usize>, class_count: usize) -> Result<TreeData> {
    TreeData::from_rows(hidden_names(level, trace.width(level)), trace.level(level), labels, class_count)
}

/// Truth value of `t` on every traced instance, compared against the exact
/// threshold.
pub fn evaluate_condition(t: &Condition, trace: &ActivationTrace) -> Result<Vec<bool>> {
    if t.level == 0 || t.level > trace.levels() {
        return Err(Error::Condition(format!(
            "level {} outside the {} traced hidden layers",
            t.level,
            trace.levels()
        )));
    }
    if t.node >= trace.width(t.level) {
        return Err(Error::Condition(format!(
            "node {} outside layer {} of width {}",
            t.node,
            t.level,
            trace.width(t.level)
        )));
    }
    Ok(trace.level(t.level).iter().map(|row| t.holds(row[t.node])).collect())
}

fn hidden_literals(
    rule: &tree::IfThenRule,
    registry: &mut ConditionRegistry,
    digits: u32,
) -> Result<Vec<ExtractedLiteral>> {
    rule.conditions
        .iter()
        .map(|c| {
            let t = Condition::from_attr(c, digits)?;
            Ok(ExtractedLiteral::Condition(process_condition(&t, registry)))
        })
        .collect()
}

/// Top rules from the last hidden layer's activations and the class labels.
/// One registry is shared by all rules.
pub fn extract_top_level(data_top: &TreeData, config: &ExtractionConfig) -> Result<(Vec<ExtractedRule>, ConditionRegistry)> {
    let tree = tree::fit(data_top, &config.tree)?;
    let mut registry = ConditionRegistry::new();
    let mut rules = Vec::new();
    for (index, r) in tree::to_rules(&tree, data_top).iter().enumerate() {
        let body = hidden_literals(r, &mut registry, config.scale_digits)?;
        rules.push(ExtractedRule {
            head: ExtractedHead::Output {
                class: r.class_label,
                index,
                confidence: r.confidence()?,
            },
            body,
            provenance: Provenance {
                level: RuleLevel::Top,
                tree_rule: index,
                cover: r.cover,
                ok: r.ok,
            },
        });
    }
    Ok((rules, registry))
}

/// Rules explaining condition `t` (on layer `i+1`) in terms of layer `i`.
/// `data` holds layer `i` activations labelled by `t`'s truth value (class 1
/// is true). Uses a fresh registry.
pub fn extract_intermediate_level(
    data: &TreeData,
    t: &Condition,
    config: &ExtractionConfig,
) -> Result<(Vec<ExtractedRule>, ConditionRegistry)> {
    let tree = tree::fit(data, &config.tree)?;
    let mut registry = ConditionRegistry::new();
    let mut rules = Vec::new();
    for (index, r) in tree::to_rules(&tree, data).iter().enumerate() {
        if r.class_label != 1 {
            continue;
        }
        let body = hidden_literals(r, &mut registry, config.scale_digits)?;
        rules.push(ExtractedRule {
            head: ExtractedHead::Hidden(*t),
            body,
            provenance: Provenance {
                level: RuleLevel::Intermediate,
                tree_rule: index,
                cover: r.cover,
                ok: r.ok,
            },
        });
    }
    Ok((rules, registry))
}

/// Rules explaining first-layer condition `t` in terms of raw inputs.
/// `data` holds the input features labelled by `t`'s truth value.
pub fn extract_bottom_level(data: &TreeData, t: &Condition, config: &ExtractionConfig) -> Result<Vec<ExtractedRule>> {
    if t.level != 1 {
        return Err(Error::Condition(format!(
            "bottom rules explain first-layer conditions, got level {}",
            t.level
        )));
    }
    let tree = tree::fit(data, &config.tree)?;
    let mut rules = Vec::new();
    for (index, r) in tree::to_rules(&tree, data).iter().enumerate() {
        if r.class_label != 1 {
            continue;
        }
        let body = r
            .conditions
            .iter()
            .map(|c| ExtractedLiteral::Input {
                feature: c.attribute_index,
                op: c.op,
                threshold: c.threshold,
            })
            .collect();
        rules.push(ExtractedRule {
            head: ExtractedHead::Hidden(*t),
            body,
            provenance: Provenance {
                level: RuleLevel::Bottom,
                tree_rule: index,
                cover: r.cover,
                ok: r.ok,
            },
        });
    }
    Ok(rules)
}

/// Counts gathered while extracting, per hidden level (index 0 is level 1).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStats {
    /// Distinct conditions registered on each level.
    pub registered_per_level: Vec<usize>,
    /// Tests on each level across all converted tree rules.
    pub tree_conditions_per_level: Vec<usize>,
    /// Distinct `h/5` atoms heading at least one rule.
    pub distinct_hidden_heads: usize,
    pub top_rules: usize,
    pub intermediate_rules: usize,
    pub bottom_rules: usize,
    /// Exact duplicate rules dropped during assembly.
    pub duplicates_removed: usize,
}

impl ExtractionStats {
    pub fn total_registered(&self) -> usize {
        self.registered_per_level.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub program: Program,
    pub stats: ExtractionStats,
}

/// Training data for extraction: raw features, labels and feature names.
#[derive(Debug, Clone, Copy)]
pub struct ExtractionInput<'a> {
    pub feature_names: &'a [String],
    pub inputs: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub class_count: usize,
}

/// Extracts a program from a model and its training set.
pub fn extract(model: &Mlp, dataset: &Dataset, config: &ExtractionConfig) -> Result<Extraction> {
    if dataset.feature_count() != model.input_dim() {
        return Err(Error::ArityMismatch {
            expected: model.input_dim(),
            found: dataset.feature_count(),
        });
    }
    let inputs: Vec<Vec<f64>> = dataset.instances().iter().map(|i| i.features.clone()).collect();
    let labels = dataset.labels();
    let trace = model.capture_rows(&inputs)?;
    extract_from_trace(
        &trace,
        ExtractionInput {
            feature_names: dataset.feature_names(),
            inputs: &inputs,
            labels: &labels,
            class_count: dataset.class_count(),
        },
        config,
    )
}

/// Extraction driven by an already captured activation trace.
pub fn extract_from_trace(
    trace: &ActivationTrace,
    input: ExtractionInput<'_>,
    config: &ExtractionConfig,
) -> Result<Extraction> {
    let k = trace.levels();
    if k == 0 {
        return Err(Error::UnsupportedArchitecture("network has no hidden layer".into()));
    }
    if input.inputs.is_empty() {
        return Err(Error::EmptyData("extraction needs training instances".into()));
    }
    if trace.rows() != input.inputs.len() || input.labels.len() != input.inputs.len() {
        return Err(Error::InvalidArity(format!(
            "trace has {} rows, inputs {}, labels {}",
            trace.rows(),
            input.inputs.len(),
            input.labels.len()
        )));
    }
    let digits = config.scale_digits;
    let mut stats = ExtractionStats {
        registered_per_level: vec![0; k],
        tree_conditions_per_level: vec![0; k],
        ..Default::default()
    };
    let count_tests = |rules: &[ExtractedRule]| -> usize {
        rules
            .iter()
            .map(|r| r.body.iter().filter(|l| matches!(l, ExtractedLiteral::Condition(_))).count())
            .sum()
    };

    let top_data = level_data(trace, k, input.labels.to_vec(), input.class_count)?;
    let (top_rules, registry) = extract_top_level(&top_data, config)?;
    log::debug!("top level: {} rules, {} conditions", top_rules.len(), registry.len());
    stats.top_rules = top_rules.len();
    stats.registered_per_level[k - 1] = registry.len();
    stats.tree_conditions_per_level[k - 1] = count_tests(&top_rules);
    let mut rules = top_rules;
    let mut conditions = registry.sorted();

    for level in (1..k).rev() {
        let base = level_data(trace, level, vec![0; trace.rows()], 2)?;
        let results: Vec<(Vec<ExtractedRule>, ConditionRegistry)> = conditions
            .par_iter()
            .map(|t| {
                let labels = evaluate_condition(t, trace)?;
                let data = base.with_labels(labels.iter().map(|&b| usize::from(b)).collect())?;
                extract_intermediate_level(&data, t, config)
            })
            .collect::<Result<_>>()?;
        let mut next = ConditionRegistry::new();
        for (layer_rules, registry) in results {
            stats.tree_conditions_per_level[level - 1] += count_tests(&layer_rules);
            stats.intermediate_rules += layer_rules.len();
            rules.extend(layer_rules);
            next.merge(&registry);
        }
        log::debug!("level {level}: {} conditions", next.len());
        stats.registered_per_level[level - 1] = next.len();
        conditions = next.sorted();
    }

    let input_data = TreeData::from_rows(
        input.feature_names.to_vec(),
        input.inputs,
        vec![0; input.inputs.len()],
        2,
    )?;
    let bottom: Vec<Vec<ExtractedRule>> = conditions
        .par_iter()
        .map(|t| {
            let labels = evaluate_condition(t, trace)?;
            let data = input_data.with_labels(labels.iter().map(|&b| usize::from(b)).collect())?;
            extract_bottom_level(&data, t, config)
        })
        .collect::<Result<_>>()?;
    for b in bottom {
        stats.bottom_rules += b.len();
        rules.extend(b);
    }

    let meta = ProgramMeta {
        hidden_widths: (1..=k).map(|l| trace.width(l)).collect(),
        feature_names: input.feature_names.to_vec(),
        class_count: input.class_count,
        majority_class: majority(input.labels, input.class_count),
        scale_digits: digits,
    };
    let (program, removed) = assemble(&rules, meta);
    stats.duplicates_removed = removed;
    stats.distinct_hidden_heads = program
        .rules
        .iter()
        .filter_map(|r| r.head.as_hidden())
        .collect::<HashSet<_>>()
        .len();
    Ok(Extraction { program, stats })
}

fn majority(labels: &[usize], class_count: usize) -> usize {
    let mut counts = vec![0usize; class_count.max(1)];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Assigns final atom names and removes exact duplicate rules. Returns the
/// program and the number of duplicates dropped.
///
/// Thresholds on the same node that truncate to the same key get
/// discriminators in ascending threshold order, so atom names stay
/// injective.
pub fn assemble(rules: &[ExtractedRule], meta: ProgramMeta) -> (Program, usize) {
    let namer = AtomNamer::new(rules);
    let mut out: Vec<LogicRule> = Vec::with_capacity(rules.len());
    let mut seen: HashSet<(Atom, Vec<BodyElement>)> = HashSet::new();
    let mut removed = 0;
    for r in rules {
        let head = match r.head {
            ExtractedHead::Output {
                class,
                index,
                confidence,
            } => Atom::output(class, index, confidence),
            ExtractedHead::Hidden(t) => Atom::Hidden(namer.atom(&t)),
        };
        let mut body = Vec::with_capacity(r.body.len() * 2);
        let mut bound: Vec<usize> = Vec::new();
        for lit in &r.body {
            match lit {
                ExtractedLiteral::Condition(c) => {
                    let atom = namer.atom(&c.condition);
                    body.push(if c.negated {
                        BodyElement::Negated(atom)
                    } else {
                        BodyElement::Positive(Atom::Hidden(atom))
                    });
                }
                ExtractedLiteral::Input { feature, op, threshold } => {
                    let var = format!("V{feature}");
                    if !bound.contains(feature) {
                        bound.push(*feature);
                        body.push(BodyElement::Bind {
                            feature: meta.feature_names[*feature].clone(),
                            var: var.clone(),
                        });
                    }
                    body.push(BodyElement::Compare {
                        var,
                        op: *op,
                        bound: Real(*threshold),
                    });
                }
            }
        }
        if seen.insert((head.clone(), body.clone())) {
            out.push(LogicRule {
                head,
                body,
                provenance: Some(r.provenance),
            });
        } else {
            removed += 1;
        }
    }
    (Program::new(out, meta), removed)
}

struct AtomNamer {
    discs: HashMap<(usize, usize, u64), ThresholdKey>,
}

impl AtomNamer {
    fn new(rules: &[ExtractedRule]) -> Self {
        let mut groups: BTreeMap<(usize, usize, i64), Vec<Real>> = BTreeMap::new();
        let mut note = |c: &Condition| {
            let g = groups.entry((c.level, c.node, c.threshold_key)).or_default();
            if !g.contains(&Real(c.threshold)) {
                g.push(Real(c.threshold));
            }
        };
        for r in rules {
            if let ExtractedHead::Hidden(t) = &r.head {
                note(t);
            }
            for lit in &r.body {
                if let ExtractedLiteral::Condition(c) = lit {
                    note(&c.condition);
                }
            }
        }
        let mut discs = HashMap::new();
        for ((level, node, key), mut thresholds) in groups {
            thresholds.sort();
            for (disc, th) in thresholds.into_iter().enumerate() {
                discs.insert(
                    (level, node, th.0.to_bits()),
                    ThresholdKey {
                        value: key,
                        disc: disc as u32,
                    },
                );
            }
        }
        AtomNamer { discs }
    }

    fn atom(&self, c: &Condition) -> HiddenAtom {
        HiddenAtom {
            level: c.level,
            node: c.node,
            op: c.op,
            key: self.discs[&(c.level, c.node, c.threshold.to_bits())],
        }
    }
}
