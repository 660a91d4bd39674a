//! Gain-ratio decision trees over real-valued attributes.
//!
//! Induction is greedy and top-down with binary splits `attr <= v` / `attr > v`
//! where `v` is a value observed in the node's partition. Among the feasible
//! splits, those whose information gain reaches the mean gain are kept and
//! the one with the highest gain ratio wins; ties go to the lowest attribute
//! index, then the smallest threshold. There is no pruning.
//!
//! A fitted tree flattens into IF-THEN rules carrying `cover` (instances
//! matching all conditions) and `ok` (those among them with the rule's class).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores closer than this are treated as equal.
pub const SCORE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Leq,
    Gt,
}

impl CmpOp {
    pub fn opposite(self) -> CmpOp {
        match self {
            CmpOp::Leq => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Leq,
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            CmpOp::Leq => value <= threshold,
            CmpOp::Gt => value > threshold,
        }
    }

    /// Name used in atom terms.
    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Leq => "leq",
            CmpOp::Gt => "gt",
        }
    }

    /// Comparison operator in solver syntax.
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Leq => "<=",
            CmpOp::Gt => ">",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// What an attribute name refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeRef {
    Hidden { level: usize, node: usize },
    Input { index: usize },
}

/// Parses `h_<level>_n_<node>` or `input_feat_<index>`.
pub fn parse_attribute(name: &str) -> Option<AttributeRef> {
    if let Some(index) = name.strip_prefix("input_feat_") {
        return index.parse().ok().map(|index| AttributeRef::Input { index });
    }
    let rest = name.strip_prefix("h_")?;
    let (level, node) = rest.split_once("_n_")?;
    Some(AttributeRef::Hidden {
        level: level.parse().ok()?,
        node: node.parse().ok()?,
    })
}

pub fn hidden_attribute_name(level: usize, node: usize) -> String {
    format!("h_{level}_n_{node}")
}

/// A single threshold test taken from a tree path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttrCondition {
    pub attribute: String,
    /// Column of the attribute in the data the tree was fitted on.
    pub attribute_index: usize,
    pub op: CmpOp,
    pub threshold: f64,
}

impl AttrCondition {
    pub fn parse_attribute(&self) -> Result<AttributeRef> {
        parse_attribute(&self.attribute)
            .ok_or_else(|| Error::Condition(format!("unrecognized attribute `{}`", self.attribute)))
    }

    pub fn holds(&self, row: &[f64]) -> bool {
        self.op.holds(row[self.attribute_index], self.threshold)
    }
}

impl fmt::Display for AttrCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attribute, self.op, self.threshold)
    }
}

/// Conjunctive rule read off one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfThenRule {
    pub conditions: Vec<AttrCondition>,
    pub class_label: usize,
    pub cover: usize,
    pub ok: usize,
}

impl IfThenRule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(row))
    }

    /// `ok / cover` as a fraction in [0, 1].
    pub fn confidence(&self) -> Result<f64> {
        confidence(self.ok, self.cover)
    }
}

pub fn confidence(ok: usize, cover: usize) -> Result<f64> {
    if cover == 0 {
        return Err(Error::UndefinedConfidence);
    }
    Ok(ok as f64 / cover as f64)
}

impl fmt::Display for IfThenRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.conditions.is_empty() {
            f.write_str("true")?;
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, " THEN class = {} (cover {}, ok {})", self.class_label, self.cover, self.ok)
    }
}

/// Attribute matrix plus class labels, stored column-major.
#[derive(Debug, Clone)]
pub struct TreeData {
    attribute_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl TreeData {
    pub fn from_rows(
        attribute_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArity(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let width = attribute_names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidArity(format!(
                    "row {i} has {} attributes, expected {width}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Config(format!("label {bad} out of range for {class_count} classes")));
        }
        Ok(TreeData {
            attribute_names,
            columns,
            labels,
            class_count,
        })
    }

    /// Boolean targets encoded as class 1 (true) and 0 (false).
    pub fn from_bool_labels(attribute_names: Vec<String>, rows: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        Self::from_rows(attribute_names, rows, labels.iter().map(|&b| usize::from(b)).collect(), 2)
    }

    /// Same attributes with new labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidArity(format!(
                "{} rows but {} labels",
                self.len(),
                labels.len()
            )));
        }
        let class_count = labels.iter().map(|&l| l + 1).max().unwrap_or(0).max(self.class_count);
        Ok(TreeData {
            attribute_names: self.attribute_names.clone(),
            columns: self.columns.clone(),
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn value(&self, row: usize, attribute: usize) -> f64 {
        self.columns[attribute][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            max_depth: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        attribute: usize,
        threshold: f64,
        /// `attribute <= threshold`
        left: Box<Node>,
        /// `attribute > threshold`
        right: Box<Node>,
    },
    Leaf {
        class_label: usize,
        histogram: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: Node,
    pub attribute_names: Vec<String>,
}

impl DecisionTree {
    pub fn classify(&self, row: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class_label, .. } => return *class_label,
                Node::Internal {
                    attribute,
                    threshold,
                    left,
                    right,
                } => node = if row[*attribute] <= *threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Internal { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }
}

/// Information gain, split information and their ratio for one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub gain: f64,
    pub split_info: f64,
    pub ratio: f64,
}

/// Base-2 entropy of a class histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Scores a split given the class histogram of each child partition.
pub fn split_score(children: &[&[usize]]) -> SplitScore {
    let classes = children.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut parent = vec![0usize; classes];
    for child in children {
        for (p, &c) in parent.iter_mut().zip(child.iter()) {
            *p += c;
        }
    }
    let n: usize = parent.iter().sum();
    if n == 0 {
        return SplitScore {
            gain: 0.0,
            split_info: 0.0,
            ratio: 0.0,
        };
    }
    let sizes: Vec<usize> = children.iter().map(|c| c.iter().sum()).collect();
    let remainder: f64 = children
        .iter()
        .zip(&sizes)
        .map(|(c, &s)| s as f64 / n as f64 * entropy(c))
        .sum();
    let gain = entropy(&parent) - remainder;
    let split_info = entropy(&sizes);
    let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
    SplitScore {
        gain,
        split_info,
        ratio,
    }
}

/// Gain ratio of a split; 0 when the split information is 0.
pub fn gain_ratio(children: &[&[usize]]) -> f64 {
    split_score(children).ratio
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    attribute: usize,
    threshold: f64,
    score: SplitScore,
}

/// Grows a tree on `data`.
pub fn fit(data: &TreeData, params: &TreeParams) -> Result<DecisionTree> {
    if data.is_empty() {
        return Err(Error::EmptyData("cannot fit a tree on zero instances".into()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let root = grow(data, params, indices, 0);
    Ok(DecisionTree {
        root,
        attribute_names: data.attribute_names.clone(),
    })
}

fn histogram(data: &TreeData, indices: &[usize]) -> Vec<usize> {
    let mut h = vec![0; data.class_count];
    for &i in indices {
        h[data.labels[i]] += 1;
    }
    h
}

fn majority(histogram: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in histogram.iter().enumerate() {
        if n > histogram[best] {
            best = c;
        }
    }
    best
}

fn grow(data: &TreeData, params: &TreeParams, indices: Vec<usize>, depth: usize) -> Node {
    let hist = histogram(data, &indices);
    let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
    let leaf = |hist: Vec<usize>| Node::Leaf {
        class_label: majority(&hist),
        histogram: hist,
    };
    if pure || depth >= params.max_depth {
        return leaf(hist);
    }
    let Some(best) = best_split(data, params, &indices, &hist) else {
        return leaf(hist);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| data.columns[best.attribute][i] <= best.threshold);
    Node::Internal {
        attribute: best.attribute,
        threshold: best.threshold,
        left: Box::new(grow(data, params, left, depth + 1)),
        right: Box::new(grow(data, params, right, depth + 1)),
    }
}

/// Candidate splits of `indices`, ordered by attribute then threshold.
fn candidates(data: &TreeData, params: &TreeParams, indices: &[usize], hist: &[usize]) -> Vec<Candidate> {
    let n = indices.len();
    let min_leaf = params.min_leaf.max(1);
    let mut out = Vec::new();
    let mut sorted = indices.to_vec();
    for (attribute, column) in data.columns.iter().enumerate() {
        sorted.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        let mut left = vec![0usize; data.class_count];
        let mut right = hist.to_vec();
        for pos in 0..n.saturating_sub(1) {
            let i = sorted[pos];
            left[data.labels[i]] += 1;
            right[data.labels[i]] -= 1;
            let value = column[i];
            if value == column[sorted[pos + 1]] {
                continue;
            }
            let left_n = pos + 1;
            if left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            out.push(Candidate {
                attribute,
                threshold: value,
                score: split_score(&[&left, &right]),
            });
        }
    }
    out
}

fn best_split(data: &TreeData, params: &TreeParams, indices: &[usize], hist: &[usize]) -> Option<Candidate> {
    let all = candidates(data, params, indices, hist);
    if all.is_empty() {
        return None;
    }
    let mean_gain = all.iter().map(|c| c.score.gain).sum::<f64>() / all.len() as f64;
    let mut best: Option<Candidate> = None;
    for c in all.into_iter().filter(|c| c.score.gain >= mean_gain - SCORE_EPS) {
        match best {
            Some(b) if c.score.ratio <= b.score.ratio + SCORE_EPS => {}
            _ => best = Some(c),
        }
    }
    best
}

/// Root split chosen by `fit`, if any: `(attribute, threshold, score)`.
pub fn root_split(data: &TreeData, params: &TreeParams) -> Option<(usize, f64, SplitScore)> {
    let indices: Vec<usize> = (0..data.len()).collect();
    let hist = histogram(data, &indices);
    if hist.iter().filter(|&&c| c > 0).count() <= 1 || params.max_depth == 0 {
        return None;
    }
    best_split(data, params, &indices, &hist).map(|c| (c.attribute, c.threshold, c.score))
}

/// One rule per leaf, left to right. Repeated tests of the same attribute
/// and operator along a path collapse to the tightest bound; `cover` and `ok`
/// are counted against `data`.
pub fn to_rules(tree: &DecisionTree, data: &TreeData) -> Vec<IfThenRule> {
    let mut rules = Vec::new();
    let mut path = Vec::new();
    collect_rules(&tree.root, &tree.attribute_names, &mut path, &mut rules);
    for rule in &mut rules {
        let mut cover = 0;
        let mut ok = 0;
        for i in 0..data.len() {
            if rule
                .conditions
                .iter()
                .all(|c| c.op.holds(data.columns[c.attribute_index][i], c.threshold))
            {
                cover += 1;
                if data.labels[i] == rule.class_label {
                    ok += 1;
                }
            }
        }
        rule.cover = cover;
        rule.ok = ok;
    }
    rules
}

fn collect_rules(node: &Node, names: &[String], path: &mut Vec<AttrCondition>, out: &mut Vec<IfThenRule>) {
    match node {
        Node::Leaf { class_label, .. } => out.push(IfThenRule {
            conditions: merge_path(path),
            class_label: *class_label,
            cover: 0,
            ok: 0,
        }),
        Node::Internal {
            attribute,
            threshold,
            left,
            right,
        } => {
            for (op, child) in [(CmpOp::Leq, left), (CmpOp::Gt, right)] {
                path.push(AttrCondition {
                    attribute: names[*attribute].clone(),
                    attribute_index: *attribute,
                    op,
                    threshold: *threshold,
                });
                collect_rules(child, names, path, out);
                path.pop();
            }
        }
    }
}

fn merge_path(path: &[AttrCondition]) -> Vec<AttrCondition> {
    let mut merged: Vec<AttrCondition> = Vec::with_capacity(path.len());
    for cond in path {
        match merged
            .iter_mut()
            .find(|m| m.attribute_index == cond.attribute_index && m.op == cond.op)
        {
            Some(existing) => {
                existing.threshold = match cond.op {
                    CmpOp::Leq => existing.threshold.min(cond.threshold),
                    CmpOp::Gt => existing.threshold.max(cond.threshold),
                }
            }
            None => merged.push(cond.clone()),
        }
    }
    merged
}
