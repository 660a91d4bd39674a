//! Evaluation of extracted programs: accuracy, fidelity, feature importance,
//! hidden-node impact, and cross-validated experiments.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::extraction::{extract, ExtractionConfig, ExtractionStats};
use crate::network::{train, Activation, Mlp, TrainConfig};
use crate::program::{Atom, BodyElement, Evaluator, Prediction, Program};
use crate::tree::{self, TreeData, TreeParams};

/// Per-instance program predictions on a dataset.
#[derive(Debug, Clone)]
pub struct ProgramScore {
    pub predictions: Vec<Prediction>,
    /// Percent of instances predicted correctly; abstentions use the
    /// fallback class.
    pub accuracy: f64,
    /// Percent of instances where no output atom was derived.
    pub abstention_rate: f64,
}

pub fn score_program(program: &Program, dataset: &Dataset) -> Result<ProgramScore> {
    if dataset.is_empty() {
        return Err(Error::EmptyData("cannot score a program on an empty dataset".into()));
    }
    let evaluator = Evaluator::new(program)?;
    let predictions: Vec<Prediction> = dataset
        .instances()
        .par_iter()
        .map(|inst| evaluator.predict(&inst.features))
        .collect::<Result<_>>()?;
    let n = dataset.len() as f64;
    let correct = predictions
        .iter()
        .zip(dataset.instances())
        .filter(|(p, inst)| p.class == inst.label)
        .count();
    let abstained = predictions.iter().filter(|p| p.abstained).count();
    Ok(ProgramScore {
        accuracy: 100.0 * correct as f64 / n,
        abstention_rate: 100.0 * abstained as f64 / n,
        predictions,
    })
}

/// Percent of instances the program classifies correctly.
pub fn program_accuracy(program: &Program, dataset: &Dataset) -> Result<f64> {
    Ok(score_program(program, dataset)?.accuracy)
}

/// Program accuracy as a percentage of model accuracy.
pub fn fidelity(model_acc: f64, program_acc: f64) -> Result<f64> {
    if model_acc <= 0.0 {
        return Err(Error::UndefinedFidelity);
    }
    Ok(program_acc / model_acc * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShare {
    pub feature: String,
    pub count: usize,
    /// Percent of all feature occurrences; 0 when there are none.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// One entry per feature, in dataset order.
    pub features: Vec<FeatureShare>,
}

impl FeatureImportance {
    pub fn total(&self) -> usize {
        self.features.iter().map(|f| f.count).sum()
    }

    /// Feature indices by decreasing share; ties keep dataset order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| self.features[b].count.cmp(&self.features[a].count).then(a.cmp(&b)));
        idx
    }
}

/// Counts `input(feature, _)` occurrences across all rule bodies.
pub fn feature_importance(program: &Program) -> FeatureImportance {
    let names = &program.meta.feature_names;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut counts = vec![0usize; names.len()];
    for rule in &program.rules {
        for element in &rule.body {
            let feature = match element {
                BodyElement::Bind { feature, .. } => feature,
                BodyElement::Positive(Atom::Input { feature, .. }) => feature,
                _ => continue,
            };
            if let Some(&i) = index.get(feature.as_str()) {
                counts[i] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    FeatureImportance {
        features: names
            .iter()
            .zip(counts)
            .map(|(name, count)| FeatureShare {
                feature: name.clone(),
                count,
                share: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 },
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeImpactEntry {
    pub level: usize,
    pub node: usize,
    pub head_count: usize,
    pub body_count: usize,
    pub impact: usize,
    /// Percent of the summed impact of the node's layer.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeImpact {
    /// Every hidden node, ordered by level then node.
    pub nodes: Vec<NodeImpactEntry>,
}

impl NodeImpact {
    pub fn get(&self, level: usize, node: usize) -> Option<&NodeImpactEntry> {
        self.nodes.iter().find(|e| e.level == level && e.node == node)
    }

    pub fn layer(&self, level: usize) -> impl Iterator<Item = &NodeImpactEntry> {
        self.nodes.iter().filter(move |e| e.level == level)
    }

    /// Summed share of the `n` highest-impact nodes of a layer.
    pub fn top_share(&self, level: usize, n: usize) -> f64 {
        let mut shares: Vec<f64> = self.layer(level).map(|e| e.share).collect();
        shares.sort_by(|a, b| b.total_cmp(a));
        shares.into_iter().take(n).sum()
    }
}

/// Head and body occurrence counts of each node's `h/5` atoms, aggregated
/// over all thresholds and operators, then multiplied. Negated body
/// occurrences count.
pub fn hidden_node_impact(program: &Program) -> NodeImpact {
    let widths = &program.meta.hidden_widths;
    let mut heads: Vec<Vec<usize>> = widths.iter().map(|&w| vec![0; w]).collect();
    let mut bodies = heads.clone();
    let bump = |table: &mut Vec<Vec<usize>>, level: usize, node: usize| {
        if let Some(c) = level.checked_sub(1).and_then(|l| table.get_mut(l)).and_then(|row| row.get_mut(node)) {
            *c += 1;
        }
    };
    for rule in &program.rules {
        if let Some(h) = rule.head.as_hidden() {
            bump(&mut heads, h.level, h.node);
        }
        for h in rule.body.iter().filter_map(BodyElement::hidden) {
            bump(&mut bodies, h.level, h.node);
        }
    }
    let mut nodes = Vec::new();
    for (l, (hs, bs)) in heads.iter().zip(&bodies).enumerate() {
        let total: usize = hs.iter().zip(bs).map(|(h, b)| h * b).sum();
        for (j, (&h, &b)) in hs.iter().zip(bs).enumerate() {
            let impact = h * b;
            nodes.push(NodeImpactEntry {
                level: l + 1,
                node: j,
                head_count: h,
                body_count: b,
                impact,
                share: if total == 0 { 0.0 } else { 100.0 * impact as f64 / total as f64 },
            });
        }
    }
    NodeImpact { nodes }
}

fn default_activation() -> Activation {
    Activation::Tanh
}

/// One network configuration of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub name: String,
    /// Width of each hidden layer.
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_activation")]
    pub output_activation: Activation,
    pub train: TrainConfig,
}

impl Design {
    /// Layers including the output head: one node for two classes, one per
    /// class otherwise.
    pub fn architecture(&self, class_count: usize) -> Vec<(usize, Activation)> {
        let out = if class_count <= 2 { 1 } else { class_count };
        self.hidden
            .iter()
            .map(|&w| (w, self.activation))
            .chain([(out, self.output_activation)])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::UnsupportedArchitecture(format!(
                "design `{}` has no hidden layer",
                self.name
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config(format!("design `{}` has an empty hidden layer", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub designs: Vec<Design>,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    pub folds: usize,
    /// Seeds the fold assignment.
    pub seed: u64,
}

/// Outcome of one design on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub model_accuracy: f64,
    pub program_accuracy: f64,
    /// Absent when the model accuracy is 0.
    pub fidelity: Option<f64>,
    pub abstention_rate: f64,
    pub rules: usize,
    pub final_loss: Option<f64>,
    pub stats: ExtractionStats,
    pub feature_importance: FeatureImportance,
    pub node_impact: NodeImpact,
}

/// Accuracy figures aggregated over folds (means and sample standard
/// deviations, in percent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub model_accuracy: f64,
    pub model_accuracy_std: f64,
    pub program_accuracy: f64,
    pub program_accuracy_std: f64,
    pub fidelity: f64,
    pub abstention_rate: f64,
    /// Mean of `|model - program|` per fold.
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub design: Design,
    pub accuracy: AccuracyReport,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub label: String,
    pub instances: usize,
    pub features: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: DatasetInfo,
    pub folds: usize,
    pub seed: u64,
    pub extraction: ExtractionConfig,
    pub designs: Vec<DesignReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(folds: &[FoldResult]) -> AccuracyReport {
    let model: Vec<f64> = folds.iter().map(|f| f.model_accuracy).collect();
    let program: Vec<f64> = folds.iter().map(|f| f.program_accuracy).collect();
    let fid: Vec<f64> = folds.iter().filter_map(|f| f.fidelity).collect();
    let abst: Vec<f64> = folds.iter().map(|f| f.abstention_rate).collect();
    let gap: Vec<f64> = folds
        .iter()
        .map(|f| (f.model_accuracy - f.program_accuracy).abs())
        .collect();
    AccuracyReport {
        model_accuracy: mean(&model),
        model_accuracy_std: sample_std(&model),
        program_accuracy: mean(&program),
        program_accuracy_std: sample_std(&program),
        fidelity: mean(&fid),
        abstention_rate: mean(&abst),
        mean_gap: mean(&gap),
    }
}

/// Trains, extracts and scores one design on one split. Only `train`
/// reaches training and extraction.
pub fn run_fold(
    design: &Design,
    extraction: &ExtractionConfig,
    fold: usize,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<FoldResult> {
    design.validate()?;
    let mut config = design.train.clone();
    config.seed = config.seed.wrapping_add(fold as u64);
    let init = Mlp::init(
        &design.architecture(train_set.class_count()),
        train_set.feature_count(),
        config.seed,
    )?;
    let trained = train(&init, train_set, &config)?;
    let model_accuracy = trained.model.accuracy(test_set)?;
    let extracted = extract(&trained.model, train_set, extraction)?;
    let score = score_program(&extracted.program, test_set)?;
    log::info!(
        "design {} fold {fold}: model {:.1}%, program {:.1}%, {} rules",
        design.name,
        model_accuracy,
        score.accuracy,
        extracted.program.len()
    );
    Ok(FoldResult {
        fold,
        train_size: train_set.len(),
        test_size: test_set.len(),
        model_accuracy,
        program_accuracy: score.accuracy,
        fidelity: fidelity(model_accuracy, score.accuracy).ok(),
        abstention_rate: score.abstention_rate,
        rules: extracted.program.len(),
        final_loss: trained.loss_history.last().copied(),
        stats: extracted.stats,
        feature_importance: feature_importance(&extracted.program),
        node_impact: hidden_node_impact(&extracted.program),
    })
}

/// Stratified k-fold evaluation of every design. Cells run in parallel and
/// are reported in grid order. Fold `f` of a design trains with seed
/// `design.train.seed + f`.
pub fn run_cv_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.designs.is_empty() {
        return Err(Error::Config("experiment has no designs".into()));
    }
    for d in &config.designs {
        d.validate()?;
    }
    let splits = stratified_kfold(dataset, config.folds, config.seed)?;
    let cells: Vec<(usize, usize)> = (0..config.designs.len())
        .flat_map(|d| (0..splits.len()).map(move |f| (d, f)))
        .collect();
    let results: Vec<FoldResult> = cells
        .par_iter()
        .map(|&(d, f)| {
            let split = &splits[f];
            run_fold(&config.designs[d], &config.extraction, split.fold_index, &split.train, &split.test)
        })
        .collect::<Result<_>>()?;
    let mut results = results.into_iter();
    let designs = config
        .designs
        .iter()
        .map(|design| {
            let folds: Vec<FoldResult> = results.by_ref().take(splits.len()).collect();
            DesignReport {
                design: design.clone(),
                accuracy: summarize(&folds),
                folds,
            }
        })
        .collect();
    Ok(ExperimentReport {
        dataset: DatasetInfo {
            label: dataset.label_name().to_string(),
            instances: dataset.len(),
            features: dataset.feature_count(),
            classes: dataset.class_count(),
        },
        folds: config.folds,
        seed: config.seed,
        extraction: config.extraction,
        designs,
    })
}

/// Cross-validated accuracy (pooled over folds, percent) of a tree fitted
/// directly on the input features.
pub fn baseline_tree_accuracy(dataset: &Dataset, k: usize, seed: u64, params: &TreeParams) -> Result<f64> {
    let splits = stratified_kfold(dataset, k, seed)?;
    let mut correct = 0;
    let mut total = 0;
    for split in &splits {
        let rows: Vec<Vec<f64>> = split.train.instances().iter().map(|i| i.features.clone()).collect();
        let data = TreeData::from_rows(
            split.train.feature_names().to_vec(),
            &rows,
            split.train.labels(),
            split.train.class_count(),
        )?;
        let fitted = tree::fit(&data, params)?;
        for inst in split.test.instances() {
            correct += usize::from(fitted.classify(&inst.features) == inst.label);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyData("no test instances".into()));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// Flat per-fold accuracy table.
pub fn write_folds_csv(report: &ExperimentReport, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Config(format!("csv export: {e}"));
    w.write_record([
        "design",
        "fold",
        "model_accuracy",
        "program_accuracy",
        "fidelity",
        "abstention_rate",
        "rules",
    ])
    .map_err(err)?;
    for d in &report.designs {
        for f in &d.folds {
            w.write_record([
                d.design.name.clone(),
                f.fold.to_string(),
                f.model_accuracy.to_string(),
                f.program_accuracy.to_string(),
                f.fidelity.map(|x| x.to_string()).unwrap_or_default(),
                f.abstention_rate.to_string(),
                f.rules.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv export: {e}")))
}

/// Feature shares per design and fold.
pub fn write_importance_csv(report: &ExperimentReport, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Config(format!("csv export: {e}"));
    w.write_record(["design", "fold", "feature", "count", "share"]).map_err(err)?;
    for d in &report.designs {
        for f in &d.folds {
            for s in &f.feature_importance.features {
                w.write_record([
                    d.design.name.clone(),
                    f.fold.to_string(),
                    s.feature.clone(),
                    s.count.to_string(),
                    s.share.to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv export: {e}")))
}

/// Hidden-node impact per design and fold.
pub fn write_impact_csv(report: &ExperimentReport, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Config(format!("csv export: {e}"));
    w.write_record([
        "design",
        "fold",
        "level",
        "node",
        "head_count",
        "body_count",
        "impact",
        "share",
    ])
    .map_err(err)?;
    for d in &report.designs {
        for f in &d.folds {
            for n in &f.node_impact.nodes {
                w.write_record([
                    d.design.name.clone(),
                    f.fold.to_string(),
                    n.level.to_string(),
                    n.node.to_string(),
                    n.head_count.to_string(),
                    n.body_count.to_string(),
                    n.impact.to_string(),
                    n.share.to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Config(format!("csv export: {e}")))
}
