//! Synthetic datasets, CSV I/O and stratified cross-validation folds.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One labelled example.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Instance { features, label }
    }
}

/// A labelled table with named real-valued features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    label_name: String,
    class_count: usize,
    instances: Vec<Instance>,
}

/// One train/test split of a k-fold partition.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: Dataset,
    pub test: Dataset,
    /// Positions of the test instances in the parent dataset.
    pub test_indices: Vec<usize>,
}

/// Name of the `i`-th input feature (0-indexed).
pub fn feature_name(index: usize) -> String {
    format!("input_feat_{index}")
}

/// Half-up rounding of a unit-interval value to a bit.
fn round_bit(x: f64) -> usize {
    usize::from(x >= 0.5)
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        label_name: impl Into<String>,
        class_count: usize,
        instances: Vec<Instance>,
    ) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Config("class count must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name `{name}`")));
            }
        }
        for (i, inst) in instances.iter().enumerate() {
            if inst.features.len() != feature_names.len() {
                return Err(Error::InvalidArity(format!(
                    "instance {i} has {} features, expected {}",
                    inst.features.len(),
                    feature_names.len()
                )));
            }
            if inst.label >= class_count {
                return Err(Error::Config(format!(
                    "instance {i} has label {} but class count is {class_count}",
                    inst.label
                )));
            }
        }
        Ok(Dataset {
            feature_names,
            label_name: label_name.into(),
            class_count,
            instances,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for inst in &self.instances {
            counts[inst.label] += 1;
        }
        counts
    }

    /// Most frequent class; ties go to the smaller class id.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (class, &count) in counts.iter().enumerate() {
            if count > counts[best] {
                best = class;
            }
        }
        best
    }

    /// New dataset holding the instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            class_count: self.class_count,
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
        }
    }
}

fn uniform_dataset(
    n: usize,
    d: usize,
    seed: u64,
    label_name: &str,
    label: impl Fn(&[f64]) -> usize,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("instance count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|_| {
            let features: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let y = label(&features);
            Instance::new(features, y)
        })
        .collect();
    Dataset::new((0..d).map(feature_name).collect(), label_name, 2, instances)
}

/// XOR dataset: `d` uniform features on [0,1), label `round(x0) ^ round(x1)`.
pub fn gen_xor(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(Error::InvalidArity(format!(
            "xor needs at least 2 features, got {d}"
        )));
    }
    uniform_dataset(n, d, seed, "xor", xor_label)
}

/// Modified-XOR dataset: label `(round(x0) ^ round(x1)) ^ round(x2)`.
pub fn gen_modified_xor(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d < 3 {
        return Err(Error::InvalidArity(format!(
            "modified xor needs at least 3 features, got {d}"
        )));
    }
    uniform_dataset(n, d, seed, "modified_xor", modified_xor_label)
}

pub fn xor_label(features: &[f64]) -> usize {
    round_bit(features[0]) ^ round_bit(features[1])
}

pub fn modified_xor_label(features: &[f64]) -> usize {
    (round_bit(features[0]) ^ round_bit(features[1])) ^ round_bit(features[2])
}

/// The two-input XOR truth table repeated `repeats` times, rows in the order
/// (0,0), (0,1), (1,0), (1,1).
pub fn xor_truth_table(repeats: usize) -> Dataset {
    let rows = [([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)];
    let instances = (0..repeats)
        .flat_map(|_| rows.iter().map(|(x, y)| Instance::new(x.to_vec(), *y)))
        .collect();
    Dataset::new(vec![feature_name(0), feature_name(1)], "xor", 2, instances)
        .expect("truth table is well formed")
}

/// Reads a CSV file whose header names the features followed by the label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Parses CSV text from any reader. Rows are numbered as file lines, the
/// header being line 1.
pub fn read_csv(reader: impl std::io::Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            message: "header needs at least one feature column and a label column".into(),
        });
    }
    let feature_names: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();
    let label_name = header.get(header.len() - 1).unwrap_or_default().to_string();

    let mut instances = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!(
                    "expected {} fields ({} features + label), found {}",
                    header.len(),
                    feature_names.len(),
                    record.len()
                ),
            });
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (col, cell) in record.iter().take(feature_names.len()).enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature `{}` is not numeric: `{cell}`", feature_names[col]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("feature `{}` is not finite", feature_names[col]),
                });
            }
            features.push(value);
        }
        let cell = record.get(feature_names.len()).unwrap_or_default();
        let label: usize = cell.parse().map_err(|_| Error::Parse {
            row,
            message: format!("unknown label value `{cell}`"),
        })?;
        instances.push(Instance::new(features, label));
    }
    let class_count = instances.iter().map(|i| i.label + 1).max().unwrap_or(0).max(2);
    Dataset::new(feature_names, label_name, class_count, instances).map_err(|e| Error::Parse {
        row: 1,
        message: e.to_string(),
    })
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_csv(dataset: &Dataset, writer: impl std::io::Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(&dataset.label_name);
    wtr.write_record(&header).map_err(to_io)?;
    for inst in &dataset.instances {
        let mut record: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
        record.push(inst.label.to_string());
        wtr.write_record(&record).map_err(to_io)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))
}

/// Stratified k-fold partition.
///
/// Each class's indices are shuffled with the seeded generator, the classes
/// are concatenated, and position `p` of that sequence goes to fold `p % k`.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
    for (i, inst) in dataset.instances.iter().enumerate() {
        by_class[inst.label].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} instances, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut fold_of = vec![0usize; dataset.len()];
    let mut position = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = position % k;
            position += 1;
        }
    }
    Ok((0..k)
        .map(|fold| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| fold_of[i] == fold);
            FoldSplit {
                fold_index: fold,
                train: dataset.subset(&train_idx),
                test: dataset.subset(&test_idx),
                test_indices: test_idx,
            }
        })
        .collect())
}
