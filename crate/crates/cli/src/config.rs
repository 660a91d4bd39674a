//! JSON run configuration. Every field is optional here; command-line flags
//! take precedence over it.

use std::path::{Path, PathBuf};

use nnasp_core::analysis::Design;
use nnasp_core::network::{Activation, Optimizer};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Xor,
    ModifiedXor,
    XorTable,
}

/// Where a dataset comes from: a CSV path or a generator call.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Path(PathBuf),
    Generate {
        kind: DataKind,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        d: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<DataSource>,
    pub model: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub csv_dir: Option<PathBuf>,
    pub hidden: Option<Vec<usize>>,
    pub activation: Option<Activation>,
    pub output_activation: Option<Activation>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<Optimizer>,
    pub seed: Option<u64>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub scale_digits: Option<u32>,
    pub folds: Option<usize>,
    pub designs: Option<Vec<Design>>,
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::validation(format!("{}: malformed config: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut config.model);
        resolve(&mut config.program);
        resolve(&mut config.report);
        resolve(&mut config.csv_dir);
        if let Some(DataSource::Path(p)) = &mut config.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, Failure> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}
