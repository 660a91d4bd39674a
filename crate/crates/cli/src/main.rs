//! `nnasp`: batch front end for training networks, extracting programs from
//! them and evaluating the programs.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 training divergence,
//! 5 validation (arity, malformed inputs or configuration).

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnasp_core::analysis::{
    feature_importance, fidelity, hidden_node_impact, run_cv_experiment, score_program, write_folds_csv,
    write_impact_csv, write_importance_csv, ExperimentConfig, FeatureImportance, NodeImpact,
};
use nnasp_core::dataset::{gen_modified_xor, gen_xor, load_csv, save_csv, xor_truth_table, Dataset};
use nnasp_core::extraction::{extract, ExtractionConfig};
use nnasp_core::network::{train, Activation, Mlp, Optimizer, TrainConfig};
use nnasp_core::program::{emit_text, Program};
use nnasp_core::tree::TreeParams;
use nnasp_core::Error;
use serde::Serialize;

use config::{DataKind, DataSource, RunConfig};

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: 3,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 5,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => 3,
            Error::Divergence { .. } => 4,
            _ => 5,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "nnasp", version, about = "Extract answer-set programs from trained neural networks")]
struct Cli {
    /// Log more to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Train a network and save it as JSON.
    Train(TrainArgs),
    /// Extract a program (`.lp` plus a JSON copy) from a model and its training data.
    Extract(ExtractArgs),
    /// Per-instance predictions of a program or a model.
    Predict(PredictArgs),
    /// Accuracy, feature importance and hidden-node impact of a program.
    Analyze(AnalyzeArgs),
    /// Cross-validated experiment described by a config file.
    RunExperiment(ExperimentArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// xor, modified-xor or xor-table (the four XOR rows, repeated n times).
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Hidden layer widths, e.g. `4,2`.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    output_activation: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_model: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Program text; a JSON copy is written next to it with a `.json` extension.
    #[arg(long)]
    out_program: Option<PathBuf>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    scale_digits: Option<u32>,
}

#[derive(Args)]
struct PredictArgs {
    /// Program JSON (or its `.lp`, whose JSON copy is then used).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    program: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Predictions CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also score this model, for fidelity.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out_report: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    #[arg(long)]
    out_report: Option<PathBuf>,
    /// Directory for flat CSV exports.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::RunExperiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T, Failure> {
    flag.or(config)
        .ok_or_else(|| Failure::usage(format!("missing --{name} (flag or config)")))
}

fn parse_activation(name: &str) -> Result<Activation, Failure> {
    Ok(name.parse::<Activation>()?)
}

fn parse_optimizer(name: &str) -> Result<Optimizer, Failure> {
    match name {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        other => Err(Failure::validation(format!("unknown optimizer `{other}`; valid names are: sgd, adam"))),
    }
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn print_json(value: &impl Serialize) -> CmdResult {
    println!(
        "{}",
        serde_json::to_string_pretty(value).map_err(|e| Failure::validation(e.to_string()))?
    );
    Ok(())
}

fn generate(kind: &DataKind, n: usize, d: usize, seed: Option<u64>) -> Result<Dataset, Failure> {
    let seeded = || seed.ok_or_else(|| Failure::usage("missing --seed for a random dataset"));
    Ok(match kind {
        DataKind::Xor => gen_xor(n, d, seeded()?)?,
        DataKind::ModifiedXor => gen_modified_xor(n, d, seeded()?)?,
        DataKind::XorTable => xor_truth_table(n),
    })
}

fn load_data(flag: Option<PathBuf>, config: Option<DataSource>) -> Result<Dataset, Failure> {
    match flag.map(DataSource::Path).or(config) {
        Some(DataSource::Path(p)) => Ok(load_csv(p)?),
        Some(DataSource::Generate { kind, n, d, seed }) => generate(&kind, n.unwrap_or(1000), d.unwrap_or(10), seed),
        None => Err(Failure::usage("missing --data (flag or config)")),
    }
}

fn gen_data(args: GenDataArgs) -> CmdResult {
    let kind: DataKind = serde_json::from_value(serde_json::Value::String(args.kind.clone())).map_err(|_| {
        Failure::usage(format!(
            "unknown dataset kind `{}`; valid kinds are: xor, modified-xor, xor-table",
            args.kind
        ))
    })?;
    let ds = generate(&kind, args.n, args.d, args.seed)?;
    save_csv(&ds, &args.out)?;
    log::info!("wrote {} instances to {}", ds.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    train_accuracy: f64,
    final_loss: Option<f64>,
    epochs: usize,
    model: PathBuf,
}

fn train_cmd(args: TrainArgs) -> CmdResult {
    let cfg = RunConfig::load_opt(args.config.as_deref())?;
    let data = load_data(args.data, cfg.dataset)?;
    let hidden = required(args.hidden, cfg.hidden, "hidden")?;
    let activation = match args.activation {
        Some(a) => parse_activation(&a)?,
        None => cfg.activation.unwrap_or(Activation::Tanh),
    };
    let output_activation = match args.output_activation {
        Some(a) => parse_activation(&a)?,
        None => cfg.output_activation.unwrap_or(Activation::Sigmoid),
    };
    let optimizer = match args.optimizer {
        Some(o) => parse_optimizer(&o)?,
        None => cfg.optimizer.unwrap_or(Optimizer::Sgd),
    };
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        epochs: args.epochs.or(cfg.epochs).unwrap_or(defaults.epochs),
        batch_size: args.batch_size.or(cfg.batch_size).unwrap_or(defaults.batch_size),
        learning_rate: args.learning_rate.or(cfg.learning_rate).unwrap_or(defaults.learning_rate),
        seed: required(args.seed, cfg.seed, "seed")?,
        optimizer,
    };
    let out = required(args.out_model, cfg.model, "out-model")?;
    let out_width = if data.class_count() <= 2 { 1 } else { data.class_count() };
    let arch: Vec<(usize, Activation)> = hidden
        .iter()
        .map(|&w| (w, activation))
        .chain([(out_width, output_activation)])
        .collect();
    let init = Mlp::init(&arch, data.feature_count(), config.seed)?;
    let trained = train(&init, &data, &config)?;
    trained.model.save(&out)?;
    print_json(&TrainSummary {
        train_accuracy: trained.model.accuracy(&data)?,
        final_loss: trained.loss_history.last().copied(),
        epochs: config.epochs,
        model: out,
    })
}

fn json_sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn extract_cmd(args: ExtractArgs) -> CmdResult {
    let cfg = RunConfig::load_opt(args.config.as_deref())?;
    let model_path = required(args.model, cfg.model, "model")?;
    let model = Mlp::load(&model_path)?;
    let data = load_data(args.data, cfg.dataset)?;
    let out = required(args.out_program, cfg.program, "out-program")?;
    let sidecar = json_sidecar(&out);
    if sidecar == out || sidecar == model_path {
        return Err(Failure::usage(format!(
            "program JSON copy {} would overwrite an input; choose another --out-program",
            sidecar.display()
        )));
    }
    let defaults = ExtractionConfig::default();
    let config = ExtractionConfig {
        tree: TreeParams {
            min_leaf: args.min_leaf.or(cfg.min_leaf).unwrap_or(defaults.tree.min_leaf),
            max_depth: args.max_depth.or(cfg.max_depth).unwrap_or(defaults.tree.max_depth),
        },
        scale_digits: args.scale_digits.or(cfg.scale_digits).unwrap_or(defaults.scale_digits),
    };
    let extraction = extract(&model, &data, &config)?;
    write_file(&out, &emit_text(&extraction.program))?;
    write_file(&sidecar, &extraction.program.to_json()?)?;
    log::info!("{} rules written to {}", extraction.program.len(), out.display());
    print_json(&extraction.stats)
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let json = if path.extension().is_some_and(|e| e == "json") {
        path.to_path_buf()
    } else {
        json_sidecar(path)
    };
    let text = fs::read_to_string(&json).map_err(|e| Failure::io(&json, e))?;
    Ok(Program::from_json(&text)?)
}

fn predict_cmd(args: PredictArgs) -> CmdResult {
    let data = load_csv(&args.data)?;
    let mut out = String::new();
    if let Some(path) = &args.program {
        let program = load_program(path)?;
        let score = score_program(&program, &data)?;
        out.push_str("index,label,prediction,abstained\n");
        for (i, (p, inst)) in score.predictions.iter().zip(data.instances()).enumerate() {
            out.push_str(&format!("{i},{},{},{}\n", inst.label, p.class, p.abstained));
        }
    } else {
        let model = Mlp::load(args.model.as_ref().expect("clap requires one source"))?;
        out.push_str("index,label,prediction\n");
        for (i, inst) in data.instances().iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", inst.label, model.predict(&inst.features)?));
        }
    }
    match &args.out {
        Some(path) => write_file(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AnalysisReport {
    instances: usize,
    rules: usize,
    program_accuracy: f64,
    abstention_rate: f64,
    model_accuracy: Option<f64>,
    fidelity: Option<f64>,
    feature_importance: FeatureImportance,
    node_impact: NodeImpact,
}

fn analyze_cmd(args: AnalyzeArgs) -> CmdResult {
    let program = load_program(&args.program)?;
    let data = load_csv(&args.data)?;
    let score = score_program(&program, &data)?;
    let model_accuracy = match &args.model {
        Some(p) => Some(Mlp::load(p)?.accuracy(&data)?),
        None => None,
    };
    let report = AnalysisReport {
        instances: data.len(),
        rules: program.len(),
        program_accuracy: score.accuracy,
        abstention_rate: score.abstention_rate,
        model_accuracy,
        fidelity: model_accuracy.and_then(|m| fidelity(m, score.accuracy).ok()),
        feature_importance: feature_importance(&program),
        node_impact: hidden_node_impact(&program),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::validation(e.to_string()))?;
    match &args.out_report {
        Some(path) => write_file(path, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DesignSummary<'a> {
    design: &'a str,
    model_accuracy: f64,
    program_accuracy: f64,
    fidelity: f64,
}

fn experiment_cmd(args: ExperimentArgs) -> CmdResult {
    let cfg = RunConfig::load(&args.config)?;
    let seed = args
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Failure::validation("experiment configs must set `seed`"))?;
    let designs = cfg
        .designs
        .ok_or_else(|| Failure::validation("experiment configs must list `designs`"))?;
    let data = load_data(None, cfg.dataset)?;
    let defaults = ExtractionConfig::default();
    let config = ExperimentConfig {
        designs,
        extraction: ExtractionConfig {
            tree: TreeParams {
                min_leaf: cfg.min_leaf.unwrap_or(defaults.tree.min_leaf),
                max_depth: cfg.max_depth.unwrap_or(defaults.tree.max_depth),
            },
            scale_digits: cfg.scale_digits.unwrap_or(defaults.scale_digits),
        },
        folds: args.folds.or(cfg.folds).unwrap_or(5),
        seed,
    };
    let report = run_cv_experiment(&data, &config)?;
    let out = args.out_report.or(cfg.report);
    match &out {
        Some(path) => write_file(path, &(report.to_json()? + "\n"))?,
        None => println!("{}", report.to_json()?),
    }
    if let Some(dir) = args.csv_dir.or(cfg.csv_dir) {
        fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
        type Export = fn(&nnasp_core::analysis::ExperimentReport, fs::File) -> nnasp_core::Result<()>;
        let exports: [(&str, Export); 3] = [
            ("folds.csv", |r, f| write_folds_csv(r, f)),
            ("importance.csv", |r, f| write_importance_csv(r, f)),
            ("impact.csv", |r, f| write_impact_csv(r, f)),
        ];
        for (name, export) in exports {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
            export(&report, file)?;
        }
    }
    if out.is_some() {
        let summary: Vec<DesignSummary> = report
            .designs
            .iter()
            .map(|d| DesignSummary {
                design: &d.design.name,
                model_accuracy: d.accuracy.model_accuracy,
                program_accuracy: d.accuracy.program_accuracy,
                fidelity: d.accuracy.fidelity,
            })
            .collect();
        print_json(&summary)?;
    }
    Ok(())
}
