//! Command-line entry point. stdout carries only machine-readable
//! results; progress and diagnostics go to stderr. Exit codes: 0 success,
//! 2 usage, 3 data, 4 model file, 1 internal.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ddigraph::data::{load_pairs, sample_negatives};
use ddigraph::error::Error;
use ddigraph::explain::{explain_pair, OutputFormat};
use ddigraph::featurize::{atom_feature_names, featurize, ATOM_FEATURES, DEFAULT_MAX_NODES};
use ddigraph::metrics::compute_metrics;
use ddigraph::model::{load, predict_pair, save, Hyperparams, ModelParams};
use ddigraph::smiles::parse_smiles;
use ddigraph::train::{
    encode_dataset, score_pairs, train, write_history, EncodedPair, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "ddigraph",
    version,
    about = "Predicts drug-drug interactions from SMILES pairs"
)]
struct Cli {
    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a labeled pair CSV and write it to disk.
    Train(TrainArgs),
    /// Score a labeled pair CSV with a trained model and print metrics.
    Eval(EvalArgs),
    /// Print the interaction probability for one SMILES pair.
    Predict(PredictArgs),
    /// Render attention-highlighted drawings for one SMILES pair.
    Explain(ExplainArgs),
    /// Print one molecule's feature matrix as CSV.
    Featurize(FeaturizeArgs),
    /// Balance a positive-pair CSV with sampled negatives.
    SampleNegatives(SampleNegativesArgs),
}

#[derive(Args)]
struct ArchArgs {
    /// Graph convolution layers.
    #[arg(long, default_value_t = 4)]
    gcn_layers: usize,
    /// Units per graph convolution layer.
    #[arg(long, default_value_t = 50)]
    gcn_units: usize,
    /// Hidden layers in the classification head.
    #[arg(long, default_value_t = 3)]
    fc_layers: usize,
    /// Units per head layer.
    #[arg(long, default_value_t = 100)]
    fc_units: usize,
    /// Padding budget: the largest molecule the model accepts.
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
    /// One convolution matrix per layer instead of one per degree.
    #[arg(long)]
    shared_degree_weights: bool,
    /// One alignment projection shared across layers.
    #[arg(long)]
    share_attention_w: bool,
}

impl ArchArgs {
    fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            gcn_layers: self.gcn_layers,
            gcn_units: self.gcn_units,
            fc_layers: self.fc_layers,
            fc_units: self.fc_units,
            max_nodes: self.max_nodes,
            shared_degree_weights: self.shared_degree_weights,
            share_attention_w: self.share_attention_w,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled pair CSV: smiles_a,smiles_b,label.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    /// Where to write per-epoch history CSV (default: <out>.history.csv).
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Optimizer steps per epoch.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Examples per optimizer step.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Hold out this fraction for per-epoch validation metrics.
    #[arg(long)]
    val_split: Option<f64>,
    #[command(flatten)]
    arch: ArchArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Labeled pair CSV: smiles_a,smiles_b,label.
    #[arg(long)]
    data: PathBuf,
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Decision threshold for F1.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Average each pair's score over both orientations.
    #[arg(long)]
    symmetrize: bool,
    /// Read scores from a file (one per row) instead of running the
    /// model; for testing the metric path in isolation.
    #[arg(long, hide = true)]
    scores_file: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    smiles_a: String,
    #[arg(long)]
    smiles_b: String,
    /// Average the probability over both pair orientations.
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Args)]
struct ExplainArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    smiles_a: String,
    #[arg(long)]
    smiles_b: String,
    /// Directory receiving drug_a.<fmt>, drug_b.<fmt>, explanation.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Drawing format: svg or dot.
    #[arg(long, default_value = "svg", value_parser = OutputFormat::from_str)]
    format: OutputFormat,
    /// Layout seed (drawing only; the numbers do not depend on it).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    smiles: String,
    /// Rows in the emitted matrix; trailing rows are padding.
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    max_nodes: usize,
}

#[derive(Args)]
struct SampleNegativesArgs {
    /// CSV of known interacting pairs.
    #[arg(long)]
    positives: PathBuf,
    /// Text file with one candidate SMILES per line.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

/// Seed precedence: --seed, then DDIGRAPH_SEED, then 42.
fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("DDIGRAPH_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("DDIGRAPH_SEED must be an unsigned integer, got {raw:?}")),
        Err(_) => Ok(42),
    }
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Parse(_) | Error::Feature(_) | Error::Data(_) => (3, "data"),
        Error::Model(_) => (4, "model"),
        Error::Config(_) => (2, "usage"),
        Error::Tensor(_) | Error::Explain(_) => (1, "internal"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error[internal]: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error[usage]: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            let (code, category) = classify(&e);
            eprintln!("error[{category}]: {e}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Explain(args) => cmd_explain(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::SampleNegatives(args) => cmd_sample_negatives(args),
    }
}

fn load_model(path: &Path) -> Result<ModelParams<f64>, Failure> {
    Ok(load::<f64>(path).map_err(Error::from)?)
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let seed = resolve_seed(args.seed).map_err(Failure::Usage)?;
    let dataset = load_pairs(&args.data).map_err(Error::from)?;
    let config = TrainConfig {
        hp: args.arch.hyperparams(),
        lr: args.lr,
        epochs: args.epochs,
        steps_per_epoch: args.steps,
        batch_size: args.batch,
        seed,
        val_fraction: args.val_split,
    };
    eprintln!(
        "training on {} pairs ({} epochs x {} steps, batch {}, seed {seed})",
        dataset.len(),
        config.epochs,
        config.steps_per_epoch,
        config.batch_size
    );
    let outcome = train::<f64>(&dataset, &config, |record| match &record.val {
        Some(m) => eprintln!(
            "epoch {:>4}  loss {:.6}  val roc_auc {:.4} f1 {:.4} aupr {:.4}",
            record.epoch, record.mean_loss, m.roc_auc, m.f1, m.aupr
        ),
        None => eprintln!("epoch {:>4}  loss {:.6}", record.epoch, record.mean_loss),
    })?;
    save(&outcome.params, &args.out).map_err(Error::from)?;
    let history_path = args
        .history
        .unwrap_or_else(|| append_extension(&args.out, "history.csv"));
    write_history(&history_path, &outcome.history).map_err(Error::from)?;
    eprintln!(
        "wrote {} and {}",
        args.out.display(),
        history_path.display()
    );
    Ok(())
}

fn append_extension(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let dataset = load_pairs(&args.data).map_err(Error::from)?;
    let (scores, labels) = match &args.scores_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::from(ddigraph::error::DataError::from(e)))?;
            let scores = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    Error::from(ddigraph::error::DataError::MalformedRow {
                        row: 0,
                        reason: format!("scores file: {e}"),
                    })
                })?;
            if scores.len() != dataset.len() {
                return Err(Error::from(ddigraph::error::DataError::LengthMismatch {
                    scores: scores.len(),
                    labels: dataset.len(),
                })
                .into());
            }
            (scores, dataset.labels())
        }
        None => {
            let params = load_model(&args.model)?;
            let encoded =
                encode_dataset::<f64>(&dataset, params.hp.max_nodes).map_err(Error::from)?;
            let (mut scores, labels) = score_pairs(&params, &encoded).map_err(Error::from)?;
            if args.symmetrize {
                let swapped: Vec<EncodedPair<f64>> = encoded
                    .iter()
                    .map(|p| EncodedPair {
                        a: p.b.clone(),
                        b: p.a.clone(),
                        label: p.label,
                    })
                    .collect();
                let (reversed, _) = score_pairs(&params, &swapped).map_err(Error::from)?;
                for (s, r) in scores.iter_mut().zip(reversed) {
                    *s = 0.5 * (*s + r);
                }
            }
            (scores, labels)
        }
    };
    let metrics = compute_metrics(&scores, &labels, args.threshold).map_err(Error::from)?;
    println!(
        "roc_auc={:.6} f1={:.6} aupr={:.6}",
        metrics.roc_auc, metrics.f1, metrics.aupr
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let params = load_model(&args.model)?;
    let prediction = predict_pair(&params, &args.smiles_a, &args.smiles_b, args.symmetrize)?;
    println!("{:.6}", prediction.probability);
    Ok(())
}

fn cmd_explain(args: ExplainArgs) -> Result<(), Failure> {
    let seed = resolve_seed(args.seed).map_err(Failure::Usage)?;
    let params = load_model(&args.model)?;
    let artifacts = explain_pair(&params, &args.smiles_a, &args.smiles_b, args.format, seed)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::from(ddigraph::error::DataError::from(e)))?;
    let ext = match args.format {
        OutputFormat::Svg => "svg",
        OutputFormat::Dot => "dot",
    };
    let targets = [
        (format!("drug_a.{ext}"), &artifacts.documents[0]),
        (format!("drug_b.{ext}"), &artifacts.documents[1]),
        ("explanation.json".to_string(), &artifacts.sidecar),
    ];
    for (name, content) in targets {
        let path = args.out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Error::from(ddigraph::error::DataError::from(e)))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<(), Failure> {
    let graph = parse_smiles(&args.smiles).map_err(Error::from)?;
    let drug = featurize::<f64>(&graph, args.max_nodes).map_err(Error::from)?;
    let mut out = String::new();
    out.push_str(&atom_feature_names().join(","));
    out.push('\n');
    for row in 0..drug.max_nodes {
        let mut cells = Vec::with_capacity(ATOM_FEATURES);
        for col in 0..ATOM_FEATURES {
            cells.push(format!("{}", drug.node_features.at2(row, col)));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn cmd_sample_negatives(args: SampleNegativesArgs) -> Result<(), Failure> {
    let seed = resolve_seed(args.seed).map_err(Failure::Usage)?;
    let positives = load_pairs(&args.positives).map_err(Error::from)?;
    let pool_text = std::fs::read_to_string(&args.pool).map_err(|e| {
        Error::from(ddigraph::error::DataError::FileNotFound {
            path: format!("{} ({e})", args.pool.display()),
        })
    })?;
    let pool: Vec<String> = pool_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let n_positive = positives.pairs.iter().filter(|p| p.label == 1).count();
    let negatives =
        sample_negatives(&pool, &positives.pairs, n_positive, seed).map_err(Error::from)?;
    let mut out = String::from("smiles_a,smiles_b,label\n");
    for p in positives
        .pairs
        .iter()
        .filter(|p| p.label == 1)
        .chain(&negatives)
    {
        out.push_str(&format!("{},{},{}\n", p.smiles_a, p.smiles_b, p.label));
    }
    print!("{out}");
    Ok(())
}
