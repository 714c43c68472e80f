use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mgbdt::cli::{parse_structure, RunConfig};
use mgbdt::data::{
    gen_circles, gen_curve3d, load_csv, load_csv_with_schema, Dataset, LabelKind, Labels,
};
use mgbdt::error::Error;
use mgbdt::eval::{export_representation, mse, run_cv, write_curves};
use mgbdt::persist::{load_model, save_model, SavedModel};
use mgbdt::{EvalSet, MGBDTModel, Mode, Targets, TrainConfig};

#[derive(Parser)]
#[command(name = "mgbdt", version, about = "Multi-layered gradient boosting decision trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a model file
    Train(TrainArgs),
    /// Evaluate a model on a data file, or rerun k-fold cross-validation
    Eval(EvalArgs),
    /// Export a layer's representation of a data file as CSV
    Encode(EncodeArgs),
    /// Generate a synthetic dataset as CSV
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat `key = value` config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training data CSV (comma-delimited, UTF-8, header row)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the label column
    #[arg(long)]
    label: Option<String>,
    /// Column names to force categorical (default: auto-detect)
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Layer widths, e.g. 8->16->16->10
    #[arg(long)]
    structure: Option<String>,
    /// classify, regress or autoencode
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Top pseudo-label step size
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise std injected into inverse-mapping training data
    #[arg(long)]
    noise_std: Option<f64>,
    /// Boosting rounds per epoch for inverse mappings
    #[arg(long)]
    k1: Option<usize>,
    /// Boosting rounds per epoch for forward mappings
    #[arg(long)]
    k2: Option<usize>,
    /// Boosting shrinkage (learning rate)
    #[arg(long)]
    gamma: Option<f64>,
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the model file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Held-out test CSV, evaluated once per epoch
    #[arg(long)]
    test: Option<PathBuf>,
    /// Where to write per-epoch learning curves as CSV
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `mgbdt train`
    #[arg(long)]
    model: PathBuf,
    /// Data CSV to evaluate on
    #[arg(long)]
    data: PathBuf,
    /// Retrain with k-fold cross-validation instead of scoring the model
    #[arg(long)]
    cv: Option<usize>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Model file written by `mgbdt train`
    #[arg(long)]
    model: PathBuf,
    /// Data CSV to encode
    #[arg(long)]
    data: PathBuf,
    /// Layer index (0 = raw input, M = final output)
    #[arg(long)]
    layer: usize,
    /// Where to write the representation CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Which generator to run
    #[arg(long)]
    kind: SynthKind,
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radial noise std (circles only)
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// Where to write the CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Circles,
    Curve3d,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Classify,
    Regress,
    Autoencode,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Classify => Mode::Classify,
            ModeArg::Regress => Mode::Regress,
            ModeArg::Autoencode => Mode::Autoencode,
        }
    }
}

/// Exit code 2 for usage problems, 1 for everything else.
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Bad argument content is a usage problem; anything else is a runtime one.
fn invalid_as_usage(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(msg) => Failure::Usage(msg),
        other => Failure::Run(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("MGBDT_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            if t > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
        }
    }
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let structure = match &args.structure {
        Some(text) => Some(parse_structure(text).map_err(invalid_as_usage)?),
        None => None,
    };
    let flags = RunConfig {
        data: args.data,
        label: args.label,
        categorical: args.categorical,
        structure,
        mode: args.mode.map(Mode::from),
        epochs: args.epochs,
        alpha: args.alpha,
        noise_std: args.noise_std,
        k1: args.k1,
        k2: args.k2,
        gamma: args.gamma,
        seed: args.seed,
        out: args.out,
        test: args.test,
        curves: args.curves,
    };
    let base = match &args.config {
        Some(path) => RunConfig::from_file(path).map_err(invalid_as_usage)?,
        None => RunConfig::default(),
    };
    let rc = flags.merged_over(base);

    let data_path = rc.data.ok_or_else(|| usage("--data is required"))?;
    let dims = rc.structure.ok_or_else(|| usage("--structure is required"))?;
    let mode = rc.mode.ok_or_else(|| usage("--mode is required"))?;
    let out_path = rc.out.ok_or_else(|| usage("--out is required"))?;
    let label_directive = match (mode, &rc.label) {
        (Mode::Classify, Some(l)) => Some((l.as_str(), LabelKind::Classes)),
        (Mode::Regress, Some(l)) => Some((l.as_str(), LabelKind::Numeric)),
        (Mode::Autoencode, l) => l.as_deref().map(|l| (l, LabelKind::Classes)),
        (Mode::Classify | Mode::Regress, None) => {
            return Err(usage(format!("--label is required in {mode} mode")))
        }
    };

    let (dataset, report) = load_csv(&data_path, label_directive, &rc.categorical)?;
    if report.rows_dropped > 0 {
        eprintln!(
            "note: dropped {} row(s) with missing values from {}",
            report.rows_dropped,
            data_path.display()
        );
    }
    check_structure(&dims, &dataset, mode)?;

    let mut config = TrainConfig::for_mode(mode);
    if let Some(v) = rc.epochs {
        config.epochs = v;
    }
    if let Some(v) = rc.alpha {
        config.alpha = v;
    }
    if let Some(v) = rc.noise_std {
        config.noise_std = v;
    }
    if let Some(v) = rc.k1 {
        config.k1 = v;
    }
    if let Some(v) = rc.k2 {
        config.k2 = v;
    }
    if let Some(v) = rc.gamma {
        config.shrinkage = v;
    }
    if let Some(v) = rc.seed {
        config.seed = v;
    }

    let test_data = match &rc.test {
        None => None,
        Some(path) => {
            let (ds, report) = load_csv_with_schema(path, &dataset.schema)?;
            if report.rows_dropped > 0 || report.unseen_category_cells > 0 {
                eprintln!(
                    "note: test file {}: {} row(s) dropped, {} unseen category cell(s)",
                    path.display(),
                    report.rows_dropped,
                    report.unseen_category_cells
                );
            }
            Some(ds)
        }
    };
    let eval_set = test_data.as_ref().map(|ds| EvalSet {
        features: &ds.features,
        targets: train_targets(ds, mode),
    });

    let (model, traces) = MGBDTModel::fit(
        &dims,
        mode,
        &dataset.features,
        train_targets(&dataset, mode),
        &config,
        eval_set,
    )?;
    let saved = SavedModel {
        model,
        schema: Some(dataset.schema.clone()),
        config,
    };
    save_model(&out_path, &saved)?;
    if let Some(curves_path) = &rc.curves {
        write_curves(&traces, curves_path)?;
    }

    for line in metric_lines("train_", &saved.model, &dataset)? {
        println!("{line}");
    }
    if let Some(test_ds) = &test_data {
        for line in metric_lines("test_", &saved.model, test_ds)? {
            println!("{line}");
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let saved = load_model(&args.model)?;
    let schema = saved.schema.as_ref().ok_or_else(|| {
        Failure::Run(Error::SchemaMismatch(
            "model file has no embedded column schema; it was not trained from a CSV".into(),
        ))
    })?;
    let (dataset, _) = load_csv_with_schema(&args.data, schema)?;
    match args.cv {
        None => {
            for line in metric_lines("", &saved.model, &dataset)? {
                println!("{line}");
            }
        }
        Some(k) => {
            if saved.model.mode() != Mode::Classify {
                return Err(Failure::Run(Error::InvalidParameter(
                    "--cv needs a classification model".into(),
                )));
            }
            let report = run_cv(&dataset, saved.model.dims(), &saved.config, k, saved.config.seed)?;
            println!("mean={}", report.mean);
            println!("std={}", report.std);
        }
    }
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), Failure> {
    let saved = load_model(&args.model)?;
    if args.layer > saved.model.num_layers() {
        return Err(usage(format!(
            "--layer {} out of range (model has layers 0..={})",
            args.layer,
            saved.model.num_layers()
        )));
    }
    let schema = saved.schema.as_ref().ok_or_else(|| {
        Failure::Run(Error::SchemaMismatch(
            "model file has no embedded column schema; it was not trained from a CSV".into(),
        ))
    })?;
    let (dataset, _) = load_csv_with_schema(&args.data, schema)?;
    export_representation(&saved.model, &dataset, args.layer, &args.out)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let dataset = match args.kind {
        SynthKind::Circles => gen_circles(args.n, args.noise_std, args.seed)?,
        SynthKind::Curve3d => gen_curve3d(args.n, args.seed)?,
    };
    write_dataset_csv(&dataset, &args.out)
}

/// Targets for training in the given mode (autoencoders ignore labels).
fn train_targets(dataset: &Dataset, mode: Mode) -> Targets<'_> {
    match mode {
        Mode::Autoencode => Targets::None,
        Mode::Classify | Mode::Regress => dataset.targets(),
    }
}

fn check_structure(dims: &[usize], dataset: &Dataset, mode: Mode) -> Result<(), Failure> {
    let width = dataset.features.cols();
    if dims[0] != width {
        return Err(Failure::Run(Error::DimensionMismatch(format!(
            "structure input width {} does not match the {} encoded feature column(s)",
            dims[0], width
        ))));
    }
    let out_dim = dims[dims.len() - 1];
    match mode {
        Mode::Classify => {
            let classes = dataset.schema.num_classes().unwrap_or(0);
            if out_dim != classes {
                return Err(Failure::Run(Error::DimensionMismatch(format!(
                    "structure output width {out_dim} does not match the {classes} label class(es)"
                ))));
            }
        }
        Mode::Regress => {
            if out_dim != 1 {
                return Err(Failure::Run(Error::DimensionMismatch(format!(
                    "structure output width {out_dim} must be 1 for a single numeric label"
                ))));
            }
        }
        Mode::Autoencode => {}
    }
    Ok(())
}

/// `key=value` metric lines, keyed by mode: loss and accuracy for
/// classification, reconstruction or regression mse otherwise.
fn metric_lines(prefix: &str, model: &MGBDTModel, dataset: &Dataset) -> Result<Vec<String>, Failure> {
    let mut lines = Vec::new();
    match model.mode() {
        Mode::Classify => {
            let labels = dataset.class_labels().ok_or_else(|| {
                Failure::Run(Error::SchemaMismatch("data file has no class labels".into()))
            })?;
            let (loss, acc) = model.evaluate(&dataset.features, Targets::Classes(labels))?;
            lines.push(format!("{prefix}loss={loss}"));
            lines.push(format!("{prefix}accuracy={}", acc.expect("classify mode")));
        }
        Mode::Regress => {
            let targets = match &dataset.labels {
                Labels::Values(v) => v,
                _ => {
                    return Err(Failure::Run(Error::SchemaMismatch(
                        "data file has no numeric label".into(),
                    )))
                }
            };
            let outputs = model.predict_outputs(&dataset.features)?;
            lines.push(format!("{prefix}mse={}", mse(&outputs, targets)?));
        }
        Mode::Autoencode => {
            let outputs = model.predict_outputs(&dataset.features)?;
            lines.push(format!("{prefix}mse={}", mse(&outputs, &dataset.features)?));
        }
    }
    Ok(lines)
}

fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<(), Failure> {
    use std::io::Write;
    let io_err =
        |e: std::io::Error| Failure::Run(Error::Io { path: path.display().to_string(), source: e });
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header: Vec<String> = dataset.schema.columns.iter().map(|c| c.name.clone()).collect();
    if matches!(dataset.labels, Labels::Classes(_)) {
        header.push("label".to_string());
    }
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for r in 0..dataset.rows() {
        let mut cells: Vec<String> =
            dataset.features.row(r).iter().map(|v| format!("{v}")).collect();
        if let Labels::Classes(classes) = &dataset.labels {
            cells.push(classes[r].to_string());
        }
        writeln!(w, "{}", cells.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
