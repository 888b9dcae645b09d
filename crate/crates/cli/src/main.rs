use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fragmgan::amputer::{self, AmputationConfig, Mechanism};
use fragmgan::data::{load_csv, save_dataset, write_csv, DataError, LabelKind, MaskedDataset};
use fragmgan::engine::{self, DiscriminatorMode, EngineError, TrainedFragmgan};
use fragmgan::harness::{
    self, cross_validate_gamma, CvReport, GammaPolicy, GammaSetting, HarnessError, ResultTable,
    RunConfig,
};
use fragmgan_theory::{run_suite, SuiteConfig, TheoryError, TheoryFile};

#[derive(Parser, Debug)]
#[command(name = "fragmgan", version)]
#[command(about = "Adversarial imputation and prediction for block-wise missing tabular data")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove whole groups from complete data.
    Ampute(Common),
    /// Train one model and save its checkpoint and loss traces.
    Train(Common),
    /// Fill the missing cells of a dataset with a trained model.
    Impute(Inference),
    /// Predict labels with a trained model.
    Predict(Inference),
    /// Repeated train/test experiment; writes results.csv and summary.json.
    Evaluate(Common),
    /// Choose the adjusting factor by stratified cross-validation.
    CvGamma(Common),
    /// One experiment per miss rate.
    Sweep(Common),
    /// Exact identifiability checks on finite distributions.
    VerifyTheory(Theory),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MechanismArg {
    Mcar,
    Mar,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiscriminatorArg {
    Pattern,
    Gain,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelTypeArg {
    Binary,
    Continuous,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run description; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV input; empty cells are missing.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// A number in [0, 1] or `cv`.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, value_enum)]
    mechanism: Option<MechanismArg>,
    #[arg(long)]
    rate: Option<f64>,
    /// Group kept observed by amputation; defaults to the first group.
    #[arg(long)]
    observed_group: Option<String>,
    /// Comma-separated miss rates for `sweep`.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    discriminator: Option<DiscriminatorArg>,
    #[arg(long)]
    no_hint: bool,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Label column name.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_enum)]
    label_type: Option<LabelTypeArg>,
}

#[derive(Args, Debug)]
struct Inference {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// TOML run description; only its `[data]` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_enum)]
    label_type: Option<LabelTypeArg>,
}

#[derive(Args, Debug)]
struct Theory {
    /// TOML with an optional `[suite]` section and instances to check.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Writes the check lines as JSON into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Theory(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Theory(_) => 4,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            e if e.is_divergence() => CliError::Divergence(e.to_string()),
            EngineError::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_divergence() {
            return CliError::Divergence(e.to_string());
        }
        match e.root() {
            HarnessError::Config(_) => CliError::Usage(e.to_string()),
            HarnessError::Engine(EngineError::Config(_)) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<amputer::AmputeError> for CliError {
    fn from(e: amputer::AmputeError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn label_kind(arg: LabelTypeArg) -> LabelKind {
    match arg {
        LabelTypeArg::Binary => LabelKind::Binary,
        LabelTypeArg::Continuous => LabelKind::Continuous,
    }
}

/// The config file with every flag applied on top.
fn resolve(args: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.data {
        cfg.experiment.data = Some(path.clone());
    }
    if let Some(out) = &args.out {
        cfg.experiment.out = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.model.seed = seed;
        cfg.experiment.seed = seed;
        if let Some(a) = cfg.amputation.as_mut() {
            a.seed = seed;
        }
    }
    if let Some(text) = &args.gamma {
        let setting = GammaSetting::parse(text)?;
        if let GammaSetting::Fixed(g) = setting {
            cfg.model.gamma = g;
        }
        cfg.experiment.gamma = Some(setting);
    }
    if args.mechanism.is_some() || args.rate.is_some() || args.observed_group.is_some() {
        let a = cfg.amputation.get_or_insert_with(|| AmputationConfig {
            mechanism: Mechanism::Mcar,
            observed_group: String::new(),
            rate: 0.2,
            seed: args.seed.unwrap_or(0),
            mar_weights: Default::default(),
        });
        if let Some(m) = args.mechanism {
            a.mechanism = match m {
                MechanismArg::Mcar => Mechanism::Mcar,
                MechanismArg::Mar => Mechanism::Mar,
            };
        }
        if let Some(rate) = args.rate {
            a.rate = rate;
        }
        if let Some(group) = &args.observed_group {
            a.observed_group = group.clone();
        }
    }
    if let Some(rates) = &args.rates {
        cfg.experiment.rates = rates.clone();
    }
    if let Some(jobs) = args.jobs {
        cfg.experiment.jobs = jobs;
    }
    if let Some(d) = args.discriminator {
        cfg.model.discriminator = match d {
            DiscriminatorArg::Pattern => DiscriminatorMode::Pattern,
            DiscriminatorArg::Gain => DiscriminatorMode::GainCoordinatewise,
        };
    }
    if args.no_hint {
        cfg.model.hint = false;
    }
    if let Some(n) = args.iterations {
        cfg.model.iterations = n;
    }
    if let Some(n) = args.repetitions {
        cfg.experiment.repetitions = n;
    }
    if let Some(label) = &args.label {
        cfg.data.label = Some(label.clone());
    }
    if let Some(kind) = args.label_type {
        cfg.data.label_type = label_kind(kind);
    }
    Ok(cfg)
}

fn load_data(cfg: &mut RunConfig) -> Result<MaskedDataset, CliError> {
    let path =
        cfg.experiment.data.clone().ok_or_else(|| {
            CliError::Usage("no input: pass --data or set experiment.data".into())
        })?;
    let ds = load_csv(&path, &cfg.data)?;
    if let Some(a) = cfg.amputation.as_mut() {
        if a.observed_group.is_empty() {
            a.observed_group = ds.columns().groups.names()[0].clone();
        }
    }
    Ok(ds)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.experiment.out.clone().ok_or_else(|| {
        CliError::Usage("no output directory: pass --out or set experiment.out".into())
    })?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn print_table(table: &ResultTable) {
    println!("{:<28} {:>12} {:>12}", "metric", "mean", "std");
    for m in &table.metrics {
        println!("{:<28} {:>12.6} {:>12.6}", m.metric, m.mean, m.std);
    }
    if !table.std_defined {
        println!("(single repetition: std undefined, reported as 0)");
    }
}

fn ampute(args: &Common) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    if cfg.amputation.is_none() {
        return Err(CliError::Usage(
            "nothing to do: pass --mechanism/--rate or an [amputation] section".into(),
        ));
    }
    let complete = load_data(&mut cfg)?;
    let plan = cfg
        .amputation
        .as_ref()
        .expect("checked")
        .resolve(complete.columns())?;
    let amputed = amputer::ampute_with(&complete, &plan)?;
    let dir = out_dir(&cfg)?;
    let path = dir.join("amputed.csv");
    save_dataset(&path, &amputed)?;
    println!(
        "wrote {} ({} rows, {} patterns, miss rate {:.4})",
        path.display(),
        amputed.n(),
        amputed.k(),
        amputed.miss_rate()
    );
    Ok(())
}

/// Cross-validates gamma on `ds`, amputing it first when an amputation plan
/// is configured so the imputation criterion has a truth to score against.
fn run_cv(cfg: &RunConfig, complete: &MaskedDataset) -> Result<CvReport, CliError> {
    let (ds, truth) = match &cfg.amputation {
        Some(a) => {
            let plan = a.resolve(complete.columns())?;
            (amputer::ampute_with(complete, &plan)?, Some(complete))
        }
        None => (complete.clone(), None),
    };
    Ok(cross_validate_gamma(
        &ds,
        truth,
        &cfg.model,
        &cfg.experiment.cv,
        cfg.experiment.seed,
    )?)
}

fn train(args: &Common) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let ds = load_data(&mut cfg)?;
    let dir = out_dir(&cfg)?;
    if cfg.experiment.gamma == Some(GammaSetting::CV) {
        let report = cross_validate_gamma(
            &ds,
            None,
            &cfg.model,
            &cfg.experiment.cv,
            cfg.experiment.seed,
        )?;
        println!("cross-validated gamma = {}", report.gamma);
        write_json(&dir.join("cv.json"), &report)?;
        cfg.model.gamma = report.gamma;
    }
    let model = engine::train(&ds, &cfg.model)?;
    model.save(&dir.join("model.json"))?;
    model.write_trace_csv(fs::File::create(dir.join("loss_traces.csv"))?)?;
    println!(
        "trained for {} iterations; wrote {}",
        model.iterations_run(),
        dir.join("model.json").display()
    );
    Ok(())
}

fn inference_data(args: &Inference) -> Result<(TrainedFragmgan, MaskedDataset), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(label) = &args.label {
        cfg.data.label = Some(label.clone());
    }
    if let Some(kind) = args.label_type {
        cfg.data.label_type = label_kind(kind);
    }
    let model = TrainedFragmgan::load(&args.model)?;
    let ds = load_csv(&args.data, &cfg.data)?;
    if ds.columns().feature_names != model.feature_names {
        return Err(CliError::Data(format!(
            "data columns {:?} differ from the model's {:?}",
            ds.columns().feature_names,
            model.feature_names
        )));
    }
    fs::create_dir_all(&args.out)?;
    Ok((model, ds))
}

fn impute(args: &Inference) -> Result<(), CliError> {
    let (model, ds) = inference_data(args)?;
    let filled = model.impute(&ds, args.seed)?;
    let path = args.out.join("imputed.csv");
    let label = match (&ds.columns().label_name, ds.labels()) {
        (Some(name), Some(y)) => Some((name.as_str(), y)),
        _ => None,
    };
    write_csv(
        fs::File::create(&path)?,
        &ds.columns().feature_names,
        &filled,
        label,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn predict(args: &Inference) -> Result<(), CliError> {
    let (model, ds) = inference_data(args)?;
    let predictions = model.predict(&ds, args.seed)?;
    let path = args.out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Data(e.to_string()))?;
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["row", "prediction"]).map_err(csv_err)?;
    for (i, p) in predictions.iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    if let Some(y) = ds.labels() {
        let score = match model.label_kind {
            Some(LabelKind::Binary) => ("auc", harness::auc(&predictions, y)?),
            _ => ("rmse_label", harness::rmse(y, &predictions)?),
        };
        println!("{} = {:.6}", score.0, score.1);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn evaluate(args: &Common) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let ds = load_data(&mut cfg)?;
    let dir = out_dir(&cfg)?;
    let spec = cfg.experiment_spec(ds.columns())?;
    let table = match harness::run_experiment(&ds, &spec, Some(&dir)) {
        Ok(table) => table,
        Err(e) => {
            if let HarnessError::Aborted { partial, .. } = &e {
                eprintln!(
                    "{} repetitions finished before the failure:",
                    partial.repetitions
                );
                print_table(partial);
            }
            return Err(e.into());
        }
    };
    print_table(&table);
    if matches!(spec.gamma, GammaPolicy::CrossValidate(_)) {
        println!("gammas chosen: {:?}", table.gammas());
    }
    println!("wrote {}", dir.join("results.csv").display());
    Ok(())
}

fn cv_gamma(args: &Common) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let ds = load_data(&mut cfg)?;
    let dir = out_dir(&cfg)?;
    let report = run_cv(&cfg, &ds)?;
    println!("{:<8} {:>12}", "gamma", report.score);
    for s in &report.scores {
        println!("{:<8} {:>12.6}", s.gamma, s.mean);
    }
    println!("chosen gamma = {}", report.gamma);
    write_json(&dir.join("cv.json"), &report)?;
    Ok(())
}

fn sweep(args: &Common) -> Result<(), CliError> {
    let mut cfg = resolve(args)?;
    let ds = load_data(&mut cfg)?;
    let dir = out_dir(&cfg)?;
    let spec = cfg.experiment_spec(ds.columns())?;
    let rows = harness::run_sweep(&ds, &spec, &cfg.experiment.rates, Some(&dir))?;
    for row in &rows {
        let line: Vec<String> = row
            .table
            .metrics
            .iter()
            .map(|m| format!("{} {:.6} ± {:.6}", m.metric, m.mean, m.std))
            .collect();
        println!("rate {:<6} {}", row.rate, line.join(", "));
    }
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(())
}

fn verify_theory(args: &Theory) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => Some(TheoryFile::from_toml(&fs::read_to_string(path)?)?),
        None => None,
    };
    let mut suite = file
        .as_ref()
        .and_then(|f| f.suite.clone())
        .unwrap_or_else(SuiteConfig::default);
    if let Some(seed) = args.seed {
        suite.seed = seed;
    }
    let lines = run_suite(&suite, file.as_ref())?;
    for line in &lines {
        println!(
            "{} {}: {}",
            if line.passed { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("theory.json"), &lines)?;
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(CliError::Theory(format!(
            "{failed} of {} checks failed",
            lines.len()
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ampute(a) => ampute(a),
        Command::Train(a) => train(a),
        Command::Impute(a) => impute(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::CvGamma(a) => cv_gamma(a),
        Command::Sweep(a) => sweep(a),
        Command::VerifyTheory(a) => verify_theory(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let diverged = EngineError::Divergence {
            iteration: 3,
            phase: "generator",
            detail: "nan".into(),
        };
        assert_eq!(CliError::from(diverged.clone()).exit_code(), 3);
        assert_eq!(
            CliError::from(HarnessError::Engine(diverged)).exit_code(),
            3
        );
        assert_eq!(
            CliError::from(EngineError::Config("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::from(HarnessError::Config("x".into())).exit_code(),
            1
        );
        assert_eq!(CliError::from(EngineError::EmptyPatterns).exit_code(), 2);
        assert_eq!(
            CliError::from(TheoryError::Precondition("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::Theory("1 of 8 checks failed".into()).exit_code(),
            4
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
