mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand};
use hierfuse::dataset::{split_dataset, synth_generate, validate};
use hierfuse::fusion::check::GradCheckSuite;
use hierfuse::numeric::OptimizerConfig;
use hierfuse::{
    build_plan, evaluate, train, Dataset, Error, FusionOpKind, HeadVariant, HeadWidths, Modality, OptimizerKind,
    PlanConfig, Result, Split, SyntheticSpec, TrainConfig, TrainedModel,
};

use config::{parse_opt, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "hierfuse", version, about = "Hierarchical multimodal fusion product classifier")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "HIERFUSE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known unimodal ceilings.
    Synth(SynthArgs),
    /// Assign stratified train/val/test splits in a dataset manifest.
    Split(SplitArgs),
    /// Check a dataset for consistency; exits 1 on any violation.
    Validate(DatasetArg),
    /// Train a model; writes params.bin, metrics.json and history.json.
    Train(TrainArgs),
    /// Evaluate a trained model on one split.
    Eval(EvalArgs),
    /// Finite-difference check of every plan and head variant; exits 1 on failure.
    Gradcheck(GradcheckArgs),
    /// Print the dimensions inferred for a fusion plan.
    Dims(DimsArgs),
}

#[derive(Debug, Args)]
struct DatasetArg {
    /// Dataset directory or its dataset.toml.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Operator fusing title with description (add, concat, avg).
    #[arg(long)]
    inner: Option<FusionOpKind>,
    /// Operator fusing the two text-encoder branches.
    #[arg(long)]
    outer: Option<FusionOpKind>,
    /// Operator fusing image with text.
    #[arg(long = "final")]
    final_op: Option<FusionOpKind>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_coarse: Option<usize>,
    #[arg(long)]
    n_fine: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    d_text: Option<usize>,
    #[arg(long)]
    d_image_raw: Option<usize>,
    #[arg(long)]
    n_regions: Option<usize>,
    /// Also assign splits with this test fraction.
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    dataset: DatasetArg,
    /// Share of each class held out for testing [default: 0.1].
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    dataset: DatasetArg,
    /// Output directory for the params, metrics and history files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// adam or adamw.
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// basic, with-dropout or with-more-layers.
    #[arg(long)]
    variant: Option<HeadVariant>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    hidden1: Option<usize>,
    #[arg(long)]
    hidden2: Option<usize>,
    /// Modality to zero out (text or image); repeatable.
    #[arg(long, value_delimiter = ',')]
    mask: Option<Vec<Modality>>,
    /// Include the per-class table in the printed report.
    #[arg(long)]
    per_class: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    dataset: DatasetArg,
    /// Params file written by `train`.
    #[arg(long)]
    params: PathBuf,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    split: Split,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    per_class: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DimsArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 768)]
    d_text: usize,
    /// Width of the second text encoder, if different.
    #[arg(long)]
    d_text_second: Option<usize>,
    #[arg(long, default_value_t = 2048)]
    d_image_raw: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn missing(what: &str) -> ! {
    Cli::command()
        .error(ErrorKind::MissingRequiredArgument, format!("{what} is required (flag or config file)"))
        .exit()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Synth(args) => synth_cmd(args, &file),
        Command::Split(args) => split_cmd(args, &file),
        Command::Validate(args) => validate_cmd(args, &file),
        Command::Train(args) => train_cmd(args, &file),
        Command::Eval(args) => eval_cmd(args, &file),
        Command::Gradcheck(args) => gradcheck_cmd(args),
        Command::Dims(args) => dims_cmd(args, &file),
    }
}

fn dataset_path(arg: &DatasetArg, file: &FileConfig) -> PathBuf {
    arg.dataset
        .clone()
        .or_else(|| file.dataset.clone())
        .unwrap_or_else(|| missing("--dataset"))
}

fn plan_ops(args: &PlanArgs, file: &FileConfig) -> Result<[FusionOpKind; 3]> {
    let pick = |flag: Option<FusionOpKind>, value: Option<&String>| -> Result<FusionOpKind> {
        Ok(flag.or(parse_opt(value)?).unwrap_or(FusionOpKind::Average))
    };
    Ok([
        pick(args.inner, file.plan.slot_inner.as_ref())?,
        pick(args.outer, file.plan.slot_outer.as_ref())?,
        pick(args.final_op, file.plan.slot_final.as_ref())?,
    ])
}

fn synth_cmd(args: SynthArgs, file: &FileConfig) -> Result<ExitCode> {
    let out = args.out.clone().or_else(|| file.dataset.clone()).unwrap_or_else(|| missing("--out"));
    let s = &file.synth;
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_coarse: args.n_coarse.or(s.n_coarse).unwrap_or(d.n_coarse),
        n_fine: args.n_fine.or(s.n_fine).unwrap_or(d.n_fine),
        samples_per_class: args.samples_per_class.or(s.samples_per_class).unwrap_or(d.samples_per_class),
        noise_sigma: args.noise_sigma.or(s.noise_sigma).unwrap_or(d.noise_sigma),
        d_text: args.d_text.or(s.d_text).unwrap_or(d.d_text),
        d_image_raw: args.d_image_raw.or(s.d_image_raw).unwrap_or(d.d_image_raw),
        n_regions: args.n_regions.or(s.n_regions).unwrap_or(d.n_regions),
    };
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let mut dataset = synth_generate(&spec, seed)?;
    if let Some(fraction) = args.test_fraction.or(file.split.test_fraction) {
        dataset.manifest = split_dataset(&dataset.manifest, fraction, seed)?;
    }
    let descriptor = dataset.save(&out)?;
    println!(
        "wrote {} samples ({} classes) to {}",
        dataset.len(),
        spec.classes(),
        descriptor.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn split_cmd(args: SplitArgs, file: &FileConfig) -> Result<ExitCode> {
    let path = dataset_path(&args.dataset, file);
    let dataset = Dataset::load(&path)?;
    let fraction = args.test_fraction.or(file.split.test_fraction).unwrap_or(0.1);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let manifest = split_dataset(&dataset.manifest, fraction, seed)?;
    let manifest_path = descriptor_dir(&path).join(&dataset.descriptor.manifest);
    manifest.save(&manifest_path)?;
    let count = |s| manifest.indices(s).len();
    println!(
        "train: {}\nval: {}\ntest: {}",
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(ExitCode::SUCCESS)
}

fn descriptor_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn validate_cmd(args: DatasetArg, file: &FileConfig) -> Result<ExitCode> {
    let path = dataset_path(&args, file);
    let dataset = match Dataset::load(&path) {
        Ok(d) => d,
        Err(e @ (Error::Format { .. } | Error::Index { .. } | Error::Shape { .. })) => {
            println!("invalid: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e),
    };
    let report = validate(&dataset);
    for v in &report.violations {
        println!("violation: {v}");
    }
    if report.is_clean() {
        println!("ok: {} samples, 0 violations", dataset.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} violation(s)", report.violations.len());
        Ok(ExitCode::from(1))
    }
}

fn train_cmd(args: TrainArgs, file: &FileConfig) -> Result<ExitCode> {
    let path = dataset_path(&args.dataset, file);
    let out = args.out.clone().or_else(|| file.output.clone()).unwrap_or_else(|| missing("--out"));
    let dataset = Dataset::load(&path)?;
    let t = &file.train;
    let [inner, outer, fin] = plan_ops(&args.plan, file)?;
    let plan = PlanConfig {
        slot_inner: inner,
        slot_outer: outer,
        slot_final: fin,
        d_text: dataset.descriptor.d_text,
        d_text_second: None,
        d_image_raw: dataset.descriptor.d_image_raw,
    };
    let kind = match args.optimizer {
        Some(k) => k,
        None => parse_opt(t.optimizer.as_ref())?.unwrap_or(OptimizerKind::Adam),
    };
    let mut optimizer = OptimizerConfig::for_kind(kind, args.lr.or(t.lr).unwrap_or(1e-3));
    if let Some(wd) = args.weight_decay.or(t.weight_decay) {
        optimizer.weight_decay = wd;
    }
    let mask = match args.mask {
        Some(m) => m,
        None => t
            .mask
            .iter()
            .flatten()
            .map(|s| s.parse())
            .collect::<Result<Vec<Modality>>>()?,
    };
    let defaults = TrainConfig::new(plan);
    let widths = HeadWidths {
        hidden1: args.hidden1.or(t.hidden1).unwrap_or(defaults.widths.hidden1),
        hidden2: args.hidden2.or(t.hidden2).unwrap_or(defaults.widths.hidden2),
    };
    let variant = match args.variant {
        Some(v) => v,
        None => parse_opt(t.variant.as_ref())?.unwrap_or(defaults.variant),
    };
    let config = TrainConfig {
        epochs: args.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        batch_size: args.batch_size.or(t.batch_size).unwrap_or(defaults.batch_size),
        optimizer,
        seed: args.seed.or(file.seed).unwrap_or(0),
        plan,
        variant,
        widths,
        dropout_p: args.dropout.or(t.dropout).unwrap_or(defaults.dropout_p),
        mask,
    };

    let outcome = train(&config, &dataset)?;
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let params_path = out.join("params.bin");
    let metrics_path = out.join("metrics.json");
    let history_path = out.join("history.json");
    outcome.model.save(&params_path)?;
    outcome.report.save_json(&metrics_path)?;
    fs::write(&history_path, outcome.history_json()?).map_err(|e| Error::Io {
        path: history_path.clone(),
        source: e,
    })?;

    println!("plan: {}", outcome.model.plan.label());
    println!("best_epoch: {}", outcome.best_epoch);
    println!("split: val");
    print!("{}", outcome.report.render_text(args.per_class));
    println!("params: {}", params_path.display());
    println!("metrics: {}", metrics_path.display());
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(args: EvalArgs, file: &FileConfig) -> Result<ExitCode> {
    let path = dataset_path(&args.dataset, file);
    let dataset = Dataset::load(&path)?;
    let model = TrainedModel::load(&args.params)?;
    let report = evaluate(&model, &dataset, args.split)?;
    println!("split: {}", args.split.as_str());
    print!("{}", report.render_text(args.per_class));
    if let Some(out) = &args.out {
        report.save_json(out)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck_cmd(args: GradcheckArgs) -> Result<ExitCode> {
    let suite = GradCheckSuite::default();
    let cases = suite.run(args.seed)?;
    let mut failed = 0;
    for case in &cases {
        if !case.passed {
            failed += 1;
        }
        println!(
            "{:<4} {:<18} {:<16} max_rel_err={:.3e} params={}",
            if case.passed { "ok" } else { "FAIL" },
            case.plan.label(),
            case.variant.to_string(),
            case.max_rel_error,
            case.param_count
        );
    }
    let worst = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    println!(
        "{} of {} cases passed; worst relative error {worst:.3e} (tolerance {:.0e})",
        cases.len() - failed,
        cases.len(),
        suite.tolerance
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dims_cmd(args: DimsArgs, file: &FileConfig) -> Result<ExitCode> {
    let [inner, outer, fin] = plan_ops(&args.plan, file)?;
    let plan = build_plan(&PlanConfig {
        slot_inner: inner,
        slot_outer: outer,
        slot_final: fin,
        d_text: args.d_text,
        d_text_second: args.d_text_second,
        d_image_raw: args.d_image_raw,
    })?;
    println!("plan={}", plan.label());
    println!("d_branch_first={}", plan.d_branch_first);
    println!("d_branch_second={}", plan.d_branch_second);
    println!("d_text_fused={}", plan.d_text_fused);
    println!("adapter_target={}", plan.adapter_target);
    println!("d_fused={}", plan.d_fused);
    if !plan.adapter_feasible() {
        println!("warning: d_image_raw={} is below the adapter target", plan.d_image_raw);
    }
    Ok(ExitCode::SUCCESS)
}
