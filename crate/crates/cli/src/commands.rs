use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgAction, Args, Parser, Subcommand};
use dermtriage_core::datasetio::{load_manifest, stratified_split, DatasetManifest, SplitSpec};
use dermtriage_core::ensemble::average_distribution;
use dermtriage_core::imaging::{load_image, preprocess, save_image};
use dermtriage_core::inference::{load_backends, load_roster, predict_all, Classifier};
use dermtriage_core::llmclient::{StubTransport, ENV_API_KEY};
use dermtriage_core::metrics::{parse_predictions, summarize};
use dermtriage_core::reporting::generate_report;
use dermtriage_core::{
    ClassLabel, ClassProbabilities, EnsembleDecision, LlmClient, LlmConfig, NlmParams, PreprocessConfig, ReportRequest,
    VotingPolicy,
};
use dermtriage_service::ServiceConfig;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs or invalid configuration.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Partial,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
        }
    }
}

/// Dermoscopic lesion triage: preprocessing, ensemble classification,
/// evaluation and report generation.
#[derive(Debug, Parser)]
#[command(name = "dermtriage", version)]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// More log output on stderr (-v info, -vv debug). `RUST_LOG` overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Denoise, equalize and resize every image in a directory.
    Preprocess(PreprocessArgs),
    /// Stratified train/validation/test split of a manifest.
    Split(SplitArgs),
    /// Run the backend ensemble on one or more images.
    Classify(ClassifyArgs),
    /// Metrics for a prediction file (`sample_id,truth,p_nv,p_bcc`).
    Evaluate(EvaluateArgs),
    /// Generate an assessment report for a classified case.
    Report(ReportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long = "out", value_name = "DIR")]
    pub output: PathBuf,
    #[arg(long, default_value_t = NlmParams::default().h)]
    pub nlm_h: f64,
    /// Patch radius in pixels.
    #[arg(long, default_value_t = NlmParams::default().patch_radius)]
    pub patch: usize,
    /// Search window radius in pixels.
    #[arg(long, default_value_t = NlmParams::default().search_radius)]
    pub search: usize,
    #[arg(long)]
    pub no_denoise: bool,
    #[arg(long)]
    pub no_equalize: bool,
    /// Output width and height.
    #[arg(long, default_value_t = 224)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub fractions: String,
    /// Directory for train.txt, val.txt and test.txt. Defaults to the manifest's directory.
    #[arg(long = "out", value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Image to classify; repeat for a batch.
    #[arg(long, required = true)]
    pub image: Vec<PathBuf>,
    /// Backend roster (TOML with `[[backend]]` tables).
    #[arg(long)]
    pub backends: PathBuf,
    /// Feed decoded images to the backends without denoising or equalization.
    #[arg(long)]
    pub no_preprocess: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Also print per-class TP/FN/error-rate percentages.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Decision JSON: a bare decision or `classify --json` output.
    #[arg(long)]
    pub case: PathBuf,
    /// Answer from this text file instead of calling the LLM provider.
    #[arg(long, value_name = "FIXTURE")]
    pub offline_stub: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config TOML. Environment variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let json = cli.json;
    match cli.command {
        Command::Preprocess(args) => run_preprocess(&args, json),
        Command::Split(args) => run_split(&args, json),
        Command::Classify(args) => run_classify(&args, json),
        Command::Evaluate(args) => run_evaluate(&args, json),
        Command::Report(args) => run_report(&args, json),
        Command::Serve(args) => run_serve(&args),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn run_preprocess(args: &PreprocessArgs, json: bool) -> Result<Outcome, CliError> {
    let config = PreprocessConfig {
        denoise: !args.no_denoise,
        equalize: !args.no_equalize,
        nlm: NlmParams {
            patch_radius: args.patch,
            search_radius: args.search,
            h: args.nlm_h,
        },
        width: args.size,
        height: args.size,
        force_rgb: true,
    };
    config.nlm.validate().map_err(usage)?;
    if args.size == 0 {
        return Err(usage("--size must be positive"));
    }
    let entries =
        std::fs::read_dir(&args.input).map_err(|e| usage(format!("cannot read {}: {e}", args.input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_image_path(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no PNG or JPEG files in {}", args.input.display())));
    }
    std::fs::create_dir_all(&args.output)
        .map_err(|e| usage(format!("cannot create {}: {e}", args.output.display())))?;

    let results: Vec<(String, Result<(), String>)> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let result = load_image(path)
                .and_then(|img| preprocess(&img, &config))
                .and_then(|out| save_image(&out, &args.output.join(&name)))
                .map_err(|e| e.to_string());
            match &result {
                Ok(()) => tracing::info!(file = %name, "preprocessed"),
                Err(e) => tracing::warn!(file = %name, error = %e, "preprocessing failed"),
            }
            (name, result)
        })
        .collect();

    let failed: Vec<(&String, &String)> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| (n, e)))
        .collect();
    if json {
        let ok: Vec<&String> = results.iter().filter(|(_, r)| r.is_ok()).map(|(n, _)| n).collect();
        let failures: Vec<Value> = failed.iter().map(|(n, e)| json!({ "file": n, "error": e })).collect();
        print_json(&json!({ "processed": ok, "failed": failures, "size": args.size }))?;
    } else {
        for (name, result) in &results {
            match result {
                Ok(()) => println!("ok      {name}"),
                Err(e) => println!("FAILED  {name}: {e}"),
            }
        }
        println!(
            "{} of {} images written to {}",
            results.len() - failed.len(),
            results.len(),
            args.output.display()
        );
        if !failed.is_empty() {
            println!("failures:");
            for (name, _) in &failed {
                println!("  {name}");
            }
        }
    }
    Ok(if failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}

fn parse_fractions(text: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--fractions `{text}`: expected three comma-separated numbers")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(usage(format!(
            "--fractions `{text}`: expected three values, got {}",
            parts.len()
        ))),
    }
}

fn class_counts(m: &DatasetManifest) -> Value {
    json!({
        "total": m.len(),
        "NV": m.count(ClassLabel::Nv),
        "BCC": m.count(ClassLabel::Bcc),
    })
}

fn run_split(args: &SplitArgs, json: bool) -> Result<Outcome, CliError> {
    let (train_fraction, val_fraction, test_fraction) = parse_fractions(&args.fractions)?;
    let spec = SplitSpec {
        train_fraction,
        val_fraction,
        test_fraction,
        seed: args.seed,
    };
    spec.validate().map_err(usage)?;
    let manifest = load_manifest(&args.manifest).map_err(|e| usage(format!("{}: {e}", args.manifest.display())))?;
    let split = stratified_split(&manifest, &spec).map_err(usage)?;
    let out_dir = match &args.output {
        Some(dir) => dir.clone(),
        None => args.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let subsets = [("train", &split.train), ("val", &split.val), ("test", &split.test)];
    for (name, subset) in subsets {
        let path = out_dir.join(format!("{name}.txt"));
        subset
            .write(&path)
            .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?;
    }
    if json {
        let mut out = serde_json::Map::new();
        for (name, subset) in subsets {
            out.insert(name.into(), class_counts(subset));
        }
        out.insert("seed".into(), json!(args.seed));
        print_json(&out)?;
    } else {
        for (name, subset) in subsets {
            println!(
                "{name:<5} {:>6}  (NV {}, BCC {})  -> {}",
                subset.len(),
                subset.count(ClassLabel::Nv),
                subset.count(ClassLabel::Bcc),
                out_dir.join(format!("{name}.txt")).display()
            );
        }
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Serialize)]
struct Classified {
    image: PathBuf,
    decision: EnsembleDecision,
    average_distribution: ClassProbabilities,
}

fn load_ensemble(roster: &Path) -> Result<(Vec<Box<dyn Classifier>>, VotingPolicy), CliError> {
    let descriptors = load_roster(roster).map_err(|e| usage(format!("{}: {e}", roster.display())))?;
    let backends = load_backends(&descriptors).map_err(usage)?;
    let policy = VotingPolicy::new(backends.len()).map_err(usage)?;
    let shape = backends[0].input_shape();
    if let Some(other) = backends.iter().find(|b| b.input_shape() != shape) {
        return Err(usage(format!(
            "backend `{}` expects {} but `{}` expects {shape}; one preprocessing size is required",
            other.model_id(),
            other.input_shape(),
            backends[0].model_id()
        )));
    }
    Ok((backends, policy))
}

fn classify_one(
    path: &Path,
    backends: &[Box<dyn Classifier>],
    policy: &VotingPolicy,
    config: &PreprocessConfig,
    raw: bool,
) -> Result<Classified, String> {
    let img = load_image(path).map_err(|e| e.to_string())?;
    let input = if raw {
        img
    } else {
        preprocess(&img, config).map_err(|e| e.to_string())?
    };
    let predictions = predict_all(backends, &input).map_err(|e| e.to_string())?;
    let decision = policy.vote(&predictions).map_err(|e| e.to_string())?;
    let average = average_distribution(&predictions).map_err(|e| e.to_string())?;
    Ok(Classified {
        image: path.to_path_buf(),
        decision,
        average_distribution: average,
    })
}

fn print_classified(c: &Classified) {
    let d = &c.decision;
    println!("{}", c.image.display());
    if d.needs_review {
        println!("  FLAGGED FOR SPECIALIST REVIEW");
    }
    println!("  final class: {} ({})", d.final_class, d.final_class.display_name());
    println!("  confidence: {:.1}%", d.confidence * 100.0);
    println!("  consensus: {}", d.consensus);
    for p in &d.member_predictions {
        let [nv, bcc] = p.probs.as_array();
        println!("  {:<20} NV {:5.1}%  BCC {:5.1}%", p.model_id, nv * 100.0, bcc * 100.0);
    }
}

fn run_classify(args: &ClassifyArgs, json: bool) -> Result<Outcome, CliError> {
    let (backends, policy) = load_ensemble(&args.backends)?;
    let shape = backends[0].input_shape();
    let config = PreprocessConfig {
        width: shape.width,
        height: shape.height,
        force_rgb: shape.channels == 3,
        ..PreprocessConfig::default()
    };

    let mut done = Vec::new();
    let mut failures = Vec::new();
    for path in &args.image {
        match classify_one(path, &backends, &policy, &config, args.no_preprocess) {
            Ok(c) => done.push(c),
            Err(e) => {
                tracing::warn!(image = %path.display(), error = %e, "classification failed");
                failures.push((path.clone(), e));
            }
        }
    }

    if json {
        let failed: Vec<Value> = failures
            .iter()
            .map(|(p, e)| json!({ "image": p, "error": e }))
            .collect();
        match (&done[..], failures.is_empty()) {
            ([single], true) => print_json(single)?,
            _ => print_json(&json!({ "cases": done, "failed": failed }))?,
        }
    } else {
        for c in &done {
            print_classified(c);
        }
        for (path, e) in &failures {
            println!("FAILED  {}: {e}", path.display());
        }
    }
    match (done.is_empty(), failures.is_empty()) {
        (_, true) => Ok(Outcome::Success),
        (true, false) => Err(CliError::Failed(format!("all {} image(s) failed", failures.len()))),
        (false, false) => Ok(Outcome::Partial),
    }
}

fn run_evaluate(args: &EvaluateArgs, json: bool) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.predictions)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.predictions.display())))?;
    let records = parse_predictions(&text).map_err(|e| usage(format!("{}: {e}", args.predictions.display())))?;
    if records.is_empty() {
        return Err(usage(format!("{} contains no predictions", args.predictions.display())));
    }
    let samples: Vec<_> = records.into_iter().map(|r| r.prediction).collect();
    let report = summarize(&samples).map_err(usage)?;
    if json {
        print_json(&report)?;
        return Ok(Outcome::Success);
    }
    println!("{} samples from {}\n", report.samples, args.predictions.display());
    print!("{}", report.render_table());
    if args.table {
        println!();
        print!("{}", report.render_rates_table());
    }
    Ok(Outcome::Success)
}

fn read_decision(path: &Path) -> Result<EnsembleDecision, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let inner = value.get("decision").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| usage(format!("{}: not a decision: {e}", path.display())))
}

fn run_report(args: &ReportArgs, json: bool) -> Result<Outcome, CliError> {
    let decision = read_decision(&args.case)?;
    let mut config = LlmConfig::from_env();
    let client = match &args.offline_stub {
        Some(path) => {
            let stub = StubTransport::from_fixture(path)
                .map_err(|e| usage(format!("cannot read stub fixture {}: {e}", path.display())))?;
            config.backoff_base_ms = 0;
            LlmClient::new(config, Arc::new(stub)).map_err(usage)?
        }
        None if config.api_key.is_none() => {
            return Err(usage(format!(
                "no LLM API key configured; set {ENV_API_KEY} or pass --offline-stub <fixture>"
            )))
        }
        None => LlmClient::http(config).map_err(usage)?,
    };
    let request = ReportRequest::from_decision(&decision);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    let report = runtime
        .block_on(generate_report(&request, &client))
        .map_err(|e| CliError::Failed(e.to_string()))?;
    if json {
        print_json(&report)?;
    } else {
        println!("{}", report.render_text());
    }
    Ok(Outcome::Success)
}

fn run_serve(args: &ServeArgs) -> Result<Outcome, CliError> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(usage)?,
        None => ServiceConfig::default(),
    };
    config.apply_env().map_err(usage)?;
    config.validate().map_err(usage)?;
    config.backend_descriptors().map_err(usage)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    runtime
        .block_on(dermtriage_service::serve(config))
        .map_err(|e| match e {
            dermtriage_service::ServiceError::Config(_) | dermtriage_service::ServiceError::Inference(_) => usage(e),
            other => CliError::Failed(other.to_string()),
        })?;
    Ok(Outcome::Success)
}
