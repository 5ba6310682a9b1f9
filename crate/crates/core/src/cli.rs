//! The `dst-eval` command line.
//!
//! Exit codes: 0 on success, 1 when input files fail validation, 2 on
//! usage errors (bad flags or flag values). Errors go to stderr as
//! `error[CODE]: message`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, Trait};
use crate::delta;
use crate::error::Error;
use crate::io::{self, ConfigFile, NumberStyle, ReportFormat};
use crate::metrics;
use crate::model::{Aggregation, Corpus, Metric, MetricConfig, Normalizer, Ontology, Prediction};
use crate::synth::{self, KindMix, PerturbationSpec};

#[derive(Debug, Parser)]
#[command(name = "dst-eval", version, about = "Evaluate dialogue state tracking predictions")]
pub struct Cli {
    /// Settings file (TOML); defaults to $DST_EVAL_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score predictions with all six metrics.
    Evaluate(EvaluateArgs),
    /// Rank dialogues by score disagreement between two systems or two metrics.
    Compare(CompareArgs),
    /// Mistake-distribution traits and their correlation with metric scores.
    Analyze(AnalyzeArgs),
    /// Generate synthetic predictions by corrupting gold changes.
    Perturb(PerturbArgs),
    /// Check corpus and prediction files without scoring.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Slot ontology (JSON array or object with `ontology`); defaults to the corpus ontology.
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// FGA decay ratio.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight of value precision and recall in GCA.
    #[arg(long)]
    value_weight: Option<f64>,
    /// Weight of label precision and recall in GCA.
    #[arg(long)]
    label_weight: Option<f64>,
    /// pooled | per-dialogue | micro
    #[arg(long)]
    aggregate: Option<String>,
    /// Do not score active-to-inactive transitions as changes.
    #[arg(long)]
    no_deactivations: bool,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// json | csv | md
    #[arg(long, default_value = "json")]
    format: String,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print scores as percentages.
    #[arg(long)]
    percent: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Gold corpus file (JSON).
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file (JSON).
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Gold corpus file (JSON).
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file of the first system.
    #[arg(long)]
    pred_a: PathBuf,
    /// Second system; without it, two metrics of system A are compared.
    #[arg(long)]
    pred_b: Option<PathBuf>,
    /// Metric compared across the two systems.
    #[arg(long, default_value = "gca")]
    metric: String,
    /// Metric pair compared within one system.
    #[arg(long, default_value = "fga,gca")]
    metrics: String,
    /// Number of dialogues to list.
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[command(flatten)]
    metric_args: MetricArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Gold corpus file (JSON).
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file (JSON).
    #[arg(long)]
    pred: PathBuf,
    /// Comma-separated traits: to, nu
    #[arg(long, default_value = "to,nu")]
    traits: String,
    /// Correlate traits with per-dialogue metric scores.
    #[arg(long)]
    correlate: bool,
    /// Confidence level of the FGA-vs-GCA correlation comparison.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[command(flatten)]
    metric: MetricArgs,
    /// json | csv | md
    #[arg(long, default_value = "json")]
    format: String,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// Gold corpus file (JSON).
    #[arg(long)]
    gold: PathBuf,
    /// Slot ontology (JSON array or object with `ontology`); defaults to the corpus ontology.
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Fraction of gold value changes to corrupt [default: 0.2].
    #[arg(long)]
    error_rate: Option<f64>,
    /// Probabilities of missed,wrong,overshot corruptions.
    #[arg(long)]
    kind_mix: Option<String>,
    /// Positive values place corruptions late in the dialogue, negative early.
    #[arg(long, allow_hyphen_values = true)]
    tail_bias: Option<f64>,
    /// Clusters corruptions into fewer turns as it grows [default: 0].
    #[arg(long)]
    concentration: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// System name recorded in the prediction file.
    #[arg(long, default_value = "synthetic")]
    system: String,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Gold corpus file (JSON).
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file to check against the corpus.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Slot ontology (JSON array or object with `ontology`); defaults to the corpus ontology.
    #[arg(long)]
    ontology: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error[E_USAGE]: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            report_error(&e, err);
            1
        }
    }
}

fn report_error(e: &Error, err: &mut dyn Write) {
    match e {
        Error::Invalid(diags) => {
            for d in diags {
                let _ = writeln!(err, "error[{}]: {}: {}", d.code, d.location, d.message);
            }
        }
        other => {
            let _ = writeln!(err, "error[{}]: {other}", other.code());
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let config = match ConfigFile::resolve(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return usage(format!("config: {e}")),
    };
    match cli.command {
        Command::Evaluate(args) => evaluate(&config, args, out),
        Command::Compare(args) => compare(&config, args, out),
        Command::Analyze(args) => analyze(&config, args, out),
        Command::Perturb(args) => perturb(&config, args, out),
        Command::Validate(args) => validate(&config, args, out),
    }
}

fn metric_config(base: &MetricConfig, args: &MetricArgs) -> CliResult<MetricConfig> {
    let mut cfg = *base;
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(w) = args.value_weight {
        cfg.value_weight = w;
    }
    if let Some(w) = args.label_weight {
        cfg.label_weight = w;
    }
    if let Some(a) = &args.aggregate {
        cfg.aggregation = a.parse::<Aggregation>().or_else(|e| usage(e.to_string()))?;
    }
    if args.no_deactivations {
        cfg.score_deactivations = false;
    }
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn parse_format(s: &str) -> CliResult<ReportFormat> {
    s.parse().or_else(|e: Error| usage(e.to_string()))
}

fn load_gold(
    gold: &Path,
    ontology: Option<&Path>,
    normalizer: &Normalizer,
) -> CliResult<(Corpus, Ontology)> {
    let (corpus, corpus_ontology) = io::load_corpus(gold, normalizer)?;
    let ontology = match ontology {
        Some(path) => io::load_ontology(path)?,
        None => corpus_ontology,
    };
    Ok((corpus, ontology))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => io::write_file(p, text)?,
        None => out.write_all(text.as_bytes()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(())
}

fn scored(
    config: &ConfigFile,
    gold: &Path,
    pred: &Path,
    args: &MetricArgs,
) -> CliResult<(Corpus, Vec<Prediction>, crate::model::MetricReport)> {
    let cfg = metric_config(&config.metrics, args)?;
    let normalizer = config.normalizer();
    let (corpus, ontology) = load_gold(gold, args.ontology.as_deref(), &normalizer)?;
    let preds = io::load_predictions(pred, &corpus, &ontology, &normalizer)?;
    let report = metrics::evaluate_corpus(&corpus, &preds, &ontology, &cfg)?;
    Ok((corpus, preds, report))
}

fn evaluate(config: &ConfigFile, args: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let format = parse_format(&args.output.format)?;
    let (_, _, report) = scored(config, &args.gold, &args.pred, &args.metric)?;
    let style = NumberStyle {
        percent: args.output.percent,
    };
    emit(out, args.output.out.as_deref(), &io::write_report(&report, format, style))
}

fn parse_metric(s: &str) -> CliResult<Metric> {
    s.parse().or_else(|e: Error| usage(e.to_string()))
}

fn compare(config: &ConfigFile, args: CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    let format = parse_format(&args.output.format)?;
    if args.top == 0 {
        return usage("--top must be at least 1");
    }
    let style = NumberStyle {
        percent: args.output.percent,
    };
    let (_, _, report_a) = scored(config, &args.gold, &args.pred_a, &args.metric_args)?;
    let (rows, label_a, label_b) = match &args.pred_b {
        Some(pred_b) => {
            let metric = parse_metric(&args.metric)?;
            let (_, _, report_b) = scored(config, &args.gold, pred_b, &args.metric_args)?;
            let rows = analysis::system_disagreement(&report_a, &report_b, metric, args.top)?;
            (rows, format!("{metric}_a"), format!("{metric}_b"))
        }
        None => {
            let names: Vec<&str> = args.metrics.split(',').collect();
            let [a, b] = names[..] else {
                return usage("--metrics takes exactly two metrics, e.g. fga,gca");
            };
            let (a, b) = (parse_metric(a)?, parse_metric(b)?);
            let rows = analysis::disagreement_ranking(&report_a, a, b, args.top)?;
            (rows, a.to_string(), b.to_string())
        }
    };
    let text = io::write_ranking(&rows, &label_a, &label_b, format, style);
    emit(out, args.output.out.as_deref(), &text)
}

fn analyze(config: &ConfigFile, args: AnalyzeArgs, out: &mut dyn Write) -> CliResult<()> {
    let format = parse_format(&args.format)?;
    let which: Vec<Trait> = args
        .traits
        .split(',')
        .map(|t| t.parse::<Trait>())
        .collect::<Result<_, _>>()
        .or_else(|e| usage(e.to_string()))?;
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return usage("--confidence must be in (0, 1)");
    }
    let (corpus, preds, report) = scored(config, &args.gold, &args.pred, &args.metric)?;
    let deact = report.config.score_deactivations;
    let by_id: std::collections::HashMap<&str, &Prediction> =
        preds.iter().map(|p| (p.dialogue_id.as_str(), p)).collect();
    let mut traits = Vec::with_capacity(corpus.len());
    for d in corpus.dialogues() {
        let tally = delta::count_changes_with(&d.gold_states(), &by_id[d.id.as_str()].states, deact)?;
        let mut t = analysis::trait_scores(&d.id, &tally, d.len())?;
        if !which.contains(&Trait::To) {
            t.tail_orientation = None;
        }
        if !which.contains(&Trait::Nu) {
            t.non_uniformity = None;
        }
        traits.push(t);
    }
    let result = if args.correlate {
        Some(analysis::analyze_traits(
            &report,
            &traits,
            &which,
            &Metric::ALL,
            &[(Metric::Fga, Metric::Gca)],
            args.confidence,
        )?)
    } else {
        None
    };
    emit(out, args.out.as_deref(), &io::write_analysis(&traits, result.as_ref(), format))
}

fn parse_kind_mix(s: &str) -> CliResult<KindMix> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .or_else(|_| usage(format!("--kind-mix expects three numbers m,w,o, got `{s}`")))?;
    match parts[..] {
        [m, w, o] => Ok(KindMix::new(m, w, o)),
        _ => usage(format!("--kind-mix expects three numbers m,w,o, got `{s}`")),
    }
}

fn perturb(config: &ConfigFile, args: PerturbArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut spec: PerturbationSpec = config.perturb;
    if let Some(r) = args.error_rate {
        spec.error_rate = r;
    }
    if let Some(m) = &args.kind_mix {
        spec.kind_mix = parse_kind_mix(m)?;
    }
    if let Some(b) = args.tail_bias {
        spec.tail_bias = b;
    }
    if let Some(c) = args.concentration {
        spec.concentration = c;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    spec.validate().or_else(|e| usage(e.to_string()))?;
    let (corpus, ontology) = load_gold(&args.gold, args.ontology.as_deref(), &config.normalizer())?;
    let preds = synth::perturb(&corpus, &ontology, &spec)?;
    let file = io::prediction_file(&args.system, &preds);
    emit(out, args.out.as_deref(), &io::to_pretty_json(&file))
}

fn validate(config: &ConfigFile, args: ValidateArgs, out: &mut dyn Write) -> CliResult<()> {
    let normalizer = config.normalizer();
    let (corpus, ontology) = load_gold(&args.gold, args.ontology.as_deref(), &normalizer)?;
    let mut summary = format!(
        "ok: {} dialogues, {} turns, {} ontology slots\n",
        corpus.len(),
        corpus.total_turns(),
        ontology.len()
    );
    if let Some(pred) = &args.pred {
        let preds = io::load_predictions(pred, &corpus, &ontology, &normalizer)?;
        let diags = metrics::validate_predictions(&corpus, &preds, &ontology);
        if !diags.is_empty() {
            return Err(Error::Invalid(diags).into());
        }
        summary.push_str(&format!("ok: {} predictions\n", preds.len()));
    }
    emit(out, None, &summary)
}
