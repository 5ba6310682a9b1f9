//! Corpus and prediction files, configuration files and report writers.
//!
//! Corpus file (JSON, UTF-8):
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "dataset": "multiwoz-2.1",
//!   "encoding": "cumulative",
//!   "ontology": ["hotel-area", "hotel-stars"],
//!   "dialogues": [
//!     {"id": "MUL0001", "turns": [
//!       {"system": "", "user": "a hotel in the north", "gold": {"hotel-area": "north"}}
//!     ]}
//!   ]
//! }
//! ```
//!
//! Prediction file:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "system": "trade",
//!   "encoding": "cumulative",
//!   "predictions": {"MUL0001": [{"hotel-area": "north"}]}
//! }
//! ```
//!
//! With `"encoding": "delta"` each turn lists only changed slots and an
//! inactive value ("none") removes a slot; states are accumulated on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Diagnostic, Error, Result};
use crate::model::{
    BeliefState, Corpus, Dialogue, MetricConfig, MetricReport, Normalizer, Ontology, Prediction,
    Scores, SlotName, Turn,
};
use crate::synth::PerturbationSpec;

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "DST_EVAL_CONFIG";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Cumulative,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    #[serde(default)]
    pub system: String,
    #[serde(default)]
    pub user: String,
    #[serde(default)]
    pub gold: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueRecord {
    pub id: String,
    pub turns: Vec<TurnRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFile {
    pub format_version: u32,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub encoding: Encoding,
    /// Empty means "every slot active somewhere in gold".
    #[serde(default)]
    pub ontology: Vec<String>,
    pub dialogues: Vec<DialogueRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub format_version: u32,
    #[serde(default)]
    pub system: String,
    #[serde(default)]
    pub encoding: Encoding,
    pub predictions: BTreeMap<String, Vec<BTreeMap<String, String>>>,
}

/// Optional settings file: `[metrics]`, `[perturb]` and an inactive lexicon.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub metrics: MetricConfig,
    pub perturb: PerturbationSpec,
    pub inactive_values: Option<Vec<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let config: ConfigFile = toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_owned(),
            field: e.span().map(|s| format!("byte {}", s.start)).unwrap_or_default(),
            message: e.message().to_owned(),
        })?;
        config.metrics.validate()?;
        config.perturb.validate()?;
        Ok(config)
    }

    /// `explicit` if given, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(path) => Self::load(path),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(path) if !path.is_empty() => Self::load(Path::new(&path)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn normalizer(&self) -> Normalizer {
        match &self.inactive_values {
            Some(words) => Normalizer::with_inactive(words),
            None => Normalizer::default(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            Error::Schema {
                path: path.to_owned(),
                field,
                message: inner.to_string(),
            }
        } else {
            Error::Parse {
                path: path.to_owned(),
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(parsed)
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Schema {
            path: path.to_owned(),
            field: "format_version".into(),
            message: format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        });
    }
    Ok(())
}

/// Turns raw per-turn maps into cumulative states, recording a diagnostic
/// for every bad slot name. `location(t)` names turn `t` in diagnostics.
fn build_states(
    turns: &[&BTreeMap<String, String>],
    encoding: Encoding,
    normalizer: &Normalizer,
    ontology: Option<&Ontology>,
    location: &dyn Fn(usize) -> String,
    diags: &mut Vec<Diagnostic>,
) -> Vec<BeliefState> {
    let mut states = Vec::with_capacity(turns.len());
    let mut running = BeliefState::new();
    for (t, raw) in turns.iter().enumerate() {
        let mut state = match encoding {
            Encoding::Cumulative => BeliefState::new(),
            Encoding::Delta => running.clone(),
        };
        for (slot, value) in raw.iter() {
            let name = match SlotName::parse(slot) {
                Ok(name) => name,
                Err(_) => {
                    diags.push(Diagnostic::new(
                        "E_SLOT_NAME",
                        location(t),
                        format!("invalid slot name `{slot}`: expected `domain-slot`"),
                    ));
                    continue;
                }
            };
            match normalizer.normalize(value) {
                Some(v) => {
                    if let Some(ont) = ontology {
                        if !ont.contains(&name) {
                            diags.push(Diagnostic::new(
                                "E_UNKNOWN_SLOT",
                                location(t),
                                format!("slot `{name}` is not in the ontology"),
                            ));
                        }
                    }
                    state.insert(name, v);
                }
                None => {
                    state.remove(&name);
                }
            }
        }
        running = state.clone();
        states.push(state);
    }
    states
}

/// Loads and validates a corpus file, normalizing every value.
///
/// Returns the explicit ontology when the file has one, else the slots
/// active anywhere in gold.
pub fn load_corpus(path: &Path, normalizer: &Normalizer) -> Result<(Corpus, Ontology)> {
    let text = read(path)?;
    parse_corpus(path, &text, normalizer)
}

pub fn parse_corpus(path: &Path, text: &str, normalizer: &Normalizer) -> Result<(Corpus, Ontology)> {
    let file: CorpusFile = parse_json(path, text)?;
    check_version(path, file.format_version)?;
    let mut diags = Vec::new();

    let mut ont_slots = Vec::new();
    for (i, name) in file.ontology.iter().enumerate() {
        match SlotName::parse(name) {
            Ok(s) => ont_slots.push(s),
            Err(_) => diags.push(Diagnostic::new(
                "E_SLOT_NAME",
                format!("ontology[{i}]"),
                format!("invalid slot name `{name}`"),
            )),
        }
    }
    let explicit = (!file.ontology.is_empty()).then(|| Ontology::new(ont_slots));

    let mut seen = BTreeMap::new();
    let mut dialogues = Vec::with_capacity(file.dialogues.len());
    for (i, record) in file.dialogues.iter().enumerate() {
        if record.id.trim().is_empty() {
            diags.push(Diagnostic::new("E_SCHEMA", format!("dialogues[{i}].id"), "empty dialogue id"));
        }
        if let Some(first) = seen.insert(record.id.clone(), i) {
            diags.push(Diagnostic::new(
                "E_DUPLICATE_ID",
                format!("dialogues[{i}].id"),
                format!("duplicate dialogue id `{}` (first at dialogues[{first}])", record.id),
            ));
        }
        if record.turns.is_empty() {
            diags.push(Diagnostic::new(
                "E_SCHEMA",
                format!("dialogues[{i}].turns"),
                format!("dialogue `{}` has no turns", record.id),
            ));
            continue;
        }
        let raw: Vec<_> = record.turns.iter().map(|t| &t.gold).collect();
        let states = build_states(
            &raw,
            file.encoding,
            normalizer,
            explicit.as_ref(),
            &|t| format!("dialogues[{i}].turns[{t}].gold ({})", record.id),
            &mut diags,
        );
        let turns = record
            .turns
            .iter()
            .zip(states)
            .map(|(r, gold)| Turn {
                system_utterance: r.system.clone(),
                user_utterance: r.user.clone(),
                gold,
            })
            .collect();
        dialogues.push(Dialogue {
            id: record.id.clone(),
            turns,
        });
    }
    if file.dialogues.is_empty() {
        diags.push(Diagnostic::new("E_SCHEMA", "dialogues", "corpus has no dialogues"));
    }
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    let corpus = Corpus::new(file.dataset, dialogues)?;
    let ontology = explicit.unwrap_or_else(|| Ontology::from_corpus(&corpus));
    Ok((corpus, ontology))
}

/// Loads a prediction file and checks it against the corpus: every id
/// must exist, lengths must match and slots must be in the ontology.
pub fn load_predictions(
    path: &Path,
    corpus: &Corpus,
    ontology: &Ontology,
    normalizer: &Normalizer,
) -> Result<Vec<Prediction>> {
    let text = read(path)?;
    parse_predictions(path, &text, corpus, ontology, normalizer)
}

pub fn parse_predictions(
    path: &Path,
    text: &str,
    corpus: &Corpus,
    ontology: &Ontology,
    normalizer: &Normalizer,
) -> Result<Vec<Prediction>> {
    let file: PredictionFile = parse_json(path, text)?;
    check_version(path, file.format_version)?;
    let mut diags = Vec::new();
    let mut preds = Vec::with_capacity(file.predictions.len());
    for (id, turns) in &file.predictions {
        let Some(dialogue) = corpus.get(id) else {
            diags.push(Diagnostic::new("E_UNKNOWN_ID", id.clone(), "no such dialogue in the corpus"));
            continue;
        };
        if turns.len() != dialogue.len() {
            diags.push(Diagnostic::new(
                "E_LENGTH",
                id.clone(),
                format!("dialogue has {} turns but {} predicted states", dialogue.len(), turns.len()),
            ));
        }
        let raw: Vec<_> = turns.iter().collect();
        let states = build_states(
            &raw,
            file.encoding,
            normalizer,
            Some(ontology),
            &|t| format!("{id} turn {t}"),
            &mut diags,
        );
        preds.push(Prediction::new(id.clone(), states));
    }
    if preds.is_empty() && diags.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    Ok(preds)
}

/// Ontology file: a JSON array of slot names, or an object with an
/// `ontology` array (so a corpus file also works).
pub fn load_ontology(path: &Path) -> Result<Ontology> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OntologyFile {
        List(Vec<String>),
        Object { ontology: Vec<String> },
    }
    let text = read(path)?;
    let names = match parse_json::<OntologyFile>(path, &text)? {
        OntologyFile::List(names) | OntologyFile::Object { ontology: names } => names,
    };
    let mut diags = Vec::new();
    let mut slots = Vec::new();
    for (i, name) in names.iter().enumerate() {
        match SlotName::parse(name) {
            Ok(s) => slots.push(s),
            Err(_) => diags.push(Diagnostic::new(
                "E_SLOT_NAME",
                format!("ontology[{i}]"),
                format!("invalid slot name `{name}`"),
            )),
        }
    }
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }
    let ontology = Ontology::new(slots);
    if ontology.is_empty() {
        return Err(Error::EmptyOntology);
    }
    Ok(ontology)
}

fn state_map(state: &BeliefState) -> BTreeMap<String, String> {
    state
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Cumulative prediction file for `preds`.
pub fn prediction_file(system: &str, preds: &[Prediction]) -> PredictionFile {
    PredictionFile {
        format_version: FORMAT_VERSION,
        system: system.to_owned(),
        encoding: Encoding::Cumulative,
        predictions: preds
            .iter()
            .map(|p| (p.dialogue_id.clone(), p.states.iter().map(state_map).collect()))
            .collect(),
    }
}

pub fn corpus_file(corpus: &Corpus, ontology: &Ontology) -> CorpusFile {
    CorpusFile {
        format_version: FORMAT_VERSION,
        dataset: corpus.name.clone(),
        encoding: Encoding::Cumulative,
        ontology: ontology.iter().map(|s| s.to_string()).collect(),
        dialogues: corpus
            .dialogues()
            .iter()
            .map(|d| DialogueRecord {
                id: d.id.clone(),
                turns: d
                    .turns
                    .iter()
                    .map(|t| TurnRecord {
                        system: t.system_utterance.clone(),
                        user: t.user_utterance.clone(),
                        gold: state_map(&t.gold),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// Number rendering shared by every writer: 4 decimals, optionally ×100.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NumberStyle {
    pub percent: bool,
}

impl NumberStyle {
    pub fn score(&self, x: f64) -> String {
        let x = if self.percent { x * 100.0 } else { x };
        fixed(x)
    }

    pub fn opt_score(&self, x: Option<f64>) -> String {
        x.map(|x| self.score(x)).unwrap_or_default()
    }

    fn json_score(&self, x: f64) -> Fixed {
        Fixed(self.score(x))
    }

    fn json_opt(&self, x: Option<f64>) -> Option<Fixed> {
        x.map(|x| self.json_score(x))
    }
}

/// Fixed 4-decimal rendering; negative zero prints as zero.
pub fn fixed(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// A preformatted JSON number.
#[derive(Debug, Clone, PartialEq)]
struct Fixed(String);

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.parse::<f64>().map(f64::is_finite).unwrap_or(false) {
            RawValue::from_string(self.0.clone())
                .map_err(serde::ser::Error::custom)?
                .serialize(serializer)
        } else {
            serializer.serialize_none()
        }
    }
}

#[derive(Serialize)]
struct JsonScores {
    jga: Fixed,
    sa: Fixed,
    aga: Option<Fixed>,
    rsa: Fixed,
    fga: Fixed,
    gca: Fixed,
}

impl JsonScores {
    fn new(s: &Scores, style: NumberStyle) -> Self {
        Self {
            jga: style.json_score(s.jga),
            sa: style.json_score(s.sa),
            aga: style.json_opt(s.aga),
            rsa: style.json_score(s.rsa),
            fga: style.json_score(s.fga),
            gca: style.json_score(s.gca),
        }
    }
}

#[derive(Serialize)]
struct JsonConfig {
    lambda: Fixed,
    value_weight: Fixed,
    label_weight: Fixed,
    aggregation: String,
    score_deactivations: bool,
}

#[derive(Serialize)]
struct JsonIntermediates {
    value_precision: Fixed,
    value_recall: Fixed,
    label_precision: Fixed,
    label_recall: Fixed,
}

#[derive(Serialize)]
struct JsonDialogue<'a> {
    dialogue_id: &'a str,
    turns: usize,
    #[serde(flatten)]
    scores: JsonScores,
    counts: crate::delta::ChangeCounts,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    format_version: u32,
    scale: &'static str,
    config: JsonConfig,
    ontology_size: usize,
    dialogues: usize,
    turns: usize,
    corpus: JsonScores,
    intermediates: JsonIntermediates,
    counts: crate::delta::ChangeCounts,
    per_dialogue: Vec<JsonDialogue<'a>>,
}

/// Serializes a report. Output is byte-identical for identical input.
pub fn write_report(report: &MetricReport, format: ReportFormat, style: NumberStyle) -> String {
    match format {
        ReportFormat::Json => report_json(report, style),
        ReportFormat::Csv => report_csv(report, style),
        ReportFormat::Markdown => report_markdown(report, style),
    }
}

fn report_json(report: &MetricReport, style: NumberStyle) -> String {
    let i = &report.intermediates;
    let doc = JsonReport {
        format_version: FORMAT_VERSION,
        scale: if style.percent { "percent" } else { "fraction" },
        config: JsonConfig {
            lambda: Fixed(fixed(report.config.lambda)),
            value_weight: Fixed(fixed(report.config.value_weight)),
            label_weight: Fixed(fixed(report.config.label_weight)),
            aggregation: report.config.aggregation.to_string(),
            score_deactivations: report.config.score_deactivations,
        },
        ontology_size: report.ontology_size,
        dialogues: report.dialogues,
        turns: report.turns,
        corpus: JsonScores::new(&report.corpus, style),
        intermediates: JsonIntermediates {
            value_precision: style.json_score(i.value_precision),
            value_recall: style.json_score(i.value_recall),
            label_precision: style.json_score(i.label_precision),
            label_recall: style.json_score(i.label_recall),
        },
        counts: report.counts,
        per_dialogue: report
            .per_dialogue
            .iter()
            .map(|d| JsonDialogue {
                dialogue_id: &d.dialogue_id,
                turns: d.turns,
                scores: JsonScores::new(&d.scores, style),
                counts: d.counts,
            })
            .collect(),
    };
    to_pretty_json(&doc)
}

const CSV_HEADER: [&str; 12] = [
    "dialogue_id",
    "turns",
    "jga",
    "sa",
    "aga",
    "rsa",
    "fga",
    "gca",
    "missed",
    "wrong",
    "overshot",
    "correct",
];

/// Id of the corpus-level row in CSV output.
pub const CORPUS_ROW: &str = "__corpus__";

fn report_csv(report: &MetricReport, style: NumberStyle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |id: &str, turns: usize, s: &Scores, c: &crate::delta::ChangeCounts| {
        vec![
            id.to_owned(),
            turns.to_string(),
            style.score(s.jga),
            style.score(s.sa),
            style.opt_score(s.aga),
            style.score(s.rsa),
            style.score(s.fga),
            style.score(s.gca),
            c.missed.to_string(),
            c.wrong.to_string(),
            c.overshot.to_string(),
            c.correct.to_string(),
        ]
    };
    w.write_record(CSV_HEADER).expect("in-memory write");
    for d in &report.per_dialogue {
        w.write_record(row(&d.dialogue_id, d.turns, &d.scores, &d.counts))
            .expect("in-memory write");
    }
    w.write_record(row(CORPUS_ROW, report.turns, &report.corpus, &report.counts))
        .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn report_markdown(report: &MetricReport, style: NumberStyle) -> String {
    let mut out = String::new();
    let c = &report.config;
    let unit = if style.percent { " (%)" } else { "" };
    let _ = writeln!(out, "# DST evaluation report\n");
    let _ = writeln!(
        out,
        "{} dialogues, {} turns, ontology size {}. lambda={}, value weight={}, label weight={}, aggregation={}.\n",
        report.dialogues,
        report.turns,
        report.ontology_size,
        fixed(c.lambda),
        fixed(c.value_weight),
        fixed(c.label_weight),
        c.aggregation
    );
    let _ = writeln!(out, "## Corpus scores{unit}\n");
    let _ = writeln!(out, "| metric | score |\n|---|---:|");
    for m in crate::model::Metric::ALL {
        let v = report.corpus.get(m);
        let cell = v.map(|x| style.score(x)).unwrap_or_else(|| "undefined".into());
        let _ = writeln!(out, "| {} | {} |", m.name().to_uppercase(), cell);
    }
    let i = &report.intermediates;
    let k = &report.counts;
    let _ = writeln!(out, "\n## Change counts\n");
    let _ = writeln!(
        out,
        "| missed | wrong | overshot | correct | V_P | V_R | L_P | L_R |\n|---:|---:|---:|---:|---:|---:|---:|---:|"
    );
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} | {} | {} | {} |",
        k.missed,
        k.wrong,
        k.overshot,
        k.correct,
        style.score(i.value_precision),
        style.score(i.value_recall),
        style.score(i.label_precision),
        style.score(i.label_recall)
    );
    let _ = writeln!(out, "\n## Per dialogue{unit}\n");
    let _ = writeln!(
        out,
        "| dialogue | turns | JGA | SA | AGA | RSA | FGA | GCA |\n|---|---:|---:|---:|---:|---:|---:|---:|"
    );
    for d in &report.per_dialogue {
        let s = &d.scores;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            md_escape(&d.dialogue_id),
            d.turns,
            style.score(s.jga),
            style.score(s.sa),
            s.aga.map(|x| style.score(x)).unwrap_or_else(|| "-".into()),
            style.score(s.rsa),
            style.score(s.fga),
            style.score(s.gca)
        );
    }
    out
}

#[derive(Serialize)]
struct JsonDisagreement<'a> {
    rank: usize,
    dialogue_id: &'a str,
    score_a: Fixed,
    score_b: Fixed,
    gap: Fixed,
}

/// Disagreement ranking as JSON, CSV or Markdown.
pub fn write_ranking(
    rows: &[crate::analysis::Disagreement],
    metric_a: &str,
    metric_b: &str,
    format: ReportFormat,
    style: NumberStyle,
) -> String {
    match format {
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                metric_a: &'a str,
                metric_b: &'a str,
                ranking: Vec<JsonDisagreement<'a>>,
            }
            to_pretty_json(&Doc {
                metric_a,
                metric_b,
                ranking: rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| JsonDisagreement {
                        rank: i + 1,
                        dialogue_id: &r.dialogue_id,
                        score_a: style.json_score(r.score_a),
                        score_b: style.json_score(r.score_b),
                        gap: style.json_score(r.gap),
                    })
                    .collect(),
            })
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["rank", "dialogue_id", metric_a, metric_b, "gap"])
                .expect("in-memory write");
            for (i, r) in rows.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    r.dialogue_id.clone(),
                    style.score(r.score_a),
                    style.score(r.score_b),
                    style.score(r.gap),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| rank | dialogue | {metric_a} | {metric_b} | gap |\n|---:|---|---:|---:|---:|");
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    i + 1,
                    md_escape(&r.dialogue_id),
                    style.score(r.score_a),
                    style.score(r.score_b),
                    style.score(r.gap)
                );
            }
            out
        }
    }
}

/// Trait table and correlation analysis.
pub fn write_analysis(
    traits: &[crate::analysis::TraitScores],
    analysis: Option<&crate::analysis::TraitAnalysis>,
    format: ReportFormat,
) -> String {
    let num = |x: Option<f64>| x.map(fixed).unwrap_or_default();
    match format {
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                dialogue_id: &'a str,
                turns: usize,
                mistakes: usize,
                tail_orientation: Option<Fixed>,
                non_uniformity: Option<Fixed>,
            }
            #[derive(Serialize)]
            struct Corr {
                r#trait: String,
                metric: String,
                r: Option<Fixed>,
            }
            #[derive(Serialize)]
            struct Cmp {
                r#trait: String,
                metric_a: String,
                metric_b: String,
                r_a: Fixed,
                r_b: Fixed,
                r_ab: Fixed,
                samples: usize,
                difference: Fixed,
                lower: Fixed,
                upper: Fixed,
                confidence: Fixed,
                significant: bool,
            }
            #[derive(Serialize)]
            struct Doc<'a> {
                traits: Vec<Row<'a>>,
                #[serde(skip_serializing_if = "Option::is_none")]
                samples: Option<usize>,
                #[serde(skip_serializing_if = "Vec::is_empty")]
                correlations: Vec<Corr>,
                #[serde(skip_serializing_if = "Vec::is_empty")]
                comparisons: Vec<Cmp>,
            }
            let f = |x: f64| Fixed(fixed(x));
            to_pretty_json(&Doc {
                traits: traits
                    .iter()
                    .map(|t| Row {
                        dialogue_id: &t.dialogue_id,
                        turns: t.turns,
                        mistakes: t.mistakes,
                        tail_orientation: t.tail_orientation.map(f),
                        non_uniformity: t.non_uniformity.map(f),
                    })
                    .collect(),
                samples: analysis.map(|a| a.samples),
                correlations: analysis
                    .map(|a| {
                        a.correlations
                            .iter()
                            .map(|c| Corr {
                                r#trait: c.trait_name.to_string(),
                                metric: c.metric.to_string(),
                                r: c.r.map(f),
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
                comparisons: analysis
                    .map(|a| {
                        a.comparisons
                            .iter()
                            .map(|c| Cmp {
                                r#trait: c.trait_name.to_string(),
                                metric_a: c.metric_a.to_string(),
                                metric_b: c.metric_b.to_string(),
                                r_a: f(c.r_a),
                                r_b: f(c.r_b),
                                r_ab: f(c.r_ab),
                                samples: c.samples,
                                difference: f(c.interval.difference),
                                lower: f(c.interval.lower),
                                upper: f(c.interval.upper),
                                confidence: f(c.interval.confidence),
                                significant: c.interval.significant,
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            })
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["dialogue_id", "turns", "mistakes", "tail_orientation", "non_uniformity"])
                .expect("in-memory write");
            for t in traits {
                w.write_record([
                    t.dialogue_id.clone(),
                    t.turns.to_string(),
                    t.mistakes.to_string(),
                    num(t.tail_orientation),
                    num(t.non_uniformity),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            if let Some(a) = analysis {
                let _ = writeln!(out, "## Trait correlations ({} dialogues with mistakes)\n", a.samples);
                let _ = writeln!(out, "| trait | metric | pearson r |\n|---|---|---:|");
                for c in &a.correlations {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} |",
                        c.trait_name.name().to_uppercase(),
                        c.metric.name().to_uppercase(),
                        c.r.map(fixed).unwrap_or_else(|| "undefined".into())
                    );
                }
                if !a.comparisons.is_empty() {
                    let _ = writeln!(
                        out,
                        "\n| trait | r(A) - r(B) | difference | lower | upper | significant |\n|---|---|---:|---:|---:|---|"
                    );
                    for c in &a.comparisons {
                        let _ = writeln!(
                            out,
                            "| {} | {} - {} | {} | {} | {} | {} |",
                            c.trait_name.name().to_uppercase(),
                            c.metric_a.name().to_uppercase(),
                            c.metric_b.name().to_uppercase(),
                            fixed(c.interval.difference),
                            fixed(c.interval.lower),
                            fixed(c.interval.upper),
                            if c.interval.significant { "yes" } else { "no" }
                        );
                    }
                }
                out.push('\n');
            }
            let _ = writeln!(out, "## Mistake traits\n");
            let _ = writeln!(out, "| dialogue | turns | mistakes | TO | NU |\n|---|---:|---:|---:|---:|");
            for t in traits {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    md_escape(&t.dialogue_id),
                    t.turns,
                    t.mistakes,
                    t.tail_orientation.map(fixed).unwrap_or_else(|| "-".into()),
                    t.non_uniformity.map(fixed).unwrap_or_else(|| "-".into())
                );
            }
            out
        }
    }
}
