use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One problem found while validating input. Loading collects every
/// diagnostic it can before failing, so users fix files in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    /// Where the problem is, e.g. `dialogues[3].turns[1].gold` or a dialogue id.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: &'static str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("sequence length mismatch{}: gold has {gold} turns, prediction has {pred}", fmt_ctx(.dialogue_id))]
    LengthMismatch {
        dialogue_id: Option<String>,
        gold: usize,
        pred: usize,
    },

    #[error("slot `{slot}` is not in the ontology{}", fmt_ctx(.dialogue_id))]
    UnknownSlot {
        slot: String,
        dialogue_id: Option<String>,
    },

    #[error("ontology is empty")]
    EmptyOntology,

    #[error("invalid slot name `{0}`: expected lowercase `domain-slot`")]
    InvalidSlotName(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no predictions to evaluate")]
    EmptyPredictions,

    #[error("{path}:{line}:{column}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: schema violation at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{} validation error(s):\n{}", .0.len(), fmt_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code, printed by the CLI as `error[CODE]`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "E_LENGTH",
            Error::UnknownSlot { .. } => "E_UNKNOWN_SLOT",
            Error::EmptyOntology => "E_EMPTY_ONTOLOGY",
            Error::InvalidSlotName(_) => "E_SLOT_NAME",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::InvalidArgument(_) => "E_ARGUMENT",
            Error::EmptyPredictions => "E_EMPTY_PREDICTIONS",
            Error::Parse { .. } => "E_PARSE",
            Error::Schema { .. } => "E_SCHEMA",
            Error::Invalid(_) => "E_INVALID",
            Error::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn length(dialogue_id: Option<&str>, gold: usize, pred: usize) -> Self {
        Error::LengthMismatch {
            dialogue_id: dialogue_id.map(str::to_owned),
            gold,
            pred,
        }
    }
}

fn fmt_ctx(dialogue_id: &Option<String>) -> String {
    match dialogue_id {
        Some(id) => format!(" in dialogue `{id}`"),
        None => String::new(),
    }
}

fn fmt_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}
