//! Domain types: slots, values, belief states, dialogues, predictions,
//! the slot ontology, metric configuration and evaluation reports.
//!
//! A [`BeliefState`] stores only *active* slots. A slot whose value
//! normalizes to an inactive marker ("none", "not mentioned", empty) is
//! simply absent, so state equality is plain map equality.

use std::collections::{btree_map, BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::delta::ChangeCounts;
use crate::error::{Error, Result};
use crate::metrics::IntermediateScores;

/// Separator between the domain and slot parts of a [`SlotName`].
pub const SLOT_SEPARATOR: char = '-';

/// Values that mean "this slot is not active".
pub const DEFAULT_INACTIVE: [&str; 3] = ["none", "not mentioned", ""];

/// Canonical `domain-slot` name, e.g. `hotel-area`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SlotName(String);

impl SlotName {
    /// Normalizes (trim, lowercase, collapse whitespace) and validates.
    pub fn parse(raw: &str) -> Result<Self> {
        let name = collapse_whitespace(raw);
        let mut parts = name.split(SLOT_SEPARATOR);
        let ok = match (parts.next(), parts.next(), parts.next()) {
            (Some(domain), Some(slot), None) => {
                !domain.trim().is_empty() && !slot.trim().is_empty()
            }
            _ => false,
        };
        if ok {
            Ok(SlotName(name))
        } else {
            Err(Error::InvalidSlotName(raw.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn domain(&self) -> &str {
        self.0.split(SLOT_SEPARATOR).next().unwrap_or_default()
    }
}

impl TryFrom<String> for SlotName {
    type Error = Error;
    fn try_from(raw: String) -> Result<Self> {
        SlotName::parse(&raw)
    }
}

impl From<SlotName> for String {
    fn from(name: SlotName) -> String {
        name.0
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A normalized, active slot value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub struct SlotValue(String);

impl SlotValue {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<SlotValue> for String {
    fn from(value: SlotValue) -> String {
        value.0
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn collapse_whitespace(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Value normalization with a configurable inactive lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalizer {
    inactive: BTreeSet<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::with_inactive(DEFAULT_INACTIVE)
    }
}

impl Normalizer {
    /// Lexicon entries are themselves normalized, so `"Not  Mentioned"` works.
    pub fn with_inactive<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut inactive: BTreeSet<String> = words
            .into_iter()
            .map(|w| collapse_whitespace(w.as_ref()))
            .collect();
        inactive.insert(String::new());
        Self { inactive }
    }

    /// `None` means the slot is inactive.
    pub fn normalize(&self, raw: &str) -> Option<SlotValue> {
        let value = collapse_whitespace(raw);
        if self.inactive.contains(&value) {
            None
        } else {
            Some(SlotValue(value))
        }
    }

    pub fn is_inactive(&self, raw: &str) -> bool {
        self.normalize(raw).is_none()
    }
}

/// Normalizes with the default inactive lexicon.
pub fn normalize_value(raw: &str) -> Option<SlotValue> {
    Normalizer::default().normalize(raw)
}

/// The set of active slot-value pairs at one turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct BeliefState(BTreeMap<SlotName, SlotValue>);

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from raw pairs, dropping inactive values.
    ///
    /// A slot listed twice keeps its last value.
    pub fn from_raw<I, K, V>(pairs: I, normalizer: &Normalizer) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut state = BeliefState::new();
        for (slot, value) in pairs {
            let slot = SlotName::parse(slot.as_ref())?;
            match normalizer.normalize(value.as_ref()) {
                Some(value) => {
                    state.0.insert(slot, value);
                }
                None => {
                    state.0.remove(&slot);
                }
            }
        }
        Ok(state)
    }

    /// Convenience constructor with the default normalizer. Panics on an
    /// invalid slot name, so keep it to fixtures and tests.
    pub fn of<const N: usize>(pairs: [(&str, &str); N]) -> Self {
        Self::from_raw(pairs, &Normalizer::default()).expect("valid slot names")
    }

    pub fn insert(&mut self, slot: SlotName, value: SlotValue) -> Option<SlotValue> {
        self.0.insert(slot, value)
    }

    pub fn remove(&mut self, slot: &SlotName) -> Option<SlotValue> {
        self.0.remove(slot)
    }

    pub fn get(&self, slot: &SlotName) -> Option<&SlotValue> {
        self.0.get(slot)
    }

    pub fn contains_slot(&self, slot: &SlotName) -> bool {
        self.0.contains_key(slot)
    }

    /// True when `slot` is active with exactly `value`.
    pub fn contains_pair(&self, slot: &SlotName, value: &SlotValue) -> bool {
        self.0.get(slot) == Some(value)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, SlotName, SlotValue> {
        self.0.iter()
    }

    pub fn slots(&self) -> btree_map::Keys<'_, SlotName, SlotValue> {
        self.0.keys()
    }

    /// Number of pairs present in both states.
    pub fn shared_pairs(&self, other: &BeliefState) -> usize {
        self.iter()
            .filter(|(slot, value)| other.contains_pair(slot, value))
            .count()
    }
}

impl<'a> IntoIterator for &'a BeliefState {
    type Item = (&'a SlotName, &'a SlotValue);
    type IntoIter = btree_map::Iter<'a, SlotName, SlotValue>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl FromIterator<(SlotName, SlotValue)> for BeliefState {
    fn from_iter<T: IntoIterator<Item = (SlotName, SlotValue)>>(iter: T) -> Self {
        BeliefState(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub system_utterance: String,
    pub user_utterance: String,
    /// Full accumulated state at this turn.
    pub gold: BeliefState,
}

impl Turn {
    pub fn new(gold: BeliefState) -> Self {
        Self {
            system_utterance: String::new(),
            user_utterance: String::new(),
            gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, turns: Vec<Turn>) -> Result<Self> {
        let id = id.into();
        if turns.is_empty() {
            return Err(Error::InvalidArgument(format!("dialogue `{id}` has no turns")));
        }
        Ok(Self { id, turns })
    }

    /// Dialogue from gold states alone, with empty utterances.
    pub fn from_states(id: impl Into<String>, states: Vec<BeliefState>) -> Result<Self> {
        Self::new(id, states.into_iter().map(Turn::new).collect())
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn gold_states(&self) -> Vec<BeliefState> {
        self.turns.iter().map(|t| t.gold.clone()).collect()
    }
}

/// Cumulative predicted states, one per turn of the referenced dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub dialogue_id: String,
    pub states: Vec<BeliefState>,
}

impl Prediction {
    pub fn new(dialogue_id: impl Into<String>, states: Vec<BeliefState>) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            states,
        }
    }
}

/// Ordered dialogues with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    dialogues: Vec<Dialogue>,
    index: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut dupes = Vec::new();
        for (i, d) in dialogues.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                dupes.push(crate::error::Diagnostic::new(
                    "E_DUPLICATE_ID",
                    d.id.clone(),
                    "duplicate dialogue id",
                ));
            }
        }
        if !dupes.is_empty() {
            return Err(Error::Invalid(dupes));
        }
        Ok(Self {
            name: name.into(),
            dialogues,
            index,
        })
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn get(&self, id: &str) -> Option<&Dialogue> {
        self.index.get(id).map(|&i| &self.dialogues[i])
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn total_turns(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }
}

/// All slot names of the dataset; `K` in slot accuracy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Ontology {
    slots: BTreeSet<SlotName>,
}

impl Ontology {
    pub fn new<I: IntoIterator<Item = SlotName>>(slots: I) -> Self {
        Self {
            slots: slots.into_iter().collect(),
        }
    }

    pub fn parse<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        names
            .into_iter()
            .map(|n| SlotName::parse(n.as_ref()))
            .collect::<Result<BTreeSet<_>>>()
            .map(|slots| Self { slots })
    }

    /// Every slot that is active anywhere in the corpus gold states.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::new(
            corpus
                .dialogues()
                .iter()
                .flat_map(|d| d.turns.iter())
                .flat_map(|t| t.gold.slots().cloned()),
        )
    }

    pub fn contains(&self, slot: &SlotName) -> bool {
        self.slots.contains(slot)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SlotName> {
        self.slots.iter()
    }

    /// First slot of `state` missing from the ontology, if any.
    pub fn first_unknown<'a>(&self, state: &'a BeliefState) -> Option<&'a SlotName> {
        state.slots().find(|s| !self.contains(s))
    }
}

/// How corpus scores are combined from turns and dialogues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Turn metrics averaged over all corpus turns; GCA from summed counts.
    #[default]
    Pooled,
    /// Every metric computed per dialogue, then averaged over dialogues.
    #[serde(alias = "per_dialogue", alias = "per-dialogue-mean")]
    PerDialogue,
    /// Turn metrics averaged over all corpus turns; GCA averaged over dialogues.
    #[serde(alias = "micro-turn")]
    Micro,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Aggregation::Pooled),
            "per-dialogue" | "per-dialogue-mean" | "per_dialogue" => Ok(Aggregation::PerDialogue),
            "micro" | "micro-turn" => Ok(Aggregation::Micro),
            other => Err(Error::InvalidConfig(format!("unknown aggregation `{other}`"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Pooled => "pooled",
            Aggregation::PerDialogue => "per-dialogue",
            Aggregation::Micro => "micro",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// FGA decay ratio, in (0, 1].
    pub lambda: f64,
    /// Harmonic-mean weight of value precision and value recall.
    pub value_weight: f64,
    /// Harmonic-mean weight of label precision and label recall.
    pub label_weight: f64,
    pub aggregation: Aggregation,
    /// Whether active-to-inactive transitions count as changes.
    pub score_deactivations: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            value_weight: 0.9,
            label_weight: 0.1,
            aggregation: Aggregation::Pooled,
            score_deactivations: true,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be in (0, 1], got {}",
                self.lambda
            )));
        }
        let weights_ok = self.value_weight >= 0.0
            && self.label_weight >= 0.0
            && self.value_weight.is_finite()
            && self.label_weight.is_finite()
            && self.value_weight + self.label_weight > 0.0;
        if !weights_ok {
            return Err(Error::InvalidConfig(format!(
                "weights must be non-negative with a positive sum, got value={} label={}",
                self.value_weight, self.label_weight
            )));
        }
        Ok(())
    }

    /// Weights for (V_P, V_R, L_P, L_R).
    pub fn weights(&self) -> [f64; 4] {
        let (v, l) = (self.value_weight, self.label_weight);
        [v, v, l, l]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Jga,
    Sa,
    Aga,
    Rsa,
    Fga,
    Gca,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Jga,
        Metric::Sa,
        Metric::Aga,
        Metric::Rsa,
        Metric::Fga,
        Metric::Gca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Jga => "jga",
            Metric::Sa => "sa",
            Metric::Aga => "aga",
            Metric::Rsa => "rsa",
            Metric::Fga => "fga",
            Metric::Gca => "gca",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One score per metric. Only AGA can be undefined (no gold-active turn).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub jga: f64,
    pub sa: f64,
    pub aga: Option<f64>,
    pub rsa: f64,
    pub fga: f64,
    pub gca: f64,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Jga => Some(self.jga),
            Metric::Sa => Some(self.sa),
            Metric::Aga => self.aga,
            Metric::Rsa => Some(self.rsa),
            Metric::Fga => Some(self.fga),
            Metric::Gca => Some(self.gca),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DialogueScores {
    pub dialogue_id: String,
    pub turns: usize,
    pub scores: Scores,
    pub counts: ChangeCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub config: MetricConfig,
    pub ontology_size: usize,
    pub dialogues: usize,
    pub turns: usize,
    pub corpus: Scores,
    /// Intermediates of the summed counts, regardless of aggregation.
    pub intermediates: IntermediateScores,
    pub counts: ChangeCounts,
    pub per_dialogue: Vec<DialogueScores>,
}

impl MetricReport {
    pub fn dialogue(&self, id: &str) -> Option<&DialogueScores> {
        self.per_dialogue.iter().find(|d| d.dialogue_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_value(" North ").unwrap().as_str(), "north");
        assert_eq!(normalize_value("none"), None);
        assert_eq!(normalize_value("Not  Mentioned"), None);
        assert_eq!(normalize_value("   "), None);
        assert_eq!(normalize_value("dontcare").unwrap().as_str(), "dontcare");
        assert_eq!(
            normalize_value("  Cheap\t  Italian ").unwrap().as_str(),
            "cheap italian"
        );
    }

    #[test]
    fn custom_lexicon() {
        let n = Normalizer::with_inactive(["none", "NULL"]);
        assert!(n.is_inactive("null"));
        assert!(n.is_inactive(""));
        assert!(!n.is_inactive("not mentioned"));
    }

    #[test]
    fn slot_names() {
        assert_eq!(SlotName::parse(" Hotel-Area ").unwrap().as_str(), "hotel-area");
        assert_eq!(
            SlotName::parse("hotel-book stay").unwrap().domain(),
            "hotel"
        );
        for bad in ["", "hotel", "hotel-", "-area", "a-b-c"] {
            assert!(SlotName::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn state_drops_inactive_values() {
        let s = BeliefState::of([("hotel-area", "north"), ("hotel-stars", "none")]);
        assert_eq!(s.len(), 1);
        let later = BeliefState::of([("hotel-area", "north"), ("hotel-area", "not mentioned")]);
        assert!(later.is_empty());
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let d = Dialogue::from_states("x", vec![BeliefState::new()]).unwrap();
        let err = Corpus::new("c", vec![d.clone(), d]).unwrap_err();
        assert!(err.to_string().contains('x'));
        assert!(Dialogue::from_states("e", vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::default().validate().is_ok());
        let bad = |f: fn(&mut MetricConfig)| {
            let mut c = MetricConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.lambda = 0.0));
        assert!(bad(|c| c.lambda = 1.5));
        assert!(bad(|c| c.value_weight = -1.0));
        assert!(bad(|c| {
            c.value_weight = 0.0;
            c.label_weight = 0.0
        }));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("per-dialogue".parse::<Aggregation>().unwrap(), Aggregation::PerDialogue);
    }
}
