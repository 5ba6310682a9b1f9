//! Seeded synthetic predictions and a brute-force change-count oracle.
//!
//! [`perturb`] starts from a perfect copy of the gold state changes and
//! corrupts a fraction of them. Where corrupted changes land in a dialogue
//! is steered by `tail_bias` (late vs. early) and `concentration` (few
//! turns vs. spread out), which makes mistake timing and clustering
//! controllable for sensitivity studies.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delta::{state_delta, ChangeCounts};
use crate::error::{Error, Result};
use crate::model::{
    BeliefState, Corpus, Dialogue, Normalizer, Ontology, Prediction, SlotName, SlotValue,
};

/// Probabilities of each corruption kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindMix {
    pub missed: f64,
    pub wrong: f64,
    pub overshot: f64,
}

impl KindMix {
    pub fn new(missed: f64, wrong: f64, overshot: f64) -> Self {
        Self {
            missed,
            wrong,
            overshot,
        }
    }

    pub fn missed_only() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }
}

impl Default for KindMix {
    fn default() -> Self {
        Self::new(0.4, 0.4, 0.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Fraction of gold value changes to corrupt, in [0, 1].
    pub error_rate: f64,
    pub kind_mix: KindMix,
    /// 0 places corruptions uniformly; positive pushes them late,
    /// negative early.
    pub tail_bias: f64,
    /// 0 spreads corruptions; larger values cluster them in fewer turns.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            error_rate: 0.2,
            kind_mix: KindMix::default(),
            tail_bias: 0.0,
            concentration: 0.0,
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad(format!("error_rate must be in [0, 1], got {}", self.error_rate));
        }
        let KindMix {
            missed,
            wrong,
            overshot,
        } = self.kind_mix;
        if [missed, wrong, overshot].iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return bad("kind_mix probabilities must be non-negative".into());
        }
        if ((missed + wrong + overshot) - 1.0).abs() > 1e-6 {
            return bad(format!(
                "kind_mix must sum to 1, got {}",
                missed + wrong + overshot
            ));
        }
        if !self.tail_bias.is_finite() {
            return bad("tail_bias must be finite".into());
        }
        if !(self.concentration >= 0.0 && self.concentration.is_finite()) {
            return bad(format!("concentration must be >= 0, got {}", self.concentration));
        }
        Ok(())
    }
}

/// Values observed per slot in the gold corpus; replacement candidates
/// for wrong and overshot predictions.
#[derive(Debug, Clone, Default)]
pub struct ValuePool {
    values: BTreeMap<SlotName, Vec<SlotValue>>,
}

impl ValuePool {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut sets: BTreeMap<SlotName, BTreeSet<SlotValue>> = BTreeMap::new();
        for turn in corpus.dialogues().iter().flat_map(|d| &d.turns) {
            for (slot, value) in &turn.gold {
                sets.entry(slot.clone()).or_default().insert(value.clone());
            }
        }
        Self {
            values: sets
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        }
    }

    fn different_value(&self, slot: &SlotName, avoid: Option<&SlotValue>, rng: &mut impl Rng) -> SlotValue {
        let candidates: Vec<&SlotValue> = self
            .values
            .get(slot)
            .map(|vs| vs.iter().filter(|v| Some(*v) != avoid).collect())
            .unwrap_or_default();
        if candidates.is_empty() {
            let base = avoid.map(SlotValue::as_str).unwrap_or("value");
            return Normalizer::default()
                .normalize(&format!("not {base}"))
                .expect("non-empty");
        }
        candidates[rng.random_range(0..candidates.len())].clone()
    }
}

/// Stable 64-bit FNV-1a, used to derive per-dialogue seeds.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn dialogue_rng(seed: u64, dialogue_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(dialogue_id.as_bytes()).rotate_left(17))
}

/// Index drawn with probability proportional to `weights`.
fn weighted_index(weights: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return Some(i);
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Corruption {
    Missed,
    Wrong,
    Overshot,
}

/// A gold change the perturbation may corrupt.
struct Change {
    turn: usize,
    slot: SlotName,
    value: SlotValue,
}

/// Predicted states for one dialogue; deterministic in `(spec.seed, id)`.
pub fn perturb_dialogue(
    dialogue: &Dialogue,
    ontology: &Ontology,
    pool: &ValuePool,
    spec: &PerturbationSpec,
) -> Result<Prediction> {
    spec.validate()?;
    let n = dialogue.len();
    let gold: Vec<&BeliefState> = dialogue.turns.iter().map(|t| &t.gold).collect();

    // Per-turn edit script, initially the gold changes.
    let empty = BeliefState::new();
    let mut script: Vec<Vec<(SlotName, Option<SlotValue>)>> = Vec::with_capacity(n);
    let mut changes = Vec::new();
    for t in 0..n {
        let prev = if t == 0 { &empty } else { gold[t - 1] };
        let delta = state_delta(prev, gold[t]);
        for (slot, value) in delta.iter() {
            if let Some(value) = value {
                changes.push(Change {
                    turn: t,
                    slot: slot.clone(),
                    value: value.clone(),
                });
            }
        }
        script.push(delta.pairs().to_vec());
    }

    let mut rng = dialogue_rng(spec.seed, &dialogue.id);
    let budget = (spec.error_rate * changes.len() as f64).round() as usize;

    let position = |t: usize| if n > 1 { t as f64 / (n - 1) as f64 - 0.5 } else { 0.0 };
    let tail: Vec<f64> = (0..n).map(|t| (spec.tail_bias * position(t)).exp()).collect();
    let mut hits = vec![0usize; n];
    let turn_weight = |t: usize, hits: &[usize]| tail[t] * (1.0 + spec.concentration * hits[t] as f64);

    let mut spare_slots: Vec<&SlotName> = ontology
        .iter()
        .filter(|s| gold.iter().all(|g| !g.contains_slot(s)))
        .collect();
    let mut remaining: Vec<usize> = (0..changes.len()).collect();
    let mix = spec.kind_mix;

    for _ in 0..budget {
        let roll = rng.random::<f64>();
        let mut kind = if roll < mix.missed {
            Corruption::Missed
        } else if roll < mix.missed + mix.wrong {
            Corruption::Wrong
        } else {
            Corruption::Overshot
        };
        if kind == Corruption::Overshot && spare_slots.is_empty() {
            kind = Corruption::Wrong;
        }

        match kind {
            Corruption::Overshot => {
                let weights: Vec<f64> = (0..n).map(|t| turn_weight(t, &hits)).collect();
                let Some(t) = weighted_index(&weights, &mut rng) else { break };
                let slot = spare_slots.remove(rng.random_range(0..spare_slots.len())).clone();
                let value = pool.different_value(&slot, None, &mut rng);
                script[t].push((slot, Some(value)));
                hits[t] += 1;
            }
            Corruption::Missed | Corruption::Wrong => {
                let weights: Vec<f64> = remaining
                    .iter()
                    .map(|&i| turn_weight(changes[i].turn, &hits))
                    .collect();
                let Some(pick) = weighted_index(&weights, &mut rng) else { break };
                let change = &changes[remaining.swap_remove(pick)];
                let edits = &mut script[change.turn];
                let at = edits
                    .iter()
                    .position(|(s, _)| *s == change.slot)
                    .expect("gold change present in script");
                if kind == Corruption::Missed {
                    edits.remove(at);
                } else {
                    let value = pool.different_value(&change.slot, Some(&change.value), &mut rng);
                    edits[at].1 = Some(value);
                }
                hits[change.turn] += 1;
            }
        }
    }

    let mut states = Vec::with_capacity(n);
    let mut state = BeliefState::new();
    for edits in script {
        for (slot, value) in edits {
            match value {
                Some(v) => {
                    state.insert(slot, v);
                }
                None => {
                    state.remove(&slot);
                }
            }
        }
        states.push(state.clone());
    }
    Ok(Prediction::new(dialogue.id.clone(), states))
}

/// Synthetic predictions for every dialogue of `corpus`.
pub fn perturb(corpus: &Corpus, ontology: &Ontology, spec: &PerturbationSpec) -> Result<Vec<Prediction>> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot perturb an empty corpus".into()));
    }
    let pool = ValuePool::from_corpus(corpus);
    corpus
        .dialogues()
        .iter()
        .map(|d| perturb_dialogue(d, ontology, &pool, spec))
        .collect()
}

/// Re-derives the change tally from full states, slot by slot, without
/// delta sets. Test oracle for [`crate::delta::count_changes`].
pub fn oracle_counts(gold: &[BeliefState], pred: &[BeliefState]) -> Result<ChangeCounts> {
    oracle_counts_with(gold, pred, true)
}

pub fn oracle_counts_with(
    gold: &[BeliefState],
    pred: &[BeliefState],
    score_deactivations: bool,
) -> Result<ChangeCounts> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            dialogue_id: None,
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let empty = BeliefState::new();
    let (mut m, mut w, mut o, mut c) = (0, 0, 0, 0);
    for t in 0..gold.len() {
        let (g0, p0) = if t == 0 { (&empty, &empty) } else { (&gold[t - 1], &pred[t - 1]) };
        let (g1, p1) = (&gold[t], &pred[t]);
        let slots: BTreeSet<&SlotName> = [g0, g1, p0, p1].iter().flat_map(|s| s.slots()).collect();
        for slot in slots {
            let (gb, ga) = (g0.get(slot), g1.get(slot));
            let (pb, pa) = (p0.get(slot), p1.get(slot));
            let changed = |before: Option<&SlotValue>, after: Option<&SlotValue>| {
                before != after && (score_deactivations || after.is_some())
            };
            if changed(gb, ga) {
                // Scored against the gold change.
                match (ga, pa) {
                    (Some(g), Some(p)) if g == p => c += 1,
                    (Some(_), Some(_)) => w += 1,
                    (Some(_), None) => m += 1,
                    (None, None) => c += 1,
                    (None, Some(_)) => m += 1,
                }
            } else if changed(pb, pa) {
                // Prediction changed while gold did not.
                match (pa, ga) {
                    (Some(_), None) => o += 1,
                    (Some(p), Some(g)) if p == g => c += 1,
                    (Some(_), Some(_)) => w += 1,
                    (None, Some(_)) => w += 1,
                    (None, None) => c += 1,
                }
            }
        }
    }
    Ok(ChangeCounts::new(m, w, o, c))
}

/// Shape of a generated gold corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusShape {
    pub dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Slots that gold may activate.
    pub active_slots: usize,
    /// Extra ontology slots never active in gold.
    pub spare_slots: usize,
    pub values_per_slot: usize,
    /// Expected new gold values per turn.
    pub changes_per_turn: f64,
    /// Probability per turn that one active slot is dropped.
    pub deactivation_rate: f64,
    pub seed: u64,
}

impl Default for CorpusShape {
    fn default() -> Self {
        Self {
            dialogues: 100,
            min_turns: 4,
            max_turns: 12,
            active_slots: 12,
            spare_slots: 8,
            values_per_slot: 5,
            changes_per_turn: 1.0,
            deactivation_rate: 0.0,
            seed: 0,
        }
    }
}

fn slot_names(prefix: &str, count: usize) -> Vec<SlotName> {
    (0..count)
        .map(|i| SlotName::parse(&format!("{prefix}-s{i}")).expect("valid slot name"))
        .collect()
}

/// Generates a random gold corpus and its ontology.
pub fn generate_corpus(shape: &CorpusShape) -> Result<(Corpus, Ontology)> {
    if shape.min_turns == 0 || shape.max_turns < shape.min_turns || shape.active_slots == 0 {
        return Err(Error::InvalidArgument("invalid corpus shape".into()));
    }
    let active = slot_names("gold", shape.active_slots);
    let spare = slot_names("spare", shape.spare_slots);
    let values: Vec<SlotValue> = (0..shape.values_per_slot.max(1))
        .map(|i| Normalizer::default().normalize(&format!("v{i}")).expect("non-empty"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let mut dialogues = Vec::with_capacity(shape.dialogues);
    for d in 0..shape.dialogues {
        let n = rng.random_range(shape.min_turns..=shape.max_turns);
        let mut state = BeliefState::new();
        let mut states = Vec::with_capacity(n);
        for _ in 0..n {
            if !state.is_empty() && rng.random::<f64>() < shape.deactivation_rate {
                let victim = state.slots().nth(rng.random_range(0..state.len())).cloned();
                if let Some(v) = victim {
                    state.remove(&v);
                }
            }
            // Poisson-ish count of new values via repeated Bernoulli halves.
            let mut budget = shape.changes_per_turn;
            while budget > 0.0 {
                let p = budget.min(1.0);
                budget -= 1.0;
                if rng.random::<f64>() < p {
                    let slot = active[rng.random_range(0..active.len())].clone();
                    let value = values[rng.random_range(0..values.len())].clone();
                    state.insert(slot, value);
                }
            }
            states.push(state.clone());
        }
        dialogues.push(Dialogue::from_states(format!("syn-{d:05}"), states)?);
    }
    let ontology = Ontology::new(active.into_iter().chain(spare));
    Ok((Corpus::new("synthetic", dialogues)?, ontology))
}

/// Random cumulative state sequence: each turn every slot may keep its
/// value, take a new one, or (when `deactivate` is set) become inactive.
pub fn random_states(
    rng: &mut impl Rng,
    turns: usize,
    slots: usize,
    values: usize,
    deactivate: bool,
) -> Vec<BeliefState> {
    let names = slot_names("dom", slots);
    let vals: Vec<SlotValue> = (0..values.max(1))
        .map(|i| Normalizer::default().normalize(&format!("v{i}")).expect("non-empty"))
        .collect();
    let mut state = BeliefState::new();
    (0..turns)
        .map(|_| {
            for slot in &names {
                let roll = rng.random::<f64>();
                if roll < 0.3 {
                    state.insert(slot.clone(), vals[rng.random_range(0..vals.len())].clone());
                } else if deactivate && roll < 0.4 {
                    state.remove(slot);
                }
            }
            state.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delta::count_changes;

    fn small_corpus() -> (Corpus, Ontology) {
        generate_corpus(&CorpusShape {
            dialogues: 40,
            seed: 7,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_error_rate_copies_gold() {
        let (corpus, ontology) = small_corpus();
        let spec = PerturbationSpec {
            error_rate: 0.0,
            ..Default::default()
        };
        let preds = perturb(&corpus, &ontology, &spec).unwrap();
        for (d, p) in corpus.dialogues().iter().zip(&preds) {
            assert_eq!(d.gold_states(), p.states);
        }
    }

    #[test]
    fn all_missed_gives_zero_correct() {
        let (corpus, ontology) = small_corpus();
        let spec = PerturbationSpec {
            error_rate: 1.0,
            kind_mix: KindMix::missed_only(),
            ..Default::default()
        };
        let preds = perturb(&corpus, &ontology, &spec).unwrap();
        for (d, p) in corpus.dialogues().iter().zip(&preds) {
            let counts = count_changes(&d.gold_states(), &p.states).unwrap().counts;
            assert_eq!(counts.correct, 0, "{}", d.id);
            assert!(p.states.iter().all(BeliefState::is_empty));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (corpus, ontology) = small_corpus();
        let spec = PerturbationSpec {
            error_rate: 0.5,
            seed: 42,
            concentration: 2.0,
            tail_bias: 1.5,
            ..Default::default()
        };
        let a = perturb(&corpus, &ontology, &spec).unwrap();
        let b = perturb(&corpus, &ontology, &spec).unwrap();
        assert_eq!(a, b);
        let c = perturb(&corpus, &ontology, &PerturbationSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn corrupts_the_requested_number_of_changes() {
        let (corpus, ontology) = small_corpus();
        let spec = PerturbationSpec {
            error_rate: 0.5,
            kind_mix: KindMix::new(0.5, 0.5, 0.0),
            seed: 3,
            ..Default::default()
        };
        let preds = perturb(&corpus, &ontology, &spec).unwrap();
        for (d, p) in corpus.dialogues().iter().zip(&preds) {
            let gold = d.gold_states();
            let perfect = count_changes(&gold, &gold).unwrap().counts.correct;
            let counts = count_changes(&gold, &p.states).unwrap().counts;
            assert!(counts.correct >= perfect - (perfect as f64 * 0.5).round() as u64);
        }
    }

    #[test]
    fn spec_validation() {
        let ok = PerturbationSpec::default();
        assert!(ok.validate().is_ok());
        assert!(PerturbationSpec { error_rate: 1.5, ..ok }.validate().is_err());
        assert!(PerturbationSpec { concentration: -1.0, ..ok }.validate().is_err());
        assert!(PerturbationSpec {
            kind_mix: KindMix::new(0.5, 0.5, 0.5),
            ..ok
        }
        .validate()
        .is_err());
        let empty = Corpus::new("e", vec![]).unwrap();
        assert!(perturb(&empty, &Ontology::default(), &ok).is_err());
    }

    #[test]
    fn oracle_agrees_on_fixed_cases() {
        let a = BeliefState::of([("taxi-a", "x")]);
        let ab = BeliefState::of([("taxi-a", "x"), ("taxi-b", "y")]);
        let mut gold = vec![a.clone(); 5];
        gold.push(ab);
        let p1 = vec![a; 6];
        assert_eq!(oracle_counts(&gold, &p1).unwrap(), ChangeCounts::new(1, 0, 0, 1));
        assert_eq!(oracle_counts(&gold, &gold).unwrap(), ChangeCounts::new(0, 0, 0, 2));
        assert!(oracle_counts(&gold, &gold[..2]).is_err());
    }
}
