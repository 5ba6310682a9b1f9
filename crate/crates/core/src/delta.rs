//! Belief-state differences and the missed / wrong / overshot / correct
//! change tally that granular change accuracy is built on.
//!
//! Every turn, the slots whose value changed in the gold state are scored
//! against the predicted state, then the slots whose value changed in the
//! prediction are scored against the gold state. A slot already scored by
//! the gold pass is not scored again by the prediction pass, so a
//! disagreement is counted once, at the turn where it starts, and is not
//! re-counted on every later turn it persists.

use std::collections::BTreeSet;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{BeliefState, SlotName, SlotValue};

/// One changed slot. `None` means the slot became inactive.
pub type ChangedPair = (SlotName, Option<SlotValue>);

/// Pairs of `cur` not present in `prev`, plus deactivations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateDelta {
    pairs: Vec<ChangedPair>,
}

impl StateDelta {
    pub fn pairs(&self) -> &[ChangedPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ChangedPair> {
        self.pairs.iter()
    }

    pub fn contains_slot(&self, slot: &SlotName) -> bool {
        self.pairs.iter().any(|(s, _)| s == slot)
    }
}

/// Difference between two consecutive states, including deactivations.
pub fn state_delta(prev: &BeliefState, cur: &BeliefState) -> StateDelta {
    state_delta_with(prev, cur, true)
}

pub fn state_delta_with(
    prev: &BeliefState,
    cur: &BeliefState,
    include_deactivations: bool,
) -> StateDelta {
    let mut pairs: Vec<ChangedPair> = cur
        .iter()
        .filter(|(slot, value)| !prev.contains_pair(slot, value))
        .map(|(slot, value)| (slot.clone(), Some(value.clone())))
        .collect();
    if include_deactivations {
        let before = pairs.len();
        pairs.extend(
            prev.slots()
                .filter(|slot| !cur.contains_slot(slot))
                .map(|slot| (slot.clone(), None)),
        );
        if pairs.len() > before {
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }
    StateDelta { pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Missed,
    Wrong,
    Overshot,
    Correct,
}

impl ChangeKind {
    pub fn is_mistake(self) -> bool {
        self != ChangeKind::Correct
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeKind::Missed => "missed",
            ChangeKind::Wrong => "wrong",
            ChangeKind::Overshot => "overshot",
            ChangeKind::Correct => "correct",
        })
    }
}

/// A scored change: which slot, at which turn, with which outcome.
///
/// Events whose kind is not [`ChangeKind::Correct`] are the mistakes used
/// by the tail-orientation and non-uniformity measures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ChangeEvent {
    pub turn_index: usize,
    pub kind: ChangeKind,
    pub slot: SlotName,
}

/// Missed (M), wrong (W), overshot (O) and correct (C) tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Deserialize)]
pub struct ChangeCounts {
    pub missed: u64,
    pub wrong: u64,
    pub overshot: u64,
    pub correct: u64,
}

impl ChangeCounts {
    pub fn new(missed: u64, wrong: u64, overshot: u64, correct: u64) -> Self {
        Self {
            missed,
            wrong,
            overshot,
            correct,
        }
    }

    /// P = C + W + O.
    pub fn predictions(&self) -> u64 {
        self.correct + self.wrong + self.overshot
    }

    /// G = C + W + M.
    pub fn gold(&self) -> u64 {
        self.correct + self.wrong + self.missed
    }

    pub fn mistakes(&self) -> u64 {
        self.missed + self.wrong + self.overshot
    }

    pub fn is_empty(&self) -> bool {
        *self == ChangeCounts::default()
    }

    fn record(&mut self, kind: ChangeKind) {
        match kind {
            ChangeKind::Missed => self.missed += 1,
            ChangeKind::Wrong => self.wrong += 1,
            ChangeKind::Overshot => self.overshot += 1,
            ChangeKind::Correct => self.correct += 1,
        }
    }
}

impl std::ops::AddAssign for ChangeCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.missed += rhs.missed;
        self.wrong += rhs.wrong;
        self.overshot += rhs.overshot;
        self.correct += rhs.correct;
    }
}

impl std::ops::Add for ChangeCounts {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl std::iter::Sum for ChangeCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ChangeCounts::default(), |a, b| a + b)
    }
}

impl Serialize for ChangeCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ChangeCounts", 6)?;
        s.serialize_field("missed", &self.missed)?;
        s.serialize_field("wrong", &self.wrong)?;
        s.serialize_field("overshot", &self.overshot)?;
        s.serialize_field("correct", &self.correct)?;
        s.serialize_field("predictions", &self.predictions())?;
        s.serialize_field("gold", &self.gold())?;
        s.end()
    }
}

/// Result of [`count_changes`]: totals plus every scored change in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeTally {
    pub counts: ChangeCounts,
    pub events: Vec<ChangeEvent>,
}

impl ChangeTally {
    pub fn mistakes(&self) -> impl Iterator<Item = &ChangeEvent> {
        self.events.iter().filter(|e| e.kind.is_mistake())
    }

    pub fn mistake_turns(&self) -> Vec<usize> {
        self.mistakes().map(|e| e.turn_index).collect()
    }
}

pub(crate) fn check_lengths(gold: &[BeliefState], pred: &[BeliefState]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::length(None, gold.len(), pred.len()));
    }
    Ok(())
}

/// Tallies changes over cumulative gold and predicted state sequences,
/// scoring deactivations.
pub fn count_changes(gold: &[BeliefState], pred: &[BeliefState]) -> Result<ChangeTally> {
    count_changes_with(gold, pred, true)
}

/// Tallies changes, optionally ignoring active-to-inactive transitions.
///
/// With `score_deactivations == false` only newly valued pairs are changes.
pub fn count_changes_with(
    gold: &[BeliefState],
    pred: &[BeliefState],
    score_deactivations: bool,
) -> Result<ChangeTally> {
    check_lengths(gold, pred)?;
    let empty = BeliefState::new();
    let mut tally = ChangeTally::default();

    for (t, (g_cur, p_cur)) in gold.iter().zip(pred).enumerate() {
        let (g_prev, p_prev) = if t == 0 {
            (&empty, &empty)
        } else {
            (&gold[t - 1], &pred[t - 1])
        };
        let g_delta = state_delta_with(g_prev, g_cur, score_deactivations);
        let p_delta = state_delta_with(p_prev, p_cur, score_deactivations);

        // Slots already scored this turn by the gold pass.
        let mut scored: BTreeSet<&SlotName> = BTreeSet::new();

        for (slot, gold_value) in g_delta.iter() {
            let kind = match (gold_value, p_cur.get(slot)) {
                (Some(_), None) => ChangeKind::Missed,
                (Some(g), Some(p)) if g != p => ChangeKind::Wrong,
                (Some(_), Some(_)) => ChangeKind::Correct,
                // Gold removed the slot; the prediction still holds a value.
                (None, Some(_)) => ChangeKind::Missed,
                (None, None) => ChangeKind::Correct,
            };
            scored.insert(slot);
            tally.push(t, kind, slot);
        }

        for (slot, pred_value) in p_delta.iter() {
            if scored.contains(slot) {
                continue;
            }
            let kind = match (pred_value, g_cur.get(slot)) {
                (Some(_), None) => ChangeKind::Overshot,
                (Some(p), Some(g)) if p != g => ChangeKind::Wrong,
                (Some(_), Some(_)) => ChangeKind::Correct,
                // Prediction dropped a slot gold still holds.
                (None, Some(_)) => ChangeKind::Wrong,
                // Prediction dropped a slot gold never held at this turn.
                (None, None) => ChangeKind::Correct,
            };
            tally.push(t, kind, slot);
        }
    }
    Ok(tally)
}

impl ChangeTally {
    fn push(&mut self, turn_index: usize, kind: ChangeKind, slot: &SlotName) {
        self.counts.record(kind);
        self.events.push(ChangeEvent {
            turn_index,
            kind,
            slot: slot.clone(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnTag {
    /// Predicted state equals gold.
    Clean,
    /// At least one mistake originates at this turn.
    NewError,
    /// States differ, but only through mistakes made earlier.
    PropagatedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TurnErrorClass {
    pub tag: TurnTag,
    /// Most recent `NewError` turn at or before this one.
    pub last_new_error_turn: Option<usize>,
}

pub fn classify_turn_errors(
    gold: &[BeliefState],
    pred: &[BeliefState],
) -> Result<Vec<TurnErrorClass>> {
    classify_turn_errors_with(gold, pred, true)
}

pub fn classify_turn_errors_with(
    gold: &[BeliefState],
    pred: &[BeliefState],
    score_deactivations: bool,
) -> Result<Vec<TurnErrorClass>> {
    let tally = count_changes_with(gold, pred, score_deactivations)?;
    Ok(classify_from_tally(gold, pred, &tally))
}

pub(crate) fn classify_from_tally(
    gold: &[BeliefState],
    pred: &[BeliefState],
    tally: &ChangeTally,
) -> Vec<TurnErrorClass> {
    let mut has_mistake = vec![false; gold.len()];
    for e in tally.mistakes() {
        has_mistake[e.turn_index] = true;
    }
    let mut last = None;
    gold.iter()
        .zip(pred)
        .zip(has_mistake)
        .enumerate()
        .map(|(t, ((g, p), mistake))| {
            let tag = if mistake {
                last = Some(t);
                TurnTag::NewError
            } else if g == p {
                TurnTag::Clean
            } else {
                TurnTag::PropagatedOnly
            };
            TurnErrorClass {
                tag,
                last_new_error_turn: last,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(s: &str) -> SlotName {
        SlotName::parse(s).unwrap()
    }

    fn val(v: &str) -> Option<SlotValue> {
        crate::model::normalize_value(v)
    }

    /// Six turns; slot A active from turn 0, slot B from turn 5.
    fn hypothetical() -> (Vec<BeliefState>, Vec<BeliefState>, Vec<BeliefState>) {
        let a = BeliefState::of([("taxi-a", "x")]);
        let ab = BeliefState::of([("taxi-a", "x"), ("taxi-b", "y")]);
        let b = BeliefState::of([("taxi-b", "y")]);
        let gold = vec![a.clone(), a.clone(), a.clone(), a.clone(), a.clone(), ab];
        let p1 = vec![a.clone(); 6];
        let mut p2 = vec![BeliefState::new(); 5];
        p2.push(b);
        (gold, p1, p2)
    }

    #[test]
    fn delta_examples() {
        let empty = BeliefState::new();
        let north = BeliefState::of([("hotel-area", "north")]);
        let more = BeliefState::of([("hotel-area", "north"), ("hotel-stars", "4")]);
        assert_eq!(
            state_delta(&empty, &north).pairs(),
            &[(slot("hotel-area"), val("north"))]
        );
        assert_eq!(
            state_delta(&north, &more).pairs(),
            &[(slot("hotel-stars"), val("4"))]
        );
        assert_eq!(
            state_delta(&north, &empty).pairs(),
            &[(slot("hotel-area"), None)]
        );
        assert!(state_delta_with(&north, &empty, false).is_empty());
        let south = BeliefState::of([("hotel-area", "south")]);
        assert_eq!(
            state_delta(&north, &south).pairs(),
            &[(slot("hotel-area"), val("south"))]
        );
    }

    #[test]
    fn hypothetical_counts() {
        let (gold, p1, p2) = hypothetical();
        let c1 = count_changes(&gold, &p1).unwrap();
        assert_eq!(c1.counts, ChangeCounts::new(1, 0, 0, 1));
        assert_eq!(c1.mistake_turns(), vec![5]);
        let c2 = count_changes(&gold, &p2).unwrap();
        assert_eq!(c2.counts, ChangeCounts::new(1, 0, 0, 1));
        assert_eq!(c2.mistake_turns(), vec![0]);
    }

    #[test]
    fn perfect_prediction_counts_every_gold_change() {
        let (gold, _, _) = hypothetical();
        let tally = count_changes(&gold, &gold).unwrap();
        assert_eq!(tally.counts, ChangeCounts::new(0, 0, 0, 2));
    }

    #[test]
    fn wrong_value_counted_once() {
        let gold = vec![
            BeliefState::of([("d-a", "x")]),
            BeliefState::of([("d-a", "x"), ("d-b", "4")]),
        ];
        let pred = vec![
            BeliefState::of([("d-a", "x")]),
            BeliefState::of([("d-a", "x"), ("d-b", "3")]),
        ];
        let tally = count_changes(&gold, &pred).unwrap();
        assert_eq!(tally.counts, ChangeCounts::new(0, 1, 0, 1));
        assert_eq!(tally.counts.predictions(), 2);
        assert_eq!(tally.counts.gold(), 2);
    }

    #[test]
    fn persisting_error_not_recounted() {
        let g = BeliefState::of([("d-a", "x")]);
        let p = BeliefState::of([("d-a", "y")]);
        let tally = count_changes(&vec![g; 5], &vec![p; 5]).unwrap();
        assert_eq!(tally.counts, ChangeCounts::new(0, 1, 0, 0));
    }

    #[test]
    fn overshoot_then_correction() {
        let empty = BeliefState::new();
        let extra = BeliefState::of([("d-a", "x")]);
        let gold = vec![empty.clone(), empty.clone(), empty.clone()];
        let pred = vec![empty.clone(), extra, empty];
        let tally = count_changes(&gold, &pred).unwrap();
        assert_eq!(tally.counts, ChangeCounts::new(0, 0, 1, 1));
        let ignored = count_changes_with(&gold, &pred, false).unwrap();
        assert_eq!(ignored.counts, ChangeCounts::new(0, 0, 1, 0));
    }

    #[test]
    fn deactivations() {
        let on = BeliefState::of([("d-a", "x")]);
        let off = BeliefState::new();
        // Both remove the slot together.
        let t = count_changes(&[on.clone(), off.clone()], &[on.clone(), off.clone()]).unwrap();
        assert_eq!(t.counts, ChangeCounts::new(0, 0, 0, 2));
        // Gold removes it, prediction keeps it.
        let t = count_changes(&[on.clone(), off.clone()], &[on.clone(), on.clone()]).unwrap();
        assert_eq!(t.counts, ChangeCounts::new(1, 0, 0, 1));
        // Prediction removes a slot gold keeps.
        let t = count_changes(&[on.clone(), on.clone()], &[on.clone(), off.clone()]).unwrap();
        assert_eq!(t.counts, ChangeCounts::new(0, 1, 0, 1));
        // Gold changes the value while the prediction removes the slot: one event.
        let other = BeliefState::of([("d-a", "z")]);
        let t = count_changes(&[on.clone(), other], &[on.clone(), off]).unwrap();
        assert_eq!(t.counts, ChangeCounts::new(1, 0, 0, 1));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let s = BeliefState::new();
        assert!(matches!(
            count_changes(std::slice::from_ref(&s), &[s.clone(), s.clone()]),
            Err(Error::LengthMismatch { gold: 1, pred: 2, .. })
        ));
    }

    #[test]
    fn classification() {
        let (gold, p1, p2) = hypothetical();
        let tags = |v: &[TurnErrorClass]| v.iter().map(|c| c.tag).collect::<Vec<_>>();

        let c1 = classify_turn_errors(&gold, &p1).unwrap();
        let mut expected = vec![TurnTag::Clean; 5];
        expected.push(TurnTag::NewError);
        assert_eq!(tags(&c1), expected);
        assert_eq!(c1[5].last_new_error_turn, Some(5));
        assert_eq!(c1[4].last_new_error_turn, None);

        let c2 = classify_turn_errors(&gold, &p2).unwrap();
        assert_eq!(c2[0].tag, TurnTag::NewError);
        for c in &c2[1..] {
            assert_eq!(c.tag, TurnTag::PropagatedOnly);
            assert_eq!(c.last_new_error_turn, Some(0));
        }

        let perfect = classify_turn_errors(&gold, &gold).unwrap();
        assert!(perfect.iter().all(|c| c.tag == TurnTag::Clean));
    }

    #[test]
    fn counts_serialize_with_totals() {
        let json = serde_json::to_string(&ChangeCounts::new(1, 2, 3, 4)).unwrap();
        assert_eq!(
            json,
            r#"{"missed":1,"wrong":2,"overshot":3,"correct":4,"predictions":9,"gold":7}"#
        );
    }
}
