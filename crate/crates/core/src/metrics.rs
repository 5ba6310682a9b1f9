//! The six DST metrics.
//!
//! Turn-based metrics (JGA, SA, AGA, RSA, FGA) score each turn's cumulative
//! state and average over turns. GCA instead scores the change tally from
//! [`crate::delta`], combining value/label precision and recall with a
//! weighted harmonic mean.

use serde::Serialize;

use crate::delta::{self, check_lengths, ChangeCounts, ChangeTally, TurnErrorClass, TurnTag};
use crate::error::{Diagnostic, Error, Result};
use crate::model::{
    Aggregation, BeliefState, Corpus, DialogueScores, MetricConfig, MetricReport, Ontology,
    Prediction, Scores,
};

/// Value/label precision and recall of a change tally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntermediateScores {
    pub value_precision: f64,
    pub value_recall: f64,
    pub label_precision: f64,
    pub label_recall: f64,
}

impl IntermediateScores {
    /// In (V_P, V_R, L_P, L_R) order, matching [`MetricConfig::weights`].
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.value_precision,
            self.value_recall,
            self.label_precision,
            self.label_recall,
        ]
    }
}

/// Running sum of per-turn scores.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TurnSum {
    sum: f64,
    turns: usize,
}

impl TurnSum {
    fn add(&mut self, score: f64) {
        self.sum += score;
        self.turns += 1;
    }

    fn merge(&mut self, other: TurnSum) {
        self.sum += other.sum;
        self.turns += other.turns;
    }

    fn mean(&self) -> Option<f64> {
        (self.turns > 0).then(|| self.sum / self.turns as f64)
    }
}

/// Fraction of turns whose predicted state equals gold exactly.
pub fn jga(gold: &[BeliefState], pred: &[BeliefState]) -> Result<f64> {
    check_nonempty(gold, pred)?;
    Ok(jga_sum(gold, pred).mean().unwrap_or(0.0))
}

fn jga_sum(gold: &[BeliefState], pred: &[BeliefState]) -> TurnSum {
    let mut acc = TurnSum::default();
    for (g, p) in gold.iter().zip(pred) {
        acc.add(if g == p { 1.0 } else { 0.0 });
    }
    acc
}

/// Missed and wrong slot counts of one turn, comparing full states.
///
/// Wrong includes predicted slots that are inactive in gold.
fn turn_errors(g: &BeliefState, p: &BeliefState) -> (usize, usize) {
    let missed = g.slots().filter(|s| !p.contains_slot(s)).count();
    let wrong = p
        .iter()
        .filter(|(s, v)| g.get(s) != Some(*v))
        .count();
    (missed, wrong)
}

/// Slot accuracy over all `K` ontology slots, inactive ones included.
pub fn slot_accuracy(gold: &[BeliefState], pred: &[BeliefState], ontology: &Ontology) -> Result<f64> {
    check_nonempty(gold, pred)?;
    check_ontology(gold, pred, ontology, None)?;
    Ok(sa_sum(gold, pred, ontology.len()).mean().unwrap_or(0.0))
}

fn sa_sum(gold: &[BeliefState], pred: &[BeliefState], k: usize) -> TurnSum {
    let k = k as f64;
    let mut acc = TurnSum::default();
    for (g, p) in gold.iter().zip(pred) {
        let (m, w) = turn_errors(g, p);
        acc.add((k - m as f64 - w as f64) / k);
    }
    acc
}

/// Mean recall over turns with a non-empty gold state; `None` when there
/// is no such turn.
pub fn aga(gold: &[BeliefState], pred: &[BeliefState]) -> Result<Option<f64>> {
    check_lengths(gold, pred)?;
    Ok(aga_sum(gold, pred).mean())
}

fn aga_sum(gold: &[BeliefState], pred: &[BeliefState]) -> TurnSum {
    let mut acc = TurnSum::default();
    for (g, p) in gold.iter().zip(pred) {
        if !g.is_empty() {
            acc.add(g.shared_pairs(p) as f64 / g.len() as f64);
        }
    }
    acc
}

/// Relative slot accuracy: per-turn accuracy over the slots active in gold
/// or prediction; a turn where both are empty scores 0.
pub fn rsa(gold: &[BeliefState], pred: &[BeliefState]) -> Result<f64> {
    check_nonempty(gold, pred)?;
    Ok(rsa_sum(gold, pred).mean().unwrap_or(0.0))
}

fn rsa_sum(gold: &[BeliefState], pred: &[BeliefState]) -> TurnSum {
    let mut acc = TurnSum::default();
    for (g, p) in gold.iter().zip(pred) {
        let union = g.len() + p.slots().filter(|s| !g.contains_slot(s)).count();
        if union == 0 {
            acc.add(0.0);
        } else {
            let (m, w) = turn_errors(g, p);
            acc.add((union - m - w) as f64 / union as f64);
        }
    }
    acc
}

/// Flexible goal accuracy with decay ratio `lambda`.
///
/// Clean turns score 1 and turns with a new mistake score 0. A turn that
/// is wrong only because of an earlier mistake scores
/// `1 - exp(-lambda * d)`, `d` turns after that mistake.
pub fn fga(gold: &[BeliefState], pred: &[BeliefState], lambda: f64) -> Result<f64> {
    check_nonempty(gold, pred)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidConfig(format!("lambda must be in (0, 1], got {lambda}")));
    }
    let classes = delta::classify_turn_errors(gold, pred)?;
    Ok(fga_sum(&classes, lambda).mean().unwrap_or(0.0))
}

fn fga_sum(classes: &[TurnErrorClass], lambda: f64) -> TurnSum {
    let mut acc = TurnSum::default();
    for (t, class) in classes.iter().enumerate() {
        let score = match (class.tag, class.last_new_error_turn) {
            (TurnTag::Clean, _) => 1.0,
            (TurnTag::NewError, _) => 0.0,
            (TurnTag::PropagatedOnly, Some(origin)) => {
                1.0 - (-lambda * (t - origin) as f64).exp()
            }
            // Differs from gold with no mistake on record; only reachable
            // when deactivations are not scored.
            (TurnTag::PropagatedOnly, None) => 0.0,
        };
        acc.add(score);
    }
    acc
}

/// Value and label precision/recall of a tally.
///
/// A zero denominator gives 0, except when nothing happened at all
/// (no gold and no predicted changes), which is vacuously perfect.
pub fn intermediates(counts: &ChangeCounts) -> IntermediateScores {
    let (p, g) = (counts.predictions(), counts.gold());
    if p == 0 && g == 0 {
        return IntermediateScores {
            value_precision: 1.0,
            value_recall: 1.0,
            label_precision: 1.0,
            label_recall: 1.0,
        };
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let c = counts.correct;
    let cw = counts.correct + counts.wrong;
    IntermediateScores {
        value_precision: ratio(c, p),
        value_recall: ratio(c, g),
        label_precision: ratio(cw, p),
        label_recall: ratio(cw, g),
    }
}

/// `sum(w) / sum(w / x)`. Zero-weight terms are ignored; any zero value
/// with positive weight makes the mean 0.
pub fn weighted_harmonic_mean(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let mut denom = 0.0;
    for (&x, &w) in values.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        denom += w / x;
    }
    Ok(total / denom)
}

/// Granular change accuracy of a tally.
pub fn gca(counts: &ChangeCounts, config: &MetricConfig) -> Result<f64> {
    weighted_harmonic_mean(&intermediates(counts).as_array(), &config.weights())
}

fn check_nonempty(gold: &[BeliefState], pred: &[BeliefState]) -> Result<()> {
    check_lengths(gold, pred)?;
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no turns to score".into()));
    }
    Ok(())
}

fn check_ontology(
    gold: &[BeliefState],
    pred: &[BeliefState],
    ontology: &Ontology,
    dialogue_id: Option<&str>,
) -> Result<()> {
    if ontology.is_empty() {
        return Err(Error::EmptyOntology);
    }
    for state in gold.iter().chain(pred) {
        if let Some(slot) = ontology.first_unknown(state) {
            return Err(Error::UnknownSlot {
                slot: slot.to_string(),
                dialogue_id: dialogue_id.map(str::to_owned),
            });
        }
    }
    Ok(())
}

/// Everything computed for one dialogue, before corpus aggregation.
struct DialogueEval {
    jga: TurnSum,
    sa: TurnSum,
    aga: TurnSum,
    rsa: TurnSum,
    fga: TurnSum,
    tally: ChangeTally,
    gca: f64,
}

fn evaluate_dialogue(
    gold: &[BeliefState],
    pred: &[BeliefState],
    k: usize,
    config: &MetricConfig,
) -> Result<DialogueEval> {
    let tally = delta::count_changes_with(gold, pred, config.score_deactivations)?;
    let classes = delta::classify_from_tally(gold, pred, &tally);
    let gca = gca(&tally.counts, config)?;
    Ok(DialogueEval {
        jga: jga_sum(gold, pred),
        sa: sa_sum(gold, pred, k),
        aga: aga_sum(gold, pred),
        rsa: rsa_sum(gold, pred),
        fga: fga_sum(&classes, config.lambda),
        tally,
        gca,
    })
}

impl DialogueEval {
    fn scores(&self) -> Scores {
        Scores {
            jga: self.jga.mean().unwrap_or(0.0),
            sa: self.sa.mean().unwrap_or(0.0),
            aga: self.aga.mean(),
            rsa: self.rsa.mean().unwrap_or(0.0),
            fga: self.fga.mean().unwrap_or(0.0),
            gca: self.gca,
        }
    }
}

/// Checks that predictions pair one-to-one with corpus dialogues, with
/// matching lengths and known slots. Returns every problem found.
pub fn validate_predictions(
    corpus: &Corpus,
    predictions: &[Prediction],
    ontology: &Ontology,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for pred in predictions {
        let id = pred.dialogue_id.as_str();
        if !seen.insert(id) {
            diags.push(Diagnostic::new("E_DUPLICATE_ID", id, "dialogue predicted more than once"));
            continue;
        }
        let Some(dialogue) = corpus.get(id) else {
            diags.push(Diagnostic::new("E_UNKNOWN_ID", id, "no such dialogue in the corpus"));
            continue;
        };
        if dialogue.len() != pred.states.len() {
            diags.push(Diagnostic::new(
                "E_LENGTH",
                id,
                format!(
                    "dialogue has {} turns but {} predicted states",
                    dialogue.len(),
                    pred.states.len()
                ),
            ));
        }
        for (t, state) in pred.states.iter().enumerate() {
            if let Some(slot) = ontology.first_unknown(state) {
                diags.push(Diagnostic::new(
                    "E_UNKNOWN_SLOT",
                    format!("{id} turn {t}"),
                    format!("predicted slot `{slot}` is not in the ontology"),
                ));
            }
        }
    }
    for dialogue in corpus.dialogues() {
        if !seen.contains(dialogue.id.as_str()) {
            diags.push(Diagnostic::new(
                "E_MISSING_PREDICTION",
                dialogue.id.clone(),
                "dialogue has no prediction",
            ));
        }
        for (t, turn) in dialogue.turns.iter().enumerate() {
            if let Some(slot) = ontology.first_unknown(&turn.gold) {
                diags.push(Diagnostic::new(
                    "E_UNKNOWN_SLOT",
                    format!("{} turn {t}", dialogue.id),
                    format!("gold slot `{slot}` is not in the ontology"),
                ));
            }
        }
    }
    diags
}

/// Scores every dialogue and aggregates per `config.aggregation`.
pub fn evaluate_corpus(
    corpus: &Corpus,
    predictions: &[Prediction],
    ontology: &Ontology,
    config: &MetricConfig,
) -> Result<MetricReport> {
    config.validate()?;
    if predictions.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    if ontology.is_empty() {
        return Err(Error::EmptyOntology);
    }
    let diags = validate_predictions(corpus, predictions, ontology);
    if !diags.is_empty() {
        return Err(Error::Invalid(diags));
    }

    let by_id: std::collections::BTreeMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.dialogue_id.as_str(), p))
        .collect();

    let mut per_dialogue = Vec::with_capacity(corpus.len());
    let mut evals = Vec::with_capacity(corpus.len());
    let mut gold = Vec::new();
    for dialogue in corpus.dialogues() {
        let pred = by_id[dialogue.id.as_str()];
        gold.clear();
        gold.extend(dialogue.turns.iter().map(|t| t.gold.clone()));
        let eval = evaluate_dialogue(&gold, &pred.states, ontology.len(), config)?;
        per_dialogue.push(DialogueScores {
            dialogue_id: dialogue.id.clone(),
            turns: dialogue.len(),
            scores: eval.scores(),
            counts: eval.tally.counts,
        });
        evals.push(eval);
    }

    let counts: ChangeCounts = evals.iter().map(|e| e.tally.counts).sum();
    let corpus_scores = aggregate(&evals, &per_dialogue, &counts, config)?;

    Ok(MetricReport {
        config: *config,
        ontology_size: ontology.len(),
        dialogues: corpus.len(),
        turns: corpus.total_turns(),
        corpus: corpus_scores,
        intermediates: intermediates(&counts),
        counts,
        per_dialogue,
    })
}

fn aggregate(
    evals: &[DialogueEval],
    per_dialogue: &[DialogueScores],
    counts: &ChangeCounts,
    config: &MetricConfig,
) -> Result<Scores> {
    let mean_over = |f: &dyn Fn(&Scores) -> Option<f64>| {
        let vals: Vec<f64> = per_dialogue.iter().filter_map(|d| f(&d.scores)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let dialogue_mean_gca = mean_over(&|s| Some(s.gca)).unwrap_or(1.0);

    if config.aggregation == Aggregation::PerDialogue {
        return Ok(Scores {
            jga: mean_over(&|s| Some(s.jga)).unwrap_or(0.0),
            sa: mean_over(&|s| Some(s.sa)).unwrap_or(0.0),
            aga: mean_over(&|s| s.aga),
            rsa: mean_over(&|s| Some(s.rsa)).unwrap_or(0.0),
            fga: mean_over(&|s| Some(s.fga)).unwrap_or(0.0),
            gca: dialogue_mean_gca,
        });
    }

    let pool = |f: fn(&DialogueEval) -> TurnSum| {
        let mut acc = TurnSum::default();
        for e in evals {
            acc.merge(f(e));
        }
        acc.mean()
    };
    let gca_score = match config.aggregation {
        Aggregation::Pooled => gca(counts, config)?,
        _ => dialogue_mean_gca,
    };
    Ok(Scores {
        jga: pool(|e| e.jga).unwrap_or(0.0),
        sa: pool(|e| e.sa).unwrap_or(0.0),
        aga: pool(|e| e.aga),
        rsa: pool(|e| e.rsa).unwrap_or(0.0),
        fga: pool(|e| e.fga).unwrap_or(0.0),
        gca: gca_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dialogue;

    const TOL: f64 = 1e-9;

    fn hypothetical() -> (Vec<BeliefState>, Vec<BeliefState>, Vec<BeliefState>) {
        let a = BeliefState::of([("taxi-a", "x")]);
        let ab = BeliefState::of([("taxi-a", "x"), ("taxi-b", "y")]);
        let mut gold = vec![a.clone(); 5];
        gold.push(ab);
        let p1 = vec![a; 6];
        let mut p2 = vec![BeliefState::new(); 5];
        p2.push(BeliefState::of([("taxi-b", "y")]));
        (gold, p1, p2)
    }

    fn ontology_of_size(k: usize) -> Ontology {
        let mut names = vec!["taxi-a".to_string(), "taxi-b".to_string()];
        names.extend((names.len()..k).map(|i| format!("pad-s{i}")));
        Ontology::parse(names).unwrap()
    }

    #[test]
    fn hypothetical_turn_metrics() {
        let (gold, p1, p2) = hypothetical();
        assert!((jga(&gold, &p1).unwrap() - 5.0 / 6.0).abs() < TOL);
        assert_eq!(jga(&gold, &p2).unwrap(), 0.0);
        assert!((rsa(&gold, &p1).unwrap() - 5.5 / 6.0).abs() < TOL);
        assert!((rsa(&gold, &p2).unwrap() - 0.5 / 6.0).abs() < TOL);
        assert!((aga(&gold, &p1).unwrap().unwrap() - 5.5 / 6.0).abs() < TOL);
        assert!((aga(&gold, &p2).unwrap().unwrap() - 0.5 / 6.0).abs() < TOL);
        assert!((fga(&gold, &p1, 0.5).unwrap() - 5.0 / 6.0).abs() < TOL);
        let p2_fga = (1..=5).map(|d| 1.0 - (-0.5 * d as f64).exp()).sum::<f64>() / 6.0;
        assert!((fga(&gold, &p2, 0.5).unwrap() - p2_fga).abs() < TOL);
        assert!((p2_fga - 0.597507).abs() < 1e-6);
    }

    #[test]
    fn slot_accuracy_examples() {
        let (gold, p1, _) = hypothetical();
        let k30 = ontology_of_size(30);
        let expected = (5.0 + 29.0 / 30.0) / 6.0;
        assert!((slot_accuracy(&gold, &p1, &k30).unwrap() - expected).abs() < TOL);
        assert!((slot_accuracy(&gold, &gold, &k30).unwrap() - 1.0).abs() < TOL);

        let g = [BeliefState::of([("taxi-a", "x")])];
        let p = [BeliefState::of([("taxi-b", "y")])];
        assert!((slot_accuracy(&g, &p, &k30).unwrap() - 28.0 / 30.0).abs() < TOL);
    }

    #[test]
    fn slot_accuracy_errors() {
        let (gold, p1, _) = hypothetical();
        assert!(matches!(
            slot_accuracy(&gold, &p1, &Ontology::default()),
            Err(Error::EmptyOntology)
        ));
        let small = Ontology::parse(["taxi-a"]).unwrap();
        assert!(matches!(
            slot_accuracy(&gold, &p1, &small),
            Err(Error::UnknownSlot { .. })
        ));
    }

    #[test]
    fn aga_undefined_without_gold() {
        let empty = vec![BeliefState::new(); 3];
        assert_eq!(aga(&empty, &empty).unwrap(), None);
    }

    #[test]
    fn rsa_empty_turns_score_zero() {
        let empty = vec![BeliefState::new(); 2];
        assert_eq!(rsa(&empty, &empty).unwrap(), 0.0);
    }

    #[test]
    fn intermediate_examples() {
        let i = intermediates(&ChangeCounts::new(1, 0, 0, 1));
        assert_eq!(i.as_array(), [1.0, 0.5, 1.0, 0.5]);
        let i = intermediates(&ChangeCounts::default());
        assert_eq!(i.as_array(), [1.0; 4]);
        let i = intermediates(&ChangeCounts::new(0, 1, 0, 1));
        assert_eq!(i.as_array(), [0.5, 0.5, 1.0, 1.0]);
        let only_overshoot = intermediates(&ChangeCounts::new(0, 0, 2, 0));
        assert_eq!(only_overshoot.as_array(), [0.0; 4]);
    }

    #[test]
    fn harmonic_mean_examples() {
        let w = [0.9, 0.9, 0.1, 0.1];
        let h = weighted_harmonic_mean(&[1.0, 0.5, 1.0, 0.5], &w).unwrap();
        assert!((h - 2.0 / 3.0).abs() < TOL);
        let h = weighted_harmonic_mean(&[0.37; 4], &[0.2, 3.0, 0.0, 1.0]).unwrap();
        assert!((h - 0.37).abs() < TOL);
        assert_eq!(weighted_harmonic_mean(&[1.0, 0.0, 1.0, 1.0], &w).unwrap(), 0.0);
        // zero weight hides a zero value
        let h = weighted_harmonic_mean(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(h, 1.0);
        assert!(weighted_harmonic_mean(&[1.0; 4], &[0.0; 4]).is_err());
        assert!(weighted_harmonic_mean(&[1.0; 4], &[-1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn gca_examples() {
        let cfg = MetricConfig::default();
        let g = gca(&ChangeCounts::new(1, 0, 0, 1), &cfg).unwrap();
        assert!((g - 2.0 / 3.0).abs() < TOL);
        // a wrong final slot instead of a missed one
        let g = gca(&ChangeCounts::new(0, 1, 0, 1), &cfg).unwrap();
        assert!((g - 10.0 / 19.0).abs() < TOL);
        assert_eq!(gca(&ChangeCounts::new(0, 0, 0, 7), &cfg).unwrap(), 1.0);
        assert_eq!(gca(&ChangeCounts::new(3, 1, 0, 0), &cfg).unwrap(), 0.0);
    }

    fn two_dialogue_corpus() -> (Corpus, Vec<Prediction>, Ontology) {
        let s = |pairs: &[(&str, &str)]| {
            BeliefState::from_raw(pairs.iter().copied(), &Default::default()).unwrap()
        };
        let a_gold = vec![
            s(&[("d-a", "1")]),
            s(&[("d-a", "1"), ("d-b", "2")]),
            s(&[("d-a", "1"), ("d-b", "2"), ("d-g", "5")]),
        ];
        let b_gold = vec![
            s(&[("d-c", "1")]),
            s(&[("d-c", "1"), ("d-d", "2")]),
            s(&[("d-c", "1"), ("d-d", "2"), ("d-e", "3")]),
            s(&[("d-c", "1"), ("d-d", "2"), ("d-e", "3"), ("d-f", "4")]),
        ];
        let corpus = Corpus::new(
            "two",
            vec![
                Dialogue::from_states("a", a_gold.clone()).unwrap(),
                Dialogue::from_states("b", b_gold).unwrap(),
            ],
        )
        .unwrap();
        let preds = vec![
            Prediction::new("a", a_gold),
            Prediction::new("b", vec![BeliefState::new(); 4]),
        ];
        let ontology = Ontology::from_corpus(&corpus);
        (corpus, preds, ontology)
    }

    #[test]
    fn pooled_gca_weights_by_changes() {
        let (corpus, preds, ontology) = two_dialogue_corpus();
        let report = evaluate_corpus(&corpus, &preds, &ontology, &MetricConfig::default()).unwrap();
        assert_eq!(report.dialogue("a").unwrap().scores.gca, 1.0);
        assert_eq!(report.dialogue("b").unwrap().scores.gca, 0.0);
        assert_eq!(report.counts, ChangeCounts::new(4, 0, 0, 3));
        let pooled = report.corpus.gca;
        assert!(pooled > 0.0 && pooled < 1.0);
        // V_P = 1, V_R = 3/7, L_P = 1, L_R = 3/7
        let expected: f64 = 2.0 / (0.9 + 0.9 * 7.0 / 3.0 + 0.1 + 0.1 * 7.0 / 3.0);
        assert!((expected - 0.6).abs() < TOL);
        assert!((pooled - expected).abs() < TOL);

        let per = MetricConfig {
            aggregation: Aggregation::PerDialogue,
            ..Default::default()
        };
        let report = evaluate_corpus(&corpus, &preds, &ontology, &per).unwrap();
        assert!((report.corpus.gca - 0.5).abs() < TOL);
        assert!((report.corpus.jga - 0.5).abs() < TOL);

        let micro = MetricConfig {
            aggregation: Aggregation::Micro,
            ..Default::default()
        };
        let report = evaluate_corpus(&corpus, &preds, &ontology, &micro).unwrap();
        assert!((report.corpus.gca - 0.5).abs() < TOL);
        // 3 of 7 turns exact
        assert!((report.corpus.jga - 3.0 / 7.0).abs() < TOL);
    }

    #[test]
    fn corpus_input_errors() {
        let (corpus, preds, ontology) = two_dialogue_corpus();
        let cfg = MetricConfig::default();
        assert!(matches!(
            evaluate_corpus(&corpus, &[], &ontology, &cfg),
            Err(Error::EmptyPredictions)
        ));
        let mut bad = preds.clone();
        bad[1].states.pop();
        bad.push(Prediction::new("zzz", vec![]));
        let Err(Error::Invalid(diags)) = evaluate_corpus(&corpus, &bad, &ontology, &cfg) else {
            panic!("expected validation failure");
        };
        let codes: Vec<_> = diags.iter().map(|d| (d.code, d.location.as_str())).collect();
        assert!(codes.contains(&("E_LENGTH", "b")));
        assert!(codes.contains(&("E_UNKNOWN_ID", "zzz")));

        let missing = &preds[..1];
        let Err(Error::Invalid(diags)) = evaluate_corpus(&corpus, missing, &ontology, &cfg) else {
            panic!("expected validation failure");
        };
        assert_eq!(diags[0].code, "E_MISSING_PREDICTION");
    }
}
