//! Evaluation toolkit for dialogue state tracking (DST) predictions.
//!
//! The crate scores predicted belief states against gold annotations with
//! six metrics: joint goal accuracy, slot accuracy, average goal accuracy,
//! relative slot accuracy, flexible goal accuracy and granular change
//! accuracy (GCA). GCA is computed over belief-state *changes*, so each
//! prediction is rewarded or penalized once, at the turn where it happens.
//!
//! Modules:
//!
//! * [`model`]: slots, values, belief states, dialogues and configuration.
//! * [`delta`]: state differences, the missed/wrong/overshot/correct tally
//!   and per-turn error classification.
//! * [`metrics`]: the six metrics and corpus-level evaluation.
//! * [`analysis`]: mistake-distribution traits, correlations and
//!   disagreement ranking.
//! * [`synth`]: seeded synthetic predictions and brute-force count oracle.
//! * [`io`]: corpus/prediction files and report serialization.
//! * [`cli`]: the `dst-eval` command line.

pub mod analysis;
pub mod cli;
pub mod delta;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
