//! Decision-theoretic evaluation of AI-advised human decision making.
//!
//! An experiment trial is recast as a binary-adoption task: the decision-maker
//! picks either the human or the AI recommendation. From trial data this crate
//! computes
//!
//! * the rational baseline `R∅` (better of always-human and always-AI),
//! * the rational benchmark `R` (Bayesian best response to the signal),
//! * behavioral performance `B`,
//! * behavioral and appropriate reliance levels `γ^b`, `γ^r`,
//! * the mis-reliant rational benchmark `R^m` (best response constrained to
//!   each participant's observed reliance),
//! * the reliance / discrimination loss decomposition,
//!
//! together with the k-means signal discretization used for the lower bound,
//! a bootstrap for uncertainty, and a synthetic generator with an exact oracle.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod dataset;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod losses;
pub mod resample;
pub mod seed;
pub mod synth;
pub mod task;

pub use analysis::{BoundMode, ConditionAnalysis, DiscretizationConfig, Prepared};
pub use dataset::{Dataset, Issue, ValidationReport};
pub use error::{Error, Result};
pub use task::{
    BehavioralChoice, DecisionTask, DerivedChoice, DerivedObservation, DerivedState, Outcome,
    OutcomeSpace, ScoringRule, Trial,
};
