//! Synthetic event logs for a chatbot-orchestrated HR incentive process, and
//! the two prescriptive monitoring pipelines built on them: crowd-wisdom
//! next-activity recommendation and deadline-risk alerting.
//!
//! The pipeline runs log → features → model → metrics / prescriptions:
//!
//! * [`simulator`] generates an [`log_io::EventLog`] from a
//!   [`domain::SimulationConfig`];
//! * [`log_io`] reads, writes and validates the 15-column CSV format;
//! * [`features`] turns user turns into labeled feature vectors;
//! * [`learners`] trains softmax regression and gradient-boosted trees;
//! * [`evaluation`] runs grouped cross-validation and the metric suite;
//! * [`prescriber`] filters and thresholds model output into
//!   recommendations and interventions.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod domain;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod learners;
pub mod log_io;
pub mod prescriber;
pub mod rng;
pub mod simulator;

pub use error::{DomainError, EvalError, FeatureError, LearnError, LogError, PrescribeError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/calendar.md")]
    mod calendar {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/log-format.md")]
    mod log_format {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/prescription.md")]
    mod prescription {}
}
