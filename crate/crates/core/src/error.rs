use chrono::NaiveDateTime;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("interval start {start} is after its end {end}")]
    ReversedInterval { start: NaiveDateTime, end: NaiveDateTime },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Cell { row: usize, column: String, message: String },
    #[error("row {row}: duplicate turn {turn} in session `{session_id}`")]
    DuplicateTurn { row: usize, session_id: String, turn: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("row {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("row {0} is a welcome turn and cannot anchor a prediction")]
    NotAUserTurn(usize),
    #[error("the event log has no user turns")]
    EmptyLog,
    #[error("case {0} never reaches submit_final_nominations")]
    MissingFinalSubmission(u32),
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
    #[error("dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data needs at least two distinct labels, found {0}")]
    SingleLabel(usize),
    #[error("non-finite value in row {row}, feature `{feature}`")]
    NonFinite { row: usize, feature: String },
    #[error("expected {expected} features, got {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("model does not provide feature importances")]
    NoImportances,
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {k} groups for {k}-fold splitting, found {found}")]
    TooFewGroups { k: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("fold {fold}: training rows overlap the held-out groups (digest {expected} != {found})")]
    FoldLeakage { fold: usize, expected: String, found: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Error)]
pub enum PrescribeError {
    #[error("model was trained for {model}, request is for {request}")]
    RegimeMismatch { model: String, request: String },
    #[error("model predicts {found}, expected a {expected} model")]
    TaskMismatch { expected: String, found: String },
    #[error("anchor row {0} lies after its case's final submission")]
    CaseCompleted(usize),
    #[error("no model supplied for {0} prescriptions")]
    MissingModel(&'static str),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("flagging needs a lateness assessment; use goal or both mode")]
    FlagWithoutGoal,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
