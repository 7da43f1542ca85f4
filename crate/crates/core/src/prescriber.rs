//! Prescriptions on top of trained models.
//!
//! Two engines share the same anchors (user turns):
//!
//! * the crowd engine ranks what experienced users would do next, after
//!   dropping activities nobody should be nudged towards (fallbacks,
//!   disambiguation prompts, ending the conversation);
//! * the goal engine estimates the risk that the case misses its deadline
//!   and raises a reminder when the risk reaches a threshold.
//!
//! Nothing is executed: interventions are plain records.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Activity, BusinessCalendar, Role};
use crate::error::PrescribeError;
use crate::features::{FeatureRegime, Featurizer, SparseRows, Task, LATE};
use crate::learners::ProbabilisticModel;
use crate::log_io::{EventLog, TurnRecord, TIMESTAMP_FORMAT};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// The user turn a prescription refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRef {
    pub case_id: u32,
    pub session_id: String,
    pub turn: u32,
}

impl AnchorRef {
    fn of(r: &TurnRecord) -> AnchorRef {
        AnchorRef { case_id: r.case_id, session_id: r.session_id.clone(), turn: r.turn }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedActivity {
    pub activity: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub anchor: AnchorRef,
    /// Most probable first; probabilities are renormalized over the
    /// desirable activities.
    pub ranked: Vec<RankedActivity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Reminder,
}

/// A corrective action addressed to the user who owns the anchor turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intervention {
    #[serde(rename = "type")]
    pub kind: ActionKind,
    pub recipient: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatenessAssessment {
    pub anchor: AnchorRef,
    pub risk_probability: f64,
    pub threshold: f64,
    pub intervene: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<Intervention>,
}

impl LatenessAssessment {
    fn new(record: &TurnRecord, risk_probability: f64, threshold: f64) -> LatenessAssessment {
        let intervene = risk_probability >= threshold;
        LatenessAssessment {
            anchor: AnchorRef::of(record),
            risk_probability,
            threshold,
            intervene,
            action: intervene.then(|| Intervention { kind: ActionKind::Reminder, recipient: record.user_id.clone() }),
        }
    }
}

/// Copy of `probs` with undesirable labels zeroed and the rest rescaled to
/// sum to one. If the model put no mass at all on desirable labels they
/// share it evenly.
pub fn renormalize_desirable(labels: &[String], probs: &[f64]) -> Result<Vec<f64>, PrescribeError> {
    let mut keep = Vec::with_capacity(labels.len());
    for l in labels {
        keep.push(!Activity::from_label(l)?.is_undesirable());
    }
    let mass: f64 = probs.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).sum();
    let n_keep = keep.iter().filter(|k| **k).count() as f64;
    Ok(probs
        .iter()
        .zip(&keep)
        .map(|(&p, &k)| match (k, mass > 0.0) {
            (false, _) => 0.0,
            (true, true) => p / mass,
            (true, false) => 1.0 / n_keep,
        })
        .collect())
}

/// Top `k` desirable labels of a full distribution, ties broken by label.
pub fn rank_desirable(labels: &[String], probs: &[f64], k: usize) -> Result<Vec<RankedActivity>, PrescribeError> {
    if k == 0 {
        return Err(crate::LearnError::InvalidK.into());
    }
    let renormalized = renormalize_desirable(labels, probs)?;
    let mut order: Vec<usize> =
        (0..labels.len()).filter(|&i| !Activity::from_label(&labels[i]).unwrap().is_undesirable()).collect();
    order.sort_by(|&a, &b| {
        renormalized[b].partial_cmp(&renormalized[a]).unwrap_or(Ordering::Equal).then_with(|| labels[a].cmp(&labels[b]))
    });
    order.truncate(k);
    Ok(order.into_iter().map(|i| RankedActivity { activity: labels[i].clone(), probability: renormalized[i] }).collect())
}

/// Confirms that `model` was trained on `task` features for `regime`.
fn check_model(model: &dyn ProbabilisticModel, regime: FeatureRegime, task: Task) -> Result<(), PrescribeError> {
    let names = model.feature_names();
    let found = Task::from_feature_names(names);
    if found != task {
        return Err(PrescribeError::TaskMismatch { expected: task.name().into(), found: found.name().into() });
    }
    let trained = FeatureRegime::from_feature_names(names);
    if trained != regime || Featurizer::new(regime, task).names() != names {
        return Err(PrescribeError::RegimeMismatch { model: trained.name().into(), request: regime.name().into() });
    }
    Ok(())
}

fn late_index(model: &dyn ProbabilisticModel) -> Result<usize, PrescribeError> {
    model.labels().iter().position(|l| l == LATE).ok_or_else(|| PrescribeError::TaskMismatch {
        expected: Task::Lateness.name().into(),
        found: model.labels().join("/"),
    })
}

fn check_threshold(threshold: f64) -> Result<(), PrescribeError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PrescribeError::InvalidThreshold(threshold));
    }
    Ok(())
}

fn after_completion(log: &EventLog, record: &TurnRecord) -> bool {
    log.completion_time(record.case_id).is_some_and(|done| record.timestamp > done)
}

/// Ranked next-action suggestions for the user turn at `anchor`.
pub fn recommend_next(
    model: &dyn ProbabilisticModel,
    log: &EventLog,
    anchor: usize,
    regime: FeatureRegime,
    k: usize,
) -> Result<Recommendation, PrescribeError> {
    check_model(model, regime, Task::NextActivity)?;
    let x = Featurizer::new(regime, Task::NextActivity).extract(log, anchor)?;
    let probs = model.predict_distribution(&x.values)?;
    Ok(Recommendation { anchor: AnchorRef::of(&log.records()[anchor]), ranked: rank_desirable(model.labels(), &probs, k)? })
}

/// Deadline risk for the case of the user turn at `anchor`.
pub fn assess_lateness(
    model: &dyn ProbabilisticModel,
    log: &EventLog,
    anchor: usize,
    regime: FeatureRegime,
    threshold: f64,
    calendar: &BusinessCalendar,
) -> Result<LatenessAssessment, PrescribeError> {
    check_threshold(threshold)?;
    check_model(model, regime, Task::Lateness)?;
    let late = late_index(model)?;
    let x = Featurizer::new(regime, Task::Lateness).with_calendar(calendar.clone()).extract(log, anchor)?;
    let record = &log.records()[anchor];
    if after_completion(log, record) {
        return Err(PrescribeError::CaseCompleted(anchor));
    }
    let risk = model.predict_distribution(&x.values)?[late];
    Ok(LatenessAssessment::new(record, risk, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Crowd,
    Goal,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Crowd => "crowd",
            Mode::Goal => "goal",
            Mode::Both => "both",
        }
    }

    fn crowd(self) -> bool {
        self != Mode::Goal
    }

    fn goal(self) -> bool {
        self != Mode::Crowd
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Crowd, Mode::Goal, Mode::Both]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected crowd, goal or both)"))
    }
}

/// Models available to a batch run. The regime of each is read from its
/// feature names.
#[derive(Clone, Copy, Default)]
pub struct Engines<'a> {
    pub next_activity: Option<&'a dyn ProbabilisticModel>,
    pub lateness: Option<&'a dyn ProbabilisticModel>,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub k: usize,
    pub threshold: f64,
    /// Keep only anchors whose assessment calls for an intervention.
    pub flag_only: bool,
    pub calendar: BusinessCalendar,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { k: DEFAULT_K, threshold: DEFAULT_THRESHOLD, flag_only: false, calendar: BusinessCalendar::default() }
    }
}

/// One line of a prescription report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub case_id: u32,
    pub session_id: String,
    pub turn: u32,
    pub timestamp: String,
    pub user_id: String,
    pub role: Role,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recommendations: Option<Vec<RankedActivity>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub assessment: Option<Assessment>,
}

/// Assessment fields as they appear in a report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub risk_probability: f64,
    pub threshold: f64,
    pub intervene: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<Intervention>,
}

/// Model output for every user turn of `log` with one batched prediction
/// per model.
fn batch_predict(
    model: &dyn ProbabilisticModel,
    log: &EventLog,
    task: Task,
    calendar: &BusinessCalendar,
) -> Result<Vec<Option<Vec<f64>>>, PrescribeError> {
    let regime = FeatureRegime::from_feature_names(model.feature_names());
    check_model(model, regime, task)?;
    let (rows, x): (Vec<usize>, SparseRows) =
        Featurizer::new(regime, task).with_calendar(calendar.clone()).anchor_features(log)?;
    let probs = model.predict_rows(&x)?;
    let mut out = vec![None; log.len()];
    for (row, p) in rows.into_iter().zip(probs) {
        out[row] = Some(p);
    }
    Ok(out)
}

/// Prescriptions for every user turn of `log`, ordered by case, timestamp
/// and turn.
///
/// Turns after a case's final submission get no assessment; in goal mode
/// they produce no line at all.
pub fn prescribe_batch(
    engines: Engines<'_>,
    log: &EventLog,
    mode: Mode,
    options: &BatchOptions,
) -> Result<Vec<ReportLine>, PrescribeError> {
    check_threshold(options.threshold)?;
    if options.k == 0 {
        return Err(crate::LearnError::InvalidK.into());
    }
    if options.flag_only && !mode.goal() {
        return Err(PrescribeError::FlagWithoutGoal);
    }
    let next = match (mode.crowd(), engines.next_activity) {
        (false, _) => None,
        (true, Some(m)) => Some((m, batch_predict(m, log, Task::NextActivity, &options.calendar)?)),
        (true, None) => return Err(PrescribeError::MissingModel("crowd")),
    };
    let late = match (mode.goal(), engines.lateness) {
        (false, _) => None,
        (true, Some(m)) => Some((late_index(m)?, batch_predict(m, log, Task::Lateness, &options.calendar)?)),
        (true, None) => return Err(PrescribeError::MissingModel("goal")),
    };

    let records = log.records();
    let mut order: Vec<usize> = (0..records.len()).filter(|&i| !records[i].is_welcome()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        (ra.case_id, ra.timestamp, ra.turn, &ra.session_id).cmp(&(rb.case_id, rb.timestamp, rb.turn, &rb.session_id))
    });

    let mut lines = Vec::with_capacity(order.len());
    for i in order {
        let r = &records[i];
        let recommendations = match &next {
            Some((model, probs)) => Some(rank_desirable(model.labels(), probs[i].as_ref().unwrap(), options.k)?),
            None => None,
        };
        let assessment = match &late {
            Some((idx, probs)) if !after_completion(log, r) => {
                let a = LatenessAssessment::new(r, probs[i].as_ref().unwrap()[*idx], options.threshold);
                Some(Assessment {
                    risk_probability: a.risk_probability,
                    threshold: a.threshold,
                    intervene: a.intervene,
                    action: a.action,
                })
            }
            _ => None,
        };
        if options.flag_only && !assessment.as_ref().is_some_and(|a| a.intervene) {
            continue;
        }
        if recommendations.is_none() && assessment.is_none() {
            continue;
        }
        lines.push(ReportLine {
            case_id: r.case_id,
            session_id: r.session_id.clone(),
            turn: r.turn,
            timestamp: r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            user_id: r.user_id.clone(),
            role: r.role,
            recommendations,
            assessment,
        });
    }
    Ok(lines)
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(lines: &[ReportLine], mut out: W) -> Result<(), PrescribeError> {
    for line in lines {
        serde_json::to_writer(&mut out, line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
