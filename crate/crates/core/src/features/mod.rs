//! Per-turn feature vectors and labeled datasets for the two prediction
//! tasks.
//!
//! Every user turn (never a welcome row) anchors one example. The anchor's
//! own activity and attributes describe "where the user is now"; the
//! occurrence counters cover strictly earlier turns, so the first user turn
//! of a conversation has all conversation counters at zero.

mod dataset;

pub use dataset::{LabeledDataset, SparseRows};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::domain::{Activity, BusinessCalendar, Role, N_ACTIVITIES};
use crate::error::FeatureError;
use crate::log_io::{EventLog, TurnRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessAwareness {
    /// Only the anchor turn's own attributes.
    Npa,
    /// Adds per-activity occurrence counters.
    Pa,
}

/// Which earlier turns the occurrence counters look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionDefinition {
    /// The current conversation only.
    Conv,
    /// Everything the user did in this case so far.
    User,
    /// Both counter blocks side by side.
    ConvUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureRegime {
    pub awareness: ProcessAwareness,
    pub session: SessionDefinition,
}

impl FeatureRegime {
    pub const NPA_CONV: FeatureRegime =
        FeatureRegime { awareness: ProcessAwareness::Npa, session: SessionDefinition::Conv };
    pub const PA_CONV: FeatureRegime =
        FeatureRegime { awareness: ProcessAwareness::Pa, session: SessionDefinition::Conv };
    pub const PA_USER: FeatureRegime =
        FeatureRegime { awareness: ProcessAwareness::Pa, session: SessionDefinition::User };
    pub const PA_CONV_USER: FeatureRegime =
        FeatureRegime { awareness: ProcessAwareness::Pa, session: SessionDefinition::ConvUser };
    pub const ALL: [FeatureRegime; 4] = [Self::NPA_CONV, Self::PA_CONV, Self::PA_USER, Self::PA_CONV_USER];

    /// Rejects the combinations without a meaning (npa with user counters).
    pub fn new(awareness: ProcessAwareness, session: SessionDefinition) -> Result<FeatureRegime, FeatureError> {
        if awareness == ProcessAwareness::Npa && session != SessionDefinition::Conv {
            return Err(FeatureError::UnknownName { kind: "regime", value: "npa with user counters".into() });
        }
        Ok(FeatureRegime { awareness, session })
    }

    pub fn name(self) -> &'static str {
        match (self.awareness, self.session) {
            (ProcessAwareness::Npa, _) => "npa-conv",
            (ProcessAwareness::Pa, SessionDefinition::Conv) => "pa-conv",
            (ProcessAwareness::Pa, SessionDefinition::User) => "pa-user",
            (ProcessAwareness::Pa, SessionDefinition::ConvUser) => "pa-convuser",
        }
    }

    fn conv_counts(self) -> bool {
        self.awareness == ProcessAwareness::Pa && self.session != SessionDefinition::User
    }

    fn user_counts(self) -> bool {
        self.awareness == ProcessAwareness::Pa && self.session != SessionDefinition::Conv
    }

    /// Recovers the regime from a feature layout produced by [`feature_names`].
    pub fn from_feature_names(names: &[String]) -> FeatureRegime {
        let conv = names.iter().any(|n| n.starts_with(CONV_PREFIX));
        let user = names.iter().any(|n| n.starts_with(USER_PREFIX));
        match (conv, user) {
            (false, false) => Self::NPA_CONV,
            (true, false) => Self::PA_CONV,
            (false, true) => Self::PA_USER,
            (true, true) => Self::PA_CONV_USER,
        }
    }
}

impl fmt::Display for FeatureRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureRegime {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|r| r.name() == key || (key == "pa-conv-user" && *r == Self::PA_CONV_USER))
            .ok_or_else(|| FeatureError::UnknownName { kind: "regime", value: s.to_string() })
    }
}

impl Serialize for FeatureRegime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for FeatureRegime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Which activity the user performs next in the conversation.
    NextActivity,
    /// Whether the case misses the regular deadline.
    Lateness,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::NextActivity => "next",
            Task::Lateness => "late",
        }
    }

    /// Sorted label names.
    pub fn label_space(self) -> Vec<String> {
        match self {
            Task::NextActivity => Activity::all().map(|a| a.label().to_string()).collect(),
            Task::Lateness => vec![LATE.to_string(), ON_TIME.to_string()],
        }
    }

    pub fn from_feature_names(names: &[String]) -> Task {
        if names.iter().any(|n| n == ELAPSED) {
            Task::Lateness
        } else {
            Task::NextActivity
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "next" | "next-activity" | "next_activity" => Ok(Task::NextActivity),
            "late" | "lateness" => Ok(Task::Lateness),
            _ => Err(FeatureError::UnknownName { kind: "task", value: s.to_string() }),
        }
    }
}

pub const LATE: &str = "late";
pub const ON_TIME: &str = "on_time";

const PREV_PREFIX: &str = "prev=";
const CONV_PREFIX: &str = "conv_count=";
const USER_PREFIX: &str = "user_count=";
pub const ROLE_FEATURE: &str = "role_dept_manager";
pub const ELAPSED: &str = "elapsed_working_days";
const CONVERSATION_SEQ: &str = "conversation_seq";

/// Column names of a regime/task layout, in column order.
pub fn feature_names(regime: FeatureRegime, task: Task) -> Vec<String> {
    let mut names: Vec<String> = Activity::all().map(|a| format!("{PREV_PREFIX}{a}")).collect();
    names.push(format!("{PREV_PREFIX}none"));
    for n in [
        ROLE_FEATURE,
        "intent_confidence",
        "intent_confidence_missing",
        "score",
        "score_missing",
        "expecting_response",
        "turns_in_session",
    ] {
        names.push(n.to_string());
    }
    if regime.conv_counts() {
        names.extend(Activity::all().map(|a| format!("{CONV_PREFIX}{a}")));
        names.push(CONVERSATION_SEQ.to_string());
    }
    if regime.user_counts() {
        names.extend(Activity::all().map(|a| format!("{USER_PREFIX}{a}")));
    }
    if task == Task::Lateness {
        names.push(ELAPSED.to_string());
    }
    names
}

/// One encoded example, laid out as [`feature_names`] describes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

type Counts = [u32; N_ACTIVITIES];

/// What the user has done before the anchor turn.
struct History<'a> {
    conv: &'a Counts,
    user: &'a Counts,
    conversation_seq: u32,
    turns_in_session: u32,
}

/// Encodes user turns of a log under one regime and task.
#[derive(Debug, Clone)]
pub struct Featurizer {
    regime: FeatureRegime,
    task: Task,
    calendar: BusinessCalendar,
    names: Vec<String>,
}

impl Featurizer {
    pub fn new(regime: FeatureRegime, task: Task) -> Featurizer {
        Featurizer { regime, task, calendar: BusinessCalendar::default(), names: feature_names(regime, task) }
    }

    /// Calendar used for the elapsed-working-days feature.
    pub fn with_calendar(mut self, calendar: BusinessCalendar) -> Featurizer {
        self.calendar = calendar;
        self
    }

    pub fn regime(&self) -> FeatureRegime {
        self.regime
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn encode(&self, r: &TurnRecord, h: &History) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.names.len());
        let mut prev = [0.0; N_ACTIVITIES + 1];
        prev[r.activity.map_or(N_ACTIVITIES, Activity::index)] = 1.0;
        v.extend(prev);
        v.push(f64::from(u8::from(r.role == Role::DepartmentManager)));
        for x in [r.intent_confidence, r.score] {
            v.push(x.unwrap_or(0.0));
            v.push(f64::from(u8::from(x.is_none())));
        }
        v.push(f64::from(u8::from(r.expecting_response)));
        v.push(f64::from(h.turns_in_session));
        if self.regime.conv_counts() {
            v.extend(h.conv.iter().map(|&c| f64::from(c)));
            v.push(f64::from(h.conversation_seq));
        }
        if self.regime.user_counts() {
            v.extend(h.user.iter().map(|&c| f64::from(c)));
        }
        if self.task == Task::Lateness {
            let t = r.timestamp.max(self.calendar.process_start);
            v.push(self.calendar.working_days_between(self.calendar.process_start, t).unwrap());
        }
        debug_assert_eq!(v.len(), self.names.len());
        v
    }

    /// Features of the user turn at `row`, computed from that turn and the
    /// turns before it only.
    pub fn extract(&self, log: &EventLog, row: usize) -> Result<FeatureVector, FeatureError> {
        let records = log.records();
        let anchor = records.get(row).ok_or(FeatureError::IndexOutOfRange(row))?;
        if anchor.is_welcome() {
            return Err(FeatureError::NotAUserTurn(row));
        }
        let start_of = |sid: &str| -> (NaiveDateTime, String) {
            let first = log.session_rows(sid).iter().map(|&i| records[i].timestamp).min().unwrap();
            (first, sid.to_string())
        };
        let anchor_key = start_of(&anchor.session_id);
        let mut conv = [0; N_ACTIVITIES];
        let mut user = [0; N_ACTIVITIES];
        let mut turns_in_session = 0;
        let mut earlier_sessions = std::collections::BTreeSet::new();
        for &i in log.user_rows(&anchor.user_id) {
            let r = &records[i];
            if r.case_id != anchor.case_id {
                continue;
            }
            let Some(a) = r.activity else { continue };
            let before = if r.session_id == anchor.session_id {
                r.turn < anchor.turn
            } else {
                let key = start_of(&r.session_id);
                if key < anchor_key {
                    earlier_sessions.insert(r.session_id.as_str());
                    true
                } else {
                    false
                }
            };
            if r.session_id == anchor.session_id && r.turn <= anchor.turn {
                turns_in_session += 1;
            }
            if before {
                user[a.index()] += 1;
                if r.session_id == anchor.session_id {
                    conv[a.index()] += 1;
                }
            }
        }
        let history = History {
            conv: &conv,
            user: &user,
            conversation_seq: earlier_sessions.len() as u32 + 1,
            turns_in_session,
        };
        Ok(FeatureVector { values: self.encode(anchor, &history) })
    }

    /// Walks every user turn in canonical order and hands its encoded
    /// features to `emit` along with the next user turn of the conversation.
    fn walk(
        &self,
        log: &EventLog,
        mut emit: impl FnMut(usize, &TurnRecord, Option<&TurnRecord>, Vec<f64>) -> Result<(), FeatureError>,
    ) -> Result<(), FeatureError> {
        let records = log.records();
        for case in log.case_ids() {
            // conversations of this case ordered by start time, then id
            let mut sessions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for &i in log.case_rows(case) {
                sessions.entry(records[i].session_id.as_str()).or_default().push(i);
            }
            let mut order: Vec<(NaiveDateTime, &str, Vec<usize>)> = sessions
                .into_iter()
                .map(|(sid, mut rows)| {
                    rows.sort_by_key(|&i| records[i].turn);
                    let start = rows.iter().map(|&i| records[i].timestamp).min().unwrap();
                    (start, sid, rows)
                })
                .collect();
            order.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

            let mut per_user: HashMap<&str, (Counts, u32)> = HashMap::new();
            for (_, _, rows) in &order {
                let turns: Vec<(usize, &TurnRecord)> =
                    rows.iter().map(|&i| (i, &records[i])).filter(|(_, r)| !r.is_welcome()).collect();
                let Some((_, first)) = turns.first() else { continue };
                let (user, seq) = per_user.entry(first.user_id.as_str()).or_insert(([0; N_ACTIVITIES], 0));
                *seq += 1;
                let mut conv = [0; N_ACTIVITIES];
                for (k, &(i, r)) in turns.iter().enumerate() {
                    let h = History { conv: &conv, user, conversation_seq: *seq, turns_in_session: k as u32 + 1 };
                    emit(i, r, turns.get(k + 1).map(|t| t.1), self.encode(r, &h))?;
                    let a = r.activity.unwrap().index();
                    conv[a] += 1;
                    user[a] += 1;
                }
            }
        }
        Ok(())
    }

    /// Features of every user turn in one pass, with the log row each one
    /// belongs to. Rows come in case order, then conversation start order.
    pub fn anchor_features(&self, log: &EventLog) -> Result<(Vec<usize>, SparseRows), FeatureError> {
        let mut rows = Vec::new();
        let mut x = SparseRows::new(self.names.len());
        self.walk(log, |i, _, _, values| {
            rows.push(i);
            x.push_dense(&values);
            Ok(())
        })?;
        Ok((rows, x))
    }

    /// One row per user turn, labeled with the next user turn's activity in
    /// the same conversation or `end` after the last one.
    pub fn next_activity_dataset(&self, log: &EventLog) -> Result<LabeledDataset, FeatureError> {
        let mut out = Builder::new(&self.names, Task::NextActivity);
        self.walk(log, |_, r, next, values| {
            let label = next.and_then(|n| n.activity).unwrap_or(Activity::END);
            out.push(&values, label.index() as u32, r.case_id);
            Ok(())
        })?;
        out.finish()
    }

    /// One row per user turn, labeled `late` when the case's final submission
    /// comes after `deadline`.
    ///
    /// With `pre_deadline_only`, turns after the deadline are skipped.
    pub fn lateness_dataset(
        &self,
        log: &EventLog,
        deadline: NaiveDateTime,
        pre_deadline_only: bool,
    ) -> Result<LabeledDataset, FeatureError> {
        let records = log.records();
        let mut completion = HashMap::new();
        for case in log.case_ids() {
            let done = log
                .case_rows(case)
                .iter()
                .filter(|&&i| records[i].activity == Some(Activity::SUBMIT_FINAL_NOMINATIONS))
                .map(|&i| records[i].timestamp)
                .max()
                .ok_or(FeatureError::MissingFinalSubmission(case))?;
            completion.insert(case, done);
        }
        let labels = Task::Lateness.label_space();
        let late = labels.iter().position(|l| l == LATE).unwrap() as u32;
        let on_time = labels.iter().position(|l| l == ON_TIME).unwrap() as u32;
        let mut out = Builder::new(&self.names, Task::Lateness);
        self.walk(log, |_, r, _, values| {
            if pre_deadline_only && r.timestamp > deadline {
                return Ok(());
            }
            let y = if completion[&r.case_id] > deadline { late } else { on_time };
            out.push(&values, y, r.case_id);
            Ok(())
        })?;
        out.finish()
    }
}

struct Builder {
    data: LabeledDataset,
}

impl Builder {
    fn new(names: &[String], task: Task) -> Builder {
        Builder {
            data: LabeledDataset {
                feature_names: names.to_vec(),
                labels: task.label_space(),
                x: SparseRows::new(names.len()),
                y: Vec::new(),
                groups: Vec::new(),
            },
        }
    }

    fn push(&mut self, values: &[f64], y: u32, group: u32) {
        self.data.x.push_dense(values);
        self.data.y.push(y);
        self.data.groups.push(group);
    }

    fn finish(self) -> Result<LabeledDataset, FeatureError> {
        if self.data.is_empty() {
            return Err(FeatureError::EmptyLog);
        }
        Ok(self.data)
    }
}

/// Features of one anchor turn, using the default calendar.
pub fn extract_features(
    log: &EventLog,
    row: usize,
    regime: FeatureRegime,
    task: Task,
) -> Result<FeatureVector, FeatureError> {
    Featurizer::new(regime, task).extract(log, row)
}

pub fn build_next_activity_dataset(log: &EventLog, regime: FeatureRegime) -> Result<LabeledDataset, FeatureError> {
    Featurizer::new(regime, Task::NextActivity).next_activity_dataset(log)
}

/// Lateness dataset over all user turns, using the default calendar.
pub fn build_lateness_dataset(
    log: &EventLog,
    regime: FeatureRegime,
    deadline: NaiveDateTime,
) -> Result<LabeledDataset, FeatureError> {
    Featurizer::new(regime, Task::Lateness).lateness_dataset(log, deadline, false)
}
