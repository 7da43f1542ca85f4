use std::fmt;

use serde::Serialize;

use super::EventLog;
use crate::domain::{Activity, Role};

/// The structural rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Turn numbers of a session skip a value or start above 1.
    TurnGap,
    /// Turn numbers of a session repeat or go backwards.
    TurnOrder,
    /// Timestamps of a case decrease in log order.
    TimestampOrder,
    SessionSpansCases,
    /// An approval-phase turn does not come after every nomination turn.
    PhaseOrder,
    /// A nomination is added before both mandatory reports were viewed.
    MandatoryReportsFirst,
    /// A task activity is performed by the role that does not own it.
    RoleActivity,
    /// A confidence or score lies outside `[0, 1]`.
    ValueRange,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::TurnGap => "turn-gap",
            Rule::TurnOrder => "turn-order",
            Rule::TimestampOrder => "timestamp-order",
            Rule::SessionSpansCases => "session-spans-cases",
            Rule::PhaseOrder => "phase-order",
            Rule::MandatoryReportsFirst => "mandatory-reports-first",
            Rule::RoleActivity => "role-activity",
            Rule::ValueRange => "value-range",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub case_id: u32,
    pub session_id: String,
    pub turn: u32,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: case {}, session {}, turn {}", self.rule, self.case_id, self.session_id, self.turn)
    }
}

/// Checks the log's structural and process-ordering invariants.
///
/// Welcome rows are exempt from content checks. Each phase-order and
/// mandatory-report problem is reported once per case.
pub fn validate(log: &EventLog) -> Vec<Violation> {
    let records = log.records();
    let mut out = Vec::new();
    let mut push = |rule, row: usize| {
        let r = &records[row];
        out.push(Violation { rule, case_id: r.case_id, session_id: r.session_id.clone(), turn: r.turn });
    };

    for sid in log.session_ids() {
        let rows = log.session_rows(sid);
        let case = records[rows[0]].case_id;
        if let Some(&row) = rows.iter().find(|&&i| records[i].case_id != case) {
            push(Rule::SessionSpansCases, row);
        }
        if records[rows[0]].turn > 1 {
            push(Rule::TurnGap, rows[0]);
        }
        for w in rows.windows(2) {
            let (prev, cur) = (records[w[0]].turn, records[w[1]].turn);
            if cur <= prev {
                push(Rule::TurnOrder, w[1]);
            } else if cur != prev + 1 {
                push(Rule::TurnGap, w[1]);
            }
        }
    }

    for case in log.case_ids() {
        let rows = log.case_rows(case);
        for w in rows.windows(2) {
            if records[w[1]].timestamp < records[w[0]].timestamp {
                push(Rule::TimestampOrder, w[1]);
            }
        }

        let last_nomination = rows
            .iter()
            .filter(|&&i| records[i].role == Role::TeamLeader)
            .map(|&i| records[i].timestamp)
            .max();
        let early_approval = rows.iter().copied().find(|&i| {
            records[i].role == Role::DepartmentManager && last_nomination.is_some_and(|t| records[i].timestamp <= t)
        });
        if let Some(row) = early_approval {
            push(Rule::PhaseOrder, row);
        }

        let first = |a: Activity| rows.iter().copied().find(|&i| records[i].activity == Some(a));
        if let Some(add) = first(Activity::ADD_NOMINATION) {
            let seen_before = |a: Activity| first(a).is_some_and(|i| records[i].timestamp < records[add].timestamp);
            if !(seen_before(Activity::REPORT_MIP_CRITERIA) && seen_before(Activity::REPORT_YEARLY_ASSESSMENTS)) {
                push(Rule::MandatoryReportsFirst, add);
            }
        }
    }

    for (i, r) in records.iter().enumerate() {
        if let Some(owner) = r.activity.and_then(Activity::owner) {
            if owner != r.role {
                push(Rule::RoleActivity, i);
            }
        }
        let in_range = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
        if !(in_range(r.intent_confidence) && in_range(r.entity_confidence) && in_range(r.score)) {
            push(Rule::ValueRange, i);
        }
    }
    out
}
