//! The 15-column conversation-turn log: typed records, CSV I/O, validation.

mod csv_io;
mod validate;

pub use csv_io::{format_float, read_csv, read_csv_from, write_csv, write_csv_to, COLUMNS, TIMESTAMP_FORMAT};
pub use validate::{validate, Rule, Violation};

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDateTime;

use crate::domain::{Activity, Role};

/// One row of the log: a single conversation turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRecord {
    pub case_id: u32,
    pub session_id: String,
    pub role: Role,
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub turn: u32,
    /// `None` on the chatbot welcome row.
    pub activity: Option<Activity>,
    pub user_utterance: String,
    pub chatbot_response: String,
    pub intent: Option<Activity>,
    pub intent_confidence: Option<f64>,
    pub entity: Option<String>,
    pub entity_confidence: Option<f64>,
    pub score: Option<f64>,
    pub expecting_response: bool,
}

impl TurnRecord {
    pub fn is_welcome(&self) -> bool {
        self.activity.is_none()
    }
}

/// An ordered list of turns with lookup indexes by case, session and user.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    records: Vec<TurnRecord>,
    by_case: BTreeMap<u32, Vec<usize>>,
    by_session: HashMap<String, Vec<usize>>,
    by_user: BTreeMap<String, Vec<usize>>,
    session_order: Vec<String>,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl EventLog {
    pub fn new(records: Vec<TurnRecord>) -> EventLog {
        let mut log = EventLog { records, ..Default::default() };
        for (i, r) in log.records.iter().enumerate() {
            log.by_case.entry(r.case_id).or_default().push(i);
            match log.by_session.get_mut(&r.session_id) {
                Some(rows) => rows.push(i),
                None => {
                    log.by_session.insert(r.session_id.clone(), vec![i]);
                    log.session_order.push(r.session_id.clone());
                }
            }
            log.by_user.entry(r.user_id.clone()).or_default().push(i);
        }
        log
    }

    /// Sorts into the canonical `(case_id, timestamp, turn)` order.
    pub fn sorted(mut records: Vec<TurnRecord>) -> EventLog {
        records.sort_by(|a, b| {
            (a.case_id, a.timestamp, a.turn).cmp(&(b.case_id, b.timestamp, b.turn))
        });
        EventLog::new(records)
    }

    pub fn records(&self) -> &[TurnRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TurnRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&TurnRecord> {
        self.records.get(row)
    }

    pub fn case_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.by_case.keys().copied()
    }

    /// Row indexes of one case, in log order.
    pub fn case_rows(&self, case_id: u32) -> &[usize] {
        self.by_case.get(&case_id).map_or(&[], Vec::as_slice)
    }

    pub fn session_rows(&self, session_id: &str) -> &[usize] {
        self.by_session.get(session_id).map_or(&[], Vec::as_slice)
    }

    pub fn user_rows(&self, user_id: &str) -> &[usize] {
        self.by_user.get(user_id).map_or(&[], Vec::as_slice)
    }

    /// Session ids in order of first appearance.
    pub fn session_ids(&self) -> &[String] {
        &self.session_order
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    /// Timestamp of the case's last `submit_final_nominations` turn.
    pub fn completion_time(&self, case_id: u32) -> Option<NaiveDateTime> {
        self.case_rows(case_id)
            .iter()
            .map(|&i| &self.records[i])
            .filter(|r| r.activity == Some(Activity::SUBMIT_FINAL_NOMINATIONS))
            .map(|r| r.timestamp)
            .max()
    }
}
