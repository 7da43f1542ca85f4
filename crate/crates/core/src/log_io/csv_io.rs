use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use super::{EventLog, TurnRecord};
use crate::domain::{Activity, Role};
use crate::error::LogError;

/// Header of the log file, in order.
pub const COLUMNS: [&str; 15] = [
    "case_id",
    "session_id",
    "role",
    "user_id",
    "timestamp",
    "turn",
    "activity",
    "user utterance",
    "chatbot response",
    "intent",
    "intent_confidence",
    "entity",
    "entity_confidence",
    "score",
    "expecting_response",
];

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Shortest round-tripping decimal, always with a fractional part (`1.0`, `0.898`).
pub fn format_float(v: f64) -> String {
    let s = format!("{v}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        s + ".0"
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn bool_text(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

pub fn write_csv(log: &EventLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    write_csv_to(log, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(log: &EventLog, out: W) -> Result<(), LogError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(COLUMNS)?;
    for r in log.records() {
        w.write_record([
            r.case_id.to_string().as_str(),
            &r.session_id,
            r.role.as_str(),
            &r.user_id,
            &r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            &r.turn.to_string(),
            r.activity.map_or("", Activity::label),
            &r.user_utterance,
            &r.chatbot_response,
            r.intent.map_or("", Activity::label),
            &opt_float(r.intent_confidence),
            r.entity.as_deref().unwrap_or(""),
            &opt_float(r.entity_confidence),
            &opt_float(r.score),
            bool_text(r.expecting_response),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<EventLog, LogError> {
    read_csv_from(BufReader::new(File::open(path)?))
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a [usize; 15],
    row: usize,
}

impl Row<'_> {
    fn text(&self, col: usize) -> &str {
        self.record.get(self.index[col]).unwrap_or("")
    }

    fn err(&self, col: usize, message: impl Into<String>) -> LogError {
        LogError::Cell { row: self.row, column: COLUMNS[col].to_string(), message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T, LogError>
    where
        T::Err: std::fmt::Display,
    {
        self.text(col).trim().parse().map_err(|e: T::Err| self.err(col, format!("{e} ({:?})", self.text(col))))
    }

    fn opt_activity(&self, col: usize) -> Result<Option<Activity>, LogError> {
        match self.text(col).trim() {
            "" => Ok(None),
            s => Activity::from_label(s).map(Some).map_err(|e| self.err(col, e.to_string())),
        }
    }

    fn opt_float(&self, col: usize) -> Result<Option<f64>, LogError> {
        match self.text(col).trim() {
            "" => Ok(None),
            s => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(self.err(col, format!("not a finite number ({s:?})"))),
            },
        }
    }

    fn opt_text(&self, col: usize) -> Option<String> {
        Some(self.text(col)).filter(|s| !s.is_empty()).map(str::to_string)
    }

    fn timestamp(&self, col: usize) -> Result<NaiveDateTime, LogError> {
        let s = self.text(col).trim();
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
            .map_err(|e| self.err(col, format!("{e} ({s:?})")))
    }

    fn boolean(&self, col: usize) -> Result<bool, LogError> {
        match self.text(col).trim().to_ascii_lowercase().as_str() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(self.err(col, format!("not a boolean ({other:?})"))),
        }
    }
}

/// Parses a log. Row numbers in errors count data rows from 1.
pub fn read_csv_from<R: Read>(input: R) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; 15];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))?;
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, result) in reader.records().enumerate() {
        let record = result?;
        let row = Row { record: &record, index: &index, row: i + 1 };
        let turn: u32 = row.parse(5)?;
        let session_id = row.text(1).to_string();
        if !seen.insert((session_id.clone(), turn)) {
            return Err(LogError::DuplicateTurn { row: i + 1, session_id, turn });
        }
        let role: Role = row.text(2).parse().map_err(|e: crate::DomainError| row.err(2, e.to_string()))?;
        records.push(TurnRecord {
            case_id: row.parse(0)?,
            session_id,
            role,
            user_id: row.text(3).to_string(),
            timestamp: row.timestamp(4)?,
            turn,
            activity: row.opt_activity(6)?,
            user_utterance: row.text(7).to_string(),
            chatbot_response: row.text(8).to_string(),
            intent: row.opt_activity(9)?,
            intent_confidence: row.opt_float(10)?,
            entity: row.opt_text(11),
            entity_confidence: row.opt_float(12)?,
            score: row.opt_float(13)?,
            expecting_response: row.boolean(14)?,
        });
    }
    Ok(EventLog::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "case_id,session_id,role,user_id,timestamp,turn,activity,user utterance,chatbot response,intent,intent_confidence,entity,entity_confidence,score,expecting_response\n\
1,M7vkTk2f537I,team leader,Robert North,2022-03-17T11:20:21,2,report_lead_time,view lead time table,Lead Time Report,report_lead_time,0.898,Troy Donovan,1.0,0.862,False\n";

    #[test]
    fn parses_the_documented_example_row() {
        let log = read_csv_from(EXAMPLE.as_bytes()).unwrap();
        let r = &log.records()[0];
        assert_eq!(r.case_id, 1);
        assert_eq!(r.session_id, "M7vkTk2f537I");
        assert_eq!(r.role, Role::TeamLeader);
        assert_eq!(r.user_id, "Robert North");
        assert_eq!(r.timestamp.format(TIMESTAMP_FORMAT).to_string(), "2022-03-17T11:20:21");
        assert_eq!(r.turn, 2);
        assert_eq!(r.activity, Some(Activity::REPORT_LEAD_TIME));
        assert_eq!(r.intent_confidence, Some(0.898));
        assert_eq!(r.entity.as_deref(), Some("Troy Donovan"));
        assert_eq!(r.entity_confidence, Some(1.0));
        assert_eq!(r.score, Some(0.862));
        assert!(!r.expecting_response);

        let mut out = Vec::new();
        write_csv_to(&log, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), EXAMPLE);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let text = EXAMPLE.replace(",expecting_response", "").replace(",False", "");
        match read_csv_from(text.as_bytes()) {
            Err(LogError::MissingColumn(c)) => assert_eq!(c, "expecting_response"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_cells_name_row_and_column() {
        let text = EXAMPLE.replace("0.898", "high");
        match read_csv_from(text.as_bytes()) {
            Err(LogError::Cell { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "intent_confidence");
            }
            other => panic!("expected cell error, got {other:?}"),
        }
        let text = EXAMPLE.replace("2022-03-17T11:20:21", "17/03/2022");
        assert!(matches!(read_csv_from(text.as_bytes()), Err(LogError::Cell { column, .. }) if column == "timestamp"));
    }

    #[test]
    fn duplicate_turns_are_rejected() {
        let row = EXAMPLE.lines().nth(1).unwrap();
        let text = format!("{EXAMPLE}{row}\n");
        assert!(matches!(read_csv_from(text.as_bytes()), Err(LogError::DuplicateTurn { row: 2, turn: 2, .. })));
    }

    #[test]
    fn floats_keep_a_fraction() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(0.898), "0.898");
        assert_eq!(format_float(0.0), "0.0");
    }
}
