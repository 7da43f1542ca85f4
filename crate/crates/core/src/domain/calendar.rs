//! Business calendar and working-time arithmetic.
//!
//! A working day is the window `workday_start..workday_end` on Monday to
//! Friday (08:00 to 17:00 by default, so one working day is nine hours).
//! Evenings and weekends contribute no working time.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::DomainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusinessCalendar {
    pub process_start: NaiveDateTime,
    /// Last instant that still counts as on time.
    pub regular_deadline: NaiveDateTime,
    /// Start of the forced completion window on the hard-stop day.
    pub hard_deadline: NaiveDateTime,
    pub workday_start: NaiveTime,
    pub workday_end: NaiveTime,
    /// No turn may be logged after this time of day.
    pub evening_limit: NaiveTime,
}

fn at(y: i32, m: u32, d: u32, h: u32, min: u32, s: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, min, s).unwrap()
}

impl Default for BusinessCalendar {
    fn default() -> Self {
        BusinessCalendar {
            process_start: at(2022, 3, 7, 8, 0, 0),
            regular_deadline: at(2022, 3, 28, 23, 59, 59),
            hard_deadline: at(2022, 4, 11, 9, 0, 0),
            workday_start: NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            workday_end: NaiveTime::from_hms_opt(17, 0, 0).unwrap(),
            evening_limit: NaiveTime::from_hms_opt(23, 59, 59).unwrap(),
        }
    }
}

pub fn is_workday(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

impl BusinessCalendar {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.process_start < self.regular_deadline && self.regular_deadline < self.hard_deadline) {
            return Err(DomainError::InvalidConfig(
                "calendar requires process_start < regular_deadline < hard_deadline".into(),
            ));
        }
        if self.workday_start >= self.workday_end || self.workday_end > self.evening_limit {
            return Err(DomainError::InvalidConfig(
                "calendar requires workday_start < workday_end <= evening_limit".into(),
            ));
        }
        Ok(())
    }

    fn day_length_ns(&self) -> i64 {
        (self.workday_end - self.workday_start).num_nanoseconds().unwrap()
    }

    /// Length of one working day.
    pub fn day_length(&self) -> Duration {
        self.workday_end - self.workday_start
    }

    /// End of the forced completion window on the hard-stop day.
    pub fn hard_stop_end(&self) -> NaiveDateTime {
        self.hard_deadline.date().and_time(self.workday_end)
    }

    /// Fractional working days elapsed between `t0` and `t1`.
    pub fn working_days_between(&self, t0: NaiveDateTime, t1: NaiveDateTime) -> Result<f64, DomainError> {
        if t0 > t1 {
            return Err(DomainError::ReversedInterval { start: t0, end: t1 });
        }
        let mut total_ns: i64 = 0;
        let mut day = t0.date();
        while day <= t1.date() {
            if is_workday(day) {
                let open = day.and_time(self.workday_start).max(t0);
                let close = day.and_time(self.workday_end).min(t1);
                if close > open {
                    total_ns += (close - open).num_nanoseconds().unwrap();
                }
            }
            day = day.succ_opt().unwrap();
        }
        Ok(total_ns as f64 / self.day_length_ns() as f64)
    }

    /// Moves `t` forward by `days` of working time.
    ///
    /// Results always fall inside a working window, at or after its opening
    /// and strictly before its close; a span that exactly exhausts a day
    /// lands at the next day's opening.
    pub fn add_working_time(&self, t: NaiveDateTime, days: f64) -> NaiveDateTime {
        assert!(days >= 0.0 && days.is_finite(), "working time must be finite and non-negative");
        if days == 0.0 {
            return t;
        }
        let mut remaining = (days * self.day_length_ns() as f64).round() as i64;
        let mut cursor = self.next_working_instant(t);
        loop {
            let close = cursor.date().and_time(self.workday_end);
            let available = (close - cursor).num_nanoseconds().unwrap();
            if remaining < available {
                return cursor + Duration::nanoseconds(remaining);
            }
            remaining -= available;
            cursor = self.next_opening_after(cursor.date());
        }
    }

    /// Earliest instant at or after `t` that lies inside a working window.
    pub fn next_working_instant(&self, t: NaiveDateTime) -> NaiveDateTime {
        let date = t.date();
        if is_workday(date) {
            if t.time() < self.workday_start {
                return date.and_time(self.workday_start);
            }
            if t.time() < self.workday_end {
                return t;
            }
        }
        self.next_opening_after(date)
    }

    fn next_opening_after(&self, date: NaiveDate) -> NaiveDateTime {
        let mut d = date.succ_opt().unwrap();
        while !is_workday(d) {
            d = d.succ_opt().unwrap();
        }
        d.and_time(self.workday_start)
    }

    /// Whether `t` lies in a working window (start inclusive, end inclusive).
    pub fn in_working_window(&self, t: NaiveDateTime) -> bool {
        is_workday(t.date()) && t.time() >= self.workday_start && t.time() <= self.workday_end
    }
}
