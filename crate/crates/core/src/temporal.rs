//! Temporal literals: bare years and calendar dates.
//!
//! A year `Y` is treated as the closed day interval `[Y-01-01, Y-12-31]`, a
//! date as a single-day interval. Comparisons between values of different
//! granularity work on those intervals.

use std::cmp::Ordering;

use chrono::{Datelike, Days, NaiveDate};

use crate::kg::Literal;
use crate::vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Year,
    Day,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeValue {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub granularity: Granularity,
}

impl TimeValue {
    pub fn year(y: i32) -> Option<Self> {
        Some(TimeValue {
            start: NaiveDate::from_ymd_opt(y, 1, 1)?,
            end: NaiveDate::from_ymd_opt(y, 12, 31)?,
            granularity: Granularity::Year,
        })
    }

    pub fn day(d: NaiveDate) -> Self {
        TimeValue { start: d, end: d, granularity: Granularity::Day }
    }

    /// Parses `YYYY` / `-YYYY` or `YYYY-MM-DD`, accepting only untyped,
    /// integer, gYear, date or string literals.
    pub fn from_literal(lit: &Literal) -> Option<Self> {
        if lit.language().is_some() {
            return None;
        }
        match lit.datatype() {
            None | Some(vocab::XSD_INTEGER) | Some(vocab::XSD_GYEAR) | Some(vocab::XSD_DATE)
            | Some(vocab::XSD_STRING) => {}
            Some(_) => return None,
        }
        parse_lexical(lit.lexical())
    }

    /// True iff the whole of `self` lies strictly after the whole of `other`.
    pub fn after(&self, other: &TimeValue) -> bool {
        self.start > other.end
    }

    /// True iff the whole of `self` lies strictly before the whole of `other`.
    pub fn before(&self, other: &TimeValue) -> bool {
        self.end < other.start
    }

    /// `self` starts no earlier than `other` starts.
    pub fn not_before_start_of(&self, other: &TimeValue) -> bool {
        self.start >= other.start
    }

    /// `self` ends no later than `other` ends.
    pub fn not_after_end_of(&self, other: &TimeValue) -> bool {
        self.end <= other.end
    }
}

fn parse_lexical(s: &str) -> Option<TimeValue> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let bytes = body.as_bytes();
    let all_digits = |b: &[u8]| !b.is_empty() && b.iter().all(u8::is_ascii_digit);
    if bytes.len() == 4 && all_digits(bytes) {
        let y: i32 = body.parse().ok()?;
        return TimeValue::year(if neg { -y } else { y });
    }
    if bytes.len() == 10 && bytes[4] == b'-' && bytes[7] == b'-' {
        if !(all_digits(&bytes[..4]) && all_digits(&bytes[5..7]) && all_digits(&bytes[8..])) {
            return None;
        }
        let y: i32 = body[..4].parse().ok()?;
        let m: u32 = body[5..7].parse().ok()?;
        let d: u32 = body[8..].parse().ok()?;
        return NaiveDate::from_ymd_opt(if neg { -y } else { y }, m, d).map(TimeValue::day);
    }
    None
}

pub fn is_temporal(lit: &Literal) -> bool {
    TimeValue::from_literal(lit).is_some()
}

/// The literal one granularity unit before `lit` (previous year or day),
/// written with the same datatype.
pub fn previous_unit(lit: &Literal) -> Option<Literal> {
    shift(lit, -1)
}

/// The literal one granularity unit after `lit`.
pub fn next_unit(lit: &Literal) -> Option<Literal> {
    shift(lit, 1)
}

fn shift(lit: &Literal, delta: i32) -> Option<Literal> {
    let tv = TimeValue::from_literal(lit)?;
    let lexical = match tv.granularity {
        Granularity::Year => format_year(tv.start.year() + delta),
        Granularity::Day => {
            let d = if delta < 0 {
                tv.start.checked_sub_days(Days::new(delta.unsigned_abs() as u64))?
            } else {
                tv.start.checked_add_days(Days::new(delta as u64))?
            };
            format_date(d)
        }
    };
    Some(match lit.datatype() {
        Some(dt) => Literal::typed(lexical, dt),
        None => Literal::plain(lexical),
    })
}

fn format_year(y: i32) -> String {
    if y < 0 {
        format!("-{:04}", -y)
    } else {
        format!("{y:04}")
    }
}

fn format_date(d: NaiveDate) -> String {
    format!("{}-{:02}-{:02}", format_year(d.year()), d.month(), d.day())
}

/// Orders temporal literals by interval end, then start.
pub fn cmp_end(a: &TimeValue, b: &TimeValue) -> Ordering {
    a.end.cmp(&b.end).then(a.start.cmp(&b.start))
}
