//! ISO-8601 conversions for the core's integer instants and days.

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use plumeseg_core::time::{Day, Timestamp};

use crate::error::{AppError, Result};

const EPOCH: NaiveDate = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");

pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(t.0, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| t.0.to_string())
}

/// Accepts RFC 3339 instants and bare dates (midnight UTC).
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Ok(Timestamp(d.timestamp()));
    }
    if let Ok(d) = s.parse::<chrono::NaiveDateTime>() {
        return Ok(Timestamp(d.and_utc().timestamp()));
    }
    parse_day(s).map(Day::start).map_err(|_| AppError::format(format!("invalid timestamp {s:?}")))
}

pub fn format_day(d: Day) -> String {
    EPOCH
        .checked_add_signed(chrono::TimeDelta::days(d.0))
        .map(|n| n.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| d.0.to_string())
}

pub fn parse_day(s: &str) -> Result<Day> {
    let d = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| AppError::format(format!("invalid date {s:?}")))?;
    Ok(Day((d - EPOCH).num_days()))
}
