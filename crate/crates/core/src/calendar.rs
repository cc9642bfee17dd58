//! Year-month handling for the EMR tables.
//!
//! Follow-up time maps to calendar time from a 2017-01-01 origin using
//! 365.25-day years, truncated to the month. The reverse map places every
//! recorded month on its 15th day.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};

use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.25;

pub fn origin() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid origin date")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Parse {
                input: format!("{year}-{month}"),
                message: "month must be 1..=12".to_owned(),
            });
        }
        Ok(Self { year, month })
    }

    /// Months since year 0, for ranges and arithmetic.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(12);
        let month = ordinal.rem_euclid(12) + 1;
        Self {
            year: i32::try_from(year).expect("year in range"),
            month: u32::try_from(month).expect("month in range"),
        }
    }

    /// `first..=last` in calendar order.
    pub fn range_inclusive(first: YearMonth, last: YearMonth) -> Vec<YearMonth> {
        (first.ordinal()..=last.ordinal())
            .map(YearMonth::from_ordinal)
            .collect()
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: &str| Error::Parse {
            input: s.to_owned(),
            message: message.to_owned(),
        };
        let bytes = s.as_bytes();
        if bytes.len() != 7 || bytes[4] != b'-' {
            return Err(bad("expected YYYY-MM"));
        }
        if !s[..4].bytes().chain(s[5..].bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad("expected YYYY-MM"));
        }
        let year: i32 = s[..4].parse().map_err(|_| bad("bad year"))?;
        let month: u32 = s[5..].parse().map_err(|_| bad("bad month"))?;
        YearMonth::new(year, month).map_err(|_| bad("month must be 01..12"))
    }
}

/// Calendar month reached `years` of follow-up after the origin.
pub fn month_after_origin(years: f64) -> Result<YearMonth> {
    if !(years.is_finite() && years >= 0.0) {
        return Err(Error::invalid(format!("follow-up time {years} must be finite and >= 0")));
    }
    // whole days; the fractional day never moves a date across a month boundary
    let days = (years * DAYS_PER_YEAR).floor() as u64;
    let date = origin()
        .checked_add_days(Days::new(days))
        .ok_or_else(|| Error::invalid(format!("follow-up time {years} overflows the calendar")))?;
    Ok(YearMonth::of_date(date))
}

/// Follow-up years from the origin to the 15th of `ym`.
pub fn years_to_mid_month(ym: YearMonth) -> f64 {
    let date = NaiveDate::from_ymd_opt(ym.year, ym.month, 15).expect("day 15 exists in every month");
    (date - origin()).num_days() as f64 / DAYS_PER_YEAR
}
