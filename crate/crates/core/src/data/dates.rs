//! Gregorian dates: the canonical "<day> <Month> <year>" rendering and
//! semantic parsing of the common surface forms, used both for timestamp
//! formatting and for date-aware answer matching.

use crate::data::tokenize::tokenize;
use crate::{Error, Result};

pub const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Date {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl Date {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        let d = Date { year, month, day };
        if d.is_valid() {
            Ok(d)
        } else {
            Err(Error::Data(format!(
                "invalid date: year {year}, month {month}, day {day}"
            )))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.year >= 1
            && (1..=12).contains(&self.month)
            && self.day >= 1
            && self.day <= days_in_month(self.year, self.month)
    }
}

fn is_leap_year(year: i32) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap_year(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// Canonical human-readable form, e.g. "4 July 1776". No zero padding.
pub fn format_timestamp(date: &Date) -> Result<String> {
    if !date.is_valid() {
        return Err(Error::Data(format!(
            "invalid date: year {}, month {}, day {}",
            date.year, date.month, date.day
        )));
    }
    Ok(format!(
        "{} {} {}",
        date.day,
        MONTHS[(date.month - 1) as usize],
        date.year
    ))
}

fn month_from_name(token: &str) -> Option<u32> {
    MONTHS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(token))
        .map(|i| (i + 1) as u32)
}

fn parse_num(token: &str) -> Option<u32> {
    if token.is_empty() || token.len() > 4 || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

/// Parse a token window as one full date surface form:
/// "D Month YYYY", "Month D YYYY", "Month D , YYYY", or "YYYY - MM - DD"
/// (the hyphenated ISO form after tokenization). The whole window must be
/// consumed.
pub fn parse_date_tokens(tokens: &[String]) -> Option<Date> {
    let date = match tokens {
        [d, m, y] => {
            if let Some(month) = month_from_name(m) {
                Date {
                    year: parse_num(y)? as i32,
                    month,
                    day: parse_num(d)?,
                }
            } else if let Some(month) = month_from_name(d) {
                Date {
                    year: parse_num(y)? as i32,
                    month,
                    day: parse_num(m)?,
                }
            } else {
                return None;
            }
        }
        [m, d, comma, y] if comma == "," => Date {
            year: parse_num(y)? as i32,
            month: month_from_name(m)?,
            day: parse_num(d)?,
        },
        [y, h1, m, h2, d] if h1 == "-" && h2 == "-" => Date {
            year: parse_num(y)? as i32,
            month: parse_num(m)?,
            day: parse_num(d)?,
        },
        _ => return None,
    };
    date.is_valid().then_some(date)
}

/// Parse a whole string as a date if its token sequence is one of the
/// recognized surface forms.
pub fn parse_date_str(s: &str) -> Option<Date> {
    parse_date_tokens(&tokenize(s))
}
