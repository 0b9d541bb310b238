//! Currency amounts as printed in filings.
//!
//! Greek statements write `1.250.000,00` (dot thousands, comma decimals);
//! anglophone ones write `1,250,000.00`. When both separators appear the
//! rightmost one is the decimal mark. A lone separator followed by exactly
//! three digits is read as a thousands separator. Parentheses or a leading
//! minus sign mark negatives.

use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberConvention {
    /// `.` groups thousands, `,` marks decimals.
    Greek,
    /// `,` groups thousands, `.` marks decimals.
    Anglophone,
    /// No separators at all.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAmount {
    #[serde(with = "rust_decimal::serde::str")]
    pub value: Decimal,
    pub convention: NumberConvention,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("empty amount")]
    Empty,
    #[error("malformed amount {0:?}")]
    Malformed(String),
}

pub fn parse_amount(raw: &str) -> Result<ParsedAmount, AmountError> {
    let malformed = || AmountError::Malformed(raw.to_string());
    let mut s = raw.trim();
    if s.is_empty() {
        return Err(AmountError::Empty);
    }
    let mut negative = false;
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        negative = true;
        s = inner.trim();
    }
    s = strip_currency(s);
    if let Some(rest) = s.strip_prefix('-').or_else(|| s.strip_prefix('\u{2212}')) {
        if negative {
            return Err(malformed());
        }
        negative = true;
        s = rest.trim_start();
    }
    s = strip_currency(s);
    if s.is_empty()
        || !s
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
    {
        return Err(malformed());
    }

    let last_dot = s.rfind('.');
    let last_comma = s.rfind(',');
    let (thousands, decimal, convention) = match (last_dot, last_comma) {
        (None, None) => (None, None, NumberConvention::Plain),
        (Some(d), Some(c)) if c > d => (Some('.'), Some(','), NumberConvention::Greek),
        (Some(_), Some(_)) => (Some(','), Some('.'), NumberConvention::Anglophone),
        (Some(_), None) => lone_separator(s, '.'),
        (None, Some(_)) => lone_separator(s, ','),
    };

    let (int_part, frac_part) = match decimal {
        Some(mark) => {
            let at = s.rfind(mark).expect("decimal mark present");
            (&s[..at], Some(&s[at + 1..]))
        }
        None => (s, None),
    };
    if frac_part.is_some_and(|f| f.is_empty() || !f.chars().all(|c| c.is_ascii_digit())) {
        return Err(malformed());
    }
    let digits = match thousands {
        Some(sep) => grouped_digits(int_part, sep).ok_or_else(malformed)?,
        None if int_part.chars().all(|c| c.is_ascii_digit()) && !int_part.is_empty() => {
            int_part.to_string()
        }
        None => return Err(malformed()),
    };
    let text = match frac_part {
        Some(f) => format!("{}{digits}.{f}", if negative { "-" } else { "" }),
        None => format!("{}{digits}", if negative { "-" } else { "" }),
    };
    let value = Decimal::from_str(&text).map_err(|_| malformed())?;
    Ok(ParsedAmount { value, convention })
}

fn strip_currency(s: &str) -> &str {
    let s = s.trim();
    let s = s
        .strip_prefix('€')
        .or_else(|| s.strip_prefix("EUR"))
        .unwrap_or(s)
        .trim();
    s.strip_suffix('€')
        .or_else(|| s.strip_suffix("EUR"))
        .unwrap_or(s)
        .trim()
}

/// Interprets a number with a single kind of separator.
fn lone_separator(s: &str, sep: char) -> (Option<char>, Option<char>, NumberConvention) {
    let occurrences = s.matches(sep).count();
    let tail = s.len() - s.rfind(sep).expect("separator present") - 1;
    let as_thousands = occurrences > 1 || tail == 3;
    let convention = match (sep, as_thousands) {
        ('.', true) | (',', false) => NumberConvention::Greek,
        _ => NumberConvention::Anglophone,
    };
    if as_thousands {
        (Some(sep), None, convention)
    } else {
        (None, Some(sep), convention)
    }
}

/// `1.250.000` with `.` → "1250000"; first group 1-3 digits, the rest exactly 3.
fn grouped_digits(s: &str, sep: char) -> Option<String> {
    let groups: Vec<&str> = s.split(sep).collect();
    let (first, rest) = groups.split_first()?;
    let digits_only = |g: &str| !g.is_empty() && g.chars().all(|c| c.is_ascii_digit());
    if !digits_only(first) || first.len() > 3 {
        return None;
    }
    if rest.iter().any(|g| g.len() != 3 || !digits_only(g)) {
        return None;
    }
    Some(groups.concat())
}
