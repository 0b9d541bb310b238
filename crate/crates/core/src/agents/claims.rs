//! Numeral detection for free-text claim fields.
//!
//! A numeral is a maximal run of ASCII digits, optionally joined by `.` or
//! `,` to further digit runs ("1.250.000,00", "4.5", "2023"). Any text field
//! containing one is treated as a quantitative claim.

use std::sync::LazyLock;

use regex::Regex;

pub const NUMERAL_PATTERN: &str = r"\d+(?:[.,]\d+)*";

static NUMERAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(NUMERAL_PATTERN).expect("valid pattern"));

pub fn numeral_tokens(text: &str) -> Vec<String> {
    NUMERAL
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect()
}

pub fn contains_numeral(text: &str) -> bool {
    NUMERAL.is_match(text)
}
