//! Fixed-format number rendering shared by text and JSON reports.
//!
//! Times print with exactly three decimals (round half to even on the
//! binary value), frequencies with one, and seconds-scale reliability
//! figures in scientific notation. JSON numbers keep the same text.

use std::str::FromStr;

use serde_json::{Number, Value};

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // -0.000 reads as a violation; normalize it away
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Nanoseconds with three decimals.
pub fn ns(v: f64) -> String {
    fixed(v, 3)
}

pub fn mhz(v: f64) -> String {
    fixed(v, 1)
}

pub fn sci(v: f64) -> String {
    let s = format!("{v:.6e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

fn number(text: &str) -> Value {
    match Number::from_str(text) {
        Ok(n) => Value::Number(n),
        Err(_) => Value::Null,
    }
}

pub fn ns_json(v: f64) -> Value {
    number(&ns(v))
}

pub fn mhz_json(v: f64) -> Value {
    number(&mhz(v))
}

pub fn sci_json(v: f64) -> Value {
    if v.is_finite() {
        number(&sci(v))
    } else {
        Value::Null
    }
}

/// Plain number with up to six decimals, for log values.
pub fn log_json(v: f64) -> Value {
    number(&fixed(v, 6))
}
