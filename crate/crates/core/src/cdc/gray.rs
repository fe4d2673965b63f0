//! Binary/Gray conversion and value-trace checking.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrayError {
    #[error("width must be between 1 and 64, got {0}")]
    Width(u32),
    #[error("value {value} does not fit in {width} bits")]
    OutOfRange { value: u64, width: u32 },
    #[error("line {line}: {message}")]
    Trace { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrayViolation {
    /// `words[index]` and its successor differ in more or fewer than one bit.
    MultiBit { index: usize, changed: u32 },
    OutOfRange { index: usize },
}

impl GrayViolation {
    pub fn index(&self) -> usize {
        match *self {
            GrayViolation::MultiBit { index, .. } | GrayViolation::OutOfRange { index } => index,
        }
    }
}

fn mask(width: u32) -> Result<u64, GrayError> {
    match width {
        1..=63 => Ok((1u64 << width) - 1),
        64 => Ok(u64::MAX),
        w => Err(GrayError::Width(w)),
    }
}

fn check_range(x: u64, width: u32) -> Result<u64, GrayError> {
    let m = mask(width)?;
    if x & !m != 0 {
        return Err(GrayError::OutOfRange { value: x, width });
    }
    Ok(m)
}

pub fn bin_to_gray(x: u64, width: u32) -> Result<u64, GrayError> {
    let m = check_range(x, width)?;
    Ok((x ^ (x >> 1)) & m)
}

pub fn gray_to_bin(g: u64, width: u32) -> Result<u64, GrayError> {
    check_range(g, width)?;
    let mut x = g;
    let mut shift = 1;
    while shift < 64 {
        x ^= x >> shift;
        shift <<= 1;
    }
    Ok(x)
}

/// Checks that consecutive words differ in exactly one bit. The last word
/// is compared with the first only when the trace covers all `2^width`
/// codes.
pub fn check_gray_sequence(words: &[u64], width: u32) -> Result<Result<(), GrayViolation>, GrayError> {
    let m = mask(width)?;
    if let Some(index) = words.iter().position(|w| w & !m != 0) {
        return Ok(Err(GrayViolation::OutOfRange { index }));
    }
    for (index, pair) in words.windows(2).enumerate() {
        let changed = (pair[0] ^ pair[1]).count_ones();
        if changed != 1 {
            return Ok(Err(GrayViolation::MultiBit { index, changed }));
        }
    }
    let full = width < 64 && words.len() as u64 == 1u64 << width;
    if full && words.len() > 1 {
        let changed = (words[words.len() - 1] ^ words[0]).count_ones();
        if changed != 1 {
            return Ok(Err(GrayViolation::MultiBit {
                index: words.len() - 1,
                changed,
            }));
        }
    }
    Ok(Ok(()))
}

/// One word per line: `0x`-prefixed hex, `0b`-prefixed or bare binary.
/// `#` comments and blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<u64>, GrayError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let clean = line.replace('_', "");
        let parsed = if let Some(h) = clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
            u64::from_str_radix(h, 16)
        } else if let Some(b) = clean.strip_prefix("0b").or_else(|| clean.strip_prefix("0B")) {
            u64::from_str_radix(b, 2)
        } else {
            u64::from_str_radix(&clean, 2)
        };
        match parsed {
            Ok(v) => out.push(v),
            Err(_) => {
                return Err(GrayError::Trace {
                    line: i + 1,
                    message: format!("cannot parse `{line}` as a binary or hex word"),
                })
            }
        }
    }
    Ok(out)
}
