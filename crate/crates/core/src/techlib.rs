//! Technology library: per-cell timing parameters.
//!
//! Two libraries are built in. `fpga` models a Kintex UltraScale+ CLB
//! (FDRE flip-flop, LUT6) and `asic` a 7nm SVT standard-cell flow (DFF_SVT,
//! NAND2). Both can be replaced by a `.tlib` file:
//!
//! ```text
//! library NAME
//! ff   NAME setup=NS hold=NS cq=NS [cqmin=NS] [tau=NS] [tw=NS]
//! comb NAME delay=NS [dmin=NS] inputs=N
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LibraryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: negative time for `{key}`")]
    NegativeTime { line: usize, key: String },
    #[error("line {line}: duplicate cell `{name}`")]
    DuplicateCell { line: usize, name: String },
    #[error("unresolved cell `{0}`")]
    NotFound(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqCell {
    pub setup: f64,
    pub hold: f64,
    pub cq_max: f64,
    pub cq_min: f64,
    /// Metastability resolution time constant.
    pub tau: Option<f64>,
    /// Metastability window.
    pub tw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombCell {
    pub delay_max: f64,
    pub delay_min: f64,
    pub inputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellSpec {
    Sequential(SeqCell),
    Combinational(CombCell),
}

impl CellSpec {
    pub fn as_sequential(&self) -> Option<&SeqCell> {
        match self {
            CellSpec::Sequential(s) => Some(s),
            CellSpec::Combinational(_) => None,
        }
    }

    pub fn as_combinational(&self) -> Option<&CombCell> {
        match self {
            CellSpec::Combinational(c) => Some(c),
            CellSpec::Sequential(_) => None,
        }
    }

    pub fn is_sequential(&self) -> bool {
        matches!(self, CellSpec::Sequential(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    pub name: String,
    pub cells: BTreeMap<String, CellSpec>,
}

impl Library {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
        }
    }

    pub fn lookup(&self, cell: &str) -> Result<&CellSpec, LibraryError> {
        self.cells
            .get(cell)
            .ok_or_else(|| LibraryError::NotFound(cell.to_string()))
    }

    pub fn sequential(&self, cell: &str) -> Result<&SeqCell, LibraryError> {
        self.lookup(cell)?
            .as_sequential()
            .ok_or_else(|| LibraryError::NotFound(cell.to_string()))
    }

    pub fn combinational(&self, cell: &str) -> Result<&CombCell, LibraryError> {
        self.lookup(cell)?
            .as_combinational()
            .ok_or_else(|| LibraryError::NotFound(cell.to_string()))
    }

    pub fn with_ff(mut self, name: &str, cell: SeqCell) -> Self {
        self.cells.insert(name.to_string(), CellSpec::Sequential(cell));
        self
    }

    pub fn with_comb(mut self, name: &str, cell: CombCell) -> Self {
        self.cells.insert(name.to_string(), CellSpec::Combinational(cell));
        self
    }

    /// Serializes back to `.tlib` text. Every field is written explicitly.
    pub fn to_tlib(&self) -> String {
        let mut out = format!("library {}\n", self.name);
        for (name, spec) in &self.cells {
            match spec {
                CellSpec::Sequential(s) => {
                    let _ = write!(
                        out,
                        "ff {name} setup={} hold={} cq={} cqmin={}",
                        s.setup, s.hold, s.cq_max, s.cq_min
                    );
                    if let Some(tau) = s.tau {
                        let _ = write!(out, " tau={tau}");
                    }
                    if let Some(tw) = s.tw {
                        let _ = write!(out, " tw={tw}");
                    }
                }
                CellSpec::Combinational(c) => {
                    let _ = write!(
                        out,
                        "comb {name} delay={} dmin={} inputs={}",
                        c.delay_max, c.delay_min, c.inputs
                    );
                }
            }
            out.push('\n');
        }
        out
    }
}

fn seq(setup: f64, hold: f64, cq: f64, tau: f64, tw: f64) -> SeqCell {
    SeqCell {
        setup,
        hold,
        cq_max: cq,
        cq_min: cq,
        tau: Some(tau),
        tw: Some(tw),
    }
}

fn comb(delay: f64, inputs: usize) -> CombCell {
    CombCell {
        delay_max: delay,
        delay_min: delay,
        inputs,
    }
}

/// Kintex UltraScale+ CLB timing.
///
/// `tau`/`tw` on FDRE are placeholders (0.100 ns each); override them in a
/// `.tlib` when characterized values are available. `LUT2` shares the LUT6
/// site delay, `BUFG` is a zero-delay clock buffer for ideal clock trees.
pub fn builtin_fpga() -> Library {
    Library::new("fpga")
        .with_ff("FDRE", seq(0.180, 0.120, 0.450, 0.100, 0.100))
        .with_comb("LUT6", comb(0.320, 6))
        .with_comb("LUT2", comb(0.320, 2))
        .with_comb("BUFG", comb(0.0, 1))
}

/// 7nm FinFET SVT standard cells.
///
/// `AOI21` is the typical logic level (0.035 ns) and is the cell used for
/// per-level logic comparisons. `tau`/`tw` on DFF_SVT are placeholders
/// (0.020 ns each).
pub fn builtin_asic() -> Library {
    Library::new("asic")
        .with_ff("DFF_SVT", seq(0.045, 0.035, 0.085, 0.020, 0.020))
        .with_comb("NAND2", comb(0.025, 2))
        .with_comb("AOI21", comb(0.035, 3))
        .with_comb("XOR2", comb(0.040, 2))
        .with_comb("CLKBUF", comb(0.0, 1))
}

/// Resolves `fpga` or `asic`.
pub fn builtin(name: &str) -> Option<Library> {
    match name {
        "fpga" => Some(builtin_fpga()),
        "asic" => Some(builtin_asic()),
        _ => None,
    }
}

/// Representative cells used when comparing the two built-in technologies.
pub struct TechProfile {
    pub ff: &'static str,
    pub logic_level: &'static str,
}

pub const FPGA_PROFILE: TechProfile = TechProfile {
    ff: "FDRE",
    logic_level: "LUT6",
};

pub const ASIC_PROFILE: TechProfile = TechProfile {
    ff: "DFF_SVT",
    logic_level: "AOI21",
};

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_library(text: &str) -> Result<Library, LibraryError> {
    let mut lib: Option<Library> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |message: String| LibraryError::Syntax { line, message };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "library" => {
                if lib.is_some() {
                    return Err(syntax("`library` given twice".into()));
                }
                match tokens.as_slice() {
                    [_, name] if is_ident(name) => lib = Some(Library::new(*name)),
                    _ => return Err(syntax("expected `library NAME`".into())),
                }
            }
            kind @ ("ff" | "comb") => {
                let lib = lib
                    .as_mut()
                    .ok_or_else(|| syntax("`library` must come first".into()))?;
                if tokens.len() < 2 || !is_ident(tokens[1]) {
                    return Err(syntax(format!("expected `{kind} NAME key=value...`")));
                }
                let name = tokens[1];
                let mut fields = BTreeMap::new();
                for tok in &tokens[2..] {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| syntax(format!("expected key=value, got `{tok}`")))?;
                    if fields.insert(k, v).is_some() {
                        return Err(syntax(format!("`{k}` given twice")));
                    }
                }
                let spec = if kind == "ff" {
                    parse_seq(line, &mut fields)?
                } else {
                    parse_comb(line, &mut fields)?
                };
                if let Some(k) = fields.keys().next() {
                    return Err(syntax(format!("unknown key `{k}` for {kind} cell")));
                }
                if lib.cells.contains_key(name) {
                    return Err(LibraryError::DuplicateCell {
                        line,
                        name: name.to_string(),
                    });
                }
                lib.cells.insert(name.to_string(), spec);
            }
            other => return Err(syntax(format!("unknown directive `{other}`"))),
        }
    }
    lib.ok_or(LibraryError::Syntax {
        line: 0,
        message: "missing `library` line".into(),
    })
}

fn take_time(
    line: usize,
    fields: &mut BTreeMap<&str, &str>,
    key: &str,
) -> Result<Option<f64>, LibraryError> {
    let Some(v) = fields.remove(key) else {
        return Ok(None);
    };
    let t: f64 = v.parse().map_err(|_| LibraryError::Syntax {
        line,
        message: format!("`{key}` is not a number: `{v}`"),
    })?;
    if !t.is_finite() {
        return Err(LibraryError::Syntax {
            line,
            message: format!("`{key}` is not finite"),
        });
    }
    if t < 0.0 {
        return Err(LibraryError::NegativeTime {
            line,
            key: key.to_string(),
        });
    }
    Ok(Some(t))
}

fn require(line: usize, key: &str, v: Option<f64>) -> Result<f64, LibraryError> {
    v.ok_or_else(|| LibraryError::Syntax {
        line,
        message: format!("missing `{key}=`"),
    })
}

fn parse_seq(line: usize, fields: &mut BTreeMap<&str, &str>) -> Result<CellSpec, LibraryError> {
    let setup = require(line, "setup", take_time(line, fields, "setup")?)?;
    let hold = require(line, "hold", take_time(line, fields, "hold")?)?;
    let cq_max = require(line, "cq", take_time(line, fields, "cq")?)?;
    let cq_min = take_time(line, fields, "cqmin")?.unwrap_or(cq_max);
    let tau = take_time(line, fields, "tau")?;
    let tw = take_time(line, fields, "tw")?;
    if cq_min > cq_max {
        return Err(LibraryError::Syntax {
            line,
            message: "cqmin exceeds cq".into(),
        });
    }
    for (key, v) in [("tau", tau), ("tw", tw)] {
        if v == Some(0.0) {
            return Err(LibraryError::Syntax {
                line,
                message: format!("`{key}` must be positive"),
            });
        }
    }
    Ok(CellSpec::Sequential(SeqCell {
        setup,
        hold,
        cq_max,
        cq_min,
        tau,
        tw,
    }))
}

fn parse_comb(line: usize, fields: &mut BTreeMap<&str, &str>) -> Result<CellSpec, LibraryError> {
    let delay_max = require(line, "delay", take_time(line, fields, "delay")?)?;
    let delay_min = take_time(line, fields, "dmin")?.unwrap_or(delay_max);
    if delay_min > delay_max {
        return Err(LibraryError::Syntax {
            line,
            message: "dmin exceeds delay".into(),
        });
    }
    let inputs = fields.remove("inputs").ok_or_else(|| LibraryError::Syntax {
        line,
        message: "missing `inputs=`".into(),
    })?;
    let inputs: usize = inputs.parse().map_err(|_| LibraryError::Syntax {
        line,
        message: format!("`inputs` is not a count: `{inputs}`"),
    })?;
    if inputs == 0 {
        return Err(LibraryError::Syntax {
            line,
            message: "`inputs` must be at least 1".into(),
        });
    }
    Ok(CellSpec::Combinational(CombCell {
        delay_max,
        delay_min,
        inputs,
    }))
}
