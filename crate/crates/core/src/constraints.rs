//! SDC subset: parsing and resolution against a netlist.
//!
//! Supported commands: `create_clock`, `set_input_delay`, `set_output_delay`,
//! `set_false_path` (clock to clock only) and `set_multicycle_path`. Object
//! queries take a single literal name: `[get_ports X]`, `[get_clocks X]`
//! (or `[get_clks X]`) and `[get_cells X]`. Lines ending in `\` continue.
//!
//! A clock is named after its source port unless `-name` is given. Clocks
//! are ideal: no latency, no uncertainty.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::fmt::ns_json;
use crate::netlist::{Direction, Netlist, Source};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdcError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown command `{command}`")]
    UnknownCommand { line: usize, command: String },
    #[error("line {line}: malformed query: {message}")]
    MalformedQuery { line: usize, message: String },
    #[error("line {line}: `{command}` requires `{flag}`")]
    MissingFlag {
        line: usize,
        command: String,
        flag: String,
    },
    #[error("line {line}: unsupported: {message}")]
    Unsupported { line: usize, message: String },
    #[error("line {line}: duplicate {what}")]
    Duplicate { line: usize, what: String },
    #[error("unknown port {0}")]
    UnknownPort(String),
    #[error("{0} is not an input port")]
    NotAnInput(String),
    #[error("{0} is not an output port")]
    NotAnOutput(String),
    #[error("unknown flip-flop instance {0}")]
    UnknownInstance(String),
    #[error("unknown clock {0}")]
    UnknownClock(String),
    #[error("{ff}: clock net `{net}` is not reached by any defined clock")]
    UnconstrainedClock { ff: String, net: String },
    #[error("{ff}: clock net `{net}` is reached by several clocks ({clocks})")]
    AmbiguousClock {
        ff: String,
        net: String,
        clocks: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdcMode {
    #[default]
    Strict,
    /// Unknown or unsupported commands become warnings and are skipped.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockDef {
    pub name: String,
    pub period: f64,
    pub source_port: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoDelay {
    pub port: String,
    pub clock: String,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FalsePath {
    pub from_clock: String,
    pub to_clock: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multicycle {
    pub from: String,
    pub to: String,
    pub setup: u32,
}

/// Constraints as written, in file order, not yet bound to a design.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdcConstraints {
    pub clocks: Vec<ClockDef>,
    pub input_delays: Vec<IoDelay>,
    pub output_delays: Vec<IoDelay>,
    pub false_paths: Vec<FalsePath>,
    pub multicycles: Vec<Multicycle>,
}

impl SdcConstraints {
    pub fn to_json(&self) -> Value {
        let io = |v: &[IoDelay]| -> Vec<Value> {
            v.iter()
                .map(|d| json!({"port": d.port, "clock": d.clock, "delay": ns_json(d.delay)}))
                .collect()
        };
        json!({
            "clocks": self.clocks.iter().map(|c| json!({
                "name": c.name, "period": ns_json(c.period), "source_port": c.source_port
            })).collect::<Vec<_>>(),
            "input_delays": io(&self.input_delays),
            "output_delays": io(&self.output_delays),
            "false_paths": self.false_paths.iter().map(|f| json!({
                "from_clock": f.from_clock, "to_clock": f.to_clock
            })).collect::<Vec<_>>(),
            "multicycle": self.multicycles.iter().map(|m| json!({
                "from": m.from, "to": m.to, "setup": m.setup
            })).collect::<Vec<_>>(),
        })
    }
}

/// Constraints bound to netlist objects, plus the clock domain of each ff.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub clocks: BTreeMap<String, ClockDef>,
    pub input_delays: BTreeMap<String, (String, f64)>,
    pub output_delays: BTreeMap<String, (String, f64)>,
    pub false_paths: BTreeSet<(String, String)>,
    pub multicycle: BTreeMap<(String, String), u32>,
    pub domains: BTreeMap<String, String>,
}

impl ConstraintSet {
    pub fn domain_of(&self, ff: &str) -> Option<&str> {
        self.domains.get(ff).map(String::as_str)
    }

    pub fn period(&self, clock: &str) -> Option<f64> {
        self.clocks.get(clock).map(|c| c.period)
    }

    pub fn multicycle(&self, from: &str, to: &str) -> u32 {
        self.multicycle
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(1)
    }

    pub fn is_false_path(&self, from_clock: &str, to_clock: &str) -> bool {
        self.false_paths
            .contains(&(from_clock.to_string(), to_clock.to_string()))
    }

    /// Clock whose source port is `port`.
    pub fn clock_on_port(&self, port: &str) -> Option<&ClockDef> {
        self.clocks.values().find(|c| c.source_port == port)
    }

    pub fn set_period(&mut self, clock: &str, period: f64) {
        if let Some(c) = self.clocks.get_mut(clock) {
            c.period = period;
        }
    }

    /// Back to file form (clock, then by name); resolving it again yields
    /// the same set.
    pub fn to_raw(&self) -> SdcConstraints {
        let io = |m: &BTreeMap<String, (String, f64)>| {
            m.iter()
                .map(|(port, (clock, delay))| IoDelay {
                    port: port.clone(),
                    clock: clock.clone(),
                    delay: *delay,
                })
                .collect()
        };
        SdcConstraints {
            clocks: self.clocks.values().cloned().collect(),
            input_delays: io(&self.input_delays),
            output_delays: io(&self.output_delays),
            false_paths: self
                .false_paths
                .iter()
                .map(|(a, b)| FalsePath {
                    from_clock: a.clone(),
                    to_clock: b.clone(),
                })
                .collect(),
            multicycles: self
                .multicycle
                .iter()
                .map(|((from, to), &n)| Multicycle {
                    from: from.clone(),
                    to: to.clone(),
                    setup: n,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Query { kind: QueryKind, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueryKind {
    Ports,
    Clocks,
    Cells,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn tokenize(line: usize, text: &str) -> Result<Vec<Token>, SdcError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        match c {
            '[' => {
                chars.next();
                let mut body = String::new();
                loop {
                    match chars.next() {
                        Some(']') => break,
                        Some('[') => {
                            return Err(SdcError::MalformedQuery {
                                line,
                                message: "nested query".into(),
                            })
                        }
                        Some(ch) => body.push(ch),
                        None => {
                            return Err(SdcError::MalformedQuery {
                                line,
                                message: "unterminated `[`".into(),
                            })
                        }
                    }
                }
                tokens.push(parse_query(line, &body)?);
            }
            '{' | '"' => {
                return Err(SdcError::Syntax {
                    line,
                    message: format!("`{c}` quoting is not supported"),
                })
            }
            ']' => {
                return Err(SdcError::MalformedQuery {
                    line,
                    message: "unmatched `]`".into(),
                })
            }
            _ => {
                let mut word = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '[' || ch == ']' {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                }
                tokens.push(Token::Word(word));
            }
        }
    }
    Ok(tokens)
}

fn parse_query(line: usize, body: &str) -> Result<Token, SdcError> {
    let parts: Vec<&str> = body.split_whitespace().collect();
    let malformed = |message: String| SdcError::MalformedQuery { line, message };
    let (cmd, name) = match parts.as_slice() {
        [cmd, name] => (*cmd, *name),
        [cmd] => return Err(malformed(format!("`{cmd}` needs an object name"))),
        [] => return Err(malformed("empty query".into())),
        [cmd, ..] => return Err(malformed(format!("`{cmd}` takes a single object"))),
    };
    let kind = match cmd {
        "get_ports" => QueryKind::Ports,
        "get_clocks" | "get_clks" => QueryKind::Clocks,
        "get_cells" => QueryKind::Cells,
        other => return Err(malformed(format!("unknown query `{other}`"))),
    };
    if name.contains(['*', '?']) {
        return Err(SdcError::Unsupported {
            line,
            message: format!("wildcard `{name}`"),
        });
    }
    if !is_ident(name) {
        return Err(malformed(format!("invalid object name `{name}`")));
    }
    Ok(Token::Query {
        kind,
        name: name.to_string(),
    })
}

/// Joins `\` continuations; yields (first line number, logical line).
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_end();
        let (body, continues) = match trimmed.strip_suffix('\\') {
            Some(b) => (b, true),
            None => (trimmed, false),
        };
        let entry = pending.get_or_insert_with(|| (idx + 1, String::new()));
        entry.1.push(' ');
        entry.1.push_str(body);
        if !continues {
            out.push(pending.take().unwrap());
        }
    }
    if let Some(p) = pending {
        out.push(p);
    }
    out
}

struct Command {
    line: usize,
    name: String,
    flags: BTreeMap<String, Option<Token>>,
    positional: Vec<Token>,
}

impl Command {
    fn flag(&self, flag: &str) -> Result<&Token, SdcError> {
        match self.flags.get(flag) {
            Some(Some(t)) => Ok(t),
            _ => Err(SdcError::MissingFlag {
                line: self.line,
                command: self.name.clone(),
                flag: flag.into(),
            }),
        }
    }
}

/// Split into flags and positionals. `valued` flags consume the next token.
fn split_args(
    line: usize,
    name: &str,
    tokens: Vec<Token>,
    valued: &[&str],
    switches: &[&str],
) -> Result<Command, SdcError> {
    let mut cmd = Command {
        line,
        name: name.into(),
        flags: BTreeMap::new(),
        positional: Vec::new(),
    };
    let mut it = tokens.into_iter();
    while let Some(tok) = it.next() {
        match &tok {
            Token::Word(w) if w.starts_with('-') && w.parse::<f64>().is_err() => {
                let value = if valued.contains(&w.as_str()) {
                    Some(it.next().ok_or_else(|| SdcError::Syntax {
                        line,
                        message: format!("`{w}` needs a value"),
                    })?)
                } else if switches.contains(&w.as_str()) {
                    None
                } else {
                    return Err(SdcError::Unsupported {
                        line,
                        message: format!("option `{w}` of `{name}`"),
                    });
                };
                if cmd.flags.insert(w.clone(), value).is_some() {
                    return Err(SdcError::Syntax {
                        line,
                        message: format!("`{w}` given twice"),
                    });
                }
            }
            _ => cmd.positional.push(tok),
        }
    }
    Ok(cmd)
}

fn number(line: usize, tok: &Token, what: &str) -> Result<f64, SdcError> {
    match tok {
        Token::Word(w) => match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(SdcError::Syntax {
                line,
                message: format!("{what} must be a number, got `{w}`"),
            }),
        },
        Token::Query { .. } => Err(SdcError::Syntax {
            line,
            message: format!("{what} must be a number"),
        }),
    }
}

fn object(line: usize, tok: &Token, allowed: QueryKind, what: &str) -> Result<String, SdcError> {
    match tok {
        Token::Query { kind, name } if *kind == allowed => Ok(name.clone()),
        Token::Query { .. } => Err(SdcError::MalformedQuery {
            line,
            message: format!("wrong object type for {what}"),
        }),
        Token::Word(w) => Err(SdcError::MalformedQuery {
            line,
            message: format!("{what} must be an object query, got `{w}`"),
        }),
    }
}

/// A clock reference: bare name or `[get_clocks X]`.
fn clock_ref(line: usize, tok: &Token) -> Result<String, SdcError> {
    match tok {
        Token::Word(w) if is_ident(w) => Ok(w.clone()),
        _ => object(line, tok, QueryKind::Clocks, "clock"),
    }
}

/// An instance reference: bare name or `[get_cells X]`.
fn cell_ref(line: usize, tok: &Token) -> Result<String, SdcError> {
    match tok {
        Token::Word(w) if is_ident(w) => Ok(w.clone()),
        Token::Query {
            kind: QueryKind::Cells,
            name,
        } => Ok(name.clone()),
        Token::Query { .. } => Err(SdcError::Unsupported {
            line,
            message: "multicycle endpoints must be flip-flop instances".into(),
        }),
        Token::Word(w) => Err(SdcError::MalformedQuery {
            line,
            message: format!("invalid instance `{w}`"),
        }),
    }
}

fn single_positional<'a>(cmd: &'a Command, count: usize, usage: &str) -> Result<&'a [Token], SdcError> {
    if cmd.positional.len() != count {
        return Err(SdcError::Syntax {
            line: cmd.line,
            message: format!("usage: {usage}"),
        });
    }
    Ok(&cmd.positional)
}

pub fn parse_sdc(text: &str) -> Result<SdcConstraints, SdcError> {
    parse_sdc_with(text, SdcMode::Strict).map(|(c, _)| c)
}

pub fn parse_sdc_with(
    text: &str,
    mode: SdcMode,
) -> Result<(SdcConstraints, Vec<Diagnostic>), SdcError> {
    let mut out = SdcConstraints::default();
    let mut warnings = Vec::new();
    for (line, logical) in logical_lines(text) {
        let content = logical.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        match parse_command(line, content, &mut out) {
            Ok(()) => {}
            Err(e @ (SdcError::UnknownCommand { .. } | SdcError::Unsupported { .. }))
                if mode == SdcMode::Lenient =>
            {
                warnings.push(Diagnostic::warning(format!("sdc line {line}"), format!("skipped: {e}")));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, warnings))
}

fn parse_command(line: usize, content: &str, out: &mut SdcConstraints) -> Result<(), SdcError> {
    let mut tokens = tokenize(line, content)?;
    let name = match tokens.first() {
        Some(Token::Word(w)) => w.clone(),
        _ => {
            return Err(SdcError::Syntax {
                line,
                message: "expected a command".into(),
            })
        }
    };
    tokens.remove(0);
    let dup = |what: String| SdcError::Duplicate { line, what };
    match name.as_str() {
        "create_clock" => {
            let cmd = split_args(line, &name, tokens, &["-period", "-name"], &[])?;
            let period = number(line, cmd.flag("-period")?, "-period")?;
            if period <= 0.0 {
                return Err(SdcError::Syntax {
                    line,
                    message: "clock period must be positive".into(),
                });
            }
            let args = single_positional(&cmd, 1, "create_clock -period NS [get_ports PORT]")?;
            let port = object(line, &args[0], QueryKind::Ports, "clock source")?;
            let name = match cmd.flags.get("-name") {
                Some(Some(Token::Word(n))) if is_ident(n) => n.clone(),
                Some(_) => {
                    return Err(SdcError::Syntax {
                        line,
                        message: "invalid -name".into(),
                    })
                }
                None => port.clone(),
            };
            if out.clocks.iter().any(|c| c.name == name) {
                return Err(dup(format!("clock `{name}`")));
            }
            if out.clocks.iter().any(|c| c.source_port == port) {
                return Err(dup(format!("clock on port `{port}`")));
            }
            out.clocks.push(ClockDef {
                name,
                period,
                source_port: port,
            });
        }
        "set_input_delay" | "set_output_delay" => {
            let cmd = split_args(line, &name, tokens, &["-clock"], &[])?;
            let clock = clock_ref(line, cmd.flag("-clock")?)?;
            let args = single_positional(&cmd, 2, &format!("{name} -clock CLK NS [get_ports PORT]"))?;
            let delay = number(line, &args[0], "delay")?;
            if delay < 0.0 {
                return Err(SdcError::Syntax {
                    line,
                    message: "I/O delay must be >= 0".into(),
                });
            }
            let port = object(line, &args[1], QueryKind::Ports, "delay target")?;
            let list = if name == "set_input_delay" {
                &mut out.input_delays
            } else {
                &mut out.output_delays
            };
            if list.iter().any(|d| d.port == port) {
                return Err(dup(format!("{name} on `{port}`")));
            }
            list.push(IoDelay { port, clock, delay });
        }
        "set_false_path" => {
            let cmd = split_args(line, &name, tokens, &["-from", "-to"], &["-setup", "-hold"])?;
            if cmd.flags.contains_key("-setup") || cmd.flags.contains_key("-hold") {
                return Err(SdcError::Unsupported {
                    line,
                    message: "setup/hold-only false paths".into(),
                });
            }
            single_positional(&cmd, 0, "set_false_path -from [get_clocks A] -to [get_clocks B]")?;
            let mut ends = Vec::new();
            for flag in ["-from", "-to"] {
                match cmd.flag(flag)? {
                    Token::Query {
                        kind: QueryKind::Clocks,
                        name,
                    } => ends.push(name.clone()),
                    _ => {
                        return Err(SdcError::Unsupported {
                            line,
                            message: "pin-to-pin false paths (only clock-to-clock is supported)"
                                .into(),
                        })
                    }
                }
            }
            let fp = FalsePath {
                from_clock: ends[0].clone(),
                to_clock: ends[1].clone(),
            };
            if out.false_paths.contains(&fp) {
                return Err(dup(format!("false path {} -> {}", fp.from_clock, fp.to_clock)));
            }
            out.false_paths.push(fp);
        }
        "set_multicycle_path" => {
            let cmd = split_args(line, &name, tokens, &["-from", "-to"], &["-setup", "-hold"])?;
            if cmd.flags.contains_key("-hold") {
                return Err(SdcError::Unsupported {
                    line,
                    message: "explicit -hold multicycle (hold stays at edge 0)".into(),
                });
            }
            let args = single_positional(&cmd, 1, "set_multicycle_path [-setup] N -from A -to B")?;
            let n = number(line, &args[0], "multiplier")?;
            if n < 1.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                return Err(SdcError::Syntax {
                    line,
                    message: "multicycle multiplier must be an integer >= 1".into(),
                });
            }
            let from = cell_ref(line, cmd.flag("-from")?)?;
            let to = cell_ref(line, cmd.flag("-to")?)?;
            if out.multicycles.iter().any(|m| m.from == from && m.to == to) {
                return Err(dup(format!("multicycle {from} -> {to}")));
            }
            out.multicycles.push(Multicycle {
                from,
                to,
                setup: n as u32,
            });
        }
        other => {
            return Err(SdcError::UnknownCommand {
                line,
                command: other.into(),
            })
        }
    }
    Ok(())
}

/// Binds constraints to the netlist. Every ff must land in exactly one
/// clock domain.
pub fn resolve(raw: &SdcConstraints, n: &Netlist) -> Result<ConstraintSet, SdcError> {
    let (cs, mut errors) = resolve_partial(raw, n)?;
    match errors.is_empty() {
        true => Ok(cs),
        false => Err(errors.remove(0)),
    }
}

/// Like [`resolve`], but ffs whose clock cannot be traced are left without
/// a domain and returned as errors alongside the set.
pub fn resolve_partial(
    raw: &SdcConstraints,
    n: &Netlist,
) -> Result<(ConstraintSet, Vec<SdcError>), SdcError> {
    let mut cs = ConstraintSet::default();
    for c in &raw.clocks {
        let port = n
            .port(&c.source_port)
            .ok_or_else(|| SdcError::UnknownPort(c.source_port.clone()))?;
        if port.direction != Direction::In {
            return Err(SdcError::NotAnInput(c.source_port.clone()));
        }
        cs.clocks.insert(c.name.clone(), c.clone());
    }
    let known_clock = |name: &str| -> Result<(), SdcError> {
        match cs.clocks.contains_key(name) {
            true => Ok(()),
            false => Err(SdcError::UnknownClock(name.into())),
        }
    };
    for d in &raw.input_delays {
        known_clock(&d.clock)?;
        match n.port(&d.port) {
            None => return Err(SdcError::UnknownPort(d.port.clone())),
            Some(p) if p.direction != Direction::In => {
                return Err(SdcError::NotAnInput(d.port.clone()))
            }
            Some(_) => {}
        }
        cs.input_delays
            .insert(d.port.clone(), (d.clock.clone(), d.delay));
    }
    for d in &raw.output_delays {
        known_clock(&d.clock)?;
        match n.port(&d.port) {
            None => return Err(SdcError::UnknownPort(d.port.clone())),
            Some(p) if p.direction != Direction::Out => {
                return Err(SdcError::NotAnOutput(d.port.clone()))
            }
            Some(_) => {}
        }
        cs.output_delays
            .insert(d.port.clone(), (d.clock.clone(), d.delay));
    }
    for fp in &raw.false_paths {
        known_clock(&fp.from_clock)?;
        known_clock(&fp.to_clock)?;
        cs.false_paths
            .insert((fp.from_clock.clone(), fp.to_clock.clone()));
    }
    for m in &raw.multicycles {
        for inst in [&m.from, &m.to] {
            if n.ff(inst).is_none() {
                return Err(SdcError::UnknownInstance(inst.clone()));
            }
        }
        cs.multicycle.insert((m.from.clone(), m.to.clone()), m.setup);
    }

    let conn = n.connectivity();
    let mut errors = Vec::new();
    for ff in &n.ffs {
        let cone = match n.fanin_cone_of_net(&conn, &ff.clk) {
            Ok(c) => c,
            Err(e) => {
                return Err(SdcError::Syntax {
                    line: 0,
                    message: format!("{}: clock network: {e}", ff.name),
                })
            }
        };
        let clocks: BTreeSet<&str> = cone
            .iter()
            .filter_map(|s| match s {
                Source::InputPort(p) => cs.clock_on_port(p).map(|c| c.name.as_str()),
                Source::FfQ(_) => None,
            })
            .collect();
        match clocks.len() {
            1 => {
                let clock = clocks.into_iter().next().unwrap().to_string();
                cs.domains.insert(ff.name.clone(), clock);
            }
            0 => errors.push(SdcError::UnconstrainedClock {
                ff: ff.name.clone(),
                net: ff.clk.clone(),
            }),
            _ => errors.push(SdcError::AmbiguousClock {
                ff: ff.name.clone(),
                net: ff.clk.clone(),
                clocks: clocks.into_iter().collect::<Vec<_>>().join(", "),
            }),
        }
    }
    Ok((cs, errors))
}
