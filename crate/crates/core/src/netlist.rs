//! Gate-level netlist: parsing, structural validation and fan-in traversal.
//!
//! The `.tnl` format is line oriented, one directive per line, `#` starts a
//! comment:
//!
//! ```text
//! design NAME
//! port in NAME | port out NAME
//! ff INST CELL clk=NET d=NET q=NET
//! gate INST CELL in=NET[,NET...] out=NET
//! netdelay NET FLOAT_NS
//! bus BUSNAME NET NET ...
//! attr OBJECT KEY=VALUE
//! ```
//!
//! Ports implicitly create a net of the same name. Every net must have
//! exactly one driver: an input port, a flip-flop `q` or a gate `out`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::techlib::{CellSpec, Library};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate {kind} `{name}`")]
    Duplicate {
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("combinational loop: {}", .0.join(" -> "))]
    CombinationalLoop(Vec<String>),
    #[error("unknown pin {0}")]
    UnknownPin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfInst {
    pub name: String,
    pub cell: String,
    pub clk: String,
    pub d: String,
    pub q: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateInst {
    pub name: String,
    pub cell: String,
    pub inputs: Vec<String>,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    pub name: String,
    pub ports: Vec<Port>,
    pub ffs: Vec<FfInst>,
    pub gates: Vec<GateInst>,
    pub net_delays: BTreeMap<String, f64>,
    pub buses: BTreeMap<String, Vec<String>>,
    pub attrs: BTreeMap<(String, String), String>,
}

/// Something that drives a net, by index into the owning vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Driver {
    Port(usize),
    FfQ(usize),
    Gate(usize),
}

/// Something that reads a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Load {
    FfD(usize),
    FfClk(usize),
    GateIn(usize, usize),
    Port(usize),
}

/// A sink pin whose fan-in cone can be queried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pin {
    FfD(String),
    FfClk(String),
    GateInput(String, usize),
    OutputPort(String),
}

/// A timing start point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    InputPort(String),
    FfQ(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::InputPort(p) => write!(f, "{p}"),
            Source::FfQ(ff) => write!(f, "{ff}.q"),
        }
    }
}

/// Driver/load maps for every net.
#[derive(Debug, Clone, Default)]
pub struct Connectivity {
    pub drivers: BTreeMap<String, Vec<Driver>>,
    pub loads: BTreeMap<String, Vec<Load>>,
}

impl Connectivity {
    pub fn driver(&self, net: &str) -> Option<Driver> {
        self.drivers.get(net).and_then(|d| d.first().copied())
    }

    pub fn loads(&self, net: &str) -> &[Load] {
        self.loads.get(net).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_port(&mut self, name: &str, direction: Direction) -> &mut Self {
        self.ports.push(Port {
            name: name.into(),
            direction,
        });
        self
    }

    pub fn add_ff(&mut self, name: &str, cell: &str, clk: &str, d: &str, q: &str) -> &mut Self {
        self.ffs.push(FfInst {
            name: name.into(),
            cell: cell.into(),
            clk: clk.into(),
            d: d.into(),
            q: q.into(),
        });
        self
    }

    pub fn add_gate(&mut self, name: &str, cell: &str, inputs: &[&str], out: &str) -> &mut Self {
        self.gates.push(GateInst {
            name: name.into(),
            cell: cell.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            out: out.into(),
        });
        self
    }

    pub fn set_net_delay(&mut self, net: &str, ns: f64) -> &mut Self {
        self.net_delays.insert(net.into(), ns);
        self
    }

    pub fn set_attr(&mut self, object: &str, key: &str, value: &str) -> &mut Self {
        self.attrs
            .insert((object.into(), key.into()), value.into());
        self
    }

    pub fn net_delay(&self, net: &str) -> f64 {
        self.net_delays.get(net).copied().unwrap_or(0.0)
    }

    pub fn attr(&self, object: &str, key: &str) -> Option<&str> {
        self.attrs
            .get(&(object.to_string(), key.to_string()))
            .map(String::as_str)
    }

    pub fn ff_index(&self, name: &str) -> Option<usize> {
        self.ffs.iter().position(|f| f.name == name)
    }

    pub fn ff(&self, name: &str) -> Option<&FfInst> {
        self.ffs.iter().find(|f| f.name == name)
    }

    pub fn gate_index(&self, name: &str) -> Option<usize> {
        self.gates.iter().position(|g| g.name == name)
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn input_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::In)
    }

    pub fn output_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::Out)
    }

    /// The bus a net belongs to, if any.
    pub fn bus_of(&self, net: &str) -> Option<&str> {
        self.buses
            .iter()
            .find(|(_, nets)| nets.iter().any(|n| n == net))
            .map(|(b, _)| b.as_str())
    }

    pub fn connectivity(&self) -> Connectivity {
        let mut c = Connectivity::default();
        for (i, p) in self.ports.iter().enumerate() {
            match p.direction {
                Direction::In => c.drivers.entry(p.name.clone()).or_default().push(Driver::Port(i)),
                Direction::Out => c.loads.entry(p.name.clone()).or_default().push(Load::Port(i)),
            }
        }
        for (i, ff) in self.ffs.iter().enumerate() {
            c.drivers.entry(ff.q.clone()).or_default().push(Driver::FfQ(i));
            c.loads.entry(ff.d.clone()).or_default().push(Load::FfD(i));
            c.loads.entry(ff.clk.clone()).or_default().push(Load::FfClk(i));
        }
        for (i, g) in self.gates.iter().enumerate() {
            c.drivers.entry(g.out.clone()).or_default().push(Driver::Gate(i));
            for (k, net) in g.inputs.iter().enumerate() {
                c.loads.entry(net.clone()).or_default().push(Load::GateIn(i, k));
            }
        }
        c
    }

    /// Gate indices in topological order, or the first combinational cycle
    /// found (gate names, starting and ending at the same gate).
    pub fn gate_order(&self) -> Result<Vec<usize>, NetlistError> {
        let conn = self.connectivity();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.gates.len()];
        let mut order = Vec::with_capacity(self.gates.len());
        for root in 0..self.gates.len() {
            if state[root] != 0 {
                continue;
            }
            // iterative DFS over fan-in gates; post-order gives topo order
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            while let Some(top) = stack.last_mut() {
                let g = top.0;
                let inputs = &self.gates[g].inputs;
                if top.1 < inputs.len() {
                    let net = &inputs[top.1];
                    top.1 += 1;
                    for drv in conn.drivers.get(net).into_iter().flatten() {
                        if let Driver::Gate(h) = *drv {
                            match state[h] {
                                0 => {
                                    state[h] = 1;
                                    stack.push((h, 0));
                                    break;
                                }
                                1 => {
                                    let pos = stack.iter().position(|&(s, _)| s == h).unwrap();
                                    // stack holds consumers above producers; report in signal order
                                    let mut cycle: Vec<String> = stack[pos..]
                                        .iter()
                                        .rev()
                                        .map(|&(s, _)| self.gates[s].name.clone())
                                        .collect();
                                    cycle.push(cycle[0].clone());
                                    return Err(NetlistError::CombinationalLoop(cycle));
                                }
                                _ => {}
                            }
                        }
                    }
                } else {
                    state[g] = 2;
                    order.push(g);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    fn pin_net(&self, pin: &Pin) -> Result<&str, NetlistError> {
        let unknown = || NetlistError::UnknownPin(format!("{pin:?}"));
        match pin {
            Pin::FfD(name) => self.ff(name).map(|f| f.d.as_str()).ok_or_else(unknown),
            Pin::FfClk(name) => self.ff(name).map(|f| f.clk.as_str()).ok_or_else(unknown),
            Pin::GateInput(name, k) => self
                .gates
                .iter()
                .find(|g| &g.name == name)
                .and_then(|g| g.inputs.get(*k))
                .map(String::as_str)
                .ok_or_else(unknown),
            Pin::OutputPort(name) => self
                .port(name)
                .filter(|p| p.direction == Direction::Out)
                .map(|p| p.name.as_str())
                .ok_or_else(unknown),
        }
    }

    /// Start points reachable backward from `pin` through combinational
    /// gates. Never crosses a flip-flop.
    pub fn fanin_cone(&self, pin: &Pin) -> Result<BTreeSet<Source>, NetlistError> {
        let net = self.pin_net(pin)?;
        self.fanin_cone_of_net(&self.connectivity(), net)
    }

    pub fn fanin_cone_of_net(
        &self,
        conn: &Connectivity,
        net: &str,
    ) -> Result<BTreeSet<Source>, NetlistError> {
        let mut out = BTreeSet::new();
        let mut state: BTreeMap<usize, u8> = BTreeMap::new();
        let mut path: Vec<usize> = Vec::new();
        self.cone_visit(conn, net, &mut out, &mut state, &mut path)?;
        Ok(out)
    }

    fn cone_visit(
        &self,
        conn: &Connectivity,
        net: &str,
        out: &mut BTreeSet<Source>,
        state: &mut BTreeMap<usize, u8>,
        path: &mut Vec<usize>,
    ) -> Result<(), NetlistError> {
        for drv in conn.drivers.get(net).into_iter().flatten() {
            match *drv {
                Driver::Port(i) => {
                    out.insert(Source::InputPort(self.ports[i].name.clone()));
                }
                Driver::FfQ(i) => {
                    out.insert(Source::FfQ(self.ffs[i].name.clone()));
                }
                Driver::Gate(g) => match state.get(&g) {
                    Some(2) => {}
                    Some(_) => {
                        let pos = path.iter().position(|&p| p == g).unwrap();
                        let mut cycle: Vec<String> = path[pos..]
                            .iter()
                            .rev()
                            .map(|&p| self.gates[p].name.clone())
                            .collect();
                        cycle.push(cycle[0].clone());
                        return Err(NetlistError::CombinationalLoop(cycle));
                    }
                    None => {
                        state.insert(g, 1);
                        path.push(g);
                        for input in &self.gates[g].inputs {
                            self.cone_visit(conn, input, out, state, path)?;
                        }
                        path.pop();
                        state.insert(g, 2);
                    }
                },
            }
        }
        Ok(())
    }

    /// Structural and library checks. Empty result means the design is
    /// ready for timing analysis.
    pub fn validate(&self, lib: &Library) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let conn = self.connectivity();

        for ff in &self.ffs {
            match lib.lookup(&ff.cell) {
                Err(_) => diags.push(Diagnostic::error(
                    &ff.name,
                    format!("unresolved cell `{}`", ff.cell),
                )),
                Ok(CellSpec::Combinational(_)) => diags.push(Diagnostic::error(
                    &ff.name,
                    format!("cell `{}` is not sequential", ff.cell),
                )),
                Ok(CellSpec::Sequential(_)) => {}
            }
        }
        for g in &self.gates {
            match lib.lookup(&g.cell) {
                Err(_) => diags.push(Diagnostic::error(
                    &g.name,
                    format!("unresolved cell `{}`", g.cell),
                )),
                Ok(CellSpec::Sequential(_)) => diags.push(Diagnostic::error(
                    &g.name,
                    format!("cell `{}` is not combinational", g.cell),
                )),
                Ok(CellSpec::Combinational(c)) if c.inputs != g.inputs.len() => {
                    diags.push(Diagnostic::error(
                        &g.name,
                        format!(
                            "cell `{}` takes {} inputs, {} connected",
                            g.cell,
                            c.inputs,
                            g.inputs.len()
                        ),
                    ))
                }
                Ok(_) => {}
            }
        }

        for (net, drivers) in &conn.drivers {
            if drivers.len() > 1 {
                diags.push(Diagnostic::error(net, "multiple drivers"));
            }
        }
        for net in conn.loads.keys() {
            if !conn.drivers.contains_key(net) {
                diags.push(Diagnostic::error(net, "undriven net"));
            }
        }
        for (net, &d) in &self.net_delays {
            if !(d >= 0.0 && d.is_finite()) {
                diags.push(Diagnostic::error(net, "net delay must be a nonnegative number"));
            }
            if !conn.drivers.contains_key(net) && !conn.loads.contains_key(net) {
                diags.push(Diagnostic::warning(net, "netdelay on unknown net"));
            }
        }
        for (bus, nets) in &self.buses {
            for net in nets {
                if !conn.drivers.contains_key(net) {
                    diags.push(Diagnostic::error(
                        bus,
                        format!("bus member `{net}` is not a driven net"),
                    ));
                }
            }
        }
        for (object, key) in self.attrs.keys() {
            let known = conn.drivers.contains_key(object)
                || conn.loads.contains_key(object)
                || self.buses.contains_key(object)
                || self.ff(object).is_some()
                || self.gates.iter().any(|g| &g.name == object);
            if !known {
                diags.push(Diagnostic::warning(
                    object,
                    format!("attribute `{key}` on unknown object"),
                ));
            }
        }
        if let Err(NetlistError::CombinationalLoop(cycle)) = self.gate_order() {
            diags.push(Diagnostic::error(
                &cycle[0],
                format!("combinational loop: {}", cycle.join(" -> ")),
            ));
        }
        diags
    }

    /// Serializes to `.tnl` text; `parse_netlist` of the result reproduces
    /// the same structure.
    pub fn to_tnl(&self) -> String {
        let mut out = format!("design {}\n", self.name);
        for p in &self.ports {
            let dir = match p.direction {
                Direction::In => "in",
                Direction::Out => "out",
            };
            let _ = writeln!(out, "port {dir} {}", p.name);
        }
        for ff in &self.ffs {
            let _ = writeln!(
                out,
                "ff {} {} clk={} d={} q={}",
                ff.name, ff.cell, ff.clk, ff.d, ff.q
            );
        }
        for g in &self.gates {
            let _ = writeln!(
                out,
                "gate {} {} in={} out={}",
                g.name,
                g.cell,
                g.inputs.join(","),
                g.out
            );
        }
        for (net, d) in &self.net_delays {
            let _ = writeln!(out, "netdelay {net} {d}");
        }
        for (bus, nets) in &self.buses {
            let _ = writeln!(out, "bus {bus} {}", nets.join(" "));
        }
        for ((obj, key), value) in &self.attrs {
            let _ = writeln!(out, "attr {obj} {key}={value}");
        }
        out
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct LineParser {
    line: usize,
}

impl LineParser {
    fn syntax(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn ident<'a>(&self, tok: Option<&&'a str>, what: &str) -> Result<&'a str, NetlistError> {
        match tok {
            Some(t) if is_ident(t) => Ok(t),
            Some(t) => Err(self.syntax(format!("invalid {what} `{t}`"))),
            None => Err(self.syntax(format!("missing {what}"))),
        }
    }

    /// Parses `key=value` pins, requiring exactly the keys in `wanted`.
    fn pins<'a>(
        &self,
        tokens: &[&'a str],
        wanted: &[&str],
    ) -> Result<BTreeMap<String, &'a str>, NetlistError> {
        let mut found = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| self.syntax(format!("expected key=value, got `{tok}`")))?;
            if !wanted.contains(&k) {
                return Err(self.syntax(format!("unknown pin `{k}`")));
            }
            if found.insert(k.to_string(), v).is_some() {
                return Err(self.syntax(format!("`{k}=` given twice")));
            }
        }
        for k in wanted {
            if !found.contains_key(*k) {
                return Err(self.syntax(format!("missing `{k}=`")));
            }
        }
        Ok(found)
    }

    fn net<'a>(&self, v: &'a str) -> Result<&'a str, NetlistError> {
        if is_ident(v) {
            Ok(v)
        } else {
            Err(self.syntax(format!("invalid net name `{v}`")))
        }
    }
}

pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut design: Option<Netlist> = None;
    let mut instances: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let lp = LineParser { line: idx + 1 };
        let line = lp.line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let directive = tokens[0];

        let Some(n) = design.as_mut() else {
            if directive != "design" {
                return Err(lp.syntax("`design` must be the first directive"));
            }
            if tokens.len() != 2 {
                return Err(lp.syntax("expected `design NAME`"));
            }
            design = Some(Netlist::new(lp.ident(tokens.get(1), "design name")?));
            continue;
        };

        match directive {
            "design" => return Err(lp.syntax("`design` given twice")),
            "port" => {
                if tokens.len() != 3 {
                    return Err(lp.syntax("expected `port in|out NAME`"));
                }
                let direction = match tokens[1] {
                    "in" => Direction::In,
                    "out" => Direction::Out,
                    other => return Err(lp.syntax(format!("unknown port direction `{other}`"))),
                };
                let name = lp.ident(tokens.get(2), "port name")?;
                if n.port(name).is_some() {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "port",
                        name: name.into(),
                    });
                }
                n.add_port(name, direction);
            }
            "ff" => {
                let inst = lp.ident(tokens.get(1), "instance name")?;
                let cell = lp.ident(tokens.get(2), "cell name")?;
                let pins = lp.pins(&tokens[3.min(tokens.len())..], &["clk", "d", "q"])?;
                if !instances.insert(inst.to_string()) {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "instance",
                        name: inst.into(),
                    });
                }
                let clk = lp.net(pins["clk"])?;
                let d = lp.net(pins["d"])?;
                let q = lp.net(pins["q"])?;
                n.add_ff(inst, cell, clk, d, q);
            }
            "gate" => {
                let inst = lp.ident(tokens.get(1), "instance name")?;
                let cell = lp.ident(tokens.get(2), "cell name")?;
                let pins = lp.pins(&tokens[3.min(tokens.len())..], &["in", "out"])?;
                if !instances.insert(inst.to_string()) {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "instance",
                        name: inst.into(),
                    });
                }
                let inputs: Vec<&str> = pins["in"]
                    .split(',')
                    .map(|s| lp.net(s))
                    .collect::<Result<_, _>>()?;
                let out = lp.net(pins["out"])?;
                n.add_gate(inst, cell, &inputs, out);
            }
            "netdelay" => {
                if tokens.len() != 3 {
                    return Err(lp.syntax("expected `netdelay NET NS`"));
                }
                let net = lp.ident(tokens.get(1), "net name")?;
                let ns: f64 = tokens[2]
                    .parse()
                    .map_err(|_| lp.syntax(format!("invalid delay `{}`", tokens[2])))?;
                if !ns.is_finite() || ns < 0.0 {
                    return Err(lp.syntax(format!("net delay must be >= 0, got `{}`", tokens[2])));
                }
                if n.net_delays.contains_key(net) {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "netdelay",
                        name: net.into(),
                    });
                }
                n.set_net_delay(net, ns);
            }
            "bus" => {
                let bus = lp.ident(tokens.get(1), "bus name")?;
                if tokens.len() < 3 {
                    return Err(lp.syntax("a bus needs at least one net"));
                }
                let nets: Vec<String> = tokens[2..]
                    .iter()
                    .map(|t| lp.net(t).map(str::to_string))
                    .collect::<Result<_, _>>()?;
                if n.buses.contains_key(bus) {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "bus",
                        name: bus.into(),
                    });
                }
                n.buses.insert(bus.into(), nets);
            }
            "attr" => {
                if tokens.len() != 3 {
                    return Err(lp.syntax("expected `attr OBJECT KEY=VALUE`"));
                }
                let object = lp.ident(tokens.get(1), "object name")?;
                let (key, value) = tokens[2]
                    .split_once('=')
                    .ok_or_else(|| lp.syntax("expected KEY=VALUE"))?;
                if !is_ident(key) || value.is_empty() {
                    return Err(lp.syntax(format!("invalid attribute `{}`", tokens[2])));
                }
                if n.attr(object, key).is_some() {
                    return Err(NetlistError::Duplicate {
                        line,
                        kind: "attribute",
                        name: format!("{object}.{key}"),
                    });
                }
                n.set_attr(object, key, value);
            }
            other => {
                return Err(NetlistError::UnknownDirective {
                    line,
                    directive: other.into(),
                })
            }
        }
    }
    design.ok_or(NetlistError::Syntax {
        line: 0,
        message: "empty netlist: missing `design`".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::techlib::builtin_fpga;

    const MINIMAL: &str = "design top\nport in clk\nport in din\nport out dout\n\
                           ff r1 FDRE clk=clk d=din q=dout\n";

    #[test]
    fn minimal_design() {
        let n = parse_netlist(MINIMAL).unwrap();
        assert_eq!(n.ffs.len(), 1);
        assert_eq!(n.ports.len(), 3);
        assert!(n.validate(&builtin_fpga()).is_empty());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = format!("# header\n\n{MINIMAL}   # trailing\n");
        assert_eq!(parse_netlist(&text).unwrap(), parse_netlist(MINIMAL).unwrap());
    }

    #[test]
    fn missing_q_names_line() {
        let text = "design t\nport in clk\nff r1 FDRE clk=clk d=clk\n";
        let err = parse_netlist(text).unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 3,
                message: "missing `q=`".into()
            }
        );
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_netlist("port in a"),
            Err(NetlistError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_netlist("design t\nwire a b"),
            Err(NetlistError::UnknownDirective { line: 2, .. })
        ));
        assert!(matches!(
            parse_netlist("design t\nport in a\nport out a"),
            Err(NetlistError::Duplicate { line: 3, kind: "port", .. })
        ));
        let dup = "design t\nport in c\nff x F clk=c d=c q=a\ngate x G in=a out=b";
        assert!(matches!(
            parse_netlist(dup),
            Err(NetlistError::Duplicate { line: 4, kind: "instance", .. })
        ));
        assert!(matches!(
            parse_netlist("design t\nnetdelay a -0.1"),
            Err(NetlistError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_netlist("design t\nport in a-b"),
            Err(NetlistError::Syntax { .. })
        ));
    }

    #[test]
    fn multiple_drivers_diagnosed() {
        let mut n = parse_netlist(MINIMAL).unwrap();
        n.add_gate("g1", "LUT2", &["din", "din"], "x");
        n.add_gate("g2", "LUT2", &["din", "din"], "x");
        n.add_port("y", Direction::Out);
        n.add_gate("g3", "LUT2", &["x", "x"], "y");
        let diags = n.validate(&builtin_fpga());
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].object, "x");
        assert_eq!(diags[0].message, "multiple drivers");
        assert!(diags[0].is_error());
    }

    #[test]
    fn unresolved_cell_diagnosed() {
        let mut n = parse_netlist(MINIMAL).unwrap();
        n.ffs[0].cell = "XYZ".into();
        let diags = n.validate(&builtin_fpga());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("unresolved cell"));
    }

    #[test]
    fn other_validation_errors() {
        let text = "design t\nport in clk\nport out o\n\
                    gate g LUT6 in=clk,clk out=o\nff r LUT2 clk=clk d=nowhere q=q1\n";
        let n = parse_netlist(text).unwrap();
        let msgs: Vec<String> = n
            .validate(&builtin_fpga())
            .iter()
            .map(|d| format!("{}: {}", d.object, d.message))
            .collect();
        assert!(msgs.iter().any(|m| m.contains("takes 6 inputs")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("not sequential")));
        assert!(msgs.iter().any(|m| m == "nowhere: undriven net"));
    }

    fn two_gate_cycle() -> Netlist {
        let text = "design t\nport in clk\nport in a\n\
                    gate g1 LUT2 in=a,n2 out=n1\ngate g2 LUT2 in=n1,n1 out=n2\n\
                    ff r FDRE clk=clk d=n2 q=q\n";
        parse_netlist(text).unwrap()
    }

    #[test]
    fn fanin_direct_port() {
        let n = parse_netlist(MINIMAL).unwrap();
        let cone = n.fanin_cone(&Pin::FfD("r1".into())).unwrap();
        assert_eq!(cone, BTreeSet::from([Source::InputPort("din".into())]));
    }

    #[test]
    fn fanin_one_level() {
        let text = "design t\nport in clk\nport in a\n\
                    ff r1 FDRE clk=clk d=a q=q1\nff r2 FDRE clk=clk d=a q=q2\n\
                    gate g LUT2 in=q1,q2 out=n\nff r3 FDRE clk=clk d=n q=q3\n";
        let n = parse_netlist(text).unwrap();
        let cone = n.fanin_cone(&Pin::FfD("r3".into())).unwrap();
        assert_eq!(
            cone,
            BTreeSet::from([Source::FfQ("r1".into()), Source::FfQ("r2".into())])
        );
        assert!(n.fanin_cone(&Pin::FfD("nope".into())).is_err());
    }

    #[test]
    fn fanin_loop_is_error() {
        let n = two_gate_cycle();
        match n.fanin_cone(&Pin::FfD("r".into())) {
            Err(NetlistError::CombinationalLoop(cycle)) => {
                assert_eq!(cycle.first(), cycle.last());
                assert_eq!(cycle.len(), 3);
            }
            other => panic!("expected loop, got {other:?}"),
        }
        assert!(matches!(n.gate_order(), Err(NetlistError::CombinationalLoop(_))));
        assert!(n
            .validate(&builtin_fpga())
            .iter()
            .any(|d| d.message.starts_with("combinational loop")));
    }

    #[test]
    fn round_trip() {
        let text = "design t\nport in clk\nport in a\nport out o\n\
                    ff r1 FDRE clk=clk d=a q=q1\ngate g LUT2 in=q1,a out=o\n\
                    netdelay q1 0.12\nbus b q1 o\nattr b gray=true\n";
        let n = parse_netlist(text).unwrap();
        assert_eq!(parse_netlist(&n.to_tnl()).unwrap(), n);
        assert_eq!(n.attr("b", "gray"), Some("true"));
        assert_eq!(n.bus_of("o"), Some("b"));
        assert_eq!(n.net_delay("q1"), 0.12);
        assert_eq!(n.net_delay("a"), 0.0);
    }
}
