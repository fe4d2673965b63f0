//! Static timing analysis.
//!
//! [`build_graph`] turns a validated netlist into a levelized pin graph.
//! Setup and hold checks then propagate max/min arrival times from every
//! start point in level order. All arithmetic goes through [`Scalar`], and
//! propagation visits nodes and arcs in a fixed order, so results are
//! reproducible bit for bit.
//!
//! Conventions: clocks are ideal, skew enters only through a [`SkewTable`],
//! the reported critical-path delay excludes the capture setup time, and
//! negative slack is a violation.

mod check;
mod report;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::netlist::{Driver, Load, Netlist, NetlistError};
use crate::scalar::Scalar;
use crate::techlib::{Library, LibraryError};

pub use check::{
    fmax, hold_check, setup_check, top_paths, Analysis, Check, ClockFmax, FmaxAnalysis, PathPoint,
    PathReport, Segment, SegmentLabel,
};
pub use report::{fmax_json, render_fmax_text, render_text, report_json, reports_json};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StaError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("combinational loop: {}", .0.join(" -> "))]
    CombinationalLoop(Vec<String>),
    #[error("derate factor must be positive, got {0}")]
    InvalidDerate(f64),
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    ClockToQ,
    Cell,
    Net,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingArc<T> {
    pub from: NodeId,
    pub to: NodeId,
    pub delay_min: T,
    pub delay_max: T,
    pub kind: ArcKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    FfClock(usize),
    FfQ(usize),
    FfD(usize),
    GateIn(usize, usize),
    GateOut(usize),
    InputPort(usize),
    OutputPort(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingNode {
    pub name: String,
    pub kind: NodeKind,
}

/// Per-register data the checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct FfTiming<T> {
    pub name: String,
    pub cell: String,
    pub clock_pin: NodeId,
    pub q: NodeId,
    pub d: NodeId,
    pub setup: T,
    pub hold: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingGraph<T> {
    pub nodes: Vec<TimingNode>,
    pub arcs: Vec<TimingArc<T>>,
    pub topo_levels: Vec<Vec<NodeId>>,
    pub ffs: Vec<FfTiming<T>>,
    pub inputs: Vec<(String, NodeId)>,
    pub outputs: Vec<(String, NodeId)>,
    fanout: Vec<Vec<usize>>,
}

/// Per-register clock arrival offsets; registers not listed sit at zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkewTable<T> {
    pub skews: BTreeMap<String, T>,
}

impl<T: Scalar> SkewTable<T> {
    pub fn zero() -> Self {
        Self {
            skews: BTreeMap::new(),
        }
    }

    pub fn get(&self, ff: &str) -> T {
        self.skews.get(ff).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, ff: &str, skew: T) {
        self.skews.insert(ff.to_string(), skew);
    }
}

impl<T: Scalar> FromIterator<(String, T)> for SkewTable<T> {
    fn from_iter<I: IntoIterator<Item = (String, T)>>(iter: I) -> Self {
        Self {
            skews: iter.into_iter().collect(),
        }
    }
}

impl<T: Scalar> TimingGraph<T> {
    pub fn fanout(&self, node: NodeId) -> impl Iterator<Item = &TimingArc<T>> {
        self.fanout[node].iter().map(move |&a| &self.arcs[a])
    }

    pub fn ff(&self, name: &str) -> Option<&FfTiming<T>> {
        self.ffs.iter().find(|f| f.name == name)
    }

    /// Same graph with every max delay multiplied by `factor`. Min delays
    /// (hold analysis) are left alone.
    pub fn apply_derate(&self, factor: f64) -> Result<Self, StaError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(StaError::InvalidDerate(factor));
        }
        let f = T::from_ns(factor);
        let mut g = self.clone();
        for arc in &mut g.arcs {
            arc.delay_max = arc.delay_max * f;
        }
        Ok(g)
    }

    /// Level-order arrival propagation from `sources`. `latest` selects max
    /// over max delays (setup) or min over min delays (hold). Returns the
    /// arrival and the arc that produced it for every reached node.
    pub(crate) fn propagate(
        &self,
        sources: &[(NodeId, T)],
        latest: bool,
    ) -> (Vec<Option<T>>, Vec<Option<usize>>) {
        let mut arrival: Vec<Option<T>> = vec![None; self.nodes.len()];
        let mut via: Vec<Option<usize>> = vec![None; self.nodes.len()];
        for &(node, t) in sources {
            arrival[node] = Some(t);
        }
        for level in &self.topo_levels {
            for &node in level {
                let Some(at) = arrival[node] else { continue };
                for &a in &self.fanout[node] {
                    let arc = &self.arcs[a];
                    let delay = if latest { arc.delay_max } else { arc.delay_min };
                    let cand = at + delay;
                    let better = match arrival[arc.to] {
                        None => true,
                        Some(cur) if latest => cand > cur,
                        Some(cur) => cand < cur,
                    };
                    if better {
                        arrival[arc.to] = Some(cand);
                        via[arc.to] = Some(a);
                    }
                }
            }
        }
        (arrival, via)
    }
}

/// Builds the pin-level timing graph. Clock nets are ideal and carry no
/// arcs; a flip-flop contributes a clock-to-Q arc from its clock pin.
pub fn build_graph<T: Scalar>(n: &Netlist, lib: &Library) -> Result<TimingGraph<T>, StaError> {
    n.gate_order().map_err(|e| match e {
        NetlistError::CombinationalLoop(c) => StaError::CombinationalLoop(c),
        other => StaError::CombinationalLoop(vec![other.to_string()]),
    })?;

    let mut nodes = Vec::new();
    let mut add = |name: String, kind: NodeKind| {
        nodes.push(TimingNode { name, kind });
        nodes.len() - 1
    };

    let mut port_node = vec![0; n.ports.len()];
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (i, p) in n.ports.iter().enumerate() {
        let kind = match p.direction {
            crate::netlist::Direction::In => NodeKind::InputPort(i),
            crate::netlist::Direction::Out => NodeKind::OutputPort(i),
        };
        let id = add(p.name.clone(), kind);
        port_node[i] = id;
        match p.direction {
            crate::netlist::Direction::In => inputs.push((p.name.clone(), id)),
            crate::netlist::Direction::Out => outputs.push((p.name.clone(), id)),
        }
    }

    let mut arcs = Vec::new();
    let mut ffs = Vec::with_capacity(n.ffs.len());
    for (i, ff) in n.ffs.iter().enumerate() {
        let cell = lib.sequential(&ff.cell)?;
        let ck = add(format!("{}/CK", ff.name), NodeKind::FfClock(i));
        let q = add(format!("{}/Q", ff.name), NodeKind::FfQ(i));
        let d = add(format!("{}/D", ff.name), NodeKind::FfD(i));
        arcs.push(TimingArc {
            from: ck,
            to: q,
            delay_min: T::from_ns(cell.cq_min),
            delay_max: T::from_ns(cell.cq_max),
            kind: ArcKind::ClockToQ,
        });
        ffs.push(FfTiming {
            name: ff.name.clone(),
            cell: ff.cell.clone(),
            clock_pin: ck,
            q,
            d,
            setup: T::from_ns(cell.setup),
            hold: T::from_ns(cell.hold),
        });
    }

    let mut gate_in: Vec<Vec<NodeId>> = Vec::with_capacity(n.gates.len());
    let mut gate_out = Vec::with_capacity(n.gates.len());
    for (i, g) in n.gates.iter().enumerate() {
        let cell = lib.combinational(&g.cell)?;
        let out = add(format!("{}/out", g.name), NodeKind::GateOut(i));
        let ins: Vec<NodeId> = (0..g.inputs.len())
            .map(|k| add(format!("{}/in{k}", g.name), NodeKind::GateIn(i, k)))
            .collect();
        for &pin in &ins {
            arcs.push(TimingArc {
                from: pin,
                to: out,
                delay_min: T::from_ns(cell.delay_min),
                delay_max: T::from_ns(cell.delay_max),
                kind: ArcKind::Cell,
            });
        }
        gate_in.push(ins);
        gate_out.push(out);
    }

    let conn = n.connectivity();
    for (net, drivers) in &conn.drivers {
        let delay = T::from_ns(n.net_delay(net));
        for drv in drivers {
            let from = match *drv {
                Driver::Port(i) => port_node[i],
                Driver::FfQ(i) => ffs[i].q,
                Driver::Gate(i) => gate_out[i],
            };
            for load in conn.loads(net) {
                let to = match *load {
                    Load::FfD(i) => ffs[i].d,
                    Load::GateIn(g, k) => gate_in[g][k],
                    Load::Port(i) => port_node[i],
                    Load::FfClk(_) => continue,
                };
                arcs.push(TimingArc {
                    from,
                    to,
                    delay_min: delay,
                    delay_max: delay,
                    kind: ArcKind::Net,
                });
            }
        }
    }

    let mut fanout = vec![Vec::new(); nodes.len()];
    let mut indegree = vec![0usize; nodes.len()];
    for (a, arc) in arcs.iter().enumerate() {
        fanout[arc.from].push(a);
        indegree[arc.to] += 1;
    }

    // Kahn levelization; level = longest arc count from a source
    let mut level_of = vec![0usize; nodes.len()];
    let mut ready: Vec<NodeId> = (0..nodes.len()).filter(|&v| indegree[v] == 0).collect();
    let mut topo_levels: Vec<Vec<NodeId>> = Vec::new();
    let mut seen = 0;
    while !ready.is_empty() {
        ready.sort_unstable();
        let mut next = Vec::new();
        for &v in &ready {
            seen += 1;
            let lvl = level_of[v];
            for &a in &fanout[v] {
                let to = arcs[a].to;
                level_of[to] = level_of[to].max(lvl + 1);
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    next.push(to);
                }
            }
        }
        for &v in &ready {
            let lvl = level_of[v];
            if topo_levels.len() <= lvl {
                topo_levels.resize(lvl + 1, Vec::new());
            }
            topo_levels[lvl].push(v);
        }
        ready = next;
    }
    debug_assert_eq!(seen, nodes.len(), "gate_order guarantees acyclicity");
    for level in &mut topo_levels {
        level.sort_unstable();
    }

    Ok(TimingGraph {
        nodes,
        arcs,
        topo_levels,
        ffs,
        inputs,
        outputs,
        fanout,
    })
}
