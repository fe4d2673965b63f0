use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::ConstraintSet;
use crate::diagnostic::Diagnostic;
use crate::scalar::Scalar;

use super::{ArcKind, NodeId, SkewTable, TimingGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Setup,
    Hold,
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Check::Setup => "setup",
            Check::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SegmentLabel {
    ClockToQ,
    InputDelay,
    Logic,
    Routing,
}

impl SegmentLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::ClockToQ => "clock_to_q",
            SegmentLabel::InputDelay => "input_delay",
            SegmentLabel::Logic => "logic",
            SegmentLabel::Routing => "routing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub label: SegmentLabel,
    pub ns: T,
}

/// One pin along a reported path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint<T> {
    pub pin: String,
    pub incr: T,
    pub arrival: T,
}

/// Worst path between one start point and one end point.
///
/// `arrival = launch_time + sum(segments)`. For setup
/// `required = capture_time - capture_requirement` and
/// `slack = required - arrival`; for hold
/// `required = capture_time + capture_requirement` and
/// `slack = arrival - required`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathReport<T> {
    pub check: Check,
    pub clock: String,
    pub launch: String,
    pub capture: String,
    pub multicycle: u32,
    /// Path starts at an input port rather than a register.
    pub from_input: bool,
    /// Path ends at an output port rather than a register.
    pub to_output: bool,
    /// Clock skew at the launching register (zero for input ports).
    pub launch_time: T,
    pub segments: Vec<Segment<T>>,
    pub points: Vec<PathPoint<T>>,
    pub arrival: T,
    /// Clock skew at the capturing register (zero for output ports).
    pub capture_skew: T,
    /// Edge time the check is made against, skew included.
    pub capture_time: T,
    /// Setup or hold time of the capture register, or the output delay.
    pub capture_requirement: T,
    pub required: T,
    pub slack: T,
}

impl<T: Scalar> PathReport<T> {
    pub fn segment(&self, label: SegmentLabel) -> Option<T> {
        self.segments.iter().find(|s| s.label == label).map(|s| s.ns)
    }

    /// Critical-path delay: data arrival relative to the launch edge.
    pub fn path_delay(&self) -> T {
        self.arrival - self.launch_time
    }

    pub fn segment_sum(&self) -> T {
        self.segments
            .iter()
            .fold(self.launch_time, |acc, s| acc + s.ns)
    }

    pub fn is_violated(&self) -> bool {
        self.slack < T::zero() - T::tolerance()
    }

    /// Smallest period at which this setup path would have zero slack.
    pub fn required_period(&self) -> T {
        (self.arrival + self.capture_requirement - self.capture_skew)
            / T::from_count(self.multicycle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis<T> {
    /// Sorted by ascending slack, ties by (launch, capture).
    pub reports: Vec<PathReport<T>>,
    pub diagnostics: Vec<Diagnostic>,
    /// Same-structure paths left to CDC analysis because launch and capture
    /// sit in different clock domains.
    pub cross_domain_skipped: usize,
}

impl<T: Scalar> Analysis<T> {
    pub fn worst_slack(&self) -> Option<T> {
        self.reports.first().map(|r| r.slack)
    }

    pub fn has_violation(&self) -> bool {
        self.reports.iter().any(PathReport::is_violated)
    }
}

fn order<T: Scalar>(a: &PathReport<T>, b: &PathReport<T>) -> Ordering {
    a.slack
        .partial_cmp(&b.slack)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.launch.cmp(&b.launch))
        .then_with(|| a.capture.cmp(&b.capture))
}

struct Start<T> {
    name: String,
    node: NodeId,
    launch_time: T,
    input_delay: Option<T>,
    ff: bool,
    clock: String,
}

fn starts<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    skew: &SkewTable<T>,
    diags: &mut Vec<Diagnostic>,
) -> Vec<Start<T>> {
    let mut out = Vec::new();
    for ff in &g.ffs {
        match cs.domain_of(&ff.name) {
            Some(c) => out.push(Start {
                name: ff.name.clone(),
                node: ff.clock_pin,
                launch_time: skew.get(&ff.name),
                input_delay: None,
                ff: true,
                clock: c.to_string(),
            }),
            None => diags.push(Diagnostic::warning(&ff.name, "register has no clock domain; skipped")),
        }
    }
    for (name, node) in &g.inputs {
        if cs.clock_on_port(name).is_some() {
            continue;
        }
        match cs.input_delays.get(name) {
            Some((clock, delay)) => {
                let d = T::from_ns(*delay);
                out.push(Start {
                    name: name.clone(),
                    node: *node,
                    launch_time: d,
                    input_delay: Some(d),
                    ff: false,
                    clock: clock.clone(),
                })
            }
            None => {
                let reaches = reaches_endpoint(g, *node);
                if reaches {
                    diags.push(Diagnostic::warning(
                        name,
                        "unconstrained start point (no input delay); paths skipped",
                    ));
                }
            }
        }
    }
    out
}

fn reaches_endpoint<T: Scalar>(g: &TimingGraph<T>, node: NodeId) -> bool {
    let (arr, _) = g.propagate(&[(node, T::zero())], true);
    g.ffs.iter().any(|f| arr[f.d].is_some()) || g.outputs.iter().any(|(_, o)| arr[*o].is_some())
}

fn trace<T: Scalar>(
    g: &TimingGraph<T>,
    start: &Start<T>,
    end: NodeId,
    arrival: &[Option<T>],
    via: &[Option<usize>],
) -> (Vec<Segment<T>>, Vec<PathPoint<T>>) {
    let mut arcs = Vec::new();
    let mut node = end;
    while node != start.node {
        let a = via[node].expect("reached node has a predecessor arc");
        arcs.push(a);
        node = g.arcs[a].from;
    }
    arcs.reverse();

    let mut points = vec![PathPoint {
        pin: g.nodes[start.node].name.clone(),
        incr: T::zero(),
        arrival: arrival[start.node].unwrap(),
    }];
    let mut per_label: BTreeMap<SegmentLabel, T> = BTreeMap::new();
    if let Some(d) = start.input_delay {
        per_label.insert(SegmentLabel::InputDelay, d);
        points[0].incr = d;
    }
    for &a in &arcs {
        let arc = &g.arcs[a];
        let incr = arrival[arc.to].unwrap() - arrival[arc.from].unwrap();
        let label = match arc.kind {
            ArcKind::ClockToQ => SegmentLabel::ClockToQ,
            ArcKind::Cell => SegmentLabel::Logic,
            ArcKind::Net => SegmentLabel::Routing,
        };
        let delay = incr;
        per_label
            .entry(label)
            .and_modify(|v| *v = *v + delay)
            .or_insert(delay);
        points.push(PathPoint {
            pin: g.nodes[arc.to].name.clone(),
            incr,
            arrival: arrival[arc.to].unwrap(),
        });
    }
    let segments = per_label
        .into_iter()
        .map(|(label, ns)| Segment { label, ns })
        .collect();
    (segments, points)
}

fn analyze<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    skew: &SkewTable<T>,
    check: Check,
) -> Analysis<T> {
    let mut diags = Vec::new();
    let mut reports = Vec::new();
    let mut cross = 0;
    let mut unconstrained_out: BTreeSet<String> = BTreeSet::new();
    let latest = check == Check::Setup;

    for start in starts(g, cs, skew, &mut diags) {
        let (arrival, via) = g.propagate(&[(start.node, start.launch_time)], latest);

        for ff in &g.ffs {
            let Some(at) = arrival[ff.d] else { continue };
            let Some(dc) = cs.domain_of(&ff.name) else { continue };
            if dc != start.clock {
                cross += 1;
                continue;
            }
            if cs.is_false_path(&start.clock, dc) {
                continue;
            }
            let n = if start.ff {
                cs.multicycle(&start.name, &ff.name)
            } else {
                1
            };
            let period = T::from_ns(cs.period(dc).expect("resolved domain has a clock"));
            let capture_skew = skew.get(&ff.name);
            let (capture_time, requirement, required, slack) = match check {
                Check::Setup => {
                    let ct = T::from_count(n) * period + capture_skew;
                    let req = ct - ff.setup;
                    (ct, ff.setup, req, req - at)
                }
                Check::Hold => {
                    let ct = capture_skew;
                    let req = ct + ff.hold;
                    (ct, ff.hold, req, at - req)
                }
            };
            let (segments, points) = trace(g, &start, ff.d, &arrival, &via);
            reports.push(PathReport {
                check,
                clock: dc.to_string(),
                launch: start.name.clone(),
                capture: ff.name.clone(),
                multicycle: n,
                from_input: !start.ff,
                to_output: false,
                launch_time: if start.ff { start.launch_time } else { T::zero() },
                segments,
                points,
                arrival: at,
                capture_skew,
                capture_time,
                capture_requirement: requirement,
                required,
                slack,
            });
        }

        for (name, node) in &g.outputs {
            let Some(at) = arrival[*node] else { continue };
            let Some((clock, od)) = cs.output_delays.get(name) else {
                unconstrained_out.insert(name.clone());
                continue;
            };
            if *clock != start.clock {
                cross += 1;
                continue;
            }
            if cs.is_false_path(&start.clock, clock) {
                continue;
            }
            let od = T::from_ns(*od);
            let period = T::from_ns(cs.period(clock).expect("resolved clock"));
            let (capture_time, required, slack) = match check {
                Check::Setup => (period, period - od, period - od - at),
                Check::Hold => (T::zero(), T::zero() - od, at - (T::zero() - od)),
            };
            let (segments, points) = trace(g, &start, *node, &arrival, &via);
            reports.push(PathReport {
                check,
                clock: clock.clone(),
                launch: start.name.clone(),
                capture: name.clone(),
                multicycle: 1,
                from_input: !start.ff,
                to_output: true,
                launch_time: if start.ff { start.launch_time } else { T::zero() },
                segments,
                points,
                arrival: at,
                capture_skew: T::zero(),
                capture_time,
                capture_requirement: od,
                required,
                slack,
            });
        }
    }
    for name in unconstrained_out {
        diags.push(Diagnostic::warning(
            name,
            "unconstrained end point (no output delay); paths skipped",
        ));
    }
    reports.sort_by(order);
    Analysis {
        reports,
        diagnostics: diags,
        cross_domain_skipped: cross,
    }
}

/// Setup check (late arrival against the capture edge) for every
/// same-domain start/end pair.
pub fn setup_check<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    skew: &SkewTable<T>,
) -> Analysis<T> {
    analyze(g, cs, skew, Check::Setup)
}

/// Hold check (early arrival against edge 0, independent of multicycle).
pub fn hold_check<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    skew: &SkewTable<T>,
) -> Analysis<T> {
    analyze(g, cs, skew, Check::Hold)
}

/// The `k` worst reports, ties broken by (launch, capture) name.
pub fn top_paths<T: Scalar>(reports: &[PathReport<T>], k: usize) -> Vec<PathReport<T>> {
    let mut sorted = reports.to_vec();
    sorted.sort_by(order);
    sorted.truncate(k);
    sorted
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockFmax<T> {
    pub clock: String,
    /// Smallest period with nonnegative setup slack on every path.
    pub min_period: T,
    pub mhz: f64,
    /// Start and end of the path that sets `min_period`.
    pub limiting: (String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmaxAnalysis<T> {
    pub clocks: BTreeMap<String, ClockFmax<T>>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Maximum frequency per clock, from the worst required period over all
/// of its setup paths.
pub fn fmax<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    skew: &SkewTable<T>,
) -> FmaxAnalysis<T> {
    let setup = setup_check(g, cs, skew);
    let mut diagnostics = setup.diagnostics;
    let mut clocks: BTreeMap<String, ClockFmax<T>> = BTreeMap::new();
    for r in &setup.reports {
        let p = r.required_period();
        let replace = match clocks.get(&r.clock) {
            None => true,
            Some(cur) => p > cur.min_period,
        };
        if replace {
            clocks.insert(
                r.clock.clone(),
                ClockFmax {
                    clock: r.clock.clone(),
                    min_period: p,
                    mhz: 0.0,
                    limiting: (r.launch.clone(), r.capture.clone()),
                },
            );
        }
    }
    for name in cs.clocks.keys() {
        match clocks.get_mut(name) {
            None => diagnostics.push(Diagnostic::warning(
                name,
                "no constrained timing paths; Fmax not reported",
            )),
            Some(c) if c.min_period <= T::zero() => {
                diagnostics.push(Diagnostic::warning(
                    name,
                    "paths need no time; Fmax is unbounded and not reported",
                ));
                clocks.remove(name);
            }
            Some(c) => c.mhz = 1000.0 / c.min_period.to_ns(),
        }
    }
    FmaxAnalysis {
        clocks,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{parse_sdc, resolve};
    use crate::netlist::parse_netlist;
    use crate::sta::build_graph;
    use crate::techlib::{builtin_asic, builtin_fpga, Library};
    use crate::Rational;

    fn setup<T: Scalar>(tnl: &str, sdc: &str, lib: &Library) -> (TimingGraph<T>, ConstraintSet) {
        let n = parse_netlist(tnl).unwrap();
        let cs = resolve(&parse_sdc(sdc).unwrap(), &n).unwrap();
        (build_graph(&n, lib).unwrap(), cs)
    }

    const WIRE: &str = "design w\nport in clk\nport in a\n\
        ff r1 FDRE clk=clk d=a q=q1\nff r2 FDRE clk=clk d=q1 q=q2\n";

    #[test]
    fn hold_direct_wire() {
        let (g, cs) = setup::<f64>(WIRE, "create_clock -period 2.0 [get_ports clk]", &builtin_fpga());
        let a = hold_check(&g, &cs, &SkewTable::zero());
        assert_eq!(a.reports.len(), 1);
        assert!((a.reports[0].slack - 0.330).abs() < 1e-9);

        let mut skew = SkewTable::zero();
        skew.set("r2", 0.5);
        let a = hold_check(&g, &cs, &skew);
        assert!((a.reports[0].slack + 0.170).abs() < 1e-9);
        assert!(a.has_violation());
        // the unconstrained input port is reported, not timed
        assert!(a.diagnostics.iter().any(|d| d.object == "a"));
    }

    #[test]
    fn hold_direct_wire_asic() {
        let tnl = WIRE.replace("FDRE", "DFF_SVT");
        let (g, cs) = setup::<f64>(&tnl, "create_clock -period 1 [get_ports clk]", &builtin_asic());
        let a = hold_check(&g, &cs, &SkewTable::zero());
        assert!((a.reports[0].slack - 0.050).abs() < 1e-9);
    }

    #[test]
    fn multicycle_moves_setup_edge_only() {
        let lib = crate::techlib::parse_library(
            "library t\nff F setup=0.18 hold=0.1 cq=0\ncomb D delay=3.0 inputs=1\n",
        )
        .unwrap();
        let tnl = "design m\nport in clk\nport in a\nff reg_a F clk=clk d=a q=q1\n\
                   gate g D in=q1 out=n\nff reg_b F clk=clk d=n q=q2\n";
        let sdc = "create_clock -period 2.35 [get_ports clk]\n\
                   set_multicycle_path -setup 2 -from reg_a -to reg_b\n";
        let (g, cs) = setup::<f64>(tnl, sdc, &lib);
        let s = setup_check(&g, &cs, &SkewTable::zero());
        let r = s.reports.iter().find(|r| r.launch == "reg_a").unwrap();
        assert_eq!(r.multicycle, 2);
        assert!((r.required - 4.52).abs() < 1e-9);
        assert!((r.slack - 1.52).abs() < 1e-9);
        let h = hold_check(&g, &cs, &SkewTable::zero());
        let r = h.reports.iter().find(|r| r.launch == "reg_a").unwrap();
        assert!((r.required - 0.1).abs() < 1e-9);
    }

    #[test]
    fn self_loop_fmax() {
        let tnl = "design s\nport in clk\nff r FDRE clk=clk d=n q=q\ngate g LUT2 in=q,q out=n\n";
        let (g, cs) = setup::<f64>(tnl, "create_clock -period 5 [get_ports clk]", &builtin_fpga());
        let f = fmax(&g, &cs, &SkewTable::zero());
        let c = &f.clocks["clk"];
        assert!((c.min_period - 0.95).abs() < 1e-9);
        assert_eq!(crate::fmt::mhz(c.mhz), "1052.6");
    }

    #[test]
    fn no_paths_means_no_fmax() {
        let (g, cs) = setup::<f64>(
            "design e\nport in clk\n",
            "create_clock -period 5 [get_ports clk]",
            &builtin_fpga(),
        );
        let f = fmax(&g, &cs, &SkewTable::zero());
        assert!(f.clocks.is_empty());
        assert_eq!(f.diagnostics.len(), 1);
    }

    #[test]
    fn io_paths() {
        let tnl = "design io\nport in clk\nport in din\nport out dout\n\
                   ff r FDRE clk=clk d=din q=dout\n";
        let sdc = "create_clock -period 2 [get_ports clk]\n\
                   set_input_delay -clock clk 0.5 [get_ports din]\n\
                   set_output_delay -clock clk 0.8 [get_ports dout]\n";
        let (g, cs) = setup::<f64>(tnl, sdc, &builtin_fpga());
        let s = setup_check(&g, &cs, &SkewTable::zero());
        assert_eq!(s.reports.len(), 2);
        let out = s.reports.iter().find(|r| r.to_output).unwrap();
        // 2 - 0.8 - 0.45
        assert!((out.slack - 0.75).abs() < 1e-9);
        let inp = s.reports.iter().find(|r| r.from_input).unwrap();
        assert_eq!(inp.segment(SegmentLabel::InputDelay), Some(0.5));
        // 2 - 0.18 - 0.5
        assert!((inp.slack - 1.32).abs() < 1e-9);
        let h = hold_check(&g, &cs, &SkewTable::zero());
        let out = h.reports.iter().find(|r| r.to_output).unwrap();
        assert!((out.slack - 1.25).abs() < 1e-9);
    }

    #[test]
    fn exact_arithmetic_matches() {
        let lib = builtin_asic();
        let tnl = "design x\nport in clk\nport in a\nff r1 DFF_SVT clk=clk d=a q=q1\n\
                   gate g1 NAND2 in=q1,q1 out=n1\ngate g2 XOR2 in=n1,q1 out=n2\n\
                   ff r2 DFF_SVT clk=clk d=n2 q=q2\nnetdelay n1 0.1\nnetdelay n2 0.2\n";
        let sdc = "create_clock -period 0.8 [get_ports clk]";
        let (gf, cs) = setup::<f64>(tnl, sdc, &lib);
        let (gr, _) = setup::<Rational>(tnl, sdc, &lib);
        let f = setup_check(&gf, &cs, &SkewTable::zero());
        let r = setup_check(&gr, &cs, &SkewTable::zero());
        assert_eq!(f.reports.len(), r.reports.len());
        // 0.8 - 0.045 - (0.085 + 0.025 + 0.1 + 0.04 + 0.2)
        assert_eq!(r.reports[0].slack, Rational::new(61, 200));
        assert!((f.reports[0].slack - 0.305).abs() < 1e-9);
        assert_eq!(r.reports[0].segment_sum(), r.reports[0].arrival);
    }

    #[test]
    fn ties_are_name_ordered() {
        let tnl = "design t\nport in clk\nport in a\nff rb FDRE clk=clk d=a q=qb\n\
                   ff ra FDRE clk=clk d=a q=qa\nff z1 FDRE clk=clk d=qa q=x\nff z0 FDRE clk=clk d=qb q=y\n";
        let (g, cs) = setup::<f64>(tnl, "create_clock -period 2 [get_ports clk]", &builtin_fpga());
        let s = setup_check(&g, &cs, &SkewTable::zero());
        let names: Vec<_> = s.reports.iter().map(|r| r.launch.as_str()).collect();
        assert_eq!(names, ["ra", "rb"]);
        assert_eq!(top_paths(&s.reports, 1)[0].launch, "ra");
        assert_eq!(top_paths(&s.reports, 10).len(), 2);
    }
}
