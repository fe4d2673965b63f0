//! Useful-skew clock scheduling.
//!
//! Every timing path becomes a difference constraint between register
//! clock arrivals, `x_a - x_b <= n * period - c`: setup terms carry the
//! multicycle factor `n`, hold terms have `n = 0`. Ports pin to an anchor
//! node held at zero skew, and the skew bound adds `|x_r| <= bound` edges.
//! A period is feasible iff the constraint graph has no negative cycle;
//! the smallest feasible period is found by bisection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::fmt::ns;
use crate::scalar::Scalar;
use crate::sta::{fmax, hold_check, setup_check, Analysis, SkewTable, TimingGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkewError {
    #[error("skew scheduling needs a single clock domain, found {}", .0.join(", "))]
    MultiDomain(Vec<String>),
    #[error("no clock to schedule")]
    NoClock,
    #[error("period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("skew bound must be nonnegative, got {0}")]
    InvalidBound(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no constrained timing paths")]
    NoPaths,
    #[error("no feasible schedule at period {period:.3} ns; negative cycle {}", .cycle.join(" -> "))]
    Infeasible { period: f64, cycle: Vec<String> },
    #[error("schedule line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Setup,
    Hold,
    Bound,
}

/// Constraint `x[to] - x[from] <= weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewEdge<T> {
    pub from: usize,
    pub to: usize,
    pub weight: T,
    pub kind: EdgeKind,
    /// Path start and end that produced the edge.
    pub launch: String,
    pub capture: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewConstraintGraph<T> {
    /// Node names; the last node is the anchor.
    pub nodes: Vec<String>,
    pub edges: Vec<SkewEdge<T>>,
    pub period: T,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewSchedule<T> {
    pub skews: BTreeMap<String, T>,
    pub period: T,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeCycle<T> {
    /// Node names along the cycle, first repeated at the end.
    pub nodes: Vec<String>,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    Feasible(SkewSchedule<T>),
    Infeasible(NegativeCycle<T>),
}

pub const ANCHOR: &str = "(ports)";

impl<T: Scalar> SkewSchedule<T> {
    pub fn zero(registers: impl IntoIterator<Item = String>, period: T) -> Self {
        SkewSchedule {
            skews: registers.into_iter().map(|r| (r, T::zero())).collect(),
            period,
            bound: T::zero(),
        }
    }

    pub fn skew_table(&self) -> SkewTable<T> {
        self.skews.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

impl<T: Scalar> SkewConstraintGraph<T> {
    pub fn anchor(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Edges violated by `x` (indexed like `nodes`) beyond tolerance.
    pub fn violations(&self, x: &[T]) -> Vec<&SkewEdge<T>> {
        self.edges
            .iter()
            .filter(|e| x[e.to] - x[e.from] > e.weight + T::tolerance())
            .collect()
    }

    pub fn schedule_values(&self, s: &SkewSchedule<T>) -> Vec<T> {
        let mut x: Vec<T> = self.nodes.iter().map(|n| s.skews.get(n).copied().unwrap_or_else(T::zero)).collect();
        let a = self.anchor();
        x[a] = T::zero();
        x
    }
}

/// One path term `x_a - x_b <= n * period - c`.
#[derive(Debug, Clone)]
struct Term<T> {
    a: usize,
    b: usize,
    n: u32,
    c: T,
    kind: EdgeKind,
    launch: String,
    capture: String,
}

#[derive(Debug, Clone)]
struct Terms<T> {
    nodes: Vec<String>,
    terms: Vec<Term<T>>,
    zero_skew_period: Option<T>,
}

fn single_clock(cs: &ConstraintSet) -> Result<String, SkewError> {
    let domains: BTreeSet<&String> = cs.domains.values().collect();
    match domains.len() {
        0 => match cs.clocks.len() {
            1 => Ok(cs.clocks.keys().next().unwrap().clone()),
            0 => Err(SkewError::NoClock),
            _ => Err(SkewError::MultiDomain(cs.clocks.keys().cloned().collect())),
        },
        1 => Ok(domains.into_iter().next().unwrap().clone()),
        _ => Err(SkewError::MultiDomain(domains.into_iter().cloned().collect())),
    }
}

fn collect_terms<T: Scalar>(g: &TimingGraph<T>, cs: &ConstraintSet) -> Result<Terms<T>, SkewError> {
    let clock = single_clock(cs)?;
    let mut nodes: Vec<String> = g.ffs.iter().map(|f| f.name.clone()).collect();
    let anchor = nodes.len();
    nodes.push(ANCHOR.to_string());
    let index: BTreeMap<&str, usize> = g.ffs.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
    let node_of = |name: &str| index.get(name).copied().unwrap_or(anchor);

    let zero = SkewTable::zero();
    let setup = setup_check(g, cs, &zero);
    let hold = hold_check(g, cs, &zero);
    let mut terms = Vec::new();
    for r in &setup.reports {
        // setup: x_launch - x_capture <= n*P - (arrival + requirement);
        // output ports sit at the anchor
        terms.push(Term {
            a: if r.from_input { anchor } else { node_of(&r.launch) },
            b: if r.to_output { anchor } else { node_of(&r.capture) },
            n: r.multicycle,
            c: r.arrival + r.capture_requirement,
            kind: EdgeKind::Setup,
            launch: r.launch.clone(),
            capture: r.capture.clone(),
        });
    }
    for r in &hold.reports {
        // hold: x_capture - x_launch <= arrival_min - hold; for an output
        // port the requirement is -od
        let c = if r.to_output {
            T::zero() - (r.arrival + r.capture_requirement)
        } else {
            r.capture_requirement - r.arrival
        };
        terms.push(Term {
            a: if r.to_output { anchor } else { node_of(&r.capture) },
            b: if r.from_input { anchor } else { node_of(&r.launch) },
            n: 0,
            c,
            kind: EdgeKind::Hold,
            launch: r.launch.clone(),
            capture: r.capture.clone(),
        });
    }
    let f = fmax(g, cs, &zero);
    Ok(Terms {
        nodes,
        terms,
        zero_skew_period: f.clocks.get(&clock).map(|c| c.min_period),
    })
}

impl<T: Scalar> Terms<T> {
    fn graph(&self, period: T, bound: T) -> SkewConstraintGraph<T> {
        let anchor = self.nodes.len() - 1;
        let mut edges: Vec<SkewEdge<T>> = self
            .terms
            .iter()
            .map(|t| SkewEdge {
                from: t.b,
                to: t.a,
                weight: T::from_count(t.n) * period - t.c,
                kind: t.kind,
                launch: t.launch.clone(),
                capture: t.capture.clone(),
            })
            .collect();
        for r in 0..anchor {
            for (from, to) in [(anchor, r), (r, anchor)] {
                edges.push(SkewEdge {
                    from,
                    to,
                    weight: bound,
                    kind: EdgeKind::Bound,
                    launch: self.nodes[from].clone(),
                    capture: self.nodes[to].clone(),
                });
            }
        }
        SkewConstraintGraph {
            nodes: self.nodes.clone(),
            edges,
            period,
            bound,
        }
    }
}

fn check_inputs(period: f64, bound: f64) -> Result<(), SkewError> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(SkewError::NonPositivePeriod(period));
    }
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(SkewError::InvalidBound(bound));
    }
    Ok(())
}

/// Difference constraints for one period. Rejects designs with more than
/// one clock domain.
pub fn build_constraints<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    period: T,
    bound: T,
) -> Result<SkewConstraintGraph<T>, SkewError> {
    check_inputs(period.to_ns(), bound.to_ns())?;
    Ok(collect_terms(g, cs)?.graph(period, bound))
}

/// Shortest-path potentials from the anchor (Bellman-Ford). Returns the
/// schedule, or a negative cycle proving that none exists.
pub fn feasible<T: Scalar>(scg: &SkewConstraintGraph<T>) -> Feasibility<T> {
    let n = scg.nodes.len();
    let anchor = scg.anchor();
    let mut dist: Vec<Option<T>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    dist[anchor] = Some(T::zero());
    let tol = T::tolerance();

    let relax = |dist: &mut Vec<Option<T>>, pred: &mut Vec<Option<usize>>| {
        let mut changed = None;
        for (i, e) in scg.edges.iter().enumerate() {
            let Some(du) = dist[e.from] else { continue };
            let cand = du + e.weight;
            let better = match dist[e.to] {
                None => true,
                Some(dv) => cand < dv - tol,
            };
            if better {
                dist[e.to] = Some(cand);
                pred[e.to] = Some(i);
                changed = Some(e.to);
            }
        }
        changed
    };

    let mut last = None;
    for _ in 0..n {
        last = relax(&mut dist, &mut pred);
        if last.is_none() {
            break;
        }
    }
    if let Some(mut v) = last {
        // walk back n steps to land on the cycle
        for _ in 0..n {
            v = scg.edges[pred[v].unwrap()].from;
        }
        let start = v;
        let mut cycle = vec![start];
        let mut weight = T::zero();
        loop {
            let e = &scg.edges[pred[v].unwrap()];
            weight = weight + e.weight;
            v = e.from;
            cycle.push(v);
            if v == start {
                break;
            }
        }
        cycle.reverse();
        return Feasibility::Infeasible(NegativeCycle {
            nodes: cycle.into_iter().map(|i| scg.nodes[i].clone()).collect(),
            weight,
        });
    }

    let skews = (0..anchor)
        .map(|i| (scg.nodes[i].clone(), dist[i].unwrap_or_else(T::zero)))
        .collect();
    Feasibility::Feasible(SkewSchedule {
        skews,
        period: scg.period,
        bound: scg.bound,
    })
}

/// Smallest feasible period within `tol`, never above the zero-skew
/// period, with its schedule.
pub fn optimize_period<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    bound: T,
    tol: T,
) -> Result<(T, SkewSchedule<T>), SkewError> {
    // partial_cmp so NaN is rejected too
    if tol.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return Err(SkewError::InvalidTolerance(tol.to_ns()));
    }
    if !matches!(bound.partial_cmp(&T::zero()), Some(Ordering::Greater | Ordering::Equal)) {
        return Err(SkewError::InvalidBound(bound.to_ns()));
    }
    let terms = collect_terms(g, cs)?;
    let upper = terms.zero_skew_period.ok_or(SkewError::NoPaths)?;
    let try_period = |p: T| feasible(&terms.graph(p, bound));

    let at_upper = match try_period(upper) {
        Feasibility::Feasible(s) => s,
        Feasibility::Infeasible(c) => {
            return Err(SkewError::Infeasible {
                period: upper.to_ns(),
                cycle: c.nodes,
            })
        }
    };
    if bound == T::zero() {
        return Ok((upper, at_upper));
    }

    // a register's own path cannot be helped by skew
    let mut lower = T::zero();
    for t in &terms.terms {
        if t.a == t.b && t.n > 0 {
            lower = lower.max_of(t.c / T::from_count(t.n));
        }
    }
    if let Feasibility::Feasible(s) = try_period(lower) {
        if lower > T::zero() {
            return Ok((lower, s));
        }
    }
    let (mut lo, mut hi, mut best) = (lower, upper, at_upper);
    while hi - lo > tol {
        let mid = (lo + hi).half();
        match try_period(mid) {
            Feasibility::Feasible(s) => {
                hi = mid;
                best = s;
            }
            Feasibility::Infeasible(_) => lo = mid,
        }
    }
    Ok((hi, best))
}

/// Setup and hold analyses with the schedule's skews at its period.
pub fn verify_schedule<T: Scalar>(
    g: &TimingGraph<T>,
    cs: &ConstraintSet,
    sched: &SkewSchedule<T>,
) -> Result<(Analysis<T>, Analysis<T>), SkewError> {
    let clock = single_clock(cs)?;
    let mut cs = cs.clone();
    cs.set_period(&clock, sched.period.to_ns());
    let skew = sched.skew_table();
    Ok((setup_check(g, &cs, &skew), hold_check(g, &cs, &skew)))
}

/// `period_ns=X` header, then `register,skew_ns` rows.
pub fn schedule_csv<T: Scalar>(s: &SkewSchedule<T>) -> String {
    let mut out = format!("period_ns={:.6}\nregister,skew_ns\n", s.period.to_ns());
    for (r, v) in &s.skews {
        out.push_str(&format!("{r},{:.6}\n", v.to_ns()));
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<SkewSchedule<f64>, SkewError> {
    let err = |line: usize, message: &str| SkewError::Parse {
        line,
        message: message.to_string(),
    };
    let mut period = None;
    let mut skews = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("period_ns=") {
            let p: f64 = v.trim().parse().map_err(|_| err(i + 1, "bad period"))?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(err(i + 1, "period must be positive"));
            }
            period = Some(p);
            continue;
        }
        if line == "register,skew_ns" {
            continue;
        }
        let (r, v) = line.split_once(',').ok_or_else(|| err(i + 1, "expected `register,skew_ns`"))?;
        let v: f64 = v.trim().parse().map_err(|_| err(i + 1, "bad skew value"))?;
        if !v.is_finite() {
            return Err(err(i + 1, "skew must be finite"));
        }
        if skews.insert(r.trim().to_string(), v).is_some() {
            return Err(err(i + 1, "duplicate register"));
        }
    }
    let period = period.ok_or_else(|| err(1, "missing `period_ns=` header"))?;
    let bound = skews.values().fold(0.0f64, |m, v: &f64| m.max(v.abs()));
    Ok(SkewSchedule { skews, period, bound })
}

pub fn schedule_text<T: Scalar>(s: &SkewSchedule<T>, zero_skew_period: Option<T>) -> String {
    let mut out = format!("period {} ns", ns(s.period.to_ns()));
    if let Some(z) = zero_skew_period {
        out.push_str(&format!(" (zero-skew {} ns)", ns(z.to_ns())));
    }
    out.push('\n');
    for (r, v) in &s.skews {
        out.push_str(&format!("  {r:<16} {:>10}\n", ns(v.to_ns())));
    }
    out
}

/// Period needed with every skew at zero, or `None` without paths.
pub fn zero_skew_period<T: Scalar>(g: &TimingGraph<T>, cs: &ConstraintSet) -> Result<Option<T>, SkewError> {
    Ok(collect_terms(g, cs)?.zero_skew_period)
}
