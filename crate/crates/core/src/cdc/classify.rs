use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::ConstraintSet;
use crate::diagnostic::Diagnostic;
use crate::netlist::{Connectivity, Load, Netlist, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// The async signal is consumed by logic after a single register.
    Unsynchronized,
    /// Register chain of the given depth (at least 2).
    TwoFlopChain(u32),
    GrayBus { width: usize, depth: u32 },
    /// One side of a req/ack pair; carries that side's chain depth.
    Handshake(u32),
    CombBeforeSync,
    MultiFanoutSync,
}

impl Classification {
    pub fn is_safe(self) -> bool {
        matches!(
            self,
            Classification::TwoFlopChain(_) | Classification::GrayBus { .. } | Classification::Handshake(_)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Classification::Unsynchronized => "unsynchronized",
            Classification::TwoFlopChain(_) => "two_flop_chain",
            Classification::GrayBus { .. } => "gray_bus",
            Classification::Handshake(_) => "handshake",
            Classification::CombBeforeSync => "comb_before_sync",
            Classification::MultiFanoutSync => "multi_fanout_sync",
        }
    }

    pub fn depth(self) -> Option<u32> {
        match self {
            Classification::TwoFlopChain(k) | Classification::Handshake(k) => Some(k),
            Classification::GrayBus { depth, .. } => Some(depth),
            _ => None,
        }
    }
}

/// One cross-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    /// Source net, or the bus name for a grouped bus crossing.
    pub signal: String,
    /// Declared bus the signal belongs to, if any.
    pub bus: Option<String>,
    pub width: usize,
    pub src_domain: String,
    pub dst_domain: String,
    pub src_ffs: Vec<String>,
    pub dst_entry_ffs: Vec<String>,
    pub classification: Classification,
    /// Bit of a multi-bit bus that is not known to change one bit at a time.
    pub coherency_risk: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CdcAnalysis {
    pub crossings: Vec<Crossing>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CdcAnalysis {
    /// No unsafe structure and no multi-bit coherency risk.
    pub fn is_clean(&self) -> bool {
        self.crossings
            .iter()
            .all(|c| c.classification.is_safe() && !c.coherency_risk)
    }
}

#[derive(Debug, Clone)]
struct Bit {
    src_ffs: Vec<String>,
    signal: String,
    src_domain: String,
    entry: usize,
    dst_domain: String,
    class: Classification,
}

fn raw_bits(n: &Netlist, cs: &ConstraintSet, conn: &Connectivity, diags: &mut Vec<Diagnostic>) -> Vec<Bit> {
    let mut bits = Vec::new();
    for (i, ff) in n.ffs.iter().enumerate() {
        let Some(dd) = cs.domain_of(&ff.name) else {
            diags.push(Diagnostic::warning(&ff.name, "register has no clock domain; skipped"));
            continue;
        };
        let cone = match n.fanin_cone_of_net(conn, &ff.d) {
            Ok(c) => c,
            Err(e) => {
                diags.push(Diagnostic::error(&ff.name, e.to_string()));
                continue;
            }
        };
        let mut by_domain: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for src in cone {
            if let Source::FfQ(name) = src {
                if let Some(sd) = cs.domain_of(&name) {
                    if sd != dd {
                        by_domain.entry(sd).or_default().push(name);
                    }
                }
            }
        }
        for (sd, srcs) in by_domain {
            let direct = srcs.iter().find(|s| n.ff(s).is_some_and(|f| f.q == ff.d));
            let signal = match direct {
                Some(_) => ff.d.clone(),
                None => n.ff(&srcs[0]).map(|f| f.q.clone()).unwrap_or_default(),
            };
            let class = chain_class(n, cs, conn, i, &signal);
            bits.push(Bit {
                src_ffs: srcs,
                signal,
                src_domain: sd.to_string(),
                entry: i,
                dst_domain: dd.to_string(),
                class,
            });
        }
    }
    bits
}

/// Structural classification of a single async signal entering register
/// `entry`. Bus and handshake context is not considered.
pub fn classify_entry(n: &Netlist, cs: &ConstraintSet, entry: &str, signal: &str) -> Classification {
    match n.ff_index(entry) {
        Some(i) => chain_class(n, cs, &n.connectivity(), i, signal),
        None => Classification::Unsynchronized,
    }
}

fn chain_class(n: &Netlist, cs: &ConstraintSet, conn: &Connectivity, entry: usize, signal: &str) -> Classification {
    if n.ffs[entry].d != signal {
        return Classification::CombBeforeSync;
    }
    let domain = cs.domain_of(&n.ffs[entry].name);
    let mut visited = BTreeSet::from([entry]);
    let mut depth = 1u32;
    let mut cur = entry;
    loop {
        let loads = conn.loads(&n.ffs[cur].q);
        let next: Vec<usize> = loads
            .iter()
            .filter_map(|l| match *l {
                Load::FfD(j) if cs.domain_of(&n.ffs[j].name) == domain && !visited.contains(&j) => Some(j),
                _ => None,
            })
            .collect();
        if loads.len() == 1 && next.len() == 1 {
            cur = next[0];
            visited.insert(cur);
            depth += 1;
            continue;
        }
        // the first stage is always internal: any fanout beside the
        // second stage sees the metastable value
        if depth == 1 && !next.is_empty() {
            return Classification::MultiFanoutSync;
        }
        break;
    }
    if depth >= 2 {
        Classification::TwoFlopChain(depth)
    } else {
        Classification::Unsynchronized
    }
}

fn handshake_role<'a>(n: &'a Netlist, b: &Bit) -> Option<&'a str> {
    n.attr(&b.signal, "handshake")
        .or_else(|| b.src_ffs.first().and_then(|s| n.attr(s, "handshake")))
}

fn single(n: &Netlist, b: &Bit) -> Crossing {
    Crossing {
        signal: b.signal.clone(),
        bus: n.bus_of(&b.signal).map(str::to_string),
        width: 1,
        src_domain: b.src_domain.clone(),
        dst_domain: b.dst_domain.clone(),
        src_ffs: b.src_ffs.clone(),
        dst_entry_ffs: vec![n.ffs[b.entry].name.clone()],
        classification: b.class,
        coherency_risk: false,
    }
}

/// All clock-domain crossings, one per destination register (bus bits
/// grouped when they form a Gray-coded bus), in register order.
pub fn find_crossings(n: &Netlist, cs: &ConstraintSet) -> CdcAnalysis {
    let conn = n.connectivity();
    let mut diagnostics = Vec::new();
    let mut bits = raw_bits(n, cs, &conn, &mut diagnostics);

    // pair req/ack handshakes running in opposite directions
    let roles: Vec<Option<String>> = bits.iter().map(|b| handshake_role(n, b).map(str::to_string)).collect();
    let mut paired = vec![false; bits.len()];
    for r in 0..bits.len() {
        if roles[r].as_deref() != Some("req") {
            continue;
        }
        let partner = (0..bits.len()).find(|&a| {
            !paired[a]
                && roles[a].as_deref() == Some("ack")
                && bits[a].src_domain == bits[r].dst_domain
                && bits[a].dst_domain == bits[r].src_domain
        });
        match partner {
            Some(a) => {
                paired[a] = true;
                paired[r] = true;
                if let (Classification::TwoFlopChain(kr), Classification::TwoFlopChain(ka)) =
                    (bits[r].class, bits[a].class)
                {
                    bits[r].class = Classification::Handshake(kr);
                    bits[a].class = Classification::Handshake(ka);
                } else {
                    diagnostics.push(Diagnostic::warning(
                        &bits[r].signal,
                        format!("handshake with `{}` is not synchronized on both sides", bits[a].signal),
                    ));
                }
            }
            None => diagnostics.push(Diagnostic::warning(
                &bits[r].signal,
                "handshake req has no matching ack in the opposite direction",
            )),
        }
    }
    for (a, role) in roles.iter().enumerate() {
        if role.as_deref() == Some("ack") && !paired[a] {
            diagnostics.push(Diagnostic::warning(
                &bits[a].signal,
                "handshake ack has no matching req in the opposite direction",
            ));
        }
    }

    // group bus bits by (bus, src, dst)
    let mut groups: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
    let mut first_of_group: BTreeMap<usize, (String, String, String)> = BTreeMap::new();
    for (i, b) in bits.iter().enumerate() {
        if roles[i].is_some() {
            continue;
        }
        let bus = n
            .bus_of(&b.signal)
            .or_else(|| n.bus_of(&n.ffs[b.entry].d));
        if let Some(bus) = bus {
            let key = (bus.to_string(), b.src_domain.clone(), b.dst_domain.clone());
            let members = groups.entry(key.clone()).or_default();
            if members.is_empty() {
                first_of_group.insert(i, key);
            }
            members.push(i);
        }
    }
    let grouped: BTreeSet<usize> = groups.values().flatten().copied().collect();

    let mut crossings = Vec::new();
    for (i, b) in bits.iter().enumerate() {
        if !grouped.contains(&i) {
            crossings.push(single(n, b));
            continue;
        }
        let Some(key) = first_of_group.get(&i) else { continue };
        let members = &groups[key];
        let bus = &key.0;
        if members.len() == 1 {
            crossings.push(single(n, b));
            continue;
        }
        let gray = n.attr(bus, "gray") == Some("true");
        let depths: BTreeSet<Option<u32>> = members
            .iter()
            .map(|&m| match bits[m].class {
                Classification::TwoFlopChain(k) => Some(k),
                _ => None,
            })
            .collect();
        let uniform = match depths.iter().collect::<Vec<_>>().as_slice() {
            [Some(k)] => Some(*k),
            _ => None,
        };
        match (gray, uniform) {
            (true, Some(depth)) => {
                let mut src_ffs: Vec<String> = members.iter().flat_map(|&m| bits[m].src_ffs.clone()).collect();
                src_ffs.dedup();
                crossings.push(Crossing {
                    signal: bus.clone(),
                    bus: Some(bus.clone()),
                    width: members.len(),
                    src_domain: key.1.clone(),
                    dst_domain: key.2.clone(),
                    src_ffs,
                    dst_entry_ffs: members.iter().map(|&m| n.ffs[bits[m].entry].name.clone()).collect(),
                    classification: Classification::GrayBus {
                        width: members.len(),
                        depth,
                    },
                    coherency_risk: false,
                });
            }
            (gray, _) => {
                let message = if gray {
                    "gray-coded bus bits are not uniformly synchronized".to_string()
                } else {
                    format!(
                        "{}-bit bus crosses {} -> {} without gray=true; bits may be captured incoherently",
                        members.len(),
                        key.1,
                        key.2
                    )
                };
                diagnostics.push(Diagnostic::warning(bus, message));
                for &m in members {
                    let mut c = single(n, &bits[m]);
                    c.coherency_risk = true;
                    crossings.push(c);
                }
            }
        }
    }
    CdcAnalysis {
        crossings,
        diagnostics,
    }
}

/// Classification of `crossing` in the context of the whole design.
pub fn classify(n: &Netlist, cs: &ConstraintSet, crossing: &Crossing) -> Classification {
    let all = find_crossings(n, cs);
    all.crossings
        .iter()
        .find(|c| c.dst_entry_ffs == crossing.dst_entry_ffs && c.src_domain == crossing.src_domain)
        .map(|c| c.classification)
        .unwrap_or_else(|| match crossing.dst_entry_ffs.first() {
            Some(entry) => classify_entry(n, cs, entry, &crossing.signal),
            None => Classification::Unsynchronized,
        })
}
