//! Random single-clock designs and an exhaustive path-enumeration oracle.
//! Shared with the CLI acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tclose_core::constraints::{parse_sdc, resolve, ConstraintSet};
use tclose_core::netlist::{Direction, Netlist};
use tclose_core::techlib::{CombCell, Library, SeqCell};

pub struct Design {
    pub netlist: Netlist,
    pub lib: Library,
    pub period: f64,
}

impl Design {
    pub fn constraints(&self) -> ConstraintSet {
        constraints_at(&self.netlist, self.period)
    }
}

pub fn constraints_at(n: &Netlist, period: f64) -> ConstraintSet {
    let sdc = format!("create_clock -period {period} [get_ports clk]\n");
    resolve(&parse_sdc(&sdc).unwrap(), n).unwrap()
}

#[derive(Clone, Copy)]
pub struct Shape {
    pub max_instances: usize,
    pub max_ffs: usize,
    /// Delays are drawn on a `1/grid` ns lattice in `[0, 1]`.
    pub grid: u32,
    pub min_equals_max: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_instances: 12,
            max_ffs: 4,
            grid: 1000,
            min_equals_max: false,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, grid: u32) -> f64 {
    f64::from(rng.random_range(0..=grid)) / f64::from(grid)
}

fn draw_pair(rng: &mut ChaCha8Rng, shape: Shape) -> (f64, f64) {
    let max = draw(rng, shape.grid);
    let min = if shape.min_equals_max {
        max
    } else {
        max * draw(rng, shape.grid)
    };
    (min, max)
}

/// Random register/gate DAG clocked by port `clk`. Gates read register
/// outputs or earlier gates; register inputs read anything.
pub fn random_design(seed: u64, shape: Shape) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cq_min, cq_max) = draw_pair(&mut rng, shape);
    let (hold, _) = draw_pair(&mut rng, shape);
    let mut lib = Library::new("rand").with_ff(
        "R",
        SeqCell {
            setup: draw(&mut rng, shape.grid),
            hold,
            cq_max,
            cq_min,
            tau: None,
            tw: None,
        },
    );
    for k in 1..=3 {
        let (delay_min, delay_max) = draw_pair(&mut rng, shape);
        lib = lib.with_comb(
            &format!("G{k}"),
            CombCell {
                delay_max,
                delay_min,
                inputs: k,
            },
        );
    }

    let nff = rng.random_range(1..=shape.max_ffs.min(shape.max_instances));
    let ngates = rng.random_range(0..=shape.max_instances - nff);
    let mut n = Netlist::new(format!("rand{seed}"));
    n.add_port("clk", Direction::In);
    let mut nets: Vec<String> = (0..nff).map(|i| format!("q{i}")).collect();
    for g in 0..ngates {
        let k = rng.random_range(1..=3usize);
        let ins: Vec<String> = (0..k).map(|_| nets[rng.random_range(0..nets.len())].clone()).collect();
        let ins: Vec<&str> = ins.iter().map(String::as_str).collect();
        let out = format!("n{g}");
        n.add_gate(&format!("g{g}"), &format!("G{k}"), &ins, &out);
        nets.push(out);
    }
    for i in 0..nff {
        let d = nets[rng.random_range(0..nets.len())].clone();
        n.add_ff(&format!("r{i}"), "R", "clk", &d, &format!("q{i}"));
    }
    for net in &nets {
        let d = draw(&mut rng, shape.grid);
        n.set_net_delay(net, d);
    }
    let period = 0.5 + 4.0 * draw(&mut rng, shape.grid);
    Design {
        netlist: n,
        lib,
        period,
    }
}

/// Per (launch, capture) pair: (latest arrival with max delays, earliest
/// with min delays, number of distinct paths). Sums run source to sink so
/// rounding matches forward propagation.
pub fn enumerate_paths(n: &Netlist, lib: &Library) -> BTreeMap<(String, String), (f64, f64, usize)> {
    let mut out = BTreeMap::new();
    for launch in &n.ffs {
        let cell = lib.sequential(&launch.cell).unwrap();
        walk(
            n,
            lib,
            &launch.name,
            &launch.q,
            0.0 + cell.cq_max,
            0.0 + cell.cq_min,
            &mut out,
        );
    }
    out
}

fn walk(
    n: &Netlist,
    lib: &Library,
    launch: &str,
    net: &str,
    tmax: f64,
    tmin: f64,
    out: &mut BTreeMap<(String, String), (f64, f64, usize)>,
) {
    let wire = n.net_delay(net);
    for ff in n.ffs.iter().filter(|f| f.d == net) {
        let (amax, amin) = (tmax + wire, tmin + wire);
        let e = out
            .entry((launch.to_string(), ff.name.clone()))
            .or_insert((f64::NEG_INFINITY, f64::INFINITY, 0));
        e.0 = e.0.max(amax);
        e.1 = e.1.min(amin);
        e.2 += 1;
    }
    for g in &n.gates {
        let cell = lib.combinational(&g.cell).unwrap();
        for input in &g.inputs {
            if input == net {
                walk(
                    n,
                    lib,
                    launch,
                    &g.out,
                    tmax + wire + cell.delay_max,
                    tmin + wire + cell.delay_min,
                    out,
                );
            }
        }
    }
}
