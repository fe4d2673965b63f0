//! Monte Carlo metastability simulation.
//!
//! Data transitions form a Poisson process of rate `f_data`. Every
//! transition that lands in the `t_w` window before a clock edge starts a
//! metastable event whose resolution time is exponential with mean `tau`;
//! the event is a failure when it outlasts `t_res`.
//!
//! Edges are processed analytically: the number of quiet edges before the
//! next edge with at least one event is geometric, and the event count on
//! that edge is a zero-truncated Poisson draw.
//!
//! Randomness comes from ChaCha8 seeded with `seed`. Stream 0 drives the
//! arrival process and stream 1 the resolution times, so runs that differ
//! only in `t_res` or `tau` see the same arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde_json::{json, Value};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::cdc::{mtbf, MtbfError, MtbfParams};
use crate::fmt::sci_json;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] MtbfError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid adaptive policy: {0}")]
    Policy(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: MtbfParams,
    pub seed: u64,
    /// Stop after this many metastable events.
    pub min_events: u64,
    /// Simulated-time cap in seconds.
    pub max_sim_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub resolution: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub events: u64,
    pub failures: u64,
    pub sim_time: f64,
    /// `sim_time / failures`; `None` without failures.
    pub empirical_mtbf: Option<f64>,
    /// 95% interval on the MTBF from the Poisson failure count. Without
    /// failures only the lower bound is known.
    pub ci95: (f64, Option<f64>),
    pub analytic_mtbf: f64,
}

impl SimResult {
    pub fn failure_fraction(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.failures as f64 / self.events as f64
        }
    }

    pub fn ci_contains(&self, mtbf: f64) -> bool {
        mtbf >= self.ci95.0 && self.ci95.1.is_none_or(|hi| mtbf <= hi)
    }
}

/// Two-sided 95% interval on a Poisson mean given `k` observations. For
/// `k = 0` the upper end is the one-sided 95% bound.
pub fn poisson_ci95(k: u64) -> (f64, f64) {
    if k == 0 {
        let hi = ChiSquared::new(2.0).unwrap().inverse_cdf(0.95) / 2.0;
        return (0.0, hi);
    }
    let lo = ChiSquared::new(2.0 * k as f64).unwrap().inverse_cdf(0.025) / 2.0;
    let hi = ChiSquared::new(2.0 * (k + 1) as f64).unwrap().inverse_cdf(0.975) / 2.0;
    (lo, hi)
}

/// Clopper-Pearson 95% interval on a binomial proportion.
pub fn binomial_ci95(successes: u64, trials: u64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0);
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(0.025)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(0.975)
    };
    (lo, hi)
}

fn check_config(cfg: &SimConfig) -> Result<(), SimError> {
    cfg.params.validate()?;
    if cfg.min_events < 1 {
        return Err(SimError::Config("min_events must be at least 1".into()));
    }
    if !(cfg.max_sim_time > 0.0 && cfg.max_sim_time.is_finite()) {
        return Err(SimError::Config(format!("max_sim_time must be positive, got {}", cfg.max_sim_time)));
    }
    if cfg.params.t_w * cfg.params.f_clock > 1.0 {
        return Err(SimError::Config("metastability window is longer than the clock period".into()));
    }
    Ok(())
}

fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut arrivals = ChaCha8Rng::seed_from_u64(seed);
    arrivals.set_stream(0);
    let mut resolve = ChaCha8Rng::seed_from_u64(seed);
    resolve.set_stream(1);
    (arrivals, resolve)
}

/// Quiet trials before the first success, by inversion. Stays exact for
/// success probabilities far below `f64::EPSILON`.
fn geometric(rng: &mut impl Rng, p: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / (-p).ln_1p()).floor()
}

/// Poisson(lambda) conditioned on being at least 1, by inversion.
fn truncated_poisson(rng: &mut impl Rng, lambda: f64) -> u64 {
    let mass = -(-lambda).exp_m1();
    let target = rng.random::<f64>() * mass;
    let mut k = 1u64;
    let mut pk = lambda * (-lambda).exp();
    let mut acc = pk;
    while acc < target && k < 10_000 {
        k += 1;
        pk *= lambda / k as f64;
        acc += pk;
    }
    k
}

pub fn simulate_mtbf(cfg: &SimConfig) -> Result<SimResult, SimError> {
    run(cfg, None)
}

/// As [`simulate_mtbf`], also returning every event in time order.
pub fn simulate_mtbf_logged(cfg: &SimConfig) -> Result<(SimResult, Vec<SimEvent>), SimError> {
    let mut log = Vec::new();
    let r = run(cfg, Some(&mut log))?;
    Ok((r, log))
}

fn run(cfg: &SimConfig, mut log: Option<&mut Vec<SimEvent>>) -> Result<SimResult, SimError> {
    check_config(cfg)?;
    let p = cfg.params;
    let analytic = mtbf(&p)?.seconds;
    let (mut arrivals, mut resolve) = rngs(cfg.seed);
    let exp = Exp::new(1.0 / p.tau).map_err(|e| SimError::Config(e.to_string()))?;
    let lambda = p.f_data * p.t_w;
    let p_edge = -(-lambda).exp_m1();
    let period = 1.0 / p.f_clock;

    let mut edge = 0f64;
    let mut events = 0u64;
    let mut failures = 0u64;
    let mut sim_time = cfg.max_sim_time;
    loop {
        edge += geometric(&mut arrivals, p_edge) + 1.0;
        let t_edge = edge * period;
        if t_edge > cfg.max_sim_time {
            break;
        }
        let count = truncated_poisson(&mut arrivals, lambda);
        let mut offsets: Vec<f64> = (0..count).map(|_| arrivals.random::<f64>() * p.t_w).collect();
        offsets.sort_by(|a, b| b.total_cmp(a));
        for off in offsets {
            let resolution = exp.sample(&mut resolve);
            let failed = resolution > p.t_res;
            events += 1;
            failures += u64::from(failed);
            if let Some(log) = log.as_deref_mut() {
                log.push(SimEvent {
                    time: t_edge - off,
                    resolution,
                    failed,
                });
            }
        }
        if events >= cfg.min_events {
            sim_time = t_edge;
            break;
        }
    }

    let (lo, hi) = poisson_ci95(failures);
    let (empirical, ci95) = if failures == 0 {
        (None, (sim_time / hi, None))
    } else {
        (Some(sim_time / failures as f64), (sim_time / hi, Some(sim_time / lo)))
    };
    Ok(SimResult {
        events,
        failures,
        sim_time,
        empirical_mtbf: empirical,
        ci95,
        analytic_mtbf: analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePolicy {
    pub min_depth: u32,
    pub max_depth: u32,
    /// Depth rises when a window sees more than this many events (0..=7).
    pub reliability_mode: u32,
    /// Clock cycles per evaluation window.
    pub window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthStep {
    pub window: u64,
    /// Depth in force during the window.
    pub depth: u32,
    pub events: u64,
}

const MAX_WINDOWS: u64 = 10_000_000;

/// Runs the depth controller over `max_sim_time`. In each window the
/// number of unresolved metastable events is Poisson with mean
/// `window * f_data * t_w * exp(-t_res(depth) / tau)`, where
/// `t_res(depth) = t_res + (depth - 2) / f_clock`.
pub fn simulate_adaptive_depth(policy: &AdaptivePolicy, cfg: &SimConfig) -> Result<Vec<DepthStep>, SimError> {
    check_config(cfg)?;
    if policy.min_depth < 2 || policy.min_depth > policy.max_depth {
        return Err(SimError::Policy(format!(
            "need 2 <= min_depth <= max_depth, got {}..{}",
            policy.min_depth, policy.max_depth
        )));
    }
    if policy.reliability_mode > 7 {
        return Err(SimError::Policy(format!(
            "reliability_mode must be 0..=7, got {}",
            policy.reliability_mode
        )));
    }
    if policy.window == 0 {
        return Err(SimError::Policy("window must be at least one cycle".into()));
    }
    let p = cfg.params;
    let windows = (cfg.max_sim_time * p.f_clock / policy.window as f64).floor();
    if windows > MAX_WINDOWS as f64 {
        return Err(SimError::Config(format!("{windows} windows exceeds the limit of {MAX_WINDOWS}")));
    }
    let windows = windows as u64;
    let (mut rng, _) = rngs(cfg.seed);
    let per_cycle = p.f_data * p.t_w;

    let mut depth = policy.min_depth;
    let mut trace = Vec::with_capacity(windows as usize);
    for w in 0..windows {
        let t_res = p.t_res + f64::from(depth - 2) / p.f_clock;
        let mean = policy.window as f64 * per_cycle * (-t_res / p.tau).exp();
        let events = if mean > 0.0 && mean.is_finite() {
            Poisson::new(mean)
                .map_err(|e| SimError::Config(e.to_string()))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        trace.push(DepthStep { window: w, depth, events });
        if events > u64::from(policy.reliability_mode) {
            depth = (depth + 1).min(policy.max_depth);
        } else if events == 0 {
            depth = depth.saturating_sub(1).max(policy.min_depth);
        }
    }
    Ok(trace)
}

pub fn result_json(cfg: &SimConfig, r: &SimResult) -> Value {
    json!({
        "seed": cfg.seed,
        "events": r.events,
        "failures": r.failures,
        "sim_time_s": sci_json(r.sim_time),
        "empirical_mtbf_s": r.empirical_mtbf.map_or(Value::Null, sci_json),
        "ci95_s": [sci_json(r.ci95.0), r.ci95.1.map_or(Value::Null, sci_json)],
        "analytic_mtbf_s": sci_json(r.analytic_mtbf),
        "params": crate::cdc::params_json(&cfg.params),
    })
}

pub fn events_csv(events: &[SimEvent]) -> String {
    let mut out = String::from("event_time_s,resolved_s,failed_bool\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{}\n",
            crate::fmt::sci(e.time),
            crate::fmt::sci(e.resolution),
            e.failed
        ));
    }
    out
}

pub fn depth_trace_csv(trace: &[DepthStep]) -> String {
    let mut out = String::from("window,depth,events\n");
    for s in trace {
        out.push_str(&format!("{},{},{}\n", s.window, s.depth, s.events));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t_res: f64, seed: u64) -> SimConfig {
        SimConfig {
            params: MtbfParams {
                t_res,
                tau: 1e-10,
                f_data: 1e7,
                f_clock: 1e8,
                t_w: 1e-10,
            },
            seed,
            min_events: 2000,
            max_sim_time: 1e3,
        }
    }

    #[test]
    fn zero_resolution_matches_closed_form() {
        let r = simulate_mtbf(&cfg(0.0, 7)).unwrap();
        assert_eq!(r.events, r.failures);
        assert!(r.events >= 2000);
        assert!(r.ci_contains(r.analytic_mtbf), "{r:?}");
        assert!((r.analytic_mtbf - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn failure_fraction_follows_exponential_tail() {
        let (r, log) = simulate_mtbf_logged(&SimConfig {
            min_events: 20_000,
            ..cfg(3e-10, 11)
        })
        .unwrap();
        let (lo, hi) = binomial_ci95(r.failures, r.events);
        let expect = (-3.0f64).exp();
        assert!(lo <= expect && expect <= hi, "{lo} {hi}");
        assert_eq!(log.len() as u64, r.events);
        assert_eq!(log.iter().filter(|e| e.failed).count() as u64, r.failures);
        assert!(log.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(log.iter().all(|e| e.failed == (e.resolution > 3e-10)));
    }

    #[test]
    fn deterministic() {
        let a = simulate_mtbf_logged(&cfg(1e-10, 3)).unwrap();
        let b = simulate_mtbf_logged(&cfg(1e-10, 3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_mtbf(&cfg(1e-10, 4)).unwrap();
        assert_ne!(a.0, c);
    }

    #[test]
    fn zero_failures_gives_lower_bound() {
        let r = simulate_mtbf(&SimConfig {
            min_events: 100,
            ..cfg(5e-9, 1)
        })
        .unwrap();
        assert_eq!(r.failures, 0);
        assert_eq!(r.empirical_mtbf, None);
        assert!(r.ci95.1.is_none() && r.ci95.0 > 0.0);
    }

    #[test]
    fn time_cap() {
        let r = simulate_mtbf(&SimConfig {
            min_events: 1_000_000_000,
            max_sim_time: 1e-3,
            ..cfg(0.0, 1)
        })
        .unwrap();
        assert_eq!(r.sim_time, 1e-3);
        // about 100 events per millisecond
        assert!(r.events > 50 && r.events < 200, "{}", r.events);
    }

    #[test]
    fn invalid_configs() {
        assert!(simulate_mtbf(&SimConfig { min_events: 0, ..cfg(0.0, 1) }).is_err());
        assert!(simulate_mtbf(&SimConfig { max_sim_time: 0.0, ..cfg(0.0, 1) }).is_err());
        let mut c = cfg(0.0, 1);
        c.params.tau = -1.0;
        assert!(simulate_mtbf(&c).is_err());
    }

    #[test]
    fn intervals() {
        let (lo, hi) = poisson_ci95(10);
        assert!((lo - 4.795_389).abs() < 1e-5 && (hi - 18.390_356).abs() < 1e-5);
        assert!((poisson_ci95(0).1 - 2.995_732).abs() < 1e-5);
        let (lo, hi) = binomial_ci95(5, 10);
        assert!((lo - 0.187_086).abs() < 1e-5 && (hi - 0.812_914).abs() < 1e-5);
    }

    fn policy() -> AdaptivePolicy {
        AdaptivePolicy {
            min_depth: 2,
            max_depth: 5,
            reliability_mode: 2,
            window: 1000,
        }
    }

    #[test]
    fn depth_floor() {
        let mut c = cfg(0.0, 5);
        c.params.f_data = 1e-6;
        c.max_sim_time = 1e-3;
        let mut p = policy();
        p.min_depth = 3;
        let t = simulate_adaptive_depth(&p, &c).unwrap();
        assert_eq!(t.len(), 100);
        assert!(t.iter().all(|s| s.depth == 3 && s.events == 0));
    }

    #[test]
    fn depth_cap() {
        let mut c = cfg(0.0, 5);
        c.params.tau = 1.0;
        c.params.f_data = 1e9;
        c.max_sim_time = 1e-3;
        let t = simulate_adaptive_depth(&policy(), &c).unwrap();
        assert!(t.windows(2).all(|w| w[0].depth <= w[1].depth));
        assert_eq!(t.last().unwrap().depth, 5);
    }

    #[test]
    fn depth_oscillates_within_bounds() {
        // mean events per window near the threshold at depth 2
        let mut c = cfg(0.0, 9);
        c.params.f_data = 2.5e7;
        c.params.tau = 1e-8;
        c.max_sim_time = 1e-2;
        let p = policy();
        let t = simulate_adaptive_depth(&p, &c).unwrap();
        assert!(t.iter().all(|s| (p.min_depth..=p.max_depth).contains(&s.depth)));
        let distinct: std::collections::BTreeSet<u32> = t.iter().map(|s| s.depth).collect();
        assert!(distinct.len() >= 2);
        assert_eq!(t, simulate_adaptive_depth(&p, &c).unwrap());
    }

    #[test]
    fn invalid_policy() {
        let c = cfg(0.0, 1);
        let mut p = policy();
        p.min_depth = 1;
        assert!(simulate_adaptive_depth(&p, &c).is_err());
        p.min_depth = 6;
        assert!(simulate_adaptive_depth(&p, &c).is_err());
        let mut p = policy();
        p.reliability_mode = 8;
        assert!(simulate_adaptive_depth(&p, &c).is_err());
    }
}
