use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Map, Value};
use tclose_core::cdc::{
    self, check_gray_sequence, crossing_json, crossing_mtbf, find_crossings, frequency_ratio, mtbf_json,
    params_json, parse_trace, recommend_depth, CrossingMtbf, GrayViolation, Mtbf, MtbfParams, Saturation,
};
use tclose_core::fmt::{ns, ns_json, sci};
use tclose_core::msim::{
    depth_trace_csv, events_csv, result_json, simulate_adaptive_depth, simulate_mtbf, simulate_mtbf_logged,
    AdaptivePolicy, SimConfig,
};
use tclose_core::skewopt::{
    optimize_period, parse_schedule, schedule_csv, schedule_text, verify_schedule, zero_skew_period, SkewError,
};
use tclose_core::sta::{
    self, build_graph, fmax_json, hold_check, render_fmax_text, render_text, reports_json, setup_check,
    top_paths, Analysis, SkewTable, TimingGraph,
};

use crate::design::{self, load, Design};
use crate::{CdcArgs, CheckKind, FmaxArgs, Format, GrayArgs, MtbfArgs, MtbfFlags, ReportTimingArgs, SimArgs, SkewOptArgs};

pub struct Output {
    pub stdout: String,
    pub code: u8,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { stdout, code: 0 }
    }

    fn json(v: &Value) -> Self {
        Self::ok(format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")))
    }

    fn failing(mut self, fail: bool) -> Self {
        if fail {
            self.code = 1;
        }
        self
    }
}

fn timing_graph(d: &Design, derate: Option<f64>) -> Result<TimingGraph<f64>> {
    let g: TimingGraph<f64> = build_graph(&d.netlist, &d.lib)?;
    match derate {
        Some(f) => Ok(g.apply_derate(f)?),
        None => Ok(g),
    }
}

fn single_clock(d: &Design) -> Result<String> {
    let mut clocks = d.constraints.clocks.keys();
    match (clocks.next(), clocks.next()) {
        (Some(c), None) => Ok(c.clone()),
        (None, _) => bail!("no clock defined"),
        _ => bail!("a skew schedule needs a single-clock design"),
    }
}

fn note_skipped(a: &Analysis<f64>) {
    design::report(&a.diagnostics);
    if a.cross_domain_skipped > 0 {
        eprintln!(
            "note: {} cross-domain path(s) left to `tclose cdc`",
            a.cross_domain_skipped
        );
    }
}

pub fn report_timing(a: &ReportTimingArgs) -> Result<Output> {
    let mut d = load(&a.design)?;
    let g = timing_graph(&d, a.derate)?;
    let mut skew = SkewTable::zero();
    if let Some(path) = &a.skew {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let sched = parse_schedule(&text)?;
        let clock = single_clock(&d)?;
        eprintln!("note: clock {clock} analyzed at the schedule period {} ns", ns(sched.period));
        d.constraints.set_period(&clock, sched.period);
        skew = sched.skew_table();
    }
    let mut analyses = Vec::new();
    if a.check != CheckKind::Hold {
        analyses.push(("Setup", setup_check(&g, &d.constraints, &skew)));
    }
    if a.check != CheckKind::Setup {
        analyses.push(("Hold", hold_check(&g, &d.constraints, &skew)));
    }
    let mut violated = false;
    let mut text = String::new();
    let mut all = Vec::new();
    for (title, an) in &analyses {
        note_skipped(an);
        violated |= an.has_violation();
        let shown = top_paths(&an.reports, a.max_paths);
        let worst = an.worst_slack().map_or_else(|| "none".to_string(), ns);
        let _ = writeln!(
            text,
            "{title}: {} path(s), worst slack {worst}\n",
            an.reports.len()
        );
        text.push_str(&render_text(&shown));
        if !shown.is_empty() {
            text.push('\n');
        }
        all.extend(shown);
    }
    let out = match a.design.format {
        Format::Text => Output::ok(text),
        Format::Json => Output::json(&reports_json(&all)),
    };
    Ok(out.failing(violated))
}

pub fn fmax(a: &FmaxArgs) -> Result<Output> {
    let d = load(&a.design)?;
    let g = timing_graph(&d, a.derate)?;
    let f = sta::fmax(&g, &d.constraints, &SkewTable::zero());
    design::report(&f.diagnostics);
    if f.clocks.is_empty() {
        bail!("no constrained register-to-register or I/O paths; fmax is undefined");
    }
    Ok(match a.design.format {
        Format::Text => Output::ok(render_fmax_text(&f)),
        Format::Json => Output::json(&fmax_json(&f)),
    })
}

fn params_text(p: &MtbfParams) -> String {
    format!(
        "t_res {} s, tau {} s, t_w {} s, f_data {} Hz, f_clock {} Hz",
        sci(p.t_res),
        sci(p.tau),
        sci(p.t_w),
        sci(p.f_data),
        sci(p.f_clock)
    )
}

fn mtbf_text(m: &Mtbf) -> String {
    let flag = match m.saturation {
        Saturation::None => "",
        Saturation::High => " (saturated high)",
        Saturation::Low => " (saturated low)",
    };
    format!("{} s (log10 {:.6}){flag}", sci(m.seconds), m.log10)
}

pub fn cdc(a: &CdcArgs) -> Result<Output> {
    let d = load(&a.design)?;
    let analysis = find_crossings(&d.netlist, &d.constraints);
    let mut text = String::new();
    let mut records = Vec::new();
    let mut warnings = analysis.diagnostics.clone();
    for c in &analysis.crossings {
        let m: Option<CrossingMtbf> = if c.classification.is_safe() {
            match crossing_mtbf(c, &d.netlist, &d.lib, &d.constraints, a.fdata) {
                Ok(m) => Some(m),
                Err(e) => {
                    warnings.push(tclose_core::Diagnostic::warning(&c.signal, e.to_string()));
                    None
                }
            }
        } else {
            None
        };
        let recommended = match (d.constraints.period(&c.src_domain), d.constraints.period(&c.dst_domain)) {
            (Some(ps), Some(pd)) => frequency_ratio(1.0 / ps, 1.0 / pd)
                .ok()
                .and_then(|r| recommend_depth(r).ok()),
            _ => None,
        };
        if let (Some(k), Some(rec)) = (c.classification.depth(), recommended) {
            if k < rec {
                warnings.push(tclose_core::Diagnostic::warning(
                    &c.signal,
                    format!("depth {k} is below the {rec} stages recommended for this clock ratio"),
                ));
            }
        }

        let _ = write!(
            text,
            "{}: {} -> {}  {}",
            c.signal,
            c.src_domain,
            c.dst_domain,
            c.classification.name()
        );
        if let Some(k) = c.classification.depth() {
            let _ = write!(text, " depth {k}");
        }
        if c.width > 1 {
            let _ = write!(text, " width {}", c.width);
        }
        if c.coherency_risk {
            text.push_str(" coherency-risk");
        }
        text.push('\n');
        let _ = writeln!(text, "  entry {}", c.dst_entry_ffs.join(", "));
        if let Some(m) = &m {
            let _ = writeln!(text, "  mtbf {}", mtbf_text(&m.total));
            let _ = writeln!(text, "  {}", params_text(&m.params));
        }
        let mut v = crossing_json(c, m.as_ref());
        v["recommended_depth"] = json!(recommended);
        records.push(v);
    }
    let unsafe_count = analysis
        .crossings
        .iter()
        .filter(|c| !c.classification.is_safe() || c.coherency_risk)
        .count();
    let _ = writeln!(
        text,
        "{} crossing(s), {} unsafe",
        analysis.crossings.len(),
        unsafe_count
    );
    design::report(&warnings);
    let out = match a.design.format {
        Format::Text => Output::ok(text),
        Format::Json => Output::json(&Value::Array(records)),
    };
    Ok(out.failing(!analysis.is_clean()))
}

fn params(f: &MtbfFlags) -> MtbfParams {
    MtbfParams {
        t_res: f.tres,
        tau: f.tau,
        f_data: f.fdata,
        f_clock: f.fclock,
        t_w: f.tw,
    }
}

pub fn mtbf(a: &MtbfArgs) -> Result<Output> {
    let p = params(&a.params);
    let m = cdc::mtbf(&p)?;
    Ok(match a.format {
        Format::Text => Output::ok(format!("mtbf {}\n{}\n", mtbf_text(&m), params_text(&p))),
        Format::Json => {
            let mut v = mtbf_json(&m);
            v["params"] = params_json(&p);
            Output::json(&v)
        }
    })
}

pub fn sim_mtbf(a: &SimArgs) -> Result<Output> {
    let p = params(&a.params);
    if a.adaptive {
        let policy = AdaptivePolicy {
            min_depth: a.min_depth,
            max_depth: a.max_depth,
            reliability_mode: a.reliability_mode,
            window: a.window,
        };
        // 1000 windows unless told otherwise
        let max_sim_time = a.max_time.unwrap_or(1000.0 * a.window as f64 / p.f_clock);
        let cfg = SimConfig {
            params: p,
            seed: a.seed,
            min_events: a.min_events,
            max_sim_time,
        };
        let trace = simulate_adaptive_depth(&policy, &cfg)?;
        return Ok(match a.format {
            Format::Text => Output::ok(depth_trace_csv(&trace)),
            Format::Json => Output::json(&Value::Array(
                trace
                    .iter()
                    .map(|s| json!({"window": s.window, "depth": s.depth, "events": s.events}))
                    .collect(),
            )),
        });
    }
    let cfg = SimConfig {
        params: p,
        seed: a.seed,
        min_events: a.min_events,
        max_sim_time: a.max_time.unwrap_or(1e12),
    };
    let r = match &a.events_csv {
        Some(path) => {
            let (r, events) = simulate_mtbf_logged(&cfg)?;
            fs::write(path, events_csv(&events)).with_context(|| format!("cannot write {}", path.display()))?;
            r
        }
        None => simulate_mtbf(&cfg)?,
    };
    if r.failures == 0 {
        eprintln!("warning: no failures observed; only a lower MTBF bound is available");
    }
    Ok(match a.format {
        Format::Json => Output::json(&result_json(&cfg, &r)),
        Format::Text => {
            let mut t = String::new();
            let _ = writeln!(t, "events {}, failures {}, simulated {} s", r.events, r.failures, sci(r.sim_time));
            let empirical = r.empirical_mtbf.map_or_else(|| "n/a".to_string(), sci);
            let upper = r.ci95.1.map_or_else(|| "inf".to_string(), sci);
            let _ = writeln!(t, "empirical mtbf {empirical} s, 95% CI [{}, {upper}] s", sci(r.ci95.0));
            let _ = writeln!(t, "analytic mtbf {} s", sci(r.analytic_mtbf));
            let _ = writeln!(t, "{}", params_text(&p));
            Output::ok(t)
        }
    })
}

pub fn skew_opt(a: &SkewOptArgs) -> Result<Output> {
    let d = load(&a.design)?;
    let g = timing_graph(&d, None)?;
    let clock = single_clock(&d)?;
    let bound = a.bound.unwrap_or_else(|| d.constraints.period(&clock).unwrap_or(0.0));
    let zero = zero_skew_period(&g, &d.constraints)?;
    let (period, sched) = match optimize_period(&g, &d.constraints, bound, a.tol) {
        Ok(r) => r,
        Err(SkewError::Infeasible { period, cycle }) => {
            eprintln!(
                "no feasible schedule even at {} ns; constraint cycle {}",
                ns(period),
                cycle.join(" -> ")
            );
            return Ok(Output {
                stdout: String::new(),
                code: 1,
            });
        }
        Err(e) => return Err(anyhow!(e)),
    };
    let (setup, hold) = verify_schedule(&g, &d.constraints, &sched)?;
    let tol = a.tol;
    let bad = |an: &Analysis<f64>| an.reports.iter().any(|r| r.slack < -tol);
    let failed = bad(&setup) || bad(&hold);
    if failed {
        eprintln!("warning: the schedule leaves violations beyond the tolerance");
    }
    if let Some(path) = &a.out {
        fs::write(path, schedule_csv(&sched)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let worst = |an: &Analysis<f64>| an.worst_slack();
    let out = match a.design.format {
        Format::Text => {
            let mut t = schedule_text(&sched, zero);
            let show = |w: Option<f64>| w.map_or_else(|| "none".to_string(), ns);
            let _ = writeln!(
                t,
                "verified: worst setup slack {}, worst hold slack {}",
                show(worst(&setup)),
                show(worst(&hold))
            );
            Output::ok(t)
        }
        Format::Json => {
            let skews: Map<String, Value> = sched.skews.iter().map(|(r, v)| (r.clone(), ns_json(*v))).collect();
            let slack = |w: Option<f64>| w.map_or(Value::Null, ns_json);
            Output::json(&json!({
                "clock": clock,
                "period": ns_json(period),
                "zero_skew_period": zero.map_or(Value::Null, ns_json),
                "bound": ns_json(bound),
                "skews": skews,
                "setup_worst_slack": slack(worst(&setup)),
                "hold_worst_slack": slack(worst(&hold)),
            }))
        }
    };
    Ok(out.failing(failed))
}

pub fn gray(a: &GrayArgs) -> Result<Output> {
    if let Some(x) = a.to_gray {
        return Ok(Output::ok(format!("{}\n", cdc::bin_to_gray(x, a.width)?)));
    }
    if let Some(x) = a.to_bin {
        return Ok(Output::ok(format!("{}\n", cdc::gray_to_bin(x, a.width)?)));
    }
    let path = a.check_file.as_ref().expect("clap enforces one operation");
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let words = parse_trace(&text)?;
    Ok(match check_gray_sequence(&words, a.width)? {
        Ok(()) => Output::ok(format!("ok: {} words, single-bit steps\n", words.len())),
        Err(v) => {
            let detail = match v {
                GrayViolation::MultiBit { index, changed } => {
                    let next = if index + 1 == words.len() { 0 } else { index + 1 };
                    format!("words {index} -> {next} differ in {changed} bits")
                }
                GrayViolation::OutOfRange { index } => format!("word {index} exceeds width {}", a.width),
            };
            Output {
                stdout: format!("violation: {detail}\n"),
                code: 1,
            }
        }
    })
}
