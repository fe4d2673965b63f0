use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::fmt::{mhz, ns, ns_json};
use crate::scalar::Scalar;

use super::check::{Check, FmaxAnalysis, PathReport};

fn requirement_label(r: &PathReport<impl Scalar>) -> &'static str {
    match (r.check, r.to_output) {
        (_, true) => "output_delay",
        (Check::Setup, false) => "setup",
        (Check::Hold, false) => "hold",
    }
}

/// Human-readable path blocks, one per report.
pub fn render_text<T: Scalar>(reports: &[PathReport<T>]) -> String {
    let mut out = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Path {}: {} -> {} ({} check, clock {}, multicycle {})",
            i + 1,
            r.launch,
            r.capture,
            r.check.as_str(),
            r.clock,
            r.multicycle
        );
        let _ = writeln!(out, "  {:<16} {:>10}", "segment", "ns");
        if r.launch_time != T::zero() {
            let _ = writeln!(out, "  {:<16} {:>10}", "launch_skew", ns(r.launch_time.to_ns()));
        }
        for s in &r.segments {
            let _ = writeln!(out, "  {:<16} {:>10}", s.label.as_str(), ns(s.ns.to_ns()));
        }
        let _ = writeln!(
            out,
            "  {:<16} {:>10}",
            requirement_label(r),
            ns(r.capture_requirement.to_ns())
        );
        let _ = writeln!(out, "  {:<16} {:>10}", "capture_edge", ns(r.capture_time.to_ns()));
        let _ = writeln!(out, "  {:<16} {:>10}", "arrival", ns(r.arrival.to_ns()));
        let _ = writeln!(out, "  {:<16} {:>10}", "required", ns(r.required.to_ns()));
        let verdict = if r.is_violated() { "VIOLATED" } else { "MET" };
        let _ = writeln!(out, "  {:<16} {:>10}  {verdict}", "slack", ns(r.slack.to_ns()));
    }
    out
}

pub fn report_json<T: Scalar>(r: &PathReport<T>) -> Value {
    let segments: Vec<Value> = r
        .segments
        .iter()
        .map(|s| json!({ "label": s.label.as_str(), "ns": ns_json(s.ns.to_ns()) }))
        .collect();
    json!({
        "clock": r.clock,
        "check": r.check.as_str(),
        "launch": r.launch,
        "capture": r.capture,
        "multicycle": r.multicycle,
        "segments": segments,
        "arrival": ns_json(r.arrival.to_ns()),
        "required": ns_json(r.required.to_ns()),
        "slack": ns_json(r.slack.to_ns()),
    })
}

pub fn reports_json<T: Scalar>(reports: &[PathReport<T>]) -> Value {
    Value::Array(reports.iter().map(report_json).collect())
}

/// One line per clock: name, minimum period and frequency.
pub fn render_fmax_text<T: Scalar>(f: &FmaxAnalysis<T>) -> String {
    let mut out = String::new();
    for c in f.clocks.values() {
        let _ = writeln!(
            out,
            "{}: period {} ns, fmax {} MHz ({} -> {})",
            c.clock,
            ns(c.min_period.to_ns()),
            mhz(c.mhz),
            c.limiting.0,
            c.limiting.1
        );
    }
    out
}

pub fn fmax_json<T: Scalar>(f: &FmaxAnalysis<T>) -> Value {
    let mut m = Map::new();
    for c in f.clocks.values() {
        m.insert(
            c.clock.clone(),
            json!({
                "min_period": ns_json(c.min_period.to_ns()),
                "mhz": crate::fmt::mhz_json(c.mhz),
                "launch": c.limiting.0,
                "capture": c.limiting.1,
            }),
        );
    }
    Value::Object(m)
}
