//! Clock-domain-crossing analysis: crossing detection, synchronizer
//! classification, MTBF and Gray-code helpers.

mod classify;
pub mod gray;
pub mod mtbf;

use serde_json::{json, Value};
use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::fmt::{log_json, sci_json};
use crate::netlist::Netlist;
use crate::techlib::Library;

pub use classify::{classify, classify_entry, find_crossings, CdcAnalysis, Classification, Crossing};
pub use gray::{bin_to_gray, check_gray_sequence, gray_to_bin, parse_trace, GrayError, GrayViolation};
pub use mtbf::{mtbf, Mtbf, MtbfError, MtbfParams, Saturation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("frequency ratio must be at least 1, got {0}")]
    Ratio(u64),
    #[error("frequencies must be positive")]
    Frequency,
}

/// Synchronizer stages for a clock frequency ratio.
pub fn recommend_depth(freq_ratio: u64) -> Result<u32, DepthError> {
    match freq_ratio {
        0 => Err(DepthError::Ratio(0)),
        1 => Ok(2),
        2..=4 => Ok(3),
        _ => Ok(4),
    }
}

/// `max / min` of the two clock frequencies, rounded to nearest.
pub fn frequency_ratio(f_src: f64, f_dst: f64) -> Result<u64, DepthError> {
    if !(f_src > 0.0 && f_dst > 0.0 && f_src.is_finite() && f_dst.is_finite()) {
        return Err(DepthError::Frequency);
    }
    Ok((f_src.max(f_dst) / f_src.min(f_dst)).round() as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingMtbf {
    pub params: MtbfParams,
    pub per_bit: Mtbf,
    /// `per_bit` divided by the number of bits.
    pub total: Mtbf,
}

/// MTBF of a synchronized crossing. The resolution budget of a depth-`k`
/// chain is `(k - 1)` destination periods minus the capture setup time.
pub fn crossing_mtbf(
    c: &Crossing,
    n: &Netlist,
    lib: &Library,
    cs: &ConstraintSet,
    f_data: f64,
) -> Result<CrossingMtbf, MtbfError> {
    let depth = c
        .classification
        .depth()
        .ok_or_else(|| MtbfError::NotSynchronized(c.signal.clone()))?;
    let entry = c
        .dst_entry_ffs
        .first()
        .and_then(|e| n.ff(e))
        .ok_or_else(|| MtbfError::NotSynchronized(c.signal.clone()))?;
    let cell = lib
        .sequential(&entry.cell)
        .map_err(|_| MtbfError::MissingMetastability(entry.cell.clone()))?;
    let (Some(tau), Some(tw)) = (cell.tau, cell.tw) else {
        return Err(MtbfError::MissingMetastability(entry.cell.clone()));
    };
    let period = cs
        .period(&c.dst_domain)
        .ok_or_else(|| MtbfError::NotSynchronized(c.signal.clone()))?;
    let t_res_ns = f64::from(depth - 1) * period - cell.setup;
    if t_res_ns < 0.0 {
        return Err(MtbfError::NegativeResolution(t_res_ns));
    }
    let params = MtbfParams {
        t_res: t_res_ns * 1e-9,
        tau: tau * 1e-9,
        f_data,
        f_clock: 1e9 / period,
        t_w: tw * 1e-9,
    };
    let per_bit = mtbf(&params)?;
    Ok(CrossingMtbf {
        params,
        per_bit,
        total: per_bit.divided(c.width),
    })
}

pub fn mtbf_json(m: &Mtbf) -> Value {
    json!({
        "mtbf_s": sci_json(m.seconds),
        "mtbf_log10": log_json(m.log10),
        "saturated": match m.saturation {
            Saturation::None => Value::Null,
            Saturation::High => json!("+"),
            Saturation::Low => json!("-"),
        },
    })
}

pub fn params_json(p: &MtbfParams) -> Value {
    json!({
        "t_res_s": sci_json(p.t_res),
        "tau_s": sci_json(p.tau),
        "t_w_s": sci_json(p.t_w),
        "f_data_hz": sci_json(p.f_data),
        "f_clock_hz": sci_json(p.f_clock),
    })
}

/// JSON record for one crossing; MTBF fields are null when not computed.
pub fn crossing_json(c: &Crossing, m: Option<&CrossingMtbf>) -> Value {
    let mut v = json!({
        "signal": c.signal,
        "src_clock": c.src_domain,
        "dst_clock": c.dst_domain,
        "class": c.classification.name(),
        "depth": c.classification.depth(),
        "width": c.width,
        "mtbf_s": Value::Null,
        "mtbf_log10": Value::Null,
        "dst_entry_ffs": c.dst_entry_ffs,
        "coherency_risk": c.coherency_risk,
    });
    if let Some(m) = m {
        v["mtbf_s"] = sci_json(m.total.seconds);
        v["mtbf_log10"] = log_json(m.total.log10);
        v["mtbf_params"] = params_json(&m.params);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{parse_sdc, resolve};
    use crate::netlist::parse_netlist;
    use crate::techlib::builtin_fpga;

    const SDC: &str = include_str!("../../fixtures/cdc.sdc");

    fn analyze(tnl: &str) -> (Netlist, ConstraintSet, CdcAnalysis) {
        let n = parse_netlist(tnl).unwrap();
        assert!(n.validate(&builtin_fpga()).is_empty(), "{:?}", n.validate(&builtin_fpga()));
        let cs = resolve(&parse_sdc(SDC).unwrap(), &n).unwrap();
        let a = find_crossings(&n, &cs);
        (n, cs, a)
    }

    fn classes(a: &CdcAnalysis) -> Vec<Classification> {
        a.crossings.iter().map(|c| c.classification).collect()
    }

    #[test]
    fn fixtures_classify() {
        use Classification::*;
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_two_flop.tnl"));
        assert_eq!(classes(&a), [TwoFlopChain(2)]);
        assert!(a.is_clean());
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_three_flop.tnl"));
        assert_eq!(classes(&a), [TwoFlopChain(3)]);
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_comb_before_sync.tnl"));
        assert_eq!(classes(&a), [CombBeforeSync]);
        assert!(!a.is_clean());
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_mid_fanout.tnl"));
        assert_eq!(classes(&a), [MultiFanoutSync]);
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_gray_bus.tnl"));
        assert_eq!(classes(&a), [GrayBus { width: 4, depth: 2 }]);
        assert!(a.is_clean());
        assert_eq!(a.crossings[0].signal, "wr_ptr");
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_bus_no_gray.tnl"));
        assert_eq!(classes(&a), [TwoFlopChain(2); 4]);
        assert!(!a.is_clean());
        assert!(a.diagnostics.iter().any(|d| d.object == "wr_ptr"));
        let (_, _, a) = analyze(include_str!("../../fixtures/cdc_handshake.tnl"));
        assert_eq!(classes(&a), [Handshake(2), Handshake(2)]);
        assert!(a.diagnostics.is_empty());
    }

    #[test]
    fn single_domain_and_raw() {
        let tnl = "design s\nport in clk_a\nport in clk_b\nport in d\n\
                   ff r1 FDRE clk=clk_a d=d q=q1\nff r2 FDRE clk=clk_a d=q1 q=q2\n";
        let (_, _, a) = analyze(tnl);
        assert!(a.crossings.is_empty());
        let tnl = "design s\nport in clk_a\nport in clk_b\nport in d\nport out o\n\
                   ff r1 FDRE clk=clk_a d=d q=q1\nff r2 FDRE clk=clk_b d=q1 q=q2\n\
                   gate g LUT2 in=q2,q2 out=o\n";
        let (n, cs, a) = analyze(tnl);
        assert_eq!(classes(&a), [Classification::Unsynchronized]);
        assert_eq!(classify(&n, &cs, &a.crossings[0]), Classification::Unsynchronized);
        assert!(crossing_mtbf(&a.crossings[0], &n, &builtin_fpga(), &cs, 1e6).is_err());
    }

    #[test]
    fn mtbf_of_chains() {
        let lib = builtin_fpga();
        let (n, cs, a) = analyze(include_str!("../../fixtures/cdc_two_flop.tnl"));
        let m2 = crossing_mtbf(&a.crossings[0], &n, &lib, &cs, 1e6).unwrap();
        // 10 ns destination period, FDRE setup 0.18
        assert!((m2.params.t_res - 9.82e-9).abs() < 1e-20);
        assert!((m2.params.f_clock - 1e8).abs() < 1e-3);
        let (n3, cs3, a3) = analyze(include_str!("../../fixtures/cdc_three_flop.tnl"));
        let m3 = crossing_mtbf(&a3.crossings[0], &n3, &lib, &cs3, 1e6).unwrap();
        assert!((m3.params.t_res - 19.82e-9).abs() < 1e-20);
        let gain = m3.per_bit.log10 - m2.per_bit.log10;
        assert!((gain - 10.0 / 0.1 / std::f64::consts::LN_10).abs() < 1e-9);

        let (n, cs, a) = analyze(include_str!("../../fixtures/cdc_gray_bus.tnl"));
        let g = crossing_mtbf(&a.crossings[0], &n, &lib, &cs, 1e6).unwrap();
        assert_eq!(g.total.seconds, g.per_bit.seconds / 4.0);
    }

    #[test]
    fn missing_metastability_params() {
        let lib = crate::techlib::parse_library(
            "library l\nff FDRE setup=0.18 hold=0.12 cq=0.45\ncomb LUT2 delay=0.32 inputs=2\n",
        )
        .unwrap();
        let (n, cs, a) = analyze(include_str!("../../fixtures/cdc_two_flop.tnl"));
        assert_eq!(
            crossing_mtbf(&a.crossings[0], &n, &lib, &cs, 1e6),
            Err(MtbfError::MissingMetastability("FDRE".into()))
        );
    }

    #[test]
    fn depth_table() {
        assert_eq!(recommend_depth(1), Ok(2));
        assert_eq!(recommend_depth(3), Ok(3));
        assert_eq!(recommend_depth(4), Ok(3));
        assert_eq!(recommend_depth(5), Ok(4));
        assert_eq!(recommend_depth(16), Ok(4));
        assert!(recommend_depth(0).is_err());
        assert_eq!(frequency_ratio(100e6, 250e6), Ok(3));
        assert_eq!(frequency_ratio(100e6, 100e6), Ok(1));
    }
}
