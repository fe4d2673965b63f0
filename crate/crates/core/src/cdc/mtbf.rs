//! Synchronizer mean time between failures.
//!
//! `MTBF = exp(t_res / tau) / (f_data * f_clock * t_w)`, evaluated in log
//! space so that deep synchronizers do not overflow. Values outside
//! `[1e-300, 1e300]` seconds saturate and keep the exact log10.

use std::f64::consts::LN_10;

use thiserror::Error;

/// Times in seconds, rates in hertz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtbfParams {
    pub t_res: f64,
    pub tau: f64,
    pub f_data: f64,
    pub f_clock: f64,
    pub t_w: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MtbfError {
    #[error("invalid parameter {name} = {value}")]
    Invalid { name: &'static str, value: f64 },
    #[error("library lacks metastability parameters (tau, tw) for cell `{0}`")]
    MissingMetastability(String),
    #[error("crossing `{0}` is not a synchronizer chain; MTBF undefined")]
    NotSynchronized(String),
    #[error("resolution time is negative: {0} ns (clock period shorter than setup)")]
    NegativeResolution(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Saturation {
    None,
    /// True value exceeds `1e300` s.
    High,
    /// True value is below `1e-300` s.
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mtbf {
    /// Clamped to `[1e-300, 1e300]`.
    pub seconds: f64,
    pub log10: f64,
    pub saturation: Saturation,
}

const LIMIT_LOG10: f64 = 300.0;

impl MtbfParams {
    pub fn validate(&self) -> Result<(), MtbfError> {
        let positive = [
            ("tau", self.tau),
            ("f_data", self.f_data),
            ("f_clock", self.f_clock),
            ("t_w", self.t_w),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MtbfError::Invalid { name, value });
            }
        }
        if !(self.t_res >= 0.0 && self.t_res.is_finite()) {
            return Err(MtbfError::Invalid {
                name: "t_res",
                value: self.t_res,
            });
        }
        Ok(())
    }
}

impl Mtbf {
    fn from_log10(log10: f64) -> Self {
        if log10 > LIMIT_LOG10 {
            Mtbf {
                seconds: 1e300,
                log10,
                saturation: Saturation::High,
            }
        } else if log10 < -LIMIT_LOG10 {
            Mtbf {
                seconds: 1e-300,
                log10,
                saturation: Saturation::Low,
            }
        } else {
            Mtbf {
                seconds: 10f64.powf(log10),
                log10,
                saturation: Saturation::None,
            }
        }
    }

    /// Combined MTBF of `n` independent, identical failure sources.
    pub fn divided(self, n: usize) -> Self {
        if n <= 1 {
            return self;
        }
        let log10 = self.log10 - (n as f64).log10();
        match Mtbf::from_log10(log10) {
            m if m.saturation == Saturation::None && self.saturation == Saturation::None => Mtbf {
                seconds: self.seconds / n as f64,
                ..m
            },
            m => m,
        }
    }
}

pub fn mtbf(p: &MtbfParams) -> Result<Mtbf, MtbfError> {
    p.validate()?;
    let x = p.t_res / p.tau;
    let log10 = x / LN_10 - p.f_data.log10() - p.f_clock.log10() - p.t_w.log10();
    let m = Mtbf::from_log10(log10);
    if m.saturation != Saturation::None {
        return Ok(m);
    }
    // direct evaluation is more accurate whenever it cannot overflow
    let direct = x.exp() / p.f_data / p.f_clock / p.t_w;
    if direct.is_finite() && direct > 0.0 {
        Ok(Mtbf { seconds: direct, ..m })
    } else {
        Ok(m)
    }
}
