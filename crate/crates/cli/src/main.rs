//! `tclose`: batch timing-closure checks.
//!
//! Exit codes: 0 clean, 1 the design violates a check, 2 bad input. Reports
//! go to stdout, diagnostics to stderr.

mod commands;
mod design;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "tclose", version, about = "Static timing, CDC and MTBF analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Setup/hold path reports
    ReportTiming(ReportTimingArgs),
    /// Maximum frequency per clock
    Fmax(FmaxArgs),
    /// Clock-domain-crossing lint with synchronizer MTBF
    Cdc(CdcArgs),
    /// Closed-form synchronizer MTBF
    Mtbf(MtbfArgs),
    /// Monte Carlo MTBF or adaptive-depth simulation
    SimMtbf(SimArgs),
    /// Useful-skew period optimization
    SkewOpt(SkewOptArgs),
    /// Gray-code conversion and trace checking
    Gray(GrayArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Setup,
    Hold,
    Both,
}

#[derive(Args)]
pub struct DesignArgs {
    /// `.tnl` netlist
    #[arg(long)]
    pub netlist: PathBuf,
    /// Built-in library (`fpga`, `asic`) or a `.tlib` file
    #[arg(long)]
    pub lib: String,
    /// `.sdc` constraints
    #[arg(long)]
    pub sdc: PathBuf,
    /// Skip unsupported SDC commands with a warning instead of failing
    #[arg(long)]
    pub lenient: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args)]
pub struct ReportTimingArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub check: CheckKind,
    /// Paths reported per check, worst first
    #[arg(long, default_value_t = 10)]
    pub max_paths: usize,
    /// Multiply every delay by this factor
    #[arg(long)]
    pub derate: Option<f64>,
    /// Skew schedule CSV; analysis runs at the schedule's period
    #[arg(long)]
    pub skew: Option<PathBuf>,
}

#[derive(Args)]
pub struct FmaxArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub derate: Option<f64>,
}

#[derive(Args)]
pub struct CdcArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Data toggle rate on each crossing, Hz
    #[arg(long, default_value_t = 1e6)]
    pub fdata: f64,
}

#[derive(Args, Clone, Copy)]
pub struct MtbfFlags {
    /// Resolution time, s
    #[arg(long)]
    pub tres: f64,
    /// Metastability time constant, s
    #[arg(long)]
    pub tau: f64,
    /// Metastability window, s
    #[arg(long)]
    pub tw: f64,
    /// Data toggle rate, Hz
    #[arg(long)]
    pub fdata: f64,
    /// Sampling clock, Hz
    #[arg(long)]
    pub fclock: f64,
}

#[derive(Args)]
pub struct MtbfArgs {
    #[command(flatten)]
    pub params: MtbfFlags,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub params: MtbfFlags,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Stop after this many metastable events
    #[arg(long, default_value_t = 1000)]
    pub min_events: u64,
    /// Simulated-time cap, s
    #[arg(long)]
    pub max_time: Option<f64>,
    /// Write the per-event log as CSV
    #[arg(long)]
    pub events_csv: Option<PathBuf>,
    /// Run the adaptive synchronizer-depth controller instead
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, default_value_t = 2)]
    pub min_depth: u32,
    #[arg(long, default_value_t = 4)]
    pub max_depth: u32,
    /// Depth rises when a window sees more events than this
    #[arg(long, default_value_t = 1)]
    pub reliability_mode: u32,
    /// Clock cycles per evaluation window
    #[arg(long, default_value_t = 1 << 24)]
    pub window: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args)]
pub struct SkewOptArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Largest allowed |skew|, ns; defaults to one clock period
    #[arg(long)]
    pub bound: Option<f64>,
    /// Period search tolerance, ns
    #[arg(long, default_value_t = 0.001)]
    pub tol: f64,
    /// Write the schedule CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("op").required(true).args(["to_gray", "to_bin", "check_file"])))]
pub struct GrayArgs {
    #[arg(long, value_parser = parse_word)]
    pub to_gray: Option<u64>,
    #[arg(long, value_parser = parse_word)]
    pub to_bin: Option<u64>,
    /// Value trace, one binary or hex word per line
    #[arg(long)]
    pub check_file: Option<PathBuf>,
    #[arg(long)]
    pub width: u32,
}

fn parse_word(s: &str) -> Result<u64, String> {
    let r = if let Some(h) = s.strip_prefix("0x") {
        u64::from_str_radix(h, 16)
    } else if let Some(b) = s.strip_prefix("0b") {
        u64::from_str_radix(b, 2)
    } else {
        s.parse()
    };
    r.map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::ReportTiming(a) => commands::report_timing(a),
        Command::Fmax(a) => commands::fmax(a),
        Command::Cdc(a) => commands::cdc(a),
        Command::Mtbf(a) => commands::mtbf(a),
        Command::SimMtbf(a) => commands::sim_mtbf(a),
        Command::SkewOpt(a) => commands::skew_opt(a),
        Command::Gray(a) => commands::gray(a),
    };
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
