use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tclose"))
        .args(args)
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

const ASIC: [&str; 6] = ["--netlist", "asic_ref.tnl", "--lib", "asic", "--sdc", "asic_ref.sdc"];
const FPGA: [&str; 6] = ["--netlist", "fpga_ref.tnl", "--lib", "fpga", "--sdc", "fpga_ref.sdc"];

fn with<'a>(cmd: &'a str, design: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(design);
    v.extend_from_slice(extra);
    v
}

#[test]
fn report_timing_exit_codes() {
    let o = run(&with("report-timing", &ASIC, &["--check", "setup", "--max-paths", "1"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("Setup: 3 path(s), worst slack 0.000\n"));

    let dir = tempfile::tempdir().unwrap();
    let sdc = dir.path().join("tight.sdc");
    std::fs::write(&sdc, "create_clock -period 0.79 [get_ports clk]\n").unwrap();
    let o = run(&["report-timing", "--netlist", "asic_ref.tnl", "--lib", "asic", "--sdc", sdc.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("worst slack -0.010"));
    assert!(stdout(&o).contains("VIOLATED"));

    let o = run(&["report-timing", "--netlist", "asic_ref.tnl", "--lib", "asic", "--sdc", "missing.sdc"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.sdc"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn report_timing_json_schema() {
    let o = run(&with("report-timing", &ASIC, &["--format", "json", "--check", "both", "--max-paths", "2"]));
    let v = json(&o);
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    let keys: Vec<&str> = reports[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["clock", "check", "launch", "capture", "multicycle", "segments", "arrival", "required", "slack"]
    );
    assert_eq!(reports[0]["check"], "setup");
    assert_eq!(reports[2]["check"], "hold");
    let text = serde_json::to_string(&reports[0]["segments"]).unwrap();
    assert_eq!(
        text,
        r#"[{"label":"clock_to_q","ns":0.085},{"label":"logic","ns":0.425},{"label":"routing","ns":0.245}]"#
    );

    // same numbers in text mode
    let t = stdout(&run(&with("report-timing", &ASIC, &["--check", "both", "--max-paths", "2"])));
    for r in reports {
        for key in ["arrival", "required", "slack"] {
            let n = serde_json::to_string(&r[key]).unwrap();
            assert!(t.lines().any(|l| l.trim_start().starts_with(key) && l.contains(&n)), "{key} {n}");
        }
    }
}

#[test]
fn derate_flag() {
    let o = run(&with("report-timing", &FPGA, &["--format", "json", "--check", "setup", "--derate", "1.2"]));
    let worst = &json(&o)[0];
    assert_eq!(serde_json::to_string(&worst["arrival"]).unwrap(), "2.820");
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&with("report-timing", &FPGA, &["--derate", "0"]))), 2);
}

#[test]
fn fmax_command() {
    assert_eq!(stdout(&run(&with("fmax", &ASIC, &[]))), "clk: period 0.800 ns, fmax 1250.0 MHz (launch -> capture)\n");
    let v = json(&run(&with("fmax", &FPGA, &["--format", "json"])));
    assert_eq!(serde_json::to_string(&v["clk"]["mhz"]).unwrap(), "395.3");
    let o = run(&["fmax", "--netlist", "empty.tnl", "--lib", "fpga", "--sdc", "empty.sdc"]);
    assert_eq!(code(&o), 2);
    assert!(!stderr(&o).is_empty());
}

fn cdc(tnl: &str, extra: &[&str]) -> Output {
    let mut args = vec!["cdc", "--netlist", tnl, "--lib", "fpga", "--sdc", "cdc.sdc"];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn cdc_command() {
    let o = cdc("cdc_two_flop.tnl", &["--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v[0]["class"], "two_flop_chain");
    assert!(v[0]["mtbf_s"].is_number());
    assert_eq!(serde_json::to_string(&v[0]["mtbf_params"]["tau_s"]).unwrap(), "1.000000e-10");

    for (f, class, exit) in [
        ("cdc_three_flop.tnl", "two_flop_chain", 0),
        ("cdc_comb_before_sync.tnl", "comb_before_sync", 1),
        ("cdc_mid_fanout.tnl", "multi_fanout_sync", 1),
        ("cdc_gray_bus.tnl", "gray_bus", 0),
        ("cdc_bus_no_gray.tnl", "two_flop_chain", 1),
        ("cdc_handshake.tnl", "handshake", 0),
    ] {
        let o = cdc(f, &["--format", "json"]);
        assert_eq!(code(&o), exit, "{f}");
        assert_eq!(json(&o)[0]["class"], class, "{f}");
    }
    let o = cdc("cdc_bus_no_gray.tnl", &[]);
    assert!(stderr(&o).contains("without gray=true"));
    assert!(stdout(&o).contains("coherency-risk"));

    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.tnl");
    std::fs::write(
        &raw,
        "design raw\nport in clk_a\nport in clk_b\nport in d\nport out o\n\
         ff r1 FDRE clk=clk_a d=d q=q1\nff r2 FDRE clk=clk_b d=q1 q=o\n",
    )
    .unwrap();
    let o = cdc(raw.to_str().unwrap(), &[]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("unsynchronized"));
}

fn mtbf(args: &[&str]) -> Value {
    let mut a = vec!["mtbf", "--format", "json"];
    a.extend_from_slice(args);
    let o = run(&a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    json(&o)
}

#[test]
fn mtbf_command() {
    let common = ["--tau", "2e-10", "--fdata", "1e6", "--fclock", "1e8", "--tw", "1e-10"];
    let zero = mtbf(&[&["--tres", "0"][..], &common].concat());
    assert_eq!(serde_json::to_string(&zero["mtbf_s"]).unwrap(), "1.000000e-4");
    let one = mtbf(&[&["--tres", "9.82e-9"][..], &common].concat());
    assert_eq!(serde_json::to_string(&one["mtbf_s"]).unwrap(), "2.107944e+17");
    let two = mtbf(&[&["--tres", "1.964e-8"][..], &common].concat());
    let gain = two["mtbf_log10"].as_f64().unwrap() - one["mtbf_log10"].as_f64().unwrap();
    assert!((gain - 49.1 / std::f64::consts::LN_10).abs() < 1e-5);

    let o = run(&["mtbf", "--tres", "0", "--tau", "0", "--fdata", "1e6", "--fclock", "1e8", "--tw", "1e-10"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["mtbf", "--tres", "0"])), 2);
}

#[test]
fn sim_mtbf_command() {
    let args = [
        "sim-mtbf", "--tres", "0", "--tau", "1e-10", "--fdata", "1e6", "--fclock", "1e8", "--tw", "1e-10",
        "--min-events", "600", "--seed", "3",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let e = v["empirical_mtbf_s"].as_f64().unwrap();
    let lo = v["ci95_s"][0].as_f64().unwrap();
    let hi = v["ci95_s"][1].as_f64().unwrap();
    let analytic = v["analytic_mtbf_s"].as_f64().unwrap();
    assert_eq!(analytic, 1e-4);
    assert!((e - analytic).abs() / analytic <= (hi - lo) / analytic);
    assert_eq!(run(&args).stdout, o.stdout);

    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.csv");
    let mut a = args.to_vec();
    a.extend(["--events-csv", log.to_str().unwrap()]);
    assert_eq!(code(&run(&a)), 0);
    let csv = std::fs::read_to_string(&log).unwrap();
    assert!(csv.starts_with("event_time_s,resolved_s,failed_bool\n"));
    assert_eq!(csv.lines().count(), 601);

    let o = run(&[
        "sim-mtbf", "--adaptive", "--tres", "0", "--tau", "1e-10", "--fdata", "1e-3", "--fclock", "1e8",
        "--tw", "1e-10", "--window", "1000", "--format", "text", "--max-time", "1e-4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = stdout(&o);
    assert!(t.starts_with("window,depth,events\n"));
    assert!(t.lines().skip(1).all(|l| l.split(',').nth(1) == Some("2")));

    assert_eq!(code(&run(&["sim-mtbf", "--tres", "0", "--tau", "1e-10", "--fdata", "1e6", "--fclock", "1e8", "--tw", "1e-10", "--min-events", "0"])), 2);
}

#[test]
fn skew_opt_round_trip() {
    let loop_design = ["--netlist", "skew_loop.tnl", "--lib", "loop.tlib", "--sdc", "skew_loop.sdc"];
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sched.csv");
    let o = run(&with("skew-opt", &loop_design, &["--out", csv.to_str().unwrap()]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("period 2.000 ns (zero-skew 3.000 ns)\n"));
    let v = json(&run(&with("skew-opt", &loop_design, &["--format", "json"])));
    assert_eq!(serde_json::to_string(&v["period"]).unwrap(), "2.000");
    assert_eq!(serde_json::to_string(&v["zero_skew_period"]).unwrap(), "3.000");

    let sched = csv.to_str().unwrap();
    let o = run(&with("report-timing", &loop_design, &["--skew", sched]));
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("schedule period 2.000"));
    // without the schedule the same period fails
    let dir2 = tempfile::tempdir().unwrap();
    let sdc = dir2.path().join("two.sdc");
    std::fs::write(&sdc, "create_clock -period 2.0 [get_ports clk]\n").unwrap();
    let o = run(&["report-timing", "--netlist", "skew_loop.tnl", "--lib", "loop.tlib", "--sdc", sdc.to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let o = run(&with("skew-opt", &["--netlist", "two_clock.tnl", "--lib", "fpga", "--sdc", "two_clock.sdc"], &[]));
    assert_eq!(code(&o), 2);
}

#[test]
fn gray_command() {
    assert_eq!(stdout(&run(&["gray", "--to-gray", "5", "--width", "3"])), "7\n");
    assert_eq!(stdout(&run(&["gray", "--to-bin", "7", "--width", "3"])), "5\n");
    assert_eq!(stdout(&run(&["gray", "--to-gray", "0x10", "--width", "8"])), "24\n");
    assert_eq!(code(&run(&["gray", "--to-gray", "9", "--width", "3"])), 2);
    assert_eq!(code(&run(&["gray", "--to-gray", "1", "--width", "0"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    std::fs::write(&good, "# pointer trace\n000\n001\n011\n010\n110\n111\n101\n100\n").unwrap();
    let o = run(&["gray", "--check-file", good.to_str().unwrap(), "--width", "3"]);
    assert_eq!((code(&o), stdout(&o).as_str()), (0, "ok: 8 words, single-bit steps\n"));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0x0\n0x1\n0x2\n").unwrap();
    let o = run(&["gray", "--check-file", bad.to_str().unwrap(), "--width", "3"]);
    assert_eq!((code(&o), stdout(&o).as_str()), (1, "violation: words 1 -> 2 differ in 2 bits\n"));
}

#[test]
fn strict_and_lenient_sdc() {
    let dir = tempfile::tempdir().unwrap();
    let sdc = dir.path().join("extra.sdc");
    std::fs::write(&sdc, "create_clock -period 0.8 [get_ports clk]\nset_clock_uncertainty 0.02\n").unwrap();
    let base = ["fmax", "--netlist", "asic_ref.tnl", "--lib", "asic", "--sdc", sdc.to_str().unwrap()];
    assert_eq!(code(&run(&base)), 2);
    let mut lenient = base.to_vec();
    lenient.push("--lenient");
    let o = run(&lenient);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("set_clock_uncertainty"));
}

#[test]
fn usage_errors_and_info() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&with("report-timing", &ASIC, &["--check", "sideways"]))), 2);
    assert_eq!(code(&run(&["--help"])), 0);
    let o = run(&["--version"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("tclose "));
    let lib = fixture("nope.tlib");
    assert_eq!(code(&run(&["fmax", "--netlist", "asic_ref.tnl", "--lib", lib.to_str().unwrap(), "--sdc", "asic_ref.sdc"])), 2);
}
