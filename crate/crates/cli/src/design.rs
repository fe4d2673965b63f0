use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use tclose_core::constraints::{parse_sdc_with, resolve, ConstraintSet, SdcMode};
use tclose_core::netlist::{parse_netlist, Netlist};
use tclose_core::techlib::{builtin, parse_library, Library};
use tclose_core::Diagnostic;

use crate::DesignArgs;

pub struct Design {
    pub netlist: Netlist,
    pub lib: Library,
    pub constraints: ConstraintSet,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn report(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

pub fn load_library(spec: &str) -> Result<Library> {
    if let Some(lib) = builtin(spec) {
        return Ok(lib);
    }
    let text = read(Path::new(spec))?;
    parse_library(&text).with_context(|| format!("in library {spec}"))
}

/// Parses and validates all three inputs. Validation errors abort;
/// warnings go to stderr.
pub fn load(a: &DesignArgs) -> Result<Design> {
    let lib = load_library(&a.lib)?;
    let path = a.netlist.display();
    let netlist = parse_netlist(&read(&a.netlist)?).with_context(|| format!("in netlist {path}"))?;
    let diags = netlist.validate(&lib);
    report(&diags);
    if diags.iter().any(Diagnostic::is_error) {
        bail!("netlist {path} failed validation");
    }
    let mode = if a.lenient { SdcMode::Lenient } else { SdcMode::Strict };
    let sdc = a.sdc.display();
    let (raw, warnings) = parse_sdc_with(&read(&a.sdc)?, mode).with_context(|| format!("in constraints {sdc}"))?;
    report(&warnings);
    let constraints = resolve(&raw, &netlist).with_context(|| format!("in constraints {sdc}"))?;
    Ok(Design {
        netlist,
        lib,
        constraints,
    })
}
