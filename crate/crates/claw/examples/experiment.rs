//! Runs one named experiment with overridden parameters and writes its report.

use claw::harness::{run, write_report, ExperimentName, ExperimentSpec};
use serde_json::json;

fn main() -> claw::Result<()> {
    let spec = ExperimentSpec::new(ExperimentName::E1Sawtooth, json!({"betas": [1.0], "n_max": 2000}), 0);
    let report = run(&spec)?;
    for v in &report.verdicts {
        println!("{}", v.line());
    }
    let dir = std::env::temp_dir().join("claw-e1");
    for p in write_report(&report, &dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
