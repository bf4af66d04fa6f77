//! Run a bundled scenario and write its artifacts, as `rkc` does.
//!
//! cargo run --release --example scenario -- ellipse-p3-homotopy

use std::path::Path;

use pharmonic_rkc::scenario::{list_scenarios, run_scenario, Scenario};

fn main() -> pharmonic_rkc::Result<()> {
    let Some(name) = std::env::args().nth(1) else {
        println!("scenarios: {}", list_scenarios().join(", "));
        return Ok(());
    };
    let scenario = Scenario::bundled(&name)?;
    let out = run_scenario(&scenario)?;
    let dir = Path::new("out").join(&scenario.name);
    out.write(&dir)?;
    println!("{} ({}) -> {}", name, if out.success { "pass" } else { "fail" }, dir.display());
    Ok(())
}
