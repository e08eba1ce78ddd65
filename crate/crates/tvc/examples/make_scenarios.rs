//! Regenerates the checked-in scenario files from the library presets.
//!
//! Run from the workspace root after touching either preset:
//!
//! ```text
//! cargo run -p tvc --example make_scenarios
//! ```

use std::fs;
use std::path::Path;

use tvc::sim::{ascent_scenario, vertical_scenario};

fn main() -> tvc::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    fs::create_dir_all(&dir)?;
    for (name, scenario) in [
        ("vertical.json", vertical_scenario()),
        ("ascent.json", ascent_scenario()),
    ] {
        let path = dir.join(name);
        let mut text = scenario.to_json()?;
        text.push('\n');
        fs::write(&path, text)?;
        println!("wrote {} ({})", path.display(), scenario.hash()?);
    }
    Ok(())
}
