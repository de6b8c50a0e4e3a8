//! Parses a TOML run configuration, validates it and prints the resolved
//! settings as JSON, which is what the CLI stores next to its outputs.

use std::path::Path;

use cumppi::config::RunConfig;

const TEXT: &str = r#"
[vehicle]
v = 1.0
dt = 0.2

[levelset]
dx = 0.1
dy = 0.1
dpsi_deg = 9.0

[train]
hidden = [64, 64]
lr = 1e-3

[mppi]
n_samples = 2500
sigma = 0.05

[experiment]
method = "cu-logmppi"
scenario = "clutter"
model = "runs/model.cunn"
"#;

fn main() -> cumppi::Result<()> {
    let cfg = RunConfig::parse(TEXT, Path::new("/data"))?;
    println!("{}", cfg.to_json());
    println!(
        "level steps {}, sample steps {}",
        cfg.level_steps(),
        cfg.sample_steps()
    );

    let bad = RunConfig::parse("[train]\nlearning_rate = 1\n", Path::new("."));
    println!("unknown key: {}", bad.unwrap_err());
    Ok(())
}
