//! Cluttered worlds whose obstacles only appear once the vehicle is within
//! the reveal distance. Prints success per method and reveal distance.
//!
//! `cargo run --release --example dynamic_obstacles [envs]`

use cumppi::control::{Method, MppiConfig};
use cumppi::experiment::{run_dynamic, summarize, DynamicSuite, Sweep};
use cumppi::world::WorldConfig;

mod common;

fn main() -> cumppi::Result<()> {
    let envs = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(3);
    let tp = common::trained_policy();
    let suite = DynamicSuite {
        n_obstacles: vec![20],
        envs_per_count: envs,
        reveal_distances: vec![1.5, 1.0],
        ..DynamicSuite::default()
    };
    let sweep = Sweep {
        methods: vec![
            Method::Mppi,
            Method::LogMppi,
            Method::CuMppi,
            Method::CuLogMppi,
        ],
        sigmas: vec![0.05],
        n_trajs: vec![1000],
        trials: 1,
    };
    let rows = run_dynamic(
        &suite,
        &sweep,
        &MppiConfig::default(),
        &WorldConfig::default(),
        &tp.params,
        Some(tp.sampler()),
        0,
    )?;
    for s in summarize(&rows) {
        println!(
            "{:<10} reveal {:.1} m: {}/{} successes, mean path {}",
            s.method.as_str(),
            s.reveal_dist.unwrap_or(f64::NAN),
            s.successes,
            s.episodes,
            s.avg_path_length
                .map(|l| format!("{l:.2} m"))
                .unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}
