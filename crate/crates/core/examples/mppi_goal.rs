//! Plain MPPI and log-MPPI driving to a goal 3 m ahead in free space.

use cumppi::control::{Method, MppiConfig, Planner};
use cumppi::dynamics::{State, VehicleParams};
use cumppi::world::{run_episode, World, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cumppi::Result<()> {
    let p = VehicleParams::default();
    let world = World::open(
        State::origin(),
        WorldConfig {
            goal: State::new(3.0, 0.0, 0.0),
            step_budget: 60,
            ..WorldConfig::default()
        },
    )?;
    for method in [Method::Mppi, Method::LogMppi] {
        let cfg = MppiConfig {
            lambda: 0.5,
            sigma: 0.1,
            n_samples: 1000,
            ..MppiConfig::default()
        };
        for seed in 0..3 {
            let mut planner = Planner::new(method, cfg.clone(), p)?;
            let ep = run_episode(
                &world,
                &mut planner,
                None,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )?;
            let end = ep.true_path().states.last().copied().unwrap();
            println!(
                "{:<9} seed {seed}: {} after {:>2} steps, path {:.2} m, final ({:.2}, {:.2})",
                method.as_str(),
                ep.outcome,
                ep.steps(),
                ep.path_length,
                end.x,
                end.y
            );
        }
    }
    Ok(())
}
