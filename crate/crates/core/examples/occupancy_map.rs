//! Loads a text occupancy grid, drives CU-LogMPPI through it and renders the
//! run.

use cumppi::control::{Method, MppiConfig, Planner};
use cumppi::dynamics::State;
use cumppi::render::{method_color, Scene};
use cumppi::world::{run_episode, OccupancyGrid, World, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

// 0.25 m cells, 5 m x 2.5 m, a wall with a gap in the middle
const MAP: &str = "\
# width height resolution
20 10 0.25
00000000000000000000
00000000000000000000
00000000100000000000
00000000100000000000
00000000000000000000
00000000000000000000
00000000100000000000
00000000100000000000
00000000000000000000
00000000000000000000
";

fn main() -> cumppi::Result<()> {
    let tp = common::trained_policy();
    let grid = OccupancyGrid::parse(MAP)?;
    println!("grid {} occupied cells", grid.occupied_count());
    let world = World::open(
        State::new(0.5, 1.25, 0.0),
        WorldConfig {
            goal: State::new(4.5, 1.25, 0.0),
            step_budget: 80,
            ..WorldConfig::default()
        },
    )?
    .with_grid(grid);

    let method = Method::CuLogMppi;
    let mut planner = Planner::new(method, MppiConfig::default(), tp.params)?;
    let ep = run_episode(
        &world,
        &mut planner,
        Some(tp.sampler()),
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    println!(
        "{method}: {} after {} steps, path {:.2} m",
        ep.outcome,
        ep.steps(),
        ep.path_length
    );

    let mut scene = Scene::for_world(&world, Some(&ep.revealed));
    scene.trajectory(&ep.true_path(), method_color(method));
    let path = std::env::temp_dir().join("occupancy_map.svg");
    std::fs::write(&path, scene.to_svg(80.0))?;
    println!("wrote {}", path.display());
    Ok(())
}
