//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cumppi::dynamics::{rollout, ControlSequence, State, VehicleParams};
use cumppi::world::{trajectory_cost, Bounds, CostView, Obstacle, World, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small but complete run configuration for CLI tests.
pub const DESK: &str = r#"
[levelset]
dx = 0.1
dy = 0.1
dpsi_deg = 9.0
horizon_s = 1.0

[train]
hidden = [16, 16]
lr = 1e-3
epochs = 3

[sampler]
n_traj = 200

[mppi]
n_samples = 200

[experiment]
model = "run/model.cunn"
levelsets = "run/levelsets.culs"
analyze_samples = 2000

[experiment.sweep]
methods = ["mppi", "cu-mppi"]
sigmas = [0.1]
n_trajs = [100]
trials = 1

[experiment.c2c]
goals = [{ x = 0.0, y = 0.0, psi = 0.0 }]

[experiment.dynamic]
n_obstacles = [5]
envs_per_count = 1
reveal_distances = [1.0]
"#;

pub fn cumppi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cumppi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) {
    let out = cumppi(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// File name to contents for every file directly under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

/// Temp dir holding `desk.toml` plus a built stack and trained model in `run/`.
pub fn desk() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("desk.toml"), DESK).unwrap();
    ok(
        dir.path(),
        &[
            "--config",
            "desk.toml",
            "--out-dir",
            "run",
            "build-levelsets",
        ],
    );
    ok(
        dir.path(),
        &["--config", "desk.toml", "--out-dir", "run", "train"],
    );
    dir
}

pub const COMMANDS: [&[&str]; 7] = [
    &["build-levelsets"],
    &["train"],
    &["sample"],
    &["analyze"],
    &["--method", "cu-mppi", "simulate"],
    &["--suite", "c2c", "benchmark"],
    &["--suite", "dynamic", "--n-traj", "50", "benchmark"],
];

/// Runs `cmd` twice into fresh directories and names the files that differ.
pub fn rerun_differences(d: &Path, cmd: &[&str]) -> Result<Vec<String>, String> {
    let mut snaps = Vec::new();
    for rep in ["a", "b"] {
        let out = d.join(rep);
        let _ = fs::remove_dir_all(&out);
        let mut args = vec!["--config", "desk.toml", "--seed", "7", "--out-dir", rep];
        args.extend_from_slice(cmd);
        let run = cumppi(d, &args);
        if !run.status.success() {
            return Err(format!("{cmd:?}: {}", String::from_utf8_lossy(&run.stderr)));
        }
        snaps.push(snapshot(&out));
    }
    if snaps[0].len() < 2 {
        return Err(format!("{cmd:?} wrote only {:?}", snaps[0].keys()));
    }
    let mut diff: Vec<String> = snaps[0]
        .iter()
        .filter(|(name, bytes)| snaps[1].get(*name) != Some(bytes))
        .map(|(name, _)| name.clone())
        .collect();
    diff.extend(
        snaps[1]
            .keys()
            .filter(|k| !snaps[0].contains_key(*k))
            .cloned(),
    );
    Ok(diff)
}

/// Re-evaluates every state from scratch by rescanning its prefix.
pub fn brute_force_cost(states: &[State], view: &CostView<'_>) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let cfg = &view.world.config;
    let first_hit = |t: usize| (0..=t).find(|&i| view.collides(&states[i]));
    let armed_at = |t: usize| view.armed() || (0..=t).any(|i| !cfg.in_goal_region(&states[i]));
    let reached = |t: usize| first_hit(t).is_none() && armed_at(t) && cfg.at_goal(&states[t]);
    let last = (0..states.len())
        .find(|&t| reached(t))
        .unwrap_or(states.len() - 1);
    let mut sum = 0.0;
    let mut goals = Vec::new();
    for t in 0..=last {
        let (obs, goal) = match first_hit(t) {
            Some(c) => (cfg.collision_cost, cfg.goal_distance(&states[c])),
            None => (view.local_cost(&states[t]), cfg.goal_distance(&states[t])),
        };
        sum += cfg.lambda_obs * obs + cfg.lambda_goal * goal;
        goals.push((armed_at(t), goal));
    }
    let armed_min = goals
        .iter()
        .filter(|g| g.0)
        .map(|g| g.1)
        .fold(f64::INFINITY, f64::min);
    let all_min = goals.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let terminal = if armed_min.is_finite() {
        armed_min
    } else {
        all_min
    };
    cfg.lambda_terminal * terminal + sum
}

fn random_world(rng: &mut ChaCha8Rng, i: u64) -> World {
    let cfg = WorldConfig {
        goal: State::new(
            rng.random_range(0.0..2.5),
            rng.random_range(-0.8..0.8),
            rng.random_range(-3.0..3.0),
        ),
        goal_radius: rng.random_range(0.2..0.6),
        goal_heading_tolerance: if i.is_multiple_of(2) { Some(0.8) } else { None },
        heading_weight: if i.is_multiple_of(3) { 1.0 } else { 0.0 },
        position_weight: rng.random_range(0.5..2.0),
        lambda_terminal: rng.random_range(0.0..20.0),
        ..WorldConfig::default()
    };
    let obstacles = (0..i % 6)
        .map(|_| {
            Obstacle::new(
                rng.random_range(0.3..3.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.1..0.5),
            )
        })
        .collect();
    let mut world = World::open(State::origin(), cfg)
        .unwrap()
        .with_obstacles(obstacles)
        .unwrap();
    if i.is_multiple_of(4) {
        world = world.with_bounds(Bounds {
            min: (-1.0, -1.2),
            max: (4.0, 1.2),
        });
    }
    world
}

#[derive(Debug)]
pub struct OracleStats {
    /// Largest `|got - want| / max(|want|, 1)`.
    pub max_error: f64,
    /// Trajectories that reach the goal before their last state.
    pub truncated: usize,
    pub collided: usize,
}

/// Compares `trajectory_cost` with the brute-force oracle on `n` random
/// trajectories in random worlds.
pub fn cost_oracle_sweep(n: u64, seed: u64) -> OracleStats {
    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = OracleStats {
        max_error: 0.0,
        truncated: 0,
        collided: 0,
    };
    for i in 0..n {
        let world = random_world(&mut rng, i);
        let start = if i % 5 == 0 {
            world.config.goal
        } else {
            State::new(
                rng.random_range(-0.5..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let len = rng.random_range(1..25);
        let seq = ControlSequence::from_deltas(
            (0..len).map(|_| rng.random_range(-p.delta_max..p.delta_max)),
        );
        let traj = rollout(&start, &seq, &p);
        let revealed: Vec<bool> = world
            .obstacles
            .iter()
            .map(|_| rng.random_bool(0.7))
            .collect();
        let armed = rng.random_bool(0.5);
        let view = CostView::new(&world, &revealed, &start, armed);
        let got = trajectory_cost(&traj, &view);
        let want = brute_force_cost(&traj.states, &view);
        stats.max_error = stats
            .max_error
            .max((got - want).abs() / want.abs().max(1.0));
        if let Some(t) = (0..traj.len()).find(|&t| world.config.at_goal(&traj.states[t])) {
            stats.truncated += usize::from(t + 1 < traj.len());
        }
        stats.collided += usize::from(traj.states.iter().any(|s| view.collides(s)));
    }
    stats
}
