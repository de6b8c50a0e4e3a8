//! Batch experiment suites: configuration-to-configuration turns in open
//! space and cluttered strips with late-revealed obstacles.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{CUniformSampler, Method, MppiConfig, Planner};
use crate::dynamics::{State, VehicleParams};
use crate::error::{Error, Result};
use crate::metrics::{avg_path_length, success_rate};
use crate::world::{ClutterConfig, Outcome, World, WorldConfig};

/// Open-space tasks from a fixed start to goal configurations that need
/// tight turns. The default goal is the start itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C2cSuite {
    pub start: State,
    pub goals: Vec<State>,
    pub horizon_s: f64,
    pub position_weight: f64,
    pub heading_weight: f64,
    pub lambda_terminal: f64,
    pub heading_tolerance: f64,
    /// Episode length as a multiple of the planning horizon.
    pub budget_factor: f64,
}

impl Default for C2cSuite {
    fn default() -> Self {
        C2cSuite {
            start: State::origin(),
            goals: vec![State::origin()],
            horizon_s: 4.5,
            position_weight: 1.5,
            heading_weight: 1.0,
            lambda_terminal: 20.0,
            heading_tolerance: 0.5,
            budget_factor: 2.0,
        }
    }
}

impl C2cSuite {
    pub fn horizon(&self, p: &VehicleParams) -> usize {
        p.steps_for(self.horizon_s).max(1)
    }

    pub fn world(&self, goal: State, base: &WorldConfig, p: &VehicleParams) -> Result<World> {
        let budget = (self.horizon(p) as f64 * self.budget_factor).round() as usize;
        let config = WorldConfig {
            goal,
            goal_heading_tolerance: Some(self.heading_tolerance),
            position_weight: self.position_weight,
            heading_weight: self.heading_weight,
            lambda_terminal: self.lambda_terminal,
            step_budget: budget.max(1),
            ..base.clone()
        };
        World::open(self.start, config)
    }
}

/// Procedural clutter at several densities, each run at several reveal
/// distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicSuite {
    pub n_obstacles: Vec<usize>,
    pub envs_per_count: usize,
    pub reveal_distances: Vec<f64>,
    pub horizon_s: f64,
    pub clutter: ClutterConfig,
}

impl Default for DynamicSuite {
    fn default() -> Self {
        DynamicSuite {
            n_obstacles: vec![10, 15, 20, 25, 30],
            envs_per_count: 10,
            reveal_distances: vec![1.5, 1.25, 1.0, 0.5],
            horizon_s: 3.0,
            clutter: ClutterConfig::default(),
        }
    }
}

impl DynamicSuite {
    /// Layouts depend only on the density and the environment index.
    pub fn world(
        &self,
        n_obstacles: usize,
        env: usize,
        reveal: f64,
        base: &WorldConfig,
    ) -> Result<World> {
        let clutter = ClutterConfig {
            n_obstacles,
            ..self.clutter.clone()
        };
        let layout_seed = ((n_obstacles as u64) << 32) | env as u64;
        clutter.generate(
            layout_seed,
            WorldConfig {
                reveal_distance: reveal,
                ..base.clone()
            },
        )
    }
}

/// Methods, noise levels, sample counts and trials swept by a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub methods: Vec<Method>,
    pub sigmas: Vec<f64>,
    pub n_trajs: Vec<usize>,
    pub trials: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            methods: Method::ALL.to_vec(),
            sigmas: vec![0.05, 0.1],
            n_trajs: vec![2500, 5000],
            trials: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub sigma: f64,
    pub n_traj: usize,
    pub env_id: String,
    pub reveal_dist: Option<f64>,
    pub outcome: Outcome,
    pub path_length: f64,
}

pub const RESULTS_HEADER: &str = "method,sigma,n_traj,env_id,reveal_dist,outcome,path_length";

pub fn write_results<W: Write>(rows: &[BenchmarkRow], mut w: W) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        let reveal = r.reveal_dist.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6}",
            r.method, r.sigma, r.n_traj, r.env_id, reveal, r.outcome, r.path_length
        )?;
    }
    Ok(())
}

/// Episode generator keyed by the master seed, an environment index and a
/// trial index, so episodes can run in any order.
pub fn episode_rng(seed: u64, env: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&env.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

struct Job {
    world: World,
    env_index: u64,
    env_id: String,
    reveal: Option<f64>,
    method: Method,
    sigma: f64,
    n_traj: usize,
    horizon: usize,
    trial: usize,
}

fn run_jobs(
    jobs: Vec<Job>,
    base: &MppiConfig,
    params: &VehicleParams,
    policy: Option<CUniformSampler<'_>>,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    if policy.is_none() {
        if let Some(j) = jobs.iter().find(|j| j.method.uses_policy()) {
            return Err(Error::InvalidParameter(format!(
                "{} needs a trained policy",
                j.method
            )));
        }
    }
    jobs.into_par_iter()
        .map(|job| {
            let cfg = MppiConfig {
                sigma: job.sigma,
                n_samples: job.n_traj,
                horizon: job.horizon,
                ..base.clone()
            };
            let mut planner = Planner::new(job.method, cfg, *params)?;
            let mut rng = episode_rng(seed, job.env_index, job.trial as u64);
            let ep = crate::world::run_episode(&job.world, &mut planner, policy, &mut rng)?;
            Ok(BenchmarkRow {
                method: job.method,
                sigma: job.sigma,
                n_traj: job.n_traj,
                env_id: job.env_id,
                reveal_dist: job.reveal,
                outcome: ep.outcome,
                path_length: ep.path_length,
            })
        })
        .collect()
}

fn sweep_jobs(sweep: &Sweep, mut push: impl FnMut(Method, f64, usize, usize)) {
    for &method in &sweep.methods {
        for &sigma in &sweep.sigmas {
            for &n in &sweep.n_trajs {
                for trial in 0..sweep.trials {
                    push(method, sigma, n, trial);
                }
            }
        }
    }
}

pub fn run_c2c(
    suite: &C2cSuite,
    sweep: &Sweep,
    base_mppi: &MppiConfig,
    base_world: &WorldConfig,
    params: &VehicleParams,
    policy: Option<CUniformSampler<'_>>,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    let horizon = suite.horizon(params);
    let mut jobs = Vec::new();
    for (i, goal) in suite.goals.iter().enumerate() {
        let world = suite.world(*goal, base_world, params)?;
        sweep_jobs(sweep, |method, sigma, n_traj, trial| {
            jobs.push(Job {
                world: world.clone(),
                env_index: i as u64,
                env_id: format!("c2c-{i}"),
                reveal: None,
                method,
                sigma,
                n_traj,
                horizon,
                trial,
            })
        });
    }
    run_jobs(jobs, base_mppi, params, policy, seed)
}

pub fn run_dynamic(
    suite: &DynamicSuite,
    sweep: &Sweep,
    base_mppi: &MppiConfig,
    base_world: &WorldConfig,
    params: &VehicleParams,
    policy: Option<CUniformSampler<'_>>,
    seed: u64,
) -> Result<Vec<BenchmarkRow>> {
    let horizon = params.steps_for(suite.horizon_s).max(1);
    let mut jobs = Vec::new();
    for &n in &suite.n_obstacles {
        for env in 0..suite.envs_per_count {
            for &reveal in &suite.reveal_distances {
                let world = suite.world(n, env, reveal, base_world)?;
                let env_index = ((n as u64) << 32) | env as u64;
                sweep_jobs(sweep, |method, sigma, n_traj, trial| {
                    jobs.push(Job {
                        world: world.clone(),
                        env_index,
                        env_id: format!("n{n}-{env}"),
                        reveal: Some(reveal),
                        method,
                        sigma,
                        n_traj,
                        horizon,
                        trial,
                    })
                });
            }
        }
    }
    run_jobs(jobs, base_mppi, params, policy, seed)
}

/// Success statistics of one (method, sigma, n_traj, reveal) group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub method: Method,
    pub sigma: f64,
    pub n_traj: usize,
    pub reveal_dist: Option<f64>,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful episodes only.
    pub avg_path_length: Option<f64>,
}

type GroupKey = (Method, f64, usize, Option<f64>);

/// Groups rows in first-appearance order.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<Summary> {
    let mut groups: Vec<(GroupKey, Vec<(Outcome, f64)>)> = Vec::new();
    for r in rows {
        let key = (r.method, r.sigma, r.n_traj, r.reveal_dist);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push((r.outcome, r.path_length)),
            None => groups.push((key, vec![(r.outcome, r.path_length)])),
        }
    }
    groups
        .into_iter()
        .map(|((method, sigma, n_traj, reveal_dist), eps)| {
            let outcomes: Vec<Outcome> = eps.iter().map(|e| e.0).collect();
            Summary {
                method,
                sigma,
                n_traj,
                reveal_dist,
                episodes: eps.len(),
                successes: outcomes.iter().filter(|&&o| o == Outcome::Success).count(),
                success_rate: success_rate(&outcomes).unwrap_or(0.0),
                avg_path_length: avg_path_length(&eps),
            }
        })
        .collect()
}
