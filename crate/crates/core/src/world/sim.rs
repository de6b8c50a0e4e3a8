use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{CUniformSampler, Planner};
use crate::dynamics::{step, ControlInput, State, Trajectory, VehicleParams};
use crate::error::{Error, Result};

use super::{CostView, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Running,
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn is_terminal(&self) -> bool {
        *self != Outcome::Running
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub true_state: State,
    pub believed_state: State,
    /// Parallel to `World::obstacles`; entries only ever turn true.
    pub revealed: Vec<bool>,
    pub step: usize,
    pub outcome: Outcome,
    /// The vehicle has been outside the goal region at least once.
    pub armed: bool,
    pub path_length: f64,
}

impl SimState {
    pub fn new(world: &World) -> Self {
        let start = world.start;
        let mut sim = SimState {
            true_state: start,
            believed_state: start,
            revealed: world.obstacles.iter().map(|o| o.revealed).collect(),
            step: 0,
            outcome: Outcome::Running,
            armed: !world.config.in_goal_region(&start),
            path_length: 0.0,
        };
        sim.reveal(world);
        if world.collides(&start) {
            sim.outcome = Outcome::Collision;
        }
        sim
    }

    fn reveal(&mut self, world: &World) {
        let (x, y) = (self.true_state.x, self.true_state.y);
        for (flag, o) in self.revealed.iter_mut().zip(&world.obstacles) {
            if !*flag && o.surface_distance(x, y) <= world.config.reveal_distance {
                *flag = true;
            }
        }
    }

    pub fn view<'a>(&self, world: &'a World) -> CostView<'a> {
        CostView::new(world, &self.revealed, &self.believed_state, self.armed)
    }
}

/// Advances the true state, reveals nearby obstacles, draws a noisy belief
/// and updates the outcome. Collisions use every obstacle, revealed or not.
pub fn step_sim<R: Rng + ?Sized>(
    sim: &SimState,
    u: ControlInput,
    world: &World,
    p: &VehicleParams,
    rng: &mut R,
) -> Result<SimState> {
    if sim.outcome.is_terminal() {
        return Err(Error::Terminated(sim.outcome.to_string()));
    }
    let cfg = &world.config;
    let mut next = sim.clone();
    let u = ControlInput::new(p.clamp(u.delta));
    next.true_state = step(&sim.true_state, u, p);
    next.step += 1;
    next.path_length += next.true_state.planar_distance(&sim.true_state);
    next.armed = sim.armed || !cfg.in_goal_region(&next.true_state);
    next.reveal(world);

    let pos =
        Normal::new(0.0, cfg.noise_sigma.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let head =
        Normal::new(0.0, cfg.noise_sigma.1).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let t = next.true_state;
    next.believed_state = State::new(
        t.x + pos.sample(rng),
        t.y + pos.sample(rng),
        t.psi + head.sample(rng),
    );

    next.outcome = if world.collides(&t) {
        Outcome::Collision
    } else if next.armed && cfg.at_goal(&t) {
        Outcome::Success
    } else if next.step >= cfg.step_budget {
        Outcome::Timeout
    } else {
        Outcome::Running
    };
    Ok(next)
}

/// One row of the episode log: the state after `step` steps and the
/// command that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub step: usize,
    pub true_state: State,
    pub believed_state: State,
    /// `None` for the initial row.
    pub delta_cmd: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub records: Vec<EpisodeRecord>,
    pub outcome: Outcome,
    pub path_length: f64,
    pub revealed: Vec<bool>,
}

impl Episode {
    pub fn true_path(&self) -> Trajectory {
        Trajectory {
            states: self.records.iter().map(|r| r.true_state).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.records.last().map_or(0, |r| r.step)
    }

    /// CSV with columns `step,x_true,y_true,psi_true,x_bel,y_bel,psi_bel,delta_cmd,outcome`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "step,x_true,y_true,psi_true,x_bel,y_bel,psi_bel,delta_cmd,outcome"
        )?;
        for r in &self.records {
            let (t, b) = (r.true_state, r.believed_state);
            let delta = r.delta_cmd.map(|d| format!("{d:.9}")).unwrap_or_default();
            writeln!(
                w,
                "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{}",
                r.step, t.x, t.y, t.psi, b.x, b.y, b.psi, delta, r.outcome
            )?;
        }
        Ok(())
    }
}

/// Closed-loop episode: plan from the belief, apply the first input, step.
pub fn run_episode<R: Rng + ?Sized>(
    world: &World,
    planner: &mut Planner,
    policy: Option<CUniformSampler<'_>>,
    rng: &mut R,
) -> Result<Episode> {
    planner.reset();
    let mut sim = SimState::new(world);
    let mut records = vec![EpisodeRecord {
        step: 0,
        true_state: sim.true_state,
        believed_state: sim.believed_state,
        delta_cmd: None,
        outcome: sim.outcome,
    }];
    while !sim.outcome.is_terminal() {
        let view = sim.view(world);
        let solution = planner.plan(&sim.believed_state, &view, policy, rng)?;
        let u = solution.optimal_sequence.inputs[0];
        sim = step_sim(&sim, u, world, &planner.params, rng)?;
        records.push(EpisodeRecord {
            step: sim.step,
            true_state: sim.true_state,
            believed_state: sim.believed_state,
            delta_cmd: Some(u.delta),
            outcome: sim.outcome,
        });
    }
    Ok(Episode {
        records,
        outcome: sim.outcome,
        path_length: sim.path_length,
        revealed: sim.revealed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Obstacle, WorldConfig};
    use super::*;
    use crate::control::{Method, MppiConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet(goal: State) -> WorldConfig {
        WorldConfig {
            goal,
            noise_sigma: (0.0, 0.0),
            ..Default::default()
        }
    }

    #[test]
    fn far_goal_keeps_running() {
        let w = World::open(State::origin(), quiet(State::new(50.0, 0.0, 0.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sim = SimState::new(&w);
        for _ in 0..10 {
            sim = step_sim(
                &sim,
                ControlInput::new(0.0),
                &w,
                &VehicleParams::default(),
                &mut rng,
            )
            .unwrap();
        }
        assert_eq!(sim.outcome, Outcome::Running);
        assert!((sim.path_length - 2.0).abs() < 1e-12);
        assert_eq!(sim.believed_state, sim.true_state);
    }

    #[test]
    fn hidden_obstacle_still_collides() {
        let cfg = WorldConfig {
            reveal_distance: 0.0,
            ..quiet(State::new(50.0, 0.0, 0.0))
        };
        let w = World::open(State::origin(), cfg)
            .unwrap()
            .with_obstacles(vec![Obstacle::new(1.0, 0.0, 0.5)])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut sim = SimState::new(&w);
        while !sim.outcome.is_terminal() {
            sim = step_sim(
                &sim,
                ControlInput::new(0.0),
                &w,
                &VehicleParams::default(),
                &mut rng,
            )
            .unwrap();
        }
        assert_eq!(sim.outcome, Outcome::Collision);
        // the footprint touched the boundary before the center got within 0
        assert_eq!(sim.revealed, vec![false]);
        assert!(step_sim(
            &sim,
            ControlInput::new(0.0),
            &w,
            &VehicleParams::default(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn obstacle_revealed_just_inside_range() {
        let cfg = WorldConfig {
            reveal_distance: 1.0,
            ..quiet(State::new(50.0, 0.0, 0.0))
        };
        // after one step the vehicle is at x = 0.2; the boundary is at 1.2 - 1e-9
        let w = World::open(State::origin(), cfg)
            .unwrap()
            .with_obstacles(vec![Obstacle::new(1.7 - 1e-9, 0.0, 0.5)])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sim = SimState::new(&w);
        assert_eq!(sim.revealed, vec![false]);
        let sim = step_sim(
            &sim,
            ControlInput::new(0.0),
            &w,
            &VehicleParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(sim.revealed, vec![true]);
    }

    #[test]
    fn reaching_the_goal_succeeds_and_budget_times_out() {
        let w = World::open(State::origin(), quiet(State::new(1.0, 0.0, 0.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = VehicleParams::default();
        let mut sim = SimState::new(&w);
        while !sim.outcome.is_terminal() {
            sim = step_sim(&sim, ControlInput::new(0.0), &w, &p, &mut rng).unwrap();
        }
        assert_eq!(sim.outcome, Outcome::Success);
        assert_eq!(sim.step, 4);

        let cfg = WorldConfig {
            step_budget: 3,
            ..quiet(State::new(50.0, 0.0, 0.0))
        };
        let w = World::open(State::origin(), cfg).unwrap();
        let mut sim = SimState::new(&w);
        while !sim.outcome.is_terminal() {
            sim = step_sim(&sim, ControlInput::new(0.0), &w, &p, &mut rng).unwrap();
        }
        assert_eq!((sim.outcome, sim.step), (Outcome::Timeout, 3));
    }

    #[test]
    fn start_inside_goal_is_not_success() {
        let w = World::open(State::origin(), quiet(State::origin())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sim = SimState::new(&w);
        assert!(!sim.armed);
        let sim = step_sim(
            &sim,
            ControlInput::new(0.0),
            &w,
            &VehicleParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(sim.outcome, Outcome::Running);
    }

    #[test]
    fn noise_free_episodes_replay_exactly() {
        let w = World::open(State::origin(), quiet(State::new(2.0, 0.5, 0.0))).unwrap();
        let cfg = MppiConfig {
            n_samples: 64,
            horizon: 10,
            ..Default::default()
        };
        let run = |seed| {
            let mut planner =
                Planner::new(Method::Mppi, cfg.clone(), VehicleParams::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_episode(&w, &mut planner, None, &mut rng).unwrap()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        assert_eq!(a.outcome, Outcome::Success);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text
            .starts_with("step,x_true,y_true,psi_true,x_bel,y_bel,psi_bel,delta_cmd,outcome\n0,"));
        assert!(text.trim_end().ends_with("success"));
        assert_eq!(text.lines().count(), a.records.len() + 1);
    }
}
