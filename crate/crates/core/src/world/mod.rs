//! Navigation environments: static occupancy, circular obstacles that are
//! revealed only at close range, the trajectory cost, and episode stepping.

mod cost;
mod generate;
mod grid;
mod sim;

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};

pub use cost::{
    goal_cost, goal_reach_index, local_costmap, obstacle_cost, trajectory_cost, CostView,
    LocalCostmap,
};
pub use generate::{generate_cluttered_world, ClutterConfig};
pub use grid::OccupancyGrid;
pub use sim::{run_episode, step_sim, Episode, EpisodeRecord, Outcome, SimState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: (f64, f64),
    pub radius: f64,
    /// Known to the planner from the start of an episode.
    #[serde(default)]
    pub revealed: bool,
}

impl Obstacle {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Obstacle {
            center: (x, y),
            radius,
            revealed: false,
        }
    }

    /// Distance from a point to the obstacle boundary; negative inside.
    pub fn surface_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.center.0).hypot(y - self.center.1) - self.radius
    }

    pub fn hits_disc(&self, x: f64, y: f64, r: f64) -> bool {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let reach = r + self.radius;
        dx * dx + dy * dy <= reach * reach
    }
}

/// Drivable rectangle; leaving it counts as a collision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: (f64, f64),
    pub max: (f64, f64),
}

impl Bounds {
    /// True when a disc of radius `r` is not fully inside.
    pub fn disc_escapes(&self, x: f64, y: f64, r: f64) -> bool {
        x - r < self.min.0 || y - r < self.min.1 || x + r > self.max.0 || y + r > self.max.1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min.0 && y >= self.min.1 && x <= self.max.0 && y <= self.max.1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub goal: State,
    pub goal_radius: f64,
    /// Heading error allowed at the goal; `None` ignores heading.
    pub goal_heading_tolerance: Option<f64>,
    /// Half side of the square egocentric costmap window.
    pub detection_half_extent: f64,
    /// Obstacles become visible once their boundary is this close.
    pub reveal_distance: f64,
    pub collision_cost: f64,
    pub lambda_obs: f64,
    pub lambda_goal: f64,
    /// Weight of the terminal term `min_t C_goal`.
    pub lambda_terminal: f64,
    /// Weight on squared position error in the goal distance.
    pub position_weight: f64,
    /// Weight on squared `(cos, sin)` heading error; 0 gives planar distance.
    pub heading_weight: f64,
    pub footprint_radius: f64,
    /// Extra radius around the footprint over which the local cost is
    /// averaged.
    pub inflation: f64,
    pub costmap_resolution: f64,
    /// Localization noise: position std (m) and heading std (rad).
    pub noise_sigma: (f64, f64),
    pub step_budget: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            goal: State::new(3.0, 0.0, 0.0),
            goal_radius: 0.3,
            goal_heading_tolerance: None,
            detection_half_extent: 1.5,
            reveal_distance: 1.5,
            collision_cost: 1e3,
            lambda_obs: 1.0,
            lambda_goal: 1.0,
            lambda_terminal: 1.0,
            position_weight: 1.0,
            heading_weight: 0.0,
            footprint_radius: 0.25,
            inflation: 0.3,
            costmap_resolution: 0.05,
            noise_sigma: (0.01, 0.005),
            step_budget: 300,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("goal_radius", self.goal_radius),
            ("detection_half_extent", self.detection_half_extent),
            ("footprint_radius", self.footprint_radius),
            ("costmap_resolution", self.costmap_resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("reveal_distance", self.reveal_distance),
            ("collision_cost", self.collision_cost),
            ("lambda_obs", self.lambda_obs),
            ("lambda_goal", self.lambda_goal),
            ("lambda_terminal", self.lambda_terminal),
            ("position_weight", self.position_weight),
            ("heading_weight", self.heading_weight),
            ("inflation", self.inflation),
            ("noise_sigma.0", self.noise_sigma.0),
            ("noise_sigma.1", self.noise_sigma.1),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if matches!(self.goal_heading_tolerance, Some(t) if !(t > 0.0)) {
            return Err(Error::InvalidParameter(
                "goal_heading_tolerance must be positive".into(),
            ));
        }
        if self.step_budget < 1 {
            return Err(Error::InvalidParameter(
                "step_budget must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Weighted goal distance `sqrt(wp (dx^2 + dy^2) + wh (dcos^2 + dsin^2))`.
    pub fn goal_distance(&self, s: &State) -> f64 {
        let g = &self.goal;
        let dx = s.x - g.x;
        let dy = s.y - g.y;
        let mut d2 = self.position_weight * (dx * dx + dy * dy);
        if self.heading_weight > 0.0 {
            let dc = s.psi.cos() - g.psi.cos();
            let ds = s.psi.sin() - g.psi.sin();
            d2 += self.heading_weight * (dc * dc + ds * ds);
        }
        d2.sqrt()
    }

    /// Position inside the goal disc, heading ignored.
    pub fn in_goal_region(&self, s: &State) -> bool {
        (s.x - self.goal.x).hypot(s.y - self.goal.y) <= self.goal_radius
    }

    pub fn at_goal(&self, s: &State) -> bool {
        self.in_goal_region(s)
            && self
                .goal_heading_tolerance
                .is_none_or(|tol| crate::dynamics::wrap_angle(s.psi - self.goal.psi).abs() <= tol)
    }
}

/// A navigation environment. Obstacle reveal state lives in [`SimState`].
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub config: WorldConfig,
    pub start: State,
    pub obstacles: Vec<Obstacle>,
    pub grid: Option<OccupancyGrid>,
    pub bounds: Option<Bounds>,
}

impl World {
    pub fn open(start: State, config: WorldConfig) -> Result<Self> {
        config.validate()?;
        Ok(World {
            config,
            start,
            obstacles: Vec::new(),
            grid: None,
            bounds: None,
        })
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Obstacle>) -> Result<Self> {
        if let Some(o) = obstacles.iter().find(|o| !(o.radius > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "obstacle radius must be positive: {o:?}"
            )));
        }
        self.obstacles = obstacles;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: OccupancyGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// Footprint collision against static cells, bounds, and the obstacles
    /// selected by `visible`.
    pub fn footprint_collides(
        &self,
        s: &State,
        obstacles: impl IntoIterator<Item = Obstacle>,
    ) -> bool {
        let r = self.config.footprint_radius;
        if self.static_collision(s.x, s.y, r) {
            return true;
        }
        obstacles.into_iter().any(|o| o.hits_disc(s.x, s.y, r))
    }

    fn static_collision(&self, x: f64, y: f64, r: f64) -> bool {
        self.bounds.is_some_and(|b| b.disc_escapes(x, y, r))
            || self
                .grid
                .as_ref()
                .is_some_and(|g| g.disc_hits_occupied(x, y, r))
    }

    /// Whether a point is blocked by static cells or lies out of bounds.
    pub(crate) fn static_occupied(&self, x: f64, y: f64) -> bool {
        self.bounds.is_some_and(|b| !b.contains(x, y))
            || self.grid.as_ref().is_some_and(|g| g.occupied_at(x, y))
    }

    /// Physical collision: every obstacle counts, revealed or not.
    pub fn collides(&self, s: &State) -> bool {
        self.footprint_collides(s, self.obstacles.iter().copied())
    }
}
