use crate::control::CostModel;
use crate::dynamics::{State, Trajectory};

use super::{Obstacle, OccupancyGrid, World};

/// Egocentric, axis-aligned costmap window plus a precomputed field of
/// local costs: the occupied fraction of the inflated footprint disc around
/// each cell center, scaled to `[0, collision_cost / 10]`.
#[derive(Clone, Debug)]
pub struct LocalCostmap {
    grid: OccupancyGrid,
    field: Option<Vec<f64>>,
}

impl LocalCostmap {
    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Local cost at a point; zero outside the window.
    pub fn cost_at(&self, x: f64, y: f64) -> f64 {
        match (&self.field, self.grid.cell_at(x, y)) {
            (Some(f), Some((ix, iy))) => f[iy * self.grid.width + ix],
            _ => 0.0,
        }
    }
}

/// Rasterizes the static map and the given obstacles into a square window
/// centered on `center`. Cells count as occupied when their center is.
pub fn local_costmap(world: &World, obstacles: &[Obstacle], center: &State) -> LocalCostmap {
    let cfg = &world.config;
    let res = world
        .grid
        .as_ref()
        .map_or(cfg.costmap_resolution, |g| g.resolution);
    let n = ((2.0 * cfg.detection_half_extent / res).round() as usize).max(1);
    let half = 0.5 * n as f64 * res;
    let origin = (center.x - half, center.y - half);
    let mut grid = OccupancyGrid::new(n, n, res, origin).expect("positive resolution");
    let near: Vec<&Obstacle> = obstacles
        .iter()
        .filter(|o| {
            (o.center.0 - center.x).abs() <= half + o.radius
                && (o.center.1 - center.y).abs() <= half + o.radius
        })
        .collect();
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = grid.cell_center(ix, iy);
            let hit =
                world.static_occupied(x, y) || near.iter().any(|o| o.surface_distance(x, y) <= 0.0);
            if hit {
                grid.set(ix, iy, true);
            }
        }
    }
    let field = (!grid.is_empty()).then(|| {
        inflate(
            &grid,
            cfg.footprint_radius + cfg.inflation,
            cfg.collision_cost / 10.0,
        )
    });
    LocalCostmap { grid, field }
}

fn inflate(grid: &OccupancyGrid, radius: f64, scale: f64) -> Vec<f64> {
    let reach = (radius / grid.resolution).floor() as isize;
    let r2 = (radius / grid.resolution).powi(2);
    let kernel: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| (dx * dx + dy * dy) as f64 <= r2)
        .collect();
    let norm = scale / kernel.len() as f64;
    let (w, h) = (grid.width as isize, grid.height as isize);
    let mut field = vec![0.0; grid.width * grid.height];
    for iy in 0..h {
        for ix in 0..w {
            let hits = kernel
                .iter()
                .filter(|&&(dx, dy)| {
                    let (x, y) = (ix + dx, iy + dy);
                    x >= 0 && y >= 0 && x < w && y < h && grid.get(x as usize, y as usize)
                })
                .count();
            field[(iy * w + ix) as usize] = hits as f64 * norm;
        }
    }
    field
}

/// What the planner knows at one control step: the world, the obstacles
/// revealed so far, and the costmap around the believed pose.
#[derive(Clone, Debug)]
pub struct CostView<'a> {
    pub world: &'a World,
    known: Vec<Obstacle>,
    costmap: LocalCostmap,
    /// The vehicle has already left the goal region, so reaching it counts.
    armed: bool,
}

impl<'a> CostView<'a> {
    pub fn new(world: &'a World, revealed: &[bool], believed: &State, armed: bool) -> Self {
        let known: Vec<Obstacle> = world
            .obstacles
            .iter()
            .zip(revealed)
            .filter(|(_, &r)| r)
            .map(|(o, _)| *o)
            .collect();
        let costmap = local_costmap(world, &known, believed);
        CostView {
            world,
            known,
            costmap,
            armed,
        }
    }

    /// View with every obstacle revealed, centered on the start.
    pub fn omniscient(world: &'a World) -> Self {
        let revealed = vec![true; world.obstacles.len()];
        let armed = !world.config.in_goal_region(&world.start);
        Self::new(world, &revealed, &world.start, armed)
    }

    pub fn known_obstacles(&self) -> &[Obstacle] {
        &self.known
    }

    pub fn costmap(&self) -> &LocalCostmap {
        &self.costmap
    }

    pub fn armed(&self) -> bool {
        self.armed
    }

    pub fn collides(&self, s: &State) -> bool {
        self.world.footprint_collides(s, self.known.iter().copied())
    }

    pub fn local_cost(&self, s: &State) -> f64 {
        self.costmap.cost_at(s.x, s.y)
    }
}

/// Per-state obstacle cost. From the first colliding state on, every cost
/// is the collision cost; before it, the local costmap value.
pub fn obstacle_cost(traj: &Trajectory, view: &CostView<'_>) -> Vec<f64> {
    let c = view.world.config.collision_cost;
    let mut collided = false;
    traj.states
        .iter()
        .map(|s| {
            collided = collided || view.collides(s);
            if collided {
                c
            } else {
                view.local_cost(s)
            }
        })
        .collect()
}

/// Per-state goal distance, frozen at the first colliding state.
pub fn goal_cost(traj: &Trajectory, view: &CostView<'_>) -> Vec<f64> {
    let cfg = &view.world.config;
    let mut frozen: Option<f64> = None;
    traj.states
        .iter()
        .map(|s| match frozen {
            Some(d) => d,
            None => {
                let d = cfg.goal_distance(s);
                if view.collides(s) {
                    frozen = Some(d);
                }
                d
            }
        })
        .collect()
}

/// First state that reaches the goal without a prior collision. While the
/// view is not armed, a state only counts after the trajectory has left the
/// goal region.
pub fn goal_reach_index(traj: &Trajectory, view: &CostView<'_>) -> Option<usize> {
    let cfg = &view.world.config;
    let mut armed = view.armed;
    for (t, s) in traj.states.iter().enumerate() {
        if view.collides(s) {
            return None;
        }
        armed = armed || !cfg.in_goal_region(s);
        if armed && cfg.at_goal(s) {
            return Some(t);
        }
    }
    None
}

/// `J = lambda_terminal * min_t C_goal + sum_t (lambda_obs C_obs + lambda_goal C_goal)`
/// over states up to and including the goal-reaching one. The minimum skips
/// states visited before the trajectory left the goal region, unless there
/// are no others.
pub fn trajectory_cost(traj: &Trajectory, view: &CostView<'_>) -> f64 {
    let cfg = &view.world.config;
    let mut armed = view.armed;
    let mut collided = false;
    let mut frozen = 0.0;
    let mut sum = 0.0;
    let mut min_all = f64::INFINITY;
    let mut min_armed = f64::INFINITY;
    for s in &traj.states {
        let (obs, goal) = if collided {
            (cfg.collision_cost, frozen)
        } else if view.collides(s) {
            collided = true;
            frozen = cfg.goal_distance(s);
            (cfg.collision_cost, frozen)
        } else {
            (view.local_cost(s), cfg.goal_distance(s))
        };
        armed = armed || !cfg.in_goal_region(s);
        sum += cfg.lambda_obs * obs + cfg.lambda_goal * goal;
        min_all = min_all.min(goal);
        if armed {
            min_armed = min_armed.min(goal);
        }
        if armed && !collided && cfg.at_goal(s) {
            break;
        }
    }
    if traj.states.is_empty() {
        return 0.0;
    }
    let terminal = if min_armed.is_finite() {
        min_armed
    } else {
        min_all
    };
    cfg.lambda_terminal * terminal + sum
}

impl CostModel for CostView<'_> {
    fn trajectory_cost(&self, traj: &Trajectory) -> f64 {
        trajectory_cost(traj, self)
    }
}
