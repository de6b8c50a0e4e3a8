use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};

use super::{Bounds, Obstacle, World, WorldConfig};

/// Procedural cluttered strip: equal discs scattered by rejection sampling,
/// start near the left edge, goal near the right edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClutterConfig {
    pub n_obstacles: usize,
    pub extent: (f64, f64),
    pub radius: f64,
    /// Free distance kept between obstacle boundaries and the start or goal.
    pub min_clearance: f64,
    /// Free distance kept between the boundaries of any two obstacles.
    pub min_gap: f64,
    /// Distance of the start and goal from the short edges.
    pub margin: f64,
    pub max_attempts: usize,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        ClutterConfig {
            n_obstacles: 20,
            extent: (35.0, 10.0),
            radius: 1.0,
            min_clearance: 1.5,
            min_gap: 0.6,
            margin: 1.0,
            max_attempts: 100_000,
        }
    }
}

impl ClutterConfig {
    pub fn start(&self) -> State {
        State::new(self.margin, 0.5 * self.extent.1, 0.0)
    }

    pub fn goal(&self) -> State {
        State::new(self.extent.0 - self.margin, 0.5 * self.extent.1, 0.0)
    }

    /// Same seed, same layout. Goal, bounds and start in `base` are replaced.
    pub fn generate(&self, seed: u64, base: WorldConfig) -> Result<World> {
        if !(self.radius > 0.0 && self.extent.0 > 0.0 && self.extent.1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid clutter config: {self:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (start, goal) = (self.start(), self.goal());
        let keep_out = self.radius + self.min_clearance;
        let spacing = 2.0 * self.radius + self.min_gap;
        let mut placed: Vec<Obstacle> = Vec::with_capacity(self.n_obstacles);
        let mut attempts = 0;
        while placed.len() < self.n_obstacles {
            if attempts == self.max_attempts {
                return Err(Error::PackingFailed {
                    placed: placed.len(),
                    requested: self.n_obstacles,
                    attempts,
                });
            }
            attempts += 1;
            let x = rng.random_range(0.0..self.extent.0);
            let y = rng.random_range(0.0..self.extent.1);
            let clear = [start, goal]
                .iter()
                .all(|s| (x - s.x).hypot(y - s.y) >= keep_out)
                && placed
                    .iter()
                    .all(|o| (x - o.center.0).hypot(y - o.center.1) >= spacing);
            if clear {
                placed.push(Obstacle::new(x, y, self.radius));
            }
        }
        let config = WorldConfig { goal, ..base };
        Ok(World::open(start, config)?
            .with_obstacles(placed)?
            .with_bounds(Bounds {
                min: (0.0, 0.0),
                max: self.extent,
            }))
    }
}

/// Default strip with `n_obstacles` unit discs.
pub fn generate_cluttered_world(
    n_obstacles: usize,
    extent: (f64, f64),
    min_clearance: f64,
    seed: u64,
) -> Result<World> {
    ClutterConfig {
        n_obstacles,
        extent,
        min_clearance,
        ..Default::default()
    }
    .generate(seed, WorldConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_obstacles_is_empty() {
        let w = generate_cluttered_world(0, (35.0, 10.0), 1.5, 1).unwrap();
        assert!(w.obstacles.is_empty());
        assert_eq!(w.config.goal, State::new(34.0, 5.0, 0.0));
    }

    #[test]
    fn layout_is_seeded_and_spaced() {
        let a = generate_cluttered_world(20, (35.0, 10.0), 1.5, 7).unwrap();
        assert_eq!(
            a,
            generate_cluttered_world(20, (35.0, 10.0), 1.5, 7).unwrap()
        );
        assert_ne!(
            a,
            generate_cluttered_world(20, (35.0, 10.0), 1.5, 8).unwrap()
        );
        for (i, p) in a.obstacles.iter().enumerate() {
            for q in &a.obstacles[i + 1..] {
                let d = (p.center.0 - q.center.0).hypot(p.center.1 - q.center.1);
                assert!(d >= 2.0 * p.radius);
            }
            assert!(p.surface_distance(a.start.x, a.start.y) >= 1.5);
        }
        assert!(!a.collides(&a.start));
        assert!(!a.collides(&a.config.goal));
    }

    #[test]
    fn impossible_packing_fails() {
        let err = ClutterConfig {
            n_obstacles: 500,
            max_attempts: 2000,
            ..Default::default()
        }
        .generate(0, WorldConfig::default())
        .unwrap_err();
        assert!(matches!(err, Error::PackingFailed { requested: 500, .. }));
    }
}
