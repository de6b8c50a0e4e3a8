//! Small trained policy shared by the examples. Build with `--release`;
//! training takes a few seconds there and much longer in debug.
#![allow(dead_code)]

use std::time::Instant;

use cumppi::control::CUniformSampler;
use cumppi::dynamics::{State, VehicleParams};
use cumppi::levelset::{build_level_sets, LevelSetStack, Resolution};
use cumppi::policy::{train, ActionSet, NetworkShape, PolicyNetwork, TrainConfig, DEFAULT_ACTIONS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Trained {
    pub params: VehicleParams,
    pub actions: ActionSet,
    pub levels: LevelSetStack,
    pub net: PolicyNetwork,
}

impl Trained {
    pub fn sampler(&self) -> CUniformSampler<'_> {
        CUniformSampler {
            net: &self.net,
            actions: &self.actions,
        }
    }
}

pub fn desk_resolution() -> Resolution {
    Resolution::new(0.1, 0.1, 9f64.to_radians()).unwrap()
}

/// 45 actions, 3 s of level sets at 0.1 m / 9 deg, hidden width 64.
pub fn trained_policy() -> Trained {
    let t0 = Instant::now();
    let params = VehicleParams::default();
    let actions = ActionSet::uniform(params.delta_max, DEFAULT_ACTIONS);
    let levels = build_level_sets(
        &State::origin(),
        &actions,
        &params,
        desk_resolution(),
        params.steps_for(3.0),
    )
    .unwrap();
    let mut net = PolicyNetwork::new(
        &NetworkShape::new(vec![64, 64], actions.len(), true),
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 20,
        ..TrainConfig::default()
    };
    train(&mut net, &levels, &actions, &params, &cfg).unwrap();
    eprintln!("trained policy in {:.1}s", t0.elapsed().as_secs_f64());
    Trained {
        params,
        actions,
        levels,
        net,
    }
}
