//! Trains the action policy by level-set entropy maximization and saves it.
//!
//! `cargo run --release --example train_policy [model path]`

use cumppi::dynamics::{State, VehicleParams};
use cumppi::levelset::build_level_sets;
use cumppi::policy::{train, ActionSet, NetworkShape, PolicyNetwork, TrainConfig, DEFAULT_ACTIONS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn main() -> cumppi::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "model.cunn".into());
    let p = VehicleParams::default();
    let actions = ActionSet::uniform(p.delta_max, DEFAULT_ACTIONS);
    let levels = build_level_sets(
        &State::origin(),
        &actions,
        &p,
        common::desk_resolution(),
        p.steps_for(3.0),
    )?;

    let mut net = PolicyNetwork::new(
        &NetworkShape::new(vec![64, 64], actions.len(), true),
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let cfg = TrainConfig {
        lr: 1e-3,
        epochs: 20,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &levels, &actions, &p, &cfg)?;

    // the loss of a level is bounded below by -ln |L_{t+1}|
    let floor: f64 = levels.levels()[1..]
        .iter()
        .map(|l| -(l.len() as f64).ln())
        .sum();
    for (epoch, total) in report.epoch_totals().iter().enumerate() {
        println!("epoch {epoch:>2}  loss {total:>9.4}  (floor {floor:.4})");
    }
    net.save(&out)?;
    println!("saved {out}");

    let pmf = net.forward(&State::origin(), cumppi::policy::Mode::Eval)?;
    let p = pmf.probs();
    println!(
        "action probabilities at the origin: min {:.4}, max {:.4}",
        p.iter().cloned().fold(f64::INFINITY, f64::min),
        p.iter().cloned().fold(0.0, f64::max)
    );
    Ok(())
}
