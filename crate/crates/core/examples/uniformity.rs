//! Per-level uniformity of a trained policy, on the trained horizon and one
//! extrapolated second, by full rollouts and by one-step transitions.

use cumppi::dynamics::State;
use cumppi::levelset::build_level_sets;
use cumppi::metrics::{transition_uniformity, uniformity_percent};
use cumppi::policy::{ActionPmf, PolicyNetwork};
use cumppi::sampling::sample_cuniform;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn main() -> cumppi::Result<()> {
    let tp = common::trained_policy();
    let p = &tp.params;
    let test_steps = p.steps_for(4.0);
    let levels = build_level_sets(
        &State::origin(),
        &tp.actions,
        p,
        common::desk_resolution(),
        test_steps,
    )?;
    let m = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let batch = sample_cuniform(
        &tp.net,
        &tp.actions,
        &State::origin(),
        test_steps,
        m,
        p,
        &mut rng,
    )?;
    let rollout = uniformity_percent(&levels, &batch)?;
    let trans = transition_uniformity(&levels, &tp.net, &tp.actions, p, m, &mut rng)?;

    // an untrained network outputs the uniform action distribution
    let blank = PolicyNetwork::new(&tp.net.shape(), &mut rng);
    assert_eq!(
        blank.forward(&State::origin(), cumppi::policy::Mode::Eval)?,
        ActionPmf::uniform(tp.actions.len())
    );
    let base = uniformity_percent(
        &levels,
        &sample_cuniform(
            &blank,
            &tp.actions,
            &State::origin(),
            test_steps,
            m,
            p,
            &mut rng,
        )?,
    )?;

    println!(
        "{:>3} {:>6} {:>9} {:>9} {:>10}",
        "t", "cells", "rollout", "uniform", "one-step"
    );
    for t in 1..levels.len() {
        let mark = if t >= tp.levels.len() { " *" } else { "" };
        println!(
            "{t:>3} {:>6} {:>9.3} {:>9.3} {:>10.3}{mark}",
            rollout.level_sizes[t], rollout.ratios[t], base.ratios[t], trans.ratios[t]
        );
    }
    println!("* extrapolated beyond the training horizon");
    Ok(())
}
