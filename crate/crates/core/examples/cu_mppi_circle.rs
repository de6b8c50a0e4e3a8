//! Return-to-start: the goal equals the start pose, so the vehicle has to
//! drive a full loop. CU-MPPI seeds MPPI with the cheapest C-Uniform sample.

use cumppi::control::Method;
use cumppi::control::MppiConfig;
use cumppi::experiment::{run_c2c, summarize, C2cSuite, Sweep};
use cumppi::world::WorldConfig;

mod common;

fn main() -> cumppi::Result<()> {
    let tp = common::trained_policy();
    let suite = C2cSuite::default();
    let sweep = Sweep {
        methods: vec![Method::Mppi, Method::CuMppi],
        sigmas: vec![0.05],
        n_trajs: vec![1000],
        trials: 5,
    };
    let rows = run_c2c(
        &suite,
        &sweep,
        &MppiConfig::default(),
        &WorldConfig::default(),
        &tp.params,
        Some(tp.sampler()),
        0,
    )?;
    for r in &rows {
        println!(
            "{:<8} {} {:<8} path {:.2} m",
            r.method.as_str(),
            r.env_id,
            r.outcome.as_str(),
            r.path_length
        );
    }
    for s in summarize(&rows) {
        println!(
            "{}: {}/{} returned to the start",
            s.method, s.successes, s.episodes
        );
    }
    Ok(())
}
