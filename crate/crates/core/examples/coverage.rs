//! Coverage of the reachable level-set cells: trained C-Uniform sampling
//! against Gaussian perturbation of a zero nominal.

use cumppi::dynamics::{ControlSequence, State};
use cumppi::metrics::coverage_percent;
use cumppi::sampling::{sample_cuniform, sample_gaussian, GaussianSamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn main() -> cumppi::Result<()> {
    let tp = common::trained_policy();
    let horizon = tp.levels.len() - 1;
    let s0 = State::origin();
    let zeros = ControlSequence::zeros(horizon);

    println!(
        "{:>6}  {:>10}  {:>12}  {:>12}",
        "n", "c-uniform", "gauss 0.10", "gauss 0.05"
    );
    for n in [500, 1000, 5000, 10_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let cu = sample_cuniform(&tp.net, &tp.actions, &s0, horizon, n, &tp.params, &mut rng)?;
        let g10 = sample_gaussian(
            &zeros,
            &GaussianSamplerConfig { sigma: 0.1 },
            &s0,
            n,
            &tp.params,
            &mut rng,
        )?;
        let g05 = sample_gaussian(
            &zeros,
            &GaussianSamplerConfig { sigma: 0.05 },
            &s0,
            n,
            &tp.params,
            &mut rng,
        )?;
        println!(
            "{n:>6}  {:>9.2}%  {:>11.2}%  {:>11.2}%",
            coverage_percent(&tp.levels, &cu).percentage,
            coverage_percent(&tp.levels, &g10).percentage,
            coverage_percent(&tp.levels, &g05).percentage,
        );
    }
    Ok(())
}
