//! Renders sample fans from C-Uniform and Gaussian sampling side by side as
//! PPM and SVG images.
//!
//! `cargo run --release --example render_fan [out dir]`

use std::fs::File;
use std::path::{Path, PathBuf};

use cumppi::dynamics::{ControlSequence, State};
use cumppi::render::{Rgb, Scene};
use cumppi::sampling::{sample_cuniform, sample_gaussian, GaussianSamplerConfig, TrajectoryBatch};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

fn write(batch: &TrajectoryBatch, color: Rgb, dir: &Path, stem: &str) -> cumppi::Result<()> {
    let mut scene = Scene::new((-0.5, -3.0), (3.5, 3.0));
    scene.fan(batch, color);
    scene.write_ppm(120.0, File::create(dir.join(format!("{stem}.ppm")))?)?;
    std::fs::write(dir.join(format!("{stem}.svg")), scene.to_svg(120.0))?;
    Ok(())
}

fn main() -> cumppi::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let tp = common::trained_policy();
    let horizon = tp.levels.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cu = sample_cuniform(
        &tp.net,
        &tp.actions,
        &State::origin(),
        horizon,
        2000,
        &tp.params,
        &mut rng,
    )?;
    let zeros = ControlSequence::zeros(horizon);
    let g = sample_gaussian(
        &zeros,
        &GaussianSamplerConfig { sigma: 0.1 },
        &State::origin(),
        2000,
        &tp.params,
        &mut rng,
    )?;
    write(&cu, Rgb::FAN, &dir, "fan_cuniform")?;
    write(&g, Rgb(200, 40, 40), &dir, "fan_gaussian")?;
    println!(
        "wrote fan_cuniform and fan_gaussian (.ppm, .svg) to {}",
        dir.display()
    );
    Ok(())
}
