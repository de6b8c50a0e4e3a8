//! Builds the discretized level sets of the bicycle model and round-trips
//! them through the binary stack format.

use cumppi::dynamics::{State, VehicleParams};
use cumppi::levelset::{build_level_sets, LevelSetStack, Resolution, HEADING_WEIGHT};
use cumppi::policy::{ActionSet, DEFAULT_ACTIONS};

fn main() -> cumppi::Result<()> {
    let p = VehicleParams::default();
    let actions = ActionSet::uniform(p.delta_max, DEFAULT_ACTIONS);
    let res = Resolution::new(0.1, 0.1, 9f64.to_radians())?;
    let stack = build_level_sets(&State::origin(), &actions, &p, res, p.steps_for(3.0))?;

    println!("{:>3} {:>7}", "t", "cells");
    for level in stack.levels() {
        println!("{:>3} {:>7}", level.t, level.len());
    }
    println!(
        "total {} cells in {} levels",
        stack.total_cells(),
        stack.len()
    );

    // nearest cells of an off-lattice query
    let probe = State::new(1.03, 0.21, 0.3);
    for n in stack.level(5)?.nearest_cells(&probe, 3, HEADING_WEIGHT) {
        let c = stack.level(5)?.cells()[n.index].center;
        println!(
            "  cell {:>4} at ({:.2}, {:.2}, {:.3}) distance {:.4}",
            n.index, c.x, c.y, c.psi, n.distance
        );
    }

    let path = std::env::temp_dir().join("example.culs");
    stack.save(&path)?;
    let back = LevelSetStack::load(&path)?;
    assert_eq!(back.total_cells(), stack.total_cells());
    println!("saved and reloaded {}", path.display());
    Ok(())
}
