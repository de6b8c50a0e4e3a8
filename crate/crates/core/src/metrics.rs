//! Uniformity, coverage, success rate and path length.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ndarray::Array2;
use rand::Rng;

use crate::dynamics::{step, ControlInput, State, Trajectory, VehicleParams};
use crate::error::{Error, Result};
use crate::levelset::{LevelSetStack, HEADING_WEIGHT};
use crate::policy::{sample_index, ActionSet, Mode, PolicyNetwork};
use crate::sampling::TrajectoryBatch;
use crate::world::Outcome;

/// Per-level ratio of occurrence entropy to `ln |L_t|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// Entry `t` belongs to level `t`; level 0 is always 1.
    pub ratios: Vec<f64>,
    pub level_sizes: Vec<usize>,
    pub samples: usize,
}

impl UniformityReport {
    /// Smallest ratio over levels `from..to`.
    pub fn min_over(&self, from: usize, to: usize) -> Option<f64> {
        self.ratios
            .get(from..to.min(self.ratios.len()))
            .and_then(|r| r.iter().copied().reduce(f64::min))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level_t,cells,ratio")?;
        for (t, (r, n)) in self.ratios.iter().zip(&self.level_sizes).enumerate() {
            writeln!(w, "{t},{n},{r:.9}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub visited: usize,
    pub total: usize,
    pub percentage: f64,
    /// Same count over `(t, ix, iy)` with heading bins merged.
    pub visited_2d: usize,
    pub total_2d: usize,
    pub percentage_2d: f64,
}

impl CoverageReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "visited,total,percentage,visited_2d,total_2d,percentage_2d"
        )?;
        writeln!(
            w,
            "{},{},{:.9},{},{},{:.9}",
            self.visited,
            self.total,
            self.percentage,
            self.visited_2d,
            self.total_2d,
            self.percentage_2d
        )?;
        Ok(())
    }
}

/// Natural-log entropy of a count histogram, `0 ln 0 = 0`.
pub fn entropy_of_counts(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// States of a trajectory moved into the stack's frame: the first state is
/// mapped onto the stack root.
fn in_stack_frame<'a>(traj: &'a Trajectory, root: State) -> impl Iterator<Item = State> + 'a {
    let s0 = traj.states.first().copied().unwrap_or(root);
    traj.states
        .iter()
        .map(move |s| State::compose(&root, &s.relative_to(&s0)))
}

/// Levels a batch can be scored on: the stack depth capped by the longest
/// trajectory.
fn scored_levels(levels: &LevelSetStack, batch: &TrajectoryBatch) -> usize {
    let longest = batch
        .trajectories
        .iter()
        .map(Trajectory::len)
        .max()
        .unwrap_or(0);
    levels.len().min(longest)
}

pub fn uniformity_percent(
    levels: &LevelSetStack,
    batch: &TrajectoryBatch,
) -> Result<UniformityReport> {
    if let Some(t) = levels.levels().iter().position(|l| l.is_empty()) {
        return Err(Error::EmptyLevel { step: t });
    }
    let n_levels = scored_levels(levels, batch);
    let root = levels.root();
    let counts = batch
        .trajectories
        .par_iter()
        .fold(
            || {
                levels.levels()[..n_levels]
                    .iter()
                    .map(|l| vec![0usize; l.len()])
                    .collect::<Vec<_>>()
            },
            |mut acc, traj| {
                for (t, s) in in_stack_frame(traj, root).enumerate().take(n_levels) {
                    let nn = levels.levels()[t].nearest_cells(&s, 1, HEADING_WEIGHT);
                    acc[t][nn[0].index] += 1;
                }
                acc
            },
        )
        .reduce(
            || {
                levels.levels()[..n_levels]
                    .iter()
                    .map(|l| vec![0usize; l.len()])
                    .collect()
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for (p, q) in x.iter_mut().zip(y) {
                        *p += q;
                    }
                }
                a
            },
        );
    let ratios = counts
        .iter()
        .map(|c| {
            if c.len() == 1 {
                1.0
            } else {
                entropy_of_counts(c) / (c.len() as f64).ln()
            }
        })
        .collect();
    Ok(UniformityReport {
        ratios,
        level_sizes: counts.iter().map(Vec::len).collect(),
        samples: batch.len(),
    })
}

/// Policy action probabilities at every cell center of level `t`, with the
/// network queried in the frame of the stack root.
fn cell_probs(levels: &LevelSetStack, t: usize, net: &PolicyNetwork) -> Result<Array2<f64>> {
    let root = levels.root();
    let local: Vec<State> = levels
        .level(t)?
        .centers()
        .map(|c| c.relative_to(&root))
        .collect();
    net.probs_batch(&local, Mode::Eval)
}

/// `succ[c][u]`: nearest cell of `L_{t+1}` to the successor of cell `c`
/// of `L_t` under action `u`.
fn successor_cells(
    levels: &LevelSetStack,
    t: usize,
    actions: &ActionSet,
    p: &VehicleParams,
) -> Result<Vec<Vec<usize>>> {
    let next = levels.level(t + 1)?;
    Ok(levels
        .level(t)?
        .cells()
        .par_iter()
        .map(|c| {
            actions
                .deltas()
                .iter()
                .map(|&d| {
                    let s = step(&c.center, ControlInput::new(d), p);
                    next.nearest_cells(&s, 1, HEADING_WEIGHT)[0].index
                })
                .collect()
        })
        .collect())
}

fn check_policy(net: &PolicyNetwork, actions: &ActionSet) -> Result<()> {
    if net.n_actions() != actions.len() {
        return Err(Error::InvalidParameter(format!(
            "network has {} outputs but the action set has {} actions",
            net.n_actions(),
            actions.len()
        )));
    }
    Ok(())
}

/// Exact next-level occupancy when `L_t` is uniform over its cell centers
/// and successors are hard-assigned to their nearest cell of `L_{t+1}`.
pub fn hard_transition_distribution(
    levels: &LevelSetStack,
    t: usize,
    net: &PolicyNetwork,
    actions: &ActionSet,
    p: &VehicleParams,
) -> Result<Vec<f64>> {
    check_policy(net, actions)?;
    let probs = cell_probs(levels, t, net)?;
    let succ = successor_cells(levels, t, actions, p)?;
    let mut q = vec![0.0; levels.level(t + 1)?.len()];
    let w = 1.0 / succ.len() as f64;
    for (c, row) in succ.iter().enumerate() {
        for (u, &j) in row.iter().enumerate() {
            q[j] += w * probs[[c, u]];
        }
    }
    Ok(q)
}

/// Occurrence counts over `L_{t+1}` from `m` sampled transitions: a cell of
/// `L_t` drawn uniformly, an action drawn from the policy at its center.
pub fn sample_transitions<R: Rng + ?Sized>(
    levels: &LevelSetStack,
    t: usize,
    net: &PolicyNetwork,
    actions: &ActionSet,
    p: &VehicleParams,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_policy(net, actions)?;
    let probs = cell_probs(levels, t, net)?;
    let succ = successor_cells(levels, t, actions, p)?;
    let mut counts = vec![0usize; levels.level(t + 1)?.len()];
    for _ in 0..m {
        let c = rng.random_range(0..succ.len());
        let row = probs.row(c);
        let u = sample_index(row.as_slice().expect("standard layout"), rng);
        counts[succ[c][u]] += 1;
    }
    Ok(counts)
}

/// Per-level uniformity of one-step transitions out of each level's cell
/// centers, `m` samples per level. Level 0 has ratio 1.
pub fn transition_uniformity<R: Rng + ?Sized>(
    levels: &LevelSetStack,
    net: &PolicyNetwork,
    actions: &ActionSet,
    p: &VehicleParams,
    m: usize,
    rng: &mut R,
) -> Result<UniformityReport> {
    let mut ratios = vec![1.0];
    for t in 0..levels.len().saturating_sub(1) {
        let counts = sample_transitions(levels, t, net, actions, p, m, rng)?;
        ratios.push(if counts.len() == 1 {
            1.0
        } else {
            entropy_of_counts(&counts) / (counts.len() as f64).ln()
        });
    }
    Ok(UniformityReport {
        ratios,
        level_sizes: levels.levels().iter().map(|l| l.len()).collect(),
        samples: m,
    })
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Share of stack cells hit by some trajectory state at the matching step.
/// A state hits its nearest cell when it lies within one cell diagonal.
pub fn coverage_percent(levels: &LevelSetStack, batch: &TrajectoryBatch) -> CoverageReport {
    let n_levels = scored_levels(levels, batch);
    let radius = levels.resolution().diagonal(HEADING_WEIGHT);
    let root = levels.root();
    let hits: HashSet<(usize, usize)> = batch
        .trajectories
        .par_iter()
        .fold(HashSet::new, |mut acc, traj| {
            for (t, s) in in_stack_frame(traj, root).enumerate().take(n_levels) {
                let level = &levels.levels()[t];
                if let Some(nn) = level.nearest_cells(&s, 1, HEADING_WEIGHT).first() {
                    if nn.distance <= radius {
                        acc.insert((t, nn.index));
                    }
                }
            }
            acc
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let total = levels.total_cells();
    let project = |t: usize, i: usize| {
        let k = levels.levels()[t].cells()[i].key;
        (t, k.ix, k.iy)
    };
    let visited_2d: HashSet<_> = hits.iter().map(|&(t, i)| project(t, i)).collect();
    let total_2d: HashSet<_> = levels
        .levels()
        .iter()
        .enumerate()
        .flat_map(|(t, l)| l.cells().iter().map(move |c| (t, c.key.ix, c.key.iy)))
        .collect();
    let pct = |a: usize, b: usize| {
        if b == 0 {
            0.0
        } else {
            100.0 * a as f64 / b as f64
        }
    };
    CoverageReport {
        visited: hits.len(),
        total,
        percentage: pct(hits.len(), total),
        visited_2d: visited_2d.len(),
        total_2d: total_2d.len(),
        percentage_2d: pct(visited_2d.len(), total_2d.len()),
    }
}

pub fn success_rate(outcomes: &[Outcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter(
            "success rate of zero episodes".into(),
        ));
    }
    let wins = outcomes.iter().filter(|&&o| o == Outcome::Success).count();
    Ok(wins as f64 / outcomes.len() as f64)
}

/// Mean path length over successful episodes; `None` without any.
pub fn avg_path_length(episodes: &[(Outcome, f64)]) -> Option<f64> {
    let ok: Vec<f64> = episodes
        .iter()
        .filter(|(o, _)| *o == Outcome::Success)
        .map(|&(_, l)| l)
        .collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}
