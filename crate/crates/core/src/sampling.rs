//! Control-sequence samplers: Gaussian perturbation, normal-log-normal
//! perturbation, and rollouts of the learned C-Uniform policy.

use std::io::Write;

use ndarray::Axis;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    rollout, step, ControlInput, ControlSequence, State, Trajectory, VehicleParams,
};
use crate::error::{Error, Result};
use crate::policy::{sample_index, ActionSet, Mode, PolicyNetwork};

/// Rows per network forward call when rolling out the policy.
const FORWARD_CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Gaussian,
    Nln,
    Cuniform,
    Injected,
}

impl SampleSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleSource::Gaussian => "gaussian",
            SampleSource::Nln => "nln",
            SampleSource::Cuniform => "cuniform",
            SampleSource::Injected => "injected",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSamplerConfig {
    /// Per-step steering standard deviation, radians.
    pub sigma: f64,
}

impl GaussianSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlnSamplerConfig {
    pub sigma: f64,
    /// Shape of the unit-mean log-normal multiplier.
    pub sigma_ln: f64,
}

impl NlnSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.sigma_ln > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "sigma and sigma_ln must be positive: {self:?}"
            )))
        }
    }
}

/// Aligned control sequences, their rollouts, and where each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryBatch {
    pub sequences: Vec<ControlSequence>,
    pub trajectories: Vec<Trajectory>,
    pub sources: Vec<SampleSource>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn push(&mut self, seq: ControlSequence, traj: Trajectory, source: SampleSource) {
        self.sequences.push(seq);
        self.trajectories.push(traj);
        self.sources.push(source);
    }

    pub fn extend(&mut self, other: TrajectoryBatch) {
        self.sequences.extend(other.sequences);
        self.trajectories.extend(other.trajectories);
        self.sources.extend(other.sources);
    }

    fn from_sequences(
        s0: &State,
        sequences: Vec<ControlSequence>,
        source: SampleSource,
        p: &VehicleParams,
    ) -> Self {
        let trajectories = sequences
            .par_iter()
            .map(|seq| rollout(s0, seq, p))
            .collect();
        let n = sequences.len();
        TrajectoryBatch {
            sequences,
            trajectories,
            sources: vec![source; n],
        }
    }

    /// CSV dump: `traj_id,t,x,y,psi,delta`. The final state of each
    /// trajectory has an empty `delta`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "traj_id,t,x,y,psi,delta")?;
        for (id, (seq, traj)) in self.sequences.iter().zip(&self.trajectories).enumerate() {
            for (t, s) in traj.states.iter().enumerate() {
                match seq.inputs.get(t) {
                    Some(u) => writeln!(
                        w,
                        "{id},{t},{:.9},{:.9},{:.9},{:.9}",
                        s.x, s.y, s.psi, u.delta
                    )?,
                    None => writeln!(w, "{id},{t},{:.9},{:.9},{:.9},", s.x, s.y, s.psi)?,
                }
            }
        }
        Ok(())
    }
}

fn perturb<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    n: usize,
    p: &VehicleParams,
    rng: &mut R,
    mut noise: impl FnMut(&mut R) -> f64,
) -> Vec<ControlSequence> {
    (0..n)
        .map(|_| {
            ControlSequence::from_deltas(
                nominal
                    .deltas()
                    .map(|u| p.clamp(u + noise(rng)))
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

/// `v_t = clamp(u_t + eps_t)` with `eps_t ~ N(0, sigma^2)` i.i.d.
pub fn sample_gaussian<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    cfg: &GaussianSamplerConfig,
    s0: &State,
    n: usize,
    p: &VehicleParams,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let normal = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    let seqs = perturb(nominal, n, p, rng, |r| normal.sample(r));
    Ok(TrajectoryBatch::from_sequences(
        s0,
        seqs,
        SampleSource::Gaussian,
        p,
    ))
}

/// `eps_t = eta_t * exp(z_t)` with `eta ~ N(0, sigma^2)` and
/// `z ~ N(-sigma_ln^2 / 2, sigma_ln^2)`, so the multiplier has unit mean.
pub fn sample_nln<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    cfg: &NlnSamplerConfig,
    s0: &State,
    n: usize,
    p: &VehicleParams,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    let normal = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    let log_normal =
        Normal::new(-0.5 * cfg.sigma_ln * cfg.sigma_ln, cfg.sigma_ln).expect("validated sigma_ln");
    let seqs = perturb(nominal, n, p, rng, |r| {
        let eta = normal.sample(r);
        eta * log_normal.sample(r).exp()
    });
    Ok(TrajectoryBatch::from_sequences(
        s0,
        seqs,
        SampleSource::Nln,
        p,
    ))
}

/// Rolls the policy out `n` times for `horizon` steps from `s0`.
///
/// The network was trained from a canonical origin, so it is queried with
/// each state expressed in the body frame of `s0`. Draws are taken in
/// step-major order from `rng`.
pub fn sample_cuniform<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    actions: &ActionSet,
    s0: &State,
    horizon: usize,
    n: usize,
    p: &VehicleParams,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    if net.n_actions() != actions.len() {
        return Err(Error::InvalidParameter(format!(
            "network has {} outputs but the action set has {} actions",
            net.n_actions(),
            actions.len()
        )));
    }
    let mut current = vec![*s0; n];
    let mut trajectories: Vec<Trajectory> = (0..n)
        .map(|_| {
            let mut states = Vec::with_capacity(horizon + 1);
            states.push(*s0);
            Trajectory { states }
        })
        .collect();
    let mut deltas: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(horizon)).collect();

    for _ in 0..horizon {
        let local: Vec<State> = current.iter().map(|s| s.relative_to(s0)).collect();
        let chunks: Vec<_> = local
            .par_chunks(FORWARD_CHUNK)
            .map(|chunk| net.probs_batch(chunk, Mode::Eval))
            .collect::<Result<_>>()?;
        let rows = chunks.iter().flat_map(|c| c.axis_iter(Axis(0)));
        for (i, row) in rows.enumerate() {
            let probs = row.as_slice().expect("standard layout");
            let delta = actions.get(sample_index(probs, rng));
            current[i] = step(&current[i], ControlInput::new(delta), p);
            trajectories[i].states.push(current[i]);
            deltas[i].push(delta);
        }
    }
    Ok(TrajectoryBatch {
        sequences: deltas
            .into_iter()
            .map(ControlSequence::from_deltas)
            .collect(),
        trajectories,
        sources: vec![SampleSource::Cuniform; n],
    })
}
