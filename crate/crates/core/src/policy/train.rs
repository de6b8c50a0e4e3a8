//! Entropy-maximization training over a level-set stack.
//!
//! For level `t`, every cell center is pushed through every action. Each
//! successor deposits its mass `p(u | c) / |L_t|` on its `k` nearest cells
//! of `L_{t+1}`, split by a normalized kernel `exp(-beta * d)`. The loss is
//! the negative entropy `sum_j q_j ln q_j` of the resulting occupancy.
//! Kernel weights depend only on fixed cell centers, so they are computed
//! once and gradients flow through the policy probabilities alone.

use std::io::Write;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, ControlInput, VehicleParams};
use crate::error::{Error, Result};
use crate::levelset::{LevelSetStack, HEADING_WEIGHT};

use super::actions::ActionSet;
use super::network::{Gradients, Mode, PolicyNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Kernel sharpness in 1/m; `None` means one over the cell width.
    pub beta_assign: Option<f64>,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            epochs: 20,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            beta_assign: None,
            k_neighbors: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.epochs < 1 || self.k_neighbors < 1 {
            return Err(Error::InvalidParameter(format!(
                "train config needs lr > 0, epochs >= 1, k_neighbors >= 1: {self:?}"
            )));
        }
        if matches!(self.beta_assign, Some(b) if !(b > 0.0)) {
            return Err(Error::InvalidParameter(
                "beta_assign must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn kernel_beta(&self, levels: &LevelSetStack) -> f64 {
        self.beta_assign
            .unwrap_or_else(|| 1.0 / levels.resolution().dx)
    }
}

/// Sparse transition kernel from the cells of `L_t` to those of `L_{t+1}`.
///
/// Row `(c, u)` lists up to `width` target cells with weights summing to 1.
#[derive(Clone, Debug)]
pub struct SoftAssignment {
    pub n_cells: usize,
    pub n_actions: usize,
    pub n_next: usize,
    width: usize,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl SoftAssignment {
    pub fn build(
        levels: &LevelSetStack,
        t: usize,
        actions: &ActionSet,
        dyn_params: &VehicleParams,
        beta: f64,
        k: usize,
    ) -> Result<Self> {
        let here = levels.level(t)?;
        let next = levels.level(t + 1)?;
        if next.is_empty() {
            return Err(Error::EmptyLevel { step: t + 1 });
        }
        let width = k.max(1).min(next.len());
        let n_actions = actions.len();
        let rows: Vec<(Vec<u32>, Vec<f64>)> = here
            .cells()
            .par_iter()
            .flat_map_iter(|cell| {
                actions.deltas().iter().map(move |&d| {
                    let succ = step(&cell.center, ControlInput::new(d), dyn_params);
                    let nn = next.nearest_cells(&succ, width, HEADING_WEIGHT);
                    let d0 = nn[0].distance;
                    let raw: Vec<f64> = nn
                        .iter()
                        .map(|n| (-beta * (n.distance - d0)).exp())
                        .collect();
                    let z: f64 = raw.iter().sum();
                    (
                        nn.iter().map(|n| n.index as u32).collect(),
                        raw.into_iter().map(|w| w / z).collect(),
                    )
                })
            })
            .collect();
        let mut targets = Vec::with_capacity(rows.len() * width);
        let mut weights = Vec::with_capacity(rows.len() * width);
        for (t, w) in rows {
            targets.extend(t);
            weights.extend(w);
        }
        Ok(SoftAssignment {
            n_cells: here.len(),
            n_actions,
            n_next: next.len(),
            width,
            targets,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Targets and weights of row `(cell, action)`.
    pub fn row(&self, cell: usize, action: usize) -> (&[u32], &[f64]) {
        let start = (cell * self.n_actions + action) * self.width;
        (
            &self.targets[start..start + self.width],
            &self.weights[start..start + self.width],
        )
    }

    /// Next-level occupancy for per-cell action probabilities
    /// (`n_cells x n_actions`), with the cells of `L_t` weighted uniformly.
    pub fn occupancy(&self, probs: &Array2<f64>) -> Vec<f64> {
        assert_eq!(probs.dim(), (self.n_cells, self.n_actions));
        let mass = 1.0 / self.n_cells as f64;
        let mut q = vec![0.0; self.n_next];
        for (c, row) in probs.axis_iter(Axis(0)).enumerate() {
            for (u, &p) in row.iter().enumerate() {
                let (ts, ws) = self.row(c, u);
                let m = p * mass;
                for (&j, &w) in ts.iter().zip(ws) {
                    q[j as usize] += m * w;
                }
            }
        }
        q
    }

    /// Gradient of `entropy_loss(occupancy(probs))` w.r.t. `probs`.
    pub fn loss_grad_probs(&self, q: &[f64]) -> Array2<f64> {
        let mass = 1.0 / self.n_cells as f64;
        let dq: Vec<f64> = q
            .iter()
            .map(|&qj| qj.max(f64::MIN_POSITIVE).ln() + 1.0)
            .collect();
        let mut g = Array2::zeros((self.n_cells, self.n_actions));
        for ((c, u), gv) in g.indexed_iter_mut() {
            let (ts, ws) = self.row(c, u);
            *gv = mass
                * ts.iter()
                    .zip(ws)
                    .map(|(&j, &w)| w * dq[j as usize])
                    .sum::<f64>();
        }
        g
    }
}

/// Negative entropy `sum q ln q`, with `0 ln 0 = 0`.
pub fn entropy_loss(q: &[f64]) -> f64 {
    q.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
}

/// Occupancy of `L_{t+1}` induced by the network from uniform mass on `L_t`.
pub fn soft_assign(
    net: &PolicyNetwork,
    levels: &LevelSetStack,
    t: usize,
    actions: &ActionSet,
    dyn_params: &VehicleParams,
    cfg: &TrainConfig,
    mode: Mode,
) -> Result<Vec<f64>> {
    let assignment = SoftAssignment::build(
        levels,
        t,
        actions,
        dyn_params,
        cfg.kernel_beta(levels),
        cfg.k_neighbors,
    )?;
    let states: Vec<_> = levels.level(t)?.centers().copied().collect();
    let probs = net.probs_batch(&states, mode)?;
    Ok(assignment.occupancy(&probs))
}

/// Loss and parameter gradient for one level in training mode. Also
/// returns the forward pass so callers can update running statistics.
pub fn level_loss_and_grad(
    net: &PolicyNetwork,
    levels: &LevelSetStack,
    t: usize,
    assignment: &SoftAssignment,
) -> Result<(f64, Gradients, super::network::ForwardPass)> {
    let states: Vec<_> = levels.level(t)?.centers().copied().collect();
    let pass = net.forward_batch(&states, Mode::Train)?;
    let q = assignment.occupancy(&pass.probs);
    let loss = entropy_loss(&q);
    let g = assignment.loss_grad_probs(&q);
    // softmax backward: dz = p * (g - <p, g>)
    let mut d_logits = g;
    for (mut drow, prow) in d_logits
        .axis_iter_mut(Axis(0))
        .zip(pass.probs.axis_iter(Axis(0)))
    {
        let dot: f64 = drow.iter().zip(prow.iter()).map(|(a, b)| a * b).sum();
        drow.zip_mut_with(&prow, |d, &p| *d = p * (*d - dot));
    }
    let grads = net.backward(&pass, &d_logits);
    Ok((loss, grads, pass))
}

#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &PolicyNetwork, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut PolicyNetwork, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((param, grad), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub level: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub trace: Vec<LossRecord>,
}

impl TrainReport {
    /// Sum of per-level losses for each epoch.
    pub fn epoch_totals(&self) -> Vec<f64> {
        let epochs = self.trace.iter().map(|r| r.epoch + 1).max().unwrap_or(0);
        let mut totals = vec![0.0; epochs];
        for r in &self.trace {
            totals[r.epoch] += r.loss;
        }
        totals
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,level_t,loss")?;
        for r in &self.trace {
            writeln!(w, "{},{},{:.17e}", r.epoch, r.level, r.loss)?;
        }
        Ok(())
    }
}

/// Epochs outer, levels inner; one Adam step per level with the whole
/// level as the batch.
pub fn train(
    net: &mut PolicyNetwork,
    levels: &LevelSetStack,
    actions: &ActionSet,
    dyn_params: &VehicleParams,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if levels.len() < 2 {
        return Err(Error::InvalidParameter(
            "training needs at least two levels".into(),
        ));
    }
    if net.n_actions() != actions.len() {
        return Err(Error::InvalidParameter(format!(
            "network has {} outputs but the action set has {} actions",
            net.n_actions(),
            actions.len()
        )));
    }
    let beta = cfg.kernel_beta(levels);
    let assignments = (0..levels.len() - 1)
        .map(|t| SoftAssignment::build(levels, t, actions, dyn_params, beta, cfg.k_neighbors))
        .collect::<Result<Vec<_>>>()?;

    let mut adam = Adam::new(net, cfg);
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        for (t, assignment) in assignments.iter().enumerate() {
            let (loss, grads, pass) = level_loss_and_grad(net, levels, t, assignment)?;
            if !loss.is_finite() || grads.tensors().iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    level: t,
                    loss,
                });
            }
            net.update_running_stats(&pass);
            adam.step(net, &grads);
            report.trace.push(LossRecord {
                epoch,
                level: t,
                loss,
            });
        }
    }
    Ok(report)
}
