//! MPPI weighting and update, and the CU-MPPI pipeline that picks its
//! nominal sequence from C-Uniform rollouts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rollout, ControlSequence, State, Trajectory, VehicleParams};
use crate::error::{Error, Result};
use crate::policy::{ActionSet, PolicyNetwork};
use crate::sampling::{
    sample_cuniform, sample_gaussian, sample_nln, GaussianSamplerConfig, NlnSamplerConfig,
    SampleSource, TrajectoryBatch,
};

/// Absolute tolerance under which two candidate costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Anything that scores a rolled-out trajectory. Lower is better.
pub trait CostModel: Sync {
    fn trajectory_cost(&self, traj: &Trajectory) -> f64;
}

impl<F> CostModel for F
where
    F: Fn(&Trajectory) -> f64 + Sync,
{
    fn trajectory_cost(&self, traj: &Trajectory) -> f64 {
        self(traj)
    }
}

/// Scores every trajectory of a batch in parallel; NaN counts as infinite.
pub fn evaluate_costs(batch: &TrajectoryBatch, cost: &dyn CostModel) -> Vec<f64> {
    batch
        .trajectories
        .par_iter()
        .map(|t| {
            let c = cost.trajectory_cost(t);
            if c.is_nan() {
                f64::INFINITY
            } else {
                c
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Gaussian,
    Nln,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mppi,
    LogMppi,
    CuMppi,
    #[serde(rename = "cu-logmppi")]
    CuLogMppi,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Mppi,
        Method::LogMppi,
        Method::CuMppi,
        Method::CuLogMppi,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mppi => "mppi",
            Method::LogMppi => "log-mppi",
            Method::CuMppi => "cu-mppi",
            Method::CuLogMppi => "cu-logmppi",
        }
    }

    pub fn sampler(&self) -> SamplerKind {
        match self {
            Method::Mppi | Method::CuMppi => SamplerKind::Gaussian,
            Method::LogMppi | Method::CuLogMppi => SamplerKind::Nln,
        }
    }

    pub fn uses_policy(&self) -> bool {
        matches!(self, Method::CuMppi | Method::CuLogMppi)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown method {s:?} (expected mppi, log-mppi, cu-mppi or cu-logmppi)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiConfig {
    pub lambda: f64,
    /// Total rollouts per control step, across every sampler in use.
    pub n_samples: usize,
    pub horizon: usize,
    pub sampler: SamplerKind,
    pub sigma: f64,
    pub sigma_ln: f64,
    /// Weight of the quadratic control-cost correction; 0 gives a plain
    /// cost softmax.
    pub gamma: f64,
    /// Share of `n_samples` drawn from the C-Uniform policy in CU variants.
    pub cu_fraction: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            lambda: 0.5,
            n_samples: 1000,
            horizon: 15,
            sampler: SamplerKind::Gaussian,
            sigma: 0.1,
            sigma_ln: 0.5,
            gamma: 0.0,
            cu_fraction: 0.5,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.lambda.is_finite()
            && self.n_samples >= 1
            && self.horizon >= 1
            && self.sigma > 0.0
            && self.sigma_ln > 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.cu_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid MPPI config: {self:?}"
            )))
        }
    }

    /// Candidates drawn from the policy and perturbation samples around the
    /// nominal. Each side gets at least one rollout.
    pub fn split(&self) -> (usize, usize) {
        if self.n_samples < 2 {
            return (1, 1);
        }
        let n_cu = ((self.n_samples as f64 * self.cu_fraction).round() as usize)
            .clamp(1, self.n_samples - 1);
        (n_cu, self.n_samples - n_cu)
    }

    fn perturb<R: Rng + ?Sized>(
        &self,
        nominal: &ControlSequence,
        s0: &State,
        n: usize,
        p: &VehicleParams,
        rng: &mut R,
    ) -> Result<TrajectoryBatch> {
        match self.sampler {
            SamplerKind::Gaussian => sample_gaussian(
                nominal,
                &GaussianSamplerConfig { sigma: self.sigma },
                s0,
                n,
                p,
                rng,
            ),
            SamplerKind::Nln => sample_nln(
                nominal,
                &NlnSamplerConfig {
                    sigma: self.sigma,
                    sigma_ln: self.sigma_ln,
                },
                s0,
                n,
                p,
                rng,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub values: Vec<f64>,
    /// Every cost was infinite; `values` is uniform.
    pub all_infeasible: bool,
}

/// `sum_t u_t (v_t - u_t) / sigma^2` per sample.
pub fn control_cost_terms(
    nominal: &ControlSequence,
    batch: &TrajectoryBatch,
    sigma: f64,
) -> Vec<f64> {
    let inv_var = 1.0 / (sigma * sigma);
    batch
        .sequences
        .iter()
        .map(|v| {
            nominal
                .deltas()
                .zip(v.deltas())
                .map(|(u, vi)| u * (vi - u) * inv_var)
                .sum()
        })
        .collect()
}

/// Normalized weights `w_i ~ exp(-(S_i - min S) / lambda - gamma * c_i)`.
///
/// `corrections` holds the control-cost terms `c_i`; `None` treats them as
/// zero.
pub fn mppi_weights(
    costs: &[f64],
    corrections: Option<&[f64]>,
    lambda: f64,
    gamma: f64,
) -> Result<Weights> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter("no samples to weight".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive and finite, got {lambda}"
        )));
    }
    if let Some(c) = corrections {
        if c.len() != costs.len() {
            return Err(Error::LengthMismatch {
                expected: costs.len(),
                found: c.len(),
                index: 0,
            });
        }
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        let n = costs.len();
        return Ok(Weights {
            values: vec![1.0 / n as f64; n],
            all_infeasible: true,
        });
    }
    let exponents: Vec<f64> = costs
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let corr = corrections.map_or(0.0, |c| gamma * c[i]);
            -(s - min) / lambda - corr
        })
        .collect();
    // With a correction term the largest exponent need not be zero.
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = values.iter().sum();
    values.iter_mut().for_each(|w| *w /= z);
    Ok(Weights {
        values,
        all_infeasible: false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlSolution {
    pub optimal_sequence: ControlSequence,
    pub weights: Vec<f64>,
    pub nominal_used: ControlSequence,
    /// Lowest cost among the samples that were weighted.
    pub min_cost: f64,
    pub all_infeasible: bool,
}

/// Weighted average of the batch sequences, clamped to the steering bound.
pub fn mppi_update(
    nominal: &ControlSequence,
    batch: &TrajectoryBatch,
    costs: &[f64],
    cfg: &MppiConfig,
    p: &VehicleParams,
) -> Result<ControlSolution> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter(
            "MPPI update needs at least one sample".into(),
        ));
    }
    if costs.len() != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            found: costs.len(),
            index: 0,
        });
    }
    let horizon = batch.sequences[0].len();
    for (i, s) in batch.sequences.iter().enumerate() {
        if s.len() != horizon {
            return Err(Error::LengthMismatch {
                expected: horizon,
                found: s.len(),
                index: i,
            });
        }
    }
    let corrections = (cfg.gamma > 0.0).then(|| control_cost_terms(nominal, batch, cfg.sigma));
    let w = mppi_weights(costs, corrections.as_deref(), cfg.lambda, cfg.gamma)?;
    let mut acc = vec![0.0; horizon];
    for (seq, &wi) in batch.sequences.iter().zip(&w.values) {
        for (a, v) in acc.iter_mut().zip(seq.deltas()) {
            *a += wi * v;
        }
    }
    Ok(ControlSolution {
        optimal_sequence: ControlSequence::from_deltas(acc.into_iter().map(|a| p.clamp(a))),
        weights: w.values,
        nominal_used: nominal.clone(),
        min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
        all_infeasible: w.all_infeasible,
    })
}

/// Index of the cheapest candidate. Candidates within [`TIE_TOLERANCE`] of
/// the minimum are tied and one of them is drawn uniformly.
pub fn select_nominal<R: Rng + ?Sized>(costs: &[f64], rng: &mut R) -> Result<usize> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter(
            "no candidates to select from".into(),
        ));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = costs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == min || (c - min).abs() <= TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    Ok(match tied.len() {
        // all NaN
        0 => 0,
        1 => tied[0],
        n => tied[rng.random_range(0..n)],
    })
}

/// Drops the first input and repeats the last.
pub fn receding_shift(seq: &ControlSequence) -> ControlSequence {
    let mut inputs = seq.inputs.clone();
    if let Some(&last) = inputs.last() {
        inputs.remove(0);
        inputs.push(last);
    }
    ControlSequence { inputs }
}

/// Plain MPPI (Gaussian or NLN, per `cfg.sampler`) around `nominal`.
pub fn mppi_step<R: Rng + ?Sized>(
    state: &State,
    nominal: &ControlSequence,
    cost: &dyn CostModel,
    cfg: &MppiConfig,
    p: &VehicleParams,
    rng: &mut R,
) -> Result<ControlSolution> {
    cfg.validate()?;
    let batch = cfg.perturb(nominal, state, cfg.n_samples, p, rng)?;
    let costs = evaluate_costs(&batch, cost);
    mppi_update(nominal, &batch, &costs, cfg, p)
}

/// Policy and action set used by the CU variants.
#[derive(Clone, Copy, Debug)]
pub struct CUniformSampler<'a> {
    pub net: &'a PolicyNetwork,
    pub actions: &'a ActionSet,
}

/// One CU-MPPI (or CU-LogMPPI) control step.
///
/// Samples C-Uniform candidates, adds the shifted previous solution when
/// given, takes the cheapest candidate as nominal and refines it with the
/// configured MPPI sampler. The MPPI result is returned unconditionally.
pub fn cu_mppi_step<R: Rng + ?Sized>(
    state: &State,
    cost: &dyn CostModel,
    policy: CUniformSampler<'_>,
    cfg: &MppiConfig,
    p: &VehicleParams,
    prev_solution: Option<&ControlSequence>,
    rng: &mut R,
) -> Result<ControlSolution> {
    cfg.validate()?;
    let (n_cu, n_mppi) = cfg.split();
    let mut candidates =
        sample_cuniform(policy.net, policy.actions, state, cfg.horizon, n_cu, p, rng)?;
    if let Some(prev) = prev_solution {
        let shifted = fit_horizon(&receding_shift(prev), cfg.horizon);
        let traj = rollout(state, &shifted, p);
        candidates.push(shifted, traj, SampleSource::Injected);
    }
    let costs = evaluate_costs(&candidates, cost);
    let idx = select_nominal(&costs, rng)?;
    let nominal = candidates.sequences[idx].clone();
    let batch = cfg.perturb(&nominal, state, n_mppi, p, rng)?;
    let batch_costs = evaluate_costs(&batch, cost);
    mppi_update(&nominal, &batch, &batch_costs, cfg, p)
}

/// Pads with the last input (or zeros) or truncates to `len`.
fn fit_horizon(seq: &ControlSequence, len: usize) -> ControlSequence {
    let mut inputs = seq.inputs.clone();
    let fill = inputs.last().copied().unwrap_or_default();
    inputs.resize(len, fill);
    ControlSequence { inputs }
}

/// Receding-horizon controller holding the warm start between steps.
#[derive(Clone, Debug)]
pub struct Planner {
    pub method: Method,
    pub cfg: MppiConfig,
    pub params: VehicleParams,
    previous: Option<ControlSequence>,
}

impl Planner {
    /// The sampler kind in `cfg` is overridden by the method.
    pub fn new(method: Method, mut cfg: MppiConfig, params: VehicleParams) -> Result<Self> {
        cfg.sampler = method.sampler();
        cfg.validate()?;
        params.validate()?;
        Ok(Planner {
            method,
            cfg,
            params,
            previous: None,
        })
    }

    pub fn previous(&self) -> Option<&ControlSequence> {
        self.previous.as_ref()
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Solves one step from `state`. CU methods need `policy`.
    pub fn plan<R: Rng + ?Sized>(
        &mut self,
        state: &State,
        cost: &dyn CostModel,
        policy: Option<CUniformSampler<'_>>,
        rng: &mut R,
    ) -> Result<ControlSolution> {
        let solution = if self.method.uses_policy() {
            let policy = policy.ok_or_else(|| {
                Error::InvalidParameter(format!("{} needs a trained policy", self.method))
            })?;
            cu_mppi_step(
                state,
                cost,
                policy,
                &self.cfg,
                &self.params,
                self.previous.as_ref(),
                rng,
            )?
        } else {
            let nominal = match &self.previous {
                Some(prev) => fit_horizon(&receding_shift(prev), self.cfg.horizon),
                None => ControlSequence::zeros(self.cfg.horizon),
            };
            mppi_step(state, &nominal, cost, &self.cfg, &self.params, rng)?
        };
        self.previous = Some(solution.optimal_sequence.clone());
        Ok(solution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NetworkShape;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch_of(seqs: Vec<Vec<f64>>) -> TrajectoryBatch {
        let p = VehicleParams::default();
        let mut b = TrajectoryBatch::default();
        for s in seqs {
            let seq = ControlSequence::from_deltas(s);
            let traj = rollout(&State::origin(), &seq, &p);
            b.push(seq, traj, SampleSource::Gaussian);
        }
        b
    }

    #[test]
    fn equal_costs_give_uniform_weights() {
        let w = mppi_weights(&[3.0; 4], None, 0.5, 0.0).unwrap();
        for v in w.values {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn dominant_sample_takes_all_weight() {
        let w = mppi_weights(&[0.0, 1e6], None, 0.5, 0.0).unwrap();
        assert_eq!(w.values, vec![1.0, 0.0]);
    }

    #[test]
    fn two_sample_weights_match_hand_values() {
        let w = mppi_weights(&[0.0, 1.0], None, 0.5, 0.0).unwrap();
        let e = (-2.0f64).exp();
        assert_abs_diff_eq!(w.values[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(w.values[0], 0.88080, epsilon = 1e-5);
        assert_abs_diff_eq!(w.values[1], 0.11920, epsilon = 1e-5);
    }

    #[test]
    fn all_infinite_costs_are_flagged() {
        let w = mppi_weights(&[f64::INFINITY; 3], None, 0.5, 0.0).unwrap();
        assert!(w.all_infeasible);
        assert_eq!(w.values, vec![1.0 / 3.0; 3]);
        assert!(mppi_weights(&[], None, 0.5, 0.0).is_err());
        assert!(mppi_weights(&[1.0], None, 0.0, 0.0).is_err());
    }

    #[test]
    fn correction_term_shifts_weight() {
        // c = (1, -1), gamma = 1: the second sample gains a factor e^2.
        let w = mppi_weights(&[0.0, 0.0], Some(&[1.0, -1.0]), 0.5, 1.0).unwrap();
        let e = (2.0f64).exp();
        assert_abs_diff_eq!(w.values[1], e / (1.0 + e), epsilon = 1e-15);
        let terms = control_cost_terms(
            &ControlSequence::from_deltas([0.1, 0.2]),
            &batch_of(vec![vec![0.2, 0.2]]),
            0.1,
        );
        assert_abs_diff_eq!(terms[0], 0.1 * 0.1 / 0.01, epsilon = 1e-12);
    }

    #[test]
    fn temperature_limits() {
        let costs = [1.0, 2.0, 4.0];
        let hot = mppi_weights(&costs, None, 1e9, 0.0).unwrap();
        for v in hot.values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-8);
        }
        let cold = mppi_weights(&costs, None, 1e-3, 0.0).unwrap();
        assert!(cold.values[0] > 1.0 - 1e-12);
    }

    #[test]
    fn update_is_weighted_average() {
        let p = VehicleParams::default();
        let cfg = MppiConfig::default();
        let nominal = ControlSequence::zeros(2);
        let single = batch_of(vec![vec![0.1, -0.2]]);
        let sol = mppi_update(&nominal, &single, &[7.0], &cfg, &p).unwrap();
        assert_eq!(sol.optimal_sequence, single.sequences[0]);
        assert_eq!(sol.min_cost, 7.0);

        let pair = batch_of(vec![vec![0.1, 0.3], vec![0.3, -0.1]]);
        let sol = mppi_update(&nominal, &pair, &[2.0, 2.0], &cfg, &p).unwrap();
        let got: Vec<f64> = sol.optimal_sequence.deltas().collect();
        assert_abs_diff_eq!(got[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(got[1], 0.1, epsilon = 1e-15);

        let sol = mppi_update(&nominal, &pair, &[0.0, 1.0], &cfg, &p).unwrap();
        let got: Vec<f64> = sol.optimal_sequence.deltas().collect();
        let w0 = 1.0 / (1.0 + (-2.0f64).exp());
        assert_abs_diff_eq!(got[0], w0 * 0.1 + (1.0 - w0) * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(got[1], w0 * 0.3 - (1.0 - w0) * 0.1, epsilon = 1e-15);

        assert!(mppi_update(&nominal, &pair, &[0.0], &cfg, &p).is_err());
        assert!(mppi_update(&nominal, &TrajectoryBatch::default(), &[], &cfg, &p).is_err());
    }

    #[test]
    fn select_nominal_picks_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_nominal(&[5.0, 3.0, 4.0], &mut rng).unwrap(), 1);
        assert_eq!(select_nominal(&[9.0], &mut rng).unwrap(), 0);
        assert!(select_nominal(&[], &mut rng).is_err());
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let zeros = (0..n)
            .filter(|_| select_nominal(&[3.0, 3.0 + 1e-10, 7.0], &mut rng).unwrap() == 0)
            .count();
        let sd = (n as f64 * 0.25).sqrt();
        assert!((zeros as f64 - n as f64 / 2.0).abs() < 4.0 * sd, "{zeros}");
    }

    #[test]
    fn shift_examples() {
        let s = ControlSequence::from_deltas([0.1, 0.2, 0.3]);
        assert_eq!(
            receding_shift(&s),
            ControlSequence::from_deltas([0.2, 0.3, 0.3])
        );
        let one = ControlSequence::from_deltas([0.4]);
        assert_eq!(receding_shift(&one), one);
        assert!(receding_shift(&ControlSequence::zeros(0)).is_empty());
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_ignore_shifts(
            costs in prop::collection::vec(0.0f64..1e3, 1..40),
            shift in -1e3f64..1e3,
            lambda in 0.01f64..10.0,
        ) {
            let w = mppi_weights(&costs, None, lambda, 0.0).unwrap();
            let sum: f64 = w.values.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(w.values.iter().all(|&v| v >= 0.0));
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let w2 = mppi_weights(&shifted, None, lambda, 0.0).unwrap();
            for (a, b) in w.values.iter().zip(&w2.values) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn shift_preserves_length(d in prop::collection::vec(-0.5f64..0.5, 0..30)) {
            let s = ControlSequence::from_deltas(d.clone());
            prop_assert_eq!(receding_shift(&s).len(), d.len());
        }
    }

    fn goal_cost(goal: (f64, f64)) -> impl Fn(&Trajectory) -> f64 + Sync {
        move |t: &Trajectory| {
            t.states
                .iter()
                .map(|s| ((s.x - goal.0).powi(2) + (s.y - goal.1).powi(2)).sqrt())
                .sum()
        }
    }

    #[test]
    fn cu_mppi_improves_on_zero_control() {
        let p = VehicleParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = PolicyNetwork::new(&NetworkShape::new(vec![8], 45, false), &mut rng);
        let actions = ActionSet::uniform(p.delta_max, 45);
        let cfg = MppiConfig {
            n_samples: 400,
            horizon: 10,
            ..Default::default()
        };
        // goal ahead and to the left: turning beats driving straight
        let cost = goal_cost((1.5, 1.0));
        let sol = cu_mppi_step(
            &State::origin(),
            &cost,
            CUniformSampler {
                net: &net,
                actions: &actions,
            },
            &cfg,
            &p,
            None,
            &mut rng,
        )
        .unwrap();
        let j_opt = cost(&rollout(&State::origin(), &sol.optimal_sequence, &p));
        let j_zero = cost(&rollout(&State::origin(), &ControlSequence::zeros(10), &p));
        assert!(j_opt < j_zero, "{j_opt} vs {j_zero}");
        assert_eq!(sol.optimal_sequence.len(), 10);
        assert!(sol
            .optimal_sequence
            .deltas()
            .all(|d| d.abs() <= p.delta_max));
    }

    #[test]
    fn injected_solution_wins_when_strictly_better() {
        let p = VehicleParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = PolicyNetwork::new(&NetworkShape::new(vec![8], 45, false), &mut rng);
        let actions = ActionSet::uniform(p.delta_max, 45);
        // full left lock for one step more than the horizon
        let prev = ControlSequence::from_deltas(vec![p.delta_max; 6]);
        let target = rollout(
            &State::origin(),
            &ControlSequence::from_deltas(vec![p.delta_max; 5]),
            &p,
        );
        let last = *target.states.last().unwrap();
        let cost = move |t: &Trajectory| t.states.last().unwrap().planar_distance(&last);
        let cfg = MppiConfig {
            n_samples: 20,
            horizon: 5,
            // tiny sigma so the MPPI samples stay on the nominal
            sigma: 1e-12,
            ..Default::default()
        };
        let sol = cu_mppi_step(
            &State::origin(),
            &cost,
            CUniformSampler {
                net: &net,
                actions: &actions,
            },
            &cfg,
            &p,
            Some(&prev),
            &mut rng,
        )
        .unwrap();
        assert_eq!(
            sol.nominal_used,
            ControlSequence::from_deltas(vec![p.delta_max; 5])
        );
    }

    #[test]
    fn single_candidate_reduces_to_plain_mppi() {
        let p = VehicleParams::default();
        let actions = ActionSet::uniform(p.delta_max, 45);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = PolicyNetwork::new(&NetworkShape::new(vec![4], 45, false), &mut rng);
        // make the policy degenerate on the straight action
        let n = net.parameters().len();
        let mut theta = net.parameters();
        theta[n - 45 + 22] = 1e3;
        net.set_parameters(&theta);
        let cfg = MppiConfig {
            n_samples: 2,
            horizon: 4,
            ..Default::default()
        };
        assert_eq!(cfg.split(), (1, 1));
        let cost = goal_cost((1.0, 0.0));
        let policy = CUniformSampler {
            net: &net,
            actions: &actions,
        };
        let sol = cu_mppi_step(&State::origin(), &cost, policy, &cfg, &p, None, &mut rng).unwrap();
        assert_eq!(sol.nominal_used, ControlSequence::zeros(4));
        assert_eq!(sol.weights, vec![1.0]);
    }

    #[test]
    fn planner_warm_starts_and_needs_policy() {
        let p = VehicleParams::default();
        let cfg = MppiConfig {
            n_samples: 64,
            horizon: 6,
            ..Default::default()
        };
        let mut planner = Planner::new(Method::Mppi, cfg.clone(), p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cost = goal_cost((2.0, 0.5));
        let first = planner
            .plan(&State::origin(), &cost, None, &mut rng)
            .unwrap();
        assert_eq!(first.nominal_used, ControlSequence::zeros(6));
        let second = planner
            .plan(&State::origin(), &cost, None, &mut rng)
            .unwrap();
        assert_eq!(second.nominal_used, receding_shift(&first.optimal_sequence));

        let mut cu = Planner::new(Method::CuMppi, cfg, p).unwrap();
        assert!(cu.plan(&State::origin(), &cost, None, &mut rng).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("svg-mppi".parse::<Method>().is_err());
    }
}
