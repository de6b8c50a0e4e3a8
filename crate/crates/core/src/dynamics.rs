//! Kinematic bicycle model with constant forward speed.
//!
//! The state is `(x, y, psi)` and the only control is the steering angle.
//! Propagation is explicit forward Euler over one time step `dt`:
//!
//! ```text
//! x'   = x + v cos(psi) dt
//! y'   = y + v sin(psi) dt
//! psi' = wrap(psi + v / L_wb * tan(delta) dt)
//! ```

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid maps the upper end onto -pi; the interval is open there
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl State {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        State {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn origin() -> Self {
        State::default()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.psi.is_finite()
    }

    pub fn planar_distance(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Expresses `self` in the body frame of `frame`.
    pub fn relative_to(&self, frame: &State) -> State {
        let (s, c) = frame.psi.sin_cos();
        let dx = self.x - frame.x;
        let dy = self.y - frame.y;
        State::new(c * dx + s * dy, -s * dx + c * dy, self.psi - frame.psi)
    }

    /// Inverse of [`State::relative_to`].
    pub fn compose(frame: &State, local: &State) -> State {
        let (s, c) = frame.psi.sin_cos();
        State::new(
            frame.x + c * local.x - s * local.y,
            frame.y + s * local.x + c * local.y,
            frame.psi + local.psi,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub delta: f64,
}

impl ControlInput {
    pub fn new(delta: f64) -> Self {
        ControlInput { delta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Constant forward speed, m/s.
    pub v: f64,
    pub wheelbase: f64,
    pub dt: f64,
    /// Steering bound, radians.
    pub delta_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            v: 1.0,
            wheelbase: 0.33,
            dt: 0.2,
            delta_max: 0.524,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v > 0.0
            && self.wheelbase > 0.0
            && self.dt > 0.0
            && self.delta_max > 0.0
            && self.delta_max < PI / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "vehicle params must satisfy v > 0, wheelbase > 0, dt > 0, delta_max in (0, pi/2): {self:?}"
            )))
        }
    }

    pub fn clamp(&self, delta: f64) -> f64 {
        delta.clamp(-self.delta_max, self.delta_max)
    }

    /// Number of steps covering `seconds`, rounded to the nearest step.
    pub fn steps_for(&self, seconds: f64) -> usize {
        (seconds / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSequence {
    pub inputs: Vec<ControlInput>,
}

impl ControlSequence {
    pub fn from_deltas(deltas: impl IntoIterator<Item = f64>) -> Self {
        ControlSequence {
            inputs: deltas.into_iter().map(ControlInput::new).collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        ControlSequence {
            inputs: vec![ControlInput::default(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn deltas(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.inputs.iter().map(|u| u.delta)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Sum of planar displacements between consecutive states.
    pub fn path_length(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[0].planar_distance(&w[1]))
            .sum()
    }
}

pub fn step(s: &State, u: ControlInput, p: &VehicleParams) -> State {
    debug_assert!(
        u.delta.abs() <= p.delta_max + 1e-9,
        "steering {} exceeds bound {}",
        u.delta,
        p.delta_max
    );
    let (sin, cos) = s.psi.sin_cos();
    State {
        x: s.x + p.v * cos * p.dt,
        y: s.y + p.v * sin * p.dt,
        psi: wrap_angle(s.psi + p.v / p.wheelbase * u.delta.tan() * p.dt),
    }
}

/// Rolls `seq` out from `s0`. The result holds `seq.len() + 1` states.
pub fn rollout(s0: &State, seq: &ControlSequence, p: &VehicleParams) -> Trajectory {
    let mut states = Vec::with_capacity(seq.len() + 1);
    states.push(*s0);
    let mut s = *s0;
    for &u in &seq.inputs {
        s = step(&s, u, p);
        states.push(s);
    }
    Trajectory { states }
}

pub fn rollout_batch(
    s0: &State,
    batch: &[ControlSequence],
    p: &VehicleParams,
) -> Result<Vec<Trajectory>> {
    if let Some(first) = batch.first() {
        let expected = first.len();
        if let Some((index, seq)) = batch.iter().enumerate().find(|(_, s)| s.len() != expected) {
            return Err(Error::LengthMismatch {
                expected,
                found: seq.len(),
                index,
            });
        }
    }
    Ok(batch.par_iter().map(|seq| rollout(s0, seq, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn straight_step() {
        let s = step(&State::origin(), ControlInput::new(0.0), &params());
        assert_abs_diff_eq!(s.x, 0.2, epsilon = 1e-15);
        assert_eq!(s.y, 0.0);
        assert_eq!(s.psi, 0.0);
    }

    #[test]
    fn straight_step_north() {
        let s = step(
            &State::new(0.0, 0.0, PI / 2.0),
            ControlInput::new(0.0),
            &params(),
        );
        assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.psi, PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn steered_step_matches_hand_evaluation() {
        // psi' = 1 / 0.33 * tan(0.3) * 0.2 = 0.187479...
        let s = step(&State::origin(), ControlInput::new(0.3), &params());
        assert_abs_diff_eq!(s.x, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.psi, 0.18748, epsilon = 5e-6);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5 + TAU), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5 - 2.0 * TAU), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_input_rollout() {
        let traj = rollout(&State::origin(), &ControlSequence::zeros(1), &params());
        assert_eq!(traj.states.len(), 2);
        assert_eq!(traj.states[0], State::origin());
        assert_abs_diff_eq!(traj.states[1].x, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn left_then_right_is_mirror_symmetric_about_mid_heading() {
        let p = params();
        let k = 5;
        let seq = ControlSequence::from_deltas(
            std::iter::repeat_n(p.delta_max, k).chain(std::iter::repeat_n(-p.delta_max, k)),
        );
        let traj = rollout(&State::origin(), &seq, &p);

        // oracle: hand-rolled Euler loop
        let mut oracle = vec![(0.0f64, 0.0f64, 0.0f64)];
        for d in seq.deltas() {
            let (x, y, h) = *oracle.last().unwrap();
            oracle.push((
                x + h.cos() * 0.2,
                y + h.sin() * 0.2,
                h + d.tan() / 0.33 * 0.2,
            ));
        }
        for (s, o) in traj.states.iter().zip(&oracle) {
            assert_abs_diff_eq!(s.x, o.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.y, o.1, epsilon = 1e-12);
            assert_abs_diff_eq!(s.psi, wrap_angle(o.2), epsilon = 1e-12);
        }

        // heading profile is a tent peaking at step k and returning to zero
        let peak = traj.states[k].psi;
        for i in 0..=k {
            assert_abs_diff_eq!(
                traj.states[k - i].psi,
                traj.states[k + i].psi,
                epsilon = 1e-12
            );
        }
        assert!(peak > 0.0);
        assert_abs_diff_eq!(traj.states[2 * k].psi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn batch_length_mismatch() {
        let batch = vec![ControlSequence::zeros(3), ControlSequence::zeros(2)];
        let err = rollout_batch(&State::origin(), &batch, &params()).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { index: 1, .. }));
    }

    #[test]
    fn batch_preserves_order() {
        let p = params();
        let a = ControlSequence::from_deltas([0.1, 0.2]);
        let b = ControlSequence::from_deltas([-0.3, 0.0]);
        let fwd = rollout_batch(&State::origin(), &[a.clone(), b.clone()], &p).unwrap();
        let rev = rollout_batch(&State::origin(), &[b, a], &p).unwrap();
        assert_eq!(fwd[0], rev[1]);
        assert_eq!(fwd[1], rev[0]);
        let same =
            rollout_batch(&State::origin(), &vec![ControlSequence::zeros(4); 3], &p).unwrap();
        assert!(same.iter().all(|t| *t == same[0]));
    }

    #[test]
    fn frame_round_trip() {
        let frame = State::new(5.0, -2.0, 2.0);
        let s = State::new(1.0, 3.0, -1.0);
        let back = State::compose(&frame, &s.relative_to(&frame));
        assert_abs_diff_eq!(back.x, s.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, s.y, epsilon = 1e-12);
        assert_abs_diff_eq!(back.psi, s.psi, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn translation_equivariant(
            x in -50.0..50.0f64, y in -50.0..50.0f64, psi in -3.0..3.0f64,
            ex in -1.0..1.0f64, ey in -1.0..1.0f64, d in -0.5..0.5f64,
        ) {
            let p = params();
            let a = step(&State::new(x, y, psi), ControlInput::new(d), &p);
            let b = step(&State::new(x + ex, y + ey, psi), ControlInput::new(d), &p);
            prop_assert!(((b.x - a.x) - ex).abs() < 1e-9);
            prop_assert!(((b.y - a.y) - ey).abs() < 1e-9);
            prop_assert_eq!(a.psi, b.psi);
        }

        #[test]
        fn heading_stays_wrapped(psi in -std::f64::consts::PI..std::f64::consts::PI, n in 1usize..200, left in any::<bool>()) {
            let p = params();
            let d = if left { p.delta_max } else { -p.delta_max };
            let mut s = State::new(0.0, 0.0, psi);
            for _ in 0..n {
                s = step(&s, ControlInput::new(d), &p);
                prop_assert!(s.psi.abs() <= PI);
            }
        }

        #[test]
        fn batch_is_map_of_rollout(
            seqs in prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 6), 1..6),
            x in -5.0..5.0f64, psi in -3.0..3.0f64,
        ) {
            let p = params();
            let s0 = State::new(x, 0.0, psi);
            let batch: Vec<_> = seqs.into_iter().map(ControlSequence::from_deltas).collect();
            let out = rollout_batch(&s0, &batch, &p).unwrap();
            for (seq, traj) in batch.iter().zip(&out) {
                prop_assert_eq!(traj, &rollout(&s0, seq, &p));
                let folded = seq.inputs.iter().scan(s0, |s, &u| { *s = step(s, u, &p); Some(*s) });
                prop_assert!(folded.eq(traj.states[1..].iter().copied()));
            }
        }
    }
}
