use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ACTIONS: usize = 45;

/// Discrete steering angles, evenly spaced over `[-delta_max, delta_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    deltas: Vec<f64>,
}

impl ActionSet {
    pub fn uniform(delta_max: f64, n: usize) -> Self {
        assert!(n >= 1, "an action set needs at least one action");
        if n == 1 {
            return ActionSet { deltas: vec![0.0] };
        }
        let span = (n - 1) as f64;
        let deltas = (0..n)
            .map(|i| delta_max * (2.0 * i as f64 - span) / span)
            .collect();
        ActionSet { deltas }
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.deltas[i]
    }
}

/// Probability mass over an action set.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionPmf {
    probs: Vec<f64>,
}

impl ActionPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "pmf must be nonnegative and sum to 1 (sum = {sum})"
            )));
        }
        Ok(ActionPmf { probs })
    }

    pub fn uniform(n: usize) -> Self {
        ActionPmf {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Draws an index by inverting the cumulative distribution.
pub fn sample_action<R: Rng + ?Sized>(pmf: &ActionPmf, rng: &mut R) -> usize {
    sample_index(pmf.probs(), rng)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // rounding left the total just under u; fall back to the last supported index
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn action_set_shape() {
        let a = ActionSet::uniform(0.524, DEFAULT_ACTIONS);
        assert_eq!(a.len(), 45);
        assert!(a.deltas().windows(2).all(|w| w[0] < w[1]));
        for i in 0..45 {
            assert_eq!(a.get(i), -a.get(44 - i));
        }
        assert_eq!(a.get(22), 0.0);
        assert_eq!(a.get(0), -0.524);
        assert_eq!(a.get(44), 0.524);
    }

    #[test]
    fn pmf_validation() {
        assert!(ActionPmf::new(vec![0.5, 0.5]).is_ok());
        assert!(ActionPmf::new(vec![0.5, 0.6]).is_err());
        assert!(ActionPmf::new(vec![1.5, -0.5]).is_err());
        assert!(ActionPmf::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn degenerate_pmf_always_hits() {
        let mut probs = vec![0.0; 45];
        probs[7] = 1.0;
        let pmf = ActionPmf::new(probs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..10_000).all(|_| sample_action(&pmf, &mut rng) == 7));
    }

    #[test]
    fn uniform_frequencies_within_binomial_bound() {
        let pmf = ActionPmf::uniform(45);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mut counts = vec![0usize; 45];
        for _ in 0..n {
            counts[sample_action(&pmf, &mut rng)] += 1;
        }
        let p = 1.0 / 45.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            let f = c as f64 / n as f64;
            assert!(
                (f - p).abs() <= 3.0 * sigma,
                "frequency {f} outside 3 sigma"
            );
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let pmf = ActionPmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|_| sample_action(&pmf, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }
}
