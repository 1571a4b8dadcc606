use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::noise::derive_seed;

/// Zero-mean Gaussian action noise with per-episode exponential decay.
///
/// Each draw is a pure function of `(seed, step_index)`, so rollouts do not
/// depend on how many draws happened before.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationNoise {
    /// σ at episode 0, in action units.
    pub sigma0: f64,
    pub decay: f64,
    pub enabled: bool,
    pub seed: u64,
}

impl ExplorationNoise {
    pub fn sigma(&self, episode: usize) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        self.sigma0 * self.decay.powi(episode.min(i32::MAX as usize) as i32)
    }

    pub fn sample(&self, step_index: u64, episode: usize, dim: usize) -> Vec<f64> {
        let sigma = self.sigma(episode);
        if sigma == 0.0 {
            return vec![0.0; dim];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[step_index]));
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect()
    }
}
