use rand::Rng;

use super::bfim::BfimMap;
use crate::channels::CommChannel;
use crate::error::Result;
use crate::numerics::{sample_gaussian_matrix, SeededRng};

/// Randomised corner-point instance: a BFIM map plus a communication
/// channel sharing its transmit array.
#[derive(Debug, Clone)]
pub struct CrbScenario {
    pub map: BfimMap,
    pub comm: CommChannel,
    pub block_length: usize,
    pub power: f64,
    pub noise_s: f64,
}

/// Size ranges for [`CrbScenario::random`].
#[derive(Debug, Clone, Copy)]
pub struct ScenarioRanges {
    pub max_params: usize,
    pub max_antennas: usize,
    pub max_blocks: usize,
    pub prior_scale: f64,
    pub power: f64,
    pub noise_c: f64,
    pub noise_s: f64,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self { max_params: 4, max_antennas: 6, max_blocks: 2, prior_scale: 0.1, power: 10.0, noise_c: 1.0, noise_s: 1.0 }
    }
}

impl CrbScenario {
    /// `K`, `M`, the block counts and the receive array size are drawn
    /// uniformly; every draw comes from `rng` so the instance is reproducible.
    pub fn random(ranges: &ScenarioRanges, block_length: usize, rng: SeededRng) -> Result<Self> {
        let mut g = rng.rng();
        let k = g.random_range(1..=ranges.max_params);
        let m = g.random_range(1..=ranges.max_antennas);
        let r1 = g.random_range(0..=ranges.max_blocks);
        let r2 = g.random_range(usize::from(r1 == 0)..=ranges.max_blocks);
        let map = BfimMap::random(k, m, r1, r2, ranges.prior_scale, &mut g)?;
        let rows = g.random_range(1..=m);
        let comm = CommChannel::new(sample_gaussian_matrix(rows, m, 1.0, &mut g)?, ranges.noise_c)?;
        Ok(Self { map, comm, block_length, power: ranges.power, noise_s: ranges.noise_s })
    }
}
