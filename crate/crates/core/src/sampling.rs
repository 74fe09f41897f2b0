//! Deterministic point samplers over a chart box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart_metrics::{ChartBox, ChartPoint};
use crate::error::{GeomError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampler {
    /// `2^level + 1` nodes per axis, endpoints included; level `l` nodes are a subset of level `l+1`.
    Grid { level: u32 },
    /// Owen-scrambled Sobol points.
    Sobol { count: usize, seed: u32 },
    /// Uniform points from a seeded ChaCha stream.
    Random { count: usize, seed: u64 },
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::Sobol { count: 200, seed: 7 }
    }
}

impl Sampler {
    pub fn points(&self, bx: &ChartBox) -> Result<Vec<ChartPoint>> {
        let d = bx.dim();
        let unit: Vec<Vec<f64>> = match *self {
            Sampler::Grid { level } => {
                let m = (1usize << level) + 1;
                let total = m.pow(d as u32);
                (0..total)
                    .map(|mut k| {
                        (0..d)
                            .map(|_| {
                                let i = k % m;
                                k /= m;
                                i as f64 / (m - 1) as f64
                            })
                            .collect()
                    })
                    .collect()
            }
            Sampler::Sobol { count, seed } => (0..count)
                .map(|i| (0..d).map(|a| sobol_burley::sample(i as u32, a as u32, seed) as f64).collect())
                .collect(),
            Sampler::Random { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
            }
        };
        if unit.is_empty() {
            return Err(GeomError::EmptySampleSet);
        }
        Ok(unit.into_iter().map(|u| ChartPoint::from(bx.map_unit(&u))).collect())
    }

    /// The same family with roughly twice the points.
    pub fn refined(&self) -> Self {
        match *self {
            Sampler::Grid { level } => Sampler::Grid { level: level + 1 },
            Sampler::Sobol { count, seed } => Sampler::Sobol { count: 2 * count, seed },
            Sampler::Random { count, seed } => Sampler::Random { count: 2 * count, seed },
        }
    }
}

/// A box shrunk toward its centre by `frac` of each side; keeps samples off the closed boundary.
pub fn shrink(bx: &ChartBox, frac: f64) -> ChartBox {
    let lo = bx.lo.iter().zip(&bx.hi).map(|(l, h)| l + frac * (h - l)).collect();
    let hi = bx.lo.iter().zip(&bx.hi).map(|(l, h)| h - frac * (h - l)).collect();
    ChartBox::new(lo, hi)
}
