//! Seeded trajectory sampling.
//!
//! Every trajectory owns a `ChaCha8Rng` seeded from a 64-bit seed; per-trial
//! seeds for ensembles come from [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MeasureModel;
use crate::shift::{PastWord, Word};

/// The generator used for every sampled stream.
pub type SceneryRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SceneryRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` in an ensemble with base seed `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub future: Word,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub past: Option<PastWord>,
    pub seed: u64,
    pub model_id: String,
    /// Mixture component the trajectory was drawn from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.future.len()
    }

    pub fn is_empty(&self) -> bool {
        self.future.is_empty()
    }

    /// True when every cylinder along the trajectory has positive measure.
    pub fn is_admissible(&self, model: &MeasureModel) -> bool {
        let target = match (self.component, model) {
            (Some(c), MeasureModel::Mixture(m)) => &m.components()[c],
            _ => model,
        };
        match &self.past {
            Some(p) => {
                let mut all = p.symbols().to_vec();
                all.extend_from_slice(self.future.symbols());
                target.log_cylinder_measure(&all) > f64::NEG_INFINITY
            }
            None => target.log_cylinder_measure(self.future.symbols()) > f64::NEG_INFINITY,
        }
    }
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Forward trajectory `(x_0, .., x_{n-1})`. Mixtures choose a component by
/// weight once and sample within it.
pub fn sample_future(model: &MeasureModel, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument("trajectory length must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let (symbols, component) = match model {
        MeasureModel::Mixture(m) => {
            let c = pick_weighted(&mut rng, m.weights());
            let chain = m.components()[c].ergodic_chain()?;
            (chain.sample_forward(&mut rng, n), Some(c))
        }
        other => (other.ergodic_chain()?.sample_forward(&mut rng, n), None),
    };
    Ok(Trajectory {
        future: Word::from_symbols(symbols),
        past: None,
        seed,
        model_id: model.fingerprint(),
        component,
    })
}

/// Past `(x_{-n}, .., x_{-1})` drawn through the time-reversed kernel.
pub fn sample_past(model: &MeasureModel, n: usize, seed: u64) -> Result<PastWord> {
    if n == 0 {
        return Err(Error::InvalidArgument("past length must be at least 1".into()));
    }
    let chain = model.ergodic_chain()?;
    let mut rng = rng_from_seed(seed);
    Ok(PastWord::from_symbols(chain.sample_backward(&mut rng, n)))
}
