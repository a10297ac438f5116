//! Shift-invariant measures with exact cylinder probabilities.

pub mod chain;
pub mod gibbs;
pub mod linalg;
pub mod markov;
pub mod spec;
pub mod validate;

use sha2::{Digest, Sha256};

pub use chain::ErgodicChain;
pub use gibbs::{compile_block_gibbs, BlockGibbsModel, GibbsConstants};
pub use linalg::stationary_distribution;
pub use markov::{BernoulliModel, MarkovModel};
pub use spec::ModelSpec;
pub use validate::{validate_measure, validate_model, ValidationCheck, ValidationReport};

use crate::error::{Error, Result};
use crate::shift::Alphabet;

/// Finite convex combination of ergodic models over one alphabet; invariant
/// but not ergodic.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<MeasureModel>,
    log_weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<MeasureModel>) -> Result<Self> {
        let bad = |invariant: &'static str, detail: String| Err(Error::InvalidModel { invariant, detail });
        if components.len() < 2 || weights.len() != components.len() {
            return bad(
                "mixture_shape",
                format!("{} weights for {} components; need at least 2", weights.len(), components.len()),
            );
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return bad("weight_positivity", format!("weight {w}"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > markov::ROW_SUM_TOL {
            return bad("normalization", format!("weights sum to {s}"));
        }
        if components.iter().any(|c| c.chain().is_none()) {
            return bad("ergodic_components", "components must be Bernoulli, Markov or block Gibbs".into());
        }
        let alphabet = components[0].alphabet();
        if components.iter().any(|c| c.alphabet() != alphabet) {
            return bad("common_alphabet", "components use different alphabets".into());
        }
        for i in 0..components.len() {
            for j in 0..i {
                if !measures_differ(&components[i], &components[j], 4) {
                    return bad("distinct_components", format!("components {j} and {i} agree on all cylinders up to depth 4"));
                }
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(MixtureModel { weights, components, log_weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[MeasureModel] {
        &self.components
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
}

fn measures_differ(a: &MeasureModel, b: &MeasureModel, depth: usize) -> bool {
    let alphabet = a.alphabet();
    (1..=depth).any(|m| {
        alphabet
            .words(m)
            .map(|mut ws| ws.any(|w| (a.cylinder_measure(w.symbols()) - b.cylinder_measure(w.symbols())).abs() > 1e-12))
            .unwrap_or(false)
    })
}

/// The single source of cylinder probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureModel {
    Bernoulli(BernoulliModel),
    Markov(MarkovModel),
    BlockGibbs(BlockGibbsModel),
    Mixture(MixtureModel),
}

impl MeasureModel {
    pub fn bernoulli(p: Vec<f64>) -> Result<Self> {
        BernoulliModel::new(p).map(MeasureModel::Bernoulli)
    }

    pub fn markov(p: Vec<Vec<f64>>) -> Result<Self> {
        MarkovModel::new(p).map(MeasureModel::Markov)
    }

    /// Block Gibbs model from a potential table indexed by cylinder index.
    pub fn block_gibbs(k: usize, r: usize, phi: Vec<f64>) -> Result<Self> {
        compile_block_gibbs(Alphabet::new(k)?, r, phi).map(MeasureModel::BlockGibbs)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<MeasureModel>) -> Result<Self> {
        MixtureModel::new(weights, components).map(MeasureModel::Mixture)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeasureModel::Bernoulli(_) => "bernoulli",
            MeasureModel::Markov(_) => "markov",
            MeasureModel::BlockGibbs(_) => "block_gibbs",
            MeasureModel::Mixture(_) => "mixture",
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            MeasureModel::Mixture(m) => m.components[0].alphabet(),
            other => other.chain().expect("ergodic model").alphabet(),
        }
    }

    /// Finite-memory chain view of an ergodic model; `None` for mixtures.
    pub fn chain(&self) -> Option<&ErgodicChain> {
        match self {
            MeasureModel::Bernoulli(b) => Some(b.chain()),
            MeasureModel::Markov(m) => m.chain(),
            MeasureModel::BlockGibbs(g) => Some(g.chain()),
            MeasureModel::Mixture(_) => None,
        }
    }

    /// Chain view or [`Error::MixtureUnsupported`].
    pub fn ergodic_chain(&self) -> Result<&ErgodicChain> {
        self.chain().ok_or(Error::MixtureUnsupported)
    }

    pub fn is_ergodic(&self) -> bool {
        self.chain().is_some()
    }

    /// Exact `mu[w]`; the empty word has measure 1.
    pub fn cylinder_measure(&self, w: &[u8]) -> f64 {
        match self {
            MeasureModel::Mixture(m) => m
                .weights
                .iter()
                .zip(&m.components)
                .map(|(wt, c)| wt * c.cylinder_measure(w))
                .sum(),
            other => other.chain().expect("ergodic model").cylinder_measure(w),
        }
    }

    /// `log mu[w]`, `-inf` exactly when `mu[w] = 0`.
    pub fn log_cylinder_measure(&self, w: &[u8]) -> f64 {
        match self {
            MeasureModel::Mixture(m) => {
                let terms: Vec<f64> = m
                    .log_weights
                    .iter()
                    .zip(&m.components)
                    .map(|(lw, c)| lw + c.log_cylinder_measure(w))
                    .collect();
                log_sum_exp(&terms)
            }
            other => other.chain().expect("ergodic model").log_cylinder_measure(w),
        }
    }

    /// Measure of the two-sided cylinder `[w]` anchored at `start_index`
    /// under the invariant extension; independent of the anchor.
    pub fn two_sided_cylinder_measure(&self, w: &[u8], _start_index: i64) -> f64 {
        self.cylinder_measure(w)
    }

    /// Gibbs constants of the model viewed as the Gibbs measure of a
    /// locally constant potential (`log p_{x_0}`, `log p_{x_0 x_1}` or the
    /// supplied table).
    pub fn gibbs_constants(&self) -> Result<GibbsConstants> {
        match self {
            MeasureModel::Bernoulli(_) => Ok(GibbsConstants { lower: 1.0, upper: 1.0, var_sum: 0.0, pressure: 0.0 }),
            MeasureModel::Markov(m) => {
                let phi = m.transition().iter().flatten().map(|p| p.ln()).collect();
                let k = m.transition().len();
                Ok(compile_block_gibbs(Alphabet::new(k)?, 2, phi)?.constants())
            }
            MeasureModel::BlockGibbs(g) => Ok(g.constants()),
            MeasureModel::Mixture(_) => Err(Error::MixtureUnsupported),
        }
    }

    /// Every cylinder has positive measure.
    pub fn fully_supported(&self) -> bool {
        match self {
            MeasureModel::Bernoulli(_) => true,
            MeasureModel::Markov(m) => m.transition().iter().flatten().all(|&p| p > 0.0),
            MeasureModel::BlockGibbs(g) => g.fully_supported(),
            MeasureModel::Mixture(m) => m.components.iter().any(|c| c.fully_supported()),
        }
    }

    /// Short content hash of the model parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn hash_into(&self, h: &mut Sha256) {
        h.update(self.kind().as_bytes());
        let mut put = |xs: &[f64]| {
            h.update((xs.len() as u64).to_le_bytes());
            for x in xs {
                h.update(x.to_bits().to_le_bytes());
            }
        };
        match self {
            MeasureModel::Bernoulli(b) => put(b.probabilities()),
            MeasureModel::Markov(m) => m.transition().iter().for_each(|row| put(row)),
            MeasureModel::BlockGibbs(g) => {
                put(&[g.range() as f64]);
                put(g.phi());
            }
            MeasureModel::Mixture(m) => {
                put(&m.weights);
                for c in &m.components {
                    c.hash_into(h);
                }
            }
        }
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
