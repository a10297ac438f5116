//! Reverse Jacobians `g_n`, `g`, their products over a word, and the
//! probability `Q(U)` of a generating set.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ErgodicChain, MeasureModel};
use crate::sampling::{derive_seed, rng_from_seed, sample_past};
use crate::scenery::GeneratingSet;
use crate::shift::{PastWord, Word};

/// Minimum distance of interval endpoints from every attainable value.
pub const CONTINUITY_GAP: f64 = 1e-6;

/// A finite past `(x_{-n}, .., x_{-1})` under a model.
#[derive(Debug, Clone)]
pub struct PastContext<'a> {
    model: &'a MeasureModel,
    window: PastWord,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == f64::NEG_INFINITY || num == f64::NEG_INFINITY {
        0.0
    } else {
        (num - den).exp()
    }
}

impl<'a> PastContext<'a> {
    pub fn new(model: &'a MeasureModel, window: PastWord) -> Result<Self> {
        model.alphabet().check(window.symbols())?;
        Ok(PastContext { model, window })
    }

    pub fn window(&self) -> &PastWord {
        &self.window
    }

    fn symbols(&self) -> &[u8] {
        self.window.symbols()
    }

    /// `mu[x_{-n} .. x_{-1}] / mu[x_{-n} .. x_{-2}]` with `n` the window
    /// length, or 0 off the support.
    pub fn g_n(&self) -> Result<f64> {
        let w = self.symbols();
        if w.is_empty() {
            return Err(Error::EmptyWord);
        }
        Ok(ratio(self.model.log_cylinder_measure(w), self.model.log_cylinder_measure(&w[..w.len() - 1])))
    }

    /// The limit `g`, read off the last `r` symbols of the window.
    pub fn g_limit(&self) -> Result<f64> {
        let chain = self.chain()?;
        let w = self.symbols();
        if w.len() < chain.range() {
            return Err(Error::WindowTooShort { have: w.len(), need: chain.range() });
        }
        if self.model.log_cylinder_measure(w) == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok(limit_factor(chain, w))
    }

    /// `mu[x_{-n} .. x_{-1} e] / mu[x_{-n} .. x_{-1}]`, or 0 off the support.
    pub fn g_e_n(&self, e: &[u8]) -> Result<f64> {
        self.model.alphabet().check(e)?;
        let w = self.symbols();
        let mut we = w.to_vec();
        we.extend_from_slice(e);
        Ok(ratio(self.model.log_cylinder_measure(&we), self.model.log_cylinder_measure(w)))
    }

    /// `prod_{k=1}^m g_{n+k}` evaluated on the window spliced with the
    /// first `k` symbols of `e`.
    pub fn g_e_telescoped(&self, e: &[u8]) -> Result<f64> {
        self.model.alphabet().check(e)?;
        let mut spliced = self.symbols().to_vec();
        let mut prod = 1.0;
        for &s in e {
            spliced.push(s);
            let w = &spliced;
            prod *= ratio(self.model.log_cylinder_measure(w), self.model.log_cylinder_measure(&w[..w.len() - 1]));
        }
        Ok(prod)
    }

    /// `prod_{k=1}^m g(sigma^k(x^- e))`; needs at least `r - 1` past symbols.
    pub fn g_e_limit(&self, e: &[u8]) -> Result<f64> {
        let chain = self.chain()?;
        self.model.alphabet().check(e)?;
        let w = self.symbols();
        if w.len() < chain.memory() {
            return Err(Error::WindowTooShort { have: w.len(), need: chain.memory() });
        }
        if self.model.log_cylinder_measure(w) == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok(chain_g_e(chain, chain.block_of(w), e))
    }

    fn chain(&self) -> Result<&'a ErgodicChain> {
        match self.model {
            MeasureModel::Mixture(_) => Err(Error::MixtureUnsupported),
            m => m.ergodic_chain(),
        }
    }
}

/// `g` at a window with at least `r` symbols and positive measure.
fn limit_factor(chain: &ErgodicChain, w: &[u8]) -> f64 {
    let last = *w.last().expect("nonempty");
    let block = chain.block_of(&w[..w.len() - 1]);
    chain.conditional(block, last as usize)
}

/// Product of conditionals of `e` from context `block`.
fn chain_g_e(chain: &ErgodicChain, mut block: usize, e: &[u8]) -> f64 {
    let mut prod = 1.0;
    for &s in e {
        prod *= chain.conditional(block, s as usize);
        block = chain.advance(block, s);
    }
    prod
}

/// `(stationary mass, g^e value)` of every context block with positive mass.
pub fn state_values(model: &MeasureModel, e: &[u8]) -> Result<Vec<(f64, f64)>> {
    if let MeasureModel::Mixture(_) = model {
        return Err(Error::MixtureUnsupported);
    }
    let chain = model.ergodic_chain()?;
    model.alphabet().check(e)?;
    Ok(chain
        .stationary()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(b, &m)| (m, chain_g_e(chain, b, e)))
        .collect())
}

/// `Q(U)`: stationary mass of the context blocks whose `g^e` lies in `(a, b)`.
pub fn q_exact(model: &MeasureModel, u: &GeneratingSet) -> Result<f64> {
    Ok(state_values(model, u.e.symbols())?
        .into_iter()
        .filter(|&(_, v)| u.contains_value(v))
        .map(|(m, _)| m)
        .sum())
}

/// Errors unless every attainable `g^e` value is at least `gap` from both endpoints.
pub fn check_continuity(model: &MeasureModel, u: &GeneratingSet, gap: f64) -> Result<()> {
    for (_, v) in state_values(model, u.e.symbols())? {
        if u.boundary_gap(v) < gap {
            return Err(Error::InvalidArgument(format!(
                "generating set {} ({}, {}) has an endpoint within {gap:e} of the attainable value {v}",
                u.e, u.a, u.b
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Fraction of sampled pasts `y` with `g^e(y) in (a, b)`; sample `i` uses
/// seed `derive_seed(seed, i)`, so the result does not depend on the
/// thread count.
pub fn q_montecarlo(model: &MeasureModel, u: &GeneratingSet, samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    if let MeasureModel::Mixture(_) = model {
        return Err(Error::MixtureUnsupported);
    }
    let chain = model.ergodic_chain()?;
    let len = chain.range();
    let e = u.e.symbols();
    model.alphabet().check(e)?;
    let hits = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let past = sample_past(model, len, derive_seed(seed, i))?;
            let v = PastContext::new(model, past)?.g_e_limit(e)?;
            Ok(u.contains_value(v) as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate {
        estimate: p,
        standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        hits,
    })
}

/// `count` continuity-set generating sets with words of length `1..=max_depth`.
/// Endpoints sit inside gaps between attainable `g^e` values (or beyond
/// them), at least [`CONTINUITY_GAP`] away from each.
pub fn generating_battery(model: &MeasureModel, max_depth: usize, count: usize, seed: u64) -> Result<Vec<GeneratingSet>> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("battery depth must be at least 1".into()));
    }
    let k = model.alphabet().size();
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::InvalidArgument("could not build a continuity-set battery".into()));
        }
        let len = rng.random_range(1..=max_depth);
        let e: Vec<u8> = (0..len).map(|_| rng.random_range(0..k) as u8).collect();
        let mut values: Vec<f64> = state_values(model, &e)?.into_iter().map(|(_, v)| v).collect();
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() < 2.0 * CONTINUITY_GAP);
        // Candidate gaps between consecutive values, plus the two ends.
        let mut edges = vec![-0.5];
        edges.extend(values.iter().cloned());
        edges.push(1.5);
        let gaps: Vec<(f64, f64)> = edges
            .windows(2)
            .filter(|w| w[1] - w[0] > 4.0 * CONTINUITY_GAP)
            .map(|w| (w[0], w[1]))
            .collect();
        if gaps.len() < 2 {
            continue;
        }
        let i = rng.random_range(0..gaps.len() - 1);
        let j = rng.random_range(i + 1..gaps.len());
        let pick = |(lo, hi): (f64, f64), u: f64| {
            let lo = lo.max(-0.5);
            let hi = hi.min(1.5);
            lo + (0.25 + 0.5 * u) * (hi - lo)
        };
        let a = pick(gaps[i], rng.random());
        let b = pick(gaps[j], rng.random());
        let u = GeneratingSet::new(Word::from_symbols(e), a, b)?;
        check_continuity(model, &u, CONTINUITY_GAP)?;
        out.push(u);
    }
    Ok(out)
}
