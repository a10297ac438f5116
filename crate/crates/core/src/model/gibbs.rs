//! Gibbs measures of locally constant potentials.
//!
//! A range-`r` potential `phi` is a table over words of length `r`. Recoded
//! on the alphabet of `(r-1)`-blocks it becomes a matrix `L[b, b'] =
//! exp(phi(b s))` whenever `b'` is `b` shifted by `s`. With Perron data
//! `L rvec = lambda rvec`, `lvec L = lambda lvec`, the invariant Gibbs measure
//! is the block chain `p[b, b'] = L[b, b'] rvec[b'] / (lambda rvec[b])` with
//! stationary law proportional to `lvec * rvec`, and the pressure is
//! `log lambda`.

use crate::error::{Error, Result};
use crate::model::chain::ErgodicChain;
use crate::model::linalg::{is_irreducible, perron_vector};
use crate::model::markov::MarkovModel;
use crate::shift::Alphabet;

/// Largest block alphabet we compile to a dense matrix.
pub const MAX_BLOCKS: usize = 1024;

/// Constants of the Gibbs inequality
/// `lower <= mu[w] / exp(S_n phi(x) - n P(phi)) <= upper`, together with the
/// summed variations `var_1 + .. + var_{r-1}` of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConstants {
    pub lower: f64,
    pub upper: f64,
    pub var_sum: f64,
    pub pressure: f64,
}

impl GibbsConstants {
    /// Two-sided comparison constant between minimeasures and the measure:
    /// `max(upper / lower^2, upper^2 / lower) * exp(var_sum)`.
    pub fn equivalence_bound(&self) -> f64 {
        let up = self.upper / (self.lower * self.lower);
        let down = self.upper * self.upper / self.lower;
        up.max(down) * self.var_sum.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGibbsModel {
    alphabet: Alphabet,
    r: usize,
    phi: Vec<f64>,
    compiled: MarkovModel,
    right: Vec<f64>,
    lambda: f64,
    constants: GibbsConstants,
    chain: ErgodicChain,
}

impl BlockGibbsModel {
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn range(&self) -> usize {
        self.r
    }

    /// Potential values indexed by the cylinder index of the `r`-word.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Markov chain on `(r-1)`-blocks realizing the measure.
    pub fn compiled(&self) -> &MarkovModel {
        &self.compiled
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pressure(&self) -> f64 {
        self.constants.pressure
    }

    pub fn right_eigenvector(&self) -> &[f64] {
        &self.right
    }

    pub fn constants(&self) -> GibbsConstants {
        self.constants
    }

    pub fn gibbs_lower(&self) -> f64 {
        self.constants.lower
    }

    pub fn gibbs_upper(&self) -> f64 {
        self.constants.upper
    }

    pub fn var_sum(&self) -> f64 {
        self.constants.var_sum
    }

    pub fn chain(&self) -> &ErgodicChain {
        &self.chain
    }

    /// `true` when every `r`-word is admissible.
    pub fn fully_supported(&self) -> bool {
        self.phi.iter().all(|x| x.is_finite())
    }
}

/// Builds the invariant Gibbs measure of a range-`r` locally constant potential.
/// Entries of `phi` may be `-inf` to forbid words.
pub fn compile_block_gibbs(alphabet: Alphabet, r: usize, phi: Vec<f64>) -> Result<BlockGibbsModel> {
    let k = alphabet.size();
    if r < 2 {
        return Err(Error::InvalidModel { invariant: "range", detail: format!("r = {r}, need r >= 2") });
    }
    let d = r - 1;
    let n_blocks = alphabet.cylinder_count(d)?;
    if n_blocks > MAX_BLOCKS {
        return Err(Error::InvalidModel {
            invariant: "block_count",
            detail: format!("{n_blocks} blocks exceed {MAX_BLOCKS}"),
        });
    }
    if phi.len() != n_blocks * k {
        return Err(Error::InvalidModel {
            invariant: "potential_shape",
            detail: format!("phi has {} entries, expected {}", phi.len(), n_blocks * k),
        });
    }
    if let Some(x) = phi.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
        return Err(Error::InvalidModel { invariant: "potential_values", detail: format!("phi contains {x}") });
    }
    let weight: Vec<f64> = phi.iter().map(|x| x.exp()).collect();
    let next = |b: usize, s: usize| (b * k + s) % n_blocks;
    let edge = |b: usize, c: usize| (0..k).any(|s| next(b, s) == c && weight[b * k + s] > 0.0);
    if !is_irreducible(n_blocks, edge) {
        return Err(Error::Reducible);
    }

    let shift = (0..n_blocks)
        .map(|b| weight[b * k..(b + 1) * k].iter().sum::<f64>())
        .fold(0.0, f64::max);
    let apply = |v: &[f64], out: &mut [f64]| {
        for (b, o) in out.iter_mut().enumerate() {
            *o = (0..k).map(|s| weight[b * k + s] * v[next(b, s)]).sum();
        }
    };
    let apply_t = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for b in 0..n_blocks {
            for s in 0..k {
                out[next(b, s)] += v[b] * weight[b * k + s];
            }
        }
    };
    let right = perron_vector(n_blocks, shift, apply)?;
    let left = perron_vector(n_blocks, shift, apply_t)?;

    let mut lr = vec![0.0; n_blocks];
    apply(&right, &mut lr);
    let lambda = lr.iter().sum::<f64>() / right.iter().sum::<f64>();
    let residual = lr.iter().zip(&right).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
    if !(lambda > 0.0) || residual > 1e-10 * lambda {
        return Err(Error::NoConvergence { iterations: 0, change: residual });
    }

    let mut p = vec![vec![0.0; n_blocks]; n_blocks];
    let mut cond = vec![0.0; n_blocks * k];
    for b in 0..n_blocks {
        for s in 0..k {
            let c = next(b, s);
            cond[b * k + s] = weight[b * k + s] * right[c] / (lambda * right[b]);
        }
        let total: f64 = cond[b * k..(b + 1) * k].iter().sum();
        for s in 0..k {
            cond[b * k + s] /= total;
            p[b][next(b, s)] += cond[b * k + s];
        }
    }
    let mut pi: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l * r).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);

    let compiled = MarkovModel::from_parts(p, pi.clone())?;
    let chain = ErgodicChain::new(alphabet, d, pi, cond);
    let constants = GibbsConstants {
        lower: 0.0,
        upper: 0.0,
        var_sum: variation_sum(k, r, &phi),
        pressure: lambda.ln(),
    };
    let mut model = BlockGibbsModel { alphabet, r, phi, compiled, right, lambda, constants, chain };
    let (lower, upper) = gibbs_bounds(&model);
    model.constants.lower = lower;
    model.constants.upper = upper;
    Ok(model)
}

/// `var_1 + .. + var_{r-1}` over admissible `r`-words; `var_j = 0` for `j >= r`.
fn variation_sum(k: usize, r: usize, phi: &[f64]) -> f64 {
    (1..r)
        .map(|j| {
            // Words sharing their first j symbols occupy contiguous index runs.
            let group = k.pow((r - j) as u32);
            phi.chunks(group)
                .map(|g| {
                    let finite = g.iter().filter(|x| x.is_finite());
                    let hi = finite.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = finite.cloned().fold(f64::INFINITY, f64::min);
                    if hi >= lo {
                        hi - lo
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Extremes of `mu[w] / exp(S_n phi(x) - n P)` over all cylinders.
///
/// For `|w| >= r-1` the ratio equals
/// `pi[b0] (rvec[b_last] / rvec[b0]) lambda^(r-1) exp(-(tail sum))`, where the
/// tail sum collects the `r-1` potential terms reading past the end of `w`.
/// Shorter words are enumerated directly.
fn gibbs_bounds(model: &BlockGibbsModel) -> (f64, f64) {
    let k = model.alphabet.size();
    let d = model.r - 1;
    let n_blocks = model.right.len();
    let pi = model.compiled.stationary();
    let lambda = model.lambda;
    let phi = &model.phi;
    let next = |b: usize, s: usize| (b * k + s) % n_blocks;

    // Extremes of the tail sum over admissible continuations of each block.
    let mut tail_min = vec![f64::INFINITY; n_blocks];
    let mut tail_max = vec![f64::NEG_INFINITY; n_blocks];
    let continuations: Vec<_> = (0..k.pow(d as u32))
        .map(|c| crate::shift::cylinder_word(model.alphabet, c, d))
        .collect();
    for b in 0..n_blocks {
        for cont in &continuations {
            let mut block = b;
            let mut sum = 0.0;
            for &s in cont.symbols() {
                sum += phi[block * k + s as usize];
                block = next(block, s as usize);
            }
            if sum.is_finite() {
                tail_min[b] = tail_min[b].min(sum);
                tail_max[b] = tail_max[b].max(sum);
            }
        }
    }
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let lam = lambda.powi(d as i32);
    for b0 in (0..n_blocks).filter(|&b| pi[b] > 0.0) {
        for bl in (0..n_blocks).filter(|&b| tail_min[b].is_finite()) {
            let base = pi[b0] * model.right[bl] / model.right[b0] * lam;
            lower = lower.min(base * (-tail_max[bl]).exp());
            upper = upper.max(base * (-tail_min[bl]).exp());
        }
    }

    // Words shorter than a block: direct enumeration with d continuation symbols.
    let pressure = lambda.ln();
    for n in 1..d {
        let total = n + d;
        for idx in 0..k.pow(total as u32) {
            let x = crate::shift::cylinder_word(model.alphabet, idx, total);
            let x = x.symbols();
            let mu = model.chain.cylinder_measure(&x[..n]);
            if mu <= 0.0 {
                continue;
            }
            let birkhoff: f64 = (0..n)
                .map(|t| phi[crate::shift::index_unchecked(k, &x[t..t + d + 1])])
                .sum();
            if !birkhoff.is_finite() {
                continue;
            }
            let ratio = mu / (birkhoff - n as f64 * pressure).exp();
            lower = lower.min(ratio);
            upper = upper.max(ratio);
        }
    }
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::cylinder_word;

    fn a2() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn log_m_star() -> Vec<f64> {
        [0.9f64, 0.1, 0.2, 0.8].iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn zero_potential_is_uniform_bernoulli() {
        let g = compile_block_gibbs(a2(), 2, vec![0.0; 4]).unwrap();
        assert!((g.lambda() - 2.0).abs() < 1e-13);
        assert!((g.pressure() - 2f64.ln()).abs() < 1e-13);
        for row in g.compiled().transition() {
            for x in row {
                assert!((x - 0.5).abs() < 1e-13);
            }
        }
        assert!((g.gibbs_lower() - 1.0).abs() < 1e-12);
        assert!((g.gibbs_upper() - 1.0).abs() < 1e-12);
        assert_eq!(g.var_sum(), 0.0);
    }

    #[test]
    fn stochastic_log_potential_reproduces_chain() {
        let g = compile_block_gibbs(a2(), 2, log_m_star()).unwrap();
        assert!((g.lambda() - 1.0).abs() < 1e-13);
        assert!(g.pressure().abs() < 1e-13);
        let want = [[0.9, 0.1], [0.2, 0.8]];
        for (row, w) in g.compiled().transition().iter().zip(want) {
            for (x, y) in row.iter().zip(w) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        // var_1 = max over rows of log(max/min) = log 9.
        assert!((g.var_sum() - 9f64.ln()).abs() < 1e-12);
    }

    /// Exhaustive oracle: every word up to length 8 and every continuation
    /// satisfies the Gibbs inequality with the computed constants.
    fn check_gibbs_inequality(g: &BlockGibbsModel, max_len: usize) {
        let r = g.range();
        let k = g.alphabet().size();
        let pressure = g.pressure();
        let tol = 1e-10;
        for n in 1..=max_len {
            for idx in 0..k.pow((n + r - 1) as u32) {
                let x = cylinder_word(g.alphabet(), idx, n + r - 1);
                let x = x.symbols();
                let mu = g.chain().cylinder_measure(&x[..n]);
                let birk: f64 = (0..n)
                    .map(|t| g.phi()[crate::shift::index_unchecked(k, &x[t..t + r])])
                    .sum();
                if mu == 0.0 || !birk.is_finite() {
                    continue;
                }
                let ratio = mu / (birk - n as f64 * pressure).exp();
                assert!(ratio >= g.gibbs_lower() * (1.0 - tol), "n={n} x={x:?} ratio={ratio}");
                assert!(ratio <= g.gibbs_upper() * (1.0 + tol), "n={n} x={x:?} ratio={ratio}");
            }
        }
    }

    #[test]
    fn gibbs_inequality_holds_exhaustively() {
        check_gibbs_inequality(&compile_block_gibbs(a2(), 2, log_m_star()).unwrap(), 8);
        check_gibbs_inequality(&compile_block_gibbs(a2(), 2, vec![0.3, -1.2, 0.7, 0.1]).unwrap(), 8);
        let phi3 = vec![0.0, 0.5, -0.3, 0.8, 0.4, -0.6, 0.2, 0.1];
        check_gibbs_inequality(&compile_block_gibbs(a2(), 3, phi3).unwrap(), 7);
        let phi4: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect();
        check_gibbs_inequality(&compile_block_gibbs(a2(), 4, phi4).unwrap(), 6);
    }

    #[test]
    fn golden_mean_shift() {
        // Forbid "11": the entropy-maximizing chain on the golden mean shift.
        let phi = vec![0.0, 0.0, 0.0, f64::NEG_INFINITY];
        let g = compile_block_gibbs(a2(), 2, phi).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((g.lambda() - golden).abs() < 1e-12);
        assert_eq!(g.chain().cylinder_measure(&[1, 1]), 0.0);
        check_gibbs_inequality(&g, 8);
    }

    #[test]
    fn periodic_potential_is_accepted() {
        // Only alternating sequences are admissible: period 2.
        let phi = vec![f64::NEG_INFINITY, 0.0, 0.0, f64::NEG_INFINITY];
        let g = compile_block_gibbs(a2(), 2, phi).unwrap();
        assert!((g.lambda() - 1.0).abs() < 1e-12);
        assert!((g.chain().cylinder_measure(&[0, 1, 0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compile_block_gibbs(a2(), 1, vec![0.0; 2]).is_err());
        assert!(compile_block_gibbs(a2(), 2, vec![0.0; 3]).is_err());
        assert!(compile_block_gibbs(a2(), 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let reducible = vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
        assert_eq!(compile_block_gibbs(a2(), 2, reducible).unwrap_err(), Error::Reducible);
    }
}
