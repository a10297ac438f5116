//! Finite-memory chains: the common form of every ergodic model.
//!
//! A chain of memory `d` is given by the stationary law of the first `d`
//! symbols and the conditional law of the next symbol given the previous `d`.
//! Bernoulli measures have `d = 0`, Markov measures `d = 1` and Gibbs
//! measures of a range-`r` locally constant potential `d = r - 1`.
//! Contexts ("blocks") are indexed by [`crate::shift::cylinder_index`].

use rand::Rng;

use crate::shift::{index_unchecked, Alphabet};

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicChain {
    alphabet: Alphabet,
    memory: usize,
    n_blocks: usize,
    stationary: Vec<f64>,
    cond: Vec<f64>,
    log_stationary: Vec<f64>,
    log_cond: Vec<f64>,
    cum_stationary: Vec<f64>,
    cum_cond: Vec<f64>,
    cum_reverse: Vec<f64>,
    reverse: Vec<f64>,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Index of the first cumulative entry exceeding `u`, skipping zero-mass slots.
fn draw(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("nonempty distribution");
    let target = u * total;
    match cum.iter().position(|&c| c > target) {
        Some(i) => i,
        // Rounding left `target` at the top: take the last slot with mass.
        None => {
            let mut i = cum.len() - 1;
            while i > 0 && cum[i] == cum[i - 1] {
                i -= 1;
            }
            i
        }
    }
}

impl ErgodicChain {
    /// `stationary` has `k^d` entries, `cond` is `k^d x k` row-major.
    pub(crate) fn new(alphabet: Alphabet, memory: usize, stationary: Vec<f64>, cond: Vec<f64>) -> Self {
        let k = alphabet.size();
        let n_blocks = stationary.len();
        debug_assert_eq!(n_blocks, k.pow(memory as u32));
        debug_assert_eq!(cond.len(), n_blocks * k);
        let mut chain = ErgodicChain {
            alphabet,
            memory,
            n_blocks,
            log_stationary: stationary.iter().map(|&x| ln(x)).collect(),
            log_cond: cond.iter().map(|&x| ln(x)).collect(),
            cum_stationary: cumulative(&stationary),
            cum_cond: cond.chunks(k).flat_map(cumulative).collect(),
            stationary,
            cond,
            cum_reverse: Vec::new(),
            reverse: Vec::new(),
        };
        // reverse[b][s] = mu[s b] / mu[b]: law of the symbol preceding block b.
        let mut reverse = vec![0.0; n_blocks * k];
        let mut ext = vec![0u8; memory + 1];
        for b in 0..n_blocks {
            let mb = chain.stationary[b];
            if mb <= 0.0 {
                continue;
            }
            chain.write_block(b, &mut ext[1..]);
            for s in 0..k {
                ext[0] = s as u8;
                reverse[b * k + s] = chain.cylinder_measure(&ext) / mb;
            }
        }
        chain.cum_reverse = reverse.chunks(k).flat_map(cumulative).collect();
        chain.reverse = reverse;
        chain
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of past symbols the next-symbol law depends on.
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Range of the associated locally constant potential, `memory + 1`.
    pub fn range(&self) -> usize {
        self.memory + 1
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Stationary mass of each length-`d` block.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `P(next = s | previous d symbols = block)`.
    pub fn conditional(&self, block: usize, s: usize) -> f64 {
        self.cond[block * self.alphabet.size() + s]
    }

    /// `P(preceding symbol = s | block)` under the time-reversed chain.
    pub fn reverse_conditional(&self, block: usize, s: usize) -> f64 {
        self.reverse[block * self.alphabet.size() + s]
    }

    /// Block reached from `block` after emitting `s`.
    pub fn advance(&self, block: usize, s: u8) -> usize {
        if self.memory == 0 {
            0
        } else {
            (block * self.alphabet.size() + s as usize) % self.n_blocks
        }
    }

    /// Block index of the last `d` symbols of `w` (`w.len() >= d`).
    pub fn block_of(&self, w: &[u8]) -> usize {
        index_unchecked(self.alphabet.size(), &w[w.len() - self.memory..])
    }

    pub(crate) fn write_block(&self, mut block: usize, out: &mut [u8]) {
        let k = self.alphabet.size();
        for slot in out.iter_mut().rev() {
            *slot = (block % k) as u8;
            block /= k;
        }
    }

    fn in_alphabet(&self, w: &[u8]) -> bool {
        w.iter().all(|&s| (s as usize) < self.alphabet.size())
    }

    /// Exact `mu[w]`.
    pub fn cylinder_measure(&self, w: &[u8]) -> f64 {
        if !self.in_alphabet(w) {
            return 0.0;
        }
        let k = self.alphabet.size();
        let d = self.memory;
        if w.len() < d {
            // Marginal of the block law over all completions of w.
            let span = k.pow((d - w.len()) as u32);
            let start = index_unchecked(k, w) * span;
            return self.stationary[start..start + span].iter().sum();
        }
        let mut block = index_unchecked(k, &w[..d]);
        let mut p = self.stationary[block];
        for &s in &w[d..] {
            if p == 0.0 {
                return 0.0;
            }
            p *= self.cond[block * k + s as usize];
            block = self.advance(block, s);
        }
        p
    }

    /// `log mu[w]` as a sum of logs, `-inf` off the support.
    pub fn log_cylinder_measure(&self, w: &[u8]) -> f64 {
        if !self.in_alphabet(w) {
            return f64::NEG_INFINITY;
        }
        let k = self.alphabet.size();
        let d = self.memory;
        if w.len() < d {
            return ln(self.cylinder_measure(w));
        }
        let mut block = index_unchecked(k, &w[..d]);
        let mut lp = self.log_stationary[block];
        for &s in &w[d..] {
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            lp += self.log_cond[block * k + s as usize];
            block = self.advance(block, s);
        }
        lp
    }

    /// `log P(s | block)`.
    pub fn log_conditional(&self, block: usize, s: u8) -> f64 {
        self.log_cond[block * self.alphabet.size() + s as usize]
    }

    /// Probabilities of all depth-`depth` cylinders given the last `d`
    /// symbols form `block`, i.e. the minimeasure at any prefix ending in it.
    pub fn conditional_vector(&self, block: usize, depth: usize) -> Vec<f64> {
        let k = self.alphabet.size();
        let mut probs = vec![1.0];
        let mut blocks = vec![block];
        for _ in 0..depth {
            let mut next_probs = Vec::with_capacity(probs.len() * k);
            let mut next_blocks = Vec::with_capacity(probs.len() * k);
            for (&p, &b) in probs.iter().zip(&blocks) {
                for s in 0..k {
                    next_probs.push(p * self.cond[b * k + s]);
                    next_blocks.push(self.advance(b, s as u8));
                }
            }
            probs = next_probs;
            blocks = next_blocks;
        }
        probs
    }

    /// Dense transition matrix of the block chain (`n_blocks x n_blocks`).
    pub fn block_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.alphabet.size();
        let mut m = vec![vec![0.0; self.n_blocks]; self.n_blocks];
        for (b, row) in m.iter_mut().enumerate() {
            for s in 0..k {
                row[self.advance(b, s as u8)] += self.cond[b * k + s];
            }
        }
        m
    }

    /// Forward sample `(x_0, .., x_{n-1})` from the stationary chain.
    pub fn sample_forward<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<u8> {
        let k = self.alphabet.size();
        let d = self.memory;
        let mut out = Vec::with_capacity(n.max(d));
        let mut block = draw(&self.cum_stationary, rng.random::<f64>());
        out.resize(d, 0);
        self.write_block(block, &mut out[..d]);
        while out.len() < n {
            let row = &self.cum_cond[block * k..(block + 1) * k];
            let s = draw(row, rng.random::<f64>()) as u8;
            out.push(s);
            block = self.advance(block, s);
        }
        out.truncate(n);
        out
    }

    /// Sample of the past `(x_{-n}, .., x_{-1})` in time order: the last `d`
    /// symbols come from the stationary block law, earlier symbols from the
    /// time-reversed kernel.
    pub fn sample_backward<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<u8> {
        let k = self.alphabet.size();
        let d = self.memory;
        let block = draw(&self.cum_stationary, rng.random::<f64>());
        let mut rev = vec![0u8; d];
        self.write_block(block, &mut rev);
        // `rev` holds x_{-1}, x_{-2}, ... (reverse time order).
        rev.reverse();
        let mut lead = block;
        while rev.len() < n {
            let row = &self.cum_reverse[lead * k..(lead + 1) * k];
            let s = draw(row, rng.random::<f64>()) as u8;
            rev.push(s);
            if d > 0 {
                // New leading block: s followed by the first d-1 symbols of the old one.
                let span = self.n_blocks / k;
                lead = s as usize * span + lead / k;
            }
        }
        rev.truncate(n);
        rev.reverse();
        rev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> ErgodicChain {
        let a = Alphabet::new(2).unwrap();
        ErgodicChain::new(a, 1, vec![2.0 / 3.0, 1.0 / 3.0], vec![0.9, 0.1, 0.2, 0.8])
    }

    #[test]
    fn draw_skips_zero_mass() {
        let cum = cumulative(&[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(draw(&cum, 0.0), 1);
        assert_eq!(draw(&cum, 0.49), 1);
        assert_eq!(draw(&cum, 0.5), 3);
        assert_eq!(draw(&cum, 1.0), 3);
    }

    #[test]
    fn reverse_rows_are_stochastic() {
        let c = two_state();
        for b in 0..2 {
            let s: f64 = (0..2).map(|s| c.reverse_conditional(b, s)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // pi_0 p_01 / pi_1 = (2/3)(0.1)/(1/3) = 0.2
        assert!((c.reverse_conditional(1, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn conditional_vector_is_row_products() {
        let c = two_state();
        let v = c.conditional_vector(0, 2);
        let expect = [0.81, 0.09, 0.02, 0.08];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn memory_two_marginals() {
        // Uniform block law over 4 blocks with uniform transitions.
        let a = Alphabet::new(2).unwrap();
        let c = ErgodicChain::new(a, 2, vec![0.25; 4], vec![0.5; 8]);
        assert!((c.cylinder_measure(&[1]) - 0.5).abs() < 1e-15);
        assert!((c.cylinder_measure(&[]) - 1.0).abs() < 1e-15);
        assert!((c.cylinder_measure(&[1, 0, 1]) - 0.125).abs() < 1e-15);
        assert_eq!(c.advance(3, 0), 2);
        assert_eq!(c.block_of(&[0, 1, 1, 0]), 2);
    }
}
