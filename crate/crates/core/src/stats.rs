//! Central limit behaviour of scenery hit counts, the Markov-chain
//! asymptotic variance and the uniform equivalence of minimeasures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::jacobian::{q_exact, state_values};
use crate::model::linalg::{invert, period};
use crate::model::MeasureModel;
use crate::sampling::{derive_seed, rng_from_seed, sample_future};
use crate::scenery::{minimeasure, scenery_counts, GeneratingSet};

/// `Q` closer than this to 0 or 1 is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;
pub const MIN_TRIALS: usize = 100;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 10_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub m: usize,
    pub base_seed: u64,
    pub q: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub sigma2_iid: f64,
    pub sigma2_chain: f64,
    /// `sigma2_chain / sigma2_iid - 1`.
    pub iid_deviation: f64,
    /// True when the i.i.d. variance `Q - Q^2` misdescribes the chain.
    pub iid_variance_mismatch: bool,
    pub ks_distance: f64,
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

impl CltReport {
    /// `|mean| <= mean_tol` and `|var / target - 1| <= rel_tol`.
    pub fn passes(&self, target_variance: f64, mean_tol: f64, rel_tol: f64) -> bool {
        self.sample_mean.abs() <= mean_tol && (self.sample_variance / target_variance - 1.0).abs() <= rel_tol
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub depth: usize,
    pub prefixes: usize,
    pub ratios: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub bound: f64,
    pub lower_constant: f64,
    pub upper_constant: f64,
    pub variation_sum: f64,
    pub passed: bool,
}

fn nondegenerate_q(model: &MeasureModel, u: &GeneratingSet) -> Result<f64> {
    let q = q_exact(model, u)?;
    if q < DEGENERACY_TOL || q > 1.0 - DEGENERACY_TOL {
        return Err(Error::DegenerateQ(q));
    }
    Ok(q)
}

fn hits(model: &MeasureModel, symbols: &[u8], u: &GeneratingSet, n: usize) -> Result<u64> {
    let mut total = 0;
    for (v, c) in scenery_counts(model, symbols, n, u.e.len())? {
        if u.contains(&v)? {
            total += c;
        }
    }
    Ok(total)
}

/// `N^{-1/2} #{0 <= n < N : mu_{x,n} in U} - N^{1/2} Q(U)`.
pub fn clt_statistic(model: &MeasureModel, symbols: &[u8], u: &GeneratingSet, n: usize) -> Result<f64> {
    let q = nondegenerate_q(model, u)?;
    let h = hits(model, symbols, u, n)?;
    let root = (n as f64).sqrt();
    Ok(h as f64 / root - root * q)
}

/// `M` independent trials of [`clt_statistic`] with trial seeds
/// `derive_seed(base_seed, i)`.
pub fn clt_ensemble(model: &MeasureModel, u: &GeneratingSet, n: usize, m: usize, base_seed: u64) -> Result<CltReport> {
    if m < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!("at least {MIN_TRIALS} trials are required, got {m}")));
    }
    let q = nondegenerate_q(model, u)?;
    let sigma2_chain = markov_asymptotic_variance(model, u)?;
    let statistics = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_future(model, n, derive_seed(base_seed, i))?;
            clt_statistic(model, t.future.symbols(), u, n)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = statistics.iter().sum::<f64>() / m as f64;
    let variance = statistics.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let sigma2_iid = q - q * q;
    let iid_deviation = sigma2_chain / sigma2_iid - 1.0;
    Ok(CltReport {
        n,
        m,
        base_seed,
        q,
        sample_mean: mean,
        sample_variance: variance,
        sigma2_iid,
        sigma2_chain,
        iid_deviation,
        iid_variance_mismatch: iid_deviation.abs() > 1e-9,
        ks_distance: ks_distance(&statistics, sigma2_chain),
        statistics,
    })
}

/// Kolmogorov-Smirnov distance between the sample and `N(0, variance)`.
pub fn ks_distance(sample: &[f64], variance: f64) -> f64 {
    if sample.is_empty() || !(variance > 0.0) {
        return f64::NAN;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Transition matrix of the context-block chain restricted to blocks of
/// positive mass, their masses, and the indicator of `U` on them.
fn block_problem(model: &MeasureModel, u: &GeneratingSet) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    if let MeasureModel::Mixture(_) = model {
        return Err(Error::MixtureUnsupported);
    }
    let chain = model.ergodic_chain()?;
    let full = chain.block_matrix();
    let keep: Vec<usize> = (0..chain.n_blocks()).filter(|&b| chain.stationary()[b] > 0.0).collect();
    let p = keep.iter().map(|&i| keep.iter().map(|&j| full[i][j]).collect()).collect();
    let pi = keep.iter().map(|&b| chain.stationary()[b]).collect();
    let f = state_values(model, u.e.symbols())?
        .into_iter()
        .map(|(_, v)| if u.contains_value(v) { 1.0 } else { 0.0 })
        .collect();
    Ok((p, pi, f))
}

/// Asymptotic variance of `N^{-1/2} sum f(X_n)` for the stationary chain.
pub fn markov_asymptotic_variance(model: &MeasureModel, u: &GeneratingSet) -> Result<f64> {
    let (p, pi, f) = block_problem(model, u)?;
    asymptotic_variance(&p, &pi, &f)
}

fn centered(pi: &[f64], f: &[f64]) -> Vec<f64> {
    let mean: f64 = pi.iter().zip(f).map(|(a, b)| a * b).sum();
    f.iter().map(|x| x - mean).collect()
}

fn check_aperiodic(p: &[Vec<f64>]) -> Result<()> {
    match period(p.len(), |i, j| p[i][j] > 0.0) {
        1 => Ok(()),
        d => Err(Error::Periodic(d)),
    }
}

/// `pi(fbar (2 Z fbar - fbar))` with the fundamental matrix
/// `Z = (I - P + 1 pi)^{-1}` and `fbar = f - pi(f)`.
pub fn asymptotic_variance(p: &[Vec<f64>], pi: &[f64], f: &[f64]) -> Result<f64> {
    let n = p.len();
    if pi.len() != n || f.len() != n {
        return Err(Error::LengthMismatch { left: n, right: pi.len().min(f.len()) });
    }
    check_aperiodic(p)?;
    let a = DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 - p[i][j] + pi[j]);
    let z = invert(a).ok_or(Error::Singular)?;
    let fbar = DVector::from_vec(centered(pi, f));
    let zf = &z * &fbar;
    let var = (0..n).map(|i| pi[i] * fbar[i] * (2.0 * zf[i] - fbar[i])).sum::<f64>();
    Ok(var.max(0.0))
}

/// `Var_pi(f) + 2 sum_{t>=1} Cov(f(X_0), f(X_t))`, truncated once a
/// covariance term falls below `1e-14`.
pub fn asymptotic_variance_series(p: &[Vec<f64>], pi: &[f64], f: &[f64]) -> Result<f64> {
    check_aperiodic(p)?;
    let n = p.len();
    let fbar = centered(pi, f);
    let mut var: f64 = (0..n).map(|i| pi[i] * fbar[i] * fbar[i]).sum();
    // h_t = P^t fbar.
    let mut h = fbar.clone();
    for _ in 0..SERIES_MAX_TERMS {
        let next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[i][j] * h[j]).sum()).collect();
        h = next;
        let cov: f64 = (0..n).map(|i| pi[i] * fbar[i] * h[i]).sum();
        var += 2.0 * cov;
        if cov.abs() < SERIES_TOL && h.iter().all(|x| x.abs() < SERIES_TOL.sqrt()) {
            return Ok(var.max(0.0));
        }
    }
    Err(Error::NoConvergence { iterations: SERIES_MAX_TERMS, change: f64::NAN })
}

/// Extreme ratios `nu[w] / mu[w]` over minimeasures `nu` at the prefixes and
/// all words of length `1..=depth`, checked against the bound `C`.
pub fn gibbs_equivalence_audit(model: &MeasureModel, prefixes: &[Vec<u8>], depth: usize) -> Result<EquivalenceReport> {
    if let MeasureModel::Mixture(_) = model {
        return Err(Error::MixtureUnsupported);
    }
    if !model.fully_supported() {
        return Err(Error::NotFullySupported(model.kind().into()));
    }
    let constants = model.gibbs_constants()?;
    let bound = constants.equivalence_bound();
    let mu = minimeasure(model, &[], depth)?;
    let mu_levels: Vec<_> = (1..=depth).map(|l| mu.marginal(l)).collect::<Result<_>>()?;
    let (mut lo, mut hi, mut count) = (f64::INFINITY, 0.0f64, 0usize);
    for prefix in prefixes {
        let nu = minimeasure(model, prefix, depth)?;
        for (l, mu_l) in (1..=depth).zip(&mu_levels) {
            let nu_l = nu.marginal(l)?;
            for (a, b) in nu_l.probs().iter().zip(mu_l.probs()) {
                let r = a / b;
                lo = lo.min(r);
                hi = hi.max(r);
                count += 1;
            }
        }
    }
    let slack = 1e-12;
    let passed = count > 0 && lo * bound >= 1.0 - slack && hi <= bound * (1.0 + slack);
    Ok(EquivalenceReport {
        depth,
        prefixes: prefixes.len(),
        ratios: count,
        min_ratio: lo,
        max_ratio: hi,
        bound,
        lower_constant: constants.lower,
        upper_constant: constants.upper,
        variation_sum: constants.var_sum,
        passed,
    })
}

/// `count` uniform random words over the model's alphabet with lengths in
/// `min_len..=max_len`.
pub fn random_prefixes(model: &MeasureModel, count: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<Vec<u8>> {
    let k = model.alphabet().size();
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            (0..len).map(|_| rng.random_range(0..k) as u8).collect()
        })
        .collect()
}
