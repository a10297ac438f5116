use crate::error::{Error, Result};
use crate::model::chain::ErgodicChain;
use crate::model::linalg::{check_stochastic, is_irreducible, period, stationarity_residual, stationary_distribution};
use crate::shift::Alphabet;

/// Row sums must equal one to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// `pi P = pi` must hold to this tolerance.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Bernoulli measure `mu[w] = p_{w_0} .. p_{w_{n-1}}` with strictly positive `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliModel {
    p: Vec<f64>,
    chain: ErgodicChain,
}

impl BernoulliModel {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let alphabet = Alphabet::new(p.len())?;
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidModel {
                invariant: "strict_positivity",
                detail: format!("probability vector contains {x}"),
            });
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidModel {
                invariant: "normalization",
                detail: format!("probabilities sum to {s} (residual {:e})", (s - 1.0).abs()),
            });
        }
        let chain = ErgodicChain::new(alphabet, 0, vec![1.0], p.clone());
        Ok(BernoulliModel { p, chain })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn chain(&self) -> &ErgodicChain {
        &self.chain
    }
}

/// Markov measure `mu[w] = pi_{w_0} p_{w_0 w_1} .. p_{w_{n-2} w_{n-1}}` of an
/// irreducible row-stochastic matrix; `pi` is always solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
    period: usize,
    chain: Option<ErgodicChain>,
}

impl MarkovModel {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        Alphabet::new(p.len())?;
        check_stochastic(&p, ROW_SUM_TOL)?;
        let pi = stationary_distribution(&p)?;
        Self::from_parts(p, pi)
    }

    /// Like [`MarkovModel::new`], additionally rejecting periodic chains.
    pub fn new_aperiodic(p: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::new(p)?;
        match m.period {
            1 => Ok(m),
            d => Err(Error::Periodic(d)),
        }
    }

    /// Assembles a model from a matrix and a candidate stationary vector,
    /// checking every invariant.
    pub fn from_parts(p: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        let n = p.len();
        check_stochastic(&p, ROW_SUM_TOL)?;
        if pi.len() != n {
            return Err(Error::InvalidModel {
                invariant: "stationary_shape",
                detail: format!("pi has {} entries, expected {n}", pi.len()),
            });
        }
        if !is_irreducible(n, |i, j| p[i][j] > 0.0) {
            return Err(Error::Reducible);
        }
        if let Some(x) = pi.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::InvalidModel {
                invariant: "stationary_positivity",
                detail: format!("pi contains {x}"),
            });
        }
        let residual = stationarity_residual(&p, &pi);
        if residual > STATIONARY_TOL {
            return Err(Error::InvalidModel {
                invariant: "stationarity",
                detail: format!("|pi P - pi| = {residual:e}"),
            });
        }
        let period = period(n, |i, j| p[i][j] > 0.0);
        // Block chains compiled from potentials may exceed the symbol alphabet
        // limit; those carry no symbol-level view.
        let chain = Alphabet::new(n)
            .ok()
            .map(|a| ErgodicChain::new(a, 1, pi.clone(), p.iter().flatten().cloned().collect()));
        Ok(MarkovModel { p, pi, period, chain })
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Symbol-level view; present whenever the state count is a valid alphabet size.
    pub fn chain(&self) -> Option<&ErgodicChain> {
        self.chain.as_ref()
    }

    pub fn stationarity_residual(&self) -> f64 {
        stationarity_residual(&self.p, &self.pi)
    }
}
