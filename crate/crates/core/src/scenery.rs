//! Minimeasures, scenery distributions and generating sets.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{log_sum_exp, ErgodicChain, MeasureModel};
use crate::shift::{index_unchecked, Alphabet, Word};

/// Atoms closer than this in sup norm are treated as one.
pub const MERGE_TOL: f64 = 1e-12;
pub const DEFAULT_DEPTH: usize = 3;

/// Masses `nu[e]` of every cylinder of one depth, in cylinder-index order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderVector {
    depth: usize,
    k: usize,
    probs: Vec<f64>,
}

impl CylinderVector {
    pub fn new(alphabet: Alphabet, depth: usize, probs: Vec<f64>) -> Result<Self> {
        let want = alphabet.cylinder_count(depth)?;
        if probs.len() != want {
            return Err(Error::LengthMismatch { left: probs.len(), right: want });
        }
        if let Some(x) = probs.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative cylinder mass {x}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("cylinder masses sum to {s}")));
        }
        Ok(CylinderVector { depth, k: alphabet.size(), probs })
    }

    pub(crate) fn from_raw(k: usize, depth: usize, probs: Vec<f64>) -> Self {
        CylinderVector { depth, k, probs }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.k).expect("validated at construction")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `nu[e]` for `|e| <= depth`, summing over completions of shorter words.
    pub fn prob(&self, e: &[u8]) -> Result<f64> {
        if e.len() > self.depth {
            return Err(Error::WordTooDeep { word: e.len(), depth: self.depth });
        }
        self.alphabet().check(e)?;
        let span = self.k.pow((self.depth - e.len()) as u32);
        let start = index_unchecked(self.k, e) * span;
        Ok(self.probs[start..start + span].iter().sum())
    }

    /// The induced vector at a smaller depth.
    pub fn marginal(&self, depth: usize) -> Result<CylinderVector> {
        if depth > self.depth {
            return Err(Error::WordTooDeep { word: depth, depth: self.depth });
        }
        let span = self.k.pow((self.depth - depth) as u32);
        let probs = self.probs.chunks(span).map(|c| c.iter().sum()).collect();
        Ok(CylinderVector { depth, k: self.k, probs })
    }

    pub fn sup_diff(&self, other: &CylinderVector) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of nonnegativity and normalization.
    pub fn invariant_residual(&self) -> f64 {
        let neg = self.probs.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max);
        let sum = (self.probs.iter().sum::<f64>() - 1.0).abs();
        neg.max(sum)
    }

    fn lex_cmp(&self, other: &CylinderVector) -> Ordering {
        for (a, b) in self.probs.iter().zip(&other.probs) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// The open set `{nu : a < nu[e] < b}`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratingSet {
    pub e: Word,
    pub a: f64,
    pub b: f64,
}

impl GeneratingSet {
    pub fn new(e: Word, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(GeneratingSet { e, a, b })
    }

    pub fn contains_value(&self, v: f64) -> bool {
        self.a < v && v < self.b
    }

    pub fn contains(&self, nu: &CylinderVector) -> Result<bool> {
        Ok(self.contains_value(nu.prob(self.e.symbols())?))
    }

    /// Distance from `v` to the nearer endpoint.
    pub fn boundary_gap(&self, v: f64) -> f64 {
        (v - self.a).abs().min((v - self.b).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub vector: CylinderVector,
    pub weight: f64,
}

/// A finitely supported distribution on measures, as cylinder vectors of a
/// common depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    depth: usize,
    atoms: Vec<Atom>,
}

impl EmpiricalDistribution {
    /// Merges near-identical atoms and sorts them into canonical order.
    pub fn from_weighted(atoms: Vec<(CylinderVector, f64)>) -> Result<Self> {
        let depth = atoms.first().ok_or_else(|| Error::InvalidArgument("no atoms".into()))?.0.depth;
        if let Some((v, _)) = atoms.iter().find(|(v, _)| v.depth != depth) {
            return Err(Error::DepthMismatch(depth, v.depth));
        }
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(format!("atom weight {w}")));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("atom weights sum to {total}")));
        }
        let merged = merge_atoms(atoms.into_iter().map(|(v, w)| (v, Weight::Real(w))).collect());
        Ok(EmpiricalDistribution {
            depth,
            atoms: merged.into_iter().map(|(vector, w)| Atom { vector, weight: w.real() }).collect(),
        })
    }

    /// Counts over `total` observations; weights are `count / total` after merging.
    pub fn from_counts(groups: Vec<(CylinderVector, u64)>) -> Result<Self> {
        let total: u64 = groups.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        let depth = groups[0].0.depth;
        let merged = merge_atoms(groups.into_iter().map(|(v, c)| (v, Weight::Count(c))).collect());
        Ok(EmpiricalDistribution {
            depth,
            atoms: merged
                .into_iter()
                .map(|(vector, w)| Atom { vector, weight: w.count() as f64 / total as f64 })
                .collect(),
        })
    }

    pub fn dirac(v: CylinderVector) -> Self {
        EmpiricalDistribution { depth: v.depth, atoms: vec![Atom { vector: v, weight: 1.0 }] }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Rows `depth,weight,p_0,..,p_{k^m-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let width = self.atoms.first().map_or(0, |a| a.vector.probs.len());
        let mut header = vec!["depth".to_string(), "weight".to_string()];
        header.extend((0..width).map(|i| format!("p{i}")));
        let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
        w.write_record(&header).map_err(io)?;
        for a in &self.atoms {
            let mut row = vec![self.depth.to_string(), format!("{}", a.weight)];
            row.extend(a.vector.probs.iter().map(|p| format!("{p}")));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

#[derive(Clone, Copy)]
enum Weight {
    Real(f64),
    Count(u64),
}

impl Weight {
    fn add(&mut self, other: Weight) {
        match (self, other) {
            (Weight::Real(a), Weight::Real(b)) => *a += b,
            (Weight::Count(a), Weight::Count(b)) => *a += b,
            _ => unreachable!("mixed weight kinds"),
        }
    }

    fn real(self) -> f64 {
        match self {
            Weight::Real(w) => w,
            Weight::Count(c) => c as f64,
        }
    }

    fn count(self) -> u64 {
        match self {
            Weight::Count(c) => c,
            Weight::Real(_) => unreachable!("real weight"),
        }
    }
}

/// Sorts lexicographically and folds every atom into the first earlier
/// leader within [`MERGE_TOL`]. Leaders are kept sorted by first coordinate,
/// so only those within the tolerance of it are compared.
fn merge_atoms(mut atoms: Vec<(CylinderVector, Weight)>) -> Vec<(CylinderVector, Weight)> {
    atoms.sort_by(|a, b| a.0.lex_cmp(&b.0));
    let mut leaders: Vec<(CylinderVector, Weight)> = Vec::new();
    for (v, w) in atoms {
        let first = v.probs[0];
        let hit = leaders
            .iter_mut()
            .rev()
            .take_while(|(l, _)| l.probs[0] >= first - MERGE_TOL)
            .find(|(l, _)| l.sup_diff(&v) <= MERGE_TOL);
        match hit {
            Some((_, lw)) => lw.add(w),
            None => leaders.push((v, w)),
        }
    }
    leaders
}

/// Exponentiates log masses and renormalizes.
fn normalized_from_logs(k: usize, depth: usize, logs: Vec<f64>) -> CylinderVector {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    CylinderVector::from_raw(k, depth, probs)
}

/// The minimeasure `nu[e] = mu[prefix e] / mu[prefix]` on all cylinders of
/// the given depth, computed from log masses.
pub fn minimeasure(model: &MeasureModel, prefix: &[u8], depth: usize) -> Result<CylinderVector> {
    let alphabet = model.alphabet();
    alphabet.check(prefix)?;
    let count = alphabet.cylinder_count(depth)?;
    let lp = model.log_cylinder_measure(prefix);
    if lp == f64::NEG_INFINITY {
        return Err(Error::ZeroMeasurePrefix);
    }
    let k = alphabet.size();
    let mut w = prefix.to_vec();
    w.resize(prefix.len() + depth, 0);
    let logs = (0..count)
        .map(|idx| {
            write_digits(k, idx, &mut w[prefix.len()..]);
            model.log_cylinder_measure(&w) - lp
        })
        .collect();
    Ok(normalized_from_logs(k, depth, logs))
}

fn write_digits(k: usize, mut idx: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (idx % k) as u8;
        idx /= k;
    }
}

/// The cylinder vector of the model itself.
pub fn measure_vector(model: &MeasureModel, depth: usize) -> Result<CylinderVector> {
    minimeasure(model, &[], depth)
}

/// Conditional vector of a chain at block `b`, renormalized.
fn chain_vector(chain: &ErgodicChain, block: usize, depth: usize) -> CylinderVector {
    let k = chain.alphabet().size();
    let mut probs = chain.conditional_vector(block, depth);
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    CylinderVector::from_raw(k, depth, probs)
}

/// Minimeasures along the first `n_steps` prefixes of `symbols`, grouped
/// into (vector, multiplicity) pairs. Chain models group by context block;
/// mixtures follow the posterior over components step by step.
pub fn scenery_counts(
    model: &MeasureModel,
    symbols: &[u8],
    n_steps: usize,
    depth: usize,
) -> Result<Vec<(CylinderVector, u64)>> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if symbols.len() < n_steps {
        return Err(Error::TrajectoryTooShort { have: symbols.len(), want: n_steps });
    }
    let alphabet = model.alphabet();
    alphabet.check(&symbols[..n_steps])?;
    alphabet.cylinder_count(depth)?;
    // Every prefix up to x_{N-2} must have positive measure.
    if model.log_cylinder_measure(&symbols[..n_steps - 1]) == f64::NEG_INFINITY {
        return Err(Error::ZeroMeasurePrefix);
    }
    match model {
        MeasureModel::Mixture(_) => mixture_counts(model, symbols, n_steps, depth),
        _ => {
            let chain = model.ergodic_chain()?;
            let d = chain.memory();
            let mut out = Vec::new();
            for n in 0..n_steps.min(d) {
                out.push((minimeasure(model, &symbols[..n], depth)?, 1));
            }
            if n_steps > d {
                let mut counts = vec![0u64; chain.n_blocks()];
                let mut block = chain.block_of(&symbols[..d]);
                counts[block] += 1;
                for &s in &symbols[d..n_steps - 1] {
                    block = chain.advance(block, s);
                    counts[block] += 1;
                }
                for (b, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        out.push((chain_vector(chain, b, depth), c));
                    }
                }
            }
            Ok(out)
        }
    }
}

fn mixture_counts(model: &MeasureModel, symbols: &[u8], n_steps: usize, depth: usize) -> Result<Vec<(CylinderVector, u64)>> {
    let MeasureModel::Mixture(mix) = model else { unreachable!() };
    let comps: Vec<&ErgodicChain> = mix.components().iter().map(|c| c.ergodic_chain()).collect::<Result<_>>()?;
    let k = model.alphabet().size();
    let mut log_post: Vec<f64> = mix.log_weights().to_vec();
    let mut blocks = vec![0usize; comps.len()];
    let mut out = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let norm = log_sum_exp(&log_post);
        let mut probs = vec![0.0; k.pow(depth as u32)];
        for (c, chain) in comps.iter().enumerate() {
            let w = (log_post[c] - norm).exp();
            if w == 0.0 {
                continue;
            }
            let v = if n >= chain.memory() {
                chain_vector(chain, blocks[c], depth)
            } else {
                minimeasure(&mix.components()[c], &symbols[..n], depth)?
            };
            probs.iter_mut().zip(&v.probs).for_each(|(p, q)| *p += w * q);
        }
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        out.push((CylinderVector::from_raw(k, depth, probs), 1));
        // Condition on x_n.
        let x = symbols[n];
        for (c, chain) in comps.iter().enumerate() {
            let d = chain.memory();
            if n >= d {
                log_post[c] += chain.log_conditional(blocks[c], x);
                blocks[c] = chain.advance(blocks[c], x);
            } else {
                // Still inside the initial block: use marginal ratios.
                let comp = &mix.components()[c];
                log_post[c] += comp.log_cylinder_measure(&symbols[..=n]) - comp.log_cylinder_measure(&symbols[..n]);
                if n + 1 == d {
                    blocks[c] = chain.block_of(&symbols[..d]);
                }
            }
        }
    }
    Ok(out)
}

/// The Nth scenery distribution at the trajectory: weight `1/N` on each of
/// the minimeasures for `n = 0..N-1`, near-duplicates merged.
pub fn scenery_distribution(model: &MeasureModel, symbols: &[u8], n_steps: usize, depth: usize) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::from_counts(scenery_counts(model, symbols, n_steps, depth)?)
}

/// Total weight of atoms inside the generating set.
pub fn evaluate_generating_set(d: &EmpiricalDistribution, u: &GeneratingSet) -> Result<f64> {
    if u.e.len() > d.depth {
        return Err(Error::WordTooDeep { word: u.e.len(), depth: d.depth });
    }
    let mut total = 0.0;
    for a in &d.atoms {
        if u.contains(&a.vector)? {
            total += a.weight;
        }
    }
    Ok(total)
}

/// `sum_b mu[b] delta_{mu_b}` over positive-measure context blocks (single
/// symbols when the model has no memory): the limit distribution of the
/// sceneries of an ergodic chain.
pub fn first_level_blowups(model: &MeasureModel, depth: usize) -> Result<EmpiricalDistribution> {
    let chain = model.ergodic_chain()?;
    let d = chain.memory();
    let mut atoms = Vec::new();
    if d == 0 {
        let v = chain_vector(chain, 0, depth);
        for i in 0..chain.alphabet().size() {
            let mass = chain.conditional(0, i);
            if mass > 0.0 {
                atoms.push((v.clone(), mass));
            }
        }
    } else {
        for (b, &mass) in chain.stationary().iter().enumerate() {
            if mass > 0.0 {
                atoms.push((chain_vector(chain, b, depth), mass));
            }
        }
    }
    EmpiricalDistribution::from_weighted(atoms)
}
