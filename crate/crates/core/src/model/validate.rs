use serde::Serialize;

use crate::error::Error;
use crate::model::{MeasureModel, ModelSpec};

pub const CONSISTENCY_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Default word depth for the exhaustive checks.
pub const DEFAULT_DEPTH: usize = 6;
const MAX_WORDS: usize = 200_000;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub model: String,
    pub passed: bool,
    pub worst_residual: f64,
    pub depth: usize,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    fn from_checks(model: String, depth: usize, checks: Vec<ValidationCheck>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        let worst_residual = checks
            .iter()
            .map(|c| c.residual)
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max);
        ValidationReport { model, passed, worst_residual, depth, checks }
    }

    pub fn failed(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &str, residual: f64, tolerance: f64, detail: String) -> ValidationCheck {
    ValidationCheck { name: name.into(), passed: residual <= tolerance, residual, tolerance, detail }
}

/// Builds the model described by `spec` and validates it; construction
/// failures are reported as failed checks named after the violated invariant.
pub fn validate_model(spec: &ModelSpec) -> ValidationReport {
    match spec.build() {
        Ok(model) => validate_measure(&model, DEFAULT_DEPTH),
        Err(e) => {
            let (name, residual) = match &e {
                Error::InvalidModel { invariant, .. } => (*invariant, f64::INFINITY),
                Error::Reducible => ("irreducibility", f64::INFINITY),
                Error::Periodic(_) => ("aperiodicity", f64::INFINITY),
                Error::NoConvergence { .. } => ("perron_convergence", f64::INFINITY),
                Error::AlphabetSize(_) => ("alphabet_size", f64::INFINITY),
                _ => ("construction", f64::INFINITY),
            };
            let c = ValidationCheck {
                name: name.into(),
                passed: false,
                residual,
                tolerance: 0.0,
                detail: e.to_string(),
            };
            ValidationReport { model: spec_kind(spec).into(), passed: false, worst_residual: residual, depth: 0, checks: vec![c] }
        }
    }
}

fn spec_kind(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::Bernoulli { .. } => "bernoulli",
        ModelSpec::Markov { .. } => "markov",
        ModelSpec::BlockGibbs { .. } => "block_gibbs",
        ModelSpec::Mixture { .. } => "mixture",
    }
}

/// Type invariants plus Kolmogorov consistency, shift invariance and
/// normalization over all words up to `max_depth` (reduced for large
/// alphabets so that at most 200k words are enumerated).
pub fn validate_measure(model: &MeasureModel, max_depth: usize) -> ValidationReport {
    let alphabet = model.alphabet();
    let k = alphabet.size();
    let mut depth = max_depth;
    while depth > 1 && alphabet.cylinder_count(depth + 1).map_or(true, |c| c > MAX_WORDS) {
        depth -= 1;
    }
    let mut checks = type_checks(model);

    let mut kolmogorov = 0.0f64;
    let mut invariance = 0.0f64;
    let mut normalization = 0.0f64;
    let mut ext = Vec::with_capacity(depth + 1);
    for m in 0..=depth {
        let mut total = 0.0;
        for w in alphabet.words(m).expect("bounded depth") {
            let mu = model.cylinder_measure(w.symbols());
            total += mu;
            let mut right = 0.0;
            let mut left = 0.0;
            for s in 0..k as u8 {
                ext.clear();
                ext.extend_from_slice(w.symbols());
                ext.push(s);
                right += model.cylinder_measure(&ext);
                ext.clear();
                ext.push(s);
                ext.extend_from_slice(w.symbols());
                left += model.cylinder_measure(&ext);
            }
            kolmogorov = kolmogorov.max((right - mu).abs());
            invariance = invariance.max((left - mu).abs());
        }
        normalization = normalization.max((total - 1.0).abs());
    }
    checks.push(check(
        "kolmogorov_consistency",
        kolmogorov,
        CONSISTENCY_TOL,
        format!("max |sum_j mu[wj] - mu[w]| over |w| <= {depth}"),
    ));
    checks.push(check(
        "shift_invariance",
        invariance,
        CONSISTENCY_TOL,
        format!("max |sum_i mu[iw] - mu[w]| over |w| <= {depth}"),
    ));
    checks.push(check(
        "normalization",
        normalization,
        NORMALIZATION_TOL,
        format!("max |sum_(|w|=m) mu[w] - 1| over m <= {depth}"),
    ));
    ValidationReport::from_checks(model.kind().into(), depth, checks)
}

fn type_checks(model: &MeasureModel) -> Vec<ValidationCheck> {
    match model {
        MeasureModel::Bernoulli(b) => {
            let p = b.probabilities();
            let sum: f64 = p.iter().sum();
            let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
            vec![
                check("probability_sum", (sum - 1.0).abs(), 1e-12, format!("sum p = {sum}")),
                check("strict_positivity", if min > 0.0 { 0.0 } else { f64::INFINITY }, 0.0, format!("min p = {min}")),
            ]
        }
        MeasureModel::Markov(m) => markov_checks(m),
        MeasureModel::BlockGibbs(g) => {
            let mut out = markov_checks(g.compiled());
            let lambda_ok = g.lambda() > 0.0 && g.pressure() == g.lambda().ln();
            out.push(check(
                "pressure",
                if lambda_ok { 0.0 } else { f64::INFINITY },
                0.0,
                format!("lambda = {}, pressure = {}", g.lambda(), g.pressure()),
            ));
            let (lo, hi) = (g.gibbs_lower(), g.gibbs_upper());
            let ordered = lo > 0.0 && lo <= hi && hi.is_finite();
            out.push(check(
                "gibbs_constants",
                if ordered { 0.0 } else { f64::INFINITY },
                0.0,
                format!("lower = {lo}, upper = {hi}"),
            ));
            out
        }
        MeasureModel::Mixture(m) => {
            let sum: f64 = m.weights().iter().sum();
            let mut out = vec![check("weight_sum", (sum - 1.0).abs(), 1e-12, format!("sum weights = {sum}"))];
            for (i, c) in m.components().iter().enumerate() {
                for mut sub in type_checks(c) {
                    sub.name = format!("component_{i}.{}", sub.name);
                    out.push(sub);
                }
            }
            out
        }
    }
}

fn markov_checks(m: &crate::model::MarkovModel) -> Vec<ValidationCheck> {
    let row = m
        .transition()
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let min_pi = m.stationary().iter().cloned().fold(f64::INFINITY, f64::min);
    vec![
        check("row_sums", row, 1e-12, "max |row sum - 1|".into()),
        check("stationarity", m.stationarity_residual(), 1e-10, "max |pi P - pi|".into()),
        check(
            "stationary_positivity",
            if min_pi > 0.0 { 0.0 } else { f64::INFINITY },
            0.0,
            format!("min pi = {min_pi}"),
        ),
    ]
}
