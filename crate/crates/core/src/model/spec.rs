//! Model definition files.
//!
//! ```json
//! {"type": "bernoulli", "p": [0.7, 0.3]}
//! {"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]]}
//! {"type": "block_gibbs", "r": 2, "phi": [[0.0, 0.0], [0.0, null]]}
//! {"type": "mixture", "weights": [0.5, 0.5], "components": [ ... ]}
//! ```
//!
//! `phi` is either nested `r` levels deep or flat in cylinder-index order;
//! `null` (or the string `"-inf"`) forbids a word. A stationary vector in the
//! input is ignored and always recomputed.

use serde::de::IgnoredAny;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{BlockGibbsModel, MarkovModel, MeasureModel};
use crate::shift::Alphabet;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Bernoulli {
        p: Vec<f64>,
    },
    Markov {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pi: Option<IgnoredAnySer>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        require_aperiodic: bool,
    },
    BlockGibbs {
        r: usize,
        phi: Value,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        require_aperiodic: bool,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<ModelSpec>,
    },
}

/// Accepts and discards any value.
#[derive(Debug, Clone, Copy, Default)]
pub struct IgnoredAnySer;

impl<'de> Deserialize<'de> for IgnoredAnySer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        IgnoredAny::deserialize(d).map(|_| IgnoredAnySer)
    }
}

impl Serialize for IgnoredAnySer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_unit()
    }
}

fn potential_value(v: &Value) -> Result<f64> {
    match v {
        Value::Null => Ok(f64::NEG_INFINITY),
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::InvalidArgument(format!("bad number {n}"))),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        other => Err(Error::InvalidArgument(format!("potential entry {other} is not a number"))),
    }
}

fn flatten(v: &Value, depth: usize, k: usize, out: &mut Vec<f64>) -> Result<()> {
    if depth == 0 {
        out.push(potential_value(v)?);
        return Ok(());
    }
    match v {
        Value::Array(items) if items.len() == k => items.iter().try_for_each(|x| flatten(x, depth - 1, k, out)),
        _ => Err(Error::InvalidArgument(format!("phi must be nested {depth} more levels of length {k}"))),
    }
}

/// Potential table and alphabet size from a nested or flat JSON array.
pub fn parse_potential(r: usize, phi: &Value) -> Result<(usize, Vec<f64>)> {
    let items = phi
        .as_array()
        .ok_or_else(|| Error::InvalidArgument("phi must be an array".into()))?;
    if r == 0 {
        return Err(Error::InvalidArgument("range r must be positive".into()));
    }
    if items.first().is_some_and(|x| x.is_array()) {
        let k = items.len();
        let mut out = Vec::new();
        flatten(phi, r, k, &mut out)?;
        return Ok((k, out));
    }
    let len = items.len();
    let k = (len as f64).powf(1.0 / r as f64).round() as usize;
    if k < 2 || k.checked_pow(r as u32) != Some(len) {
        return Err(Error::InvalidArgument(format!("flat phi of length {len} is not k^{r}")));
    }
    let values = items.iter().map(potential_value).collect::<Result<Vec<_>>>()?;
    Ok((k, values))
}

impl ModelSpec {
    /// Parses a model definition from JSON text.
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Constructs the model, checking every invariant.
    pub fn build(&self) -> Result<MeasureModel> {
        match self {
            ModelSpec::Bernoulli { p } => MeasureModel::bernoulli(p.clone()),
            ModelSpec::Markov { p, require_aperiodic, .. } => {
                let m = if *require_aperiodic {
                    MarkovModel::new_aperiodic(p.clone())?
                } else {
                    MarkovModel::new(p.clone())?
                };
                Ok(MeasureModel::Markov(m))
            }
            ModelSpec::BlockGibbs { r, phi, require_aperiodic } => {
                let (k, table) = parse_potential(*r, phi)?;
                let g: BlockGibbsModel = crate::model::compile_block_gibbs(Alphabet::new(k)?, *r, table)?;
                if *require_aperiodic && g.compiled().period() != 1 {
                    return Err(Error::Periodic(g.compiled().period()));
                }
                Ok(MeasureModel::BlockGibbs(g))
            }
            ModelSpec::Mixture { weights, components } => {
                let built = components.iter().map(|c| c.build()).collect::<Result<Vec<_>>>()?;
                MeasureModel::mixture(weights.clone(), built)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let b = ModelSpec::from_json(r#"{"type": "bernoulli", "p": [0.7, 0.3]}"#).unwrap();
        assert_eq!(b.build().unwrap().kind(), "bernoulli");
        let m = ModelSpec::from_json(r#"{"type": "markov", "P": [[0.9, 0.1], [0.2, 0.8]], "pi": [0.5, 0.5]}"#).unwrap();
        let m = m.build().unwrap();
        // Supplied pi is ignored.
        assert!((m.cylinder_measure(&[0]) - 2.0 / 3.0).abs() < 1e-15);
        let g = ModelSpec::from_json(r#"{"type": "block_gibbs", "r": 2, "phi": [[0, 0], [0, null]]}"#).unwrap();
        assert_eq!(g.build().unwrap().cylinder_measure(&[1, 1]), 0.0);
        let mix = ModelSpec::from_json(
            r#"{"type": "mixture", "weights": [0.5, 0.5],
                "components": [{"type": "bernoulli", "p": [0.9, 0.1]}, {"type": "bernoulli", "p": [0.1, 0.9]}]}"#,
        )
        .unwrap();
        assert_eq!(mix.build().unwrap().kind(), "mixture");
    }

    #[test]
    fn flat_and_nested_potentials_agree() {
        let nested: Value = serde_json::from_str("[[[0,1],[2,3]],[[4,5],[6,7]]]").unwrap();
        let flat: Value = serde_json::from_str("[0,1,2,3,4,5,6,7]").unwrap();
        assert_eq!(parse_potential(3, &nested).unwrap(), parse_potential(3, &flat).unwrap());
        assert_eq!(parse_potential(3, &flat).unwrap().0, 2);
        let bad: Value = serde_json::from_str("[0,1,2]").unwrap();
        assert!(parse_potential(2, &bad).is_err());
    }

    #[test]
    fn schema_errors() {
        assert!(ModelSpec::from_json(r#"{"type": "markov"}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"type": "markov", "p": [[1]]}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"type": "poisson", "p": [1]}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"type": "bernoulli", "p": [0.5, 0.5], "q": 1}"#).is_err());
    }

    #[test]
    fn periodic_flag() {
        let text = r#"{"type": "markov", "P": [[0, 1], [1, 0]], "require_aperiodic": true}"#;
        assert_eq!(ModelSpec::from_json(text).unwrap().build().unwrap_err(), Error::Periodic(2));
    }
}
