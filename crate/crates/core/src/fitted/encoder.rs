use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// One indicator per value.
    OneHot,
    /// The value itself as one real feature.
    Scalar,
}

/// Maps a state index to a real feature vector, variable by variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncoderSpec", into = "EncoderSpec")]
pub struct FeatureEncoder {
    states: StateSpace,
    encodings: Vec<Encoding>,
    offsets: Vec<usize>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct EncoderSpec {
    states: StateSpace,
    encodings: Vec<Encoding>,
}

impl TryFrom<EncoderSpec> for FeatureEncoder {
    type Error = Error;
    fn try_from(spec: EncoderSpec) -> Result<Self> {
        FeatureEncoder::new(spec.states, spec.encodings)
    }
}

impl From<FeatureEncoder> for EncoderSpec {
    fn from(e: FeatureEncoder) -> Self {
        EncoderSpec { states: e.states, encodings: e.encodings }
    }
}

impl FeatureEncoder {
    pub fn new(states: StateSpace, encodings: Vec<Encoding>) -> Result<Self> {
        if encodings.len() != states.variables().len() {
            return Err(Error::config(format!(
                "{} encodings for {} state variables",
                encodings.len(),
                states.variables().len()
            )));
        }
        let mut offsets = Vec::with_capacity(encodings.len());
        let mut dim = 0;
        for (v, enc) in states.variables().iter().zip(&encodings) {
            offsets.push(dim);
            dim += match enc {
                Encoding::OneHot => v.cardinality,
                Encoding::Scalar => 1,
            };
        }
        Ok(FeatureEncoder { states, encodings, offsets, dim })
    }

    pub fn scalar(states: &StateSpace) -> Self {
        let n = states.variables().len();
        FeatureEncoder::new(states.clone(), vec![Encoding::Scalar; n]).expect("one encoding per variable")
    }

    /// `dest` and `pass` one-hot, `x` and `y` as scalars: 4 + 5 + 1 + 1 = 11
    /// features on the standard grid.
    pub fn taxi(states: &StateSpace) -> Result<Self> {
        let encodings = states
            .variables()
            .iter()
            .map(|v| match v.name.as_str() {
                "dest" | "pass" => Ok(Encoding::OneHot),
                "x" | "y" => Ok(Encoding::Scalar),
                other => Err(Error::config(format!("not a Taxi state variable: `{other}`"))),
            })
            .collect::<Result<_>>()?;
        FeatureEncoder::new(states.clone(), encodings)
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn encodings(&self) -> &[Encoding] {
        &self.encodings
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode_into(&self, s: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        out.fill(0.0);
        for (var, (&enc, &off)) in self.encodings.iter().zip(&self.offsets).enumerate() {
            let value = self.states.digit(s, var);
            match enc {
                Encoding::OneHot => out[off + value] = 1.0,
                Encoding::Scalar => out[off] = value as f64,
            }
        }
    }

    pub fn encode(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.encode_into(s, &mut out);
        out
    }

    /// Encoded vectors of every state, in index order.
    pub fn table(&self) -> Vec<Vec<f64>> {
        (0..self.states.len()).map(|s| self.encode(s)).collect()
    }
}
