//! JSON model files.
//!
//! The on-disk schema mirrors the in-memory model but only for the named
//! catalog ingredients: custom callables have no serial form. Unknown fields
//! are rejected so typos surface as parse errors rather than silent defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    CouplingKind, CouplingSpec, EnsembleModel, FlowKind, FreeFlow, JumpRule, ThresholdKind,
    ThresholdSpec,
};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub flow: FlowFile,
    pub coupling: CouplingFile,
    pub thresholds: ThresholdFile,
    pub jump: JumpFile,
    /// Present when the model was generated from a seed (random ensemble).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", content = "params", deny_unknown_fields, rename_all = "snake_case")]
pub enum FlowFile {
    Quadratic { c: f64 },
    Leaky { s: f64, gamma: f64 },
    PiecewiseLinear,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", content = "params", deny_unknown_fields, rename_all = "snake_case")]
pub enum CouplingFile {
    None,
    CrossPair { beta: f64 },
    LinearSelf { offset: Vec<f64>, slope: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", content = "params", deny_unknown_fields, rename_all = "snake_case")]
pub enum ThresholdFile {
    Zero,
    ConstantOffsets { offsets: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JumpFile {
    pub variant: JumpVariant,
    pub epsilon: f64,
    pub epsilon_i: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bar_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum JumpVariant {
    Standard,
    BarEpsilon,
    Pairwise,
}

impl ModelFile {
    pub fn from_model(model: &EnsembleModel) -> Result<Self> {
        let flow = match model.flow.kind {
            FlowKind::Quadratic { c } => FlowFile::Quadratic { c },
            FlowKind::Leaky { s, gamma } => FlowFile::Leaky { s, gamma },
            FlowKind::PiecewiseLinear => FlowFile::PiecewiseLinear,
            FlowKind::Custom(_) => {
                return Err(Error::Config("custom flows cannot be serialized".into()))
            }
        };
        let coupling = match &model.coupling.kind {
            CouplingKind::None => CouplingFile::None,
            CouplingKind::CrossPair { beta } => CouplingFile::CrossPair { beta: *beta },
            CouplingKind::LinearSelf { offset, slope } => {
                CouplingFile::LinearSelf { offset: offset.clone(), slope: slope.clone() }
            }
            CouplingKind::Custom(_) => {
                return Err(Error::Config("custom couplings cannot be serialized".into()))
            }
        };
        let thresholds = match &model.thresholds.kind {
            ThresholdKind::Zero => ThresholdFile::Zero,
            ThresholdKind::ConstantOffsets(c) => {
                ThresholdFile::ConstantOffsets { offsets: c.clone() }
            }
            ThresholdKind::Custom(_) => {
                return Err(Error::Config("custom thresholds cannot be serialized".into()))
            }
        };
        let jump = match &model.jump {
            JumpRule::Standard { epsilon, epsilon_i } => JumpFile {
                variant: JumpVariant::Standard,
                epsilon: *epsilon,
                epsilon_i: epsilon_i.clone(),
                bar_epsilon: None,
                pairwise: None,
            },
            JumpRule::BarEpsilon { epsilon, bar_epsilon, epsilon_i } => JumpFile {
                variant: JumpVariant::BarEpsilon,
                epsilon: *epsilon,
                epsilon_i: epsilon_i.clone(),
                bar_epsilon: Some(*bar_epsilon),
                pairwise: None,
            },
            JumpRule::Pairwise { epsilon, matrix } => JumpFile {
                variant: JumpVariant::Pairwise,
                epsilon: *epsilon,
                epsilon_i: vec![0.0; model.n],
                bar_epsilon: None,
                pairwise: Some(matrix.clone()),
            },
        };
        Ok(ModelFile { n: model.n, flow, coupling, thresholds, jump, seed: None })
    }

    pub fn to_model(&self) -> Result<EnsembleModel> {
        let n = self.n;
        let max_xi = match &self.thresholds {
            ThresholdFile::Zero => 0.0,
            ThresholdFile::ConstantOffsets { offsets } => {
                if offsets.len() != n {
                    return Err(Error::Config("thresholds.offsets must have length n".into()));
                }
                offsets.iter().fold(0.0f64, |m, c| m.max(c.abs()))
            }
        };
        let domain_upper = 1.0 + max_xi;

        let flow = match self.flow {
            FlowFile::Quadratic { c } => {
                FreeFlow::quadratic(c)?;
                FreeFlow::quadratic_on(c, domain_upper)
            }
            FlowFile::Leaky { s, gamma } => {
                FreeFlow::leaky(s, gamma)?;
                FreeFlow::leaky_on(s, gamma, domain_upper)
            }
            FlowFile::PiecewiseLinear => FreeFlow::piecewise_linear(),
        };
        let coupling = match &self.coupling {
            CouplingFile::None => CouplingSpec::none(n),
            CouplingFile::CrossPair { beta } => {
                if n != 2 {
                    return Err(Error::Config("cross_pair coupling requires n = 2".into()));
                }
                CouplingSpec::cross_pair(*beta, domain_upper)
            }
            CouplingFile::LinearSelf { offset, slope } => {
                if offset.len() != n || slope.len() != n {
                    return Err(Error::Config("linear_self vectors must have length n".into()));
                }
                CouplingSpec::linear_self(offset.clone(), slope.clone(), domain_upper)
            }
        };
        let thresholds = match &self.thresholds {
            ThresholdFile::Zero => ThresholdSpec::zero(n),
            ThresholdFile::ConstantOffsets { offsets } => {
                ThresholdSpec::constant_offsets(offsets.clone())
            }
        };
        if self.jump.epsilon_i.len() != n {
            return Err(Error::Config("jump.epsilon_i must have length n".into()));
        }
        let jump = match self.jump.variant {
            JumpVariant::Standard => JumpRule::Standard {
                epsilon: self.jump.epsilon,
                epsilon_i: self.jump.epsilon_i.clone(),
            },
            JumpVariant::BarEpsilon => JumpRule::BarEpsilon {
                epsilon: self.jump.epsilon,
                bar_epsilon: self
                    .jump
                    .bar_epsilon
                    .ok_or_else(|| Error::Config("bar_epsilon variant needs bar_epsilon".into()))?,
                epsilon_i: self.jump.epsilon_i.clone(),
            },
            JumpVariant::Pairwise => JumpRule::Pairwise {
                epsilon: self.jump.epsilon,
                matrix: self
                    .jump
                    .pairwise
                    .clone()
                    .ok_or_else(|| Error::Config("pairwise variant needs a matrix".into()))?,
            },
        };
        EnsembleModel::new(n, flow, coupling, thresholds, jump)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Stable content hash of the canonical (compact) JSON form.
    pub fn hash(&self) -> Result<String> {
        let canon = serde_json::to_string(self)?;
        let digest = Sha256::digest(canon.as_bytes());
        Ok(format!("{digest:x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{peskin_pair, random_leaky_ensemble};

    #[test]
    fn round_trip_is_hash_equal() {
        let model = peskin_pair(2.0, 1.0, 0.2).unwrap();
        let file = ModelFile::from_model(&model).unwrap();
        let json = file.to_json().unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
        assert_eq!(file.hash().unwrap(), back.hash().unwrap());
        let rebuilt = back.to_model().unwrap();
        assert_eq!(rebuilt.flow_rhs(&[0.0, 0.0]), model.flow_rhs(&[0.0, 0.0]));
    }

    #[test]
    fn round_trip_random_ensemble() {
        let model = random_leaky_ensemble(10, 0.08, 7).unwrap();
        let mut file = ModelFile::from_model(&model).unwrap();
        file.seed = Some(7);
        let back: ModelFile = serde_json::from_str(&file.to_json().unwrap()).unwrap();
        assert_eq!(file, back);
        let rebuilt = back.to_model().unwrap();
        let x = vec![0.25; 10];
        assert_eq!(rebuilt.flow_rhs(&x), model.flow_rhs(&x));
        for i in 0..10 {
            assert_eq!(rebuilt.threshold_value(i, &x), model.threshold_value(i, &x));
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"n": 2, "bogus": 1,
            "flow": {"kind": "leaky", "params": {"s": 2.0, "gamma": 1.0}},
            "coupling": {"kind": "none"},
            "thresholds": {"kind": "zero"},
            "jump": {"variant": "standard", "epsilon": 0.2, "epsilon_i": [0.0, 0.0]}}"#;
        assert!(serde_json::from_str::<ModelFile>(json).is_err());
    }

    #[test]
    fn invalid_parameters_rejected_on_build() {
        let json = r#"{"n": 2,
            "flow": {"kind": "leaky", "params": {"s": 0.9, "gamma": 1.0}},
            "coupling": {"kind": "none"},
            "thresholds": {"kind": "zero"},
            "jump": {"variant": "standard", "epsilon": 0.2, "epsilon_i": [0.0, 0.0]}}"#;
        let file: ModelFile = serde_json::from_str(json).unwrap();
        assert!(file.to_model().is_err());
    }
}
