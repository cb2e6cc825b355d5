//! Checkpoint container: a magic line, one line of JSON header, then the
//! value, first moment and second moment of every parameter as
//! little-endian f64, parameter by parameter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::KTo1Model;
use super::spec::KTo1Spec;
use super::train::{RngState, TrainConfig, Trainer};
use crate::autodiff::{Adam, NdArray, Parameter};
use crate::decomposition::DecompositionMethod;
use crate::error::{Error, Result};

const MAGIC: &str = "DINSEG-CHECKPOINT 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: KTo1Spec,
    pub spec_hash: String,
    pub method: DecompositionMethod,
    pub iteration: u64,
    pub rng: RngState,
    pub adam: Adam,
    pub shapes: Vec<Vec<usize>>,
    /// Adam step count per parameter.
    pub steps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<Parameter>,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer) -> Self {
        let params = t.model.parameters().to_vec();
        Self {
            header: CheckpointHeader {
                spec: t.model.spec().clone(),
                spec_hash: t.model.spec().hash(),
                method: t.method,
                iteration: t.iteration(),
                rng: t.rng_state(),
                adam: t.adam,
                shapes: params.iter().map(|p| p.value.shape().to_vec()).collect(),
                steps: params.iter().map(|p| p.step).collect(),
            },
            params,
        }
    }

    pub fn model(&self) -> Result<KTo1Model> {
        KTo1Model::from_parameters(self.header.spec.clone(), self.params.clone())
    }

    /// A trainer positioned exactly where this checkpoint was taken.
    pub fn trainer(&self, config: TrainConfig) -> Result<Trainer> {
        Trainer::resume(
            self.model()?,
            self.header.adam,
            self.header.method,
            config,
            self.header.iteration,
            self.header.rng,
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        out.extend(serde_json::to_vec(&self.header)?);
        out.push(b'\n');
        for p in &self.params {
            for arr in [&p.value, &p.first_moment, &p.second_moment] {
                for v in arr.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let magic_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or("missing magic line")?;
        if &bytes[..magic_end] != MAGIC.as_bytes() {
            return Err("not a checkpoint file".into());
        }
        let rest = &bytes[magic_end + 1..];
        let header_end = rest.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
        let header: CheckpointHeader =
            serde_json::from_slice(&rest[..header_end]).map_err(|e| format!("header: {e}"))?;
        if header.spec.hash() != header.spec_hash {
            return Err("spec hash does not match the stored spec".into());
        }
        if header.steps.len() != header.shapes.len() {
            return Err("header lists different numbers of shapes and steps".into());
        }
        let mut blob = &rest[header_end + 1..];
        let needed: usize = header.shapes.iter().map(|s| 3 * 8 * s.iter().product::<usize>()).sum();
        if blob.len() != needed {
            return Err(format!("parameter blob has {} bytes, header implies {needed}", blob.len()));
        }
        let mut take = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            let (head, tail) = blob.split_at(8 * n);
            blob = tail;
            let data = head
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            NdArray::new(shape.to_vec(), data).map_err(|e| e.to_string())
        };
        let mut params = Vec::with_capacity(header.shapes.len());
        for (shape, &step) in header.shapes.iter().zip(&header.steps) {
            let value = take(shape)?;
            let first_moment = take(shape)?;
            let second_moment = take(shape)?;
            params.push(Parameter {
                grad: NdArray::zeros(shape),
                value,
                first_moment,
                second_moment,
                step,
            });
        }
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_correlated_classes;

    fn trainer() -> Trainer {
        let spec = KTo1Spec::for_method(&DecompositionMethod::Class, 2, 2, 1, 2, true).unwrap();
        let cfg = TrainConfig {
            window: Some(vec![8, 8]),
            batch: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        Trainer::new(KTo1Model::build(spec, 1).unwrap(), DecompositionMethod::Class, cfg).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let data = synth_correlated_classes(2, &[24, 24], 0).unwrap();
        let mut t = trainer();
        t.run_until(&data, 2, |_, _| Ok(())).unwrap();
        let c = Checkpoint::from_trainer(&t);
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.header.iteration, 2);
    }

    #[test]
    fn resume_matches_straight_run() {
        let data = synth_correlated_classes(2, &[24, 24], 0).unwrap();
        let mut straight = trainer();
        straight.run_until(&data, 4, |_, _| Ok(())).unwrap();

        let mut first = trainer();
        first.run_until(&data, 2, |_, _| Ok(())).unwrap();
        let bytes = Checkpoint::from_trainer(&first).to_bytes().unwrap();
        let mut resumed = Checkpoint::from_bytes(&bytes).unwrap().trainer(first.config.clone()).unwrap();
        resumed.run_until(&data, 4, |_, _| Ok(())).unwrap();
        assert_eq!(resumed.model, straight.model);
        assert_eq!(resumed.rng_state(), straight.rng_state());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let c = Checkpoint::from_trainer(&trainer());
        let mut bytes = c.to_bytes().unwrap();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).unwrap_err().contains("blob"));
        assert!(Checkpoint::from_bytes(b"hello\n{}\n").is_err());
    }
}
