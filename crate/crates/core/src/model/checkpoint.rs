use std::collections::BTreeMap;
use std::path::Path;

use super::{count_parameters, Model, ModelSpec};
use crate::container::{AnyTensor, Container};
use crate::error::{FormatError, Result};
use crate::tensor::Scalar;
use crate::train::AdamState;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"R2UNCKPT";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainMeta {
    pub epoch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub meta: TrainMeta,
    pub adam: Option<AdamState<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut c = Container::new();
        c.header.extend(self.model.spec().to_kv());
        c.header.insert("meta.kind".into(), "checkpoint".into());
        c.header.insert("meta.epoch".into(), self.meta.epoch.to_string());
        c.header.insert("meta.seed".into(), self.meta.seed.to_string());
        for (_, p) in self.model.params.iter() {
            c.tensors.push((p.name.clone(), AnyTensor::from_tensor(&p.value)));
        }
        if let Some(adam) = &self.adam {
            c.header.insert("meta.adam_step".into(), adam.step.to_string());
            for ((_, p), m) in self.model.params.iter().zip(&adam.m) {
                c.tensors.push((format!("adam.m.{}", p.name), AnyTensor::from_tensor(m)));
            }
            for ((_, p), v) in self.model.params.iter().zip(&adam.v) {
                c.tensors.push((format!("adam.v.{}", p.name), AnyTensor::from_tensor(v)));
            }
        }
        c.encode(CHECKPOINT_MAGIC)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Container::decode(bytes, CHECKPOINT_MAGIC)?;
        let spec = ModelSpec::from_kv(&c.header).map_err(|e| FormatError::CorruptHeader(format!("model spec: {e}")))?;
        let meta = TrainMeta {
            epoch: header_num(&c.header, "meta.epoch")?.unwrap_or(0) as usize,
            seed: header_num(&c.header, "meta.seed")?.unwrap_or(0),
        };
        let adam_step = header_num(&c.header, "meta.adam_step")?;
        // Refuse before allocating anything the file cannot back.
        let declared = count_parameters(&spec)?.total * if adam_step.is_some() { 3 } else { 1 };
        let stored: usize = c.tensors.iter().map(|(_, t)| t.shape().iter().product::<usize>()).sum();
        if declared != stored {
            return Err(FormatError::SpecMismatch(format!(
                "model spec implies {declared} stored values, file has {stored}"
            ))
            .into());
        }
        let mut model = Model::<T>::build(spec, 0)?;
        let n = model.params.len();
        let expected = if adam_step.is_some() { 3 * n } else { n };
        if c.tensors.len() != expected {
            return Err(FormatError::SpecMismatch(format!(
                "model spec implies {expected} tensors, file has {}",
                c.tensors.len()
            ))
            .into());
        }

        let ids: Vec<_> = model.params.iter().map(|(id, p)| (id, p.name.clone(), p.value.shape().to_vec())).collect();
        let check = |i: usize, name: &str, shape: &[usize]| -> Result<AnyTensor, FormatError> {
            let (found, t) = &c.tensors[i];
            if found != name || t.shape() != shape {
                return Err(FormatError::SpecMismatch(format!(
                    "tensor {i}: expected `{name}` {shape:?}, found `{found}` {:?}",
                    t.shape()
                )));
            }
            Ok(t.clone())
        };
        for (i, (id, name, shape)) in ids.iter().enumerate() {
            let t = check(i, name, shape)?;
            model.params.set_value(*id, t.to_tensor())?;
        }
        let adam = match adam_step {
            None => None,
            Some(step) => {
                let mut m = Vec::with_capacity(n);
                let mut v = Vec::with_capacity(n);
                for (i, (_, name, shape)) in ids.iter().enumerate() {
                    m.push(check(n + i, &format!("adam.m.{name}"), shape)?.to_tensor());
                    v.push(check(2 * n + i, &format!("adam.v.{name}"), shape)?.to_tensor());
                }
                Some(AdamState { step, m, v })
            }
        };
        Ok(Self { model, meta, adam })
    }
}

fn header_num(header: &BTreeMap<String, String>, key: &str) -> Result<Option<u64>, FormatError> {
    header
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| FormatError::CorruptHeader(format!("{key} is not an integer: `{v}`")))
        })
        .transpose()
}

pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    model: &Model<T>,
    meta: &TrainMeta,
    adam: Option<&AdamState<T>>,
) -> Result<()> {
    let ck = Checkpoint {
        model: model.clone(),
        meta: meta.clone(),
        adam: adam.cloned(),
    };
    std::fs::write(path, ck.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
